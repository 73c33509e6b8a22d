//! Iteration plans with Python-range membership semantics, plus the text
//! format used to save and load whole plan tables.

use crate::error::{Error, Result};
use std::fmt;

/// The iterations at which a registered task fires.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchedulePlan {
    /// Half-open `[start, stop)` stepped range: fires at `start`,
    /// `start + step`, ... while `< stop`.
    Range {
        start: usize,
        stop: usize,
        step: usize,
    },
    /// Explicit iteration set (stored sorted and deduplicated).
    Set(Vec<usize>),
    /// Exactly one iteration.
    Single(usize),
}

impl SchedulePlan {
    /// `range(stop)`: every iteration below `stop`.
    pub fn upto(stop: usize) -> Self {
        SchedulePlan::Range {
            start: 0,
            stop,
            step: 1,
        }
    }

    /// `range(start, stop, step)`; `step` must be at least 1.
    pub fn range(start: usize, stop: usize, step: usize) -> Result<Self> {
        if step == 0 {
            return Err(Error::Config("plan range step must be >= 1".into()));
        }
        Ok(SchedulePlan::Range { start, stop, step })
    }

    pub fn single(iteration: usize) -> Self {
        SchedulePlan::Single(iteration)
    }

    pub fn set(mut iterations: Vec<usize>) -> Self {
        iterations.sort_unstable();
        iterations.dedup();
        SchedulePlan::Set(iterations)
    }

    /// Membership test: O(1) for ranges and singles.
    pub fn contains(&self, iteration: usize) -> bool {
        match self {
            SchedulePlan::Range { start, stop, step } => {
                iteration >= *start && iteration < *stop && (iteration - start) % step == 0
            }
            SchedulePlan::Set(v) => v.binary_search(&iteration).is_ok(),
            SchedulePlan::Single(i) => iteration == *i,
        }
    }

    /// All firing iterations strictly below `total`.
    pub fn iterations_below(&self, total: usize) -> Vec<usize> {
        match self {
            SchedulePlan::Range { start, stop, step } => (*start..(*stop).min(total))
                .step_by(*step)
                .collect(),
            SchedulePlan::Set(v) => v.iter().copied().filter(|&i| i < total).collect(),
            SchedulePlan::Single(i) => {
                if *i < total {
                    vec![*i]
                } else {
                    Vec::new()
                }
            }
        }
    }
}

/// Which half of an iteration a task runs in: before the render or after
/// the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Pre,
    Post,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Pre => "pre",
            Stage::Post => "post",
        })
    }
}

/// One row of a plan table: a named task, its stage, and when it fires.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanLine {
    pub stage: Stage,
    pub name: String,
    pub plan: SchedulePlan,
}

impl PlanLine {
    pub fn new(stage: Stage, name: &str, plan: SchedulePlan) -> Self {
        PlanLine {
            stage,
            name: name.to_string(),
            plan,
        }
    }
}

/// Serialize plan lines to the text format: one task per line,
/// `stage name... start stop step` for ranges or `stage name... @i` for
/// single iterations. Explicit sets expand to one `@i` line per member.
pub fn plan_lines_to_string(lines: &[PlanLine]) -> String {
    let mut out = String::new();
    for l in lines {
        match &l.plan {
            SchedulePlan::Range { start, stop, step } => {
                out.push_str(&format!("{} {} {start} {stop} {step}\n", l.stage, l.name));
            }
            SchedulePlan::Single(i) => {
                out.push_str(&format!("{} {} @{i}\n", l.stage, l.name));
            }
            SchedulePlan::Set(v) => {
                for i in v {
                    out.push_str(&format!("{} {} @{i}\n", l.stage, l.name));
                }
            }
        }
    }
    out
}

/// Parse the plan text format. Blank lines and `#` comments are skipped.
pub fn parse_plan_lines(text: &str) -> Result<Vec<PlanLine>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: &str| Error::Config(format!("plan line {}: {msg}: {raw}", lineno + 1));
        let stage = match toks[0].to_ascii_lowercase().as_str() {
            "pre" => Stage::Pre,
            "post" => Stage::Post,
            other => return Err(err(&format!("unknown stage '{other}'"))),
        };
        let last = toks[toks.len() - 1];
        if let Some(it) = last.strip_prefix('@') {
            if toks.len() < 3 {
                return Err(err("expected: stage name @iteration"));
            }
            let i: usize = it
                .parse()
                .map_err(|_| err(&format!("bad iteration '{last}'")))?;
            out.push(PlanLine {
                stage,
                name: toks[1..toks.len() - 1].join(" "),
                plan: SchedulePlan::Single(i),
            });
        } else {
            if toks.len() < 5 {
                return Err(err("expected: stage name start stop step"));
            }
            let nums: Result<Vec<usize>> = toks[toks.len() - 3..]
                .iter()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| err(&format!("bad integer '{t}'")))
                })
                .collect();
            let nums = nums?;
            out.push(PlanLine {
                stage,
                name: toks[1..toks.len() - 3].join(" "),
                plan: SchedulePlan::range(nums[0], nums[1], nums[2])?,
            });
        }
    }
    Ok(out)
}
