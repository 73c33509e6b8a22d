//! Iteration schedules of well-known splat-training pipelines, written
//! against the plan engine. These are replication fixtures: tests assert
//! that registering each table and enumerating firings reproduces the
//! published range expressions exactly. Task bodies are not part of the
//! fixture — callers attach their own (or no-ops).

use super::plan::{PlanLine, SchedulePlan, Stage};

fn rng3(start: usize, stop: usize, step: usize) -> SchedulePlan {
    SchedulePlan::range(start, stop, step).expect("static plan")
}

/// The original splatting trainer: SH degree warm-up plus densify/prune
/// maintenance over the first half of training.
pub fn vanilla_3dgs() -> Vec<PlanLine> {
    vec![
        PlanLine::new(Stage::Pre, "update lr", SchedulePlan::upto(30000)),
        PlanLine::new(Stage::Pre, "increase SH degree", rng3(0, 30000, 1000)),
        PlanLine::new(
            Stage::Post,
            "collect gradient statistics",
            SchedulePlan::upto(15000),
        ),
        PlanLine::new(Stage::Post, "prune and densify", rng3(500, 15000, 100)),
        PlanLine::new(Stage::Post, "reset opacity", rng3(0, 15000, 3000)),
    ]
}

pub fn trimming_the_fat() -> Vec<PlanLine> {
    vec![
        PlanLine::new(Stage::Pre, "update lr", SchedulePlan::upto(30000)),
        PlanLine::new(Stage::Post, "gradient aware prune", rng3(100, 5000, 500)),
    ]
}

pub fn pup_3dgs() -> Vec<PlanLine> {
    vec![
        PlanLine::new(Stage::Pre, "update lr", SchedulePlan::upto(30000)),
        PlanLine::new(Stage::Post, "gradient aware prune", rng3(100, 5000, 500)),
    ]
}

pub fn speedy_splat() -> Vec<PlanLine> {
    let mut lines = vanilla_3dgs();
    lines.push(PlanLine::new(Stage::Post, "soft prune", rng3(6000, 15000, 3000)));
    lines.push(PlanLine::new(Stage::Post, "hard prune", rng3(15000, 30000, 3000)));
    lines
}

/// First stage of the two-stage prune/distill pipeline: a single prune.
pub fn lightgaussian_prune() -> Vec<PlanLine> {
    vec![PlanLine::new(Stage::Post, "prune", SchedulePlan::single(1))]
}

/// Second stage: one importance-scoring pass mid-distillation.
pub fn lightgaussian_distill() -> Vec<PlanLine> {
    vec![PlanLine::new(
        Stage::Post,
        "calculate importance score",
        SchedulePlan::single(5000),
    )]
}

pub fn mesongs() -> Vec<PlanLine> {
    vec![
        PlanLine::new(Stage::Pre, "update lr", SchedulePlan::upto(3000)),
        PlanLine::new(
            Stage::Pre,
            "calculate importance score",
            SchedulePlan::single(1),
        ),
        PlanLine::new(Stage::Pre, "create octree", SchedulePlan::single(1)),
    ]
}

pub fn c3dgs() -> Vec<PlanLine> {
    vec![
        PlanLine::new(Stage::Pre, "update lr", SchedulePlan::upto(30000)),
        PlanLine::new(Stage::Pre, "VQ compress", SchedulePlan::single(1)),
    ]
}

pub fn compact3dgs() -> Vec<PlanLine> {
    vec![
        PlanLine::new(Stage::Pre, "update lr", SchedulePlan::upto(30000)),
        PlanLine::new(Stage::Pre, "increase SH degree", rng3(0, 30000, 1000)),
        PlanLine::new(
            Stage::Pre,
            "switch to RVQ training",
            SchedulePlan::single(29000),
        ),
        PlanLine::new(
            Stage::Post,
            "collect gradient statistics",
            SchedulePlan::upto(15000),
        ),
        PlanLine::new(Stage::Post, "prune and densify", rng3(500, 15000, 100)),
        PlanLine::new(Stage::Post, "reset opacity", rng3(0, 15000, 3000)),
        PlanLine::new(Stage::Post, "mask prune", rng3(15000, 30000, 1000)),
    ]
}

pub fn hac() -> Vec<PlanLine> {
    vec![
        PlanLine::new(Stage::Pre, "update lr", SchedulePlan::upto(30000)),
        PlanLine::new(Stage::Pre, "update anchor bound", SchedulePlan::single(1)),
        PlanLine::new(
            Stage::Post,
            "collect gradient statistics",
            SchedulePlan::upto(15000),
        ),
        PlanLine::new(Stage::Post, "adjust anchor", rng3(1500, 3000, 100)),
        PlanLine::new(Stage::Post, "adjust anchor", rng3(4000, 15000, 100)),
        PlanLine::new(
            Stage::Post,
            "switch to quantized training",
            SchedulePlan::single(3000),
        ),
        PlanLine::new(
            Stage::Post,
            "switch to entropy training",
            SchedulePlan::single(10001),
        ),
    ]
}

pub fn cat_3dgs() -> Vec<PlanLine> {
    vec![
        PlanLine::new(Stage::Pre, "update lr", SchedulePlan::upto(30000)),
        PlanLine::new(Stage::Pre, "update cam mask", SchedulePlan::upto(30000)),
        PlanLine::new(Stage::Pre, "update anchor bound", SchedulePlan::single(1)),
        PlanLine::new(Stage::Pre, "setup triplane", SchedulePlan::single(10000)),
        PlanLine::new(
            Stage::Pre,
            "switch to quantized training",
            SchedulePlan::single(3000),
        ),
        PlanLine::new(
            Stage::Pre,
            "switch to entropy training",
            SchedulePlan::single(10001),
        ),
        PlanLine::new(
            Stage::Post,
            "collect gradient statistics",
            SchedulePlan::upto(15000),
        ),
        PlanLine::new(Stage::Post, "adjust anchor", rng3(1500, 3000, 100)),
        PlanLine::new(Stage::Post, "adjust anchor", rng3(4000, 15000, 100)),
    ]
}

/// Every reference table, keyed by pipeline name.
pub fn all() -> Vec<(&'static str, Vec<PlanLine>)> {
    vec![
        ("vanilla_3dgs", vanilla_3dgs()),
        ("trimming_the_fat", trimming_the_fat()),
        ("pup_3dgs", pup_3dgs()),
        ("speedy_splat", speedy_splat()),
        ("lightgaussian_prune", lightgaussian_prune()),
        ("lightgaussian_distill", lightgaussian_distill()),
        ("mesongs", mesongs()),
        ("c3dgs", c3dgs()),
        ("compact3dgs", compact3dgs()),
        ("hac", hac()),
        ("cat_3dgs", cat_3dgs()),
    ]
}
