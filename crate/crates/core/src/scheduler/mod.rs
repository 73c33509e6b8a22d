//! Five-stage training driver: pre-stage tasks, render, loss, post-stage
//! tasks, optimizer update — with tasks registered against iteration plans
//! and dispatched with exactly the context roles they declare.

mod plan;
pub mod plans;

pub use plan::{parse_plan_lines, plan_lines_to_string, PlanLine, SchedulePlan, Stage};

use crate::error::{Error, Result};
use crate::finetune::{adam_step, total_loss, AdamParams, AdamState};
use crate::importance::{rank_bottom, score_hessian, score_opacity, ScoreKind};
use crate::prune::prune;
use crate::render::{render, GradBuffers, MaskMode, RenderOptions, RenderOutput};
use crate::rng::SplitMix64;
use crate::scene::{Camera, GaussianScene};
use crate::DEFAULT_MASK_THRESHOLD;
use std::fmt;

/// Context roles a task may declare. Dispatch fills exactly the declared
/// fields of [`TaskContext`] and leaves the rest `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Iteration,
    Scene,
    Optimizer,
    RenderOutput,
    Loss,
    Config,
    Rng,
}

/// Per-group learning rates for the four appearance parameter groups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRates {
    pub sh_dc: f64,
    pub sh_rest: f64,
    pub opacity: f64,
    pub mask: f64,
}

impl LearningRates {
    pub fn scaled(&self, factor: f64) -> Self {
        LearningRates {
            sh_dc: self.sh_dc * factor,
            sh_rest: self.sh_rest * factor,
            opacity: self.opacity * factor,
            mask: self.mask * factor,
        }
    }
}

impl Default for LearningRates {
    fn default() -> Self {
        let f = crate::finetune::FinetuneConfig::default();
        LearningRates {
            sh_dc: f.lr_sh_dc,
            sh_rest: f.lr_sh_rest,
            opacity: f.lr_opacity,
            mask: f.lr_mask,
        }
    }
}

/// Read-only view of the optimizer a task receives through the
/// `Optimizer` role.
#[derive(Debug, Clone, Copy)]
pub struct OptimizerSnapshot {
    pub step: u64,
    pub rates: LearningRates,
}

/// Driver-level knobs readable by tasks through the `Config` role.
#[derive(Debug, Clone, Copy)]
pub struct PipelineConfig {
    pub mask_threshold: f64,
    /// Per-iteration multiplicative factor used by the default
    /// learning-rate decay task: rates(i) = base * gamma^i. The default
    /// decays roughly 100x over 30k iterations.
    pub lr_decay_gamma: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mask_threshold: DEFAULT_MASK_THRESHOLD,
            lr_decay_gamma: 0.99984648,
        }
    }
}

/// What a task was given to look at. Only declared roles are populated.
#[derive(Default)]
pub struct TaskContext<'a> {
    pub iteration: Option<usize>,
    pub scene: Option<&'a GaussianScene>,
    pub optimizer: Option<OptimizerSnapshot>,
    pub render_output: Option<&'a RenderOutput>,
    pub loss: Option<f64>,
    pub config: Option<&'a PipelineConfig>,
    pub rng: Option<&'a mut SplitMix64>,
}

/// How a task feeds changes back to the driver; all state transitions go
/// through the driver so the event log stays authoritative.
pub enum TaskAction {
    None,
    /// Swap in a structurally different scene (row count may change);
    /// optimizer moments are reset.
    ReplaceScene(GaussianScene),
    /// Overwrite parameter values without structural change; row count
    /// must match and optimizer moments are kept.
    ReplaceParams(GaussianScene),
    SetLearningRates(LearningRates),
}

pub type TaskFn = Box<dyn FnMut(&mut TaskContext) -> Result<TaskAction>>;

/// A named unit of work bound to a stage with declared context roles.
pub struct Task {
    pub name: String,
    pub stage: Stage,
    pub roles: Vec<Role>,
    pub run: TaskFn,
}

impl Task {
    pub fn new(
        name: &str,
        stage: Stage,
        roles: &[Role],
        run: impl FnMut(&mut TaskContext) -> Result<TaskAction> + 'static,
    ) -> Self {
        Task {
            name: name.to_string(),
            stage,
            roles: roles.to_vec(),
            run: Box::new(run),
        }
    }

    /// A body that does nothing; useful for replicating plan tables whose
    /// task internals are out of scope.
    pub fn noop(name: &str, stage: Stage) -> Self {
        Task::new(name, stage, &[], |_| Ok(TaskAction::None))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegistrationId(pub usize);

struct Registration {
    plan: SchedulePlan,
    task: Task,
}

/// Stage label in the event log; covers the three built-in stages as well
/// as the two task stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventStage {
    Pre,
    Render,
    Loss,
    Post,
    Optimizer,
}

impl fmt::Display for EventStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventStage::Pre => "pre",
            EventStage::Render => "render",
            EventStage::Loss => "loss",
            EventStage::Post => "post",
            EventStage::Optimizer => "optimizer",
        })
    }
}

/// One dispatch record: every task firing and every built-in stage.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub iteration: usize,
    pub stage: EventStage,
    pub task: String,
}

/// Event log as CSV (`iteration,stage,task`).
pub fn events_csv(events: &[EventRecord]) -> String {
    let mut out = String::from("iteration,stage,task\n");
    for e in events {
        out.push_str(&format!("{},{},{}\n", e.iteration, e.stage, e.task));
    }
    out
}

/// Task registry. Tasks fire at the iterations of their plan, in
/// registration order within their stage.
#[derive(Default)]
pub struct Scheduler {
    regs: Vec<Registration>,
}

impl Scheduler {
    pub fn new() -> Self {
        Scheduler::default()
    }

    /// Register `task` to fire at the iterations of `plan`. Pre-stage tasks
    /// cannot declare the `RenderOutput` role: nothing has been rendered
    /// when they run.
    pub fn register_task(&mut self, plan: SchedulePlan, task: Task) -> Result<RegistrationId> {
        if task.stage == Stage::Pre && task.roles.contains(&Role::RenderOutput) {
            return Err(Error::TaskRegistration(format!(
                "pre-stage task '{}' cannot require the render output",
                task.name
            )));
        }
        if task.name.is_empty() || task.name.contains(',') || task.name.contains('\n') {
            return Err(Error::TaskRegistration(format!(
                "task name {:?} must be nonempty and free of commas/newlines",
                task.name
            )));
        }
        self.regs.push(Registration { plan, task });
        Ok(RegistrationId(self.regs.len() - 1))
    }

    /// Every (iteration, stage, task-name) firing for a run of
    /// `total_iterations`, in execution order, without running any bodies.
    pub fn firings(&self, total_iterations: usize) -> Vec<EventRecord> {
        let mut out = Vec::new();
        for i in 0..total_iterations {
            for stage in [Stage::Pre, Stage::Post] {
                for reg in &self.regs {
                    if reg.task.stage == stage && reg.plan.contains(i) {
                        out.push(EventRecord {
                            iteration: i,
                            stage: match stage {
                                Stage::Pre => EventStage::Pre,
                                Stage::Post => EventStage::Post,
                            },
                            task: reg.task.name.clone(),
                        });
                    }
                }
            }
        }
        out
    }
}

/// Loss callback: given the scene, the camera it was rendered from, and the
/// forward render, produce the loss and (optionally) parameter gradients.
pub type LossFn<'a> =
    dyn FnMut(&GaussianScene, &Camera, &RenderOutput) -> Result<(f64, Option<GradBuffers>)> + 'a;

/// Adam over the four appearance groups, owned by the driver.
pub struct PipelineOptimizer {
    pub rates: LearningRates,
    hp: AdamParams,
    st_dc: AdamState,
    st_rest: AdamState,
    st_op: AdamState,
    st_mask: AdamState,
    steps: u64,
}

impl PipelineOptimizer {
    pub fn new(n: usize, rates: LearningRates) -> Self {
        PipelineOptimizer {
            rates,
            hp: AdamParams::default(),
            st_dc: AdamState::new(3 * n),
            st_rest: AdamState::new(crate::scene::SH_REST_WIDTH * n),
            st_op: AdamState::new(n),
            st_mask: AdamState::new(n),
            steps: 0,
        }
    }

    /// Drop accumulated moments (used after structural scene changes).
    pub fn reset(&mut self, n: usize) {
        let rates = self.rates;
        *self = PipelineOptimizer::new(n, rates);
    }

    pub fn snapshot(&self) -> OptimizerSnapshot {
        OptimizerSnapshot {
            step: self.steps,
            rates: self.rates,
        }
    }

    pub fn step(&mut self, scene: &mut GaussianScene, grads: &GradBuffers) -> Result<()> {
        adam_step(
            &mut scene.sh_dc,
            &grads.d_sh_dc,
            &mut self.st_dc,
            self.rates.sh_dc,
            &self.hp,
        )?;
        adam_step(
            &mut scene.sh_rest,
            &grads.d_sh_rest,
            &mut self.st_rest,
            self.rates.sh_rest,
            &self.hp,
        )?;
        adam_step(
            &mut scene.opacity_logits,
            &grads.d_opacity_logit,
            &mut self.st_op,
            self.rates.opacity,
            &self.hp,
        )?;
        adam_step(
            &mut scene.mask_logits,
            &grads.d_mask_logit,
            &mut self.st_mask,
            self.rates.mask,
            &self.hp,
        )?;
        self.steps += 1;
        Ok(())
    }
}

/// A completed pipeline run.
#[derive(Debug)]
pub struct PipelineRun {
    pub scene: GaussianScene,
    pub events: Vec<EventRecord>,
    /// Loss recorded at each iteration.
    pub losses: Vec<f64>,
}

/// Drive `total_iterations` of the five-stage loop. Per iteration:
/// pre-stage tasks (plan-matched, registration order), render at
/// `cameras[i % len]`, loss, post-stage tasks, optimizer update (skipped
/// when the loss produced no gradients). Task failures abort with the task
/// name and iteration attached.
pub fn run_pipeline(
    scheduler: &mut Scheduler,
    scene: GaussianScene,
    cameras: &[Camera],
    total_iterations: usize,
    loss_fn: &mut LossFn,
    optimizer: &mut PipelineOptimizer,
    config: &PipelineConfig,
    seed: u64,
) -> Result<PipelineRun> {
    if cameras.is_empty() && total_iterations > 0 {
        return Err(Error::Config("pipeline needs at least one camera".into()));
    }
    let mut scene = scene;
    let mut rng = SplitMix64::new(seed);
    let mut events = Vec::new();
    let mut losses = Vec::with_capacity(total_iterations);
    let mut last_loss: Option<f64> = None;

    let render_opts = RenderOptions {
        want_depth: false,
        want_blend_weights: false,
        loss_grad: None,
        mask_mode: MaskMode::Hard,
        mask_threshold: config.mask_threshold,
    };

    for i in 0..total_iterations {
        // stage 1: pre-scheduler
        dispatch_stage(
            scheduler,
            Stage::Pre,
            i,
            &mut scene,
            optimizer,
            None,
            last_loss,
            config,
            &mut rng,
            &mut events,
        )?;

        // stage 2: render
        let camera = &cameras[i % cameras.len()];
        let output = render(&scene, camera, &render_opts)?;
        events.push(EventRecord {
            iteration: i,
            stage: EventStage::Render,
            task: "render".into(),
        });

        // stage 3: loss
        let (loss, grads) = loss_fn(&scene, camera, &output)?;
        events.push(EventRecord {
            iteration: i,
            stage: EventStage::Loss,
            task: "loss".into(),
        });
        last_loss = Some(loss);
        losses.push(loss);

        // stage 4: post-scheduler
        dispatch_stage(
            scheduler,
            Stage::Post,
            i,
            &mut scene,
            optimizer,
            Some(&output),
            last_loss,
            config,
            &mut rng,
            &mut events,
        )?;

        // stage 5: optimizer update
        if let Some(g) = grads {
            // a post task may have restructured the scene this iteration;
            // gradients from the pre-change render no longer apply
            if g.d_opacity_logit.len() == scene.count() {
                optimizer.step(&mut scene, &g)?;
            }
        }
        events.push(EventRecord {
            iteration: i,
            stage: EventStage::Optimizer,
            task: "optimizer".into(),
        });
    }

    Ok(PipelineRun {
        scene,
        events,
        losses,
    })
}

#[allow(clippy::too_many_arguments)]
fn dispatch_stage(
    scheduler: &mut Scheduler,
    stage: Stage,
    iteration: usize,
    scene: &mut GaussianScene,
    optimizer: &mut PipelineOptimizer,
    render_output: Option<&RenderOutput>,
    last_loss: Option<f64>,
    config: &PipelineConfig,
    rng: &mut SplitMix64,
    events: &mut Vec<EventRecord>,
) -> Result<()> {
    for reg in &mut scheduler.regs {
        if reg.task.stage != stage || !reg.plan.contains(iteration) {
            continue;
        }
        let snapshot = optimizer.snapshot();
        let mut ctx = TaskContext::default();
        let mut wants_rng = false;
        for role in &reg.task.roles {
            match role {
                Role::Iteration => ctx.iteration = Some(iteration),
                Role::Scene => ctx.scene = Some(&*scene),
                Role::Optimizer => ctx.optimizer = Some(snapshot),
                Role::RenderOutput => ctx.render_output = render_output,
                Role::Loss => ctx.loss = last_loss,
                Role::Config => ctx.config = Some(config),
                Role::Rng => wants_rng = true,
            }
        }
        if wants_rng {
            ctx.rng = Some(&mut *rng);
        }
        let action = (reg.task.run)(&mut ctx).map_err(|e| Error::TaskFailed {
            name: reg.task.name.clone(),
            iteration: iteration as u64,
            source: Box::new(e),
        })?;
        drop(ctx);
        events.push(EventRecord {
            iteration,
            stage: match stage {
                Stage::Pre => EventStage::Pre,
                Stage::Post => EventStage::Post,
            },
            task: reg.task.name.clone(),
        });
        match action {
            TaskAction::None => {}
            TaskAction::ReplaceScene(s) => {
                optimizer.reset(s.count());
                *scene = s;
            }
            TaskAction::ReplaceParams(s) => {
                if s.count() != scene.count() {
                    return Err(Error::TaskFailed {
                        name: reg.task.name.clone(),
                        iteration: iteration as u64,
                        source: Box::new(Error::ShapeMismatch(format!(
                            "replace-params changed row count {} -> {}",
                            scene.count(),
                            s.count()
                        ))),
                    });
                }
                *scene = s;
            }
            TaskAction::SetLearningRates(r) => optimizer.rates = r,
        }
    }
    Ok(())
}

// ---- prebuilt task bodies ----

/// Exponential learning-rate decay: every firing sets the rates to
/// `base * gamma^iteration`, with gamma read from the pipeline config.
pub fn lr_decay_task(base: LearningRates) -> Task {
    Task::new(
        "update lr",
        Stage::Pre,
        &[Role::Iteration, Role::Config],
        move |ctx| {
            let i = ctx.iteration.expect("declared role") as i32;
            let gamma = ctx.config.expect("declared role").lr_decay_gamma;
            Ok(TaskAction::SetLearningRates(base.scaled(gamma.powi(i))))
        },
    )
}

/// Score every Gaussian against the given cameras and drop the bottom
/// `fraction`, replacing the scene.
pub fn prune_bottom_task(kind: ScoreKind, fraction: f64, cameras: Vec<Camera>) -> Task {
    Task::new("prune", Stage::Post, &[Role::Scene], move |ctx| {
        let scene = ctx.scene.expect("declared role");
        let scores = match kind {
            ScoreKind::Opacity => score_opacity(scene, &cameras, 0.0)?,
            ScoreKind::Hessian => score_hessian(scene, &cameras)?,
        };
        let bottom = rank_bottom(&scores.scores, fraction)?;
        Ok(TaskAction::ReplaceScene(prune(scene, &bottom)?))
    })
}

/// Score every Gaussian and hand the result to `sink` (e.g. for CSV dumps);
/// leaves the scene untouched.
pub fn score_task(
    kind: ScoreKind,
    cameras: Vec<Camera>,
    sink: impl FnMut(crate::importance::ImportanceScores) + 'static,
) -> Task {
    let mut sink = sink;
    Task::new(
        "calculate importance score",
        Stage::Post,
        &[Role::Scene],
        move |ctx| {
            let scene = ctx.scene.expect("declared role");
            let scores = match kind {
                ScoreKind::Opacity => score_opacity(scene, &cameras, 0.0)?,
                ScoreKind::Hessian => score_hessian(scene, &cameras)?,
            };
            sink(scores);
            Ok(TaskAction::None)
        },
    )
}

/// Distillation loss closure for [`run_pipeline`]: renders the teacher at
/// the same camera and applies the distill + mask objective.
pub fn distill_loss_fn(
    teacher: GaussianScene,
    lambda_mask: f64,
    mask_threshold: f64,
) -> impl FnMut(&GaussianScene, &Camera, &RenderOutput) -> Result<(f64, Option<GradBuffers>)> {
    move |scene, camera, _output| {
        let teacher_img = render(
            &teacher,
            camera,
            &RenderOptions {
                want_depth: false,
                want_blend_weights: false,
                loss_grad: None,
                mask_mode: MaskMode::Hard,
                mask_threshold,
            },
        )?
        .color;
        let (parts, grads) = total_loss(scene, camera, &teacher_img, lambda_mask, mask_threshold)?;
        Ok((parts.total, Some(grads)))
    }
}
