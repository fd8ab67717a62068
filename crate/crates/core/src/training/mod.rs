//! Sequential window-by-window training.

mod loss;
mod optim;
mod sampling;

pub use loss::{assemble_loss, assemble_loss_on_tape, causal_weight, LossEvaluation, LossWeights, PreparedBatch, WindowLoss};
pub use optim::{
    adam_step, convergence_check, lbfgs_step, AdamMoments, ConvergedReason, LbfgsMemory, LbfgsOutcome, Objective,
    OptimizerSchedule, WindowTrainState,
};
pub use sampling::{derive_seed, sample_collocation, MiniBatcher, PointSet};

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ansatz::{ansatz_eval, Mode, Predecessor, TimeWindowPartition, WindowAnsatz, WindowNet};
use crate::diffengine::Jet;
use crate::error::{Error, Result};
use crate::network::{NetworkConfig, TimeInput};
use crate::problems::ProblemSpec;

const STREAM_INIT: u64 = 1;
const STREAM_COLLOCATION: u64 = 2;
const STREAM_EVAL: u64 = 3;
const STREAM_BATCHES: u64 = 4;
const STREAM_INTERFACE: u64 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplingConfig {
    pub n_pde_per_window: usize,
    pub batch_size: usize,
    pub eval_batch_size: usize,
    pub rng_seed: u64,
    pub full_batch: bool,
    /// Soft-mode penalty points at each window start.
    pub n_interface: usize,
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pde_per_window == 0 || self.batch_size == 0 {
            return Err(Error::config("collocation and batch sizes must be positive"));
        }
        if self.full_batch {
            if self.batch_size != self.n_pde_per_window {
                return Err(Error::config("full batch requires batch_size = n_pde_per_window"));
            }
        } else {
            if self.eval_batch_size <= self.batch_size {
                return Err(Error::config("eval_batch_size must exceed batch_size"));
            }
            if self.batch_size > self.n_pde_per_window {
                return Err(Error::config("batch_size exceeds n_pde_per_window"));
            }
        }
        if self.n_interface == 0 {
            return Err(Error::config("n_interface must be positive"));
        }
        Ok(())
    }
}

/// How each window's network sees time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeInputPolicy {
    Raw,
    /// Affine map of the window onto `[−1, 1]`.
    WindowCentered,
}

impl TimeInputPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            TimeInputPolicy::Raw => "raw",
            TimeInputPolicy::WindowCentered => "window",
        }
    }

    pub fn for_window(&self, window: (f64, f64)) -> TimeInput {
        match self {
            TimeInputPolicy::Raw => TimeInput::RAW,
            TimeInputPolicy::WindowCentered => TimeInput {
                shift: 0.5 * (window.0 + window.1),
                scale: 2.0 / (window.1 - window.0),
            },
        }
    }
}

impl std::str::FromStr for TimeInputPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(TimeInputPolicy::Raw),
            "window" => Ok(TimeInputPolicy::WindowCentered),
            other => Err(Error::config(format!("unknown time input '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub network: NetworkConfig,
    pub sampling: SamplingConfig,
    pub schedule: OptimizerSchedule,
    pub weights: LossWeights,
    pub time_input: TimeInputPolicy,
    /// Adam iterations between eval-loss telemetry records; 0 disables them.
    pub telemetry_every: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.sampling.validate()?;
        self.schedule.validate()?;
        self.weights.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Adam,
    Lbfgs,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Adam => "adam",
            Phase::Lbfgs => "lbfgs",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TelemetryRecord {
    pub window: usize,
    pub phase: Phase,
    pub iteration: usize,
    pub train_loss: f64,
    pub eval_loss: Option<f64>,
    /// Seconds since the window started.
    pub elapsed: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowSummary {
    pub window: usize,
    pub adam_iters: usize,
    pub lbfgs_iters: usize,
    pub converged_reason: ConvergedReason,
    pub final_eval_loss: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowFailure {
    pub window: usize,
    pub message: String,
}

/// Trained windows and the telemetry behind them.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub solution: SequentialSolution,
    pub summaries: Vec<WindowSummary>,
    pub telemetry: Vec<TelemetryRecord>,
    pub failure: Option<WindowFailure>,
}

/// Piecewise trial solution over the partition.
#[derive(Clone, Debug)]
pub struct SequentialSolution {
    pub partition: TimeWindowPartition,
    pub windows: Vec<WindowAnsatz>,
}

impl SequentialSolution {
    /// Ansatz covering `t`; errors when that window was never trained.
    pub fn window_for(&self, t: f64) -> Result<&WindowAnsatz> {
        let w = self.partition.locate(t)?;
        self.windows
            .get(w - 1)
            .ok_or_else(|| Error::contract(format!("window {w} has not been trained")))
    }

    /// Time jet of the solution at `(x, t)`.
    pub fn eval_t_jet(&self, x: f64, t: f64, order: usize) -> Result<Jet> {
        let a = self.window_for(t)?;
        ansatz_eval(a, &Jet::constant(x, order), &Jet::lift(t, 1.0, order)?)
    }

    /// Time jet of window `w` (1-based) at `(x, t)`, which may sit on either
    /// end of that window.
    pub fn eval_window_t_jet(&self, w: usize, x: f64, t: f64, order: usize) -> Result<Jet> {
        let a = self
            .windows
            .get(w - 1)
            .ok_or_else(|| Error::contract(format!("window {w} has not been trained")))?;
        ansatz_eval(a, &Jet::constant(x, order), &Jet::lift(t, 1.0, order)?)
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self.eval_t_jet(x, t, 0)?.value())
    }

    /// Largest mismatch of value and time derivatives up to `m` across the
    /// interior boundaries, over the given `x` samples.
    pub fn interface_mismatch(&self, xs: &[f64], m: usize) -> Result<Vec<f64>> {
        let bounds = self.partition.boundaries();
        let mut out = Vec::new();
        for w in 1..self.windows.len() {
            let tb = bounds[w];
            let mut worst: f64 = 0.0;
            for &x in xs {
                let left = self.eval_window_t_jet(w, x, tb, m)?;
                let right = self.eval_window_t_jet(w + 1, x, tb, m)?;
                for k in 0..=m {
                    worst = worst.max((left.derivative(k) - right.derivative(k)).abs());
                }
            }
            out.push(worst);
        }
        Ok(out)
    }

    /// Largest deviation from the initial data `g_0..g_{M−1}` at `t = 0`.
    pub fn ic_error(&self, problem: &ProblemSpec, xs: &[f64]) -> Result<f64> {
        let m = problem.time_order - 1;
        let t0 = self.partition.t_start();
        let mut worst: f64 = 0.0;
        for &x in xs {
            let jet = self.eval_window_t_jet(1, x, t0, m)?;
            for k in 0..=m {
                worst = worst.max((jet.derivative(k) - problem.ic_series.term_value(k, x)).abs());
            }
        }
        Ok(worst)
    }
}

/// Window ansatz with freshly initialized parameters.
pub fn initial_window(
    problem: &ProblemSpec,
    partition: &TimeWindowPartition,
    mode: Mode,
    config: &TrainConfig,
    window: usize,
    previous: Option<&WindowAnsatz>,
) -> Result<WindowAnsatz> {
    let bounds = partition.window(window);
    let net_config = config.network.with_time_input(config.time_input.for_window(bounds));
    let predecessor = match previous {
        None => Predecessor::Initial(problem.ic_series.clone()),
        Some(prev) => Predecessor::Frozen(Arc::new(prev.net.clone())),
    };
    Ok(WindowAnsatz {
        window,
        partition: partition.clone(),
        order: problem.required_continuity(),
        net: WindowNet::glorot(net_config, derive_seed(config.sampling.rng_seed, STREAM_INIT, window)),
        predecessor,
        mask: problem.mask(),
        mode,
    })
}

pub fn train_sequential(
    problem: &ProblemSpec,
    partition: &TimeWindowPartition,
    mode: Mode,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_sequential_with(problem, partition, mode, config, &mut |_| {})
}

/// As [`train_sequential`], reporting every telemetry record as it happens.
pub fn train_sequential_with(
    problem: &ProblemSpec,
    partition: &TimeWindowPartition,
    mode: Mode,
    config: &TrainConfig,
    observer: &mut dyn FnMut(&TelemetryRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if config.network.spatial != problem.spatial_input()? {
        return Err(Error::config("network input does not match the problem's boundary treatment"));
    }
    let mut outcome = TrainOutcome {
        solution: SequentialSolution {
            partition: partition.clone(),
            windows: Vec::with_capacity(partition.nt()),
        },
        summaries: Vec::with_capacity(partition.nt()),
        telemetry: Vec::new(),
        failure: None,
    };
    for w in 1..=partition.nt() {
        let previous = outcome.solution.windows.last();
        let mut ansatz = initial_window(problem, partition, mode, config, w, previous)?;
        let mut record = |r: TelemetryRecord| {
            observer(&r);
            outcome.telemetry.push(r);
        };
        match train_window(problem, &mut ansatz, config, &mut record) {
            Ok(summary) => {
                outcome.summaries.push(summary);
                outcome.solution.windows.push(ansatz);
            }
            Err(e) => {
                outcome.failure = Some(WindowFailure {
                    window: w,
                    message: e.to_string(),
                });
                break;
            }
        }
    }
    Ok(outcome)
}

/// Train one window in place: Adam on mini-batches, then L-BFGS on the
/// fixed evaluation batch.
pub fn train_window(
    problem: &ProblemSpec,
    ansatz: &mut WindowAnsatz,
    config: &TrainConfig,
    record: &mut dyn FnMut(TelemetryRecord),
) -> Result<WindowSummary> {
    let start = Instant::now();
    let w = ansatz.window;
    let seed = config.sampling.rng_seed;
    let s = &config.sampling;
    let bounds = ansatz.bounds();
    let collocation = sample_collocation(
        bounds,
        problem.spatial_domain,
        s.n_pde_per_window,
        derive_seed(seed, STREAM_COLLOCATION, w),
    )?;
    let interface_x: Vec<f64> = match (ansatz.mode, problem.spatial_domain) {
        (Mode::Soft, Some((a, b))) => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_INTERFACE, w));
            (0..s.n_interface).map(|_| rng.random_range(a..=b)).collect()
        }
        _ => Vec::new(),
    };
    let train = WindowLoss::new(ansatz, problem, &config.weights, &collocation, &interface_x)?;
    let eval = if s.full_batch {
        None
    } else {
        let pts = sample_collocation(bounds, problem.spatial_domain, s.eval_batch_size, derive_seed(seed, STREAM_EVAL, w))?;
        Some(WindowLoss::new(ansatz, problem, &config.weights, &pts, &interface_x)?)
    };
    let eval_loss = eval.as_ref().unwrap_or(&train);
    let eval_batch = eval_loss.prepare_all();
    let full_batch = s.full_batch.then(|| train.prepare_all());

    let mut state = WindowTrainState::new(ansatz.net.params.clone());
    let mut grad = vec![0.0; state.params.len()];
    let mut batcher = MiniBatcher::new(train.len(), s.batch_size, derive_seed(seed, STREAM_BATCHES, w));
    let schedule = &config.schedule;
    for it in 0..schedule.adam_iters {
        let mini;
        let batch = match &full_batch {
            Some(b) => b,
            None => {
                mini = train.prepare(&batcher.next_batch());
                &mini
            }
        };
        let (loss, _) = train.evaluate(batch, state.params.values(), Some(&mut grad))?;
        adam_step(&mut state, &grad, schedule)?;
        let report = config.telemetry_every > 0 && (it % config.telemetry_every == 0 || it + 1 == schedule.adam_iters);
        let eval_value = if report {
            Some(eval_loss.evaluate(&eval_batch, state.params.values(), None)?.0)
        } else {
            None
        };
        record(TelemetryRecord {
            window: w,
            phase: Phase::Adam,
            iteration: it,
            train_loss: loss,
            eval_loss: eval_value,
            elapsed: start.elapsed().as_secs_f64(),
        });
    }

    let mut objective = |theta: &[f64], g: &mut [f64]| -> Result<f64> {
        Ok(eval_loss.evaluate(&eval_batch, theta, Some(g))?.0)
    };
    let mut lbfgs_iters = 0;
    let mut reason = ConvergedReason::MaxIters;
    let mut final_loss = eval_loss.evaluate(&eval_batch, state.params.values(), None)?.0;
    if schedule.lbfgs_max_iters > 0 {
        state.loss_history.push(final_loss);
        for it in 0..schedule.lbfgs_max_iters {
            let outcome = lbfgs_step(&mut state, &mut objective, schedule)?;
            lbfgs_iters = it + 1;
            let (loss, stop) = match outcome {
                LbfgsOutcome::Accepted { loss } => {
                    let done = convergence_check(&state.loss_history, schedule);
                    if done {
                        reason = ConvergedReason::Tolerance;
                    }
                    (loss, done)
                }
                LbfgsOutcome::Stationary { loss } => {
                    reason = ConvergedReason::Tolerance;
                    (loss, true)
                }
                LbfgsOutcome::LineSearchFailed { loss } => {
                    reason = ConvergedReason::LineSearchFailure;
                    (loss, true)
                }
            };
            final_loss = loss;
            record(TelemetryRecord {
                window: w,
                phase: Phase::Lbfgs,
                iteration: it,
                train_loss: loss,
                eval_loss: Some(loss),
                elapsed: start.elapsed().as_secs_f64(),
            });
            if stop {
                break;
            }
        }
    }
    state.converged_reason = Some(reason);
    ansatz.net.params = state.params;
    Ok(WindowSummary {
        window: w,
        adam_iters: schedule.adam_iters,
        lbfgs_iters,
        converged_reason: reason,
        final_eval_loss: final_loss,
        seconds: start.elapsed().as_secs_f64(),
    })
}
