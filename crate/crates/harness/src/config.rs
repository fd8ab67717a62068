//! Flat `key = value` run configuration.
//!
//! A config names a problem and optionally overrides any of the per-problem
//! defaults. Keys follow the hyper-parameter table: `depth`, `width`,
//! `batch_type`, `batch_size`, `adam_step`, `adam_iters`, `lbfgs_iters`,
//! `lambda_i`, plus `loss_tolerance`, `n_pde`, `eval_batch`, `n_interface`,
//! `causal_c`, `time_input`, `lbfgs_history`, `seed`, `output`, `reference`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hcspinn::ansatz::{Mode, TimeWindowPartition};
use hcspinn::network::NetworkConfig;
use hcspinn::problems::{ProblemKind, ProblemSpec, ALLEN_CAHN_LAMBDA1, ALLEN_CAHN_LAMBDA2, JERK_K, KDV_LAMBDA1, KDV_LAMBDA2};
use hcspinn::training::{LossWeights, OptimizerSchedule, SamplingConfig, TimeInputPolicy, TrainConfig};

use crate::error::{HarnessError, Result};

/// One `key = value` line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    /// 1-based source line; 0 for command-line overrides.
    pub line: usize,
}

impl Entry {
    pub fn new(key: impl Into<String>, value: impl Into<String>) -> Self {
        Entry {
            key: key.into(),
            value: value.into(),
            line: 0,
        }
    }

    fn origin(&self) -> String {
        if self.line == 0 {
            "override".to_string()
        } else {
            format!("line {}", self.line)
        }
    }
}

/// Split config text into entries. `#` starts a comment.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(HarnessError::config(format!("line {}: expected key = value", i + 1)));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(HarnessError::config(format!("line {}: empty key or value", i + 1)));
        }
        out.push(Entry {
            key: k.to_ascii_lowercase(),
            value: v.to_string(),
            line: i + 1,
        });
    }
    Ok(out)
}

/// Parse a `key=value` command-line override.
pub fn parse_override(s: &str) -> Result<Entry> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| HarnessError::config(format!("override '{s}' is not key=value")))?;
    Ok(Entry::new(k.trim().to_ascii_lowercase(), v.trim()))
}

pub fn problem_kind(name: &str) -> Result<ProblemKind> {
    let (k1, k2, k3) = JERK_K;
    match name {
        "advection" => Ok(ProblemKind::Advection { c: 30.0 }),
        "wave" => Ok(ProblemKind::Wave { c: 10.0 }),
        "allen_cahn" | "allen-cahn" => Ok(ProblemKind::AllenCahn {
            lambda1: ALLEN_CAHN_LAMBDA1,
            lambda2: ALLEN_CAHN_LAMBDA2,
        }),
        "kdv" => Ok(ProblemKind::Kdv {
            lambda1: KDV_LAMBDA1,
            lambda2: KDV_LAMBDA2,
        }),
        "jerk" => Ok(ProblemKind::Jerk { k1, k2, k3 }),
        other => Err(HarnessError::config(format!("unknown problem '{other}'"))),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub nt: usize,
    pub mode: Mode,
    pub train: TrainConfig,
    pub output_dir: PathBuf,
    /// Grid file to use instead of the built-in reference.
    pub reference_file: Option<PathBuf>,
}

impl RunConfig {
    /// Table defaults for the problem family of `problem`.
    pub fn defaults(problem: ProblemKind, nt: usize, mode: Mode) -> Result<Self> {
        let spec = ProblemSpec::new(problem)?;
        // (depth, width, full batch, batch, adam step, adam iters, lbfgs iters, lambda_i, tolerance)
        let row = match problem {
            ProblemKind::Advection { .. } => (4, 32, false, 128, 5e-3, 10_000, 1000, 1.0, 1e-6),
            ProblemKind::Wave { .. } => (4, 32, false, 128, 5e-3, 20_000, 1000, 1.0, 1e-6),
            ProblemKind::AllenCahn { .. } => (4, 32, false, 256, 5e-3, 20_000, 200, 100.0, 1e-7),
            ProblemKind::Kdv { .. } => (4, 32, false, 256, 2e-3, 20_000, 200, 100.0, 1e-6),
            ProblemKind::Jerk { .. } => (3, 16, true, 2001, 2e-3, 10_000, 300, 10.0, 1e-7),
        };
        let (depth, width, full_batch, batch, adam_step, adam_iters, lbfgs_iters, lambda_i, tol) = row;
        let n_pde = if full_batch { batch } else { 20_000 };
        let train = TrainConfig {
            network: NetworkConfig::new(depth, width, spec.spatial_input()?)?,
            sampling: SamplingConfig {
                n_pde_per_window: n_pde,
                batch_size: batch,
                eval_batch_size: if full_batch { batch } else { 4 * batch },
                rng_seed: 1,
                full_batch,
                n_interface: 256,
            },
            schedule: OptimizerSchedule {
                adam_step,
                adam_iters,
                lbfgs_max_iters: lbfgs_iters,
                loss_tolerance: tol,
                ..OptimizerSchedule::default()
            },
            weights: LossWeights {
                lambda_p: 1.0,
                lambda_i,
                lambda_b: 0.0,
                causal_c_t: 10.0,
                causal_t_max: spec.horizon,
                causal_per_window: spec.is_ode(),
            },
            time_input: if spec.is_ode() { TimeInputPolicy::WindowCentered } else { TimeInputPolicy::Raw },
            telemetry_every: 100,
        };
        let mut cfg = RunConfig {
            problem,
            nt,
            mode,
            train,
            output_dir: PathBuf::new(),
            reference_file: None,
        };
        cfg.output_dir = Path::new("runs").join(cfg.label());
        Ok(cfg)
    }

    /// Defaults for the named problem, then every entry applied in order.
    pub fn from_entries(entries: &[Entry]) -> Result<Self> {
        let name = entries
            .iter()
            .rev()
            .find(|e| e.key == "problem")
            .ok_or_else(|| HarnessError::config("config does not name a problem"))?;
        let mut cfg = RunConfig::defaults(problem_kind(&name.value)?, 1, Mode::Hard)?;
        let explicit_output = entries.iter().any(|e| e.key == "output");
        for e in entries {
            cfg.set(e)?;
        }
        if !explicit_output {
            cfg.output_dir = Path::new("runs").join(cfg.label());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        RunConfig::from_entries(&parse_entries(text)?)
    }

    pub fn load(path: &Path, overrides: &[Entry]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut entries = parse_entries(&text)?;
        entries.extend_from_slice(overrides);
        RunConfig::from_entries(&entries)
    }

    /// Apply one entry on top of the current values.
    pub fn set(&mut self, e: &Entry) -> Result<()> {
        let bad = |what: &str| HarnessError::config(format!("{}: {} '{}' for {}", e.origin(), what, e.value, e.key));
        let num = || e.value.parse::<f64>().map_err(|_| bad("invalid number"));
        let int = || e.value.parse::<usize>().map_err(|_| bad("invalid integer"));
        let t = &mut self.train;
        match e.key.as_str() {
            "problem" => {
                if problem_name(&problem_kind(&e.value)?) == problem_name(&self.problem) {
                    return Ok(());
                }
                return Err(bad("problem cannot change after defaults are applied"));
            }
            "c" => match &mut self.problem {
                ProblemKind::Advection { c } | ProblemKind::Wave { c } => *c = num()?,
                _ => return Err(bad("speed does not apply")),
            },
            "lambda1" | "lambda2" => match &mut self.problem {
                ProblemKind::AllenCahn { lambda1, lambda2 } | ProblemKind::Kdv { lambda1, lambda2 } => {
                    *if e.key == "lambda1" { lambda1 } else { lambda2 } = num()?
                }
                _ => return Err(bad("coefficient does not apply")),
            },
            "k1" | "k2" | "k3" => match &mut self.problem {
                ProblemKind::Jerk { k1, k2, k3 } => {
                    *match e.key.as_str() {
                        "k1" => k1,
                        "k2" => k2,
                        _ => k3,
                    } = num()?
                }
                _ => return Err(bad("coefficient does not apply")),
            },
            "nt" => self.nt = int()?,
            "mode" => self.mode = e.value.parse().map_err(|_| bad("unknown mode"))?,
            "depth" => t.network.depth = int()?,
            "width" => t.network.width = int()?,
            "batch_type" => match e.value.to_ascii_lowercase().as_str() {
                "mb" => t.sampling.full_batch = false,
                "fb" => {
                    t.sampling.full_batch = true;
                    t.sampling.batch_size = t.sampling.n_pde_per_window;
                    t.sampling.eval_batch_size = t.sampling.n_pde_per_window;
                }
                _ => return Err(bad("batch type must be MB or FB")),
            },
            "batch_size" => {
                let n = int()?;
                t.sampling.batch_size = n;
                if t.sampling.full_batch {
                    t.sampling.n_pde_per_window = n;
                    t.sampling.eval_batch_size = n;
                } else {
                    t.sampling.eval_batch_size = 4 * n;
                }
            }
            "n_pde" => {
                t.sampling.n_pde_per_window = int()?;
                if t.sampling.full_batch {
                    t.sampling.batch_size = t.sampling.n_pde_per_window;
                    t.sampling.eval_batch_size = t.sampling.n_pde_per_window;
                }
            }
            "eval_batch" => t.sampling.eval_batch_size = int()?,
            "n_interface" => t.sampling.n_interface = int()?,
            "seed" => t.sampling.rng_seed = e.value.parse().map_err(|_| bad("invalid seed"))?,
            "adam_step" => t.schedule.adam_step = num()?,
            "adam_iters" => t.schedule.adam_iters = int()?,
            "lbfgs_iters" => t.schedule.lbfgs_max_iters = int()?,
            "lbfgs_history" => t.schedule.lbfgs_history = int()?,
            "loss_tolerance" => t.schedule.loss_tolerance = num()?,
            "lambda_i" => t.weights.lambda_i = num()?,
            "causal_c" => t.weights.causal_c_t = num()?,
            "time_input" => t.time_input = e.value.parse().map_err(|_| bad("unknown time input"))?,
            "telemetry_every" => t.telemetry_every = int()?,
            "output" => self.output_dir = PathBuf::from(&e.value),
            "reference" => self.reference_file = Some(PathBuf::from(&e.value)),
            _ => return Err(HarnessError::config(format!("{}: unknown key '{}'", e.origin(), e.key))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.nt == 0 {
            return Err(HarnessError::config("nt must be at least 1"));
        }
        self.problem_spec()?;
        self.train.validate()?;
        Ok(())
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        Ok(ProblemSpec::new(self.problem)?)
    }

    pub fn partition(&self) -> Result<TimeWindowPartition> {
        let spec = self.problem_spec()?;
        Ok(TimeWindowPartition::new(0.0, spec.horizon, self.nt)?)
    }

    pub fn seed(&self) -> u64 {
        self.train.sampling.rng_seed
    }

    /// Short run name, e.g. `advection_c30_nt4_hard_s1`.
    pub fn label(&self) -> String {
        let name = problem_name(&self.problem);
        let constants = match self.problem {
            ProblemKind::Advection { c } | ProblemKind::Wave { c } => format!("_c{c}"),
            _ => String::new(),
        };
        format!("{name}{constants}_nt{}_{}_s{}", self.nt, self.mode.as_str(), self.seed())
    }

    /// Every key with its value, one per line, in a fixed order.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("problem", problem_name(&self.problem).to_string());
        match self.problem {
            ProblemKind::Advection { c } | ProblemKind::Wave { c } => put("c", c.to_string()),
            ProblemKind::AllenCahn { lambda1, lambda2 } | ProblemKind::Kdv { lambda1, lambda2 } => {
                put("lambda1", lambda1.to_string());
                put("lambda2", lambda2.to_string());
            }
            ProblemKind::Jerk { k1, k2, k3 } => {
                put("k1", k1.to_string());
                put("k2", k2.to_string());
                put("k3", k3.to_string());
            }
        }
        put("nt", self.nt.to_string());
        put("mode", self.mode.as_str().to_string());
        put("depth", t.network.depth.to_string());
        put("width", t.network.width.to_string());
        put("batch_type", if t.sampling.full_batch { "FB" } else { "MB" }.to_string());
        put("batch_size", t.sampling.batch_size.to_string());
        put("n_pde", t.sampling.n_pde_per_window.to_string());
        put("eval_batch", t.sampling.eval_batch_size.to_string());
        put("n_interface", t.sampling.n_interface.to_string());
        put("adam_step", t.schedule.adam_step.to_string());
        put("adam_iters", t.schedule.adam_iters.to_string());
        put("lbfgs_iters", t.schedule.lbfgs_max_iters.to_string());
        put("lbfgs_history", t.schedule.lbfgs_history.to_string());
        put("loss_tolerance", t.schedule.loss_tolerance.to_string());
        put("lambda_i", t.weights.lambda_i.to_string());
        put("causal_c", t.weights.causal_c_t.to_string());
        put("time_input", t.time_input.as_str().to_string());
        put("telemetry_every", t.telemetry_every.to_string());
        put("seed", self.seed().to_string());
        if let Some(r) = &self.reference_file {
            put("reference", r.display().to_string());
        }
        s
    }
}

pub fn problem_name(kind: &ProblemKind) -> &'static str {
    match kind {
        ProblemKind::Advection { .. } => "advection",
        ProblemKind::Wave { .. } => "wave",
        ProblemKind::AllenCahn { .. } => "allen_cahn",
        ProblemKind::Kdv { .. } => "kdv",
        ProblemKind::Jerk { .. } => "jerk",
    }
}

/// Every `*.cfg` file in `dir`, sorted by name.
pub fn config_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in rd {
        let p = entry.map_err(|e| HarnessError::io(dir, e))?.path();
        if p.extension().is_some_and(|x| x == "cfg") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_table() {
        let cfg = RunConfig::from_text("problem = kdv\nnt = 4\n").unwrap();
        assert_eq!(cfg.train.schedule.adam_step, 2e-3);
        assert_eq!(cfg.train.schedule.adam_iters, 20_000);
        assert_eq!(cfg.train.schedule.lbfgs_max_iters, 200);
        assert_eq!(cfg.train.sampling.batch_size, 256);
        assert_eq!(cfg.train.sampling.eval_batch_size, 1024);
        assert_eq!(cfg.train.weights.lambda_i, 100.0);
        assert_eq!(cfg.nt, 4);

        let jerk = RunConfig::from_text("problem = jerk").unwrap();
        assert!(jerk.train.sampling.full_batch);
        assert_eq!(jerk.train.sampling.n_pde_per_window, 2001);
        assert_eq!((jerk.train.network.depth, jerk.train.network.width), (3, 16));
        assert!(jerk.train.weights.causal_per_window);
    }

    #[test]
    fn later_entries_win() {
        let cfg = RunConfig::from_text("problem = advection\nc = 50 # faster\nadam_iters = 5\nadam_iters = 7").unwrap();
        assert_eq!(cfg.problem, ProblemKind::Advection { c: 50.0 });
        assert_eq!(cfg.train.schedule.adam_iters, 7);
        assert_eq!(cfg.output_dir, Path::new("runs/advection_c50_nt1_hard_s1"));
    }

    #[test]
    fn text_round_trips() {
        let cfg = RunConfig::from_text("problem = wave\nc = 1\nnt = 4\nmode = soft\nseed = 9").unwrap();
        let again = RunConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn bad_input_names_the_line() {
        let err = RunConfig::from_text("problem = advection\nwidth = wide").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert_eq!(err.exit_code(), 2);
        assert!(RunConfig::from_text("nt = 4").is_err());
        assert!(RunConfig::from_text("problem = advection\nlambda1 = 2").is_err());
        assert!(RunConfig::from_text("problem = advection\nnt = 0").is_err());
        assert!(RunConfig::from_text("problem = advection\nbogus = 1").is_err());
        assert!(parse_entries("just words").is_err());
    }
}
