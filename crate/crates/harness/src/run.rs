use std::path::Path;
use std::time::Instant;

use hcspinn::ansatz::Mode;
use hcspinn::problems::{
    reference_oracle_ode, PdeOracleConfig, ProblemSpec, Provenance, ReferenceSolution, ReferenceSource,
};
use hcspinn::training::{train_sequential_with, TelemetryRecord, WindowFailure, WindowSummary};

use crate::artifacts::emit_artifacts;
use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::metrics::relative_l2;

pub const PDE_GRID_X: usize = 256;
pub const PDE_GRID_T: usize = 201;
pub const ODE_GRID_T: usize = 2001;

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Space-time grid on which runs are scored. ODE grids have no `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalGrid {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
}

impl EvalGrid {
    pub fn for_problem(spec: &ProblemSpec) -> Self {
        match spec.spatial_domain {
            Some((a, b)) => EvalGrid {
                x: linspace(a, b, PDE_GRID_X),
                t: linspace(0.0, spec.horizon, PDE_GRID_T),
            },
            None => EvalGrid {
                x: Vec::new(),
                t: linspace(0.0, spec.horizon, ODE_GRID_T),
            },
        }
    }

    pub fn row_len(&self) -> usize {
        self.x.len().max(1)
    }

    pub fn len(&self) -> usize {
        self.row_len() * self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Spatial samples used for pointwise checks; `[0]` for ODEs.
    pub fn x_or_origin(&self) -> Vec<f64> {
        if self.x.is_empty() {
            vec![0.0]
        } else {
            self.x.clone()
        }
    }
}

/// Reference on `grid` from the problem's own source.
pub fn builtin_reference(spec: &ProblemSpec, grid: &EvalGrid) -> Result<ReferenceSolution> {
    let name = spec.name();
    let r = match spec.reference {
        ReferenceSource::Analytic => ReferenceSolution::tabulate(name, grid.x.clone(), grid.t.clone(), Provenance::Analytic, |x, t| {
            spec.analytic_solution(x, t)
        })?,
        ReferenceSource::PseudospectralOracle => {
            let (a, b) = spec
                .spatial_domain
                .ok_or_else(|| HarnessError::config("pseudospectral oracle needs a spatial domain"))?;
            let oracle = PdeOracleConfig {
                nt_out: grid.t.len(),
                ..PdeOracleConfig::default()
            };
            oracle.solve(spec)?.resample_periodic(b - a, &grid.x)?
        }
        ReferenceSource::OdeOracle => reference_oracle_ode(spec, &grid.t)?,
    };
    Ok(r)
}

/// Load a grid file and tag it as ingested.
pub fn ingest_reference(path: &Path) -> Result<ReferenceSolution> {
    let mut r = ReferenceSolution::load(path)?;
    r.provenance = Provenance::Ingested;
    Ok(r)
}

fn same_points(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(p, q)| (p - q).abs() <= 1e-12 * p.abs().max(1.0))
}

/// Bring a reference onto the evaluation grid, resampling periodic
/// problems in `x` when the spatial grids differ.
pub fn align_reference(reference: ReferenceSolution, spec: &ProblemSpec, grid: &EvalGrid) -> Result<ReferenceSolution> {
    if reference.problem != spec.name() {
        return Err(HarnessError::config(format!(
            "reference is for '{}', run is '{}'",
            reference.problem,
            spec.name()
        )));
    }
    if !same_points(&reference.grid_t, &grid.t) {
        return Err(HarnessError::config("reference time grid does not match the evaluation grid"));
    }
    if same_points(&reference.grid_x, &grid.x) {
        return Ok(reference);
    }
    match (spec.bc, spec.spatial_domain) {
        (hcspinn::problems::BoundaryTreatment::PeriodicEmbedding, Some((a, b))) => {
            Ok(reference.resample_periodic(b - a, &grid.x)?)
        }
        _ => Err(HarnessError::config("reference spatial grid does not match the evaluation grid")),
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub config: RunConfig,
    pub summaries: Vec<WindowSummary>,
    pub telemetry: Vec<TelemetryRecord>,
    pub grid: EvalGrid,
    /// Predictions, row-major by time; NaN where no trained window covers `t`.
    pub prediction: Vec<f64>,
    pub reference: Option<ReferenceSolution>,
    pub relative_l2: Option<f64>,
    pub wall_time_seconds: f64,
    /// Largest value/derivative jump at each interior boundary.
    pub interface_residuals: Vec<f64>,
    /// `(x, x_t, x_tt)` at each grid time, ODE runs only.
    pub phase_space: Option<Vec<[f64; 3]>>,
    pub failure: Option<WindowFailure>,
}

impl RunReport {
    /// Pointwise `|pred − ref|`.
    pub fn abs_error(&self) -> Option<Vec<f64>> {
        let r = self.reference.as_ref()?;
        Some(self.prediction.iter().zip(&r.values).map(|(p, q)| (p - q).abs()).collect())
    }
}

/// Train and score one configuration without writing anything.
pub fn execute(config: &RunConfig, observer: &mut dyn FnMut(&TelemetryRecord)) -> Result<RunReport> {
    config.validate()?;
    let spec = config.problem_spec()?;
    let partition = config.partition()?;
    let grid = EvalGrid::for_problem(&spec);
    let reference = match &config.reference_file {
        Some(path) => align_reference(ingest_reference(path)?, &spec, &grid)?,
        None => builtin_reference(&spec, &grid)?,
    };

    let start = Instant::now();
    let outcome = train_sequential_with(&spec, &partition, config.mode, &config.train, observer)?;
    let wall_time_seconds = start.elapsed().as_secs_f64();

    let sol = &outcome.solution;
    let mut prediction = Vec::with_capacity(grid.len());
    for &t in &grid.t {
        let covered = sol.window_for(t).is_ok();
        for &x in &grid.x_or_origin() {
            prediction.push(if covered { sol.eval(x, t)? } else { f64::NAN });
        }
    }
    let relative_l2 = if outcome.failure.is_none() {
        Some(relative_l2(&prediction, &reference)?)
    } else {
        None
    };
    let m = spec.required_continuity().m();
    let interface_residuals = sol.interface_mismatch(&grid.x_or_origin(), m)?;
    let phase_space = if spec.is_ode() {
        let mut states = Vec::with_capacity(grid.t.len());
        for &t in &grid.t {
            states.push(match sol.eval_t_jet(0.0, t, 2) {
                Ok(j) => [j.derivative(0), j.derivative(1), j.derivative(2)],
                Err(_) => [f64::NAN; 3],
            });
        }
        Some(states)
    } else {
        None
    };

    Ok(RunReport {
        config: config.clone(),
        summaries: outcome.summaries,
        telemetry: outcome.telemetry,
        grid,
        prediction,
        reference: Some(reference),
        relative_l2,
        wall_time_seconds,
        interface_residuals,
        phase_space,
        failure: outcome.failure,
    })
}

/// Train, score, and write artifacts under the configured output directory.
pub fn run_benchmark(config: &RunConfig) -> Result<RunReport> {
    run_benchmark_with(config, &mut |_| {})
}

pub fn run_benchmark_with(config: &RunConfig, observer: &mut dyn FnMut(&TelemetryRecord)) -> Result<RunReport> {
    let report = execute(config, observer)?;
    emit_artifacts(&report, &config.output_dir)?;
    Ok(report)
}

/// One row of a hard-vs-soft comparison table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComparisonRow {
    pub nt: usize,
    pub hcs_error: Option<f64>,
    pub hcs_time: f64,
    pub scs_error: Option<f64>,
    pub scs_time: f64,
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub hard: RunReport,
    pub soft: RunReport,
}

impl Comparison {
    pub fn row(&self) -> ComparisonRow {
        ComparisonRow {
            nt: self.hard.config.nt,
            hcs_error: self.hard.relative_l2,
            hcs_time: self.hard.wall_time_seconds,
            scs_error: self.soft.relative_l2,
            scs_time: self.soft.wall_time_seconds,
        }
    }
}

/// Run the configuration in both modes with identical seeds. Each arm
/// writes to `hard/` or `soft/` under the configured output directory.
pub fn compare_modes(config: &RunConfig) -> Result<Comparison> {
    let arm = |mode: Mode| -> Result<RunReport> {
        let mut c = config.clone();
        c.mode = mode;
        c.output_dir = config.output_dir.join(mode.as_str());
        run_benchmark(&c)
    };
    Ok(Comparison {
        hard: arm(Mode::Hard)?,
        soft: arm(Mode::Soft)?,
    })
}

/// CSV table with columns `nt,hcs_error,hcs_time,scs_error,scs_time`.
pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let fmt = |e: Option<f64>| e.map_or_else(|| "failed".to_string(), |v| format!("{v:.4e}"));
    let mut s = String::from("nt,hcs_error,hcs_time,scs_error,scs_time\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{:.1},{},{:.1}\n",
            r.nt,
            fmt(r.hcs_error),
            r.hcs_time,
            fmt(r.scs_error),
            r.scs_time
        ));
    }
    s
}
