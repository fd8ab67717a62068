use super::reference::{Provenance, ReferenceSolution};
use super::{ProblemKind, ProblemSpec};
use crate::error::{Error, Result};

/// `(x, x_t, x_tt)`
pub type JerkState = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeTolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for OdeTolerance {
    fn default() -> Self {
        OdeTolerance {
            rtol: 1e-12,
            atol: 1e-12,
        }
    }
}

const MAX_STEPS: usize = 10_000_000;

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn jerk_rhs(k: (f64, f64, f64), y: &JerkState) -> JerkState {
    [y[1], y[2], k.0 * y[2] + k.1 * y[1] + y[0] * y[0] + k.2]
}

/// Integrate the first-order jerk system from `t_grid[0]` and sample the
/// full state at every grid time.
pub fn integrate_jerk(
    problem: &ProblemSpec,
    y0: JerkState,
    t_grid: &[f64],
    tol: OdeTolerance,
) -> Result<Vec<JerkState>> {
    let ProblemKind::Jerk { k1, k2, k3 } = problem.kind else {
        return Err(Error::Unsupported(format!("ODE oracle does not apply to {}", problem.name())));
    };
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config("time grid must be strictly increasing"));
    }
    if !(tol.rtol > 0.0 && tol.atol > 0.0) {
        return Err(Error::config("tolerances must be positive"));
    }
    let k = (k1, k2, k3);
    let f = |y: &JerkState| jerk_rhs(k, y);
    let mut out = Vec::with_capacity(t_grid.len());
    let Some(&t0) = t_grid.first() else {
        return Ok(out);
    };
    out.push(y0);
    let mut t = t0;
    let mut y = y0;
    let mut h = 1e-3;
    let mut fy = f(&y);
    let mut steps = 0;
    for &target in &t_grid[1..] {
        while t < target {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::Oracle("step budget exhausted".into()));
            }
            let last = target - t <= h;
            let h_try = if last { target - t } else { h };
            let mut stages = [[0.0; 3]; 7];
            stages[0] = fy;
            for s in 1..7 {
                let mut ys = y;
                for (j, stage) in stages.iter().enumerate().take(s) {
                    for i in 0..3 {
                        ys[i] += h_try * A[s][j] * stage[i];
                    }
                }
                stages[s] = f(&ys);
            }
            let mut y_new = y;
            let mut err_sq = 0.0;
            for i in 0..3 {
                let mut d5 = 0.0;
                let mut d4 = 0.0;
                for s in 0..7 {
                    d5 += B5[s] * stages[s][i];
                    d4 += B4[s] * stages[s][i];
                }
                y_new[i] += h_try * d5;
                let scale = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
                err_sq += (h_try * (d5 - d4) / scale).powi(2);
            }
            let err = (err_sq / 3.0).sqrt();
            if !err.is_finite() {
                return Err(Error::Oracle(format!("non-finite state near t={t}")));
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if last { target } else { t + h_try };
                y = y_new;
                fy = stages[6];
                if !last {
                    h = h_try * factor;
                }
            } else {
                h = h_try * factor.min(1.0);
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::Oracle(format!("step size underflow near t={t}")));
                }
            }
        }
        out.push(y);
    }
    Ok(out)
}

/// High-accuracy reference `x(t)` for the jerk problem on `t_grid`.
pub fn reference_oracle_ode(problem: &ProblemSpec, t_grid: &[f64]) -> Result<ReferenceSolution> {
    if !matches!(problem.kind, ProblemKind::Jerk { .. }) {
        return Err(Error::Unsupported(format!("ODE oracle does not apply to {}", problem.name())));
    }
    let y0 = [
        problem.ic_series.term_value(0, 0.0),
        problem.ic_series.term_value(1, 0.0),
        problem.ic_series.term_value(2, 0.0),
    ];
    if t_grid.first() != Some(&0.0) {
        return Err(Error::config("ODE oracle grid must start at t=0"));
    }
    let states = integrate_jerk(problem, y0, t_grid, OdeTolerance::default())?;
    ReferenceSolution::new(
        problem.name(),
        Vec::new(),
        t_grid.to_vec(),
        states.iter().map(|s| s[0]).collect(),
        Provenance::Oracle,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_through_the_tableau() {
        // x''' = -x' + x², and at amplitude 1e-8 the x² term is invisible.
        let p = ProblemSpec::new(ProblemKind::Jerk { k1: 0.0, k2: -1.0, k3: 0.0 }).unwrap();
        let eps = 1e-8;
        let tol = OdeTolerance { rtol: 1e-12, atol: 1e-24 };
        let grid: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let ys = integrate_jerk(&p, [0.0, eps, 0.0], &grid, tol).unwrap();
        for (t, y) in grid.iter().zip(&ys) {
            assert!((y[0] - eps * t.sin()).abs() < 1e-6 * eps, "{t}");
        }
    }

    #[test]
    fn equilibrium_stays_put() {
        let p = ProblemSpec::jerk().unwrap();
        let grid: Vec<f64> = (0..=50).map(|i| i as f64).collect();
        let ys = integrate_jerk(&p, [1.0, 0.0, 0.0], &grid, OdeTolerance::default()).unwrap();
        assert!(ys.iter().all(|y| *y == [1.0, 0.0, 0.0]));
    }

    #[test]
    fn wrong_problem_is_unsupported() {
        let p = ProblemSpec::kdv().unwrap();
        assert!(matches!(
            reference_oracle_ode(&p, &[0.0, 1.0]),
            Err(Error::Unsupported(_))
        ));
    }
}
