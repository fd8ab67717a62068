use std::collections::VecDeque;

use crate::diffengine::ParameterVector;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerSchedule {
    pub adam_step: f64,
    pub adam_iters: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub lbfgs_max_iters: usize,
    pub lbfgs_history: usize,
    pub loss_tolerance: f64,
    pub ma_window: usize,
}

impl Default for OptimizerSchedule {
    fn default() -> Self {
        OptimizerSchedule {
            adam_step: 1e-3,
            adam_iters: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            lbfgs_max_iters: 0,
            lbfgs_history: 20,
            loss_tolerance: 1e-6,
            ma_window: 5,
        }
    }
}

impl OptimizerSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.adam_step > 0.0) || !(self.loss_tolerance > 0.0) {
            return Err(Error::config("adam_step and loss_tolerance must be positive"));
        }
        if self.lbfgs_history == 0 {
            return Err(Error::config("lbfgs_history must be >= 1"));
        }
        if self.ma_window != 5 {
            return Err(Error::config("the moving-average window is fixed at 5"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::config("Adam betas must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvergedReason {
    Tolerance,
    MaxIters,
    LineSearchFailure,
}

impl ConvergedReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConvergedReason::Tolerance => "tolerance",
            ConvergedReason::MaxIters => "max_iters",
            ConvergedReason::LineSearchFailure => "line_search_failure",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamMoments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LbfgsMemory {
    pub s: VecDeque<Vec<f64>>,
    pub y: VecDeque<Vec<f64>>,
    pub rho: VecDeque<f64>,
}

impl LbfgsMemory {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>, history: usize) -> bool {
        let sy = dot(&s, &y);
        if sy <= 1e-10 {
            return false;
        }
        if self.s.len() == history {
            self.s.pop_front();
            self.y.pop_front();
            self.rho.pop_front();
        }
        self.s.push_back(s);
        self.y.push_back(y);
        self.rho.push_back(1.0 / sy);
        true
    }

    /// Two-loop recursion: `−H·g`.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let k = self.s.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            alpha[i] = self.rho[i] * dot(&self.s[i], &q);
            axpy(-alpha[i], &self.y[i], &mut q);
        }
        if let (Some(s), Some(y)) = (self.s.back(), self.y.back()) {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for i in 0..k {
            let beta = self.rho[i] * dot(&self.y[i], &q);
            axpy(alpha[i] - beta, &self.s[i], &mut q);
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }
}

/// Optimizer state for one window.
#[derive(Clone, Debug)]
pub struct WindowTrainState {
    pub params: ParameterVector,
    pub adam: AdamMoments,
    pub lbfgs: LbfgsMemory,
    /// Objective values after each L-BFGS iteration (append-only).
    pub loss_history: Vec<f64>,
    pub converged_reason: Option<ConvergedReason>,
    /// Objective and gradient at `params`, when known.
    current: Option<(f64, Vec<f64>)>,
}

impl WindowTrainState {
    pub fn new(params: ParameterVector) -> Self {
        let n = params.len();
        WindowTrainState {
            params,
            adam: AdamMoments {
                m: vec![0.0; n],
                v: vec![0.0; n],
                step: 0,
            },
            lbfgs: LbfgsMemory::default(),
            loss_history: Vec::new(),
            converged_reason: None,
            current: None,
        }
    }

    /// Forget the cached objective, e.g. after parameters changed outside
    /// L-BFGS.
    pub fn invalidate(&mut self) {
        self.current = None;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// One bias-corrected Adam update with a fixed step size.
pub fn adam_step(state: &mut WindowTrainState, gradient: &[f64], schedule: &OptimizerSchedule) -> Result<()> {
    if gradient.len() != state.params.len() {
        return Err(Error::contract("gradient length does not match parameters"));
    }
    if gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("Adam gradient".into()));
    }
    let (b1, b2) = (schedule.adam_beta1, schedule.adam_beta2);
    let a = &mut state.adam;
    a.step += 1;
    let c1 = 1.0 - b1.powi(a.step as i32);
    let c2 = 1.0 - b2.powi(a.step as i32);
    let theta = state.params.values_mut();
    for i in 0..theta.len() {
        let g = gradient[i];
        a.m[i] = b1 * a.m[i] + (1.0 - b1) * g;
        a.v[i] = b2 * a.v[i] + (1.0 - b2) * g * g;
        let m_hat = a.m[i] / c1;
        let v_hat = a.v[i] / c2;
        theta[i] -= schedule.adam_step * m_hat / (v_hat.sqrt() + schedule.adam_eps);
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Adam update".into()));
    }
    state.current = None;
    Ok(())
}

/// Result of one L-BFGS iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LbfgsOutcome {
    /// A step satisfying the strong Wolfe conditions was taken.
    Accepted { loss: f64 },
    /// The gradient vanishes; nothing to do.
    Stationary { loss: f64 },
    /// No acceptable step; parameters hold the best point seen.
    LineSearchFailed { loss: f64 },
}

/// Objective: value at `theta`, gradient written to the second argument.
pub type Objective<'a> = dyn FnMut(&[f64], &mut [f64]) -> Result<f64> + 'a;

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_LINE_EVALS: usize = 25;

struct Trial {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    d: f64,
}

/// One L-BFGS iteration with a strong-Wolfe line search.
pub fn lbfgs_step(
    state: &mut WindowTrainState,
    loss_fn: &mut Objective<'_>,
    schedule: &OptimizerSchedule,
) -> Result<LbfgsOutcome> {
    let n = state.params.len();
    let (f0, g0) = match state.current.take() {
        Some(c) => c,
        None => {
            let mut g = vec![0.0; n];
            let f = loss_fn(state.params.values(), &mut g)?;
            (f, g)
        }
    };
    if !f0.is_finite() {
        return Err(Error::NonFinite(format!("L-BFGS objective {f0}")));
    }
    let gnorm = dot(&g0, &g0).sqrt();
    if gnorm == 0.0 {
        state.current = Some((f0, g0));
        return Ok(LbfgsOutcome::Stationary { loss: f0 });
    }
    let mut dir = state.lbfgs.direction(&g0);
    let mut dphi0 = dot(&g0, &dir);
    if !(dphi0 < 0.0) {
        state.lbfgs = LbfgsMemory::default();
        dir = g0.iter().map(|g| -g).collect();
        dphi0 = -gnorm * gnorm;
    }
    let alpha0 = if state.lbfgs.is_empty() {
        (1.0 / g0.iter().map(|g| g.abs()).sum::<f64>()).min(1.0)
    } else {
        1.0
    };

    let x0 = state.params.values().to_vec();
    let mut evals = 0;
    let mut best: Option<Trial> = None;
    let mut eval = |alpha: f64, evals: &mut usize, best: &mut Option<Trial>| -> Result<Trial> {
        *evals += 1;
        let x: Vec<f64> = x0.iter().zip(&dir).map(|(x, d)| x + alpha * d).collect();
        let mut g = vec![0.0; n];
        let f = match loss_fn(&x, &mut g) {
            Ok(f) => f,
            Err(Error::NonFinite(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        let d = if f.is_finite() { dot(&g, &dir) } else { f64::NAN };
        let t = Trial { alpha, f, g, d };
        if f.is_finite() && best.as_ref().is_none_or(|b| f < b.f) {
            *best = Some(Trial { g: t.g.clone(), ..t });
        }
        Ok(t)
    };

    let armijo = |t: &Trial| t.f <= f0 + C1 * t.alpha * dphi0;
    let curvature = |t: &Trial| t.d.abs() <= -C2 * dphi0;

    let mut found: Option<Trial> = None;
    let mut prev = Trial {
        alpha: 0.0,
        f: f0,
        g: g0.clone(),
        d: dphi0,
    };
    let mut alpha = alpha0;
    let mut bracket: Option<(Trial, Trial)> = None;
    let mut first = true;
    while evals < MAX_LINE_EVALS {
        let t = eval(alpha, &mut evals, &mut best)?;
        if !t.f.is_finite() || !armijo(&t) || (!first && t.f >= prev.f) {
            bracket = Some((prev, t));
            break;
        }
        if curvature(&t) {
            found = Some(t);
            break;
        }
        if t.d >= 0.0 {
            bracket = Some((t, prev));
            break;
        }
        first = false;
        alpha = t.alpha * 2.0;
        prev = t;
    }

    if found.is_none() {
        if let Some((mut lo, mut hi)) = bracket {
            while evals < MAX_LINE_EVALS {
                let width = (hi.alpha - lo.alpha).abs();
                if width <= 1e-14 * lo.alpha.abs().max(hi.alpha.abs()).max(1e-300) {
                    break;
                }
                let a = zoom_point(&lo, &hi);
                let t = eval(a, &mut evals, &mut best)?;
                if !t.f.is_finite() || !armijo(&t) || t.f >= lo.f {
                    hi = t;
                } else {
                    if curvature(&t) {
                        found = Some(t);
                        break;
                    }
                    if t.d * (hi.alpha - lo.alpha) >= 0.0 {
                        hi = lo;
                    }
                    lo = t;
                }
            }
        }
    }

    match found {
        Some(t) => {
            let s: Vec<f64> = dir.iter().map(|d| t.alpha * d).collect();
            let y: Vec<f64> = t.g.iter().zip(&g0).map(|(a, b)| a - b).collect();
            state.lbfgs.push(s, y, schedule.lbfgs_history);
            let x: Vec<f64> = x0.iter().zip(&dir).map(|(x, d)| x + t.alpha * d).collect();
            state.params.values_mut().copy_from_slice(&x);
            state.current = Some((t.f, t.g));
            state.loss_history.push(t.f);
            Ok(LbfgsOutcome::Accepted { loss: t.f })
        }
        None => {
            let loss = match best {
                Some(b) if b.f < f0 => {
                    let x: Vec<f64> = x0.iter().zip(&dir).map(|(x, d)| x + b.alpha * d).collect();
                    state.params.values_mut().copy_from_slice(&x);
                    state.current = Some((b.f, b.g));
                    b.f
                }
                _ => {
                    state.current = Some((f0, g0));
                    f0
                }
            };
            state.converged_reason = Some(ConvergedReason::LineSearchFailure);
            Ok(LbfgsOutcome::LineSearchFailed { loss })
        }
    }
}

/// Safeguarded cubic interpolation inside the bracket.
fn zoom_point(lo: &Trial, hi: &Trial) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let (left, right) = (a.min(b), a.max(b));
    let mid = 0.5 * (a + b);
    if !hi.f.is_finite() || !hi.d.is_finite() {
        return mid;
    }
    let d1 = lo.d + hi.d - 3.0 * (lo.f - hi.f) / (a - b);
    let disc = d1 * d1 - lo.d * hi.d;
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let denom = hi.d - lo.d + 2.0 * d2;
    if denom == 0.0 {
        return mid;
    }
    let c = b - (b - a) * (hi.d + d2 - d1) / denom;
    let margin = 0.1 * (right - left);
    if c.is_finite() && c > left + margin && c < right - margin {
        c
    } else {
        mid
    }
}

/// True once the mean of the last `ma_window` absolute loss changes is below
/// the tolerance.
pub fn convergence_check(loss_history: &[f64], schedule: &OptimizerSchedule) -> bool {
    let w = schedule.ma_window;
    if loss_history.len() < w + 1 {
        return false;
    }
    let tail = &loss_history[loss_history.len() - w - 1..];
    let mean = tail.windows(2).map(|p| (p[1] - p[0]).abs()).sum::<f64>() / w as f64;
    mean < schedule.loss_tolerance
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffengine::LayerShape;

    fn state(values: Vec<f64>) -> WindowTrainState {
        // fan_in = n − 1 plus one bias gives exactly n parameters
        let layout = vec![LayerShape::new(values.len() - 1, 1)];
        WindowTrainState::new(ParameterVector::new(layout, values).unwrap())
    }

    fn schedule() -> OptimizerSchedule {
        OptimizerSchedule {
            adam_step: 1e-3,
            ..OptimizerSchedule::default()
        }
    }

    #[test]
    fn adam_zero_gradient_only_counts() {
        let mut s = state(vec![1.0, -2.0]);
        let before = s.params.clone();
        adam_step(&mut s, &[0.0, 0.0], &schedule()).unwrap();
        assert_eq!(s.params, before);
        assert_eq!(s.adam.step, 1);
    }

    #[test]
    fn adam_first_step_moves_by_the_step_size() {
        let mut s = state(vec![0.5]);
        adam_step(&mut s, &[1.0], &schedule()).unwrap();
        let moved = 0.5 - s.params.values()[0];
        // m̂ = 1, v̂ = 1, so the move is step/(1 + ε)
        assert!((moved - 1e-3 / (1.0 + 1e-8)).abs() < 1e-15);
        let mut t = state(vec![0.5]);
        adam_step(&mut t, &[1.0], &schedule()).unwrap();
        assert_eq!(s.params, t.params);
        assert!(adam_step(&mut t, &[f64::NAN], &schedule()).is_err());
    }

    fn quadratic(diag: Vec<f64>) -> impl FnMut(&[f64], &mut [f64]) -> Result<f64> {
        move |x: &[f64], g: &mut [f64]| {
            let mut f = 0.0;
            for i in 0..x.len() {
                let d = diag.get(i).copied().unwrap_or(1.0);
                f += 0.5 * d * x[i] * x[i];
                g[i] = d * x[i];
            }
            Ok(f)
        }
    }

    #[test]
    fn lbfgs_solves_a_diagonal_quadratic() {
        let diag = vec![1.0, 3.0, 10.0, 0.5, 7.0, 2.0];
        let mut s = state(vec![1.0, -2.0, 0.3, 4.0, -1.0, 2.5]);
        let dim = s.params.len();
        let mut f = quadratic(diag);
        let sched = schedule();
        let mut last = f64::INFINITY;
        // Wolfe steps are inexact, so finite termination in dim steps does not apply.
        for _ in 0..4 * dim {
            match lbfgs_step(&mut s, &mut f, &sched).unwrap() {
                LbfgsOutcome::Accepted { loss } | LbfgsOutcome::Stationary { loss } => {
                    assert!(loss <= last);
                    last = loss;
                }
                LbfgsOutcome::LineSearchFailed { loss } => panic!("line search failed at {loss:e}"),
            }
            if last < 1e-12 {
                break;
            }
        }
        assert!(last < 1e-12, "{last:e}");
        assert!(s.lbfgs.len() <= sched.lbfgs_history);
    }

    #[test]
    fn lbfgs_stationary_start_does_not_move() {
        let mut s = state(vec![0.0, 0.0]);
        let before = s.params.clone();
        let mut f = quadratic(vec![1.0, 2.0]);
        let out = lbfgs_step(&mut s, &mut f, &schedule()).unwrap();
        assert_eq!(out, LbfgsOutcome::Stationary { loss: 0.0 });
        assert_eq!(s.params, before);
    }

    #[test]
    fn lbfgs_history_one_in_one_dimension() {
        // one weight, one bias: a 1-D quadratic in the weight only
        let mut s = WindowTrainState::new(ParameterVector::new(vec![LayerShape::new(1, 1)], vec![3.0, 0.0]).unwrap());
        let mut f = |x: &[f64], g: &mut [f64]| -> Result<f64> {
            g[0] = 4.0 * (x[0] - 1.5);
            g[1] = 0.0;
            Ok(2.0 * (x[0] - 1.5).powi(2))
        };
        let sched = OptimizerSchedule {
            lbfgs_history: 1,
            ..schedule()
        };
        for _ in 0..20 {
            if let LbfgsOutcome::Stationary { .. } = lbfgs_step(&mut s, &mut f, &sched).unwrap() {
                break;
            }
            if (s.params.values()[0] - 1.5).abs() < 1e-12 {
                break;
            }
        }
        assert!((s.params.values()[0] - 1.5).abs() < 1e-9, "{}", s.params.values()[0]);
    }

    #[test]
    fn convergence_check_examples() {
        let sched = OptimizerSchedule {
            loss_tolerance: 1e-6,
            ..schedule()
        };
        assert!(convergence_check(&[1.0; 6], &sched));
        assert!(!convergence_check(&[1.0; 5], &sched));
        let mut h = vec![1.0];
        for d in [1e-7, 1e-7, 1e-7, 1e-7, 1e-5] {
            let last = *h.last().unwrap();
            h.push(last - d);
        }
        assert!(!convergence_check(&h, &sched));
    }
}
