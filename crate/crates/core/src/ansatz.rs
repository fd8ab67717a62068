//! Per-window trial solutions.
//!
//! In hard mode the solution on window `[t_N, t_{N+1}]` blends the
//! predecessor term (the initial-condition series on the first window, the
//! frozen network of the previous window afterwards) with the current
//! network through interpolation polynomials in `τ = (t − t_N)/(t_{N+1} − t_N)`:
//!
//! ```text
//! u(x, t) = h_prev(τ)·P(x, t) + h_next(τ)·M(x)·f(x, t, θ)
//! ```
//!
//! The polynomials equal `(1, 0)` at `τ = 0` and `(0, 1)` at `τ = 1` with
//! all derivatives up to order `m` vanishing at both ends, so the value and
//! first `m` time derivatives match across every window boundary for any
//! parameters. `M(x)` is an optional spatial Dirichlet mask. Soft mode uses
//! the masked network alone and leaves continuity to penalty terms.

use std::sync::Arc;

use crate::diffengine::{Jet, JetScalar, ParameterVector};
use crate::error::{Error, Result};
use crate::network::{forward_generic, glorot_init, NetworkConfig};

/// Slack allowed when localizing a time that sits on a window boundary.
const TAU_SLACK: f64 = 1e-12;

/// Uniform partition of `[t_start, t_end]` into `nt` windows.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeWindowPartition {
    t_start: f64,
    t_end: f64,
    nt: usize,
    boundaries: Vec<f64>,
}

impl TimeWindowPartition {
    pub fn new(t_start: f64, t_end: f64, nt: usize) -> Result<Self> {
        if nt == 0 {
            return Err(Error::config("need at least one time window"));
        }
        if !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::config(format!(
                "invalid time interval [{t_start}, {t_end}]"
            )));
        }
        let dt = (t_end - t_start) / nt as f64;
        let mut boundaries: Vec<f64> = (0..nt).map(|i| t_start + i as f64 * dt).collect();
        boundaries.push(t_end);
        Ok(TimeWindowPartition {
            t_start,
            t_end,
            nt,
            boundaries,
        })
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn window_length(&self) -> f64 {
        (self.t_end - self.t_start) / self.nt as f64
    }

    /// `(t_N, t_{N+1})` of the 1-based window `w`.
    pub fn window(&self, w: usize) -> (f64, f64) {
        assert!(w >= 1 && w <= self.nt, "window {w} outside 1..={}", self.nt);
        (self.boundaries[w - 1], self.boundaries[w])
    }

    /// 1-based window containing `t`; boundary times go to the earlier window.
    pub fn locate(&self, t: f64) -> Result<usize> {
        let len = self.window_length();
        if t < self.t_start - TAU_SLACK * len || t > self.t_end + TAU_SLACK * len {
            return Err(Error::contract(format!(
                "time {t} outside [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        let w = self.boundaries[1..]
            .iter()
            .position(|&b| t <= b)
            .unwrap_or(self.nt - 1);
        Ok(w + 1)
    }
}

/// Required smoothness `C^m` across window boundaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContinuityOrder(u8);

impl ContinuityOrder {
    pub fn new(m: usize) -> Result<Self> {
        if m > 2 {
            return Err(Error::config(format!("continuity order {m} outside 0..=2")));
        }
        Ok(ContinuityOrder(m as u8))
    }

    /// One less than the highest time derivative of the equation.
    pub fn for_time_order(time_order: usize) -> Result<Self> {
        if time_order == 0 {
            return Err(Error::config("time order must be >= 1"));
        }
        ContinuityOrder::new(time_order - 1)
    }

    pub fn m(&self) -> usize {
        self.0 as usize
    }
}

/// Ascending coefficients of `h_next(τ)` per continuity order.
fn h_next_poly(m: ContinuityOrder) -> &'static [f64] {
    match m.0 {
        0 => &[0.0, 1.0],
        1 => &[0.0, 0.0, 3.0, -2.0],
        _ => &[0.0, 0.0, 0.0, 10.0, -15.0, 6.0],
    }
}

/// Ascending coefficients of `h_prev(τ)` per continuity order.
fn h_prev_poly(m: ContinuityOrder) -> &'static [f64] {
    match m.0 {
        0 => &[1.0, -1.0],
        1 => &[1.0, 0.0, -3.0, 2.0],
        _ => &[1.0, 0.0, 0.0, -10.0, 15.0, -6.0],
    }
}

fn horner(poly: &[f64], x: f64) -> f64 {
    poly.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn horner_jet<T: JetScalar>(poly: &[f64], x: &Jet<T>) -> Jet<T> {
    let mut acc = Jet::constant(T::from_f64(0.0), x.order());
    for &c in poly.iter().rev() {
        acc = (acc * *x).shift(c);
    }
    acc
}

fn check_tau(tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::contract(format!("tau {tau} outside [0, 1]")));
    }
    Ok(())
}

/// Interpolation pair `(h_prev(τ), h_next(τ))` for continuity order `m`.
pub fn interp(m: ContinuityOrder, tau: f64) -> Result<(f64, f64)> {
    check_tau(tau)?;
    Ok((horner(h_prev_poly(m), tau), horner(h_next_poly(m), tau)))
}

/// [`interp`] on a jet in `τ`.
pub fn interp_jet<T: JetScalar>(m: ContinuityOrder, tau: &Jet<T>) -> Result<(Jet<T>, Jet<T>)> {
    check_tau(tau.value().value())?;
    Ok((horner_jet(h_prev_poly(m), tau), horner_jet(h_next_poly(m), tau)))
}

/// One initial-condition function `g_k(x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IcTerm {
    Constant(f64),
    /// `a·sin(x)`
    ScaledSin(f64),
    /// `cos(πx)`
    CosPi,
    /// `x²·cos(πx)`
    XSquaredCosPi,
}

impl IcTerm {
    pub fn eval<T: JetScalar>(&self, x: &Jet<T>) -> Jet<T> {
        let order = x.order();
        match *self {
            IcTerm::Constant(c) => Jet::constant(T::from_f64(c), order),
            IcTerm::ScaledSin(a) => x.sin().scale(a),
            IcTerm::CosPi => x.scale(std::f64::consts::PI).cos(),
            IcTerm::XSquaredCosPi => *x * *x * x.scale(std::f64::consts::PI).cos(),
        }
    }
}

/// `g(x, t) = Σ_{k<M} tᵏ/k!·g_k(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialConditionSeries {
    terms: Vec<IcTerm>,
}

impl InitialConditionSeries {
    pub fn new(terms: Vec<IcTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::config("initial-condition series needs at least one term"));
        }
        Ok(InitialConditionSeries { terms })
    }

    /// Number of terms `M`.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[IcTerm] {
        &self.terms
    }

    /// `g_k(x)` as a plain value.
    pub fn term_value(&self, k: usize, x: f64) -> f64 {
        self.terms[k].eval(&Jet::constant(x, 0)).value()
    }
}

/// Evaluate the truncated series with jets in both `x` and `t`.
pub fn ic_series_eval<T: JetScalar>(
    series: &InitialConditionSeries,
    x: &Jet<T>,
    t: &Jet<T>,
) -> Jet<T> {
    let order = t.order();
    let mut power = Jet::constant(T::from_f64(1.0), order);
    let mut factorial = 1.0;
    let mut acc = Jet::constant(T::from_f64(0.0), order);
    for (k, term) in series.terms.iter().enumerate() {
        if k > 0 {
            power = power * *t;
            factorial *= k as f64;
        }
        acc = acc + (power * term.eval(x)).scale(1.0 / factorial);
    }
    acc
}

/// `(x − a)(b − x)`, zero at both ends of `[a, b]`.
pub fn dirichlet_mask(x: f64, domain: (f64, f64)) -> f64 {
    (x - domain.0) * (domain.1 - x)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpatialMask {
    None,
    Dirichlet(f64, f64),
}

impl SpatialMask {
    pub fn eval<T: JetScalar>(&self, x: &Jet<T>) -> Option<Jet<T>> {
        match *self {
            SpatialMask::None => None,
            SpatialMask::Dirichlet(a, b) => Some(x.shift(-a) * (-*x).shift(b)),
        }
    }

    pub fn apply<T: JetScalar>(&self, x: &Jet<T>, f: Jet<T>) -> Jet<T> {
        match self.eval(x) {
            Some(mask) => mask * f,
            None => f,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Hard,
    Soft,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Hard => "hard",
            Mode::Soft => "soft",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hard" | "hcs" => Ok(Mode::Hard),
            "soft" | "scs" => Ok(Mode::Soft),
            _ => Err(Error::config(format!("unknown mode '{s}'"))),
        }
    }
}

/// A network together with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowNet {
    pub config: NetworkConfig,
    pub params: ParameterVector,
}

impl WindowNet {
    pub fn new(config: NetworkConfig, params: ParameterVector) -> Result<Self> {
        if params.layout() != config.layout().as_slice() {
            return Err(Error::contract("parameters do not match the network layout"));
        }
        Ok(WindowNet { config, params })
    }

    pub fn glorot(config: NetworkConfig, seed: u64) -> Self {
        let params = glorot_init(&config, seed);
        WindowNet { config, params }
    }

    pub fn eval_with<T: JetScalar>(&self, theta: &[T], x: &Jet<T>, t: &Jet<T>) -> Jet<T> {
        let feats = self.config.features(Some(x), t);
        forward_generic(self.params.layout(), theta, &feats).expect("validated layout")
    }

    pub fn eval(&self, x: &Jet, t: &Jet) -> Jet {
        self.eval_with(self.params.values(), x, t)
    }
}

/// The term blended against the current network.
#[derive(Clone, Debug)]
pub enum Predecessor {
    Initial(InitialConditionSeries),
    /// Network of the previous window, frozen.
    Frozen(Arc<WindowNet>),
}

#[derive(Clone, Debug)]
pub struct WindowAnsatz {
    /// 1-based window index.
    pub window: usize,
    pub partition: TimeWindowPartition,
    pub order: ContinuityOrder,
    pub net: WindowNet,
    pub predecessor: Predecessor,
    pub mask: SpatialMask,
    pub mode: Mode,
}

impl WindowAnsatz {
    pub fn bounds(&self) -> (f64, f64) {
        self.partition.window(self.window)
    }

    /// Normalized window coordinate as a jet; errors outside the window.
    pub fn tau_jet<T: JetScalar>(&self, t: &Jet<T>) -> Result<Jet<T>> {
        let (lo, hi) = self.bounds();
        let len = hi - lo;
        let mut tau = t.shift(-lo).scale(1.0 / len);
        let v = tau.value().value();
        if !(-TAU_SLACK..=1.0 + TAU_SLACK).contains(&v) {
            return Err(Error::contract(format!(
                "time {} outside window {} [{lo}, {hi}]",
                t.value().value(),
                self.window
            )));
        }
        if !(0.0..=1.0).contains(&v) {
            // pin boundary round-off onto the window without touching
            // the derivative coefficients
            tau = tau.shift(v.clamp(0.0, 1.0) - v);
        }
        Ok(tau)
    }

    /// Predecessor term `P(x, t)`: the IC series, or the masked frozen net.
    pub fn predecessor_jet<T: JetScalar>(&self, x: &Jet<T>, t: &Jet<T>) -> Jet<T> {
        match &self.predecessor {
            Predecessor::Initial(series) => ic_series_eval(series, x, t),
            Predecessor::Frozen(net) => {
                let theta: Vec<T> = net.params.values().iter().map(|&v| T::from_f64(v)).collect();
                self.mask.apply(x, net.eval_with(&theta, x, t))
            }
        }
    }

    /// Blend a precomputed predecessor jet with the raw network jet `f`.
    pub fn compose<T: JetScalar>(
        &self,
        x: &Jet<T>,
        t: &Jet<T>,
        predecessor: &Jet<T>,
        f: &Jet<T>,
    ) -> Result<Jet<T>> {
        let tau = self.tau_jet(t)?;
        let masked = self.mask.apply(x, *f);
        match self.mode {
            Mode::Soft => Ok(masked),
            Mode::Hard => {
                let (h_prev, h_next) = interp_jet(self.order, &tau)?;
                Ok(h_prev * *predecessor + h_next * masked)
            }
        }
    }

    /// Full evaluation with parameters `theta` for the current network.
    pub fn eval_with<T: JetScalar>(&self, theta: &[T], x: &Jet<T>, t: &Jet<T>) -> Result<Jet<T>> {
        let f = self.net.eval_with(theta, x, t);
        let pred = match self.mode {
            Mode::Hard => self.predecessor_jet(x, t),
            Mode::Soft => Jet::constant(T::from_f64(0.0), t.order()),
        };
        self.compose(x, t, &pred, &f)
    }
}

/// Evaluate a window's trial solution with its own parameters.
pub fn ansatz_eval(ansatz: &WindowAnsatz, x: &Jet, t: &Jet) -> Result<Jet> {
    ansatz.eval_with(ansatz.net.params.values(), x, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{PeriodicEmbedding, SpatialInput};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn m(k: usize) -> ContinuityOrder {
        ContinuityOrder::new(k).unwrap()
    }

    #[test]
    fn interpolation_table_values() {
        assert_eq!(interp(m(0), 0.25).unwrap(), (0.75, 0.25));
        assert_eq!(interp(m(1), 0.5).unwrap(), (0.5, 0.5));
        assert_eq!(interp(m(2), 0.0).unwrap(), (1.0, 0.0));
        assert_eq!(interp(m(2), 1.0).unwrap(), (0.0, 1.0));
        // 1 − 6/32 + 15/16 − 10/8 = 1/2
        let (p, n) = interp(m(2), 0.5).unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(n, 0.5, epsilon = 1e-15);
        assert!(interp(m(1), 1.5).is_err());
        assert!(interp(m(0), -0.1).is_err());
    }

    #[test]
    fn partition_of_unity_and_endpoint_derivatives() {
        for k in 0..=2 {
            for i in 0..=1000 {
                let tau = i as f64 / 1000.0;
                let (p, n) = interp(m(k), tau).unwrap();
                assert!((p + n - 1.0).abs() < 1e-14);
            }
            for tau in [0.0, 1.0] {
                let (p, n) = interp_jet(m(k), &Jet::lift(tau, 1.0, 3).unwrap()).unwrap();
                for j in 1..=k {
                    assert!(p.derivative(j).abs() < 1e-12);
                    assert!(n.derivative(j).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn partition_is_uniform() {
        let p = TimeWindowPartition::new(0.0, 1.0, 4).unwrap();
        assert_eq!(p.boundaries(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(p.window(2), (0.25, 0.5));
        assert_eq!(p.locate(0.25).unwrap(), 1);
        assert_eq!(p.locate(0.26).unwrap(), 2);
        assert_eq!(p.locate(1.0).unwrap(), 4);
        assert!(p.locate(1.5).is_err());
        assert!(TimeWindowPartition::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn ic_series_examples() {
        let x0 = 0.8;
        let wave = InitialConditionSeries::new(vec![IcTerm::ScaledSin(1.0), IcTerm::ScaledSin(3.0)])
            .unwrap();
        let v = ic_series_eval(&wave, &Jet::constant(x0, 1), &Jet::lift(0.0, 1.0, 1).unwrap());
        assert_abs_diff_eq!(v.value(), x0.sin(), epsilon = 1e-15);

        let adv = InitialConditionSeries::new(vec![IcTerm::ScaledSin(1.0)]).unwrap();
        let v = ic_series_eval(&adv, &Jet::constant(x0, 1), &Jet::lift(0.37, 1.0, 1).unwrap());
        assert_eq!(v.coeffs(), &[x0.sin(), 0.0]);

        let jerk = InitialConditionSeries::new(vec![
            IcTerm::Constant(0.0),
            IcTerm::Constant(1.0),
            IcTerm::Constant(1.0),
        ])
        .unwrap();
        let at = |t: f64| ic_series_eval(&jerk, &Jet::constant(0.0, 2), &Jet::lift(t, 1.0, 2).unwrap());
        assert_abs_diff_eq!(at(0.6).value(), 0.6 + 0.18, epsilon = 1e-15);
        assert_eq!(at(0.0).derivative(1), 1.0);
        assert_eq!(at(0.0).derivative(2), 1.0);
    }

    #[test]
    fn mask_examples() {
        assert_eq!(dirichlet_mask(0.0, (0.0, PI)), 0.0);
        assert_eq!(dirichlet_mask(PI, (0.0, PI)), 0.0);
        assert_abs_diff_eq!(dirichlet_mask(PI / 2.0, (0.0, PI)), PI * PI / 4.0, epsilon = 1e-15);
    }

    fn advection_window(mode: Mode, w: usize, prev: Option<Arc<WindowNet>>) -> WindowAnsatz {
        let cfg = NetworkConfig::new(
            2,
            6,
            SpatialInput::Periodic(PeriodicEmbedding::new(1.0, 1).unwrap()),
        )
        .unwrap();
        WindowAnsatz {
            window: w,
            partition: TimeWindowPartition::new(0.0, 1.0, 4).unwrap(),
            order: m(0),
            net: WindowNet::glorot(cfg, 40 + w as u64),
            predecessor: match prev {
                Some(p) => Predecessor::Frozen(p),
                None => Predecessor::Initial(
                    InitialConditionSeries::new(vec![IcTerm::ScaledSin(1.0)]).unwrap(),
                ),
            },
            mask: SpatialMask::None,
            mode,
        }
    }

    #[test]
    fn hard_window_start_equals_predecessor() {
        let first = advection_window(Mode::Hard, 1, None);
        let x = Jet::constant(1.1, 1);
        let t0 = Jet::lift(0.0, 1.0, 1).unwrap();
        let u = ansatz_eval(&first, &x, &t0).unwrap();
        assert_abs_diff_eq!(u.value(), 1.1f64.sin(), epsilon = 1e-15);

        let second = advection_window(Mode::Hard, 2, Some(Arc::new(first.net.clone())));
        let t1 = Jet::lift(0.25, 1.0, 1).unwrap();
        let u1 = ansatz_eval(&first, &x, &t1).unwrap();
        let u2 = ansatz_eval(&second, &x, &t1).unwrap();
        assert!((u1.value() - u2.value()).abs() < 1e-14);
    }

    #[test]
    fn time_outside_window_is_rejected() {
        let a = advection_window(Mode::Hard, 2, None);
        let x = Jet::constant(0.0, 0);
        assert!(ansatz_eval(&a, &x, &Jet::constant(0.6, 0)).is_err());
        assert!(ansatz_eval(&a, &x, &Jet::constant(0.3, 0)).is_ok());
    }

    #[test]
    fn soft_mode_is_raw_network() {
        let a = advection_window(Mode::Soft, 1, None);
        let x = Jet::constant(0.4, 0);
        let t = Jet::constant(0.1, 0);
        let u = ansatz_eval(&a, &x, &t).unwrap();
        assert_eq!(u.value(), a.net.eval(&x, &t).value());
    }
}
