//! Window loss: weighted residual MSE plus, in soft mode, the penalty that
//! ties the window start to the initial condition or the previous window.
//!
//! Every trial solution is affine in the network output jets. Along `t`,
//! `u = A_t + B_t·f_t` (Cauchy product) with `A_t = h_prev·P` and
//! `B_t = h_next·mask`; along `x`, `u = A_x + B_x·f_x` with `A_x = h_prev·P`
//! and `B_x = h_next·mask`. The `A`/`B` jets do not depend on the trainable
//! parameters and are computed once per point.

use crate::ansatz::{ic_series_eval, interp, interp_jet, Mode, Predecessor, WindowAnsatz, WindowNet};
use crate::diffengine::{Jet, JetScalar, ParameterVector, Tape, Var};
use crate::error::{Error, Result};
use crate::network::batch::{backward_batch, forward_batch, JetBatch};
use crate::problems::{DerivativeSlots, ProblemSpec};

use super::sampling::PointSet;

/// Loss weights; the causal factor is `C_T(1 − t/t_max) + 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub lambda_p: f64,
    pub lambda_i: f64,
    /// Boundary penalty; boundaries are always enforced exactly, so unused.
    pub lambda_b: f64,
    pub causal_c_t: f64,
    pub causal_t_max: f64,
    /// Measure time from the window start with `t_max` the window length.
    pub causal_per_window: bool,
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_p, self.lambda_i, self.lambda_b, self.causal_c_t];
        if all.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::config("loss weights must be finite and >= 0"));
        }
        if !self.causal_per_window && !(self.causal_t_max > 0.0) {
            return Err(Error::config("causal t_max must be positive"));
        }
        Ok(())
    }

    /// Causal factor at `t` inside the window `(lo, hi)`.
    pub fn causal_at(&self, t: f64, window: (f64, f64)) -> f64 {
        if self.causal_per_window {
            let local = LossWeights {
                causal_t_max: window.1 - window.0,
                ..*self
            };
            causal_weight(t - window.0, &local)
        } else {
            causal_weight(t, self)
        }
    }
}

pub fn causal_weight(t: f64, weights: &LossWeights) -> f64 {
    weights.causal_c_t * (1.0 - t / weights.causal_t_max) + 1.0
}

/// θ-independent data for one point.
#[derive(Clone, Debug)]
struct PointData {
    weight: f64,
    feat_t: Vec<Jet>,
    a_t: Jet,
    b_t: Jet,
    feat_x: Vec<Jet>,
    a_x: Jet,
    b_x: Jet,
}

/// Network inputs and affine coefficients for a fixed set of points.
#[derive(Clone, Debug)]
pub struct PreparedBatch {
    n: usize,
    in_t: JetBatch,
    in_x: Option<JetBatch>,
    weight: Vec<f64>,
    a_t: Vec<Jet>,
    b_t: Vec<Jet>,
    a_x: Vec<Jet>,
    b_x: Vec<Jet>,
}

impl PreparedBatch {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Soft-mode penalty points at the window start.
#[derive(Clone, Debug)]
struct InterfaceData {
    input: JetBatch,
    mask: Vec<f64>,
    /// `d^j u/dt^j` targets for `j = 0..=m`, per point.
    targets: Vec<Vec<f64>>,
}

/// Everything needed to evaluate one window's loss and gradient.
#[derive(Clone, Debug)]
pub struct WindowLoss {
    problem: ProblemSpec,
    net: WindowNet,
    kt: usize,
    kx: Option<usize>,
    points: Vec<PointData>,
    interface: Option<InterfaceData>,
    lambda_p: f64,
    lambda_i: f64,
}

/// Loss value and its gradient.
#[derive(Clone, Debug)]
pub struct LossEvaluation {
    pub loss: f64,
    pub pde_loss: f64,
    pub interface_loss: f64,
    pub gradient: ParameterVector,
}

fn lift(v: f64, k: usize) -> Jet {
    Jet::lift(v, 1.0, k).expect("order checked")
}

/// Jets of a frozen network at many points along one direction.
fn frozen_jets(net: &WindowNet, xs: &[Option<f64>], ts: &[f64], along_t: bool, k: usize) -> Vec<Jet> {
    let rows: Vec<Vec<Jet>> = xs
        .iter()
        .zip(ts)
        .map(|(x, &t)| {
            let (xj, tj) = if along_t {
                (x.map(|x| Jet::constant(x, k)), lift(t, k))
            } else {
                (x.map(|x| lift(x, k)), Jet::constant(t, k))
            };
            net.config.features(xj.as_ref(), &tj)
        })
        .collect();
    if rows.is_empty() {
        return Vec::new();
    }
    let trace = forward_batch(net.params.layout(), net.params.values(), &JetBatch::from_features(k, &rows));
    (0..rows.len()).map(|p| trace.output_jet(p)).collect()
}

/// `Σ_{k≥j} b[k−j]·du[k]`: adjoint of `f` in `u = a + b·f`.
fn pull_back(b: &Jet, du: &[f64], out: &mut [f64]) {
    let k = du.len() - 1;
    for j in 0..=k {
        let mut acc = 0.0;
        for i in j..=k {
            acc += b.coeff(i - j) * du[i];
        }
        out[j] = acc;
    }
}

fn factorial(j: usize) -> f64 {
    (1..=j).map(|i| i as f64).product()
}

impl WindowLoss {
    /// Precompute point data for `collocation`; `interface_x` gives the
    /// soft-mode penalty locations at the window start (ignored in hard mode,
    /// a single point is used for ODEs).
    pub fn new(
        ansatz: &WindowAnsatz,
        problem: &ProblemSpec,
        weights: &LossWeights,
        collocation: &PointSet,
        interface_x: &[f64],
    ) -> Result<Self> {
        weights.validate()?;
        let kt = problem.time_jet_order();
        let kx = problem.space_jet_order();
        let window = ansatz.bounds();
        let n = collocation.len();
        let spatial = !problem.is_ode();
        if spatial && collocation.x.len() != n {
            return Err(Error::contract("spatial problem needs x for every point"));
        }
        let xs: Vec<Option<f64>> = (0..n)
            .map(|i| spatial.then(|| collocation.x[i]))
            .collect();

        // Predecessor jets, batched for frozen networks.
        let (pred_t, pred_x): (Vec<Jet>, Vec<Jet>) = match (ansatz.mode, &ansatz.predecessor) {
            (Mode::Soft, _) => (vec![Jet::constant(0.0, kt); n], vec![Jet::constant(0.0, kx.unwrap_or(0)); n]),
            (Mode::Hard, Predecessor::Initial(series)) => {
                let mut pt = Vec::with_capacity(n);
                let mut px = Vec::with_capacity(n);
                for (x, &t) in xs.iter().zip(&collocation.t) {
                    let x0 = x.unwrap_or(0.0);
                    pt.push(ic_series_eval(series, &Jet::constant(x0, kt), &lift(t, kt)));
                    if let Some(k) = kx {
                        px.push(ic_series_eval(series, &lift(x0, k), &Jet::constant(t, k)));
                    }
                }
                (pt, px)
            }
            (Mode::Hard, Predecessor::Frozen(prev)) => {
                let ft = frozen_jets(prev, &xs, &collocation.t, true, kt);
                let fx = match kx {
                    Some(k) => frozen_jets(prev, &xs, &collocation.t, false, k),
                    None => Vec::new(),
                };
                let pt = ft
                    .iter()
                    .zip(&xs)
                    .map(|(f, x)| ansatz.mask.apply(&Jet::constant(x.unwrap_or(0.0), kt), *f))
                    .collect();
                let px = fx
                    .iter()
                    .zip(&xs)
                    .map(|(f, x)| ansatz.mask.apply(&lift(x.unwrap_or(0.0), f.order()), *f))
                    .collect();
                (pt, px)
            }
        };

        let mut points = Vec::with_capacity(n);
        for i in 0..n {
            let (x, t) = (xs[i], collocation.t[i]);
            let x0 = x.unwrap_or(0.0);
            let tau_t = ansatz.tau_jet(&lift(t, kt))?;
            let mask_t = ansatz.mask.eval(&Jet::constant(x0, 0)).map_or(1.0, |m| m.value());
            let (a_t, b_t) = match ansatz.mode {
                Mode::Soft => (Jet::constant(0.0, kt), Jet::constant(mask_t, kt)),
                Mode::Hard => {
                    let (hp, hn) = interp_jet(ansatz.order, &tau_t)?;
                    (hp * pred_t[i], hn.scale(mask_t))
                }
            };
            let feat_t = ansatz.net.config.features(
                x.map(|x| Jet::constant(x, kt)).as_ref(),
                &lift(t, kt),
            );
            let (feat_x, a_x, b_x) = match kx {
                Some(k) => {
                    let mask_x = ansatz.mask.eval(&lift(x0, k)).unwrap_or(Jet::constant(1.0, k));
                    let (hp, hn) = match ansatz.mode {
                        Mode::Soft => (0.0, 1.0),
                        Mode::Hard => interp(ansatz.order, tau_t.value())?,
                    };
                    let a = if hp == 0.0 { Jet::constant(0.0, k) } else { pred_x[i].scale(hp) };
                    let feats = ansatz
                        .net
                        .config
                        .features(Some(&lift(x0, k)), &Jet::constant(t, k));
                    (feats, a, mask_x.scale(hn))
                }
                None => (Vec::new(), Jet::constant(0.0, 0), Jet::constant(0.0, 0)),
            };
            points.push(PointData {
                weight: weights.causal_at(t, window),
                feat_t,
                a_t,
                b_t,
                feat_x,
                a_x,
                b_x,
            });
        }

        let interface = match ansatz.mode {
            Mode::Hard => None,
            Mode::Soft => Some(Self::interface_data(ansatz, problem, interface_x)?),
        };
        Ok(WindowLoss {
            problem: problem.clone(),
            net: ansatz.net.clone(),
            kt,
            kx,
            points,
            interface,
            lambda_p: weights.lambda_p,
            lambda_i: weights.lambda_i,
        })
    }

    fn interface_data(ansatz: &WindowAnsatz, problem: &ProblemSpec, interface_x: &[f64]) -> Result<InterfaceData> {
        let m = ansatz.order.m();
        let t0 = ansatz.bounds().0;
        let xs: Vec<Option<f64>> = if problem.is_ode() {
            vec![None]
        } else {
            if interface_x.is_empty() {
                return Err(Error::config("soft mode needs interface points"));
            }
            interface_x.iter().map(|&x| Some(x)).collect()
        };
        let ts = vec![t0; xs.len()];
        let masks: Vec<f64> = xs
            .iter()
            .map(|x| ansatz.mask.eval(&Jet::constant(x.unwrap_or(0.0), 0)).map_or(1.0, |j| j.value()))
            .collect();
        let targets: Vec<Vec<f64>> = match &ansatz.predecessor {
            Predecessor::Initial(series) => xs
                .iter()
                .map(|x| (0..=m).map(|j| series.term_value(j, x.unwrap_or(0.0))).collect())
                .collect(),
            Predecessor::Frozen(prev) => frozen_jets(prev, &xs, &ts, true, m)
                .iter()
                .zip(&masks)
                .map(|(f, &mk)| (0..=m).map(|j| mk * f.derivative(j)).collect())
                .collect(),
        };
        let rows: Vec<Vec<Jet>> = xs
            .iter()
            .map(|x| {
                ansatz
                    .net
                    .config
                    .features(x.map(|x| Jet::constant(x, m)).as_ref(), &lift(t0, m))
            })
            .collect();
        Ok(InterfaceData {
            input: JetBatch::from_features(m, &rows),
            mask: masks,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn layout_len(&self) -> usize {
        self.net.params.len()
    }

    pub fn prepare_all(&self) -> PreparedBatch {
        let idx: Vec<usize> = (0..self.points.len()).collect();
        self.prepare(&idx)
    }

    pub fn prepare(&self, idx: &[usize]) -> PreparedBatch {
        let pick = |f: &dyn Fn(&PointData) -> &Vec<Jet>| -> Vec<Vec<Jet>> {
            idx.iter().map(|&i| f(&self.points[i]).clone()).collect()
        };
        let in_t = JetBatch::from_features(self.kt, &pick(&|p| &p.feat_t));
        let in_x = self.kx.map(|k| JetBatch::from_features(k, &pick(&|p| &p.feat_x)));
        let col = |f: &dyn Fn(&PointData) -> Jet| idx.iter().map(|&i| f(&self.points[i])).collect::<Vec<_>>();
        PreparedBatch {
            n: idx.len(),
            in_t,
            in_x,
            weight: idx.iter().map(|&i| self.points[i].weight).collect(),
            a_t: col(&|p| p.a_t),
            b_t: col(&|p| p.b_t),
            a_x: col(&|p| p.a_x),
            b_x: col(&|p| p.b_x),
        }
    }

    /// Total loss at `theta`; accumulates the gradient when `grad` is given.
    pub fn evaluate(&self, batch: &PreparedBatch, theta: &[f64], mut grad: Option<&mut [f64]>) -> Result<(f64, f64)> {
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let pde = self.pde_term(batch, theta, grad.as_deref_mut())?;
        let iface = match &self.interface {
            Some(data) => self.interface_term(data, theta, grad),
            None => 0.0,
        };
        let total = pde + iface;
        if !total.is_finite() {
            return Err(Error::NonFinite(format!("loss {total} (pde {pde}, interface {iface})")));
        }
        Ok((total, iface))
    }

    fn pde_term(&self, batch: &PreparedBatch, theta: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        let n = batch.n;
        if n == 0 {
            return Ok(0.0);
        }
        let layout = self.net.params.layout();
        let (kt, kx) = (self.kt, self.kx);
        let trace_t = forward_batch(layout, theta, &batch.in_t);
        let trace_x = batch.in_x.as_ref().map(|b| forward_batch(layout, theta, b));
        let want_grad = grad.is_some();
        let mut d_t = if want_grad { vec![0.0; n * (kt + 1)] } else { Vec::new() };
        let mut d_x = match (want_grad, kx) {
            (true, Some(k)) => vec![0.0; n * (k + 1)],
            _ => Vec::new(),
        };
        let scale = self.lambda_p / n as f64;
        let mut total = 0.0;
        let mut tape = Tape::with_capacity(64);
        let mut du_t = [0.0; 4];
        let mut du_x = [0.0; 4];
        for p in 0..n {
            tape.clear();
            let ut = batch.a_t[p] + batch.b_t[p] * trace_t.output_jet(p);
            let ux = trace_x.as_ref().map(|tr| batch.a_x[p] + batch.b_x[p] * tr.output_jet(p));
            let w = batch.weight[p] * scale;
            if !want_grad {
                let r = self.problem.residual(&DerivativeSlots::from_jets(&ut, ux.as_ref()));
                total += w * r * r;
                continue;
            }
            let vt = tape.vars(ut.coeffs());
            let vx = ux.map(|j| tape.vars(j.coeffs()));
            let jt = Jet::from_coeffs(&vt);
            let jx = vx.as_ref().map(|v| Jet::from_coeffs(v));
            let r = self.problem.residual(&DerivativeSlots::from_jets(&jt, jx.as_ref()));
            let rv = r.value();
            total += w * rv * rv;
            let adj = tape.gradient(r);
            let c = 2.0 * w * rv;
            for (k, v) in vt.iter().enumerate() {
                du_t[k] = c * adj.of(v);
            }
            pull_back(&batch.b_t[p], &du_t[..=kt], &mut d_t[p * (kt + 1)..(p + 1) * (kt + 1)]);
            if let (Some(vx), Some(k)) = (&vx, kx) {
                for (j, v) in vx.iter().enumerate() {
                    du_x[j] = c * adj.of(v);
                }
                pull_back(&batch.b_x[p], &du_x[..=k], &mut d_x[p * (k + 1)..(p + 1) * (k + 1)]);
            }
        }
        if let Some(g) = grad {
            backward_batch(layout, theta, &batch.in_t, &trace_t, &d_t, g);
            if let (Some(b), Some(tr)) = (&batch.in_x, &trace_x) {
                backward_batch(layout, theta, b, tr, &d_x, g);
            }
        }
        Ok(total)
    }

    fn interface_term(&self, data: &InterfaceData, theta: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let layout = self.net.params.layout();
        let trace = forward_batch(layout, theta, &data.input);
        let m = data.input.order();
        let n = data.mask.len();
        let scale = self.lambda_i / n as f64;
        let mut total = 0.0;
        let mut d = vec![0.0; n * (m + 1)];
        let out = trace.output();
        for p in 0..n {
            for j in 0..=m {
                let fj = factorial(j);
                let diff = data.mask[p] * fj * out[p * (m + 1) + j] - data.targets[p][j];
                total += scale * diff * diff;
                d[p * (m + 1) + j] = 2.0 * scale * diff * data.mask[p] * fj;
            }
        }
        if let Some(g) = grad {
            backward_batch(layout, theta, &data.input, &trace, &d, g);
        }
        total
    }
}

/// Loss and gradient of `ansatz` over `batch` at its current parameters.
pub fn assemble_loss(
    ansatz: &WindowAnsatz,
    batch: &PointSet,
    problem: &ProblemSpec,
    weights: &LossWeights,
    interface_x: &[f64],
) -> Result<LossEvaluation> {
    let wl = WindowLoss::new(ansatz, problem, weights, batch, interface_x)?;
    let prepared = wl.prepare_all();
    let mut g = vec![0.0; wl.layout_len()];
    let (loss, iface) = wl.evaluate(&prepared, ansatz.net.params.values(), Some(&mut g))?;
    Ok(LossEvaluation {
        loss,
        pde_loss: loss - iface,
        interface_loss: iface,
        gradient: ansatz.net.params.with_values(g)?,
    })
}

/// Reference loss evaluated pointwise through the generic ansatz and tape.
///
/// Slow; used to cross-check the batched path.
pub fn assemble_loss_on_tape(
    ansatz: &WindowAnsatz,
    batch: &PointSet,
    problem: &ProblemSpec,
    weights: &LossWeights,
) -> Result<LossEvaluation> {
    let tape = Tape::new();
    let theta = tape.vars(ansatz.net.params.values());
    let kt = problem.time_jet_order();
    let kx = problem.space_jet_order();
    let window = ansatz.bounds();
    let n = batch.len();
    let mut acc = Var::constant(0.0);
    for i in 0..n {
        let (x, t) = (batch.x_at(i), batch.t[i]);
        let ut = ansatz.eval_with(&theta, &Jet::constant(x, kt).cast(), &lift(t, kt).cast())?;
        let ux = match kx {
            Some(k) => Some(ansatz.eval_with(&theta, &lift(x, k).cast(), &Jet::constant(t, k).cast())?),
            None => None,
        };
        let r = problem.residual(&DerivativeSlots::from_jets(&ut, ux.as_ref()));
        acc = acc + (r * r).scale(weights.lambda_p * weights.causal_at(t, window) / n as f64);
    }
    let adj = tape.gradient(acc);
    let g: Vec<f64> = theta.iter().map(|v| adj.of(v)).collect();
    let loss = acc.value();
    Ok(LossEvaluation {
        loss,
        pde_loss: loss,
        interface_loss: 0.0,
        gradient: ansatz.net.params.with_values(g)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{ContinuityOrder, TimeWindowPartition};
    use crate::network::NetworkConfig;
    use crate::training::sampling::sample_collocation;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn weights() -> LossWeights {
        LossWeights {
            lambda_p: 1.0,
            lambda_i: 1.0,
            lambda_b: 0.0,
            causal_c_t: 10.0,
            causal_t_max: 1.0,
            causal_per_window: false,
        }
    }

    fn ansatz_for(problem: &ProblemSpec, nt: usize, window: usize, mode: Mode, seed: u64) -> WindowAnsatz {
        let partition = TimeWindowPartition::new(0.0, problem.horizon, nt).unwrap();
        let config = NetworkConfig::new(2, 8, problem.spatial_input().unwrap()).unwrap();
        let predecessor = if window == 1 {
            Predecessor::Initial(problem.ic_series.clone())
        } else {
            Predecessor::Frozen(std::sync::Arc::new(WindowNet::glorot(config, seed + 100)))
        };
        WindowAnsatz {
            window,
            partition,
            order: problem.required_continuity(),
            net: WindowNet::glorot(config, seed),
            predecessor,
            mask: problem.mask(),
            mode,
        }
    }

    #[test]
    fn causal_weight_examples() {
        let w = weights();
        assert_eq!(causal_weight(0.0, &w), 11.0);
        assert_eq!(causal_weight(1.0, &w), 1.0);
        assert_eq!(causal_weight(0.5, &w), 6.0);
        let local = LossWeights { causal_per_window: true, ..w };
        assert_eq!(local.causal_at(5.0, (5.0, 10.0)), 11.0);
        assert_eq!(local.causal_at(10.0, (5.0, 10.0)), 1.0);
    }

    #[test]
    fn batched_loss_matches_tape_for_every_problem() {
        let problems = [
            ProblemSpec::advection(30.0).unwrap(),
            ProblemSpec::wave(10.0).unwrap(),
            ProblemSpec::allen_cahn().unwrap(),
            ProblemSpec::kdv().unwrap(),
            ProblemSpec::jerk().unwrap(),
        ];
        for (pi, problem) in problems.iter().enumerate() {
            for window in [1, 2] {
                let a = ansatz_for(problem, 4, window, Mode::Hard, 7 + pi as u64);
                let mut w = weights();
                w.causal_t_max = problem.horizon;
                w.causal_per_window = problem.is_ode();
                let pts = sample_collocation(a.bounds(), problem.spatial_domain, 17, 3).unwrap();
                let fast = assemble_loss(&a, &pts, problem, &w, &[]).unwrap();
                let slow = assemble_loss_on_tape(&a, &pts, problem, &w).unwrap();
                assert_relative_eq!(fast.loss, slow.loss, max_relative = 1e-10);
                for (g, h) in fast.gradient.values().iter().zip(slow.gradient.values()) {
                    assert!((g - h).abs() <= 1e-9 * (1.0 + h.abs()), "{} w{window}: {g} vs {h}", problem.name());
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences_in_soft_mode() {
        let problem = ProblemSpec::wave(1.0).unwrap();
        let a = ansatz_for(&problem, 4, 2, Mode::Soft, 5);
        let pts = sample_collocation(a.bounds(), problem.spatial_domain, 9, 4).unwrap();
        let ix = [0.3, 1.1, 2.0];
        let w = LossWeights { causal_t_max: problem.horizon, ..weights() };
        let wl = WindowLoss::new(&a, &problem, &w, &pts, &ix).unwrap();
        let b = wl.prepare_all();
        let theta = a.net.params.values().to_vec();
        let mut g = vec![0.0; theta.len()];
        wl.evaluate(&b, &theta, Some(&mut g)).unwrap();
        let h = 1e-6;
        let mut err = 0.0;
        let mut norm = 0.0;
        for i in 0..theta.len() {
            let mut p = theta.clone();
            p[i] += h;
            let up = wl.evaluate(&b, &p, None).unwrap().0;
            p[i] -= 2.0 * h;
            let dn = wl.evaluate(&b, &p, None).unwrap().0;
            let fd = (up - dn) / (2.0 * h);
            err += (fd - g[i]).powi(2);
            norm += g[i] * g[i];
        }
        assert!(err.sqrt() < 1e-6 * norm.sqrt(), "{} vs {}", err.sqrt(), norm.sqrt());
    }

    #[test]
    fn soft_window_one_zero_network_pays_the_ic() {
        let problem = ProblemSpec::advection(30.0).unwrap();
        let mut a = ansatz_for(&problem, 1, 1, Mode::Soft, 1);
        a.net.params = ParameterVector::zeros(a.net.params.layout().to_vec());
        let ev = assemble_loss(&a, &PointSet::default(), &problem, &weights(), &[PI / 2.0]).unwrap();
        assert_relative_eq!(ev.loss, 1.0, max_relative = 1e-15);
        assert_relative_eq!(ev.interface_loss, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn hard_and_soft_agree_where_the_blend_is_pure_network() {
        // With C¹ blending the window-end point sees h_next = 1 and zero
        // first derivatives of both blending functions.
        let problem = ProblemSpec::advection(30.0).unwrap();
        let mut hard = ansatz_for(&problem, 4, 1, Mode::Hard, 9);
        hard.order = ContinuityOrder::new(1).unwrap();
        let mut soft = hard.clone();
        soft.mode = Mode::Soft;
        soft.order = ContinuityOrder::new(0).unwrap();
        let end = hard.bounds().1;
        let pts = PointSet {
            x: vec![0.4, 1.7, 3.3, 5.9],
            t: vec![end; 4],
        };
        let mut w = weights();
        w.lambda_i = 0.0;
        let h = assemble_loss(&hard, &pts, &problem, &w, &[]).unwrap();
        let s = assemble_loss(&soft, &pts, &problem, &w, &[1.0]).unwrap();
        assert_relative_eq!(h.pde_loss, s.pde_loss, max_relative = 1e-12);
    }

    #[test]
    fn exact_solution_has_zero_loss() {
        // Jerk started at its equilibrium with a constant network f ≡ 1:
        // u = h_prev + h_next = 1 everywhere.
        let mut problem = ProblemSpec::jerk().unwrap();
        problem.ic_series = crate::ansatz::InitialConditionSeries::new(vec![
            crate::ansatz::IcTerm::Constant(1.0),
            crate::ansatz::IcTerm::Constant(0.0),
            crate::ansatz::IcTerm::Constant(0.0),
        ])
        .unwrap();
        let mut a = ansatz_for(&problem, 5, 1, Mode::Hard, 2);
        let mut values = vec![0.0; a.net.params.len()];
        *values.last_mut().unwrap() = 1.0;
        a.net.params = a.net.params.with_values(values).unwrap();
        let w = LossWeights { causal_per_window: true, ..weights() };
        let pts = sample_collocation(a.bounds(), None, 25, 8).unwrap();
        let ev = assemble_loss(&a, &pts, &problem, &w, &[]).unwrap();
        assert!(ev.loss < 1e-28, "{}", ev.loss);
    }
}
