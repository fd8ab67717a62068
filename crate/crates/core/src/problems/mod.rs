//! Benchmark problems: residual operators, domains, initial conditions,
//! boundary treatment, residual scaling and reference solutions.

mod ode;
mod reference;
mod spectral;

pub use ode::{integrate_jerk, reference_oracle_ode, JerkState, OdeTolerance};
pub use reference::{Provenance, ReferenceSolution};
pub use spectral::{reference_oracle_pde, PdeOracleConfig};

use std::f64::consts::PI;

use crate::ansatz::{ContinuityOrder, IcTerm, InitialConditionSeries, SpatialMask};
use crate::diffengine::{Jet, JetScalar};
use crate::error::{Error, Result};
use crate::network::{PeriodicEmbedding, SpatialInput};

/// Benchmark identity with its equation constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProblemKind {
    /// `u_t + c·u_x = 0`
    Advection { c: f64 },
    /// `u_tt = c²·u_xx`
    Wave { c: f64 },
    /// `u_t − λ₁·u_xx + λ₂·u³ − λ₂·u = 0`
    AllenCahn { lambda1: f64, lambda2: f64 },
    /// `u_t + λ₁·u·u_x + λ₂·u_xxx = 0`
    Kdv { lambda1: f64, lambda2: f64 },
    /// `x_ttt = k₁·x_tt + k₂·x_t + x² + k₃`
    Jerk { k1: f64, k2: f64, k3: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryTreatment {
    PeriodicEmbedding,
    DirichletMask,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceSource {
    Analytic,
    PseudospectralOracle,
    OdeOracle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub spatial_domain: Option<(f64, f64)>,
    /// Time horizon `T`; the problem lives on `[0, T]`.
    pub horizon: f64,
    /// Highest time derivative `M`.
    pub time_order: usize,
    pub ic_series: InitialConditionSeries,
    pub bc: BoundaryTreatment,
    /// Positive divisor applied to the residual.
    pub scaling: f64,
    pub reference: ReferenceSource,
}

/// Derivative slots read off one time jet and one optional space jet.
#[derive(Clone, Copy, Debug)]
pub struct DerivativeSlots<T> {
    pub u: T,
    pub u_t: T,
    pub u_tt: T,
    pub u_ttt: T,
    pub u_x: T,
    pub u_xx: T,
    pub u_xxx: T,
}

impl<T: JetScalar> DerivativeSlots<T> {
    /// Slots beyond a jet's order read as zero.
    pub fn from_jets(time: &Jet<T>, space: Option<&Jet<T>>) -> Self {
        let zero = T::from_f64(0.0);
        let d = |j: &Jet<T>, k: usize| if k <= j.order() { j.derivative(k) } else { zero };
        DerivativeSlots {
            u: time.value(),
            u_t: d(time, 1),
            u_tt: d(time, 2),
            u_ttt: d(time, 3),
            u_x: space.map_or(zero, |s| d(s, 1)),
            u_xx: space.map_or(zero, |s| d(s, 2)),
            u_xxx: space.map_or(zero, |s| d(s, 3)),
        }
    }
}

/// `(u_t + c·u_x)/c`
pub fn residual_advection<T: JetScalar>(u_t: T, u_x: T, c: f64) -> T {
    (u_t + u_x.scale(c)).scale(1.0 / c)
}

/// `(u_tt − c²·u_xx)/c²`
pub fn residual_wave<T: JetScalar>(u_tt: T, u_xx: T, c: f64) -> T {
    (u_tt - u_xx.scale(c * c)).scale(1.0 / (c * c))
}

pub const ALLEN_CAHN_LAMBDA1: f64 = 1e-4;
pub const ALLEN_CAHN_LAMBDA2: f64 = 5.0;
pub const KDV_LAMBDA1: f64 = 1.0;
pub const KDV_LAMBDA2: f64 = 0.0025;
pub const JERK_K: (f64, f64, f64) = (-0.4, -2.1, -1.0);

fn allen_cahn_with<T: JetScalar>(u: T, u_t: T, u_xx: T, l1: f64, l2: f64) -> T {
    u_t - u_xx.scale(l1) + (u * u * u).scale(l2) - u.scale(l2)
}

fn kdv_with<T: JetScalar>(u: T, u_t: T, u_x: T, u_xxx: T, l1: f64, l2: f64) -> T {
    u_t + (u * u_x).scale(l1) + u_xxx.scale(l2)
}

fn jerk_with<T: JetScalar>(x: T, x_t: T, x_tt: T, x_ttt: T, k: (f64, f64, f64)) -> T {
    x_ttt - (x_tt.scale(k.0) + x_t.scale(k.1) + x * x).shift(k.2)
}

/// `u_t − 0.0001·u_xx + 5u³ − 5u`
pub fn residual_allen_cahn<T: JetScalar>(u: T, u_t: T, u_xx: T) -> T {
    allen_cahn_with(u, u_t, u_xx, ALLEN_CAHN_LAMBDA1, ALLEN_CAHN_LAMBDA2)
}

/// `u_t + u·u_x + 0.0025·u_xxx`
pub fn residual_kdv<T: JetScalar>(u: T, u_t: T, u_x: T, u_xxx: T) -> T {
    kdv_with(u, u_t, u_x, u_xxx, KDV_LAMBDA1, KDV_LAMBDA2)
}

/// `x_ttt − (−0.4·x_tt − 2.1·x_t + x² − 1)`
pub fn residual_jerk<T: JetScalar>(x: T, x_t: T, x_tt: T, x_ttt: T) -> T {
    jerk_with(x, x_t, x_tt, x_ttt, JERK_K)
}

impl ProblemSpec {
    pub fn advection(c: f64) -> Result<Self> {
        ProblemSpec::new(ProblemKind::Advection { c })
    }

    pub fn wave(c: f64) -> Result<Self> {
        ProblemSpec::new(ProblemKind::Wave { c })
    }

    pub fn allen_cahn() -> Result<Self> {
        ProblemSpec::new(ProblemKind::AllenCahn {
            lambda1: ALLEN_CAHN_LAMBDA1,
            lambda2: ALLEN_CAHN_LAMBDA2,
        })
    }

    pub fn kdv() -> Result<Self> {
        ProblemSpec::new(ProblemKind::Kdv {
            lambda1: KDV_LAMBDA1,
            lambda2: KDV_LAMBDA2,
        })
    }

    pub fn jerk() -> Result<Self> {
        let (k1, k2, k3) = JERK_K;
        ProblemSpec::new(ProblemKind::Jerk { k1, k2, k3 })
    }

    /// Build the benchmark defined by `kind`.
    pub fn new(kind: ProblemKind) -> Result<Self> {
        let spec = match kind {
            ProblemKind::Advection { c } => ProblemSpec {
                kind,
                spatial_domain: Some((0.0, 2.0 * PI)),
                horizon: 1.0,
                time_order: 1,
                ic_series: InitialConditionSeries::new(vec![IcTerm::ScaledSin(1.0)])?,
                bc: BoundaryTreatment::PeriodicEmbedding,
                scaling: c,
                reference: ReferenceSource::Analytic,
            },
            ProblemKind::Wave { c } => ProblemSpec {
                kind,
                spatial_domain: Some((0.0, PI)),
                horizon: 2.0 * PI,
                time_order: 2,
                ic_series: InitialConditionSeries::new(vec![
                    IcTerm::ScaledSin(1.0),
                    IcTerm::ScaledSin(c),
                ])?,
                bc: BoundaryTreatment::DirichletMask,
                scaling: c * c,
                reference: ReferenceSource::Analytic,
            },
            ProblemKind::AllenCahn { .. } => ProblemSpec {
                kind,
                spatial_domain: Some((-1.0, 1.0)),
                horizon: 1.0,
                time_order: 1,
                ic_series: InitialConditionSeries::new(vec![IcTerm::XSquaredCosPi])?,
                bc: BoundaryTreatment::PeriodicEmbedding,
                scaling: 1.0,
                reference: ReferenceSource::PseudospectralOracle,
            },
            ProblemKind::Kdv { .. } => ProblemSpec {
                kind,
                spatial_domain: Some((-1.0, 1.0)),
                horizon: 1.0,
                time_order: 1,
                ic_series: InitialConditionSeries::new(vec![IcTerm::CosPi])?,
                bc: BoundaryTreatment::PeriodicEmbedding,
                scaling: 1.0,
                reference: ReferenceSource::PseudospectralOracle,
            },
            ProblemKind::Jerk { .. } => ProblemSpec {
                kind,
                spatial_domain: None,
                horizon: 50.0,
                time_order: 3,
                ic_series: InitialConditionSeries::new(vec![
                    IcTerm::Constant(0.0),
                    IcTerm::Constant(1.0),
                    IcTerm::Constant(1.0),
                ])?,
                bc: BoundaryTreatment::None,
                scaling: 1.0,
                reference: ReferenceSource::OdeOracle,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Check the structural invariants of the benchmark definition.
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.time_order) {
            return Err(Error::config(format!("time order {} outside 1..=3", self.time_order)));
        }
        if self.ic_series.len() != self.time_order {
            return Err(Error::config("initial-condition series length must equal time order"));
        }
        if !(self.scaling > 0.0 && self.scaling.is_finite()) {
            return Err(Error::config(format!("residual scaling must be > 0, got {}", self.scaling)));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::config("time horizon must be positive"));
        }
        let expected = match self.kind {
            ProblemKind::Advection { c } | ProblemKind::Wave { c } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::config(format!("speed c must be > 0, got {c}")));
                }
                if matches!(self.kind, ProblemKind::Advection { .. }) {
                    BoundaryTreatment::PeriodicEmbedding
                } else {
                    BoundaryTreatment::DirichletMask
                }
            }
            ProblemKind::AllenCahn { .. } | ProblemKind::Kdv { .. } => {
                BoundaryTreatment::PeriodicEmbedding
            }
            ProblemKind::Jerk { .. } => BoundaryTreatment::None,
        };
        if self.bc != expected {
            return Err(Error::config(format!(
                "{} requires {expected:?} boundary treatment",
                self.name()
            )));
        }
        if (self.bc == BoundaryTreatment::None) != self.spatial_domain.is_none() {
            return Err(Error::config("spatial domain inconsistent with boundary treatment"));
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProblemKind::Advection { .. } => "advection",
            ProblemKind::Wave { .. } => "wave",
            ProblemKind::AllenCahn { .. } => "allen_cahn",
            ProblemKind::Kdv { .. } => "kdv",
            ProblemKind::Jerk { .. } => "jerk",
        }
    }

    pub fn is_ode(&self) -> bool {
        self.spatial_domain.is_none()
    }

    pub fn required_continuity(&self) -> ContinuityOrder {
        ContinuityOrder::for_time_order(self.time_order).expect("validated time order")
    }

    /// Jet order needed along `t`.
    pub fn time_jet_order(&self) -> usize {
        self.time_order
    }

    /// Jet order needed along `x`, `None` when no spatial derivative appears.
    pub fn space_jet_order(&self) -> Option<usize> {
        match self.kind {
            ProblemKind::Advection { .. } => Some(1),
            ProblemKind::Wave { .. } | ProblemKind::AllenCahn { .. } => Some(2),
            ProblemKind::Kdv { .. } => Some(3),
            ProblemKind::Jerk { .. } => None,
        }
    }

    pub fn spatial_input(&self) -> Result<SpatialInput> {
        Ok(match (self.bc, self.spatial_domain) {
            (BoundaryTreatment::PeriodicEmbedding, Some((a, b))) => {
                SpatialInput::Periodic(PeriodicEmbedding::for_period(b - a)?)
            }
            (BoundaryTreatment::DirichletMask, Some(_)) => SpatialInput::Raw,
            _ => SpatialInput::None,
        })
    }

    pub fn mask(&self) -> SpatialMask {
        match (self.bc, self.spatial_domain) {
            (BoundaryTreatment::DirichletMask, Some((a, b))) => SpatialMask::Dirichlet(a, b),
            _ => SpatialMask::None,
        }
    }

    /// Scaled residual at one point.
    pub fn residual<T: JetScalar>(&self, d: &DerivativeSlots<T>) -> T {
        match self.kind {
            ProblemKind::Advection { c } => residual_advection(d.u_t, d.u_x, c),
            ProblemKind::Wave { c } => residual_wave(d.u_tt, d.u_xx, c),
            ProblemKind::AllenCahn { lambda1, lambda2 } => {
                allen_cahn_with(d.u, d.u_t, d.u_xx, lambda1, lambda2).scale(1.0 / self.scaling)
            }
            ProblemKind::Kdv { lambda1, lambda2 } => {
                kdv_with(d.u, d.u_t, d.u_x, d.u_xxx, lambda1, lambda2).scale(1.0 / self.scaling)
            }
            ProblemKind::Jerk { k1, k2, k3 } => {
                jerk_with(d.u, d.u_t, d.u_tt, d.u_ttt, (k1, k2, k3)).scale(1.0 / self.scaling)
            }
        }
    }

    /// Closed-form solution for the linear benchmarks.
    pub fn analytic_solution(&self, x: f64, t: f64) -> Result<f64> {
        match self.kind {
            ProblemKind::Advection { c } => Ok((x - c * t).sin()),
            ProblemKind::Wave { c } => Ok(x.sin() * ((c * t).sin() + (c * t).cos())),
            _ => Err(Error::Unsupported(format!(
                "{} has no closed-form solution",
                self.name()
            ))),
        }
    }
}

/// Closed-form solution of an advection or wave problem.
pub fn analytic_solution(problem: &ProblemSpec, x: f64, t: f64) -> Result<f64> {
    problem.analytic_solution(x, t)
}
