use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::reference::{Provenance, ReferenceSolution};
use super::{ProblemKind, ProblemSpec};
use crate::diffengine::Jet;
use crate::error::{Error, Result};

/// Pseudospectral oracle settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdeOracleConfig {
    pub nx: usize,
    pub dt: f64,
    /// Output time samples including `t = 0` and `t = T`.
    pub nt_out: usize,
}

impl Default for PdeOracleConfig {
    fn default() -> Self {
        PdeOracleConfig {
            nx: 512,
            dt: 1e-4,
            nt_out: 201,
        }
    }
}

/// Fourier pseudospectral solution with ETDRK4 time stepping, on a grid of
/// `nx + 1` points (endpoint repeated) and the default output times.
pub fn reference_oracle_pde(problem: &ProblemSpec, nx: usize, dt: f64) -> Result<ReferenceSolution> {
    PdeOracleConfig {
        nx,
        dt,
        ..PdeOracleConfig::default()
    }
    .solve(problem)
}

type Complex = Complex64;

struct Spectral {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex>,
}

impl Spectral {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Spectral {
            n,
            forward,
            inverse,
            scratch: vec![Complex::new(0.0, 0.0); len],
        }
    }

    fn fft(&mut self, buf: &mut [Complex]) {
        self.forward.process_with_scratch(buf, &mut self.scratch);
    }

    /// Real part of the normalised inverse transform.
    fn ifft_real(&mut self, v: &[Complex], out: &mut [f64]) {
        let mut buf = v.to_vec();
        self.inverse.process_with_scratch(&mut buf, &mut self.scratch);
        let s = 1.0 / self.n as f64;
        for (o, b) in out.iter_mut().zip(&buf) {
            *o = b.re * s;
        }
    }
}

enum Nonlinear {
    /// `λ₂(u − u³)`
    AllenCahn { lambda2: f64 },
    /// `−λ₁/2 · ∂ₓ(u²)`, the multiplier holding `−λ₁/2 · ik`.
    Kdv { multiplier: Vec<Complex> },
}

struct Stepper {
    spectral: Spectral,
    nonlinear: Nonlinear,
    e: Vec<Complex>,
    e2: Vec<Complex>,
    q: Vec<Complex>,
    f1: Vec<Complex>,
    f2: Vec<Complex>,
    f3: Vec<Complex>,
    u: Vec<f64>,
}

/// φ-function coefficients by contour averaging around each `h·L`.
fn etd_coefficients(lin: &[Complex], h: f64) -> [Vec<Complex>; 4] {
    const M: usize = 64;
    let roots: Vec<Complex> = (0..M)
        .map(|j| Complex::from_polar(1.0, 2.0 * PI * (j as f64 + 0.5) / M as f64))
        .collect();
    let mut q = Vec::with_capacity(lin.len());
    let mut f1 = Vec::with_capacity(lin.len());
    let mut f2 = Vec::with_capacity(lin.len());
    let mut f3 = Vec::with_capacity(lin.len());
    for &l in lin {
        let zero = Complex::new(0.0, 0.0);
        let (mut sq, mut s1, mut s2, mut s3) = (zero, zero, zero, zero);
        for &r in &roots {
            let z = l * h + r;
            let ez = z.exp();
            let z3 = z * z * z;
            sq += ((z / 2.0).exp() - 1.0) / z;
            s1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
            s2 += (2.0 + z + ez * (z - 2.0)) / z3;
            s3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
        }
        let m = h / M as f64;
        q.push(sq * m);
        f1.push(s1 * m);
        f2.push(s2 * m);
        f3.push(s3 * m);
    }
    [q, f1, f2, f3]
}

impl Stepper {
    fn nonlinear(&mut self, v: &[Complex], out: &mut [Complex]) {
        self.spectral.ifft_real(v, &mut self.u);
        match &self.nonlinear {
            Nonlinear::AllenCahn { lambda2 } => {
                for (o, &u) in out.iter_mut().zip(&self.u) {
                    *o = Complex::new(lambda2 * (u - u * u * u), 0.0);
                }
                self.spectral.fft(out);
            }
            Nonlinear::Kdv { multiplier } => {
                for (o, &u) in out.iter_mut().zip(&self.u) {
                    *o = Complex::new(u * u, 0.0);
                }
                self.spectral.fft(out);
                for (o, m) in out.iter_mut().zip(multiplier) {
                    *o *= m;
                }
            }
        }
    }

    fn step(&mut self, v: &mut [Complex], work: &mut [Vec<Complex>; 6]) {
        let [nv, a, na, b, nb, c] = work;
        self.nonlinear(v, nv);
        for i in 0..v.len() {
            a[i] = self.e2[i] * v[i] + self.q[i] * nv[i];
        }
        self.nonlinear(a, na);
        for i in 0..v.len() {
            b[i] = self.e2[i] * v[i] + self.q[i] * na[i];
        }
        self.nonlinear(b, nb);
        for i in 0..v.len() {
            c[i] = self.e2[i] * a[i] + self.q[i] * (2.0 * nb[i] - nv[i]);
        }
        // `a` is free again and holds N(c).
        let nc = a;
        self.nonlinear(c, nc);
        for i in 0..v.len() {
            v[i] = self.e[i] * v[i]
                + nv[i] * self.f1[i]
                + 2.0 * (na[i] + nb[i]) * self.f2[i]
                + nc[i] * self.f3[i];
        }
    }
}

impl PdeOracleConfig {
    pub fn solve(&self, problem: &ProblemSpec) -> Result<ReferenceSolution> {
        let (a, b) = match (problem.kind, problem.spatial_domain) {
            (ProblemKind::AllenCahn { .. } | ProblemKind::Kdv { .. }, Some(d)) => d,
            _ => {
                return Err(Error::Unsupported(format!(
                    "pseudospectral oracle does not apply to {}",
                    problem.name()
                )))
            }
        };
        let n = self.nx;
        if n < 256 || !n.is_power_of_two() {
            return Err(Error::config(format!("nx must be a power of two >= 256, got {n}")));
        }
        if self.nt_out < 2 {
            return Err(Error::config("need at least two output times"));
        }
        let horizon = problem.horizon;
        let interval = horizon / (self.nt_out - 1) as f64;
        let substeps = (interval / self.dt).round().max(1.0) as usize;
        let h = interval / substeps as f64;
        if !(self.dt > 0.0) || ((h - self.dt) / self.dt).abs() > 1e-6 {
            return Err(Error::config(format!(
                "dt={} does not divide the output interval {interval}",
                self.dt
            )));
        }

        let period = b - a;
        let grid_x: Vec<f64> = (0..=n).map(|j| a + period * j as f64 / n as f64).collect();
        let grid_t: Vec<f64> = (0..self.nt_out).map(|i| horizon * i as f64 / (self.nt_out - 1) as f64).collect();
        let wavenumber = |j: usize, odd: bool| -> f64 {
            let k = if j < n / 2 {
                j as f64
            } else if j == n / 2 {
                if odd { 0.0 } else { (n / 2) as f64 }
            } else {
                j as f64 - n as f64
            };
            2.0 * PI * k / period
        };

        let (lin, nonlinear): (Vec<Complex>, Nonlinear) = match problem.kind {
            ProblemKind::AllenCahn { lambda1, lambda2 } => (
                (0..n)
                    .map(|j| Complex::new(-lambda1 * wavenumber(j, false).powi(2), 0.0))
                    .collect(),
                Nonlinear::AllenCahn { lambda2 },
            ),
            ProblemKind::Kdv { lambda1, lambda2 } => (
                (0..n)
                    .map(|j| Complex::new(0.0, lambda2 * wavenumber(j, true).powi(3)))
                    .collect(),
                Nonlinear::Kdv {
                    multiplier: (0..n)
                        .map(|j| Complex::new(0.0, -0.5 * lambda1 * wavenumber(j, true)))
                        .collect(),
                },
            ),
            _ => unreachable!(),
        };
        let [q, f1, f2, f3] = etd_coefficients(&lin, h);
        let mut stepper = Stepper {
            spectral: Spectral::new(n),
            nonlinear,
            e: lin.iter().map(|l| (l * h).exp()).collect(),
            e2: lin.iter().map(|l| (l * h / 2.0).exp()).collect(),
            q,
            f1,
            f2,
            f3,
            u: vec![0.0; n],
        };

        let ic: Vec<f64> = grid_x
            .iter()
            .map(|&x| problem.ic_series.terms()[0].eval(&Jet::constant(x, 0)).value())
            .collect();
        let mut values = Vec::with_capacity((n + 1) * self.nt_out);
        values.extend_from_slice(&ic);

        let mut v: Vec<Complex> = ic[..n].iter().map(|&u| Complex::new(u, 0.0)).collect();
        stepper.spectral.fft(&mut v);
        let mut work: [Vec<Complex>; 6] = std::array::from_fn(|_| vec![Complex::new(0.0, 0.0); n]);
        let mut row = vec![0.0; n];
        for _ in 1..self.nt_out {
            for _ in 0..substeps {
                stepper.step(&mut v, &mut work);
            }
            stepper.spectral.ifft_real(&v, &mut row);
            if row.iter().any(|u| !u.is_finite()) {
                return Err(Error::Oracle(format!("{} oracle diverged", problem.name())));
            }
            values.extend_from_slice(&row);
            values.push(row[0]);
        }
        ReferenceSolution::new(problem.name(), grid_x, grid_t, values, Provenance::Oracle)
    }
}
