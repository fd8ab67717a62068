use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Where a reference grid came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Oracle,
    Ingested,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Analytic => "analytic",
            Provenance::Oracle => "oracle",
            Provenance::Ingested => "ingested-file",
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "analytic" => Provenance::Analytic,
            "oracle" => Provenance::Oracle,
            "ingested-file" => Provenance::Ingested,
            other => return Err(Error::config(format!("unknown provenance '{other}'"))),
        })
    }
}

/// Solution values on a tensor grid, stored row-major by time.
///
/// ODE references have an empty `grid_x` and one value per time.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSolution {
    pub problem: String,
    pub grid_x: Vec<f64>,
    pub grid_t: Vec<f64>,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl ReferenceSolution {
    pub fn new(
        problem: impl Into<String>,
        grid_x: Vec<f64>,
        grid_t: Vec<f64>,
        values: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        let r = ReferenceSolution {
            problem: problem.into(),
            grid_x,
            grid_t,
            values,
            provenance,
        };
        if r.values.len() != r.row_len() * r.grid_t.len() {
            return Err(Error::contract(format!(
                "{} values for a {}x{} grid",
                r.values.len(),
                r.grid_t.len(),
                r.row_len()
            )));
        }
        if let Some(i) = r.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("reference value at index {i}")));
        }
        Ok(r)
    }

    /// Tabulate `f(x, t)` over the grid.
    pub fn tabulate(
        problem: impl Into<String>,
        grid_x: Vec<f64>,
        grid_t: Vec<f64>,
        provenance: Provenance,
        f: impl Fn(f64, f64) -> Result<f64>,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(grid_x.len().max(1) * grid_t.len());
        for &t in &grid_t {
            if grid_x.is_empty() {
                values.push(f(0.0, t)?);
            }
            for &x in &grid_x {
                values.push(f(x, t)?);
            }
        }
        ReferenceSolution::new(problem, grid_x, grid_t, values, provenance)
    }

    /// Values per time row.
    pub fn row_len(&self) -> usize {
        self.grid_x.len().max(1)
    }

    pub fn row(&self, ti: usize) -> &[f64] {
        let n = self.row_len();
        &self.values[ti * n..(ti + 1) * n]
    }

    pub fn value(&self, ti: usize, xi: usize) -> f64 {
        self.values[ti * self.row_len() + xi]
    }

    /// `(x, t, value)` for every grid point.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.row_len();
        self.values.iter().enumerate().map(move |(i, &v)| {
            let (ti, xi) = (i / n, i % n);
            let x = self.grid_x.get(xi).copied().unwrap_or(0.0);
            (x, self.grid_t[ti], v)
        })
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",");
        let mut out = format!(
            "# problem={} nx={} nt_grid={} provenance={}\n",
            self.problem,
            self.grid_x.len(),
            self.grid_t.len(),
            self.provenance.as_str()
        );
        writeln!(out, "# x={}", join(&self.grid_x)).unwrap();
        writeln!(out, "# t={}", join(&self.grid_t)).unwrap();
        for ti in 0..self.grid_t.len() {
            writeln!(out, "{}", join(self.row(ti))).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Parse { line, message };
        let parse_list = |line: usize, s: &str| -> Result<Vec<f64>> {
            if s.trim().is_empty() {
                return Ok(Vec::new());
            }
            s.split(',')
                .map(|v| match v.trim().parse::<f64>() {
                    Ok(x) if x.is_finite() => Ok(x),
                    Ok(_) => Err(bad(line, format!("non-finite value '{}'", v.trim()))),
                    Err(_) => Err(bad(line, format!("not a number: '{}'", v.trim()))),
                })
                .collect()
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty grid file".into()))?;
        let header = header
            .strip_prefix("# ")
            .ok_or_else(|| bad(1, "missing header".into()))?;
        let (mut problem, mut nx, mut nt, mut provenance) = (None, None, None, None);
        for field in header.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| bad(1, format!("bad header field '{field}'")))?;
            match k {
                "problem" => problem = Some(v.to_string()),
                "nx" => nx = Some(v.parse::<usize>().map_err(|_| bad(1, format!("bad nx '{v}'")))?),
                "nt_grid" => {
                    nt = Some(v.parse::<usize>().map_err(|_| bad(1, format!("bad nt_grid '{v}'")))?)
                }
                "provenance" => provenance = Some(v.parse::<Provenance>()?),
                _ => {}
            }
        }
        let problem = problem.ok_or_else(|| bad(1, "header lacks problem=".into()))?;
        let nx = nx.ok_or_else(|| bad(1, "header lacks nx=".into()))?;
        let nt = nt.ok_or_else(|| bad(1, "header lacks nt_grid=".into()))?;
        let provenance = provenance.unwrap_or(Provenance::Ingested);

        let mut axis = |key: &str| -> Result<Vec<f64>> {
            let (i, l) = lines
                .next()
                .ok_or_else(|| bad(0, format!("missing '# {key}=' line")))?;
            let body = l
                .strip_prefix(&format!("# {key}="))
                .ok_or_else(|| bad(i + 1, format!("expected '# {key}=' line")))?;
            parse_list(i + 1, body)
        };
        let grid_x = axis("x")?;
        let grid_t = axis("t")?;
        if grid_x.len() != nx || grid_t.len() != nt {
            return Err(bad(2, "axis lengths disagree with header".into()));
        }
        let row_len = nx.max(1);
        let mut values = Vec::with_capacity(row_len * nt);
        for (i, l) in lines {
            let row = parse_list(i + 1, l)?;
            if row.len() != row_len {
                return Err(bad(i + 1, format!("row has {} values, expected {row_len}", row.len())));
            }
            values.extend(row);
        }
        if values.len() != row_len * nt {
            return Err(bad(0, format!("{} rows, expected {nt}", values.len() / row_len)));
        }
        ReferenceSolution::new(problem, grid_x, grid_t, values, provenance)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        ReferenceSolution::from_text(&std::fs::read_to_string(path)?)
    }

    /// Trigonometric interpolation of a periodic grid onto new `x` points.
    ///
    /// The source grid must be uniform on `[a, a + period]`, optionally
    /// repeating the left endpoint at the right end.
    pub fn resample_periodic(&self, period: f64, x_new: &[f64]) -> Result<Self> {
        let mut n = self.grid_x.len();
        if n < 2 {
            return Err(Error::contract("periodic resampling needs a spatial grid"));
        }
        let a = self.grid_x[0];
        let has_endpoint = ((self.grid_x[n - 1] - a) - period).abs() < 1e-9 * period.max(1.0);
        if has_endpoint {
            n -= 1;
        }
        let h = period / n as f64;
        for (j, &x) in self.grid_x[..n].iter().enumerate() {
            if (x - (a + j as f64 * h)).abs() > 1e-9 * period.max(1.0) {
                return Err(Error::contract("periodic resampling needs a uniform grid"));
            }
        }
        let fft = FftPlanner::new().plan_fft_forward(n);
        // Basis e^{i·2π·k·(x−a)/period} per new point and retained mode.
        let modes: Vec<i64> = (0..n as i64)
            .map(|j| if j <= (n as i64) / 2 { j } else { j - n as i64 })
            .collect();
        let phases: Vec<Vec<Complex64>> = x_new
            .iter()
            .map(|&x| {
                let s = 2.0 * std::f64::consts::PI * (x - a) / period;
                modes.iter().map(|&k| Complex64::from_polar(1.0, k as f64 * s)).collect()
            })
            .collect();
        let nyquist = if n.is_multiple_of(2) { Some(n / 2) } else { None };
        let mut values = Vec::with_capacity(x_new.len() * self.grid_t.len());
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for ti in 0..self.grid_t.len() {
            let row = self.row(ti);
            for (b, &v) in buf.iter_mut().zip(&row[..n]) {
                *b = Complex64::new(v, 0.0);
            }
            fft.process(&mut buf);
            for p in &phases {
                let mut acc = 0.0;
                for (j, (c, e)) in buf.iter().zip(p).enumerate() {
                    // The Nyquist mode is split evenly between ±n/2.
                    acc += if Some(j) == nyquist { c.re * e.re } else { (c * e).re };
                }
                values.push(acc / n as f64);
            }
        }
        ReferenceSolution::new(
            self.problem.clone(),
            x_new.to_vec(),
            self.grid_t.clone(),
            values,
            self.provenance,
        )
    }
}
