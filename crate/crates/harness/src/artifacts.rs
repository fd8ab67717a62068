use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::config::problem_name;
use crate::error::{HarnessError, Result};
use crate::run::RunReport;

pub const LEDGER_HEADER: &str = "problem,nt,mode,relative_l2,seconds,seed";

fn write(path: &Path, contents: &str) -> Result<PathBuf> {
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))?;
    Ok(path.to_path_buf())
}

/// Long-format grid CSV: `t,x,<column>` for PDEs, `t,<column>` for ODEs.
pub fn grid_csv(report: &RunReport, column: &str, values: &[f64]) -> String {
    let g = &report.grid;
    let mut s = String::with_capacity(values.len() * 40);
    if g.x.is_empty() {
        let _ = writeln!(s, "t,{column}");
        for (t, v) in g.t.iter().zip(values) {
            let _ = writeln!(s, "{t},{v}");
        }
    } else {
        let _ = writeln!(s, "t,x,{column}");
        let n = g.x.len();
        for (i, v) in values.iter().enumerate() {
            let _ = writeln!(s, "{},{},{v}", g.t[i / n], g.x[i % n]);
        }
    }
    s
}

pub fn loss_history_csv(report: &RunReport) -> String {
    let mut s = String::from("window,phase,iteration,train_loss,eval_loss\n");
    for r in &report.telemetry {
        let eval = r.eval_loss.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{},{eval}", r.window, r.phase.as_str(), r.iteration, r.train_loss);
    }
    s
}

pub fn windows_csv(report: &RunReport) -> String {
    let mut s = String::from("window,adam_iters,lbfgs_iters,converged_reason,final_eval_loss\n");
    for w in &report.summaries {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            w.window,
            w.adam_iters,
            w.lbfgs_iters,
            w.converged_reason.as_str(),
            w.final_eval_loss
        );
    }
    if let Some(f) = &report.failure {
        let _ = writeln!(s, "{},,,failed,", f.window);
    }
    s
}

pub fn interface_csv(report: &RunReport) -> Result<String> {
    let bounds = report.config.partition()?.boundaries().to_vec();
    let mut s = String::from("boundary,t,mismatch\n");
    for (i, m) in report.interface_residuals.iter().enumerate() {
        let _ = writeln!(s, "{},{},{m}", i + 1, bounds[i + 1]);
    }
    Ok(s)
}

pub fn phase_space_csv(report: &RunReport) -> Option<String> {
    let states = report.phase_space.as_ref()?;
    let mut s = String::from("t,x,x_t,x_tt\n");
    for (t, y) in report.grid.t.iter().zip(states) {
        let _ = writeln!(s, "{t},{},{},{}", y[0], y[1], y[2]);
    }
    Some(s)
}

/// Problem tag with its speed where it has one, e.g. `advection_c30`.
pub fn problem_tag(report: &RunReport) -> String {
    use hcspinn::problems::ProblemKind;
    let name = problem_name(&report.config.problem);
    match report.config.problem {
        ProblemKind::Advection { c } | ProblemKind::Wave { c } => format!("{name}_c{c}"),
        _ => name.to_string(),
    }
}

pub fn ledger_line(report: &RunReport) -> String {
    let c = &report.config;
    format!(
        "{},{},{},{},{:.3},{}",
        problem_tag(report),
        c.nt,
        c.mode.as_str(),
        report.relative_l2.map(|v| format!("{v:e}")).unwrap_or_default(),
        report.wall_time_seconds,
        c.seed()
    )
}

/// The results ledger shared by runs whose outputs sit side by side.
pub fn ledger_path(dir: &Path) -> PathBuf {
    dir.parent().unwrap_or(Path::new(".")).join("ledger.csv")
}

pub fn append_ledger(path: &Path, line: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    let fresh = !path.exists();
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| HarnessError::io(path, e))?;
    let mut text = String::new();
    if fresh {
        text.push_str(LEDGER_HEADER);
        text.push('\n');
    }
    text.push_str(line);
    text.push('\n');
    f.write_all(text.as_bytes()).map_err(|e| HarnessError::io(path, e))
}

/// Write every CSV for `report` into `dir` and append its ledger line.
pub fn emit_artifacts(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut written = vec![
        write(&dir.join("config.txt"), &report.config.to_text())?,
        write(&dir.join("solution.csv"), &grid_csv(report, "u", &report.prediction))?,
    ];
    if let Some(err) = report.abs_error() {
        written.push(write(&dir.join("abs_error.csv"), &grid_csv(report, "abs_error", &err))?);
    }
    written.push(write(&dir.join("loss_history.csv"), &loss_history_csv(report))?);
    written.push(write(&dir.join("windows.csv"), &windows_csv(report))?);
    written.push(write(&dir.join("interface.csv"), &interface_csv(report)?)?);
    if let Some(ps) = phase_space_csv(report) {
        written.push(write(&dir.join("phase_space.csv"), &ps)?);
    }
    let ledger = ledger_path(dir);
    append_ledger(&ledger, &ledger_line(report))?;
    written.push(ledger);
    Ok(written)
}

/// Heat maps of the solution and absolute error (PDE runs only).
#[cfg(feature = "png")]
pub fn render_images(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    if report.grid.x.is_empty() {
        return Ok(out);
    }
    let mut fields = vec![("solution.png", report.prediction.clone(), true)];
    if let Some(err) = report.abs_error() {
        fields.push(("abs_error.png", err, false));
    }
    let (w, h) = (report.grid.x.len() as u32, report.grid.t.len() as u32);
    for (name, values, signed) in fields {
        let finite = values.iter().copied().filter(|v| v.is_finite());
        let scale = finite.fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        // time runs upward
        let img = image::RgbImage::from_fn(w, h, |i, j| {
            let v = values[((h - 1 - j) * w + i) as usize] / scale;
            image::Rgb(colormap(v, signed))
        });
        let path = dir.join(name);
        img.save(&path)
            .map_err(|e| HarnessError::io(&path, std::io::Error::other(e.to_string())))?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(feature = "png")]
fn colormap(v: f64, signed: bool) -> [u8; 3] {
    if !v.is_finite() {
        return [0, 0, 0];
    }
    let to = |a: f64| (255.0 * a.clamp(0.0, 1.0)).round() as u8;
    if signed {
        if v >= 0.0 {
            [255, to(1.0 - v), to(1.0 - v)]
        } else {
            [to(1.0 + v), to(1.0 + v), 255]
        }
    } else {
        [to(v), to(v * v), to(0.3 * (1.0 - v))]
    }
}
