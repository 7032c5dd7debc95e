//! Plain-text summary, artifact files and the comparison table.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::runner::Outcome;
use crate::CliError;

/// Deterministic `key: value` summary followed by one `check` line per invariant.
pub fn summary(out: &Outcome) -> String {
    let mut s = String::new();
    if let Some(h) = &out.headline {
        writeln!(s, "{h}").unwrap();
    }
    for (k, v) in &out.info {
        writeln!(s, "{k}: {v}").unwrap();
    }
    for (i, seg) in out.segments.iter().enumerate() {
        writeln!(
            s,
            "window[{i}]: t=[{:.4}, {:.4}] mean_error={:.6e} mean_norm={:.6e} relative={:.6e}",
            seg.start,
            seg.end,
            seg.mean_error,
            seg.mean_state_norm,
            seg.relative()
        )
        .unwrap();
    }
    for c in &out.checks {
        writeln!(s, "{}", c.line()).unwrap();
    }
    let failed = out.checks.iter().filter(|c| !c.pass).count();
    writeln!(s, "checks: {} passed, {failed} failed", out.checks.len() - failed).unwrap();
    s
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Writes `summary.txt` and every artifact into `dir`, creating it if needed.
pub fn write_outputs(out: &Outcome, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    for a in &out.artifacts {
        write_file(&dir.join(a.name), &a.bytes)?;
    }
    write_file(&dir.join("summary.txt"), summary(out).as_bytes())
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Side-by-side per-window error table. Both runs must share the time grid
/// and the comparison windows.
pub fn compare_table(a: &Outcome, b: &Outcome, names: (&str, &str)) -> Result<String, CliError> {
    if !same(a.dt, b.dt) || !same(a.horizon, b.horizon) {
        return Err(CliError::Comparison(format!(
            "time grids differ: dt {} vs {}, horizon {} vs {}",
            a.dt, b.dt, a.horizon, b.horizon
        )));
    }
    if a.segments.is_empty() || b.segments.is_empty() {
        return Err(CliError::Comparison(format!(
            "no error metrics to compare ({} and {})",
            a.kind.as_str(),
            b.kind.as_str()
        )));
    }
    let aligned = a.segments.len() == b.segments.len()
        && a
            .segments
            .iter()
            .zip(&b.segments)
            .all(|(p, q)| same(p.start, q.start) && same(p.end, q.end));
    if !aligned {
        return Err(CliError::Comparison("comparison windows differ between the two runs".into()));
    }
    let mut s = String::new();
    writeln!(s, "A: {} ({})", names.0, a.kind.as_str()).unwrap();
    writeln!(s, "B: {} ({})", names.1, b.kind.as_str()).unwrap();
    writeln!(
        s,
        "{:>3} {:>8} {:>8} {:>8} {:>13} {:>13} {:>13} {:>13} {:>6}",
        "win", "start", "end", "setpoint", "A_mean_err", "A_relative", "B_mean_err", "B_relative", "better"
    )
    .unwrap();
    for (i, (p, q)) in a.segments.iter().zip(&b.segments).enumerate() {
        let setpoint = p.setpoint.map_or("-".to_string(), |v| format!("{v}"));
        let better = if p.mean_error < q.mean_error {
            "A"
        } else if q.mean_error < p.mean_error {
            "B"
        } else {
            "="
        };
        writeln!(
            s,
            "{i:>3} {:>8.4} {:>8.4} {setpoint:>8} {:>13.6e} {:>13.6e} {:>13.6e} {:>13.6e} {better:>6}",
            p.start,
            p.end,
            p.mean_error,
            p.relative(),
            q.mean_error,
            q.relative()
        )
        .unwrap();
    }
    Ok(s)
}
