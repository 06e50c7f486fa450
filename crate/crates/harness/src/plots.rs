//! Plot-file emission: SVG vector graphics plus gnuplot-ready data files,
//! derived entirely from the authoritative CSVs (re-emission is idempotent).

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::io::read_columns;
use crate::manifest::fnv1a64;

#[derive(Error, Debug)]
pub enum PlotError {
    #[error("run directory contains no steps.csv")]
    MissingStepCsv,
    #[error("steps.csv is missing required columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

struct Series {
    t: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
}

fn load_series(dir: &Path) -> Result<Series, PlotError> {
    let path = dir.join("steps.csv");
    if !path.exists() {
        return Err(PlotError::MissingStepCsv);
    }
    let text = std::fs::read_to_string(&path)?;
    let (names, cols) = read_columns(&text)?;
    let required = ["t", "x", "y", "z"];
    let missing: Vec<String> = required
        .iter()
        .filter(|r| !names.iter().any(|n| n == *r))
        .map(|r| r.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(PlotError::MissingColumns(missing));
    }
    let col = |name: &str| -> Vec<f64> {
        let idx = names.iter().position(|n| n == name).expect("checked");
        cols[idx]
            .iter()
            .map(|v| v.parse::<f64>().unwrap_or(f64::NAN))
            .collect()
    };
    Ok(Series {
        t: col("t"),
        x: col("x"),
        y: col("y"),
        z: col("z"),
    })
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi.is_finite() && hi > lo {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn polyline_svg(title: &str, xs: &[f64], ys: &[f64], x_label: &str, y_label: &str) -> String {
    let (w, h, m) = (800.0, 420.0, 50.0);
    let (x0, x1) = bounds(xs);
    let (y0, y1) = bounds(ys);
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut path = String::new();
    for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
        let _ = write!(path, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, sx(*x), sy(*y));
    }
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{tx}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{title}</text>\n\
         <line x1=\"{m}\" y1=\"{ybase}\" x2=\"{xend}\" y2=\"{ybase}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{ybase}\" stroke=\"black\"/>\n\
         <text x=\"{tx}\" y=\"{h}\" dy=\"-8\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{x_label} [{x0:.1}, {x1:.1}]</text>\n\
         <text x=\"14\" y=\"{ty}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 {ty})\">{y_label} [{y0:.1}, {y1:.1}]</text>\n\
         <path d=\"{path}\" fill=\"none\" stroke=\"#1763aa\" stroke-width=\"1.5\"/>\n\
         </svg>\n",
        tx = w / 2.0,
        ty = h / 2.0,
        xend = w - m,
        ybase = h - m,
    )
}

/// Emit the trajectory top view, the altitude profile and matching
/// whitespace-separated data files next to the run's CSVs. Returns manifest
/// entries for everything written.
pub fn emit_plots(dir: &Path) -> Result<Vec<(String, u64)>, PlotError> {
    let series = load_series(dir)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, content: String| -> Result<(), PlotError> {
        std::fs::write(dir.join(name), &content)?;
        written.push((name.to_string(), fnv1a64(content.as_bytes())));
        Ok(())
    };

    emit(
        "trajectory_top.svg",
        polyline_svg("Trajectory (top view)", &series.x, &series.y, "x (m)", "y (m)"),
    )?;
    emit(
        "altitude_profile.svg",
        polyline_svg("Altitude profile", &series.t, &series.z, "t (s)", "z (m)"),
    )?;

    let mut top = String::from("# x y\n");
    for (x, y) in series.x.iter().zip(&series.y) {
        let _ = writeln!(top, "{x} {y}");
    }
    emit("trajectory_top.dat", top)?;

    let mut alt = String::from("# t z\n");
    for (t, z) in series.t.iter().zip(&series.z) {
        let _ = writeln!(alt, "{t} {z}");
    }
    emit("altitude_profile.dat", alt)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_directory_content_errors() {
        let dir = std::env::temp_dir().join(format!("aquaplan_plots_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        assert!(matches!(emit_plots(&dir), Err(PlotError::MissingStepCsv)));
        std::fs::write(dir.join("steps.csv"), "t,x,y\n0,1,2\n").unwrap();
        match emit_plots(&dir) {
            Err(PlotError::MissingColumns(cols)) => assert_eq!(cols, vec!["z".to_string()]),
            other => panic!("expected missing columns, got {:?}", other.map(|_| ())),
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn emission_is_idempotent() {
        let dir = std::env::temp_dir().join(format!("aquaplan_plots_i_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let csv = "t,x,y,z\n0,0,0,100\n0.1,1,0.5,100\n0.2,2,1.0,99\n";
        std::fs::write(dir.join("steps.csv"), csv).unwrap();
        let a = emit_plots(&dir).unwrap();
        let first = std::fs::read(dir.join("trajectory_top.svg")).unwrap();
        let b = emit_plots(&dir).unwrap();
        let second = std::fs::read(dir.join("trajectory_top.svg")).unwrap();
        assert_eq!(a, b);
        assert_eq!(first, second);
        // every trajectory point is referenced in the data file
        let dat = std::fs::read_to_string(dir.join("trajectory_top.dat")).unwrap();
        assert_eq!(dat.lines().count(), 4);
        std::fs::remove_dir_all(&dir).ok();
    }
}
