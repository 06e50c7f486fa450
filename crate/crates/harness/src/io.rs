//! CSV emission. UTF-8, header row, '.' decimal separator; every writer is a
//! pure function of its inputs so artifacts stay byte-reproducible.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use aquaplan_core::environment::ShadowSample;
use aquaplan_core::metrics::{RunMetrics, StepRecord};

pub const STEP_HEADER: &str =
    "t,x,y,z,psi,theta,chosen_candidate,T_k,A_k,S_k,J_k,W_eff,dfaa_active,min_gamma,step_compute_ms";

pub const METRICS_HEADER: &str = "planner,seed,success,reached_goal,collided,path_length_m,\
smoothness,min_gamma,cumulative_coverage_m2,mean_coverage_ratio,gsd_min_m_px,gsd_mean_m_px,\
min_altitude_m,mean_step_ms,steps";

fn fmt_opt_cost(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v}")
    }
}

pub fn step_csv(records: &[StepRecord<f64>]) -> String {
    let mut out = String::with_capacity(records.len() * 96 + 128);
    out.push_str(STEP_HEADER);
    out.push('\n');
    for r in records {
        let chosen = r
            .chosen_candidate
            .map(|c| c.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3}",
            r.t,
            r.position.x,
            r.position.y,
            r.position.z,
            r.heading,
            r.pitch,
            chosen,
            fmt_opt_cost(r.tracking_cost),
            fmt_opt_cost(r.obstacle_cost),
            fmt_opt_cost(r.smoothness_cost),
            fmt_opt_cost(r.total_cost),
            r.w_eff,
            u8::from(r.dfaa_active),
            r.min_gamma,
            r.step_compute_ms,
        );
    }
    out
}

pub fn metrics_row(planner: &str, seed: u64, m: &RunMetrics<f64>) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3},{}",
        planner,
        seed,
        u8::from(m.success),
        u8::from(m.reached_goal),
        u8::from(m.collided),
        m.path_length,
        m.smoothness,
        m.min_gamma,
        m.cumulative_coverage,
        m.mean_coverage_ratio,
        m.gsd_min,
        m.gsd_mean,
        m.min_altitude,
        m.mean_step_ms,
        m.steps,
    )
}

pub fn metrics_csv(rows: &[(String, u64, RunMetrics<f64>)]) -> String {
    let mut out = String::new();
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for (planner, seed, m) in rows {
        out.push_str(&metrics_row(planner, *seed, m));
        out.push('\n');
    }
    out
}

pub fn v_series_csv(series: &[f64], dt: f64) -> String {
    let mut out = String::from("t,V\n");
    for (i, v) in series.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i as f64 * dt, v);
    }
    out
}

pub fn shadow_csv(sample: &ShadowSample<f64>) -> String {
    let mut out = String::from("t,x,y\n");
    for p in &sample.points {
        let _ = writeln!(out, "{},{},{}", sample.time, p.x, p.y);
    }
    out
}

pub fn write(path: &Path, content: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, content)
}

/// Parse a CSV produced by [`step_csv`] back into column vectors keyed by
/// header name (used by the plot emitter and the recompute oracle).
pub fn read_columns(text: &str) -> io::Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "empty CSV"))?;
    let names: Vec<String> = header.split(',').map(|s| s.to_string()).collect();
    let mut cols: Vec<Vec<String>> = vec![Vec::new(); names.len()];
    for line in lines {
        if line.is_empty() {
            continue;
        }
        for (i, field) in line.split(',').enumerate() {
            if i < cols.len() {
                cols[i].push(field.to_string());
            }
        }
    }
    Ok((names, cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use aquaplan_core::geometry::Vec3;

    fn record(t: f64) -> StepRecord<f64> {
        StepRecord {
            t,
            position: Vec3::new(1.0, 2.0, 100.0),
            heading: 0.1,
            pitch: 0.0,
            chosen_candidate: Some(3),
            tracking_cost: 0.5,
            obstacle_cost: 0.0,
            smoothness_cost: 0.25,
            total_cost: 0.25,
            w_eff: 300.0,
            dfaa_active: false,
            min_gamma: 4.2,
            planned_min_gamma: 4.2,
            coverage_area: 100.0,
            coverage_ratio: 0.9,
            gsd: 0.15,
            step_compute_ms: 0.0,
        }
    }

    #[test]
    fn step_csv_schema_and_blanks() {
        let mut r = record(0.0);
        let text = step_csv(&[r.clone()]);
        assert!(text.starts_with(STEP_HEADER));
        assert!(text.contains(",3,"));
        // baseline rows leave candidate fields blank
        r.chosen_candidate = None;
        r.tracking_cost = f64::NAN;
        r.obstacle_cost = f64::NAN;
        r.smoothness_cost = f64::NAN;
        r.total_cost = f64::NAN;
        let text = step_csv(&[r]);
        let row = text.lines().nth(1).unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 15);
        assert_eq!(fields[6], "");
        assert_eq!(fields[7], "");
        assert_eq!(fields[10], "");
    }

    #[test]
    fn columns_round_trip() {
        let text = step_csv(&[record(0.0), record(0.1)]);
        let (names, cols) = read_columns(&text).unwrap();
        assert_eq!(names.len(), 15);
        assert_eq!(cols[0], vec!["0", "0.1"]);
    }
}
