//! JSON and CSV writers for command results.

use std::path::Path;

use mdenoise_core::experiments::{HypocycloidStudy, OracleEval};
use mdenoise_core::io::{coord_header, write_json};
use mdenoise_core::projection::{DenoiseReport, PointRecord};
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// Envelope shared by every `*.json` result: the command, its seed and the
/// full configuration, so each file reproduces its own run.
#[derive(Debug, Serialize)]
pub struct RunRecord<'a, C: Serialize, R: Serialize> {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub exact_oracle: bool,
    pub config: &'a C,
    pub result: R,
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_json(path, value).map_err(CliError::from)
}

fn table(
    path: &Path,
    header: Vec<String>,
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| csv_err(path, e))
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Report JSON without wall-clock timings, which go to their own file so
/// that reruns with the same seed produce identical reports.
pub fn split_timings(report: &DenoiseReport) -> Result<(Value, Value), CliError> {
    let mut v = serde_json::to_value(report).map_err(mdenoise_core::error::Error::from)?;
    let timings = v
        .as_object_mut()
        .and_then(|o| o.remove("timings"))
        .unwrap_or(Value::Null);
    Ok((v, timings))
}

pub fn points_csv(path: &Path, records: &[PointRecord]) -> Result<(), CliError> {
    let dim = records.first().map_or(0, |r| r.x_hat.len());
    let rdim = records.first().map_or(0, |r| r.v0.len());
    let mut header = vec!["index".to_string()];
    header.extend(coord_header("x_hat", dim));
    header.push("lambda0".into());
    header.extend(coord_header("v0_", rdim));
    header.extend(
        [
            "inside_hull",
            "err_vs_clean",
            "noise_vs_clean",
            "obtuse_residual",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    let rows = records.iter().map(|r| {
        let mut row = vec![r.index.to_string()];
        row.extend(r.x_hat.iter().copied().map(num));
        row.push(num(r.lambda0));
        row.extend(r.v0.iter().copied().map(num));
        row.push(r.inside_hull.to_string());
        row.extend([r.err_vs_clean, r.noise_vs_clean, r.obtuse_residual].map(num));
        row
    });
    table(path, header, rows)
}

/// Error budget next to the measured errors, one term per row.
pub fn budget_csv(path: &Path, report: &DenoiseReport) -> Result<(), CliError> {
    let b = &report.budget;
    let s = &report.summary;
    let rows = [
        ("pca_bias", b.budget.map(|t| t.pca_bias)),
        ("statistical_risk", b.budget.map(|t| t.statistical_risk)),
        ("algorithmic", b.budget.map(|t| t.algorithmic)),
        ("total", b.budget.map(|t| t.total)),
        ("truncation_radius", Some(b.radius)),
        ("eps_emp", Some(b.eps_emp)),
        ("dudley_j", b.dudley_j),
        ("predicted_ratio", b.predicted_ratio),
        ("pca_residual", Some(report.pca_residual)),
        ("measured_mean_err", Some(s.mean_err)),
        ("measured_mean_noise", Some(s.mean_noise)),
        ("measured_ratio", Some(s.reduction_ratio)),
    ];
    table(
        path,
        vec!["term".into(), "value".into()],
        rows.into_iter().map(|(k, v)| vec![k.to_string(), opt(v)]),
    )
}

pub fn hypocycloid_tables(dir: &Path, study: &HypocycloidStudy) -> Result<(), CliError> {
    let width = study.perimeter / study.config.bins as f64;
    for run in &study.runs {
        let rows = run.histogram.iter().enumerate().map(|(i, c)| {
            vec![
                i.to_string(),
                num(i as f64 * width),
                num((i + 1) as f64 * width),
                c.to_string(),
            ]
        });
        table(
            &dir.join(format!("histogram_sigma_{}.csv", run.sigma)),
            ["bin", "s_lo", "s_hi", "count"].map(String::from).to_vec(),
            rows,
        )?;
    }
    table(
        &dir.join("counts.csv"),
        [
            "sigma",
            "inside",
            "outside",
            "modal_bin",
            "source_vertex",
            "source_fraction",
        ]
        .map(String::from)
        .to_vec(),
        study.runs.iter().map(|r| {
            vec![
                num(r.sigma),
                r.inside.to_string(),
                r.outside.to_string(),
                r.modal_bin.to_string(),
                r.source_vertex.to_string(),
                num(r.source_fraction()),
            ]
        }),
    )?;
    table(
        &dir.join("vertex_fractions.csv"),
        ["sigma", "vertex", "fraction"].map(String::from).to_vec(),
        study.runs.iter().flat_map(|r| {
            r.vertex_fractions
                .iter()
                .enumerate()
                .map(|(v, f)| vec![num(r.sigma), v.to_string(), num(*f)])
        }),
    )
}

pub fn queries_csv(path: &Path, eval: &OracleEval) -> Result<(), CliError> {
    let header = [
        "normal_0",
        "normal_1",
        "offset",
        "exact",
        "estimate",
        "error",
        "within",
        "clamped",
        "failed",
        "gamma",
        "envelope_lower",
        "envelope_upper",
    ]
    .map(String::from)
    .to_vec();
    let rows = eval.queries.iter().map(|q| {
        let mut row: Vec<String> = q.normal.iter().copied().map(num).collect();
        row.extend([q.offset, q.exact, q.estimate, q.error].map(num));
        row.extend([q.within, q.clamped, q.failed].map(|b| b.to_string()));
        row.push(num(q.gamma));
        row.push(opt(q.envelope.map(|e| e.lower)));
        row.push(opt(q.envelope.map(|e| e.upper)));
        row
    });
    table(path, header, rows)
}
