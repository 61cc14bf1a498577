use std::path::Path;

use mdenoise_core::bounds::{self, ChatterjeeTail};
use mdenoise_core::datagen::ellipse_grid;
use mdenoise_core::datagen::{
    add_gaussian_noise, child_seed, make_dataset, sample_ellipse, Dataset, ManifoldSpec,
};
use mdenoise_core::error::Error;
use mdenoise_core::experiments::{self, oracle_sample_count, random_hyperplanes};
use mdenoise_core::geometry::Hyperplane;
use mdenoise_core::io::{load_dataset, save_dataset};
use mdenoise_core::oracle::{self, OracleParams};
use mdenoise_core::pca;
use mdenoise_core::projection::{self, DenoiseConfig, ProviderKind};
use serde::Serialize;
use serde_json::Value;

use crate::config::ConfigFile;
use crate::output::{self, RunRecord};
use crate::{Cli, CliError};

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn record<'a, C: Serialize, R: Serialize>(
    cli: &Cli,
    command: &'static str,
    config: &'a C,
    result: R,
) -> RunRecord<'a, C, R> {
    RunRecord {
        command,
        version: VERSION,
        seed: cli.seed,
        exact_oracle: cli.exact_oracle,
        config,
        result,
    }
}

fn with_provider(cli: &Cli, cfg: DenoiseConfig) -> DenoiseConfig {
    if cli.exact_oracle {
        DenoiseConfig {
            provider: ProviderKind::Exact,
            ..cfg
        }
    } else {
        cfg
    }
}

fn require_dataset(cli: &Cli) -> Result<Dataset, CliError> {
    let dir = cli.dataset.as_deref().ok_or_else(|| {
        CliError::Config("this command needs --dataset DIR (see `mdenoise generate`)".into())
    })?;
    for (file, role) in [
        ("meta.json", "dataset metadata"),
        ("clean.csv", "clean points"),
        (
            "noisy.csv",
            "noisy observations, including the oracle block",
        ),
    ] {
        if !dir.join(file).is_file() {
            return Err(CliError::Config(format!(
                "dataset {} has no {file} ({role})",
                dir.display()
            )));
        }
    }
    load_dataset(dir).map_err(|e| CliError::Core(e.in_stage("load")))
}

pub fn generate(cli: &Cli, cfg: &ConfigFile) -> Result<(), CliError> {
    let g = &cfg.generate;
    let data = make_dataset(&g.manifold, g.n0, g.n1, g.n, g.sigma, cli.seed)?;
    save_dataset(&cli.out, &data)?;
    #[derive(Serialize)]
    struct Generated {
        manifold: String,
        ambient_dim: usize,
        count: usize,
        blocks: [usize; 3],
    }
    let p = data.partition;
    let summary = Generated {
        manifold: data.manifold.clone(),
        ambient_dim: data.ambient_dim(),
        count: data.clean.len(),
        blocks: [p.pca().len(), p.oracle().len(), p.targets().len()],
    };
    output::json(
        &cli.out.join("generate.json"),
        &record(cli, "generate", g, summary),
    )?;
    println!("wrote {} points to {}", data.clean.len(), cli.out.display());
    Ok(())
}

fn write_denoise_outputs(dir: &Path, report: &projection::DenoiseReport) -> Result<(), CliError> {
    output::points_csv(&dir.join("points.csv"), &report.records)?;
    output::budget_csv(&dir.join("budget.csv"), report)
}

pub fn denoise(cli: &Cli, cfg: &ConfigFile) -> Result<(), CliError> {
    let data = require_dataset(cli)?;
    let dcfg = with_provider(cli, cfg.denoise);
    let report = projection::denoise(&data, &dcfg)?;
    let (body, timings) = output::split_timings(&report)?;
    output::json(
        &cli.out.join("report.json"),
        &record(cli, "denoise", &dcfg, body),
    )?;
    output::json(&cli.out.join("timings.json"), &timings)?;
    write_denoise_outputs(&cli.out, &report)?;
    let s = &report.summary;
    println!(
        "{} targets: mean |X_hat - X| = {:.4}, mean |Y - X| = {:.4}, ratio {:.4}",
        s.targets, s.mean_err, s.mean_noise, s.reduction_ratio
    );
    Ok(())
}

pub fn hypocycloid(cli: &Cli, cfg: &ConfigFile) -> Result<(), CliError> {
    let study = experiments::hypocycloid_study(&cfg.hypocycloid, cli.seed)?;
    output::json(
        &cli.out.join("study.json"),
        &record(cli, "hypocycloid", &cfg.hypocycloid, &study),
    )?;
    output::hypocycloid_tables(&cli.out, &study)?;
    for r in &study.runs {
        println!(
            "sigma {:>5}: inside {:>5}, outside {:>5}, share at source vertex {:.3}",
            r.sigma,
            r.inside,
            r.outside,
            r.source_fraction()
        );
    }
    Ok(())
}

fn manifold_of(data: &Dataset) -> Result<ManifoldSpec, CliError> {
    let mut spec = data.params.clone();
    if let Value::Object(m) = &mut spec {
        m.insert("kind".into(), Value::String(data.manifold.clone()));
    }
    serde_json::from_value(spec).map_err(|e| {
        CliError::Config(format!(
            "dataset manifold `{}` is not a known curve: {e}",
            data.manifold
        ))
    })
}

pub fn oracle_eval(cli: &Cli, cfg: &ConfigFile) -> Result<(), CliError> {
    let sec = &cfg.oracle_eval;
    let p = &sec.params;
    let (curve, block, sigma) = match cli.dataset {
        Some(_) => {
            let data = require_dataset(cli)?;
            let curve = manifold_of(&data)?.grid(p.grid)?;
            let block = data.noisy.slice(data.partition.oracle());
            (curve, block, data.sigma)
        }
        None => {
            let (count, _) = oracle_sample_count(sec.sigma, p)?;
            let clean = sample_ellipse(count, child_seed(cli.seed, "oracle-clean"));
            let block =
                add_gaussian_noise(&clean, sec.sigma, child_seed(cli.seed, "oracle-noise"))?;
            (ellipse_grid(p.grid), block, sec.sigma)
        }
    };
    let params = OracleParams::derive(sigma, p.delta, p.d, p.c_m)?;
    let hyperplanes = if sec.hyperplanes.is_empty() {
        random_hyperplanes(
            &curve,
            p.queries,
            (p.offset_lo, p.offset_hi),
            child_seed(cli.seed, "queries"),
        )?
    } else {
        sec.hyperplanes
            .iter()
            .map(|h| Hyperplane::new(h.normal.to_vec(), h.offset))
            .collect::<Result<_, _>>()?
    };
    let eval = experiments::oracle_eval(&curve, &block, &hyperplanes, &params, p)?;
    output::json(
        &cli.out.join("oracle_eval.json"),
        &record(cli, "oracle-eval", sec, &eval),
    )?;
    output::queries_csv(&cli.out.join("queries.csv"), &eval)?;
    let q = eval.error_quantiles;
    println!(
        "{} queries on {} samples: {:.0}% within {:.3}; median error {}",
        eval.queries.len(),
        eval.samples,
        100.0 * eval.within_fraction,
        eval.tolerance,
        q.map_or("n/a".into(), |q| format!("{:.4}", q.p50))
    );
    Ok(())
}

pub fn cryoem(cli: &Cli, cfg: &ConfigFile) -> Result<(), CliError> {
    let mut ccfg = cfg.cryoem.clone();
    ccfg.denoise = with_provider(cli, ccfg.denoise);
    let (data, run) = experiments::run_cryo(&ccfg, cli.seed)?;
    save_dataset(&cli.out.join("dataset"), &data.dataset)?;
    output::json(&cli.out.join("density.json"), &data.density)?;
    let (report, timings) = output::split_timings(&run.report)?;
    let mut body = serde_json::to_value(&run).map_err(Error::from)?;
    body["report"] = report;
    output::json(
        &cli.out.join("cryo.json"),
        &record(cli, "cryoem", &ccfg, body),
    )?;
    output::json(&cli.out.join("timings.json"), &timings)?;
    write_denoise_outputs(&cli.out, &run.report)?;
    if let Some(w) = &run.warning {
        eprintln!("warning: {w}");
    }
    let s = &run.report.summary;
    println!(
        "{} images, c_M {:.3} (calibrated {:.3}): ratio {:.4}",
        data.dataset.clean.len(),
        run.c_m_used,
        run.c_m_calibrated,
        s.reduction_ratio
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct BoundsReport {
    oracle: OracleParams,
    sample_demand: f64,
    unit_ball_volume: f64,
    dudley_j: f64,
    chatterjee: ChatterjeeTail,
    noise_reduction_ratio: f64,
    hull_covering_log: f64,
    manifold_covering: f64,
}

pub fn bounds(cli: &Cli, cfg: &ConfigFile) -> Result<(), CliError> {
    let b = &cfg.bounds;
    let oracle = OracleParams::derive(b.sigma, b.delta, b.d, b.c_m)?;
    let j = bounds::dudley_j(b.ambient_dim, b.d, b.sigma, b.c_m, &b.dudley)?;
    let report = BoundsReport {
        oracle,
        sample_demand: oracle::sample_demand(b.sigma, b.delta, b.c_m, b.eta, &b.plan)?,
        unit_ball_volume: pca::unit_ball_volume(b.d),
        dudley_j: j,
        chatterjee: bounds::chatterjee_tail(b.gamma, j, b.sigma)?,
        noise_reduction_ratio: bounds::noise_reduction_ratio(b.n, b.gamma, j)?,
        hull_covering_log: bounds::hull_covering_log_bound(b.eps, b.hull_points)?,
        manifold_covering: bounds::manifold_covering_bound(b.eps, b.reach, b.volume, b.d)?,
    };
    output::json(
        &cli.out.join("bounds.json"),
        &record(cli, "bounds", b, &report),
    )?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(Error::from)?
    );
    Ok(())
}
