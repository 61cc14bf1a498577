//! Projection onto the estimated hull by exhaustive search over a sphere
//! net, and the full denoising pipeline.
//!
//! For a target `y` and unit `omega`, `f(omega) = -<y, omega> - s(-omega)`
//! is the signed distance from `y` to the supporting halfspace of `K` with
//! outer normal `-omega`. The search picks the net direction `v0` with the
//! largest `f` and returns `y + max(f(v0), 0) v0`, which is the projection of
//! `y` onto that halfspace.
//!
//! `s(-omega)` does not depend on `y`, so the support values over the net
//! are computed once into a [`SupportTable`] and shared by every target.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds::{self, Budget, DudleyConstants};
use crate::datagen::Dataset;
use crate::error::{check_dim, check_positive, Error, Result};
use crate::geometry::{dist, dot, PointCloud, SphereNet, DEFAULT_NET_CAP};
use crate::hull;
use crate::oracle::{self, OracleParams, PlanConfig, SortedProjections};
use crate::par;
use crate::pca::{self, PcaBoundInputs, SubspaceFit};

/// Source of support values `s(omega) = max_{x in K} <x, omega>`.
pub trait SupportProvider: Sync {
    fn dim(&self) -> usize;
    fn support(&self, omega: &[f64]) -> Result<f64>;
}

/// Exact support of the hull of a finite vertex set.
#[derive(Debug, Clone)]
pub struct ExactSupport {
    pub vertices: PointCloud,
}

impl SupportProvider for ExactSupport {
    fn dim(&self) -> usize {
        self.vertices.ambient_dim()
    }

    fn support(&self, omega: &[f64]) -> Result<f64> {
        hull::support_function(&self.vertices, omega)
    }
}

/// Support estimated by the tail scan on a projected oracle block.
#[derive(Debug, Clone)]
pub struct StatisticalSupport {
    pub block: PointCloud,
    pub params: OracleParams,
}

impl SupportProvider for StatisticalSupport {
    fn dim(&self) -> usize {
        self.block.ambient_dim()
    }

    fn support(&self, omega: &[f64]) -> Result<f64> {
        Ok(SortedProjections::new(&self.block, omega)?
            .scan(&self.params)?
            .support)
    }
}

/// `-<y, omega> - s(-omega)`.
pub fn f_omega(y: &[f64], omega: &[f64], provider: &dyn SupportProvider) -> Result<f64> {
    check_dim(provider.dim(), y.len())?;
    let neg: Vec<f64> = omega.iter().map(|w| -w).collect();
    Ok(-dot(y, omega) - provider.support(&neg)?)
}

/// Default share of net directions allowed to fail in the oracle.
pub const DEFAULT_FAILURE_TOLERANCE: f64 = 0.01;

/// `s(-omega_i)` for every net direction; `None` marks a direction whose
/// oracle scan saturated.
#[derive(Debug, Clone)]
pub struct SupportTable {
    pub net: SphereNet,
    pub values: Vec<Option<f64>>,
    pub failures: usize,
}

impl SupportTable {
    pub fn build(
        net: SphereNet,
        provider: &dyn SupportProvider,
        failure_tolerance: f64,
    ) -> Result<Self> {
        check_dim(provider.dim(), net.dimension())?;
        let results = par::map_range(net.len(), |i| {
            let neg: Vec<f64> = net.direction(i).iter().map(|w| -w).collect();
            provider.support(&neg)
        });
        let mut values = Vec::with_capacity(results.len());
        let mut failures = 0;
        for r in results {
            match r {
                Ok(v) => values.push(Some(v)),
                Err(Error::OracleSaturated { .. }) => {
                    failures += 1;
                    values.push(None);
                }
                Err(e) => return Err(e),
            }
        }
        let total = values.len();
        if failures as f64 > failure_tolerance * total as f64 {
            return Err(Error::TooManyDirectionFailures {
                failed: failures,
                total,
            });
        }
        Ok(Self {
            net,
            values,
            failures,
        })
    }

    pub fn dim(&self) -> usize {
        self.net.dimension()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub x_hat: Vec<f64>,
    pub direction: Vec<f64>,
    pub direction_index: usize,
    pub lambda0: f64,
    /// Largest `f` over the net, before clamping.
    pub f_max: f64,
    /// `f <= 0` on the whole net: the target is taken as inside the hull.
    pub inside_hull: bool,
}

/// Net search for one target; ties go to the lowest net index.
pub fn proj_k(y: &[f64], table: &SupportTable) -> Result<ProjectionResult> {
    check_dim(table.dim(), y.len())?;
    let mut best: Option<(f64, usize)> = None;
    for (i, s) in table.values.iter().enumerate() {
        let Some(s) = s else { continue };
        let f = -dot(y, table.net.direction(i)) - s;
        if best.is_none_or(|(bf, _)| f > bf) {
            best = Some((f, i));
        }
    }
    let (f_max, idx) = best.ok_or(Error::TooManyDirectionFailures {
        failed: table.failures,
        total: table.values.len(),
    })?;
    let v0 = table.net.direction(idx);
    let lambda0 = f_max.max(0.0);
    let x_hat = if lambda0 > 0.0 {
        y.iter().zip(v0).map(|(a, b)| a + lambda0 * b).collect()
    } else {
        y.to_vec()
    };
    Ok(ProjectionResult {
        x_hat,
        direction: v0.to_vec(),
        direction_index: idx,
        lambda0,
        f_max,
        inside_hull: lambda0 == 0.0,
    })
}

/// `sqrt(2 delta / d_star)`.
pub fn direction_error_bound(delta: f64, d_star: f64) -> Result<f64> {
    check_positive("d_star", d_star)?;
    if !(delta >= 0.0) {
        return Err(Error::param("delta", "must be >= 0"));
    }
    Ok((2.0 * delta / d_star).sqrt())
}

/// Largest `delta` strictly below `eps^2 / (16 d_star)`, with `d_star`
/// defaulting to `sigma sqrt(D)`.
pub fn delta_from_eps(eps: f64, sigma: f64, dim: usize, d_star: Option<f64>) -> Result<f64> {
    check_positive("eps", eps)?;
    let d_star = match d_star {
        Some(v) => v,
        None => sigma * (dim as f64).sqrt(),
    };
    check_positive("d_star", d_star)?;
    let bound = eps * eps / (16.0 * d_star);
    Ok(f64::from_bits(bound.to_bits() - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Statistical,
    /// Exact support of the projected clean points; for validation runs.
    Exact,
}

/// Absolute constants the theory leaves open, echoed in every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Constants {
    pub radius_c: f64,
    pub pca_c: f64,
    pub plan: PlanConfig,
    pub dudley: DudleyConstants,
    pub chatterjee_gamma: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            radius_c: pca::DEFAULT_RADIUS_CONSTANT,
            pca_c: 1.0,
            plan: PlanConfig::default(),
            dudley: DudleyConstants::default(),
            chatterjee_gamma: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiseConfig {
    /// Intrinsic dimension of the latent manifold.
    pub d: u32,
    pub c_m: f64,
    pub eps0: f64,
    pub eps: f64,
    pub alpha: f64,
    pub eta: f64,
    /// Overrides the reduced dimension chosen from `eps0`.
    pub reduced_dim: Option<usize>,
    /// Overrides the `delta` derived from `eps`.
    pub delta: Option<f64>,
    pub d_star: Option<f64>,
    /// Net mesh; defaults to `delta`.
    pub mesh: Option<f64>,
    pub net_cap: usize,
    pub provider: ProviderKind,
    pub failure_tolerance: f64,
    pub constants: Constants,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            d: 1,
            c_m: 0.2,
            eps0: 0.1,
            eps: 0.1,
            alpha: 0.1,
            eta: 0.1,
            reduced_dim: None,
            delta: None,
            d_star: None,
            mesh: None,
            net_cap: DEFAULT_NET_CAP,
            provider: ProviderKind::Statistical,
            failure_tolerance: DEFAULT_FAILURE_TOLERANCE,
            constants: Constants::default(),
        }
    }
}

/// Per-target output of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub index: usize,
    pub x_hat: Vec<f64>,
    pub lambda0: f64,
    pub v0: Vec<f64>,
    pub inside_hull: bool,
    /// `|X_hat - X|`.
    pub err_vs_clean: f64,
    /// `|Y - X|`.
    pub noise_vs_clean: f64,
    /// `<X - X_hat, Y_tilde - X_hat>` in subspace coordinates.
    pub obtuse_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub targets: usize,
    pub mean_err: f64,
    pub mean_noise: f64,
    /// `mean |X_hat - X| / mean |Y - X|`.
    pub reduction_ratio: f64,
    /// Share of targets with `|Y - X| >= |X_hat - X| - 1e-8`.
    pub pointwise_fraction: f64,
    pub inside_hull: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub radius: f64,
    pub eps_emp: f64,
    pub dudley_j: Option<f64>,
    pub budget: Option<Budget>,
    pub predicted_ratio: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenoiseReport {
    pub config: DenoiseConfig,
    pub manifold: String,
    pub sigma: f64,
    pub ambient_dim: usize,
    pub reduced_dim: usize,
    pub delta: f64,
    pub mesh: f64,
    pub net_size: usize,
    pub direction_failures: usize,
    pub oracle_params: Option<OracleParams>,
    pub oracle_samples: usize,
    /// Uncapped sample demand at the configured `eta`.
    pub sample_demand: Option<f64>,
    pub pca_residual: f64,
    pub rank_deficient: bool,
    pub timings: Vec<StageTiming>,
    pub summary: Summary,
    pub budget: BudgetReport,
    #[serde(skip)]
    pub fit: Option<SubspaceFit>,
    #[serde(skip)]
    pub records: Vec<PointRecord>,
}

fn timed<T>(
    timings: &mut Vec<StageTiming>,
    stage: &'static str,
    f: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let t = Instant::now();
    let out = f().map_err(|e| e.in_stage(stage))?;
    timings.push(StageTiming {
        stage,
        seconds: t.elapsed().as_secs_f64(),
    });
    Ok(out)
}

/// Runs the full pipeline: PCA on the first block, support table from the
/// oracle block, net projection of every target, lift back to `R^n`.
pub fn denoise(data: &Dataset, cfg: &DenoiseConfig) -> Result<DenoiseReport> {
    data.validate().map_err(|e| e.in_stage("input"))?;
    let part = data.partition;
    let n = data.ambient_dim();
    let sigma = data.sigma;
    let mut timings = Vec::new();

    let dim = match cfg.reduced_dim {
        Some(v) if v >= 1 && v <= n => v,
        Some(v) => {
            return Err(
                Error::param("reduced_dim", format!("must lie in [1, {n}], got {v}"))
                    .in_stage("pca"),
            )
        }
        None => {
            pca::choose_reduced_dim(n, cfg.d, cfg.c_m, cfg.eps0).map_err(|e| e.in_stage("pca"))?
        }
    };
    let fit = timed(&mut timings, "pca", || {
        pca::fit_subspace(&data.noisy.slice(part.pca()), dim)
    })?;
    let (oracle_block, targets) = timed(&mut timings, "reduce", || {
        Ok((
            pca::project(&fit, &data.noisy.slice(part.oracle()))?,
            pca::project(&fit, &data.noisy.slice(part.targets()))?,
        ))
    })?;

    let delta = match cfg.delta {
        Some(v) => v,
        None if sigma > 0.0 => {
            delta_from_eps(cfg.eps, sigma, dim, cfg.d_star).map_err(|e| e.in_stage("oracle"))?
        }
        None => cfg.eps * cfg.eps / 16.0,
    };
    let mesh = cfg.mesh.unwrap_or(delta).min(2.0);
    let net = timed(&mut timings, "net", || {
        SphereNet::build_capped(dim, mesh, cfg.net_cap)
    })?;
    let net_size = net.len();

    let mut oracle_params = None;
    let mut sample_demand = None;
    let table = match cfg.provider {
        ProviderKind::Exact => timed(&mut timings, "oracle", || {
            let provider = ExactSupport {
                vertices: pca::project(&fit, &data.clean)?,
            };
            SupportTable::build(net, &provider, cfg.failure_tolerance)
        })?,
        // Noise-free oracle samples lie on the manifold, so their hull support is
        // the plug-in estimate the tail scan tends to as sigma shrinks.
        ProviderKind::Statistical if sigma == 0.0 => timed(&mut timings, "oracle", || {
            let provider = ExactSupport {
                vertices: oracle_block.clone(),
            };
            SupportTable::build(net, &provider, cfg.failure_tolerance)
        })?,
        ProviderKind::Statistical => timed(&mut timings, "oracle", || {
            let params = OracleParams::derive(sigma, delta, cfg.d, cfg.c_m)?;
            oracle_params = Some(params);
            sample_demand =
                oracle::sample_demand(sigma, delta, cfg.c_m, cfg.eta, &cfg.constants.plan).ok();
            let provider = StatisticalSupport {
                block: oracle_block.clone(),
                params,
            };
            SupportTable::build(net, &provider, cfg.failure_tolerance)
        })?,
    };

    let clean_targets = pca::project(&fit, &data.clean.slice(part.targets()))
        .map_err(|e| e.in_stage("projection"))?;
    let records = timed(&mut timings, "projection", || {
        par::try_map_range(targets.len(), |i| {
            let y = targets.point(i);
            let r = proj_k(y, &table)?;
            let global = part.n1 + i;
            let x = data.clean.point(global);
            let x_hat = fit.lift(&r.x_hat);
            let xt = clean_targets.point(i);
            let a: Vec<f64> = xt.iter().zip(&r.x_hat).map(|(p, q)| p - q).collect();
            let b: Vec<f64> = y.iter().zip(&r.x_hat).map(|(p, q)| p - q).collect();
            Ok(PointRecord {
                index: global,
                err_vs_clean: dist(&x_hat, x),
                noise_vs_clean: dist(data.noisy.point(global), x),
                obtuse_residual: dot(&a, &b),
                x_hat,
                lambda0: r.lambda0,
                v0: r.direction,
                inside_hull: r.inside_hull,
            })
        })
    })?;

    let count = records.len() as f64;
    let mean_err = records.iter().map(|r| r.err_vs_clean).sum::<f64>() / count;
    let mean_noise = records.iter().map(|r| r.noise_vs_clean).sum::<f64>() / count;
    let summary = Summary {
        targets: records.len(),
        mean_err,
        mean_noise,
        reduction_ratio: if mean_noise > 0.0 {
            mean_err / mean_noise
        } else {
            f64::NAN
        },
        pointwise_fraction: records
            .iter()
            .filter(|r| r.noise_vs_clean >= r.err_vs_clean - 1e-8)
            .count() as f64
            / count,
        inside_hull: records.iter().filter(|r| r.inside_hull).count(),
    };
    let budget = budget_report(cfg, sigma, n, dim, part.n0)?;

    Ok(DenoiseReport {
        config: *cfg,
        manifold: data.manifold.clone(),
        sigma,
        ambient_dim: n,
        reduced_dim: dim,
        delta,
        mesh,
        net_size,
        direction_failures: table.failures,
        oracle_params,
        oracle_samples: oracle_block.len(),
        sample_demand,
        pca_residual: fit.residual,
        rank_deficient: fit.rank_deficient,
        timings,
        summary,
        budget,
        fit: Some(fit),
        records,
    })
}

/// The three-term budget for a run; the risk term needs `sigma` in `[0, 1]`.
pub fn budget_report(
    cfg: &DenoiseConfig,
    sigma: f64,
    n: usize,
    dim: usize,
    n0: usize,
) -> Result<BudgetReport> {
    let c = &cfg.constants;
    let radius = pca::truncation_radius(sigma, n, n0, cfg.alpha, c.radius_c)
        .map_err(|e| e.in_stage("budget"))?;
    let eps_emp = pca::eps_emp(radius, dim, n0, cfg.alpha).map_err(|e| e.in_stage("budget"))?;
    let pca_bias = pca::pca_bias_bound(&PcaBoundInputs {
        eps0: cfg.eps0,
        eps_emp,
        d: cfg.d,
        c: c.pca_c,
    })
    .map_err(|e| e.in_stage("budget"))?;
    if sigma == 0.0 {
        return Ok(BudgetReport {
            radius,
            eps_emp,
            dudley_j: None,
            budget: bounds::main_theorem_budget(pca_bias, 0.0, cfg.eps).ok(),
            predicted_ratio: None,
            note: Some("sigma = 0: the risk term vanishes".into()),
        });
    }
    match bounds::dudley_j(dim, cfg.d, sigma, cfg.c_m, &c.dudley) {
        Ok(j) => {
            let tail = bounds::chatterjee_tail(c.chatterjee_gamma, j, sigma)?;
            Ok(BudgetReport {
                radius,
                eps_emp,
                dudley_j: Some(j),
                budget: bounds::main_theorem_budget(pca_bias, tail.threshold, cfg.eps).ok(),
                predicted_ratio: bounds::noise_reduction_ratio(n, c.chatterjee_gamma, j).ok(),
                note: None,
            })
        }
        Err(e) => Ok(BudgetReport {
            radius,
            eps_emp,
            dudley_j: None,
            budget: None,
            predicted_ratio: None,
            note: Some(format!("risk term unavailable: {e}")),
        }),
    }
}
