//! Reproducible experiment drivers: the hypocycloid projection study, the
//! oracle accuracy harness and the Cryo-EM pipeline.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cryoem::{self, CryoConfig, CryoData};
use crate::datagen::{
    add_gaussian_noise, child_seed, hypocycloid_cusps, hypocycloid_grid, hypocycloid_point, rng_for,
};
use crate::error::{check_positive, Error, Result};
use crate::geometry::{dist, dot, Hyperplane, PointCloud};
use crate::hull::{project_onto_hull, support_function};
use crate::oracle::{
    self, dist_to_hull, envelope, gamma_quadrature, Envelope, OracleParams, PlanConfig,
};
use crate::par;
use crate::projection::{denoise, DenoiseConfig, DenoiseReport};

/// Where the noisy copies of the hypocycloid study are centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    #[default]
    Cusp,
    NearCusp,
    MidArc,
}

impl SourceKind {
    /// Curve parameter of the source: the first cusp, 15% of the way to the
    /// next cusp, or halfway.
    pub fn parameter(self, n_cusps: u32) -> f64 {
        let span = 2.0 * PI / n_cusps as f64;
        match self {
            SourceKind::Cusp => 0.0,
            SourceKind::NearCusp => 0.15 * span,
            SourceKind::MidArc => 0.5 * span,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypocycloidConfig {
    pub a: f64,
    pub n_cusps: u32,
    pub sigmas: Vec<f64>,
    pub count: usize,
    pub bins: usize,
    /// Curve samples added to the cusps as the hull's vertex set.
    pub grid: usize,
    pub source: SourceKind,
    /// Arc-length radius of a vertex neighborhood on the polygon boundary.
    pub vertex_window: f64,
}

impl Default for HypocycloidConfig {
    fn default() -> Self {
        Self {
            a: 1.0,
            n_cusps: 5,
            sigmas: vec![0.3, 0.5, 1.0, 10.0],
            count: 10_000,
            bins: 720,
            grid: 1000,
            source: SourceKind::Cusp,
            vertex_window: 0.1,
        }
    }
}

/// Arc-length coordinates on the boundary of the regular polygon through
/// the cusps, starting at cusp 0 and running counterclockwise.
#[derive(Debug, Clone)]
pub struct PolygonBoundary {
    vertices: PointCloud,
    side: f64,
}

impl PolygonBoundary {
    pub fn new(a: f64, n_cusps: u32) -> Self {
        let vertices = hypocycloid_cusps(a, n_cusps);
        let side = dist(vertices.point(0), vertices.point(1));
        Self { vertices, side }
    }

    pub fn perimeter(&self) -> f64 {
        self.side * self.vertices.len() as f64
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    /// Coordinate of the boundary point nearest to `p`.
    pub fn coordinate(&self, p: &[f64]) -> f64 {
        let n = self.vertices.len();
        let mut best = (f64::INFINITY, 0.0);
        for j in 0..n {
            let a = self.vertices.point(j);
            let b = self.vertices.point((j + 1) % n);
            let ab = [b[0] - a[0], b[1] - a[1]];
            let ap = [p[0] - a[0], p[1] - a[1]];
            let t = (dot(&ap, &ab) / dot(&ab, &ab)).clamp(0.0, 1.0);
            let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
            let d = dist(p, &q);
            if d < best.0 {
                best = (d, (j as f64 + t) * self.side);
            }
        }
        best.1.rem_euclid(self.perimeter())
    }

    /// Circular distance between two coordinates.
    pub fn separation(&self, s: f64, t: f64) -> f64 {
        let p = self.perimeter();
        let d = (s - t).rem_euclid(p);
        d.min(p - d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaStudy {
    pub sigma: f64,
    /// Points projected to themselves.
    pub inside: usize,
    pub outside: usize,
    /// Outside points per boundary bin.
    pub histogram: Vec<u64>,
    /// Share of outside points within `vertex_window` of each vertex.
    pub vertex_fractions: Vec<f64>,
    pub modal_bin: usize,
    /// Index of the vertex the source sits at or nearest to.
    pub source_vertex: usize,
}

impl SigmaStudy {
    pub fn source_fraction(&self) -> f64 {
        self.vertex_fractions[self.source_vertex]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypocycloidStudy {
    pub config: HypocycloidConfig,
    pub source: [f64; 2],
    pub perimeter: f64,
    pub runs: Vec<SigmaStudy>,
}

/// Projects noisy copies of one curve point onto the hull of the curve and
/// histograms where the outside points land on the polygon boundary.
pub fn hypocycloid_study(cfg: &HypocycloidConfig, seed: u64) -> Result<HypocycloidStudy> {
    if cfg.count == 0 || cfg.bins == 0 {
        return Err(Error::param("count", "count and bins must be positive"));
    }
    check_positive("vertex_window", cfg.vertex_window)?;
    let mut vertices = hypocycloid_cusps(cfg.a, cfg.n_cusps);
    for p in hypocycloid_grid(cfg.a, cfg.n_cusps, cfg.grid)?.iter() {
        vertices.push(p)?;
    }
    let boundary = PolygonBoundary::new(cfg.a, cfg.n_cusps);
    let source = hypocycloid_point(cfg.a, cfg.n_cusps, cfg.source.parameter(cfg.n_cusps));
    let n = cfg.n_cusps as usize;
    let source_vertex = (0..n)
        .min_by(|&i, &j| {
            dist(&source, vertices.point(i)).total_cmp(&dist(&source, vertices.point(j)))
        })
        .unwrap_or(0);

    let mut runs = Vec::with_capacity(cfg.sigmas.len());
    for &sigma in &cfg.sigmas {
        check_positive("sigma", sigma)?;
        let copies = PointCloud::from_flat(2, source.repeat(cfg.count))?;
        let noisy =
            add_gaussian_noise(&copies, sigma, child_seed(seed, &format!("sigma={sigma}")))?;
        let projected = par::try_map_range(noisy.len(), |i| {
            project_onto_hull(noisy.point(i), &vertices)
        })?;

        let perimeter = boundary.perimeter();
        let mut histogram = vec![0u64; cfg.bins];
        let mut near = vec![0usize; n];
        let mut inside = 0;
        for (p, d) in &projected {
            if *d == 0.0 {
                inside += 1;
                continue;
            }
            let s = boundary.coordinate(p);
            let bin = ((s / perimeter * cfg.bins as f64) as usize).min(cfg.bins - 1);
            histogram[bin] += 1;
            for (v, c) in near.iter_mut().enumerate() {
                if boundary.separation(s, v as f64 * boundary.side()) <= cfg.vertex_window {
                    *c += 1;
                }
            }
        }
        let outside = cfg.count - inside;
        let denom = outside.max(1) as f64;
        let modal_bin = (0..cfg.bins)
            .max_by_key(|&b| (histogram[b], std::cmp::Reverse(b)))
            .unwrap_or(0);
        runs.push(SigmaStudy {
            sigma,
            inside,
            outside,
            histogram,
            vertex_fractions: near.iter().map(|&c| c as f64 / denom).collect(),
            modal_bin,
            source_vertex,
        });
    }
    Ok(HypocycloidStudy {
        config: cfg.clone(),
        source,
        perimeter: boundary.perimeter(),
        runs,
    })
}

/// `count` hyperplanes `<omega, x> = s(omega) + u` with `omega` uniform on
/// the circle and `u` uniform on `offsets`; a negative `u` puts the plane
/// through the hull.
pub fn random_hyperplanes(
    vertices: &PointCloud,
    count: usize,
    offsets: (f64, f64),
    seed: u64,
) -> Result<Vec<Hyperplane>> {
    if vertices.ambient_dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: vertices.ambient_dim(),
        });
    }
    if !(offsets.0 < offsets.1) {
        return Err(Error::param(
            "offsets",
            format!("need lo < hi, got {offsets:?}"),
        ));
    }
    let mut rng = rng_for(seed, "hyperplanes");
    (0..count)
        .map(|_| {
            let t = rng.random_range(0.0..2.0 * PI);
            let omega = [t.cos(), t.sin()];
            let u = rng.random_range(offsets.0..offsets.1);
            Hyperplane::new(omega.to_vec(), support_function(vertices, &omega)? + u)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEval {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub exact: f64,
    pub estimate: f64,
    pub error: f64,
    pub within: bool,
    /// The oracle reported a crossing hyperplane and clamped to zero.
    pub clamped: bool,
    /// Quadrature `Gamma(H)` on the clean grid.
    pub gamma: f64,
    pub envelope: Option<Envelope>,
    pub in_envelope: Option<bool>,
    /// Set when the scan found no admissible bin.
    pub failed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
}

fn quantiles(mut xs: Vec<f64>) -> Option<Quantiles> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let at = |q: f64| xs[((q * (xs.len() - 1) as f64).round() as usize).min(xs.len() - 1)];
    Some(Quantiles {
        p50: at(0.5),
        p90: at(0.9),
        max: xs[xs.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEval {
    pub params: OracleParams,
    pub samples: usize,
    /// Uncapped sample demand at the configured `eta`.
    pub demand: f64,
    /// Accuracy threshold, `tolerance_deltas * delta`.
    pub tolerance: f64,
    pub queries: Vec<QueryEval>,
    pub within_fraction: f64,
    pub error_quantiles: Option<Quantiles>,
    /// Share of queries with exact distance at least `sigma` whose envelope
    /// contains the exact distance; `None` when there are none.
    pub envelope_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleEvalConfig {
    pub queries: usize,
    pub delta: f64,
    pub c_m: f64,
    pub d: u32,
    pub eta: f64,
    /// Oracle samples used are `min(demand, sample_cap)`.
    pub sample_cap: usize,
    /// Arc-length grid size for exact distances and `Gamma`.
    pub grid: usize,
    pub offset_lo: f64,
    pub offset_hi: f64,
    pub tolerance_deltas: f64,
    pub plan: PlanConfig,
}

impl Default for OracleEvalConfig {
    fn default() -> Self {
        Self {
            queries: 50,
            delta: 0.05,
            c_m: 0.2,
            d: 1,
            eta: 0.1,
            sample_cap: 200_000,
            grid: 2000,
            offset_lo: 0.0,
            offset_hi: 1.0,
            tolerance_deltas: 3.0,
            plan: PlanConfig::default(),
        }
    }
}

/// Oracle samples to draw: the planned demand, capped.
pub fn oracle_sample_count(sigma: f64, cfg: &OracleEvalConfig) -> Result<(usize, f64)> {
    let demand = oracle::sample_demand(sigma, cfg.delta, cfg.c_m, cfg.eta, &cfg.plan)?;
    Ok(((demand.ceil().min(cfg.sample_cap as f64)) as usize, demand))
}

/// Compares oracle distances from `block` against exact distances to the
/// hull of `curve`.
pub fn oracle_eval(
    curve: &PointCloud,
    block: &PointCloud,
    hyperplanes: &[Hyperplane],
    params: &OracleParams,
    cfg: &OracleEvalConfig,
) -> Result<OracleEval> {
    let tolerance = cfg.tolerance_deltas * params.delta;
    let queries = par::try_map_range(hyperplanes.len(), |i| {
        let h = &hyperplanes[i];
        let exact = (h.offset() - support_function(curve, h.normal())?).max(0.0);
        let gamma = gamma_quadrature(h, curve, params.sigma)?;
        let env = if gamma > 0.0 {
            Some(envelope(gamma, params)?)
        } else {
            None
        };
        let (estimate, clamped, failed) = match dist_to_hull(h, block, params) {
            Ok(out) => (out.distance, out.intersects_hull, false),
            Err(e) if matches!(e.root(), Error::OracleSaturated { .. }) => (f64::NAN, false, true),
            Err(e) => return Err(e),
        };
        let error = (estimate - exact).abs();
        Ok::<_, Error>(QueryEval {
            normal: h.normal().to_vec(),
            offset: h.offset(),
            exact,
            estimate,
            error,
            within: error <= tolerance,
            clamped,
            gamma,
            in_envelope: env.map(|e| e.lower <= exact && exact <= e.upper),
            envelope: env,
            failed,
        })
    })?;
    let count = queries.len().max(1) as f64;
    let far: Vec<&QueryEval> = queries.iter().filter(|q| q.exact >= params.sigma).collect();
    let envelope_fraction = if far.is_empty() {
        None
    } else {
        Some(far.iter().filter(|q| q.in_envelope == Some(true)).count() as f64 / far.len() as f64)
    };
    Ok(OracleEval {
        params: *params,
        samples: block.len(),
        demand: oracle::sample_demand(params.sigma, params.delta, params.c_m, cfg.eta, &cfg.plan)
            .unwrap_or(f64::NAN),
        tolerance,
        within_fraction: queries.iter().filter(|q| q.within).count() as f64 / count,
        error_quantiles: quantiles(
            queries
                .iter()
                .filter(|q| !q.failed)
                .map(|q| q.error)
                .collect(),
        ),
        envelope_fraction,
        queries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CryoRunConfig {
    pub data: CryoConfig,
    pub denoise: DenoiseConfig,
    /// Radius of the probe balls used to calibrate `c_M`.
    pub mass_eps: f64,
    pub mass_probes: usize,
    /// Upper clamp on the calibrated `c_M`; the oracle needs `c_M < 1/e`.
    pub c_m_max: f64,
}

impl Default for CryoRunConfig {
    fn default() -> Self {
        Self {
            data: CryoConfig::default(),
            denoise: DenoiseConfig {
                d: 3,
                reduced_dim: Some(3),
                delta: Some(0.02),
                mesh: Some(0.3),
                ..DenoiseConfig::default()
            },
            mass_eps: 0.2,
            mass_probes: 200,
            c_m_max: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CryoRun {
    pub c_m_calibrated: f64,
    pub c_m_used: f64,
    pub scale: f64,
    pub pixel_rms: f64,
    pub sigma_pixels: f64,
    pub spread: f64,
    pub degenerate: bool,
    pub warning: Option<String>,
    pub report: DenoiseReport,
}

/// Builds the image dataset, calibrates `c_M` on its clean cloud and runs
/// the denoiser.
pub fn run_cryo(cfg: &CryoRunConfig, seed: u64) -> Result<(CryoData, CryoRun)> {
    let data = cryoem::make_cryo_dataset(&cfg.data, seed).map_err(|e| e.in_stage("generate"))?;
    let c_m_calibrated = cryoem::calibrate_mass_constant(
        &data.dataset.clean,
        cfg.mass_eps,
        cfg.denoise.d,
        cfg.mass_probes,
        child_seed(seed, "mass"),
    )
    .map_err(|e| e.in_stage("calibrate"))?;
    let c_m_used = c_m_calibrated.min(cfg.c_m_max);
    if !(c_m_used > 0.0) {
        return Err(Error::param(
            "c_M",
            format!("calibrated mass constant is {c_m_calibrated}"),
        )
        .in_stage("calibrate"));
    }
    let dcfg = DenoiseConfig {
        c_m: c_m_used,
        ..cfg.denoise
    };
    let report = denoise(&data.dataset, &dcfg)?;
    let warning = data.degenerate.then(|| {
        format!(
            "degenerate image manifold: all {} images coincide (spread {:e}); the density is rotation invariant",
            data.dataset.partition.n, data.spread
        )
    });
    let run = CryoRun {
        c_m_calibrated,
        c_m_used,
        scale: data.scale,
        pixel_rms: data.pixel_rms,
        sigma_pixels: data.sigma_pixels,
        spread: data.spread,
        degenerate: data.degenerate,
        warning,
        report,
    };
    Ok((data, run))
}
