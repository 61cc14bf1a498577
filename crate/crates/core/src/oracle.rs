//! Hyperplane-to-manifold distance from the Gaussian tails of a noisy
//! sample, with the threshold machinery and the sample-size planner.
//!
//! The scan looks at bins `(j delta, (j+1) delta]` of the projections
//! `<Y, b>`, from the top bin down, and stops at the first bin whose
//! estimated density `Gamma_est_j = (F_{j delta} - F_{(j+1) delta}) / delta`
//! reaches `Gamma_delta`. The support estimate is `j delta - r_delta`.
//! Density comparisons happen in log space because `Gamma_delta` underflows
//! `f64` for moderate `sigma / delta`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_positive, Error, Result};
use crate::geometry::{dot, Hyperplane, PointCloud};
use crate::pca::unit_ball_volume;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Oracle thresholds derived from `(sigma, delta, d, c_M)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    pub sigma: f64,
    pub delta: f64,
    pub d: u32,
    pub c_m: f64,
    pub kappa0: f64,
    pub kappa1: f64,
    pub r_delta: f64,
    /// May underflow to zero; `log_gamma_delta` is what the scan uses.
    pub gamma_delta: f64,
    pub log_gamma_delta: f64,
}

impl OracleParams {
    pub fn derive(sigma: f64, delta: f64, d: u32, c_m: f64) -> Result<Self> {
        check_positive("sigma", sigma)?;
        check_positive("delta", delta)?;
        if d == 0 {
            return Err(Error::param("d", "must be positive"));
        }
        if !(c_m > 0.0 && c_m < (-1.0f64).exp()) {
            return Err(Error::param(
                "c_M",
                format!("must lie in (0, 1/e), got {c_m}"),
            ));
        }
        let ratio = 1.0 / (c_m * delta.powi(d as i32) * unit_ball_volume(d));
        if !(ratio >= 1.0) {
            return Err(Error::DeltaTooLarge { ratio });
        }
        let kappa0 = SQRT_2PI * sigma;
        let kappa1 = ratio * kappa0;
        let log_ratio = ratio.ln();
        let r_delta = sigma * sigma / delta * log_ratio;
        let log_gamma_delta = -kappa1.ln() - r_delta * r_delta / (2.0 * sigma * sigma);
        Ok(Self {
            sigma,
            delta,
            d,
            c_m,
            kappa0,
            kappa1,
            r_delta,
            gamma_delta: log_gamma_delta.exp(),
            log_gamma_delta,
        })
    }

    /// `log(kappa1 / kappa0)` evaluated from the two kappas.
    pub fn log_kappa_ratio(&self) -> f64 {
        (self.kappa1 / self.kappa0).ln()
    }
}

/// Where the scan stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub j_final: i64,
    pub gamma_est: f64,
    /// `j_final * delta - r_delta`, the estimated support value along `b`.
    pub support: f64,
}

/// Projections of the oracle block onto `b`, sorted in descending order.
#[derive(Debug, Clone)]
pub struct SortedProjections {
    values: Vec<f64>,
}

impl SortedProjections {
    pub fn new(cloud: &PointCloud, b: &[f64]) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::NoOracleSamples);
        }
        check_dim(cloud.ambient_dim(), b.len())?;
        let mut values: Vec<f64> = cloud.iter().map(|p| dot(p, b)).collect();
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { values })
    }

    /// `|{v > gamma}|`.
    pub fn count_above(&self, gamma: f64) -> usize {
        self.values.partition_point(|&v| v > gamma)
    }

    /// `F_gamma`.
    pub fn tail_fraction(&self, gamma: f64) -> f64 {
        self.count_above(gamma) as f64 / self.values.len() as f64
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// `Gamma_est_j` as a raw bin count.
    pub fn bin_count(&self, j: i64, delta: f64) -> usize {
        self.count_above(j as f64 * delta) - self.count_above((j + 1) as f64 * delta)
    }

    pub fn scan(&self, params: &OracleParams) -> Result<ScanResult> {
        let delta = params.delta;
        let norm = self.values.len() as f64 * delta;
        let min = self.min();
        let mut j = (self.max() / delta).floor() as i64;
        loop {
            let count = self.bin_count(j, delta);
            if count > 0 && (count as f64 / norm).ln() >= params.log_gamma_delta {
                return Ok(ScanResult {
                    j_final: j,
                    gamma_est: count as f64 / norm,
                    support: j as f64 * delta - params.r_delta,
                });
            }
            if (j as f64) * delta < min {
                return Err(Error::OracleSaturated { j });
            }
            j -= 1;
        }
    }
}

/// Estimated `max_{x in M} <x, b>` from the oracle block.
pub fn estimate_support(b: &[f64], block: &PointCloud, params: &OracleParams) -> Result<f64> {
    Ok(SortedProjections::new(block, b)?.scan(params)?.support)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOutput {
    /// `t - (j delta - r_delta)` as returned by the scan, possibly negative.
    pub raw: f64,
    /// `max(raw, 0)`.
    pub distance: f64,
    /// Set when the raw output was negative.
    pub intersects_hull: bool,
    pub j_final: i64,
    pub gamma_est: f64,
}

/// Distance from `H` to the latent set, which must lie on the
/// `<x, b> <= t` side.
pub fn dist_to_hull(
    h: &Hyperplane,
    block: &PointCloud,
    params: &OracleParams,
) -> Result<OracleOutput> {
    let scan = SortedProjections::new(block, h.normal())?.scan(params)?;
    let raw = h.offset() - scan.support;
    Ok(OracleOutput {
        raw,
        distance: raw.max(0.0),
        intersects_hull: raw < 0.0,
        j_final: scan.j_final,
        gamma_est: scan.gamma_est,
    })
}

/// One line of the optional query log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub b: Vec<f64>,
    pub t: f64,
    pub j_final: i64,
    #[serde(rename = "Gamma_est")]
    pub gamma_est: f64,
    pub output: f64,
}

impl QueryRecord {
    pub fn new(h: &Hyperplane, out: &OracleOutput) -> Self {
        Self {
            b: h.normal().to_vec(),
            t: h.offset(),
            j_final: out.j_final,
            gamma_est: out.gamma_est,
            output: out.distance,
        }
    }
}

pub fn write_query_log(path: &Path, records: &[QueryRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

/// Constants of the sample-size formula. They are placeholders for
/// unspecified factors and are echoed in every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub a: f64,
    pub c_d: f64,
    pub cap: u64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            a: 1.0,
            c_d: 1.0,
            cap: 100_000_000,
        }
    }
}

/// `A exp(C_d (sigma/delta)^2 log(1/c_M)) log(1/eta)` before rounding.
pub fn sample_demand(sigma: f64, delta: f64, c_m: f64, eta: f64, cfg: &PlanConfig) -> Result<f64> {
    check_positive("sigma", sigma)?;
    check_positive("delta", delta)?;
    if !(c_m > 0.0 && c_m < 1.0) {
        return Err(Error::param(
            "c_M",
            format!("must lie in (0, 1), got {c_m}"),
        ));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::param(
            "eta",
            format!("must lie in (0, 1), got {eta}"),
        ));
    }
    let ratio = sigma / delta;
    Ok(cfg.a * (cfg.c_d * ratio * ratio * (1.0 / c_m).ln()).exp() * (1.0 / eta).ln())
}

/// Rounded-up sample demand; exceeding `cfg.cap` is an error.
pub fn plan_samples_raw(
    sigma: f64,
    delta: f64,
    c_m: f64,
    eta: f64,
    cfg: &PlanConfig,
) -> Result<u64> {
    let n = sample_demand(sigma, delta, c_m, eta, cfg)?.ceil();
    if !(n <= cfg.cap as f64) {
        return Err(Error::InfeasibleSampleDemand {
            required: n,
            cap: cfg.cap,
        });
    }
    Ok(n as u64)
}

pub fn plan_samples(params: &OracleParams, eta: f64, cfg: &PlanConfig) -> Result<u64> {
    plan_samples_raw(params.sigma, params.delta, params.c_m, eta, cfg)
}

/// `C Gamma^{-1} log(1/eta) log(1/(Gamma kappa0))` for a known `Gamma(H)`.
pub fn refined_sample_demand(gamma: f64, eta: f64, params: &OracleParams, c: f64) -> Result<f64> {
    check_positive("Gamma", gamma)?;
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::param(
            "eta",
            format!("must lie in (0, 1), got {eta}"),
        ));
    }
    if !(gamma * params.kappa0 < 1.0) {
        return Err(Error::param("Gamma", "needs Gamma * kappa0 < 1"));
    }
    Ok(c / gamma * (1.0 / eta).ln() * (1.0 / (gamma * params.kappa0)).ln())
}

/// Two-sided distance bounds implied by `Gamma(H)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub lower: f64,
    pub upper: f64,
    /// The lower bound degenerates to `-delta` when `Gamma kappa1 >= 1`.
    pub lower_vacuous: bool,
}

pub fn envelope(gamma: f64, params: &OracleParams) -> Result<Envelope> {
    check_positive("Gamma", gamma)?;
    let s2 = 2.0 * params.sigma * params.sigma;
    let l1 = -(gamma * params.kappa1).ln();
    let l0 = -(gamma * params.kappa0).ln();
    Ok(Envelope {
        lower: -params.delta + (s2 * l1.max(0.0)).sqrt(),
        upper: (s2 * l0.max(0.0)).sqrt(),
        lower_vacuous: l1 <= 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapBound {
    pub gap: f64,
    /// `sigma log(kappa1/kappa0) <= delta sqrt(2 log(1/(Gamma kappa1)))`,
    /// which guarantees `gap <= 2 delta`.
    pub condition: bool,
}

/// Width of the envelope. Requires `Gamma kappa1 < 1`.
pub fn gap_bound(gamma: f64, params: &OracleParams) -> Result<GapBound> {
    check_positive("Gamma", gamma)?;
    if !(gamma * params.kappa1 < 1.0) {
        return Err(Error::param(
            "Gamma",
            format!("needs Gamma * kappa1 < 1, got {}", gamma * params.kappa1),
        ));
    }
    let env = envelope(gamma, params)?;
    let l1 = -(gamma * params.kappa1).ln();
    Ok(GapBound {
        gap: env.upper - env.lower,
        condition: params.sigma * params.log_kappa_ratio() <= params.delta * (2.0 * l1).sqrt(),
    })
}

/// `Gamma(H)`: the mean over `curve` of the 1-D Gaussian density at the
/// point's distance to `H`. `curve` should be uniform for the manifold's
/// measure (for example an arc-length grid).
pub fn gamma_quadrature(h: &Hyperplane, curve: &PointCloud, sigma: f64) -> Result<f64> {
    if curve.is_empty() {
        return Err(Error::EmptyCloud);
    }
    check_dim(h.dim(), curve.ambient_dim())?;
    check_positive("sigma", sigma)?;
    let s: f64 = curve
        .iter()
        .map(|x| {
            let r = dot(x, h.normal()) - h.offset();
            (-(r * r) / (2.0 * sigma * sigma)).exp()
        })
        .sum();
    Ok(s / (curve.len() as f64 * SQRT_2PI * sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{
        add_gaussian_noise, circle_grid, ellipse_grid, sample_circle, sample_ellipse,
    };
    use crate::hull::support_function;
    use proptest::prelude::*;

    #[test]
    fn derived_constants() {
        let p = OracleParams::derive(0.2, 0.1, 1, 0.1).unwrap();
        assert!((p.kappa0 - 0.501_325_654_926_1).abs() < 1e-12);
        assert!((p.kappa1 / p.kappa0 - 50.0).abs() < 1e-10);
        assert!((p.r_delta - 0.4 * 50f64.ln()).abs() < 1e-14);
        assert!(p.gamma_delta * p.kappa1 <= 1.0);
        let direct = (1.0 / (p.c_m * p.delta * 2.0)).ln();
        assert!((p.log_kappa_ratio() - direct).abs() < 1e-12);
        assert!(matches!(
            OracleParams::derive(0.2, 5.0, 1, 0.3),
            Err(Error::DeltaTooLarge { .. })
        ));
        assert!(OracleParams::derive(0.2, 0.1, 1, 0.5).is_err());
    }

    #[test]
    fn gamma_delta_underflow_is_handled_in_logs() {
        let p = OracleParams::derive(0.2, 0.01, 1, 0.2).unwrap();
        assert!(p.log_gamma_delta.is_finite());
        assert!(p.log_gamma_delta < -700.0);
        assert_eq!(p.gamma_delta, 0.0);
    }

    #[test]
    fn scan_bins_are_nonnegative_and_consistent() {
        let clean = sample_circle(1.0, 5000, 1);
        let y = add_gaussian_noise(&clean, 0.2, 2).unwrap();
        let s = SortedProjections::new(&y, &[0.6, 0.8]).unwrap();
        for j in -30..30 {
            let f0 = s.tail_fraction(j as f64 * 0.1);
            let f1 = s.tail_fraction((j + 1) as f64 * 0.1);
            assert!(f0 >= f1);
            assert_eq!(
                s.bin_count(j, 0.1),
                s.count_above(j as f64 * 0.1) - s.count_above((j + 1) as f64 * 0.1)
            );
            assert!((s.bin_count(j, 0.1) as f64 / s.len() as f64 - (f0 - f1)).abs() < 1e-15);
        }
    }

    #[test]
    fn circle_support_estimate() {
        let p = OracleParams::derive(0.2, 0.2, 1, 0.15).unwrap();
        let n = plan_samples(
            &p,
            0.1,
            &PlanConfig {
                a: 5000.0,
                ..Default::default()
            },
        )
        .unwrap() as usize;
        let clean = sample_circle(1.0, n, 3);
        let y = add_gaussian_noise(&clean, 0.2, 4).unwrap();
        for k in 0..8 {
            let th = k as f64 * 0.7;
            let b = [th.cos(), th.sin()];
            let s = estimate_support(&b, &y, &p).unwrap();
            assert!((s - 1.0).abs() <= 3.0 * p.delta, "support {s} along {b:?}");
        }
    }

    #[test]
    fn circle_distance_and_envelope() {
        let p = OracleParams::derive(0.2, 0.2, 1, 0.15).unwrap();
        let clean = sample_circle(1.0, 20_000, 5);
        let y = add_gaussian_noise(&clean, 0.2, 6).unwrap();
        let grid = circle_grid(1.0, 4096);
        for slack in [0.3, 0.5] {
            let t = 1.0 + p.r_delta + slack;
            let h = Hyperplane::new(vec![1.0, 0.0], t).unwrap();
            let out = dist_to_hull(&h, &y, &p).unwrap();
            let truth = t - 1.0;
            assert!(
                (out.distance - truth).abs() <= 3.0 * p.delta,
                "{out:?} vs {truth}"
            );
            let g = gamma_quadrature(&h, &grid, 0.2).unwrap();
            let env = envelope(g, &p).unwrap();
            assert!(
                env.lower <= truth && truth <= env.upper,
                "{env:?} vs {truth}"
            );
        }
    }

    #[test]
    fn small_noise_recovers_support() {
        let p = OracleParams::derive(1e-3, 1e-2, 1, 0.15).unwrap();
        let clean = sample_ellipse(20_000, 7);
        let y = add_gaussian_noise(&clean, 1e-3, 8).unwrap();
        let grid = ellipse_grid(4000);
        for (b, t) in [([0.0, 1.0], 0.9), ([1.0, 0.0], 1.5), ([0.6, -0.8], 1.2)] {
            let h = Hyperplane::new(b.to_vec(), t).unwrap();
            let out = dist_to_hull(&h, &y, &p).unwrap();
            let truth = t - support_function(&grid, &b).unwrap();
            assert!(
                (out.distance - truth).abs() <= 2.0 * p.delta,
                "{out:?} vs {truth}"
            );
        }
    }

    #[test]
    fn clamp_and_errors() {
        let p = OracleParams::derive(0.2, 0.2, 1, 0.15).unwrap();
        let y = add_gaussian_noise(&sample_circle(1.0, 20_000, 9), 0.2, 10).unwrap();
        let h = Hyperplane::new(vec![1.0, 0.0], 0.0).unwrap();
        let out = dist_to_hull(&h, &y, &p).unwrap();
        assert!(out.intersects_hull && out.distance == 0.0 && out.raw < 0.0);
        assert!(matches!(
            dist_to_hull(&h, &PointCloud::new(2), &p),
            Err(Error::NoOracleSamples)
        ));
        let few = PointCloud::from_rows(2, [[0.0, 0.0], [0.05, 0.0]]).unwrap();
        let strict = OracleParams::derive(0.2, 0.01, 1, 0.15).unwrap();
        // two samples cannot reach the density threshold at this width
        let strict = OracleParams {
            log_gamma_delta: 10.0,
            ..strict
        };
        assert!(matches!(
            dist_to_hull(&h, &few, &strict),
            Err(Error::OracleSaturated { .. })
        ));
    }

    #[test]
    fn plan_examples() {
        let cfg = PlanConfig::default();
        let e = std::f64::consts::E;
        assert_eq!(
            plan_samples_raw(1.0, 1.0, 1.0 / e, 1.0 / e, &cfg).unwrap(),
            3
        );
        let a = sample_demand(0.2, 0.1, 0.1, 0.1, &cfg).unwrap();
        let b = sample_demand(0.2, 0.1, 0.1, 0.05, &cfg).unwrap();
        assert!((b / a - 20f64.ln() / 10f64.ln()).abs() < 1e-12);
        let c = sample_demand(0.4, 0.1, 0.1, 0.1, &cfg).unwrap();
        let exponent = |v: f64| (v / 10f64.ln()).ln();
        assert!((exponent(c) / exponent(a) - 4.0).abs() < 1e-12);
        assert!(matches!(
            plan_samples_raw(0.2, 0.05, 0.2, 0.1, &cfg),
            Err(Error::InfeasibleSampleDemand { .. })
        ));
    }

    #[test]
    fn refined_demand_is_positive() {
        let p = OracleParams::derive(0.2, 0.1, 1, 0.1).unwrap();
        let v = refined_sample_demand(1e-3, 0.1, &p, 1.0).unwrap();
        assert!((v - 1e3 * 10f64.ln() * (1.0 / (1e-3 * p.kappa0)).ln()).abs() < 1e-9);
    }

    #[test]
    fn gap_examples() {
        // kappa1 = kappa0 exactly when c_M^-1 delta^-d omega_d^-1 = 1
        let p = OracleParams::derive(0.2, 2.0, 1, 0.25).unwrap();
        assert!((p.kappa1 - p.kappa0).abs() < 1e-15);
        let g = gap_bound(1e-4, &p).unwrap();
        assert!((g.gap - p.delta).abs() < 1e-12);
        let p = OracleParams::derive(0.2, 0.1, 1, 0.1).unwrap();
        let mut prev = f64::INFINITY;
        let top = 1.0 / (std::f64::consts::E * p.kappa1);
        for k in 0..200 {
            let gamma = 1e-8 * (top / 1e-8).powf(k as f64 / 199.0) * (1.0 - 1e-12);
            let g = gap_bound(gamma, &p).unwrap();
            if g.condition {
                assert!(g.gap <= 2.0 * p.delta + 1e-12);
            }
            if k > 0 {
                // gamma increases along the sweep, so the gap must too
                assert!(g.gap >= prev - 1e-12);
            }
            prev = g.gap;
        }
        assert!(gap_bound(1.0, &p).is_err());
    }

    #[test]
    fn query_log_lines() {
        let dir = std::env::temp_dir().join(format!("mdenoise-oracle-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let h = Hyperplane::new(vec![1.0, 0.0], 2.0).unwrap();
        let out = OracleOutput {
            raw: 0.5,
            distance: 0.5,
            intersects_hull: false,
            j_final: 7,
            gamma_est: 0.3,
        };
        write_query_log(&dir.join("q.jsonl"), &vec![QueryRecord::new(&h, &out); 2]).unwrap();
        let text = std::fs::read_to_string(dir.join("q.jsonl")).unwrap();
        assert_eq!(text.lines().count(), 2);
        let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(v["j_final"], 7);
        assert_eq!(v["Gamma_est"], 0.3);
    }

    proptest! {
        #[test]
        fn scan_is_deterministic(seed in 0u64..200, th in 0.0f64..6.3) {
            let p = OracleParams::derive(0.2, 0.2, 1, 0.15).unwrap();
            let y = add_gaussian_noise(&sample_circle(1.0, 2000, seed), 0.2, seed + 1).unwrap();
            let b = [th.cos(), th.sin()];
            let a = estimate_support(&b, &y, &p);
            let c = estimate_support(&b, &y, &p);
            prop_assert_eq!(a.ok(), c.ok());
        }
    }
}
