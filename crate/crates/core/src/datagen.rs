//! Seeded generators: latent curves, Gaussian corruption and the
//! three-block sample partition.
//!
//! Every random stream is a `ChaCha8Rng` seeded from a child seed, derived
//! as the first 8 bytes (little endian) of `SHA-256(parent_le || tag)`.
//! Datasets use the tags `"clean"` and `"noise"`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

pub fn child_seed(parent: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(parent.to_le_bytes());
    h.update(tag.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

pub fn rng_for(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(seed, tag))
}

const ARC_KNOTS: usize = 4096;

/// Cumulative arc length of `t -> (cos t, sin t / 2)` at `ARC_KNOTS + 1`
/// equally spaced parameters on `[0, 2 pi]`.
fn ellipse_arc_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let speed = |t: f64| (t.sin().powi(2) + 0.25 * t.cos().powi(2)).sqrt();
        let h = 2.0 * PI / ARC_KNOTS as f64;
        let mut table = Vec::with_capacity(ARC_KNOTS + 1);
        let mut s = 0.0;
        table.push(0.0);
        for k in 0..ARC_KNOTS {
            let a = k as f64 * h;
            // Simpson on each knot interval
            s += h / 6.0 * (speed(a) + 4.0 * speed(a + h / 2.0) + speed(a + h));
            table.push(s);
        }
        table
    })
}

/// Perimeter of the ellipse `x^2 + 4y^2 = 1`.
pub fn ellipse_perimeter() -> f64 {
    *ellipse_arc_table().last().unwrap()
}

/// Point on `x^2 + 4y^2 = 1` at arc length `s` from `(1, 0)`, counterclockwise.
pub fn ellipse_at_arc(s: f64) -> [f64; 2] {
    let table = ellipse_arc_table();
    let total = *table.last().unwrap();
    let s = s.rem_euclid(total);
    let k = table.partition_point(|&v| v <= s).clamp(1, ARC_KNOTS) - 1;
    let frac = (s - table[k]) / (table[k + 1] - table[k]);
    let t = (k as f64 + frac) * 2.0 * PI / ARC_KNOTS as f64;
    ellipse_point(t)
}

fn ellipse_point(t: f64) -> [f64; 2] {
    let (s, c) = t.sin_cos();
    // c^2 + s^2 = 1 holds to rounding, so x^2 + 4y^2 = 1 does too
    [c, 0.5 * s]
}

/// Samples uniform in arc length on the ellipse `x^2 + 4y^2 = 1`.
pub fn sample_ellipse(count: usize, seed: u64) -> PointCloud {
    let total = ellipse_perimeter();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cloud = PointCloud::with_capacity(2, count);
    for _ in 0..count {
        let s = rng.random::<f64>() * total;
        cloud.push(&ellipse_at_arc(s)).unwrap();
    }
    cloud
}

/// `count` points equally spaced in arc length, starting at `(1, 0)`.
pub fn ellipse_grid(count: usize) -> PointCloud {
    let total = ellipse_perimeter();
    let mut cloud = PointCloud::with_capacity(2, count);
    for i in 0..count {
        cloud
            .push(&ellipse_at_arc(total * i as f64 / count as f64))
            .unwrap();
    }
    cloud
}

/// `(cos t, sin t) * radius` on a uniform parameter grid.
pub fn circle_grid(radius: f64, count: usize) -> PointCloud {
    let mut cloud = PointCloud::with_capacity(2, count);
    for i in 0..count {
        let (s, c) = (2.0 * PI * i as f64 / count as f64).sin_cos();
        cloud.push(&[radius * c, radius * s]).unwrap();
    }
    cloud
}

pub fn sample_circle(radius: f64, count: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cloud = PointCloud::with_capacity(2, count);
    for _ in 0..count {
        let (s, c) = (2.0 * PI * rng.random::<f64>()).sin_cos();
        cloud.push(&[radius * c, radius * s]).unwrap();
    }
    cloud
}

/// Hypocycloid traced by a circle of radius `b = a / n_cusps` rolling inside
/// one of radius `a`.
pub fn hypocycloid_point(a: f64, n_cusps: u32, t: f64) -> [f64; 2] {
    let b = a / n_cusps as f64;
    let k = (a - b) / b;
    [
        (a - b) * t.cos() + b * (k * t).cos(),
        (a - b) * t.sin() - b * (k * t).sin(),
    ]
}

/// The cusps, at parameters `2 pi j / n_cusps`.
pub fn hypocycloid_cusps(a: f64, n_cusps: u32) -> PointCloud {
    let mut cloud = PointCloud::with_capacity(2, n_cusps as usize);
    for j in 0..n_cusps {
        let (s, c) = (2.0 * PI * j as f64 / n_cusps as f64).sin_cos();
        cloud.push(&[a * c, a * s]).unwrap();
    }
    cloud
}

fn check_hypocycloid(a: f64, n_cusps: u32) -> Result<()> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::param("a", format!("must be positive, got {a}")));
    }
    if n_cusps < 3 {
        return Err(Error::param(
            "n_cusps",
            format!("must be at least 3, got {n_cusps}"),
        ));
    }
    Ok(())
}

/// Samples with parameter `t` uniform on `[0, 2 pi)`.
pub fn sample_hypocycloid(a: f64, n_cusps: u32, count: usize, seed: u64) -> Result<PointCloud> {
    check_hypocycloid(a, n_cusps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cloud = PointCloud::with_capacity(2, count);
    for _ in 0..count {
        let t = 2.0 * PI * rng.random::<f64>();
        cloud.push(&hypocycloid_point(a, n_cusps, t))?;
    }
    Ok(cloud)
}

/// Uniform parameter grid `t_i = 2 pi i / count`; contains every cusp when
/// `count` is a multiple of `n_cusps`.
pub fn hypocycloid_grid(a: f64, n_cusps: u32, count: usize) -> Result<PointCloud> {
    check_hypocycloid(a, n_cusps)?;
    let mut cloud = PointCloud::with_capacity(2, count);
    for i in 0..count {
        let t = 2.0 * PI * i as f64 / count as f64;
        cloud.push(&hypocycloid_point(a, n_cusps, t))?;
    }
    Ok(cloud)
}

/// `P + Z` with `Z ~ N(0, sigma^2 I)` drawn point by point, coordinate by
/// coordinate.
pub fn add_gaussian_noise(cloud: &PointCloud, sigma: f64, seed: u64) -> Result<PointCloud> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::param(
            "sigma",
            format!("must be finite and >= 0, got {sigma}"),
        ));
    }
    if sigma == 0.0 {
        return Ok(cloud.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = cloud
        .as_flat()
        .iter()
        .map(|x| {
            let z: f64 = StandardNormal.sample(&mut rng);
            x + sigma * z
        })
        .collect();
    PointCloud::from_flat(cloud.ambient_dim(), coords)
}

/// Zero-pads every point to `ambient_dim` coordinates.
pub fn embed(cloud: &PointCloud, ambient_dim: usize) -> Result<PointCloud> {
    let d = cloud.ambient_dim();
    if ambient_dim < d {
        return Err(Error::param(
            "ambient_dim",
            format!("cannot embed dimension {d} into {ambient_dim}"),
        ));
    }
    let mut out = PointCloud::with_capacity(ambient_dim, cloud.len());
    let mut row = vec![0.0; ambient_dim];
    for p in cloud.iter() {
        row[..d].copy_from_slice(p);
        out.push(&row)?;
    }
    Ok(out)
}

/// Latent manifolds the generator knows how to draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldSpec {
    /// `x^2 + 4y^2 = 1` in the first two coordinates of `R^ambient_dim`.
    Ellipse {
        #[serde(default = "two")]
        ambient_dim: usize,
    },
    Circle {
        radius: f64,
        #[serde(default = "two")]
        ambient_dim: usize,
    },
    Hypocycloid {
        a: f64,
        n_cusps: u32,
        #[serde(default = "two")]
        ambient_dim: usize,
    },
}

fn two() -> usize {
    2
}

impl ManifoldSpec {
    pub fn ellipse() -> Self {
        ManifoldSpec::Ellipse { ambient_dim: 2 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ManifoldSpec::Ellipse { .. } => "ellipse",
            ManifoldSpec::Circle { .. } => "circle",
            ManifoldSpec::Hypocycloid { .. } => "hypocycloid",
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match *self {
            ManifoldSpec::Ellipse { ambient_dim }
            | ManifoldSpec::Circle { ambient_dim, .. }
            | ManifoldSpec::Hypocycloid { ambient_dim, .. } => ambient_dim,
        }
    }

    pub fn params(&self) -> Value {
        match *self {
            ManifoldSpec::Ellipse { ambient_dim } => json!({ "ambient_dim": ambient_dim }),
            ManifoldSpec::Circle {
                radius,
                ambient_dim,
            } => {
                json!({ "radius": radius, "ambient_dim": ambient_dim })
            }
            ManifoldSpec::Hypocycloid {
                a,
                n_cusps,
                ambient_dim,
            } => json!({ "a": a, "n_cusps": n_cusps, "ambient_dim": ambient_dim }),
        }
    }

    /// Random draw from the manifold's uniform measure.
    pub fn sample(&self, count: usize, seed: u64) -> Result<PointCloud> {
        let planar = match *self {
            ManifoldSpec::Ellipse { .. } => sample_ellipse(count, seed),
            ManifoldSpec::Circle { radius, .. } => {
                if !(radius.is_finite() && radius > 0.0) {
                    return Err(Error::param(
                        "radius",
                        format!("must be positive, got {radius}"),
                    ));
                }
                sample_circle(radius, count, seed)
            }
            ManifoldSpec::Hypocycloid { a, n_cusps, .. } => {
                sample_hypocycloid(a, n_cusps, count, seed)?
            }
        };
        embed(&planar, self.ambient_dim())
    }

    /// Deterministic dense grid on the manifold, used as a hull vertex set.
    pub fn grid(&self, count: usize) -> Result<PointCloud> {
        let planar = match *self {
            ManifoldSpec::Ellipse { .. } => ellipse_grid(count),
            ManifoldSpec::Circle { radius, .. } => circle_grid(radius, count),
            ManifoldSpec::Hypocycloid { a, n_cusps, .. } => {
                let count = count.div_ceil(n_cusps as usize) * n_cusps as usize;
                hypocycloid_grid(a, n_cusps, count)?
            }
        };
        embed(&planar, self.ambient_dim())
    }
}

/// Block boundaries `0 < n0 < n1 < n`: PCA block `[0, n0)`, oracle block
/// `[n0, n1)`, targets `[n1, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub n0: usize,
    pub n1: usize,
    pub n: usize,
}

impl Partition {
    pub fn new(n0: usize, n1: usize, n: usize) -> Result<Self> {
        if !(0 < n0 && n0 < n1 && n1 < n) {
            return Err(Error::InvalidPartition { n0, n1, n });
        }
        Ok(Self { n0, n1, n })
    }

    pub fn pca(&self) -> std::ops::Range<usize> {
        0..self.n0
    }

    pub fn oracle(&self) -> std::ops::Range<usize> {
        self.n0..self.n1
    }

    pub fn targets(&self) -> std::ops::Range<usize> {
        self.n1..self.n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub root: u64,
    pub clean: u64,
    pub noise: u64,
}

impl Seeds {
    pub fn derive(root: u64) -> Self {
        Self {
            root,
            clean: child_seed(root, "clean"),
            noise: child_seed(root, "noise"),
        }
    }
}

/// Clean samples `X_i`, their noisy observations `Y_i = X_i + Z_i`, and the
/// block partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifold: String,
    pub params: Value,
    pub clean: PointCloud,
    pub noisy: PointCloud,
    pub sigma: f64,
    pub partition: Partition,
    pub seeds: Seeds,
}

impl Dataset {
    /// Corrupts an existing clean cloud; the clean draw is the caller's.
    pub fn from_clean(
        manifold: impl Into<String>,
        params: Value,
        clean: PointCloud,
        partition: Partition,
        sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        if clean.len() != partition.n {
            return Err(Error::param(
                "partition",
                format!(
                    "N = {} but the cloud has {} points",
                    partition.n,
                    clean.len()
                ),
            ));
        }
        let seeds = Seeds::derive(seed);
        let noisy = add_gaussian_noise(&clean, sigma, seeds.noise)?;
        Ok(Self {
            manifold: manifold.into(),
            params,
            clean,
            noisy,
            sigma,
            partition,
            seeds,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.clean.ambient_dim()
    }

    /// Consistency checks used after loading from disk.
    pub fn validate(&self) -> Result<()> {
        Partition::new(self.partition.n0, self.partition.n1, self.partition.n)?;
        if self.clean.len() != self.partition.n || self.noisy.len() != self.partition.n {
            return Err(Error::param(
                "partition",
                format!(
                    "N = {} but clean has {} and noisy {} points",
                    self.partition.n,
                    self.clean.len(),
                    self.noisy.len()
                ),
            ));
        }
        crate::error::check_dim(self.clean.ambient_dim(), self.noisy.ambient_dim())
    }
}

pub fn make_dataset(
    spec: &ManifoldSpec,
    n0: usize,
    n1: usize,
    n: usize,
    sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    let partition = Partition::new(n0, n1, n)?;
    let seeds = Seeds::derive(seed);
    let clean = spec.sample(n, seeds.clean)?;
    Dataset::from_clean(spec.name(), spec.params(), clean, partition, sigma, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{dist, norm};

    #[test]
    fn ellipse_points_lie_on_curve() {
        let c = sample_ellipse(5000, 1);
        for p in c.iter() {
            assert!((p[0] * p[0] + 4.0 * p[1] * p[1] - 1.0).abs() <= 1e-12);
        }
        for p in ellipse_grid(4).iter() {
            assert!((p[0] * p[0] + 4.0 * p[1] * p[1] - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn ellipse_grid_quadrant_symmetry() {
        let g = ellipse_grid(4);
        let expect = [[1.0, 0.0], [0.0, 0.5], [-1.0, 0.0], [0.0, -0.5]];
        for (p, e) in g.iter().zip(expect) {
            assert!(dist(p, &e) < 1e-9, "{p:?} vs {e:?}");
        }
    }

    #[test]
    fn ellipse_perimeter_matches_series() {
        // Ramanujan's second approximation is accurate to ~1e-10 here
        let (a, b) = (1.0f64, 0.5f64);
        let h = ((a - b) / (a + b)).powi(2);
        let p = PI * (a + b) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()));
        assert!((ellipse_perimeter() - p).abs() < 1e-8);
    }

    #[test]
    fn ellipse_mean_near_origin() {
        let m = sample_ellipse(100_000, 77).mean().unwrap();
        assert!(norm(&m) < 0.02);
    }

    #[test]
    fn ellipse_lower_mass_condition() {
        // every curve point carries >= c * eps of the mass within eps
        let eps = 0.05;
        let c = 0.2;
        let cloud = sample_ellipse(100_000, 2024);
        let probes = ellipse_grid(200);
        let worst = probes
            .iter()
            .map(|x| cloud.iter().filter(|p| dist(p, x) < eps).count() as f64 / cloud.len() as f64)
            .fold(1.0, f64::min);
        assert!(worst >= c * eps, "worst ball mass {worst}");
    }

    #[test]
    fn hypocycloid_cusps_and_disk() {
        let p = hypocycloid_point(1.0, 5, 0.0);
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1].abs() < 1e-15);
        let t = 2.0 * PI / 5.0;
        let q = hypocycloid_point(1.0, 5, t);
        assert!((norm(&q) - 1.0).abs() < 1e-12);
        assert!((q[1].atan2(q[0]) - t).abs() < 1e-12);
        let cusps = hypocycloid_cusps(1.0, 5);
        assert!(dist(cusps.point(1), &q) < 1e-12);
        for p in sample_hypocycloid(1.0, 5, 2000, 4).unwrap().iter() {
            assert!(norm(p) <= 1.0 + 1e-12);
        }
        assert!(sample_hypocycloid(1.0, 2, 5, 0).is_err());
        let g = ManifoldSpec::Hypocycloid {
            a: 1.0,
            n_cusps: 5,
            ambient_dim: 2,
        }
        .grid(998)
        .unwrap();
        assert_eq!(g.len(), 1000);
        assert!(dist(g.point(200), cusps.point(1)) < 1e-12);
    }

    #[test]
    fn noise_statistics() {
        let origin = PointCloud::from_flat(1, vec![0.0; 100_000]).unwrap();
        let sigma = 0.7;
        let y = add_gaussian_noise(&origin, sigma, 8).unwrap();
        let n = y.len() as f64;
        let mean = y.as_flat().iter().sum::<f64>() / n;
        let var = y.as_flat().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.03);
        assert!(mean.abs() < 4.0 * sigma / n.sqrt());
        assert_eq!(add_gaussian_noise(&y, 0.0, 1).unwrap(), y);
        assert!(add_gaussian_noise(&y, -1.0, 1).is_err());
    }

    #[test]
    fn dataset_blocks_and_determinism() {
        let spec = ManifoldSpec::ellipse();
        let d = make_dataset(&spec, 10, 20, 30, 0.2, 5).unwrap();
        assert_eq!(d.partition.pca().len(), 10);
        assert_eq!(d.partition.oracle().len(), 10);
        assert_eq!(d.partition.targets().len(), 10);
        assert_eq!(d, make_dataset(&spec, 10, 20, 30, 0.2, 5).unwrap());
        assert_ne!(d.seeds.clean, d.seeds.noise);
        assert!(matches!(
            make_dataset(&spec, 10, 10, 30, 0.2, 5),
            Err(Error::InvalidPartition { .. })
        ));
        d.validate().unwrap();
    }

    #[test]
    fn embedded_ellipse() {
        let spec = ManifoldSpec::Ellipse { ambient_dim: 10 };
        let c = spec.sample(50, 3).unwrap();
        assert_eq!(c.ambient_dim(), 10);
        assert!(c.iter().all(|p| p[2..].iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn child_seeds_differ_by_tag() {
        assert_ne!(child_seed(1, "clean"), child_seed(1, "noise"));
        assert_eq!(child_seed(1, "clean"), child_seed(1, "clean"));
        assert_ne!(child_seed(1, "clean"), child_seed(2, "clean"));
    }
}
