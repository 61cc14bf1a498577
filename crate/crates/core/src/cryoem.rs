//! Synthetic Cryo-EM forward model: a bump density on `R^k`, the rotation
//! action, X-ray projection along the last axis and pixel sampling, plus
//! numerical probes of their norms and of the composed Lipschitz constant.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::datagen::{child_seed, rng_for, Dataset, Partition, Seeds};
use crate::error::{check_positive, Error, Result};
use crate::geometry::{dist, norm, PointCloud};
use crate::par;
use crate::pca::unit_ball_volume;

pub const SUPPORT_RADIUS: f64 = 0.5;
pub const CHORD_NODES: usize = 64;
pub const PIXEL_NODES: usize = 8;
pub const DEFAULT_N_PIX: usize = 16;

/// Empirical `Lip(S F T) / |f|_{W^{1,2}}` for the default density (k = 3,
/// 16 pixels, 200 pairs), calibrated once with seed 0 and frozen.
pub const LIPSCHITZ_C: f64 = 0.04179;

/// `A (1 - |q - c|^2 / r^2)^2` inside the ball `B(c, r)`, zero outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    fn s2(&self, q: &[f64]) -> f64 {
        let d2: f64 = q
            .iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum();
        d2 / (self.radius * self.radius)
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        let s2 = self.s2(q);
        if s2 >= 1.0 {
            return 0.0;
        }
        let u = 1.0 - s2;
        self.amplitude * u * u
    }

    fn add_gradient(&self, q: &[f64], out: &mut [f64]) {
        let s2 = self.s2(q);
        if s2 >= 1.0 {
            return;
        }
        let coef = -4.0 * self.amplitude * (1.0 - s2) / (self.radius * self.radius);
        for ((o, a), c) in out.iter_mut().zip(q).zip(&self.center) {
            *o += coef * (a - c);
        }
    }

    /// Closed-form integral along the line `{(x, z) : z in R}`.
    pub fn chord_integral(&self, x: &[f64]) -> f64 {
        let k = self.center.len();
        let rho2: f64 = x
            .iter()
            .zip(&self.center[..k - 1])
            .map(|(a, c)| (a - c) * (a - c))
            .sum();
        let a2 = 1.0 - rho2 / (self.radius * self.radius);
        if a2 <= 0.0 {
            return 0.0;
        }
        self.amplitude * self.radius * 16.0 / 15.0 * a2 * a2 * a2.sqrt()
    }
}

/// A finite sum of bumps, all inside `B(0, 1/2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Density {
    k: usize,
    bumps: Vec<Bump>,
    pub l2_norm_est: f64,
    pub sobolev_seminorm_est: f64,
}

/// Midpoint nodes per axis for the norm quadrature on `[-1/2, 1/2]^k`.
fn norm_grid(k: usize) -> usize {
    match k {
        2 => 256,
        3 => 64,
        _ => 16,
    }
}

impl Density {
    pub fn new(k: usize, bumps: Vec<Bump>) -> Result<Self> {
        if !(2..=4).contains(&k) {
            return Err(Error::param("k", format!("must lie in [2, 4], got {k}")));
        }
        for b in &bumps {
            crate::error::check_dim(k, b.center.len())?;
            check_positive("radius", b.radius)?;
            if !b.amplitude.is_finite() || b.center.iter().any(|c| !c.is_finite()) {
                return Err(Error::param("bump", "non-finite center or amplitude"));
            }
            if norm(&b.center) + b.radius > SUPPORT_RADIUS + 1e-12 {
                return Err(Error::param(
                    "bump",
                    format!(
                        "|c| + r = {} leaves the ball of radius 1/2",
                        norm(&b.center) + b.radius
                    ),
                ));
            }
        }
        let (l2, sob) = norm_estimates(k, &bumps, norm_grid(k));
        Ok(Self {
            k,
            bumps,
            l2_norm_est: l2,
            sobolev_seminorm_est: sob,
        })
    }

    /// Three bumps of distinct radii, scaled so both norms are at most 1.
    pub fn default_for(k: usize) -> Result<Self> {
        let raw: [([f64; 4], f64, f64); 3] = [
            ([0.2, 0.05, 0.0, 0.0], 0.25, 1.0),
            ([-0.1, 0.2, 0.1, 0.0], 0.2, 0.7),
            ([0.0, -0.15, -0.2, 0.0], 0.15, 0.5),
        ];
        let bumps = raw
            .iter()
            .map(|(c, r, a)| Bump {
                center: c[..k.min(4)].to_vec(),
                radius: *r,
                amplitude: *a,
            })
            .collect();
        Ok(Self::new(k, bumps)?.normalized())
    }

    /// A single centered bump; every rotation fixes it.
    pub fn radial(k: usize) -> Result<Self> {
        let bump = Bump {
            center: vec![0.0; k],
            radius: 0.4,
            amplitude: 1.0,
        };
        Ok(Self::new(k, vec![bump])?.normalized())
    }

    /// Rescales so that `max(|f|_2, |grad f|_2) = 1`.
    pub fn normalized(&self) -> Self {
        let m = self.l2_norm_est.max(self.sobolev_seminorm_est);
        if m > 0.0 {
            self.scaled(1.0 / m)
        } else {
            self.clone()
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.bumps {
            b.amplitude *= s;
        }
        out.l2_norm_est *= s.abs();
        out.sobolev_seminorm_est *= s.abs();
        out
    }

    /// `alpha f + beta g`, with fresh norm estimates.
    pub fn combine(f: &Density, alpha: f64, g: &Density, beta: f64) -> Result<Self> {
        crate::error::check_dim(f.k, g.k)?;
        let bumps = f
            .scaled(alpha)
            .bumps
            .into_iter()
            .chain(g.scaled(beta).bumps)
            .collect();
        Self::new(f.k, bumps)
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        if norm(q) > SUPPORT_RADIUS + 1e-12 {
            return 0.0;
        }
        self.bumps.iter().map(|b| b.value(q)).sum()
    }

    pub fn gradient(&self, q: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.k];
        for b in &self.bumps {
            b.add_gradient(q, &mut g);
        }
        g
    }

    /// `q -> f(R^{-1} q)`; the norms are rotation invariant and carried over.
    pub fn rotated(&self, r: &Rotation) -> Self {
        let mut out = self.clone();
        for b in &mut out.bumps {
            b.center = r.apply(&b.center);
        }
        out
    }

    pub fn chord_integral(&self, x: &[f64]) -> f64 {
        self.bumps.iter().map(|b| b.chord_integral(x)).sum()
    }
}

/// `(|f|_{L^2}, |grad f|_{L^2})` by the midpoint rule with `n^k` cells.
pub fn norm_estimates(k: usize, bumps: &[Bump], n: usize) -> (f64, f64) {
    let h = 1.0 / n as f64;
    let inner = n.pow(k as u32 - 1);
    let slabs = par::map_range(n, |i0| {
        let mut q = vec![0.0; k];
        let mut g = vec![0.0; k];
        let (mut f2, mut g2) = (0.0, 0.0);
        q[0] = -0.5 + (i0 as f64 + 0.5) * h;
        for rest in 0..inner {
            let mut r = rest;
            for a in (1..k).rev() {
                q[a] = -0.5 + ((r % n) as f64 + 0.5) * h;
                r /= n;
            }
            g.iter_mut().for_each(|v| *v = 0.0);
            let mut v = 0.0;
            for b in bumps {
                v += b.value(&q);
                b.add_gradient(&q, &mut g);
            }
            f2 += v * v;
            g2 += g.iter().map(|x| x * x).sum::<f64>();
        }
        (f2, g2)
    });
    let cell = h.powi(k as i32);
    let (f2, g2) = slabs
        .iter()
        .fold((0.0, 0.0), |acc, s| (acc.0 + s.0, acc.1 + s.1));
    ((f2 * cell).sqrt(), (g2 * cell).sqrt())
}

/// Element of `SO(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    matrix: DMatrix<f64>,
}

impl Rotation {
    pub fn identity(k: usize) -> Self {
        Self {
            matrix: DMatrix::identity(k, k),
        }
    }

    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() < 2 {
            return Err(Error::param(
                "rotation",
                "must be square of size at least 2",
            ));
        }
        let k = matrix.nrows();
        let gram = matrix.transpose() * &matrix - DMatrix::<f64>::identity(k, k);
        if gram.amax() > 1e-10 {
            return Err(Error::param(
                "rotation",
                format!("not orthogonal (|R^T R - I| = {:e})", gram.amax()),
            ));
        }
        let det = matrix.determinant();
        if (det - 1.0).abs() > 1e-10 {
            return Err(Error::param(
                "rotation",
                format!("determinant {det} is not 1"),
            ));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let k = self.dim();
        (0..k)
            .map(|i| (0..k).map(|j| self.matrix[(i, j)] * v[j]).sum())
            .collect()
    }

    /// `self * other`.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation {
            matrix: &self.matrix * &other.matrix,
        }
    }

    pub fn inverse(&self) -> Rotation {
        Rotation {
            matrix: self.matrix.transpose(),
        }
    }

    /// `self * exp(t X)` for skew-symmetric `X`.
    pub fn exp_step(&self, x: &DMatrix<f64>, t: f64) -> Rotation {
        Rotation {
            matrix: &self.matrix * (x * t).exp(),
        }
    }

    /// Rotation angle in `[0, 2 pi)`; meaningful for `k = 2`.
    pub fn angle(&self) -> f64 {
        self.matrix[(1, 0)]
            .atan2(self.matrix[(0, 0)])
            .rem_euclid(std::f64::consts::TAU)
    }
}

/// Hilbert-Schmidt (Frobenius) distance.
pub fn d_hs(a: &Rotation, b: &Rotation) -> f64 {
    (&a.matrix - &b.matrix).norm()
}

/// Largest `d_HS` between two elements of `SO(k)`.
pub fn so_k_diameter(k: usize) -> f64 {
    2.0 * (2.0 * (k / 2) as f64).sqrt()
}

fn haar_from_rng(k: usize, rng: &mut ChaCha8Rng) -> Rotation {
    let g = DMatrix::<f64>::from_fn(k, k, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    Rotation { matrix: q }
}

/// Haar-distributed rotation from the QR factor of a Gaussian matrix.
pub fn haar_rotation(k: usize, seed: u64) -> Result<Rotation> {
    if k < 2 {
        return Err(Error::param("k", format!("must be at least 2, got {k}")));
    }
    Ok(haar_from_rng(k, &mut rng_for(seed, "haar")))
}

/// Gaussian skew-symmetric matrix scaled to unit Hilbert-Schmidt norm.
pub fn random_skew(k: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(k, k, |_, _| rng.sample(StandardNormal));
    let x = &g - g.transpose();
    let n = x.norm();
    x / n
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn legendre(n: usize) -> Result<Self> {
        let degree =
            NonZeroUsize::new(n).ok_or_else(|| Error::param("nodes", "must be positive"))?;
        let (nodes, weights) = GaussLegendre::new(degree)
            .as_node_weight_pairs()
            .iter()
            .copied()
            .unzip();
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `int g(x, z) dz` over the chord of the unit ball above `x`.
pub fn chord_quadrature(x: &[f64], g: &dyn Fn(&[f64]) -> f64, rule: &GaussRule) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if r2 >= 1.0 {
        return 0.0;
    }
    let half = (1.0 - r2).sqrt();
    let mut q = x.to_vec();
    q.push(0.0);
    let last = q.len() - 1;
    let mut acc = 0.0;
    for (z, w) in rule.nodes.iter().zip(&rule.weights) {
        q[last] = half * z;
        acc += w * g(&q);
    }
    acc * half
}

/// X-ray transform of an arbitrary integrand on the unit ball, one
/// `CHORD_NODES`-point rule per grid point.
pub fn xray_transform_fn<G>(g: G, grid: &PointCloud) -> Result<Vec<f64>>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let rule = GaussRule::legendre(CHORD_NODES)?;
    Ok(par::map_chunks(grid.as_flat(), grid.ambient_dim(), |x| {
        chord_quadrature(x, &g, &rule)
    }))
}

pub fn xray_transform(f: &Density, grid: &PointCloud) -> Result<Vec<f64>> {
    crate::error::check_dim(f.k - 1, grid.ambient_dim())?;
    xray_transform_fn(|q| f.value(q), grid)
}

/// Midpoint cells of `[-1, 1]^{k-1}` whose centers lie in the open unit disk,
/// with the common cell volume.
pub fn disk_grid(k: usize, n: usize) -> Result<(PointCloud, f64)> {
    if k < 2 || n == 0 {
        return Err(Error::param(
            "disk_grid",
            format!("need k >= 2 and n >= 1, got k={k}, n={n}"),
        ));
    }
    let m = k - 1;
    let h = 2.0 / n as f64;
    let mut cloud = PointCloud::new(m);
    let mut x = vec![0.0; m];
    for idx in 0..n.pow(m as u32) {
        let mut r = idx;
        for a in (0..m).rev() {
            x[a] = -1.0 + ((r % n) as f64 + 0.5) * h;
            r /= n;
        }
        if norm(&x) < 1.0 {
            cloud.push(&x)?;
        }
    }
    Ok((cloud, h.powi(m as i32)))
}

/// Quadrature discretization of the X-ray transform. Unknowns are
/// `sqrt(cell w_q L_i) g(x_i, L_i z_q)` and outputs `sqrt(cell) h(x_i)`, so
/// Euclidean norms approximate the continuous `L^2` norms and the matrix has
/// entries `sqrt(w_q L_i)`.
#[derive(Debug, Clone)]
pub struct XrayOperator {
    half_chords: Vec<f64>,
    weights: Vec<f64>,
}

impl XrayOperator {
    pub fn on_disk(k: usize, n_grid: usize) -> Result<Self> {
        let (grid, _) = disk_grid(k, n_grid)?;
        let rule = GaussRule::legendre(CHORD_NODES)?;
        Ok(Self {
            half_chords: grid
                .iter()
                .map(|x| (1.0 - x.iter().map(|v| v * v).sum::<f64>()).sqrt())
                .collect(),
            weights: rule.weights,
        })
    }

    pub fn rows(&self) -> usize {
        self.half_chords.len()
    }

    pub fn cols(&self) -> usize {
        self.half_chords.len() * self.weights.len()
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let q = self.weights.len();
        self.half_chords
            .iter()
            .enumerate()
            .map(|(i, l)| {
                self.weights
                    .iter()
                    .zip(&u[i * q..(i + 1) * q])
                    .map(|(w, v)| (w * l).sqrt() * v)
                    .sum()
            })
            .collect()
    }

    pub fn apply_transpose(&self, t: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.cols());
        for (l, ti) in self.half_chords.iter().zip(t) {
            out.extend(self.weights.iter().map(|w| (w * l).sqrt() * ti));
        }
        out
    }

    /// Exact operator norm of the block-diagonal matrix: `max_i sqrt(sum_q w_q L_i)`.
    pub fn exact_norm(&self) -> f64 {
        let wsum: f64 = self.weights.iter().sum();
        self.half_chords
            .iter()
            .map(|l| (wsum * l).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Power iteration on `A^T A` from a seeded Gaussian start; returns the
/// final `|A v| / |v|`.
pub fn power_iteration(
    cols: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    apply_t: impl Fn(&[f64]) -> Vec<f64>,
    iterations: usize,
    seed: u64,
) -> f64 {
    let mut rng = rng_for(seed, "power");
    let mut v: Vec<f64> = (0..cols).map(|_| rng.sample(StandardNormal)).collect();
    let mut est = 0.0;
    for _ in 0..iterations.max(1) {
        let n = norm(&v);
        if n == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= n);
        let av = apply(&v);
        est = norm(&av);
        v = apply_t(&av);
    }
    est
}

/// Row-major image on the pixel grid of `[-1/2, 1/2]^{k-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelImage {
    pub k_minus_1: usize,
    pub n_pix: usize,
    pub values: Vec<f64>,
}

impl PixelImage {
    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }
}

/// Tensor `PIXEL_NODES`-point rule inside every pixel. Nodes are stored
/// pixel by pixel; `weights` are the per-pixel node weights, which sum to the
/// pixel volume.
#[derive(Debug, Clone)]
pub struct PixelSampler {
    k_minus_1: usize,
    n_pix: usize,
    nodes: PointCloud,
    weights: Vec<f64>,
}

impl PixelSampler {
    pub fn new(k_minus_1: usize, n_pix: usize) -> Result<Self> {
        if k_minus_1 == 0 || n_pix == 0 {
            return Err(Error::param(
                "n_pix",
                format!("need k >= 2 and n_pix >= 1, got {n_pix}"),
            ));
        }
        let m = k_minus_1;
        let rule = GaussRule::legendre(PIXEL_NODES)?;
        let p = rule.len();
        let per_pixel = p.pow(m as u32);
        let half = 0.5 / n_pix as f64;
        let weights: Vec<f64> = (0..per_pixel)
            .map(|j| {
                let mut r = j;
                let mut w = 1.0;
                for _ in 0..m {
                    w *= rule.weights[r % p] * half;
                    r /= p;
                }
                w
            })
            .collect();
        let mut nodes = PointCloud::with_capacity(m, n_pix.pow(m as u32) * per_pixel);
        let mut x = vec![0.0; m];
        for pix in 0..n_pix.pow(m as u32) {
            for j in 0..per_pixel {
                let (mut r, mut s) = (pix, j);
                for a in (0..m).rev() {
                    let mid = -0.5 + ((r % n_pix) as f64 + 0.5) / n_pix as f64;
                    r /= n_pix;
                    x[a] = mid + half * rule.nodes[s % p];
                    s /= p;
                }
                nodes.push(&x)?;
            }
        }
        Ok(Self {
            k_minus_1,
            n_pix,
            nodes,
            weights,
        })
    }

    pub fn nodes(&self) -> &PointCloud {
        &self.nodes
    }

    pub fn pixels(&self) -> usize {
        self.n_pix.pow(self.k_minus_1 as u32)
    }

    fn gain(&self) -> f64 {
        (self.n_pix as f64).powf(self.k_minus_1 as f64 / 2.0)
    }

    /// `v_i = N^{(k-1)/2} sum_q W_q h(x_q)` from values at `nodes()`.
    pub fn sample(&self, h: &[f64]) -> PixelImage {
        let m = self.weights.len();
        let gain = self.gain();
        let values = h
            .chunks_exact(m)
            .map(|c| gain * c.iter().zip(&self.weights).map(|(v, w)| v * w).sum::<f64>())
            .collect();
        PixelImage {
            k_minus_1: self.k_minus_1,
            n_pix: self.n_pix,
            values,
        }
    }

    /// Quadrature `L^2` norm of node values.
    pub fn l2_norm(&self, h: &[f64]) -> f64 {
        let m = self.weights.len();
        h.chunks_exact(m)
            .map(|c| {
                c.iter()
                    .zip(&self.weights)
                    .map(|(v, w)| w * v * v)
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    /// The sampling map on `u_q = sqrt(W_q) h(x_q)`.
    pub fn apply_weighted(&self, u: &[f64]) -> Vec<f64> {
        let m = self.weights.len();
        let gain = self.gain();
        u.chunks_exact(m)
            .map(|c| {
                gain * c
                    .iter()
                    .zip(&self.weights)
                    .map(|(v, w)| w.sqrt() * v)
                    .sum::<f64>()
            })
            .collect()
    }

    pub fn apply_weighted_transpose(&self, v: &[f64]) -> Vec<f64> {
        let gain = self.gain();
        let mut out = Vec::with_capacity(self.nodes.len());
        for vi in v {
            out.extend(self.weights.iter().map(|w| gain * w.sqrt() * vi));
        }
        out
    }
}

pub fn pixel_sample<H>(h: H, k_minus_1: usize, n_pix: usize) -> Result<PixelImage>
where
    H: Fn(&[f64]) -> f64 + Sync,
{
    let s = PixelSampler::new(k_minus_1, n_pix)?;
    let vals = par::map_chunks(s.nodes.as_flat(), k_minus_1, &h);
    Ok(s.sample(&vals))
}

/// How chord integrals of a density are evaluated inside `ForwardModel`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChordMethod {
    /// Closed form per bump.
    #[default]
    Exact,
    /// `CHORD_NODES`-point Gauss-Legendre.
    Quadrature,
}

/// `S o F o T` with the pixel rule precomputed.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    k: usize,
    sampler: PixelSampler,
    chords: ChordMethod,
    rule: GaussRule,
}

impl ForwardModel {
    pub fn new(k: usize, n_pix: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::param("k", format!("must be at least 2, got {k}")));
        }
        Ok(Self {
            k,
            sampler: PixelSampler::new(k - 1, n_pix)?,
            chords: ChordMethod::Exact,
            rule: GaussRule::legendre(CHORD_NODES)?,
        })
    }

    pub fn with_chords(mut self, chords: ChordMethod) -> Self {
        self.chords = chords;
        self
    }

    pub fn sampler(&self) -> &PixelSampler {
        &self.sampler
    }

    pub fn pixels(&self) -> usize {
        self.sampler.pixels()
    }

    /// X-ray values of `f` rotated by `r`, at the pixel quadrature nodes.
    pub fn projection_values(&self, f: &Density, r: &Rotation) -> Result<Vec<f64>> {
        crate::error::check_dim(self.k, f.k)?;
        crate::error::check_dim(self.k, r.dim())?;
        let g = f.rotated(r);
        let nodes = self.sampler.nodes();
        Ok(match self.chords {
            ChordMethod::Exact => nodes.iter().map(|x| g.chord_integral(x)).collect(),
            ChordMethod::Quadrature => {
                let eval = |q: &[f64]| g.value(q);
                nodes
                    .iter()
                    .map(|x| chord_quadrature(x, &eval, &self.rule))
                    .collect()
            }
        })
    }

    pub fn image(&self, f: &Density, r: &Rotation) -> Result<PixelImage> {
        Ok(self.sampler.sample(&self.projection_values(f, r)?))
    }

    /// One flattened image per rotation, generated in parallel.
    pub fn images(&self, f: &Density, rotations: &[Rotation]) -> Result<PointCloud> {
        let rows = par::try_map_range(rotations.len(), |i| {
            self.image(f, &rotations[i]).map(|im| im.values)
        })?;
        PointCloud::from_rows(self.pixels(), rows)
    }
}

pub fn forward_map(f: &Density, r: &Rotation, n_pix: usize) -> Result<PixelImage> {
    ForwardModel::new(f.k, n_pix)?.image(f, r)
}

/// Finite-difference probe of `Lip(S o F o T)` in the HS metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzProbe {
    pub pairs: usize,
    pub l_hat: f64,
    pub mean_ratio: f64,
    pub seminorm: f64,
    /// `l_hat / |f|_{W^{1,2}}`.
    pub constant: f64,
}

/// Each pair is `(R, R exp(tX))` with `R` Haar, `X` a random unit skew
/// matrix and `t` uniform on `[0.05, 0.5]`.
pub fn lipschitz_probe(
    model: &ForwardModel,
    f: &Density,
    pairs: usize,
    seed: u64,
) -> Result<LipschitzProbe> {
    if pairs == 0 {
        return Err(Error::param("pairs", "must be positive"));
    }
    let k = model.k;
    let ratios = par::try_map_range(pairs, |i| {
        let tag = format!("pair{i}");
        let r1 = haar_rotation(k, child_seed(seed, &tag))?;
        let mut rng = rng_for(seed, &tag);
        let x = random_skew(k, &mut rng);
        let t = rng.random_range(0.05..0.5);
        let r2 = r1.exp_step(&x, t);
        let a = model.image(f, &r1)?;
        let b = model.image(f, &r2)?;
        Ok::<_, Error>(dist(&a.values, &b.values) / d_hs(&r1, &r2))
    })?;
    let l_hat = ratios.iter().copied().fold(0.0, f64::max);
    Ok(LipschitzProbe {
        pairs,
        l_hat,
        mean_ratio: ratios.iter().sum::<f64>() / pairs as f64,
        seminorm: f.sobolev_seminorm_est,
        constant: l_hat / f.sobolev_seminorm_est,
    })
}

/// Analytic ceiling on `Lip(S o F o T) / |f|_{W^{1,2}}`: `|S| <= 1`,
/// `|F| <= sqrt(2)`, `|Xq| <= |q| / sqrt(2)` on the support, and geodesic
/// length at most `pi / 2` times the HS chord.
pub fn lipschitz_ceiling() -> f64 {
    std::f64::consts::FRAC_PI_4
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoveringConfig {
    /// Consecutive already-covered draws that end the search.
    pub patience: usize,
    /// Maximum number of Haar draws.
    pub budget: usize,
}

impl Default for CoveringConfig {
    fn default() -> Self {
        Self {
            patience: 2000,
            budget: 1_000_000,
        }
    }
}

/// Greedy `eps`-separated set of Haar draws in the HS metric; its size
/// estimates the covering number of `SO(k)`.
pub fn so_k_covering_estimate(
    k: usize,
    eps: f64,
    seed: u64,
    cfg: &CoveringConfig,
) -> Result<usize> {
    if !(2..=4).contains(&k) {
        return Err(Error::param("k", format!("must lie in [2, 4], got {k}")));
    }
    let diam = so_k_diameter(k);
    if !(eps > 0.0 && eps <= diam) {
        return Err(Error::param(
            "eps",
            format!("must lie in (0, {diam}], got {eps}"),
        ));
    }
    let kk = k * k;
    let eps2 = eps * eps;
    let mut rng = rng_for(seed, "so_k_net");
    let mut net: Vec<f64> = Vec::new();
    let mut streak = 0;
    for _ in 0..cfg.budget {
        let r = haar_from_rng(k, &mut rng);
        let m = r.matrix.as_slice();
        let covered = net
            .chunks_exact(kk)
            .any(|c| c.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= eps2);
        if covered {
            streak += 1;
            if streak >= cfg.patience {
                return Ok(net.len() / kk);
            }
        } else {
            net.extend_from_slice(m);
            streak = 0;
        }
    }
    Err(Error::CoveringBudgetExhausted {
        samples: cfg.budget,
    })
}

/// Frozen `A` in `N(eps) <= A eps^{-k(k-1)/2}`: twice the greedy size at
/// `eps = 0.5` times `0.5^{k(k-1)/2}` (seed 0, default config).
pub fn covering_constant(k: usize) -> Option<f64> {
    match k {
        2 => Some(12.0),
        3 => Some(247.0),
        _ => None,
    }
}

pub fn covering_bound(k: usize, eps: f64) -> Option<f64> {
    covering_constant(k).map(|a| a * eps.powf(-((k * (k - 1)) as f64) / 2.0))
}

/// `min_p mu_N(B(p, eps)) / (omega_d eps^d)` over `probes` seeded probe
/// points, with the probe itself excluded from the count.
pub fn calibrate_mass_constant(
    cloud: &PointCloud,
    eps: f64,
    d: u32,
    probes: usize,
    seed: u64,
) -> Result<f64> {
    check_positive("eps", eps)?;
    if cloud.len() < 2 {
        return Err(Error::EmptyCloud);
    }
    let n = cloud.len();
    let probes = probes.clamp(1, n);
    let mut rng = rng_for(seed, "mass_probes");
    let idx = rand::seq::index::sample(&mut rng, n, probes).into_vec();
    let counts = par::map_range(idx.len(), |j| {
        let p = cloud.point(idx[j]);
        cloud.iter().filter(|q| dist(p, q) <= eps).count() - 1
    });
    let min = counts.into_iter().min().unwrap_or(0) as f64;
    Ok(min / (n - 1) as f64 / (unit_ball_volume(d) * eps.powi(d as i32)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensitySpec {
    #[default]
    Default,
    Radial,
    /// Custom bumps, normalized like the default.
    Bumps {
        bumps: Vec<Bump>,
    },
}

impl DensitySpec {
    pub fn build(&self, k: usize) -> Result<Density> {
        match self {
            DensitySpec::Default => Density::default_for(k),
            DensitySpec::Radial => Density::radial(k),
            DensitySpec::Bumps { bumps } => Ok(Density::new(k, bumps.clone())?.normalized()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CryoConfig {
    pub k: usize,
    pub n_pix: usize,
    pub n0: usize,
    pub n1: usize,
    pub n: usize,
    /// Noise level as a multiple of the clean pixel RMS.
    pub noise_rel: f64,
    pub density: DensitySpec,
}

impl Default for CryoConfig {
    fn default() -> Self {
        Self {
            k: 3,
            n_pix: DEFAULT_N_PIX,
            n0: 500,
            n1: 2500,
            n: 3000,
            noise_rel: 0.1,
            density: DensitySpec::Default,
        }
    }
}

/// An image dataset in denoiser coordinates together with the affine map
/// back to pixel units.
#[derive(Debug, Clone)]
pub struct CryoData {
    pub dataset: Dataset,
    pub density: Density,
    /// Noisy mean, in pixel units.
    pub center: Vec<f64>,
    /// A priori diameter bound `2 sqrt(2) |f|_{L^2}`.
    pub scale: f64,
    pub pixel_rms: f64,
    pub sigma_pixels: f64,
    /// Largest distance of a clean image from the clean mean, pixel units.
    pub spread: f64,
    pub degenerate: bool,
}

/// Images of `f` under `n` Haar rotations plus noise, centered at the noisy
/// mean and divided by `scale`, so the clean cloud sits in the unit ball.
pub fn make_cryo_dataset(cfg: &CryoConfig, seed: u64) -> Result<CryoData> {
    let partition = Partition::new(cfg.n0, cfg.n1, cfg.n)?;
    if !(cfg.noise_rel.is_finite() && cfg.noise_rel >= 0.0) {
        return Err(Error::param(
            "noise_rel",
            format!("must be finite and >= 0, got {}", cfg.noise_rel),
        ));
    }
    let density = cfg.density.build(cfg.k)?;
    let model = ForwardModel::new(cfg.k, cfg.n_pix)?;
    let seeds = Seeds::derive(seed);
    let rotations = par::try_map_range(cfg.n, |i| {
        haar_rotation(cfg.k, child_seed(seeds.clean, &format!("rot{i}")))
    })?;
    let clean = model.images(&density, &rotations)?;

    let flat = clean.as_flat();
    let pixel_rms = (flat.iter().map(|v| v * v).sum::<f64>() / flat.len() as f64).sqrt();
    let sigma_pixels = cfg.noise_rel * pixel_rms;
    let clean_mean = clean.mean()?;
    let spread = clean
        .iter()
        .map(|x| dist(x, &clean_mean))
        .fold(0.0, f64::max);
    let degenerate = spread <= 1e-9 * norm(&clean_mean).max(f64::MIN_POSITIVE);

    let params = json!({
        "k": cfg.k,
        "n_pix": cfg.n_pix,
        "noise_rel": cfg.noise_rel,
        "density": cfg.density,
        "bumps": density.bumps(),
        "l2_norm": density.l2_norm_est,
        "sobolev_seminorm": density.sobolev_seminorm_est,
    });
    let raw = Dataset::from_clean("cryoem", params, clean, partition, sigma_pixels, seed)?;
    let center = raw.noisy.mean()?;
    let scale = 2.0 * std::f64::consts::SQRT_2 * density.l2_norm_est;
    check_positive("scale", scale)?;
    let to_unit = |c: &PointCloud| {
        let d = c.ambient_dim();
        let coords = c
            .as_flat()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - center[i % d]) / scale)
            .collect();
        PointCloud::from_flat(d, coords)
    };
    let mut dataset = Dataset {
        clean: to_unit(&raw.clean)?,
        noisy: to_unit(&raw.noisy)?,
        sigma: sigma_pixels / scale,
        ..raw
    };
    if let Some(p) = dataset.params.as_object_mut() {
        p.insert("scale".into(), json!(scale));
        p.insert("sigma_pixels".into(), json!(sigma_pixels));
        p.insert("pixel_rms".into(), json!(pixel_rms));
    }
    Ok(CryoData {
        dataset,
        density,
        center,
        scale,
        pixel_rms,
        sigma_pixels,
        spread,
        degenerate,
    })
}
