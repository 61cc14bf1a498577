//! Least-squares subspace fit on the first block and the bookkeeping that
//! bounds its bias.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_positive, Error, Result};
use crate::geometry::{dot, PointCloud};
use crate::par;

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: u32) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * std::f64::consts::PI / d as f64,
    }
}

/// `min(n, ceil(1 / (c_M * omega_d * eps0^d)))`.
pub fn choose_reduced_dim(n: usize, d: u32, c_m: f64, eps0: f64) -> Result<usize> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    if d == 0 {
        return Err(Error::param("d", "must be positive"));
    }
    if !(eps0 > 0.0 && eps0 <= 2.0) {
        return Err(Error::param(
            "eps0",
            format!("must lie in (0, 2], got {eps0}"),
        ));
    }
    if !(c_m > 0.0 && c_m < (-1.0f64).exp()) {
        return Err(Error::param(
            "c_M",
            format!("must lie in (0, 1/e), got {c_m}"),
        ));
    }
    let raw = 1.0 / (c_m * unit_ball_volume(d) * eps0.powi(d as i32));
    // absorb rounding when the quotient is an integer up to a few ulps
    let dim = (raw * (1.0 - 1e-12)).ceil().max(1.0);
    Ok(if dim >= n as f64 { n } else { dim as usize })
}

/// Orthonormal basis of the top principal directions of a block, centered
/// at its mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceFit {
    pub center: Vec<f64>,
    /// `D` rows of length `n`.
    pub basis: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub dim: usize,
    /// Mean squared distance of the block to the affine subspace.
    pub residual: f64,
    /// Descending eigenvalues of the block covariance.
    #[serde(default)]
    pub eigenvalues: Vec<f64>,
    /// Set when the covariance has rank below `D`; the basis was completed
    /// arbitrarily past the rank.
    #[serde(default)]
    pub rank_deficient: bool,
}

pub fn fit_subspace(block: &PointCloud, dim: usize) -> Result<SubspaceFit> {
    let n = block.ambient_dim();
    if dim == 0 || dim > n {
        return Err(Error::param(
            "D",
            format!("must lie in [1, {n}], got {dim}"),
        ));
    }
    if block.len() < dim + 1 {
        return Err(Error::param(
            "block",
            format!(
                "needs at least D + 1 = {} points, has {}",
                dim + 1,
                block.len()
            ),
        ));
    }
    let center = block.mean()?;
    let count = block.len() as f64;
    let mut cov = DMatrix::<f64>::zeros(n, n);
    let mut centered = vec![0.0; n];
    for p in block.iter() {
        for (c, (a, m)) in centered.iter_mut().zip(p.iter().zip(&center)) {
            *c = a - m;
        }
        for i in 0..n {
            let ci = centered[i];
            for j in i..n {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let v = cov[(i, j)] / count;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let top = eigenvalues[0];
    let rank = eigenvalues
        .iter()
        .filter(|&&l| l > 1e-12 * top.max(f64::MIN_POSITIVE))
        .count();
    let basis: Vec<Vec<f64>> = order[..dim]
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            if let Some(&first) = v.iter().find(|x| x.abs() > 1e-12) {
                if first < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
            }
            v
        })
        .collect();
    let residual = eigenvalues[dim..].iter().sum();
    Ok(SubspaceFit {
        center,
        basis,
        dim,
        residual,
        eigenvalues,
        rank_deficient: rank < dim,
    })
}

impl SubspaceFit {
    pub fn ambient_dim(&self) -> usize {
        self.center.len()
    }

    /// Basis coordinates of `y - center`.
    pub fn coords(&self, y: &[f64]) -> Vec<f64> {
        let shifted: Vec<f64> = y.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        self.basis.iter().map(|u| dot(u, &shifted)).collect()
    }

    /// `center + sum_k z_k u_k`.
    pub fn lift(&self, z: &[f64]) -> Vec<f64> {
        let mut x = self.center.clone();
        for (zk, u) in z.iter().zip(&self.basis) {
            for (a, b) in x.iter_mut().zip(u) {
                *a += zk * b;
            }
        }
        x
    }

    /// Distance from `y` to the affine subspace.
    pub fn distance(&self, y: &[f64]) -> f64 {
        let lifted = self.lift(&self.coords(y));
        crate::geometry::dist(y, &lifted)
    }
}

/// Orthogonal projection onto the fitted affine subspace, in basis
/// coordinates.
pub fn project(fit: &SubspaceFit, cloud: &PointCloud) -> Result<PointCloud> {
    check_dim(fit.ambient_dim(), cloud.ambient_dim())?;
    let rows = par::map_chunks(cloud.as_flat(), cloud.ambient_dim(), |p| fit.coords(p));
    PointCloud::from_flat(fit.dim, rows.concat())
}

/// Lifts basis coordinates back to the ambient space.
pub fn lift_cloud(fit: &SubspaceFit, coords: &PointCloud) -> Result<PointCloud> {
    check_dim(fit.dim, coords.ambient_dim())?;
    let rows = par::map_chunks(coords.as_flat(), fit.dim, |z| fit.lift(z));
    PointCloud::from_flat(fit.ambient_dim(), rows.concat())
}

/// Default for the unpinned constant in the truncation radius.
pub const DEFAULT_RADIUS_CONSTANT: f64 = 2.0;

/// `R = C sigma sqrt(n) + C sigma sqrt(log(C N0 / alpha))`.
pub fn truncation_radius(sigma: f64, n: usize, n0: usize, alpha: f64, c: f64) -> Result<f64> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::param("sigma", format!("must be >= 0, got {sigma}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(
            "alpha",
            format!("must lie in (0, 1), got {alpha}"),
        ));
    }
    check_positive("C", c)?;
    if n == 0 || n0 == 0 {
        return Err(Error::param("n", "n and N0 must be positive"));
    }
    let l = (c * n0 as f64 / alpha).ln();
    if l < 0.0 {
        return Err(Error::param(
            "alpha",
            "log(C N0 / alpha) must be non-negative",
        ));
    }
    Ok(c * sigma * (n as f64).sqrt() + c * sigma * l.sqrt())
}

/// `2 (R + 1)^2 ((sqrt(D) + 2) / sqrt(N0)) (1 + sqrt(2 ln(4 / alpha)))`.
pub fn eps_emp(r: f64, dim: usize, n0: usize, alpha: f64) -> Result<f64> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::param("R", format!("must be >= 0, got {r}")));
    }
    if !(alpha > 0.0 && alpha < 4.0) {
        return Err(Error::param(
            "alpha",
            format!("must lie in (0, 4), got {alpha}"),
        ));
    }
    if dim == 0 || n0 == 0 {
        return Err(Error::param("D", "D and N0 must be positive"));
    }
    let d = dim as f64;
    Ok(2.0
        * (r + 1.0).powi(2)
        * ((d.sqrt() + 2.0) / (n0 as f64).sqrt())
        * (1.0 + (2.0 * (4.0 / alpha).ln()).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcaBoundInputs {
    pub eps0: f64,
    pub eps_emp: f64,
    pub d: u32,
    /// Absolute constant, 1 by default.
    pub c: f64,
}

/// `C d (4 eps0^2 + 2 eps_emp)^(1 / (d + 2))`, up to an absolute constant.
pub fn pca_bias_bound(inputs: &PcaBoundInputs) -> Result<f64> {
    if !(inputs.eps0 >= 0.0 && inputs.eps_emp >= 0.0) {
        return Err(Error::param(
            "eps0",
            "eps0 and eps_emp must be non-negative",
        ));
    }
    check_positive("C", inputs.c)?;
    let d = inputs.d as f64;
    Ok(inputs.c * d * (4.0 * inputs.eps0.powi(2) + 2.0 * inputs.eps_emp).powf(1.0 / (d + 2.0)))
}
