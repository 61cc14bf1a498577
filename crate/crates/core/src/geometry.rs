//! Ambient-space primitives: point clouds, hyperplanes, half-space tail
//! fractions and deterministic sphere nets.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::par;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A finite list of points sharing one ambient dimension, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    ambient_dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(ambient_dim: usize) -> Self {
        assert!(ambient_dim >= 1, "ambient dimension must be positive");
        Self {
            ambient_dim,
            coords: Vec::new(),
        }
    }

    pub fn with_capacity(ambient_dim: usize, count: usize) -> Self {
        assert!(ambient_dim >= 1, "ambient dimension must be positive");
        Self {
            ambient_dim,
            coords: Vec::with_capacity(ambient_dim * count),
        }
    }

    pub fn from_flat(ambient_dim: usize, coords: Vec<f64>) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(Error::param("ambient_dim", "must be positive"));
        }
        if !coords.len().is_multiple_of(ambient_dim) {
            return Err(Error::param(
                "coords",
                format!(
                    "length {} is not a multiple of dimension {ambient_dim}",
                    coords.len()
                ),
            ));
        }
        Ok(Self {
            ambient_dim,
            coords,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(
        ambient_dim: usize,
        rows: impl IntoIterator<Item = R>,
    ) -> Result<Self> {
        let mut cloud = Self::new(ambient_dim);
        for row in rows {
            cloud.push(row.as_ref())?;
        }
        Ok(cloud)
    }

    pub fn push(&mut self, p: &[f64]) -> Result<()> {
        check_dim(self.ambient_dim, p.len())?;
        self.coords.extend_from_slice(p);
        Ok(())
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.ambient_dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.ambient_dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.coords
    }

    /// Copies the points with indices in `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> PointCloud {
        PointCloud {
            ambient_dim: self.ambient_dim,
            coords: self.coords[range.start * self.ambient_dim..range.end * self.ambient_dim]
                .to_vec(),
        }
    }

    pub fn mean(&self) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut m = vec![0.0; self.ambient_dim];
        for p in self.iter() {
            for (a, b) in m.iter_mut().zip(p) {
                *a += b;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        Ok(m)
    }

    /// Inner product of every point with `b`.
    pub fn projections(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.ambient_dim, b.len())?;
        Ok(self.iter().map(|p| dot(p, b)).collect())
    }
}

/// The affine hyperplane `{x : <x, normal> = offset}` with a unit normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    normal: Vec<f64>,
    offset: f64,
}

impl Hyperplane {
    /// Rejects normals whose length differs from 1 by more than 1e-12.
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        if normal.is_empty() {
            return Err(Error::param("normal", "dimension must be at least 1"));
        }
        let n = norm(&normal);
        if !((n - 1.0).abs() <= 1e-12) || !offset.is_finite() {
            return Err(Error::param(
                "normal",
                format!("must be a unit vector, has norm {n}"),
            ));
        }
        Ok(Self { normal, offset })
    }

    /// Normalizes `direction` first.
    pub fn from_direction(direction: &[f64], offset: f64) -> Result<Self> {
        let n = norm(direction);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::param("normal", "direction must be nonzero"));
        }
        Self::new(direction.iter().map(|x| x / n).collect(), offset)
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }
}

/// Signed distance `<y, normal> - offset`; positive on the side the normal
/// points to.
pub fn signed_distance(y: &[f64], h: &Hyperplane) -> Result<f64> {
    check_dim(h.dim(), y.len())?;
    Ok(dot(y, h.normal()) - h.offset())
}

/// Fraction of `cloud` strictly beyond level `gamma` along `b`:
/// `|{p : <p, b> > gamma}| / |cloud|`.
pub fn halfspace_tail_count(cloud: &PointCloud, b: &[f64], gamma: f64) -> Result<f64> {
    if cloud.is_empty() {
        return Err(Error::NoOracleSamples);
    }
    check_dim(cloud.ambient_dim(), b.len())?;
    let above = cloud.iter().filter(|p| dot(p, b) > gamma).count();
    Ok(above as f64 / cloud.len() as f64)
}

/// Tail fractions for many `(direction, level)` queries against one cloud.
pub fn batch_tail_counts(cloud: &PointCloud, queries: &[(Vec<f64>, f64)]) -> Result<Vec<f64>> {
    par::try_map_range(queries.len(), |i| {
        let (b, gamma) = &queries[i];
        halfspace_tail_count(cloud, b, *gamma)
    })
}

/// Default hard cap on the number of net directions.
pub const DEFAULT_NET_CAP: usize = 10_000_000;

/// A deterministic covering of the unit sphere `S^{D-1}`: every unit vector
/// is within `mesh` of some direction.
///
/// Built from the cube grid on `[-1, 1]^D` with an even number `M` of cells
/// per axis and pitch `2/M <= mesh/sqrt(D)`. Every cell meeting the unit
/// sphere contributes its normalized center. A unit vector `u` lies in such
/// a cell, so `|c - u| <= mesh/2`, and `|c/|c| - u| <= 2|c - u| <= mesh`.
/// Since `M <= 2 sqrt(D)/mesh + 2`, the cardinality is at most
/// `(4 sqrt(D) / mesh)^D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereNet {
    dimension: usize,
    mesh: f64,
    directions: Vec<f64>,
}

impl SphereNet {
    pub fn build(dimension: usize, mesh: f64) -> Result<Self> {
        Self::build_capped(dimension, mesh, DEFAULT_NET_CAP)
    }

    pub fn build_capped(dimension: usize, mesh: f64, cap: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::param("dimension", "must be at least 1"));
        }
        if !(mesh.is_finite() && mesh > 0.0 && mesh <= 2.0) {
            return Err(Error::param(
                "mesh",
                format!("must lie in (0, 2], got {mesh}"),
            ));
        }
        let pitch_max = mesh / (dimension as f64).sqrt();
        let per_axis = 2 * ((1.0 / pitch_max).ceil() as usize).max(1);
        if (per_axis as f64).powi(dimension as i32) > 1e10 {
            return Err(Error::NetTooLarge { mesh, cap });
        }

        // Squared-norm range of each axis interval, indexed by cell.
        let ranges: Vec<(f64, f64)> = (0..per_axis)
            .map(|i| {
                let lo = (2 * i as i64 - per_axis as i64) as f64 / per_axis as f64;
                let hi = (2 * i as i64 + 2 - per_axis as i64) as f64 / per_axis as f64;
                let min = if lo <= 0.0 && hi >= 0.0 {
                    0.0
                } else {
                    (lo * lo).min(hi * hi)
                };
                (min, (lo * lo).max(hi * hi))
            })
            .collect();

        let mut directions = Vec::new();
        let mut seen = HashSet::new();
        let mut index = vec![0usize; dimension];
        let mut count = 0usize;
        enumerate_shell(&ranges, 0, 0.0, 0.0, &mut index, &mut |idx: &[usize]| {
            let center: Vec<f64> = idx
                .iter()
                .map(|&i| (2 * i as i64 + 1 - per_axis as i64) as f64 / per_axis as f64)
                .collect();
            let n = norm(&center);
            let unit: Vec<f64> = center.iter().map(|c| c / n).collect();
            let key: Vec<i64> = unit.iter().map(|u| (u * 1e12).round() as i64).collect();
            if seen.insert(key) {
                count += 1;
                if count > cap {
                    return false;
                }
                directions.extend_from_slice(&unit);
            }
            true
        });
        if count > cap {
            return Err(Error::NetTooLarge { mesh, cap });
        }
        Ok(Self {
            dimension,
            mesh,
            directions,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn len(&self) -> usize {
        self.directions.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn direction(&self, i: usize) -> &[f64] {
        &self.directions[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.directions.chunks_exact(self.dimension)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.directions
    }

    /// Documented upper bound `(4 sqrt(D) / mesh)^D` on the cardinality.
    pub fn cardinality_bound(dimension: usize, mesh: f64) -> f64 {
        (4.0 * (dimension as f64).sqrt() / mesh).powi(dimension as i32)
    }

    /// Distance from a unit vector to the nearest net direction.
    pub fn covering_distance(&self, u: &[f64]) -> f64 {
        self.iter()
            .map(|d| dist(d, u))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Depth-first walk over grid cells in lexicographic index order, visiting
/// only cells whose squared-norm range contains 1. Returns false to abort.
fn enumerate_shell(
    ranges: &[(f64, f64)],
    axis: usize,
    partial_min: f64,
    partial_max: f64,
    index: &mut [usize],
    visit: &mut impl FnMut(&[usize]) -> bool,
) -> bool {
    let last = axis + 1 == index.len();
    for (i, &(lo, hi)) in ranges.iter().enumerate() {
        let min = partial_min + lo;
        if min > 1.0 {
            continue;
        }
        let max = partial_max + hi;
        index[axis] = i;
        if last {
            if max >= 1.0 && !visit(index) {
                return false;
            }
        } else if !enumerate_shell(ranges, axis + 1, min, max, index, visit) {
            return false;
        }
    }
    true
}
