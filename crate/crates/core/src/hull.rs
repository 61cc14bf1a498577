//! Exact geometry on convex hulls of finite point sets.
//!
//! [`project_onto_hull`] is Wolfe's nearest-point algorithm run on the
//! translated vertices `v_i - y`: it finds the minimum-norm point of their
//! hull, which is `Proj(y) - y`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{dot, PointCloud};

/// Major-loop iteration cap for the nearest-point search.
pub const MAX_ITERATIONS: usize = 10_000;

const GAP_TOL: f64 = 1e-12;
const WEIGHT_TOL: f64 = 1e-14;

/// Euclidean projection of `y` onto `conv(V)` and its distance.
///
/// Points inside the hull (within the convergence tolerance) come back
/// unchanged with distance 0.
pub fn project_onto_hull(y: &[f64], vertices: &PointCloud) -> Result<(Vec<f64>, f64)> {
    if vertices.is_empty() {
        return Err(Error::EmptyCloud);
    }
    check_dim(vertices.ambient_dim(), y.len())?;
    let dim = y.len();
    let q: Vec<Vec<f64>> = vertices
        .iter()
        .map(|v| v.iter().zip(y).map(|(a, b)| a - b).collect())
        .collect();
    let scale = q.iter().map(|p| dot(p, p)).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok((y.to_vec(), 0.0));
    }

    let first = (0..q.len())
        .min_by(|&a, &b| dot(&q[a], &q[a]).total_cmp(&dot(&q[b], &q[b])))
        .unwrap();
    let mut active = vec![first];
    let mut weights = vec![1.0];
    let mut x = q[first].clone();

    for iter in 0..MAX_ITERATIONS {
        let xx = dot(&x, &x);
        if xx <= GAP_TOL * scale {
            return Ok((y.to_vec(), 0.0));
        }
        let (j, xq) = q
            .iter()
            .enumerate()
            .map(|(i, p)| (i, dot(&x, p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if xx - xq <= GAP_TOL * scale || active.contains(&j) || active.len() > dim {
            return Ok(finish(y, &x));
        }
        active.push(j);
        weights.push(0.0);

        loop {
            let alpha = affine_minimizer(&q, &active);
            if alpha.iter().all(|&a| a > WEIGHT_TOL) {
                weights = alpha;
                break;
            }
            let mut theta = 1.0f64;
            for (&w, &a) in weights.iter().zip(&alpha) {
                if a <= WEIGHT_TOL {
                    let denom = w - a;
                    if denom > 0.0 {
                        theta = theta.min(w / denom);
                    }
                }
            }
            for (w, a) in weights.iter_mut().zip(&alpha) {
                *w += theta * (a - *w);
            }
            let mut k = 0;
            while k < active.len() {
                if weights[k] <= WEIGHT_TOL {
                    active.remove(k);
                    weights.remove(k);
                } else {
                    k += 1;
                }
            }
            if active.is_empty() {
                return Err(Error::HullOracleFailure {
                    iterations: iter,
                    residual: xx.sqrt(),
                });
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            if active.len() == 1 {
                weights[0] = 1.0;
                break;
            }
        }
        x = combine(&q, &active, &weights, dim);
    }
    let xx = dot(&x, &x);
    let gap = xx - q.iter().map(|p| dot(&x, p)).fold(f64::INFINITY, f64::min);
    Err(Error::HullOracleFailure {
        iterations: MAX_ITERATIONS,
        residual: gap / scale,
    })
}

fn finish(y: &[f64], x: &[f64]) -> (Vec<f64>, f64) {
    let p = y.iter().zip(x).map(|(a, b)| a + b).collect();
    (p, dot(x, x).sqrt())
}

fn combine(q: &[Vec<f64>], active: &[usize], w: &[f64], dim: usize) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    for (&i, &wi) in active.iter().zip(w) {
        for (a, b) in x.iter_mut().zip(&q[i]) {
            *a += wi * b;
        }
    }
    x
}

/// Barycentric weights of the minimum-norm point of the affine hull of
/// `q[active]`.
fn affine_minimizer(q: &[Vec<f64>], active: &[usize]) -> Vec<f64> {
    let dim = q[0].len();
    let m = active.len() - 1;
    let q0 = &q[active[0]];
    let a = DMatrix::from_fn(dim, m, |r, c| q[active[c + 1]][r] - q0[r]);
    let rhs = DVector::from_iterator(dim, q0.iter().map(|v| -v));
    let svd = a.svd(true, true);
    let eps = 1e-13 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let mu = svd.solve(&rhs, eps).expect("u and v were computed");
    let mut alpha = Vec::with_capacity(m + 1);
    alpha.push(1.0 - mu.sum());
    alpha.extend(mu.iter());
    alpha
}

/// `max_i <v_i, omega>` over the vertices.
pub fn support_function(vertices: &PointCloud, omega: &[f64]) -> Result<f64> {
    let i = support_point(vertices, omega)?;
    Ok(dot(vertices.point(i), omega))
}

/// Index of the vertex attaining the support value; lowest index on ties.
pub fn support_point(vertices: &PointCloud, omega: &[f64]) -> Result<usize> {
    if vertices.is_empty() {
        return Err(Error::EmptyCloud);
    }
    check_dim(vertices.ambient_dim(), omega.len())?;
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in vertices.iter().enumerate() {
        let s = dot(v, omega);
        if s > best_val {
            best_val = s;
            best = i;
        }
    }
    Ok(best)
}

/// True iff the distance from `y` to the hull is at most `tol`.
pub fn hull_membership(y: &[f64], vertices: &PointCloud, tol: f64) -> Result<bool> {
    Ok(project_onto_hull(y, vertices)?.1 <= tol)
}
