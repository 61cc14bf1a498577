//! Closed-form calculators for covering numbers, entropy integrals and the
//! risk budget. Unspecified absolute constants are explicit arguments.

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::pca::unit_ball_volume;

/// `ceil(8 / eps^2) * ln N_M`, the log of the covering bound for a hull
/// given an `eps/2` covering of the manifold with `N_M` balls.
pub fn hull_covering_log_bound(eps: f64, n_m: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 2.0) {
        return Err(Error::param(
            "eps",
            format!("must lie in (0, 2], got {eps}"),
        ));
    }
    if !(n_m >= 1.0 && n_m.is_finite()) {
        return Err(Error::param("N_M", format!("must be >= 1, got {n_m}")));
    }
    Ok((8.0 / (eps * eps)).ceil() * n_m.ln())
}

/// `V / (omega_d eps^d)` below the knee `eps = tau/4`, constant above it.
pub fn manifold_covering_bound(eps: f64, tau: f64, volume: f64, d: u32) -> Result<f64> {
    check_positive("eps", eps)?;
    check_positive("tau", tau)?;
    check_positive("V", volume)?;
    let e = eps.min(tau / 4.0);
    Ok(volume / (unit_ball_volume(d) * e.powi(d as i32)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DudleyConstants {
    pub c1: f64,
    pub c2: f64,
}

impl Default for DudleyConstants {
    fn default() -> Self {
        Self { c1: 1.0, c2: 1.0 }
    }
}

/// `C1 (1/sqrt(D) + sqrt(log((2D)^d / (c_M sigma^d omega_d)))
///   [4 sigma^-1 log(2D / sigma) + C2 sigma^-1])`.
pub fn dudley_j(dim: usize, d: u32, sigma: f64, c_m: f64, c: &DudleyConstants) -> Result<f64> {
    if dim == 0 {
        return Err(Error::param("D", "must be positive"));
    }
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::param(
            "sigma",
            format!("must lie in (0, 1], got {sigma}"),
        ));
    }
    check_positive("c_M", c_m)?;
    let two_d = 2.0 * dim as f64;
    let log_arg =
        d as f64 * two_d.ln() - c_m.ln() - d as f64 * sigma.ln() - unit_ball_volume(d).ln();
    if !(log_arg > 0.0) {
        return Err(Error::param(
            "c_M",
            format!(
                "log argument (2D)^d / (c_M sigma^d omega_d) = {} is not > 1",
                log_arg.exp()
            ),
        ));
    }
    let bracket = 4.0 / sigma * (two_d / sigma).ln() + c.c2 / sigma;
    Ok(c.c1 * (1.0 / (dim as f64).sqrt() + log_arg.sqrt() * bracket))
}

/// Number of log-spaced nodes in the entropy integral.
pub const DUDLEY_GRID: usize = 1024;

/// `eta + 12 * int_{eta/4}^{diam} sqrt(log N(eps)) d eps`, trapezoid rule on
/// a log-spaced grid. `log_n` is the log covering number as a function of
/// `eps`.
pub fn truncated_dudley(log_n: impl Fn(f64) -> f64, eta: f64, diam: f64) -> Result<f64> {
    check_positive("eta", eta)?;
    check_positive("diam", diam)?;
    let lo = eta / 4.0;
    if diam <= lo {
        return Ok(eta);
    }
    let (a, b) = (lo.ln(), diam.ln());
    let h = (b - a) / (DUDLEY_GRID - 1) as f64;
    let mut prev_x = lo;
    let mut prev_y = log_n(lo).max(0.0).sqrt();
    let mut total = 0.0;
    for k in 1..DUDLEY_GRID {
        let x = if k == DUDLEY_GRID - 1 {
            diam
        } else {
            (a + k as f64 * h).exp()
        };
        let y = log_n(x).max(0.0).sqrt();
        total += 0.5 * (x - prev_x) * (y + prev_y);
        prev_x = x;
        prev_y = y;
    }
    Ok(eta + 12.0 * total)
}

/// Piecewise-linear interpolation of a tabulated entropy curve, constant
/// outside the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyTable {
    pub eps: Vec<f64>,
    pub log_n: Vec<f64>,
}

impl EntropyTable {
    pub fn new(eps: Vec<f64>, log_n: Vec<f64>) -> Result<Self> {
        if eps.is_empty() || eps.len() != log_n.len() {
            return Err(Error::param("entropy", "needs matching non-empty columns"));
        }
        if eps.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::param("entropy", "eps must be strictly increasing"));
        }
        if log_n.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::param(
                "entropy",
                "log N must be non-increasing in eps",
            ));
        }
        Ok(Self { eps, log_n })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.eps.partition_point(|&e| e <= x);
        if k == 0 {
            return self.log_n[0];
        }
        if k == self.eps.len() {
            return *self.log_n.last().unwrap();
        }
        let (x0, x1) = (self.eps[k - 1], self.eps[k]);
        let t = (x - x0) / (x1 - x0);
        self.log_n[k - 1] + t * (self.log_n[k] - self.log_n[k - 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChatterjeeTail {
    /// `sigma sqrt(J) + sigma gamma J^(1/4)`.
    pub threshold: f64,
    /// `3 exp(-gamma^4 / (32 (1 + gamma / J^(1/4))^2))`.
    pub prob_bound: f64,
}

pub fn chatterjee_tail(gamma: f64, j: f64, sigma: f64) -> Result<ChatterjeeTail> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::param("gamma", format!("must be >= 0, got {gamma}")));
    }
    check_positive("J", j)?;
    if !(sigma >= 0.0) {
        return Err(Error::param("sigma", "must be >= 0"));
    }
    let q = j.powf(0.25);
    Ok(ChatterjeeTail {
        threshold: sigma * j.sqrt() + sigma * gamma * q,
        prob_bound: 3.0 * (-gamma.powi(4) / (32.0 * (1.0 + gamma / q).powi(2))).exp(),
    })
}

/// The three error terms and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub pca_bias: f64,
    pub statistical_risk: f64,
    pub algorithmic: f64,
    pub total: f64,
}

pub fn main_theorem_budget(
    pca_bias: f64,
    statistical_risk: f64,
    algorithmic: f64,
) -> Result<Budget> {
    for (name, v) in [
        ("pca_bias", pca_bias),
        ("statistical_risk", statistical_risk),
        ("algorithmic", algorithmic),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::param(
                name,
                format!("must be finite and >= 0, got {v}"),
            ));
        }
    }
    Ok(Budget {
        pca_bias,
        statistical_risk,
        algorithmic,
        total: pca_bias + statistical_risk + algorithmic,
    })
}

/// Predicted `E|X_hat - X| / E|Y - X|`: `(sqrt(J) + gamma J^(1/4)) / sqrt(n)`.
pub fn noise_reduction_ratio(n: usize, gamma: f64, j: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    check_positive("J", j)?;
    if !(gamma >= 0.0) {
        return Err(Error::param("gamma", "must be >= 0"));
    }
    Ok((j.sqrt() + gamma * j.powf(0.25)) / (n as f64).sqrt())
}
