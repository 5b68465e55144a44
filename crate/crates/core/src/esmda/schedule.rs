use serde::{Deserialize, Serialize};

use super::{EsmdaError, MismatchReport, Result};

/// Upper clamp for the first inflation factor.
pub const ALPHA_MAX: f64 = 1.0e4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflationSchedule {
    pub alphas: Vec<f64>,
    /// Common ratio of consecutive `1/alpha`.
    pub ratio: f64,
}

impl InflationSchedule {
    pub fn n_steps(&self) -> usize {
        self.alphas.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(EsmdaError::InvalidSchedule("empty".into()));
        }
        if self.alphas.iter().any(|a| !(a.is_finite() && *a >= 1.0 - 1e-12)) {
            return Err(EsmdaError::InvalidSchedule("factors must be finite and >= 1".into()));
        }
        let s: f64 = self.alphas.iter().map(|a| 1.0 / a).sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(EsmdaError::InvalidSchedule(format!("sum of 1/alpha is {s}, expected 1")));
        }
        Ok(())
    }
}

/// Factors `alpha_i = alpha_1 / r^(i-1)` with `r` chosen so that the
/// reciprocals sum to one.
pub fn geometric_schedule(n_steps: usize, alpha_1: f64) -> Result<InflationSchedule> {
    if n_steps == 0 {
        return Err(EsmdaError::InvalidSchedule("n_steps must be at least 1".into()));
    }
    if n_steps == 1 {
        return Ok(InflationSchedule { alphas: vec![1.0], ratio: 1.0 });
    }
    if !(alpha_1.is_finite() && alpha_1 > 1.0) {
        return Err(EsmdaError::InvalidSchedule(format!("alpha_1 must exceed 1 for {n_steps} steps, got {alpha_1}")));
    }
    let ratio = if alpha_1 == n_steps as f64 {
        1.0
    } else {
        // sum_{i<n} r^i is increasing in r; root lies in (0, alpha_1)
        let f = |r: f64| (0..n_steps).fold((0.0, 1.0), |(s, p), _| (s + p, p * r)).0 - alpha_1;
        let (mut lo, mut hi) = (0.0_f64, alpha_1);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let mut alphas = Vec::with_capacity(n_steps);
    let mut a = alpha_1;
    for _ in 0..n_steps {
        alphas.push(a);
        a /= ratio;
    }
    Ok(InflationSchedule { alphas, ratio })
}

/// Classic constant factors `[n; n]`.
pub fn constant_schedule(n_steps: usize) -> Result<InflationSchedule> {
    if n_steps == 0 {
        return Err(EsmdaError::InvalidSchedule("n_steps must be at least 1".into()));
    }
    Ok(InflationSchedule { alphas: vec![n_steps as f64; n_steps], ratio: 1.0 })
}

/// Half the prior's mean normalized mismatch, clamped to `[n_steps, alpha_max]`.
pub fn choose_alpha1(prior: &MismatchReport, n_steps: usize, alpha_max: f64) -> f64 {
    let lo = n_steps as f64;
    let hi = alpha_max.max(lo);
    let a = prior.mean / 2.0;
    if a.is_nan() {
        return hi;
    }
    a.clamp(lo, hi)
}
