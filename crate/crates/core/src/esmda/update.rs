use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EsmdaError, Result};
use crate::observations::ObservationSet;
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateOptions {
    /// Fraction of the scaled prediction-anomaly energy kept by the
    /// truncated SVD.
    pub svd_energy: f64,
    /// Lower and upper bounds applied to updated parameters.
    pub bounds: Option<(f64, f64)>,
}

impl Default for UpdateOptions {
    fn default() -> Self {
        Self { svd_energy: 0.999, bounds: None }
    }
}

/// Distance-based taper of the gain: parameter `i` and datum `d` interact
/// with weight `gaspari_cohn(dist / half_width)`, zero beyond twice
/// `half_width`.
#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    pub param_xy: Vec<(f64, f64)>,
    pub obs_xy: Vec<(f64, f64)>,
    pub half_width: f64,
}

/// Gaspari-Cohn fifth-order compactly supported correlation, `r = dist / c`,
/// zero for `r >= 2`.
pub fn gaspari_cohn(r: f64) -> f64 {
    let r = r.abs();
    if r >= 2.0 {
        0.0
    } else if r <= 1.0 {
        1.0 - 5.0 / 3.0 * r.powi(2) + 5.0 / 8.0 * r.powi(3) + 0.5 * r.powi(4) - 0.25 * r.powi(5)
    } else {
        4.0 - 5.0 * r + 5.0 / 3.0 * r.powi(2) + 5.0 / 8.0 * r.powi(3) - 0.5 * r.powi(4) + r.powi(5) / 12.0 - 2.0 / (3.0 * r)
    }
}

/// One perturbed-observation ensemble update with inflated noise
/// `alpha * C_D`.
///
/// `params` is `N_m x N_e`, `predictions` is `N_d x N_e` in observation
/// order. Member `j` draws its perturbation from the stream `(seed, j)`.
pub fn esmda_update(
    params: &DMatrix<f64>,
    predictions: &DMatrix<f64>,
    obs: &ObservationSet,
    alpha: f64,
    seed: u64,
    options: &UpdateOptions,
    localization: Option<&Localization>,
) -> Result<DMatrix<f64>> {
    let ne = params.ncols();
    if ne < 2 {
        return Err(EsmdaError::TooFewMembers(ne));
    }
    if predictions.ncols() != ne {
        return Err(EsmdaError::Dimension(format!("{} parameter columns vs {} prediction columns", ne, predictions.ncols())));
    }
    if predictions.nrows() != obs.len() {
        return Err(EsmdaError::Dimension(format!("{} predicted data for {} observations", predictions.nrows(), obs.len())));
    }
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(EsmdaError::InvalidAlpha(alpha));
    }
    if !(options.svd_energy > 0.0 && options.svd_energy <= 1.0) {
        return Err(EsmdaError::Dimension("svd_energy must lie in (0, 1]".into()));
    }
    let nd = obs.len();
    if nd == 0 {
        return Ok(params.clone());
    }
    obs.validate_for_assimilation()?;
    if let Some(loc) = localization {
        if loc.param_xy.len() != params.nrows() || loc.obs_xy.len() != nd || !(loc.half_width > 0.0) {
            return Err(EsmdaError::Dimension("localization coordinates do not match the problem".into()));
        }
    }

    let sd: Vec<f64> = obs.variances.iter().map(|v| v.sqrt()).collect();
    let norm = 1.0 / ((ne - 1) as f64).sqrt();
    let mut dd = predictions.clone();
    for (i, mut row) in dd.row_iter_mut().enumerate() {
        let mean = row.mean();
        row.apply(|x| *x = (*x - mean) * norm / sd[i]);
    }
    let total: f64 = dd.iter().map(|x| x * x).sum();
    if total == 0.0 {
        return Ok(params.clone());
    }

    let svd = dd.svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let mut kept = Vec::new();
    let mut acc = 0.0;
    for &k in &order {
        let s = svd.singular_values[k];
        if s <= 0.0 {
            break;
        }
        kept.push(k);
        acc += s * s;
        if acc >= options.svd_energy * total {
            break;
        }
    }

    // scaled innovations C_D^{-1/2} (d_uc - d)
    let sqrt_alpha = alpha.sqrt();
    let mut innov = DMatrix::zeros(nd, ne);
    for j in 0..ne {
        let mut rng = seeds::rng(seeds::derive(seed, &[j as u64]));
        for i in 0..nd {
            let z: f64 = StandardNormal.sample(&mut rng);
            innov[(i, j)] = (obs.values[i] - predictions[(i, j)]) / sd[i] + sqrt_alpha * z;
        }
    }

    let mut dm = params.clone();
    for mut row in dm.row_iter_mut() {
        let mean = row.mean();
        row.apply(|x| *x = (*x - mean) * norm);
    }

    // B = V_r S_r (S_r^2 + alpha)^-1 U_r^T, so the gain is dm * B * C_D^{-1/2}
    let r = kept.len();
    let mut vs = DMatrix::zeros(ne, r);
    let mut ut = DMatrix::zeros(r, nd);
    for (c, &k) in kept.iter().enumerate() {
        let s = svd.singular_values[k];
        let w = s / (s * s + alpha);
        for j in 0..ne {
            vs[(j, c)] = vt[(k, j)] * w;
        }
        for i in 0..nd {
            ut[(c, i)] = u[(i, k)];
        }
    }

    let delta = match localization {
        None => {
            let y = &ut * &innov;
            &dm * (&vs * y)
        }
        Some(loc) => {
            let b = &vs * &ut;
            let nm = params.nrows();
            let rows: Vec<DVector<f64>> = (0..nm)
                .into_par_iter()
                .map(|i| {
                    let mut k = (dm.row(i) * &b).transpose();
                    let (px, py) = loc.param_xy[i];
                    for (d, kd) in k.iter_mut().enumerate() {
                        let (ox, oy) = loc.obs_xy[d];
                        *kd *= gaspari_cohn(((px - ox).powi(2) + (py - oy).powi(2)).sqrt() / loc.half_width);
                    }
                    innov.tr_mul(&k)
                })
                .collect();
            let mut out = DMatrix::zeros(nm, ne);
            for (i, r) in rows.iter().enumerate() {
                out.row_mut(i).copy_from(&r.transpose());
            }
            out
        }
    };

    let mut updated = params + delta;
    if let Some((lo, hi)) = options.bounds {
        updated.apply(|x| *x = x.clamp(lo, hi));
    }
    Ok(updated)
}
