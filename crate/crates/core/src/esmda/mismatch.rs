use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{EsmdaError, Result};
use crate::observations::ObservationSet;

/// Normalized data mismatch `Phi/N_d` of an ensemble.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MismatchReport {
    pub per_member: Vec<f64>,
    pub mean: f64,
    /// Ensemble-mean `Phi/N_d` restricted to each quantity.
    pub per_quantity: BTreeMap<String, f64>,
    /// Mean squared innovation of the ensemble mean, normalized by noise plus
    /// ensemble variance. Near one when data and ensemble are consistent.
    pub innovation: f64,
}

/// Mismatch of predictions (`N_d x N_e`, obs ordering) against `obs`.
pub fn mismatch(predictions: &DMatrix<f64>, obs: &ObservationSet) -> Result<MismatchReport> {
    obs.validate_for_assimilation()?;
    let nd = obs.len();
    if predictions.nrows() != nd {
        return Err(EsmdaError::Dimension(format!("{} predicted data for {} observations", predictions.nrows(), nd)));
    }
    let ne = predictions.ncols();
    if nd == 0 || ne == 0 {
        return Ok(MismatchReport { per_member: vec![0.0; ne], ..Default::default() });
    }
    let mut per_member = vec![0.0; ne];
    let mut by_q: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let mut innovation = 0.0;
    for i in 0..nd {
        let var = obs.variances[i];
        let row = predictions.row(i);
        let mut sum_sq = 0.0;
        for (j, p) in row.iter().enumerate() {
            let r2 = (obs.values[i] - p).powi(2) / var;
            per_member[j] += r2;
            sum_sq += r2;
        }
        let e = by_q.entry(obs.labels[i].quantity.to_string()).or_insert((0.0, 0));
        e.0 += sum_sq / ne as f64;
        e.1 += 1;
        let mean = row.mean();
        let spread = if ne > 1 { row.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (ne - 1) as f64 } else { 0.0 };
        innovation += (obs.values[i] - mean).powi(2) / (var + spread);
    }
    per_member.iter_mut().for_each(|v| *v /= nd as f64);
    let mean = per_member.iter().sum::<f64>() / ne as f64;
    Ok(MismatchReport {
        per_member,
        mean,
        per_quantity: by_q.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect(),
        innovation: innovation / nd as f64,
    })
}
