use std::sync::Arc;

use co2risk_core::esmda::{assimilate, esmda_update, geometric_schedule, AssimilationOptions, Localization, Parameterization, UpdateOptions};
use co2risk_core::geomodel::{generate_prior_ensemble, Ensemble, GridGeometry, Layering, ReservoirModel, VariogramSpec};
use co2risk_core::observations::{ObsLabel, ObservationSet, Quantity};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn prior(n: usize, seed: u64) -> Ensemble {
    let g = GridGeometry::uniform(6, 6, 1, 600.0, 600.0, 10.0, 1000.0).unwrap();
    generate_prior_ensemble(&g, &VariogramSpec { range_x: 300.0, range_y: 300.0, ..Default::default() }, 0.2, n, seed, Layering::Replicate).unwrap()
}

fn obs(values: &[f64]) -> ObservationSet {
    let labels = (0..values.len()).map(|k| ObsLabel { time_days: (k + 1) as f64, well: format!("W{}", k % 3), quantity: Quantity::Pressure }).collect();
    ObservationSet::new(labels, values.to_vec(), vec![0.04; values.len()]).unwrap()
}

/// Mean log-permeability of three cell blocks.
fn forward(m: &ReservoirModel) -> Result<Vec<f64>, String> {
    let n = m.log_perm.len();
    Ok((0..3).map(|b| m.log_perm[b * n / 3..(b + 1) * n / 3].iter().sum::<f64>() / (n / 3) as f64).collect())
}

fn localization(e: &Ensemble) -> Localization {
    let g = &e.geometry;
    let param_xy = (0..g.n_cells()).map(|c| {
        let (i, j, _) = g.ijk(c);
        g.column_center(i, j)
    });
    Localization { param_xy: param_xy.collect(), obs_xy: vec![(100.0, 100.0), (300.0, 300.0), (500.0, 500.0)], half_width: 250.0 }
}

#[test]
fn posterior_independent_of_thread_count() {
    let e = prior(30, 1);
    let o = obs(&[4.0, 4.5, 5.0]);
    let schedule = geometric_schedule(4, 10.0).unwrap();
    let options = AssimilationOptions { parameterization: Parameterization::AllCells, localization: Some(localization(&e)), ..Default::default() };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| assimilate(&e, &o, &schedule, forward, 17, &options, None).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.posterior, b.posterior);
    assert_eq!(a.predictions, b.predictions);
}

#[test]
fn empty_observations_leave_parameters_unchanged() {
    let e = prior(12, 2);
    let params = DMatrix::from_fn(e.geometry.n_cells(), e.len(), |i, j| e.members[j].log_perm[i]);
    let preds = DMatrix::zeros(0, e.len());
    let out = esmda_update(&params, &preds, &ObservationSet::default(), 4.0, 3, &UpdateOptions::default(), None).unwrap();
    assert_eq!(out, params);
    let schedule = geometric_schedule(2, 4.0).unwrap();
    let post = assimilate(&e, &ObservationSet::default(), &schedule, forward, 3, &AssimilationOptions::default(), None).unwrap();
    assert_eq!(post.posterior, e);
}

#[test]
fn assimilation_reduces_mismatch() {
    let e = prior(40, 5);
    let o = obs(&[4.0, 4.5, 5.0]);
    let out = assimilate(&e, &o, &geometric_schedule(4, 10.0).unwrap(), forward, 9, &AssimilationOptions { parameterization: Parameterization::AllCells, ..Default::default() }, None).unwrap();
    let (first, last) = (out.history.first().unwrap().mean, out.history.last().unwrap().mean);
    assert!(last < 0.1 * first, "{first} -> {last}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn factors_at_least_one(n in 1usize..=16, a1 in 1.01f64..1e4) {
        let s = geometric_schedule(n, a1).unwrap();
        prop_assert_eq!(s.alphas.len(), n);
        prop_assert!(s.alphas.iter().all(|a| *a >= 1.0 - 1e-12));
    }

    #[test]
    fn bounds_hold_after_update(seed in any::<u64>(), lo in -2.0f64..3.0, span in 0.5f64..4.0, target in -5.0f64..10.0) {
        let e = prior(16, seed);
        let params = DMatrix::from_fn(e.geometry.n_cells(), e.len(), |i, j| e.members[j].log_perm[i]);
        let preds = DMatrix::from_fn(3, e.len(), |i, j| forward(&e.members[j]).unwrap()[i]);
        let options = UpdateOptions { bounds: Some((lo, lo + span)), ..Default::default() };
        let out = esmda_update(&params, &preds, &obs(&[target; 3]), 2.0, seed, &options, None).unwrap();
        prop_assert!(out.iter().all(|x| *x >= lo && *x <= lo + span));
    }

    #[test]
    fn same_seed_same_posterior(seed in any::<u64>()) {
        let e = prior(10, 4);
        let geometry = Arc::clone(&e.geometry);
        let o = obs(&[4.0, 4.2, 4.4]);
        let s = geometric_schedule(2, 4.0).unwrap();
        let a = assimilate(&e, &o, &s, forward, seed, &AssimilationOptions::default(), None).unwrap();
        let b = assimilate(&e, &o, &s, forward, seed, &AssimilationOptions::default(), None).unwrap();
        prop_assert_eq!(&a.posterior, &b.posterior);
        prop_assert!(a.posterior.members.iter().all(|m| *m.geometry == *geometry));
    }
}
