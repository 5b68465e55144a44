use std::sync::Arc;

use co2risk_core::flowsim::{simulate, Boundary, FluidRockProps, InjectionSchedule, SimOptions, WellKind, WellSpec, MONTH_DAYS, MT_PER_YEAR};
use co2risk_core::geomodel::{sample_field, GridGeometry, ReservoirModel, VariogramSpec};
use proptest::prelude::*;

fn model(seed: u64, n: usize, nz: usize) -> ReservoirModel {
    let g = Arc::new(GridGeometry::uniform(n, n, nz, 200.0 * n as f64, 200.0 * n as f64, 10.0 * nz as f64, 1000.0).unwrap());
    let v = VariogramSpec { range_x: 400.0, range_y: 400.0, sill: 1.0, mean_logk: 100f64.ln(), ..Default::default() };
    let log_perm = sample_field(&g, &v, seed).unwrap();
    let cells = g.n_cells();
    ReservoirModel::new(0, g, log_perm, vec![0.2; cells]).unwrap()
}

fn wells(n: usize) -> Vec<WellSpec> {
    vec![WellSpec::new("INJ", n / 2, n / 2, WellKind::Injector), WellSpec::new("OBS", 0, n - 1, WellKind::Monitor)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bounded_saturation_conserved_mass_and_growing_plume(
        seed in any::<u64>(),
        rate in 0.01f64..0.3,
        constant_pressure in any::<bool>(),
        gravity in any::<bool>(),
    ) {
        let m = model(seed, 5, 2);
        let schedule = InjectionSchedule { rate: rate * MT_PER_YEAR, injection_years: 1.0, post_injection_years: 0.5, report_interval_days: MONTH_DAYS };
        let props = FluidRockProps { gravity, ..Default::default() };
        let boundary = if constant_pressure { Boundary::ConstantPressure } else { Boundary::NoFlow };
        let r = simulate(&m, &wells(5), &schedule, &props, boundary, &SimOptions { record_fields: true, ..Default::default() }).unwrap();

        prop_assert_eq!(r.report_times.len(), schedule.n_reports());
        for (k, t) in r.report_times.iter().enumerate() {
            prop_assert!((t - (k + 1) as f64 * MONTH_DAYS).abs() < 1e-9);
        }
        for tr in &r.traces {
            prop_assert_eq!(tr.pressure.len(), r.report_times.len());
            prop_assert_eq!(tr.saturation.len(), r.report_times.len());
        }
        prop_assert!(r.max_mass_balance_residual() <= 1e-6);

        let eps = 1e-3;
        let mut plume = vec![false; m.geometry.n_cells()];
        for (snap, t) in r.snapshots.iter().zip(&r.report_times) {
            prop_assert!(snap.saturation.iter().all(|s| (0.0..=1.0).contains(s)));
            if *t <= schedule.injection_days() + 1e-9 {
                for (c, s) in snap.saturation.iter().enumerate() {
                    prop_assert!(!plume[c] || *s > eps, "cell {} left the plume at t={}", c, t);
                    plume[c] |= *s > eps;
                }
            }
        }
    }
}

#[test]
fn constant_pressure_overpressure_decays_after_shut_in() {
    let m = model(4, 5, 1);
    let schedule = InjectionSchedule { rate: 0.2 * MT_PER_YEAR, injection_years: 1.0, post_injection_years: 3.0, report_interval_days: MONTH_DAYS };
    let props = FluidRockProps { gravity: false, ..Default::default() };
    let r = simulate(&m, &wells(5), &schedule, &props, Boundary::ConstantPressure, &SimOptions::default()).unwrap();
    let inj = r.trace("INJ").unwrap();
    let at_shut_in = inj.pressure[11] - inj.initial_pressure;
    let last = inj.pressure.last().unwrap() - inj.initial_pressure;
    assert!(at_shut_in > 0.0);
    assert!(last.abs() < 1e-3 * at_shut_in, "{last} vs {at_shut_in}");
}

#[test]
fn identical_inputs_give_identical_results() {
    let m = model(9, 5, 2);
    let schedule = InjectionSchedule { rate: 0.1 * MT_PER_YEAR, injection_years: 0.5, post_injection_years: 0.5, report_interval_days: MONTH_DAYS };
    let run = || simulate(&m, &wells(5), &schedule, &FluidRockProps::default(), Boundary::ConstantPressure, &SimOptions::default()).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.traces, b.traces);
    assert_eq!(a.cumulative_outflux, b.cumulative_outflux);
}
