use std::collections::HashSet;

use super::linsolve::PressureSolver;
use super::props::{FluidRockProps, GRAVITY, SECONDS_PER_DAY};
use super::{
    Boundary, FlowError, InjectionSchedule, Result, SimOptions, SimStats, SimulationResult, Snapshot, WellKind, WellSpec,
    WellTrace,
};
use crate::geomodel::ReservoirModel;

struct Face {
    a: usize,
    b: usize,
    /// Geometric transmissibility including permeability [m^3].
    trans: f64,
    /// Depth of `a` minus depth of `b` [m].
    dd: f64,
}

struct BoundaryFace {
    cell: usize,
    trans: f64,
    pressure: f64,
}

struct Source {
    cell: usize,
    /// Share of the injection rate.
    weight: f64,
}

struct Engine<'a> {
    props: &'a FluidRockProps,
    faces: Vec<Face>,
    bfaces: Vec<BoundaryFace>,
    sources: Vec<Source>,
    /// V phi c_r per cell [m^3/Pa].
    storage: Vec<f64>,
    solver: PressureSolver,
    rho_c_pot: f64,
    lip_frac: f64,
    lip_grav: f64,
    // state
    p: Vec<f64>,
    vp: Vec<f64>,
    vc: Vec<f64>,
    vp0: Vec<f64>,
    injected: f64,
    outflux: f64,
    stats: SimStats,
    // scratch
    diag: Vec<f64>,
    off: Vec<f64>,
    rhs: Vec<f64>,
    ft: Vec<f64>,
    fb: Vec<f64>,
    grav: Vec<f64>,
    mob: Vec<(f64, f64)>,
    dv: Vec<f64>,
}

/// Runs the reservoir from hydrostatic, brine-filled initial conditions
/// through injection and shut-in.
pub fn simulate(
    model: &ReservoirModel,
    wells: &[WellSpec],
    schedule: &InjectionSchedule,
    props: &FluidRockProps,
    boundary: Boundary,
    options: &SimOptions,
) -> Result<SimulationResult> {
    simulate_with(model, wells, schedule, props, boundary, options, &mut |_, _, _| {})
}

/// Like [`simulate`], also handing the pressure and saturation fields of
/// every report `k` to `on_report(k, pressure, saturation)`.
pub fn simulate_with(
    model: &ReservoirModel,
    wells: &[WellSpec],
    schedule: &InjectionSchedule,
    props: &FluidRockProps,
    boundary: Boundary,
    options: &SimOptions,
    on_report: &mut dyn FnMut(usize, &[f64], &[f64]),
) -> Result<SimulationResult> {
    let g = &*model.geometry;
    props.validate()?;
    schedule.validate()?;
    if !(options.max_pressure_step_days > 0.0 && options.cfl > 0.0 && options.cfl <= 1.0) {
        return Err(FlowError::InvalidSchedule("pressure step must be positive and cfl in (0, 1]".into()));
    }
    let mut names = HashSet::new();
    for w in wells {
        w.validate(g)?;
        if !names.insert(w.name.as_str()) {
            return Err(FlowError::InvalidWell { well: w.name.clone(), reason: "duplicate name".into() });
        }
    }
    let injectors: Vec<&WellSpec> = wells.iter().filter(|w| w.kind == WellKind::Injector).collect();
    if injectors.len() != 1 {
        return Err(FlowError::InvalidWell { well: "<injector>".into(), reason: format!("expected exactly one injector, found {}", injectors.len()) });
    }

    let mut eng = Engine::new(model, injectors[0], props, boundary);
    let report_times = schedule.report_times();
    let inj_end = schedule.injection_days();
    let traces0: Vec<WellTrace> = wells
        .iter()
        .map(|w| {
            let cell = w.reference_cell(g);
            WellTrace {
                well: w.clone(),
                cell,
                initial_pressure: eng.p[cell],
                pressure: Vec::with_capacity(report_times.len()),
                saturation: Vec::with_capacity(report_times.len()),
            }
        })
        .collect();
    let mut result = SimulationResult {
        geometry: g.clone(),
        report_times: report_times.clone(),
        initial_pressure: eng.p.clone(),
        snapshots: Vec::new(),
        traces: traces0,
        cumulative_injected: Vec::with_capacity(report_times.len()),
        cumulative_outflux: Vec::with_capacity(report_times.len()),
        stored_mass_change: Vec::with_capacity(report_times.len()),
        mass_balance_residual: Vec::with_capacity(report_times.len()),
        stats: SimStats::default(),
    };

    let mut t = 0.0;
    let mut step = 0;
    for (k_report, &t_report) in report_times.iter().enumerate() {
        while t < t_report - 1e-9 {
            let mut t_next = (t + options.max_pressure_step_days).min(t_report);
            if t < inj_end - 1e-9 && t_next > inj_end + 1e-9 {
                t_next = inj_end;
            }
            let rate = if t < inj_end - 1e-9 { schedule.rate } else { 0.0 };
            eng.step((t_next - t) * SECONDS_PER_DAY, rate, options.cfl).map_err(|(iterations, relative_residual)| {
                FlowError::SolverFailure { time_days: t, step, iterations, relative_residual }
            })?;
            step += 1;
            t = t_next;
        }
        let sat = eng.saturation();
        for tr in &mut result.traces {
            tr.pressure.push(eng.p[tr.cell]);
            tr.saturation.push(sat[tr.cell]);
        }
        let dm = eng.stored_mass_change();
        let num = (eng.injected - dm - eng.outflux).abs();
        let den = eng.injected.abs().max(dm.abs() + eng.outflux.abs());
        result.mass_balance_residual.push(if num == 0.0 { 0.0 } else { num / den.max(f64::MIN_POSITIVE) });
        result.cumulative_injected.push(eng.injected);
        result.cumulative_outflux.push(eng.outflux);
        result.stored_mass_change.push(dm);
        on_report(k_report, &eng.p, &sat);
        if options.record_fields {
            result.snapshots.push(Snapshot { pressure: eng.p.clone(), saturation: sat });
        }
    }
    result.stats = eng.stats;
    Ok(result)
}

impl<'a> Engine<'a> {
    fn new(model: &ReservoirModel, injector: &WellSpec, props: &'a FluidRockProps, boundary: Boundary) -> Self {
        let g = &*model.geometry;
        let n = g.n_cells();
        let kh: Vec<f64> = (0..n).map(|c| model.perm_m2(c)).collect();
        let kv: Vec<f64> = kh.iter().map(|k| k * props.kv_kh).collect();
        let depth: Vec<f64> = (0..n).map(|c| g.cell_center_depth(c)).collect();
        let p: Vec<f64> = depth.iter().map(|d| props.hydrostatic_pressure(*d)).collect();

        let mut faces = Vec::with_capacity(3 * n);
        let mut bfaces = Vec::new();
        for c in 0..n {
            let (i, j, k) = g.ijk(c);
            let h = g.layer_thickness[k];
            if i + 1 < g.nx {
                let o = g.index(i + 1, j, k);
                let t = g.dy * h / (0.5 * g.dx / kh[c] + 0.5 * g.dx / kh[o]);
                faces.push(Face { a: c, b: o, trans: t, dd: depth[c] - depth[o] });
            }
            if j + 1 < g.ny {
                let o = g.index(i, j + 1, k);
                let t = g.dx * h / (0.5 * g.dy / kh[c] + 0.5 * g.dy / kh[o]);
                faces.push(Face { a: c, b: o, trans: t, dd: depth[c] - depth[o] });
            }
            if k + 1 < g.nz {
                let o = g.index(i, j, k + 1);
                let ho = g.layer_thickness[k + 1];
                let t = g.dx * g.dy / (0.5 * h / kv[c] + 0.5 * ho / kv[o]);
                faces.push(Face { a: c, b: o, trans: t, dd: depth[c] - depth[o] });
            }
            if boundary == Boundary::ConstantPressure {
                let tx = g.dy * h * kh[c] / (0.5 * g.dx);
                let ty = g.dx * h * kh[c] / (0.5 * g.dy);
                let count_x = usize::from(i == 0) + usize::from(i + 1 == g.nx);
                let count_y = usize::from(j == 0) + usize::from(j + 1 == g.ny);
                for _ in 0..count_x {
                    bfaces.push(BoundaryFace { cell: c, trans: tx, pressure: p[c] });
                }
                for _ in 0..count_y {
                    bfaces.push(BoundaryFace { cell: c, trans: ty, pressure: p[c] });
                }
            }
        }

        let layers = injector.layers(g.nz);
        let kh_sum: f64 = layers.iter().map(|&k| kh[g.index(injector.i, injector.j, k)] * g.layer_thickness[k]).sum();
        let sources = layers
            .iter()
            .map(|&k| {
                let cell = g.index(injector.i, injector.j, k);
                Source { cell, weight: kh[cell] * g.layer_thickness[k] / kh_sum }
            })
            .collect();

        let vp: Vec<f64> = (0..n).map(|c| g.cell_volume(g.ijk(c).2) * model.porosity[c]).collect();
        let storage = vp.iter().map(|v| v * props.rock_compressibility).collect();
        let solver = PressureSolver::new(g, faces.iter().map(|f| (f.a, f.b)).collect());
        let rho_c_pot = props.potential_rho_co2();
        let grav = faces.iter().map(|f| f.trans * (props.rho_brine - rho_c_pot) * GRAVITY * f.dd).collect();
        let (lip_frac, lip_grav) = props.transport_lipschitz();
        let nf = faces.len();
        let nb = bfaces.len();
        Self {
            props,
            faces,
            bfaces,
            sources,
            storage,
            solver,
            rho_c_pot,
            lip_frac,
            lip_grav,
            p,
            vp0: vp.clone(),
            vc: vec![0.0; n],
            vp,
            injected: 0.0,
            outflux: 0.0,
            stats: SimStats::default(),
            diag: vec![0.0; n],
            off: vec![0.0; nf],
            rhs: vec![0.0; n],
            ft: vec![0.0; nf],
            fb: vec![0.0; nb],
            grav,
            mob: vec![(0.0, 0.0); n],
            dv: vec![0.0; n],
        }
    }

    fn saturation(&self) -> Vec<f64> {
        self.vc.iter().zip(&self.vp).map(|(c, p)| (c / p).clamp(0.0, 1.0)).collect()
    }

    fn update_mobilities(&mut self, vp: impl Fn(usize) -> f64) {
        for c in 0..self.mob.len() {
            let s = (self.vc[c] / vp(c)).clamp(0.0, 1.0);
            self.mob[c] = self.props.mobilities(s);
        }
    }

    fn stored_mass_change(&self) -> f64 {
        let (rc, rb) = (self.props.rho_co2, self.props.rho_brine);
        let mut dm = 0.0;
        for c in 0..self.vc.len() {
            dm += rc * self.vc[c] + rb * ((self.vp[c] - self.vp0[c]) - self.vc[c]);
        }
        dm
    }

    /// One pressure step of `dt` seconds followed by saturation sub-steps.
    fn step(&mut self, dt: f64, rate: f64, cfl: f64) -> std::result::Result<(), (usize, f64)> {
        let props = self.props;
        let (rc, rb) = (props.rho_co2, props.rho_brine);
        let q_vol = rate / rc;
        {
            let vp = &self.vp;
            let vc = &self.vc;
            for c in 0..self.mob.len() {
                self.mob[c] = props.mobilities((vc[c] / vp[c]).clamp(0.0, 1.0));
            }
        }

        // pressure matrix with phase-potential upwinded mobilities
        for c in 0..self.diag.len() {
            self.diag[c] = self.storage[c] / dt;
            self.rhs[c] = self.storage[c] / dt * self.p[c];
        }
        for s in &self.sources {
            self.rhs[s.cell] += q_vol * s.weight;
        }
        let mut gterm = vec![0.0; self.faces.len()];
        for (f, face) in self.faces.iter().enumerate() {
            let dp = self.p[face.a] - self.p[face.b];
            let up_c = if dp - self.rho_c_pot * GRAVITY * face.dd >= 0.0 { face.a } else { face.b };
            let up_b = if dp - rb * GRAVITY * face.dd >= 0.0 { face.a } else { face.b };
            let (lc, lb) = (self.mob[up_c].0, self.mob[up_b].1);
            let w = face.trans * (lc + lb);
            let gf = face.trans * (lc * self.rho_c_pot + lb * rb) * GRAVITY * face.dd;
            self.off[f] = -w;
            self.diag[face.a] += w;
            self.diag[face.b] += w;
            self.rhs[face.a] += gf;
            self.rhs[face.b] -= gf;
            gterm[f] = gf;
        }
        let brine_inflow_mob = props.mobilities(0.0);
        let brine_inflow_mob = brine_inflow_mob.0 + brine_inflow_mob.1;
        let mut bw = vec![0.0; self.bfaces.len()];
        for (k, bf) in self.bfaces.iter().enumerate() {
            let (lc, lb) = self.mob[bf.cell];
            let lam = if self.p[bf.cell] >= bf.pressure { lc + lb } else { brine_inflow_mob };
            let w = bf.trans * lam;
            bw[k] = w;
            self.diag[bf.cell] += w;
            self.rhs[bf.cell] += w * bf.pressure;
        }
        let mut p_new = self.p.clone();
        let info = self
            .solver
            .solve(&self.diag, &self.off, &self.rhs, &mut p_new)
            .map_err(|e| (e.iterations, e.relative_residual))?;
        self.stats.pressure_solves += 1;
        self.stats.max_solver_iterations = self.stats.max_solver_iterations.max(info.iterations);
        self.stats.max_solver_residual = self.stats.max_solver_residual.max(info.relative_residual);

        // total fluxes and consistent pore volumes
        let mut div = vec![0.0; self.vp.len()];
        for s in &self.sources {
            div[s.cell] += q_vol * s.weight;
        }
        for (f, face) in self.faces.iter().enumerate() {
            let flux = -self.off[f] * (p_new[face.a] - p_new[face.b]) - gterm[f];
            self.ft[f] = flux;
            div[face.a] -= flux;
            div[face.b] += flux;
        }
        for (k, bf) in self.bfaces.iter().enumerate() {
            let flux = bw[k] * (p_new[bf.cell] - bf.pressure);
            self.fb[k] = flux;
            div[bf.cell] -= flux;
        }
        let vp_old = self.vp.clone();
        let vp_new: Vec<f64> = vp_old.iter().zip(&div).map(|(v, d)| v + dt * d).collect();

        // CFL-limited explicit transport
        let mut rate_bound = vec![0.0; self.vp.len()];
        for s in &self.sources {
            rate_bound[s.cell] += q_vol * s.weight;
        }
        for (f, face) in self.faces.iter().enumerate() {
            let r = self.lip_frac * self.ft[f].abs() + self.lip_grav * self.grav[f].abs();
            rate_bound[face.a] += r;
            rate_bound[face.b] += r;
        }
        for (k, bf) in self.bfaces.iter().enumerate() {
            rate_bound[bf.cell] += self.lip_frac * self.fb[k].abs();
        }
        let mut dt_cfl = f64::INFINITY;
        for c in 0..rate_bound.len() {
            if rate_bound[c] > 0.0 {
                dt_cfl = dt_cfl.min(cfl * vp_old[c].min(vp_new[c]) / rate_bound[c]);
            }
        }
        let nsub = if dt_cfl.is_finite() { (dt / dt_cfl).ceil().max(1.0) as usize } else { 1 };
        let dts = dt / nsub as f64;
        for sub in 0..nsub {
            if sub > 0 {
                let frac = sub as f64 / nsub as f64;
                self.update_mobilities(|c| vp_old[c] + frac * (vp_new[c] - vp_old[c]));
            }
            self.dv.iter_mut().for_each(|d| *d = 0.0);
            for s in &self.sources {
                self.dv[s.cell] += q_vol * s.weight;
            }
            for (f, face) in self.faces.iter().enumerate() {
                let fc = co2_flux(self.ft[f], self.grav[f], self.mob[face.a], self.mob[face.b]);
                self.dv[face.a] -= fc;
                self.dv[face.b] += fc;
            }
            let mut out_c = 0.0;
            let mut out_t = 0.0;
            for (k, bf) in self.bfaces.iter().enumerate() {
                let flux = self.fb[k];
                let fc = if flux > 0.0 {
                    let (lc, lb) = self.mob[bf.cell];
                    flux * lc / (lc + lb)
                } else {
                    0.0
                };
                self.dv[bf.cell] -= fc;
                out_c += fc;
                out_t += flux;
            }
            for (v, d) in self.vc.iter_mut().zip(&self.dv) {
                *v += dts * d;
            }
            self.outflux += dts * (rc * out_c + rb * (out_t - out_c));
        }
        self.stats.transport_substeps += nsub;
        debug_assert!(self.vc.iter().zip(&vp_new).all(|(c, p)| *c >= -1e-9 * p && *c <= p * (1.0 + 1e-9)));
        self.injected += rate * dt;
        self.vp = vp_new;
        self.p = p_new;
        Ok(())
    }
}

/// CO2 volumetric flux from `a` to `b` given the total flux `ft` and the
/// buoyancy term `grav = T (rho_b - rho_c) g (D_a - D_b)`, with each phase
/// upwinded by the sign of its own potential difference.
#[inline]
fn co2_flux(ft: f64, grav: f64, (lca, lba): (f64, f64), (lcb, lbb): (f64, f64)) -> f64 {
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    if grav >= 0.0 {
        let x = ratio(ft + lba * grav, lca + lba);
        if x - grav >= 0.0 {
            return lca * x;
        }
        let x = ratio(ft + lbb * grav, lcb + lbb);
        if x <= 0.0 {
            return lcb * x;
        }
        lca * ratio(ft + lbb * grav, lca + lbb)
    } else {
        let x = ratio(ft + lba * grav, lca + lba);
        if x >= 0.0 {
            return lca * x;
        }
        let x = ratio(ft + lbb * grav, lcb + lbb);
        if x - grav <= 0.0 {
            return lcb * x;
        }
        lcb * ratio(ft + lba * grav, lcb + lba)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::flowsim::{MONTH_DAYS, MT_PER_YEAR};
    use crate::geomodel::GridGeometry;

    fn model(nx: usize, nz: usize, logk: f64) -> ReservoirModel {
        let g = Arc::new(GridGeometry::uniform(nx, nx, nz, 200.0 * nx as f64, 200.0 * nx as f64, 10.0 * nz as f64, 1000.0).unwrap());
        let n = g.n_cells();
        ReservoirModel::new(0, g, vec![logk; n], vec![0.2; n]).unwrap()
    }

    fn center_wells(nx: usize) -> Vec<WellSpec> {
        vec![WellSpec::new("INJ", nx / 2, nx / 2, WellKind::Injector), WellSpec::new("OBS", 0, 0, WellKind::Monitor)]
    }

    fn schedule(rate: f64, inj: f64, post: f64) -> InjectionSchedule {
        InjectionSchedule { rate, injection_years: inj, post_injection_years: post, report_interval_days: MONTH_DAYS }
    }

    fn recorded() -> SimOptions {
        SimOptions { record_fields: true, ..Default::default() }
    }

    #[test]
    fn co2_flux_reduces_to_fractional_flow_without_gravity() {
        let a = (2.0, 6.0);
        let b = (1.0, 9.0);
        assert!((co2_flux(4.0, 0.0, a, b) - 4.0 * 0.25).abs() < 1e-15);
        assert!((co2_flux(-5.0, 0.0, a, b) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn buoyancy_drives_counter_current_flow() {
        // a below b with no net flux: CO2 rises, brine sinks
        assert!(co2_flux(0.0, 2.0, (1.0, 1.0), (1.0, 1.0)) > 0.0);
        assert_eq!(co2_flux(0.0, 2.0, (0.0, 1.0), (0.0, 1.0)), 0.0);
    }

    #[test]
    fn zero_rate_keeps_hydrostatic_state() {
        let m = model(5, 2, 4.0);
        let r = simulate(&m, &center_wells(5), &schedule(0.0, 1.0, 1.0), &FluidRockProps::default(), Boundary::ConstantPressure, &recorded()).unwrap();
        assert_eq!(r.snapshots.len(), 24);
        for s in &r.snapshots {
            assert!(s.saturation.iter().all(|x| *x == 0.0));
            for (p, p0) in s.pressure.iter().zip(&r.initial_pressure) {
                assert!((p - p0).abs() <= 1e-6 * p0);
            }
        }
        // initial condition increases with depth
        let nc = m.geometry.n_columns();
        assert!(r.initial_pressure[nc] > r.initial_pressure[0]);
    }

    #[test]
    fn mass_balance_against_cell_summation() {
        let m = model(5, 1, 4.0);
        let g = &*m.geometry;
        let props = FluidRockProps::default();
        let s = InjectionSchedule { rate: 5.0, injection_years: 10.0 * 30.0 / 365.25, post_injection_years: 0.0, report_interval_days: 30.0 };
        let r = simulate(&m, &center_wells(5), &s, &props, Boundary::NoFlow, &recorded()).unwrap();
        assert_eq!(r.report_times.len(), 10);
        for (k, snap) in r.snapshots.iter().enumerate() {
            // pore volume follows p through the rock compressibility
            let mut dm = 0.0;
            for c in 0..g.n_cells() {
                let v0 = g.cell_volume(0) * m.porosity[c];
                let v = v0 * (1.0 + props.rock_compressibility * (snap.pressure[c] - r.initial_pressure[c]));
                let sat = snap.saturation[c];
                dm += v * (sat * props.rho_co2 + (1.0 - sat) * props.rho_brine) - v0 * props.rho_brine;
            }
            let injected = s.rate * r.report_times[k] * SECONDS_PER_DAY;
            assert!((injected - dm).abs() <= 1e-6 * injected, "step {k}: {injected} vs {dm}");
            assert!(r.mass_balance_residual[k] <= 1e-6);
        }
    }

    #[test]
    fn saturation_plume_grows_during_injection() {
        let m = model(7, 2, 5.0);
        let r = simulate(&m, &center_wells(7), &schedule(0.2 * MT_PER_YEAR, 2.0, 0.0), &FluidRockProps::default(), Boundary::ConstantPressure, &recorded()).unwrap();
        let mut prev: Vec<bool> = vec![false; m.geometry.n_cells()];
        for s in &r.snapshots {
            assert!(s.saturation.iter().all(|x| (0.0..=1.0).contains(x)));
            let cur: Vec<bool> = s.saturation.iter().map(|x| *x > 1e-3).collect();
            assert!(prev.iter().zip(&cur).all(|(p, c)| !p || *c));
            prev = cur;
        }
        assert!(prev.iter().filter(|b| **b).count() > 1);
    }

    #[test]
    fn halving_the_pressure_step_barely_changes_outflux() {
        let m = model(5, 1, 4.0);
        let s = schedule(0.05 * MT_PER_YEAR, 1.0, 1.0);
        let run = |dt: f64| {
            let o = SimOptions { max_pressure_step_days: dt, ..Default::default() };
            let r = simulate(&m, &center_wells(5), &s, &FluidRockProps::default(), Boundary::ConstantPressure, &o).unwrap();
            *r.cumulative_outflux.last().unwrap()
        };
        let a = run(MONTH_DAYS);
        let b = run(MONTH_DAYS / 2.0);
        assert!(a > 0.0);
        assert!((a - b).abs() < 0.01 * a.abs(), "{a} vs {b}");
    }

    #[test]
    fn overpressure_dissipates_after_shut_in() {
        let m = model(7, 2, 4.5);
        // without buoyancy a resting CO2 column carries no excess pressure
        let props = FluidRockProps { gravity: false, ..Default::default() };
        let r = simulate(&m, &center_wells(7), &schedule(0.2 * MT_PER_YEAR, 1.0, 2.0), &props, Boundary::ConstantPressure, &recorded()).unwrap();
        let over = |k: usize| {
            r.snapshots[k].pressure.iter().zip(&r.initial_pressure).map(|(p, p0)| (p - p0).abs()).fold(0.0, f64::max)
        };
        assert!(over(11) > 1e5);
        assert!(over(35) < 1e-3 * over(11));
    }

    #[test]
    fn closed_reservoir_reaches_steady_pressure() {
        let m = model(5, 2, 4.5);
        let props = FluidRockProps { gravity: false, ..Default::default() };
        let r = simulate(&m, &center_wells(5), &schedule(0.05 * MT_PER_YEAR, 1.0, 3.0), &props, Boundary::NoFlow, &SimOptions::default()).unwrap();
        let tr = r.trace("OBS").unwrap();
        let n = tr.pressure.len();
        let late = (tr.pressure[n - 1] - tr.pressure[n - 2]).abs();
        let early = (tr.pressure[1] - tr.pressure[0]).abs();
        assert!(tr.pressure[n - 1] > tr.initial_pressure);
        assert!(late < 1e-6 * early.max(1.0));
    }

    #[test]
    fn gravity_lifts_co2_to_the_top_layer() {
        let m = model(5, 3, 5.0);
        let mut w = center_wells(5);
        w[0].completion = vec![2];
        let s = schedule(0.02 * MT_PER_YEAR, 0.5, 2.0);
        let top = |gravity: bool| {
            let props = FluidRockProps { gravity, kv_kh: 1.0, ..Default::default() };
            let r = simulate(&m, &w, &s, &props, Boundary::ConstantPressure, &recorded()).unwrap();
            let snap = r.snapshots.last().unwrap();
            snap.saturation[m.geometry.index(2, 2, 0)]
        };
        assert!(top(true) > top(false) + 0.05);
    }

    #[test]
    fn example_schedule_reports_monthly() {
        let m = model(5, 1, 4.0);
        let r = simulate(&m, &center_wells(5), &schedule(MT_PER_YEAR, 5.0, 10.0), &FluidRockProps::default(), Boundary::ConstantPressure, &SimOptions::default()).unwrap();
        assert_eq!(r.report_times.len(), 180);
        assert_eq!(r.trace("OBS").unwrap().pressure.len(), 180);
        assert!(r.max_mass_balance_residual() <= 1e-6);
    }

    #[test]
    fn rejects_missing_or_duplicate_injector() {
        let m = model(5, 1, 4.0);
        let s = schedule(1.0, 1.0, 0.0);
        let w = vec![WellSpec::new("OBS", 0, 0, WellKind::Monitor)];
        assert!(simulate(&m, &w, &s, &FluidRockProps::default(), Boundary::NoFlow, &SimOptions::default()).is_err());
        let mut w = center_wells(5);
        w.push(WellSpec::new("OBS", 1, 1, WellKind::Monitor));
        assert!(simulate(&m, &w, &s, &FluidRockProps::default(), Boundary::NoFlow, &SimOptions::default()).is_err());
    }
}
