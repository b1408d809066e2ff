//! Acceptance suite: one PASS/FAIL line per criterion. Runs as a plain
//! binary so the lines stay readable under `cargo test`.

mod common;

use common::{block_diag, c, dual_assembly, log_grid, max_frobenius_rel, modal_sum, newton_velocity, rms_rel};
use nalgebra::DMatrix;
use ssdss::analysis::{differentiate, eval_frf, eval_frf_at, poles};
use ssdss::bench::{
    make_assembly_analog, six_dof_band, six_dof_nonproportional, six_dof_truncated, truncate_modes, two_dof_chain,
    two_dof_chain_nonproportional, AssemblyAnalog, LumpedSystem,
};
use ssdss::coupling::{lm_couple, lm_decouple};
use ssdss::modal::{build_full, build_inband, cb_rcm_model, compute_cb, legacy_rcm_model, ur_rcm_model};
use ssdss::stabilize::{lsfd_solve, stabilize, LsfdProblem, StabilizeOptions, Weighting};
use ssdss::timesim::{
    foh_discretize, max_natural_frequency_hz, rms_deviation, simulate_many, sweep_signal, unfaded_range,
};
use ssdss::types::hz_to_rad;
use ssdss::{CMat, Domain, FrfSet, InterfaceMap, ModalModel, RMat, RcmConfig, StateSpaceModel};
use std::process::ExitCode;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn newton_enforcement() -> Outcome {
    let start = Instant::now();
    let m = six_dof_truncated().unwrap();
    let (lo, hi) = six_dof_band();
    let cfg = RcmConfig::for_band(lo, hi).unwrap();
    let model = build_full(&m, &cfg, true).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let cb = model.max_abs_cb();
    let omega_max = m.poles().iter().map(|p| p.norm()).fold(0.0, f64::max);
    let ok = cb <= 1e-10 && secs < 1.0 && cfg.omega_cb >= 10.0 * omega_max;
    outcome(ok, format!("max|C·B| = {cb:.2e} (≤ 1e-10), {secs:.3} s (< 1 s), ω_CB = 10×band top"))
}

fn cb_rcm_identity() -> Outcome {
    let m = six_dof_truncated().unwrap();
    let (lo, hi) = six_dof_band();
    let cfg = RcmConfig::for_band(lo, hi).unwrap();
    let cb = compute_cb(&build_full(&m, &cfg, false).unwrap()).unwrap();
    let vel = differentiate(&cb_rcm_model(&cb, cfg.omega_cb, cfg.xi_cb).unwrap()).unwrap();
    let grid = log_grid(lo, 3.0 * cfg.omega_cb, 512);
    let reference: Vec<CMat> = grid.iter().map(|&w| newton_velocity(&cb, cfg.omega_cb, cfg.xi_cb, w)).collect();
    let dev = max_frobenius_rel(eval_frf(&vel, &grid).unwrap().values(), &reference);
    outcome(dev <= 1e-10, format!("max rel deviation {dev:.2e} over 512 points (≤ 1e-10)"))
}

fn method_scaling() -> Outcome {
    let (lo, hi) = six_dof_band();
    let cfg = RcmConfig::for_band(lo, hi).unwrap();
    let cb = compute_cb(&build_full(&six_dof_truncated().unwrap(), &cfg, false).unwrap()).unwrap();
    let omega = hz_to_rad(500.0);
    let ratio = |m: &StateSpaceModel| eval_frf_at(&differentiate(m).unwrap(), omega).unwrap().norm() / cb.norm();
    let mut ok = true;
    let mut errs = Vec::new();
    for omega_cb in [hz_to_rad(1.5e4), hz_to_rad(7.5e3)] {
        let r = omega / omega_cb;
        let damped = ratio(&cb_rcm_model(&cb, omega_cb, 1e-6).unwrap());
        let legacy = ratio(&legacy_rcm_model(&cb, omega_cb).unwrap());
        ok &= damped <= r * r * 1.01 && legacy >= r * 0.99;
        errs.push((damped, legacy));
    }
    let (d, l) = (errs[1].0 / errs[0].0, errs[1].1 / errs[0].1);
    ok &= (d / 4.0 - 1.0).abs() <= 0.05 && (l / 2.0 - 1.0).abs() <= 0.05;
    outcome(
        ok,
        format!(
            "ω/ω_CB = 1/30: damped {:.3e} (≤ {:.3e}), legacy {:.3e} (≥ {:.3e}); halving ω_CB: ×{d:.3} and ×{l:.3}",
            errs[0].0,
            (1.0f64 / 30.0).powi(2) * 1.01,
            errs[0].1,
            0.99 / 30.0
        ),
    )
}

fn dual_reference(models: &[StateSpaceModel], map: &InterfaceMap, grid: &[f64]) -> Vec<CMat> {
    let pairs: Vec<(usize, usize)> = map.pairs().iter().map(|p| (p.plus_output, p.minus_output)).collect();
    grid.iter()
        .map(|&w| {
            let blocks: Vec<CMat> = models.iter().map(|m| eval_frf_at(m, w).unwrap()).collect();
            dual_assembly(&block_diag(&blocks), &pairs)
        })
        .collect()
}

fn coupling_oracle(fx: &AssemblyAnalog) -> Outcome {
    let full = |sys: &LumpedSystem, dofs: &[usize], cfg: &RcmConfig| {
        build_full(&sys.modal_model(dofs).unwrap(), cfg, true).unwrap()
    };
    let mut worst: f64 = 0.0;

    let chain_cfg = RcmConfig::for_band(1.0, 1e3).unwrap();
    let (a, b) =
        (full(&two_dof_chain(), &[0, 1], &chain_cfg), full(&two_dof_chain_nonproportional(), &[0, 1], &chain_cfg));
    let chain_map = InterfaceMap::from_pairs(4, &[1], &[2]).unwrap();
    let chain_grid = log_grid(5.0, 800.0, 200);
    let models = [a.clone(), b.clone()];
    let got = eval_frf(&lm_couple(&models, &chain_map).unwrap(), &chain_grid).unwrap();
    worst = worst.max(max_frobenius_rel(got.values(), &dual_reference(&models, &chain_map, &chain_grid)));

    let cfg = fx.rcm_config();
    let grid = log_grid(fx.band.0, fx.band.1, 120);
    let sub = |s: &ssdss::bench::Substructure| full(&s.system, &s.io, &cfg);
    let coupled = [sub(&fx.steel_a), sub(&fx.mount), sub(&fx.steel_b)];
    let got = eval_frf(&lm_couple(&coupled, &fx.couple_map).unwrap(), &grid).unwrap();
    worst = worst.max(max_frobenius_rel(got.values(), &dual_reference(&coupled, &fx.couple_map, &grid)));
    let decoupled = [sub(&fx.assembly_a), sub(&fx.alu_a).negated(), sub(&fx.alu_b).negated()];
    let got = eval_frf(&lm_couple(&decoupled, &fx.decouple_map).unwrap(), &grid).unwrap();
    worst = worst.max(max_frobenius_rel(got.values(), &dual_reference(&decoupled, &fx.decouple_map, &grid)));

    // Round trips: decouple a coupled part back out.
    let ab = lm_couple(&[a.clone(), b.clone()], &chain_map).unwrap();
    let back = lm_decouple(&ab, &[b], &InterfaceMap::from_pairs(6, &[2], &[4]).unwrap())
        .unwrap()
        .select_io(&[0, 1], &[0, 1])
        .unwrap();
    let mut trip =
        max_frobenius_rel(eval_frf(&back, &chain_grid).unwrap().values(), eval_frf(&a, &chain_grid).unwrap().values());
    let [sa, mount, sb] = coupled;
    let all = lm_couple(&[sa.clone(), mount.clone(), sb.clone()], &fx.couple_map).unwrap();
    let plus: Vec<usize> = (0..6).chain(18..24).collect();
    let minus: Vec<usize> = (24..36).collect();
    let io: Vec<usize> = (6..18).collect();
    let back = lm_decouple(&all, &[sa, sb], &InterfaceMap::from_pairs(36, &plus, &minus).unwrap())
        .unwrap()
        .select_io(&io, &io)
        .unwrap();
    trip = trip
        .max(max_frobenius_rel(eval_frf(&back, &grid).unwrap().values(), eval_frf(&mount, &grid).unwrap().values()));
    outcome(
        worst <= 1e-8 && trip <= 1e-6,
        format!("vs dual assembly {worst:.2e} (≤ 1e-8); round trip {trip:.2e} (≤ 1e-6)"),
    )
}

fn lsfd_recovery(fx: &AssemblyAnalog) -> Outcome {
    let rel = |a: &CMat, b: &CMat| (a - b).norm() / b.norm();
    let rel_r = |a: &RMat, b: &RMat| (a - b).norm() / b.norm();
    let (lo, hi) = six_dof_band();
    let asm = &fx.assembly_b;
    let fixtures: [(ModalModel, (f64, f64)); 2] = [
        (six_dof_truncated().unwrap(), (lo, hi)),
        (truncate_modes(&asm.modal().unwrap(), fx.band.0, fx.band.1).unwrap(), fx.band),
    ];
    let mut worst: f64 = 0.0;
    for (m, (lo, hi)) in &fixtures {
        let grid = log_grid(*lo, *hi, 300);
        let values = grid
            .iter()
            .map(|&w| {
                modal_sum(m.poles(), m.mode_shapes(), m.part_factors(), m.lower_residual(), m.upper_residual(), w)
            })
            .collect();
        let target = FrfSet::new(grid, values, Domain::Displacement).unwrap();
        for w in [Weighting::Displacement, Weighting::Velocity, Weighting::Acceleration] {
            let p = LsfdProblem::new(target.clone(), m.poles().to_vec(), m.part_factors().clone(), w).unwrap();
            let s = lsfd_solve(&p).unwrap();
            worst = worst
                .max(rel(&s.mode_shapes, m.mode_shapes()))
                .max(rel_r(&s.lower_residual, m.lower_residual()))
                .max(rel_r(&s.upper_residual, m.upper_residual()));
        }
    }
    outcome(worst <= 1e-8, format!("worst rel error of Ψ, LR, UR {worst:.2e} over 2 fixtures × 3 weightings (≤ 1e-8)"))
}

struct Stabilization {
    coupled: StateSpaceModel,
    stable: StateSpaceModel,
}

fn stabilization(fx: &AssemblyAnalog, seed: u64) -> (Outcome, Stabilization) {
    let p = fx.pipeline(0.01, seed).unwrap();
    let n_unstable = poles(&p.coupled).unwrap().iter().filter(|l| l.re > 0.0).count();
    let grid = log_grid(fx.band.0, fx.band.1, 400);
    let out = stabilize(&p.coupled, &grid, &StabilizeOptions::default()).unwrap();
    let max_re = poles(&out.model).unwrap().iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let before = eval_frf(&p.coupled, &grid).unwrap();
    let after = eval_frf(&out.model, &grid).unwrap();
    let dev_disp = rms_rel(after.values(), before.values());
    let acc = |f: &FrfSet| -> Vec<CMat> { f.values().iter().zip(&grid).map(|(h, w)| h * c(-w * w, 0.0)).collect() };
    let dev_acc = rms_rel(&acc(&after), &acc(&before));
    let added = out.model.n_states() as i64 - p.coupled.n_states() as i64;
    let bound = 6 * p.coupled.n_outputs().min(p.coupled.n_inputs()) as i64;
    let ok = n_unstable >= 1 && max_re < 0.0 && dev_disp <= 0.05 && dev_acc <= 0.05 && added <= bound;
    let detail = format!(
        "seed {seed}: {n_unstable} unstable of {} poles; max Re λ after = {max_re:.3e}; FRF rel-RMS deviation {dev_disp:.2e} (displacement), {dev_acc:.2e} (acceleration) (≤ 5%); +{added} states (≤ {bound})",
        p.coupled.n_states()
    );
    (outcome(ok, detail), Stabilization { coupled: p.coupled, stable: out.model })
}

fn time_domain(fx: &AssemblyAnalog, s: &Stabilization) -> Outcome {
    let acc = |m: &StateSpaceModel| differentiate(&differentiate(m).unwrap()).unwrap();
    let sys = &fx.assembly_b;
    let reference = acc(&sys.system.first_order(&sys.io).unwrap());
    let stable = acc(&s.stable);
    let fs = 2.5 * max_natural_frequency_hz(&stable).unwrap();
    let outputs: Vec<usize> = (0..12).collect();
    let dm = |m: &StateSpaceModel| foh_discretize(&m.select_io(&outputs, &[2]).unwrap(), fs).unwrap();
    let (dr, ds, du) = (dm(&reference), dm(&stable), dm(&acc(&s.coupled)));
    let fade = 0.05;
    let u = sweep_signal(20.0, 500.0, 1.0, fs, fade).unwrap();
    let u = DMatrix::from_row_slice(1, u.len(), &u);
    let sims = simulate_many(&[(&dr, &u), (&ds, &u), (&du, &u)]).unwrap();
    let dev = if sims[0].diverged() || sims[1].diverged() {
        f64::INFINITY
    } else {
        rms_deviation(&sims[1].outputs, &sims[0].outputs, unfaded_range(u.ncols(), fade)).unwrap()
    };
    let ok = !sims[1].diverged() && sims[2].diverged() && dev <= 0.05;
    outcome(
        ok,
        format!(
            "fs = {fs:.4e} Hz; stabilized diverged: {}; unstable diverged at sample {:?}; RMS deviation vs reference {dev:.2e} (≤ 5%)",
            sims[1].diverged(),
            sims[2].diverged_at
        ),
    )
}

fn fixture_systems(fx: &AssemblyAnalog) -> Vec<(String, LumpedSystem)> {
    let mut out = vec![
        ("two-dof-chain".to_string(), two_dof_chain()),
        ("two-dof-chain-nonproportional".to_string(), two_dof_chain_nonproportional()),
        ("six-dof-nonproportional".to_string(), six_dof_nonproportional()),
    ];
    for s in [&fx.alu_a, &fx.alu_b, &fx.steel_a, &fx.steel_b, &fx.mount, &fx.assembly_a, &fx.assembly_b] {
        out.push((s.name.clone(), s.system.clone()));
    }
    out
}

fn dc_and_proportional(fx: &AssemblyAnalog) -> Outcome {
    let (mut worst_dc, mut worst_cb): (f64, f64) = (0.0, 0.0);
    let systems = fixture_systems(fx);
    for (_, sys) in &systems {
        let dofs: Vec<usize> = (0..sys.n_dofs()).collect();
        let modal = sys.modal_model(&dofs).unwrap();
        let top = modal.poles().iter().map(|p| p.norm()).fold(0.0, f64::max);
        // Move the upper half of the spectrum into UR.
        let truncated = truncate_modes(&modal, 0.0, 0.5 * top).unwrap();
        let ur = truncated.upper_residual();
        let cfg = RcmConfig::for_band(1e-2 * top, 0.5 * top).unwrap();
        let h0 = eval_frf_at(&ur_rcm_model(ur, &cfg).unwrap(), 0.0).unwrap();
        worst_dc = worst_dc.max((h0 - ur.map(|x| c(x, 0.0))).norm() / ur.norm());

        let (m, k) = (sys.mass(), sys.stiffness());
        let w1 = modal.poles().iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min);
        let prop = LumpedSystem::new(m.clone(), m * (0.02 * w1) + k * (0.02 / top), k.clone()).unwrap();
        let inband = build_inband(&prop.modal_model(&dofs).unwrap());
        worst_cb = worst_cb.max(compute_cb(&inband).unwrap().abs().max() / inband.cb_scale());
    }
    outcome(
        worst_dc <= 1e-12 && worst_cb <= 1e-12,
        format!(
            "{} fixtures: |H(0) − UR|/|UR| ≤ {worst_dc:.2e}, proportional max|C·B| / term scale ≤ {worst_cb:.2e} (≤ 1e-12)",
            systems.len()
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let fx = make_assembly_analog();
    let mut results = vec![
        ("Newton enforcement", newton_enforcement()),
        ("CB-RCM velocity identity", cb_rcm_identity()),
        ("damped vs legacy scaling", method_scaling()),
        ("coupling oracle", coupling_oracle(&fx)),
        ("LSFD recovery", lsfd_recovery(&fx)),
    ];
    let (stab, models) = stabilization(&fx, 0);
    results.push(("stabilization end-to-end", stab));
    results.push(("time-domain sweep", time_domain(&fx, &models)));
    results.push(("UR DC exactness, proportional C·B", dc_and_proportional(&fx)));

    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!("criterion {} {}: {} ({})", i + 1, if o.pass { "PASS" } else { "FAIL" }, name, o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {}/{} passed in {:.1} s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
