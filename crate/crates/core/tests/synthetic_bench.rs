mod common;

use common::{c, log_grid, max_frobenius_rel, receptance};
use nalgebra::{Cholesky, SymmetricEigen};
use ssdss::analysis::poles;
use ssdss::bench::{
    make_assembly_analog, make_lumped, perturb, six_dof_band, six_dof_nonproportional, two_dof_chain,
    two_dof_chain_nonproportional, LumpedSystem, Substructure,
};
use ssdss::io::{from_json, to_json, Meta};
use ssdss::modal::modal_frf;
use ssdss::types::hz_to_rad;
use ssdss::{ModalModel, RMat};
use std::f64::consts::PI;

fn check_modal_against_inversion(sys: &LumpedSystem, dofs: &[usize], grid: &[f64]) -> f64 {
    let m = sys.modal_model(dofs).unwrap();
    let reference: Vec<_> =
        grid.iter().map(|&w| receptance(sys.mass(), sys.damping(), sys.stiffness(), w, dofs)).collect();
    max_frobenius_rel(modal_frf(&m, grid).unwrap().values(), &reference)
}

#[test]
fn every_fixture_matches_its_inversion_oracle() {
    let fx = make_assembly_analog();
    let grid = log_grid(fx.band.0, fx.band.1, 200);
    let subs: [&Substructure; 7] =
        [&fx.alu_a, &fx.alu_b, &fx.steel_a, &fx.steel_b, &fx.mount, &fx.assembly_a, &fx.assembly_b];
    for s in subs {
        let dev = check_modal_against_inversion(&s.system, &s.io, &grid);
        assert!(dev <= 1e-10, "{}: {dev}", s.name);
    }
    let chain_grid = log_grid(1.0, 1e3, 200);
    for sys in [two_dof_chain(), two_dof_chain_nonproportional()] {
        assert!(check_modal_against_inversion(&sys, &[0, 1], &chain_grid) <= 1e-10);
    }
    let (lo, hi) = six_dof_band();
    let dev =
        check_modal_against_inversion(&six_dof_nonproportional(), &(0..6).collect::<Vec<_>>(), &log_grid(lo, hi, 200));
    assert!(dev <= 1e-10, "{dev}");
}

/// Global matrices of the assemblies rebuilt by scattering the parts.
#[test]
fn assemblies_are_the_sum_of_their_parts() {
    let fx = make_assembly_analog();
    let n_mount = fx.mount.system.n_dofs();
    let n = fx.assembly_b.system.n_dofs();
    let scatter = |parts: &[(&LumpedSystem, Vec<usize>)], pick: fn(&LumpedSystem) -> &RMat| {
        let mut g = RMat::zeros(n, n);
        for (sys, map) in parts {
            let local = pick(sys);
            for (a, &i) in map.iter().enumerate() {
                for (b, &j) in map.iter().enumerate() {
                    g[(i, j)] += local[(a, b)];
                }
            }
        }
        g
    };
    // Cross DOFs [interface | arms] land on [mount side | arm block].
    let map_a: Vec<usize> = (0..6).chain(n_mount..n_mount + 6).collect();
    let map_b: Vec<usize> = (6..12).chain(n_mount + 6..n_mount + 12).collect();
    for (asm, xa, xb) in [(&fx.assembly_a, &fx.alu_a, &fx.alu_b), (&fx.assembly_b, &fx.steel_a, &fx.steel_b)] {
        let parts =
            [(&fx.mount.system, (0..n_mount).collect()), (&xa.system, map_a.clone()), (&xb.system, map_b.clone())];
        for pick in [LumpedSystem::mass as fn(&LumpedSystem) -> &RMat, LumpedSystem::damping, LumpedSystem::stiffness] {
            let reference = scatter(&parts, pick);
            assert!((pick(&asm.system) - &reference).norm() <= 1e-14 * reference.norm(), "{}", asm.name);
        }
    }
}

#[test]
fn crosses_are_rigid_in_band() {
    let fx = make_assembly_analog();
    for s in [&fx.alu_a, &fx.alu_b, &fx.steel_a, &fx.steel_b] {
        let (m, k) = (s.system.mass(), s.system.stiffness());
        let l_inv = Cholesky::new(m.clone()).unwrap().l().try_inverse().unwrap();
        let kt = &l_inv * k * l_inv.transpose();
        let mut w2: Vec<f64> = SymmetricEigen::new((&kt + kt.transpose()) * 0.5).eigenvalues.iter().copied().collect();
        w2.sort_by(f64::total_cmp);
        // Six suspension modes below the band, the arms above it.
        assert!(w2[5].sqrt() < fx.band.0, "{}", s.name);
        assert!(w2[6].sqrt() > 5.0 * fx.band.1, "{}: {}", s.name, w2[6].sqrt() / fx.band.1);
    }
}

#[test]
fn assemblies_are_reciprocal() {
    let fx = make_assembly_analog();
    let grid = log_grid(fx.band.0, fx.band.1, 100);
    for s in [&fx.assembly_a, &fx.assembly_b, &fx.mount] {
        let frf = modal_frf(&s.modal().unwrap(), &grid).unwrap();
        for h in frf.values() {
            assert!((h - h.transpose()).norm() <= 1e-12 * h.norm(), "{}", s.name);
        }
    }
}

#[test]
fn sdof_pole() {
    let (wn, xi) = (2.0 * PI * 10.0, 0.05);
    let (m, _) = make_lumped(
        RMat::from_element(1, 1, 1.0),
        RMat::from_element(1, 1, 2.0 * xi * wn),
        RMat::from_element(1, 1, wn * wn),
    )
    .unwrap();
    let expected = c(-xi * wn, wn * (1.0f64 - xi * xi).sqrt());
    assert_eq!(m.poles().len(), 1);
    assert!((m.poles()[0] - expected).norm() <= 1e-12 * wn);
}

#[test]
fn perturbation_is_seeded_and_leaves_poles() {
    let m = make_assembly_analog().assembly_a.modal().unwrap();
    assert_eq!(perturb(&m, 0.0, 7).unwrap(), m);
    let (a, b) = (perturb(&m, 0.01, 7).unwrap(), perturb(&m, 0.01, 7).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, perturb(&m, 0.01, 8).unwrap());
    assert_eq!(a.poles(), m.poles());
    // Every entry moves by at most √2·rel of its size.
    for (p, q) in a.mode_shapes().iter().zip(m.mode_shapes().iter()) {
        assert!((p - q).norm() <= 0.01 * 2f64.sqrt() * q.norm() * (1.0 + 1e-12));
    }
    assert!(perturb(&m, -0.1, 0).is_err());
}

#[test]
fn perturbed_pipeline_is_usually_unstable() {
    let fx = make_assembly_analog();
    let unstable = (0..50u64)
        .filter(|&seed| {
            let p = fx.pipeline(0.01, seed).unwrap();
            poles(&p.coupled).unwrap().iter().any(|l| l.re > 0.0)
        })
        .count();
    assert!(unstable >= 45, "{unstable} of 50 seeds unstable");
}

#[test]
fn fixtures_survive_json() {
    let fx = make_assembly_analog();
    let meta = Meta::new();
    for s in [&fx.mount, &fx.assembly_b] {
        let m = s.modal().unwrap();
        let (back, _) = from_json::<ModalModel>(&to_json(&m, &meta).unwrap()).unwrap();
        assert_eq!(back, m);
    }
    let (map, _) = from_json::<ssdss::InterfaceMap>(&to_json(&fx.couple_map, &meta).unwrap()).unwrap();
    assert_eq!(map, fx.couple_map);
}

#[test]
fn band_is_the_test_band() {
    let fx = make_assembly_analog();
    assert!((fx.band.0 - hz_to_rad(20.0)).abs() < 1e-12 && (fx.band.1 - hz_to_rad(500.0)).abs() < 1e-9);
}
