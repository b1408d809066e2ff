//! Synthetic ground truth: lumped mass-spring-damper substructures with
//! exact modal decompositions and direct-inversion FRF oracles, an analog of
//! the two-crosses-and-a-mount test bench, and seeded perturbations.

use nalgebra::{Cholesky, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{diagonalize, pair_structure, PoleGroup};
use crate::coupling::{lm_couple, lm_decouple};
use crate::error::{Error, Result};
use crate::frf::{validate_grid, FrfSet};
use crate::modal::build_full;
use crate::types::{
    check_indices, hz_to_rad, CMat, Domain, InterfaceMap, ModalModel, RMat, RcmConfig, Representation, StateSpaceModel,
};

/// Second-order system `M ẍ + C ẋ + K x = f` with symmetric matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct LumpedSystem {
    mass: RMat,
    damping: RMat,
    stiffness: RMat,
}

fn is_symmetric(m: &RMat) -> bool {
    let scale = m.iter().map(|x| x.abs()).fold(0.0, f64::max);
    (m - m.transpose()).iter().all(|x| x.abs() <= 1e-12 * scale)
}

impl LumpedSystem {
    pub fn new(mass: RMat, damping: RMat, stiffness: RMat) -> Result<Self> {
        let n = mass.nrows();
        for (name, m) in [("mass", &mass), ("damping", &damping), ("stiffness", &stiffness)] {
            if m.shape() != (n, n) {
                return Err(Error::Dimension(format!("{name} matrix is {:?}, expected {n}×{n}", m.shape())));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} matrix has non-finite entries")));
            }
            if !is_symmetric(m) {
                return Err(Error::InvalidParameter(format!("{name} matrix is not symmetric")));
            }
        }
        if Cholesky::new(mass.clone()).is_none() {
            return Err(Error::InvalidParameter("mass matrix is not positive definite".into()));
        }
        if n > 0 {
            let eig = SymmetricEigen::new(stiffness.clone()).eigenvalues;
            let max = eig.iter().map(|x| x.abs()).fold(0.0, f64::max);
            if eig.iter().any(|&x| x < -1e-12 * max) {
                return Err(Error::InvalidParameter("stiffness matrix is not positive semidefinite".into()));
            }
        }
        Ok(Self { mass, damping, stiffness })
    }

    pub fn mass(&self) -> &RMat {
        &self.mass
    }
    pub fn damping(&self) -> &RMat {
        &self.damping
    }
    pub fn stiffness(&self) -> &RMat {
        &self.stiffness
    }
    pub fn n_dofs(&self) -> usize {
        self.mass.nrows()
    }

    /// `(−ω²M + jωC + K)⁻¹` restricted to `dofs` (rows and columns).
    pub fn receptance_at(&self, omega: f64, dofs: &[usize]) -> Result<CMat> {
        check_indices(dofs, self.n_dofs(), "DOF")?;
        let z = CMat::from_fn(self.n_dofs(), self.n_dofs(), |i, j| {
            Complex64::new(self.stiffness[(i, j)] - omega * omega * self.mass[(i, j)], omega * self.damping[(i, j)])
        });
        let inv = z
            .try_inverse()
            .ok_or_else(|| Error::Singular { what: "dynamic stiffness matrix".into(), omega: Some(omega) })?;
        Ok(inv.select_rows(dofs).select_columns(dofs))
    }

    /// Direct-inversion displacement FRFs on a grid.
    pub fn receptance(&self, grid: &[f64], dofs: &[usize]) -> Result<FrfSet> {
        validate_grid(grid)?;
        let values = grid.par_iter().map(|&w| self.receptance_at(w, dofs)).collect::<Result<Vec<_>>>()?;
        FrfSet::new(grid.to_vec(), values, Domain::Displacement)
    }

    /// First-order realization, forces in and displacements out at `dofs`.
    ///
    /// The state is expressed in undamped modal coordinates `q` (mass
    /// normalized) and scaled velocities `q̇ᵢ/ωᵢ`, which makes the system
    /// matrix close to normal and its eigenvectors well conditioned.
    pub fn first_order(&self, dofs: &[usize]) -> Result<StateSpaceModel> {
        check_indices(dofs, self.n_dofs(), "DOF")?;
        let n = self.n_dofs();
        let chol = Cholesky::new(self.mass.clone()).expect("mass matrix checked positive definite");
        let l_inv = chol.l().try_inverse().expect("Cholesky factor is invertible");
        let k_t = &l_inv * &self.stiffness * l_inv.transpose();
        let eig = SymmetricEigen::new((&k_t + k_t.transpose()) * 0.5);
        // x = Tq with T = L⁻ᵀΦ, so TᵀMT = I and TᵀKT = diag(ω²).
        let t = l_inv.transpose() * &eig.eigenvectors;
        let c_hat = t.transpose() * &self.damping * &t;
        let k_max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let scale: Vec<f64> =
            eig.eigenvalues.iter().map(|&w2| if w2 > 1e-12 * k_max { w2.sqrt() } else { 1.0 }).collect();

        let mut a = RMat::zeros(2 * n, 2 * n);
        for i in 0..n {
            a[(i, n + i)] = scale[i];
            a[(n + i, i)] = -eig.eigenvalues[i].max(0.0) / scale[i];
            for j in 0..n {
                a[(n + i, n + j)] = -c_hat[(i, j)] * scale[j] / scale[i];
            }
        }
        let mut b = RMat::zeros(2 * n, dofs.len());
        for (col, &d) in dofs.iter().enumerate() {
            for i in 0..n {
                b[(n + i, col)] = t[(d, i)] / scale[i];
            }
        }
        let mut c = RMat::zeros(dofs.len(), 2 * n);
        for (row, &d) in dofs.iter().enumerate() {
            for i in 0..n {
                c[(row, i)] = t[(d, i)];
            }
        }
        let cplx = |m: RMat| m.map(|x| Complex64::new(x, 0.0));
        StateSpaceModel::strictly_proper(cplx(a), cplx(b), cplx(c), Domain::Displacement, Representation::RealValued)
    }

    /// Complete modal model (every mode, no residuals) seen from `dofs`.
    ///
    /// Poles, mode shapes and participation factors come from the
    /// eigendecomposition of the first-order form, so the modal sum
    /// reproduces the direct inversion. Critically or over-damped modes are
    /// rejected.
    pub fn modal_model(&self, dofs: &[usize]) -> Result<ModalModel> {
        let dm = diagonalize(&self.first_order(dofs)?)?;
        let poles = dm.diagonal_poles();
        let mut keep = Vec::new();
        for g in pair_structure(&poles) {
            match g {
                PoleGroup::Pair { pos, .. } => keep.push(pos),
                PoleGroup::Real(k) | PoleGroup::Unpaired(k) => {
                    return Err(Error::InvalidParameter(format!(
                        "mode with pole {} is critically or over-damped (ξ ≥ 1)",
                        poles[k]
                    )));
                }
            }
        }
        keep.sort_by(|&i, &j| poles[i].norm().total_cmp(&poles[j].norm()));
        ModalModel::without_residuals(
            keep.iter().map(|&k| poles[k]).collect(),
            dm.c().select_columns(&keep),
            dm.b().select_rows(&keep),
        )
    }
}

/// Modal model and direct-inversion oracle of a lumped system, with every
/// DOF as input and output.
pub fn make_lumped(mass: RMat, damping: RMat, stiffness: RMat) -> Result<(ModalModel, LumpedSystem)> {
    let sys = LumpedSystem::new(mass, damping, stiffness)?;
    let dofs: Vec<usize> = (0..sys.n_dofs()).collect();
    Ok((sys.modal_model(&dofs)?, sys))
}

/// Moves modes outside `[omega_lo, omega_hi]` (by `|λ|`) into the residual
/// matrices: modes below the band contribute `Σ 2Re(ψlλ)` to the lower
/// residual, modes above contribute their static value `Σ 2Re(−ψl/λ)` to
/// the upper residual.
pub fn truncate_modes(model: &ModalModel, omega_lo: f64, omega_hi: f64) -> Result<ModalModel> {
    let mut lr = model.lower_residual().clone();
    let mut ur = model.upper_residual().clone();
    for (r, &lambda) in model.poles().iter().enumerate() {
        let w = lambda.norm();
        if w >= omega_lo && w <= omega_hi {
            continue;
        }
        let residue = model.mode_shapes().column(r) * model.part_factors().row(r);
        let weight = if w < omega_lo { lambda } else { -lambda.inv() };
        let term = (residue * weight).map(|z| 2.0 * z.re);
        if w < omega_lo {
            lr += term;
        } else {
            ur += term;
        }
    }
    let kept = model.retain_modes(|_, p| p.norm() >= omega_lo && p.norm() <= omega_hi);
    kept.with_residuals(lr, ur)
}

/// Multiplies every mode-shape and participation-factor entry by
/// `1 + rel·(u₁ + j·u₂)` with `u₁, u₂` uniform on `[−1, 1]`.
///
/// Draws come from ChaCha8 seeded through `SeedableRng::seed_from_u64`,
/// two per entry, mode shapes first (column-major) then participation
/// factors (column-major). Poles and residuals are untouched.
pub fn perturb(model: &ModalModel, rel: f64, seed: u64) -> Result<ModalModel> {
    if !(rel >= 0.0 && rel.is_finite()) {
        return Err(Error::InvalidParameter(format!("perturbation level {rel} must be non-negative")));
    }
    if rel == 0.0 {
        return Ok(model.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut factor = || {
        let u1: f64 = rng.random_range(-1.0..=1.0);
        let u2: f64 = rng.random_range(-1.0..=1.0);
        Complex64::new(1.0 + rel * u1, rel * u2)
    };
    let mut shapes = model.mode_shapes().clone();
    shapes.iter_mut().for_each(|z| *z *= factor());
    let mut factors = model.part_factors().clone();
    factors.iter_mut().for_each(|z| *z *= factor());
    ModalModel::new(
        model.poles().to_vec(),
        shapes,
        factors,
        model.lower_residual().clone(),
        model.upper_residual().clone(),
    )
}

/// Adds local matrices into global ones at the given DOF map.
#[derive(Clone, Debug)]
struct Assembler {
    m: RMat,
    c: RMat,
    k: RMat,
}

impl Assembler {
    fn new(n: usize) -> Self {
        Self { m: RMat::zeros(n, n), c: RMat::zeros(n, n), k: RMat::zeros(n, n) }
    }

    fn mass(&mut self, i: usize, m: f64) {
        self.m[(i, i)] += m;
    }

    /// Spring and damper between two DOFs.
    fn link(&mut self, i: usize, j: usize, k: f64, c: f64) {
        for (mat, v) in [(&mut self.k, k), (&mut self.c, c)] {
            mat[(i, i)] += v;
            mat[(j, j)] += v;
            mat[(i, j)] -= v;
            mat[(j, i)] -= v;
        }
    }

    /// Spring and damper from a DOF to ground.
    fn ground(&mut self, i: usize, k: f64, c: f64) {
        self.k[(i, i)] += k;
        self.c[(i, i)] += c;
    }

    fn add(&mut self, sys: &LumpedSystem, map: &[usize]) {
        for (a, &i) in map.iter().enumerate() {
            for (b, &j) in map.iter().enumerate() {
                self.m[(i, j)] += sys.mass[(a, b)];
                self.c[(i, j)] += sys.damping[(a, b)];
                self.k[(i, j)] += sys.stiffness[(a, b)];
            }
        }
    }

    fn finish(self) -> LumpedSystem {
        LumpedSystem::new(self.m, self.c, self.k).expect("fixture matrices are valid by construction")
    }
}

/// A lumped substructure together with the DOFs used as its inputs and
/// outputs.
#[derive(Clone, Debug)]
pub struct Substructure {
    pub name: String,
    pub system: LumpedSystem,
    pub io: Vec<usize>,
}

impl Substructure {
    pub fn modal(&self) -> Result<ModalModel> {
        self.system.modal_model(&self.io)
    }

    pub fn receptance(&self, grid: &[f64]) -> Result<FrfSet> {
        self.system.receptance(grid, &self.io)
    }

    pub fn n_io(&self) -> usize {
        self.io.len()
    }
}

/// Lumped analog of two six-DOF crosses joined by a soft mount.
///
/// Assembly DOFs are ordered `[side A (6) | side B (6) | mount interior (6)
/// | arms A (6) | arms B (6)]`; the assembly and mount are observed on both
/// sides (12 I/O), each cross on its 6 interface DOFs.
#[derive(Clone, Debug)]
pub struct AssemblyAnalog {
    pub alu_a: Substructure,
    pub alu_b: Substructure,
    pub steel_a: Substructure,
    pub steel_b: Substructure,
    pub mount: Substructure,
    pub assembly_a: Substructure,
    pub assembly_b: Substructure,
    /// Over the stacked outputs `[assembly A (12), alu A (6), alu B (6)]`.
    pub decouple_map: InterfaceMap,
    /// Over the stacked outputs `[steel A (6), mount (12), steel B (6)]`.
    pub couple_map: InterfaceMap,
    /// Outputs of the coupled model that correspond to assembly B's I/O.
    pub coupled_io: Vec<usize>,
    /// Band of interest in rad/s.
    pub band: (f64, f64),
}

const CROSS_NODES: usize = 6;
const MOUNT_INTERIOR: usize = 6;

/// Cross analog: six interface DOFs carrying a coupled, well-conditioned
/// inertia (the rigid-body behaviour seen at a six-DOF connection point) on
/// a soft suspension, plus one internal arm mass per interface DOF on a
/// stiff spring, whose modes sit well above the band. Arm loss factors
/// differ per spring, so the damping is not proportional. DOFs are `[interface (6) | arms (6)]`.
fn cross(vp_mass: f64, arm_hz: f64, suspension_hz: f64, seed_offset: usize) -> LumpedSystem {
    let arm_stiffness = 0.3 * vp_mass * hz_to_rad(arm_hz).powi(2);
    let n = CROSS_NODES;
    let mut asm = Assembler::new(2 * n);
    for i in 0..n {
        let m = vp_mass * (1.0 + 0.3 * (((i + seed_offset) * 5 % 7) as f64 / 6.0 - 0.5));
        asm.mass(i, m);
        let f = suspension_hz * (1.0 + 0.3 * ((i * 4 + seed_offset) % 6) as f64);
        asm.ground(i, m * hz_to_rad(f).powi(2), 0.05 * m);
        for j in (i + 1)..n {
            let c = 0.05 * vp_mass * ((((i * 3 + j + seed_offset) % 3) as f64) - 1.0);
            asm.m[(i, j)] += c;
            asm.m[(j, i)] += c;
        }
        asm.mass(n + i, 0.3 * vp_mass);
    }
    for i in 0..n {
        let k = arm_stiffness * (0.8 + 0.4 * (((i * 7 + seed_offset) % 5) as f64 / 4.0));
        let eta = 4e-6 * (1.0 + ((i + seed_offset) % 4) as f64);
        asm.link(i, n + i, k, eta * k);
    }
    asm.finish()
}

fn mount_into(asm: &mut Assembler, p: &AnalogParams, side_a: &[usize], side_b: &[usize], interior: &[usize]) {
    let k = p.mount_stiffness;
    let k_side = [0.55, 0.78, 1.15, 0.68, 0.95, 1.25].map(|x| x * k);
    // Viscous coefficients c = η·k with η varying per spring, so the
    // damping is not proportional.
    let eta = |i: usize| p.mount_loss * (0.6 + 0.8 * ((i * 5) % 7) as f64 / 6.0);
    for i in 0..MOUNT_INTERIOR {
        asm.mass(side_a[i], 0.02 * (1.0 + 0.1 * i as f64 / 5.0));
        asm.mass(side_b[i], 0.02 * (1.1 - 0.1 * i as f64 / 5.0));
        asm.mass(interior[i], 0.01 * (1.0 + 0.15 * ((i * 2) % 5) as f64 / 4.0));
        let ka = k_side[i];
        let kb = k_side[(i + 2) % 6] * 0.9;
        asm.link(side_a[i], interior[i], ka, eta(i) * ka);
        asm.link(interior[i], side_b[i], kb, eta(i + 3) * kb);
        for &d in [side_a[i], side_b[i], interior[i]].iter() {
            asm.ground(d, 60.0, 0.05);
        }
    }
    for i in 0..MOUNT_INTERIOR - 1 {
        let (ka, kb, ki) = (0.3 * k, 0.22 * k, 0.15 * k);
        asm.link(side_a[i], side_a[i + 1], ka, eta(i + 1) * ka);
        asm.link(side_b[i], side_b[i + 1], kb, eta(i + 2) * kb);
        asm.link(interior[i], interior[i + 1], ki, eta(i + 4) * ki);
    }
}

fn range(start: usize, len: usize) -> Vec<usize> {
    (start..start + len).collect()
}

/// Physical parameters of the assembly analog.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalogParams {
    /// Mean interface mass of an aluminium cross, kg.
    pub alu_mass: f64,
    /// Mean interface mass of a steel cross, kg.
    pub steel_mass: f64,
    /// Nominal arm resonance of the crosses, Hz.
    pub arm_hz: f64,
    /// Lowest suspension frequency of the crosses, Hz.
    pub suspension_hz: f64,
    /// Nominal spring rate of the mount, N/m.
    pub mount_stiffness: f64,
    /// Nominal viscous-to-elastic ratio of the mount springs, s.
    pub mount_loss: f64,
}

impl Default for AnalogParams {
    fn default() -> Self {
        Self {
            alu_mass: 0.15,
            steel_mass: 0.4,
            arm_hz: 3500.0,
            suspension_hz: 6.0,
            mount_stiffness: 2e4,
            mount_loss: 5e-4,
        }
    }
}

/// Builds the assembly analog with the default parameters.
pub fn make_assembly_analog() -> AssemblyAnalog {
    make_assembly_analog_with(&AnalogParams::default())
}

pub fn make_assembly_analog_with(p: &AnalogParams) -> AssemblyAnalog {
    let steel = |off| cross(p.steel_mass, p.arm_hz, p.suspension_hz, off);
    let alu = |off| cross(p.alu_mass, p.arm_hz, p.suspension_hz, off);
    let (alu_a_sys, alu_b_sys, steel_a_sys, steel_b_sys) = (alu(0), alu(3), steel(1), steel(4));

    let side_a = range(0, CROSS_NODES);
    let side_b = range(CROSS_NODES, CROSS_NODES);
    let interior = range(2 * CROSS_NODES, MOUNT_INTERIOR);
    let n_mount = 2 * CROSS_NODES + MOUNT_INTERIOR;
    let cross_map =
        |side: &[usize], arms: usize| -> Vec<usize> { side.iter().copied().chain(range(arms, CROSS_NODES)).collect() };
    let map_a = cross_map(&side_a, n_mount);
    let map_b = cross_map(&side_b, n_mount + CROSS_NODES);

    let mut mount = Assembler::new(n_mount);
    mount_into(&mut mount, p, &side_a, &side_b, &interior);
    let mount_sys = mount.clone().finish();

    let assembly = |a: &LumpedSystem, b: &LumpedSystem| {
        let mut asm = Assembler::new(n_mount + 2 * CROSS_NODES);
        asm.add(&mount_sys, &range(0, n_mount));
        asm.add(a, &map_a);
        asm.add(b, &map_b);
        asm.finish()
    };
    let assembly_a_sys = assembly(&alu_a_sys, &alu_b_sys);
    let assembly_b_sys = assembly(&steel_a_sys, &steel_b_sys);

    let io12 = range(0, 2 * CROSS_NODES);
    let io6 = range(0, CROSS_NODES);
    let sub = |name: &str, system: LumpedSystem, io: &Vec<usize>| Substructure {
        name: name.to_string(),
        system,
        io: io.clone(),
    };

    let decouple_map = InterfaceMap::from_pairs(24, &range(0, 12), &range(12, 12)).expect("valid pairs");
    let couple_plus: Vec<usize> = range(0, 6).into_iter().chain(range(12, 6)).collect();
    let couple_minus: Vec<usize> = range(6, 6).into_iter().chain(range(18, 6)).collect();
    let couple_map = InterfaceMap::from_pairs(24, &couple_plus, &couple_minus).expect("valid pairs");

    AssemblyAnalog {
        alu_a: sub("alu-cross-a", alu_a_sys, &io6),
        alu_b: sub("alu-cross-b", alu_b_sys, &io6),
        steel_a: sub("steel-cross-a", steel_a_sys, &io6),
        steel_b: sub("steel-cross-b", steel_b_sys, &io6),
        mount: sub("mount", mount_sys, &io12),
        assembly_a: sub("assembly-a", assembly_a_sys, &io12),
        assembly_b: sub("assembly-b", assembly_b_sys, &io12),
        decouple_map,
        couple_map,
        coupled_io: range(6, 12),
        band: (hz_to_rad(20.0), hz_to_rad(500.0)),
    }
}

/// Models produced by running the decouple-then-couple workflow on the
/// assembly analog.
#[derive(Clone, Debug)]
pub struct PipelineModels {
    /// Assembly A after perturbation, as a Newton-compliant displacement model.
    pub assembly_a: StateSpaceModel,
    /// Mount identified by decoupling both aluminium crosses (12 I/O).
    pub mount: StateSpaceModel,
    /// Steel crosses coupled through the identified mount, restricted to
    /// assembly B's 12 I/O.
    pub coupled: StateSpaceModel,
}

impl AssemblyAnalog {
    /// RCM settings used for every model in [`Self::pipeline`].
    pub fn rcm_config(&self) -> RcmConfig {
        RcmConfig::for_band(self.band.0, self.band.1).expect("band is valid")
    }

    /// Decouples the aluminium crosses from assembly A (whose modal model is
    /// perturbed by `rel` with `seed`) to identify the mount, then couples
    /// the steel crosses through it to predict assembly B.
    ///
    /// All substructures use their complete modal models, so with `rel = 0`
    /// the prediction is exact up to rounding.
    pub fn pipeline(&self, rel: f64, seed: u64) -> Result<PipelineModels> {
        let cfg = self.rcm_config();
        let build = |m: &ModalModel| build_full(m, &cfg, true);
        let assembly_a = build(&perturb(&self.assembly_a.modal()?, rel, seed)?)?;
        let alu_a = build(&self.alu_a.modal()?)?;
        let alu_b = build(&self.alu_b.modal()?)?;
        let io: Vec<usize> = (0..2 * CROSS_NODES).collect();
        let mount = lm_decouple(&assembly_a, &[alu_a, alu_b], &self.decouple_map)?.select_io(&io, &io)?;
        let steel_a = build(&self.steel_a.modal()?)?;
        let steel_b = build(&self.steel_b.modal()?)?;
        let coupled = lm_couple(&[steel_a, mount.clone(), steel_b], &self.couple_map)?
            .select_io(&self.coupled_io, &self.coupled_io)?;
        Ok(PipelineModels { assembly_a, mount, coupled })
    }
}

/// Two-DOF chain: ground–m₁–m₂ with `m = 1, 1` kg, `k = 1e4, 1e4` N/m and
/// proportional damping `C = 0.5·M + 1e−4·K`.
pub fn two_dof_chain() -> LumpedSystem {
    let mut asm = Assembler::new(2);
    asm.mass(0, 1.0);
    asm.mass(1, 1.0);
    asm.ground(0, 1e4, 0.0);
    asm.link(0, 1, 1e4, 0.0);
    let c = &asm.m * 0.5 + &asm.k * 1e-4;
    LumpedSystem::new(asm.m, c, asm.k).expect("valid fixture")
}

/// Same chain with a damper only between the two masses, which makes the
/// damping non-proportional.
pub fn two_dof_chain_nonproportional() -> LumpedSystem {
    let mut asm = Assembler::new(2);
    asm.mass(0, 1.0);
    asm.mass(1, 1.0);
    asm.ground(0, 1e4, 0.0);
    asm.link(0, 1, 1e4, 2.0);
    asm.finish()
}

/// Six-DOF chain with non-proportional damping whose modes straddle the
/// 20–500 Hz band on both sides.
pub fn six_dof_nonproportional() -> LumpedSystem {
    let masses = [1.0, 0.8, 1.2, 0.9, 1.1, 0.7];
    let links = [6.0e5, 2.5e6, 9.0e6, 3.0e7, 6.0e7];
    let dampers = [4.0, 1.5, 9.0, 20.0, 6.0];
    let mut asm = Assembler::new(6);
    for (i, &m) in masses.iter().enumerate() {
        asm.mass(i, m);
    }
    asm.ground(0, 3.0e3, 1.0);
    for i in 0..5 {
        asm.link(i, i + 1, links[i], dampers[i]);
    }
    asm.finish()
}

/// Band used with [`six_dof_nonproportional`], rad/s.
pub fn six_dof_band() -> (f64, f64) {
    (hz_to_rad(20.0), hz_to_rad(500.0))
}

/// Modal model of [`six_dof_nonproportional`] with out-of-band modes moved
/// into the residual matrices.
pub fn six_dof_truncated() -> Result<ModalModel> {
    let sys = six_dof_nonproportional();
    let all: Vec<usize> = (0..6).collect();
    let (lo, hi) = six_dof_band();
    truncate_modes(&sys.modal_model(&all)?, lo, hi)
}
