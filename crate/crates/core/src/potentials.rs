//! Field-free Hamiltonian, the beyond-dipole interaction potentials, the
//! effective classical Hamiltonian of the center of mass, and the exact
//! single-particle potential used to check the truncation of the
//! two-body interaction.
//!
//! With `c = 1/α`, `F(t) = E0 f(t)`, `C = cos ωt` and `S = sin ωt`:
//!
//! ```text
//! h0   = p²/2μ - 1/r
//! V1   = F {C x + α [C l_y + ω S x z]}
//! V2   = α F {C [Z p_x - X p_z] + ω S [x Z + z X]}
//! H_cl = P²/2M + <ψ|V2|ψ>
//! ```

use std::sync::Arc;

use ndarray::{Array2, Axis, Zip};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::{inner_raw, mul_real, DvrGrid, Wavefunction};
use crate::laser::{LaserPulse, PhysicalConstants};

/// Largest imaginary residue tolerated in an expectation value.
pub const MOMENT_IMAGINARY_TOLERANCE: f64 = 1e-10;

/// Time-dependent scalar prefactors `(F cos ωt, F sin ωt)`.
pub fn carrier(pulse: &LaserPulse, t: f64) -> (f64, f64) {
    let a = pulse.amplitude(t);
    if a == 0.0 {
        return (0.0, 0.0);
    }
    let (s, c) = (pulse.omega() * t).sin_cos();
    (a * c, a * s)
}

fn inverse_r(grid: &DvrGrid) -> Vec<f64> {
    grid.radial().nodes().iter().map(|r| 1.0 / r).collect()
}

/// `(h0 ψ)` on raw amplitudes.
pub(crate) fn h0_raw(grid: &DvrGrid, u: &Array2<C64>, mu: f64) -> Array2<C64> {
    let mut out = grid.kinetic(u);
    let inv_mu = 1.0 / mu;
    out.axis_iter_mut(Axis(0))
        .zip(u.axis_iter(Axis(0)))
        .zip(inverse_r(grid))
        .for_each(|((mut o, src), ir)| {
            Zip::from(&mut o).and(&src).for_each(|o, &s| *o = *o * inv_mu - s * ir);
        });
    out
}

/// `h0 ψ = (-∇²/2μ - 1/r) ψ`
pub fn apply_h0(psi: &Wavefunction, constants: &PhysicalConstants) -> Wavefunction {
    let out = h0_raw(psi.grid(), psi.amplitudes(), constants.reduced_mass());
    wrap(psi, out)
}

fn wrap(psi: &Wavefunction, amp: Array2<C64>) -> Wavefunction {
    let mut out = Wavefunction::from_amplitudes(psi.grid(), amp, psi.t).expect("shape preserved");
    out.t = psi.t;
    out
}

/// Multiplicative part of `V1 + V2`: `F C x + α F ω S (x z + x Z + z X)`.
pub fn diagonal_potential(grid: &DvrGrid, t: f64, r_cm: [f64; 3], pulse: &LaserPulse) -> Array2<f64> {
    let (fc, fs) = carrier(pulse, t);
    let a = pulse.alpha() * pulse.omega() * fs;
    let (big_x, big_z) = (r_cm[0], r_cm[2]);
    let mut d = Array2::zeros(grid.shape());
    Zip::from(&mut d)
        .and(grid.x())
        .and(grid.z())
        .for_each(|d, &x, &z| *d = fc * x + a * (x * z + x * big_z + z * big_x));
    d
}

/// Coefficient of the derivative coupling `α F C [l_y + Z p_x - X p_z]`.
pub fn coupling_strength(t: f64, pulse: &LaserPulse) -> f64 {
    pulse.alpha() * carrier(pulse, t).0
}

/// Diagonal multiplier `W = Z x - X z`, so that `Z p_x - X p_z = i[K, W]`.
pub(crate) fn cm_lever(grid: &DvrGrid, r_cm: [f64; 3]) -> Array2<f64> {
    let mut w = Array2::zeros(grid.shape());
    Zip::from(&mut w)
        .and(grid.x())
        .and(grid.z())
        .for_each(|w, &x, &z| *w = r_cm[2] * x - r_cm[0] * z);
    w
}

/// `(l_y + Z p_x - X p_z) u` on raw amplitudes.
pub(crate) fn coupling_raw(grid: &DvrGrid, u: &Array2<C64>, lever: Option<&Array2<f64>>) -> Array2<C64> {
    let mut out = grid.apply_ly_raw(u);
    if let Some(w) = lever {
        out += &grid.commutator_momentum(w, u, None);
    }
    out
}

/// `V1 ψ`
pub fn apply_v1(psi: &Wavefunction, t: f64, pulse: &LaserPulse) -> Wavefunction {
    let grid = psi.grid();
    let (fc, fs) = carrier(pulse, t);
    let u = psi.amplitudes();
    let mut out = Array2::zeros(grid.shape());
    if fc == 0.0 && fs == 0.0 {
        return wrap(psi, out);
    }
    let alpha = pulse.alpha();
    let aw = alpha * pulse.omega() * fs;
    Zip::from(&mut out)
        .and(u)
        .and(grid.x())
        .and(grid.z())
        .for_each(|o, &v, &x, &z| *o = v * (fc * x + aw * x * z));
    if alpha != 0.0 && fc != 0.0 {
        out.scaled_add(C64::new(alpha * fc, 0.0), &grid.apply_ly_raw(u));
    }
    wrap(psi, out)
}

/// `V2 ψ` for a fixed center-of-mass position `r_cm = (X, Y, Z)`.
pub fn apply_v2(psi: &Wavefunction, t: f64, r_cm: [f64; 3], pulse: &LaserPulse) -> Wavefunction {
    let grid = psi.grid();
    let (fc, fs) = carrier(pulse, t);
    let alpha = pulse.alpha();
    let u = psi.amplitudes();
    let mut out = Array2::zeros(grid.shape());
    if alpha == 0.0 || (fc == 0.0 && fs == 0.0) || (r_cm[0] == 0.0 && r_cm[2] == 0.0) {
        return wrap(psi, out);
    }
    let aw = alpha * pulse.omega() * fs;
    Zip::from(&mut out)
        .and(u)
        .and(grid.x())
        .and(grid.z())
        .for_each(|o, &v, &x, &z| *o = v * (aw * (x * r_cm[2] + z * r_cm[0])));
    let lever = cm_lever(grid, r_cm);
    out.scaled_add(C64::new(alpha * fc, 0.0), &grid.commutator_momentum(&lever, u, None));
    wrap(psi, out)
}

/// `(h0 + V1 + V2) ψ`
pub fn apply_hamiltonian(
    psi: &Wavefunction,
    t: f64,
    r_cm: [f64; 3],
    pulse: &LaserPulse,
    constants: &PhysicalConstants,
) -> Wavefunction {
    let mut out = apply_h0(psi, constants);
    out.axpy(C64::new(1.0, 0.0), &apply_v1(psi, t, pulse)).expect("same grid");
    out.axpy(C64::new(1.0, 0.0), &apply_v2(psi, t, r_cm, pulse)).expect("same grid");
    out
}

/// Electron expectation values entering the center-of-mass force.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ElectronMoments {
    pub x: f64,
    pub z: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
    pub t: f64,
}

impl ElectronMoments {
    /// Linear interpolation, `theta = 0` giving `self`.
    pub fn lerp(&self, other: &Self, theta: f64) -> Self {
        let l = |a: f64, b: f64| a + theta * (b - a);
        Self {
            x: l(self.x, other.x),
            z: l(self.z, other.z),
            px: l(self.px, other.px),
            py: l(self.py, other.py),
            pz: l(self.pz, other.pz),
            t: l(self.t, other.t),
        }
    }
}

/// `<x>, <z>, <p_x>, <p_y>, <p_z>` by grid quadrature.
pub fn electron_moments(psi: &Wavefunction) -> Result<ElectronMoments> {
    electron_moments_raw(psi.grid(), psi.amplitudes(), psi.t)
}

pub(crate) fn electron_moments_raw(grid: &Arc<DvrGrid>, u: &Array2<C64>, t: f64) -> Result<ElectronMoments> {
    let ku = grid.kinetic(u);
    let position = |s: &Array2<f64>| -> f64 {
        Zip::from(u)
            .and(s)
            .fold(0.0, |acc, v, &sv| acc + v.norm_sqr() * sv)
    };
    let momentum = |s: &Array2<f64>, name: &str| -> Result<f64> {
        let su = mul_real(s, u);
        let value = C64::new(0.0, 1.0) * (inner_raw(&ku, &su) - inner_raw(&su, &ku));
        check_real(value, name)
    };
    Ok(ElectronMoments {
        x: position(grid.x()),
        z: position(grid.z()),
        px: momentum(grid.x(), "p_x")?,
        py: momentum(grid.y(), "p_y")?,
        pz: momentum(grid.z(), "p_z")?,
        t,
    })
}

fn check_real(value: C64, name: &str) -> Result<f64> {
    if !value.re.is_finite() || value.im.abs() > MOMENT_IMAGINARY_TOLERANCE * value.re.abs().max(1.0) {
        return Err(Error::NumericalHealth(format!(
            "<{name}> has imaginary residue {:.3e}",
            value.im
        )));
    }
    Ok(value.re)
}

/// Classical center-of-mass state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassicalState {
    pub r: [f64; 3],
    pub p: [f64; 3],
    pub t: f64,
}

impl ClassicalState {
    pub fn new(r: [f64; 3], p: [f64; 3], t: f64) -> Self {
        Self { r, p, t }
    }

    pub fn is_finite(&self) -> bool {
        self.r.iter().chain(&self.p).chain([&self.t]).all(|v| v.is_finite())
    }
}

/// `H_cl = P²/2M + α F {C [Z<p_x> - X<p_z>] + ω S [<x>Z + <z>X]}`
pub fn hcl_value(
    state: &ClassicalState,
    moments: &ElectronMoments,
    t: f64,
    pulse: &LaserPulse,
    constants: &PhysicalConstants,
) -> f64 {
    let [px, py, pz] = state.p;
    let kinetic = (px * px + py * py + pz * pz) / (2.0 * constants.total_mass());
    let (fc, fs) = carrier(pulse, t);
    let [big_x, _, big_z] = state.r;
    let coupling = fc * (big_z * moments.px - big_x * moments.pz)
        + pulse.omega() * fs * (moments.x * big_z + moments.z * big_x);
    kinetic + pulse.alpha() * coupling
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HclGradients {
    /// `-∂H_cl/∂R`
    pub force: [f64; 3],
    /// `∂H_cl/∂P`
    pub velocity: [f64; 3],
}

/// `-∂H_cl/∂R`; independent of both `R` and `P`.
pub fn hcl_force(moments: &ElectronMoments, t: f64, pulse: &LaserPulse) -> [f64; 3] {
    let (fc, fs) = carrier(pulse, t);
    let a = pulse.alpha();
    let w = pulse.omega();
    [
        -a * (-fc * moments.pz + w * fs * moments.z),
        0.0,
        -a * (fc * moments.px + w * fs * moments.x),
    ]
}

pub fn hcl_gradients(
    state: &ClassicalState,
    moments: &ElectronMoments,
    t: f64,
    pulse: &LaserPulse,
    constants: &PhysicalConstants,
) -> HclGradients {
    let m = constants.total_mass();
    HclGradients {
        force: hcl_force(moments, t, pulse),
        velocity: state.p.map(|p| p / m),
    }
}

/// Right-hand sides of the electron velocity relations,
/// `(d<x>/dt, d<z>/dt)` predicted from the current moments.
pub fn ehrenfest_velocity(
    moments: &ElectronMoments,
    r_cm: [f64; 3],
    t: f64,
    pulse: &LaserPulse,
    constants: &PhysicalConstants,
) -> (f64, f64) {
    let mu = constants.reduced_mass();
    let b = pulse.alpha() * carrier(pulse, t).0;
    (
        moments.px / mu + b * (moments.z + r_cm[2]),
        moments.pz / mu - b * (moments.x + r_cm[0]),
    )
}

/// Which constituent of the atom a single-particle potential acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Particle {
    Electron,
    Proton,
}

/// How the retardation phase `ωt - kξ_z` is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseTreatment {
    /// Expanded to first order in `k`.
    FirstOrder,
    /// Kept in full: `cos(ωt - kξ_z)` multiplies both the electric and the
    /// magnetic term, the latter symmetrized.
    Exact,
}

/// Charge, mass and the map from relative/center-of-mass variables to
/// the particle's own position `ξ = s r + R` and momentum `π = σ p + κ P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleFrame {
    pub charge: f64,
    pub mass: f64,
    pub position_scale: f64,
    pub momentum_sign: f64,
    pub cm_momentum_share: f64,
}

impl ParticleFrame {
    pub fn new(particle: Particle, constants: &PhysicalConstants) -> Self {
        let (fe, fp) = constants.mass_fractions();
        match particle {
            Particle::Electron => Self {
                charge: -1.0,
                mass: constants.electron_mass(),
                position_scale: fp,
                momentum_sign: 1.0,
                cm_momentum_share: fe,
            },
            Particle::Proton => Self {
                charge: 1.0,
                mass: constants.proton_mass,
                position_scale: -fe,
                momentum_sign: -1.0,
                cm_momentum_share: fp,
            },
        }
    }

    /// An electron whose coordinates coincide with the relative ones.
    pub fn bare_electron() -> Self {
        Self {
            charge: -1.0,
            mass: 1.0,
            position_scale: 1.0,
            momentum_sign: 1.0,
            cm_momentum_share: 0.0,
        }
    }
}

/// Applies the interaction of one charged particle with the pulse,
///
/// ```text
/// U = -q F {C ξ_x + (1/mc) C (ξ_z π_x - ξ_x π_z) + (ω/c) S ξ_x ξ_z}
/// ```
///
/// written in the atom's relative and center-of-mass variables, with the
/// center of mass fixed at `cm`. The overall sign makes the force
/// `-∇U = q E`.
pub fn apply_single_particle_potential(
    psi: &Wavefunction,
    frame: &ParticleFrame,
    cm: &ClassicalState,
    t: f64,
    pulse: &LaserPulse,
    phase: PhaseTreatment,
) -> Wavefunction {
    let grid = psi.grid();
    let u = psi.amplitudes();
    let amp = pulse.amplitude(t);
    let mut out = Array2::<C64>::zeros(grid.shape());
    if amp == 0.0 {
        return wrap(psi, out);
    }
    let alpha = pulse.alpha();
    let omega = pulse.omega();
    let k = pulse.k();
    let wt = omega * t;
    let s = frame.position_scale;
    let sigma = frame.momentum_sign;
    let kappa = frame.cm_momentum_share;
    let [big_x, _, big_z] = cm.r;
    let [cm_px, _, cm_pz] = cm.p;
    let prefactor = -frame.charge * amp;
    let magnetic = alpha / frame.mass;

    let xi_x = grid.x().mapv(|x| s * x + big_x);
    let xi_z = grid.z().mapv(|z| s * z + big_z);

    // Λ = ξ_z π_x - ξ_x π_z = sσ l_y + σ(Z p_x - X p_z) + c-number part.
    let lambda = |v: &Array2<C64>| -> Array2<C64> {
        let mut acc = Array2::<C64>::zeros(grid.shape());
        if magnetic == 0.0 {
            return acc;
        }
        if s * sigma != 0.0 {
            acc.scaled_add(C64::new(s * sigma, 0.0), &grid.apply_ly_raw(v));
        }
        if big_x != 0.0 || big_z != 0.0 {
            let lever = cm_lever(grid, cm.r);
            acc.scaled_add(C64::new(sigma, 0.0), &grid.commutator_momentum(&lever, v, None));
        }
        let diag = Zip::from(grid.x())
            .and(grid.z())
            .map_collect(|&x, &z| kappa * s * (z * cm_px - x * cm_pz) + kappa * (big_z * cm_px - big_x * cm_pz));
        Zip::from(&mut acc).and(v).and(&diag).for_each(|a, &v, &d| *a += v * d);
        acc
    };

    match phase {
        PhaseTreatment::FirstOrder => {
            let (sn, cs) = wt.sin_cos();
            Zip::from(&mut out)
                .and(u)
                .and(&xi_x)
                .and(&xi_z)
                .for_each(|o, &v, &ex, &ez| *o = v * (cs * ex + alpha * omega * sn * ex * ez));
            out.scaled_add(C64::new(magnetic * cs, 0.0), &lambda(u));
        }
        PhaseTreatment::Exact => {
            let carrier = xi_z.mapv(|ez| (wt - k * ez).cos());
            Zip::from(&mut out)
                .and(u)
                .and(&carrier)
                .and(&xi_x)
                .for_each(|o, &v, &c, &ex| *o = v * (c * ex));
            // ½ {C, Λ}
            let cu = mul_real(&carrier, u);
            let mut sym = lambda(&cu);
            sym += &mul_real(&carrier, &lambda(u));
            out.scaled_add(C64::new(0.5 * magnetic, 0.0), &sym);
        }
    }
    out.mapv_inplace(|v| v * prefactor);
    wrap(psi, out)
}

/// `‖[(V1 + V2) - (U_electron + U_proton)] ψ‖` for a center of mass at
/// `cm`; the masses come from `constants` and `c = 1/pulse.alpha()`.
pub fn truncation_defect(
    psi: &Wavefunction,
    cm: &ClassicalState,
    t: f64,
    pulse: &LaserPulse,
    constants: &PhysicalConstants,
    phase: PhaseTreatment,
) -> f64 {
    let mut diff = apply_v1(psi, t, pulse);
    diff.axpy(C64::new(1.0, 0.0), &apply_v2(psi, t, cm.r, pulse))
        .expect("same grid");
    for particle in [Particle::Electron, Particle::Proton] {
        let frame = ParticleFrame::new(particle, constants);
        let u = apply_single_particle_potential(psi, &frame, cm, t, pulse, phase);
        diff.axpy(C64::new(-1.0, 0.0), &u).expect("same grid");
    }
    diff.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};
    use crate::hydrogen::{eigenstate, BoundStateLabel};
    use crate::testing::{gaussian_packet, random_compact_state};
    use proptest::prelude::*;

    fn grid() -> Arc<DvrGrid> {
        build_grid(GridSpec::new(40.0, 160, 7, 7)).unwrap()
    }

    fn pulse() -> LaserPulse {
        LaserPulse::new(0.053_376, 0.5063, 3, 1.0 / 137.0).unwrap()
    }

    fn hermiticity_defect(op: impl Fn(&Wavefunction) -> Wavefunction, a: &Wavefunction, b: &Wavefunction) -> f64 {
        let lhs = a.inner(&op(b)).unwrap();
        let rhs = b.inner(&op(a)).unwrap().conj();
        (lhs - rhs).norm() / (a.norm() * b.norm())
    }

    #[test]
    fn ground_state_is_eigenfunction_of_h0() {
        let c = PhysicalConstants::default();
        let g = grid();
        let psi = eigenstate(BoundStateLabel::ground(), &g, &c).unwrap();
        let h = apply_h0(&psi, &c);
        let e = -0.5 * c.reduced_mass();
        let r = g.radial().nodes();
        for j in 0..r.len() {
            if r[j] > 15.0 {
                break;
            }
            for a in 0..g.angular().len() {
                let d = h.value(j, a) - e * psi.value(j, a);
                assert!(d.norm() < 1e-5, "r={} d={}", r[j], d.norm());
            }
        }
    }

    #[test]
    fn v1_vanishes_outside_pulse() {
        let g = grid();
        let psi = random_compact_state(&g, 3, 10.0);
        let p = pulse();
        let out = apply_v1(&psi, 2.0 * p.duration(), &p);
        assert_eq!(out.norm(), 0.0);
    }

    #[test]
    fn v1_without_alpha_is_dipole() {
        let g = grid();
        let psi = random_compact_state(&g, 4, 10.0);
        let p = pulse().dipole_only();
        let t = 0.3;
        let out = apply_v1(&psi, t, &p);
        let (fc, _) = carrier(&p, t);
        let expected = psi.multiply(|x, _, _| fc * x);
        let mut d = out.clone();
        d.axpy(C64::new(-1.0, 0.0), &expected).unwrap();
        assert!(d.norm() < 1e-15 * expected.norm().max(1.0));
    }

    #[test]
    fn v2_vanishes_at_origin_and_ignores_y() {
        let g = grid();
        let psi = random_compact_state(&g, 5, 10.0);
        let p = pulse();
        assert_eq!(apply_v2(&psi, 0.4, [0.0, 3.0, 0.0], &p).norm(), 0.0);
        let a = apply_v2(&psi, 0.4, [0.2, -1.0, 0.3], &p);
        let b = apply_v2(&psi, 0.4, [0.2, 5.0, 0.3], &p);
        assert_eq!(a.amplitudes(), b.amplitudes());
    }

    #[test]
    fn hermiticity_of_all_pieces() {
        let c = PhysicalConstants::default();
        let g = grid();
        let p = pulse();
        let a = random_compact_state(&g, 11, 10.0);
        let b = random_compact_state(&g, 12, 10.0);
        let t = 0.7;
        let rc = [0.4, 0.1, -0.3];
        assert!(hermiticity_defect(|v| apply_h0(v, &c), &a, &b) < 1e-8);
        assert!(hermiticity_defect(|v| apply_v1(v, t, &p), &a, &b) < 1e-8);
        assert!(hermiticity_defect(|v| apply_v2(v, t, rc, &p), &a, &b) < 1e-8);
        assert!(hermiticity_defect(|v| apply_hamiltonian(v, t, rc, &p, &c), &a, &b) < 1e-8);
    }

    #[test]
    fn moments_of_ground_state_vanish() {
        let c = PhysicalConstants::default();
        let g = grid();
        let psi = eigenstate(BoundStateLabel::ground(), &g, &c).unwrap();
        let m = electron_moments(&psi).unwrap();
        for v in [m.x, m.z, m.px, m.py, m.pz] {
            assert!(v.abs() < 1e-12, "{m:?}");
        }
    }

    #[test]
    fn moments_detect_boost_and_ignore_phase() {
        let g = grid();
        let mut psi = gaussian_packet(&g, 2.0, [0.3, 0.0, -0.2]);
        psi.normalize();
        let m = electron_moments(&psi).unwrap();
        assert!((m.px - 0.3).abs() < 1e-4 && (m.pz + 0.2).abs() < 1e-4 && m.py.abs() < 1e-4);
        let mut rotated = psi.clone();
        rotated.scale(C64::from_polar(1.0, 1.1));
        let m2 = electron_moments(&rotated).unwrap();
        for (a, b) in [(m.x, m2.x), (m.z, m2.z), (m.px, m2.px), (m.py, m2.py), (m.pz, m2.pz)] {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn hcl_trivial_values() {
        let c = PhysicalConstants::default();
        let p = pulse();
        let m = ElectronMoments {
            x: 0.2,
            z: -0.1,
            px: 0.05,
            py: 0.0,
            pz: 0.3,
            t: 0.0,
        };
        assert_eq!(hcl_value(&ClassicalState::default(), &m, 0.3, &p, &c), 0.0);
        let s = ClassicalState::new([1.0, 2.0, 3.0], [0.0, 0.0, 1.0], 0.0);
        let h = hcl_value(&s, &m, 10.0 * p.duration(), &p, &c);
        assert!((h - 1.0 / (2.0 * c.total_mass())).abs() < 1e-18);
        let g = hcl_gradients(&s, &m, 10.0 * p.duration(), &p, &c);
        assert_eq!(g.force, [0.0; 3]);
        assert_eq!(g.velocity[2], 1.0 / c.total_mass());
    }

    #[test]
    fn hcl_matches_full_quadrature_of_v2() {
        let c = PhysicalConstants::default();
        let g = grid();
        let p = pulse();
        let psi = random_compact_state(&g, 21, 8.0);
        let s = ClassicalState::new([0.3, -0.2, 0.7], [0.1, 0.0, 0.2], 0.0);
        for &t in &[-5.0, 0.4, 3.3] {
            let m = electron_moments(&psi).unwrap();
            let v2 = psi.inner(&apply_v2(&psi, t, s.r, &p)).unwrap();
            let kin = (0.01 + 0.04) / (2.0 * c.total_mass());
            let h = hcl_value(&s, &m, t, &p, &c);
            assert!((h - kin - v2.re).abs() < 1e-10 * v2.re.abs().max(1e-3), "t={t}");
        }
    }

    #[test]
    fn single_electron_at_origin_reproduces_v1() {
        let g = grid();
        let p = pulse();
        let psi = random_compact_state(&g, 8, 8.0);
        let u = apply_single_particle_potential(
            &psi,
            &ParticleFrame::bare_electron(),
            &ClassicalState::default(),
            0.9,
            &p,
            PhaseTreatment::FirstOrder,
        );
        let mut d = apply_v1(&psi, 0.9, &p);
        let scale = d.norm();
        d.axpy(C64::new(-1.0, 0.0), &u).unwrap();
        assert!(d.norm() < 1e-12 * scale);
    }

    #[test]
    fn exact_single_particle_potential_is_hermitian() {
        let c = PhysicalConstants::default();
        let g = grid();
        let p = pulse();
        let a = random_compact_state(&g, 1, 8.0);
        let b = random_compact_state(&g, 2, 8.0);
        let cm = ClassicalState::new([0.5, 0.0, -0.4], [0.3, 0.0, 0.2], 0.0);
        for particle in [Particle::Electron, Particle::Proton] {
            let f = ParticleFrame::new(particle, &c);
            for phase in [PhaseTreatment::FirstOrder, PhaseTreatment::Exact] {
                let d = hermiticity_defect(|v| apply_single_particle_potential(v, &f, &cm, 0.6, &p, phase), &a, &b);
                assert!(d < 1e-8, "{particle:?} {phase:?} {d}");
            }
        }
    }

    fn moments_strategy() -> impl Strategy<Value = ElectronMoments> {
        (-2.0..2.0f64, -2.0..2.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, z, px, py, pz)| {
            ElectronMoments {
                x,
                z,
                px,
                py,
                pz,
                t: 0.0,
            }
        })
    }

    proptest! {
        #[test]
        fn gradients_match_central_differences(
            m in moments_strategy(),
            r in prop::array::uniform3(-1.0..1.0f64),
            pm in prop::array::uniform3(-1.0..1.0f64),
            t in -18.0..18.0f64,
        ) {
            let c = PhysicalConstants::default();
            let p = pulse();
            let s = ClassicalState::new(r, pm, t);
            let g = hcl_gradients(&s, &m, t, &p, &c);
            let h = 1e-4;
            for i in 0..3 {
                let mut a = s;
                let mut b = s;
                a.r[i] += h;
                b.r[i] -= h;
                let fd = -(hcl_value(&a, &m, t, &p, &c) - hcl_value(&b, &m, t, &p, &c)) / (2.0 * h);
                prop_assert!((fd - g.force[i]).abs() <= 1e-8 * g.force[i].abs().max(1e-6));
                let mut a = s;
                let mut b = s;
                a.p[i] += h;
                b.p[i] -= h;
                let fd = (hcl_value(&a, &m, t, &p, &c) - hcl_value(&b, &m, t, &p, &c)) / (2.0 * h);
                prop_assert!((fd - g.velocity[i]).abs() <= 1e-8 * g.velocity[i].abs().max(1e-6));
            }
            prop_assert_eq!(g.force[1], 0.0);
        }
    }
}
