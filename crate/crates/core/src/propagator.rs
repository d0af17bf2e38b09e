//! Time stepping of the coupled electron / center-of-mass system.
//!
//! One step `t_n -> t_n + dt`:
//!
//! 1. half kick `P' = P_n + dt/2 F(t_n)` and drift `R_{n+1} = R_n + dt P'/M`;
//! 2. quantum step with the center of mass at `(R_n + R_{n+1}) / 2`;
//! 3. moments of the new wavefunction give `F(t_{n+1})`, final half kick
//!    `P_{n+1} = P' + dt/2 F(t_{n+1})`.
//!
//! The force `-∂H_cl/∂R` depends on neither `R` nor `P`, so every stage of
//! the Störmer-Verlet scheme is explicit.
//!
//! The quantum step is a symmetric splitting
//!
//! ```text
//! e^{-i D dt/2} e^{-i G dt/2} e^{-i H0 dt} e^{-i G dt/2} e^{-i D dt/2}
//! ```
//!
//! with `D` the multiplicative part of `V1 + V2`, `G` the derivative
//! coupling `α F cos ωt [l_y + Z p_x - X p_z]`, and `H0 = h0` propagated by
//! Crank-Nicolson channel by channel. All time-dependent coefficients are
//! taken at the step midpoint.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, Axis, Zip};
use num_complex::Complex64 as C64;

use crate::banded::CayleySolver;
use crate::error::{Error, Result};
use crate::grid::{inner_raw, mask_in_place, DvrGrid, Wavefunction};
use crate::laser::{LaserPulse, PhysicalConstants};
use crate::observables::{Sample, TimeSeries};
use crate::potentials::{
    cm_lever, coupling_raw, coupling_strength, diagonal_potential, electron_moments_raw, hcl_force, ClassicalState,
    ElectronMoments,
};

/// Unitary solver used for the derivative coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouplingSolver {
    /// Short-iterative Lanczos exponential.
    #[default]
    Lanczos,
    /// Cayley form `(1 + iτA/2)^{-1}(1 - iτA/2)` solved by fixed-point
    /// iteration.
    ImplicitMidpoint,
}

impl CouplingSolver {
    pub fn name(&self) -> &'static str {
        match self {
            CouplingSolver::Lanczos => "lanczos",
            CouplingSolver::ImplicitMidpoint => "implicit-midpoint",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationPlan {
    pub dt: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Record every `record_stride` steps.
    pub record_stride: usize,
    pub coupling_solver: CouplingSolver,
    /// Largest tolerated relative norm change of one step, absorber excluded.
    pub unitarity_tolerance: f64,
    /// Convergence threshold of the coupling sub-solver.
    pub krylov_tolerance: f64,
    pub max_krylov: usize,
    /// Hold the center of mass at its initial state.
    pub freeze_cm: bool,
}

impl PropagationPlan {
    pub const DEFAULT_STEPS_PER_CYCLE: usize = 4400;

    pub fn new(dt: f64, t_start: f64, t_end: f64) -> Result<Self> {
        let plan = Self {
            dt,
            t_start,
            t_end,
            record_stride: 1,
            coupling_solver: CouplingSolver::default(),
            unitarity_tolerance: 1e-10,
            krylov_tolerance: 1e-14,
            max_krylov: 30,
            freeze_cm: false,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// `dt = T / steps_per_cycle` from `t_start` to `t_end`.
    pub fn for_pulse(pulse: &LaserPulse, steps_per_cycle: usize, t_start: f64, t_end: f64) -> Result<Self> {
        if steps_per_cycle == 0 {
            return Err(Error::Domain("steps per cycle must be positive".into()));
        }
        Self::new(pulse.period() / steps_per_cycle as f64, t_start, t_end)
    }

    pub fn with_record_stride(self, stride: usize) -> Self {
        Self {
            record_stride: stride,
            ..self
        }
    }

    pub fn with_coupling_solver(self, solver: CouplingSolver) -> Self {
        Self {
            coupling_solver: solver,
            ..self
        }
    }

    pub fn with_freeze_cm(self, freeze: bool) -> Self {
        Self {
            freeze_cm: freeze,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_end > self.t_start) {
            return Err(Error::Domain(format!(
                "t_end ({}) must exceed t_start ({})",
                self.t_end, self.t_start
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::Domain("record stride must be positive".into()));
        }
        if self.max_krylov < 2 {
            return Err(Error::Domain("max_krylov must be at least 2".into()));
        }
        Ok(())
    }

    /// Number of steps, `t_end` rounded to the nearest step boundary.
    pub fn n_steps(&self) -> u64 {
        ((self.t_end - self.t_start) / self.dt).round().max(1.0) as u64
    }

    pub fn time(&self, step: u64) -> f64 {
        self.t_start + step as f64 * self.dt
    }
}

/// Wavefunction and center of mass at a common step boundary.
#[derive(Debug, Clone)]
pub struct CoupledState {
    pub psi: Wavefunction,
    pub cm: ClassicalState,
    /// Steps taken since `t_start`.
    pub step: u64,
    moments: Option<ElectronMoments>,
}

impl CoupledState {
    pub fn new(mut psi: Wavefunction, mut cm: ClassicalState, step: u64, t: f64) -> Self {
        psi.t = t;
        cm.t = t;
        Self {
            psi,
            cm,
            step,
            moments: None,
        }
    }

    pub fn t(&self) -> f64 {
        self.cm.t
    }

    /// Electron moments of the current wavefunction, cached.
    pub fn moments(&mut self) -> Result<ElectronMoments> {
        match self.moments {
            Some(m) => Ok(m),
            None => {
                let m = electron_moments_raw(self.psi.grid(), self.psi.amplitudes(), self.psi.t)?;
                self.moments = Some(m);
                Ok(m)
            }
        }
    }
}

/// Diagnostics of one quantum step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    /// Relative norm change before the absorber.
    pub norm_drift: f64,
    /// Norm removed by the absorber.
    pub absorbed: f64,
    /// Sub-solver iterations used for the coupling.
    pub coupling_iterations: usize,
}

/// `exp(-i tau A) v` for Hermitian `A` by the Lanczos method.
///
/// Returns the result and the Krylov dimension used.
pub fn lanczos_exp(
    apply: impl Fn(&Array2<C64>) -> Array2<C64>,
    v: &Array2<C64>,
    tau: f64,
    tol: f64,
    max_dim: usize,
) -> Result<(Array2<C64>, usize)> {
    let beta0 = inner_raw(v, v).re.sqrt();
    if beta0 == 0.0 || tau == 0.0 {
        return Ok((v.clone(), 0));
    }
    let mut basis: Vec<Array2<C64>> = vec![v.mapv(|z| z / beta0)];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let small_exp = |alphas: &[f64], betas: &[f64]| -> Vec<C64> {
        let m = alphas.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alphas[i]
            } else if i + 1 == j || j + 1 == i {
                betas[i.min(j)]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|k| {
                        let q = eig.eigenvectors[(i, k)];
                        C64::from_polar(1.0, -tau * eig.eigenvalues[k]) * q * eig.eigenvectors[(0, k)]
                    })
                    .sum::<C64>()
                    * beta0
            })
            .collect()
    };
    loop {
        let j = alphas.len();
        let mut w = apply(&basis[j]);
        let a = inner_raw(&basis[j], &w).re;
        w.scaled_add(C64::new(-a, 0.0), &basis[j]);
        if j > 0 {
            w.scaled_add(C64::new(-betas[j - 1], 0.0), &basis[j - 1]);
        }
        alphas.push(a);
        let b = inner_raw(&w, &w).re.sqrt();
        let coeffs = small_exp(&alphas, &betas);
        let m = alphas.len();
        let error = b * coeffs[m - 1].norm();
        let breakdown = b <= 1e-300_f64.max(1e-15 * a.abs());
        if error <= tol * beta0 || breakdown || m >= max_dim {
            if !(error <= tol * beta0 || breakdown) {
                return Err(Error::NumericalHealth(format!(
                    "Lanczos exponential not converged in {m} iterations (error {error:.3e}); reduce dt"
                )));
            }
            let mut out = Array2::<C64>::zeros(v.dim());
            for (q, c) in basis.iter().zip(&coeffs) {
                out.scaled_add(*c, q);
            }
            return Ok((out, m));
        }
        betas.push(b);
        w.mapv_inplace(|z| z / b);
        basis.push(w);
    }
}

/// `(1 + i tau A/2)^{-1} (1 - i tau A/2) v` by fixed-point iteration.
pub fn implicit_midpoint(
    apply: impl Fn(&Array2<C64>) -> Array2<C64>,
    v: &Array2<C64>,
    tau: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Array2<C64>, usize)> {
    let scale = inner_raw(v, v).re.sqrt();
    if scale == 0.0 || tau == 0.0 {
        return Ok((v.clone(), 0));
    }
    let half = C64::new(0.0, -0.5 * tau);
    let av = apply(v);
    let mut y = v.clone();
    for it in 1..=max_iter {
        // y = v - i tau/2 A (v + y)
        let ay = apply(&y);
        let mut next = v.clone();
        Zip::from(&mut next).and(&av).and(&ay).for_each(|n, &a, &b| *n += half * (a + b));
        let mut diff = next.clone();
        diff -= &y;
        let change = inner_raw(&diff, &diff).re.sqrt();
        y = next;
        if change <= tol * scale {
            return Ok((y, it));
        }
    }
    Err(Error::NumericalHealth(format!(
        "implicit midpoint coupling solve did not converge in {max_iter} iterations; reduce dt"
    )))
}

/// Unitary single-step propagator for the electron.
pub struct QuantumPropagator {
    grid: Arc<DvrGrid>,
    pulse: LaserPulse,
    dt: f64,
    solver: CouplingSolver,
    krylov_tolerance: f64,
    max_krylov: usize,
    /// Crank-Nicolson factors by nominal `l`.
    cayley: Vec<CayleySolver>,
    channel_l: Vec<usize>,
}

impl QuantumPropagator {
    pub fn new(
        grid: &Arc<DvrGrid>,
        pulse: &LaserPulse,
        constants: &PhysicalConstants,
        dt: f64,
        solver: CouplingSolver,
    ) -> Self {
        let mu = constants.reduced_mass();
        let channel_l: Vec<usize> = grid.channels().iter().map(|c| c.l).collect();
        let l_top = channel_l.iter().copied().max().unwrap_or(0);
        let r = grid.radial().nodes();
        // I + i dt/2 (K_r/μ + l(l+1)/2μr² - 1/r) = I + i (dt/2μ) (K_r + l(l+1)/2r² - μ/r)
        let cayley = (0..=l_top)
            .map(|l| {
                let ll = (l * (l + 1)) as f64;
                let diag: Vec<f64> = r.iter().map(|&r| ll / (2.0 * r * r) - mu / r).collect();
                CayleySolver::new(grid.radial().kinetic(), &diag, 0.5 * dt / mu)
            })
            .collect();
        Self {
            grid: Arc::clone(grid),
            pulse: *pulse,
            dt,
            solver,
            krylov_tolerance: 1e-14,
            max_krylov: 30,
            cayley,
            channel_l,
        }
    }

    pub fn with_tolerances(mut self, krylov_tolerance: f64, max_krylov: usize) -> Self {
        self.krylov_tolerance = krylov_tolerance;
        self.max_krylov = max_krylov;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `e^{-i h0 dt}` by Crank-Nicolson in each angular channel.
    fn field_free_step(&self, u: &Array2<C64>) -> Array2<C64> {
        let g = &self.grid;
        // [channel, radial]
        let mut ct = g.basis_t().dot(&u.t()).as_standard_layout().into_owned();
        let mut scratch = vec![C64::new(0.0, 0.0); ct.ncols()];
        for (k, mut row) in ct.axis_iter_mut(Axis(0)).enumerate() {
            let s = row.as_slice_mut().expect("contiguous rows");
            self.cayley[self.channel_l[k]].apply(s, &mut scratch);
        }
        g.basis().dot(&ct).t().as_standard_layout().into_owned()
    }

    fn coupling_step(&self, u: &Array2<C64>, strength: f64, lever: Option<&Array2<f64>>) -> Result<(Array2<C64>, usize)> {
        let apply = |v: &Array2<C64>| coupling_raw(&self.grid, v, lever);
        let tau = 0.5 * self.dt * strength;
        match self.solver {
            CouplingSolver::Lanczos => lanczos_exp(apply, u, tau, self.krylov_tolerance, self.max_krylov),
            CouplingSolver::ImplicitMidpoint => implicit_midpoint(apply, u, tau, self.krylov_tolerance, 200),
        }
    }

    /// Advances `psi` from `t` to `t + dt` with the center of mass held at
    /// `r_cm`. On error `psi` is left untouched.
    pub fn step(&self, psi: &mut Wavefunction, t: f64, r_cm: [f64; 3]) -> Result<StepReport> {
        if !Arc::ptr_eq(psi.grid(), &self.grid) && psi.grid().spec() != self.grid.spec() {
            return Err(Error::GridMismatch);
        }
        let dt = self.dt;
        let tm = t + 0.5 * dt;
        let before = psi.norm_sqr();
        let mut u = psi.amplitudes().clone();
        let mut iterations = 0;

        let field_on = self.pulse.amplitude(tm) != 0.0;
        let half_phase = field_on.then(|| {
            diagonal_potential(&self.grid, tm, r_cm, &self.pulse).mapv(|d| C64::from_polar(1.0, -0.5 * dt * d))
        });
        let strength = coupling_strength(tm, &self.pulse);
        let lever = (strength != 0.0 && (r_cm[0] != 0.0 || r_cm[2] != 0.0)).then(|| cm_lever(&self.grid, r_cm));

        if let Some(ph) = &half_phase {
            u *= ph;
        }
        if strength != 0.0 {
            let (v, n) = self.coupling_step(&u, strength, lever.as_ref())?;
            u = v;
            iterations += n;
        }
        u = self.field_free_step(&u);
        if strength != 0.0 {
            let (v, n) = self.coupling_step(&u, strength, lever.as_ref())?;
            u = v;
            iterations += n;
        }
        if let Some(ph) = &half_phase {
            u *= ph;
        }

        let after: f64 = u.iter().map(|z| z.norm_sqr()).sum();
        if !after.is_finite() {
            return Err(Error::NumericalHealth(format!("non-finite wavefunction after step at t={t}")));
        }
        let norm_drift = if before > 0.0 { (after - before).abs() / before } else { 0.0 };
        *psi.amplitudes_mut() = u;
        psi.t = t + dt;
        mask_in_place(psi);
        let absorbed = after - psi.norm_sqr();
        Ok(StepReport {
            norm_drift,
            absorbed,
            coupling_iterations: iterations,
        })
    }
}

/// Free-function form of [`QuantumPropagator::step`] for one-off use.
pub fn quantum_step(
    psi: &Wavefunction,
    r_cm: [f64; 3],
    t: f64,
    dt: f64,
    pulse: &LaserPulse,
    constants: &PhysicalConstants,
) -> Result<Wavefunction> {
    let prop = QuantumPropagator::new(psi.grid(), pulse, constants, dt, CouplingSolver::default());
    let mut out = psi.clone();
    prop.step(&mut out, t, r_cm)?;
    Ok(out)
}

/// A classical Hamiltonian `H(R, P, t)` for Störmer-Verlet integration.
pub trait ClassicalHamiltonian {
    fn energy(&self, r: &[f64; 3], p: &[f64; 3], t: f64) -> f64;
    fn grad_r(&self, r: &[f64; 3], p: &[f64; 3], t: f64) -> [f64; 3];
    fn grad_p(&self, r: &[f64; 3], p: &[f64; 3], t: f64) -> [f64; 3];
    /// `H = T(P) + V(R, t)`: all stages are explicit.
    fn separable(&self) -> bool {
        false
    }
}

fn axpy3(a: &[f64; 3], s: f64, b: &[f64; 3]) -> [f64; 3] {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

fn dist3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

const FIXED_POINT_ITERATIONS: usize = 100;

fn fixed_point(mut x: [f64; 3], f: impl Fn(&[f64; 3]) -> [f64; 3]) -> [f64; 3] {
    for _ in 0..FIXED_POINT_ITERATIONS {
        let next = f(&x);
        let scale = next.iter().map(|v| v.abs()).fold(1e-300, f64::max);
        let done = dist3(&next, &x) <= 1e-15 * scale;
        x = next;
        if done {
            break;
        }
    }
    x
}

/// One Störmer-Verlet step:
///
/// ```text
/// P' = P_n - dt/2 ∇_R H(R_n, P', t_n)
/// R_{n+1} = R_n + dt/2 [∇_P H(R_n, P', t_m) + ∇_P H(R_{n+1}, P', t_m)]
/// P_{n+1} = P' - dt/2 ∇_R H(R_{n+1}, P', t_{n+1})
/// ```
///
/// with `t_m = t_n + dt/2`. Implicit stages are solved by fixed-point
/// iteration unless the Hamiltonian is separable.
pub fn stormer_verlet_step<H: ClassicalHamiltonian + ?Sized>(h: &H, s: &ClassicalState, dt: f64) -> ClassicalState {
    let t0 = s.t;
    let tm = t0 + 0.5 * dt;
    let t1 = t0 + dt;
    let half = 0.5 * dt;
    let (p_half, r1) = if h.separable() {
        let p_half = axpy3(&s.p, -half, &h.grad_r(&s.r, &s.p, t0));
        let v = h.grad_p(&s.r, &p_half, tm);
        (p_half, axpy3(&s.r, dt, &v))
    } else {
        let p_half = fixed_point(s.p, |p| axpy3(&s.p, -half, &h.grad_r(&s.r, p, t0)));
        let v0 = h.grad_p(&s.r, &p_half, tm);
        let r1 = fixed_point(axpy3(&s.r, dt, &v0), |r| {
            let v1 = h.grad_p(r, &p_half, tm);
            axpy3(&s.r, half, &[v0[0] + v1[0], v0[1] + v1[1], v0[2] + v1[2]])
        });
        (p_half, r1)
    };
    let p1 = axpy3(&p_half, -half, &h.grad_r(&r1, &p_half, t1));
    ClassicalState::new(r1, p1, t1)
}

/// `H_cl` with electron moments linearly interpolated across one step.
pub struct EffectiveHamiltonian<'a> {
    pub start: ElectronMoments,
    pub end: ElectronMoments,
    pub t0: f64,
    pub dt: f64,
    pub pulse: &'a LaserPulse,
    pub total_mass: f64,
}

impl EffectiveHamiltonian<'_> {
    fn moments_at(&self, t: f64) -> ElectronMoments {
        self.start.lerp(&self.end, (t - self.t0) / self.dt)
    }
}

impl ClassicalHamiltonian for EffectiveHamiltonian<'_> {
    fn energy(&self, r: &[f64; 3], p: &[f64; 3], t: f64) -> f64 {
        let m = self.moments_at(t);
        let f = hcl_force(&m, t, self.pulse);
        let kinetic = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / (2.0 * self.total_mass);
        // H_cl is linear in R with slope -force.
        kinetic - (f[0] * r[0] + f[1] * r[1] + f[2] * r[2])
    }

    fn grad_r(&self, _r: &[f64; 3], _p: &[f64; 3], t: f64) -> [f64; 3] {
        hcl_force(&self.moments_at(t), t, self.pulse).map(|f| -f)
    }

    fn grad_p(&self, _r: &[f64; 3], p: &[f64; 3], _t: f64) -> [f64; 3] {
        p.map(|v| v / self.total_mass)
    }

    fn separable(&self) -> bool {
        true
    }
}

/// Störmer-Verlet step of the center of mass with the electron moments
/// given at both ends of the step.
pub fn classical_step(
    cm: &ClassicalState,
    start: &ElectronMoments,
    end: &ElectronMoments,
    dt: f64,
    pulse: &LaserPulse,
    constants: &PhysicalConstants,
) -> ClassicalState {
    let h = EffectiveHamiltonian {
        start: *start,
        end: *end,
        t0: cm.t,
        dt,
        pulse,
        total_mass: constants.total_mass(),
    };
    stormer_verlet_step(&h, cm, dt)
}

/// First two stages: `(P', R_{n+1})`.
pub fn half_kick_and_drift(cm: &ClassicalState, force: &[f64; 3], dt: f64, total_mass: f64) -> ([f64; 3], [f64; 3]) {
    let p_half = axpy3(&cm.p, 0.5 * dt, force);
    let r1 = axpy3(&cm.r, dt / total_mass, &p_half);
    (p_half, r1)
}

/// Final stage: `P_{n+1} = P' + dt/2 F(t_{n+1})`.
pub fn final_kick(p_half: &[f64; 3], force: &[f64; 3], dt: f64) -> [f64; 3] {
    axpy3(p_half, 0.5 * dt, force)
}

/// Coupled propagation of one run.
pub struct Simulation {
    grid: Arc<DvrGrid>,
    pulse: LaserPulse,
    constants: PhysicalConstants,
    plan: PropagationPlan,
    quantum: QuantumPropagator,
}

/// Summary of a completed (or resumed and completed) run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunStatistics {
    pub steps: u64,
    pub max_norm_drift: f64,
    pub absorbed: f64,
    pub max_coupling_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub state: CoupledState,
    pub series: TimeSeries,
    pub stats: RunStatistics,
}

impl Simulation {
    pub fn new(
        grid: &Arc<DvrGrid>,
        pulse: &LaserPulse,
        constants: &PhysicalConstants,
        plan: PropagationPlan,
    ) -> Result<Self> {
        plan.validate()?;
        let quantum = QuantumPropagator::new(grid, pulse, constants, plan.dt, plan.coupling_solver)
            .with_tolerances(plan.krylov_tolerance, plan.max_krylov);
        Ok(Self {
            grid: Arc::clone(grid),
            pulse: *pulse,
            constants: *constants,
            plan,
            quantum,
        })
    }

    pub fn plan(&self) -> &PropagationPlan {
        &self.plan
    }

    pub fn pulse(&self) -> &LaserPulse {
        &self.pulse
    }

    pub fn grid(&self) -> &Arc<DvrGrid> {
        &self.grid
    }

    /// State at `t_start`.
    pub fn initial_state(&self, psi: Wavefunction, cm: ClassicalState) -> CoupledState {
        CoupledState::new(psi, cm, 0, self.plan.t_start)
    }

    pub fn new_series(&self) -> Result<TimeSeries> {
        TimeSeries::new(self.plan.t_start, self.plan.dt * self.plan.record_stride as f64)
    }

    fn cm_coupled(&self) -> bool {
        !self.plan.freeze_cm && self.pulse.alpha() != 0.0
    }

    fn force(&self, state: &mut CoupledState, t: f64) -> Result<[f64; 3]> {
        if !self.cm_coupled() || self.pulse.amplitude(t) == 0.0 {
            return Ok([0.0; 3]);
        }
        Ok(hcl_force(&state.moments()?, t, &self.pulse))
    }

    /// Advances `state` by one step. On error `state` is unchanged.
    pub fn step(&self, state: &mut CoupledState) -> Result<StepReport> {
        let dt = self.plan.dt;
        let t0 = self.plan.time(state.step);
        let t1 = self.plan.time(state.step + 1);
        let m_total = self.constants.total_mass();
        let force0 = self.force(state, t0)?;
        let (p_half, r1) = if self.plan.freeze_cm {
            (state.cm.p, state.cm.r)
        } else {
            half_kick_and_drift(&state.cm, &force0, dt, m_total)
        };
        let r_mid = [0, 1, 2].map(|i| 0.5 * (state.cm.r[i] + r1[i]));

        let mut psi = state.psi.clone();
        let report = self.quantum.step(&mut psi, t0, r_mid)?;
        if report.norm_drift > self.plan.unitarity_tolerance {
            return Err(Error::NumericalHealth(format!(
                "norm changed by {:.3e} in step {} (t={t0}), tolerance {:.1e}; reduce dt",
                report.norm_drift, state.step, self.plan.unitarity_tolerance
            )));
        }
        let mut next = CoupledState::new(psi, ClassicalState::new(r1, p_half, t1), state.step + 1, t1);
        let force1 = self.force(&mut next, t1)?;
        if !self.plan.freeze_cm {
            next.cm.p = final_kick(&p_half, &force1, dt);
        }
        if !next.cm.is_finite() {
            return Err(Error::NumericalHealth(format!("non-finite center-of-mass state at t={t1}")));
        }
        *state = next;
        Ok(report)
    }

    pub fn sample(&self, state: &mut CoupledState) -> Result<Sample> {
        let t = state.t();
        Ok(Sample {
            t,
            cm: state.cm,
            moments: state.moments()?,
            norm: state.psi.norm_sqr().sqrt(),
            field: self.pulse.field_at(t, 0.0),
        })
    }

    fn record(&self, state: &mut CoupledState, series: &mut TimeSeries) -> Result<()> {
        let stride = self.plan.record_stride as u64;
        if state.step.is_multiple_of(stride) && series.len() as u64 == state.step / stride {
            let s = self.sample(state)?;
            series.push(s)?;
        }
        Ok(())
    }

    /// Propagates `state` to `t_end`, recording into `series`.
    ///
    /// `observer` runs after every completed step. On error, `state` and
    /// `series` hold the last completed step.
    pub fn run(
        &self,
        state: &mut CoupledState,
        series: &mut TimeSeries,
        mut observer: impl FnMut(&CoupledState, &TimeSeries) -> Result<()>,
    ) -> Result<RunStatistics> {
        let n_steps = self.plan.n_steps();
        let mut stats = RunStatistics::default();
        self.record(state, series)?;
        while state.step < n_steps {
            let report = self.step(state)?;
            stats.steps += 1;
            stats.max_norm_drift = stats.max_norm_drift.max(report.norm_drift);
            stats.absorbed += report.absorbed;
            stats.max_coupling_iterations = stats.max_coupling_iterations.max(report.coupling_iterations);
            self.record(state, series)?;
            observer(state, series)?;
        }
        Ok(stats)
    }

    /// Runs from a fresh initial condition.
    pub fn run_from(&self, psi: Wavefunction, cm: ClassicalState) -> Result<RunResult> {
        let mut state = self.initial_state(psi, cm);
        let mut series = self.new_series()?;
        let stats = self.run(&mut state, &mut series, |_, _| Ok(()))?;
        Ok(RunResult { state, series, stats })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};
    use crate::hydrogen::{eigenstate, BoundStateLabel};
    use crate::potentials::{apply_hamiltonian, electron_moments};
    use crate::testing::random_compact_state;

    fn small_grid() -> Arc<DvrGrid> {
        build_grid(GridSpec::new(30.0, 120, 5, 5)).unwrap()
    }

    struct Oscillator;

    impl ClassicalHamiltonian for Oscillator {
        fn energy(&self, r: &[f64; 3], p: &[f64; 3], _t: f64) -> f64 {
            0.5 * (p[0] * p[0] + r[0] * r[0])
        }
        fn grad_r(&self, r: &[f64; 3], _p: &[f64; 3], _t: f64) -> [f64; 3] {
            [r[0], 0.0, 0.0]
        }
        fn grad_p(&self, _r: &[f64; 3], p: &[f64; 3], _t: f64) -> [f64; 3] {
            [p[0], 0.0, 0.0]
        }
        fn separable(&self) -> bool {
            true
        }
    }

    /// `H = (1 + ε R²) P²/2 + R²/2`, not separable.
    struct Coupled(f64);

    impl ClassicalHamiltonian for Coupled {
        fn energy(&self, r: &[f64; 3], p: &[f64; 3], _t: f64) -> f64 {
            0.5 * (1.0 + self.0 * r[0] * r[0]) * p[0] * p[0] + 0.5 * r[0] * r[0]
        }
        fn grad_r(&self, r: &[f64; 3], p: &[f64; 3], _t: f64) -> [f64; 3] {
            [self.0 * r[0] * p[0] * p[0] + r[0], 0.0, 0.0]
        }
        fn grad_p(&self, r: &[f64; 3], p: &[f64; 3], _t: f64) -> [f64; 3] {
            [(1.0 + self.0 * r[0] * r[0]) * p[0], 0.0, 0.0]
        }
    }

    #[test]
    fn free_particle_drifts() {
        let c = PhysicalConstants::default();
        let p = LaserPulse::new(0.05, 0.5, 2, c.alpha).unwrap();
        let m = ElectronMoments::default();
        let s = ClassicalState::new([1.0, 2.0, 3.0], [0.5, -0.2, 0.1], 100.0);
        let out = classical_step(&s, &m, &m, 0.3, &p, &c);
        assert_eq!(out.p, s.p);
        for i in 0..3 {
            assert!((out.r[i] - (s.r[i] + 0.3 * s.p[i] / c.total_mass())).abs() < 1e-15);
        }
    }

    #[test]
    fn local_error_is_third_order() {
        let c = PhysicalConstants::default();
        let pulse = LaserPulse::new(0.05, 0.5, 2, 0.2).unwrap();
        let m0 = ElectronMoments {
            x: 0.3,
            z: -0.2,
            px: 0.1,
            py: 0.0,
            pz: 0.4,
            t: 0.0,
        };
        let s = ClassicalState::new([0.0; 3], [0.01, 0.0, -0.02], 1.0);
        let defect = |dt: f64| {
            let one = classical_step(&s, &m0, &m0, dt, &pulse, &c);
            let h = classical_step(&s, &m0, &m0, dt / 2.0, &pulse, &c);
            let two = classical_step(&h, &m0, &m0, dt / 2.0, &pulse, &c);
            dist3(&one.p, &two.p)
        };
        let ratio = defect(0.2) / defect(0.1);
        assert!((ratio.log2() - 3.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn separable_and_implicit_paths_agree() {
        struct Implicit;
        impl ClassicalHamiltonian for Implicit {
            fn energy(&self, r: &[f64; 3], p: &[f64; 3], t: f64) -> f64 {
                Oscillator.energy(r, p, t)
            }
            fn grad_r(&self, r: &[f64; 3], p: &[f64; 3], t: f64) -> [f64; 3] {
                Oscillator.grad_r(r, p, t)
            }
            fn grad_p(&self, r: &[f64; 3], p: &[f64; 3], t: f64) -> [f64; 3] {
                Oscillator.grad_p(r, p, t)
            }
        }
        let s = ClassicalState::new([1.0, 0.0, 0.0], [0.3, 0.0, 0.0], 0.0);
        let a = stormer_verlet_step(&Oscillator, &s, 0.1);
        let b = stormer_verlet_step(&Implicit, &s, 0.1);
        assert!(dist3(&a.r, &b.r) < 1e-14 && dist3(&a.p, &b.p) < 1e-14);
    }

    #[test]
    fn nonseparable_energy_is_bounded() {
        let h = Coupled(0.3);
        let mut s = ClassicalState::new([1.0, 0.0, 0.0], [0.0, 0.0, 0.0], 0.0);
        let e0 = h.energy(&s.r, &s.p, 0.0);
        let mut worst: f64 = 0.0;
        for _ in 0..20_000 {
            s = stormer_verlet_step(&h, &s, 0.05);
            worst = worst.max((h.energy(&s.r, &s.p, s.t) - e0).abs());
        }
        assert!(worst < 1e-2, "{worst}");
    }

    #[test]
    fn lanczos_matches_dense_exponential() {
        let g = small_grid();
        let psi = random_compact_state(&g, 3, 8.0);
        let apply = |v: &Array2<C64>| coupling_raw(&g, v, Some(&cm_lever(&g, [0.4, 0.0, -0.3])));
        let tau = 0.05;
        let (a, m) = lanczos_exp(apply, psi.amplitudes(), tau, 1e-14, 40).unwrap();
        assert!(m > 1);
        // Taylor series oracle with many terms.
        let mut term = psi.amplitudes().clone();
        let mut sum = term.clone();
        for k in 1..40 {
            term = apply(&term).mapv(|z| z * C64::new(0.0, -tau / k as f64));
            sum += &term;
        }
        let mut d = a.clone();
        d -= &sum;
        assert!(inner_raw(&d, &d).re.sqrt() < 1e-12);
        let (b, _) = implicit_midpoint(apply, psi.amplitudes(), tau, 1e-15, 200).unwrap();
        let mut d = b;
        d -= &sum;
        // Cayley form is second order: error ~ (tau A)^3 / 12.
        assert!(inner_raw(&d, &d).re.sqrt() < 1e-3);
    }

    #[test]
    fn stationary_phase() {
        let c = PhysicalConstants::default();
        let g = build_grid(GridSpec::new(40.0, 160, 3, 3)).unwrap();
        let pulse = LaserPulse::new(0.0, 0.5, 1, c.alpha).unwrap();
        let psi = eigenstate(BoundStateLabel::ground(), &g, &c).unwrap();
        let dt = pulse.period() / PropagationPlan::DEFAULT_STEPS_PER_CYCLE as f64;
        let out = quantum_step(&psi, [0.0; 3], -100.0, dt, &pulse, &c).unwrap();
        let expected_phase = 0.5 * c.reduced_mass() * dt;
        let overlap = psi.inner(&out).unwrap();
        assert!((overlap.norm() - 1.0).abs() < 1e-12);
        assert!((overlap.arg() - expected_phase).abs() < 1e-8, "{} vs {expected_phase}", overlap.arg());
        assert!((out.t - (-100.0 + dt)).abs() < 1e-15);
    }

    #[test]
    fn step_preserves_norm_with_field() {
        let c = PhysicalConstants::default();
        let g = small_grid();
        let pulse = LaserPulse::new(0.5, 0.5, 2, 0.05).unwrap();
        let mut psi = random_compact_state(&g, 5, 8.0);
        let prop = QuantumPropagator::new(&g, &pulse, &c, 0.02, CouplingSolver::Lanczos);
        for k in 0..20 {
            let r = prop.step(&mut psi, 0.02 * k as f64, [0.3, 0.0, 0.2]).unwrap();
            assert!(r.norm_drift < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn energy_conserved_without_field_and_hamiltonian_consistent() {
        let c = PhysicalConstants::default();
        let g = small_grid();
        let pulse = LaserPulse::new(0.0, 0.5, 1, c.alpha).unwrap();
        let mut psi = random_compact_state(&g, 6, 6.0);
        let e = |p: &Wavefunction| p.inner(&apply_hamiltonian(p, 0.0, [0.0; 3], &pulse, &c)).unwrap().re;
        let e0 = e(&psi);
        let prop = QuantumPropagator::new(&g, &pulse, &c, 0.01, CouplingSolver::Lanczos);
        for k in 0..50 {
            prop.step(&mut psi, 0.01 * k as f64, [0.0; 3]).unwrap();
        }
        assert!((e(&psi) - e0).abs() < 1e-10 * e0.abs().max(1.0));
    }

    #[test]
    fn dipole_only_run_keeps_cm_momentum() {
        let c = PhysicalConstants::default();
        let g = small_grid();
        let pulse = LaserPulse::new(0.05, 0.5, 1, c.alpha).unwrap().dipole_only();
        let (t0, t1) = pulse.support();
        let plan = PropagationPlan::for_pulse(&pulse, 200, t0, t1).unwrap().with_record_stride(10);
        let sim = Simulation::new(&g, &pulse, &c, plan).unwrap();
        let psi = eigenstate(BoundStateLabel::ground(), &g, &c).unwrap();
        let p0 = [1e-3, -2e-3, 5e-4];
        let res = sim.run_from(psi, ClassicalState::new([0.0; 3], p0, 0.0)).unwrap();
        assert_eq!(res.state.step, 200);
        for s in res.series.samples() {
            assert_eq!(s.cm.p, p0);
        }
        assert!((res.state.t() - t1).abs() < 1e-12);
        assert_eq!(res.state.psi.t, res.state.cm.t);
    }

    #[test]
    fn frozen_cm_stays_put() {
        let c = PhysicalConstants::default();
        let g = small_grid();
        let pulse = LaserPulse::new(0.05, 0.5, 1, c.alpha).unwrap();
        let (t0, t1) = pulse.support();
        let plan = PropagationPlan::for_pulse(&pulse, 100, t0, t1).unwrap().with_freeze_cm(true);
        let sim = Simulation::new(&g, &pulse, &c, plan).unwrap();
        let psi = eigenstate(BoundStateLabel::ground(), &g, &c).unwrap();
        let cm = ClassicalState::new([0.1, 0.0, 0.2], [1e-3, 0.0, 0.0], 0.0);
        let res = sim.run_from(psi, cm).unwrap();
        assert_eq!(res.state.cm.r, cm.r);
        assert_eq!(res.state.cm.p, cm.p);
    }

    #[test]
    fn resumed_run_is_bit_identical() {
        let c = PhysicalConstants::default();
        let g = small_grid();
        let pulse = LaserPulse::new(0.05, 0.5, 1, c.alpha).unwrap();
        let (t0, t1) = pulse.support();
        let plan = PropagationPlan::for_pulse(&pulse, 60, t0, t1).unwrap().with_record_stride(3);
        let sim = Simulation::new(&g, &pulse, &c, plan).unwrap();
        let psi = eigenstate(BoundStateLabel::ground(), &g, &c).unwrap();
        let full = sim.run_from(psi.clone(), ClassicalState::default()).unwrap();

        let mut state = sim.initial_state(psi, ClassicalState::default());
        let mut series = sim.new_series().unwrap();
        let mut saved = None;
        let _ = sim.run(&mut state, &mut series, |s, ser| {
            if s.step == 31 {
                saved = Some((s.psi.amplitudes().clone(), s.cm, ser.clone()));
                return Err(Error::Domain("interrupt".into()));
            }
            Ok(())
        });
        let (amp, cm, ser) = saved.unwrap();
        let psi = Wavefunction::from_amplitudes(&g, amp, cm.t).unwrap();
        let mut state = CoupledState::new(psi, cm, 31, cm.t);
        let mut series = ser;
        sim.run(&mut state, &mut series, |_, _| Ok(())).unwrap();
        assert_eq!(state.psi.amplitudes(), full.state.psi.amplitudes());
        assert_eq!(state.cm, full.state.cm);
        assert_eq!(series, full.series);
    }

    #[test]
    fn moments_cache_matches_direct_evaluation() {
        let c = PhysicalConstants::default();
        let g = small_grid();
        let psi = random_compact_state(&g, 9, 6.0);
        let mut s = CoupledState::new(psi.clone(), ClassicalState::default(), 0, 0.0);
        let a = s.moments().unwrap();
        let b = electron_moments(&psi).unwrap();
        assert_eq!(a.px, b.px);
        assert_eq!(a.z, b.z);
        let _ = c;
    }
}
