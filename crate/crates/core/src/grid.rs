//! Product grid (radial FEDVR × angular DVR), the gridded wavefunction, and
//! the one-body operators acting on it.
//!
//! Wavefunction amplitudes are stored quadrature-weighted,
//! `u[j, a] = sqrt(W_j w_a) r_j ψ(r_j, Ω_a)`, so every inner product is a
//! plain sum and every operator below is Hermitian as a matrix.
//!
//! Cartesian momenta use the commutator form `p_s = i [K, s]` with `K` the
//! discrete `-∇²/2`. This keeps them Hermitian on the grid and makes the
//! discrete Ehrenfest relation `d<s>/dt = <p_s>/μ` hold exactly for the
//! field-free Hamiltonian.

use std::sync::Arc;

use ndarray::{Array2, Axis, Zip};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::angular::{AngularGrid, Channel};
use crate::error::{Error, Result};
use crate::radial::RadialGrid;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub r_max: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    /// Polynomial order of the radial finite elements.
    pub radial_order: usize,
    /// Fraction of `[0, r_max]` covered by the absorbing mask; 0 disables it.
    pub absorber_fraction: f64,
    pub absorber_exponent: f64,
}

impl GridSpec {
    pub const DEFAULT_RADIAL_ORDER: usize = 8;

    pub fn new(r_max: f64, n_r: usize, n_theta: usize, n_phi: usize) -> Self {
        Self {
            r_max,
            n_r,
            n_theta,
            n_phi,
            radial_order: Self::DEFAULT_RADIAL_ORDER,
            absorber_fraction: 0.0,
            absorber_exponent: 8.0,
        }
    }

    pub fn with_absorber(self, fraction: f64, exponent: f64) -> Self {
        Self {
            absorber_fraction: fraction,
            absorber_exponent: exponent,
            ..self
        }
    }

    pub fn with_radial_order(self, order: usize) -> Self {
        Self {
            radial_order: order,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_max > 0.0) || !self.r_max.is_finite() {
            return Err(Error::Grid(format!("r_max must be positive, got {}", self.r_max)));
        }
        if self.n_r < 16 {
            return Err(Error::Grid(format!("N_r must be >= 16, got {}", self.n_r)));
        }
        for (name, n) in [("N_theta", self.n_theta), ("N_phi", self.n_phi)] {
            if n < 3 || n % 2 == 0 {
                return Err(Error::Grid(format!("{name} must be odd and >= 3, got {n}")));
            }
        }
        if !(0.0..1.0).contains(&self.absorber_fraction) {
            return Err(Error::Grid(format!(
                "absorber fraction must lie in [0, 1), got {}",
                self.absorber_fraction
            )));
        }
        if !(self.absorber_exponent > 0.0) {
            return Err(Error::Grid(format!(
                "absorber exponent must be positive, got {}",
                self.absorber_exponent
            )));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct DvrGrid {
    spec: GridSpec,
    radial: RadialGrid,
    angular: AngularGrid,
    mask: Vec<f64>,
    inv_2r2: Vec<f64>,
    x: Array2<f64>,
    y: Array2<f64>,
    z: Array2<f64>,
    basis: Array2<C64>,
    basis_t: Array2<C64>,
    ly_t: Array2<C64>,
}

pub fn build_grid(spec: GridSpec) -> Result<Arc<DvrGrid>> {
    DvrGrid::new(spec).map(Arc::new)
}

impl DvrGrid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let radial = RadialGrid::new(spec.r_max, spec.n_r, spec.radial_order)?;
        let angular = AngularGrid::new(spec.n_theta, spec.n_phi)?;
        let r = radial.nodes();
        let r_absorb = (1.0 - spec.absorber_fraction) * spec.r_max;
        let mask = r
            .iter()
            .map(|&r| {
                if spec.absorber_fraction == 0.0 || r < r_absorb {
                    1.0
                } else {
                    let s = (r - r_absorb) / (spec.r_max - r_absorb);
                    (0.5 * std::f64::consts::PI * s).cos().max(0.0).powf(spec.absorber_exponent)
                }
            })
            .collect();
        let inv_2r2 = r.iter().map(|&r| 0.5 / (r * r)).collect();
        let dirs = angular.directions();
        let coord = |c: usize| Array2::from_shape_fn((r.len(), dirs.len()), |(j, a)| r[j] * dirs[a][c]);
        let basis = angular.basis().mapv(|v| C64::new(v, 0.0));
        let basis_t = basis.t().to_owned();
        let ly_t = angular.ly().t().to_owned();
        Ok(Self {
            x: coord(0),
            y: coord(1),
            z: coord(2),
            spec,
            radial,
            angular,
            mask,
            inv_2r2,
            basis,
            basis_t,
            ly_t,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn radial(&self) -> &RadialGrid {
        &self.radial
    }

    pub fn angular(&self) -> &AngularGrid {
        &self.angular
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.radial.len(), self.angular.len())
    }

    pub fn len(&self) -> usize {
        self.radial.len() * self.angular.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cartesian coordinate arrays on the grid, `[j, a]`.
    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn z(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn mask(&self) -> &[f64] {
        &self.mask
    }

    /// Channels in spectral order.
    pub fn channels(&self) -> &[Channel] {
        self.angular.channels()
    }

    /// Amplitude weight `sqrt(W_j w_a) r_j` converting ψ values to amplitudes.
    pub fn amplitude_weight(&self, j: usize, a: usize) -> f64 {
        (self.radial.weights()[j] * self.angular.weights()[a]).sqrt() * self.radial.nodes()[j]
    }

    /// `-∇²/2` (unit mass) applied to weighted amplitudes.
    pub fn kinetic(&self, u: &Array2<C64>) -> Array2<C64> {
        let mut out = u.dot(self.angular.l_squared());
        out.axis_iter_mut(Axis(0))
            .zip(&self.inv_2r2)
            .for_each(|(mut row, &s)| row.mapv_inplace(|v| v * s));
        self.add_radial_kinetic(u, &mut out);
        out
    }

    /// `out += (K_r ⊗ 1) u`
    fn add_radial_kinetic(&self, u: &Array2<C64>, out: &mut Array2<C64>) {
        let k = self.radial.kinetic();
        let n_ang = u.ncols();
        let u_slice = u.as_slice().expect("standard layout");
        out.as_slice_mut()
            .expect("standard layout")
            .par_chunks_mut(n_ang)
            .enumerate()
            .for_each(|(i, row)| {
                for j in k.columns(i) {
                    let kij = k.get(i, j);
                    let src = &u_slice[j * n_ang..(j + 1) * n_ang];
                    for (o, s) in row.iter_mut().zip(src) {
                        *o += kij * s;
                    }
                }
            });
    }

    pub fn apply_ly_raw(&self, u: &Array2<C64>) -> Array2<C64> {
        u.dot(&self.ly_t)
    }

    /// `i [K, s]` for a real diagonal multiplier `s`.
    pub fn commutator_momentum(&self, s: &Array2<f64>, u: &Array2<C64>, ku: Option<&Array2<C64>>) -> Array2<C64> {
        let su = mul_real(s, u);
        let ksu = self.kinetic(&su);
        let owned;
        let ku = match ku {
            Some(k) => k,
            None => {
                owned = self.kinetic(u);
                &owned
            }
        };
        let mut out = ksu;
        Zip::from(&mut out).and(s).and(ku).for_each(|o, &sv, &k| {
            *o = I * (*o - sv * k);
        });
        out
    }

    /// Orthogonal angular basis `[angular node, channel]`.
    pub(crate) fn basis(&self) -> &Array2<C64> {
        &self.basis
    }

    pub(crate) fn basis_t(&self) -> &Array2<C64> {
        &self.basis_t
    }

    pub fn to_spectral_raw(&self, u: &Array2<C64>) -> Array2<C64> {
        u.dot(&self.basis)
    }

    pub fn from_spectral_raw(&self, c: &Array2<C64>) -> Array2<C64> {
        c.dot(&self.basis_t)
    }
}

pub(crate) fn mul_real(s: &Array2<f64>, u: &Array2<C64>) -> Array2<C64> {
    let mut out = u.clone();
    Zip::from(&mut out).and(s).for_each(|o, &sv| *o *= sv);
    out
}

#[derive(Debug, Clone)]
pub struct Wavefunction {
    grid: Arc<DvrGrid>,
    amp: Array2<C64>,
    /// Time the amplitudes refer to.
    pub t: f64,
}

impl Wavefunction {
    pub fn zeros(grid: &Arc<DvrGrid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            amp: Array2::zeros(grid.shape()),
            t: 0.0,
        }
    }

    pub fn from_amplitudes(grid: &Arc<DvrGrid>, amp: Array2<C64>, t: f64) -> Result<Self> {
        if amp.dim() != grid.shape() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: Arc::clone(grid),
            amp: amp.as_standard_layout().into_owned(),
            t,
        })
    }

    /// Samples `ψ(r, cos θ, φ)` on the grid.
    pub fn from_fn(grid: &Arc<DvrGrid>, f: impl Fn(f64, f64, f64) -> C64) -> Self {
        let r = grid.radial().nodes();
        let amp = Array2::from_shape_fn(grid.shape(), |(j, a)| {
            let (x, phi) = grid.angular().point(a);
            f(r[j], x, phi) * grid.amplitude_weight(j, a)
        });
        Self {
            grid: Arc::clone(grid),
            amp,
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Arc<DvrGrid> {
        &self.grid
    }

    pub fn amplitudes(&self) -> &Array2<C64> {
        &self.amp
    }

    pub fn amplitudes_mut(&mut self) -> &mut Array2<C64> {
        &mut self.amp
    }

    pub fn into_amplitudes(self) -> Array2<C64> {
        self.amp
    }

    /// Same grid and time, new amplitudes.
    pub(crate) fn with_amplitudes(&self, amp: Array2<C64>) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            amp,
            t: self.t,
        }
    }

    /// ψ at grid node `(j, a)`.
    pub fn value(&self, j: usize, a: usize) -> C64 {
        self.amp[[j, a]] / self.grid.amplitude_weight(j, a)
    }

    pub fn same_grid(&self, other: &Wavefunction) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.spec() == other.grid.spec()
    }

    pub fn check_grid(&self, other: &Wavefunction) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `<self|other>` by grid quadrature.
    pub fn inner(&self, other: &Wavefunction) -> Result<C64> {
        self.check_grid(other)?;
        Ok(inner_raw(&self.amp, &other.amp))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&mut self, s: C64) {
        self.amp.mapv_inplace(|v| v * s);
    }

    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            self.amp.mapv_inplace(|v| v / n);
        }
        n
    }

    /// `self + s other`
    pub fn axpy(&mut self, s: C64, other: &Wavefunction) -> Result<()> {
        self.check_grid(other)?;
        Zip::from(&mut self.amp).and(&other.amp).for_each(|a, &b| *a += s * b);
        Ok(())
    }

    /// Multiplies by a real function of the Cartesian position.
    pub fn multiply(&self, f: impl Fn(f64, f64, f64) -> f64) -> Wavefunction {
        let g = &self.grid;
        let mut amp = self.amp.clone();
        Zip::indexed(&mut amp).for_each(|(j, a), v| {
            *v *= f(g.x[[j, a]], g.y[[j, a]], g.z[[j, a]]);
        });
        self.with_amplitudes(amp)
    }
}

pub(crate) fn inner_raw(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Coefficients of a wavefunction in the (radial node × angular channel)
/// representation.
#[derive(Debug, Clone)]
pub struct SpectralCoefficients {
    grid: Arc<DvrGrid>,
    coef: Array2<C64>,
}

impl SpectralCoefficients {
    pub fn grid(&self) -> &Arc<DvrGrid> {
        &self.grid
    }

    /// `[radial node, channel]`, channels ordered as [`DvrGrid::channels`].
    pub fn coefficients(&self) -> &Array2<C64> {
        &self.coef
    }

    pub fn from_coefficients(grid: &Arc<DvrGrid>, coef: Array2<C64>) -> Result<Self> {
        if coef.dim() != grid.shape() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: Arc::clone(grid),
            coef,
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coef.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Probability carried by each channel.
    pub fn channel_weights(&self) -> Vec<f64> {
        self.coef
            .axis_iter(Axis(1))
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }
}

pub fn to_spectral(psi: &Wavefunction) -> SpectralCoefficients {
    SpectralCoefficients {
        grid: Arc::clone(&psi.grid),
        coef: psi.grid.to_spectral_raw(&psi.amp),
    }
}

pub fn from_spectral(c: &SpectralCoefficients, t: f64) -> Wavefunction {
    Wavefunction {
        grid: Arc::clone(&c.grid),
        amp: c.grid.from_spectral_raw(&c.coef),
        t,
    }
}

/// Inverse transform onto a given grid, checking the coefficients belong to it.
pub fn from_spectral_on(grid: &Arc<DvrGrid>, c: &SpectralCoefficients, t: f64) -> Result<Wavefunction> {
    if !(Arc::ptr_eq(grid, &c.grid) || grid.spec() == c.grid.spec()) {
        return Err(Error::GridMismatch);
    }
    Ok(from_spectral(c, t))
}

/// `-∇²/2` with unit mass.
pub fn apply_kinetic(psi: &Wavefunction) -> Wavefunction {
    psi.with_amplitudes(psi.grid.kinetic(&psi.amp))
}

/// Orbital angular momentum component `l_y = z p_x - x p_z`.
pub fn apply_ly(psi: &Wavefunction) -> Wavefunction {
    psi.with_amplitudes(psi.grid.apply_ly_raw(&psi.amp))
}

pub fn apply_px(psi: &Wavefunction) -> Wavefunction {
    psi.with_amplitudes(psi.grid.commutator_momentum(&psi.grid.x, &psi.amp, None))
}

pub fn apply_py(psi: &Wavefunction) -> Wavefunction {
    psi.with_amplitudes(psi.grid.commutator_momentum(&psi.grid.y, &psi.amp, None))
}

pub fn apply_pz(psi: &Wavefunction) -> Wavefunction {
    psi.with_amplitudes(psi.grid.commutator_momentum(&psi.grid.z, &psi.amp, None))
}

pub fn apply_mask(psi: &Wavefunction) -> Wavefunction {
    let mut out = psi.clone();
    mask_in_place(&mut out);
    out
}

pub fn mask_in_place(psi: &mut Wavefunction) {
    if psi.grid.spec.absorber_fraction == 0.0 {
        return;
    }
    let grid = Arc::clone(&psi.grid);
    psi.amp
        .axis_iter_mut(Axis(0))
        .zip(grid.mask())
        .filter(|(_, &m)| m != 1.0)
        .for_each(|(mut row, &m)| row.mapv_inplace(|v| v * m));
}
