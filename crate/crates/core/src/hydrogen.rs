//! Analytic bound states of the field-free reduced-mass hydrogen atom,
//! used for initial conditions and for shell populations `W_n`.
//!
//! The Bohr radius is `1/μ` and the energies are `-μ/(2n²)`, matching the
//! `p²/2μ - 1/r` Hamiltonian the electron is propagated with.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::{from_spectral, to_spectral, DvrGrid, Wavefunction};
use crate::laser::PhysicalConstants;
use crate::quadrature::laguerre;

/// Sampled states whose quadrature norm misses 1 by more than this are
/// rejected as not fitting on the grid.
pub const MAX_RENORMALIZATION: f64 = 1e-3;
const WARN_RENORMALIZATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundStateLabel {
    pub n: usize,
    pub l: usize,
    pub m: i64,
}

impl BoundStateLabel {
    pub fn new(n: usize, l: usize, m: i64) -> Result<Self> {
        let label = Self { n, l, m };
        let fail = |reason: &str| Error::Label {
            n,
            l,
            m,
            reason: reason.to_string(),
        };
        if n == 0 {
            return Err(fail("n must be >= 1"));
        }
        if l >= n {
            return Err(fail("l must be < n"));
        }
        if m.unsigned_abs() as usize > l {
            return Err(fail("|m| must be <= l"));
        }
        Ok(label)
    }

    pub fn ground() -> Self {
        Self { n: 1, l: 0, m: 0 }
    }
}

impl std::fmt::Display for BoundStateLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{}", self.n, self.l, self.m)
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `R_nl(r)` for Bohr radius `1/mu`.
pub fn radial_function(n: usize, l: usize, mu: f64, r: f64) -> f64 {
    let nf = n as f64;
    let rho = 2.0 * mu * r / nf;
    let norm = ((2.0 * mu / nf).powi(3) * factorial(n - l - 1) / (2.0 * nf * factorial(n + l))).sqrt();
    norm * rho.powi(l as i32) * (-0.5 * rho).exp() * laguerre(n - l - 1, (2 * l + 1) as f64, rho)
}

pub fn energy(n: usize, constants: &PhysicalConstants) -> f64 {
    -constants.reduced_mass() / (2.0 * (n * n) as f64)
}

/// Radial amplitudes `sqrt(W_j) r_j R_nl(r_j)` renormalized by quadrature,
/// with the size of the correction.
fn radial_amplitudes(grid: &DvrGrid, n: usize, l: usize, mu: f64) -> (Vec<f64>, f64) {
    let rad = grid.radial();
    let mut v: Vec<f64> = rad
        .nodes()
        .iter()
        .zip(rad.weights())
        .map(|(&r, &w)| w.sqrt() * r * radial_function(n, l, mu, r))
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    (v, (norm - 1.0).abs())
}

/// `(channel index, coefficient)` pairs building the complex harmonic
/// `Y_l^m` (Condon-Shortley phase) from real channels.
fn complex_harmonic_channels(grid: &DvrGrid, label: BoundStateLabel) -> Result<Vec<(usize, C64)>> {
    let ang = grid.angular();
    let unavailable = |reason: String| Error::Label {
        n: label.n,
        l: label.l,
        m: label.m,
        reason,
    };
    if label.l > ang.l_max() {
        return Err(unavailable(format!("l exceeds grid l_max = {}", ang.l_max())));
    }
    if label.m.unsigned_abs() as usize > ang.m_max() {
        return Err(unavailable(format!("|m| exceeds grid m_max = {}", ang.m_max())));
    }
    let ch = |m: i64| ang.channel_index(label.l, m).expect("channel in range");
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let am = label.m.abs();
    Ok(match label.m {
        0 => vec![(ch(0), C64::new(1.0, 0.0))],
        m if m > 0 => {
            let sign = if am % 2 == 0 { 1.0 } else { -1.0 };
            vec![(ch(am), C64::new(sign * s, 0.0)), (ch(-am), C64::new(0.0, sign * s))]
        }
        _ => vec![(ch(am), C64::new(s, 0.0)), (ch(-am), C64::new(0.0, -s))],
    })
}

/// `φ_nlm` sampled on the grid and renormalized by quadrature.
pub fn eigenstate(label: BoundStateLabel, grid: &Arc<DvrGrid>, constants: &PhysicalConstants) -> Result<Wavefunction> {
    let label = BoundStateLabel::new(label.n, label.l, label.m)?;
    let terms = complex_harmonic_channels(grid, label)?;
    let (radial, deviation) = radial_amplitudes(grid, label.n, label.l, constants.reduced_mass());
    if deviation > MAX_RENORMALIZATION {
        return Err(Error::Label {
            n: label.n,
            l: label.l,
            m: label.m,
            reason: format!(
                "state does not fit on the grid (r_max = {}): quadrature norm off by {deviation:.3e}",
                grid.spec().r_max
            ),
        });
    }
    if deviation > WARN_RENORMALIZATION {
        log::warn!("eigenstate {label} renormalized by {deviation:.3e}; grid may be too small");
    }
    let mut coef = Array2::<C64>::zeros(grid.shape());
    for (k, c) in terms {
        for (j, &v) in radial.iter().enumerate() {
            coef[[j, k]] = c * v;
        }
    }
    let spectral = crate::grid::SpectralCoefficients::from_coefficients(grid, coef)?;
    Ok(from_spectral(&spectral, 0.0))
}

/// Largest shell `n` whose states are representable and fit radially.
pub fn shell_capacity(grid: &DvrGrid, constants: &PhysicalConstants) -> (usize, String) {
    let mu = constants.reduced_mass();
    let angular_limit = grid.angular().l_max() + 1;
    for n in 1..=angular_limit {
        for l in 0..n {
            let (_, dev) = radial_amplitudes(grid, n, l, mu);
            if dev > MAX_RENORMALIZATION {
                return (n - 1, format!("shell n={n} does not fit inside r_max={}", grid.spec().r_max));
            }
        }
    }
    (angular_limit, format!("l_max = {}", grid.angular().l_max()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTable {
    /// `(n, W_n)` for `n = 1..=n_max`.
    pub shells: Vec<(usize, f64)>,
    pub t: f64,
    /// `1 - Σ W_n`: continuum, higher shells, and absorbed norm.
    pub residual: f64,
}

impl PopulationTable {
    pub fn get(&self, n: usize) -> Option<f64> {
        self.shells.iter().find(|(k, _)| *k == n).map(|(_, w)| *w)
    }

    pub fn total(&self) -> f64 {
        self.shells.iter().map(|(_, w)| w).sum()
    }
}

/// `W_n = Σ_lm |<φ_nlm|ψ>|²` for `n <= n_max`.
///
/// Magnetic sub-levels with `|m|` beyond the grid's azimuthal resolution
/// are absent from the discrete space, so they contribute nothing.
pub fn populations(psi: &Wavefunction, n_max: usize, constants: &PhysicalConstants) -> Result<PopulationTable> {
    let grid = psi.grid();
    let (limit, reason) = shell_capacity(grid, constants);
    if n_max > limit {
        return Err(Error::Capacity {
            requested: n_max,
            limit,
            reason,
        });
    }
    let mu = constants.reduced_mass();
    let spectral = to_spectral(psi);
    let coef = spectral.coefficients();
    let channels = grid.channels();
    let mut shells = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let mut w = 0.0;
        for l in 0..n {
            let (radial, _) = radial_amplitudes(grid, n, l, mu);
            for (k, _) in channels.iter().enumerate().filter(|(_, c)| c.exact && c.l == l) {
                let overlap: C64 = radial.iter().enumerate().map(|(j, &v)| v * coef[[j, k]]).sum();
                w += overlap.norm_sqr();
            }
        }
        shells.push((n, w));
    }
    let total: f64 = shells.iter().map(|(_, w)| w).sum();
    Ok(PopulationTable {
        shells,
        t: psi.t,
        residual: 1.0 - total,
    })
}
