//! Linearly polarized laser pulse with a cos² envelope, and the unit
//! conversions needed to set one up from laboratory parameters.
//!
//! Everything is in atomic units. The pulse is polarized along x and
//! propagates along z; the electric field is
//! `E0 f(t) cos(ωt - kz)` with `f(t) = cos²(πt / (n_T T))` on
//! `|t| <= n_T T / 2` and exactly zero outside.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Fundamental constants in atomic units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Fine-structure constant, `1/c` in atomic units.
    pub alpha: f64,
    /// Proton mass in units of the electron mass.
    pub proton_mass: f64,
    /// Intensity corresponding to a unit field amplitude, W/cm².
    pub intensity_unit: f64,
    /// Bohr radius in nanometres.
    pub bohr_nm: f64,
}

impl PhysicalConstants {
    pub const DEFAULT_ALPHA: f64 = 1.0 / 137.0;
    pub const CODATA_PROTON_MASS: f64 = 1_836.152_673_43;
    pub const INTENSITY_UNIT: f64 = 3.51e16;
    pub const BOHR_NM: f64 = 0.052_917_721;

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    pub fn with_proton_mass(self, proton_mass: f64) -> Self {
        Self {
            proton_mass,
            ..self
        }
    }

    /// Speed of light, `1/alpha`. Infinite when the coupling is switched off.
    pub fn speed_of_light(&self) -> f64 {
        1.0 / self.alpha
    }

    pub fn electron_mass(&self) -> f64 {
        1.0
    }

    /// `M = m_e + m_p`
    pub fn total_mass(&self) -> f64 {
        self.electron_mass() + self.proton_mass
    }

    /// `mu = m_e m_p / M`
    pub fn reduced_mass(&self) -> f64 {
        self.electron_mass() / (1.0 + self.electron_mass() / self.proton_mass)
    }

    /// `(m_e/M, m_p/M)`, well defined for an infinitely heavy proton.
    pub fn mass_fractions(&self) -> (f64, f64) {
        let ratio = self.electron_mass() / self.proton_mass;
        (ratio / (1.0 + ratio), 1.0 / (1.0 + ratio))
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            alpha: Self::DEFAULT_ALPHA,
            proton_mass: Self::CODATA_PROTON_MASS,
            intensity_unit: Self::INTENSITY_UNIT,
            bohr_nm: Self::BOHR_NM,
        }
    }
}

/// Peak field strength for a given intensity, `E0 = sqrt(I / I0)`.
pub fn field_amplitude_from_intensity(intensity: f64, constants: &PhysicalConstants) -> Result<f64> {
    if !(intensity >= 0.0) || !intensity.is_finite() {
        return Err(Error::Domain(format!(
            "intensity must be finite and non-negative, got {intensity}"
        )));
    }
    Ok((intensity / constants.intensity_unit).sqrt())
}

/// Carrier angular frequency for a vacuum wavelength in nm, `ω = 2πc/λ`.
pub fn omega_from_wavelength(wavelength_nm: f64, constants: &PhysicalConstants) -> Result<f64> {
    if !(wavelength_nm > 0.0) || !wavelength_nm.is_finite() {
        return Err(Error::Domain(format!(
            "wavelength must be finite and positive, got {wavelength_nm} nm"
        )));
    }
    let wavelength_au = wavelength_nm / constants.bohr_nm;
    Ok(2.0 * PI * constants.speed_of_light() / wavelength_au)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserPulse {
    e0: f64,
    omega: f64,
    alpha: f64,
    n_cycles: u32,
}

impl LaserPulse {
    /// `alpha` fixes both the wave number `k = ω α` and the strength of the
    /// beyond-dipole couplings; pass 0 for a pure dipole pulse.
    pub fn new(e0: f64, omega: f64, n_cycles: u32, alpha: f64) -> Result<Self> {
        if !(e0 >= 0.0) || !e0.is_finite() {
            return Err(Error::Domain(format!("field amplitude must be >= 0, got {e0}")));
        }
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::Domain(format!("carrier frequency must be > 0, got {omega}")));
        }
        if n_cycles == 0 {
            return Err(Error::Domain("pulse must contain at least one cycle".into()));
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::Domain(format!("coupling alpha must be >= 0, got {alpha}")));
        }
        Ok(Self {
            e0,
            omega,
            alpha,
            n_cycles,
        })
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Coupling constant of the beyond-dipole terms.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Wave number `k = ω/c`.
    pub fn k(&self) -> f64 {
        self.omega * self.alpha
    }

    pub fn n_cycles(&self) -> u32 {
        self.n_cycles
    }

    /// Optical period `T = 2π/ω`.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn duration(&self) -> f64 {
        f64::from(self.n_cycles) * self.period()
    }

    /// `[-n_T T/2, n_T T/2]`
    pub fn support(&self) -> (f64, f64) {
        let half = 0.5 * self.duration();
        (-half, half)
    }

    pub fn envelope(&self, t: f64) -> f64 {
        let half = 0.5 * self.duration();
        if t.abs() >= half {
            return 0.0;
        }
        let c = (PI * t / self.duration()).cos();
        c * c
    }

    /// `E0 f(t)`
    pub fn amplitude(&self, t: f64) -> f64 {
        self.e0 * self.envelope(t)
    }

    pub fn field_at(&self, t: f64, z: f64) -> f64 {
        let a = self.amplitude(t);
        if a == 0.0 {
            return 0.0;
        }
        a * (self.omega * t - self.k() * z).cos()
    }

    /// Returns a copy with the beyond-dipole coupling switched off.
    pub fn dipole_only(&self) -> Self {
        Self { alpha: 0.0, ..*self }
    }
}

/// Convenience: free-function form of [`LaserPulse::envelope`].
pub fn envelope(t: f64, pulse: &LaserPulse) -> f64 {
    pulse.envelope(t)
}

pub fn field_at(t: f64, z: f64, pulse: &LaserPulse) -> f64 {
    pulse.field_at(t, z)
}
