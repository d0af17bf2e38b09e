//! Recorded time series, time-averaged kinetic energies, windowed
//! spectral densities and the spectral-shape correlation between the
//! center-of-mass and electron momentum spectra.
//!
//! The spectral density of a channel `P(t)` over the window
//! `[t_in, t_out)` sampled at `t_n = t_in + n Δt`, `n < N`, is
//!
//! ```text
//! P(ω_k) = Δt Σ_n P(t_n) e^{i ω_k t_n},   ω_k = 2π k / (N Δt)
//! ```
//!
//! on the two-sided grid `k = -⌊N/2⌋ ..= ⌈N/2⌉ - 1`. With these
//! constants `Σ_k |P(ω_k)|² Δω / 2π = Δt Σ_n |P(t_n)|²` exactly, so the
//! rectangle-rule kinetic-energy average equals
//! `(1 / 2M T_w) Σ_s Σ_k |P_s(ω_k)|² Δω / 2π` with `T_w = N Δt`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::laser::PhysicalConstants;
use crate::potentials::{ClassicalState, ElectronMoments};

/// Relative tolerance on sample-time alignment.
const ALIGN_TOL: f64 = 1e-6;

/// One recorded instant of a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sample {
    pub t: f64,
    pub cm: ClassicalState,
    pub moments: ElectronMoments,
    pub norm: f64,
    /// Field at `z = 0`.
    pub field: f64,
}

impl Sample {
    pub const COLUMNS: [&'static str; 14] = [
        "t", "X", "Y", "Z", "P_x", "P_y", "P_z", "px", "py", "pz", "x", "z", "norm", "E_field",
    ];

    pub fn to_row(&self) -> [f64; 14] {
        let m = &self.moments;
        let [x, y, z] = self.cm.r;
        let [px, py, pz] = self.cm.p;
        [
            self.t, x, y, z, px, py, pz, m.px, m.py, m.pz, m.x, m.z, self.norm, self.field,
        ]
    }

    pub fn from_row(row: &[f64; 14]) -> Self {
        let t = row[0];
        Self {
            t,
            cm: ClassicalState::new([row[1], row[2], row[3]], [row[4], row[5], row[6]], t),
            moments: ElectronMoments {
                px: row[7],
                py: row[8],
                pz: row[9],
                x: row[10],
                z: row[11],
                t,
            },
            norm: row[12],
            field: row[13],
        }
    }
}

/// Scalar channels of a [`TimeSeries`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    CmX,
    CmY,
    CmZ,
    CmPx,
    CmPy,
    CmPz,
    ElectronPx,
    ElectronPy,
    ElectronPz,
    ElectronX,
    ElectronZ,
    Norm,
    Field,
}

impl Channel {
    /// The six momentum channels, in output order.
    pub const MOMENTA: [Channel; 6] = [
        Channel::CmPx,
        Channel::CmPy,
        Channel::CmPz,
        Channel::ElectronPx,
        Channel::ElectronPy,
        Channel::ElectronPz,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Channel::CmX => "X",
            Channel::CmY => "Y",
            Channel::CmZ => "Z",
            Channel::CmPx => "P_x",
            Channel::CmPy => "P_y",
            Channel::CmPz => "P_z",
            Channel::ElectronPx => "px",
            Channel::ElectronPy => "py",
            Channel::ElectronPz => "pz",
            Channel::ElectronX => "x",
            Channel::ElectronZ => "z",
            Channel::Norm => "norm",
            Channel::Field => "E_field",
        }
    }

    pub fn of(&self, s: &Sample) -> f64 {
        match self {
            Channel::CmX => s.cm.r[0],
            Channel::CmY => s.cm.r[1],
            Channel::CmZ => s.cm.r[2],
            Channel::CmPx => s.cm.p[0],
            Channel::CmPy => s.cm.p[1],
            Channel::CmPz => s.cm.p[2],
            Channel::ElectronPx => s.moments.px,
            Channel::ElectronPy => s.moments.py,
            Channel::ElectronPz => s.moments.pz,
            Channel::ElectronX => s.moments.x,
            Channel::ElectronZ => s.moments.z,
            Channel::Norm => s.norm,
            Channel::Field => s.field,
        }
    }
}

/// Uniformly sampled record `t_i = t0 + i dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    t0: f64,
    dt: f64,
    samples: Vec<Sample>,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite() && t0.is_finite()) {
            return Err(Error::Domain(format!("invalid sampling t0={t0}, dt={dt}")));
        }
        Ok(Self {
            t0,
            dt,
            samples: Vec::new(),
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Appends a sample, which must fall on the next grid time.
    pub fn push(&mut self, sample: Sample) -> Result<()> {
        let expected = self.time(self.samples.len());
        if (sample.t - expected).abs() > ALIGN_TOL * self.dt {
            return Err(Error::Window(format!(
                "sample at t={} breaks uniform sampling (expected {expected})",
                sample.t
            )));
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn truncate(&mut self, len: usize) {
        self.samples.truncate(len);
    }

    pub fn channel(&self, ch: Channel) -> Vec<f64> {
        self.samples.iter().map(|s| ch.of(s)).collect()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// Index of the sample at time `t`, which must lie on the sampling grid.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = (t - self.t0) / self.dt;
        let i = x.round();
        if (x - i).abs() > ALIGN_TOL || i < 0.0 {
            return Err(Error::Window(format!("t={t} is not a sample time")));
        }
        Ok(i as usize)
    }

    /// First index and sample count `N` of the window; samples
    /// `t_in + n Δt` for `n < N` with `N Δt = t_out - t_in`.
    pub fn window_range(&self, window: &Window) -> Result<(usize, usize)> {
        window.validate()?;
        let i0 = self.index_of(window.t_in)?;
        let i1 = self.index_of(window.t_out)?;
        let n = i1 - i0;
        if i0 + n > self.samples.len() {
            return Err(Error::Window(format!(
                "window [{}, {}] extends past the recorded span ending at {}",
                window.t_in,
                window.t_out,
                self.time(self.samples.len().saturating_sub(1))
            )));
        }
        Ok((i0, n))
    }
}

/// Integration window `[t_in, t_out]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub t_in: f64,
    pub t_out: f64,
}

impl Window {
    pub fn new(t_in: f64, t_out: f64) -> Result<Self> {
        let w = Self { t_in, t_out };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_out > self.t_in) || !self.t_in.is_finite() || !self.t_out.is_finite() {
            return Err(Error::Window(format!("empty window [{}, {}]", self.t_in, self.t_out)));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.t_out - self.t_in
    }

    pub fn shifted(&self, delta: f64) -> Self {
        Self {
            t_in: self.t_in + delta,
            t_out: self.t_out + delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Body {
    CenterOfMass,
    Electron,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadratureRule {
    #[default]
    Trapezoid,
    /// Left-point sum over the `N` window samples; matches the discrete
    /// spectral sum exactly.
    Rectangle,
}

/// Time average of `P²/2M` (center of mass) or `<p>²/2μ` (electron) over
/// the window.
pub fn kinetic_energy_average(
    series: &TimeSeries,
    window: &Window,
    body: Body,
    rule: QuadratureRule,
    constants: &PhysicalConstants,
) -> Result<f64> {
    let (i0, n) = series.window_range(window)?;
    if n == 0 {
        return Err(Error::Window("window holds no samples".into()));
    }
    let mass = match body {
        Body::CenterOfMass => constants.total_mass(),
        Body::Electron => constants.reduced_mass(),
    };
    let energy = |s: &Sample| -> f64 {
        let p = match body {
            Body::CenterOfMass => s.cm.p,
            Body::Electron => [s.moments.px, s.moments.py, s.moments.pz],
        };
        (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / (2.0 * mass)
    };
    let samples = series.samples();
    let sum = match rule {
        QuadratureRule::Rectangle => samples[i0..i0 + n].iter().map(energy).sum::<f64>(),
        QuadratureRule::Trapezoid => {
            if i0 + n >= samples.len() {
                return Err(Error::Window("trapezoid rule needs the sample at t_out".into()));
            }
            let inner: f64 = samples[i0 + 1..i0 + n].iter().map(energy).sum();
            inner + 0.5 * (energy(&samples[i0]) + energy(&samples[i0 + n]))
        }
    };
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Taper {
    #[default]
    Rectangular,
    Hann,
}

impl Taper {
    pub fn name(&self) -> &'static str {
        match self {
            Taper::Rectangular => "rectangular",
            Taper::Hann => "hann",
        }
    }

    fn weight(&self, n: usize, len: usize) -> f64 {
        match self {
            Taper::Rectangular => 1.0,
            Taper::Hann => {
                let s = (PI * n as f64 / len as f64).sin();
                s * s
            }
        }
    }
}

/// Spectral density of one channel on the two-sided frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSlice {
    pub channel: Channel,
    /// Ascending frequencies `ω_k`.
    pub omega: Vec<f64>,
    /// `|P(ω_k)|²`
    pub density: Vec<f64>,
    pub window: Window,
    pub taper: Taper,
}

impl SpectrumSlice {
    pub fn d_omega(&self) -> f64 {
        if self.omega.len() > 1 {
            self.omega[1] - self.omega[0]
        } else {
            2.0 * PI / self.window.length()
        }
    }

    pub fn nyquist(&self) -> f64 {
        PI * self.omega.len() as f64 / self.window.length()
    }

    /// `Σ_k |P(ω_k)|² Δω / 2π`
    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.d_omega() / (2.0 * PI)
    }

    /// Indices of grid frequencies in `[lo, hi)`.
    pub fn band_indices(&self, lo: f64, hi: f64) -> Result<std::ops::Range<usize>> {
        let nyq = self.nyquist();
        if lo < -nyq - 1e-12 || hi > nyq + 1e-12 {
            return Err(Error::Window(format!(
                "band [{lo}, {hi}) exceeds the Nyquist frequency {nyq}"
            )));
        }
        if !(hi > lo) {
            return Err(Error::Window(format!("empty band [{lo}, {hi})")));
        }
        let tol = 1e-9 * self.d_omega();
        let start = self.omega.partition_point(|&w| w < lo - tol);
        let end = self.omega.partition_point(|&w| w < hi - tol);
        Ok(start..end)
    }

    /// Frequency of the largest density value.
    pub fn peak(&self) -> f64 {
        let (i, _) = self
            .density
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        self.omega[i]
    }
}

/// Two-sided frequency grid for `n` samples spaced `dt`.
pub fn frequency_grid(n: usize, dt: f64) -> Vec<f64> {
    let dw = 2.0 * PI / (n as f64 * dt);
    let k0 = -((n / 2) as i64);
    (0..n as i64).map(|i| (k0 + i) as f64 * dw).collect()
}

/// `|P(ω_k)|²` of one channel over the window.
pub fn spectrum(series: &TimeSeries, window: &Window, channel: Channel, taper: Taper) -> Result<SpectrumSlice> {
    let (i0, n) = series.window_range(window)?;
    if n == 0 {
        return Err(Error::Window("window holds no samples".into()));
    }
    let dt = series.dt();
    let mut buf: Vec<C64> = series.samples()[i0..i0 + n]
        .iter()
        .enumerate()
        .map(|(k, s)| C64::new(channel.of(s) * taper.weight(k, n), 0.0))
        .collect();
    // Inverse direction: Σ_n x_n e^{+2πi kn/N}.
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let half = n / 2;
    let density = (0..n)
        .map(|i| {
            let k = (i + n - half) % n;
            (buf[k] * dt).norm_sqr()
        })
        .collect();
    Ok(SpectrumSlice {
        channel,
        omega: frequency_grid(n, dt),
        density,
        window: *window,
        taper,
    })
}

/// Spectra of all six momentum channels on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub window: Window,
    pub taper: Taper,
    pub slices: Vec<SpectrumSlice>,
}

impl Spectrum {
    pub fn compute(series: &TimeSeries, window: &Window, taper: Taper) -> Result<Self> {
        let slices = Channel::MOMENTA
            .iter()
            .map(|&ch| spectrum(series, window, ch, taper))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            omega: slices[0].omega.clone(),
            window: *window,
            taper,
            slices,
        })
    }

    pub fn slice(&self, channel: Channel) -> Option<&SpectrumSlice> {
        self.slices.iter().find(|s| s.channel == channel)
    }

    /// `(1 / 2 m T_w) Σ_s Σ_k |P_s(ω_k)|² Δω / 2π` for the given body.
    pub fn kinetic_energy(&self, body: Body, constants: &PhysicalConstants) -> f64 {
        let (channels, mass) = match body {
            Body::CenterOfMass => (&Channel::MOMENTA[..3], constants.total_mass()),
            Body::Electron => (&Channel::MOMENTA[3..], constants.reduced_mass()),
        };
        let total: f64 = channels
            .iter()
            .filter_map(|c| self.slice(*c))
            .map(SpectrumSlice::integral)
            .sum();
        total / (2.0 * mass * self.window.length())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    /// Pearson coefficient at the best lag.
    pub value: f64,
    /// Shift of `b` relative to `a`, in frequency bins.
    pub lag: i64,
    /// Number of frequency bins compared.
    pub bins: usize,
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Pearson correlation of the max-normalized densities over `[lo, hi)`,
/// maximized over shifts of `b` by up to `max_lag` bins.
pub fn spectral_shape_correlation(
    a: &SpectrumSlice,
    b: &SpectrumSlice,
    band: (f64, f64),
    max_lag: usize,
) -> Result<Correlation> {
    if a.omega.len() != b.omega.len()
        || a.omega.iter().zip(&b.omega).any(|(x, y)| (x - y).abs() > 1e-9 * a.d_omega())
    {
        return Err(Error::Window("spectra are on different frequency grids".into()));
    }
    let range = a.band_indices(band.0, band.1)?;
    if range.len() < 2 {
        return Err(Error::Degenerate(format!(
            "band [{}, {}) holds {} frequency bins",
            band.0,
            band.1,
            range.len()
        )));
    }
    let normalized = |d: &[f64]| -> Result<Vec<f64>> {
        let max = d.iter().cloned().fold(0.0, f64::max);
        if max <= 0.0 {
            return Err(Error::Degenerate("density vanishes in the band".into()));
        }
        Ok(d.iter().map(|v| v / max).collect())
    };
    let xa = normalized(&a.density[range.clone()])?;
    let mut best: Option<Correlation> = None;
    let len = b.density.len() as i64;
    for lag in -(max_lag as i64)..=max_lag as i64 {
        let lo = range.start as i64 + lag;
        let hi = range.end as i64 + lag;
        if lo < 0 || hi > len {
            continue;
        }
        let xb = normalized(&b.density[lo as usize..hi as usize])?;
        if let Some(v) = pearson(&xa, &xb) {
            if best.is_none_or(|c| v > c.value) {
                best = Some(Correlation {
                    value: v,
                    lag,
                    bins: xa.len(),
                });
            }
        }
    }
    best.ok_or_else(|| Error::Degenerate("constant spectral density in the band".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series_from(t0: f64, dt: f64, n: usize, f: impl Fn(f64) -> [f64; 6]) -> TimeSeries {
        let mut s = TimeSeries::new(t0, dt).unwrap();
        for i in 0..n {
            let t = t0 + i as f64 * dt;
            let v = f(t);
            let sample = Sample {
                t,
                cm: ClassicalState::new([0.0; 3], [v[0], v[1], v[2]], t),
                moments: ElectronMoments {
                    px: v[3],
                    py: v[4],
                    pz: v[5],
                    ..Default::default()
                },
                norm: 1.0,
                field: 0.0,
            };
            s.push(sample).unwrap();
        }
        s
    }

    #[test]
    fn rejects_irregular_samples() {
        let mut s = TimeSeries::new(0.0, 0.1).unwrap();
        s.push(Sample::default()).unwrap();
        let bad = Sample {
            t: 0.15,
            ..Default::default()
        };
        assert!(s.push(bad).is_err());
    }

    #[test]
    fn kinetic_energy_examples() {
        let c = PhysicalConstants::default();
        let m = c.total_mass();
        let s = series_from(0.0, 0.01, 1001, |_| [0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let w = Window::new(0.0, 10.0).unwrap();
        for rule in [QuadratureRule::Trapezoid, QuadratureRule::Rectangle] {
            let e = kinetic_energy_average(&s, &w, Body::CenterOfMass, rule, &c).unwrap();
            assert!((e - 1.0 / (2.0 * m)).abs() < 1e-15);
        }
        let w0 = 2.0 * PI / 2.5;
        let s = series_from(0.0, 0.01, 1001, |t| [0.0, 0.0, (w0 * t).sin(), 0.0, 0.0, 0.0]);
        let e = kinetic_energy_average(&s, &w, Body::CenterOfMass, QuadratureRule::Trapezoid, &c).unwrap();
        assert!((e - 1.0 / (4.0 * m)).abs() < 1e-12 / m);
        let s = series_from(0.0, 0.01, 1001, |_| [0.0; 6]);
        assert_eq!(kinetic_energy_average(&s, &w, Body::Electron, QuadratureRule::Trapezoid, &c).unwrap(), 0.0);
        assert!(Window::new(1.0, 1.0).is_err());
        let outside = Window::new(0.0, 20.0).unwrap();
        assert!(kinetic_energy_average(&s, &outside, Body::Electron, QuadratureRule::Trapezoid, &c).is_err());
    }

    #[test]
    fn sinusoid_peaks_at_carrier() {
        let w0 = 0.8;
        let s = series_from(0.0, 0.05, 4000, |t| [(w0 * t).sin(), 0.0, 0.0, 0.0, 0.0, 0.0]);
        let w = Window::new(0.0, 0.05 * 3000.0).unwrap();
        let sp = spectrum(&s, &w, Channel::CmPx, Taper::Rectangular).unwrap();
        let dw = sp.d_omega();
        assert!((dw - 2.0 * PI / w.length()).abs() < 1e-12);
        assert!((sp.peak().abs() - w0).abs() <= dw);
        assert!(sp.density.iter().all(|&d| d >= 0.0));
        let zero = spectrum(&s, &w, Channel::CmPy, Taper::Hann).unwrap();
        assert!(zero.density.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn parseval_and_spectral_kinetic_energy() {
        let c = PhysicalConstants::default();
        let s = series_from(-3.0, 0.02, 2001, |t| {
            let a = (0.7 * t).sin() * (-0.01 * t * t).exp();
            [a, 0.1 * a * a, (1.3 * t).cos() + 0.2, -a, 0.3 * (0.2 * t).cos(), a * t]
        });
        let w = Window::new(-3.0, 37.0).unwrap();
        let sp = Spectrum::compute(&s, &w, Taper::Rectangular).unwrap();
        let (i0, n) = s.window_range(&w).unwrap();
        for slice in &sp.slices {
            let direct: f64 = s.samples()[i0..i0 + n].iter().map(|x| slice.channel.of(x).powi(2)).sum::<f64>() * s.dt();
            assert!((slice.integral() - direct).abs() <= 1e-8 * direct);
        }
        for body in [Body::CenterOfMass, Body::Electron] {
            let direct = kinetic_energy_average(&s, &w, body, QuadratureRule::Rectangle, &c).unwrap();
            let spectral = sp.kinetic_energy(body, &c);
            assert!((direct - spectral).abs() <= 1e-10 * direct);
        }
    }

    #[test]
    fn window_shift_leaves_density_unchanged() {
        let f = |t: f64| [(0.9 * t).sin() + 0.3 * (2.1 * t).cos(), 0.0, 0.0, 0.0, 0.0, 0.0];
        let dt = 0.05;
        let w = Window::new(0.0, 100.0).unwrap();
        let a = spectrum(&series_from(0.0, dt, 2001, f), &w, Channel::CmPx, Taper::Rectangular).unwrap();
        // Same signal sampled on a grid offset by 37 steps; window shifted alike.
        let delta = 37.0 * dt;
        let shifted = series_from(delta, dt, 2001, |t| f(t - delta));
        let b = spectrum(&shifted, &w.shifted(delta), Channel::CmPx, Taper::Rectangular).unwrap();
        for (x, y) in a.density.iter().zip(&b.density) {
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
        }
    }

    #[test]
    fn nyquist_guard() {
        let s = series_from(0.0, 0.1, 101, |t| [t.sin(), 0.0, 0.0, 0.0, 0.0, 0.0]);
        let sp = spectrum(&s, &Window::new(0.0, 10.0).unwrap(), Channel::CmPx, Taper::Rectangular).unwrap();
        assert!(sp.band_indices(-40.0, 0.0).is_err());
        assert!(sp.band_indices(-PI / 0.1, 0.0).is_ok());
    }

    fn slice(density: Vec<f64>) -> SpectrumSlice {
        let n = density.len();
        SpectrumSlice {
            channel: Channel::CmPx,
            omega: frequency_grid(n, 1.0),
            density,
            window: Window::new(0.0, n as f64).unwrap(),
            taper: Taper::Rectangular,
        }
    }

    #[test]
    fn correlation_examples() {
        let d: Vec<f64> = (0..64).map(|i| ((i as f64) * 0.3).sin().powi(2) + 0.1).collect();
        let a = slice(d.clone());
        let band = (-3.0, 3.0);
        let c = spectral_shape_correlation(&a, &a, band, 0).unwrap();
        assert!((c.value - 1.0).abs() < 1e-12);
        let scaled = slice(d.iter().map(|v| 10.0 * v).collect());
        let c = spectral_shape_correlation(&a, &scaled, band, 2).unwrap();
        assert!((c.value - 1.0).abs() < 1e-12 && c.lag == 0);

        let shifted = slice((0..64).map(|i| d[(i + 2) % 64]).collect());
        let c = spectral_shape_correlation(&a, &shifted, (-2.0, 2.0), 3).unwrap();
        assert!((c.value - 1.0).abs() < 1e-12 && c.lag == -2, "{c:?}");

        let flat = slice(vec![1.0; 64]);
        assert!(matches!(
            spectral_shape_correlation(&a, &flat, band, 1),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn white_noise_against_its_reverse_is_uncorrelated() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(99);
        let noise: Vec<f64> = (0..4096).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
        let reversed: Vec<f64> = noise.iter().rev().cloned().collect();
        let a = slice(noise);
        let b = slice(reversed);
        let band = (-2.0, 2.0);
        let c = spectral_shape_correlation(&a, &b, band, 3).unwrap();
        assert!(c.value.abs() < 0.1, "{c:?}");
    }

    proptest! {
        #[test]
        fn correlation_is_bounded(v in prop::collection::vec(0.0..1.0f64, 32), w in prop::collection::vec(0.0..1.0f64, 32)) {
            if let Ok(c) = spectral_shape_correlation(&slice(v), &slice(w), (-2.5, 2.5), 2) {
                prop_assert!(c.value <= 1.0 + 1e-12 && c.value >= -1.0 - 1e-12);
            }
        }

        #[test]
        fn densities_are_nonnegative(v in prop::collection::vec(-1.0..1.0f64, 2..80)) {
            let n = v.len();
            let s = series_from(0.0, 0.5, n, |t| [v[(t / 0.5).round() as usize], 0.0, 0.0, 0.0, 0.0, 0.0]);
            let w = Window::new(0.0, 0.5 * (n - 1) as f64).unwrap();
            let sp = spectrum(&s, &w, Channel::CmPx, Taper::Rectangular).unwrap();
            prop_assert!(sp.density.iter().all(|&d| d >= 0.0));
        }
    }
}
