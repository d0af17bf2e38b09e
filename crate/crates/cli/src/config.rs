//! Run configuration files.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! line    := blank | comment | entry
//! comment := '#' any*
//! entry   := key ws* '=' ws* value ws* ('#' any*)?
//! ```
//!
//! Keys are case-sensitive and may appear at most once; unknown keys are
//! rejected. Times in the window keys are given in optical cycles.

use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};

use nondipole_core::grid::GridSpec;
use nondipole_core::hydrogen::BoundStateLabel;
use nondipole_core::laser::{field_amplitude_from_intensity, omega_from_wavelength, LaserPulse, PhysicalConstants};
use nondipole_core::observables::{Taper, Window};
use nondipole_core::propagator::{CouplingSolver, PropagationPlan};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn global(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Every accepted key, with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("wavelength", "carrier wavelength in nm (exclusive with omega)"),
    ("omega", "carrier frequency in a.u. (exclusive with wavelength)"),
    ("intensity", "peak intensity in W/cm^2 (exclusive with e0)"),
    ("e0", "peak field in a.u. (exclusive with intensity)"),
    ("n_T", "number of optical cycles under the envelope"),
    ("r_max", "radial box size in a.u. (default 500)"),
    ("n_r", "radial point count (default 2000)"),
    ("n_theta", "polar node count, odd (default 11)"),
    ("n_phi", "azimuthal node count, odd (default 11)"),
    ("radial_order", "points per finite element (default 8)"),
    ("absorber_fraction", "outer fraction of the box covered by the mask (default 0.1)"),
    ("absorber_exponent", "cosine power of the mask (default 8)"),
    ("absorber_threshold", "mask is active only when r_max is below this (default 300)"),
    ("steps_per_cycle", "time steps per optical period (default 4400)"),
    ("initial_state", "bound state n,l,m (default 1,0,0)"),
    ("r0", "initial center-of-mass position X,Y,Z (default 0,0,0)"),
    ("p0", "initial center-of-mass momentum Px,Py,Pz (default 0,0,0)"),
    ("t_start", "propagation start in cycles (default -n_T/2)"),
    ("t_in", "analysis window start in cycles (default t_start)"),
    ("t_out", "analysis window end and propagation end in cycles (default n_T+1)"),
    ("n_max", "highest shell in the population table (default 5)"),
    ("alpha_override", "fine-structure constant (default 1/137)"),
    ("proton_mass", "proton mass in electron masses (default 1836.15267343)"),
    ("dipole_only", "switch off every alpha-dependent term (default false)"),
    ("freeze_cm", "hold the center of mass fixed (default false)"),
    ("record_stride", "steps between recorded samples (default 1)"),
    ("coupling_solver", "lanczos | implicit-midpoint (default lanczos)"),
    ("taper", "rectangular | hann (default rectangular)"),
    ("band_lo", "lower edge of the correlation band in a.u. (default -2.5 omega)"),
    ("band_hi", "upper edge of the correlation band in a.u. (default 0)"),
    ("max_lag", "largest bin shift tried in the correlation (default 3)"),
    ("axis_offset", "shift added to omega for the energy column of the spectra (default 0)"),
    ("checkpoint_every", "steps between checkpoints, 0 disables (default 0)"),
    ("plot", "write SVG plots (default true)"),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrequencySpec {
    Wavelength(f64),
    Omega(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrengthSpec {
    Intensity(f64),
    E0(f64),
}

/// A parsed and resolved run configuration. Times are in a.u.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub frequency: FrequencySpec,
    pub strength: StrengthSpec,
    pub omega: f64,
    pub e0: f64,
    pub n_cycles: u32,
    pub grid: GridSpec,
    pub absorber_threshold: f64,
    pub steps_per_cycle: usize,
    pub initial_state: BoundStateLabel,
    pub r0: [f64; 3],
    pub p0: [f64; 3],
    pub t_start: f64,
    pub t_in: f64,
    pub t_out: f64,
    pub n_max: usize,
    pub alpha: f64,
    pub proton_mass: f64,
    pub dipole_only: bool,
    pub freeze_cm: bool,
    pub record_stride: usize,
    pub coupling_solver: CouplingSolver,
    pub taper: Taper,
    pub band: (f64, f64),
    pub max_lag: usize,
    pub axis_offset: f64,
    pub checkpoint_every: u64,
    pub plot: bool,
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Entries(Vec<(String, Entry)>);

impl Entries {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.0.iter_mut().find(|(k, _)| k == key).map(|(_, e)| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, e)| e.line)
    }

    fn parse<T>(&mut self, key: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Option<(usize, T)>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => f(&v)
                .map(|x| Some((line, x)))
                .map_err(|m| ConfigError::at(line, format!("{key}: {m}"))),
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<(Option<usize>, f64), ConfigError> {
        Ok(match self.parse(key, parse_f64)? {
            Some((l, v)) => (Some(l), v),
            None => (None, default),
        })
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<(Option<usize>, usize), ConfigError> {
        Ok(match self.parse(key, parse_usize)? {
            Some((l, v)) => (Some(l), v),
            None => (None, default),
        })
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        Ok(self.parse(key, parse_bool)?.map_or(default, |(_, v)| v))
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("expected a number, got {s:?}"))?;
    if !v.is_finite() {
        return Err(format!("value must be finite, got {s:?}"));
    }
    Ok(v)
}

fn parse_usize(s: &str) -> Result<usize, String> {
    s.parse().map_err(|_| format!("expected a non-negative integer, got {s:?}"))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got {s:?}")),
    }
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got {s:?}"));
    }
    Ok([parse_f64(parts[0])?, parse_f64(parts[1])?, parse_f64(parts[2])?])
}

fn parse_label(s: &str) -> Result<BoundStateLabel, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected n,l,m, got {s:?}"));
    }
    let n = parse_usize(parts[0])?;
    let l = parse_usize(parts[1])?;
    let m: i64 = parts[2].parse().map_err(|_| format!("expected an integer m, got {:?}", parts[2]))?;
    BoundStateLabel::new(n, l, m).map_err(|e| e.to_string())
}

fn tokenize(text: &str) -> Result<Entries, ConfigError> {
    let mut entries: Vec<(String, Entry)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::at(line, format!("expected key = value, got {content:?}")))?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(ConfigError::at(line, "missing key"));
        }
        if value.is_empty() {
            return Err(ConfigError::at(line, format!("{key}: missing value")));
        }
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(ConfigError::at(line, format!("unknown key {key:?}")));
        }
        if let Some((_, prev)) = entries.iter().find(|(k, _)| k == key) {
            return Err(ConfigError::at(line, format!("{key} already set on line {}", prev.line)));
        }
        entries.push((
            key.to_string(),
            Entry {
                line,
                value: value.to_string(),
                used: false,
            },
        ));
    }
    Ok(Entries(entries))
}

fn exclusive<T>(
    entries: &mut Entries,
    a: &str,
    b: &str,
    fa: impl Fn(f64) -> T,
    fb: impl Fn(f64) -> T,
) -> Result<(usize, T), ConfigError> {
    match (entries.line_of(a), entries.line_of(b)) {
        (Some(la), Some(lb)) => Err(ConfigError::at(la.max(lb), format!("{a} and {b} are mutually exclusive"))),
        (None, None) => Err(ConfigError::global(format!("one of {a} or {b} is required"))),
        (Some(_), None) => entries.parse(a, parse_f64).map(|v| {
            let (l, x) = v.expect("present");
            (l, fa(x))
        }),
        (None, Some(_)) => entries.parse(b, parse_f64).map(|v| {
            let (l, x) = v.expect("present");
            (l, fb(x))
        }),
    }
}

fn positive(line: Option<usize>, key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 {
        return Ok(());
    }
    let msg = format!("{key} must be > 0, got {v}");
    Err(match line {
        Some(l) => ConfigError::at(l, msg),
        None => ConfigError::global(msg),
    })
}

fn err_at(line: Option<usize>, msg: String) -> ConfigError {
    match line {
        Some(l) => ConfigError::at(l, msg),
        None => ConfigError::global(msg),
    }
}

/// Parses configuration text and resolves derived quantities.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let mut e = tokenize(text)?;

    let (alpha_line, alpha) = e.f64_or("alpha_override", PhysicalConstants::DEFAULT_ALPHA)?;
    positive(alpha_line, "alpha_override", alpha)?;
    let (mp_line, proton_mass) = e.f64_or("proton_mass", PhysicalConstants::CODATA_PROTON_MASS)?;
    positive(mp_line, "proton_mass", proton_mass)?;
    let constants = PhysicalConstants::default()
        .with_alpha(alpha)
        .with_proton_mass(proton_mass);

    let (f_line, frequency) = exclusive(&mut e, "wavelength", "omega", FrequencySpec::Wavelength, FrequencySpec::Omega)?;
    let omega = match frequency {
        FrequencySpec::Wavelength(nm) => omega_from_wavelength(nm, &constants),
        FrequencySpec::Omega(w) => {
            positive(Some(f_line), "omega", w)?;
            Ok(w)
        }
    }
    .map_err(|err| ConfigError::at(f_line, err.to_string()))?;

    let (s_line, strength) = exclusive(&mut e, "intensity", "e0", StrengthSpec::Intensity, StrengthSpec::E0)?;
    let e0 = match strength {
        StrengthSpec::Intensity(i) => field_amplitude_from_intensity(i, &constants),
        StrengthSpec::E0(v) if v >= 0.0 => Ok(v),
        StrengthSpec::E0(v) => return Err(ConfigError::at(s_line, format!("e0 must be >= 0, got {v}"))),
    }
    .map_err(|err| ConfigError::at(s_line, err.to_string()))?;

    let (n_line, n_cycles) = match e.parse("n_T", parse_usize)? {
        Some((l, v)) => (l, v),
        None => return Err(ConfigError::global("n_T is required")),
    };
    let n_cycles = u32::try_from(n_cycles)
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError::at(n_line, format!("n_T must be a positive integer, got {n_cycles}")))?;

    let (rmax_line, r_max) = e.f64_or("r_max", 500.0)?;
    positive(rmax_line, "r_max", r_max)?;
    let (_, n_r) = e.usize_or("n_r", 2000)?;
    let (_, n_theta) = e.usize_or("n_theta", 11)?;
    let (_, n_phi) = e.usize_or("n_phi", 11)?;
    let (_, radial_order) = e.usize_or("radial_order", GridSpec::DEFAULT_RADIAL_ORDER)?;
    let (fr_line, fraction) = e.f64_or("absorber_fraction", 0.1)?;
    let (ex_line, exponent) = e.f64_or("absorber_exponent", 8.0)?;
    let (th_line, absorber_threshold) = e.f64_or("absorber_threshold", 300.0)?;
    positive(th_line, "absorber_threshold", absorber_threshold)?;
    let active = r_max < absorber_threshold;
    let grid = GridSpec::new(r_max, n_r, n_theta, n_phi)
        .with_radial_order(radial_order)
        .with_absorber(if active { fraction } else { 0.0 }, exponent);
    if let Err(err) = grid.validate() {
        let line = ["n_r", "n_theta", "n_phi", "radial_order", "r_max"]
            .iter()
            .find_map(|k| e.line_of(k));
        return Err(err_at(line, err.to_string()));
    }
    if !(0.0..1.0).contains(&fraction) {
        return Err(err_at(fr_line, format!("absorber_fraction must lie in [0, 1), got {fraction}")));
    }
    positive(ex_line, "absorber_exponent", exponent)?;

    let (spc_line, steps_per_cycle) = e.usize_or("steps_per_cycle", PropagationPlan::DEFAULT_STEPS_PER_CYCLE)?;
    if steps_per_cycle == 0 {
        return Err(err_at(spc_line, "steps_per_cycle must be > 0".into()));
    }
    let initial_state = e
        .parse("initial_state", parse_label)?
        .map_or(BoundStateLabel::ground(), |(_, v)| v);
    let r0 = e.parse("r0", parse_triple)?.map_or([0.0; 3], |(_, v)| v);
    let p0 = e.parse("p0", parse_triple)?.map_or([0.0; 3], |(_, v)| v);

    let period = 2.0 * std::f64::consts::PI / omega;
    let (ts_line, t_start_c) = e.f64_or("t_start", -0.5 * f64::from(n_cycles))?;
    let (ti_line, t_in_c) = e.f64_or("t_in", t_start_c)?;
    let (to_line, t_out_c) = e.f64_or("t_out", f64::from(n_cycles) + 1.0)?;
    let (rs_line, record_stride) = e.usize_or("record_stride", 1)?;
    if record_stride == 0 {
        return Err(err_at(rs_line, "record_stride must be > 0".into()));
    }
    if t_in_c < t_start_c {
        return Err(err_at(ti_line.or(ts_line), format!("t_in ({t_in_c}) precedes t_start ({t_start_c})")));
    }
    if t_out_c <= t_in_c {
        return Err(err_at(to_line.or(ti_line), format!("t_out ({t_out_c}) must exceed t_in ({t_in_c})")));
    }
    let sample_cycles = record_stride as f64 / steps_per_cycle as f64;
    for (key, line, v) in [("t_in", ti_line, t_in_c), ("t_out", to_line, t_out_c)] {
        let k = (v - t_start_c) / sample_cycles;
        if (k - k.round()).abs() > 1e-6 {
            return Err(err_at(
                line,
                format!("{key} - t_start must be a whole number of sample intervals ({sample_cycles} cycles)"),
            ));
        }
    }
    let t_start = t_start_c * period;
    let t_in = t_in_c * period;
    let t_out = t_out_c * period;

    let (nm_line, n_max) = e.usize_or("n_max", 5)?;
    if n_max == 0 {
        return Err(err_at(nm_line, "n_max must be >= 1".into()));
    }
    let dipole_only = e.bool_or("dipole_only", false)?;
    let freeze_cm = e.bool_or("freeze_cm", false)?;
    let coupling_solver = e
        .parse("coupling_solver", |s| match s {
            "lanczos" => Ok(CouplingSolver::Lanczos),
            "implicit-midpoint" => Ok(CouplingSolver::ImplicitMidpoint),
            _ => Err(format!("expected lanczos or implicit-midpoint, got {s:?}")),
        })?
        .map_or(CouplingSolver::default(), |(_, v)| v);
    let taper = e
        .parse("taper", |s| match s {
            "rectangular" => Ok(Taper::Rectangular),
            "hann" => Ok(Taper::Hann),
            _ => Err(format!("expected rectangular or hann, got {s:?}")),
        })?
        .map_or(Taper::default(), |(_, v)| v);
    let (_, band_lo) = e.f64_or("band_lo", -2.5 * omega)?;
    let (bh_line, band_hi) = e.f64_or("band_hi", 0.0)?;
    if band_hi <= band_lo {
        return Err(err_at(bh_line, format!("band_hi ({band_hi}) must exceed band_lo ({band_lo})")));
    }
    let (_, max_lag) = e.usize_or("max_lag", 3)?;
    let (_, axis_offset) = e.f64_or("axis_offset", 0.0)?;
    let checkpoint_every = e.parse("checkpoint_every", parse_usize)?.map_or(0, |(_, v)| v as u64);
    let plot = e.bool_or("plot", true)?;

    debug_assert!(e.0.iter().all(|(_, entry)| entry.used));

    Ok(RunConfig {
        frequency,
        strength,
        omega,
        e0,
        n_cycles,
        grid,
        absorber_threshold,
        steps_per_cycle,
        initial_state,
        r0,
        p0,
        t_start,
        t_in,
        t_out,
        n_max,
        alpha,
        proton_mass,
        dipole_only,
        freeze_cm,
        record_stride,
        coupling_solver,
        taper,
        band: (band_lo, band_hi),
        max_lag,
        axis_offset,
        checkpoint_every,
        plot,
    })
}

/// Reads and parses a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::global(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

impl RunConfig {
    pub fn constants(&self) -> PhysicalConstants {
        PhysicalConstants::default()
            .with_alpha(self.alpha)
            .with_proton_mass(self.proton_mass)
    }

    /// The pulse; with `dipole_only` every beyond-dipole coupling is zero.
    pub fn pulse(&self) -> LaserPulse {
        let alpha = if self.dipole_only { 0.0 } else { self.alpha };
        LaserPulse::new(self.e0, self.omega, self.n_cycles, alpha).expect("validated at parse time")
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }

    pub fn dt(&self) -> f64 {
        self.period() / self.steps_per_cycle as f64
    }

    pub fn window(&self) -> Window {
        Window::new(self.t_in, self.t_out).expect("validated at parse time")
    }

    pub fn plan(&self) -> nondipole_core::Result<PropagationPlan> {
        let n = ((self.t_out - self.t_start) / self.dt()).round();
        let t_end = self.t_start + n * self.dt();
        Ok(PropagationPlan::new(self.dt(), self.t_start, t_end)?
            .with_record_stride(self.record_stride)
            .with_coupling_solver(self.coupling_solver)
            .with_freeze_cm(self.freeze_cm))
    }

    /// Resolved parameters as sorted `key=value` lines with round-trip
    /// float formatting. The run id is the SHA-256 of this text.
    pub fn canonical(&self) -> Vec<(&'static str, String)> {
        let triple = |v: &[f64; 3]| format!("{:?},{:?},{:?}", v[0], v[1], v[2]);
        let mut out = vec![
            ("absorber_exponent", format!("{:?}", self.grid.absorber_exponent)),
            ("absorber_fraction", format!("{:?}", self.grid.absorber_fraction)),
            ("alpha", format!("{:?}", self.alpha)),
            ("axis_offset", format!("{:?}", self.axis_offset)),
            ("band_hi", format!("{:?}", self.band.1)),
            ("band_lo", format!("{:?}", self.band.0)),
            ("coupling_solver", self.coupling_solver.name().to_string()),
            ("dipole_only", self.dipole_only.to_string()),
            ("e0", format!("{:?}", self.e0)),
            ("freeze_cm", self.freeze_cm.to_string()),
            (
                "initial_state",
                format!("{},{},{}", self.initial_state.n, self.initial_state.l, self.initial_state.m),
            ),
            ("max_lag", self.max_lag.to_string()),
            ("n_T", self.n_cycles.to_string()),
            ("n_max", self.n_max.to_string()),
            ("n_phi", self.grid.n_phi.to_string()),
            ("n_r", self.grid.n_r.to_string()),
            ("n_theta", self.grid.n_theta.to_string()),
            ("omega", format!("{:?}", self.omega)),
            ("p0", triple(&self.p0)),
            ("proton_mass", format!("{:?}", self.proton_mass)),
            ("r0", triple(&self.r0)),
            ("r_max", format!("{:?}", self.grid.r_max)),
            ("radial_order", self.grid.radial_order.to_string()),
            ("record_stride", self.record_stride.to_string()),
            ("steps_per_cycle", self.steps_per_cycle.to_string()),
            ("t_in", format!("{:?}", self.t_in)),
            ("t_out", format!("{:?}", self.t_out)),
            ("t_start", format!("{:?}", self.t_start)),
            ("taper", self.taper.name().to_string()),
        ];
        out.sort_by_key(|(k, _)| *k);
        out
    }

    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for (k, v) in self.canonical() {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        h.finalize().into()
    }

    pub fn run_id(&self) -> String {
        hex(&self.hash())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "wavelength = 800\nintensity = 1e14\nn_T = 8\n";

    #[test]
    fn resolves_field_parameters() {
        let c = parse_config_str(BASE).unwrap();
        assert!((c.omega - 0.0570).abs() < 5e-4, "omega {}", c.omega);
        assert!((c.e0 - 0.05338).abs() < 1e-5, "e0 {}", c.e0);
        assert_eq!(c.n_cycles, 8);
        assert!((c.dt() - c.period() / 4400.0).abs() < 1e-15);
        assert!((c.t_start + 4.0 * c.period()).abs() < 1e-9);
        assert!((c.t_out - 9.0 * c.period()).abs() < 1e-9);
        assert_eq!(c.grid.n_r, 2000);
        assert_eq!(c.grid.absorber_fraction, 0.0);
    }

    #[test]
    fn exclusive_keys_are_rejected() {
        let err = parse_config_str("wavelength = 800\nomega = 0.057\nintensity = 1e14\nn_T = 8\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.message.contains("mutually exclusive"));
        let err = parse_config_str("omega = 0.057\nintensity = 1e14\ne0 = 0.05\nn_T = 8\n").unwrap_err();
        assert_eq!(err.line, Some(3));
    }

    #[test]
    fn dipole_only_disables_alpha_terms() {
        let c = parse_config_str(&format!("{BASE}dipole_only = true\n")).unwrap();
        assert!(c.dipole_only);
        assert_eq!(c.pulse().alpha(), 0.0);
        assert_eq!(c.constants().alpha, 1.0 / 137.0);
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let err = parse_config_str(&format!("{BASE}\n# note\nbogus = 1\n")).unwrap_err();
        assert_eq!(err.line, Some(6));
        assert!(err.message.contains("unknown key"));

        let err = parse_config_str(&format!("{BASE}n_theta = 4\n")).unwrap_err();
        assert_eq!(err.line, Some(4));

        let err = parse_config_str(&format!("{BASE}n_T = 3\n")).unwrap_err();
        assert_eq!(err.line, Some(4));
        assert!(err.message.contains("already set on line 3"));

        let err = parse_config_str("wavelength = -5\nintensity = 1e14\nn_T = 2\n").unwrap_err();
        assert_eq!(err.line, Some(1));

        let err = parse_config_str("wavelength = 800\nn_T = 2\n").unwrap_err();
        assert_eq!(err.line, None);

        let err = parse_config_str(&format!("{BASE}initial_state = 2,2,0\n")).unwrap_err();
        assert_eq!(err.line, Some(4));

        let err = parse_config_str(&format!("{BASE}t_in = 0.33333\n")).unwrap_err();
        assert_eq!(err.line, Some(4));
    }

    #[test]
    fn run_id_tracks_resolved_parameters() {
        let a = parse_config_str(BASE).unwrap();
        let b = parse_config_str(&format!("# comment\n{BASE}plot = false\n")).unwrap();
        assert_eq!(a.run_id(), b.run_id());
        let c = parse_config_str(&format!("{BASE}freeze_cm = true\n")).unwrap();
        assert_ne!(a.run_id(), c.run_id());
        assert_eq!(a.run_id().len(), 64);
    }

    #[test]
    fn small_box_enables_absorber() {
        let c = parse_config_str(&format!("{BASE}r_max = 100\nn_r = 400\n")).unwrap();
        assert_eq!(c.grid.absorber_fraction, 0.1);
        assert_eq!(c.grid.absorber_exponent, 8.0);
    }
}
