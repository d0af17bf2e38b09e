use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde_json::{json, Value};

use nondipole_core::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
use nondipole_core::grid::{build_grid, Wavefunction};
use nondipole_core::hydrogen::{eigenstate, populations, shell_capacity, PopulationTable};
use nondipole_core::observables::{
    kinetic_energy_average, spectral_shape_correlation, Body, Channel, QuadratureRule, Spectrum, TimeSeries,
};
use nondipole_core::potentials::ClassicalState;
use nondipole_core::propagator::{CoupledState, RunStatistics, Simulation};

use crate::config::RunConfig;
use crate::output::{self, MANIFEST, POPULATIONS, SPECTRA, TIME_SERIES};
use crate::plot::{bar_chart, line_chart, Curve, Panel, TIME_LABEL};
use crate::CliError;

pub const SCHEMA: &str = "nondipole-run/1";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub output: PathBuf,
    /// Defaults to `checkpoint.bin` inside the output directory.
    pub checkpoint: Option<PathBuf>,
    pub resume: bool,
    /// Overrides the `plot` key of the configuration.
    pub plot: Option<bool>,
}

impl RunOptions {
    pub fn new(output: impl Into<PathBuf>) -> Self {
        Self {
            output: output.into(),
            checkpoint: None,
            resume: false,
            plot: None,
        }
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.output.join(CHECKPOINT_FILE))
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_id: String,
    pub stats: RunStatistics,
    pub manifest: Value,
}

fn snapshot(config: &RunConfig, state: &CoupledState, series: &TimeSeries) -> Checkpoint {
    Checkpoint {
        spec: config.grid,
        config_hash: config.hash(),
        step: state.step,
        cm: state.cm,
        amplitudes: state.psi.amplitudes().clone(),
        series: series.clone(),
    }
}

fn triple(v: [f64; 3]) -> Value {
    json!(v)
}

fn parameters(config: &RunConfig) -> Value {
    let c = config.constants();
    let pulse = config.pulse();
    let (pulse_on, pulse_off) = pulse.support();
    json!({
        "omega": config.omega,
        "wavelength_nm": match config.frequency {
            crate::config::FrequencySpec::Wavelength(nm) => Some(nm),
            crate::config::FrequencySpec::Omega(_) => None,
        },
        "e0": config.e0,
        "intensity_w_cm2": config.e0 * config.e0 * c.intensity_unit,
        "n_T": config.n_cycles,
        "period": config.period(),
        "dt": config.dt(),
        "steps_per_cycle": config.steps_per_cycle,
        "k": pulse.k(),
        "pulse_support": [pulse_on, pulse_off],
        "alpha": config.alpha,
        "coupling_alpha": pulse.alpha(),
        "speed_of_light": c.speed_of_light(),
        "proton_mass": c.proton_mass,
        "total_mass": c.total_mass(),
        "reduced_mass": c.reduced_mass(),
        "initial_state": config.initial_state.to_string(),
        "r0": triple(config.r0),
        "p0": triple(config.p0),
        "t_start": config.t_start,
        "window": {"t_in": config.t_in, "t_out": config.t_out},
        "dipole_only": config.dipole_only,
        "freeze_cm": config.freeze_cm,
    })
}

fn grid_section(config: &RunConfig, grid: &nondipole_core::DvrGrid) -> Value {
    let s = config.grid;
    let (n_radial, n_ang) = grid.shape();
    let l_max = s.n_theta - 1;
    let m_max = s.n_phi / 2;
    json!({
        "r_max": s.r_max,
        "n_r": s.n_r,
        "radial_points": n_radial,
        "radial_order": s.radial_order,
        "radial_scheme": "finite-element DVR with Gauss-Lobatto nodes",
        "n_theta": s.n_theta,
        "n_phi": s.n_phi,
        "angular_points": n_ang,
        "absorber_fraction": s.absorber_fraction,
        "absorber_exponent": s.absorber_exponent,
        "absorber_threshold": config.absorber_threshold,
        "basis_truncation": format!(
            "real spherical harmonics with l <= {l_max}, |m| <= {m_max}, completed to {n_ang} orthogonal angular functions"
        ),
    })
}

fn solver_section(config: &RunConfig, stats: &RunStatistics, n_steps: u64) -> Value {
    let plan = config.plan().expect("validated");
    json!({
        "splitting": "symmetric Strang: diagonal half step, coupling half step, Crank-Nicolson field-free step, coupling half step, diagonal half step",
        "radial": "Crank-Nicolson per angular channel",
        "coupling_solver": config.coupling_solver.name(),
        "classical": "Stormer-Verlet (kick-drift-kick), quantum step at the drift midpoint position",
        "ordering": "half kick with F(t_n), drift R, quantum step, moments at t_{n+1}, half kick with F(t_{n+1})",
        "record_stride": config.record_stride,
        "steps": n_steps,
        "steps_this_invocation": stats.steps,
        "tolerances": {
            "unitarity_per_step": plan.unitarity_tolerance,
            "krylov": plan.krylov_tolerance,
            "max_krylov": plan.max_krylov,
        },
        "achieved": {
            "max_norm_drift_per_step": stats.max_norm_drift,
            "absorbed_norm": stats.absorbed,
            "max_coupling_iterations": stats.max_coupling_iterations,
        },
    })
}

fn varies(series: &TimeSeries, ch: Channel) -> bool {
    let v = series.channel(ch);
    v.first().is_some_and(|f| v.iter().any(|x| x != f))
}

struct Analysis {
    spectrum: Spectrum,
    populations: PopulationTable,
    results: Value,
}

fn analyse(config: &RunConfig, state: &mut CoupledState, series: &TimeSeries) -> Result<Analysis, CliError> {
    let constants = config.constants();
    let window = config.window();
    let spectrum = Spectrum::compute(series, &window, config.taper)?;
    let table = populations(&state.psi, config.n_max, &constants)?;
    let ke = |body, rule| kinetic_energy_average(series, &window, body, rule, &constants);
    let correlation = match (spectrum.slice(Channel::CmPx), spectrum.slice(Channel::ElectronPx)) {
        (Some(a), Some(b)) => match spectral_shape_correlation(a, b, config.band, config.max_lag) {
            Ok(c) => json!({"channels": ["P_x", "px"], "band": [config.band.0, config.band.1],
                            "value": c.value, "lag": c.lag, "bins": c.bins}),
            Err(e) => json!({"channels": ["P_x", "px"], "band": [config.band.0, config.band.1],
                             "error": e.to_string()}),
        },
        _ => unreachable!("spectrum holds every momentum channel"),
    };
    let moments = state.moments()?;
    let cm_channels: serde_json::Map<String, Value> = [
        Channel::CmX,
        Channel::CmY,
        Channel::CmZ,
        Channel::CmPx,
        Channel::CmPy,
        Channel::CmPz,
    ]
    .iter()
    .map(|&ch| {
        let tag = if varies(series, ch) { "varying" } else { "constant" };
        (ch.name().to_string(), json!(tag))
    })
    .collect();
    let results = json!({
        "final_time": state.t(),
        "final_cm": {"R": triple(state.cm.r), "P": triple(state.cm.p)},
        "final_electron": {"x": moments.x, "z": moments.z, "px": moments.px, "py": moments.py, "pz": moments.pz},
        "final_norm": state.psi.norm(),
        "kinetic_energy": {
            "cm_trapezoid": ke(Body::CenterOfMass, QuadratureRule::Trapezoid)?,
            "electron_trapezoid": ke(Body::Electron, QuadratureRule::Trapezoid)?,
            "cm_spectral": spectrum.kinetic_energy(Body::CenterOfMass, &constants),
            "electron_spectral": spectrum.kinetic_energy(Body::Electron, &constants),
        },
        "populations": {
            "t": table.t,
            "shells": table.shells.iter().map(|(n, w)| json!({"n": n, "W": w})).collect::<Vec<_>>(),
            "residual": table.residual,
            "projection": "reduced-mass hydrogen eigenstates",
        },
        "correlation": correlation,
        "cm_channels": cm_channels,
    });
    Ok(Analysis {
        spectrum,
        populations: table,
        results,
    })
}

fn write_plots(dir: &Path, config: &RunConfig, series: &TimeSeries, analysis: &Analysis, run_id: &str) -> std::io::Result<()> {
    let t = series.channel(Channel::Field);
    let t: Vec<f64> = (0..t.len()).map(|i| series.time(i)).collect();
    let curve = |ch: Channel| Curve {
        label: ch.name().to_string(),
        x: t.clone(),
        y: series.channel(ch),
    };
    let caption = format!("run_id={run_id}");
    let momentum = line_chart(
        &[
            Panel {
                title: "Center-of-mass momentum".into(),
                x_label: TIME_LABEL.into(),
                y_label: "P (a.u.)".into(),
                curves: vec![curve(Channel::CmPx), curve(Channel::CmPz)],
            },
            Panel {
                title: "Electron momentum expectation".into(),
                x_label: TIME_LABEL.into(),
                y_label: "<p> (a.u.)".into(),
                curves: vec![curve(Channel::ElectronPx), curve(Channel::ElectronPz)],
            },
        ],
        &caption,
    );
    output::write(dir, "momentum.svg", &momentum)?;

    let position = line_chart(
        &[
            Panel {
                title: "Center-of-mass position".into(),
                x_label: TIME_LABEL.into(),
                y_label: "R (a.u.)".into(),
                curves: vec![curve(Channel::CmX), curve(Channel::CmZ)],
            },
            Panel {
                title: "Electron position expectation".into(),
                x_label: TIME_LABEL.into(),
                y_label: "<r> (a.u.)".into(),
                curves: vec![curve(Channel::ElectronX), curve(Channel::ElectronZ)],
            },
        ],
        &caption,
    );
    output::write(dir, "position.svg", &position)?;

    let span = (4.0 * config.omega).max(config.band.1.abs()).max(config.band.0.abs());
    let spectral_panel = |title: &str, chs: [Channel; 2]| {
        let curves = chs
            .iter()
            .filter_map(|&ch| analysis.spectrum.slice(ch))
            .map(|s| {
                let max = s.density.iter().cloned().fold(0.0, f64::max);
                let (x, y): (Vec<f64>, Vec<f64>) = s
                    .omega
                    .iter()
                    .zip(&s.density)
                    .filter(|(w, _)| w.abs() <= span)
                    .map(|(w, d)| (w + config.axis_offset, if max > 0.0 { (d / max).max(1e-16).log10() } else { -16.0 }))
                    .unzip();
                Curve {
                    label: s.channel.name().to_string(),
                    x,
                    y,
                }
            })
            .collect();
        Panel {
            title: title.into(),
            x_label: if config.axis_offset == 0.0 {
                "omega (a.u.)".into()
            } else {
                format!("omega + {} (a.u.)", config.axis_offset)
            },
            y_label: "log10 normalized density".into(),
            curves,
        }
    };
    let spectra = line_chart(
        &[
            spectral_panel("x-momentum spectra", [Channel::CmPx, Channel::ElectronPx]),
            spectral_panel("z-momentum spectra", [Channel::CmPz, Channel::ElectronPz]),
        ],
        &caption,
    );
    output::write(dir, "spectra.svg", &spectra)?;

    let labels: Vec<String> = analysis.populations.shells.iter().map(|(n, _)| n.to_string()).collect();
    let values: Vec<f64> = analysis.populations.shells.iter().map(|(_, w)| *w).collect();
    output::write(
        dir,
        "populations.svg",
        &bar_chart("Bound-state populations W_n after the pulse", &labels, &values, &caption),
    )
}

fn manifest(config: &RunConfig, grid: &nondipole_core::DvrGrid, stats: &RunStatistics, status: &str) -> Value {
    json!({
        "schema": SCHEMA,
        "run_id": config.run_id(),
        "code_version": env!("CARGO_PKG_VERSION"),
        "status": status,
        "config": config
            .canonical()
            .into_iter()
            .map(|(k, v)| (k.to_string(), Value::String(v)))
            .collect::<serde_json::Map<_, _>>(),
        "parameters": parameters(config),
        "grid": grid_section(config, grid),
        "solver": solver_section(config, stats, config.plan().map(|p| p.n_steps()).unwrap_or(0)),
        "outputs": [TIME_SERIES, SPECTRA, POPULATIONS],
    })
}

fn write_json(dir: &Path, value: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    output::write(dir, MANIFEST, &(text + "\n"))?;
    Ok(())
}

/// Runs one configuration and writes every artifact to `opts.output`.
pub fn execute(config: &RunConfig, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let started = Instant::now();
    let constants = config.constants();
    let pulse = config.pulse();
    let grid = build_grid(config.grid)?;
    let (capacity, reason) = shell_capacity(&grid, &constants);
    if config.n_max > capacity {
        return Err(CliError::config(format!(
            "n_max={} exceeds what the grid resolves (n <= {capacity}: {reason})",
            config.n_max
        )));
    }
    let plan = config.plan()?;
    let n_steps = plan.n_steps();
    let sim = Simulation::new(&grid, &pulse, &constants, plan)?;
    std::fs::create_dir_all(&opts.output)?;
    let checkpoint_path = opts.checkpoint_path();
    let run_id = config.run_id();

    let (mut state, mut series) = if opts.resume {
        let c = read_checkpoint(&checkpoint_path).map_err(|e| CliError::Other(e.to_string()))?;
        if c.config_hash != config.hash() || c.spec != config.grid {
            return Err(CliError::config(format!(
                "{} was written by a different configuration",
                checkpoint_path.display()
            )));
        }
        info!("resuming at step {} of {n_steps} (t={})", c.step, c.cm.t);
        let psi = Wavefunction::from_amplitudes(&grid, c.amplitudes, c.cm.t)?;
        (CoupledState::new(psi, c.cm, c.step, c.cm.t), c.series)
    } else {
        let psi = eigenstate(config.initial_state, &grid, &constants)?;
        let cm = ClassicalState::new(config.r0, config.p0, config.t_start);
        (sim.initial_state(psi, cm), sim.new_series()?)
    };

    info!(
        "run {}: {n_steps} steps of dt={:.6e}, grid {}x{}",
        &run_id[..12],
        config.dt(),
        grid.shape().0,
        grid.shape().1
    );
    let every = config.checkpoint_every;
    let progress = (n_steps / 20).max(1);
    let result = sim.run(&mut state, &mut series, |s, ser| {
        if s.step % progress == 0 {
            info!("step {}/{n_steps}, t={:.4}", s.step, s.t());
        }
        if every > 0 && s.step % every == 0 && s.step < n_steps {
            write_checkpoint(&checkpoint_path, &snapshot(config, s, ser))?;
        }
        Ok(())
    });

    let stats = match result {
        Ok(stats) => stats,
        Err(err) => {
            let mut failure: CliError = err.into();
            let saved = write_checkpoint(&checkpoint_path, &snapshot(config, &state, &series));
            if let Err(e) = &saved {
                warn!("could not save checkpoint: {e}");
            }
            output::write(&opts.output, TIME_SERIES, &output::time_series_csv(&series, &run_id, true))?;
            let mut m = manifest(config, &grid, &RunStatistics::default(), "failed");
            m["failure"] = json!({"message": failure.to_string(), "step": state.step, "t": state.t()});
            write_json(&opts.output, &m)?;
            if let CliError::Numerical { checkpoint, .. } = &mut failure {
                *checkpoint = saved.ok().map(|_| checkpoint_path.clone());
            }
            return Err(failure);
        }
    };

    let analysis = analyse(config, &mut state, &series)?;
    output::write(&opts.output, TIME_SERIES, &output::time_series_csv(&series, &run_id, false))?;
    output::write(&opts.output, SPECTRA, &output::spectra_csv(&analysis.spectrum, config.axis_offset, &run_id))?;
    output::write(&opts.output, POPULATIONS, &output::populations_csv(&analysis.populations, &run_id))?;
    if opts.plot.unwrap_or(config.plot) {
        write_plots(&opts.output, config, &series, &analysis, &run_id)?;
    }
    let mut m = manifest(config, &grid, &stats, "complete");
    m["results"] = analysis.results;
    m["wall_time_s"] = json!(started.elapsed().as_secs_f64());
    write_json(&opts.output, &m)?;
    if checkpoint_path.exists() && opts.checkpoint.is_none() {
        std::fs::remove_file(&checkpoint_path)?;
    }
    info!("run {} complete in {:.1} s", &run_id[..12], started.elapsed().as_secs_f64());
    Ok(RunOutcome {
        run_id,
        stats,
        manifest: m,
    })
}
