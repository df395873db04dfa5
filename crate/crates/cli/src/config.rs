//! Experiment configuration: command-line flags, `key=value` files and the
//! `DDSIM_SEED` environment variable, merged in that order of precedence.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use ddsim_core::engine::{NamedState, ScheduleSpec, SimConfig};
use ddsim_core::noise::{RayleighParams, DEFAULT_CORRELATION_LENGTH_M};
use ddsim_core::rng::DEFAULT_SEED;
use ddsim_core::sequences::{PulseErrorModel, SequenceKind, CPMG_DEFAULT_AXIS, KDD_SUPERCYCLE_LEN};
use ddsim_core::PureState;
use num_complex::Complex64;

use crate::error::CliError;

pub const SEED_ENV: &str = "DDSIM_SEED";

#[derive(Debug, Clone, Parser)]
#[command(
    name = "ddsim",
    version,
    about = "Monte Carlo simulation of wave-plate dynamical decoupling in birefringent fiber"
)]
pub struct Cli {
    /// Fiber length in meters.
    #[arg(long = "length-m")]
    pub length_m: Option<String>,
    /// Sequence(s): free, cpmg or kdd. A comma-separated list runs a sweep.
    #[arg(long)]
    pub sequence: Option<String>,
    /// Plate count(s). For `free` this only sets the segment grid.
    #[arg(long)]
    pub pulses: Option<String>,
    /// KDD base phase in radians.
    #[arg(long = "base-phase-rad")]
    pub base_phase_rad: Option<String>,
    /// CPMG rotation axis in radians.
    #[arg(long = "cpmg-axis-rad")]
    pub cpmg_axis_rad: Option<String>,
    /// Relative rotation-angle error sigma(s), e.g. 0.005.
    #[arg(long = "error-sigma")]
    pub error_sigma: Option<String>,
    /// Rayleigh scale of the birefringence, degrees per meter.
    #[arg(long = "rayleigh-sigma-deg-per-m", alias = "rayleigh-sigma")]
    pub rayleigh_sigma: Option<String>,
    /// Mean length of constant-birefringence cells in meters; 0 draws per segment.
    #[arg(long = "correlation-length-m")]
    pub correlation_length_m: Option<String>,
    #[arg(long = "segments-per-interval")]
    pub segments_per_interval: Option<String>,
    #[arg(long)]
    pub trials: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Input states: H, V, D, A, R, L or `c:re_a:im_a:re_b:im_b`.
    #[arg(long)]
    pub states: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `key=value` configuration file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Record fidelity after every plate.
    #[arg(long)]
    pub trajectory: bool,
    /// Run the canned figure sweeps.
    #[arg(long = "reproduce-figures")]
    pub reproduce_figures: bool,
    /// Hold the plate count (not density) fixed for the 1 km figure.
    #[arg(long = "fixed-plate-count")]
    pub fixed_plate_count: bool,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Settings as written by the user, before defaults are applied.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub length_m: Option<String>,
    pub sequence: Option<String>,
    pub pulses: Option<String>,
    pub base_phase_rad: Option<String>,
    pub cpmg_axis_rad: Option<String>,
    pub error_sigma: Option<String>,
    pub rayleigh_sigma: Option<String>,
    pub correlation_length_m: Option<String>,
    pub segments_per_interval: Option<String>,
    pub trials: Option<String>,
    pub seed: Option<String>,
    pub states: Option<String>,
    pub out: Option<String>,
    pub trajectory: Option<String>,
    pub reproduce_figures: Option<String>,
    pub fixed_plate_count: Option<String>,
}

const KEYS: &[&str] = &[
    "length-m",
    "sequence",
    "pulses",
    "base-phase-rad",
    "cpmg-axis-rad",
    "error-sigma",
    "rayleigh-sigma-deg-per-m",
    "correlation-length-m",
    "segments-per-interval",
    "trials",
    "seed",
    "states",
    "out",
    "trajectory",
    "reproduce-figures",
    "fixed-plate-count",
];

impl Settings {
    fn slot(&mut self, key: &str) -> Option<&mut Option<String>> {
        Some(match key {
            "length-m" => &mut self.length_m,
            "sequence" => &mut self.sequence,
            "pulses" => &mut self.pulses,
            "base-phase-rad" => &mut self.base_phase_rad,
            "cpmg-axis-rad" => &mut self.cpmg_axis_rad,
            "error-sigma" => &mut self.error_sigma,
            "rayleigh-sigma-deg-per-m" | "rayleigh-sigma" => &mut self.rayleigh_sigma,
            "correlation-length-m" => &mut self.correlation_length_m,
            "segments-per-interval" => &mut self.segments_per_interval,
            "trials" => &mut self.trials,
            "seed" => &mut self.seed,
            "states" => &mut self.states,
            "out" => &mut self.out,
            "trajectory" => &mut self.trajectory,
            "reproduce-figures" => &mut self.reproduce_figures,
            "fixed-plate-count" => &mut self.fixed_plate_count,
            _ => return None,
        })
    }

    /// Parses `key=value` lines; `#` starts a comment.
    pub fn from_config_text(text: &str) -> Result<Self, CliError> {
        let mut settings = Settings::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::usage(
                    format!("line {}", lineno + 1),
                    format!("expected key=value, got '{line}'"),
                )
            })?;
            let key = key.trim();
            let slot = settings.slot(key).ok_or_else(|| {
                CliError::usage(
                    key,
                    format!("unknown key (known keys: {})", KEYS.join(", ")),
                )
            })?;
            if slot.is_some() {
                return Err(CliError::usage(key, "key given more than once"));
            }
            *slot = Some(value.trim().to_string());
        }
        Ok(settings)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_config_text(&text)
    }

    pub fn from_cli(cli: &Cli) -> Self {
        let flag = |b: bool| b.then(|| "true".to_string());
        Settings {
            length_m: cli.length_m.clone(),
            sequence: cli.sequence.clone(),
            pulses: cli.pulses.clone(),
            base_phase_rad: cli.base_phase_rad.clone(),
            cpmg_axis_rad: cli.cpmg_axis_rad.clone(),
            error_sigma: cli.error_sigma.clone(),
            rayleigh_sigma: cli.rayleigh_sigma.clone(),
            correlation_length_m: cli.correlation_length_m.clone(),
            segments_per_interval: cli.segments_per_interval.clone(),
            trials: cli.trials.clone(),
            seed: cli.seed.clone(),
            states: cli.states.clone(),
            out: cli.out.as_ref().map(|p| p.display().to_string()),
            trajectory: flag(cli.trajectory),
            reproduce_figures: flag(cli.reproduce_figures),
            fixed_plate_count: flag(cli.fixed_plate_count),
        }
    }

    /// Values in `self` win over values in `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        Settings {
            length_m: self.length_m.or(lower.length_m),
            sequence: self.sequence.or(lower.sequence),
            pulses: self.pulses.or(lower.pulses),
            base_phase_rad: self.base_phase_rad.or(lower.base_phase_rad),
            cpmg_axis_rad: self.cpmg_axis_rad.or(lower.cpmg_axis_rad),
            error_sigma: self.error_sigma.or(lower.error_sigma),
            rayleigh_sigma: self.rayleigh_sigma.or(lower.rayleigh_sigma),
            correlation_length_m: self.correlation_length_m.or(lower.correlation_length_m),
            segments_per_interval: self.segments_per_interval.or(lower.segments_per_interval),
            trials: self.trials.or(lower.trials),
            seed: self.seed.or(lower.seed),
            states: self.states.or(lower.states),
            out: self.out.or(lower.out),
            trajectory: self.trajectory.or(lower.trajectory),
            reproduce_figures: self.reproduce_figures.or(lower.reproduce_figures),
            fixed_plate_count: self.fixed_plate_count.or(lower.fixed_plate_count),
        }
    }
}

/// Options shared by the canned figure sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureOptions {
    pub base: SimConfig,
    pub fixed_plate_count: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunPlan {
    Sweep(Vec<SimConfig>),
    ReproduceFigures(FigureOptions),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub plan: RunPlan,
    pub out: PathBuf,
    pub config_source: String,
}

fn parse_f64(key: &str, raw: &str) -> Result<f64, CliError> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| CliError::usage(key, format!("'{raw}' is not a number")))?;
    if !v.is_finite() {
        return Err(CliError::usage(key, format!("'{raw}' is not finite")));
    }
    Ok(v)
}

fn parse_usize(key: &str, raw: &str) -> Result<usize, CliError> {
    raw.trim()
        .parse()
        .map_err(|_| CliError::usage(key, format!("'{raw}' is not a non-negative integer")))
}

fn parse_bool(key: &str, raw: &str) -> Result<bool, CliError> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(CliError::usage(key, format!("'{raw}' is not a boolean"))),
    }
}

fn parse_list<T>(
    key: &str,
    raw: &str,
    item: impl Fn(&str, &str) -> Result<T, CliError>,
) -> Result<Vec<T>, CliError> {
    let items: Vec<T> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| item(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(CliError::usage(key, "empty list"));
    }
    Ok(items)
}

/// Parses one state token.
pub fn parse_state(token: &str) -> Result<NamedState, CliError> {
    let state = match token {
        "H" | "h" => PureState::horizontal(),
        "V" | "v" => PureState::vertical(),
        "D" | "d" => PureState::diagonal(),
        "A" | "a" => PureState::antidiagonal(),
        "R" | "r" => PureState::right_circular(),
        "L" | "l" => PureState::left_circular(),
        custom if custom.starts_with("c:") => {
            let parts: Vec<f64> = custom[2..]
                .split(':')
                .map(|p| parse_f64("states", p))
                .collect::<Result<_, _>>()?;
            if parts.len() != 4 {
                return Err(CliError::usage(
                    "states",
                    format!("custom state '{custom}' needs four numbers"),
                ));
            }
            PureState::normalized(
                Complex64::new(parts[0], parts[1]),
                Complex64::new(parts[2], parts[3]),
            )
            .map_err(|e| CliError::usage("states", e.to_string()))?
        }
        other => {
            return Err(CliError::usage(
                "states",
                format!("unknown state '{other}' (use H, V, D, A, R, L or c:re:im:re:im)"),
            ))
        }
    };
    Ok(NamedState::new(token.to_uppercase(), state))
}

fn check_schedule(sequence: SequenceKind, pulses: usize) -> Result<(), CliError> {
    match sequence {
        SequenceKind::Cpmg if pulses == 0 || !pulses.is_multiple_of(2) => Err(CliError::usage(
            "pulses",
            format!("cpmg needs a positive even plate count, got {pulses}"),
        )),
        SequenceKind::Kdd if pulses == 0 || !pulses.is_multiple_of(KDD_SUPERCYCLE_LEN) => {
            Err(CliError::usage(
                "pulses",
                format!(
                    "kdd needs a positive multiple of {KDD_SUPERCYCLE_LEN} plates, got {pulses}"
                ),
            ))
        }
        _ => Ok(()),
    }
}

fn get(v: &Option<String>) -> Option<&str> {
    v.as_deref()
}

/// Resolves merged settings into a run plan. `env_seed` is the lowest-precedence seed.
pub fn resolve(
    settings: &Settings,
    env_seed: Option<&str>,
) -> Result<(RunPlan, PathBuf), CliError> {
    let reproduce = get(&settings.reproduce_figures)
        .map(|v| parse_bool("reproduce-figures", v))
        .transpose()?
        .unwrap_or(false);
    let fixed_count = get(&settings.fixed_plate_count)
        .map(|v| parse_bool("fixed-plate-count", v))
        .transpose()?
        .unwrap_or(false);
    if reproduce {
        for (key, v) in [
            ("sequence", &settings.sequence),
            ("pulses", &settings.pulses),
            ("error-sigma", &settings.error_sigma),
            ("length-m", &settings.length_m),
            ("base-phase-rad", &settings.base_phase_rad),
        ] {
            if v.is_some() {
                return Err(CliError::usage(
                    key,
                    "conflicts with reproduce-figures, which fixes the sequences itself",
                ));
            }
        }
    } else if fixed_count {
        return Err(CliError::usage(
            "fixed-plate-count",
            "only applies together with reproduce-figures",
        ));
    }

    let mut base = SimConfig::default();
    if let Some(v) = get(&settings.length_m) {
        base.fiber_length_m = parse_f64("length-m", v)?;
        if base.fiber_length_m <= 0.0 {
            return Err(CliError::usage("length-m", "must be positive"));
        }
    }
    if let Some(v) = get(&settings.rayleigh_sigma) {
        base.rayleigh = RayleighParams::new(parse_f64("rayleigh-sigma-deg-per-m", v)?)
            .map_err(|e| CliError::usage("rayleigh-sigma-deg-per-m", e.to_string()))?;
    }
    if let Some(v) = get(&settings.correlation_length_m) {
        let l = parse_f64("correlation-length-m", v)?;
        if l < 0.0 {
            return Err(CliError::usage("correlation-length-m", "must be >= 0"));
        }
        base.correlation_length_m = (l > 0.0).then_some(l);
    } else {
        base.correlation_length_m = Some(DEFAULT_CORRELATION_LENGTH_M);
    }
    if let Some(v) = get(&settings.segments_per_interval) {
        base.segments_per_interval = parse_usize("segments-per-interval", v)?;
        if base.segments_per_interval == 0 {
            return Err(CliError::usage(
                "segments-per-interval",
                "must be at least 1",
            ));
        }
    }
    if let Some(v) = get(&settings.trials) {
        base.trials = parse_usize("trials", v)?;
        if base.trials == 0 {
            return Err(CliError::usage("trials", "must be at least 1"));
        }
    }
    base.master_seed = match (get(&settings.seed), env_seed) {
        (Some(v), _) => v.trim().parse().map_err(|_| {
            CliError::usage("seed", format!("'{v}' is not a 64-bit unsigned integer"))
        })?,
        (None, Some(v)) => v.trim().parse().map_err(|_| {
            CliError::usage(SEED_ENV, format!("'{v}' is not a 64-bit unsigned integer"))
        })?,
        (None, None) => DEFAULT_SEED,
    };
    if let Some(v) = get(&settings.states) {
        base.input_states = parse_list("states", v, |_, s| parse_state(s))?;
    }
    if let Some(v) = get(&settings.trajectory) {
        base.record_trajectory = parse_bool("trajectory", v)?;
    }
    let base_phase = get(&settings.base_phase_rad)
        .map(|v| parse_f64("base-phase-rad", v))
        .transpose()?
        .unwrap_or(0.0);
    let cpmg_axis = get(&settings.cpmg_axis_rad)
        .map(|v| parse_f64("cpmg-axis-rad", v))
        .transpose()?
        .unwrap_or(CPMG_DEFAULT_AXIS);

    let out = PathBuf::from(get(&settings.out).unwrap_or("ddsim-out"));

    if reproduce {
        base.schedule.cpmg_axis = cpmg_axis;
        return Ok((
            RunPlan::ReproduceFigures(FigureOptions {
                base,
                fixed_plate_count: fixed_count,
            }),
            out,
        ));
    }

    let sequences = match get(&settings.sequence) {
        Some(v) => parse_list("sequence", v, |k, s| {
            s.parse::<SequenceKind>()
                .map_err(|e| CliError::usage(k, e.to_string()))
        })?,
        None => vec![SequenceKind::Kdd],
    };
    let pulses = match get(&settings.pulses) {
        Some(v) => parse_list("pulses", v, parse_usize)?,
        None => vec![800],
    };
    let sigmas = match get(&settings.error_sigma) {
        Some(v) => parse_list("error-sigma", v, parse_f64)?,
        None => vec![0.0],
    };

    let mut configs = Vec::with_capacity(sequences.len() * pulses.len() * sigmas.len());
    for &sequence in &sequences {
        for &n in &pulses {
            check_schedule(sequence, n)?;
            for &sigma in &sigmas {
                let error_model = PulseErrorModel::new(sigma)
                    .map_err(|e| CliError::usage("error-sigma", e.to_string()))?;
                let cfg = SimConfig {
                    schedule: ScheduleSpec {
                        sequence,
                        pulses: n,
                        base_phase,
                        cpmg_axis,
                    },
                    error_model,
                    ..base.clone()
                };
                cfg.validate()
                    .map_err(|e| CliError::usage("segments-per-interval", e.to_string()))?;
                configs.push(cfg);
            }
        }
    }
    Ok((RunPlan::Sweep(configs), out))
}

/// Full configuration pipeline: flags over file over environment over defaults.
pub fn parse_config<I, T>(argv: I, env_seed: Option<&str>) -> Result<(ParsedConfig, Cli), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(CliError::Clap)?;
    let flags = Settings::from_cli(&cli);
    let (merged, source) = match &cli.config {
        Some(path) => (
            flags.over(Settings::from_file(path)?),
            format!("file:{} + flags", path.display()),
        ),
        None => (flags, "flags".to_string()),
    };
    let (plan, out) = resolve(&merged, env_seed)?;
    Ok((
        ParsedConfig {
            plan,
            out,
            config_source: source,
        },
        cli,
    ))
}
