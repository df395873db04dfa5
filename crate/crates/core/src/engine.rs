//! Monte Carlo ensembles over fiber noise realizations.
//!
//! One trial draws a birefringence profile and a set of wave-plate errors,
//! then walks every input state down the fiber segment by segment, applying
//! each plate at its boundary. Trials are reduced in fixed-size chunks whose
//! partial sums are combined in index order, so the result is bit-identical
//! for any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{
    generate_correlated_profile, generate_profile, NoiseProfile, RayleighParams, SegmentGrid,
    DEFAULT_CORRELATION_LENGTH_M,
};
use crate::polarization::{
    dephasing_unchecked, evolve, fidelity, pulse_unchecked, DensityMatrix, PureState, Unitary2,
};
use crate::rng::{TrialStreams, DEFAULT_SEED};
use crate::sequences::{
    apply_pulse_errors, build_cpmg_with_axis, build_free, build_kdd, PulseErrorModel,
    PulseSchedule, SequenceKind, CPMG_DEFAULT_AXIS, KDD_SUPERCYCLE_LEN,
};

/// Density matrices are renormalized after this many evolutions.
pub const RENORMALIZE_EVERY: usize = 10_000;

const CHUNK_TRIALS: usize = 64;

/// Which sequence to lay down and how many plates it uses.
///
/// For [`SequenceKind::Free`] no plates are placed; `pulses` then only sets
/// the segment grid, so a free run can share the grid of an `N`-plate run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub sequence: SequenceKind,
    pub pulses: usize,
    pub base_phase: f64,
    pub cpmg_axis: f64,
}

impl ScheduleSpec {
    pub fn new(sequence: SequenceKind, pulses: usize) -> Self {
        Self {
            sequence,
            pulses,
            base_phase: 0.0,
            cpmg_axis: CPMG_DEFAULT_AXIS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.sequence {
            SequenceKind::Free => Ok(()),
            SequenceKind::Cpmg if self.pulses == 0 || !self.pulses.is_multiple_of(2) => {
                Err(Error::Usage(format!(
                    "CPMG needs a positive even pulse count, got {}",
                    self.pulses
                )))
            }
            SequenceKind::Kdd
                if self.pulses == 0 || !self.pulses.is_multiple_of(KDD_SUPERCYCLE_LEN) =>
            {
                Err(Error::Usage(format!(
                    "KDD needs a positive multiple of {KDD_SUPERCYCLE_LEN} pulses, got {}",
                    self.pulses
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self, fiber_length_m: f64) -> Result<PulseSchedule> {
        self.validate()?;
        match self.sequence {
            SequenceKind::Free => build_free(fiber_length_m),
            SequenceKind::Cpmg => build_cpmg_with_axis(fiber_length_m, self.pulses, self.cpmg_axis),
            SequenceKind::Kdd => build_kdd(
                fiber_length_m,
                self.pulses / KDD_SUPERCYCLE_LEN,
                self.base_phase,
            ),
        }
    }

    /// Plates actually placed in the fiber.
    pub fn placed_pulses(&self) -> usize {
        match self.sequence {
            SequenceKind::Free => 0,
            _ => self.pulses,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedState {
    pub label: String,
    pub state: PureState,
}

impl NamedState {
    pub fn new(label: impl Into<String>, state: PureState) -> Self {
        Self {
            label: label.into(),
            state,
        }
    }

    /// H, V and D.
    pub fn default_set() -> Vec<NamedState> {
        vec![
            NamedState::new("H", PureState::horizontal()),
            NamedState::new("V", PureState::vertical()),
            NamedState::new("D", PureState::diagonal()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub fiber_length_m: f64,
    pub segments_per_interval: usize,
    pub rayleigh: RayleighParams,
    /// Mean length over which the birefringence rate is constant; `None`
    /// draws an independent rate for every segment.
    pub correlation_length_m: Option<f64>,
    pub schedule: ScheduleSpec,
    pub error_model: PulseErrorModel,
    pub trials: usize,
    pub master_seed: u64,
    pub input_states: Vec<NamedState>,
    pub record_trajectory: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            fiber_length_m: 500.0,
            segments_per_interval: 8,
            rayleigh: RayleighParams::default(),
            correlation_length_m: Some(DEFAULT_CORRELATION_LENGTH_M),
            schedule: ScheduleSpec::new(SequenceKind::Kdd, 800),
            error_model: PulseErrorModel::perfect(),
            trials: 1000,
            master_seed: DEFAULT_SEED,
            input_states: NamedState::default_set(),
            record_trajectory: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fiber_length_m.is_finite() && self.fiber_length_m > 0.0) {
            return Err(Error::Usage(format!(
                "fiber length must be positive, got {}",
                self.fiber_length_m
            )));
        }
        if self.trials == 0 {
            return Err(Error::Usage("trials must be at least 1".into()));
        }
        if self.segments_per_interval == 0 {
            return Err(Error::Usage(
                "segments per interval must be at least 1".into(),
            ));
        }
        if self.schedule.placed_pulses() > 0 && !self.segments_per_interval.is_multiple_of(2) {
            return Err(Error::Usage(format!(
                "segments per interval must be even when plates are placed at half-interval \
                 offsets, got {}",
                self.segments_per_interval
            )));
        }
        if let Some(l) = self.correlation_length_m {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::Usage(format!(
                    "correlation length must be positive, got {l}"
                )));
            }
        }
        if self.input_states.is_empty() {
            return Err(Error::Usage("at least one input state is required".into()));
        }
        self.schedule.validate()
    }

    pub fn grid(&self) -> Result<SegmentGrid> {
        SegmentGrid::for_intervals(
            self.fiber_length_m,
            self.schedule.pulses.max(1),
            self.segments_per_interval,
        )
    }

    pub fn nominal_schedule(&self) -> Result<PulseSchedule> {
        self.schedule.build(self.fiber_length_m)
    }
}

/// Output of one noise realization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutput {
    /// One output density matrix per input state.
    pub states: Vec<DensityMatrix>,
    /// Per input state, fidelity after every plate and at the fiber end.
    pub trajectory: Option<Vec<Vec<f64>>>,
}

/// Sends `inputs` through one fiber realization.
pub fn propagate(
    grid: &SegmentGrid,
    profile: &NoiseProfile,
    schedule: &PulseSchedule,
    inputs: &[PureState],
    record_trajectory: bool,
) -> Result<TrialOutput> {
    if profile.len() != grid.segment_count() {
        return Err(Error::Invariant(format!(
            "profile has {} segments, grid has {}",
            profile.len(),
            grid.segment_count()
        )));
    }
    if (schedule.fiber_length_m() - grid.fiber_length_m()).abs() > crate::noise::LENGTH_TOL_M {
        return Err(Error::Invariant(
            "schedule and grid describe different fiber lengths".into(),
        ));
    }
    let boundaries = schedule
        .events()
        .iter()
        .map(|e| grid.boundary_index(e.position_m))
        .collect::<Result<Vec<usize>>>()?;
    let plates: Vec<Unitary2> = schedule
        .events()
        .iter()
        .map(|e| pulse_unchecked(e.axis_phase, e.angle))
        .collect();
    let segments: Vec<Unitary2> = profile
        .increments()
        .iter()
        .map(|&d| dephasing_unchecked(d))
        .collect();

    let mut outputs = Vec::with_capacity(inputs.len());
    let mut trajectories = record_trajectory.then(|| Vec::with_capacity(inputs.len()));

    for psi in inputs {
        let mut rho = psi.projector();
        let mut track = record_trajectory.then(|| Vec::with_capacity(plates.len() + 1));
        let mut next = 0;
        let mut steps = 0usize;
        let mut step = |rho: &mut DensityMatrix, u: &Unitary2| {
            *rho = evolve(rho, u);
            steps += 1;
            if steps.is_multiple_of(RENORMALIZE_EVERY) {
                *rho = rho.renormalized();
            }
        };
        for (j, seg) in segments.iter().enumerate() {
            while next < plates.len() && boundaries[next] == j {
                step(&mut rho, &plates[next]);
                if let Some(t) = track.as_mut() {
                    t.push(fidelity(psi, &rho));
                }
                next += 1;
            }
            step(&mut rho, seg);
        }
        if next != plates.len() {
            return Err(Error::Invariant(format!(
                "{} plates were not applied inside the fiber",
                plates.len() - next
            )));
        }
        if let Some(mut t) = track {
            t.push(fidelity(psi, &rho));
            trajectories.as_mut().unwrap().push(t);
        }
        outputs.push(rho);
    }
    Ok(TrialOutput {
        states: outputs,
        trajectory: trajectories,
    })
}

/// One Monte Carlo trial, fully determined by `(master_seed, trial_index)`.
pub fn run_trial(config: &SimConfig, trial_index: u64) -> Result<TrialOutput> {
    config.validate()?;
    let grid = config.grid()?;
    let nominal = config.nominal_schedule()?;
    trial_with(config, &grid, &nominal, trial_index)
}

fn trial_with(
    config: &SimConfig,
    grid: &SegmentGrid,
    nominal: &PulseSchedule,
    trial_index: u64,
) -> Result<TrialOutput> {
    let streams = TrialStreams::new(config.master_seed, trial_index);
    let profile = match config.correlation_length_m {
        Some(l) => generate_correlated_profile(grid, &config.rayleigh, l, &mut streams.noise())?,
        None => generate_profile(grid, &config.rayleigh, &mut streams.noise()),
    };
    let schedule = apply_pulse_errors(nominal, &config.error_model, &mut streams.pulses());
    let inputs: Vec<PureState> = config.input_states.iter().map(|s| s.state).collect();
    propagate(grid, &profile, &schedule, &inputs, config.record_trajectory)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateResult {
    pub label: String,
    pub state: PureState,
    pub fidelity_mean: f64,
    pub fidelity_stderr: f64,
    #[serde(skip)]
    pub rho: DensityMatrix,
    /// Ensemble-mean fidelity at each trajectory sample point.
    pub trajectory: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub states: Vec<StateResult>,
    /// Positions (m) of the trajectory samples: after each plate, then the fiber end.
    pub trajectory_positions_m: Option<Vec<f64>>,
}

impl SimResult {
    pub fn state(&self, label: &str) -> Option<&StateResult> {
        self.states.iter().find(|s| s.label == label)
    }
}

struct ChunkSum {
    rho: Vec<DensityMatrix>,
    trajectory: Option<Vec<Vec<f64>>>,
    fidelities: Vec<Vec<f64>>,
}

fn run_chunk(
    config: &SimConfig,
    grid: &SegmentGrid,
    nominal: &PulseSchedule,
    trials: std::ops::Range<usize>,
) -> Result<ChunkSum> {
    let n_states = config.input_states.len();
    let mut sum = ChunkSum {
        rho: vec![DensityMatrix::zeros(); n_states],
        trajectory: None,
        fidelities: vec![Vec::with_capacity(trials.len()); n_states],
    };
    for t in trials {
        let out = trial_with(config, grid, nominal, t as u64)?;
        for (s, rho) in out.states.iter().enumerate() {
            sum.rho[s].scaled_add(rho, 1.0);
            sum.fidelities[s].push(fidelity(&config.input_states[s].state, rho));
        }
        if let Some(traj) = out.trajectory {
            match sum.trajectory.as_mut() {
                None => sum.trajectory = Some(traj),
                Some(acc) => {
                    for (a, b) in acc.iter_mut().zip(&traj) {
                        for (x, y) in a.iter_mut().zip(b) {
                            *x += y;
                        }
                    }
                }
            }
        }
    }
    Ok(sum)
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Averages `config.trials` trials and reports per-state fidelity.
pub fn run_ensemble(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let grid = config.grid()?;
    let nominal = config.nominal_schedule()?;

    let chunks: Vec<std::ops::Range<usize>> = (0..config.trials)
        .step_by(CHUNK_TRIALS)
        .map(|start| start..(start + CHUNK_TRIALS).min(config.trials))
        .collect();
    let partials = chunks
        .into_par_iter()
        .map(|r| run_chunk(config, &grid, &nominal, r))
        .collect::<Result<Vec<ChunkSum>>>()?;

    let n_states = config.input_states.len();
    let mut rho_sum = vec![DensityMatrix::zeros(); n_states];
    let mut fids: Vec<Vec<f64>> = vec![Vec::with_capacity(config.trials); n_states];
    let mut traj_sum: Option<Vec<Vec<f64>>> = None;
    for part in partials {
        for s in 0..n_states {
            rho_sum[s].scaled_add(&part.rho[s], 1.0);
            fids[s].extend_from_slice(&part.fidelities[s]);
        }
        if let Some(t) = part.trajectory {
            match traj_sum.as_mut() {
                None => traj_sum = Some(t),
                Some(acc) => {
                    for (a, b) in acc.iter_mut().zip(&t) {
                        for (x, y) in a.iter_mut().zip(b) {
                            *x += y;
                        }
                    }
                }
            }
        }
    }

    let inv = 1.0 / config.trials as f64;
    let states = config
        .input_states
        .iter()
        .enumerate()
        .map(|(s, named)| {
            let mut rho = DensityMatrix::zeros();
            rho.scaled_add(&rho_sum[s], inv);
            let (_, stderr) = mean_and_stderr(&fids[s]);
            let trajectory = traj_sum
                .as_ref()
                .map(|t| t[s].iter().map(|x| (x * inv).clamp(0.0, 1.0)).collect());
            StateResult {
                label: named.label.clone(),
                state: named.state,
                fidelity_mean: fidelity(&named.state, &rho).clamp(0.0, 1.0),
                fidelity_stderr: stderr,
                rho,
                trajectory,
            }
        })
        .collect();

    let trajectory_positions_m = config.record_trajectory.then(|| {
        nominal
            .events()
            .iter()
            .map(|e| e.position_m)
            .chain(std::iter::once(config.fiber_length_m))
            .collect()
    });

    Ok(SimResult {
        config: config.clone(),
        states,
        trajectory_positions_m,
    })
}

/// [`run_ensemble`] on a dedicated pool of `workers` threads.
pub fn run_ensemble_with_workers(config: &SimConfig, workers: usize) -> Result<SimResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Usage(format!("cannot build worker pool: {e}")))?;
    pool.install(|| run_ensemble(config))
}

/// One independently seeded ensemble per config, in input order.
pub fn sweep(configs: &[SimConfig]) -> Result<Vec<SimResult>> {
    if configs.is_empty() {
        return Err(Error::Usage(
            "sweep needs at least one configuration".into(),
        ));
    }
    configs.iter().map(run_ensemble).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::RayleighParams;

    fn small_config(sequence: SequenceKind, pulses: usize) -> SimConfig {
        SimConfig {
            fiber_length_m: 40.0,
            schedule: ScheduleSpec::new(sequence, pulses),
            trials: 20,
            ..SimConfig::default()
        }
    }

    #[test]
    fn zero_noise_is_lossless() {
        for (seq, n) in [
            (SequenceKind::Free, 0),
            (SequenceKind::Cpmg, 40),
            (SequenceKind::Kdd, 40),
        ] {
            let cfg = SimConfig {
                rayleigh: RayleighParams::new(0.0).unwrap(),
                ..small_config(seq, n)
            };
            let out = run_trial(&cfg, 0).unwrap();
            for (rho, named) in out.states.iter().zip(&cfg.input_states) {
                assert!((fidelity(&named.state, rho) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_segment_oracle() {
        let grid = SegmentGrid::new(1.0, 1).unwrap();
        let dphi = 0.83;
        let profile = NoiseProfile::new(vec![dphi]).unwrap();
        let d = PureState::diagonal();
        let out = propagate(&grid, &profile, &build_free(1.0).unwrap(), &[d], false).unwrap();
        assert!((fidelity(&d, &out.states[0]) - (dphi / 2.0).cos().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn trials_are_deterministic() {
        let cfg = SimConfig {
            error_model: PulseErrorModel::new(0.01).unwrap(),
            record_trajectory: true,
            ..small_config(SequenceKind::Kdd, 40)
        };
        assert_eq!(run_trial(&cfg, 5).unwrap(), run_trial(&cfg, 5).unwrap());
        assert_ne!(run_trial(&cfg, 5).unwrap(), run_trial(&cfg, 6).unwrap());
    }

    #[test]
    fn single_trial_ensemble_matches_trial() {
        let cfg = SimConfig {
            trials: 1,
            error_model: PulseErrorModel::new(0.01).unwrap(),
            ..small_config(SequenceKind::Cpmg, 40)
        };
        let trial = run_trial(&cfg, 0).unwrap();
        let ens = run_ensemble(&cfg).unwrap();
        for (s, rho) in ens.states.iter().zip(&trial.states) {
            assert_eq!(&s.rho, rho);
            assert_eq!(s.fidelity_stderr, 0.0);
        }
    }

    #[test]
    fn trajectory_has_one_point_per_plate_plus_end() {
        let cfg = SimConfig {
            record_trajectory: true,
            ..small_config(SequenceKind::Cpmg, 40)
        };
        let r = run_ensemble(&cfg).unwrap();
        assert_eq!(r.trajectory_positions_m.as_ref().unwrap().len(), 41);
        for s in &r.states {
            assert_eq!(s.trajectory.as_ref().unwrap().len(), 41);
        }
    }

    #[test]
    fn odd_segments_per_interval_rejected_with_plates() {
        let cfg = SimConfig {
            segments_per_interval: 3,
            ..small_config(SequenceKind::Cpmg, 40)
        };
        assert!(matches!(cfg.validate(), Err(Error::Usage(_))));
        let free = SimConfig {
            segments_per_interval: 3,
            ..small_config(SequenceKind::Free, 0)
        };
        free.validate().unwrap();
    }

    #[test]
    fn misaligned_grid_is_reported() {
        let grid = SegmentGrid::new(2.0, 3).unwrap();
        let schedule = build_cpmg_with_axis(2.0, 2, 0.0).unwrap();
        let err = propagate(
            &grid,
            &NoiseProfile::zeros(3),
            &schedule,
            &[PureState::diagonal()],
            false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Misaligned { .. }));
    }

    #[test]
    fn empty_sweep_is_usage_error() {
        assert!(matches!(sweep(&[]), Err(Error::Usage(_))));
    }

    #[test]
    fn bad_configs_rejected() {
        assert!(run_ensemble(&SimConfig {
            trials: 0,
            ..SimConfig::default()
        })
        .is_err());
        assert!(run_ensemble(&small_config(SequenceKind::Kdd, 30)).is_err());
        assert!(run_ensemble(&small_config(SequenceKind::Cpmg, 3)).is_err());
    }
}
