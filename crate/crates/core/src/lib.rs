//! Monte Carlo simulation of polarization-qubit dephasing in birefringent
//! single-mode fiber, and of its suppression by wave-plate dynamical
//! decoupling (CPMG and KDD).

pub mod engine;
pub mod error;
pub mod noise;
pub mod polarization;
pub mod rng;
pub mod sequences;

pub use engine::{
    propagate, run_ensemble, run_ensemble_with_workers, run_trial, sweep, NamedState, ScheduleSpec,
    SimConfig, SimResult, StateResult, TrialOutput,
};
pub use error::{Error, Result};
pub use noise::{
    free_evolution_fidelity_envelope, generate_correlated_profile, generate_profile,
    rayleigh_sample, NoiseProfile, RayleighParams, SegmentGrid,
};
pub use polarization::{
    average_states, dephasing_unitary, evolve, fidelity, pulse_unitary, DensityMatrix, PureState,
    Unitary2,
};
pub use sequences::{
    apply_pulse_errors, build_cpmg, build_cpmg_with_axis, build_free, build_kdd, PulseErrorModel,
    PulseEvent, PulseSchedule, SequenceKind,
};
