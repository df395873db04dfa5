//! Wave-plate pulse schedules along the fiber.
//!
//! Every sequence places `N` instantaneous π rotations at `τ/2 + kτ` with
//! `τ = L / N`, so the free-evolution gaps read `τ/2, τ, …, τ, τ/2`. CPMG
//! uses one fixed axis; KDD cycles the five-pulse composite block
//! `(π/6+Φ, Φ, π/2+Φ, Φ, π/6+Φ)` through `Φ = φ, φ+π/2, φ+π, φ+3π/2`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::noise::LENGTH_TOL_M;

/// Default CPMG rotation axis (σ_y).
pub const CPMG_DEFAULT_AXIS: f64 = FRAC_PI_2;

/// Pulses in one KDD supercycle.
pub const KDD_SUPERCYCLE_LEN: usize = 20;

const KDD_BLOCK: [f64; 5] = [FRAC_PI_6, 0.0, FRAC_PI_2, 0.0, FRAC_PI_6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    Free,
    Cpmg,
    Kdd,
}

impl SequenceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SequenceKind::Free => "free",
            SequenceKind::Cpmg => "cpmg",
            SequenceKind::Kdd => "kdd",
        }
    }
}

impl fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SequenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "free" => Ok(SequenceKind::Free),
            "cpmg" => Ok(SequenceKind::Cpmg),
            "kdd" => Ok(SequenceKind::Kdd),
            other => Err(Error::Usage(format!(
                "unknown sequence '{other}' (expected free, cpmg or kdd)"
            ))),
        }
    }
}

/// One wave plate: where it sits, its equatorial axis and its rotation angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseEvent {
    pub position_m: f64,
    pub axis_phase: f64,
    pub angle: f64,
}

impl PulseEvent {
    pub fn ideal(position_m: f64, axis_phase: f64) -> Self {
        Self {
            position_m,
            axis_phase,
            angle: PI,
        }
    }

    /// The same plate with its rotation angle scaled by `1 + epsilon`.
    pub fn with_relative_error(&self, epsilon: f64) -> Self {
        Self {
            angle: self.angle * (1.0 + epsilon),
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    fiber_length_m: f64,
    events: Vec<PulseEvent>,
    sequence: SequenceKind,
}

impl PulseSchedule {
    pub fn new(
        fiber_length_m: f64,
        events: Vec<PulseEvent>,
        sequence: SequenceKind,
    ) -> Result<Self> {
        ensure_finite("fiber_length_m", fiber_length_m)?;
        if fiber_length_m <= 0.0 {
            return Err(Error::Usage(format!(
                "fiber length must be positive, got {fiber_length_m}"
            )));
        }
        let multiple = match sequence {
            SequenceKind::Free => None,
            SequenceKind::Cpmg => Some(2),
            SequenceKind::Kdd => Some(KDD_SUPERCYCLE_LEN),
        };
        if let Some(m) = multiple {
            if !events.len().is_multiple_of(m) {
                return Err(Error::Invariant(format!(
                    "{sequence} schedule has {} pulses, not a multiple of {m}",
                    events.len()
                )));
            }
        }
        let mut last = 0.0;
        for e in &events {
            ensure_finite("pulse position", e.position_m)?;
            ensure_finite("pulse axis", e.axis_phase)?;
            ensure_finite("pulse angle", e.angle)?;
            if !(e.position_m > last && e.position_m < fiber_length_m) || e.position_m <= 0.0 {
                return Err(Error::Invariant(format!(
                    "pulse position {} m is out of order or outside (0, {fiber_length_m})",
                    e.position_m
                )));
            }
            last = e.position_m;
        }
        Ok(Self {
            fiber_length_m,
            events,
            sequence,
        })
    }

    pub fn fiber_length_m(&self) -> f64 {
        self.fiber_length_m
    }

    pub fn events(&self) -> &[PulseEvent] {
        &self.events
    }

    pub fn sequence(&self) -> SequenceKind {
        self.sequence
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Checks the `τ/2, τ, …, τ, τ/2` gap pattern.
    pub fn check_gap_pattern(&self) -> Result<()> {
        let n = self.events.len();
        if n == 0 {
            return Ok(());
        }
        let tau = self.fiber_length_m / n as f64;
        let mut prev = 0.0;
        for (k, e) in self.events.iter().enumerate() {
            let expected = if k == 0 { tau / 2.0 } else { tau };
            if (e.position_m - prev - expected).abs() > LENGTH_TOL_M {
                return Err(Error::Invariant(format!(
                    "gap before pulse {k} is {} m, expected {expected} m",
                    e.position_m - prev
                )));
            }
            prev = e.position_m;
        }
        if (self.fiber_length_m - prev - tau / 2.0).abs() > LENGTH_TOL_M {
            return Err(Error::Invariant("final gap is not τ/2".into()));
        }
        Ok(())
    }

    /// Writes `position_m, axis_phase_rad, angle_rad` lines, one per pulse.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.events {
            writeln!(out, "{:e}, {:e}, {:e}", e.position_m, e.axis_phase, e.angle)?;
        }
        Ok(())
    }
}

/// `(k + 1/2) L / N`, written to keep the arithmetic exact for dyadic ratios.
fn pulse_position(fiber_length_m: f64, count: usize, k: usize) -> f64 {
    fiber_length_m * (2 * k + 1) as f64 / (2 * count) as f64
}

fn check_length(fiber_length_m: f64) -> Result<()> {
    ensure_finite("fiber_length_m", fiber_length_m)?;
    if fiber_length_m <= 0.0 {
        return Err(Error::Usage(format!(
            "fiber length must be positive, got {fiber_length_m}"
        )));
    }
    Ok(())
}

/// The no-pulse baseline.
pub fn build_free(fiber_length_m: f64) -> Result<PulseSchedule> {
    check_length(fiber_length_m)?;
    PulseSchedule::new(fiber_length_m, Vec::new(), SequenceKind::Free)
}

pub fn build_cpmg(fiber_length_m: f64, pulse_count: usize) -> Result<PulseSchedule> {
    build_cpmg_with_axis(fiber_length_m, pulse_count, CPMG_DEFAULT_AXIS)
}

/// CPMG with every plate rotating about `axis_phase`.
pub fn build_cpmg_with_axis(
    fiber_length_m: f64,
    pulse_count: usize,
    axis_phase: f64,
) -> Result<PulseSchedule> {
    check_length(fiber_length_m)?;
    ensure_finite("axis_phase", axis_phase)?;
    if pulse_count == 0 || !pulse_count.is_multiple_of(2) {
        return Err(Error::Usage(format!(
            "CPMG needs a positive even pulse count, got {pulse_count}"
        )));
    }
    let events = (0..pulse_count)
        .map(|k| PulseEvent::ideal(pulse_position(fiber_length_m, pulse_count, k), axis_phase))
        .collect();
    PulseSchedule::new(fiber_length_m, events, SequenceKind::Cpmg)
}

/// Axis phase of the `k`-th pulse of a KDD train.
pub fn kdd_axis_phase(k: usize, base_phase: f64) -> f64 {
    let block = (k / 5) % 4;
    base_phase + block as f64 * FRAC_PI_2 + KDD_BLOCK[k % 5]
}

pub fn build_kdd(
    fiber_length_m: f64,
    supercycle_count: usize,
    base_phase: f64,
) -> Result<PulseSchedule> {
    check_length(fiber_length_m)?;
    ensure_finite("base_phase", base_phase)?;
    if supercycle_count == 0 {
        return Err(Error::Usage("KDD needs at least one supercycle".into()));
    }
    let n = supercycle_count * KDD_SUPERCYCLE_LEN;
    let events = (0..n)
        .map(|k| {
            PulseEvent::ideal(
                pulse_position(fiber_length_m, n, k),
                kdd_axis_phase(k, base_phase),
            )
        })
        .collect();
    PulseSchedule::new(fiber_length_m, events, SequenceKind::Kdd)
}

/// Zero-mean Gaussian relative error on every plate's rotation angle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PulseErrorModel {
    sigma_fraction: f64,
}

impl PulseErrorModel {
    pub fn new(sigma_fraction: f64) -> Result<Self> {
        ensure_finite("sigma_fraction", sigma_fraction)?;
        if sigma_fraction < 0.0 {
            return Err(Error::Domain(format!(
                "pulse error sigma must be >= 0, got {sigma_fraction}"
            )));
        }
        Ok(Self { sigma_fraction })
    }

    pub fn perfect() -> Self {
        Self::default()
    }

    pub fn sigma_fraction(&self) -> f64 {
        self.sigma_fraction
    }
}

/// Draws a fresh relative angle error for each plate; positions and axes are kept.
pub fn apply_pulse_errors<R: Rng + ?Sized>(
    schedule: &PulseSchedule,
    model: &PulseErrorModel,
    rng: &mut R,
) -> PulseSchedule {
    if model.sigma_fraction == 0.0 {
        return schedule.clone();
    }
    let normal = Normal::new(0.0, model.sigma_fraction).expect("sigma validated non-negative");
    let events = schedule
        .events
        .iter()
        .map(|e| e.with_relative_error(normal.sample(rng)))
        .collect();
    PulseSchedule {
        events,
        ..schedule.clone()
    }
}
