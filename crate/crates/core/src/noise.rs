//! Birefringence noise along the fiber.
//!
//! The fiber is a chain of equal homogeneous segments, and the phase a
//! segment imprints is `rate × segment_length` for a Rayleigh-distributed
//! birefringence rate (degrees per meter). Rates are either drawn per segment
//! or held constant over longer cells of random length.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::OpenClosed01;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Tolerance, in meters, for grid and pulse-position arithmetic.
pub const LENGTH_TOL_M: f64 = 1e-9;

/// Scale of the reference single-mode fiber birefringence, degrees per meter.
pub const REFERENCE_SCALE_DEG_PER_M: f64 = 12.6;

/// Default mean length over which the birefringence rate stays constant, meters.
pub const DEFAULT_CORRELATION_LENGTH_M: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentGrid {
    fiber_length_m: f64,
    segment_length_m: f64,
    segment_count: usize,
}

impl SegmentGrid {
    pub fn new(fiber_length_m: f64, segment_count: usize) -> Result<Self> {
        ensure_finite("fiber_length_m", fiber_length_m)?;
        if fiber_length_m <= 0.0 {
            return Err(Error::Usage(format!(
                "fiber length must be positive, got {fiber_length_m}"
            )));
        }
        if segment_count == 0 {
            return Err(Error::Usage("segment count must be positive".into()));
        }
        Ok(Self {
            fiber_length_m,
            segment_length_m: fiber_length_m / segment_count as f64,
            segment_count,
        })
    }

    /// Grid with `segments_per_interval` segments in each of `intervals`
    /// equal inter-pulse intervals.
    pub fn for_intervals(
        fiber_length_m: f64,
        intervals: usize,
        segments_per_interval: usize,
    ) -> Result<Self> {
        if intervals == 0 || segments_per_interval == 0 {
            return Err(Error::Usage(
                "interval count and segments per interval must be positive".into(),
            ));
        }
        Self::new(fiber_length_m, intervals * segments_per_interval)
    }

    pub fn fiber_length_m(&self) -> f64 {
        self.fiber_length_m
    }

    pub fn segment_length_m(&self) -> f64 {
        self.segment_length_m
    }

    pub fn segment_count(&self) -> usize {
        self.segment_count
    }

    /// Number of whole segments preceding `position_m`, which must sit on a
    /// segment boundary.
    pub fn boundary_index(&self, position_m: f64) -> Result<usize> {
        let k = (position_m / self.segment_length_m).round();
        let misaligned = Error::Misaligned {
            position_m,
            segment_length_m: self.segment_length_m,
        };
        if !(k >= 0.0 && k <= self.segment_count as f64) {
            return Err(misaligned);
        }
        if (k * self.segment_length_m - position_m).abs() > LENGTH_TOL_M {
            return Err(misaligned);
        }
        Ok(k as usize)
    }
}

/// Rayleigh scale of the birefringence phase rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayleighParams {
    scale_deg_per_m: f64,
}

impl RayleighParams {
    pub fn new(scale_deg_per_m: f64) -> Result<Self> {
        ensure_finite("rayleigh scale", scale_deg_per_m)?;
        if scale_deg_per_m < 0.0 {
            return Err(Error::Domain(format!(
                "rayleigh scale must be >= 0, got {scale_deg_per_m}"
            )));
        }
        Ok(Self { scale_deg_per_m })
    }

    pub fn scale_deg_per_m(&self) -> f64 {
        self.scale_deg_per_m
    }

    pub fn mean(&self) -> f64 {
        self.scale_deg_per_m * (std::f64::consts::PI / 2.0).sqrt()
    }

    pub fn variance(&self) -> f64 {
        self.scale_deg_per_m.powi(2) * (4.0 - std::f64::consts::PI) / 2.0
    }
}

impl Default for RayleighParams {
    fn default() -> Self {
        Self {
            scale_deg_per_m: REFERENCE_SCALE_DEG_PER_M,
        }
    }
}

/// Inverse Rayleigh CDF: `σ √(-2 ln u)` for `u ∈ (0, 1]`.
pub fn rayleigh_inverse_cdf(scale: f64, u: f64) -> f64 {
    scale * (-2.0 * u.ln()).sqrt()
}

/// One birefringence phase rate in degrees per meter.
pub fn rayleigh_sample<R: Rng + ?Sized>(params: &RayleighParams, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(OpenClosed01);
    rayleigh_inverse_cdf(params.scale_deg_per_m, u)
}

/// Per-segment phase increments (radians) for one fiber realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    phase_increments: Vec<f64>,
}

impl NoiseProfile {
    /// A Rayleigh-model profile: every increment finite and non-negative.
    pub fn new(phase_increments: Vec<f64>) -> Result<Self> {
        if let Some(bad) = phase_increments
            .iter()
            .find(|x| !(x.is_finite() && **x >= 0.0))
        {
            return Err(Error::Invariant(format!(
                "phase increment {bad} is not finite and non-negative"
            )));
        }
        Ok(Self { phase_increments })
    }

    /// A profile from an arbitrary noise model; increments may be negative.
    pub fn signed(phase_increments: Vec<f64>) -> Result<Self> {
        for x in &phase_increments {
            ensure_finite("phase increment", *x)?;
        }
        Ok(Self { phase_increments })
    }

    pub fn zeros(segment_count: usize) -> Self {
        Self {
            phase_increments: vec![0.0; segment_count],
        }
    }

    pub fn increments(&self) -> &[f64] {
        &self.phase_increments
    }

    pub fn len(&self) -> usize {
        self.phase_increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phase_increments.is_empty()
    }

    pub fn total_phase(&self) -> f64 {
        self.phase_increments.iter().sum()
    }

    /// Writes `index, delta_phi_radians` lines, one per segment.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (i, dphi) in self.phase_increments.iter().enumerate() {
            writeln!(out, "{i}, {dphi:e}")?;
        }
        Ok(())
    }
}

/// Draws an independent Rayleigh phase rate for every segment of `grid`.
pub fn generate_profile<R: Rng + ?Sized>(
    grid: &SegmentGrid,
    params: &RayleighParams,
    rng: &mut R,
) -> NoiseProfile {
    let dl = grid.segment_length_m();
    let phase_increments = (0..grid.segment_count())
        .map(|_| rayleigh_sample(params, rng).to_radians() * dl)
        .collect();
    NoiseProfile { phase_increments }
}

/// Profile for a fiber whose birefringence is constant over cells of random
/// length, with an independent Rayleigh rate per cell.
///
/// Cell lengths are exponential with mean `correlation_length_m`, so cell
/// boundaries form a Poisson process along the fiber and never lock onto the
/// pulse spacing. For each cell the length is drawn first, then the rate.
pub fn generate_correlated_profile<R: Rng + ?Sized>(
    grid: &SegmentGrid,
    params: &RayleighParams,
    correlation_length_m: f64,
    rng: &mut R,
) -> Result<NoiseProfile> {
    ensure_finite("correlation_length_m", correlation_length_m)?;
    if correlation_length_m <= 0.0 {
        return Err(Error::Domain(format!(
            "correlation length must be positive, got {correlation_length_m}"
        )));
    }
    let mut cells = Vec::new();
    let mut covered = 0.0;
    while covered < grid.fiber_length_m() {
        let u: f64 = rng.sample(OpenClosed01);
        let len = -correlation_length_m * u.ln();
        let rate = rayleigh_sample(params, rng).to_radians();
        covered += len;
        cells.push((covered, rate));
    }
    Ok(integrate_cells(grid, &cells))
}

/// Integrates a piecewise-constant rate over each grid segment. `cells` holds
/// `(end_position_m, rate_rad_per_m)` in increasing position; the last cell is
/// extended to the fiber end.
pub(crate) fn integrate_cells(grid: &SegmentGrid, cells: &[(f64, f64)]) -> NoiseProfile {
    let length = grid.fiber_length_m();
    let n = grid.segment_count();
    let mut phase_increments = Vec::with_capacity(n);
    let mut cell = 0;
    for j in 0..n {
        let start = length * j as f64 / n as f64;
        let end = length * (j + 1) as f64 / n as f64;
        let mut phase = 0.0;
        let mut x = start;
        while x < end {
            while cell + 1 < cells.len() && cells[cell].0 <= x {
                cell += 1;
            }
            let stop = if cell + 1 < cells.len() {
                cells[cell].0.min(end)
            } else {
                end
            };
            phase += cells[cell].1 * (stop - x);
            x = stop;
        }
        phase_increments.push(phase);
    }
    NoiseProfile { phase_increments }
}

/// Diagonal-state fidelity of the averaged dephasing model in which one
/// shared deviation applies to all `segment_count` segments:
/// `(1 + cos(nφ) e^{-n²Δφ²/2}) / 2`.
pub fn free_evolution_fidelity_envelope(
    mean_phase: f64,
    phase_variance: f64,
    segment_count: u64,
) -> Result<f64> {
    ensure_finite("mean_phase", mean_phase)?;
    ensure_finite("phase_variance", phase_variance)?;
    if phase_variance < 0.0 {
        return Err(Error::Domain(format!(
            "phase variance must be >= 0, got {phase_variance}"
        )));
    }
    let n = segment_count as f64;
    let coherence = (-0.5 * n * n * phase_variance).exp();
    Ok(0.5 * (1.0 + (n * mean_phase).cos() * coherence))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::TrialStreams;

    #[test]
    fn zero_scale_is_degenerate() {
        let p = RayleighParams::new(0.0).unwrap();
        let mut rng = TrialStreams::new(1, 0).noise();
        assert!((0..1000).all(|_| rayleigh_sample(&p, &mut rng) == 0.0));
        let grid = SegmentGrid::new(10.0, 50).unwrap();
        let profile = generate_profile(&grid, &p, &mut rng);
        assert_eq!(profile, NoiseProfile::zeros(50));
    }

    #[test]
    fn inverse_cdf_at_median_like_point() {
        let u = (-0.5f64).exp();
        assert!((rayleigh_inverse_cdf(12.6, u) - 12.6).abs() < 1e-12);
        assert_eq!(rayleigh_inverse_cdf(3.0, 1.0), 0.0);
    }

    #[test]
    fn unit_conversion_single_segment() {
        let grid = SegmentGrid::new(1.0, 1).unwrap();
        let increments = [12.6f64.to_radians() * grid.segment_length_m()];
        assert!((increments[0] - 0.219_911_485_751_285_5).abs() < 1e-15);
    }

    #[test]
    fn negative_scale_rejected() {
        assert!(matches!(RayleighParams::new(-1.0), Err(Error::Domain(_))));
        assert!(RayleighParams::new(f64::NAN).is_err());
    }

    #[test]
    fn grid_boundaries() {
        let grid = SegmentGrid::for_intervals(500.0, 800, 8).unwrap();
        assert_eq!(grid.segment_count(), 6400);
        assert!((grid.segment_length_m() * 6400.0 - 500.0).abs() < LENGTH_TOL_M);
        assert_eq!(grid.boundary_index(0.3125).unwrap(), 4);
        assert!(matches!(
            grid.boundary_index(0.3),
            Err(Error::Misaligned { .. })
        ));
        assert!(grid.boundary_index(501.0).is_err());
        assert!(SegmentGrid::new(0.0, 4).is_err());
        assert!(SegmentGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn profile_rejects_bad_entries() {
        assert!(NoiseProfile::new(vec![0.1, -0.2]).is_err());
        assert!(NoiseProfile::signed(vec![0.1, -0.2]).is_ok());
        assert!(NoiseProfile::signed(vec![f64::NAN]).is_err());
    }

    #[test]
    fn cell_integration() {
        let grid = SegmentGrid::new(10.0, 8).unwrap();
        let r = [0.3, 0.1, 0.7];
        // segments of 1.25 m against cells [0,4), [4,8), [8,10]
        let profile = integrate_cells(&grid, &[(4.0, r[0]), (8.0, r[1]), (9.0, r[2])]);
        let expected = [
            r[0] * 1.25,
            r[0] * 1.25,
            r[0] * 1.25,
            r[0] * 0.25 + r[1] * 1.0,
            r[1] * 1.25,
            r[1] * 1.25,
            r[1] * 0.5 + r[2] * 0.75,
            r[2] * 1.25,
        ];
        for (got, want) in profile.increments().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn correlated_profile_total_phase_and_support() {
        let grid = SegmentGrid::for_intervals(50.0, 40, 8).unwrap();
        let params = RayleighParams::default();
        let mut rng = TrialStreams::new(2, 7).noise();
        let p = generate_correlated_profile(&grid, &params, 5.0, &mut rng).unwrap();
        assert_eq!(p.len(), grid.segment_count());
        assert!(p.increments().iter().all(|x| *x >= 0.0 && x.is_finite()));
        // replay the draws to rebuild the total phase
        let mut rng = TrialStreams::new(2, 7).noise();
        let (mut covered, mut total) = (0.0f64, 0.0);
        while covered < 50.0 {
            let u: f64 = rng.sample(OpenClosed01);
            let len = -5.0 * u.ln();
            let rate = rayleigh_sample(&params, &mut rng).to_radians();
            total += rate * (len.min(50.0 - covered));
            covered += len;
        }
        assert!((p.total_phase() - total).abs() < 1e-9);
        assert!(generate_correlated_profile(&grid, &params, 0.0, &mut rng).is_err());
    }

    #[test]
    fn envelope_values() {
        assert_eq!(free_evolution_fidelity_envelope(0.0, 0.0, 17).unwrap(), 1.0);
        let v = free_evolution_fidelity_envelope(0.0, 0.05f64.powi(2), 10).unwrap();
        assert!((v - 0.941_248_451_292_297_7).abs() < 1e-9);
        let far = free_evolution_fidelity_envelope(0.3, 0.01, 10_000).unwrap();
        assert!((far - 0.5).abs() < 1e-12);
        assert!(free_evolution_fidelity_envelope(0.0, -1.0, 3).is_err());
    }

    #[test]
    fn profile_dump_format() {
        let p = NoiseProfile::new(vec![0.25, 0.5]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0, 2.5e-1\n1, 5e-1\n");
    }
}
