//! Two-level algebra for polarization qubits in the {H, V} basis.
//!
//! Birefringent propagation acts as a rotation about the σ_z axis of the
//! Poincaré/Bloch sphere, while a half-wave plate acts as a π rotation about
//! an equatorial axis at angle φ. Everything here is exact 2×2 complex
//! arithmetic in double precision.

use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Tolerance for norm, trace, Hermiticity and unitarity checks.
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Slack allowed below zero for density-matrix eigenvalues.
pub const PSD_TOL: f64 = 1e-10;

type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

fn adjoint(a: &Mat2) -> Mat2 {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

fn max_abs_diff(a: &Mat2, b: &Mat2) -> f64 {
    let mut m: f64 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            m = m.max((a[r][c] - b[r][c]).norm());
        }
    }
    m
}

/// A normalized pure polarization state `alpha|H> + beta|V>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PureState {
    alpha: Complex64,
    beta: Complex64,
}

impl PureState {
    /// Builds a state from amplitudes that are already normalized.
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self> {
        for (name, z) in [("alpha", alpha), ("beta", beta)] {
            ensure_finite(name, z.re)?;
            ensure_finite(name, z.im)?;
        }
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if (norm - 1.0).abs() > ALGEBRA_TOL {
            return Err(Error::Invariant(format!(
                "|alpha|^2 + |beta|^2 = {norm}, expected 1"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// Builds a state from arbitrary nonzero amplitudes, normalizing them.
    pub fn normalized(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Domain(format!(
                "cannot normalize amplitudes ({alpha}, {beta})"
            )));
        }
        Self::new(alpha / norm, beta / norm)
    }

    pub fn horizontal() -> Self {
        Self {
            alpha: ONE,
            beta: ZERO,
        }
    }

    pub fn vertical() -> Self {
        Self {
            alpha: ZERO,
            beta: ONE,
        }
    }

    /// (|H> + |V>)/√2
    pub fn diagonal() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            alpha: Complex64::new(s, 0.0),
            beta: Complex64::new(s, 0.0),
        }
    }

    /// (|H> - |V>)/√2
    pub fn antidiagonal() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            alpha: Complex64::new(s, 0.0),
            beta: Complex64::new(-s, 0.0),
        }
    }

    /// (|H> + i|V>)/√2
    pub fn right_circular() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            alpha: Complex64::new(s, 0.0),
            beta: Complex64::new(0.0, s),
        }
    }

    /// (|H> - i|V>)/√2
    pub fn left_circular() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            alpha: Complex64::new(s, 0.0),
            beta: Complex64::new(0.0, -s),
        }
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    pub fn beta(&self) -> Complex64 {
        self.beta
    }

    /// `<self|other>`
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.alpha.conj() * other.alpha + self.beta.conj() * other.beta
    }

    pub fn apply(&self, u: &Unitary2) -> PureState {
        let m = &u.0;
        PureState {
            alpha: m[0][0] * self.alpha + m[0][1] * self.beta,
            beta: m[1][0] * self.alpha + m[1][1] * self.beta,
        }
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }
}

/// A 2×2 density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix([[Complex64; 2]; 2]);

impl DensityMatrix {
    /// Validates `entries` against the density-matrix invariants.
    pub fn new(entries: [[Complex64; 2]; 2]) -> Result<Self> {
        let rho = DensityMatrix(entries);
        rho.check()?;
        Ok(rho)
    }

    pub fn from_pure(psi: &PureState) -> Self {
        let (a, b) = (psi.alpha, psi.beta);
        DensityMatrix([[a * a.conj(), a * b.conj()], [a.conj() * b, b * b.conj()]])
    }

    pub fn maximally_mixed() -> Self {
        let half = Complex64::new(0.5, 0.0);
        DensityMatrix([[half, ZERO], [ZERO, half]])
    }

    pub fn entries(&self) -> &[[Complex64; 2]; 2] {
        &self.0
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    /// Tr(ρ²)
    pub fn purity(&self) -> f64 {
        let m = matmul(&self.0, &self.0);
        (m[0][0] + m[1][1]).re
    }

    /// Eigenvalues in ascending order, computed from the Hermitian part.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let a = self.0[0][0].re;
        let d = self.0[1][1].re;
        let b = 0.5 * (self.0[0][1] + self.0[1][0].conj());
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        [mean - radius, mean + radius]
    }

    pub fn check(&self) -> Result<()> {
        for row in &self.0 {
            for z in row {
                ensure_finite("density matrix entry", z.re)?;
                ensure_finite("density matrix entry", z.im)?;
            }
        }
        let herm = max_abs_diff(&self.0, &adjoint(&self.0));
        if herm > ALGEBRA_TOL {
            return Err(Error::Invariant(format!(
                "density matrix not Hermitian (deviation {herm:e})"
            )));
        }
        let tr = self.trace();
        if (tr - ONE).norm() > ALGEBRA_TOL {
            return Err(Error::Invariant(format!("density matrix trace {tr}")));
        }
        let min_eig = self.eigenvalues()[0];
        if min_eig < -PSD_TOL {
            return Err(Error::Invariant(format!(
                "density matrix eigenvalue {min_eig:e} is negative"
            )));
        }
        Ok(())
    }

    /// Rescales to unit trace and restores exact Hermiticity.
    pub fn renormalized(&self) -> Self {
        let tr = self.trace().re;
        let m = &self.0;
        let off = 0.5 * (m[0][1] + m[1][0].conj());
        DensityMatrix([
            [Complex64::new(m[0][0].re / tr, 0.0), off / tr],
            [off.conj() / tr, Complex64::new(m[1][1].re / tr, 0.0)],
        ])
    }

    pub(crate) fn scaled_add(&mut self, other: &DensityMatrix, weight: f64) {
        for r in 0..2 {
            for c in 0..2 {
                self.0[r][c] += other.0[r][c] * weight;
            }
        }
    }

    pub(crate) fn zeros() -> Self {
        DensityMatrix([[ZERO; 2]; 2])
    }
}

/// A 2×2 unitary operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2([[Complex64; 2]; 2]);

impl Unitary2 {
    pub fn new(entries: [[Complex64; 2]; 2]) -> Result<Self> {
        let u = Unitary2(entries);
        let dev = max_abs_diff(&matmul(&u.0, &adjoint(&u.0)), &Self::identity().0);
        if dev > ALGEBRA_TOL {
            return Err(Error::Invariant(format!(
                "matrix is not unitary (|UU† - I| = {dev:e})"
            )));
        }
        Ok(u)
    }

    pub fn identity() -> Self {
        Unitary2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn entries(&self) -> &[[Complex64; 2]; 2] {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Unitary2(adjoint(&self.0))
    }

    /// Largest entrywise deviation from `other`.
    pub fn distance(&self, other: &Unitary2) -> f64 {
        max_abs_diff(&self.0, &other.0)
    }

    /// Deviation from `other` after removing the best global phase.
    pub fn distance_up_to_phase(&self, other: &Unitary2) -> f64 {
        // Tr(other† self) = 2 e^{iθ} when the two agree up to phase e^{iθ}.
        let t = matmul(&adjoint(&other.0), &self.0);
        let tr = t[0][0] + t[1][1];
        if tr.norm() < 1e-300 {
            return f64::INFINITY;
        }
        let phase = tr / tr.norm();
        let mut shifted = other.0;
        for row in shifted.iter_mut() {
            for z in row.iter_mut() {
                *z *= phase;
            }
        }
        max_abs_diff(&self.0, &shifted)
    }

    pub fn unitarity_error(&self) -> f64 {
        max_abs_diff(&matmul(&self.0, &adjoint(&self.0)), &Self::identity().0)
    }
}

impl Mul for Unitary2 {
    type Output = Unitary2;

    fn mul(self, rhs: Unitary2) -> Unitary2 {
        Unitary2(matmul(&self.0, &rhs.0))
    }
}

impl fmt::Display for Unitary2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.0;
        write!(
            f,
            "[[{}, {}], [{}, {}]]",
            m[0][0], m[0][1], m[1][0], m[1][1]
        )
    }
}

/// Propagation through a uniformly birefringent segment:
/// `diag(e^{iδφ/2}, e^{-iδφ/2}) = exp(i δφ σ_z / 2)`.
pub fn dephasing_unitary(delta_phi: f64) -> Result<Unitary2> {
    ensure_finite("delta_phi", delta_phi)?;
    Ok(dephasing_unchecked(delta_phi))
}

#[inline]
pub(crate) fn dephasing_unchecked(delta_phi: f64) -> Unitary2 {
    let h = 0.5 * delta_phi;
    let (s, c) = h.sin_cos();
    Unitary2([[Complex64::new(c, s), ZERO], [ZERO, Complex64::new(c, -s)]])
}

/// Rotation by `rotation_angle` about the equatorial axis at `axis_phase`:
/// `exp(-i θ/2 (cos φ σ_x + sin φ σ_y))`.
///
/// With `rotation_angle = π` this is the ideal half-wave plate
/// `-i (cos φ σ_x + sin φ σ_y)`.
pub fn pulse_unitary(axis_phase: f64, rotation_angle: f64) -> Result<Unitary2> {
    ensure_finite("axis_phase", axis_phase)?;
    ensure_finite("rotation_angle", rotation_angle)?;
    Ok(pulse_unchecked(axis_phase, rotation_angle))
}

#[inline]
pub(crate) fn pulse_unchecked(axis_phase: f64, rotation_angle: f64) -> Unitary2 {
    let (s, c) = (0.5 * rotation_angle).sin_cos();
    // cos φ σ_x + sin φ σ_y = [[0, e^{-iφ}], [e^{iφ}, 0]]
    let (sp, cp) = axis_phase.sin_cos();
    let minus_i_s = Complex64::new(0.0, -s);
    Unitary2([
        [Complex64::new(c, 0.0), minus_i_s * Complex64::new(cp, -sp)],
        [minus_i_s * Complex64::new(cp, sp), Complex64::new(c, 0.0)],
    ])
}

/// `U ρ U†`
pub fn evolve(rho: &DensityMatrix, u: &Unitary2) -> DensityMatrix {
    let left = matmul(&u.0, &rho.0);
    DensityMatrix(matmul(&left, &adjoint(&u.0)))
}

/// Entrywise mean of an ensemble of density matrices.
pub fn average_states(states: &[DensityMatrix]) -> Result<DensityMatrix> {
    if states.is_empty() {
        return Err(Error::Usage(
            "cannot average an empty list of states".into(),
        ));
    }
    let mut acc = DensityMatrix::zeros();
    let w = 1.0 / states.len() as f64;
    for rho in states {
        acc.scaled_add(rho, w);
    }
    Ok(acc)
}

/// `<ψ|ρ|ψ>`
pub fn fidelity(initial: &PureState, rho_out: &DensityMatrix) -> f64 {
    let (a, b) = (initial.alpha, initial.beta);
    let m = &rho_out.0;
    let v0 = m[0][0] * a + m[0][1] * b;
    let v1 = m[1][0] * a + m[1][1] * b;
    (a.conj() * v0 + b.conj() * v1).re
}
