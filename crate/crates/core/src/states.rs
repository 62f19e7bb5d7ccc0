//! Closed-form local and product states.
//!
//! Local vectors have `m + 1` entries ordered `|0>, .., |m-1>, |u>`. All
//! constructions are real; they are returned as complex vectors so they can
//! be fed straight into operator builders.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hilbert::{SpaceSpec, StateVector, TritString, C64};

const ANGLE_SLACK: f64 = 1e-12;

/// Sweep angle in `[0, pi/2]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SweepAngle(f64);

impl SweepAngle {
    pub const ZERO: SweepAngle = SweepAngle(0.0);
    pub const END: SweepAngle = SweepAngle(FRAC_PI_2);

    /// Values within `1e-12` outside the range are clamped onto it.
    pub fn new(theta: f64) -> Result<Self> {
        if !(-ANGLE_SLACK..=FRAC_PI_2 + ANGLE_SLACK).contains(&theta) {
            return invalid(format!("sweep angle {theta} outside [0, pi/2]"));
        }
        Ok(Self(theta.clamp(0.0, FRAC_PI_2)))
    }

    pub fn radians(self) -> f64 {
        self.0
    }
}

/// Bias angle in the open interval `(0, pi/2)`; `pi/4` is unbiased.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct BiasAngle(f64);

impl BiasAngle {
    pub const UNBIASED: BiasAngle = BiasAngle(FRAC_PI_4);

    pub fn new(phi: f64) -> Result<Self> {
        if !(phi > 0.0 && phi < FRAC_PI_2) {
            return invalid(format!("bias angle {phi} outside (0, pi/2)"));
        }
        Ok(Self(phi))
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn is_unbiased(self) -> bool {
        self.0 == FRAC_PI_4
    }
}

impl Default for BiasAngle {
    fn default() -> Self {
        Self::UNBIASED
    }
}

fn real(v: &[f64]) -> DVector<C64> {
    DVector::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0)))
}

/// Computational level `level` of an `(m+1)`-dimensional unit.
pub fn level(level: usize, m: usize) -> DVector<C64> {
    let mut v = vec![0.0; m + 1];
    v[level] = 1.0;
    real(&v)
}

/// The undefined level `|u>`.
pub fn undefined(m: usize) -> DVector<C64> {
    level(m, m)
}

/// `cos(phi)|0> + sin(phi)|1>`.
pub fn zeta_plus(phi: BiasAngle) -> DVector<C64> {
    let p = phi.radians();
    real(&[p.cos(), p.sin(), 0.0])
}

/// `sin(phi)|0> - cos(phi)|1>`.
pub fn zeta_minus(phi: BiasAngle) -> DVector<C64> {
    let p = phi.radians();
    real(&[p.sin(), -p.cos(), 0.0])
}

/// Uniform superposition of the `m` computational levels.
pub fn omega(m: usize) -> DVector<C64> {
    let a = 1.0 / (m as f64).sqrt();
    let mut v = vec![a; m + 1];
    v[m] = 0.0;
    real(&v)
}

/// Forbidden state `-sin(theta)|u> + cos(theta)|s>`, where `|s>` is
/// `zeta_plus(phi)` for three-level units and the uniform superposition for
/// larger units.
pub fn xi_state(theta: SweepAngle, phi: BiasAngle, m: usize) -> Result<DVector<C64>> {
    if m < 2 {
        return invalid(format!("units need at least two levels, got {m}"));
    }
    if m > 2 && !phi.is_unbiased() {
        return Err(Error::Unsupported(
            "bias angles are only defined for three-level units".into(),
        ));
    }
    let t = theta.radians();
    let s = if m == 2 { zeta_plus(phi) } else { omega(m) };
    Ok(s.scale(t.cos()) - undefined(m).scale(t.sin()))
}

/// Unbiased three-level forbidden state.
pub fn xi(theta: SweepAngle) -> DVector<C64> {
    let t = theta.radians();
    let c = t.cos() * std::f64::consts::FRAC_1_SQRT_2;
    real(&[c, c, -t.sin()])
}

/// `(|+~>, |-~>)`: `cos(theta)|u> + sin(theta)|zeta_+>` and `|zeta_->`.
pub fn tilde_basis(theta: SweepAngle, phi: BiasAngle) -> (DVector<C64>, DVector<C64>) {
    let t = theta.radians();
    let plus = undefined(2).scale(t.cos()) + zeta_plus(phi).scale(t.sin());
    (plus, zeta_minus(phi))
}

/// Allowed-subspace bit state `|0~>` or `|1~>`.
pub fn tilde_bit(theta: SweepAngle, bit: u8, phi: BiasAngle) -> Result<DVector<C64>> {
    let (plus, minus) = tilde_basis(theta, phi);
    let p = phi.radians();
    match bit {
        0 => Ok(plus.scale(p.cos()) + minus.scale(p.sin())),
        1 => Ok(plus.scale(p.sin()) - minus.scale(p.cos())),
        b => invalid(format!("bit must be 0 or 1, got {b}")),
    }
}

/// `cos(theta)|u> + sin(theta)|omega>`.
pub fn omega_tilde(theta: SweepAngle, m: usize) -> DVector<C64> {
    let t = theta.radians();
    undefined(m).scale(t.cos()) + omega(m).scale(t.sin())
}

/// Normalised `|j> - (1/(m-1)) sum_{k != j} |k>`, orthogonal to `|omega>`.
pub fn antisymmetrised_level(j: usize, m: usize) -> Result<DVector<C64>> {
    if j >= m {
        return invalid(format!("level {j} outside 0..{m}"));
    }
    let other = -1.0 / (m as f64 - 1.0);
    let mut v: Vec<f64> = (0..=m)
        .map(|k| if k == j { 1.0 } else if k == m { 0.0 } else { other })
        .collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    Ok(real(&v))
}

/// Allowed state closest to level `j` for an `(m+1)`-level unit:
/// `(|omega~> + sqrt(m-1) |j_>) / sqrt(m)`.
///
/// Since `|j> = (|omega> + sqrt(m-1)|j_>) / sqrt(m)`, these states form an
/// orthonormal frame of the allowed space that reduces to `|j>` at
/// `theta = pi/2` and to [`tilde_bit`] when `m = 2`.
pub fn qudit_tilde_j(theta: SweepAngle, j: usize, m: usize) -> Result<DVector<C64>> {
    if m < 2 {
        return invalid(format!("units need at least two levels, got {m}"));
    }
    let mf = m as f64;
    let v = omega_tilde(theta, m) + antisymmetrised_level(j, m)?.scale((mf - 1.0).sqrt());
    Ok(v.unscale(mf.sqrt()))
}

/// Per-unit factor of the satisfying-assignment state, normalised.
pub fn phi_sat_local(theta: SweepAngle, bit: u8) -> Result<DVector<C64>> {
    if bit > 1 {
        return invalid(format!("bit must be 0 or 1, got {bit}"));
    }
    let t = theta.radians();
    let mut v = vec![0.0, 0.0, t.cos()];
    v[bit as usize] = SQRT_2 * t.sin();
    let n = (1.0 + t.sin().powi(2)).sqrt();
    Ok(real(&v).unscale(n))
}

/// Product state that follows `assignment` through the allowed subspaces.
pub fn phi_sat(theta: SweepAngle, assignment: &[u8]) -> Result<StateVector> {
    if assignment.is_empty() {
        return invalid("assignment must cover at least one unit");
    }
    let locals = assignment
        .iter()
        .map(|&b| phi_sat_local(theta, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(StateVector::product(&locals))
}

/// `|uu..u>` over `spec`.
pub fn undefined_product(spec: &SpaceSpec) -> StateVector {
    let idx = crate::hilbert::basis_index(&TritString::undefined(spec), spec)
        .expect("all-undefined string is always in range");
    StateVector::basis(spec.dim(), idx)
}

/// Probability of reading `u` on one unit of the satisfying-assignment state:
/// `cos^2(theta) / (1 + sin^2(theta))`.
pub fn undefined_probability(theta: SweepAngle) -> f64 {
    let t = theta.radians();
    t.cos().powi(2) / (1.0 + t.sin().powi(2))
}

/// `cos^2(theta) / (1 + sin^2(theta) (sqrt2 - 1)^2)`.
///
/// This normalises `cos(theta)|u> + sqrt2 sin(theta)|s>` as if its squared
/// norm were `1 + sin^2(theta)(sqrt2 - 1)^2`; the true squared norm is
/// `1 + sin^2(theta)`, so this is not the `u` probability of any state built
/// here. Provided for comparison with [`undefined_probability`].
pub fn undefined_probability_alt_norm(theta: SweepAngle) -> f64 {
    let t = theta.radians();
    t.cos().powi(2) / (1.0 + t.sin().powi(2) * (SQRT_2 - 1.0).powi(2))
}
