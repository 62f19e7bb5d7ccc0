//! Tensor-product spaces of `(m+1)`-level units.
//!
//! Each unit carries the computational levels `0..m` plus an undefined level
//! stored at local index `m`. Composite basis states are addressed by
//! [`TritString`]s with little-endian positional indexing, so unit 0 is the
//! fastest-varying digit of the flat index.
//!
//! Every matrix in this crate is dense. Exponentials are taken in the
//! eigenbasis returned by [`hermitian_eigendecomposition`].

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

/// Eigenvalues with magnitude below this are treated as exact zeros.
pub const KERNEL_TOL: f64 = 1e-9;

/// Largest admissible `|G - G^dagger|` entry, relative to the matrix scale.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Largest supported full-space dimension.
pub const MAX_DIM: usize = 1 << 14;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Shape of the composite space: `n_units` units with `levels` computational
/// levels each (plus the undefined level).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceSpec {
    n_units: usize,
    levels: usize,
}

impl SpaceSpec {
    pub fn new(n_units: usize, levels: usize) -> Result<Self> {
        if n_units == 0 {
            return invalid("a space needs at least one unit");
        }
        if levels < 2 {
            return invalid(format!("levels per unit must be >= 2, got {levels}"));
        }
        let mut dim = 1usize;
        for _ in 0..n_units {
            dim = dim.saturating_mul(levels + 1);
            if dim > MAX_DIM {
                return Err(Error::Unsupported(format!(
                    "{n_units} units of {} local levels exceed the dense limit of {MAX_DIM}",
                    levels + 1
                )));
            }
        }
        Ok(Self { n_units, levels })
    }

    /// Three-level units (`0`, `1`, `u`).
    pub fn qubits(n_units: usize) -> Result<Self> {
        Self::new(n_units, 2)
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn local_dim(&self) -> usize {
        self.levels + 1
    }

    pub fn undefined_level(&self) -> usize {
        self.levels
    }

    pub fn dim(&self) -> usize {
        self.local_dim().pow(self.n_units as u32)
    }

    /// Stride of `unit` in the flat index.
    pub fn stride(&self, unit: usize) -> usize {
        self.local_dim().pow(unit as u32)
    }

    /// Local level of `unit` in the flat basis index `index`.
    pub fn digit(&self, index: usize, unit: usize) -> usize {
        (index / self.stride(unit)) % self.local_dim()
    }

    /// All basis strings in flat-index order.
    pub fn strings(&self) -> impl Iterator<Item = TritString> + '_ {
        (0..self.dim()).map(move |i| self.decode(i))
    }

    fn decode(&self, mut index: usize) -> TritString {
        let l = self.local_dim();
        let mut digits = Vec::with_capacity(self.n_units);
        for _ in 0..self.n_units {
            digits.push(index % l);
            index /= l;
        }
        TritString { digits }
    }
}

/// Assignment of a local level to every unit.
///
/// The textual form lists unit 0 first, uses decimal digits for computational
/// levels and `u` for the undefined level, e.g. `"01u"`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TritString {
    digits: Vec<usize>,
}

impl TritString {
    pub fn new(digits: Vec<usize>) -> Self {
        Self { digits }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Self {
            digits: bits.iter().map(|&b| b as usize).collect(),
        }
    }

    pub fn undefined(spec: &SpaceSpec) -> Self {
        Self {
            digits: vec![spec.undefined_level(); spec.n_units()],
        }
    }

    pub fn digits(&self) -> &[usize] {
        &self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// Render with `levels` as the undefined level.
    pub fn render(&self, levels: usize) -> String {
        self.digits
            .iter()
            .map(|&d| {
                if d == levels {
                    'u'
                } else {
                    char::from_digit(d as u32, 36).unwrap_or('?')
                }
            })
            .collect()
    }

    /// Parse with `u` mapped to local index `levels`.
    pub fn parse_with_levels(s: &str, levels: usize) -> Result<Self> {
        let digits = s
            .trim()
            .chars()
            .map(|c| match c {
                'u' | 'U' => Ok(levels),
                c => match c.to_digit(10) {
                    Some(d) if (d as usize) < levels => Ok(d as usize),
                    _ => invalid(format!("bad level `{c}` in `{s}`")),
                },
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { digits })
    }
}

impl fmt::Display for TritString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(2))
    }
}

impl FromStr for TritString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_with_levels(s, 2)
    }
}

/// Flat basis index of `t`.
pub fn basis_index(t: &TritString, spec: &SpaceSpec) -> Result<usize> {
    if t.len() != spec.n_units() {
        return invalid(format!(
            "string has {} digits, space has {} units",
            t.len(),
            spec.n_units()
        ));
    }
    let l = spec.local_dim();
    let mut index = 0;
    for (j, &d) in t.digits.iter().enumerate().rev() {
        if d >= l {
            return invalid(format!("digit {d} at unit {j} exceeds local dimension {l}"));
        }
        index = index * l + d;
    }
    Ok(index)
}

/// Inverse of [`basis_index`].
pub fn trit_string(index: usize, spec: &SpaceSpec) -> Result<TritString> {
    if index >= spec.dim() {
        return invalid(format!("index {index} outside dimension {}", spec.dim()));
    }
    Ok(spec.decode(index))
}

/// Dense amplitude vector over the full space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
}

impl StateVector {
    pub fn new(amps: DVector<C64>) -> Self {
        Self { amps }
    }

    pub fn from_vec(amps: Vec<C64>) -> Self {
        Self {
            amps: DVector::from_vec(amps),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            amps: DVector::zeros(dim),
        }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amps = DVector::zeros(dim);
        amps[index] = ONE;
        Self { amps }
    }

    /// Tensor product of per-unit vectors, unit 0 least significant.
    pub fn product(locals: &[DVector<C64>]) -> Self {
        let mut amps = DVector::from_element(1, ONE);
        for local in locals {
            let l = local.len();
            let d = amps.len();
            let mut next = DVector::zeros(d * l);
            for (a, la) in local.iter().enumerate() {
                for (i, ai) in amps.iter().enumerate() {
                    next[a * d + i] = ai * la;
                }
            }
            amps = next;
        }
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amps
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amps[index]
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.amps[index].norm_sqr()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn normalized(&self) -> Result<StateVector> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return invalid("cannot normalise the zero vector");
        }
        Ok(Self {
            amps: self.amps.unscale(n),
        })
    }
}

/// Dense Hermitian matrix over the full space.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianGenerator {
    matrix: DMatrix<C64>,
}

impl HermitianGenerator {
    /// Validates Hermiticity and stores the exactly symmetrised matrix.
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return invalid(format!(
                "generator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            ));
        }
        let scale = matrix.iter().fold(1.0f64, |m, z| m.max(z.norm()));
        let n = matrix.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((matrix[(i, j)] - matrix[(j, i)].conj()).norm());
            }
        }
        if worst > HERMITIAN_TOL * scale {
            return invalid(format!("matrix is not Hermitian (deviation {worst:e})"));
        }
        let matrix = (&matrix + matrix.adjoint()).unscale(2.0);
        Ok(Self { matrix })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Self {
            matrix: DMatrix::from_diagonal(&d),
        }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn plus(&self, other: &HermitianGenerator) -> Result<HermitianGenerator> {
        if self.dim() != other.dim() {
            return invalid(format!(
                "dimension mismatch: {} vs {}",
                self.dim(),
                other.dim()
            ));
        }
        Ok(Self {
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn scaled(&self, factor: f64) -> HermitianGenerator {
        Self {
            matrix: self.matrix.scale(factor),
        }
    }

    /// Real parts of the diagonal.
    pub fn real_diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| i == j || self.matrix[(i, j)] == ZERO))
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        StateVector::new(&self.matrix * psi.amplitudes())
    }
}

/// How a generator acts over a time step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvolveMode {
    /// `exp(-i G dt)`
    Unitary,
    /// `exp(-G dt)`
    Decay,
}

/// Eigenvalues in ascending order with matching orthonormal eigenvector
/// columns.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl Eigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Columns spanning the eigenspace with `|lambda| < tol`.
    pub fn kernel(&self, tol: f64) -> DMatrix<C64> {
        let cols: Vec<usize> = (0..self.dim())
            .filter(|&k| self.values[k].abs() < tol)
            .collect();
        self.vectors.select_columns(cols.iter())
    }

    pub fn kernel_dim(&self, tol: f64) -> usize {
        self.values.iter().filter(|v| v.abs() < tol).count()
    }

    /// Smallest eigenvalue magnitude.
    pub fn min_magnitude(&self) -> f64 {
        self.values
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }

    pub fn reconstruct(&self) -> DMatrix<C64> {
        let d = DVector::from_iterator(self.dim(), self.values.iter().map(|&x| C64::new(x, 0.0)));
        &self.vectors * DMatrix::from_diagonal(&d) * self.vectors.adjoint()
    }

    /// Applies `exp(-i G dt)` or `exp(-G dt)` to `psi`.
    pub fn propagate(&self, psi: &StateVector, dt: f64, mode: EvolveMode) -> StateVector {
        let mut coeffs = self.vectors.ad_mul(psi.amplitudes());
        let scale = self.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (c, &lambda) in coeffs.iter_mut().zip(&self.values) {
            *c *= match mode {
                EvolveMode::Unitary => C64::from_polar(1.0, -lambda * dt),
                EvolveMode::Decay => {
                    // Roundoff can push zero modes of a PSD generator slightly negative.
                    let rate = if lambda < 0.0 && lambda > -1e-12 * scale {
                        0.0
                    } else {
                        lambda
                    };
                    C64::new((-rate * dt).exp(), 0.0)
                }
            };
        }
        StateVector::new(&self.vectors * coeffs)
    }
}

/// Full eigendecomposition with eigenvalues sorted ascending.
///
/// Diagonal and real-symmetric inputs take cheaper paths; the result is the
/// same decomposition up to the choice of basis inside degenerate
/// eigenspaces.
pub fn hermitian_eigendecomposition(g: &HermitianGenerator) -> Eigen {
    let n = g.dim();
    let m = g.matrix();
    let (values, vectors) = if g.is_diagonal() {
        (
            m.diagonal().iter().map(|z| z.re).collect::<Vec<_>>(),
            DMatrix::<C64>::identity(n, n),
        )
    } else if m.iter().all(|z| z.im == 0.0) {
        let re = m.map(|z| z.re);
        let eig = nalgebra::SymmetricEigen::new(re);
        (
            eig.eigenvalues.iter().copied().collect(),
            eig.eigenvectors.map(|x| C64::new(x, 0.0)),
        )
    } else {
        let eig = nalgebra::SymmetricEigen::new(m.clone());
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    Eigen {
        values: order.iter().map(|&k| values[k]).collect(),
        vectors: vectors.select_columns(order.iter()),
    }
}

/// Orthonormal columns spanning the near-null eigenspace of `g`.
pub fn kernel_basis(g: &HermitianGenerator, tol: f64) -> DMatrix<C64> {
    hermitian_eigendecomposition(g).kernel(tol)
}

/// One exact propagation step of length `dt`.
pub fn evolve_step(
    psi: &StateVector,
    g: &HermitianGenerator,
    dt: f64,
    mode: EvolveMode,
) -> Result<StateVector> {
    if !(dt >= 0.0) {
        return invalid(format!("time step must be non-negative, got {dt}"));
    }
    if psi.dim() != g.dim() {
        return invalid(format!(
            "state of dimension {} vs generator of dimension {}",
            psi.dim(),
            g.dim()
        ));
    }
    Ok(hermitian_eigendecomposition(g).propagate(psi, dt, mode))
}

/// Offsets of every local configuration of `subset` inside the flat index,
/// with the subset's own index little-endian in subset order.
fn subset_offsets(subset: &[usize], spec: &SpaceSpec) -> Vec<usize> {
    let l = spec.local_dim();
    let size = l.pow(subset.len() as u32);
    (0..size)
        .map(|mut local| {
            let mut off = 0;
            for &unit in subset {
                off += (local % l) * spec.stride(unit);
                local /= l;
            }
            off
        })
        .collect()
}

fn local_index(index: usize, subset: &[usize], spec: &SpaceSpec) -> usize {
    let l = spec.local_dim();
    subset
        .iter()
        .rev()
        .fold(0, |acc, &unit| acc * l + spec.digit(index, unit))
}

fn check_subset(op: &DMatrix<C64>, subset: &[usize], spec: &SpaceSpec) -> Result<()> {
    let expected = spec.local_dim().pow(subset.len() as u32);
    if op.nrows() != expected || op.ncols() != expected {
        return invalid(format!(
            "operator is {}x{}, subset of {} units needs {expected}x{expected}",
            op.nrows(),
            op.ncols(),
            subset.len()
        ));
    }
    for (k, &u) in subset.iter().enumerate() {
        if u >= spec.n_units() {
            return invalid(format!("unit {u} outside a space of {} units", spec.n_units()));
        }
        if subset[..k].contains(&u) {
            return invalid(format!("unit {u} repeated in subset"));
        }
    }
    Ok(())
}

/// `op` on `subset` tensored with the identity elsewhere, without a
/// Hermiticity requirement.
pub fn embed_operator(op: &DMatrix<C64>, subset: &[usize], spec: &SpaceSpec) -> Result<DMatrix<C64>> {
    let dim = spec.dim();
    let mut out = DMatrix::zeros(dim, dim);
    add_embedded(&mut out, op, subset, spec, 1.0)?;
    Ok(out)
}

/// Adds `weight * embed(op)` into `target` in place.
pub fn add_embedded(
    target: &mut DMatrix<C64>,
    op: &DMatrix<C64>,
    subset: &[usize],
    spec: &SpaceSpec,
    weight: f64,
) -> Result<()> {
    check_subset(op, subset, spec)?;
    let dim = spec.dim();
    if target.nrows() != dim || target.ncols() != dim {
        return invalid(format!("target matrix must be {dim}x{dim}"));
    }
    let offsets = subset_offsets(subset, spec);
    for row in 0..dim {
        let li = local_index(row, subset, spec);
        let rest = row - offsets[li];
        for (lj, &off) in offsets.iter().enumerate() {
            let v = op[(li, lj)];
            if v != ZERO {
                target[(row, rest + off)] += v * weight;
            }
        }
    }
    Ok(())
}

/// Hermitian `op` on `subset` tensored with the identity elsewhere.
pub fn embed_local(op: &DMatrix<C64>, subset: &[usize], spec: &SpaceSpec) -> Result<HermitianGenerator> {
    HermitianGenerator::new(embed_operator(op, subset, spec)?)
}

/// Applies a local operator to `psi` without forming the full matrix.
pub fn apply_local(
    psi: &StateVector,
    op: &DMatrix<C64>,
    subset: &[usize],
    spec: &SpaceSpec,
) -> Result<StateVector> {
    check_subset(op, subset, spec)?;
    if psi.dim() != spec.dim() {
        return invalid(format!(
            "state dimension {} does not match space dimension {}",
            psi.dim(),
            spec.dim()
        ));
    }
    let offsets = subset_offsets(subset, spec);
    let a = psi.amplitudes();
    let out = DVector::from_iterator(
        spec.dim(),
        (0..spec.dim()).map(|row| {
            let li = local_index(row, subset, spec);
            let rest = row - offsets[li];
            offsets
                .iter()
                .enumerate()
                .map(|(lj, &off)| op[(li, lj)] * a[rest + off])
                .sum::<C64>()
        }),
    );
    Ok(StateVector::new(out))
}

/// `|v><v|` for a column vector.
pub fn projector(v: &DVector<C64>) -> DMatrix<C64> {
    v * v.adjoint()
}

/// Real local `Z = diag(1, -1, 0, ..)` acting on the first two levels.
pub fn local_z(levels: usize) -> DMatrix<C64> {
    let mut z = DMatrix::zeros(levels + 1, levels + 1);
    z[(0, 0)] = ONE;
    z[(1, 1)] = -ONE;
    z
}

/// Real-valued local Z eigenvalue of a level.
pub fn z_value(level: usize) -> f64 {
    match level {
        0 => 1.0,
        1 => -1.0,
        _ => 0.0,
    }
}
