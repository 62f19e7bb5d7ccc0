//! Hamiltonian and generator builders.
//!
//! Three-level units use `Z = diag(1, -1, 0)`, so Ising terms vanish on the
//! undefined level. Constraint generators are sums of weighted projectors on
//! forbidden states. The same [`ForbiddenSet`] serves as a decay generator
//! (`exp(-G t)`) or as an energy penalty (`+G`).

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hilbert::{
    add_embedded, projector, z_value, HermitianGenerator, SpaceSpec, C64,
};
use crate::states::{
    omega_tilde, qudit_tilde_j, tilde_bit, xi_state, zeta_minus, BiasAngle, SweepAngle,
};

/// Longitudinal fields of the five-variable three-hot benchmark.
pub const THREE_HOT_FIELDS: [f64; 5] = [
    -0.67513783,
    -0.62099006,
    -0.14675767,
    0.72688415,
    0.56602992,
];

/// Ising cost `sum_j h_j Z_j + sum_{j<k} J_jk Z_j Z_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingProblem {
    h: Vec<f64>,
    j: Vec<Vec<f64>>,
}

impl IsingProblem {
    pub fn new(h: Vec<f64>, j: Vec<Vec<f64>>) -> Result<Self> {
        let n = h.len();
        if j.len() != n || j.iter().any(|row| row.len() != n) {
            return invalid(format!("couplings must be a {n}x{n} matrix"));
        }
        for a in 0..n {
            if j[a][a] != 0.0 {
                return invalid(format!("coupling diagonal must be zero (J[{a}][{a}] = {})", j[a][a]));
            }
            for b in 0..a {
                if (j[a][b] - j[b][a]).abs() > 1e-12 {
                    return invalid(format!("couplings not symmetric at ({a}, {b})"));
                }
            }
        }
        if h.iter().chain(j.iter().flatten()).any(|x| !x.is_finite()) {
            return invalid("fields and couplings must be finite");
        }
        Ok(Self { h, j })
    }

    /// Fields only.
    pub fn fields(h: Vec<f64>) -> Self {
        let n = h.len();
        Self {
            h,
            j: vec![vec![0.0; n]; n],
        }
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn coupling(&self, a: usize, b: usize) -> f64 {
        self.j[a][b]
    }

    pub fn couplings(&self) -> &[Vec<f64>] {
        &self.j
    }

    /// Cost of an assignment of local levels (undefined levels contribute 0).
    pub fn energy_of_levels(&self, levels: &[usize]) -> f64 {
        let z: Vec<f64> = levels.iter().map(|&d| z_value(d)).collect();
        let mut e: f64 = self.h.iter().zip(&z).map(|(h, z)| h * z).sum();
        for a in 0..self.n() {
            for b in a + 1..self.n() {
                e += self.j[a][b] * z[a] * z[b];
            }
        }
        e
    }

    /// Cost over the `2^n` bit strings, bit `j` of the index being unit `j`.
    pub fn qubit_diagonal(&self) -> Vec<f64> {
        let n = self.n();
        (0..1usize << n)
            .map(|x| {
                let levels: Vec<usize> = (0..n).map(|j| (x >> j) & 1).collect();
                self.energy_of_levels(&levels)
            })
            .collect()
    }

    /// Brute-force minimiser over bit strings (lowest index on ties).
    pub fn ground_state(&self) -> (Vec<u8>, f64) {
        let diag = self.qubit_diagonal();
        let (best, e) = diag
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &e)| if e < acc.1 { (i, e) } else { acc });
        ((0..self.n()).map(|j| ((best >> j) & 1) as u8).collect(), e)
    }
}

/// Energy offset `-alpha` on every undefined level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetSpec {
    alpha: f64,
}

impl OffsetSpec {
    pub const NONE: OffsetSpec = OffsetSpec { alpha: 0.0 };

    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return invalid(format!("offset must be finite and non-negative, got {alpha}"));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// One weighted forbidden state.
#[derive(Clone, Debug, PartialEq)]
pub enum ForbiddenEntry {
    /// `|state><state|` on `units`, identity elsewhere.
    Local {
        state: DVector<C64>,
        units: Vec<usize>,
        weight: f64,
    },
    /// Computational pattern on `units` (local levels, one per unit),
    /// identity elsewhere.
    Pattern {
        levels: Vec<usize>,
        units: Vec<usize>,
        weight: f64,
    },
    /// A single full-space basis state.
    Basis { index: usize, weight: f64 },
}

impl ForbiddenEntry {
    pub fn weight(&self) -> f64 {
        match self {
            ForbiddenEntry::Local { weight, .. }
            | ForbiddenEntry::Pattern { weight, .. }
            | ForbiddenEntry::Basis { weight, .. } => *weight,
        }
    }

    fn is_diagonal(&self) -> bool {
        !matches!(self, ForbiddenEntry::Local { .. })
    }

    /// Whether the computational basis state `index` lies in this entry's
    /// diagonal support; `None` for non-diagonal entries.
    pub fn matches(&self, index: usize, spec: &SpaceSpec) -> Option<bool> {
        match self {
            ForbiddenEntry::Local { .. } => None,
            ForbiddenEntry::Pattern { levels, units, .. } => Some(
                units
                    .iter()
                    .zip(levels)
                    .all(|(&u, &l)| spec.digit(index, u) == l),
            ),
            ForbiddenEntry::Basis { index: i, .. } => Some(*i == index),
        }
    }
}

/// Collection of weighted forbidden states.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ForbiddenSet {
    pub entries: Vec<ForbiddenEntry>,
}

impl ForbiddenSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: ForbiddenEntry) {
        self.entries.push(entry);
    }

    pub fn extend(&mut self, other: &ForbiddenSet) {
        self.entries.extend(other.entries.iter().cloned());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Same entries with every weight multiplied by `factor`.
    pub fn reweighted(&self, factor: f64) -> ForbiddenSet {
        let entries = self
            .entries
            .iter()
            .cloned()
            .map(|mut e| {
                match &mut e {
                    ForbiddenEntry::Local { weight, .. }
                    | ForbiddenEntry::Pattern { weight, .. }
                    | ForbiddenEntry::Basis { weight, .. } => *weight *= factor,
                }
                e
            })
            .collect();
        ForbiddenSet { entries }
    }

    /// Diagonal part (patterns and basis states) as a full-space vector.
    pub fn diagonal(&self, spec: &SpaceSpec) -> Result<Vec<f64>> {
        let mut diag = vec![0.0; spec.dim()];
        for e in self.entries.iter().filter(|e| e.is_diagonal()) {
            validate_entry(e, spec)?;
            match e {
                ForbiddenEntry::Basis { index, weight } => diag[*index] += weight,
                _ => {
                    for (i, d) in diag.iter_mut().enumerate() {
                        if e.matches(i, spec) == Some(true) {
                            *d += e.weight();
                        }
                    }
                }
            }
        }
        Ok(diag)
    }
}

fn validate_entry(e: &ForbiddenEntry, spec: &SpaceSpec) -> Result<()> {
    let w = e.weight();
    if !(w >= 0.0 && w.is_finite()) {
        return invalid(format!("forbidden-state weight must be finite and non-negative, got {w}"));
    }
    let check_units = |units: &[usize]| -> Result<()> {
        for (k, &u) in units.iter().enumerate() {
            if u >= spec.n_units() || units[..k].contains(&u) {
                return invalid(format!("bad unit {u} in forbidden entry"));
            }
        }
        Ok(())
    };
    match e {
        ForbiddenEntry::Local { state, units, .. } => {
            check_units(units)?;
            let want = spec.local_dim().pow(units.len() as u32);
            if state.len() != want {
                return invalid(format!("local state has {} entries, expected {want}", state.len()));
            }
        }
        ForbiddenEntry::Pattern { levels, units, .. } => {
            check_units(units)?;
            if levels.len() != units.len() || levels.iter().any(|&l| l >= spec.local_dim()) {
                return invalid("pattern levels do not match its units");
            }
        }
        ForbiddenEntry::Basis { index, .. } => {
            if *index >= spec.dim() {
                return invalid(format!("basis index {index} outside dimension {}", spec.dim()));
            }
        }
    }
    Ok(())
}

/// `G = sum_j w_j |xi_j><xi_j|`, each term embedded into the full space.
pub fn forbidden_generator(f: &ForbiddenSet, spec: &SpaceSpec) -> Result<HermitianGenerator> {
    let diag = f.diagonal(spec)?;
    let mut g = DMatrix::from_diagonal(&DVector::from_iterator(
        diag.len(),
        diag.iter().map(|&x| C64::new(x, 0.0)),
    ));
    for e in &f.entries {
        if let ForbiddenEntry::Local { state, units, weight } = e {
            validate_entry(e, spec)?;
            add_embedded(&mut g, &projector(state), units, spec, *weight)?;
        }
    }
    HermitianGenerator::new(g)
}

/// Per-unit forbidden states at a sweep angle plus a fixed set of
/// constraint entries.
#[derive(Clone, Debug)]
pub struct ConstraintModel {
    spec: SpaceSpec,
    xi_weight: f64,
    fixed: ForbiddenSet,
}

impl ConstraintModel {
    pub fn new(spec: SpaceSpec, xi_weight: f64, fixed: ForbiddenSet) -> Result<Self> {
        if !(xi_weight >= 0.0 && xi_weight.is_finite()) {
            return invalid(format!("weight must be finite and non-negative, got {xi_weight}"));
        }
        for e in &fixed.entries {
            validate_entry(e, &spec)?;
        }
        Ok(Self { spec, xi_weight, fixed })
    }

    pub fn spec(&self) -> &SpaceSpec {
        &self.spec
    }

    pub fn fixed(&self) -> &ForbiddenSet {
        &self.fixed
    }

    pub fn xi_weight(&self) -> f64 {
        self.xi_weight
    }

    pub fn forbidden_set(&self, theta: SweepAngle) -> Result<ForbiddenSet> {
        let xi = xi_state(theta, BiasAngle::UNBIASED, self.spec.levels())?;
        let mut f = ForbiddenSet::new();
        for unit in 0..self.spec.n_units() {
            f.push(ForbiddenEntry::Local {
                state: xi.clone(),
                units: vec![unit],
                weight: self.xi_weight,
            });
        }
        f.extend(&self.fixed);
        Ok(f)
    }

    pub fn generator(&self, theta: SweepAngle) -> Result<HermitianGenerator> {
        forbidden_generator(&self.forbidden_set(theta)?, &self.spec)
    }
}

/// Diagonal Ising Hamiltonian over the extended basis.
pub fn ising_hamiltonian(p: &IsingProblem, spec: &SpaceSpec) -> Result<HermitianGenerator> {
    if p.n() != spec.n_units() {
        return invalid(format!("problem has {} variables, space has {} units", p.n(), spec.n_units()));
    }
    let diag: Vec<f64> = spec.strings().map(|t| p.energy_of_levels(t.digits())).collect();
    Ok(HermitianGenerator::from_real_diagonal(&diag))
}

/// `-alpha sum_j |u_j><u_j|`.
pub fn offset_hamiltonian(o: &OffsetSpec, spec: &SpaceSpec) -> HermitianGenerator {
    let u = spec.undefined_level();
    let diag: Vec<f64> = spec
        .strings()
        .map(|t| -o.alpha() * t.digits().iter().filter(|&&d| d == u).count() as f64)
        .collect();
    HermitianGenerator::from_real_diagonal(&diag)
}

/// Closed-form allowed-subspace Hamiltonian over the `2^n` tilde-bit frame:
/// `(alpha/2) cos^2 (n I - sum X~) + sin sum h Z~ + sin^2 sum J Z~ Z~`.
pub fn predicted_effective_hamiltonian(
    theta: SweepAngle,
    p: &IsingProblem,
    o: &OffsetSpec,
) -> DMatrix<f64> {
    let n = p.n();
    let dim = 1usize << n;
    let t = theta.radians();
    let a = o.alpha() / 2.0 * t.cos().powi(2);
    let mut m = DMatrix::zeros(dim, dim);
    for x in 0..dim {
        let levels: Vec<usize> = (0..n).map(|j| (x >> j) & 1).collect();
        let z: Vec<f64> = levels.iter().map(|&d| z_value(d)).collect();
        let mut e = a * n as f64;
        e += t.sin() * p.h.iter().zip(&z).map(|(h, z)| h * z).sum::<f64>();
        for j in 0..n {
            for k in j + 1..n {
                e += t.sin().powi(2) * p.j[j][k] * z[j] * z[k];
            }
        }
        m[(x, x)] = e;
        for j in 0..n {
            m[(x ^ (1 << j), x)] -= a;
        }
    }
    m
}

/// Columns `⊗_j |b_j~>` for every bit string, bit `j` of the column index
/// being unit `j`.
pub fn tilde_frame(theta: SweepAngle, spec: &SpaceSpec) -> Result<DMatrix<C64>> {
    if spec.levels() != 2 {
        return invalid("the tilde-bit frame needs three-level units");
    }
    let n = spec.n_units();
    let bits = [
        tilde_bit(theta, 0, BiasAngle::UNBIASED)?,
        tilde_bit(theta, 1, BiasAngle::UNBIASED)?,
    ];
    let mut frame = DMatrix::zeros(spec.dim(), 1 << n);
    for x in 0..1usize << n {
        let locals: Vec<_> = (0..n).map(|j| bits[(x >> j) & 1].clone()).collect();
        frame.set_column(x, crate::hilbert::StateVector::product(&locals).amplitudes());
    }
    Ok(frame)
}

/// Replaces every field by a coupling to an extra variable appended last.
pub fn auxiliary_field_transform(p: &IsingProblem) -> IsingProblem {
    let n = p.n();
    let mut j = vec![vec![0.0; n + 1]; n + 1];
    for a in 0..n {
        for b in 0..n {
            j[a][b] = p.j[a][b];
        }
        j[a][n] = p.h[a];
        j[n][a] = p.h[a];
    }
    IsingProblem { h: vec![0.0; n + 1], j }
}

/// `-(1 - s) sum_j X_j + s diag(problem)` over `2^n` qubit states.
pub fn transverse_field_hamiltonian(s: f64, problem_diag: &[f64]) -> Result<HermitianGenerator> {
    if !(0.0..=1.0).contains(&s) {
        return invalid(format!("schedule parameter {s} outside [0, 1]"));
    }
    let dim = problem_diag.len();
    if dim < 2 || !dim.is_power_of_two() {
        return invalid(format!("problem diagonal length {dim} is not a power of two"));
    }
    let n = dim.trailing_zeros();
    let mut m = DMatrix::zeros(dim, dim);
    for x in 0..dim {
        m[(x, x)] = C64::new(s * problem_diag[x], 0.0);
        for j in 0..n {
            m[(x ^ (1 << j), x)] = C64::new(-(1.0 - s), 0.0);
        }
    }
    HermitianGenerator::new(m)
}

/// Pump and Stokes amplitudes of the four-level dark-state scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StirapPulse {
    pub a: f64,
    pub b: f64,
}

impl StirapPulse {
    /// `atan(B / A)` mapped into `[0, pi/2]` for non-negative amplitudes.
    pub fn theta(&self) -> Result<f64> {
        if self.a == 0.0 && self.b == 0.0 {
            return invalid("angle undefined when both amplitudes vanish");
        }
        Ok(self.b.atan2(self.a))
    }

    /// Null eigenvector `(A|u> + B|+>)/sqrt(A^2 + B^2)` in the
    /// `{|0>, |1>, |u>, |beta>}` ordering.
    pub fn dark_state(&self) -> Result<DVector<C64>> {
        let r = self.a.hypot(self.b);
        if r == 0.0 {
            return invalid("dark state undefined when both amplitudes vanish");
        }
        let p = self.b / r * std::f64::consts::FRAC_1_SQRT_2;
        Ok(DVector::from_vec(vec![
            C64::new(p, 0.0),
            C64::new(p, 0.0),
            C64::new(self.a / r, 0.0),
            C64::new(0.0, 0.0),
        ]))
    }
}

/// `A(|+><beta| + h.c.) - B(|u><beta| + h.c.)` over `{|0>, |1>, |u>, |beta>}`.
pub fn stirap_hamiltonian(p: &StirapPulse) -> DMatrix<C64> {
    let mut h = DMatrix::zeros(4, 4);
    let ap = C64::new(p.a * std::f64::consts::FRAC_1_SQRT_2, 0.0);
    for k in 0..2 {
        h[(k, 3)] = ap;
        h[(3, k)] = ap;
    }
    h[(2, 3)] = C64::new(-p.b, 0.0);
    h[(3, 2)] = C64::new(-p.b, 0.0);
    h
}

/// Cosine/sine crossfade over `t_grid`: `A = cos(pi tau / 2)`,
/// `B = sin(pi tau / 2)` with `tau` the normalised time, and exact
/// endpoints `B(start) = 0`, `A(end) = 0`.
pub fn stirap_schedule(t_grid: &[f64]) -> Result<Vec<StirapPulse>> {
    if t_grid.len() < 2 {
        return invalid("a pulse schedule needs at least two time points");
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("time grid must be strictly increasing");
    }
    let (t0, t1) = (t_grid[0], t_grid[t_grid.len() - 1]);
    let last = t_grid.len() - 1;
    Ok(t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            if k == 0 {
                StirapPulse { a: 1.0, b: 0.0 }
            } else if k == last {
                StirapPulse { a: 0.0, b: 1.0 }
            } else {
                let phase = FRAC_PI_2 * (t - t0) / (t1 - t0);
                StirapPulse { a: phase.cos(), b: phase.sin() }
            }
        })
        .collect())
}

/// Offset-induced drive on one qudit and its matrix in the allowed frame.
#[derive(Clone, Debug)]
pub struct QuditDrive {
    /// `-alpha cos^2(theta) |omega~><omega~|` on the `(m+1)`-level unit.
    pub full: DMatrix<C64>,
    /// Entries `<j~| full |k~>` for `j, k < m`.
    pub restricted: DMatrix<f64>,
    /// Frame vectors `|j~>` as columns.
    pub frame: DMatrix<C64>,
}

/// Coefficient `kappa` with `full = kappa sum_{jk} |j~><k~|`:
/// `-alpha cos^2(theta) / m`.
pub fn qudit_drive_prefactor(theta: SweepAngle, alpha: f64, m: usize) -> f64 {
    -alpha * theta.radians().cos().powi(2) / m as f64
}

/// `-alpha cos^2(theta) / (m + 1 + 1/(m-1))`, an alternative normalisation
/// of the same sum; it does not reproduce `full` for any `m`.
pub fn qudit_drive_prefactor_alt(theta: SweepAngle, alpha: f64, m: usize) -> f64 {
    let mf = m as f64;
    -alpha * theta.radians().cos().powi(2) / (mf + 1.0 + 1.0 / (mf - 1.0))
}

pub fn qudit_drive_matrix(theta: SweepAngle, alpha: f64, m: usize) -> Result<QuditDrive> {
    if m < 2 {
        return invalid(format!("qudits need at least two levels, got {m}"));
    }
    let w = omega_tilde(theta, m);
    let full = projector(&w).scale(-alpha * theta.radians().cos().powi(2));
    let mut frame = DMatrix::zeros(m + 1, m);
    for j in 0..m {
        frame.set_column(j, &qudit_tilde_j(theta, j, m)?);
    }
    let restricted = (frame.adjoint() * &full * &frame).map(|z| z.re);
    Ok(QuditDrive { full, restricted, frame })
}

/// Drive on two qubits sharing one undefined level, treated as a qudit with
/// `m = 4` over `{|00>, |10>, |01>, |11>, |u>}` (level `a + 2b` for bits
/// `a`, `b`).
pub fn pair_drive_matrix(theta: SweepAngle, alpha: f64) -> Result<QuditDrive> {
    qudit_drive_matrix(theta, alpha, 4)
}

/// Rank-one coefficient `-sqrt(3/64) alpha cos(theta)`, an alternative
/// closed form for [`pair_drive_matrix`].
pub fn pair_drive_prefactor_alt(theta: SweepAngle, alpha: f64) -> f64 {
    -(3.0f64 / 64.0).sqrt() * alpha * theta.radians().cos()
}

/// Coefficients `(B_1, B_Z, B_X)` with `P Z P = B_1 I + B_Z Z~ + B_X X~` on
/// the biased allowed space.
pub fn biased_z_coefficients(phi: BiasAngle, theta: SweepAngle) -> (f64, f64, f64) {
    let (c, s) = (phi.radians().cos(), phi.radians().sin());
    let c2 = c * c - s * s;
    let cs = c * s;
    let st = theta.radians().sin();
    let b1 = c2 * (st * st - 1.0) / 2.0;
    let bz = c2 * c2 * (1.0 + st * st) / 2.0 + 4.0 * st * cs * cs;
    let bx = c2 * cs * (1.0 - st).powi(2);
    (b1, bz, bx)
}

/// `(B_1, B_Z, B_X)` read off directly from `F^T Z F` with `F` the biased
/// tilde-bit frame.
pub fn biased_z_sandwich(phi: BiasAngle, theta: SweepAngle) -> Result<(f64, f64, f64)> {
    let mut f = DMatrix::zeros(3, 2);
    f.set_column(0, &tilde_bit(theta, 0, phi)?);
    f.set_column(1, &tilde_bit(theta, 1, phi)?);
    let m = (f.adjoint() * crate::hilbert::local_z(2) * &f).map(|c| c.re);
    Ok(((m[(0, 0)] + m[(1, 1)]) / 2.0, (m[(0, 0)] - m[(1, 1)]) / 2.0, m[(0, 1)]))
}

/// Alternative closed forms for the biased coefficients:
/// `B_1 = c2 (sin^2 - 1)`, `B_Z = c2^2 (sin^2 - 1) + 4 sin s^2 c^2`,
/// `B_X = c2 (1 - sin)^2 c s` with `c2 = cos^2(phi) - sin^2(phi)`.
/// `B_X` agrees with [`biased_z_coefficients`]; `B_1` is twice the exact
/// value and `B_Z` differs away from `phi = pi/4`.
pub fn biased_z_coefficients_alt(phi: BiasAngle, theta: SweepAngle) -> (f64, f64, f64) {
    let (c, s) = (phi.radians().cos(), phi.radians().sin());
    let c2 = c * c - s * s;
    let st = theta.radians().sin();
    (
        c2 * (st * st - 1.0),
        c2 * c2 * (st * st - 1.0) + 4.0 * st * s * s * c * c,
        c2 * (st * st + 1.0 - 2.0 * st) * c * s,
    )
}

/// `-sum_{j<k} J_jk (B_1(phi_j) Z_k + B_1(phi_k) Z_j)`, which cancels the
/// single-`Z~` terms that biased frames generate from couplings.
pub fn bias_correction_hamiltonian(
    p: &IsingProblem,
    phis: &[BiasAngle],
    theta: SweepAngle,
    spec: &SpaceSpec,
) -> Result<HermitianGenerator> {
    let n = p.n();
    if phis.len() != n || spec.n_units() != n || spec.levels() != 2 {
        return invalid("bias angles, problem and space must agree on three-level units");
    }
    let b1: Vec<f64> = phis.iter().map(|&phi| biased_z_coefficients(phi, theta).0).collect();
    let mut fields = vec![0.0; n];
    for j in 0..n {
        for k in j + 1..n {
            fields[k] -= p.j[j][k] * b1[j];
            fields[j] -= p.j[j][k] * b1[k];
        }
    }
    ising_hamiltonian(&IsingProblem::fields(fields), spec)
}

/// `<zeta_-|Z|zeta_->`.
pub fn zeta_minus_z(phi: BiasAngle) -> f64 {
    let v = zeta_minus(phi);
    v[0].norm_sqr() - v[1].norm_sqr()
}

/// `-min_j [ z_j sum_k J_jk z_k / 2 ]` with `z_j = <zeta_-(phi_j)|Z|zeta_-(phi_j)>`.
pub fn bias_alpha_lower_bound(p: &IsingProblem, phis: &[BiasAngle]) -> Result<f64> {
    if phis.len() != p.n() {
        return invalid("one bias angle per variable is required");
    }
    let z: Vec<f64> = phis.iter().map(|&phi| zeta_minus_z(phi)).collect();
    let worst = (0..p.n())
        .map(|j| z[j] * (0..p.n()).map(|k| 0.5 * p.j[j][k] * z[k]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Ok(if worst.is_finite() { -worst } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{basis_index, hermitian_eigendecomposition, kernel_basis, TritString, KERNEL_TOL};
    use crate::states::{phi_sat, tilde_basis, undefined_product};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    fn th(t: f64) -> SweepAngle {
        SweepAngle::new(t).unwrap()
    }

    fn max_abs_c(m: &DMatrix<C64>) -> f64 {
        m.iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0, |a, z| a.max(z.abs()))
    }

    #[test]
    fn ising_examples() {
        let s1 = SpaceSpec::qubits(1).unwrap();
        let g = ising_hamiltonian(&IsingProblem::fields(vec![1.0]), &s1).unwrap();
        assert_eq!(g.real_diagonal(), vec![1.0, -1.0, 0.0]);

        let s2 = SpaceSpec::qubits(2).unwrap();
        let p = IsingProblem::new(vec![0.0, 0.0], vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let d = ising_hamiltonian(&p, &s2).unwrap().real_diagonal();
        let at = |s: &str| d[basis_index(&s.parse().unwrap(), &s2).unwrap()];
        assert_eq!(at("00"), 1.0);
        assert_eq!(at("01"), -1.0);
        for s in ["u0", "0u", "u1", "1u", "uu"] {
            assert_eq!(at(s), 0.0);
        }

        let (bits, _) = IsingProblem::fields(THREE_HOT_FIELDS.to_vec()).ground_state();
        assert_eq!(bits, vec![0, 0, 0, 1, 1]);
        assert!(ising_hamiltonian(&IsingProblem::fields(vec![1.0]), &s2).is_err());
    }

    #[test]
    fn ising_validation() {
        assert!(IsingProblem::new(vec![0.0; 2], vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(IsingProblem::new(vec![0.0; 2], vec![vec![1.0, 0.0], vec![0.0, 0.0]]).is_err());
        assert!(IsingProblem::new(vec![0.0; 2], vec![vec![0.0; 3]; 2]).is_err());
    }

    #[test]
    fn offset_examples() {
        let s1 = SpaceSpec::qubits(1).unwrap();
        let s2 = SpaceSpec::qubits(2).unwrap();
        assert!(offset_hamiltonian(&OffsetSpec::NONE, &s2).real_diagonal().iter().all(|&x| x == 0.0));
        assert_eq!(offset_hamiltonian(&OffsetSpec::new(1.0).unwrap(), &s1).real_diagonal(), vec![0.0, 0.0, -1.0]);
        assert_eq!(offset_hamiltonian(&OffsetSpec::new(2.0).unwrap(), &s2).real_diagonal()[8], -4.0);
        assert!(OffsetSpec::new(-0.1).is_err());
    }

    #[test]
    fn forbidden_examples() {
        let s1 = SpaceSpec::qubits(1).unwrap();
        let g = forbidden_generator(&ForbiddenSet::new(), &s1).unwrap();
        assert_eq!(g, HermitianGenerator::zeros(3));

        let mut f = ForbiddenSet::new();
        f.push(ForbiddenEntry::Local { state: crate::states::xi(th(FRAC_PI_2)), units: vec![0], weight: 1.0 });
        let g = forbidden_generator(&f, &s1).unwrap();
        let mut uu = DMatrix::zeros(3, 3);
        uu[(2, 2)] = C64::new(1.0, 0.0);
        assert!(max_abs_c(&(g.matrix() - uu)) < 1e-15);

        let mut bad = ForbiddenSet::new();
        bad.push(ForbiddenEntry::Basis { index: 0, weight: -1.0 });
        assert!(forbidden_generator(&bad, &s1).is_err());
    }

    #[test]
    fn pattern_entries_cover_other_units() {
        let spec = SpaceSpec::qubits(3).unwrap();
        let mut f = ForbiddenSet::new();
        f.push(ForbiddenEntry::Pattern { levels: vec![1, 0], units: vec![2, 0], weight: 2.0 });
        let d = forbidden_generator(&f, &spec).unwrap().real_diagonal();
        for (i, t) in spec.strings().enumerate() {
            let hit = t.digits()[2] == 1 && t.digits()[0] == 0;
            assert_eq!(d[i], if hit { 2.0 } else { 0.0 });
        }
        assert_eq!(d.iter().filter(|&&x| x > 0.0).count(), 3);
    }

    #[test]
    fn single_unit_predicted_matrix() {
        let (h, a, t) = (0.7, 1.3, 0.4);
        let p = IsingProblem::fields(vec![h]);
        let m = predicted_effective_hamiltonian(th(t), &p, &OffsetSpec::new(a).unwrap());
        let c2 = t.cos().powi(2);
        let expected = DMatrix::from_row_slice(2, 2, &[
            a / 2.0 * c2 + h * t.sin(), -a / 2.0 * c2,
            -a / 2.0 * c2, a / 2.0 * c2 - h * t.sin(),
        ]);
        assert!(max_abs(&(m - expected)) < 1e-15);
    }

    #[test]
    fn predicted_limits() {
        let p = IsingProblem::new(vec![0.3, -0.2], vec![vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let end = predicted_effective_hamiltonian(th(FRAC_PI_2), &p, &OffsetSpec::new(1.0).unwrap());
        let diag = DMatrix::from_diagonal(&DVector::from_vec(p.qubit_diagonal()));
        assert!(max_abs(&(end - diag)) < 1e-15);
        let flat = predicted_effective_hamiltonian(th(0.5), &p, &OffsetSpec::NONE);
        assert!(flat.is_square() && (0..4).all(|i| (0..4).all(|j| i == j || flat[(i, j)] == 0.0)));
    }

    #[test]
    fn single_unit_plus_minus_block() {
        // In the {+~, -~} frame h Z - alpha |u><u| is [[-alpha cos^2, h sin], [h sin, 0]].
        let (h, a, t) = (0.9, 0.6, 0.35);
        let spec = SpaceSpec::qubits(1).unwrap();
        let hm = ising_hamiltonian(&IsingProblem::fields(vec![h]), &spec).unwrap()
            .plus(&offset_hamiltonian(&OffsetSpec::new(a).unwrap(), &spec)).unwrap();
        let (p, m) = tilde_basis(th(t), BiasAngle::UNBIASED);
        let mut frame = DMatrix::zeros(3, 2);
        frame.set_column(0, &p);
        frame.set_column(1, &m);
        let block = (frame.adjoint() * hm.matrix() * &frame).map(|z| z.re);
        let expected = DMatrix::from_row_slice(2, 2, &[-a * t.cos().powi(2), h * t.sin(), h * t.sin(), 0.0]);
        assert!(max_abs(&(block - expected)) < 1e-14);
    }

    #[test]
    fn auxiliary_examples() {
        let q = auxiliary_field_transform(&IsingProblem::fields(vec![1.0]));
        assert_eq!(q.h(), &[0.0, 0.0]);
        assert_eq!(q.coupling(0, 1), 1.0);

        let q = auxiliary_field_transform(&IsingProblem::fields(THREE_HOT_FIELDS.to_vec()));
        assert_eq!(q.n(), 6);
        let diag = q.qubit_diagonal();
        // Gauge-fix the auxiliary variable to 0 (index bit 5 clear).
        let best = (0..32).min_by(|&a, &b| diag[a].total_cmp(&diag[b])).unwrap();
        let bits: Vec<u8> = (0..5).map(|j| ((best >> j) & 1) as u8).collect();
        assert_eq!(bits, vec![0, 0, 0, 1, 1]);

        let p = IsingProblem::new(vec![0.0; 2], vec![vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap();
        let q = auxiliary_field_transform(&p);
        assert_eq!(q.coupling(0, 1), -1.0);
        assert_eq!((q.coupling(0, 2), q.coupling(1, 2)), (0.0, 0.0));
    }

    #[test]
    fn transverse_field_examples() {
        let g = transverse_field_hamiltonian(0.0, &[0.0, 0.0]).unwrap();
        assert_eq!(g.matrix(), &DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(-1.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.0, 0.0)]));
        let g = transverse_field_hamiltonian(1.0, &[0.5, -1.0, 2.0, 0.0]).unwrap();
        assert!(g.is_diagonal());
        assert_eq!(g.real_diagonal(), vec![0.5, -1.0, 2.0, 0.0]);
        assert!(transverse_field_hamiltonian(1.2, &[0.0, 0.0]).is_err());
        assert!(transverse_field_hamiltonian(0.5, &[0.0, 0.0, 0.0]).is_err());

        // Ground state at s = 0 is the uniform superposition.
        let e = hermitian_eigendecomposition(&transverse_field_hamiltonian(0.0, &[0.0; 8]).unwrap());
        let v = e.vectors.column(0);
        assert!(v.iter().all(|z| (z.norm() - 8f64.sqrt().recip()).abs() < 1e-12));
    }

    #[test]
    fn transverse_field_four_by_four_ground_state() {
        let g = transverse_field_hamiltonian(0.5, &[0.0, 0.0, 0.0, -1.0]).unwrap();
        let e = hermitian_eigendecomposition(&g);
        // Explicit matrix: 0.5 on the diagonal of |11> term, -0.5 X on each bit.
        let m = DMatrix::from_row_slice(4, 4, &[
            0.0, -0.5, -0.5, 0.0,
            -0.5, 0.0, 0.0, -0.5,
            -0.5, 0.0, 0.0, -0.5,
            0.0, -0.5, -0.5, -0.5,
        ]);
        let reference = nalgebra::SymmetricEigen::new(m);
        let min = reference.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((e.values[0] - min).abs() < 1e-12);
        let v = e.vectors.column(0);
        assert!(v[3].norm() > v[0].norm());
    }

    #[test]
    fn stirap_examples() {
        for (a, b, want_theta) in [(1.0, 0.0, 0.0), (1.0, 1.0, FRAC_PI_4), (0.0, 1.0, FRAC_PI_2)] {
            let p = StirapPulse { a, b };
            assert!((p.theta().unwrap() - want_theta).abs() < 1e-15);
            let h = stirap_hamiltonian(&p);
            let e = hermitian_eigendecomposition(&HermitianGenerator::new(h.clone()).unwrap());
            let r = a.hypot(b);
            let want = [-r, 0.0, 0.0, r];
            for (x, y) in e.values.iter().zip(want) {
                assert!((x - y).abs() < 1e-12);
            }
            let (plus_t, _) = tilde_basis(th(want_theta), BiasAngle::UNBIASED);
            let dark = p.dark_state().unwrap();
            assert!((dark.rows(0, 3) - plus_t).norm() < 1e-12);
            assert!((h * dark).norm() < 1e-12);
        }
        assert!(StirapPulse { a: 0.0, b: 0.0 }.theta().is_err());
    }

    #[test]
    fn stirap_schedule_examples() {
        let two = stirap_schedule(&[0.0, 1.0]).unwrap();
        assert_eq!(two, vec![StirapPulse { a: 1.0, b: 0.0 }, StirapPulse { a: 0.0, b: 1.0 }]);
        let three = stirap_schedule(&[0.0, 0.5, 1.0]).unwrap();
        assert!((three[1].a - three[1].b).abs() < 1e-15);
        assert!((three[1].theta().unwrap() - FRAC_PI_4).abs() < 1e-15);
        let grid: Vec<f64> = (0..100).map(|k| k as f64 / 99.0).collect();
        let thetas: Vec<f64> = stirap_schedule(&grid).unwrap().iter().map(|p| p.theta().unwrap()).collect();
        assert!(thetas.windows(2).all(|w| w[1] > w[0]));
        assert_eq!((thetas[0], thetas[99]), (0.0, FRAC_PI_2));
        assert!(stirap_schedule(&[0.0]).is_err());
        assert!(stirap_schedule(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn qudit_drive_examples() {
        let d = qudit_drive_matrix(th(0.3), 0.0, 3).unwrap();
        assert_eq!(max_abs_c(&d.full), 0.0);
        assert_eq!(qudit_drive_prefactor(th(0.0), 1.0, 2), -0.5);
        assert_eq!(qudit_drive_prefactor_alt(th(0.0), 1.0, 2), -0.25);
        for m in 2..=5 {
            let d = qudit_drive_matrix(th(0.5), 1.0, m).unwrap();
            let kappa = qudit_drive_prefactor(th(0.5), 1.0, m);
            let sum: DVector<C64> = d.frame.column_sum();
            let rhs = projector(&sum).scale(kappa);
            assert!(max_abs_c(&(d.full.clone() - rhs)) < 1e-12, "m = {m}");
            assert!(d.restricted.iter().all(|&x| (x - kappa).abs() < 1e-12));
        }
    }

    #[test]
    fn pair_drive_examples() {
        assert_eq!(max_abs_c(&pair_drive_matrix(th(0.2), 0.0).unwrap().full), 0.0);
        assert!(max_abs_c(&pair_drive_matrix(th(FRAC_PI_2), 1.0).unwrap().full) < 1e-30);
        let d = pair_drive_matrix(th(0.0), 1.0).unwrap();
        let e = hermitian_eigendecomposition(&HermitianGenerator::new(d.full.clone()).unwrap());
        assert_eq!(e.values.iter().filter(|v| v.abs() > 1e-12).count(), 1);
        assert!((d.restricted[(0, 3)] - qudit_drive_prefactor(th(0.0), 1.0, 4)).abs() < 1e-12);
        // At pi/2 the pair frame is the computational basis {00, 10, 01, 11}.
        let end = pair_drive_matrix(th(FRAC_PI_2), 1.0).unwrap();
        assert!(max_abs_c(&(end.frame.rows(0, 4).into_owned() - DMatrix::identity(4, 4))) < 1e-12);
    }

    fn biased_frame(phi: BiasAngle, theta: SweepAngle) -> DMatrix<C64> {
        let mut f = DMatrix::zeros(3, 2);
        f.set_column(0, &tilde_bit(theta, 0, phi).unwrap());
        f.set_column(1, &tilde_bit(theta, 1, phi).unwrap());
        f
    }

    #[test]
    fn biased_coefficient_examples() {
        for t in [0.0, 0.4, 1.1] {
            let (b1, bz, bx) = biased_z_coefficients(BiasAngle::UNBIASED, th(t));
            assert!(b1.abs() < 1e-15 && bx.abs() < 1e-15);
            assert!((bz - t.sin()).abs() < 1e-15);
        }
        let phi = BiasAngle::new(0.3).unwrap();
        let (b1, bz, bx) = biased_z_coefficients(phi, th(FRAC_PI_2));
        assert!(b1.abs() < 1e-15 && bx.abs() < 1e-15 && (bz - 1.0).abs() < 1e-15);
        let got = biased_z_coefficients(phi, th(0.7));
        let want = biased_z_sandwich(phi, th(0.7)).unwrap();
        assert!((got.0 - want.0).abs() < 1e-12 && (got.1 - want.1).abs() < 1e-12 && (got.2 - want.2).abs() < 1e-12);
        let alt = biased_z_coefficients_alt(phi, th(0.7));
        assert!((alt.0 - 2.0 * got.0).abs() < 1e-14 && (alt.2 - got.2).abs() < 1e-14);
    }

    #[test]
    fn bias_correction_examples() {
        let spec = SpaceSpec::qubits(2).unwrap();
        let pi4 = BiasAngle::UNBIASED;
        let p = IsingProblem::new(vec![0.0; 2], vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let zero = bias_correction_hamiltonian(&p, &[pi4, pi4], th(0.2), &spec).unwrap();
        assert!(zero.real_diagonal().iter().all(|x| x.abs() < 1e-15));
        let free = IsingProblem::fields(vec![0.0; 2]);
        let phi = BiasAngle::new(0.3).unwrap();
        let zero = bias_correction_hamiltonian(&free, &[phi, phi], th(0.2), &spec).unwrap();
        assert!(zero.real_diagonal().iter().all(|&x| x == 0.0));

        let g = bias_correction_hamiltonian(&p, &[phi, pi4], th(0.2), &spec).unwrap();
        let b1 = biased_z_coefficients(phi, th(0.2)).0;
        let alt = biased_z_coefficients_alt(phi, th(0.2)).0;
        let expected = ising_hamiltonian(&IsingProblem::fields(vec![0.0, -b1]), &spec).unwrap();
        assert!(max_abs_c(&(g.matrix() - expected.matrix())) < 1e-15);
        assert!((b1 - alt / 2.0).abs() < 1e-15);
    }

    #[test]
    fn bias_correction_cancels_single_z_terms() {
        let spec = SpaceSpec::qubits(2).unwrap();
        let p = IsingProblem::new(vec![0.0; 2], vec![vec![0.0, 0.8], vec![0.8, 0.0]]).unwrap();
        let phis = [BiasAngle::new(0.3).unwrap(), BiasAngle::new(1.1).unwrap()];
        let theta = th(0.6);
        let total = ising_hamiltonian(&p, &spec).unwrap()
            .plus(&bias_correction_hamiltonian(&p, &phis, theta, &spec).unwrap()).unwrap();
        // Product frame: column index a + 2b.
        let f0 = biased_frame(phis[0], theta);
        let f1 = biased_frame(phis[1], theta);
        let mut frame = DMatrix::zeros(9, 4);
        for x in 0..4 {
            let v = crate::hilbert::StateVector::product(&[f0.column(x & 1).into_owned(), f1.column(x >> 1).into_owned()]);
            frame.set_column(x, v.amplitudes());
        }
        let m = (frame.adjoint() * total.matrix() * &frame).map(|z| z.re);
        // Coefficient of Z~_j from the Pauli decomposition over the 2-qubit frame.
        let z = [1.0, -1.0];
        for unit in 0..2 {
            let coeff: f64 = (0..4).map(|x| m[(x, x)] * z[(x >> unit) & 1]).sum::<f64>() / 4.0;
            assert!(coeff.abs() < 1e-12, "unit {unit}: {coeff}");
        }
    }

    fn theta_zero_ground_is_undefined(p: &IsingProblem, alpha: f64) -> bool {
        let spec = SpaceSpec::qubits(p.n()).unwrap();
        let h = ising_hamiltonian(p, &spec).unwrap()
            .plus(&offset_hamiltonian(&OffsetSpec::new(alpha).unwrap(), &spec)).unwrap();
        let phis = vec![BiasAngle::new(0.2).unwrap(); p.n()];
        // Allowed space at theta = 0 is spanned by |u> and |zeta_-> on each unit.
        let mut f = ForbiddenSet::new();
        for (unit, &phi) in phis.iter().enumerate() {
            f.push(ForbiddenEntry::Local { state: xi_state(th(0.0), phi, 2).unwrap(), units: vec![unit], weight: 1.0 });
        }
        let k = kernel_basis(&forbidden_generator(&f, &spec).unwrap(), KERNEL_TOL);
        let restricted = HermitianGenerator::new(k.adjoint() * h.matrix() * &k).unwrap();
        let e = hermitian_eigendecomposition(&restricted);
        let ground = &k * e.vectors.column(0);
        let uu = undefined_product(&spec);
        let overlap = uu.amplitudes().dotc(&ground).norm_sqr();
        e.values[1] - e.values[0] > 1e-9 && overlap > 1.0 - 1e-9
    }

    #[test]
    fn alpha_bound_examples() {
        let pi4 = BiasAngle::UNBIASED;
        let ferro = IsingProblem::new(vec![0.0; 2], vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(bias_alpha_lower_bound(&ferro, &[pi4, pi4]).unwrap().abs() < 1e-15);
        let phi = BiasAngle::new(0.2).unwrap();
        assert_eq!(bias_alpha_lower_bound(&IsingProblem::fields(vec![0.0; 2]), &[phi, phi]).unwrap(), 0.0);

        // J01 = 1: the bound is negative, so any positive offset keeps |uu> lowest.
        let b = bias_alpha_lower_bound(&ferro, &[phi, phi]).unwrap();
        assert!(b < 0.0);
        assert!(theta_zero_ground_is_undefined(&ferro, 0.01));

        // J01 = -1: the bound is positive and sharp.
        let anti = IsingProblem::new(vec![0.0; 2], vec![vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap();
        let b = bias_alpha_lower_bound(&anti, &[phi, phi]).unwrap();
        let z = zeta_minus_z(phi);
        assert!((b - 0.5 * z * z).abs() < 1e-15);
        assert!(theta_zero_ground_is_undefined(&anti, b + 0.01));
        assert!(!theta_zero_ground_is_undefined(&anti, b - 0.01));
    }

    #[test]
    fn constraint_model_contains_phi_sat() {
        let spec = SpaceSpec::qubits(3).unwrap();
        let mut fixed = ForbiddenSet::new();
        fixed.push(ForbiddenEntry::Pattern { levels: vec![1, 1], units: vec![0, 2], weight: 1.0 });
        let model = ConstraintModel::new(spec, 1.0, fixed).unwrap();
        for t in [0.1, 0.7, 1.4] {
            let g = model.generator(th(t)).unwrap();
            let psi = phi_sat(th(t), &[1, 0, 0]).unwrap();
            assert!(g.apply(&psi).norm_sqr().sqrt() < 1e-12);
        }
        let idx = basis_index(&TritString::undefined(&spec), &spec).unwrap();
        let g0 = model.generator(th(FRAC_PI_2)).unwrap();
        assert!((g0.matrix()[(idx, idx)].re - 3.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn forbidden_generators_are_psd(ws in prop::collection::vec(0.0f64..5.0, 4), t in 0.0f64..FRAC_PI_2) {
            let spec = SpaceSpec::qubits(2).unwrap();
            let mut f = ForbiddenSet::new();
            f.push(ForbiddenEntry::Local { state: crate::states::xi(th(t)), units: vec![0], weight: ws[0] });
            f.push(ForbiddenEntry::Local { state: crate::states::xi(th(t / 2.0)), units: vec![1], weight: ws[1] });
            f.push(ForbiddenEntry::Pattern { levels: vec![0, 1], units: vec![1, 0], weight: ws[2] });
            f.push(ForbiddenEntry::Basis { index: 4, weight: ws[3] });
            let e = hermitian_eigendecomposition(&forbidden_generator(&f, &spec).unwrap());
            prop_assert!(e.values[0] >= -1e-10);
        }

        #[test]
        fn stirap_dark_state_residual(a in 0.01f64..5.0, b in 0.01f64..5.0) {
            let p = StirapPulse { a, b };
            let h = stirap_hamiltonian(&p);
            let (plus_t, _) = tilde_basis(th(p.theta().unwrap()), BiasAngle::UNBIASED);
            let mut v = DVector::zeros(4);
            v.rows_mut(0, 3).copy_from(&plus_t);
            prop_assert!((h * v).norm() < 1e-12);
        }

        #[test]
        fn biased_coefficients_match_sandwiches(phi in 0.01f64..1.56, t in 0.0f64..FRAC_PI_2) {
            let phi = BiasAngle::new(phi).unwrap();
            let got = biased_z_coefficients(phi, th(t));
            let want = biased_z_sandwich(phi, th(t)).unwrap();
            prop_assert!((got.0 - want.0).abs() < 1e-10);
            prop_assert!((got.1 - want.1).abs() < 1e-10);
            prop_assert!((got.2 - want.2).abs() < 1e-10);
        }

        #[test]
        fn qudit_identity_holds(t in 0.0f64..FRAC_PI_2, m in 2usize..6, alpha in 0.0f64..3.0) {
            let d = qudit_drive_matrix(th(t), alpha, m).unwrap();
            let rhs = projector(&d.frame.column_sum()).scale(qudit_drive_prefactor(th(t), alpha, m));
            prop_assert!(max_abs_c(&(d.full - rhs)) < 1e-10);
        }
    }
}
