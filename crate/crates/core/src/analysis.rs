//! Spectra, satisfiability witnesses and closed-form cross-checks.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::CnfFormula;
use crate::error::{invalid, Result};
use crate::hilbert::{
    apply_local, hermitian_eigendecomposition, local_z, projector, HermitianGenerator, SpaceSpec, StateVector, C64, KERNEL_TOL,
};
use crate::operators::{
    biased_z_coefficients, biased_z_coefficients_alt, biased_z_sandwich, ising_hamiltonian, offset_hamiltonian,
    predicted_effective_hamiltonian, qudit_drive_matrix, stirap_hamiltonian, tilde_frame, ConstraintModel,
    IsingProblem, OffsetSpec, StirapPulse,
};
use crate::states::{phi_sat, qudit_tilde_j, tilde_basis, tilde_bit, BiasAngle, SweepAngle};

/// Default probe angle of the satisfiability witness.
pub const WITNESS_THETA: f64 = 0.2;

/// Size of the cluster that joins the lowest eigenvalue at `theta = 0` for
/// five units.
pub const DEFAULT_CLUSTER: usize = 15;

/// Colour class of an eigenvalue within one row of a spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumClass {
    Lowest,
    Cluster,
    Rest,
}

impl SpectrumClass {
    /// Class of the eigenvalue at rank `rank` (by magnitude) in its row.
    pub fn of_rank(rank: usize, cluster: usize) -> Self {
        match rank {
            0 => SpectrumClass::Lowest,
            r if r <= cluster => SpectrumClass::Cluster,
            _ => SpectrumClass::Rest,
        }
    }
}

/// Eigenvalues over a grid of sweep angles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumScan {
    pub theta_grid: Vec<f64>,
    /// Each row sorted ascending by magnitude; rank gives the class.
    pub by_magnitude: Vec<Vec<f64>>,
    /// Each row permuted so that column `c` follows one continuous curve.
    pub curves: Vec<Vec<f64>>,
    pub cluster: usize,
}

impl SpectrumScan {
    pub fn classes(&self) -> Vec<SpectrumClass> {
        let width = self.by_magnitude.first().map_or(0, Vec::len);
        (0..width).map(|r| SpectrumClass::of_rank(r, self.cluster)).collect()
    }

    /// Number of eigenvalues with magnitude below `tol` in each row.
    pub fn near_zero_counts(&self, tol: f64) -> Vec<usize> {
        self.by_magnitude
            .iter()
            .map(|row| row.iter().filter(|v| v.abs() < tol).count())
            .collect()
    }

    /// Smallest magnitude in each row.
    pub fn min_magnitudes(&self) -> Vec<f64> {
        self.by_magnitude.iter().map(|row| row[0].abs()).collect()
    }
}

/// Eigenvalues of `builder(theta)` on each grid point. With `magnitude`
/// set, absolute values are stored (decay rates).
pub fn spectrum_vs_theta<B>(builder: B, grid: &[f64], magnitude: bool, cluster: usize) -> Result<SpectrumScan>
where
    B: Fn(SweepAngle) -> Result<HermitianGenerator> + Sync,
{
    if grid.is_empty() {
        return invalid("the angle grid is empty");
    }
    let rows: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&t| {
            let eig = hermitian_eigendecomposition(&builder(SweepAngle::new(t)?)?);
            Ok(eig
                .values
                .into_iter()
                .map(|v| if magnitude { v.abs() } else { v })
                .collect())
        })
        .collect::<Result<_>>()?;
    let by_magnitude = rows
        .iter()
        .map(|row| {
            let mut r = row.clone();
            r.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
            r
        })
        .collect();
    Ok(SpectrumScan {
        theta_grid: grid.to_vec(),
        by_magnitude,
        curves: continuity_order(&rows),
        cluster,
    })
}

/// Reorders each row to follow the previous one by nearest-neighbour
/// matching, closest pairs first.
pub fn continuity_order(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for row in rows {
        let Some(prev) = out.last() else {
            out.push(row.clone());
            continue;
        };
        let n = row.len().min(prev.len());
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
        for (c, p) in prev.iter().enumerate().take(n) {
            for (i, v) in row.iter().enumerate().take(n) {
                pairs.push(((p - v).abs(), c, i));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut next = vec![f64::NAN; n];
        let (mut used_c, mut used_i) = (vec![false; n], vec![false; n]);
        for (_, c, i) in pairs {
            if !used_c[c] && !used_i[i] {
                next[c] = row[i];
                used_c[c] = true;
                used_i[i] = true;
            }
        }
        out.push(next);
    }
    out
}

/// Differences between the two lowest eigenvalues of `builder(theta)`.
pub fn gap_vs_theta<B>(builder: B, grid: &[f64]) -> Result<Vec<f64>>
where
    B: Fn(SweepAngle) -> Result<HermitianGenerator> + Sync,
{
    grid.par_iter()
        .map(|&t| {
            let g = builder(SweepAngle::new(t)?)?;
            if g.dim() < 2 {
                return invalid("a gap needs at least two levels");
            }
            let v = hermitian_eigendecomposition(&g).values;
            Ok(v[1] - v[0])
        })
        .collect()
}

/// Verdict of the kernel test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub satisfiable: bool,
    pub min_magnitude: f64,
    pub theta: f64,
}

/// A formula is satisfiable exactly when its constraint generator at a
/// positive angle has a zero eigenvalue.
pub fn satisfiability_witness(f: &CnfFormula, theta_probe: f64) -> Result<Witness> {
    if !(theta_probe > 0.0) {
        return invalid(format!("probe angle must be positive, got {theta_probe}"));
    }
    let theta = SweepAngle::new(theta_probe)?;
    let model = ConstraintModel::new(SpaceSpec::qubits(f.n_vars())?, 1.0, f.forbidden_set(1.0))?;
    let min_magnitude = hermitian_eigendecomposition(&model.generator(theta)?).min_magnitude();
    Ok(Witness {
        satisfiable: min_magnitude < KERNEL_TOL,
        min_magnitude,
        theta: theta.radians(),
    })
}

/// Comparison between the exactly projected Hamiltonian and the closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveResidual {
    /// Largest entry of `exact - predicted`.
    pub raw: f64,
    /// Largest entry of `exact - predicted - c I` with the best constant `c`.
    pub modulo_identity: f64,
    /// The best constant `c`.
    pub identity_shift: f64,
}

/// `F^T (H_ising + H_offset) F` in the tilde-bit frame `F`.
pub fn projected_effective_hamiltonian(theta: SweepAngle, p: &IsingProblem, o: &OffsetSpec) -> Result<DMatrix<f64>> {
    let spec = SpaceSpec::qubits(p.n())?;
    let h = ising_hamiltonian(p, &spec)?.plus(&offset_hamiltonian(o, &spec))?;
    let frame = tilde_frame(theta, &spec)?;
    let m = frame.adjoint() * h.matrix() * &frame;
    Ok(m.map(|z| z.re))
}

pub fn effective_hamiltonian_residual(theta: SweepAngle, p: &IsingProblem, o: &OffsetSpec) -> Result<EffectiveResidual> {
    if p.n() == 0 || p.n() > 4 {
        return invalid(format!("residual check supports 1 to 4 units, got {}", p.n()));
    }
    let d = projected_effective_hamiltonian(theta, p, o)? - predicted_effective_hamiltonian(theta, p, o);
    let diag = d.diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    let shift = (lo + hi) / 2.0;
    let mut shifted = d.clone();
    for k in 0..d.nrows() {
        shifted[(k, k)] -= shift;
    }
    Ok(EffectiveResidual {
        raw: d.amax(),
        modulo_identity: shifted.amax(),
        identity_shift: shift,
    })
}

/// Orthogonalisation of the one-hot satisfying states
/// `phibar_j = (phi_j - a sum_{k != j} phi_k) / N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneHotCoefficients {
    pub n: usize,
    pub theta: f64,
    /// `<phi_j|phi_l>` for `j != l`.
    pub overlap: f64,
    /// Root of `quadratic a^2 - 2 linear a + overlap = 0` that vanishes with
    /// the overlap.
    pub a: f64,
    pub quadratic: f64,
    pub linear: f64,
    /// Root of `b a^2 - 2 a + overlap = 0`, the form that neglects the
    /// cross overlaps in the linear and quadratic terms.
    pub a_printed: f64,
    pub b_printed: f64,
    /// `<phibar_0|Z_1|phibar_1>` computed directly with `a`.
    pub offdiag: f64,
    /// `4 sin^2 a / (N^2 (1 + sin^2 (sqrt2 - 1)^2)^n)` with `a_printed`.
    pub offdiag_printed: f64,
}

/// Smaller root of `q a^2 - 2 l a + o = 0`, in a form that stays finite as
/// `q -> 0`.
fn small_root(q: f64, l: f64, o: f64) -> f64 {
    o / (l + (l * l - q * o).max(0.0).sqrt())
}

/// The `n` one-hot satisfying states at `theta`.
pub fn one_hot_states(n: usize, theta: SweepAngle) -> Result<Vec<StateVector>> {
    (0..n)
        .map(|j| {
            let bits: Vec<u8> = (0..n).map(|k| (k == j) as u8).collect();
            phi_sat(theta, &bits)
        })
        .collect()
}

/// Normalised `phi_j - a sum_{k != j} phi_k` for every `j`.
pub fn orthogonalised_one_hot(n: usize, theta: SweepAngle, a: f64) -> Result<Vec<StateVector>> {
    let phis = one_hot_states(n, theta)?;
    let total = phis
        .iter()
        .fold(nalgebra::DVector::<C64>::zeros(phis[0].dim()), |acc, p| acc + p.amplitudes());
    phis.iter()
        .map(|p| {
            let others = &total - p.amplitudes();
            StateVector::new(p.amplitudes() - others * C64::new(a, 0.0)).normalized()
        })
        .collect()
}

/// Largest `|<v_j|v_l>|` over `j != l`.
pub fn gram_residual(states: &[StateVector]) -> f64 {
    let mut worst: f64 = 0.0;
    for (j, a) in states.iter().enumerate() {
        for b in &states[j + 1..] {
            worst = worst.max(a.inner(b).norm());
        }
    }
    worst
}

/// Largest entry of the difference between the orthogonal projectors onto
/// the spans of two state lists.
pub fn span_difference(a: &[StateVector], b: &[StateVector]) -> f64 {
    let proj = |vs: &[StateVector]| -> DMatrix<C64> {
        let m = DMatrix::from_columns(&vs.iter().map(|v| v.amplitudes().clone()).collect::<Vec<_>>());
        let q = m.qr().q();
        let rank = vs.len().min(q.ncols());
        let q = q.columns(0, rank).into_owned();
        &q * q.adjoint()
    };
    (proj(a) - proj(b)).iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn one_hot_coefficients(n: usize, theta: SweepAngle) -> Result<OneHotCoefficients> {
    if n < 2 {
        return invalid(format!("one-hot orthogonalisation needs at least 2 units, got {n}"));
    }
    if theta.radians() <= 0.0 {
        return invalid("one-hot states coincide at theta = 0; start the sweep at a small positive angle");
    }
    let t = theta.radians();
    let overlap = (t.cos().powi(2) / (1.0 + t.sin().powi(2))).powi(2);
    let nf = n as f64;
    let linear = 1.0 + (nf - 2.0) * overlap;
    let quadratic = (nf - 2.0) + ((nf - 1.0).powi(2) - (nf - 2.0)) * overlap;
    let a = small_root(quadratic, linear, overlap);
    let b_printed = nf - 2.0 + (nf - 1.0).powi(2) * overlap;
    let a_printed = small_root(b_printed, 1.0, overlap);

    let spec = SpaceSpec::qubits(n)?;
    let bars = orthogonalised_one_hot(n, theta, a)?;
    let z1 = apply_local(&bars[1], &local_z(2), &[1], &spec)?;
    let offdiag = bars[0].inner(&z1).re;

    let phis = one_hot_states(n, theta)?;
    let unnormalised_sum = phis.iter().skip(1).fold(phis[0].amplitudes().clone() * C64::new(0.0, 0.0), |acc, p| {
        acc + p.amplitudes()
    });
    let norm_printed = (phis[0].amplitudes() - unnormalised_sum * C64::new(a_printed, 0.0)).norm();
    let offdiag_printed = 4.0 * t.sin().powi(2) * a_printed
        / (norm_printed.powi(2) * (1.0 + t.sin().powi(2) * (SQRT_2 - 1.0).powi(2)).powi(n as i32));

    Ok(OneHotCoefficients {
        n,
        theta: t,
        overlap,
        a,
        quadratic,
        linear,
        a_printed,
        b_printed,
        offdiag,
        offdiag_printed,
    })
}

/// Largest entry of `full - kappa |sum_j j~><sum_j j~|` for the qudit drive.
pub fn qudit_identity_residual(theta: SweepAngle, alpha: f64, m: usize, kappa: f64) -> Result<f64> {
    let d = qudit_drive_matrix(theta, alpha, m)?;
    let rhs = projector(&d.frame.column_sum()).scale(kappa);
    Ok((d.full - rhs).iter().fold(0.0, |a, z| a.max(z.norm())))
}

/// Distance between the two-level qudit frame and the tilde-bit pair, up to
/// a sign per vector.
pub fn qudit_reduction_residual(theta: SweepAngle) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for j in 0..2u8 {
        let q = qudit_tilde_j(theta, j as usize, 2)?;
        let b = tilde_bit(theta, j, BiasAngle::UNBIASED)?;
        worst = worst.max((&q - &b).norm().min((&q + &b).norm()));
    }
    Ok(worst)
}

/// Largest difference between the closed-form biased coefficients and the
/// direct sandwiches, for the exact and the alternative closed forms.
pub fn biased_coefficient_residuals(phi: BiasAngle, theta: SweepAngle) -> Result<(f64, f64)> {
    let want = biased_z_sandwich(phi, theta)?;
    let diff = |got: (f64, f64, f64)| {
        (got.0 - want.0).abs().max((got.1 - want.1).abs()).max((got.2 - want.2).abs())
    };
    Ok((diff(biased_z_coefficients(phi, theta)), diff(biased_z_coefficients_alt(phi, theta))))
}

/// Spectrum and dark-state residuals of one dark-state pulse configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StirapCheck {
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    /// Largest deviation of the sorted eigenvalues from `{-r, 0, 0, r}`.
    pub eigen_residual: f64,
    /// `|H v|` for `v` the allowed `+~(theta)` state padded with zero.
    pub dark_residual: f64,
}

pub fn stirap_check(p: &StirapPulse) -> Result<StirapCheck> {
    let h = stirap_hamiltonian(p);
    let values = hermitian_eigendecomposition(&HermitianGenerator::new(h.clone())?).values;
    let r = p.a.hypot(p.b);
    let eigen_residual = values
        .iter()
        .zip([-r, 0.0, 0.0, r])
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let theta = p.theta()?;
    let (plus, _) = tilde_basis(SweepAngle::new(theta)?, BiasAngle::UNBIASED);
    let mut v = DVector::zeros(4);
    v.rows_mut(0, 3).copy_from(&plus);
    Ok(StirapCheck {
        a: p.a,
        b: p.b,
        theta,
        eigen_residual,
        dark_residual: (h * v).norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{load_bundled_instance, planted_generator, unsatisfiable_variant};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn th(t: f64) -> SweepAngle {
        SweepAngle::new(t).unwrap()
    }

    #[test]
    fn zero_builder_gives_zero_curves() {
        let scan = spectrum_vs_theta(|_| Ok(HermitianGenerator::zeros(4)), &[0.0, 0.5, 1.0], true, 1).unwrap();
        assert!(scan.curves.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(scan.near_zero_counts(1e-9), vec![4, 4, 4]);
        assert!(spectrum_vs_theta(|_| Ok(HermitianGenerator::zeros(2)), &[], true, 1).is_err());
    }

    #[test]
    fn classes_split_by_rank() {
        let c: Vec<_> = (0..5).map(|r| SpectrumClass::of_rank(r, 2)).collect();
        assert_eq!(
            c,
            vec![SpectrumClass::Lowest, SpectrumClass::Cluster, SpectrumClass::Cluster, SpectrumClass::Rest, SpectrumClass::Rest]
        );
    }

    #[test]
    fn continuity_follows_crossing_lines() {
        let rows: Vec<Vec<f64>> = (0..11)
            .map(|k| {
                let x = k as f64 / 10.0;
                let mut r = vec![x, 1.0 - x];
                r.sort_by(f64::total_cmp);
                r
            })
            .collect();
        let curves = continuity_order(&rows);
        let first: Vec<f64> = curves.iter().map(|r| r[0]).collect();
        for w in first.windows(2) {
            assert!((w[1] - w[0]).abs() < 0.11 + 1e-12);
        }
    }

    #[test]
    fn bundled_kernel_at_zero_is_sixteen_fold() {
        let f = load_bundled_instance();
        let model = ConstraintModel::new(SpaceSpec::qubits(5).unwrap(), 1.0, f.forbidden_set(1.0)).unwrap();
        let scan = spectrum_vs_theta(|t| model.generator(t), &[0.0], true, DEFAULT_CLUSTER).unwrap();
        assert_eq!(scan.near_zero_counts(1e-9), vec![16]);
    }

    #[test]
    fn witness_examples() {
        let f = load_bundled_instance();
        assert!(satisfiability_witness(&f, WITNESS_THETA).unwrap().satisfiable);
        let g = unsatisfiable_variant(&f).unwrap();
        assert!(!satisfiability_witness(&g, WITNESS_THETA).unwrap().satisfiable);
        assert!(satisfiability_witness(&f, 0.0).is_err());
    }

    #[test]
    fn witness_matches_brute_force_on_planted_instances() {
        for seed in 0..30 {
            let f = planted_generator(4, seed).unwrap();
            let pick = crate::constraints::Clause::new(vec![0, 1, 2], vec![false; 3]).unwrap();
            let g = f.with_clause(pick).unwrap();
            for h in [&f, &g] {
                let truth = !h.satisfying_assignments().unwrap().is_empty();
                assert_eq!(satisfiability_witness(h, WITNESS_THETA).unwrap().satisfiable, truth);
            }
        }
    }

    #[test]
    fn single_unit_gap_vanishes() {
        let spec = SpaceSpec::qubits(1).unwrap();
        let model = ConstraintModel::new(spec, 1.0, Default::default()).unwrap();
        let gaps = gap_vs_theta(|t| model.generator(t), &[0.1, 0.7, 1.4]).unwrap();
        assert!(gaps.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn residual_trivial_case() {
        let p = IsingProblem::fields(vec![0.0; 2]);
        let r = effective_hamiltonian_residual(th(0.3), &p, &OffsetSpec::NONE).unwrap();
        assert!(r.raw < 1e-14 && r.modulo_identity < 1e-14);
    }

    #[test]
    fn residual_shift_is_the_offset_sign() {
        let p = IsingProblem::fields(vec![0.4, -0.2]);
        let o = OffsetSpec::new(0.7).unwrap();
        let t = 0.5f64;
        let r = effective_hamiltonian_residual(th(t), &p, &o).unwrap();
        assert!(r.modulo_identity < 1e-12);
        assert!((r.identity_shift + 0.7 * 2.0 * t.cos().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn one_hot_end_point() {
        let c = one_hot_coefficients(5, th(FRAC_PI_2)).unwrap();
        assert!(c.a.abs() < 1e-15 && c.overlap < 1e-30);
        let bars = orthogonalised_one_hot(5, th(FRAC_PI_2), c.a).unwrap();
        let plain = one_hot_states(5, th(FRAC_PI_2)).unwrap();
        for (b, p) in bars.iter().zip(&plain) {
            assert!((b.inner(p).norm() - 1.0).abs() < 1e-12);
        }
        assert!(one_hot_coefficients(5, th(0.0)).is_err());
        assert!(one_hot_coefficients(1, th(0.5)).is_err());
    }

    #[test]
    fn one_hot_orthogonal_and_complete() {
        let theta = th(0.8);
        let c = one_hot_coefficients(5, theta).unwrap();
        let bars = orthogonalised_one_hot(5, theta, c.a).unwrap();
        assert!(gram_residual(&bars) < 1e-10);
        assert!(span_difference(&bars, &one_hot_states(5, theta).unwrap()) < 1e-10);
        assert!(c.offdiag.abs() > 1e-6);
    }

    #[test]
    fn closed_form_identity_helpers() {
        use crate::operators::{qudit_drive_prefactor, qudit_drive_prefactor_alt};
        for m in 2..=5 {
            let k = qudit_drive_prefactor(th(0.6), 1.3, m);
            assert!(qudit_identity_residual(th(0.6), 1.3, m, k).unwrap() < 1e-12);
            let k_alt = qudit_drive_prefactor_alt(th(0.6), 1.3, m);
            assert!(qudit_identity_residual(th(0.6), 1.3, m, k_alt).unwrap() > 1e-3);
        }
        assert!(qudit_reduction_residual(th(0.9)).unwrap() < 1e-12);
        let (exact, alt) = biased_coefficient_residuals(BiasAngle::new(0.3).unwrap(), th(0.7)).unwrap();
        assert!(exact < 1e-12 && alt > 1e-3);
        let c = stirap_check(&StirapPulse { a: 0.4, b: 1.7 }).unwrap();
        assert!(c.eigen_residual < 1e-12 && c.dark_residual < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn residual_modulo_identity_vanishes(
            n in 1usize..4,
            seed in proptest::collection::vec(-1.0f64..1.0, 12),
            alpha in 0.0f64..2.0,
            t in 0.0f64..FRAC_PI_2,
        ) {
            let h: Vec<f64> = seed[..n].to_vec();
            let mut j = vec![vec![0.0; n]; n];
            let mut k = 4;
            for a in 0..n {
                for b in a + 1..n {
                    j[a][b] = seed[k];
                    j[b][a] = seed[k];
                    k += 1;
                }
            }
            let p = IsingProblem::new(h, j).unwrap();
            let r = effective_hamiltonian_residual(th(t), &p, &OffsetSpec::new(alpha).unwrap()).unwrap();
            prop_assert!(r.modulo_identity < 1e-10);
        }

        #[test]
        fn one_hot_states_orthogonal_for_any_angle(n in 2usize..6, t in 0.05f64..FRAC_PI_2) {
            let c = one_hot_coefficients(n, th(t)).unwrap();
            let bars = orthogonalised_one_hot(n, th(t), c.a).unwrap();
            prop_assert!(gram_residual(&bars) < 1e-10);
        }
    }
}
