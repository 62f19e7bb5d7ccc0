//! Sweep engines.
//!
//! Every engine holds the sweep angle fixed inside each of `steps` intervals
//! and applies the exact propagator of that interval. Scans over several
//! total runtimes share one eigendecomposition per angle, since the angle
//! grid does not depend on the runtime.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{
    cardinality_forbidden_patterns, cardinality_forbidden_set, satisfies, CardinalityConstraint, Clause,
    CnfFormula,
};
use crate::error::{invalid, Error, Result};
use crate::hilbert::{
    hermitian_eigendecomposition, Eigen, EvolveMode, HermitianGenerator, SpaceSpec, StateVector, TritString,
    C64, KERNEL_TOL,
};
use crate::operators::{
    ising_hamiltonian, offset_hamiltonian, transverse_field_hamiltonian, ConstraintModel, ForbiddenEntry,
    IsingProblem, OffsetSpec,
};
use crate::states::{undefined_product, xi_state, BiasAngle, SweepAngle};

/// Number of angles whose eigendecompositions are computed together.
const EIGEN_BATCH: usize = 16;

/// Linear ramp of the sweep angle from `0` to `theta_end` over `steps`
/// intervals of equal length `total_time / steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    steps: usize,
    total_time: f64,
    theta_end: f64,
}

impl Schedule {
    pub const DEFAULT_STEPS: usize = 1000;

    /// Full ramp to `pi/2`.
    pub fn new(steps: usize, total_time: f64) -> Result<Self> {
        Self::partial(steps, total_time, FRAC_PI_2)
    }

    /// Ramp stopping at `theta_end`.
    pub fn partial(steps: usize, total_time: f64, theta_end: f64) -> Result<Self> {
        if steps == 0 {
            return invalid("a schedule needs at least one step");
        }
        if !(total_time >= 0.0 && total_time.is_finite()) {
            return invalid(format!("total time must be finite and non-negative, got {total_time}"));
        }
        if !(theta_end > 0.0 && theta_end <= FRAC_PI_2 + 1e-12) {
            return invalid(format!("final angle {theta_end} outside (0, pi/2]"));
        }
        Ok(Self {
            steps,
            total_time,
            theta_end: theta_end.min(FRAC_PI_2),
        })
    }

    /// One schedule per total time, sharing the angle grid.
    pub fn grid(steps: usize, theta_end: f64, totals: &[f64]) -> Result<Vec<Schedule>> {
        totals.iter().map(|&t| Self::partial(steps, t, theta_end)).collect()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn theta_end(&self) -> f64 {
        self.theta_end
    }

    pub fn dt(&self) -> f64 {
        self.total_time / self.steps as f64
    }

    /// Angle held during interval `k` (the right end of the interval).
    pub fn theta_of(&self, k: usize) -> f64 {
        self.theta_end * (k + 1) as f64 / self.steps as f64
    }

    fn angle(&self, k: usize) -> Result<SweepAngle> {
        SweepAngle::new(self.theta_of(k))
    }

    fn same_ramp(&self, other: &Schedule) -> bool {
        self.steps == other.steps && self.theta_end == other.theta_end
    }
}

/// State after one interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Sweep angle, or the schedule parameter `s` for transverse-field runs.
    pub theta: f64,
    pub survival: f64,
    pub success: f64,
}

/// Per-step records of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Total runtime, or the number of measurements for measurement runs.
    pub resource: f64,
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    fn start(resource: f64, steps: usize) -> Self {
        Self {
            resource,
            records: Vec::with_capacity(steps),
        }
    }

    fn record(&mut self, theta: f64, psi: &StateVector, target: usize) {
        self.records.push(StepRecord {
            theta,
            survival: psi.norm_sqr(),
            success: psi.probability(target),
        });
    }

    pub fn final_success(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.success)
    }

    pub fn final_survival(&self) -> f64 {
        self.records.last().map_or(1.0, |r| r.survival)
    }

    /// First angle at which survival drops below `level`.
    pub fn first_below(&self, level: f64) -> Option<f64> {
        self.records.iter().find(|r| r.survival < level).map(|r| r.theta)
    }

    /// First angle at which half of the total survival loss has occurred.
    pub fn half_drop_theta(&self) -> Option<f64> {
        let level = (1.0 + self.final_survival()) / 2.0;
        if self.final_survival() >= 1.0 {
            return None;
        }
        self.first_below(level)
    }
}

fn check_target(target: usize, dim: usize) -> Result<()> {
    if target >= dim {
        return invalid(format!("target index {target} outside dimension {dim}"));
    }
    Ok(())
}

fn check_ramps(schedules: &[Schedule]) -> Result<()> {
    match schedules.first() {
        None => invalid("at least one schedule is required"),
        Some(first) if schedules.iter().any(|s| !s.same_ramp(first)) => {
            invalid("scanned schedules must share steps and final angle")
        }
        Some(_) => Ok(()),
    }
}

/// Visits the eigendecomposition of `build(theta_k)` for every step in order,
/// computing small batches of steps in parallel.
fn for_each_eigen<B, F>(sch: &Schedule, build: B, mut visit: F) -> Result<()>
where
    B: Fn(SweepAngle) -> Result<HermitianGenerator> + Sync,
    F: FnMut(usize, f64, Eigen) -> Result<()>,
{
    let mut start = 0;
    while start < sch.steps {
        let end = (start + EIGEN_BATCH).min(sch.steps);
        let batch: Vec<Result<Eigen>> = (start..end)
            .into_par_iter()
            .map(|k| Ok(hermitian_eigendecomposition(&build(sch.angle(k)?)?)))
            .collect();
        for (k, eig) in (start..end).zip(batch) {
            visit(k, sch.theta_of(k), eig?)?;
        }
        start = end;
    }
    Ok(())
}

/// Propagates one initial state under `build(theta_k)` for every schedule.
fn propagate_scan<B>(
    schedules: &[Schedule],
    init: &StateVector,
    target: usize,
    mode: EvolveMode,
    build: B,
) -> Result<Vec<Trajectory>>
where
    B: Fn(SweepAngle) -> Result<HermitianGenerator> + Sync,
{
    check_ramps(schedules)?;
    check_target(target, init.dim())?;
    let ramp = schedules[0];
    let mut states = vec![init.clone(); schedules.len()];
    let mut out: Vec<Trajectory> = schedules
        .iter()
        .map(|s| Trajectory::start(s.total_time, s.steps))
        .collect();
    for_each_eigen(&ramp, build, |_, theta, eig| {
        if eig.dim() != init.dim() {
            return invalid("generator dimension does not match the initial state");
        }
        states
            .par_iter_mut()
            .zip(schedules.par_iter())
            .for_each(|(psi, s)| *psi = eig.propagate(psi, s.dt(), mode));
        for (traj, psi) in out.iter_mut().zip(&states) {
            traj.record(theta, psi, target);
        }
        Ok(())
    })?;
    Ok(out)
}

/// Decay sweep from `|uu..u>` under `exp(-G(theta) dt)`.
///
/// Success is the unnormalised overlap with `target`, so it already
/// includes the probability that no decay occurred.
pub fn dissipative_sweep(model: &ConstraintModel, target: usize, sch: &Schedule) -> Result<Trajectory> {
    Ok(dissipative_scan(model, target, std::slice::from_ref(sch))?.remove(0))
}

/// [`dissipative_sweep`] for several runtimes on a shared angle grid.
pub fn dissipative_scan(model: &ConstraintModel, target: usize, schedules: &[Schedule]) -> Result<Vec<Trajectory>> {
    let init = undefined_product(model.spec());
    propagate_scan(schedules, &init, target, EvolveMode::Decay, |t| model.generator(t))
}

/// Penalty Hamiltonian `c G(theta) + H_offset + H_problem`.
#[derive(Clone, Debug)]
pub struct AdiabaticModel {
    pub constraints: ConstraintModel,
    pub offset: OffsetSpec,
    pub problem: Option<HermitianGenerator>,
}

impl AdiabaticModel {
    pub fn hamiltonian(&self, theta: SweepAngle) -> Result<HermitianGenerator> {
        let spec = self.constraints.spec();
        let mut h = self
            .constraints
            .generator(theta)?
            .plus(&offset_hamiltonian(&self.offset, spec))?;
        if let Some(p) = &self.problem {
            h = h.plus(p)?;
        }
        Ok(h)
    }
}

/// Unitary sweep from `|uu..u>`; survival is identically one.
pub fn adiabatic_sweep(model: &AdiabaticModel, target: usize, sch: &Schedule) -> Result<Trajectory> {
    Ok(adiabatic_scan(model, target, std::slice::from_ref(sch))?.remove(0))
}

pub fn adiabatic_scan(model: &AdiabaticModel, target: usize, schedules: &[Schedule]) -> Result<Vec<Trajectory>> {
    let init = undefined_product(model.constraints.spec());
    propagate_scan(schedules, &init, target, EvolveMode::Unitary, |t| model.hamiltonian(t))
}

/// Sequence of `n` projective measurements at angles `k pi / (2n)`,
/// `k = 1..=n`.
///
/// Each measurement applies `I - |xi_j><xi_j|` to every unit in turn and then
/// removes every forbidden entry of the model's fixed set, in order.
pub fn measurement_sweep(model: &ConstraintModel, target: usize, n_measurements: usize) -> Result<Trajectory> {
    if n_measurements == 0 {
        return invalid("at least one measurement is required");
    }
    let spec = model.spec();
    check_target(target, spec.dim())?;
    let fixed = FixedProjections::new(model)?;
    let bases = unit_bases(spec);
    let mut psi = undefined_product(spec).into_amplitudes();
    let mut traj = Trajectory::start(n_measurements as f64, n_measurements);
    for k in 0..n_measurements {
        let theta = FRAC_PI_2 * (k + 1) as f64 / n_measurements as f64;
        let xi = xi_state(SweepAngle::new(theta)?, BiasAngle::UNBIASED, spec.levels())?;
        for (unit, base) in bases.iter().enumerate() {
            remove_local_component(&mut psi, &xi, base, spec.stride(unit));
        }
        fixed.apply(&mut psi, spec)?;
        let state = StateVector::new(psi.clone());
        traj.record(theta, &state, target);
    }
    Ok(traj)
}

/// [`measurement_sweep`] for several measurement counts.
pub fn measurement_scan(model: &ConstraintModel, target: usize, counts: &[usize]) -> Result<Vec<Trajectory>> {
    counts
        .par_iter()
        .map(|&n| measurement_sweep(model, target, n))
        .collect()
}

/// Indices whose digit on `unit` is zero, one list per unit.
fn unit_bases(spec: &SpaceSpec) -> Vec<Vec<usize>> {
    (0..spec.n_units())
        .map(|u| (0..spec.dim()).filter(|&i| spec.digit(i, u) == 0).collect())
        .collect()
}

/// `psi <- (I - |v><v|) psi` for a local vector `v` on the unit with the given
/// stride.
fn remove_local_component(psi: &mut DVector<C64>, v: &DVector<C64>, bases: &[usize], stride: usize) {
    for &b in bases {
        let c: C64 = v
            .iter()
            .enumerate()
            .map(|(l, x)| x.conj() * psi[b + l * stride])
            .sum();
        for (l, x) in v.iter().enumerate() {
            psi[b + l * stride] -= c * x;
        }
    }
}

/// The fixed entries of a model as measurement projections.
struct FixedProjections {
    steps: Vec<FixedStep>,
}

enum FixedStep {
    Zero(Vec<usize>),
    Local(DVector<C64>, Vec<usize>),
}

impl FixedProjections {
    fn new(model: &ConstraintModel) -> Result<Self> {
        let spec = model.spec();
        let steps = model
            .fixed()
            .entries
            .iter()
            .map(|e| match e {
                ForbiddenEntry::Local { state, units, .. } => {
                    FixedStep::Local(state.normalize(), units.clone())
                }
                _ => FixedStep::Zero(
                    (0..spec.dim())
                        .filter(|&i| e.matches(i, spec) == Some(true))
                        .collect(),
                ),
            })
            .collect();
        Ok(Self { steps })
    }

    fn apply(&self, psi: &mut DVector<C64>, spec: &SpaceSpec) -> Result<()> {
        for s in &self.steps {
            match s {
                FixedStep::Zero(idx) => idx.iter().for_each(|&i| psi[i] = C64::new(0.0, 0.0)),
                FixedStep::Local(v, units) => {
                    let p = crate::hilbert::projector(v);
                    let removed = crate::hilbert::apply_local(&StateVector::new(psi.clone()), &p, units, spec)?;
                    *psi -= removed.amplitudes();
                }
            }
        }
        Ok(())
    }
}

/// How evolution between projections is carried out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMode {
    /// Evolve under the drive compressed onto the allowed subspace, which is
    /// the limit of continuous projection.
    #[default]
    Restricted,
    /// Evolve under the full drive, then project at the next step.
    Full,
}

/// Projection onto the kernel of the constraint generator interleaved with
/// unitary evolution under a drive (problem plus offset).
#[derive(Clone, Debug)]
pub struct ProjectedModel {
    pub constraints: ConstraintModel,
    pub drive: HermitianGenerator,
    pub mode: ProjectionMode,
}

impl ProjectedModel {
    /// Drive `H_problem + H_offset` over the model's space.
    pub fn new(
        constraints: ConstraintModel,
        problem: Option<HermitianGenerator>,
        offset: OffsetSpec,
        mode: ProjectionMode,
    ) -> Result<Self> {
        let mut drive = offset_hamiltonian(&offset, constraints.spec());
        if let Some(p) = problem {
            drive = drive.plus(&p)?;
        }
        Ok(Self { constraints, drive, mode })
    }
}

/// Projected sweep from `|uu..u>`: each step first projects onto the allowed
/// subspace at `theta_k`, then evolves for `dt`.
///
/// Fails with [`Error::EmptyKernel`] if the allowed subspace vanishes.
pub fn projected_sweep(model: &ProjectedModel, target: usize, sch: &Schedule) -> Result<Trajectory> {
    Ok(projected_scan(model, target, std::slice::from_ref(sch))?.remove(0))
}

pub fn projected_scan(model: &ProjectedModel, target: usize, schedules: &[Schedule]) -> Result<Vec<Trajectory>> {
    let init = undefined_product(model.constraints.spec());
    let mut out: Vec<Trajectory> = schedules
        .iter()
        .map(|s| Trajectory::start(s.total_time, s.steps))
        .collect();
    let finals = projected_run(model, &init, schedules, |theta, states| {
        for (traj, psi) in out.iter_mut().zip(states) {
            traj.record(theta, psi, target);
        }
    })?;
    check_target(target, finals[0].dim())?;
    Ok(out)
}

/// Shared driver of the projected engine; returns the final states.
fn projected_run<F>(
    model: &ProjectedModel,
    init: &StateVector,
    schedules: &[Schedule],
    mut observe: F,
) -> Result<Vec<StateVector>>
where
    F: FnMut(f64, &[StateVector]),
{
    check_ramps(schedules)?;
    let ramp = schedules[0];
    let full_eig = match model.mode {
        ProjectionMode::Full => Some(hermitian_eigendecomposition(&model.drive)),
        ProjectionMode::Restricted => None,
    };
    let mut states = vec![init.clone(); schedules.len()];
    for_each_eigen(&ramp, |t| model.constraints.generator(t), |k, theta, eig| {
        let kernel = eig.kernel(KERNEL_TOL);
        if kernel.ncols() == 0 {
            return Err(Error::EmptyKernel { step: k, theta });
        }
        let restricted = match &full_eig {
            Some(_) => None,
            None => {
                let h = kernel.adjoint() * model.drive.matrix() * &kernel;
                Some(hermitian_eigendecomposition(&HermitianGenerator::new(h)?))
            }
        };
        states
            .par_iter_mut()
            .zip(schedules.par_iter())
            .for_each(|(psi, s)| {
                let coeffs = StateVector::new(kernel.ad_mul(psi.amplitudes()));
                *psi = match (&restricted, &full_eig) {
                    (Some(r), _) => {
                        StateVector::new(&kernel * r.propagate(&coeffs, s.dt(), EvolveMode::Unitary).amplitudes())
                    }
                    (None, Some(f)) => {
                        f.propagate(&StateVector::new(&kernel * coeffs.amplitudes()), s.dt(), EvolveMode::Unitary)
                    }
                    (None, None) => unreachable!("one evolution mode is always prepared"),
                };
            });
        observe(theta, &states);
        Ok(())
    })?;
    Ok(states)
}

/// Qubit-space sweep of `-(1 - s) sum X + s (diag + penalty * forbidden)`
/// from the uniform superposition, with `s_k = (k + 1) / steps`.
pub fn tf_sweep(
    problem_diag: &[f64],
    penalty: f64,
    forbidden: &[usize],
    target: usize,
    sch: &Schedule,
) -> Result<Trajectory> {
    Ok(tf_scan(problem_diag, penalty, forbidden, target, std::slice::from_ref(sch))?.remove(0))
}

pub fn tf_scan(
    problem_diag: &[f64],
    penalty: f64,
    forbidden: &[usize],
    target: usize,
    schedules: &[Schedule],
) -> Result<Vec<Trajectory>> {
    check_ramps(schedules)?;
    let dim = problem_diag.len();
    check_target(target, dim)?;
    if !(penalty >= 0.0 && penalty.is_finite()) {
        return invalid(format!("penalty must be finite and non-negative, got {penalty}"));
    }
    let mut diag = problem_diag.to_vec();
    for &i in forbidden {
        if i >= dim {
            return invalid(format!("forbidden index {i} outside dimension {dim}"));
        }
        diag[i] += penalty;
    }
    let amp = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
    let init = StateVector::from_vec(vec![amp; dim]);
    let ramp = schedules[0];
    let mut out = propagate_scan(schedules, &init, target, EvolveMode::Unitary, |t| {
        transverse_field_hamiltonian((t.radians() / ramp.theta_end).clamp(0.0, 1.0), &diag)
    })?;
    for traj in &mut out {
        for (k, r) in traj.records.iter_mut().enumerate() {
            r.theta = (k + 1) as f64 / ramp.steps as f64;
        }
    }
    Ok(out)
}

/// Ingredients of the constraint-strength comparison between the
/// three-level penalty encoding and the qubit transverse-field encoding.
#[derive(Clone, Debug)]
pub struct StrengthScanSetup {
    pub problem: IsingProblem,
    pub constraint: CardinalityConstraint,
    pub alpha: f64,
    pub target: Vec<u8>,
    pub steps: usize,
}

/// One row of a strength scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrengthRow {
    pub strength: f64,
    pub success_3state: f64,
    pub success_tf: f64,
    pub success_projected: f64,
    /// Whether the final three-level Hamiltonian has the target as its
    /// unique lowest-energy basis state.
    pub ground_correct_3state: bool,
    pub ground_correct_tf: bool,
}

impl StrengthScanSetup {
    fn spec(&self) -> Result<SpaceSpec> {
        SpaceSpec::qubits(self.problem.n())
    }

    fn target_bits_index(&self) -> usize {
        self.target.iter().enumerate().map(|(j, &b)| (b as usize) << j).sum()
    }

    fn target_index(&self) -> Result<usize> {
        crate::hilbert::basis_index(&TritString::from_bits(&self.target), &self.spec()?)
    }

    fn three_state_model(&self, w: f64) -> Result<AdiabaticModel> {
        let spec = self.spec()?;
        let fixed = cardinality_forbidden_set(&self.constraint, &spec, w)?;
        Ok(AdiabaticModel {
            constraints: ConstraintModel::new(spec.clone(), w, fixed)?,
            offset: OffsetSpec::new(self.alpha)?,
            problem: Some(ising_hamiltonian(&self.problem, &spec)?),
        })
    }

    fn tf_forbidden(&self) -> Vec<usize> {
        let n = self.problem.n();
        (0..1usize << n)
            .filter(|&x| {
                let levels: Vec<usize> = (0..n).map(|j| (x >> j) & 1).collect();
                !self.constraint.feasible(&levels, 2)
            })
            .collect()
    }

    /// Projected reference: unit-weight constraints, same problem and offset.
    pub fn projected_model(&self) -> Result<ProjectedModel> {
        let spec = self.spec()?;
        let fixed = cardinality_forbidden_set(&self.constraint, &spec, 1.0)?;
        ProjectedModel::new(
            ConstraintModel::new(spec.clone(), 1.0, fixed)?,
            Some(ising_hamiltonian(&self.problem, &spec)?),
            OffsetSpec::new(self.alpha)?,
            ProjectionMode::Restricted,
        )
    }

    /// Success of the projected reference at runtime `total_time`.
    pub fn projected_success(&self, total_time: f64) -> Result<f64> {
        let sch = Schedule::new(self.steps, total_time)?;
        Ok(projected_sweep(&self.projected_model()?, self.target_index()?, &sch)?.final_success())
    }
}

fn unique_argmin(values: &[f64]) -> Option<usize> {
    let (best, e) = values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &e)| if e < acc.1 { (i, e) } else { acc });
    let ties = values.iter().filter(|&&v| (v - e).abs() < 1e-12).count();
    (ties == 1).then_some(best)
}

/// Success of both encodings at each constraint strength for one runtime.
pub fn constraint_strength_scan(setup: &StrengthScanSetup, strengths: &[f64], total_time: f64) -> Result<Vec<StrengthRow>> {
    if let Some(w) = strengths.iter().find(|&&w| !(w > 0.0 && w.is_finite())) {
        return invalid(format!("strengths must be positive, got {w}"));
    }
    let sch = Schedule::new(setup.steps, total_time)?;
    let reference = setup.projected_success(total_time)?;
    let target = setup.target_index()?;
    let target_bits = setup.target_bits_index();
    let qubit_diag = setup.problem.qubit_diagonal();
    let forbidden = setup.tf_forbidden();
    strengths
        .par_iter()
        .map(|&w| {
            let model = setup.three_state_model(w)?;
            let s3 = adiabatic_sweep(&model, target, &sch)?.final_success();
            let stf = tf_sweep(&qubit_diag, w, &forbidden, target_bits, &sch)?.final_success();
            let final_h = model.hamiltonian(SweepAngle::END)?.real_diagonal();
            let mut tf_final = qubit_diag.clone();
            forbidden.iter().for_each(|&i| tf_final[i] += w);
            Ok(StrengthRow {
                strength: w,
                success_3state: s3,
                success_tf: stf,
                success_projected: reference,
                ground_correct_3state: unique_argmin(&final_h) == Some(target),
                ground_correct_tf: unique_argmin(&tf_final) == Some(target_bits),
            })
        })
        .collect()
}

/// Qubit indices violating `constraint` over `n` units.
pub fn cardinality_forbidden_bits(constraint: &CardinalityConstraint, n: usize) -> Result<Vec<usize>> {
    let spec = SpaceSpec::qubits(n)?;
    let patterns = cardinality_forbidden_patterns(constraint, &spec)?;
    Ok(patterns
        .into_iter()
        .filter_map(|i| {
            let digits: Vec<usize> = (0..n).map(|j| spec.digit(i, j)).collect();
            digits
                .iter()
                .all(|&d| d < 2)
                .then(|| digits.iter().enumerate().map(|(j, &d)| d << j).sum())
        })
        .collect())
}

/// Outcome of the iterative solver.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SatVerdict {
    Satisfiable(Vec<u8>),
    Unsatisfiable,
}

/// Partial projected sweeps followed by per-unit sampling, repeated on the
/// reduced formula until every variable is fixed.
///
/// With no drive the final state of a sweep depends only on the formula, so
/// states are cached per reduced formula and reused across calls.
pub struct IterativeSolver {
    schedule: Schedule,
    cache: Mutex<HashMap<(usize, Vec<Clause>), StateVector>>,
}

impl IterativeSolver {
    pub fn new(theta_stop: f64, total_time: f64, steps: usize) -> Result<Self> {
        Ok(Self {
            schedule: Schedule::partial(steps, total_time, theta_stop)?,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    /// Normalised state at the end of the partial sweep on `f`.
    pub fn final_state(&self, f: &CnfFormula) -> Result<StateVector> {
        let key = (f.n_vars(), f.clauses().to_vec());
        if let Some(s) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(s.clone());
        }
        let spec = SpaceSpec::qubits(f.n_vars())?;
        let constraints = ConstraintModel::new(spec.clone(), 1.0, f.forbidden_set(1.0))?;
        let model = ProjectedModel {
            drive: HermitianGenerator::zeros(spec.dim()),
            constraints,
            mode: ProjectionMode::Restricted,
        };
        let init = undefined_product(&spec);
        let state = projected_run(&model, &init, std::slice::from_ref(&self.schedule), |_, _| {})?
            .remove(0)
            .normalized()?;
        self.cache.lock().expect("cache lock").insert(key, state.clone());
        Ok(state)
    }

    /// Solves `f`, or reports it unsatisfiable when the allowed subspace of
    /// the full formula is empty.
    pub fn solve<R: Rng>(&self, f: &CnfFormula, rng: &mut R) -> Result<SatVerdict> {
        let n = f.n_vars();
        match self.final_state(f) {
            Err(Error::EmptyKernel { theta, .. }) if theta > 0.0 => return Ok(SatVerdict::Unsatisfiable),
            other => {
                other?;
            }
        }
        let backtrack_limit = 10 * n;
        let round_limit = 100 * n;
        let mut assignment: Vec<Option<u8>> = vec![None; n];
        let mut history: Vec<Vec<Option<u8>>> = Vec::new();
        let mut backtracks = 0;
        for _ in 0..round_limit {
            let free: Vec<usize> = (0..n).filter(|&j| assignment[j].is_none()).collect();
            if free.is_empty() {
                let bits: Vec<u8> = assignment.iter().map(|b| b.expect("all variables fixed")).collect();
                if satisfies(f, &TritString::from_bits(&bits))? {
                    return Ok(SatVerdict::Satisfiable(bits));
                }
            }
            let outcome = match reduce(f, &assignment, &free)? {
                Some(reduced) if !free.is_empty() => match self.final_state(&reduced) {
                    Ok(state) => Some(sample_units(&state, &SpaceSpec::qubits(free.len())?, rng)),
                    Err(Error::EmptyKernel { .. }) => None,
                    Err(e) => return Err(e),
                },
                _ => None,
            };
            match outcome {
                Some(levels) => {
                    history.push(assignment.clone());
                    for (&var, &l) in free.iter().zip(&levels) {
                        if l < 2 {
                            assignment[var] = Some(l as u8);
                        }
                    }
                }
                None => {
                    backtracks += 1;
                    if backtracks > backtrack_limit {
                        return Err(Error::SolverExhausted { attempts: backtracks });
                    }
                    assignment = history.pop().unwrap_or_else(|| vec![None; n]);
                }
            }
        }
        Err(Error::SolverExhausted { attempts: round_limit })
    }

    /// Mean and standard error of the fraction of units reading `u` when the
    /// final state of the first round on `f` is sampled `n_samples` times.
    pub fn sampled_u_fraction<R: Rng>(&self, f: &CnfFormula, n_samples: usize, rng: &mut R) -> Result<(f64, f64)> {
        if n_samples < 2 {
            return invalid("at least two samples are required");
        }
        let state = self.final_state(f)?;
        let spec = SpaceSpec::qubits(f.n_vars())?;
        let n = f.n_vars() as f64;
        let fractions: Vec<f64> = (0..n_samples)
            .map(|_| sample_units(&state, &spec, rng).iter().filter(|&&l| l == 2).count() as f64 / n)
            .collect();
        let mean = fractions.iter().sum::<f64>() / n_samples as f64;
        let var = fractions.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n_samples - 1) as f64;
        Ok((mean, (var / n_samples as f64).sqrt()))
    }
}

/// The formula restricted to the free variables (renumbered in order), or
/// `None` if the fixed values falsify a clause.
fn reduce(f: &CnfFormula, assignment: &[Option<u8>], free: &[usize]) -> Result<Option<CnfFormula>> {
    let mut current = f.clone();
    for (var, bit) in assignment.iter().enumerate() {
        if let Some(b) = bit {
            match current.substitute(var, *b) {
                Some(clauses) => current = CnfFormula::new(f.n_vars(), clauses, None)?,
                None => return Ok(None),
            }
        }
    }
    if free.is_empty() {
        return Ok(Some(current));
    }
    let mut renumber = vec![usize::MAX; f.n_vars()];
    for (k, &v) in free.iter().enumerate() {
        renumber[v] = k;
    }
    let clauses = current
        .clauses()
        .iter()
        .map(|c| Clause::new(c.vars().iter().map(|&v| renumber[v]).collect(), c.negated().to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(CnfFormula::new(free.len(), clauses, None)?))
}

/// Measures every unit in the `{0, 1, u}` basis in order, collapsing the
/// state between units. Returns local levels.
pub fn sample_units<R: Rng>(state: &StateVector, spec: &SpaceSpec, rng: &mut R) -> Vec<usize> {
    let spec_levels = spec.local_dim();
    let n = spec.n_units();
    let dim = state.dim().min(spec.dim());
    let mut probs: Vec<f64> = (0..dim).map(|i| state.probability(i)).collect();
    let mut out = Vec::with_capacity(n);
    let mut stride = 1;
    for _ in 0..n {
        let mut marginal = vec![0.0; spec_levels];
        for (i, p) in probs.iter().enumerate() {
            marginal[(i / stride) % spec_levels] += p;
        }
        let total: f64 = marginal.iter().sum();
        let mut r = rng.random::<f64>() * total;
        let mut level = spec_levels - 1;
        for (l, &m) in marginal.iter().enumerate() {
            if r < m {
                level = l;
                break;
            }
            r -= m;
        }
        for (i, p) in probs.iter_mut().enumerate() {
            if (i / stride) % spec_levels != level {
                *p = 0.0;
            }
        }
        out.push(level);
        stride *= spec_levels;
    }
    out
}

/// Mean and standard error of the sampled `u` fraction; see
/// [`IterativeSolver::sampled_u_fraction`].
pub fn sampled_u_fraction<R: Rng>(
    f: &CnfFormula,
    theta_stop: f64,
    total_time: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    IterativeSolver::new(theta_stop, total_time, Schedule::DEFAULT_STEPS)?.sampled_u_fraction(f, n_samples, rng)
}

/// One-shot form of [`IterativeSolver::solve`] with the default step count.
pub fn iterative_sat_solve<R: Rng>(f: &CnfFormula, theta_stop: f64, total_time: f64, rng: &mut R) -> Result<SatVerdict> {
    IterativeSolver::new(theta_stop, total_time, Schedule::DEFAULT_STEPS)?.solve(f, rng)
}

/// Orthonormal columns spanning the allowed subspace of `model` at `theta`.
pub fn allowed_subspace(model: &ConstraintModel, theta: SweepAngle) -> Result<DMatrix<C64>> {
    Ok(hermitian_eigendecomposition(&model.generator(theta)?).kernel(KERNEL_TOL))
}
