//! Named experiment definitions and their CSV/JSON artifacts.
//!
//! Each catalog entry computes its tables in memory ([`compute_experiment`])
//! and [`run_experiment`] writes them atomically, one CSV per table plus a
//! `<name>.meta.json` sidecar listing every parameter with its source
//! (`fixed` when taken as given, `derived` when computed from other inputs,
//! `chosen` when picked here) and a short summary of the results.

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::analysis::{
    biased_coefficient_residuals, gap_vs_theta, gram_residual, one_hot_coefficients, orthogonalised_one_hot,
    qudit_identity_residual, qudit_reduction_residual, spectrum_vs_theta, stirap_check, SpectrumScan,
    DEFAULT_CLUSTER,
};
use crate::constraints::{
    cardinality_forbidden_set, domain_wall_clauses, load_bundled_instance, unsatisfiable_variant,
    CardinalityConstraint, CardinalityKind,
};
use crate::error::{Error, Result};
use crate::evolution::{
    adiabatic_scan, constraint_strength_scan, dissipative_scan, measurement_scan, projected_scan, AdiabaticModel,
    ProjectedModel, ProjectionMode, Schedule, StrengthScanSetup, Trajectory,
};
use crate::hilbert::{
    basis_index, hermitian_eigendecomposition, HermitianGenerator, SpaceSpec, TritString, KERNEL_TOL,
};
use crate::operators::{
    ising_hamiltonian, pair_drive_matrix, pair_drive_prefactor_alt, qudit_drive_prefactor,
    qudit_drive_prefactor_alt, stirap_schedule, ConstraintModel, ForbiddenSet, IsingProblem,
    OffsetSpec, StirapPulse, THREE_HOT_FIELDS,
};
use crate::states::{BiasAngle, SweepAngle};

/// Every experiment name, in catalog order.
pub const CATALOG: [&str; 11] = [
    "fig2-spectrum",
    "fig3-dissipative",
    "fig4-measurement",
    "fig5-spectra",
    "fig6-adiabatic",
    "fig7-scan",
    "figE-dw4",
    "figE-oh5",
    "figE-g2",
    "stirap-check",
    "appxA-identities",
];

/// Overridable experiment parameters. Unset fields take each experiment's
/// own defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub t_grid: Option<Vec<f64>>,
    pub n_grid: Option<Vec<usize>>,
    pub strengths: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub theta_points: Option<usize>,
    pub scan_time: Option<f64>,
}

/// One CSV table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

/// A CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Missing,
}

impl Table {
    pub fn new(file: impl Into<String>, header: &[&str]) -> Self {
        Self {
            file: file.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_float(*x),
            Cell::Int(k) => k.to_string(),
            Cell::Text(t) => t.clone(),
            Cell::Missing => String::new(),
        }
    }
}

/// Twelve significant digits in scientific notation.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_finite() {
        format!("{x:.11e}")
    } else {
        x.to_string().to_lowercase()
    }
}

/// Tables and metadata produced by one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub name: String,
    pub tables: Vec<Table>,
    pub metadata: Value,
}

impl ExperimentOutput {
    pub fn table(&self, file: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.file == file)
    }
}

/// Records parameters with their source labels.
struct Meta {
    params: Map<String, Value>,
    summary: Map<String, Value>,
}

impl Meta {
    fn new() -> Self {
        Self {
            params: Map::new(),
            summary: Map::new(),
        }
    }

    fn param(&mut self, key: &str, value: impl Serialize, source: &str) {
        self.params.insert(key.to_string(), json!({ "value": value, "source": source }));
    }

    /// Records an overridable parameter; overridden values are `chosen`.
    fn param_or<T: Serialize + Clone>(&mut self, key: &str, over: &Option<T>, default: T, source: &str) -> T {
        let (v, src) = match over {
            Some(v) => (v.clone(), "chosen"),
            None => (default, source),
        };
        self.param(key, v.clone(), src);
        v
    }

    fn summary(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(key.to_string(), json!(value));
    }

    fn finish(self, name: &str, description: &str, tables: &[Table]) -> Value {
        json!({
            "experiment": name,
            "description": description,
            "parameters": self.params,
            "files": tables.iter().map(|t| t.file.clone()).collect::<Vec<_>>(),
            "summary": self.summary,
        })
    }
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn decades(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| 10f64.powi(e)).collect()
}

/// `1e3`-style tag for file names.
fn tag(x: f64) -> String {
    format!("{x:e}").replace('.', "p").replace('-', "m")
}

fn check_grid<T: PartialOrd + Copy + std::fmt::Debug>(name: &str, grid: &[T], lower: T) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidInput(format!("{name} grid is empty")));
    }
    if let Some(x) = grid.iter().find(|&&x| !(x >= lower)) {
        return Err(Error::InvalidInput(format!("{name} value {x:?} out of range")));
    }
    Ok(())
}

/// Trajectory rows, thinned to at most `max_rows` while keeping the last.
pub fn trajectory_table(file: String, traj: &Trajectory, max_rows: usize) -> Table {
    let mut t = Table::new(file, &["theta", "survival", "success"]);
    let n = traj.records.len();
    let stride = n.div_ceil(max_rows.max(1)).max(1);
    for (k, r) in traj.records.iter().enumerate() {
        if (k + 1) % stride == 0 || k + 1 == n {
            t.rows.push(vec![Cell::Num(r.theta), Cell::Num(r.survival), Cell::Num(r.success)]);
        }
    }
    t
}

/// Magnitude-sorted table `<prefix>.csv` with a class column and the
/// continuity-ordered `<prefix>_curves.csv`.
pub fn spectrum_tables(prefix: &str, scan: &SpectrumScan) -> Vec<Table> {
    let width = scan.by_magnitude.first().map_or(0, Vec::len);
    let classes = format!(
        "{}/{}/{}",
        1.min(width),
        scan.cluster.min(width.saturating_sub(1)),
        width.saturating_sub(1 + scan.cluster)
    );
    let mut header = vec!["theta".to_string()];
    header.extend((0..width).map(|k| format!("eig_{k:03}")));
    let mut by_mag = Table::new(format!("{prefix}.csv"), &[]);
    by_mag.header = header.clone();
    by_mag.header.push("class".into());
    let mut curves = Table::new(format!("{prefix}_curves.csv"), &[]);
    curves.header = header;
    for (k, &theta) in scan.theta_grid.iter().enumerate() {
        let mut row = vec![Cell::Num(theta)];
        row.extend(scan.by_magnitude[k].iter().map(|&v| Cell::Num(v)));
        row.push(Cell::Text(classes.clone()));
        by_mag.rows.push(row);
        let mut row = vec![Cell::Num(theta)];
        row.extend(scan.curves[k].iter().map(|&v| Cell::Num(v)));
        curves.rows.push(row);
    }
    vec![by_mag, curves]
}

fn bundled_model(variant: bool) -> Result<ConstraintModel> {
    let mut f = load_bundled_instance();
    if variant {
        f = unsatisfiable_variant(&f)?;
    }
    ConstraintModel::new(SpaceSpec::qubits(5)?, 1.0, f.forbidden_set(1.0))
}

fn target_index(bits: &[u8]) -> Result<usize> {
    basis_index(&TritString::from_bits(bits), &SpaceSpec::qubits(bits.len())?)
}

/// Computes an experiment's tables without touching the file system.
pub fn compute_experiment(name: &str, params: &ExperimentParams) -> Result<ExperimentOutput> {
    let (tables, meta, description) = match name {
        "fig2-spectrum" => fig2(params)?,
        "fig3-dissipative" => fig3(params)?,
        "fig4-measurement" => fig4(params)?,
        "fig5-spectra" => fig5(params)?,
        "fig6-adiabatic" => fig6(params)?,
        "fig7-scan" => fig7(params)?,
        "figE-dw4" => fig_e(name, params, dw4_setup()?)?,
        "figE-oh5" => fig_e(name, params, oh5_setup()?)?,
        "figE-g2" => fig_e(name, params, g2_setup()?)?,
        "stirap-check" => stirap(params)?,
        "appxA-identities" => identities(params)?,
        other => return Err(Error::UnknownExperiment(other.to_string())),
    };
    let metadata = meta.finish(name, description, &tables);
    Ok(ExperimentOutput {
        name: name.to_string(),
        tables,
        metadata,
    })
}

/// Runs an experiment and writes its CSVs and metadata under `out_dir`.
/// Returns the written paths.
pub fn run_experiment(name: &str, params: &ExperimentParams, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let out = compute_experiment(name, params)?;
    write_output(&out, out_dir)
}

pub fn write_output(out: &ExperimentOutput, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for t in &out.tables {
        let path = out_dir.join(&t.file);
        write_atomic(&path, t.to_csv().as_bytes())?;
        written.push(path);
    }
    let meta_path = out_dir.join(format!("{}.meta.json", out.name));
    let mut text = serde_json::to_string_pretty(&out.metadata).expect("metadata is valid JSON");
    text.push('\n');
    write_atomic(&meta_path, text.as_bytes())?;
    written.push(meta_path);
    Ok(written)
}

type Built = (Vec<Table>, Meta, &'static str);

fn fig2(p: &ExperimentParams) -> Result<Built> {
    let mut meta = Meta::new();
    meta.param("instance", "bundled 45-clause, 5 variables", "fixed");
    meta.param("extra_clause_unsatisfiable", "x0 v x1 v x2", "fixed");
    meta.param("gamma", 1.0, "fixed");
    let points = meta.param_or("theta_points", &p.theta_points, 100, "chosen");
    meta.param("cluster", DEFAULT_CLUSTER, "derived");
    let grid = linspace(0.0, FRAC_PI_2, points);
    let mut tables = Vec::new();
    for (variant, label) in [(false, "satisfiable"), (true, "unsatisfiable")] {
        let model = bundled_model(variant)?;
        let scan = spectrum_vs_theta(|t| model.generator(t), &grid, true, DEFAULT_CLUSTER)?;
        let mins = scan.min_magnitudes();
        meta.summary(&format!("{label}_near_zero_at_start"), scan.near_zero_counts(KERNEL_TOL)[0]);
        meta.summary(&format!("{label}_max_min_magnitude"), mins.iter().cloned().fold(0.0, f64::max));
        meta.summary(&format!("{label}_final_min_magnitude"), mins.last().copied());
        tables.extend(spectrum_tables(&format!("fig2-spectrum_{label}"), &scan));
    }
    Ok((tables, meta, "Decay-rate spectrum of the constraint generator versus sweep angle"))
}

fn fig3(p: &ExperimentParams) -> Result<Built> {
    let mut meta = Meta::new();
    meta.param("instance", "bundled 45-clause, 5 variables", "fixed");
    meta.param("gamma", 1.0, "fixed");
    meta.param("target", "00000", "fixed");
    let steps = meta.param_or("steps", &p.steps, Schedule::DEFAULT_STEPS, "fixed");
    let totals = meta.param_or("t_grid", &p.t_grid, decades(1, 9), "fixed");
    check_grid("runtime", &totals, 0.0)?;
    let model = bundled_model(false)?;
    let trajs = dissipative_scan(&model, target_index(&[0; 5])?, &Schedule::grid(steps, FRAC_PI_2, &totals)?)?;
    let mut summary = Table::new("fig3-dissipative_summary.csv", &["total_time", "final_success", "final_survival"]);
    let mut tables = Vec::new();
    for t in &trajs {
        summary.rows.push(vec![Cell::Num(t.resource), Cell::Num(t.final_success()), Cell::Num(t.final_survival())]);
        tables.push(trajectory_table(format!("fig3-dissipative_T{}.csv", tag(t.resource)), t, steps));
    }
    meta.summary("final_success", trajs.iter().map(Trajectory::final_success).collect::<Vec<_>>());
    tables.insert(0, summary);
    Ok((tables, meta, "Dissipative sweeps over runtimes spanning many decades"))
}

fn fig4(p: &ExperimentParams) -> Result<Built> {
    let mut meta = Meta::new();
    meta.param("instance", "bundled 45-clause, 5 variables", "fixed");
    meta.param("target", "00000", "fixed");
    let counts = meta.param_or("n_grid", &p.n_grid, vec![10, 100, 1_000, 10_000, 100_000, 1_000_000], "fixed");
    check_grid("measurement count", &counts, 1)?;
    meta.param("max_rows_per_trajectory", 1000, "chosen");
    let model = bundled_model(false)?;
    let trajs = measurement_scan(&model, target_index(&[0; 5])?, &counts)?;
    let mut summary = Table::new(
        "fig4-measurement_summary.csv",
        &["n_measurements", "final_success", "final_survival", "theta_below_half", "theta_half_drop"],
    );
    let mut tables = Vec::new();
    for t in &trajs {
        let opt = |x: Option<f64>| x.map_or(Cell::Missing, Cell::Num);
        summary.rows.push(vec![
            Cell::Int(t.resource as u64),
            Cell::Num(t.final_success()),
            Cell::Num(t.final_survival()),
            opt(t.first_below(0.5)),
            opt(t.half_drop_theta()),
        ]);
        tables.push(trajectory_table(format!("fig4-measurement_N{}.csv", tag(t.resource)), t, 1000));
    }
    meta.summary("final_success", trajs.iter().map(Trajectory::final_success).collect::<Vec<_>>());
    tables.insert(0, summary);
    Ok((tables, meta, "Repeated projective measurements along a linear angle ramp"))
}

fn adiabatic_model(alpha: f64) -> Result<AdiabaticModel> {
    Ok(AdiabaticModel {
        constraints: bundled_model(false)?,
        offset: OffsetSpec::new(alpha)?,
        problem: None,
    })
}

fn fig5(p: &ExperimentParams) -> Result<Built> {
    let mut meta = Meta::new();
    meta.param("instance", "bundled 45-clause, 5 variables", "fixed");
    meta.param("penalty_weight", 1.0, "fixed");
    let alpha = meta.param_or("alpha", &p.alpha, 0.1, "fixed");
    let points = meta.param_or("theta_points", &p.theta_points, 100, "chosen");
    let grid = linspace(0.0, FRAC_PI_2, points);
    let mut tables = Vec::new();
    let mut gaps = Table::new("fig5-spectra_gap.csv", &["theta", "gap_no_offset", "gap_offset"]);
    let mut gap_cols = Vec::new();
    for (a, label) in [(0.0, "no_offset"), (alpha, "offset")] {
        let model = adiabatic_model(a)?;
        let scan = spectrum_vs_theta(|t| model.hamiltonian(t), &grid, false, DEFAULT_CLUSTER)?;
        tables.extend(spectrum_tables(&format!("fig5-spectra_{label}"), &scan));
        let g = gap_vs_theta(|t| model.hamiltonian(t), &grid)?;
        meta.summary(&format!("min_gap_{label}"), g.iter().cloned().fold(f64::INFINITY, f64::min));
        gap_cols.push(g);
    }
    for (k, &theta) in grid.iter().enumerate() {
        gaps.rows.push(vec![Cell::Num(theta), Cell::Num(gap_cols[0][k]), Cell::Num(gap_cols[1][k])]);
    }
    tables.push(gaps);
    Ok((tables, meta, "Energy spectra of the penalty Hamiltonian with and without the undefined-level offset"))
}

fn fig6(p: &ExperimentParams) -> Result<Built> {
    let mut meta = Meta::new();
    meta.param("instance", "bundled 45-clause, 5 variables", "fixed");
    meta.param("penalty_weight", 1.0, "fixed");
    meta.param("target", "00000", "fixed");
    let alpha = meta.param_or("alpha", &p.alpha, 0.1, "fixed");
    let steps = meta.param_or("steps", &p.steps, Schedule::DEFAULT_STEPS, "fixed");
    let totals = meta.param_or("t_grid", &p.t_grid, decades(1, 6), "chosen");
    check_grid("runtime", &totals, 0.0)?;
    let schedules = Schedule::grid(steps, FRAC_PI_2, &totals)?;
    let target = target_index(&[0; 5])?;
    let plain = adiabatic_scan(&adiabatic_model(0.0)?, target, &schedules)?;
    let offset = adiabatic_scan(&adiabatic_model(alpha)?, target, &schedules)?;
    let mut summary = Table::new("fig6-adiabatic_summary.csv", &["total_time", "success_no_offset", "success_offset"]);
    let mut tables = Vec::new();
    for (a, b) in plain.iter().zip(&offset) {
        summary.rows.push(vec![Cell::Num(a.resource), Cell::Num(a.final_success()), Cell::Num(b.final_success())]);
        tables.push(trajectory_table(format!("fig6-adiabatic_no_offset_T{}.csv", tag(a.resource)), a, steps));
        tables.push(trajectory_table(format!("fig6-adiabatic_offset_T{}.csv", tag(b.resource)), b, steps));
    }
    meta.summary("success_no_offset", plain.iter().map(Trajectory::final_success).collect::<Vec<_>>());
    meta.summary("success_offset", offset.iter().map(Trajectory::final_success).collect::<Vec<_>>());
    tables.insert(0, summary);
    Ok((tables, meta, "Unitary penalty sweeps with and without the undefined-level offset"))
}

/// The five-variable three-hot benchmark.
pub fn three_hot_setup(steps: usize) -> Result<StrengthScanSetup> {
    Ok(StrengthScanSetup {
        problem: IsingProblem::fields(THREE_HOT_FIELDS.to_vec()),
        constraint: CardinalityConstraint::new(CardinalityKind::Exactly, 3, (0..5).collect())?,
        alpha: 1.0,
        target: vec![0, 0, 1, 1, 1],
        steps,
    })
}

/// Default strength grid of the three-hot comparison.
pub const STRENGTH_GRID: [f64; 9] = [0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0];

/// Default runtime of the three-hot comparison.
pub const STRENGTH_SCAN_TIME: f64 = 10.0;

fn fig7(p: &ExperimentParams) -> Result<Built> {
    let mut meta = Meta::new();
    meta.param("fields", THREE_HOT_FIELDS, "fixed");
    meta.param("constraint", "exactly 3 ones over 5 variables", "fixed");
    meta.param("target", "00111", "derived");
    let steps = meta.param_or("steps", &p.steps, Schedule::DEFAULT_STEPS, "fixed");
    let alpha = meta.param_or("alpha", &p.alpha, 1.0, "fixed");
    let strengths = meta.param_or("strengths", &p.strengths, STRENGTH_GRID.to_vec(), "chosen");
    let total = meta.param_or("scan_time", &p.scan_time, STRENGTH_SCAN_TIME, "chosen");
    let mut setup = three_hot_setup(steps)?;
    setup.alpha = alpha;
    let rows = constraint_strength_scan(&setup, &strengths, total)?;
    let mut t = Table::new(
        "fig7-scan.csv",
        &[
            "strength",
            "success_3state",
            "success_tf",
            "success_projected",
            "ground_correct_3state",
            "ground_correct_tf",
        ],
    );
    for r in &rows {
        t.rows.push(vec![
            Cell::Num(r.strength),
            Cell::Num(r.success_3state),
            Cell::Num(r.success_tf),
            Cell::Num(r.success_projected),
            Cell::Int(r.ground_correct_3state as u64),
            Cell::Int(r.ground_correct_tf as u64),
        ]);
    }
    meta.summary("success_projected", rows.first().map(|r| r.success_projected));
    Ok((vec![t], meta, "Constraint-strength comparison of the three-level and transverse-field encodings"))
}

/// A small constrained problem evolved with perfect projection.
pub struct ProjectedSetup {
    pub label: &'static str,
    pub n: usize,
    pub constraints: ForbiddenSet,
    pub problem_diag: Vec<f64>,
    pub alpha: f64,
    pub target: Vec<u8>,
    pub t_grid: Vec<f64>,
}

impl ProjectedSetup {
    pub fn model(&self, alpha: f64) -> Result<ProjectedModel> {
        let spec = SpaceSpec::qubits(self.n)?;
        ProjectedModel::new(
            ConstraintModel::new(spec, 1.0, self.constraints.clone())?,
            Some(HermitianGenerator::from_real_diagonal(&self.problem_diag)),
            OffsetSpec::new(alpha)?,
            ProjectionMode::Restricted,
        )
    }

    pub fn target_index(&self) -> Result<usize> {
        target_index(&self.target)
    }
}

fn basis_energy(n: usize, bits: &[u8], energy: f64) -> Result<Vec<f64>> {
    let spec = SpaceSpec::qubits(n)?;
    let mut diag = vec![0.0; spec.dim()];
    diag[target_index(bits)?] = energy;
    Ok(diag)
}

/// Four-bit domain-wall variable with `1111` lowered by 2.
pub fn dw4_setup() -> Result<ProjectedSetup> {
    let target = vec![1, 1, 1, 1];
    Ok(ProjectedSetup {
        label: "domain wall, 4 bits",
        n: 4,
        constraints: domain_wall_clauses(5)?.forbidden_set(1.0),
        problem_diag: basis_energy(4, &target, -2.0)?,
        alpha: 2.0,
        target,
        t_grid: decades(0, 3),
    })
}

/// Five-bit one-hot variable with `10000` lowered by 2.
pub fn oh5_setup() -> Result<ProjectedSetup> {
    let spec = SpaceSpec::qubits(5)?;
    let c = CardinalityConstraint::new(CardinalityKind::Exactly, 1, (0..5).collect())?;
    let target = vec![1, 0, 0, 0, 0];
    Ok(ProjectedSetup {
        label: "one hot, 5 bits",
        n: 5,
        constraints: cardinality_forbidden_set(&c, &spec, 1.0)?,
        problem_diag: basis_energy(5, &target, -2.0)?,
        alpha: 2.0,
        target,
        t_grid: decades(0, 3),
    })
}

/// Random-field problem with at most two zeros among five bits.
pub fn g2_setup() -> Result<ProjectedSetup> {
    let spec = SpaceSpec::qubits(5)?;
    let c = CardinalityConstraint::new(CardinalityKind::AtMostZeros, 2, (0..5).collect())?;
    let problem = IsingProblem::fields(THREE_HOT_FIELDS.to_vec());
    let diag = problem.qubit_diagonal();
    let best = (0..32usize)
        .filter(|&x| {
            let levels: Vec<usize> = (0..5).map(|j| (x >> j) & 1).collect();
            c.feasible(&levels, 2)
        })
        .min_by(|&a, &b| diag[a].total_cmp(&diag[b]))
        .expect("the constraint admits assignments");
    Ok(ProjectedSetup {
        label: "at most two zeros, 5 bits",
        n: 5,
        constraints: cardinality_forbidden_set(&c, &spec, 1.0)?,
        problem_diag: ising_hamiltonian(&problem, &spec)?.real_diagonal(),
        alpha: 1.0,
        target: (0..5).map(|j| ((best >> j) & 1) as u8).collect(),
        t_grid: decades(0, 3),
    })
}

/// Eigenvalues of the drive compressed onto the allowed subspace.
pub fn allowed_spectrum(model: &ProjectedModel, theta: SweepAngle) -> Result<Vec<f64>> {
    let k = hermitian_eigendecomposition(&model.constraints.generator(theta)?).kernel(KERNEL_TOL);
    if k.ncols() == 0 {
        return Ok(Vec::new());
    }
    let h = k.adjoint() * model.drive.matrix() * &k;
    Ok(hermitian_eigendecomposition(&HermitianGenerator::new(h)?).values)
}

fn fig_e(name: &str, p: &ExperimentParams, setup: ProjectedSetup) -> Result<Built> {
    let mut meta = Meta::new();
    meta.param("system", setup.label, "fixed");
    meta.param("target", TritString::from_bits(&setup.target).to_string(), "fixed");
    meta.param("projection", "restricted", "chosen");
    let alpha = meta.param_or("alpha", &p.alpha, setup.alpha, "fixed");
    let steps = meta.param_or("steps", &p.steps, Schedule::DEFAULT_STEPS, "fixed");
    let totals = meta.param_or("t_grid", &p.t_grid, setup.t_grid.clone(), "chosen");
    let points = meta.param_or("theta_points", &p.theta_points, 100, "chosen");
    check_grid("runtime", &totals, 0.0)?;
    let model = setup.model(alpha)?;
    let trajs = projected_scan(&model, setup.target_index()?, &Schedule::grid(steps, FRAC_PI_2, &totals)?)?;
    let mut summary = Table::new(format!("{name}_summary.csv"), &["total_time", "final_success", "final_survival"]);
    let mut tables = Vec::new();
    for t in &trajs {
        summary.rows.push(vec![Cell::Num(t.resource), Cell::Num(t.final_success()), Cell::Num(t.final_survival())]);
        tables.push(trajectory_table(format!("{name}_T{}.csv", tag(t.resource)), t, steps));
    }
    let grid = linspace(FRAC_PI_2 / points as f64, FRAC_PI_2, points);
    let spectra = grid
        .iter()
        .map(|&t| allowed_spectrum(&model, SweepAngle::new(t)?))
        .collect::<Result<Vec<_>>>()?;
    let width = spectra.iter().map(Vec::len).max().unwrap_or(0);
    let mut header = vec!["theta".to_string()];
    header.extend((0..width).map(|k| format!("eig_{k:03}")));
    let mut spec_table = Table::new(format!("{name}_spectrum.csv"), &[]);
    spec_table.header = header;
    for (theta, vals) in grid.iter().zip(&spectra) {
        let mut row = vec![Cell::Num(*theta)];
        row.extend((0..width).map(|k| vals.get(k).map_or(Cell::Missing, |&v| Cell::Num(v))));
        spec_table.rows.push(row);
    }
    meta.summary("final_success", trajs.iter().map(Trajectory::final_success).collect::<Vec<_>>());
    meta.summary("allowed_dimension", width);
    tables.insert(0, summary);
    tables.push(spec_table);
    Ok((tables, meta, "Projected sweeps of a small encoded variable"))
}

fn stirap(p: &ExperimentParams) -> Result<Built> {
    let mut meta = Meta::new();
    let seed = meta.param_or("seed", &p.seed, 0, "chosen");
    meta.param("samples", 100, "fixed");
    meta.param("amplitude_range", [0.0, 1.0], "chosen");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random = Table::new(
        "stirap-check_random.csv",
        &["a", "b", "theta", "eigen_residual", "dark_residual"],
    );
    let (mut worst_e, mut worst_d) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let pulse = StirapPulse {
            a: 1.0 - rng.random::<f64>(),
            b: 1.0 - rng.random::<f64>(),
        };
        let c = stirap_check(&pulse)?;
        worst_e = worst_e.max(c.eigen_residual);
        worst_d = worst_d.max(c.dark_residual);
        random.rows.push(
            [c.a, c.b, c.theta, c.eigen_residual, c.dark_residual]
                .iter()
                .map(|&x| Cell::Num(x))
                .collect(),
        );
    }
    let times = linspace(0.0, 1.0, 101);
    let mut pulses = Table::new("stirap-check_pulses.csv", &["t", "a", "b", "theta"]);
    for (t, pulse) in times.iter().zip(stirap_schedule(&times)?) {
        pulses.rows.push(vec![Cell::Num(*t), Cell::Num(pulse.a), Cell::Num(pulse.b), Cell::Num(pulse.theta()?)]);
    }
    meta.summary("max_eigen_residual", worst_e);
    meta.summary("max_dark_residual", worst_d);
    Ok((vec![random, pulses], meta, "Dark-state checks of the four-level pulse scheme"))
}

fn identities(p: &ExperimentParams) -> Result<Built> {
    let mut meta = Meta::new();
    let points = meta.param_or("theta_points", &p.theta_points, 10, "chosen");
    meta.param("alpha", 1.0, "chosen");
    meta.param("qudit_levels", [2, 3, 4, 5], "fixed");
    meta.param("one_hot_units", 5, "fixed");
    let thetas = linspace(0.0, FRAC_PI_2, points);
    let mut t = Table::new("appxA-identities.csv", &["check", "size", "phi", "theta", "residual"]);
    let push = |t: &mut Table, check: &str, size: usize, phi: Option<f64>, theta: f64, r: f64| {
        t.rows.push(vec![
            Cell::Text(check.into()),
            Cell::Int(size as u64),
            phi.map_or(Cell::Missing, Cell::Num),
            Cell::Num(theta),
            Cell::Num(r),
        ]);
    };
    let mut worst = std::collections::BTreeMap::<&str, f64>::new();
    let mut note = |k: &'static str, r: f64| {
        let e = worst.entry(k).or_insert(0.0);
        *e = e.max(r);
    };
    for &theta in &thetas {
        let th = SweepAngle::new(theta)?;
        for m in 2..=5 {
            let exact = qudit_identity_residual(th, 1.0, m, qudit_drive_prefactor(th, 1.0, m))?;
            let alt = qudit_identity_residual(th, 1.0, m, qudit_drive_prefactor_alt(th, 1.0, m))?;
            push(&mut t, "qudit_drive", m, None, theta, exact);
            push(&mut t, "qudit_drive_alt_prefactor", m, None, theta, alt);
            note("qudit_drive", exact);
            note("qudit_drive_alt_prefactor", alt);
        }
        let red = qudit_reduction_residual(th)?;
        push(&mut t, "qudit_two_level_reduction", 2, None, theta, red);
        note("qudit_two_level_reduction", red);
        let pair = pair_drive_matrix(th, 1.0)?;
        let pair_alt = pair
            .restricted
            .iter()
            .fold(0.0f64, |m, &x| m.max((x - pair_drive_prefactor_alt(th, 1.0)).abs()));
        push(&mut t, "pair_drive_alt_prefactor", 4, None, theta, pair_alt);
        note("pair_drive_alt_prefactor", pair_alt);
        for phi in linspace(0.1, FRAC_PI_2 - 0.1, 7) {
            let (exact, alt) = biased_coefficient_residuals(BiasAngle::new(phi)?, th)?;
            push(&mut t, "biased_coefficients", 1, Some(phi), theta, exact);
            push(&mut t, "biased_coefficients_alt", 1, Some(phi), theta, alt);
            note("biased_coefficients", exact);
            note("biased_coefficients_alt", alt);
        }
        if theta > 0.0 {
            let c = one_hot_coefficients(5, th)?;
            let exact = gram_residual(&orthogonalised_one_hot(5, th, c.a)?);
            let alt = gram_residual(&orthogonalised_one_hot(5, th, c.a_printed)?);
            push(&mut t, "one_hot_orthogonality", 5, None, theta, exact);
            push(&mut t, "one_hot_orthogonality_alt_coefficient", 5, None, theta, alt);
            push(&mut t, "one_hot_offdiag_alt_formula", 5, None, theta, (c.offdiag - c.offdiag_printed).abs());
            note("one_hot_orthogonality", exact);
            note("one_hot_orthogonality_alt_coefficient", alt);
            note("one_hot_offdiag_alt_formula", (c.offdiag - c.offdiag_printed).abs());
        }
    }
    for (k, v) in worst {
        meta.summary(&format!("max_{k}"), v);
    }
    Ok((vec![t], meta, "Residuals of closed-form identities for qudit, biased and one-hot constructions"))
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(|source| Error::Io { path: tmp.clone(), source })?;
    std::fs::rename(&tmp, path).map_err(io)
}

/// Summary helper used by reports: the `(value, source)` pair of a
/// parameter in a metadata document.
pub fn metadata_param<'a>(meta: &'a Value, key: &str) -> Option<(&'a Value, &'a str)> {
    let p = meta.get("parameters")?.get(key)?;
    Some((p.get("value")?, p.get("source")?.as_str()?))
}
