mod config;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use config::RunConfig;
use zeno_core::analysis::{satisfiability_witness, spectrum_vs_theta, WITNESS_THETA, DEFAULT_CLUSTER};
use zeno_core::constraints::{
    load_bundled_instance, planted_generator, read_dimacs, to_dimacs, Clause, CnfFormula,
};
use zeno_core::evolution::{
    adiabatic_sweep, dissipative_sweep, measurement_sweep, projected_sweep, tf_sweep, AdiabaticModel,
    IterativeSolver, ProjectedModel, ProjectionMode, SatVerdict, Schedule, Trajectory,
};
use zeno_core::experiments::{
    linspace, spectrum_tables, trajectory_table, write_atomic, write_output, ExperimentOutput, ExperimentParams,
    CATALOG,
};
use zeno_core::hilbert::{basis_index, SpaceSpec, TritString};
use zeno_core::operators::{ConstraintModel, OffsetSpec};
use zeno_core::Error as CoreError;

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "ZENO_OUT_DIR";
const DEFAULT_OUT: &str = "runs";

#[derive(Parser, Debug)]
#[command(name = "zeno", version, about = "Zeno-effect optimisation on three-level registers")]
struct Cli {
    /// TOML file with default values for any long flag; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (falls back to $ZENO_OUT_DIR, then `runs`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a catalog experiment and write its CSV and JSON files.
    Experiment(ExperimentArgs),
    /// Spectrum of the constraint generator or penalty Hamiltonian versus angle.
    Spectrum(SpectrumArgs),
    /// Single sweep with one engine; writes the trajectory.
    Sweep(SweepArgs),
    /// Kernel test for satisfiability.
    Witness(WitnessArgs),
    /// Iterative partial-sweep solver.
    SolveIterative(SolveArgs),
    /// Generate a random instance.
    Generate(GenerateArgs),
}

#[derive(Args, Debug, Default)]
struct InstanceArgs {
    /// DIMACS CNF file.
    instance: Option<PathBuf>,
    /// Use the bundled five-variable instance.
    #[arg(long)]
    bundled: bool,
    /// Extra clause as DIMACS literals, e.g. "1 2 3" or "-1 2 -4".
    #[arg(long, value_name = "LITERALS")]
    add_clause: Vec<String>,
}

impl InstanceArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        cfg.instance = self.instance.clone();
        if self.bundled {
            cfg.bundled = Some(true);
        }
        if !self.add_clause.is_empty() {
            cfg.add_clause = Some(self.add_clause.clone());
        }
    }
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Catalog name, or `list` to print the catalog.
    name: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    strengths: Option<Vec<f64>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    theta_points: Option<usize>,
    #[arg(long)]
    scan_time: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SpectrumKind {
    /// Magnitudes of the decay generator's eigenvalues.
    Decay,
    /// Signed eigenvalues of the penalty Hamiltonian plus offset.
    Energy,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_enum)]
    kind: Option<SpectrumKind>,
    /// Offset on the undefined level (energy spectra only).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    theta_points: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Engine {
    Dissipative,
    Measurement,
    Adiabatic,
    Projected,
    Tf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_enum)]
    engine: Option<Engine>,
    /// Target bit string, unit 0 first (defaults to the planted or first satisfying assignment).
    #[arg(long)]
    target: Option<String>,
    /// Undefined-level offset for adiabatic and projected sweeps.
    #[arg(long)]
    alpha: Option<f64>,
    /// Clause penalty for transverse-field sweeps.
    #[arg(long)]
    strength: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    total_time: Option<f64>,
    #[arg(long)]
    n_measurements: Option<usize>,
}

#[derive(Args, Debug)]
struct WitnessArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Probe angle; must be positive.
    #[arg(long)]
    theta: Option<f64>,
    /// Write the effective config to this file.
    #[arg(long)]
    save_config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// RNG seed (required).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    theta_stop: Option<f64>,
    #[arg(long)]
    total_time: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    save_config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Planted instance whose only solution is all zeros.
    #[arg(long)]
    planted: bool,
    /// Number of variables.
    #[arg(long)]
    n: Option<usize>,
    /// RNG seed (required).
    #[arg(long)]
    seed: Option<u64>,
    /// Write the instance here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    save_config: Option<PathBuf>,
}

/// Errors caused by bad input rather than by the protocol itself.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(UsageError(msg.into()))
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::EmptyKernel { .. } | CoreError::SolverExhausted { .. }) => 1,
        Some(_) => 2,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let mut flags = RunConfig {
        out: cli.out.clone(),
        ..Default::default()
    };
    match &cli.command {
        Command::Experiment(a) => {
            flags.command = Some("experiment".into());
            flags.experiment = a.name.clone();
            flags.steps = a.steps;
            flags.seed = a.seed;
            flags.t_grid = a.t_grid.clone();
            flags.n_grid = a.n_grid.clone();
            flags.strengths = a.strengths.clone();
            flags.alpha = a.alpha;
            flags.theta_points = a.theta_points;
            flags.scan_time = a.scan_time;
        }
        Command::Spectrum(a) => {
            flags.command = Some("spectrum".into());
            a.instance.apply(&mut flags);
            flags.kind = a.kind.map(|k| kind_name(k).into());
            flags.alpha = a.alpha;
            flags.theta_points = a.theta_points;
        }
        Command::Sweep(a) => {
            flags.command = Some("sweep".into());
            a.instance.apply(&mut flags);
            flags.engine = a.engine.map(|e| engine_name(e).into());
            flags.target = a.target.clone();
            flags.alpha = a.alpha;
            flags.strength = a.strength;
            flags.steps = a.steps;
            flags.total_time = a.total_time;
            flags.n_measurements = a.n_measurements;
        }
        Command::Witness(a) => {
            flags.command = Some("witness".into());
            a.instance.apply(&mut flags);
            flags.theta = a.theta;
        }
        Command::SolveIterative(a) => {
            flags.command = Some("solve-iterative".into());
            a.instance.apply(&mut flags);
            flags.seed = a.seed;
            flags.theta_stop = a.theta_stop;
            flags.total_time = a.total_time;
            flags.steps = a.steps;
        }
        Command::Generate(a) => {
            flags.command = Some("generate".into());
            if a.planted {
                flags.planted = Some(true);
            }
            flags.n = a.n;
            flags.seed = a.seed;
        }
    }
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| usage(format!("{e:#}")))?.overlay(&flags),
        None => flags,
    };
    if cfg.command != Some(command_name(&cli.command).into()) {
        return Err(usage(format!(
            "config is for `{}`, not `{}`",
            cfg.command.as_deref().unwrap_or("?"),
            command_name(&cli.command)
        )));
    }
    match &cli.command {
        Command::Experiment(_) => cmd_experiment(cfg),
        Command::Spectrum(_) => cmd_spectrum(cfg),
        Command::Sweep(_) => cmd_sweep(cfg),
        Command::Witness(a) => cmd_witness(cfg, a.save_config.as_deref()),
        Command::SolveIterative(a) => cmd_solve(cfg, a.save_config.as_deref()),
        Command::Generate(a) => cmd_generate(cfg, a.output.as_deref(), a.save_config.as_deref()),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Experiment(_) => "experiment",
        Command::Spectrum(_) => "spectrum",
        Command::Sweep(_) => "sweep",
        Command::Witness(_) => "witness",
        Command::SolveIterative(_) => "solve-iterative",
        Command::Generate(_) => "generate",
    }
}

fn kind_name(k: SpectrumKind) -> &'static str {
    match k {
        SpectrumKind::Decay => "decay",
        SpectrumKind::Energy => "energy",
    }
}

fn engine_name(e: Engine) -> &'static str {
    match e {
        Engine::Dissipative => "dissipative",
        Engine::Measurement => "measurement",
        Engine::Adiabatic => "adiabatic",
        Engine::Projected => "projected",
        Engine::Tf => "tf",
    }
}

fn out_dir(cfg: &mut RunConfig) -> PathBuf {
    let dir = cfg
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    cfg.out = Some(dir.clone());
    dir
}

fn save_config(cfg: &RunConfig, path: &Path) -> Result<()> {
    write_atomic(path, cfg.to_toml().as_bytes())?;
    Ok(())
}

/// Parses one clause of 1-based signed DIMACS literals.
fn parse_clause(text: &str) -> Result<Clause> {
    let lits = text
        .split_whitespace()
        .filter(|t| *t != "0")
        .map(|t| t.parse::<i64>().map_err(|_| usage(format!("bad literal `{t}` in clause `{text}`"))))
        .collect::<Result<Vec<_>>>()?;
    if lits.is_empty() {
        return Err(usage(format!("clause `{text}` has no literals")));
    }
    let vars = lits.iter().map(|l| l.unsigned_abs() as usize - 1).collect();
    let negated = lits.iter().map(|&l| l < 0).collect();
    Ok(Clause::new(vars, negated)?)
}

fn load_formula(cfg: &RunConfig) -> Result<CnfFormula> {
    let mut f = match (cfg.bundled.unwrap_or(false), &cfg.instance) {
        (true, None) => load_bundled_instance(),
        (false, Some(path)) => read_dimacs(path)?,
        (true, Some(_)) => return Err(usage("give either --bundled or an instance file, not both")),
        (false, None) => return Err(usage("an instance is required: pass a DIMACS file or --bundled")),
    };
    for text in cfg.add_clause.iter().flatten() {
        f = f.with_clause(parse_clause(text)?)?;
    }
    Ok(f)
}

fn cmd_experiment(mut cfg: RunConfig) -> Result<u8> {
    let name = cfg
        .experiment
        .clone()
        .ok_or_else(|| usage("an experiment name is required (try `list`)"))?;
    if name == "list" {
        for entry in CATALOG {
            println!("{entry}");
        }
        return Ok(0);
    }
    if !CATALOG.contains(&name.as_str()) {
        return Err(usage(format!("unknown experiment `{name}`; known: {}", CATALOG.join(", "))));
    }
    if name == "stirap-check" && cfg.seed.is_none() {
        return Err(usage("stirap-check draws random pulses: --seed is required"));
    }
    let params = ExperimentParams {
        steps: cfg.steps,
        seed: cfg.seed,
        t_grid: cfg.t_grid.clone(),
        n_grid: cfg.n_grid.clone(),
        strengths: cfg.strengths.clone(),
        alpha: cfg.alpha,
        theta_points: cfg.theta_points,
        scan_time: cfg.scan_time,
    };
    let dir = out_dir(&mut cfg);
    let out: ExperimentOutput = zeno_core::experiments::compute_experiment(&name, &params)?;
    let written = write_output(&out, &dir)?;
    save_config(&cfg, &dir.join(format!("{name}.config.toml")))?;
    for p in &written {
        println!("{}", p.display());
    }
    Ok(0)
}

fn cmd_spectrum(mut cfg: RunConfig) -> Result<u8> {
    let f = load_formula(&cfg)?;
    let kind = cfg.kind.clone().unwrap_or_else(|| "decay".into());
    let points = *cfg.theta_points.get_or_insert(100);
    if points == 0 {
        return Err(usage("--theta-points must be positive"));
    }
    cfg.kind = Some(kind.clone());
    let spec = SpaceSpec::qubits(f.n_vars())?;
    let model = ConstraintModel::new(spec, 1.0, f.forbidden_set(1.0))?;
    let grid = linspace(0.0, FRAC_PI_2, points);
    let scan = match kind.as_str() {
        "decay" => spectrum_vs_theta(|t| model.generator(t), &grid, true, DEFAULT_CLUSTER)?,
        "energy" => {
            let adiabatic = AdiabaticModel {
                constraints: model.clone(),
                offset: OffsetSpec::new(*cfg.alpha.get_or_insert(0.0))?,
                problem: None,
            };
            spectrum_vs_theta(|t| adiabatic.hamiltonian(t), &grid, false, DEFAULT_CLUSTER)?
        }
        other => return Err(usage(format!("unknown spectrum kind `{other}`"))),
    };
    let dir = out_dir(&mut cfg);
    for t in spectrum_tables(&format!("spectrum_{kind}"), &scan) {
        let path = dir.join(&t.file);
        write_atomic(&path, t.to_csv().as_bytes())?;
        println!("{}", path.display());
    }
    save_config(&cfg, &dir.join(format!("spectrum_{kind}.config.toml")))?;
    Ok(0)
}

fn default_target(f: &CnfFormula) -> Result<Vec<u8>> {
    if let Some(p) = f.planted() {
        return Ok(p.to_vec());
    }
    let sat = f.satisfying_assignments()?;
    let x = sat.first().copied().unwrap_or(0);
    Ok((0..f.n_vars()).map(|j| ((x >> j) & 1) as u8).collect())
}

fn parse_bits(text: &str, n: usize) -> Result<Vec<u8>> {
    let t: TritString = text.parse().map_err(|e| usage(format!("bad target: {e}")))?;
    if t.len() != n || t.digits().iter().any(|&d| d > 1) {
        return Err(usage(format!("target `{text}` must be {n} bits")));
    }
    Ok(t.digits().iter().map(|&d| d as u8).collect())
}

fn cmd_sweep(mut cfg: RunConfig) -> Result<u8> {
    let f = load_formula(&cfg)?;
    let n = f.n_vars();
    let engine = cfg.engine.clone().ok_or_else(|| usage("--engine is required"))?;
    let target = match &cfg.target {
        Some(t) => parse_bits(t, n)?,
        None => default_target(&f)?,
    };
    cfg.target = Some(TritString::from_bits(&target).to_string());
    let steps = *cfg.steps.get_or_insert(Schedule::DEFAULT_STEPS);
    let spec = SpaceSpec::qubits(n)?;
    let model = ConstraintModel::new(spec.clone(), 1.0, f.forbidden_set(1.0))?;
    let index = basis_index(&TritString::from_bits(&target), &spec)?;
    if engine != "measurement" {
        cfg.total_time.get_or_insert(100.0);
    }
    let schedule = || -> Result<Schedule> { Ok(Schedule::new(steps, cfg.total_time.unwrap_or(100.0))?) };
    let result: std::result::Result<Trajectory, CoreError> = match engine.as_str() {
        "dissipative" => dissipative_sweep(&model, index, &schedule()?),
        "measurement" => {
            let count = *cfg.n_measurements.get_or_insert(steps);
            measurement_sweep(&model, index, count)
        }
        "adiabatic" => {
            let sch = schedule()?;
            let m = AdiabaticModel {
                constraints: model,
                offset: OffsetSpec::new(*cfg.alpha.get_or_insert(0.0))?,
                problem: None,
            };
            adiabatic_sweep(&m, index, &sch)
        }
        "projected" => {
            let sch = schedule()?;
            let offset = OffsetSpec::new(*cfg.alpha.get_or_insert(0.0))?;
            let m = ProjectedModel::new(model, None, offset, ProjectionMode::Restricted)?;
            projected_sweep(&m, index, &sch)
        }
        "tf" => {
            let sch = schedule()?;
            let strength = *cfg.strength.get_or_insert(1.0);
            let forbidden: Vec<usize> = (0..1usize << n)
                .filter(|&x| {
                    let levels: Vec<usize> = (0..n).map(|j| (x >> j) & 1).collect();
                    !f.clauses().iter().all(|c| c.satisfied_by_levels(&levels, 2))
                })
                .collect();
            let qubit_target = target.iter().enumerate().map(|(j, &b)| (b as usize) << j).sum();
            tf_sweep(&vec![0.0; 1 << n], strength, &forbidden, qubit_target, &sch)
        }
        other => return Err(usage(format!("unknown engine `{other}`"))),
    };
    let dir = out_dir(&mut cfg);
    save_config(&cfg, &dir.join(format!("sweep_{engine}.config.toml")))?;
    match result {
        Ok(traj) => {
            let table = trajectory_table(format!("sweep_{engine}.csv"), &traj, 1000);
            let path = dir.join(&table.file);
            write_atomic(&path, table.to_csv().as_bytes())?;
            println!("final_success {}", traj.final_success());
            println!("final_survival {}", traj.final_survival());
            println!("{}", path.display());
            Ok(0)
        }
        Err(CoreError::EmptyKernel { step, theta }) => {
            println!("empty allowed subspace at step {step} (theta = {theta}): no assignment satisfies the constraints");
            Ok(1)
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_witness(mut cfg: RunConfig, save: Option<&Path>) -> Result<u8> {
    let f = load_formula(&cfg)?;
    let theta = *cfg.theta.get_or_insert(WITNESS_THETA);
    if !(theta > 0.0 && theta <= FRAC_PI_2) {
        return Err(usage(format!("--theta must lie in (0, pi/2], got {theta}")));
    }
    let w = satisfiability_witness(&f, theta)?;
    println!("{}", if w.satisfiable { "satisfiable" } else { "unsatisfiable" });
    eprintln!("smallest |eigenvalue| at theta = {}: {:e}", w.theta, w.min_magnitude);
    if let Some(path) = save {
        save_config(&cfg, path)?;
    }
    Ok(0)
}

fn cmd_solve(mut cfg: RunConfig, save: Option<&Path>) -> Result<u8> {
    let f = load_formula(&cfg)?;
    let seed = cfg.seed.ok_or_else(|| usage("solve-iterative is stochastic: --seed is required"))?;
    let theta_stop = *cfg.theta_stop.get_or_insert(FRAC_PI_4);
    let total = *cfg.total_time.get_or_insert(10.0);
    let steps = *cfg.steps.get_or_insert(Schedule::DEFAULT_STEPS);
    if !(theta_stop > 0.0 && theta_stop <= FRAC_PI_2) {
        return Err(usage(format!("--theta-stop must lie in (0, pi/2], got {theta_stop}")));
    }
    let solver = IterativeSolver::new(theta_stop, total, steps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if let Some(path) = save {
        save_config(&cfg, path)?;
    }
    match solver.solve(&f, &mut rng)? {
        SatVerdict::Satisfiable(bits) => println!("satisfiable {}", TritString::from_bits(&bits)),
        SatVerdict::Unsatisfiable => println!("unsatisfiable"),
    }
    Ok(0)
}

fn cmd_generate(cfg: RunConfig, output: Option<&Path>, save: Option<&Path>) -> Result<u8> {
    if !cfg.planted.unwrap_or(false) {
        bail!(UsageError("only planted instances are available: pass --planted".into()));
    }
    let n = cfg.n.ok_or_else(|| usage("--n is required"))?;
    let seed = cfg.seed.ok_or_else(|| usage("generation is stochastic: --seed is required"))?;
    let f = planted_generator(n, seed)?;
    let text = to_dimacs(&f);
    match output {
        Some(path) => {
            write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
        }
        None => print!("{text}"),
    }
    if let Some(path) = save {
        save_config(&cfg, path)?;
    }
    Ok(0)
}
