//! Config-driven experiment harness behind the `mrgd` binary.
//!
//! Every subcommand reads one TOML file (`--config`), writes CSV/JSON artifacts
//! into `--out` and finishes with a `manifest.json` recording the config hash,
//! the seed and the library version.
//!
//! Exit codes: 0 success, 2 validation, 3 numerical, 4 I/O.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::landscape::{
    default_expansion_epsilons, expansion_order_check, first_layer_row_hessian, hessian_covariance_rank_correlation,
    layer_perturbation_bound_check, logistic_gradient_scaling, mlp_gradient_scaling, relative_frobenius, Activation,
    HessianMode, MlpModel,
};
use crate::optim::{baseline_solve, mrgd, Baseline, BaselineOptions, MrgdOptions, QuadraticProblem, SolveResult};
use crate::problems::{
    build_separable_convex, generate_multiscale_dataset, least_squares_quadratic, pca_align, Dataset,
    MultiscaleDataSpec, Sampler, TargetKind,
};
use crate::schedule::{
    complexity_estimates, contraction_bound, group_bounds, iteration_counts, Schedule, DEFAULT_ETA,
};
use crate::spectrum::{SpectrumGroups, DEFAULT_GAP_THRESHOLD};

#[derive(Debug, Parser)]
#[command(name = "mrgd", version, about = "Multirate gradient descent experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default: config `out`, else `out`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Serial execution with a fixed reduction order.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Worker threads for `benchmark`.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Draw a synthetic multiscale dataset.
    Generate,
    /// Eigenvalue groups of a spectrum or of a dataset's second-moment matrix.
    Spectrum,
    /// Learning rates, inner counts and bounds.
    Schedule,
    /// Run multirate descent on one problem.
    Solve,
    /// Compare multirate descent against baselines.
    Benchmark,
    /// Loss-landscape probes on a small MLP.
    Probe,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Spectrum => "spectrum",
            Command::Schedule => "schedule",
            Command::Solve => "solve",
            Command::Benchmark => "benchmark",
            Command::Probe => "probe",
        }
    }
}

/// Where the data comes from: a spec to sample, or a CSV written by `generate`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    pub group_dims: Option<Vec<usize>>,
    /// Data standard deviations per group, first entry 1.
    pub scales: Option<Vec<f64>>,
    /// Power cascade `ε^k`; alternative to `scales`.
    pub epsilon: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub sampler: Sampler,
    #[serde(default)]
    pub target: TargetKind,
    /// PCA-align after sampling.
    #[serde(default)]
    pub align: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchicalConfig {
    pub sizes: Vec<usize>,
    pub decay: f64,
    pub kappa: f64,
}

fn default_gap() -> f64 {
    DEFAULT_GAP_THRESHOLD
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub eigenvalues: Option<Vec<f64>>,
    pub hierarchical: Option<HierarchicalConfig>,
    /// Explicit group sizes; otherwise groups are detected.
    pub group_sizes: Option<Vec<usize>>,
    #[serde(default = "default_gap")]
    pub gap_threshold: f64,
}

fn default_eta() -> f64 {
    DEFAULT_ETA
}

fn default_outer() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Maximum number of outer cycles.
    #[serde(default = "default_outer")]
    pub outer: usize,
    /// Explicit per-scale rates; counts are synthesized unless given too.
    pub etas: Option<Vec<f64>>,
    pub counts: Option<Vec<usize>>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { eta: DEFAULT_ETA, outer: default_outer(), etas: None, counts: None }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    #[default]
    Quadratic,
    SeparableConvex,
}

fn default_methods() -> Vec<String> {
    vec!["mrgd".into()]
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_steps() -> usize {
    100_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub problem: ProblemKind,
    /// Any of `mrgd`, `gd`, `heavy_ball`, `nesterov`, `chebyshev`, `cg`.
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Step size for `gd`; defaults to `1/σ_max`.
    pub gd_lr: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Quadratic,
            methods: default_methods(),
            tol: default_tol(),
            max_steps: default_max_steps(),
            gd_lr: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeCheck {
    Scaling,
    Expansion,
    Hessian,
    Perturbation,
}

fn all_checks() -> Vec<ProbeCheck> {
    vec![ProbeCheck::Scaling, ProbeCheck::Expansion, ProbeCheck::Hessian, ProbeCheck::Perturbation]
}

fn default_hidden() -> Vec<usize> {
    vec![8, 8]
}

fn default_model_seed() -> u64 {
    5
}

fn default_scaling_eps() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3, 1e-4]
}

fn default_classes() -> usize {
    3
}

fn default_draws() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default = "all_checks")]
    pub checks: Vec<ProbeCheck>,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default = "default_model_seed")]
    pub model_seed: u64,
    /// Sweep for the gradient-scaling fits.
    #[serde(default = "default_scaling_eps")]
    pub epsilons: Vec<f64>,
    /// Sweep for the expansion-order fits.
    pub expansion_epsilons: Option<Vec<f64>>,
    #[serde(default = "default_classes")]
    pub classes: usize,
    /// First-layer rows for the Hessian check (default: all).
    pub rows: Option<Vec<usize>>,
    #[serde(default = "default_draws")]
    pub draws: usize,
}

/// One experiment, as read from TOML.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub deterministic: bool,
    pub data: Option<DataConfig>,
    pub spectrum: Option<SpectrumConfig>,
    pub schedule: Option<ScheduleConfig>,
    pub solver: Option<SolverConfig>,
    pub probe: Option<ProbeConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(format!("config: {}", e.message())))
    }

    /// Check that the sections `command` needs are present.
    pub fn validate_for(&self, command: Command) -> Result<()> {
        let mut missing = Vec::new();
        let has_spectrum =
            self.spectrum.as_ref().is_some_and(|s| s.eigenvalues.is_some() || s.hierarchical.is_some());
        match command {
            Command::Generate => {
                if self.data.is_none() {
                    missing.push("data");
                }
            }
            Command::Spectrum | Command::Schedule | Command::Solve | Command::Benchmark => {
                if self.data.is_none() && !has_spectrum {
                    missing.push("data | spectrum.eigenvalues | spectrum.hierarchical");
                }
            }
            Command::Probe => {
                if self.probe.is_none() {
                    missing.push("probe");
                }
                if self.data.as_ref().is_none_or(|d| d.group_dims.is_none()) {
                    missing.push("data.group_dims");
                }
            }
        }
        if let Some(data) = &self.data {
            match &data.path {
                Some(path) => {
                    if !path.exists() {
                        return Err(Error::Validation(format!("data file {} does not exist", path.display())));
                    }
                }
                None if command != Command::Probe => {
                    if data.group_dims.is_none() {
                        missing.push("data.group_dims");
                    }
                    if data.scales.is_none() && data.epsilon.is_none() {
                        missing.push("data.scales | data.epsilon");
                    }
                    if data.samples.is_none() {
                        missing.push("data.samples");
                    }
                }
                None => {}
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(format!("missing keys for {}: {}", command.name(), missing.join(", "))))
        }
    }
}

/// Resolved run settings after merging flags into the config.
struct Run {
    config: ExperimentConfig,
    config_hash: String,
    seed: u64,
    out: PathBuf,
    deterministic: bool,
    jobs: usize,
    outputs: Vec<String>,
}

impl Run {
    fn data_spec(&self) -> Result<MultiscaleDataSpec> {
        let data = self.config.data.as_ref().ok_or_else(|| Error::Validation("missing keys: data".into()))?;
        let dims = data.group_dims.clone().ok_or_else(|| Error::Validation("missing keys: data.group_dims".into()))?;
        let samples = data.samples.unwrap_or(1000);
        let seed = data.seed.unwrap_or(self.seed);
        let spec = match (&data.scales, data.epsilon) {
            (Some(scales), _) => MultiscaleDataSpec::new(dims, scales.clone(), samples, seed)?,
            (None, Some(eps)) => MultiscaleDataSpec::power_cascade(dims, eps, samples, seed)?,
            (None, None) => MultiscaleDataSpec::power_cascade(dims, 0.1, samples, seed)?,
        };
        Ok(spec.with_sampler(data.sampler))
    }

    fn dataset(&self) -> Result<Dataset> {
        let data = self.config.data.as_ref().ok_or_else(|| Error::Validation("missing keys: data".into()))?;
        let ds = match &data.path {
            Some(path) => Dataset::read(path)?,
            None => generate_multiscale_dataset(&self.data_spec()?, data.target)?,
        };
        if data.align {
            pca_align(&ds)
        } else {
            Ok(ds)
        }
    }

    /// Groups plus, for data-backed runs, the least-squares quadratic.
    fn spectrum(&self) -> Result<(SpectrumGroups, Option<QuadraticProblem>)> {
        let sc = self.config.spectrum.clone();
        let threshold = sc.as_ref().map_or(DEFAULT_GAP_THRESHOLD, |s| s.gap_threshold);
        let sizes = sc.as_ref().and_then(|s| s.group_sizes.clone());
        let group = |eigs: &[f64]| match &sizes {
            Some(sizes) => SpectrumGroups::from_sizes(eigs, sizes),
            None => SpectrumGroups::detect(eigs, threshold),
        };
        if let Some(h) = sc.as_ref().and_then(|s| s.hierarchical.as_ref()) {
            return Ok((SpectrumGroups::hierarchical(&h.sizes, h.decay, h.kappa)?, None));
        }
        if let Some(eigs) = sc.as_ref().and_then(|s| s.eigenvalues.as_ref()) {
            return Ok((group(eigs)?, None));
        }
        let problem = least_squares_quadratic(&self.dataset()?)?;
        Ok((group(problem.eigenvalues())?, Some(problem)))
    }

    fn schedule(&self, spectrum: &SpectrumGroups) -> Result<Schedule> {
        let sc = self.config.schedule.clone().unwrap_or_default();
        match (&sc.etas, &sc.counts) {
            (Some(etas), Some(counts)) => Schedule::new(etas.clone(), counts.clone(), sc.outer),
            (Some(etas), None) => {
                if etas.len() != spectrum.num_groups() {
                    return Err(Error::Validation(format!(
                        "{} rates for {} groups",
                        etas.len(),
                        spectrum.num_groups()
                    )));
                }
                Schedule::new(etas.clone(), iteration_counts(spectrum, etas)?, sc.outer)
            }
            (None, Some(_)) => Err(Error::Validation("schedule.counts needs schedule.etas".into())),
            (None, None) => Schedule::synthesize(spectrum, sc.eta, sc.outer),
        }
    }

    fn solver(&self) -> SolverConfig {
        self.config.solver.clone().unwrap_or_default()
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.out.join(name)
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let path = self.path(name);
        fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
        Ok(())
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(path, text)?;
        Ok(())
    }
}

/// Map an error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => 4,
        e if e.is_numerical() => 3,
        _ => 2,
    }
}

/// Parse `args`, run the command and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Execute one parsed invocation.
pub fn run(cli: &Cli) -> Result<()> {
    let (text, config_hash) = match &cli.config {
        Some(path) => {
            let bytes = fs::read(path)?;
            let hash = hex::encode(Sha256::digest(&bytes));
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::Validation(format!("{} is not UTF-8", path.display())))?;
            (text, hash)
        }
        None => return Err(Error::Validation("missing --config".into())),
    };
    let config = ExperimentConfig::from_toml(&text)?;
    config.validate_for(cli.command)?;
    let deterministic = cli.deterministic || config.deterministic;
    if cli.jobs == 0 {
        return Err(Error::Validation("--jobs must be at least 1".into()));
    }
    let mut run = Run {
        seed: cli.seed.or(config.seed).unwrap_or(0),
        out: cli.out.clone().or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
        jobs: if deterministic { 1 } else { cli.jobs },
        deterministic,
        config_hash,
        config,
        outputs: Vec::new(),
    };
    fs::create_dir_all(&run.out)?;
    match cli.command {
        Command::Generate => cmd_generate(&mut run)?,
        Command::Spectrum => cmd_spectrum(&mut run)?,
        Command::Schedule => cmd_schedule(&mut run)?,
        Command::Solve => cmd_solve(&mut run)?,
        Command::Benchmark => cmd_benchmark(&mut run)?,
        Command::Probe => cmd_probe(&mut run)?,
    }
    let manifest = json!({
        "command": cli.command.name(),
        "config_sha256": run.config_hash,
        "seed": run.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "deterministic": run.deterministic,
        "jobs": run.jobs,
        "outputs": run.outputs,
    });
    run.write_json("manifest.json", &manifest)
}

fn cmd_generate(run: &mut Run) -> Result<()> {
    let ds = run.dataset()?;
    let path = run.path("data.csv");
    ds.write(&path)?;
    run.outputs.push("data.json".into());
    println!("wrote {} samples x {} features to {}", ds.len(), ds.dim(), path.display());
    Ok(())
}

fn cmd_spectrum(run: &mut Run) -> Result<()> {
    let (groups, _) = run.spectrum()?;
    let mut csv = String::from("index,eigenvalue,group\n");
    for g in 0..groups.num_groups() {
        for k in groups.group_range(g) {
            csv.push_str(&format!("{k},{},{g}\n", groups.eigenvalues()[k]));
        }
    }
    run.write_text("eigenvalues.csv", &csv)?;
    run.write_json("spectrum.json", &groups.report())?;
    println!("{} groups, sizes {:?}", groups.num_groups(), groups.group_sizes());
    Ok(())
}

fn schedule_summary(spectrum: &SpectrumGroups, schedule: &Schedule, tol: f64) -> Value {
    let check = schedule.check(spectrum).ok();
    json!({
        "etas": schedule.etas,
        "counts": schedule.counts,
        "outer": schedule.outer,
        "eta": schedule.eta_scalar,
        "check": check.map(|c| json!({
            "rates_admissible": c.rates_admissible,
            "last_count_is_one": c.last_count_is_one,
            "coupling_satisfied": c.coupling_satisfied,
        })),
        "contraction_bound": contraction_bound(spectrum, schedule).ok(),
        "group_bounds": group_bounds(spectrum, schedule).ok(),
        "estimates": complexity_estimates(spectrum, schedule, tol).ok(),
    })
}

fn cmd_schedule(run: &mut Run) -> Result<()> {
    let (spectrum, _) = run.spectrum()?;
    let schedule = run.schedule(&spectrum)?;
    let summary = schedule_summary(&spectrum, &schedule, run.solver().tol);
    run.write_json("schedule.json", &summary)?;
    println!("etas {:?} counts {:?}", schedule.etas, schedule.counts);
    Ok(())
}

fn quadratic_for(run: &Run, spectrum: &SpectrumGroups, data_problem: Option<QuadraticProblem>) -> Result<QuadraticProblem> {
    match data_problem {
        Some(p) => Ok(p),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
            let g = DVector::from_fn(spectrum.dim(), |_, _| StandardNormal.sample(&mut rng));
            QuadraticProblem::diagonal(spectrum.eigenvalues(), g)
        }
    }
}

fn outcome(name: &str, res: &SolveResult, tol: f64) -> Value {
    let last = res.trajectory.last();
    json!({
        "method": name,
        "converged": res.converged,
        "grad_evals": res.grad_evals(),
        "grad_evals_to_tol": res.trajectory.evals_to(tol),
        "final_residual": last.map(|r| r.residual),
        "final_error": last.and_then(|r| r.error),
        "max_cycle_contraction": res.trajectory.cycle_contractions().into_iter().fold(None, |acc: Option<f64>, c| {
            Some(acc.map_or(c, |a| a.max(c)))
        }),
    })
}

fn cmd_solve(run: &mut Run) -> Result<()> {
    let (spectrum, data_problem) = run.spectrum()?;
    let schedule = run.schedule(&spectrum)?;
    let solver = run.solver();
    let options = MrgdOptions::with_tol(solver.tol);
    let res = match solver.problem {
        ProblemKind::Quadratic => {
            let problem = quadratic_for(run, &spectrum, data_problem)?;
            mrgd(&problem, &schedule, &DVector::zeros(problem.dim()), &options)?
        }
        ProblemKind::SeparableConvex => {
            let problem = build_separable_convex(&spectrum, run.seed)?;
            mrgd(&problem, &schedule, &DVector::zeros(spectrum.dim()), &options)?
        }
    };
    let path = run.path("mrgd.csv");
    res.trajectory.write_csv(&path)?;
    let summary = json!({
        "schedule": schedule_summary(&spectrum, &schedule, solver.tol),
        "tol": solver.tol,
        "result": outcome("mrgd", &res, solver.tol),
    });
    run.write_json("summary.json", &summary)?;
    println!("mrgd: {} gradient evaluations, converged = {}", res.grad_evals(), res.converged);
    Ok(())
}

fn baseline_for(name: &str, problem: &QuadraticProblem, gd_lr: Option<f64>) -> Result<Baseline> {
    let (lo, hi) = (problem.sigma_min(), problem.sigma_max());
    Ok(match name {
        "gd" => Baseline::Gd { lr: gd_lr.unwrap_or(1.0 / hi) },
        "heavy_ball" => Baseline::heavy_ball_tuned(lo, hi),
        "nesterov" => Baseline::nesterov_tuned(lo, hi),
        "chebyshev" => Baseline::Chebyshev { sigma_min: lo, sigma_max: hi },
        "cg" => Baseline::Cg,
        other => return Err(Error::Validation(format!("unknown method {other:?}"))),
    })
}

fn cmd_benchmark(run: &mut Run) -> Result<()> {
    let (spectrum, data_problem) = run.spectrum()?;
    let schedule = run.schedule(&spectrum)?;
    let solver = run.solver();
    if solver.problem != ProblemKind::Quadratic {
        return Err(Error::Validation("benchmark baselines need solver.problem = \"quadratic\"".into()));
    }
    let problem = quadratic_for(run, &spectrum, data_problem)?;
    for name in &solver.methods {
        if name != "mrgd" {
            baseline_for(name, &problem, solver.gd_lr)?;
        }
    }
    let theta0 = DVector::zeros(problem.dim());
    let baseline_options = BaselineOptions { max_steps: solver.max_steps, tol: solver.tol, allow_unsafe_rate: false };
    let solve_one = |name: &str| -> Result<SolveResult> {
        if name == "mrgd" {
            mrgd(&problem, &schedule, &theta0, &MrgdOptions::with_tol(solver.tol))
        } else {
            baseline_solve(baseline_for(name, &problem, solver.gd_lr)?, &problem, &theta0, &baseline_options)
        }
    };

    let methods = &solver.methods;
    let mut results: Vec<Option<Result<SolveResult>>> = (0..methods.len()).map(|_| None).collect();
    if run.jobs <= 1 {
        for (k, name) in methods.iter().enumerate() {
            results[k] = Some(solve_one(name));
        }
    } else {
        let jobs = run.jobs.min(methods.len()).max(1);
        let collected: Vec<(usize, Result<SolveResult>)> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..jobs)
                .map(|w| {
                    let solve_one = &solve_one;
                    scope.spawn(move || {
                        (w..methods.len()).step_by(jobs).map(|k| (k, solve_one(&methods[k]))).collect::<Vec<_>>()
                    })
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
        });
        for (k, r) in collected {
            results[k] = Some(r);
        }
    }

    let mut rows = Vec::new();
    for (name, res) in methods.iter().zip(results) {
        let res = res.expect("every method ran")?;
        res.trajectory.write_csv(&run.path(&format!("{name}.csv")))?;
        println!("{name:>10}: {:>8} gradient evaluations to tol", res.trajectory.evals_to(solver.tol).map_or("-".into(), |n| n.to_string()));
        rows.push(outcome(name, &res, solver.tol));
    }
    let summary = json!({
        "schedule": schedule_summary(&spectrum, &schedule, solver.tol),
        "tol": solver.tol,
        "methods": rows,
    });
    run.write_json("summary.json", &summary)
}

fn scaling_window(slope: Option<f64>, expected: f64) -> bool {
    slope.is_some_and(|s| (s - expected).abs() <= 0.2 * expected.max(1.0))
}

fn cmd_probe(run: &mut Run) -> Result<()> {
    let probe = run.config.probe.clone().expect("validated");
    let base = run.data_spec()?;
    let d = base.dim();
    let model = MlpModel::init(d, &probe.hidden, probe.activation, probe.model_seed)?;
    let mut summary = BTreeMap::<String, Value>::new();
    let mut pass = BTreeMap::<String, bool>::new();

    if probe.checks.contains(&ProbeCheck::Scaling) {
        let (first, second) = mlp_gradient_scaling(&model, &base, &probe.epsilons)?;
        let softmax = logistic_gradient_scaling(&base, probe.classes, probe.model_seed, &probe.epsilons)?;
        run.write_text("first_layer_scaling.csv", &first.to_csv())?;
        run.write_text("second_layer_scaling.csv", &second.to_csv())?;
        run.write_text("softmax_scaling.csv", &softmax.to_csv())?;
        let groups_ok = |rep: &crate::landscape::ScalingReport| {
            rep.slopes.iter().enumerate().skip(1).all(|(k, s)| scaling_window(*s, k as f64))
        };
        let second_max = second.slopes.iter().map(|s| s.map_or(f64::INFINITY, f64::abs)).fold(0.0, f64::max);
        pass.insert("first_layer_scaling".into(), groups_ok(&first));
        pass.insert("softmax_scaling".into(), groups_ok(&softmax));
        pass.insert("second_layer_flat".into(), second_max < 0.3);
        summary.insert("first_layer_slopes".into(), json!(first.slopes));
        summary.insert("softmax_slopes".into(), json!(softmax.slopes));
        summary.insert("second_layer_slopes".into(), json!(second.slopes));
        summary.insert("second_layer_spread".into(), json!(second.max_spread()));
    }

    if probe.checks.contains(&ProbeCheck::Expansion) {
        let eps = probe.expansion_epsilons.clone().unwrap_or_else(default_expansion_epsilons);
        let mut csv = String::from("layer,epsilon,deviation\n");
        let mut slopes = BTreeMap::new();
        let mut ok = true;
        for layer in 1..=model.weights.len() {
            let rep = expansion_order_check(&model, &base, layer, &eps)?;
            for (e, dev) in rep.epsilons.iter().zip(&rep.deviations) {
                csv.push_str(&format!("{layer},{e},{dev}\n"));
            }
            ok &= rep.slope.is_some_and(|s| (0.85..=1.15).contains(&s));
            slopes.insert(layer.to_string(), json!({"slope": rep.slope, "inconclusive": rep.inconclusive}));
        }
        run.write_text("expansion.csv", &csv)?;
        summary.insert("expansion".into(), json!(slopes));
        pass.insert("expansion_order".into(), ok);
    }

    if probe.checks.contains(&ProbeCheck::Hessian) {
        let ds = generate_multiscale_dataset(&base, TargetKind::LinearRegression)?;
        let rows = probe.rows.clone().unwrap_or_else(|| (0..probe.hidden.first().copied().unwrap_or(0)).collect());
        let mut csv = String::from("row,relative_frobenius,rank_correlation\n");
        let (mut worst_gap, mut worst_corr) = (0.0f64, 1.0f64);
        for &row in &rows {
            let formula = first_layer_row_hessian(&model, &ds, row, HessianMode::Formula)?;
            let fd = first_layer_row_hessian(&model, &ds, row, HessianMode::FiniteDifference)?;
            let gap = relative_frobenius(&formula, &fd);
            let corr = hessian_covariance_rank_correlation(&formula, &ds.features);
            csv.push_str(&format!("{row},{gap},{corr}\n"));
            worst_gap = worst_gap.max(gap);
            worst_corr = worst_corr.min(corr);
        }
        run.write_text("hessian.csv", &csv)?;
        summary.insert("hessian_max_relative_gap".into(), json!(worst_gap));
        summary.insert("hessian_min_rank_correlation".into(), json!(worst_corr));
        pass.insert("hessian_identity".into(), worst_gap <= 1e-4);
    }

    if probe.checks.contains(&ProbeCheck::Perturbation) {
        let mut rng = ChaCha8Rng::seed_from_u64(probe.model_seed);
        let lead = base.group_dims[0];
        let mut csv = String::from("draw,layer,epsilon,lhs,rhs,holds\n");
        let mut violations = 0;
        for draw in 0..probe.draws {
            let m = MlpModel::init(d, &probe.hidden, probe.activation, rng.random())?;
            let x0 = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let x1 = DVector::from_fn(d, |k, _| if k < lead { 0.0 } else { StandardNormal.sample(&mut rng) });
            let eps = 10f64.powf(rng.random_range(-4.0..-1.0));
            let layer = rng.random_range(1..=m.depth().max(1));
            if m.depth() == 0 {
                break;
            }
            let b = layer_perturbation_bound_check(&m, &x0, &x1, eps, layer)?;
            violations += usize::from(!b.holds());
            csv.push_str(&format!("{draw},{layer},{eps},{},{},{}\n", b.lhs, b.rhs, b.holds()));
        }
        run.write_text("perturbation.csv", &csv)?;
        summary.insert("perturbation_violations".into(), json!(violations));
        pass.insert("perturbation_bound".into(), violations == 0);
    }

    summary.insert("pass".into(), json!(pass));
    run.write_json("probe.json", &summary)?;
    for (k, v) in &pass {
        println!("{k:>20}: {}", if *v { "pass" } else { "FAIL" });
    }
    Ok(())
}
