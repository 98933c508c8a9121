use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use qportfolio::phase_opt::{self, EvalConfig, EvalReport, TrainingConfig, TransferComparison};
use qportfolio::portfolio::{self, QuantumPortfolio};
use qportfolio::qsim::{PhaseChoice, PreparedInstance};
use qportfolio::restart::{self, FrontierPoint, ProblemAngle};
use qportfolio::sat::{self, DimacsOptions};
use qportfolio::seeds::{self, stream};
use qportfolio::{Error, PortfolioSet};
use serde::{Deserialize, Serialize};

use crate::output::{self, manifest_path, RunManifest};
use crate::{
    AmplifyArgs, Command, EvalArgs, FrontierArgs, GenArgs, HistogramArgs, OptimizeArgs, ReplayArgs,
};

pub const FRONTIER_SCHEMA: &str = "qportfolio.frontier-csv/1";
pub const GEN_SCHEMA: &str = "qportfolio.dimacs/1";
pub const HISTOGRAM_SCHEMA: &str = "qportfolio.histogram/1";
pub const PORTFOLIO_SCHEMA: &str = "qportfolio.portfolio/1";
pub const EVAL_SCHEMA: &str = "qportfolio.eval/1";
pub const AMPLIFY_SCHEMA: &str = "qportfolio.amplify/1";

pub fn run(command: Command) -> Result<()> {
    let start = Instant::now();
    let (manifest, path) = match &command {
        Command::Replay(args) => return replay(args),
        Command::Frontier(args) => frontier(args, &command)?,
        Command::Gen(args) => gen(args, &command)?,
        Command::Histogram(args) => histogram(args, &command)?,
        Command::Optimize(args) => optimize(args, &command)?,
        Command::Eval(args) => eval(args, &command)?,
        Command::Amplify(args) => amplify(args, &command)?,
    };
    manifest.finish(&path, start.elapsed())
}

fn replay(args: &ReplayArgs) -> Result<()> {
    let mut command = RunManifest::read(&args.manifest)?.command()?;
    if let Some(out) = &args.out {
        match &mut command {
            Command::Frontier(a) => a.out = out.clone(),
            Command::Gen(a) => a.out = out.clone(),
            Command::Histogram(a) => a.out = out.clone(),
            Command::Optimize(a) => a.out = out.clone(),
            Command::Eval(a) => a.out = out.clone(),
            Command::Amplify(a) => a.out = out.clone(),
            Command::Replay(_) => bail!("a manifest cannot record a replay"),
        }
    }
    run(command)
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct FrontierRow {
    pub t: u64,
    pub p: f64,
    pub mean: f64,
    pub std: f64,
    pub sharpe: f64,
    pub efficient: bool,
}

#[derive(Debug, Serialize)]
struct FrontierSummary {
    fraction: f64,
    certainty_t: u64,
    certainty_mean: f64,
    optimal_t: u64,
    optimal_mean: f64,
    mean_ratio: f64,
}

fn frontier(args: &FrontierArgs, command: &Command) -> Result<(RunManifest, PathBuf)> {
    let angle = ProblemAngle::from_fraction(args.fraction)?;
    let certainty_t = restart::certainty_iterations(angle)?;
    let t_max = args.t_max.unwrap_or(certainty_t);
    ensure!(t_max >= 1, "--t-max must be at least 1");
    let points = restart::frontier(angle, t_max);
    let best = points
        .iter()
        .min_by(|a, b| a.mean.total_cmp(&b.mean))
        .ok_or(Error::InvalidArgument(format!(
            "no t in [1, {t_max}] has nonzero success probability"
        )))?;

    let mut writer = csv::Writer::from_writer(Vec::new());
    for p in &points {
        writer.serialize(FrontierRow {
            t: p.t,
            p: p.p,
            mean: p.mean,
            std: p.std,
            sharpe: p.sharpe,
            efficient: p.efficient,
        })?;
    }
    output::write_atomic(&args.out, &writer.into_inner()?)?;

    let certainty_mean = FrontierPoint::at(certainty_t, angle)?.mean;
    let summary = FrontierSummary {
        fraction: args.fraction,
        certainty_t,
        certainty_mean,
        optimal_t: best.t,
        optimal_mean: best.mean,
        mean_ratio: best.mean / certainty_mean,
    };
    println!(
        "certainty t*={} (mean {:.4}), optimal restart t={} (mean {:.4}), ratio {:.4}",
        summary.certainty_t,
        summary.certainty_mean,
        summary.optimal_t,
        summary.optimal_mean,
        summary.mean_ratio
    );

    let mut manifest = RunManifest::new(command, FRONTIER_SCHEMA)?;
    manifest.outputs = vec![args.out.clone()];
    manifest.summary = Some(serde_json::to_value(&summary)?);
    Ok((manifest, manifest_path(&args.out, false)))
}

// ---------------------------------------------------------------------------

pub fn instance_file_name(n: usize, ratio: f64, seed: u64, index: usize) -> String {
    format!("n{n}-r{ratio}-s{seed}-{index:04}.cnf")
}

fn gen(args: &GenArgs, command: &Command) -> Result<(RunManifest, PathBuf)> {
    ensure!(args.count > 0, "--count must be positive");
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let mut manifest = RunManifest::new(command, GEN_SCHEMA)?;
    manifest.seeds.push(args.seed);
    for index in 0..args.count {
        let instance_seed = seeds::derive_seed(args.seed, stream::INSTANCES, index as u64);
        let instance = sat::random_instance(args.n, args.ratio, instance_seed)?;
        let text = format!(
            "c random 3-SAT n={} ratio={} seed={} index={index} instance_seed={instance_seed}\n{}",
            args.n,
            args.ratio,
            args.seed,
            sat::write_dimacs(&instance)
        );
        let path = args
            .out
            .join(instance_file_name(args.n, args.ratio, args.seed, index));
        output::write_atomic(&path, text.as_bytes())?;
        manifest.seeds.push(instance_seed);
        manifest.outputs.push(path);
    }
    println!(
        "wrote {} instances with {} clauses to {}",
        args.count,
        sat::clause_count(args.n, args.ratio),
        args.out.display()
    );
    Ok((manifest, manifest_path(&args.out, true)))
}

// ---------------------------------------------------------------------------

struct LoadedInstance {
    id: String,
    seed: Option<u64>,
    prepared: PreparedInstance,
}

fn read_instance(path: &Path) -> Result<(String, sat::SatInstance)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let instance = sat::read_dimacs(&text, DimacsOptions::any_arity())
        .with_context(|| format!("parsing {}", path.display()))?;
    let id = path
        .file_stem()
        .unwrap_or_default()
        .to_string_lossy()
        .into_owned();
    Ok((id, instance))
}

/// A single DIMACS file, or every `.cnf` file of a directory in name order.
fn read_instances(path: &Path) -> Result<Vec<(String, sat::SatInstance)>> {
    if !path.is_dir() {
        return Ok(vec![read_instance(path)?]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .with_context(|| format!("listing {}", path.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "cnf"));
    files.sort();
    ensure!(!files.is_empty(), "no .cnf files in {}", path.display());
    files.iter().map(|p| read_instance(p)).collect()
}

/// Solvable instances plus the ids of the unsatisfiable ones that were skipped.
fn load_instances(
    file: Option<&Path>,
    n: Option<usize>,
    count: usize,
    ratio: f64,
    seed: u64,
) -> Result<(Vec<LoadedInstance>, Vec<String>, usize)> {
    if let Some(path) = file {
        let mut solvable = Vec::new();
        let mut excluded = Vec::new();
        for (id, instance) in read_instances(path)? {
            let prepared = PreparedInstance::new(instance)?;
            if prepared.is_solvable() {
                solvable.push(LoadedInstance {
                    id,
                    seed: None,
                    prepared,
                });
            } else {
                excluded.push(id);
            }
        }
        if solvable.is_empty() {
            return Err(Error::NoSolvableInstances {
                tried: excluded.len(),
            }
            .into());
        }
        let count = excluded.len();
        return Ok((solvable, excluded, count));
    }
    let n = n.context("either an instance path or --n is required")?;
    ensure!(count > 0, "--count must be positive");
    let sample = phase_opt::solvable_instances(n, count, ratio, seed, stream::INSTANCES)?;
    let loaded = sample
        .instances
        .into_iter()
        .map(|s| LoadedInstance {
            id: s.id,
            seed: Some(s.seed),
            prepared: s.prepared,
        })
        .collect();
    Ok((loaded, Vec::new(), sample.excluded_unsat))
}

/// `count` random choices; their coefficients depend only on `seed`.
pub fn random_choices(count: usize, seed: u64) -> Vec<PhaseChoice> {
    (0..count as u64)
        .map(|k| {
            PhaseChoice::random(
                &mut seeds::rng(seeds::derive_seed(seed, stream::CHOICES, k)),
                1,
            )
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct PortfolioDocument {
    schema: String,
    #[serde(flatten)]
    set: PortfolioSet,
}

pub fn read_portfolio(path: &Path) -> Result<PortfolioSet> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc: PortfolioDocument = serde_json::from_str(&text)
        .with_context(|| format!("parsing portfolio {}", path.display()))?;
    ensure!(
        doc.schema == PORTFOLIO_SCHEMA,
        "{}: unsupported schema {:?}",
        path.display(),
        doc.schema
    );
    doc.set.validate()?;
    Ok(doc.set)
}

fn choice_source(
    choices: Option<usize>,
    portfolio: Option<&Path>,
    seed: u64,
) -> Result<Vec<PhaseChoice>> {
    match (choices, portfolio) {
        (_, Some(path)) => Ok(read_portfolio(path)?.phase_choices()),
        (Some(k), None) => {
            ensure!(k > 0, "--choices must be positive");
            Ok(random_choices(k, seed))
        }
        (None, None) => bail!("either --choices or --portfolio is required"),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HistogramSample {
    pub instance_id: String,
    pub choice_id: usize,
    pub p: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HistogramInstance {
    pub instance_id: String,
    pub num_variables: usize,
    pub solutions: usize,
    pub steps: usize,
    /// Absent when every choice has (numerically) zero success probability.
    pub single_mean: Option<f64>,
    pub single_std: Option<f64>,
    pub single_divergent: bool,
    pub mixed_mean: f64,
    pub mixed_std: f64,
    pub jensen_gap: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HistogramDocument {
    pub schema: String,
    pub divergence_floor: f64,
    pub samples: Vec<HistogramSample>,
    pub instances: Vec<HistogramInstance>,
    pub excluded_unsat: Vec<String>,
    pub excluded_unsat_count: usize,
}

fn histogram(args: &HistogramArgs, command: &Command) -> Result<(RunManifest, PathBuf)> {
    let choices = choice_source(args.choices, args.portfolio.as_deref(), args.seed)?;
    let (instances, excluded, excluded_count) = load_instances(
        args.instances.as_deref(),
        args.n,
        args.count,
        args.ratio,
        args.seed,
    )?;

    let mut doc = HistogramDocument {
        schema: HISTOGRAM_SCHEMA.to_string(),
        divergence_floor: portfolio::DEFAULT_DIVERGENCE_FLOOR,
        samples: Vec::new(),
        instances: Vec::new(),
        excluded_unsat: excluded,
        excluded_unsat_count: excluded_count,
    };
    let mut manifest = RunManifest::new(command, HISTOGRAM_SCHEMA)?;
    manifest.seeds.push(args.seed);
    for inst in &instances {
        let n = inst.prepared.num_variables();
        let steps = args.steps.unwrap_or(n);
        let choices: Vec<PhaseChoice> = choices.iter().map(|c| c.with_steps(steps)).collect();
        let record =
            phase_opt::instance_record(&inst.id, inst.seed.unwrap_or(0), &inst.prepared, &choices)?;
        doc.samples
            .extend(record.samples.iter().map(|s| HistogramSample {
                instance_id: inst.id.clone(),
                choice_id: s.choice_id,
                p: s.p,
            }));
        println!(
            "{}: {} solutions, single {:.3} (divergent: {}), mixed {:.3} trials",
            inst.id,
            record.solutions,
            record.single.mean,
            record.single.divergent,
            record.mixed.mean
        );
        doc.instances.push(HistogramInstance {
            instance_id: inst.id.clone(),
            num_variables: n,
            solutions: record.solutions,
            steps,
            single_mean: finite(record.single.mean),
            single_std: finite(record.single.std),
            single_divergent: record.single.divergent,
            mixed_mean: record.mixed.mean,
            mixed_std: record.mixed.std,
            jensen_gap: record.jensen_gap,
        });
        manifest.seeds.extend(inst.seed);
    }
    output::write_json(&args.out, &doc)?;
    manifest.outputs = vec![args.out.clone()];
    Ok((manifest, manifest_path(&args.out, false)))
}

// ---------------------------------------------------------------------------

fn optimize(args: &OptimizeArgs, command: &Command) -> Result<(RunManifest, PathBuf)> {
    let config = TrainingConfig {
        train_n: args.n,
        train_count: args.count,
        ratio: args.ratio,
        restarts: args.restarts,
        budget: args.budget,
        seed: args.seed,
        steps: args.steps,
    };
    config.validate()?;
    let training = phase_opt::training_set(&config)?;
    let set = phase_opt::build_portfolio(&config)?;
    for c in &set.choices {
        println!(
            "restart {}: objective {:.6}",
            c.provenance.restart, c.provenance.objective
        );
    }
    println!("{}: {} distinct choices", set.id, set.choices.len());

    let doc = PortfolioDocument {
        schema: PORTFOLIO_SCHEMA.to_string(),
        set,
    };
    output::write_json(&args.out, &doc)?;
    let mut manifest = RunManifest::new(command, PORTFOLIO_SCHEMA)?;
    manifest.seeds.push(args.seed);
    manifest
        .seeds
        .extend(training.instances.iter().map(|i| i.seed));
    manifest.outputs = vec![args.out.clone()];
    manifest.summary = Some(serde_json::json!({
        "portfolio_id": doc.set.id,
        "choices": doc.set.choices.len(),
        "excluded_unsat_count": training.excluded_unsat,
    }));
    Ok((manifest, manifest_path(&args.out, false)))
}

// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct EvalDocument {
    schema: &'static str,
    config: EvalConfig,
    reports: Vec<EvalReport>,
    comparison: TransferComparison,
}

fn eval(args: &EvalArgs, command: &Command) -> Result<(RunManifest, PathBuf)> {
    let portfolios = args
        .portfolio
        .iter()
        .map(|p| read_portfolio(p))
        .collect::<Result<Vec<_>>>()?;
    let config = EvalConfig {
        test_n: args.n,
        test_count: args.count,
        ratio: args.ratio,
        seed: args.seed,
        steps: args.steps,
    };
    let held_out = phase_opt::held_out_instances(&config)?;
    let reports = portfolios
        .iter()
        .map(|set| phase_opt::evaluate_on(set, &held_out, config.test_n, config.steps()))
        .collect::<qportfolio::Result<Vec<_>>>()?;
    let comparison = phase_opt::compare_reports(&reports)?;
    for r in &reports {
        let a = &r.aggregate;
        println!(
            "{} on {} n={} instances: median single {:.3}, median mixed {:.3} trials",
            a.portfolio_id, a.instance_count, a.test_n, a.median_single_mean, a.median_mixed_mean
        );
    }
    if reports.len() > 1 {
        println!("best median mixed mean: {}", comparison.best);
    }

    let mut manifest = RunManifest::new(command, EVAL_SCHEMA)?;
    manifest.seeds.push(args.seed);
    manifest
        .seeds
        .extend(held_out.instances.iter().map(|i| i.seed));
    manifest.outputs = vec![args.out.clone()];
    manifest.summary = Some(serde_json::to_value(&comparison)?);
    let doc = EvalDocument {
        schema: EVAL_SCHEMA,
        config,
        reports,
        comparison,
    };
    output::write_json(&args.out, &doc)?;
    Ok((manifest, manifest_path(&args.out, false)))
}

// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct AmplifyRecord {
    pub schema: String,
    pub instance_id: String,
    pub num_variables: usize,
    pub solutions: usize,
    pub choices: usize,
    pub steps: usize,
    pub rounds: usize,
    /// Success probability of the unamplified portfolio state.
    pub p_bar: f64,
    pub p_amplified: f64,
    /// `sin²((2a+1)·arcsin√p̄)`.
    pub predicted: f64,
    pub optimal_rounds: usize,
    pub trajectory: Vec<f64>,
}

fn amplify(args: &AmplifyArgs, command: &Command) -> Result<(RunManifest, PathBuf)> {
    let choices = choice_source(args.choices, args.portfolio.as_deref(), args.seed)?;
    let (instances, _, _) =
        load_instances(args.instance.as_deref(), args.n, 1, args.ratio, args.seed)?;
    ensure!(
        instances.len() == 1,
        "--instance must name a single DIMACS file"
    );
    let inst = &instances[0];
    let steps = args.steps.unwrap_or(inst.prepared.num_variables());
    let choices: Vec<PhaseChoice> = choices.iter().map(|c| c.with_steps(steps)).collect();
    let weights = portfolio::uniform_weights(choices.len());
    let trajectory = QuantumPortfolio::new(&inst.prepared, &choices, &weights)?
        .amplification_trajectory(args.rounds)?;
    let p_bar = trajectory[0];
    let record = AmplifyRecord {
        schema: AMPLIFY_SCHEMA.to_string(),
        instance_id: inst.id.clone(),
        num_variables: inst.prepared.num_variables(),
        solutions: inst.prepared.solution_count(),
        choices: choices.len(),
        steps,
        rounds: args.rounds,
        p_bar,
        p_amplified: trajectory[args.rounds],
        predicted: portfolio::amplified_probability(p_bar, args.rounds),
        optimal_rounds: portfolio::optimal_rounds(p_bar),
        trajectory,
    };
    println!(
        "{}: p̄ = {:.6e}, after {} rounds {:.6} (best at {} rounds)",
        record.instance_id, record.p_bar, record.rounds, record.p_amplified, record.optimal_rounds
    );
    output::write_json(&args.out, &record)?;
    let mut manifest = RunManifest::new(command, AMPLIFY_SCHEMA)?;
    manifest.seeds.push(args.seed);
    manifest.seeds.extend(inst.seed);
    manifest.outputs = vec![args.out.clone()];
    Ok((manifest, manifest_path(&args.out, false)))
}
