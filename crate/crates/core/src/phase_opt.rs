//! Training phase choices on small instances and evaluating the resulting
//! portfolios on larger ones.
//!
//! Training maximizes the mean single-trial success probability over a sample
//! of solvable random instances with a coordinate pattern search started from
//! several random points. The local optima form a [`PortfolioSet`], which
//! [`cross_size_eval`] scores on fresh instances of another size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::portfolio::{
    jensen_gap, mixed_strategy_stats, single_choice_stats, success_distribution_prepared, Sample,
    StrategyStats, DEFAULT_DIVERGENCE_FLOOR,
};
use crate::qsim::{self, PhaseChoice, PreparedInstance};
use crate::sat::{self, SatInstance};
use crate::seeds::{self, stream};

/// Starting step of the pattern search, in units of π radians.
pub const INITIAL_STEP: f64 = 0.5;

/// The search stops once the step falls below this.
pub const MIN_STEP: f64 = 1e-4;

/// Two local optima closer than this (max-norm) count as one choice.
pub const DEDUP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub train_n: usize,
    pub train_count: usize,
    pub ratio: f64,
    pub restarts: usize,
    /// Objective evaluations per restart, including the initial point.
    pub budget: usize,
    pub seed: u64,
    /// Trial length; `None` uses `train_n`.
    pub steps: Option<usize>,
}

impl TrainingConfig {
    pub fn new(train_n: usize, seed: u64) -> Self {
        Self {
            train_n,
            train_count: 20,
            ratio: sat::HARD_RATIO,
            restarts: 10,
            budget: 500,
            seed,
            steps: None,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps.unwrap_or(self.train_n)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("train_n", self.train_n),
            ("train_count", self.train_count),
            ("restarts", self.restarts),
            ("budget", self.budget),
            ("steps", self.steps()),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be positive")));
        }
        if !(self.ratio > 0.0 && self.ratio.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "ratio {} must be positive",
                self.ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub train_n: usize,
    pub seed: u64,
    pub restart: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioChoice {
    #[serde(flatten)]
    pub choice: PhaseChoice,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSet {
    pub id: String,
    pub choices: Vec<PortfolioChoice>,
}

impl PortfolioSet {
    pub fn phase_choices(&self) -> Vec<PhaseChoice> {
        self.choices.iter().map(|c| c.choice.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.choices.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "portfolio {} is empty",
                self.id
            )));
        }
        self.choices.iter().try_for_each(|c| c.choice.validate())
    }
}

/// A generated instance that passed the solvability filter.
#[derive(Debug, Clone)]
pub struct SampledInstance {
    pub id: String,
    pub seed: u64,
    pub prepared: PreparedInstance,
}

#[derive(Debug, Clone)]
pub struct InstanceSample {
    pub instances: Vec<SampledInstance>,
    pub excluded_unsat: usize,
}

/// Generates random instances from `(seed, stream, index)` seeds until `count`
/// solvable ones are found, skipping unsatisfiable ones. Gives up after
/// `50·count + 100` draws and returns what it has, unless that is nothing.
pub fn solvable_instances(
    n: usize,
    count: usize,
    ratio: f64,
    seed: u64,
    stream: u64,
) -> Result<InstanceSample> {
    let max_draws = 50 * count + 100;
    let mut instances = Vec::with_capacity(count);
    let mut excluded_unsat = 0;
    let mut draws = 0;
    while instances.len() < count && draws < max_draws {
        let instance_seed = seeds::derive_seed(seed, stream, draws as u64);
        let prepared = PreparedInstance::new(sat::random_instance(n, ratio, instance_seed)?)?;
        if prepared.is_solvable() {
            instances.push(SampledInstance {
                id: format!("n{n}-s{stream}-{draws:04}"),
                seed: instance_seed,
                prepared,
            });
        } else {
            excluded_unsat += 1;
        }
        draws += 1;
    }
    if instances.is_empty() {
        return Err(Error::NoSolvableInstances { tried: draws });
    }
    Ok(InstanceSample {
        instances,
        excluded_unsat,
    })
}

/// Mean single-trial success probability over `instances`.
pub fn objective(choice: &PhaseChoice, instances: &[SatInstance]) -> Result<f64> {
    let prepared = instances
        .iter()
        .map(|i| PreparedInstance::new(i.clone()))
        .collect::<Result<Vec<_>>>()?;
    objective_prepared(choice, &prepared)
}

pub fn objective_prepared(choice: &PhaseChoice, instances: &[PreparedInstance]) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::InvalidArgument(
            "objective over an empty instance list".into(),
        ));
    }
    let terms = instances
        .par_iter()
        .map(|p| qsim::trial_success_probability(p, choice))
        .collect::<Result<Vec<f64>>>()?;
    // Summed in a fixed order so thread scheduling cannot change the result.
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Coordinate pattern search maximizing `f`: try `±step` along every
/// coordinate, move to the best strict improvement, otherwise halve the step.
/// Stops after `budget` evaluations (the initial point counts as one) or once
/// the step drops below `min_step`.
pub fn pattern_search<F>(
    mut f: F,
    initial: &[f64],
    budget: usize,
    initial_step: f64,
    min_step: f64,
) -> Result<SearchOutcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut best = initial.to_vec();
    let mut value = f(&best)?;
    let mut evaluations = 1;
    let mut step = initial_step;

    while evaluations < budget && step >= min_step {
        let mut candidate_best: Option<(Vec<f64>, f64)> = None;
        'sweep: for i in 0..best.len() {
            for sign in [1.0, -1.0] {
                if evaluations >= budget {
                    break 'sweep;
                }
                let mut candidate = best.clone();
                candidate[i] += sign * step;
                let v = f(&candidate)?;
                evaluations += 1;
                if candidate_best.as_ref().map_or(true, |(_, bv)| v > *bv) {
                    candidate_best = Some((candidate, v));
                }
            }
        }
        match candidate_best {
            Some((candidate, v)) if v > value => {
                best = candidate;
                value = v;
            }
            _ => step *= 0.5,
        }
    }
    Ok(SearchOutcome {
        best,
        value,
        evaluations,
    })
}

/// Pattern search over the phase coefficients of `initial` (its step count is
/// kept fixed) on prepared training instances.
pub fn optimize_on(
    instances: &[PreparedInstance],
    initial: &PhaseChoice,
    budget: usize,
) -> Result<(PhaseChoice, f64)> {
    initial.validate()?;
    let outcome = pattern_search(
        |coefficients| objective_prepared(&initial.with_coefficients(coefficients), instances),
        &initial.coefficients(),
        budget,
        INITIAL_STEP,
        MIN_STEP,
    )?;
    Ok((initial.with_coefficients(&outcome.best), outcome.value))
}

pub fn training_set(config: &TrainingConfig) -> Result<InstanceSample> {
    config.validate()?;
    solvable_instances(
        config.train_n,
        config.train_count,
        config.ratio,
        config.seed,
        stream::TRAINING,
    )
}

fn prepared(sample: &InstanceSample) -> Vec<PreparedInstance> {
    sample
        .instances
        .iter()
        .map(|i| i.prepared.clone())
        .collect()
}

/// Improves `initial` on the training set described by `config`.
pub fn optimize(config: &TrainingConfig, initial: &PhaseChoice) -> Result<PhaseChoice> {
    let instances = prepared(&training_set(config)?);
    optimize_on(&instances, initial, config.budget).map(|(choice, _)| choice)
}

/// The random starting point of restart `restart`.
pub fn initial_choice(config: &TrainingConfig, restart: usize) -> PhaseChoice {
    let mut rng = seeds::rng(seeds::derive_seed(
        config.seed,
        stream::RESTARTS,
        restart as u64,
    ));
    PhaseChoice::random(&mut rng, config.steps())
}

/// Optimizes from `config.restarts` random starting points and keeps the
/// distinct local optima, in restart order.
pub fn build_portfolio(config: &TrainingConfig) -> Result<PortfolioSet> {
    let instances = prepared(&training_set(config)?);
    let optima = (0..config.restarts)
        .into_par_iter()
        .map(|restart| {
            optimize_on(&instances, &initial_choice(config, restart), config.budget)
                .map(|(choice, value)| (restart, choice, value))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut choices: Vec<PortfolioChoice> = Vec::new();
    for (restart, choice, objective) in optima {
        let coefficients = choice.coefficients();
        let duplicate = choices.iter().any(|kept| {
            kept.choice
                .coefficients()
                .iter()
                .zip(&coefficients)
                .all(|(a, b)| (a - b).abs() <= DEDUP_TOLERANCE)
        });
        if !duplicate {
            choices.push(PortfolioChoice {
                choice,
                provenance: Provenance {
                    train_n: config.train_n,
                    seed: config.seed,
                    restart,
                    objective,
                },
            });
        }
    }
    Ok(PortfolioSet {
        id: format!("train-n{}-seed{}", config.train_n, config.seed),
        choices,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub test_n: usize,
    pub test_count: usize,
    pub ratio: f64,
    pub seed: u64,
    /// Trial length on the test instances; `None` uses `test_n`.
    pub steps: Option<usize>,
}

impl EvalConfig {
    pub fn new(test_n: usize, test_count: usize, seed: u64) -> Self {
        Self {
            test_n,
            test_count,
            ratio: sat::HARD_RATIO,
            seed,
            steps: None,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps.unwrap_or(self.test_n)
    }
}

/// Portfolio statistics on one test instance. Means are in trials
/// (measurements); the `*_iterations` fields multiply by the trial length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance_id: String,
    pub seed: u64,
    pub solutions: usize,
    pub samples: Vec<Sample>,
    pub single: StrategyStats,
    pub mixed: StrategyStats,
    pub jensen_gap: Option<f64>,
    pub single_mean_iterations: f64,
    pub mixed_mean_iterations: f64,
    /// Mixed-strategy mean is no larger than the single-choice mean (or the
    /// latter diverges).
    pub mixed_not_worse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub test_n: usize,
    pub portfolio_id: String,
    pub steps: usize,
    pub instance_count: usize,
    pub median_single_mean: f64,
    pub median_mixed_mean: f64,
    pub median_jensen_gap: Option<f64>,
    pub excluded_unsat_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub records: Vec<InstanceRecord>,
    pub aggregate: Aggregate,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 0 {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    })
}

/// Statistics of one choice set on one prepared instance.
pub fn instance_record(
    id: &str,
    seed: u64,
    prepared: &PreparedInstance,
    choices: &[PhaseChoice],
) -> Result<InstanceRecord> {
    let dist = success_distribution_prepared(prepared, choices)?;
    let single = single_choice_stats(&dist, DEFAULT_DIVERGENCE_FLOOR);
    let mixed = mixed_strategy_stats(&dist)?;
    let gap = jensen_gap(&dist).ok();
    let steps = choices.iter().map(|c| c.steps as f64).sum::<f64>() / choices.len() as f64;
    Ok(InstanceRecord {
        instance_id: id.to_string(),
        seed,
        solutions: prepared.solution_count(),
        samples: dist.samples().to_vec(),
        single,
        mixed,
        jensen_gap: gap,
        single_mean_iterations: single.mean * steps,
        mixed_mean_iterations: mixed.mean * steps,
        mixed_not_worse: single.divergent || mixed.mean <= single.mean,
    })
}

pub fn evaluate_on(
    portfolio: &PortfolioSet,
    sample: &InstanceSample,
    test_n: usize,
    steps: usize,
) -> Result<EvalReport> {
    portfolio.validate()?;
    let choices: Vec<PhaseChoice> = portfolio
        .phase_choices()
        .iter()
        .map(|c| c.with_steps(steps))
        .collect();
    let records = sample
        .instances
        .iter()
        .map(|inst| instance_record(&inst.id, inst.seed, &inst.prepared, &choices))
        .collect::<Result<Vec<_>>>()?;

    let singles: Vec<f64> = records.iter().map(|r| r.single.mean).collect();
    let mixed: Vec<f64> = records.iter().map(|r| r.mixed.mean).collect();
    let gaps: Vec<f64> = records.iter().filter_map(|r| r.jensen_gap).collect();
    let aggregate = Aggregate {
        test_n,
        portfolio_id: portfolio.id.clone(),
        steps,
        instance_count: records.len(),
        median_single_mean: median(&singles).unwrap_or(f64::NAN),
        median_mixed_mean: median(&mixed).unwrap_or(f64::NAN),
        median_jensen_gap: median(&gaps),
        excluded_unsat_count: sample.excluded_unsat,
    };
    Ok(EvalReport { records, aggregate })
}

/// Held-out instances for evaluation; their seeds come from a stream that
/// training never uses.
pub fn held_out_instances(config: &EvalConfig) -> Result<InstanceSample> {
    if config.test_count == 0 {
        return Err(Error::InvalidArgument("test_count must be positive".into()));
    }
    solvable_instances(
        config.test_n,
        config.test_count,
        config.ratio,
        config.seed,
        stream::HELD_OUT,
    )
}

/// Scores a portfolio on fresh solvable instances of size `test_n`.
pub fn cross_size_eval(portfolio: &PortfolioSet, config: &EvalConfig) -> Result<EvalReport> {
    let sample = held_out_instances(config)?;
    evaluate_on(portfolio, &sample, config.test_n, config.steps())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferComparison {
    pub portfolio_ids: Vec<String>,
    pub median_mixed_means: Vec<f64>,
    pub median_single_means: Vec<f64>,
    /// Portfolio with the smallest median mixed mean.
    pub best: String,
}

/// Side-by-side medians of reports over the same test instances.
pub fn compare_reports(reports: &[EvalReport]) -> Result<TransferComparison> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to compare".into()))?;
    let ids: Vec<&str> = first
        .records
        .iter()
        .map(|r| r.instance_id.as_str())
        .collect();
    if reports.iter().any(|r| {
        r.records
            .iter()
            .map(|x| x.instance_id.as_str())
            .ne(ids.iter().copied())
    }) {
        return Err(Error::InvalidArgument(
            "reports cover different test instances".into(),
        ));
    }
    let best = reports
        .iter()
        .min_by(|a, b| {
            a.aggregate
                .median_mixed_mean
                .total_cmp(&b.aggregate.median_mixed_mean)
        })
        .map(|r| r.aggregate.portfolio_id.clone())
        .unwrap_or_default();
    Ok(TransferComparison {
        portfolio_ids: reports
            .iter()
            .map(|r| r.aggregate.portfolio_id.clone())
            .collect(),
        median_mixed_means: reports
            .iter()
            .map(|r| r.aggregate.median_mixed_mean)
            .collect(),
        median_single_means: reports
            .iter()
            .map(|r| r.aggregate.median_single_mean)
            .collect(),
        best,
    })
}
