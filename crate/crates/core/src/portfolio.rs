//! Portfolios of phase choices.
//!
//! A fixed choice drawn once from a set with success-probability distribution
//! `f(p)` needs `⟨1/p⟩` trials on average. Drawing a fresh choice for every
//! trial (a mixed strategy) succeeds per trial with probability `⟨p⟩` and needs
//! `1/⟨p⟩ ≤ ⟨1/p⟩` trials. Running all choices at once in superposition, with
//! selector qubits indexing the choice, measures a solution with the same
//! probability `Σ|w_k|²p_k`; unlike the mixed strategy it is a single unitary
//! and can be amplified.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{
    self, PhaseChoice, PreparedInstance, StateVector, TrialOperator, DEFAULT_MAX_QUBITS,
};
use crate::sat::SatInstance;

/// Samples with `p` below this make the single-choice mean divergent.
pub const DEFAULT_DIVERGENCE_FLOOR: f64 = 1e-12;

/// Tolerance of the quantum/classical portfolio equivalence.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-10;

const WEIGHT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub choice_id: usize,
    pub p: f64,
}

/// Empirical `f(p)`: per-choice success probabilities with selection weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessDistribution {
    samples: Vec<Sample>,
    weights: Vec<f64>,
}

impl SuccessDistribution {
    /// Uniform weights.
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let k = samples.len();
        Self::with_weights(samples, vec![1.0 / k.max(1) as f64; k])
    }

    pub fn from_probabilities(probabilities: &[f64]) -> Result<Self> {
        Self::new(
            probabilities
                .iter()
                .enumerate()
                .map(|(choice_id, &p)| Sample { choice_id, p })
                .collect(),
        )
    }

    pub fn with_weights(samples: Vec<Sample>, weights: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("empty success distribution".into()));
        }
        if weights.len() != samples.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {} samples",
                weights.len(),
                samples.len()
            )));
        }
        if let Some(s) = samples.iter().find(|s| !(0.0..=1.0).contains(&s.p)) {
            return Err(Error::InvalidArgument(format!(
                "probability {} outside [0, 1]",
                s.p
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self { samples, weights })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn weighted(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.weights
            .iter()
            .copied()
            .zip(self.samples.iter().map(|s| s.p))
    }

    /// `⟨p⟩`.
    pub fn mean_probability(&self) -> f64 {
        self.weighted().map(|(w, p)| w * p).sum()
    }
}

/// Mean and spread of the number of trials until the first success.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyStats {
    pub mean: f64,
    pub variance: f64,
    pub std: f64,
    /// Some choice has (numerically) zero success probability, so the true
    /// mean is infinite; `mean` and `variance` are conditional on the rest.
    pub divergent: bool,
}

/// Runs every choice on the instance and records its success probability.
pub fn success_distribution(
    instance: &SatInstance,
    choices: &[PhaseChoice],
) -> Result<SuccessDistribution> {
    success_distribution_prepared(&PreparedInstance::new(instance.clone())?, choices)
}

pub fn success_distribution_prepared(
    prepared: &PreparedInstance,
    choices: &[PhaseChoice],
) -> Result<SuccessDistribution> {
    if !prepared.is_solvable() {
        return Err(Error::NoSolutions);
    }
    let samples = choices
        .par_iter()
        .enumerate()
        .map(|(choice_id, choice)| {
            qsim::trial_success_probability(prepared, choice).map(|p| Sample {
                choice_id,
                p: p.min(1.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SuccessDistribution::new(samples)
}

/// One choice drawn from the distribution and kept for every trial:
/// mean `⟨1/p⟩`, variance `⟨(1−p)/p²⟩ + (⟨1/p²⟩ − ⟨1/p⟩²)`.
pub fn single_choice_stats(dist: &SuccessDistribution, floor: f64) -> StrategyStats {
    let kept: Vec<(f64, f64)> = dist
        .weighted()
        .filter(|&(_, p)| p >= floor && p > 0.0)
        .collect();
    let divergent = kept.len() < dist.len();
    let mass: f64 = kept.iter().map(|(w, _)| w).sum();
    if mass <= 0.0 {
        return StrategyStats {
            mean: f64::INFINITY,
            variance: f64::INFINITY,
            std: f64::INFINITY,
            divergent: true,
        };
    }
    let (mut inv, mut inv_sq, mut geometric) = (0.0, 0.0, 0.0);
    for &(w, p) in &kept {
        let w = w / mass;
        inv += w / p;
        inv_sq += w / (p * p);
        geometric += w * (1.0 - p) / (p * p);
    }
    let variance = (geometric + (inv_sq - inv * inv)).max(0.0);
    StrategyStats {
        mean: inv,
        variance,
        std: variance.sqrt(),
        divergent,
    }
}

/// A fresh choice for every trial: trials are geometric with success `⟨p⟩`.
pub fn mixed_strategy_stats(dist: &SuccessDistribution) -> Result<StrategyStats> {
    let p = dist.mean_probability();
    if !(p > 0.0) {
        return Err(Error::ZeroSuccess);
    }
    let mean = p.recip();
    let std = mean * (1.0 - p).max(0.0).sqrt();
    Ok(StrategyStats {
        mean,
        variance: std * std,
        std,
        divergent: false,
    })
}

/// `⟨1/p⟩ − 1/⟨p⟩`, zero only for a single-valued distribution.
///
/// Evaluated as `Σᵢⱼ wᵢwⱼ(pᵢ − pⱼ)²/(pᵢpⱼ) / 2⟨p⟩`, which cannot go negative
/// through cancellation the way the direct difference does for small `p`.
pub fn jensen_gap(dist: &SuccessDistribution) -> Result<f64> {
    if dist.samples.iter().any(|s| !(s.p > 0.0)) {
        return Err(Error::ZeroSample);
    }
    let pairs: Vec<(f64, f64)> = dist.weighted().collect();
    let mut spread = 0.0;
    for (i, &(wi, pi)) in pairs.iter().enumerate() {
        for &(wj, pj) in &pairs[i + 1..] {
            let d = pi - pj;
            spread += wi * wj * d * d / (pi * pj);
        }
    }
    Ok(spread / dist.mean_probability())
}

/// `1/√K` for each of `K` choices.
pub fn uniform_weights(k: usize) -> Vec<Complex64> {
    vec![Complex64::new((k as f64).sqrt().recip(), 0.0); k]
}

/// Selector register width `⌈log₂ K⌉`.
pub fn selector_width(choices: usize) -> usize {
    choices.max(1).next_power_of_two().trailing_zeros() as usize
}

/// A unitary `V` on the selector register with `V|0⟩ = w`: a Householder
/// reflection exchanging `|0⟩` and `e^{-iφ}w`, times the global phase `e^{iφ}`
/// of `w₀`.
#[derive(Debug, Clone)]
struct SelectorUnitary {
    phase: Complex64,
    reflector: Option<Vec<Complex64>>,
}

impl SelectorUnitary {
    fn new(weights: &[Complex64]) -> Self {
        let phase = if weights[0].norm() > 0.0 {
            weights[0] / weights[0].norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let mut v: Vec<Complex64> = weights.iter().map(|w| -w * phase.conj()).collect();
        v[0] += 1.0;
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let reflector = (norm > 1e-15).then(|| v.into_iter().map(|x| x / norm).collect());
        Self { phase, reflector }
    }

    /// Applies `V` (or `V†`) to the selector index of `amps`, laid out as
    /// `selector · block + assignment`.
    fn apply(&self, amps: &mut [Complex64], block: usize, adjoint: bool) {
        if let Some(u) = &self.reflector {
            let mut projection = vec![Complex64::new(0.0, 0.0); block];
            for (uk, slice) in u.iter().zip(amps.chunks_exact(block)) {
                if uk.norm_sqr() == 0.0 {
                    continue;
                }
                let uk = uk.conj();
                for (acc, a) in projection.iter_mut().zip(slice) {
                    *acc += uk * a;
                }
            }
            for (uk, slice) in u.iter().zip(amps.chunks_exact_mut(block)) {
                if uk.norm_sqr() == 0.0 {
                    continue;
                }
                let f = 2.0 * uk;
                for (a, acc) in slice.iter_mut().zip(&projection) {
                    *a -= f * acc;
                }
            }
        }
        let phase = if adjoint {
            self.phase.conj()
        } else {
            self.phase
        };
        if phase != Complex64::new(1.0, 0.0) {
            amps.iter_mut().for_each(|a| *a *= phase);
        }
    }
}

/// Several phase choices run in superposition on one instance.
///
/// The preparation operator is
/// `A = (controlled trial_k) · (I ⊗ W) · (V ⊗ I)`, so
/// `A|0,0⟩ = Σ_k w_k |k⟩ ⊗ trial_k|uniform⟩`. Choices are padded with
/// zero-weight identity choices up to a power of two.
#[derive(Debug, Clone)]
pub struct QuantumPortfolio<'a> {
    prepared: &'a PreparedInstance,
    operators: Vec<TrialOperator<'a>>,
    weights: Vec<Complex64>,
    selector_qubits: usize,
    selector: SelectorUnitary,
}

impl<'a> QuantumPortfolio<'a> {
    pub fn new(
        prepared: &'a PreparedInstance,
        choices: &[PhaseChoice],
        weights: &[Complex64],
    ) -> Result<Self> {
        if choices.is_empty() {
            return Err(Error::InvalidArgument(
                "a portfolio needs at least one choice".into(),
            ));
        }
        if weights.len() != choices.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {} choices",
                weights.len(),
                choices.len()
            )));
        }
        let norm: f64 = weights.iter().map(|w| w.norm_sqr()).sum();
        if !((norm - 1.0).abs() <= WEIGHT_TOLERANCE) {
            return Err(Error::WeightsNotNormalized(norm));
        }
        let selector_qubits = selector_width(choices.len());
        let qubits = prepared.num_variables() + selector_qubits;
        if qubits > DEFAULT_MAX_QUBITS {
            return Err(Error::QubitGuard {
                requested: qubits,
                max: DEFAULT_MAX_QUBITS,
            });
        }

        let slots = 1usize << selector_qubits;
        let identity = PhaseChoice::identity(1);
        let operators = (0..slots)
            .map(|k| TrialOperator::new(prepared, choices.get(k).unwrap_or(&identity)))
            .collect::<Result<Vec<_>>>()?;
        let mut weights = weights.to_vec();
        weights.resize(slots, Complex64::new(0.0, 0.0));
        let selector = SelectorUnitary::new(&weights);
        Ok(Self {
            prepared,
            operators,
            weights,
            selector_qubits,
            selector,
        })
    }

    pub fn selector_qubits(&self) -> usize {
        self.selector_qubits
    }

    pub fn qubits(&self) -> usize {
        self.prepared.num_variables() + self.selector_qubits
    }

    fn block(&self) -> usize {
        self.prepared.conflicts().len()
    }

    /// `A|0,0⟩`, built branch by branch.
    pub fn state(&self) -> StateVector {
        let block = self.block();
        let amp = (block as f64).sqrt().recip();
        let mut amps = vec![Complex64::new(0.0, 0.0); block << self.selector_qubits];
        for ((slice, op), w) in amps
            .chunks_exact_mut(block)
            .zip(&self.operators)
            .zip(&self.weights)
        {
            if w.norm_sqr() == 0.0 {
                continue;
            }
            slice.iter_mut().for_each(|a| *a = w * amp);
            op.apply(slice);
        }
        StateVector::from_amplitudes(amps).expect("power-of-two register")
    }

    /// Applies `A` to an arbitrary joint state.
    pub fn apply_preparation(&self, amps: &mut [Complex64]) {
        let block = self.block();
        self.selector.apply(amps, block, false);
        for (slice, op) in amps.chunks_exact_mut(block).zip(&self.operators) {
            qsim::fwht(slice);
            op.apply(slice);
        }
    }

    /// Applies `A⁻¹`, the exactly reversed sequence.
    pub fn apply_preparation_inverse(&self, amps: &mut [Complex64]) {
        let block = self.block();
        for (slice, op) in amps.chunks_exact_mut(block).zip(&self.operators) {
            op.apply_inverse(slice);
            qsim::fwht(slice);
        }
        self.selector.apply(amps, block, true);
    }

    /// One amplification round `Q = −A·S₀·A⁻¹·S_sol`.
    pub fn amplify(&self, amps: &mut [Complex64]) {
        self.prepared.flip_solutions(amps);
        self.apply_preparation_inverse(amps);
        amps[0] = -amps[0];
        self.apply_preparation(amps);
        amps.iter_mut().for_each(|a| *a = -*a);
    }

    pub fn success_probability(&self, state: &StateVector) -> f64 {
        self.prepared.success_probability(state.amplitudes())
    }

    /// Success probability after `0, 1, …, rounds` amplification rounds.
    pub fn amplification_trajectory(&self, rounds: usize) -> Result<Vec<f64>> {
        let mut state = self.state();
        let mut out = Vec::with_capacity(rounds + 1);
        let p0 = self.success_probability(&state);
        if !(p0 > 0.0) {
            return Err(Error::ZeroSuccess);
        }
        out.push(p0);
        for _ in 0..rounds {
            self.amplify(state.amplitudes_mut());
            out.push(self.success_probability(&state));
        }
        Ok(out)
    }
}

/// `Σ_k w_k Σ_i c_i^(k) |i, k⟩` with the selector in the high bits.
pub fn portfolio_state(
    instance: &SatInstance,
    choices: &[PhaseChoice],
    weights: &[Complex64],
) -> Result<StateVector> {
    let prepared = PreparedInstance::new(instance.clone())?;
    Ok(QuantumPortfolio::new(&prepared, choices, weights)?.state())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// Measured on the superposed portfolio state.
    pub p_quantum: f64,
    /// `Σ|w_k|² p_k` from separately simulated choices.
    pub p_weighted: f64,
    pub difference: f64,
}

/// Checks that the quantum portfolio succeeds with the weighted-sum
/// probability of its members.
pub fn equivalence_check(
    instance: &SatInstance,
    choices: &[PhaseChoice],
    weights: &[Complex64],
) -> Result<EquivalenceReport> {
    let prepared = PreparedInstance::new(instance.clone())?;
    equivalence_check_prepared(&prepared, choices, weights)
}

pub fn equivalence_check_prepared(
    prepared: &PreparedInstance,
    choices: &[PhaseChoice],
    weights: &[Complex64],
) -> Result<EquivalenceReport> {
    let portfolio = QuantumPortfolio::new(prepared, choices, weights)?;
    let p_quantum = portfolio.success_probability(&portfolio.state());
    let p_weighted = choices
        .iter()
        .zip(weights)
        .map(|(c, w)| qsim::trial_success_probability(prepared, c).map(|p| w.norm_sqr() * p))
        .sum::<Result<f64>>()?;
    let difference = (p_quantum - p_weighted).abs();
    if difference > EQUIVALENCE_TOLERANCE {
        return Err(Error::EquivalenceViolation(difference));
    }
    Ok(EquivalenceReport {
        p_quantum,
        p_weighted,
        difference,
    })
}

/// Success probability of the portfolio after `rounds` amplification rounds.
pub fn amplified_portfolio(
    instance: &SatInstance,
    choices: &[PhaseChoice],
    weights: &[Complex64],
    rounds: usize,
) -> Result<f64> {
    let prepared = PreparedInstance::new(instance.clone())?;
    let trajectory =
        QuantumPortfolio::new(&prepared, choices, weights)?.amplification_trajectory(rounds)?;
    Ok(trajectory[rounds])
}

/// `sin²((2a+1)·arcsin√p̄)`.
pub fn amplified_probability(p_bar: f64, rounds: usize) -> f64 {
    let theta = p_bar.clamp(0.0, 1.0).sqrt().asin();
    ((2 * rounds + 1) as f64 * theta)
        .sin()
        .powi(2)
        .clamp(0.0, 1.0)
}

/// Rounds that bring a portfolio of success probability `p̄` closest to certainty.
pub fn optimal_rounds(p_bar: f64) -> usize {
    let theta = p_bar.clamp(0.0, 1.0).sqrt().asin();
    if theta <= 0.0 {
        return 0;
    }
    (std::f64::consts::PI / (4.0 * theta) - 0.5)
        .round()
        .max(0.0) as usize
}
