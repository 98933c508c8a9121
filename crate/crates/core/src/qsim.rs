//! Dense state-vector simulation of amplitude amplification and of the
//! phase-parameterized SAT heuristic.
//!
//! A heuristic trial starts from the uniform superposition over all `2^n`
//! assignments and repeats, `steps` times,
//!
//! 1. a diagonal phase `exp(iπ·P_ρ(c/m))` depending on the conflict count `c`
//!    of each assignment, then
//! 2. a mixing operator `W·D·W`, where `W` is the normalized Walsh–Hadamard
//!    transform and `D = diag(exp(iπ·P_τ(b/n)))` depends on the bit weight `b`
//!    of the Walsh index. Its matrix elements depend only on the Hamming
//!    distance between the two assignments.
//!
//! Both polynomials take normalized arguments so one [`PhaseChoice`] applies
//! to instances of any size.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sat::{Assignment, SatInstance};

/// Largest register the simulator will allocate by default (2^26 amplitudes, 1 GiB).
pub const DEFAULT_MAX_QUBITS: usize = 26;

/// Default number of coefficients in each phase polynomial.
pub const DEFAULT_COEFFICIENTS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn uniform(qubits: usize) -> Result<Self> {
        Self::uniform_with_guard(qubits, DEFAULT_MAX_QUBITS)
    }

    pub fn uniform_with_guard(qubits: usize, max_qubits: usize) -> Result<Self> {
        check_qubits(qubits, max_qubits)?;
        let len = 1usize << qubits;
        let amp = Complex64::new((len as f64).sqrt().recip(), 0.0);
        Ok(Self {
            qubits,
            amplitudes: vec![amp; len],
        })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(qubits: usize, index: usize) -> Result<Self> {
        check_qubits(qubits, DEFAULT_MAX_QUBITS)?;
        let len = 1usize << qubits;
        if index >= len {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); len];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { qubits, amplitudes })
    }

    /// Wraps raw amplitudes; the length must be a power of two. The norm is
    /// not checked.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() || !amplitudes.len().is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "{} amplitudes is not a power of two",
                amplitudes.len()
            )));
        }
        let qubits = amplitudes.len().trailing_zeros() as usize;
        Ok(Self { qubits, amplitudes })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let scale = self.norm_sqr().sqrt().recip();
        self.amplitudes.iter_mut().for_each(|a| *a *= scale);
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

fn check_qubits(qubits: usize, max_qubits: usize) -> Result<()> {
    if qubits == 0 {
        return Err(Error::InvalidArgument(
            "a register needs at least one qubit".into(),
        ));
    }
    if qubits > max_qubits {
        return Err(Error::QubitGuard {
            requested: qubits,
            max: max_qubits,
        });
    }
    Ok(())
}

/// In-place Walsh–Hadamard butterflies without the `2^(-q/2)` normalization.
///
/// Works on the interleaved `f64` view: a complex stage of half-width `h` is
/// a real stage of half-width `2h`. Stages are fused in pairs (radix 4).
pub(crate) fn hadamard_butterflies(data: &mut [Complex64]) {
    debug_assert!(data.len().is_power_of_two());
    let x: &mut [f64] = bytemuck::cast_slice_mut(data);
    let len = x.len();
    let mut half = 2;
    while half * 4 <= len {
        if half == 2 {
            for c in x.chunks_exact_mut(8) {
                for k in 0..2 {
                    let (a, b, cc, d) = (c[k], c[k + 2], c[k + 4], c[k + 6]);
                    let (s0, s1, s2, s3) = (a + b, a - b, cc + d, cc - d);
                    c[k] = s0 + s2;
                    c[k + 2] = s1 + s3;
                    c[k + 4] = s0 - s2;
                    c[k + 6] = s1 - s3;
                }
            }
        } else {
            for block in x.chunks_exact_mut(4 * half) {
                let (ab, cd) = block.split_at_mut(2 * half);
                let (a, b) = ab.split_at_mut(half);
                let (c, d) = cd.split_at_mut(half);
                for (((a, b), c), d) in a.iter_mut().zip(b).zip(c).zip(d) {
                    let (s0, s1, s2, s3) = (*a + *b, *a - *b, *c + *d, *c - *d);
                    *a = s0 + s2;
                    *b = s1 + s3;
                    *c = s0 - s2;
                    *d = s1 - s3;
                }
            }
        }
        half *= 4;
    }
    if half < len {
        for block in x.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
    }
}

/// Normalized fast Walsh–Hadamard transform; its own inverse.
pub fn fwht(data: &mut [Complex64]) {
    assert!(
        data.len().is_power_of_two(),
        "length must be a power of two"
    );
    hadamard_butterflies(data);
    let scale = (data.len() as f64).sqrt().recip();
    data.iter_mut().for_each(|a| *a *= scale);
}

/// Evaluates `Σ c_k x^k`.
pub fn polynomial(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn phase_factor(coefficients: &[f64], x: f64) -> Complex64 {
    Complex64::from_polar(1.0, PI * polynomial(coefficients, x))
}

/// Parameters of one heuristic: conflict-phase polynomial `rho`, mixing-phase
/// polynomial `tau`, and trial length `steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseChoice {
    pub rho: Vec<f64>,
    pub tau: Vec<f64>,
    pub steps: usize,
}

impl PhaseChoice {
    pub fn new(rho: Vec<f64>, tau: Vec<f64>, steps: usize) -> Result<Self> {
        let choice = Self { rho, tau, steps };
        choice.validate()?;
        Ok(choice)
    }

    /// All-zero phases: every step is the identity.
    pub fn identity(steps: usize) -> Self {
        Self {
            rho: vec![0.0; DEFAULT_COEFFICIENTS],
            tau: vec![0.0; DEFAULT_COEFFICIENTS],
            steps,
        }
    }

    /// Coefficients drawn uniformly from `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, steps: usize) -> Self {
        let mut draw = || -> Vec<f64> {
            (0..DEFAULT_COEFFICIENTS)
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect()
        };
        let rho = draw();
        let tau = draw();
        Self { rho, tau, steps }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidArgument(
                "a trial needs at least one step".into(),
            ));
        }
        if self.rho.iter().chain(&self.tau).any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "phase coefficients must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.rho.iter().chain(&self.tau).all(|&c| c == 0.0)
    }

    /// `rho` followed by `tau`.
    pub fn coefficients(&self) -> Vec<f64> {
        self.rho.iter().chain(&self.tau).copied().collect()
    }

    /// Same shape and step count with new coefficients (`rho` then `tau`).
    pub fn with_coefficients(&self, coefficients: &[f64]) -> Self {
        assert_eq!(coefficients.len(), self.rho.len() + self.tau.len());
        let (rho, tau) = coefficients.split_at(self.rho.len());
        Self {
            rho: rho.to_vec(),
            tau: tau.to_vec(),
            steps: self.steps,
        }
    }

    pub fn with_steps(&self, steps: usize) -> Self {
        Self {
            steps,
            ..self.clone()
        }
    }
}

/// An instance together with the conflict count of every assignment.
#[derive(Debug, Clone)]
pub struct PreparedInstance {
    instance: SatInstance,
    conflicts: Vec<u16>,
    solution_count: usize,
}

impl PreparedInstance {
    pub fn new(instance: SatInstance) -> Result<Self> {
        check_qubits(instance.num_variables(), DEFAULT_MAX_QUBITS)?;
        let conflicts = instance.conflict_table()?;
        let solution_count = conflicts.iter().filter(|&&c| c == 0).count();
        Ok(Self {
            instance,
            conflicts,
            solution_count,
        })
    }

    pub fn instance(&self) -> &SatInstance {
        &self.instance
    }

    pub fn num_variables(&self) -> usize {
        self.instance.num_variables()
    }

    pub fn conflicts(&self) -> &[u16] {
        &self.conflicts
    }

    pub fn solution_count(&self) -> usize {
        self.solution_count
    }

    pub fn is_solvable(&self) -> bool {
        self.solution_count > 0
    }

    /// `S/N`.
    pub fn solution_fraction(&self) -> f64 {
        self.solution_count as f64 / self.conflicts.len() as f64
    }

    pub fn solutions(&self) -> Vec<Assignment> {
        self.conflicts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(bits, _)| Assignment::new(bits as u32, self.num_variables()).unwrap())
            .collect()
    }

    /// Probability that measuring `amplitudes` yields a solution; any bits
    /// above the assignment register (selector qubits) are marginalized.
    pub fn success_probability(&self, amplitudes: &[Complex64]) -> f64 {
        amplitudes
            .chunks_exact(self.conflicts.len())
            .map(|chunk| {
                chunk
                    .iter()
                    .zip(&self.conflicts)
                    .filter(|(_, &c)| c == 0)
                    .map(|(a, _)| a.norm_sqr())
                    .sum::<f64>()
            })
            .sum()
    }

    /// Flips the sign of every amplitude whose assignment part is a solution.
    pub(crate) fn flip_solutions(&self, amplitudes: &mut [Complex64]) {
        for chunk in amplitudes.chunks_exact_mut(self.conflicts.len()) {
            for (a, &c) in chunk.iter_mut().zip(&self.conflicts) {
                if c == 0 {
                    *a = -*a;
                }
            }
        }
    }
}

/// The unitary of one heuristic trial (without the initial superposition),
/// with its phase tables precomputed.
#[derive(Debug, Clone)]
pub struct TrialOperator<'a> {
    conflicts: &'a [u16],
    conflict_phase: Vec<Complex64>,
    /// Walsh-basis diagonal, pre-divided by `2^n` to fold in both transforms'
    /// normalization.
    mixing_phase: Vec<Complex64>,
    steps: usize,
    identity: bool,
}

impl<'a> TrialOperator<'a> {
    pub fn new(prepared: &'a PreparedInstance, choice: &PhaseChoice) -> Result<Self> {
        choice.validate()?;
        let n = prepared.num_variables();
        let m = prepared.instance().num_clauses();
        let conflict_phase = (0..=m)
            .map(|c| phase_factor(&choice.rho, if m == 0 { 0.0 } else { c as f64 / m as f64 }))
            .collect();
        let scale = ((1usize << n) as f64).recip();
        let mixing_phase = (0..=n)
            .map(|b| phase_factor(&choice.tau, b as f64 / n as f64) * scale)
            .collect();
        Ok(Self {
            conflicts: prepared.conflicts(),
            conflict_phase,
            mixing_phase,
            steps: choice.steps,
            identity: choice.is_identity(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.conflicts.len()
    }

    fn conflict_phase(&self, amps: &mut [Complex64], conjugate: bool) {
        for (a, &c) in amps.iter_mut().zip(self.conflicts) {
            let phase = self.conflict_phase[c as usize];
            *a *= if conjugate { phase.conj() } else { phase };
        }
    }

    fn mixing(&self, amps: &mut [Complex64], conjugate: bool) {
        hadamard_butterflies(amps);
        for (j, a) in amps.iter_mut().enumerate() {
            let phase = self.mixing_phase[j.count_ones() as usize];
            *a *= if conjugate { phase.conj() } else { phase };
        }
        hadamard_butterflies(amps);
    }

    pub fn apply(&self, amps: &mut [Complex64]) {
        assert_eq!(amps.len(), self.dimension());
        if self.identity {
            return;
        }
        for _ in 0..self.steps {
            self.conflict_phase(amps, false);
            self.mixing(amps, false);
        }
    }

    /// Exact inverse: reversed step order with conjugated phases.
    pub fn apply_inverse(&self, amps: &mut [Complex64]) {
        assert_eq!(amps.len(), self.dimension());
        if self.identity {
            return;
        }
        for _ in 0..self.steps {
            self.mixing(amps, true);
            self.conflict_phase(amps, true);
        }
    }
}

fn check_dimension(state: &StateVector, n: usize) -> Result<()> {
    if state.qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: state.qubits(),
        });
    }
    Ok(())
}

/// Multiplies amplitude `i` by `exp(iπ·P_ρ(c(i)/m))`.
pub fn apply_conflict_phase(
    state: &mut StateVector,
    instance: &SatInstance,
    rho: &[f64],
) -> Result<()> {
    check_dimension(state, instance.num_variables())?;
    let m = instance.num_clauses();
    let table: Vec<Complex64> = (0..=m)
        .map(|c| phase_factor(rho, if m == 0 { 0.0 } else { c as f64 / m as f64 }))
        .collect();
    let conflicts = instance.conflict_table()?;
    for (a, &c) in state.amplitudes.iter_mut().zip(&conflicts) {
        *a *= table[c as usize];
    }
    Ok(())
}

/// Applies `W·diag(exp(iπ·P_τ(b/n)))·W`.
pub fn apply_hamming_mixing(state: &mut StateVector, tau: &[f64], n: usize) -> Result<()> {
    check_dimension(state, n)?;
    let scale = ((1usize << n) as f64).recip();
    let table: Vec<Complex64> = (0..=n)
        .map(|b| phase_factor(tau, b as f64 / n as f64) * scale)
        .collect();
    let amps = state.amplitudes_mut();
    hadamard_butterflies(amps);
    for (j, a) in amps.iter_mut().enumerate() {
        *a *= table[j.count_ones() as usize];
    }
    hadamard_butterflies(amps);
    Ok(())
}

pub fn heuristic_trial(instance: &SatInstance, choice: &PhaseChoice) -> Result<StateVector> {
    heuristic_trial_prepared(&PreparedInstance::new(instance.clone())?, choice)
}

pub fn heuristic_trial_prepared(
    prepared: &PreparedInstance,
    choice: &PhaseChoice,
) -> Result<StateVector> {
    let op = TrialOperator::new(prepared, choice)?;
    let mut state = StateVector::uniform(prepared.num_variables())?;
    op.apply(state.amplitudes_mut());
    Ok(state)
}

/// Success probability of a single heuristic trial.
pub fn trial_success_probability(prepared: &PreparedInstance, choice: &PhaseChoice) -> Result<f64> {
    let state = heuristic_trial_prepared(prepared, choice)?;
    Ok(prepared.success_probability(state.amplitudes()))
}

/// `t` standard amplitude-amplification iterations (solution phase flip,
/// then inversion about the mean) applied to the uniform state.
pub fn grover_trial(n: usize, solutions: &[Assignment], t: u64) -> Result<StateVector> {
    if solutions.is_empty() {
        return Err(Error::NoSolutions);
    }
    let mut state = StateVector::uniform(n)?;
    let marked = solution_marks(n, solutions)?;
    let len = state.len() as f64;
    for _ in 0..t {
        let amps = state.amplitudes_mut();
        for (a, &hit) in amps.iter_mut().zip(&marked) {
            if hit {
                *a = -*a;
            }
        }
        let mean = amps.iter().sum::<Complex64>() / len;
        amps.iter_mut().for_each(|a| *a = 2.0 * mean - *a);
    }
    Ok(state)
}

fn solution_marks(n: usize, solutions: &[Assignment]) -> Result<Vec<bool>> {
    let mut marked = vec![false; 1usize << n];
    for s in solutions {
        let slot = marked.get_mut(s.bits() as usize).ok_or_else(|| {
            Error::InvalidArgument(format!("solution {:#b} out of range for n = {n}", s.bits()))
        })?;
        *slot = true;
    }
    Ok(marked)
}

/// Total probability of basis states whose low `q − selector_qubits` bits
/// form one of `solutions`.
pub fn success_probability(
    state: &StateVector,
    solutions: &[Assignment],
    selector_qubits: usize,
) -> Result<f64> {
    if selector_qubits >= state.qubits() {
        return Err(Error::InvalidArgument(format!(
            "{selector_qubits} selector qubits leave no assignment register"
        )));
    }
    let n = state.qubits() - selector_qubits;
    let marked = solution_marks(n, solutions)?;
    Ok(state
        .amplitudes()
        .chunks_exact(marked.len())
        .flat_map(|chunk| chunk.iter().zip(&marked))
        .filter(|(_, &hit)| hit)
        .map(|(a, _)| a.norm_sqr())
        .sum())
}
