//! Shared fixtures for the benchmarks.

use num_complex::Complex64;
use qportfolio::qsim::{PhaseChoice, PreparedInstance};
use qportfolio::sat::{self, HARD_RATIO};
use qportfolio::seeds;

/// First solvable hard-ratio instance of size `n` at or after `seed`.
pub fn solvable_instance(n: usize, seed: u64) -> PreparedInstance {
    (seed..)
        .map(|s| PreparedInstance::new(sat::random_instance(n, HARD_RATIO, s).unwrap()).unwrap())
        .find(PreparedInstance::is_solvable)
        .unwrap()
}

pub fn choice(seed: u64, steps: usize) -> PhaseChoice {
    PhaseChoice::random(&mut seeds::rng(seed), steps)
}

/// A deterministic unnormalized register.
pub fn amplitudes(qubits: usize) -> Vec<Complex64> {
    (0..1usize << qubits)
        .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.5).cos()))
        .collect()
}
