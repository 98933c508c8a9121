//! Random k-SAT instances, conflict counting, exhaustive solution search and
//! DIMACS CNF input/output.

use std::fmt::Write as _;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;

/// Largest supported variable count; assignments are stored in a `u32`.
pub const MAX_VARIABLES: usize = 30;

/// Largest variable count for which exhaustive enumeration is allowed.
pub const MAX_ENUMERATION_VARIABLES: usize = 24;

/// Clause/variable ratio with a high concentration of hard random 3-SAT instances.
pub const HARD_RATIO: f64 = 4.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub var: u32,
    pub negated: bool,
}

impl Literal {
    pub fn new(var: u32, negated: bool) -> Self {
        Self { var, negated }
    }

    pub fn positive(var: u32) -> Self {
        Self::new(var, false)
    }

    pub fn negative(var: u32) -> Self {
        Self::new(var, true)
    }

    pub fn is_satisfied_by(self, assignment: Assignment) -> bool {
        assignment.value(self.var) != self.negated
    }

    /// Signed, 1-based DIMACS form.
    pub fn to_dimacs(self) -> i64 {
        let v = self.var as i64 + 1;
        if self.negated {
            -v
        } else {
            v
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    /// Builds a clause; variables must be pairwise distinct.
    pub fn new(literals: Vec<Literal>) -> Result<Self> {
        for (i, a) in literals.iter().enumerate() {
            if literals[..i].iter().any(|b| b.var == a.var) {
                return Err(Error::InvalidArgument(format!(
                    "variable {} repeated within a clause",
                    a.var + 1
                )));
            }
        }
        Ok(Self { literals })
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn is_satisfied_by(&self, assignment: Assignment) -> bool {
        self.literals.iter().any(|l| l.is_satisfied_by(assignment))
    }

    /// `(mask, pattern)` such that the clause is violated exactly when
    /// `bits & mask == pattern`.
    fn violation_mask(&self) -> (u32, u32) {
        self.literals.iter().fold((0, 0), |(mask, pattern), l| {
            let bit = 1u32 << l.var;
            (mask | bit, if l.negated { pattern | bit } else { pattern })
        })
    }
}

/// A truth value per variable, packed as bit `i` = variable `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(u32);

impl Assignment {
    pub fn new(bits: u32, n: usize) -> Result<Self> {
        if n < 32 && (bits as u64) >= 1u64 << n {
            return Err(Error::InvalidArgument(format!(
                "assignment {bits:#b} has bits beyond {n} variables"
            )));
        }
        Ok(Self(bits))
    }

    /// Builds an assignment from per-variable truth values.
    pub fn from_values(values: &[bool]) -> Self {
        Self(
            values
                .iter()
                .enumerate()
                .fold(0, |acc, (i, &v)| if v { acc | 1 << i } else { acc }),
        )
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn value(self, var: u32) -> bool {
        (self.0 >> var) & 1 == 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatInstance {
    n: usize,
    clauses: Vec<Clause>,
}

impl SatInstance {
    pub fn new(n: usize, clauses: Vec<Clause>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "an instance needs at least one variable".into(),
            ));
        }
        if n > MAX_VARIABLES {
            return Err(Error::TooManyVariables {
                requested: n,
                max: MAX_VARIABLES,
            });
        }
        if clauses.len() > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!(
                "{} clauses is too many",
                clauses.len()
            )));
        }
        for clause in &clauses {
            if let Some(l) = clause.literals().iter().find(|l| l.var as usize >= n) {
                return Err(Error::InvalidArgument(format!(
                    "variable {} out of range for n = {n}",
                    l.var + 1
                )));
            }
        }
        Ok(Self { n, clauses })
    }

    pub fn num_variables(&self) -> usize {
        self.n
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn num_assignments(&self) -> usize {
        1usize << self.n
    }

    /// Number of clauses the assignment leaves unsatisfied.
    pub fn conflicts(&self, assignment: Assignment) -> usize {
        self.clauses
            .iter()
            .filter(|c| !c.is_satisfied_by(assignment))
            .count()
    }

    /// Conflict count of every assignment, indexed by its bits.
    pub fn conflict_table(&self) -> Result<Vec<u16>> {
        if self.n > MAX_ENUMERATION_VARIABLES + 2 {
            return Err(Error::TooManyVariables {
                requested: self.n,
                max: MAX_ENUMERATION_VARIABLES + 2,
            });
        }
        let masks: Vec<(u32, u32)> = self.clauses.iter().map(Clause::violation_mask).collect();
        Ok((0..1u32 << self.n)
            .map(|bits| {
                masks
                    .iter()
                    .filter(|&&(mask, pattern)| bits & mask == pattern)
                    .count() as u16
            })
            .collect())
    }

    /// All satisfying assignments in increasing order, by enumeration.
    pub fn solutions(&self) -> Result<Vec<Assignment>> {
        if self.n > MAX_ENUMERATION_VARIABLES {
            return Err(Error::TooManyVariables {
                requested: self.n,
                max: MAX_ENUMERATION_VARIABLES,
            });
        }
        Ok(self
            .conflict_table()?
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(bits, _)| Assignment(bits as u32))
            .collect())
    }

    /// Renames variable `v` to `perm[v]`.
    pub fn relabel(&self, perm: &[u32]) -> Result<Self> {
        let mut sorted = perm.to_vec();
        sorted.sort_unstable();
        if perm.len() != self.n || sorted.iter().enumerate().any(|(i, &v)| v as usize != i) {
            return Err(Error::InvalidArgument(
                "relabeling is not a permutation".into(),
            ));
        }
        let clauses = self
            .clauses
            .iter()
            .map(|c| Clause {
                literals: c
                    .literals
                    .iter()
                    .map(|l| Literal::new(perm[l.var as usize], l.negated))
                    .collect(),
            })
            .collect();
        Ok(Self { n: self.n, clauses })
    }
}

/// Clause count for a ratio, rounding half to even.
pub fn clause_count(n: usize, ratio: f64) -> usize {
    (ratio * n as f64).round_ties_even() as usize
}

/// Random 3-SAT: `round(ratio·n)` clauses, each over 3 distinct uniformly
/// chosen variables with independent fair negations.
pub fn random_instance(n: usize, ratio: f64, seed: u64) -> Result<SatInstance> {
    random_k_instance(n, 3, ratio, seed)
}

pub fn random_k_instance(n: usize, k: usize, ratio: f64, seed: u64) -> Result<SatInstance> {
    if k == 0 || n < k {
        return Err(Error::InvalidArgument(format!(
            "random {k}-SAT needs at least {k} variables, got {n}"
        )));
    }
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "clause ratio {ratio} must be positive"
        )));
    }
    let m = clause_count(n, ratio);
    if m == 0 {
        return Err(Error::InvalidArgument(format!(
            "ratio {ratio} gives no clauses at n = {n}"
        )));
    }
    if n > MAX_VARIABLES {
        return Err(Error::TooManyVariables {
            requested: n,
            max: MAX_VARIABLES,
        });
    }

    let mut rng = seeds::rng(seed);
    let clauses = (0..m)
        .map(|_| {
            let mut vars = index::sample(&mut rng, n, k).into_vec();
            vars.sort_unstable();
            let literals = vars
                .into_iter()
                .map(|v| Literal::new(v as u32, rand::Rng::random_bool(&mut rng, 0.5)))
                .collect();
            Clause { literals }
        })
        .collect();
    SatInstance::new(n, clauses)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimacsOptions {
    /// Required clause arity; `None` accepts any.
    pub arity: Option<usize>,
}

impl Default for DimacsOptions {
    fn default() -> Self {
        Self { arity: Some(3) }
    }
}

impl DimacsOptions {
    pub fn any_arity() -> Self {
        Self { arity: None }
    }
}

pub fn read_dimacs(text: &str, options: DimacsOptions) -> Result<SatInstance> {
    let err = |line: usize, message: String| Error::Dimacs { line, message };

    let mut header: Option<(usize, usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut current_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        // SATLIB end-of-data marker.
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(err(line_no, "duplicate header".into()));
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 || fields[0] != "p" || fields[1] != "cnf" {
                return Err(err(line_no, format!("malformed header {line:?}")));
            }
            let n: usize = fields[2]
                .parse()
                .map_err(|_| err(line_no, format!("bad variable count {:?}", fields[2])))?;
            let m: usize = fields[3]
                .parse()
                .map_err(|_| err(line_no, format!("bad clause count {:?}", fields[3])))?;
            header = Some((n, m, line_no));
            continue;
        }
        let Some((n, _, _)) = header else {
            return Err(err(line_no, "clause data before the header".into()));
        };
        for token in line.split_whitespace() {
            let lit: i64 = token
                .parse()
                .map_err(|_| err(line_no, format!("bad literal {token:?}")))?;
            if lit == 0 {
                if let Some(k) = options.arity {
                    if current.len() != k {
                        return Err(err(
                            line_no,
                            format!("clause has {} literals, expected {k}", current.len()),
                        ));
                    }
                }
                clauses.push(Clause {
                    literals: std::mem::take(&mut current),
                });
                continue;
            }
            let var = lit.unsigned_abs() as usize;
            if var > n {
                return Err(err(
                    line_no,
                    format!("literal {lit} out of range for {n} variables"),
                ));
            }
            let literal = Literal::new((var - 1) as u32, lit < 0);
            if current.iter().any(|l| l.var == literal.var) {
                return Err(err(
                    line_no,
                    format!("variable {var} repeated within a clause"),
                ));
            }
            if current.is_empty() {
                current_line = line_no;
            }
            current.push(literal);
        }
    }

    let Some((n, m, header_line)) = header else {
        return Err(err(0, "missing \"p cnf\" header".into()));
    };
    if !current.is_empty() {
        return Err(err(current_line, "clause not terminated by 0".into()));
    }
    if clauses.len() != m {
        return Err(err(
            header_line,
            format!("header declares {m} clauses, found {}", clauses.len()),
        ));
    }
    SatInstance::new(n, clauses).map_err(|e| err(header_line, e.to_string()))
}

pub fn write_dimacs(instance: &SatInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "p cnf {} {}", instance.n, instance.clauses.len());
    for clause in &instance.clauses {
        for l in &clause.literals {
            let _ = write!(out, "{} ", l.to_dimacs());
        }
        out.push_str("0\n");
    }
    out
}
