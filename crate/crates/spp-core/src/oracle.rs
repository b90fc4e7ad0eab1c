//! Brute-force ground truth. Policy optimization by exhaustive subset
//! enumeration, SAT by scanning all assignments, 2-QBF by nested loops.
//! Deliberately free of clever solving so the results stay auditable; caps
//! are hard errors, never silent truncation.

use std::collections::HashMap;

use thiserror::Error;

use crate::analysis::{check_chi_valid_with_cap, check_valid, ChiLimitExceeded, DEFAULT_CHI_CAP};
use crate::instance::{Event, Policy, SppInstance};

pub const DEFAULT_POLICY_CAP: u32 = 20;
pub const SAT_VAR_CAP: u32 = 24;
pub const QSAT2_VAR_CAP: u32 = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("enumeration over {actual} protectable events exceeds cap {cap}")]
    PolicyCapExceeded { actual: usize, cap: u32 },
    #[error("enumeration over {actual} variables exceeds cap {cap}")]
    VarCapExceeded { actual: usize, cap: u32 },
    #[error(transparent)]
    Chi(#[from] ChiLimitExceeded),
}

/// A literal: a variable index (1-based) with a sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit {
    pub var: u32,
    pub negated: bool,
}

impl Lit {
    /// DIMACS convention: nonzero integer, sign = polarity.
    pub fn from_dimacs(code: i32) -> Option<Lit> {
        if code == 0 {
            return None;
        }
        Some(Lit {
            var: code.unsigned_abs(),
            negated: code < 0,
        })
    }

    pub fn to_dimacs(self) -> i32 {
        let v = self.var as i32;
        if self.negated {
            -v
        } else {
            v
        }
    }

    fn holds(self, value: bool) -> bool {
        value != self.negated
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("literal {0} out of range (variables are 1..={1})")]
    LiteralOutOfRange(i32, u32),
    #[error("clause {0} is tautological (contains a variable and its negation)")]
    TautologicalClause(usize),
    #[error("conjunct {0} has {1} distinct literals (expected 1..=3)")]
    BadConjunctSize(usize, usize),
    #[error("quantifier blocks overlap on variable {0}")]
    OverlappingBlocks(u32),
    #[error("variable {0} repeated in a quantifier block")]
    DuplicateQuantified(u32),
}

/// Normalizes one clause/conjunct: literals deduplicated and sorted by
/// (variable, sign).
fn normalize_lits(raw: &[i32], num_ok: impl Fn(u32) -> bool) -> Result<Vec<Lit>, (i32, ())> {
    let mut lits = Vec::with_capacity(raw.len());
    for &code in raw {
        let lit = Lit::from_dimacs(code).ok_or((code, ()))?;
        if !num_ok(lit.var) {
            return Err((code, ()));
        }
        lits.push(lit);
    }
    lits.sort_unstable();
    lits.dedup();
    Ok(lits)
}

/// A CNF formula with clauses kept as sorted literal sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: u32,
    clauses: Vec<Vec<Lit>>,
}

impl CnfFormula {
    /// Builds a formula from DIMACS-style literal lists. Duplicate literals
    /// collapse; tautological clauses are rejected.
    pub fn new(num_vars: u32, clauses: Vec<Vec<i32>>) -> Result<Self, FormulaError> {
        let mut norm = Vec::with_capacity(clauses.len());
        for (i, raw) in clauses.iter().enumerate() {
            let lits = normalize_lits(raw, |v| v >= 1 && v <= num_vars)
                .map_err(|(code, _)| FormulaError::LiteralOutOfRange(code, num_vars))?;
            for pair in lits.windows(2) {
                if pair[0].var == pair[1].var {
                    return Err(FormulaError::TautologicalClause(i + 1));
                }
            }
            norm.push(lits);
        }
        Ok(CnfFormula {
            num_vars,
            clauses: norm,
        })
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.clauses
    }

    pub fn max_clause_len(&self) -> usize {
        self.clauses.iter().map(|c| c.len()).max().unwrap_or(0)
    }

    pub fn min_clause_len(&self) -> usize {
        self.clauses.iter().map(|c| c.len()).min().unwrap_or(0)
    }

    /// Evaluates under an assignment indexed by variable - 1.
    pub fn eval(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|clause| {
            clause
                .iter()
                .any(|lit| lit.holds(assignment[(lit.var - 1) as usize]))
        })
    }
}

/// Scans all assignments in lexicographic order (variable 1 most
/// significant, false before true) and returns the first satisfying one.
pub fn sat_brute(f: &CnfFormula) -> Result<Option<Vec<bool>>, OracleError> {
    let n = f.num_vars;
    if n > SAT_VAR_CAP {
        return Err(OracleError::VarCapExceeded {
            actual: n as usize,
            cap: SAT_VAR_CAP,
        });
    }
    let mut assignment = vec![false; n as usize];
    for mask in 0u64..1 << n {
        for i in 0..n {
            assignment[i as usize] = mask >> (n - 1 - i) & 1 == 1;
        }
        if f.eval(&assignment) {
            return Ok(Some(assignment));
        }
    }
    Ok(None)
}

/// A 2-QBF formula `exists X forall Y. matrix` with the matrix in 3-DNF.
/// Quantifier blocks keep their declared variable order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Qbf2Formula {
    exists: Vec<u32>,
    forall: Vec<u32>,
    conjuncts: Vec<Vec<Lit>>,
}

impl Qbf2Formula {
    pub fn new(
        exists: Vec<u32>,
        forall: Vec<u32>,
        conjuncts: Vec<Vec<i32>>,
    ) -> Result<Self, FormulaError> {
        let mut seen: HashMap<u32, bool> = HashMap::new();
        for &v in &exists {
            if seen.insert(v, true).is_some() {
                return Err(FormulaError::DuplicateQuantified(v));
            }
        }
        for &v in &forall {
            match seen.insert(v, false) {
                Some(true) => return Err(FormulaError::OverlappingBlocks(v)),
                Some(false) => return Err(FormulaError::DuplicateQuantified(v)),
                None => {}
            }
        }
        let mut norm = Vec::with_capacity(conjuncts.len());
        for (i, raw) in conjuncts.iter().enumerate() {
            let lits = normalize_lits(raw, |v| seen.contains_key(&v))
                .map_err(|(code, _)| FormulaError::LiteralOutOfRange(code, 0))?;
            if lits.is_empty() || lits.len() > 3 {
                return Err(FormulaError::BadConjunctSize(i + 1, lits.len()));
            }
            norm.push(lits);
        }
        Ok(Qbf2Formula {
            exists,
            forall,
            conjuncts: norm,
        })
    }

    pub fn exists_vars(&self) -> &[u32] {
        &self.exists
    }

    pub fn forall_vars(&self) -> &[u32] {
        &self.forall
    }

    pub fn conjuncts(&self) -> &[Vec<Lit>] {
        &self.conjuncts
    }

    /// The matrix is a disjunction of conjuncts.
    pub fn eval_matrix(&self, value: impl Fn(u32) -> bool) -> bool {
        self.conjuncts
            .iter()
            .any(|con| con.iter().all(|lit| lit.holds(value(lit.var))))
    }
}

/// Nested exhaustive loops: true iff some assignment to the existential
/// block makes the matrix true under every assignment to the universal
/// block.
pub fn qsat2_brute(f: &Qbf2Formula) -> Result<bool, OracleError> {
    let n = f.exists.len();
    let r = f.forall.len();
    if n + r > QSAT2_VAR_CAP as usize {
        return Err(OracleError::VarCapExceeded {
            actual: n + r,
            cap: QSAT2_VAR_CAP,
        });
    }
    let mut value: HashMap<u32, bool> = HashMap::new();
    for x_mask in 0u64..1 << n {
        for (i, &v) in f.exists.iter().enumerate() {
            value.insert(v, x_mask >> i & 1 == 1);
        }
        let mut holds_for_all = true;
        for y_mask in 0u64..1 << r {
            for (i, &v) in f.forall.iter().enumerate() {
                value.insert(v, y_mask >> i & 1 == 1);
            }
            if !f.eval_matrix(|v| value[&v]) {
                holds_for_all = false;
                break;
            }
        }
        if holds_for_all {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Compares event-index sequences of two subsets lexicographically (the
/// sequence of set bits in ascending order).
fn cmp_masks(a: u64, b: u64) -> std::cmp::Ordering {
    let (mut a, mut b) = (a, b);
    loop {
        match (a == 0, b == 0) {
            (true, true) => return std::cmp::Ordering::Equal,
            (true, false) => return std::cmp::Ordering::Less,
            (false, true) => return std::cmp::Ordering::Greater,
            (false, false) => {}
        }
        let (ta, tb) = (a.trailing_zeros(), b.trailing_zeros());
        if ta != tb {
            return ta.cmp(&tb);
        }
        a &= a - 1;
        b &= b - 1;
    }
}

fn enumerate_policies(
    inst: &SppInstance,
    cap: u32,
    mut accept: impl FnMut(&Policy) -> Result<bool, OracleError>,
) -> Result<Option<(Policy, u64)>, OracleError> {
    let events: Vec<Event> = inst.protectable_events().collect();
    let k = events.len();
    if k as u32 > cap || k >= 63 {
        return Err(OracleError::PolicyCapExceeded { actual: k, cap });
    }
    let mut subsets: Vec<(u64, u64)> = (0u64..1 << k)
        .map(|mask| {
            let cost: u64 = (0..k)
                .filter(|&i| mask >> i & 1 == 1)
                .map(|i| inst.cost(events[i]).unwrap())
                .sum();
            (mask, cost)
        })
        .collect();
    // Increasing cost, then lexicographic set order: the first accepted
    // subset is the optimum with deterministic tie-breaking.
    subsets.sort_by(|&(ma, ca), &(mb, cb)| ca.cmp(&cb).then_with(|| cmp_masks(ma, mb)));
    for (mask, cost) in subsets {
        let policy = Policy::from_events((0..k).filter(|&i| mask >> i & 1 == 1).map(|i| events[i]));
        if accept(&policy)? {
            return Ok(Some((policy, cost)));
        }
    }
    Ok(None)
}

/// Minimum-cost valid policy by exhaustive enumeration of all subsets of the
/// protectable events (default cap 20). `None` when no subset is valid.
pub fn brute_force_optimal(inst: &SppInstance) -> Result<Option<(Policy, u64)>, OracleError> {
    brute_force_optimal_with_cap(inst, DEFAULT_POLICY_CAP)
}

pub fn brute_force_optimal_with_cap(
    inst: &SppInstance,
    cap: u32,
) -> Result<Option<(Policy, u64)>, OracleError> {
    enumerate_policies(inst, cap, |p| Ok(check_valid(inst, p).is_valid()))
}

/// Minimum-cost χ-valid policy by exhaustive enumeration.
pub fn brute_force_chi_optimal(inst: &SppInstance) -> Result<Option<(Policy, u64)>, OracleError> {
    brute_force_chi_optimal_with_cap(inst, DEFAULT_POLICY_CAP)
}

pub fn brute_force_chi_optimal_with_cap(
    inst: &SppInstance,
    cap: u32,
) -> Result<Option<(Policy, u64)>, OracleError> {
    let chi_cap = DEFAULT_CHI_CAP.max(cap);
    enumerate_policies(inst, cap, |p| {
        Ok(check_chi_valid_with_cap(inst, p, chi_cap)?.is_valid())
    })
}
