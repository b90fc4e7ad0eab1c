//! Satisfiability gadgets as instance generators, with parsers for the input
//! logic formats (DIMACS CNF and a small `qdnf` format for 2-QBF with a DNF
//! matrix).
//!
//! Three constructions:
//! - [`reduce_3sat`]: a 3-CNF formula becomes a χ-mode budget instance whose
//!   budget-n feasibility coincides with satisfiability. Per variable x, a
//!   two-step gadget q0 -x-> q_x -x'-> f forces one literal per variable;
//!   per clause, a chain from q0 to f through the clause's literals forces a
//!   hit on every clause.
//! - [`reduce_chi_validity`]: a chain automaton whose full-literal policy is
//!   χ-violated exactly when the formula is satisfiable.
//! - [`reduce_qsat2`]: the 2-QBF gadget with two secret states f1 and f2 and
//!   budget n+2r. The gadget does not decide 2-QBF truth on all inputs:
//!   paths through unprotected events can undercut f2's requirement, so
//!   some true formulas map to budget-infeasible instances. No test asserts
//!   that equivalence; the acceptance suite measures and reports the
//!   agreement rate instead.
//!
//! All constructions are deterministic: identical formulas produce
//! byte-identical serialized instances.

use thiserror::Error;

use crate::hash::digest_hex;
use crate::instance::{InstanceBuilder, Policy, SppInstance};
use crate::oracle::{CnfFormula, FormulaError, Lit, Qbf2Formula};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReductionMode {
    Validity,
    Chi,
}

impl std::fmt::Display for ReductionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReductionMode::Validity => "validity",
            ReductionMode::Chi => "chi",
        })
    }
}

/// A generated instance together with its decision budget and provenance
/// (construction name + formula digest).
#[derive(Clone, Debug)]
pub struct ReducedInstance {
    pub instance: SppInstance,
    pub budget: u64,
    pub mode: ReductionMode,
    pub provenance: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReductionError {
    #[error("clause {0} is empty; the construction has no gadget for it")]
    EmptyClause(usize),
    #[error("formula is not in 3-CNF: clause {0} has {1} literals")]
    Not3Cnf(usize, usize),
    #[error("formula has no variables")]
    NoVariables,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DimacsError {
    #[error("line {0}: expected `p cnf <vars> <clauses>` header")]
    MalformedHeader(usize),
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("unexpected token `{0}`")]
    UnexpectedToken(String),
    #[error("clause {0} not terminated by 0")]
    MissingTerminator(usize),
    #[error("found {found} clauses, header declares {declared}")]
    ClauseCountMismatch { declared: usize, found: usize },
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

/// Parses DIMACS CNF. `c` lines are comments; a line starting with `%` ends
/// the input. Clauses may span lines; each is a run of nonzero integers
/// terminated by 0.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, DimacsError> {
    let mut header: Option<(u32, usize)> = None;
    let mut tokens: Vec<i32> = Vec::new();
    'lines: for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break 'lines;
        }
        if header.is_none() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["p", "cnf", vars, clauses] => {
                    let v = vars
                        .parse()
                        .map_err(|_| DimacsError::MalformedHeader(idx + 1))?;
                    let c = clauses
                        .parse()
                        .map_err(|_| DimacsError::MalformedHeader(idx + 1))?;
                    header = Some((v, c));
                    continue;
                }
                _ => return Err(DimacsError::MalformedHeader(idx + 1)),
            }
        }
        for tok in line.split_whitespace() {
            let value: i32 = tok
                .parse()
                .map_err(|_| DimacsError::UnexpectedToken(tok.to_string()))?;
            tokens.push(value);
        }
    }
    let (num_vars, declared) = header.ok_or(DimacsError::MissingHeader)?;

    let mut clauses: Vec<Vec<i32>> = Vec::with_capacity(declared);
    let mut current: Vec<i32> = Vec::new();
    for value in tokens {
        if value == 0 {
            clauses.push(std::mem::take(&mut current));
        } else {
            current.push(value);
        }
    }
    if !current.is_empty() {
        return Err(DimacsError::MissingTerminator(clauses.len() + 1));
    }
    if clauses.len() != declared {
        return Err(DimacsError::ClauseCountMismatch {
            declared,
            found: clauses.len(),
        });
    }
    Ok(CnfFormula::new(num_vars, clauses)?)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QdnfError {
    #[error("line {0}: expected `p qdnf <conjuncts>` header")]
    MalformedHeader(usize),
    #[error("missing `p qdnf` header")]
    MissingHeader,
    #[error("line {0}: expected `{1} <vars...> 0`")]
    MalformedBlock(usize, char),
    #[error("quantifier line `{0}` missing or out of order")]
    MissingBlock(char),
    #[error("unexpected token `{0}`")]
    UnexpectedToken(String),
    #[error("conjunct {0} not terminated by 0")]
    MissingTerminator(usize),
    #[error("found {found} conjuncts, header declares {declared}")]
    ConjunctCountMismatch { declared: usize, found: usize },
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

/// Parses the `qdnf` format for 2-QBF formulas with a 3-DNF matrix:
///
/// ```text
/// p qdnf <m>
/// e <vars...> 0
/// a <vars...> 0
/// <m conjunct lines, 1..=3 literals each, terminated by 0>
/// ```
pub fn parse_qdnf(text: &str) -> Result<Qbf2Formula, QdnfError> {
    let mut declared: Option<usize> = None;
    let mut exists: Option<Vec<u32>> = None;
    let mut forall: Option<Vec<u32>> = None;
    let mut tokens: Vec<i32> = Vec::new();

    let parse_block = |line: &str, idx: usize, tag: char| -> Result<Vec<u32>, QdnfError> {
        let mut vars = Vec::new();
        let mut terminated = false;
        for tok in line.split_whitespace().skip(1) {
            if terminated {
                return Err(QdnfError::MalformedBlock(idx + 1, tag));
            }
            if tok == "0" {
                terminated = true;
                continue;
            }
            let v: u32 = tok
                .parse()
                .ok()
                .filter(|&v| v > 0)
                .ok_or(QdnfError::MalformedBlock(idx + 1, tag))?;
            vars.push(v);
        }
        if !terminated {
            return Err(QdnfError::MalformedBlock(idx + 1, tag));
        }
        Ok(vars)
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if declared.is_none() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["p", "qdnf", m] => {
                    declared = Some(m.parse().map_err(|_| QdnfError::MalformedHeader(idx + 1))?);
                    continue;
                }
                _ => return Err(QdnfError::MalformedHeader(idx + 1)),
            }
        }
        if exists.is_none() {
            if !line.starts_with('e') {
                return Err(QdnfError::MissingBlock('e'));
            }
            exists = Some(parse_block(line, idx, 'e')?);
            continue;
        }
        if forall.is_none() {
            if !line.starts_with('a') {
                return Err(QdnfError::MissingBlock('a'));
            }
            forall = Some(parse_block(line, idx, 'a')?);
            continue;
        }
        for tok in line.split_whitespace() {
            let value: i32 = tok
                .parse()
                .map_err(|_| QdnfError::UnexpectedToken(tok.to_string()))?;
            tokens.push(value);
        }
    }

    let declared = declared.ok_or(QdnfError::MissingHeader)?;
    let exists = exists.ok_or(QdnfError::MissingBlock('e'))?;
    let forall = forall.ok_or(QdnfError::MissingBlock('a'))?;

    let mut conjuncts: Vec<Vec<i32>> = Vec::with_capacity(declared);
    let mut current: Vec<i32> = Vec::new();
    for value in tokens {
        if value == 0 {
            conjuncts.push(std::mem::take(&mut current));
        } else {
            current.push(value);
        }
    }
    if !current.is_empty() {
        return Err(QdnfError::MissingTerminator(conjuncts.len() + 1));
    }
    if conjuncts.len() != declared {
        return Err(QdnfError::ConjunctCountMismatch {
            declared,
            found: conjuncts.len(),
        });
    }
    Ok(Qbf2Formula::new(exists, forall, conjuncts)?)
}

fn cnf_digest(tag: &str, f: &CnfFormula) -> String {
    let mut s = format!("{tag};n={};", f.num_vars());
    for clause in f.clauses() {
        for lit in clause {
            s.push_str(&lit.to_dimacs().to_string());
            s.push(' ');
        }
        s.push(';');
    }
    digest_hex(s.as_bytes())
}

fn require_3cnf(f: &CnfFormula) -> Result<(), ReductionError> {
    for (i, clause) in f.clauses().iter().enumerate() {
        if clause.is_empty() {
            return Err(ReductionError::EmptyClause(i + 1));
        }
        if clause.len() > 3 {
            return Err(ReductionError::Not3Cnf(i + 1, clause.len()));
        }
    }
    Ok(())
}

/// Event name of a literal: `x<v>` for the variable, `x<v>p` for its
/// negation.
fn lit_event(lit: Lit) -> String {
    if lit.negated {
        format!("x{}p", lit.var)
    } else {
        format!("x{}", lit.var)
    }
}

/// 3-CNF satisfiability as a χ-mode budget question. Structural counts:
/// states `2 + n + sum(k_i - 1)`, events `2n`, transitions `2n + sum(k_i)`,
/// budget `n`, single secret `f` with level 1.
pub fn reduce_3sat(f: &CnfFormula) -> Result<ReducedInstance, ReductionError> {
    require_3cnf(f)?;
    let n = f.num_vars() as u64;
    let mut b = InstanceBuilder::new();
    b.state("q0", 0).unwrap();
    b.state("f", 1).unwrap();
    for v in 1..=f.num_vars() {
        b.state(&format!("q_x{v}"), 0).unwrap();
        b.protectable(&format!("x{v}"), 1, 1).unwrap();
        b.protectable(&format!("x{v}p"), 1, 1).unwrap();
    }
    for v in 1..=f.num_vars() {
        b.transition("q0", &format!("x{v}"), &format!("q_x{v}"))
            .unwrap();
        b.transition(&format!("q_x{v}"), &format!("x{v}p"), "f")
            .unwrap();
    }
    for (i, clause) in f.clauses().iter().enumerate() {
        let i = i + 1;
        let k = clause.len();
        let mut from = "q0".to_string();
        for (j, &lit) in clause.iter().enumerate() {
            let to = if j + 1 == k {
                "f".to_string()
            } else {
                let name = format!("c{i}_{}", j + 1);
                b.state(&name, 0).unwrap();
                name
            };
            b.transition(&from, &lit_event(lit), &to).unwrap();
            from = to;
        }
    }
    b.initial("q0").unwrap();
    Ok(ReducedInstance {
        instance: b.build().expect("construction is structurally valid"),
        budget: n,
        mode: ReductionMode::Chi,
        provenance: format!("sat3:{}", cnf_digest("sat3", f)),
    })
}

/// χ-validity hardness instance: the chain q0 → C1 → … → Cm → Cz1 → … →
/// Czn, one transition per literal of each position's set, secret level
/// n+1 on the last state. Returns the instance with the full-literal
/// policy; the policy is χ-violated exactly when the formula is
/// satisfiable.
pub fn reduce_chi_validity(f: &CnfFormula) -> Result<(SppInstance, Policy), ReductionError> {
    require_3cnf(f)?;
    let n = f.num_vars();
    if n == 0 {
        return Err(ReductionError::NoVariables);
    }
    let m = f.clauses().len();
    let mut b = InstanceBuilder::new();
    b.state("q0", 0).unwrap();
    for i in 1..=m {
        b.state(&format!("C{i}"), 0).unwrap();
    }
    for v in 1..=n {
        let level = if v == n { n as u64 + 1 } else { 0 };
        b.state(&format!("Cz{v}"), level).unwrap();
        b.protectable(&format!("x{v}"), 1, 1).unwrap();
        b.protectable(&format!("x{v}p"), 1, 1).unwrap();
    }
    // Position sets along the chain: the m clauses, then {x, x'} per
    // variable.
    let mut prev = "q0".to_string();
    for (i, clause) in f.clauses().iter().enumerate() {
        let here = format!("C{}", i + 1);
        for &lit in clause {
            b.transition(&prev, &lit_event(lit), &here).unwrap();
        }
        prev = here;
    }
    for v in 1..=n {
        let here = format!("Cz{v}");
        b.transition(&prev, &format!("x{v}"), &here).unwrap();
        b.transition(&prev, &format!("x{v}p"), &here).unwrap();
        prev = here;
    }
    b.initial("q0").unwrap();
    let instance = b.build().expect("construction is structurally valid");
    let names: Vec<String> = (1..=n)
        .flat_map(|v| [format!("x{v}"), format!("x{v}p")])
        .collect();
    let policy = Policy::from_names(&instance, &names).expect("all literal events declared");
    Ok((instance, policy))
}

fn qdnf_digest(f: &Qbf2Formula) -> String {
    let mut s = String::from("qsat2;e=");
    for v in f.exists_vars() {
        s.push_str(&format!("{v} "));
    }
    s.push_str(";a=");
    for v in f.forall_vars() {
        s.push_str(&format!("{v} "));
    }
    s.push(';');
    for con in f.conjuncts() {
        for lit in con {
            s.push_str(&format!("{} ", lit.to_dimacs()));
        }
        s.push(';');
    }
    digest_hex(s.as_bytes())
}

/// 2-QBF gadget. Secret states f1 (level 1) and f2 (level n+r+1), budget
/// n+2r. The conjunct chain runs under primed literals; the variable chain
/// offers both literals of each variable in declared order (existential
/// block first).
pub fn reduce_qsat2(f: &Qbf2Formula) -> Result<ReducedInstance, ReductionError> {
    let n = f.exists_vars().len();
    let r = f.forall_vars().len();
    if n + r == 0 {
        return Err(ReductionError::NoVariables);
    }
    for (i, con) in f.conjuncts().iter().enumerate() {
        if con.is_empty() {
            return Err(ReductionError::EmptyClause(i + 1));
        }
    }
    let m = f.conjuncts().len();

    let block = |var: u32| -> char {
        if f.exists_vars().contains(&var) {
            'x'
        } else {
            'y'
        }
    };
    let event = |var: u32, negated: bool| -> String {
        let prime = if negated { "p" } else { "" };
        format!("{}{var}{prime}", block(var))
    };

    let mut b = InstanceBuilder::new();
    b.state("q0", 0).unwrap();
    b.state("f1", 1).unwrap();
    b.state("f2", (n + r + 1) as u64).unwrap();
    for &x in f.exists_vars() {
        b.state(&format!("q_x{x}"), 0).unwrap();
    }
    for i in 1..=m {
        b.state(&format!("C{i}"), 0).unwrap();
    }
    for k in 1..n + r {
        b.state(&format!("Cz{k}"), 0).unwrap();
    }
    for &x in f.exists_vars() {
        b.protectable(&event(x, false), 1, 1).unwrap();
        b.protectable(&event(x, true), 1, 1).unwrap();
    }
    for &y in f.forall_vars() {
        b.protectable(&event(y, false), 1, 1).unwrap();
        b.protectable(&event(y, true), 1, 1).unwrap();
    }

    for &x in f.exists_vars() {
        b.transition("q0", &event(x, false), &format!("q_x{x}"))
            .unwrap();
        b.transition(&format!("q_x{x}"), &event(x, true), "f1")
            .unwrap();
    }
    for &y in f.forall_vars() {
        b.transition("q0", &event(y, false), "f1").unwrap();
        b.transition("q0", &event(y, true), "f1").unwrap();
    }
    // Conjunct chain under primed literals (double prime cancels).
    let mut prev = "q0".to_string();
    for (i, con) in f.conjuncts().iter().enumerate() {
        let here = format!("C{}", i + 1);
        for &lit in con {
            b.transition(&prev, &event(lit.var, !lit.negated), &here)
                .unwrap();
        }
        prev = here;
    }
    // Variable chain: existential block then universal block, both literals
    // of each variable; the last chain state is f2.
    let vars_in_order: Vec<u32> = f
        .exists_vars()
        .iter()
        .chain(f.forall_vars())
        .copied()
        .collect();
    for (k, &z) in vars_in_order.iter().enumerate() {
        let here = if k + 1 == n + r {
            "f2".to_string()
        } else {
            format!("Cz{}", k + 1)
        };
        b.transition(&prev, &event(z, false), &here).unwrap();
        b.transition(&prev, &event(z, true), &here).unwrap();
        prev = here;
    }
    b.initial("q0").unwrap();
    Ok(ReducedInstance {
        instance: b.build().expect("construction is structurally valid"),
        budget: (n + 2 * r) as u64,
        mode: ReductionMode::Chi,
        provenance: format!("qsat2:{}", qdnf_digest(f)),
    })
}
