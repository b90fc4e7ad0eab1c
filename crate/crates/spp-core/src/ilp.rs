//! Cut-generation solver: a 0/1 integer program over one binary variable per
//! protectable event, grown lazily by path constraints from the validity
//! checker, solved exactly by a built-in branch-and-bound backend.
//!
//! The loop: solve the current model, read off the candidate policy, check it
//! (validity or χ-validity). A failing check yields witness paths; each
//! witness becomes a covering constraint that every valid policy satisfies,
//! so the model only ever cuts off invalid candidates. Objective values are
//! nondecreasing across iterations and the final candidate is optimal.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::analysis::{
    chi_violations, validity_violations, ChiLimitExceeded, Violation, DEFAULT_CHI_CAP,
};
use crate::instance::{Event, Policy, SppInstance};

/// Where a cut came from: the violated (initial, secret) pair and a digest of
/// the witness path. Cuts are deduplicated by path digest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutOrigin {
    pub initial: String,
    pub secret: String,
    pub path_digest: String,
}

/// A covering constraint `sum coeff_v * x_v >= rhs` with nonnegative integer
/// coefficients, keyed by variable name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cut {
    pub coeffs: BTreeMap<String, u64>,
    pub rhs: u64,
    pub origin: CutOrigin,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("constraint references unknown variable `{0}`")]
    UnknownVariable(String),
}

/// A 0/1 minimization model: binary variables, nonnegative integer objective
/// coefficients, and covering constraints.
#[derive(Clone, Debug)]
pub struct IlpModel {
    variables: Vec<String>,
    index: HashMap<String, usize>,
    objective: Vec<u64>,
    constraints: Vec<Cut>,
    digests: HashSet<String>,
}

impl IlpModel {
    pub fn new(objective: Vec<(String, u64)>) -> Result<Self, ModelError> {
        let mut index = HashMap::with_capacity(objective.len());
        let mut variables = Vec::with_capacity(objective.len());
        let mut coeffs = Vec::with_capacity(objective.len());
        for (name, cost) in objective {
            if index.insert(name.clone(), variables.len()).is_some() {
                return Err(ModelError::DuplicateVariable(name));
            }
            variables.push(name);
            coeffs.push(cost);
        }
        Ok(IlpModel {
            variables,
            index,
            objective: coeffs,
            constraints: Vec::new(),
            digests: HashSet::new(),
        })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn objective(&self) -> &[u64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Cut] {
        &self.constraints
    }

    /// Adds a cut unless one with the same origin path digest is already
    /// present. Returns whether the cut was added. Zero coefficients are
    /// dropped.
    pub fn add_cut(&mut self, cut: Cut) -> Result<bool, ModelError> {
        for name in cut.coeffs.keys() {
            if !self.index.contains_key(name) {
                return Err(ModelError::UnknownVariable(name.clone()));
            }
        }
        if !self.digests.insert(cut.origin.path_digest.clone()) {
            return Ok(false);
        }
        let mut cut = cut;
        cut.coeffs.retain(|_, &mut c| c > 0);
        self.constraints.push(cut);
        Ok(true)
    }

    /// Objective value of an assignment (u128: generic models may exceed u64).
    pub fn objective_value(&self, a: &Assignment) -> u128 {
        self.objective
            .iter()
            .zip(&a.values)
            .filter(|&(_, &x)| x)
            .map(|(&c, _)| c as u128)
            .sum()
    }
}

/// A binary assignment over a model's variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    values: Vec<bool>,
}

impl Assignment {
    pub fn values(&self) -> &[bool] {
        &self.values
    }

    /// Names of selected variables, in model variable order.
    pub fn selected<'a>(&self, model: &'a IlpModel) -> Vec<&'a str> {
        model
            .variables
            .iter()
            .zip(&self.values)
            .filter(|&(_, &x)| x)
            .map(|(n, _)| n.as_str())
            .collect()
    }
}

/// Exact branch-and-bound over the binary cube. Variables are branched in
/// descending-cost order with the include branch first; subtrees are pruned
/// by a per-constraint fractional greedy cover bound. Ties between optimal
/// assignments resolve to the lexicographically smallest selected-name set.
pub fn solve_ilp(model: &IlpModel) -> Option<Assignment> {
    let n = model.variables.len();

    // Indexed constraint rows.
    struct Row {
        rhs: u64,
        terms: Vec<(usize, u64)>,    // (var, coeff), coeff > 0
        by_ratio: Vec<(usize, u64)>, // terms sorted by coeff/cost descending
    }
    let rows: Vec<Row> = model
        .constraints
        .iter()
        .map(|cut| {
            let terms: Vec<(usize, u64)> = cut
                .coeffs
                .iter()
                .map(|(name, &c)| (model.index[name], c))
                .collect();
            let mut by_ratio = terms.clone();
            by_ratio.sort_by(|&(va, ca), &(vb, cb)| {
                let lhs = ca as u128 * model.objective[vb] as u128;
                let rhs = cb as u128 * model.objective[va] as u128;
                rhs.cmp(&lhs).then(va.cmp(&vb))
            });
            Row {
                rhs: cut.rhs,
                terms,
                by_ratio,
            }
        })
        .collect();

    let mut var_rows: Vec<Vec<(usize, u64)>> = vec![Vec::new(); n];
    for (ci, row) in rows.iter().enumerate() {
        for &(v, c) in &row.terms {
            var_rows[v].push((ci, c));
        }
    }

    // Branch order: descending cost, ties by ascending name.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        model.objective[b]
            .cmp(&model.objective[a])
            .then_with(|| model.variables[a].cmp(&model.variables[b]))
    });

    struct Search<'m> {
        model: &'m IlpModel,
        rows: Vec<Row>,
        var_rows: Vec<Vec<(usize, u64)>>,
        order: Vec<usize>,
        decided: Vec<bool>,
        assign: Vec<bool>,
        deficit: Vec<u64>,
        potential: Vec<u128>,
        best: Option<(u128, Vec<String>, Vec<bool>)>,
    }

    impl Search<'_> {
        /// Fractional greedy cover bound for one unsatisfied row, rounded up.
        fn row_bound(&self, row: &Row) -> Option<u128> {
            let need = row.rhs;
            let mut satisfied: u64 = 0;
            for &(v, c) in &row.terms {
                if self.decided[v] && self.assign[v] {
                    satisfied = satisfied.saturating_add(c);
                }
            }
            if satisfied >= need {
                return Some(0);
            }
            let deficit = (need - satisfied) as u128;
            let mut cov: u128 = 0;
            let mut cost: u128 = 0;
            for &(v, c) in &row.by_ratio {
                if self.decided[v] {
                    continue;
                }
                let c = c as u128;
                if cov + c >= deficit {
                    let partial = deficit - cov;
                    let unit = self.model.objective[v] as u128;
                    return Some(cost + (partial * unit).div_ceil(c));
                }
                cov += c;
                cost += self.model.objective[v] as u128;
            }
            None // cannot be covered
        }

        fn lower_bound(&self, budget: Option<u128>) -> Option<u128> {
            let mut lb: u128 = 0;
            for (ci, row) in self.rows.iter().enumerate() {
                if self.deficit[ci] == 0 {
                    continue;
                }
                lb = lb.max(self.row_bound(row)?);
                if let Some(limit) = budget {
                    if lb > limit {
                        return Some(lb); // already prunes
                    }
                }
            }
            Some(lb)
        }

        fn selected_names(&self) -> Vec<String> {
            let mut names: Vec<String> = self
                .model
                .variables
                .iter()
                .enumerate()
                .filter(|&(v, _)| self.assign[v])
                .map(|(_, n)| n.clone())
                .collect();
            names.sort();
            names
        }

        fn dfs(&mut self, pos: usize, cost: u128) {
            // Infeasible or dominated subtree.
            for (ci, &d) in self.deficit.iter().enumerate() {
                if (d as u128) > self.potential[ci] {
                    return;
                }
            }
            let budget = self.best.as_ref().map(|b| b.0.saturating_sub(cost));
            match self.lower_bound(budget) {
                None => return,
                Some(lb) => {
                    if let Some((best_cost, _, _)) = &self.best {
                        if cost + lb > *best_cost {
                            return;
                        }
                    }
                }
            }

            if pos == self.order.len() {
                // Deficits are zero here: potentials are zero and the
                // feasibility check above passed.
                let names = self.selected_names();
                let better = match &self.best {
                    None => true,
                    Some((bc, bn, _)) => cost < *bc || (cost == *bc && names < *bn),
                };
                if better {
                    self.best = Some((cost, names, self.assign.clone()));
                }
                return;
            }

            let v = self.order[pos];
            self.decided[v] = true;

            // Include first: reaches feasible incumbents quickly.
            self.assign[v] = true;
            let mut undo = Vec::with_capacity(self.var_rows[v].len());
            for i in 0..self.var_rows[v].len() {
                let (ci, c) = self.var_rows[v][i];
                let dec = self.deficit[ci].min(c);
                self.deficit[ci] -= dec;
                self.potential[ci] -= c as u128;
                undo.push((ci, dec, c));
            }
            self.dfs(pos + 1, cost + self.model.objective[v] as u128);
            for &(ci, dec, c) in &undo {
                self.deficit[ci] += dec;
                self.potential[ci] += c as u128;
            }
            self.assign[v] = false;

            // Exclude.
            for i in 0..self.var_rows[v].len() {
                let (ci, c) = self.var_rows[v][i];
                self.potential[ci] -= c as u128;
            }
            self.dfs(pos + 1, cost);
            for &(ci, c) in &self.var_rows[v] {
                self.potential[ci] += c as u128;
            }

            self.decided[v] = false;
        }
    }

    let deficit: Vec<u64> = rows.iter().map(|r| r.rhs).collect();
    let potential: Vec<u128> = rows
        .iter()
        .map(|r| r.terms.iter().map(|&(_, c)| c as u128).sum())
        .collect();
    let mut search = Search {
        model,
        rows,
        var_rows,
        order,
        decided: vec![false; n],
        assign: vec![false; n],
        deficit,
        potential,
        best: None,
    };
    search.dfs(0, 0);
    search.best.map(|(_, _, values)| Assignment { values })
}

fn lp_safe(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        out.insert_str(0, "v_");
    }
    out
}

/// Renders the model in LP text format: objective, constraints, binary
/// section. Variable order is the model's declaration order.
pub fn export_lp(model: &IlpModel) -> String {
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    if model.variables.is_empty() {
        out.push_str(" 0");
    } else {
        for (i, name) in model.variables.iter().enumerate() {
            if i > 0 {
                out.push_str(" +");
            }
            out.push_str(&format!(" {} {}", model.objective[i], lp_safe(name)));
        }
    }
    out.push('\n');
    if !model.constraints.is_empty() {
        out.push_str("Subject To\n");
        for (ci, cut) in model.constraints.iter().enumerate() {
            out.push_str(&format!(" c{}:", ci + 1));
            for (i, (name, coeff)) in cut.coeffs.iter().enumerate() {
                if i > 0 {
                    out.push_str(" +");
                }
                out.push_str(&format!(" {} {}", coeff, lp_safe(name)));
            }
            out.push_str(&format!(" >= {}\n", cut.rhs));
        }
    }
    if !model.variables.is_empty() {
        out.push_str("Binaries\n");
        let names: Vec<String> = model.variables.iter().map(|n| lp_safe(n)).collect();
        out.push_str(&format!(" {}\n", names.join(" ")));
    }
    out.push_str("End\n");
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutStrategy {
    /// Stop separation at the first initial state with any violation,
    /// keeping that state's full batch of violated-secret cuts.
    First,
    /// Collect violated cuts across all (initial, secret) pairs.
    All,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Solve under χ-validity (distinct-event clearance) instead of validity.
    pub chi: bool,
    pub max_iters: u64,
    pub cut_strategy: CutStrategy,
    /// Cap on policy size for χ separation.
    pub chi_cap: u32,
    /// Cooperative wall-clock limit, checked between iterations.
    pub time_limit: Option<Duration>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            chi: false,
            max_iters: 5000,
            cut_strategy: CutStrategy::All,
            chi_cap: DEFAULT_CHI_CAP,
            time_limit: None,
        }
    }
}

impl SolverConfig {
    pub fn chi_mode() -> Self {
        SolverConfig {
            chi: true,
            ..SolverConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
    ResourceLimit,
    Timeout,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::IterationLimit => "iteration_limit",
            SolveStatus::ResourceLimit => "resource_limit",
            SolveStatus::Timeout => "timeout",
        };
        f.write_str(s)
    }
}

/// Result of one solver run. `Optimal` implies the policy is present, its
/// cost is exact, and it passes the relevant validity check.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub policy: Option<Policy>,
    pub cost: Option<u64>,
    pub iterations: u64,
    pub cuts: usize,
    pub wall_time: Duration,
    /// Objective value of each iteration's candidate; nondecreasing.
    pub objective_trace: Vec<u64>,
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "status={}", self.status)?;
        if let Some(cost) = self.cost {
            write!(f, " cost={cost}")?;
        }
        write!(
            f,
            " iterations={} cuts={} wall_ms={}",
            self.iterations,
            self.cuts,
            self.wall_time.as_millis()
        )
    }
}

impl SolveReport {
    /// Single-record line including the policy, for CLI output and logs.
    pub fn render(&self, inst: &SppInstance) -> String {
        let mut line = self.to_string();
        if let Some(p) = &self.policy {
            line.push_str(&format!(" policy={}", p.render(inst)));
        }
        line
    }
}

/// A solver run along with the final constraint model it built.
pub struct SolveOutcome {
    pub report: SolveReport,
    pub model: IlpModel,
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn path_digest(inst: &SppInstance, v: &Violation, chi: bool) -> String {
    let mut bytes = Vec::new();
    bytes.push(if chi { b'c' } else { b'v' });
    bytes.extend_from_slice(inst.state_name(v.initial).as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(inst.state_name(v.secret).as_bytes());
    bytes.push(0);
    for e in v.path.events() {
        bytes.extend_from_slice(inst.event_name(e).as_bytes());
        bytes.push(0);
    }
    format!("{:016x}", fnv1a64(&bytes))
}

/// Variable name for an event: `x_` + event name.
fn var_name(inst: &SppInstance, e: Event) -> String {
    format!("x_{}", inst.event_name(e))
}

/// Builds the path constraint for a violation. Validity mode: coefficient
/// `occurrences * clearance` per protectable event on the path. χ mode:
/// coefficient `clearance` per distinct protectable event on the path.
fn cut_from_violation(inst: &SppInstance, v: &Violation, chi: bool) -> Cut {
    let mut coeffs: BTreeMap<String, u64> = BTreeMap::new();
    if chi {
        let mut seen: Vec<Event> = v
            .path
            .events()
            .filter(|&e| inst.is_protectable(e))
            .collect();
        seen.sort_unstable();
        seen.dedup();
        for e in seen {
            coeffs.insert(var_name(inst, e), inst.clearance(e).unwrap());
        }
    } else {
        let mut occ: BTreeMap<Event, u64> = BTreeMap::new();
        for e in v.path.events().filter(|&e| inst.is_protectable(e)) {
            *occ.entry(e).or_insert(0) += 1;
        }
        for (e, count) in occ {
            coeffs.insert(var_name(inst, e), count * inst.clearance(e).unwrap());
        }
    }
    Cut {
        coeffs,
        rhs: v.required,
        origin: CutOrigin {
            initial: inst.state_name(v.initial).to_string(),
            secret: inst.state_name(v.secret).to_string(),
            path_digest: path_digest(inst, v, chi),
        },
    }
}

fn separation(
    inst: &SppInstance,
    policy: &Policy,
    config: &SolverConfig,
) -> Result<Vec<Violation>, ChiLimitExceeded> {
    let first_only = matches!(config.cut_strategy, CutStrategy::First);
    if config.chi {
        chi_violations(inst, policy, config.chi_cap, first_only)
    } else {
        Ok(validity_violations(inst, policy, first_only))
    }
}

/// Solves an SPP instance and returns the report together with the final
/// ILP model (for export or cut auditing).
pub fn solve_spp_with_model(inst: &SppInstance, config: &SolverConfig) -> SolveOutcome {
    let start = Instant::now();
    let vars: Vec<Event> = inst.protectable_events().collect();
    let objective: Vec<(String, u64)> = vars
        .iter()
        .map(|&e| (var_name(inst, e), inst.cost(e).unwrap()))
        .collect();
    let mut model = IlpModel::new(objective).expect("event names are unique");

    let finish = |status: SolveStatus,
                  policy: Option<Policy>,
                  cost: Option<u64>,
                  iterations: u64,
                  trace: Vec<u64>,
                  model: IlpModel| {
        let cuts = model.constraints().len();
        SolveOutcome {
            report: SolveReport {
                status,
                policy,
                cost,
                iterations,
                cuts,
                wall_time: start.elapsed(),
                objective_trace: trace,
            },
            model,
        }
    };

    // Solvability probe: the all-events policy is the best any policy can do.
    let full = inst.full_policy();
    let solvable = if config.chi {
        match crate::analysis::check_chi_valid_with_cap(inst, &full, config.chi_cap) {
            Ok(verdict) => verdict.is_valid(),
            Err(_) => return finish(SolveStatus::ResourceLimit, None, None, 0, Vec::new(), model),
        }
    } else {
        crate::analysis::check_valid(inst, &full).is_valid()
    };
    if !solvable {
        return finish(SolveStatus::Infeasible, None, None, 0, Vec::new(), model);
    }

    let mut trace: Vec<u64> = Vec::new();
    let mut last_candidate: Option<(Policy, u64)> = None;
    let mut iterations = 0;

    while iterations < config.max_iters {
        if let Some(limit) = config.time_limit {
            if start.elapsed() >= limit {
                let (p, c) = last_candidate
                    .map(|(p, c)| (Some(p), Some(c)))
                    .unwrap_or((None, None));
                return finish(SolveStatus::Timeout, p, c, iterations, trace, model);
            }
        }
        iterations += 1;

        let assignment = match solve_ilp(&model) {
            Some(a) => a,
            // Unreachable on solvable instances: the full assignment
            // satisfies every path cut.
            None => {
                return finish(
                    SolveStatus::Infeasible,
                    None,
                    None,
                    iterations,
                    trace,
                    model,
                )
            }
        };
        let policy = Policy::from_events(
            vars.iter()
                .zip(assignment.values())
                .filter(|&(_, &x)| x)
                .map(|(&e, _)| e),
        );
        let cost = inst
            .policy_cost(&policy)
            .expect("model variables are protectable");
        trace.push(cost);

        let violations = match separation(inst, &policy, config) {
            Ok(v) => v,
            Err(_) => {
                return finish(
                    SolveStatus::ResourceLimit,
                    Some(policy),
                    Some(cost),
                    iterations,
                    trace,
                    model,
                )
            }
        };
        if violations.is_empty() {
            return finish(
                SolveStatus::Optimal,
                Some(policy),
                Some(cost),
                iterations,
                trace,
                model,
            );
        }

        let mut added = 0;
        for v in &violations {
            let cut = cut_from_violation(inst, v, config.chi);
            if model
                .add_cut(cut)
                .expect("cut variables are model variables")
            {
                added += 1;
            }
        }
        debug_assert!(added > 0, "violating path implies a new cut");
        last_candidate = Some((policy, cost));
        if added == 0 {
            break;
        }
    }

    let (p, c) = last_candidate
        .map(|(p, c)| (Some(p), Some(c)))
        .unwrap_or((None, None));
    finish(SolveStatus::IterationLimit, p, c, iterations, trace, model)
}

/// Solves an SPP instance: minimum-cost valid policy (or χ-valid policy when
/// `config.chi` is set).
pub fn solve_spp(inst: &SppInstance, config: &SolverConfig) -> SolveReport {
    solve_spp_with_model(inst, config).report
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BudgetDecision {
    Yes(Policy),
    No,
    /// The solver hit its iteration or time limit before proving either
    /// answer; never reported as a false no.
    Unknown,
}

/// Budget-constrained decision: does a valid (or χ-valid) policy of cost at
/// most `budget` exist?
pub fn decide_budget(
    inst: &SppInstance,
    budget: u64,
    chi: bool,
) -> Result<BudgetDecision, ChiLimitExceeded> {
    let config = SolverConfig {
        chi,
        ..SolverConfig::default()
    };
    decide_budget_with(inst, budget, &config)
}

pub fn decide_budget_with(
    inst: &SppInstance,
    budget: u64,
    config: &SolverConfig,
) -> Result<BudgetDecision, ChiLimitExceeded> {
    let report = solve_spp(inst, config);
    match report.status {
        SolveStatus::Optimal => {
            let cost = report.cost.expect("optimal report has cost");
            if cost <= budget {
                Ok(BudgetDecision::Yes(
                    report.policy.expect("optimal report has policy"),
                ))
            } else {
                Ok(BudgetDecision::No)
            }
        }
        SolveStatus::Infeasible => Ok(BudgetDecision::No),
        SolveStatus::IterationLimit | SolveStatus::Timeout => Ok(BudgetDecision::Unknown),
        SolveStatus::ResourceLimit => Err(ChiLimitExceeded {
            policy_events: inst.protectable_events().count(),
            cap: config.chi_cap,
        }),
    }
}
