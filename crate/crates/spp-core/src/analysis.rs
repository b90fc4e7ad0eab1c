//! Validity and χ-validity checking with witness extraction.
//!
//! A policy is valid when every path from an initial state to a secret state
//! accumulates clearance (per occurrence of each protected event) at least
//! the secret's security level. Minimum accumulated clearance is a shortest
//! path under edge weights `clearance(e) * [e in policy]`, so validity is
//! decided by Dijkstra per initial state. χ-validity counts each distinct
//! protected event once; it is decided by a shortest-path search over the
//! product of states with the subset of policy events seen so far.

use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use thiserror::Error;

use crate::instance::{Event, Policy, SppInstance, State};

/// Default cap on policy size for the χ product search (the subset space is
/// exponential in the policy).
pub const DEFAULT_CHI_CAP: u32 = 30;

/// χ-validity checking explores subsets of the policy; policies above the
/// cap are rejected instead of silently running forever.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("chi check over {policy_events} policy events exceeds the cap of {cap}")]
pub struct ChiLimitExceeded {
    pub policy_events: usize,
    pub cap: u32,
}

/// A concrete run of the automaton: a start state and a sequence of
/// (event, next state) steps that follow declared transitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Path {
    pub start: State,
    pub steps: Vec<(Event, State)>,
}

impl Path {
    pub fn end(&self) -> State {
        self.steps.last().map(|&(_, s)| s).unwrap_or(self.start)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn events(&self) -> impl Iterator<Item = Event> + '_ {
        self.steps.iter().map(|&(e, _)| e)
    }

    /// True when every step is a declared transition of `inst`.
    pub fn replays_on(&self, inst: &SppInstance) -> bool {
        let mut at = self.start;
        for &(event, to) in &self.steps {
            let ok = inst
                .transitions()
                .binary_search_by(|t| (t.from, t.event, t.to).cmp(&(at, event, to)))
                .is_ok();
            if !ok {
                return false;
            }
            at = to;
        }
        true
    }

    /// Per-occurrence clearance accumulated under `policy`.
    pub fn clearance(&self, inst: &SppInstance, policy: &Policy) -> u64 {
        self.events()
            .filter(|&e| policy.contains(e))
            .map(|e| inst.clearance(e).unwrap_or(0))
            .sum()
    }

    /// Distinct-event clearance accumulated under `policy`: each protected
    /// event counts once no matter how often it occurs.
    pub fn distinct_clearance(&self, inst: &SppInstance, policy: &Policy) -> u64 {
        let mut seen: Vec<Event> = self.events().filter(|&e| policy.contains(e)).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.iter().map(|&e| inst.clearance(e).unwrap_or(0)).sum()
    }

    pub fn render(&self, inst: &SppInstance) -> String {
        let names: Vec<&str> = self.events().map(|e| inst.event_name(e)).collect();
        names.join(".")
    }
}

/// Witness that a policy fails: a path from an initial state to a secret
/// state whose achieved clearance falls short of the required level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub initial: State,
    pub secret: State,
    pub path: Path,
    pub achieved: u64,
    pub required: u64,
}

impl Violation {
    /// Fixed single-line form used by the CLI.
    pub fn render(&self, inst: &SppInstance) -> String {
        format!(
            "VIOLATION init={} secret={} need={} got={} path={}",
            inst.state_name(self.initial),
            inst.state_name(self.secret),
            self.required,
            self.achieved,
            self.path.render(inst)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Validity {
    Valid,
    Violated(Violation),
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ChiValidity {
    ChiValid,
    Violated(Violation),
}

impl ChiValidity {
    pub fn is_valid(&self) -> bool {
        matches!(self, ChiValidity::ChiValid)
    }
}

/// Outgoing adjacency, rebuilt per analysis call. Lists keep the canonical
/// transition order, so traversals are deterministic.
pub(crate) struct Adjacency {
    out: Vec<Vec<(Event, State)>>,
}

impl Adjacency {
    pub(crate) fn build(inst: &SppInstance) -> Self {
        let mut out = vec![Vec::new(); inst.state_count()];
        for t in inst.transitions() {
            out[t.from.index()].push((t.event, t.to));
        }
        Adjacency { out }
    }

    fn from(&self, s: State) -> &[(Event, State)] {
        &self.out[s.index()]
    }
}

/// Per-event edge weight under a policy: clearance for protected events,
/// zero otherwise.
fn weights(inst: &SppInstance, policy: &Policy) -> Vec<u64> {
    inst.events()
        .map(|e| {
            if policy.contains(e) {
                inst.clearance(e)
                    .expect("policy events must be protectable")
            } else {
                0
            }
        })
        .collect()
}

/// Single-source shortest clearances with predecessor tracking.
pub(crate) struct DijkstraRun {
    source: State,
    dist: Vec<Option<u64>>,
    pred: Vec<Option<(State, Event)>>,
}

impl DijkstraRun {
    fn run(inst: &SppInstance, adj: &Adjacency, weight: &[u64], source: State) -> Self {
        let n = inst.state_count();
        let mut dist: Vec<Option<u64>> = vec![None; n];
        let mut pred: Vec<Option<(State, Event)>> = vec![None; n];
        let mut settled = vec![false; n];
        // Keyed (distance, state) so pops are deterministic.
        let mut heap: BinaryHeap<Reverse<(u64, State)>> = BinaryHeap::new();
        dist[source.index()] = Some(0);
        heap.push(Reverse((0, source)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if settled[u.index()] {
                continue;
            }
            settled[u.index()] = true;
            for &(event, v) in adj.from(u) {
                let nd = d + weight[event.index()];
                let better = match dist[v.index()] {
                    None => true,
                    Some(old) => nd < old,
                };
                if !settled[v.index()] && better {
                    dist[v.index()] = Some(nd);
                    pred[v.index()] = Some((u, event));
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        DijkstraRun { source, dist, pred }
    }

    fn distance(&self, q: State) -> Option<u64> {
        self.dist[q.index()]
    }

    /// Predecessor chains settle in increasing distance order, so the
    /// reconstructed witness is always a simple path.
    fn witness(&self, q: State) -> Option<Path> {
        self.dist[q.index()]?;
        let mut rev = Vec::new();
        let mut at = q;
        while at != self.source {
            let (prev, event) =
                self.pred[at.index()].expect("reachable non-source has predecessor");
            rev.push((event, at));
            at = prev;
        }
        rev.reverse();
        Some(Path {
            start: self.source,
            steps: rev,
        })
    }
}

/// Minimum accumulated clearance from every initial state to every state,
/// with on-demand witness paths.
pub struct ClearanceMap {
    runs: Vec<DijkstraRun>,
}

impl ClearanceMap {
    pub fn initials(&self) -> impl Iterator<Item = State> + '_ {
        self.runs.iter().map(|r| r.source)
    }

    fn run(&self, init: State) -> Option<&DijkstraRun> {
        self.runs.iter().find(|r| r.source == init)
    }

    /// `None` means `q` is unreachable from `init` (or `init` is not an
    /// initial state).
    pub fn distance(&self, init: State, q: State) -> Option<u64> {
        self.run(init)?.distance(q)
    }

    /// A minimum-clearance simple path from `init` to `q`, when reachable.
    pub fn witness(&self, init: State, q: State) -> Option<Path> {
        self.run(init)?.witness(q)
    }
}

/// Computes, for each initial state, the minimum policy-weighted clearance
/// to every reachable state (Dijkstra with weight `clearance(e)*[e in p]`).
pub fn min_clearance(inst: &SppInstance, policy: &Policy) -> ClearanceMap {
    let adj = Adjacency::build(inst);
    let weight = weights(inst, policy);
    let runs = inst
        .initial_states()
        .iter()
        .map(|&i| DijkstraRun::run(inst, &adj, &weight, i))
        .collect();
    ClearanceMap { runs }
}

/// All violated (initial, secret) pairs under per-occurrence clearance, in
/// lexicographic (initial, secret) order. `first_initial_only` stops after
/// the first initial state that contributes any violation.
pub(crate) fn validity_violations(
    inst: &SppInstance,
    policy: &Policy,
    first_initial_only: bool,
) -> Vec<Violation> {
    let adj = Adjacency::build(inst);
    let weight = weights(inst, policy);
    let mut found = Vec::new();
    for &init in inst.initial_states() {
        let run = DijkstraRun::run(inst, &adj, &weight, init);
        for secret in inst.secret_states() {
            let required = inst.security_level(secret);
            if let Some(achieved) = run.distance(secret) {
                if achieved < required {
                    let path = run.witness(secret).expect("reachable secret has witness");
                    found.push(Violation {
                        initial: init,
                        secret,
                        path,
                        achieved,
                        required,
                    });
                }
            }
        }
        if first_initial_only && !found.is_empty() {
            break;
        }
    }
    found
}

/// Checks validity: every path from an initial state to a secret state must
/// accumulate clearance at least the secret's security level. On failure the
/// returned witness attains the minimum clearance for the lexicographically
/// smallest violated (initial, secret) pair.
pub fn check_valid(inst: &SppInstance, policy: &Policy) -> Validity {
    match validity_violations(inst, policy, true).into_iter().next() {
        None => Validity::Valid,
        Some(v) => Validity::Violated(v),
    }
}

/// States reachable from `init`, ignoring weights.
fn reachable_from(inst: &SppInstance, adj: &Adjacency, init: State) -> Vec<bool> {
    let mut seen = vec![false; inst.state_count()];
    let mut queue = VecDeque::new();
    seen[init.index()] = true;
    queue.push_back(init);
    while let Some(u) = queue.pop_front() {
        for &(_, v) in adj.from(u) {
            if !seen[v.index()] {
                seen[v.index()] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// First-settled product node per automaton state from one χ-Dijkstra run.
struct ChiRun {
    source: State,
    /// Minimum distinct-event clearance per state, with the subset mask that
    /// attained it.
    best: Vec<Option<(u64, u64)>>,
    pred: HashMap<(State, u64), (State, u64, Event)>,
}

impl ChiRun {
    fn run(
        inst: &SppInstance,
        adj: &Adjacency,
        bit_of: &[Option<u32>],
        source: State,
        targets_left: usize,
    ) -> Self {
        let mut best: Vec<Option<(u64, u64)>> = vec![None; inst.state_count()];
        let mut pred: HashMap<(State, u64), (State, u64, Event)> = HashMap::new();
        let mut dist: HashMap<(State, u64), u64> = HashMap::new();
        let mut heap: BinaryHeap<Reverse<(u64, State, u64)>> = BinaryHeap::new();
        let mut remaining = targets_left;

        dist.insert((source, 0), 0);
        heap.push(Reverse((0, source, 0)));
        while let Some(Reverse((d, u, mask))) = heap.pop() {
            match dist.get(&(u, mask)) {
                Some(&best_d) if best_d < d => continue, // stale entry
                _ => {}
            }
            if best[u.index()].is_none() {
                best[u.index()] = Some((d, mask));
                if inst.security_level(u) > 0 {
                    remaining -= 1;
                    if remaining == 0 {
                        break;
                    }
                }
            }
            for &(event, v) in adj.from(u) {
                let (nd, nmask) = match bit_of[event.index()] {
                    Some(bit) if mask >> bit & 1 == 0 => {
                        let gamma = inst.clearance(event).expect("policy event protectable");
                        (d + gamma, mask | 1 << bit)
                    }
                    _ => (d, mask),
                };
                let key = (v, nmask);
                let improved = match dist.entry(key) {
                    Entry::Occupied(mut e) => {
                        if nd < *e.get() {
                            e.insert(nd);
                            true
                        } else {
                            false
                        }
                    }
                    Entry::Vacant(e) => {
                        e.insert(nd);
                        true
                    }
                };
                if improved {
                    pred.insert(key, (u, mask, event));
                    heap.push(Reverse((nd, v, nmask)));
                }
            }
        }
        ChiRun { source, best, pred }
    }

    fn witness(&self, q: State) -> Option<Path> {
        let (_, mask) = self.best[q.index()]?;
        let mut rev = Vec::new();
        let mut at = (q, mask);
        while at != (self.source, 0) {
            let &(ps, pm, ev) = self.pred.get(&at).expect("settled node has predecessor");
            rev.push((ev, at.0));
            at = (ps, pm);
        }
        rev.reverse();
        Some(Path {
            start: self.source,
            steps: rev,
        })
    }
}

/// Bit position per event for the χ subset mask (policy events only).
fn chi_bits(inst: &SppInstance, policy: &Policy) -> Vec<Option<u32>> {
    let mut bits = vec![None; inst.event_count()];
    for (i, &e) in policy.events().iter().enumerate() {
        bits[e.index()] = Some(i as u32);
    }
    bits
}

pub(crate) fn chi_violations(
    inst: &SppInstance,
    policy: &Policy,
    cap: u32,
    first_initial_only: bool,
) -> Result<Vec<Violation>, ChiLimitExceeded> {
    if policy.len() as u32 > cap || policy.len() >= 64 {
        return Err(ChiLimitExceeded {
            policy_events: policy.len(),
            cap,
        });
    }
    let adj = Adjacency::build(inst);
    let bits = chi_bits(inst, policy);
    let mut found = Vec::new();
    for &init in inst.initial_states() {
        let reach = reachable_from(inst, &adj, init);
        let targets = inst.secret_states().filter(|s| reach[s.index()]).count();
        if targets == 0 {
            continue;
        }
        let run = ChiRun::run(inst, &adj, &bits, init, targets);
        for secret in inst.secret_states() {
            let required = inst.security_level(secret);
            if let Some((achieved, _)) = run.best[secret.index()] {
                if achieved < required {
                    let path = run.witness(secret).expect("settled secret has witness");
                    found.push(Violation {
                        initial: init,
                        secret,
                        path,
                        achieved,
                        required,
                    });
                }
            }
        }
        if first_initial_only && !found.is_empty() {
            break;
        }
    }
    Ok(found)
}

/// Checks χ-validity with the given cap on policy size.
pub fn check_chi_valid_with_cap(
    inst: &SppInstance,
    policy: &Policy,
    cap: u32,
) -> Result<ChiValidity, ChiLimitExceeded> {
    let found = chi_violations(inst, policy, cap, true)?;
    Ok(match found.into_iter().next() {
        None => ChiValidity::ChiValid,
        Some(v) => ChiValidity::Violated(v),
    })
}

/// Checks χ-validity: every path from an initial state to a secret state
/// must accumulate distinct-event clearance at least the secret's level.
pub fn check_chi_valid(
    inst: &SppInstance,
    policy: &Policy,
) -> Result<ChiValidity, ChiLimitExceeded> {
    check_chi_valid_with_cap(inst, policy, DEFAULT_CHI_CAP)
}

/// Whether the instance is solvable at all: the full policy (every
/// protectable event) is valid (`chi = false`) or χ-valid (`chi = true`).
pub fn is_solvable(inst: &SppInstance, chi: bool) -> Result<bool, ChiLimitExceeded> {
    let full = inst.full_policy();
    if chi {
        Ok(check_chi_valid(inst, &full)?.is_valid())
    } else {
        Ok(check_valid(inst, &full).is_valid())
    }
}
