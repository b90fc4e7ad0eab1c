//! Shared fixtures for the integration tests.

#![allow(dead_code)]

use spp_core::generate::SplitMix64;
use spp_core::instance::{InstanceBuilder, SppInstance};
use spp_core::oracle::{CnfFormula, Qbf2Formula};

pub fn two_step_text() -> &'static str {
    "spp 1\n\
     state f secret 2\n\
     state q0\n\
     state q1\n\
     initial q0\n\
     event a protectable clearance 1 cost 1\n\
     event b protectable clearance 1 cost 1\n\
     trans q0 a q1\n\
     trans q0 b q1\n\
     trans q1 a f\n\
     trans q1 b f\n"
}

pub fn two_step() -> SppInstance {
    spp_core::parse_instance(two_step_text()).unwrap()
}

/// Random sparse instance: `2..=max_states` states, up to `max_events`
/// protectable events with attributes in `1..=attr_hi`, two transitions per
/// state, one initial state.
pub fn random_instance(
    rng: &mut SplitMix64,
    max_states: usize,
    max_events: usize,
    attr_hi: u64,
) -> SppInstance {
    let states = 2 + rng.below(max_states as u64 - 1) as usize;
    let events = 1 + rng.below(max_events as u64) as usize;
    let mut b = InstanceBuilder::new();
    for i in 0..states {
        let level = if i > 0 && rng.below(3) == 0 {
            1 + rng.below(attr_hi)
        } else {
            0
        };
        b.state(&format!("s{i}"), level).unwrap();
    }
    for j in 0..events {
        b.protectable(
            &format!("e{j}"),
            1 + rng.below(attr_hi),
            1 + rng.below(attr_hi),
        )
        .unwrap();
    }
    for _ in 0..2 * states {
        let from = rng.below(states as u64);
        let event = rng.below(events as u64);
        let to = rng.below(states as u64);
        b.transition(&format!("s{from}"), &format!("e{event}"), &format!("s{to}"))
            .unwrap();
    }
    b.initial("s0").unwrap();
    b.build().unwrap()
}

/// Random 3-CNF with distinct clauses, `1..=max_vars` variables and up to
/// `max_clauses` clauses.
pub fn random_cnf(rng: &mut SplitMix64, max_vars: u32, max_clauses: usize) -> CnfFormula {
    let n = 1 + rng.below(max_vars as u64) as u32;
    let m = rng.below(max_clauses as u64 + 1) as usize;
    let mut clauses: Vec<Vec<i32>> = Vec::new();
    let mut tries = 0;
    while clauses.len() < m && tries < 300 {
        tries += 1;
        let width = (1 + rng.below(3) as usize).min(n as usize);
        let mut vars: Vec<u32> = Vec::new();
        while vars.len() < width {
            let v = 1 + rng.below(n as u64) as u32;
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        let mut clause: Vec<i32> = vars
            .iter()
            .map(|&v| {
                if rng.below(2) == 0 {
                    v as i32
                } else {
                    -(v as i32)
                }
            })
            .collect();
        clause.sort_by_key(|l| (l.unsigned_abs(), *l < 0));
        if !clauses.contains(&clause) {
            clauses.push(clause);
        }
    }
    CnfFormula::new(n, clauses).unwrap()
}

/// Random 2-QBF formula with the given block sizes and up to `max_conjuncts`
/// conjuncts of 1..=3 distinct literals.
pub fn random_qdnf(rng: &mut SplitMix64, n: usize, r: usize, max_conjuncts: usize) -> Qbf2Formula {
    let total = n + r;
    assert!(total >= 1);
    let exists: Vec<u32> = (1..=n as u32).collect();
    let forall: Vec<u32> = (n as u32 + 1..=total as u32).collect();
    let m = 1 + rng.below(max_conjuncts as u64) as usize;
    let mut conjuncts = Vec::with_capacity(m);
    for _ in 0..m {
        let width = (1 + rng.below(3) as usize).min(total);
        let mut vars: Vec<u32> = Vec::new();
        while vars.len() < width {
            let v = 1 + rng.below(total as u64) as u32;
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        let conjunct: Vec<i32> = vars
            .iter()
            .map(|&v| {
                if rng.below(2) == 0 {
                    v as i32
                } else {
                    -(v as i32)
                }
            })
            .collect();
        conjuncts.push(conjunct);
    }
    Qbf2Formula::new(exists, forall, conjuncts).unwrap()
}
