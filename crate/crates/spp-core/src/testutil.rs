//! Shared fixtures and independent oracles for unit tests. The oracles here
//! deliberately avoid the library's search machinery: validity is recomputed
//! by layered path relaxation, χ-validity by exhaustive subset reachability.

use crate::generate::SplitMix64;
use crate::instance::{InstanceBuilder, Policy, SppInstance, State};

pub type SmallRng = SplitMix64;

/// Canonical two-step instance: three states in a line over {a, b}, secret
/// level 2 at the end, unit clearances and costs. Its accepted strings are
/// exactly aa, ab, ba, bb.
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
    crate::instance::parse_instance(two_step_text()).unwrap()
}

/// Minimum per-occurrence clearance from `init` to every state over all
/// paths of at most `cap` steps, by brute-force layered relaxation.
pub fn enumerate_min_clearance(
    inst: &SppInstance,
    policy: &Policy,
    init: State,
    cap: usize,
) -> Vec<Option<u64>> {
    let w = |e: crate::instance::Event| {
        if policy.contains(e) {
            inst.clearance(e).unwrap()
        } else {
            0
        }
    };
    let n = inst.state_count();
    let mut best: Vec<Option<u64>> = vec![None; n];
    let mut layer: Vec<Option<u64>> = vec![None; n];
    layer[init.index()] = Some(0);
    best[init.index()] = Some(0);
    for _ in 0..cap {
        let mut next: Vec<Option<u64>> = vec![None; n];
        for t in inst.transitions() {
            if let Some(d) = layer[t.from.index()] {
                let nd = d + w(t.event);
                let slot = &mut next[t.to.index()];
                if slot.is_none_or(|old| nd < old) {
                    *slot = Some(nd);
                }
            }
        }
        for (i, d) in next.iter().enumerate() {
            if let Some(nd) = *d {
                if best[i].is_none_or(|old| nd < old) {
                    best[i] = Some(nd);
                }
            }
        }
        layer = next;
    }
    best
}

/// Minimum distinct-event clearance from `init` to every state, by
/// exhaustive reachability over (state, policy-subset) pairs.
pub fn enumerate_chi_minimum(inst: &SppInstance, policy: &Policy, init: State) -> Vec<Option<u64>> {
    assert!(policy.len() <= 16, "oracle is for small policies");
    let bit = |e: crate::instance::Event| policy.events().iter().position(|&x| x == e);
    let n = inst.state_count();
    let masks = 1usize << policy.len();
    let mut reach = vec![false; n * masks];
    let mut stack = vec![(init, 0usize)];
    reach[init.index() * masks] = true;
    while let Some((u, mask)) = stack.pop() {
        for t in inst.transitions() {
            if t.from != u {
                continue;
            }
            let nmask = match bit(t.event) {
                Some(b) => mask | 1 << b,
                None => mask,
            };
            let idx = t.to.index() * masks + nmask;
            if !reach[idx] {
                reach[idx] = true;
                stack.push((t.to, nmask));
            }
        }
    }
    let mask_weight = |mask: usize| -> u64 {
        policy
            .events()
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, &e)| inst.clearance(e).unwrap())
            .sum()
    };
    (0..n)
        .map(|s| {
            (0..masks)
                .filter(|&m| reach[s * masks + m])
                .map(mask_weight)
                .min()
        })
        .collect()
}

/// Random sparse instance with at most `max_states` states and `max_events`
/// protectable events; attribute values in 1..=3, roughly two transitions
/// per state, one initial state, and a sprinkling of secrets.
pub fn random_small_instance(
    rng: &mut SmallRng,
    max_states: usize,
    max_events: usize,
) -> SppInstance {
    let states = 2 + rng.below(max_states as u64 - 1) as usize;
    let events = 1 + rng.below(max_events as u64) as usize;
    let mut b = InstanceBuilder::new();
    for i in 0..states {
        // State 0 is initial, so it stays non-secret.
        let level = if i > 0 && rng.below(3) == 0 {
            1 + rng.below(3)
        } else {
            0
        };
        b.state(&format!("s{i}"), level).unwrap();
    }
    for j in 0..events {
        b.protectable(&format!("e{j}"), 1 + rng.below(3), 1 + rng.below(3))
            .unwrap();
    }
    let transitions = 2 * states;
    for _ in 0..transitions {
        let from = rng.below(states as u64) as usize;
        let event = rng.below(events as u64) as usize;
        let to = rng.below(states as u64) as usize;
        b.transition(&format!("s{from}"), &format!("e{event}"), &format!("s{to}"))
            .unwrap();
    }
    b.initial("s0").unwrap();
    b.build().unwrap()
}
