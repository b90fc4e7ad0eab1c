//! Random and converted instances.
//!
//! Random NFAs follow the Tabakov-Vardi model: for each alphabet symbol,
//! exactly `ceil(density * states)` distinct (from, to) pairs chosen
//! uniformly without replacement, plus uniformly chosen initial and
//! accepting state sets. Generation is fully determined by a 64-bit seed
//! through the splitmix generator below, so instances reproduce bit-for-bit
//! across platforms and languages.

use std::collections::HashSet;

use thiserror::Error;

use crate::analysis::{is_solvable, ChiLimitExceeded};
use crate::instance::{InstanceBuilder, SppInstance};

/// Splitmix-style 64-bit generator with an explicit state update:
///
/// ```text
/// state += 0x9E3779B97F4A7C15
/// z = state
/// z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
/// z = (z ^ (z >> 27)) * 0x94D049BB133111EB
/// output = z ^ (z >> 31)
/// ```
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in `0..n` by rejection, so the distribution is exact.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let bound = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next_u64();
            if v < bound {
                return v % n;
            }
        }
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range(&mut self, lo: u64, hi: u64) -> u64 {
        assert!(lo <= hi);
        lo + self.below(hi - lo + 1)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// How the transition density parameter is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DensityMode {
    /// `ceil(density * states)` transitions per alphabet symbol (the
    /// standard model).
    #[default]
    PerSymbol,
    /// `ceil(density * states)` transitions in total, drawn from the whole
    /// (from, symbol, to) space.
    Total,
}

#[derive(Clone, Debug)]
pub struct TvParams {
    pub states: usize,
    pub alphabet: usize,
    /// Transitions per state (per symbol by default; see [`DensityMode`]).
    pub density: f64,
    /// Fraction of states that are initial; at least one state is always
    /// initial, and state 0 always is.
    pub init_density: f64,
    /// Fraction of states that are accepting, chosen among non-initial
    /// states.
    pub accept_density: f64,
    pub seed: u64,
    pub density_mode: DensityMode,
}

impl TvParams {
    pub fn new(states: usize, alphabet: usize, density: f64, seed: u64) -> Self {
        TvParams {
            states,
            alphabet,
            density,
            init_density: 0.001,
            accept_density: 0.1,
            seed,
            density_mode: DensityMode::PerSymbol,
        }
    }

    /// Exactly one initial state.
    pub fn single_initial(mut self) -> Self {
        self.init_density = 0.0;
        self
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("density {density} too high: needs {requested} distinct pairs out of {available}")]
    DensityTooHigh {
        density: String,
        requested: u64,
        available: u64,
    },
    #[error("no solvable instance within {0} attempts")]
    RetriesExhausted(u32),
    #[error(transparent)]
    Chi(#[from] ChiLimitExceeded),
}

/// A bare NFA: named states and events, transitions, initial and accepting
/// sets. No protection attributes yet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NfaSkeleton {
    pub state_names: Vec<String>,
    pub event_names: Vec<String>,
    /// (from, event, to) as indices into the name tables.
    pub transitions: Vec<(u32, u32, u32)>,
    pub initial: Vec<u32>,
    pub accepting: Vec<u32>,
}

/// Draws `count` distinct values below `space` uniformly. Rejection is fine
/// while the draw is sparse; past half the space the remaining values are
/// shuffled instead.
fn sample_distinct(rng: &mut SplitMix64, count: u64, space: u64, out: &mut Vec<u64>) {
    out.clear();
    if count * 2 <= space {
        let mut seen = HashSet::with_capacity(count as usize);
        while (out.len() as u64) < count {
            let v = rng.below(space);
            if seen.insert(v) {
                out.push(v);
            }
        }
    } else {
        // Partial Fisher-Yates over the materialized space.
        let mut pool: Vec<u64> = (0..space).collect();
        for i in 0..count as usize {
            let j = i + rng.below(space - i as u64) as usize;
            pool.swap(i, j);
            out.push(pool[i]);
        }
    }
}

/// Generates a Tabakov-Vardi skeleton: per symbol, exactly
/// `ceil(density * states)` distinct transitions; `max(1,
/// ceil(init_density * states))` initial states including state 0;
/// `ceil(accept_density * states)` accepting states among non-initial
/// states (clamped to the available pool).
pub fn generate_tabakov_vardi(params: &TvParams) -> Result<NfaSkeleton, GenError> {
    let q = params.states as u64;
    let k = params.alphabet as u64;
    if q == 0 || k == 0 {
        return Err(GenError::InvalidParams(
            "states and alphabet must be at least 1",
        ));
    }
    if params.density.is_nan() || params.density < 0.0 {
        return Err(GenError::InvalidParams("density must be nonnegative"));
    }
    if !(0.0..=1.0).contains(&params.init_density) || !(0.0..=1.0).contains(&params.accept_density)
    {
        return Err(GenError::InvalidParams("densities must be within [0, 1]"));
    }
    let per_quota = (params.density * q as f64).ceil() as u64;
    let pair_space = q * q;
    match params.density_mode {
        DensityMode::PerSymbol => {
            if per_quota > pair_space {
                return Err(GenError::DensityTooHigh {
                    density: format!("{}", params.density),
                    requested: per_quota,
                    available: pair_space,
                });
            }
        }
        DensityMode::Total => {
            if per_quota > pair_space * k {
                return Err(GenError::DensityTooHigh {
                    density: format!("{}", params.density),
                    requested: per_quota,
                    available: pair_space * k,
                });
            }
        }
    }

    let mut rng = SplitMix64::new(params.seed);
    let mut transitions: Vec<(u32, u32, u32)> = Vec::new();
    let mut scratch = Vec::new();
    match params.density_mode {
        DensityMode::PerSymbol => {
            for symbol in 0..k {
                sample_distinct(&mut rng, per_quota, pair_space, &mut scratch);
                for &code in &scratch {
                    transitions.push(((code / q) as u32, symbol as u32, (code % q) as u32));
                }
            }
        }
        DensityMode::Total => {
            sample_distinct(&mut rng, per_quota, pair_space * k, &mut scratch);
            for &code in &scratch {
                let symbol = code / pair_space;
                let pair = code % pair_space;
                transitions.push(((pair / q) as u32, symbol as u32, (pair % q) as u32));
            }
        }
    }

    // Initial set: state 0 plus additional uniform picks.
    let init_count = ((params.init_density * q as f64).ceil() as u64).max(1);
    let mut initial: Vec<u32> = vec![0];
    if init_count > 1 {
        sample_distinct(&mut rng, init_count - 1, q - 1, &mut scratch);
        initial.extend(scratch.iter().map(|&v| (v + 1) as u32));
    }
    initial.sort_unstable();

    // Accepting set: uniform among non-initial states.
    let accept_quota = (params.accept_density * q as f64).ceil() as u64;
    let pool: Vec<u32> = (0..q as u32).filter(|s| !initial.contains(s)).collect();
    let take = accept_quota.min(pool.len() as u64);
    let mut accepting: Vec<u32> = Vec::new();
    if take > 0 {
        sample_distinct(&mut rng, take, pool.len() as u64, &mut scratch);
        accepting.extend(scratch.iter().map(|&i| pool[i as usize]));
    }
    accepting.sort_unstable();

    let digits = (q.max(2) - 1).to_string().len();
    Ok(NfaSkeleton {
        state_names: (0..q).map(|i| format!("s{i:0digits$}")).collect(),
        event_names: (0..k).map(|j| format!("a{j}")).collect(),
        transitions,
        initial,
        accepting,
    })
}

/// Conversion result: the instance plus the names of accepting states that
/// had to be demoted to non-secret because they are initial.
#[derive(Clone, Debug)]
pub struct Decorated {
    pub instance: SppInstance,
    pub demoted: Vec<String>,
}

fn build_instance(
    skeleton: &NfaSkeleton,
    mut attrs: impl FnMut(usize) -> (u64, u64),
    mut level: impl FnMut(usize) -> u64,
) -> Decorated {
    let mut demoted = Vec::new();
    let mut secret = vec![false; skeleton.state_names.len()];
    for &a in &skeleton.accepting {
        if skeleton.initial.contains(&a) {
            demoted.push(skeleton.state_names[a as usize].clone());
        } else {
            secret[a as usize] = true;
        }
    }
    let mut b = InstanceBuilder::new();
    for (i, name) in skeleton.state_names.iter().enumerate() {
        let l = if secret[i] { level(i) } else { 0 };
        b.state(name, l).expect("skeleton state names are unique");
    }
    for (j, name) in skeleton.event_names.iter().enumerate() {
        let (clearance, cost) = attrs(j);
        b.protectable(name, clearance, cost)
            .expect("skeleton event names are unique");
    }
    for &(f, e, t) in &skeleton.transitions {
        b.transition(
            &skeleton.state_names[f as usize],
            &skeleton.event_names[e as usize],
            &skeleton.state_names[t as usize],
        )
        .expect("skeleton transitions are in range");
    }
    for &i in &skeleton.initial {
        b.initial(&skeleton.state_names[i as usize])
            .expect("initial states are non-secret");
    }
    Decorated {
        instance: b.build().expect("skeleton yields a valid instance"),
        demoted,
    }
}

/// Decorates a skeleton into an SPP instance: every event protectable with
/// clearance and cost drawn uniformly from `lo..=hi`, every accepting state
/// secret with a uniform level in the same range. Accepting states that are
/// initial are demoted to non-secret and reported. Deterministic in `seed`.
pub fn decorate_random_spp(skeleton: &NfaSkeleton, seed: u64, lo: u64, hi: u64) -> Decorated {
    assert!(lo <= hi, "empty attribute range");
    let mut rng = SplitMix64::new(seed);
    // Draw order is pinned: per event clearance then cost, then per secret
    // state the level, each in index order.
    let attrs: Vec<(u64, u64)> = (0..skeleton.event_names.len())
        .map(|_| {
            let clearance = rng.range(lo, hi);
            let cost = rng.range(lo, hi);
            (clearance, cost)
        })
        .collect();
    build_instance(skeleton, |j| attrs[j], |_| rng.range(lo, hi))
}

/// Converts an accepting-state automaton: every event protectable with
/// clearance 1 and cost 1, every accepting state secret with level 1
/// (initial-accepting states demoted as in [`decorate_random_spp`]).
pub fn from_accepting_automaton(skeleton: &NfaSkeleton) -> Decorated {
    build_instance(skeleton, |_| (1, 1), |_| 1)
}

/// Reads an instance back as a skeleton: secrets become accepting states,
/// protection attributes are dropped.
pub fn skeleton_from_instance(inst: &SppInstance) -> NfaSkeleton {
    NfaSkeleton {
        state_names: inst
            .states()
            .map(|s| inst.state_name(s).to_string())
            .collect(),
        event_names: inst
            .events()
            .map(|e| inst.event_name(e).to_string())
            .collect(),
        transitions: inst
            .transitions()
            .iter()
            .map(|t| (t.from.0, t.event.0, t.to.0))
            .collect(),
        initial: inst.initial_states().iter().map(|s| s.0).collect(),
        accepting: inst.secret_states().map(|s| s.0).collect(),
    }
}

/// A solvable sample and the number of regenerations it took.
#[derive(Clone, Debug)]
pub struct Sampled {
    pub instance: SppInstance,
    pub retries: u32,
}

/// Generates and decorates until the instance is solvable (the full policy
/// passes the check for the requested mode), deriving fresh seeds per
/// attempt. Unsolvable draws are regenerated up to `max_retries` times.
pub fn sample_solvable(
    params: &TvParams,
    value_range: (u64, u64),
    max_retries: u32,
    chi: bool,
) -> Result<Sampled, GenError> {
    assert!(max_retries >= 1);
    for attempt in 0..max_retries {
        let attempt_seed = params.seed.wrapping_add(attempt as u64);
        let mut root = SplitMix64::new(attempt_seed);
        let gen_seed = root.next_u64();
        let dec_seed = root.next_u64();
        let skeleton = generate_tabakov_vardi(&TvParams {
            seed: gen_seed,
            ..params.clone()
        })?;
        let decorated = decorate_random_spp(&skeleton, dec_seed, value_range.0, value_range.1);
        if is_solvable(&decorated.instance, chi)? {
            return Ok(Sampled {
                instance: decorated.instance,
                retries: attempt,
            });
        }
    }
    Err(GenError::RetriesExhausted(max_retries))
}
