//! Benchmark harness: generates batches of random solvable instances,
//! solves them on a worker pool, and emits one CSV row per run plus a
//! median/95th-percentile summary per (states, alphabet) group.
//!
//! Timing covers the solver call only; generation and I/O are excluded.
//! Solve results (status, cost, iterations, cuts) are deterministic in the
//! configured seed regardless of worker count; only the runtime column
//! varies.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use spp_core::generate::{sample_solvable, SplitMix64, TvParams};
use spp_core::ilp::{solve_spp, SolverConfig};

pub const CSV_HEADER: &str =
    "instance_id,states,events,initials,mode,status,cost,iterations,cuts,runtime_ms";

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub states: Vec<usize>,
    pub alphabet: Vec<usize>,
    pub runs: usize,
    pub density_lo: f64,
    pub density_hi: f64,
    pub seed: u64,
    pub single_initial: bool,
    /// 0 = use available parallelism.
    pub workers: usize,
    pub attr_lo: u64,
    pub attr_hi: u64,
    pub chi: bool,
    pub max_iters: u64,
    pub time_limit: Option<Duration>,
    pub init_density: f64,
    pub accept_density: f64,
    pub max_retries: u32,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            states: vec![100],
            alphabet: vec![2],
            runs: 10,
            density_lo: 0.8,
            density_hi: 5.0,
            seed: 0,
            single_initial: false,
            workers: 0,
            attr_lo: 1,
            attr_hi: 10,
            chi: false,
            max_iters: 5000,
            time_limit: None,
            init_density: 0.001,
            accept_density: 0.1,
            max_retries: 100,
        }
    }
}

fn parse_list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    value
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|e| anyhow!("bad list item `{p}`: {e}"))
        })
        .collect()
}

fn parse_range(value: &str) -> Result<(f64, f64)> {
    if let Some((lo, hi)) = value.split_once("..") {
        Ok((lo.trim().parse()?, hi.trim().parse()?))
    } else {
        let v: f64 = value.trim().parse()?;
        Ok((v, v))
    }
}

impl BenchConfig {
    /// Parses the line-oriented `key = value` format. Unknown keys are
    /// errors; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = BenchConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected `key = value`", idx + 1))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "states" => config.states = parse_list(value)?,
                "alphabet" => config.alphabet = parse_list(value)?,
                "runs" => config.runs = value.parse()?,
                "density" => (config.density_lo, config.density_hi) = parse_range(value)?,
                "seed" => config.seed = value.parse()?,
                "single_initial" => config.single_initial = value.parse()?,
                "workers" => config.workers = value.parse()?,
                "values" => {
                    let (lo, hi) = parse_range(value)?;
                    config.attr_lo = lo as u64;
                    config.attr_hi = hi as u64;
                }
                "mode" => {
                    config.chi = match value {
                        "validity" => false,
                        "chi" => true,
                        other => bail!("line {}: unknown mode `{other}`", idx + 1),
                    }
                }
                "max_iters" => config.max_iters = value.parse()?,
                "time_limit_ms" => {
                    let ms: u64 = value.parse()?;
                    config.time_limit = (ms > 0).then(|| Duration::from_millis(ms));
                }
                "init_density" => config.init_density = value.parse()?,
                "accept_density" => config.accept_density = value.parse()?,
                "max_retries" => config.max_retries = value.parse()?,
                other => bail!("line {}: unknown key `{other}`", idx + 1),
            }
        }
        if config.states.is_empty() || config.alphabet.is_empty() || config.runs == 0 {
            bail!("states, alphabet, and runs must be nonempty");
        }
        Ok(config)
    }

    fn mode_name(&self) -> &'static str {
        if self.chi {
            "chi"
        } else {
            "validity"
        }
    }
}

/// One CSV row. Runtime is wall-clock around the solve only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchRecord {
    pub instance_id: String,
    pub states: usize,
    pub events: usize,
    pub initials: usize,
    pub mode: String,
    pub status: String,
    pub cost: Option<u64>,
    pub iterations: u64,
    pub cuts: usize,
    pub runtime_ms: u64,
}

impl BenchRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.instance_id,
            self.states,
            self.events,
            self.initials,
            self.mode,
            self.status,
            self.cost.map(|c| c.to_string()).unwrap_or_default(),
            self.iterations,
            self.cuts,
            self.runtime_ms
        )
    }
}

pub fn to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug)]
struct Job {
    index: usize,
    states: usize,
    alphabet: usize,
    run: usize,
}

fn run_job(config: &BenchConfig, job: &Job) -> BenchRecord {
    let instance_id = format!("q{}_k{}_r{}", job.states, job.alphabet, job.run);
    let instance_seed = config.seed.wrapping_add(job.index as u64);
    let mut rng = SplitMix64::new(instance_seed);
    let density = config.density_lo + rng.unit_f64() * (config.density_hi - config.density_lo);

    let mut params = TvParams::new(job.states, job.alphabet, density, rng.next_u64());
    params.init_density = if config.single_initial {
        0.0
    } else {
        config.init_density
    };
    params.accept_density = config.accept_density;

    let sampled = match sample_solvable(
        &params,
        (config.attr_lo, config.attr_hi),
        config.max_retries,
        config.chi,
    ) {
        Ok(s) => s,
        Err(err) => {
            return BenchRecord {
                instance_id,
                states: job.states,
                events: 0,
                initials: 0,
                mode: config.mode_name().to_string(),
                status: format!("gen_error:{err}"),
                cost: None,
                iterations: 0,
                cuts: 0,
                runtime_ms: 0,
            }
        }
    };
    let inst = sampled.instance;
    let solver_config = SolverConfig {
        chi: config.chi,
        max_iters: config.max_iters,
        time_limit: config.time_limit,
        ..SolverConfig::default()
    };
    let report = solve_spp(&inst, &solver_config);
    BenchRecord {
        instance_id,
        states: inst.state_count(),
        events: inst.event_count(),
        initials: inst.initial_states().len(),
        mode: config.mode_name().to_string(),
        status: report.status.to_string(),
        cost: report.cost,
        iterations: report.iterations,
        cuts: report.cuts,
        runtime_ms: report.wall_time.as_millis() as u64,
    }
}

/// Runs the whole batch on a worker pool and returns rows in job order.
pub fn bench_run(config: &BenchConfig) -> Vec<BenchRecord> {
    let mut jobs = Vec::new();
    for &states in &config.states {
        for &alphabet in &config.alphabet {
            for run in 0..config.runs {
                jobs.push(Job {
                    index: jobs.len(),
                    states,
                    alphabet,
                    run,
                });
            }
        }
    }

    let workers = if config.workers > 0 {
        config.workers
    } else {
        thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    }
    .min(jobs.len())
    .max(1);

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, BenchRecord)>();
    thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let jobs = &jobs;
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let record = run_job(config, &jobs[i]);
                if tx.send((i, record)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
    });

    let mut slots: Vec<Option<BenchRecord>> = vec![None; jobs.len()];
    for (i, record) in rx {
        slots[i] = Some(record);
    }
    slots
        .into_iter()
        .map(|s| s.expect("every job reports"))
        .collect()
}

/// Per-(states, alphabet) runtime statistics, nearest-rank percentiles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchSummary {
    pub states: usize,
    pub alphabet: usize,
    pub n_runs: usize,
    pub median_ms: u64,
    pub p95_ms: u64,
}

/// Nearest-rank percentile of a sorted slice: element at rank
/// `ceil(p/100 * n)`.
pub fn nearest_rank(sorted: &[u64], percentile: u32) -> u64 {
    assert!(!sorted.is_empty());
    let n = sorted.len() as u64;
    let rank = (percentile as u64 * n).div_ceil(100).max(1);
    sorted[(rank - 1) as usize]
}

/// Groups solver rows (generation failures are excluded) and computes
/// median and nearest-rank p95 runtimes.
pub fn summarize(records: &[BenchRecord]) -> Vec<BenchSummary> {
    let mut groups: Vec<(usize, usize, Vec<u64>)> = Vec::new();
    for r in records {
        if r.status.starts_with("gen_error") {
            continue;
        }
        let key = (r.states, r.events);
        match groups.iter_mut().find(|(s, a, _)| (*s, *a) == key) {
            Some((_, _, v)) => v.push(r.runtime_ms),
            None => groups.push((key.0, key.1, vec![r.runtime_ms])),
        }
    }
    groups.sort_by_key(|&(s, a, _)| (s, a));
    groups
        .into_iter()
        .map(|(states, alphabet, mut times)| {
            times.sort_unstable();
            BenchSummary {
                states,
                alphabet,
                n_runs: times.len(),
                median_ms: nearest_rank(&times, 50),
                p95_ms: nearest_rank(&times, 95),
            }
        })
        .collect()
}

/// Renders the summary the way the tables report it: seconds with three
/// decimals, `median [p95]` per cell.
pub fn render_summary(summaries: &[BenchSummary]) -> String {
    let secs = |ms: u64| ms as f64 / 1000.0;
    let mut out = String::from("states\talphabet\truns\truntime_s median [p95]\n");
    for s in summaries {
        writeln!(
            out,
            "{}\t{}\t{}\t{:.3} [{:.3}]",
            s.states,
            s.alphabet,
            s.n_runs,
            secs(s.median_ms),
            secs(s.p95_ms)
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let text = "# desk config\nstates = 20, 30\nalphabet = 2\nruns = 3\ndensity = 1.0..2.0\nseed = 9\nworkers = 2\nvalues = 1..3\n";
        let config = BenchConfig::parse(text).unwrap();
        assert_eq!(config.states, vec![20, 30]);
        assert_eq!(config.alphabet, vec![2]);
        assert_eq!(config.runs, 3);
        assert_eq!((config.density_lo, config.density_hi), (1.0, 2.0));
        assert_eq!(config.seed, 9);
        assert_eq!((config.attr_lo, config.attr_hi), (1, 3));
        assert!(BenchConfig::parse("bogus = 1\n").is_err());
        assert!(BenchConfig::parse("runs = 0\n").is_err());
    }

    #[test]
    fn nearest_rank_percentiles() {
        let v: Vec<u64> = (1..=10).collect();
        assert_eq!(nearest_rank(&v, 50), 5);
        assert_eq!(nearest_rank(&v, 95), 10);
        assert_eq!(nearest_rank(&v, 100), 10);
        assert_eq!(nearest_rank(&[7], 50), 7);
        let odd: Vec<u64> = (1..=9).collect();
        assert_eq!(nearest_rank(&odd, 50), 5);
    }

    #[test]
    fn csv_rows_handle_missing_cost() {
        let r = BenchRecord {
            instance_id: "q2_k1_r0".into(),
            states: 2,
            events: 1,
            initials: 1,
            mode: "validity".into(),
            status: "infeasible".into(),
            cost: None,
            iterations: 0,
            cuts: 0,
            runtime_ms: 3,
        };
        assert_eq!(r.csv_row(), "q2_k1_r0,2,1,1,validity,infeasible,,0,0,3");
    }
}
