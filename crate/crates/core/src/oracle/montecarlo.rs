//! Seeded Monte Carlo evaluation. Every query of every trial draws from
//! its own ChaCha stream keyed by `(seed, trial, query)`, so results do not
//! depend on scheduling and identical seeds give identical statistics.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{DpTable, Routing};
use crate::error::{domain, Error, Result};
use crate::instance::{MultiResourceInstance, SingleResourceInstance};
use crate::knapsack::{self, ThresholdDecision};
use crate::kunit::{self, MagicianPolicy};
use crate::numeric::KahanSum;

const CHUNK: usize = 1024;

/// Generator for one query of one trial.
pub fn query_rng(seed: u64, trial: u64, query: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng.set_word_pos(query as u128 * 64);
    rng
}

/// Online serve/reject rule on a single resource.
pub trait OnlinePolicy: Sync {
    /// Whether to serve scenario `scenario` of query `t` given the units
    /// consumed so far and a uniform draw on `[0, 1)`.
    fn decide(&self, t: usize, scenario: usize, consumed_units: u32, draw: f64) -> bool;
}

/// Summary of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStats {
    pub trials: usize,
    pub seed: u64,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(trials)`.
    pub se: f64,
    /// Served over active arrivals, per query; NaN without arrivals.
    pub rates: Vec<f64>,
    pub arrivals: Vec<u64>,
    pub served: Vec<u64>,
    /// Smallest rate among queries with at least one arrival.
    pub min_conditional_rate: f64,
    /// Times a policy asked to serve an item that did not fit.
    pub capacity_violations: u64,
}

struct Chunk {
    rewards: Vec<f64>,
    arrivals: Vec<u64>,
    served: Vec<u64>,
    violations: u64,
}

#[cfg(feature = "parallel")]
fn map_chunks<F: Fn(Range<usize>) -> Chunk + Sync>(trials: usize, f: F) -> Vec<Chunk> {
    use rayon::prelude::*;
    let n = trials.div_ceil(CHUNK);
    (0..n)
        .into_par_iter()
        .map(|i| f(i * CHUNK..((i + 1) * CHUNK).min(trials)))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn map_chunks<F: Fn(Range<usize>) -> Chunk>(trials: usize, f: F) -> Vec<Chunk> {
    let n = trials.div_ceil(CHUNK);
    (0..n)
        .map(|i| f(i * CHUNK..((i + 1) * CHUNK).min(trials)))
        .collect()
}

fn summarize(chunks: Vec<Chunk>, trials: usize, seed: u64, queries: usize) -> SimStats {
    let mut arrivals = vec![0u64; queries];
    let mut served = vec![0u64; queries];
    let mut capacity_violations = 0;
    let mut sum = KahanSum::new();
    for c in &chunks {
        for (a, b) in arrivals.iter_mut().zip(&c.arrivals) {
            *a += b;
        }
        for (a, b) in served.iter_mut().zip(&c.served) {
            *a += b;
        }
        capacity_violations += c.violations;
        c.rewards.iter().for_each(|&r| sum.add(r));
    }
    let mean = sum.value() / trials as f64;
    let mut sq = KahanSum::new();
    for c in &chunks {
        c.rewards
            .iter()
            .for_each(|&r| sq.add((r - mean) * (r - mean)));
    }
    let var = if trials > 1 {
        sq.value() / (trials - 1) as f64
    } else {
        0.0
    };
    let rates: Vec<f64> = arrivals
        .iter()
        .zip(&served)
        .map(|(&a, &s)| if a > 0 { s as f64 / a as f64 } else { f64::NAN })
        .collect();
    let min_conditional_rate = rates
        .iter()
        .copied()
        .filter(|r| !r.is_nan())
        .fold(f64::NAN, f64::min);
    SimStats {
        trials,
        seed,
        mean,
        se: (var / trials as f64).sqrt(),
        rates,
        arrivals,
        served,
        min_conditional_rate,
        capacity_violations,
    }
}

fn pick<I: Iterator<Item = f64>>(probs: I, u: f64) -> Option<usize> {
    let mut cum = 0.0;
    for (i, p) in probs.enumerate() {
        cum += p;
        if u < cum {
            return Some(i);
        }
    }
    None
}

/// Runs `policy` on `trials` independent realizations of `inst`.
pub fn monte_carlo<P: OnlinePolicy + ?Sized>(
    policy: &P,
    inst: &SingleResourceInstance,
    trials: usize,
    seed: u64,
) -> Result<SimStats> {
    if trials == 0 {
        return domain("at least one trial is required");
    }
    let n = inst.horizon();
    let cap = inst.capacity_units();
    let chunks = map_chunks(trials, |range| {
        let mut c = Chunk {
            rewards: Vec::with_capacity(range.len()),
            arrivals: vec![0; n],
            served: vec![0; n],
            violations: 0,
        };
        for trial in range {
            let mut consumed = 0u32;
            let mut total = 0.0;
            for (t, q) in inst.queries().iter().enumerate() {
                let mut rng = query_rng(seed, trial as u64, t as u64);
                let u: f64 = rng.gen();
                let draw: f64 = rng.gen();
                let Some(s) = pick(q.scenarios().iter().map(|s| s.prob), u) else {
                    continue;
                };
                let sc = q.scenarios()[s];
                if sc.is_inactive() {
                    continue;
                }
                c.arrivals[t] += 1;
                if policy.decide(t, s, consumed, draw) {
                    if consumed + sc.size_units > cap {
                        c.violations += 1;
                    } else {
                        consumed += sc.size_units;
                        total += sc.reward;
                        c.served[t] += 1;
                    }
                }
            }
            c.rewards.push(total);
        }
        c
    });
    Ok(summarize(chunks, trials, seed, n))
}

/// Runs one policy per resource on the routed streams of `mi`. Each query
/// uses three draws: the scenario, the resource, and the policy's own.
pub fn simulate_routed(
    mi: &MultiResourceInstance,
    routing: &Routing,
    policies: &[&dyn OnlinePolicy],
    trials: usize,
    seed: u64,
) -> Result<SimStats> {
    if policies.len() != mi.resources() {
        return domain(format!(
            "{} policies for {} resources",
            policies.len(),
            mi.resources()
        ));
    }
    if trials == 0 {
        return domain("at least one trial is required");
    }
    let n = mi.horizon();
    let m = mi.resources();
    let cap = mi.grid().capacity_units();
    let chunks = map_chunks(trials, |range| {
        let mut c = Chunk {
            rewards: Vec::with_capacity(range.len()),
            arrivals: vec![0; n],
            served: vec![0; n],
            violations: 0,
        };
        for trial in range {
            let mut consumed = vec![0u32; m];
            let mut total = 0.0;
            for (t, q) in mi.queries().iter().enumerate() {
                let mut rng = query_rng(seed, trial as u64, t as u64);
                let u1: f64 = rng.gen();
                let u2: f64 = rng.gen();
                let u3: f64 = rng.gen();
                let Some(s) = pick(q.iter().map(|s| s.prob), u1) else {
                    continue;
                };
                let sc = &q[s];
                if sc.rewards.iter().all(|&r| r == 0.0) && sc.sizes_units.iter().all(|&d| d == 0) {
                    continue;
                }
                c.arrivals[t] += 1;
                let Some(j) = pick(routing.x[t][s].iter().copied(), u2) else {
                    continue;
                };
                let Some(local) = routing.scenario_map[j][t][s] else {
                    continue;
                };
                if policies[j].decide(t, local, consumed[j], u3) {
                    if consumed[j] + sc.sizes_units[j] > cap {
                        c.violations += 1;
                    } else {
                        consumed[j] += sc.sizes_units[j];
                        total += sc.rewards[j];
                        c.served[t] += 1;
                    }
                }
            }
            c.rewards.push(total);
        }
        c
    });
    Ok(summarize(chunks, trials, seed, n))
}

/// Best-fit thresholds replayed on sample paths.
#[derive(Debug, Clone)]
pub struct BestFitPolicy {
    thresholds: Vec<Vec<ThresholdDecision>>,
    sizes: Vec<Vec<u32>>,
    capacity: u32,
}

impl BestFitPolicy {
    /// Best-fit with per-period rates; errors if a threshold fails.
    pub fn new(inst: &SingleResourceInstance, gammas: &[f64]) -> Result<Self> {
        let run = knapsack::run_with_gammas(inst, gammas)?;
        if !run.feasible {
            return Err(Error::Unsupported(
                run.failure
                    .unwrap_or_else(|| "best-fit is infeasible".into()),
            ));
        }
        Ok(Self {
            thresholds: run.thresholds,
            sizes: inst
                .queries()
                .iter()
                .map(|q| q.scenarios().iter().map(|s| s.size_units).collect())
                .collect(),
            capacity: inst.capacity_units(),
        })
    }

    pub fn constant(inst: &SingleResourceInstance, gamma: f64) -> Result<Self> {
        Self::new(inst, &vec![gamma; inst.horizon()])
    }
}

impl OnlinePolicy for BestFitPolicy {
    fn decide(&self, t: usize, scenario: usize, consumed_units: u32, draw: f64) -> bool {
        self.thresholds[t][scenario].serves(
            self.sizes[t][scenario],
            consumed_units,
            self.capacity,
            draw,
        )
    }
}

/// The k-unit policy on an instance whose active sizes all equal `C / k`.
#[derive(Debug, Clone)]
pub struct MagicianKnapsack {
    pub policy: MagicianPolicy,
    pub unit: u32,
}

impl MagicianKnapsack {
    /// Uses `theta` or, when absent, the instance's `theta*`.
    pub fn for_instance(inst: &SingleResourceInstance, theta: Option<f64>) -> Result<Self> {
        let mut sizes = inst
            .queries()
            .iter()
            .flat_map(|q| q.size_marginals())
            .map(|(d, _)| d);
        let Some(unit) = sizes.next() else {
            return domain("instance has no active scenario");
        };
        let cap = inst.capacity_units();
        if unit == 0 || sizes.any(|d| d != unit) || !cap.is_multiple_of(unit) {
            return Err(Error::Unsupported(
                "k-unit policy needs every active size equal to C/k".into(),
            ));
        }
        let k = (cap / unit) as usize;
        let p = inst.activity();
        let theta = match theta {
            Some(th) => th,
            None => kunit::solve_theta_star(&p, k, kunit::DEFAULT_TOL)?,
        };
        Ok(Self {
            policy: kunit::magician_policy(&p, k, theta)?,
            unit,
        })
    }
}

impl OnlinePolicy for MagicianKnapsack {
    fn decide(&self, t: usize, _scenario: usize, consumed_units: u32, draw: f64) -> bool {
        self.policy
            .decide(t, (consumed_units / self.unit) as usize, draw)
    }
}

/// Acts optimally according to a value-to-go table.
#[derive(Debug, Clone)]
pub struct DpPolicy {
    pub table: DpTable,
}

impl OnlinePolicy for DpPolicy {
    fn decide(&self, t: usize, scenario: usize, consumed_units: u32, _draw: f64) -> bool {
        let cap = self.table.capacity_units();
        consumed_units <= cap && self.table.serve(t, scenario, cap - consumed_units)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::dp_value;

    struct Always;
    impl OnlinePolicy for Always {
        fn decide(&self, _: usize, _: usize, _: u32, _: f64) -> bool {
            true
        }
    }

    #[test]
    fn deterministic_instance_has_zero_variance() {
        let inst =
            SingleResourceInstance::from_triples(1, &[vec![(1.0, 2.0, 1)], vec![(1.0, 3.0, 1)]])
                .unwrap();
        let s = monte_carlo(&Always, &inst, 5000, 3).unwrap();
        assert_eq!(s.mean, 5.0);
        assert_eq!(s.se, 0.0);
        assert_eq!(s.capacity_violations, 0);
        assert_eq!(s.min_conditional_rate, 1.0);
    }

    #[test]
    fn violations_are_counted_not_served() {
        let inst =
            SingleResourceInstance::from_triples(1, &[vec![(1.0, 1.0, 2)], vec![(1.0, 1.0, 2)]])
                .unwrap();
        let s = monte_carlo(&Always, &inst, 10, 0).unwrap();
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.capacity_violations, 10);
    }

    #[test]
    fn seeds_reproduce() {
        let inst = SingleResourceInstance::from_triples(
            2,
            &[
                vec![(0.4, 1.0, 2)],
                vec![(0.7, 2.0, 3)],
                vec![(0.5, 1.0, 1)],
            ],
        )
        .unwrap();
        let pol = BestFitPolicy::constant(&inst, 0.3).unwrap();
        let a = monte_carlo(&pol, &inst, 3000, 11).unwrap();
        let b = monte_carlo(&pol, &inst, 3000, 11).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo(&pol, &inst, 3000, 12).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn dp_policy_matches_dp_value() {
        let inst =
            SingleResourceInstance::from_triples(1, &[vec![(0.5, 1.0, 2)], vec![(0.5, 1.0, 2)]])
                .unwrap();
        let table = dp_value(&inst).unwrap();
        let v = table.value();
        let s = monte_carlo(&DpPolicy { table }, &inst, 100_000, 5).unwrap();
        assert!((s.mean - v).abs() <= 4.0 * s.se, "{} vs {}", s.mean, v);
    }

    #[test]
    fn magician_rates() {
        let p = [0.5, 0.5, 0.4, 0.6];
        let triples: Vec<Vec<(f64, f64, u32)>> = p.iter().map(|&x| vec![(x, 1.0, 2)]).collect();
        let inst = SingleResourceInstance::from_triples(1, &triples).unwrap();
        let pol = MagicianKnapsack::for_instance(&inst, None).unwrap();
        let theta = pol.policy.theta;
        let s = monte_carlo(&pol, &inst, 100_000, 9).unwrap();
        for (t, &r) in s.rates.iter().enumerate() {
            let se = (theta * (1.0 - theta) / s.arrivals[t] as f64).sqrt();
            assert!(
                (r - theta).abs() <= 4.0 * se,
                "query {} rate {} theta {}",
                t,
                r,
                theta
            );
        }
    }

    #[test]
    fn stream_positions_are_distinct() {
        let a: f64 = query_rng(1, 2, 3).gen();
        let b: f64 = query_rng(1, 2, 4).gen();
        let c: f64 = query_rng(1, 3, 3).gen();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
