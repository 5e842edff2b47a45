use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{MultiResourceInstance, Scenario, SingleResourceInstance, BUDGET_TOL};
use crate::lp::{build_up_lp, simplex_solve, DEFAULT_LP_TOL};
use crate::numeric::KahanSum;

/// Realization count up to which [`prophet_value`] enumerates exactly.
pub const EXACT_ENUM_CAP: f64 = 1_048_576.0;
const MULTI_CAP: f64 = 2e7;

/// Best total reward of a subset of `(reward, size_units)` items fitting
/// in `capacity_units`.
pub fn offline_value(items: &[(f64, u32)], capacity_units: u32) -> f64 {
    let mut best = vec![0.0f64; capacity_units as usize + 1];
    for &(r, d) in items {
        if r <= 0.0 || d > capacity_units {
            continue;
        }
        add_item(&mut best, r, d);
    }
    best[capacity_units as usize]
}

fn add_item(best: &mut [f64], r: f64, d: u32) {
    let d = d as usize;
    for c in (d..best.len()).rev() {
        let v = best[c - d] + r;
        if v > best[c] {
            best[c] = v;
        }
    }
}

/// Exhaustive assignment of items `(rewards per resource, sizes per
/// resource)` to at most one of `m` knapsacks each.
pub fn offline_value_multi(
    items: &[(Vec<f64>, Vec<u32>)],
    m: usize,
    capacity_units: u32,
) -> Result<f64> {
    if ((m + 1) as f64).powi(items.len() as i32) > MULTI_CAP {
        return Err(Error::StateCap(format!(
            "{} items over {} resources is too many to enumerate",
            items.len(),
            m
        )));
    }
    fn go(
        items: &[(Vec<f64>, Vec<u32>)],
        i: usize,
        load: &mut [u32],
        cap: u32,
        acc: f64,
        best: &mut f64,
    ) {
        if i == items.len() {
            *best = best.max(acc);
            return;
        }
        let rest: f64 = items[i..]
            .iter()
            .map(|(r, _)| r.iter().cloned().fold(0.0, f64::max))
            .sum();
        if acc + rest <= *best {
            return;
        }
        go(items, i + 1, load, cap, acc, best);
        let (rw, sz) = &items[i];
        for j in 0..load.len() {
            if rw[j] > 0.0 && load[j] + sz[j] <= cap {
                load[j] += sz[j];
                go(items, i + 1, load, cap, acc + rw[j], best);
                load[j] -= sz[j];
            }
        }
    }
    let mut best = 0.0;
    go(items, 0, &mut vec![0; m], capacity_units, 0.0, &mut best);
    Ok(best)
}

/// Expected offline optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProphetEstimate {
    pub mean: f64,
    /// Zero when exact.
    pub se: f64,
    pub exact: bool,
}

/// `E[V_off]` by exact enumeration when the realization count is at most
/// [`EXACT_ENUM_CAP`], otherwise from `samples` seeded draws.
pub fn prophet_value(
    inst: &SingleResourceInstance,
    samples: usize,
    seed: u64,
) -> Result<ProphetEstimate> {
    let reals: Vec<Vec<Scenario>> = inst.queries().iter().map(|q| q.realizations()).collect();
    let count: f64 = reals.iter().map(|r| r.len() as f64).product();
    let cap = inst.capacity_units();
    if count <= EXACT_ENUM_CAP {
        fn go(reals: &[Vec<Scenario>], t: usize, best: &[f64], prob: f64, acc: &mut KahanSum) {
            if prob == 0.0 {
                return;
            }
            if t == reals.len() {
                acc.add(prob * best[best.len() - 1]);
                return;
            }
            for s in &reals[t] {
                if s.reward > 0.0 && (s.size_units as usize) < best.len() {
                    let mut next = best.to_vec();
                    add_item(&mut next, s.reward, s.size_units);
                    go(reals, t + 1, &next, prob * s.prob, acc);
                } else {
                    go(reals, t + 1, best, prob * s.prob, acc);
                }
            }
        }
        let mut acc = KahanSum::new();
        go(&reals, 0, &vec![0.0; cap as usize + 1], 1.0, &mut acc);
        return Ok(ProphetEstimate {
            mean: acc.value(),
            se: 0.0,
            exact: true,
        });
    }
    if samples == 0 {
        return Err(Error::Domain(
            "sampling the offline value needs at least one sample".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vals = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut items = Vec::new();
        for q in inst.queries() {
            let u: f64 = rng.gen();
            let mut cum = 0.0;
            for s in q.scenarios() {
                cum += s.prob;
                if u < cum {
                    items.push((s.reward, s.size_units));
                    break;
                }
            }
        }
        vals.push(offline_value(&items, cap));
    }
    let mean = vals.iter().copied().collect::<KahanSum>().value() / samples as f64;
    let var = vals
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .collect::<KahanSum>()
        .value()
        / (samples.max(2) - 1) as f64;
    Ok(ProphetEstimate {
        mean,
        se: (var / samples as f64).sqrt(),
        exact: false,
    })
}

/// Upper bound: `sum_t E[r_t]` under the budget, otherwise the LP optimum.
pub fn up_value(inst: &SingleResourceInstance) -> Result<f64> {
    if inst.budget() <= 1.0 + BUDGET_TOL {
        return Ok(inst.expected_total_reward());
    }
    let up = build_up_lp(&MultiResourceInstance::from_single(inst))?;
    simplex_solve(&up.lp, DEFAULT_LP_TOL).optimum()
}

/// Single-resource upper bound as a fractional knapsack solved greedily
/// by reward density.
pub fn up_value_greedy(inst: &SingleResourceInstance) -> f64 {
    let cap = inst.capacity_units() as f64;
    let mut items: Vec<(f64, f64)> = inst
        .queries()
        .iter()
        .flat_map(|q| q.scenarios().iter())
        .filter(|s| s.prob > 0.0 && s.reward > 0.0)
        .map(|s| (s.prob * s.reward, s.prob * s.size_units as f64 / cap))
        .collect();
    items.sort_by(|a, b| {
        let da = if a.1 == 0.0 { f64::INFINITY } else { a.0 / a.1 };
        let db = if b.1 == 0.0 { f64::INFINITY } else { b.0 / b.1 };
        db.partial_cmp(&da).expect("densities are comparable")
    });
    let mut room = 1.0;
    let mut total = 0.0;
    for (v, w) in items {
        if w <= room {
            total += v;
            room -= w;
        } else {
            total += v * room / w;
            break;
        }
    }
    total
}
