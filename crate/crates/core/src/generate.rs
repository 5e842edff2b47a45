//! Named instance generators and seeded random families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Result};
use crate::instance::{
    ContinuousInstance, ContinuousScenario, MultiResourceInstance, MultiScenario, Scenario,
    ScenarioDist, SingleResourceInstance, SizeGrid,
};
use crate::knapsack;
use crate::unitdensity;

/// `k N` queries arriving with probability `1/N`, each using one of `k`
/// capacity units.
pub fn uniform_kunit(k: u32, n: u32) -> Result<SingleResourceInstance> {
    if k == 0 || n == 0 {
        return domain("k and N must be positive");
    }
    let t = k * n;
    let grid = SizeGrid::new(1, t)?;
    let q = ScenarioDist::single(1.0 / n as f64, 1.0, n)?;
    SingleResourceInstance::new(grid, vec![q; t as usize])
}

/// Two-unit prophet instance with the Poisson stream replaced by `n`
/// Bernoulli(`lambda / n`) queries: two sure queries worth 1, the stream
/// worth `r1`, and a final query worth `r2 / eps` with probability `eps`.
pub fn prophet2_instance(
    r1: f64,
    r2: f64,
    lambda: f64,
    n: u32,
    eps: f64,
) -> Result<SingleResourceInstance> {
    if !(r1 > 0.0 && r2 > 0.0 && lambda > 0.0 && lambda <= n as f64 && eps > 0.0 && eps <= 1.0) {
        return domain("need r1, r2 > 0, 0 < lambda <= n and 0 < eps <= 1");
    }
    let t = n + 3;
    let grid = SizeGrid::new(2, t)?;
    let half = t;
    let mut queries = vec![ScenarioDist::single(1.0, 1.0, half)?; 2];
    queries.extend(std::iter::repeat_n(
        ScenarioDist::single(lambda / n as f64, r1, half)?,
        n as usize,
    ));
    queries.push(ScenarioDist::single(eps, r2 / eps, half)?);
    SingleResourceInstance::new(grid, queries)
}

/// Shape of [`random_instance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomShape {
    pub horizon: u32,
    pub refinement: u32,
    pub max_scenarios: usize,
    /// Target budget is drawn uniformly from `[min_budget, 1]`.
    pub min_budget: f64,
}

impl Default for RandomShape {
    fn default() -> Self {
        Self {
            horizon: 10,
            refinement: 2,
            max_scenarios: 3,
            min_budget: 0.3,
        }
    }
}

/// Random budget-feasible instance: random sizes and rewards, with arrival
/// probabilities scaled so that `sum_t E[d_t]` is at most one.
pub fn random_instance<R: Rng>(rng: &mut R, shape: &RandomShape) -> Result<SingleResourceInstance> {
    if shape.max_scenarios == 0 {
        return domain("need at least one scenario per query");
    }
    let grid = SizeGrid::new(shape.refinement, shape.horizon)?;
    let cap = grid.capacity_units();
    let mut raw: Vec<Vec<Scenario>> = Vec::with_capacity(shape.horizon as usize);
    for _ in 0..shape.horizon {
        let n = rng.gen_range(1..=shape.max_scenarios);
        let mass: f64 = rng.gen_range(0.05..=1.0);
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let q = weights
            .iter()
            .map(|w| {
                let d = rng.gen_range(1..=cap.max(1));
                let r = rng.gen_range(0.01..1.0);
                Scenario::new(mass * w / total, r, d.min(cap))
            })
            .collect();
        raw.push(q);
    }
    let budget: f64 = raw
        .iter()
        .flatten()
        .map(|s| s.prob * s.size_units as f64)
        .sum::<f64>()
        / cap.max(1) as f64;
    let target = rng.gen_range(shape.min_budget.clamp(0.0, 1.0)..=1.0);
    let scale = if budget > target {
        target / budget * (1.0 - 1e-12)
    } else {
        1.0
    };
    let queries = raw
        .into_iter()
        .map(|q| {
            ScenarioDist::new(
                q.into_iter()
                    .map(|s| Scenario::new(s.prob * scale, s.reward, s.size_units))
                    .collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    SingleResourceInstance::new(grid, queries)
}

pub fn random_instance_seeded(seed: u64, shape: &RandomShape) -> Result<SingleResourceInstance> {
    random_instance(&mut ChaCha8Rng::seed_from_u64(seed), shape)
}

/// Random multi-resource instance with `m` resources. Each scenario has
/// resource-specific rewards and sizes; each resource's own budget is at
/// most `m` so that routing has something to decide.
pub fn random_multi_instance<R: Rng>(
    rng: &mut R,
    m: usize,
    horizon: u32,
    refinement: u32,
) -> Result<MultiResourceInstance> {
    let grid = SizeGrid::new(refinement, horizon)?;
    let cap = grid.capacity_units();
    let mut queries = Vec::with_capacity(horizon as usize);
    for _ in 0..horizon {
        let n = rng.gen_range(1..=2usize);
        let mass: f64 = rng.gen_range(0.2..=1.0);
        let q: Vec<MultiScenario> = (0..n)
            .map(|_| MultiScenario {
                prob: mass / n as f64,
                rewards: (0..m).map(|_| rng.gen_range(0.01..1.0)).collect(),
                sizes_units: (0..m).map(|_| rng.gen_range(1..=cap)).collect(),
            })
            .collect();
        queries.push(q);
    }
    MultiResourceInstance::new(m, grid, queries)
}

/// Random instance with real sizes, scaled to budget at most one.
pub fn random_continuous_instance<R: Rng>(
    rng: &mut R,
    horizon: usize,
    max_scenarios: usize,
) -> Result<ContinuousInstance> {
    let mut queries: Vec<Vec<ContinuousScenario>> = (0..horizon)
        .map(|_| {
            let n = rng.gen_range(1..=max_scenarios.max(1));
            let mass: f64 = rng.gen_range(0.05..=1.0);
            (0..n)
                .map(|_| ContinuousScenario {
                    prob: mass / n as f64,
                    reward: rng.gen_range(0.01..1.0),
                    size: rng.gen_range(0.001..1.0),
                })
                .collect()
        })
        .collect();
    let budget: f64 = queries.iter().flatten().map(|s| s.prob * s.size).sum();
    if budget > 1.0 {
        let scale = (1.0 - 1e-12) / budget;
        queries.iter_mut().flatten().for_each(|s| s.prob *= scale);
    }
    ContinuousInstance::new(queries)
}

/// Random activity vector with `sum p <= k` and every entry at most `p_max`.
pub fn random_kunit_p<R: Rng>(rng: &mut R, horizon: usize, k: usize, p_max: f64) -> Vec<f64> {
    let mut p: Vec<f64> = (0..horizon).map(|_| rng.gen_range(0.01..=p_max)).collect();
    let s: f64 = p.iter().sum();
    let target = rng.gen_range(0.3..=1.0) * k as f64;
    if s > target {
        p.iter_mut().for_each(|v| *v *= target / s);
    }
    p
}

/// Generator names accepted by [`generate`].
pub const GENERATORS: [&str; 6] = [
    "knapsack-tight",
    "large-small",
    "ud-upper",
    "prophet2",
    "uniform-kunit",
    "random",
];

/// Parameters for [`generate`]; unused fields are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenParams {
    pub t: u32,
    pub k: u32,
    pub n: u32,
    pub eps: f64,
    pub r: f64,
    pub r1: f64,
    pub r2: f64,
    pub lambda: f64,
    pub max_scenarios: usize,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            t: 50,
            k: 2,
            n: 1000,
            eps: 0.01,
            r: 1.0,
            r1: 1.4119,
            r2: 1.4119,
            lambda: 1.2319,
            max_scenarios: 3,
            seed: 0,
        }
    }
}

pub fn generate(name: &str, p: &GenParams) -> Result<SingleResourceInstance> {
    match name {
        "knapsack-tight" => knapsack::tightness_instance(p.t as usize, p.eps),
        "large-small" => knapsack::large_small_instance(p.r, p.eps),
        "ud-upper" => unitdensity::ud_upper_instance(p.t as usize),
        "prophet2" => prophet2_instance(p.r1, p.r2, p.lambda, p.n, p.eps),
        "uniform-kunit" => uniform_kunit(p.k, p.n),
        "random" => random_instance_seeded(
            p.seed,
            &RandomShape {
                horizon: p.t,
                refinement: p.k,
                max_scenarios: p.max_scenarios,
                ..Default::default()
            },
        ),
        other => domain(format!(
            "unknown generator {:?}; expected one of {}",
            other,
            GENERATORS.join(", ")
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::validate;
    use crate::io::instance_to_json;
    use proptest::prelude::*;

    #[test]
    fn uniform_kunit_shape() {
        let inst = uniform_kunit(2, 1000).unwrap();
        assert_eq!(inst.horizon(), 2000);
        assert!(inst
            .queries()
            .iter()
            .all(|q| q.scenarios()[0].prob == 1.0 / 1000.0));
        assert_eq!(
            inst.queries()[0].scenarios()[0].size_units * 2,
            inst.capacity_units()
        );
        assert!((inst.budget() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_is_deterministic() {
        let p = GenParams {
            seed: 7,
            t: 12,
            k: 3,
            ..Default::default()
        };
        let a = instance_to_json(&generate("random", &p).unwrap());
        let b = instance_to_json(&generate("random", &p).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn tightness_budget_one() {
        let inst = generate(
            "knapsack-tight",
            &GenParams {
                t: 50,
                eps: 0.01,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((inst.budget() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_generator() {
        assert!(generate("nope", &GenParams::default()).is_err());
    }

    #[test]
    fn prophet2_layout() {
        let inst = prophet2_instance(1.4, 1.4, 1.2, 100, 0.01).unwrap();
        assert_eq!(inst.horizon(), 103);
        assert_eq!(
            inst.queries()[0].scenarios()[0].size_units * 2,
            inst.capacity_units()
        );
    }

    proptest! {
        #[test]
        fn random_instances_are_budget_feasible(seed in any::<u64>(), t in 1u32..40, k in 1u32..10) {
            let inst = random_instance_seeded(seed, &RandomShape { horizon: t, refinement: k, ..Default::default() }).unwrap();
            let rep = validate(&inst);
            prop_assert!(rep.ok, "{:?}", rep.issues);
            prop_assert!(inst.budget() <= 1.0);
        }

        #[test]
        fn random_kunit_sum(seed in any::<u64>(), t in 1usize..30, k in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_kunit_p(&mut rng, t, k, 0.9);
            prop_assert!(p.iter().sum::<f64>() <= k as f64 + 1e-12);
            prop_assert!(p.iter().all(|&v| v > 0.0 && v <= 0.9));
        }
    }
}
