//! Instance representations: the size grid, per-query scenario
//! distributions, single- and multi-resource instances, and validation.

use crate::error::{domain, Result};

/// Probability sums may exceed one by at most this much.
pub const PROB_TOL: f64 = 1e-12;
/// Budget slack used by [`validate`].
pub const BUDGET_TOL: f64 = 1e-9;

/// Uniform size grid: capacity 1 is split into `K*T` units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SizeGrid {
    k: u32,
    t: u32,
}

impl SizeGrid {
    pub fn new(k: u32, t: u32) -> Result<Self> {
        if k == 0 {
            return domain("grid refinement K must be positive");
        }
        if (k as u64) * (t as u64) > u32::MAX as u64 / 2 {
            return domain(format!("grid K*T = {}*{} is too large", k, t));
        }
        Ok(Self { k, t })
    }

    pub fn refinement(&self) -> u32 {
        self.k
    }

    pub fn horizon(&self) -> u32 {
        self.t
    }

    /// Total capacity in grid units, `K*T`.
    pub fn capacity_units(&self) -> u32 {
        self.k * self.t
    }

    pub fn unit(&self) -> f64 {
        1.0 / self.capacity_units() as f64
    }

    pub fn to_real(&self, units: u32) -> f64 {
        units as f64 / self.capacity_units() as f64
    }

    /// Rounds a real size up to the grid. Values within 1e-9 of a grid
    /// point snap to it so that e.g. 0.3 on a 10-unit grid stays at 3.
    pub fn ceil_units(&self, size: f64) -> u32 {
        let x = size * self.capacity_units() as f64;
        let snapped = x.round();
        if (x - snapped).abs() <= 1e-9 * x.abs().max(1.0) {
            snapped as u32
        } else {
            x.ceil() as u32
        }
    }
}

/// One realization of a query: reward `r` and size in grid units, drawn
/// with probability `prob`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub prob: f64,
    pub reward: f64,
    pub size_units: u32,
}

impl Scenario {
    pub fn new(prob: f64, reward: f64, size_units: u32) -> Self {
        Self {
            prob,
            reward,
            size_units,
        }
    }

    /// The canonical inactive realization has zero reward and zero size.
    pub fn is_inactive(&self) -> bool {
        self.reward == 0.0 && self.size_units == 0
    }
}

/// Finite distribution over scenarios. Residual probability is the
/// inactive realization (reward 0, size 0).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioDist {
    scenarios: Vec<Scenario>,
}

impl ScenarioDist {
    pub fn new(scenarios: Vec<Scenario>) -> Result<Self> {
        let mut total = 0.0;
        for s in &scenarios {
            if !(s.prob.is_finite() && s.prob >= 0.0) {
                return domain(format!(
                    "scenario probability {} must be a nonnegative number",
                    s.prob
                ));
            }
            if !(s.reward.is_finite() && s.reward >= 0.0) {
                return domain(format!(
                    "scenario reward {} must be a nonnegative number",
                    s.reward
                ));
            }
            total += s.prob;
        }
        if total > 1.0 + PROB_TOL {
            return domain(format!("scenario probabilities sum to {} > 1", total));
        }
        Ok(Self { scenarios })
    }

    pub fn inactive() -> Self {
        Self::default()
    }

    /// A query with a single active scenario.
    pub fn single(prob: f64, reward: f64, size_units: u32) -> Result<Self> {
        Self::new(vec![Scenario::new(prob, reward, size_units)])
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn total_prob(&self) -> f64 {
        self.scenarios.iter().map(|s| s.prob).sum()
    }

    /// Probability that the query arrives with a non-canonical realization.
    pub fn active_prob(&self) -> f64 {
        self.scenarios
            .iter()
            .filter(|s| !s.is_inactive())
            .map(|s| s.prob)
            .sum()
    }

    pub fn inactive_prob(&self) -> f64 {
        (1.0 - self.active_prob()).max(0.0)
    }

    /// All realizations including the canonical inactive one carrying the
    /// residual probability, so that probabilities sum to one.
    pub fn realizations(&self) -> Vec<Scenario> {
        let mut out: Vec<Scenario> = self.scenarios.clone();
        let residual = 1.0 - self.total_prob();
        if residual > 0.0 {
            out.push(Scenario::new(residual, 0.0, 0));
        }
        out
    }

    pub fn expected_size_units(&self) -> f64 {
        self.scenarios
            .iter()
            .map(|s| s.prob * s.size_units as f64)
            .sum()
    }

    pub fn expected_reward(&self) -> f64 {
        self.scenarios.iter().map(|s| s.prob * s.reward).sum()
    }

    pub fn max_size_units(&self) -> u32 {
        self.scenarios
            .iter()
            .map(|s| s.size_units)
            .max()
            .unwrap_or(0)
    }

    /// Size marginal `p_t(d)` over active scenarios, sorted by size.
    pub fn size_marginals(&self) -> Vec<(u32, f64)> {
        let mut out: Vec<(u32, f64)> = Vec::new();
        for s in self
            .scenarios
            .iter()
            .filter(|s| !s.is_inactive() && s.prob > 0.0)
        {
            match out.iter_mut().find(|(d, _)| *d == s.size_units) {
                Some(entry) => entry.1 += s.prob,
                None => out.push((s.size_units, s.prob)),
            }
        }
        out.sort_by_key(|&(d, _)| d);
        out
    }
}

/// Expected size `E[d_t]` as a fraction of capacity.
pub fn expected_size(q: &ScenarioDist, grid: &SizeGrid) -> f64 {
    q.expected_size_units() / grid.capacity_units() as f64
}

/// Single knapsack with `T` queries on a `K*T` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleResourceInstance {
    grid: SizeGrid,
    queries: Vec<ScenarioDist>,
}

impl SingleResourceInstance {
    /// Checks structure: one query per period, every size fits on the grid.
    /// The budget is not enforced here; see [`validate`].
    pub fn new(grid: SizeGrid, queries: Vec<ScenarioDist>) -> Result<Self> {
        if queries.len() != grid.horizon() as usize {
            return domain(format!(
                "instance has {} queries but grid horizon T = {}",
                queries.len(),
                grid.horizon()
            ));
        }
        let cap = grid.capacity_units();
        for (t, q) in queries.iter().enumerate() {
            if let Some(s) = q.scenarios().iter().find(|s| s.size_units > cap) {
                return domain(format!(
                    "query {} has size {} units above capacity {}",
                    t, s.size_units, cap
                ));
            }
        }
        Ok(Self { grid, queries })
    }

    /// Builds an instance from `(prob, reward, size_units)` triples per query.
    pub fn from_triples(k: u32, queries: &[Vec<(f64, f64, u32)>]) -> Result<Self> {
        let grid = SizeGrid::new(k, queries.len() as u32)?;
        let qs = queries
            .iter()
            .map(|q| ScenarioDist::new(q.iter().map(|&(p, r, d)| Scenario::new(p, r, d)).collect()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, qs)
    }

    pub fn grid(&self) -> SizeGrid {
        self.grid
    }

    pub fn queries(&self) -> &[ScenarioDist] {
        &self.queries
    }

    pub fn horizon(&self) -> usize {
        self.queries.len()
    }

    pub fn capacity_units(&self) -> u32 {
        self.grid.capacity_units()
    }

    /// `sum_t E[d_t]` as a fraction of capacity.
    pub fn budget(&self) -> f64 {
        if self.queries.is_empty() {
            return 0.0;
        }
        self.queries
            .iter()
            .map(|q| expected_size(q, &self.grid))
            .sum()
    }

    pub fn expected_total_reward(&self) -> f64 {
        self.queries.iter().map(|q| q.expected_reward()).sum()
    }

    /// Activity probabilities, the `p` vector of the k-unit problem.
    pub fn activity(&self) -> Vec<f64> {
        self.queries.iter().map(|q| q.active_prob()).collect()
    }

    /// Copy with each query filtered by `keep`.
    pub fn filtered<F: Fn(&Scenario) -> bool>(&self, keep: F) -> Self {
        let queries = self
            .queries
            .iter()
            .map(|q| ScenarioDist {
                scenarios: q.scenarios().iter().copied().filter(|s| keep(s)).collect(),
            })
            .collect();
        Self {
            grid: self.grid,
            queries,
        }
    }

    /// Copy with rewards replaced per `(t, scenario index)`.
    pub fn with_rewards<F: Fn(usize, usize, &Scenario) -> f64>(&self, reward: F) -> Self {
        let queries = self
            .queries
            .iter()
            .enumerate()
            .map(|(t, q)| ScenarioDist {
                scenarios: q
                    .scenarios()
                    .iter()
                    .enumerate()
                    .map(|(i, s)| Scenario::new(s.prob, reward(t, i, s), s.size_units))
                    .collect(),
            })
            .collect();
        Self {
            grid: self.grid,
            queries,
        }
    }
}

/// Report produced by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub ok: bool,
    pub budget: f64,
    pub prob_sums: Vec<f64>,
    pub issues: Vec<String>,
}

/// Checks probability sums, grid consistency and the budget constraint
/// `sum_t E[d_t] <= 1`.
pub fn validate(instance: &SingleResourceInstance) -> ValidationReport {
    let mut issues = Vec::new();
    let cap = instance.capacity_units();
    let prob_sums: Vec<f64> = instance.queries().iter().map(|q| q.total_prob()).collect();
    if instance.horizon() != instance.grid().horizon() as usize {
        issues.push(format!(
            "query count {} differs from grid horizon {}",
            instance.horizon(),
            instance.grid().horizon()
        ));
    }
    for (t, q) in instance.queries().iter().enumerate() {
        if prob_sums[t] > 1.0 + PROB_TOL {
            issues.push(format!("query {} probabilities sum to {}", t, prob_sums[t]));
        }
        for s in q.scenarios() {
            if s.prob < 0.0 {
                issues.push(format!("query {} has negative probability {}", t, s.prob));
            }
            if s.size_units > cap {
                issues.push(format!(
                    "query {} size {} exceeds capacity {}",
                    t, s.size_units, cap
                ));
            }
        }
    }
    let budget = instance.budget();
    if budget > 1.0 + BUDGET_TOL {
        issues.push(format!("budget {} exceeds 1", budget));
    }
    ValidationReport {
        ok: issues.is_empty(),
        budget,
        prob_sums,
        issues,
    }
}

/// Realization of a multi-resource query: one reward and one size per
/// resource, sizes in units of a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiScenario {
    pub prob: f64,
    pub rewards: Vec<f64>,
    pub sizes_units: Vec<u32>,
}

/// Queries that can be matched to any of `m` knapsacks.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiResourceInstance {
    m: usize,
    grid: SizeGrid,
    queries: Vec<Vec<MultiScenario>>,
}

impl MultiResourceInstance {
    pub fn new(m: usize, grid: SizeGrid, queries: Vec<Vec<MultiScenario>>) -> Result<Self> {
        if m == 0 {
            return domain("at least one resource is required");
        }
        if queries.len() != grid.horizon() as usize {
            return domain(format!(
                "{} queries for horizon {}",
                queries.len(),
                grid.horizon()
            ));
        }
        for (t, q) in queries.iter().enumerate() {
            let mut total = 0.0;
            for s in q {
                if s.rewards.len() != m || s.sizes_units.len() != m {
                    return domain(format!("query {} scenario has wrong resource count", t));
                }
                if !(s.prob.is_finite() && s.prob >= 0.0) {
                    return domain(format!("query {} has invalid probability {}", t, s.prob));
                }
                if s.rewards.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                    return domain(format!("query {} has an invalid reward", t));
                }
                total += s.prob;
            }
            if total > 1.0 + PROB_TOL {
                return domain(format!("query {} probabilities sum to {}", t, total));
            }
        }
        Ok(Self { m, grid, queries })
    }

    /// Views a single-resource instance as `m = 1`.
    pub fn from_single(inst: &SingleResourceInstance) -> Self {
        let queries = inst
            .queries()
            .iter()
            .map(|q| {
                q.scenarios()
                    .iter()
                    .map(|s| MultiScenario {
                        prob: s.prob,
                        rewards: vec![s.reward],
                        sizes_units: vec![s.size_units],
                    })
                    .collect()
            })
            .collect();
        Self {
            m: 1,
            grid: inst.grid(),
            queries,
        }
    }

    pub fn resources(&self) -> usize {
        self.m
    }

    pub fn grid(&self) -> SizeGrid {
        self.grid
    }

    pub fn queries(&self) -> &[Vec<MultiScenario>] {
        &self.queries
    }

    pub fn horizon(&self) -> usize {
        self.queries.len()
    }
}

/// Scenario with a real-valued size in `[0, 1]`, before discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousScenario {
    pub prob: f64,
    pub reward: f64,
    pub size: f64,
}

/// Instance with arbitrary real sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousInstance {
    pub queries: Vec<Vec<ContinuousScenario>>,
}

impl ContinuousInstance {
    pub fn new(queries: Vec<Vec<ContinuousScenario>>) -> Result<Self> {
        for (t, q) in queries.iter().enumerate() {
            let mut total = 0.0;
            for s in q {
                if !(s.prob >= 0.0 && s.reward >= 0.0 && (0.0..=1.0).contains(&s.size)) {
                    return domain(format!("query {} has an invalid scenario {:?}", t, s));
                }
                total += s.prob;
            }
            if total > 1.0 + PROB_TOL {
                return domain(format!("query {} probabilities sum to {}", t, total));
            }
        }
        Ok(Self { queries })
    }

    pub fn budget(&self) -> f64 {
        self.queries.iter().flatten().map(|s| s.prob * s.size).sum()
    }
}
