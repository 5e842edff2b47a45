//! Best-fit policy for the online stochastic knapsack.
//!
//! The policy tracks the exact distribution of consumed capacity. For each
//! realized size `d` it serves on the most utilized sample paths where `d`
//! still fits, taking exactly `gamma` of probability mass, so every query
//! is served with conditional probability `gamma`.

use crate::error::{domain, Error, Result};
use crate::instance::{
    ContinuousInstance, Scenario, ScenarioDist, SingleResourceInstance, SizeGrid,
};
use crate::oracle;
use crate::pmf::UtilizationPmf;

const SCAN_TOL: f64 = 1e-12;
/// Slack allowed in the invariant check.
pub const INVARIANT_TOL: f64 = 1e-9;

/// The guaranteed service rate `1/(3 + e^{-2})`.
pub fn default_gamma() -> f64 {
    1.0 / (3.0 + (-2.0f64).exp())
}

/// Threshold `eta` for one realized size: serve iff consumption is in
/// `(eta, C - d]`, or equals `eta` with probability `tie_serve_prob`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdDecision {
    pub eta_units: u32,
    pub tie_serve_prob: f64,
}

impl ThresholdDecision {
    /// Never serve.
    pub fn never(limit: u32) -> Self {
        Self {
            eta_units: limit,
            tie_serve_prob: 0.0,
        }
    }

    pub fn serves(&self, d_units: u32, consumed: u32, capacity: u32, draw: f64) -> bool {
        if consumed as u64 + d_units as u64 > capacity as u64 {
            return false;
        }
        consumed > self.eta_units || (consumed == self.eta_units && draw < self.tie_serve_prob)
    }
}

/// Threshold for size `d_units` on `pmf`. Infeasible when the region
/// `[0, C - d]` holds less than `gamma` mass.
pub fn threshold(pmf: &UtilizationPmf, d_units: u32, gamma: f64) -> Result<ThresholdDecision> {
    threshold_counted(pmf, d_units, gamma, None).map(|(d, _)| d)
}

fn threshold_counted(
    pmf: &UtilizationPmf,
    d_units: u32,
    gamma: f64,
    t: Option<usize>,
) -> Result<(ThresholdDecision, u64)> {
    if !(0.0..=1.0).contains(&gamma) {
        return domain(format!("gamma {} outside [0, 1]", gamma));
    }
    let cap = pmf.capacity_units();
    if gamma == 0.0 {
        return Ok((ThresholdDecision::never(cap.saturating_sub(d_units)), 0));
    }
    if d_units > cap {
        return Err(Error::Infeasible {
            t,
            d_units,
            available: 0.0,
            gamma,
        });
    }
    let limit = cap - d_units;
    let mass = pmf.masses();
    let mut cum = 0.0;
    let mut ops = 0u64;
    for x in (0..=limit).rev() {
        ops += 1;
        let m = mass[x as usize];
        if m <= 0.0 {
            continue;
        }
        if cum + m >= gamma - SCAN_TOL {
            let tie = ((gamma - cum) / m).clamp(0.0, 1.0);
            return Ok((
                ThresholdDecision {
                    eta_units: x,
                    tie_serve_prob: tie,
                },
                ops,
            ));
        }
        cum += m;
    }
    Err(Error::Infeasible {
        t,
        d_units,
        available: cum,
        gamma,
    })
}

/// Distribution of consumption before period `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct BestFitState {
    pub gamma: f64,
    pub grid: SizeGrid,
    pub pmf: UtilizationPmf,
    pub t: usize,
}

/// Result of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: BestFitState,
    /// One decision per explicit scenario of the query.
    pub decisions: Vec<ThresholdDecision>,
    /// Ex-ante served probability per explicit scenario.
    pub served: Vec<f64>,
    /// Cells visited by threshold scans and mass moves.
    pub ops: u64,
}

impl BestFitState {
    pub fn new(gamma: f64, grid: SizeGrid) -> Self {
        Self {
            gamma,
            grid,
            pmf: UtilizationPmf::empty(grid.capacity_units()),
            t: 0,
        }
    }

    /// Processes one query with the state's own `gamma`.
    pub fn step(&self, q: &ScenarioDist) -> Result<StepOutcome> {
        self.step_with_gamma(q, self.gamma)
    }

    /// Processes one query with service rate `gamma_t`. Thresholds are all
    /// computed on the incoming pmf.
    pub fn step_with_gamma(&self, q: &ScenarioDist, gamma_t: f64) -> Result<StepOutcome> {
        let cap = self.grid.capacity_units();
        let old = self.pmf.masses();
        let mut new = self.pmf.clone();
        let mut decisions = Vec::with_capacity(q.len());
        let mut served = Vec::with_capacity(q.len());
        let mut ops = 0u64;
        for s in q.scenarios() {
            let (dec, scan) = threshold_counted(&self.pmf, s.size_units, gamma_t, Some(self.t))?;
            ops += scan;
            decisions.push(dec);
            if gamma_t == 0.0 || s.prob == 0.0 || s.is_inactive() {
                served.push(0.0);
                continue;
            }
            let limit = cap - s.size_units;
            let mut taken = 0.0;
            for x in dec.eta_units + 1..=limit {
                ops += 1;
                let amt = s.prob * old[x as usize];
                if amt > 0.0 {
                    new.move_mass_in_place(x, x + s.size_units, amt)?;
                    taken += amt;
                }
            }
            let at_eta = s.prob * dec.tie_serve_prob * old[dec.eta_units as usize];
            if at_eta > 0.0 {
                new.move_mass_in_place(dec.eta_units, dec.eta_units + s.size_units, at_eta)?;
                taken += at_eta;
            }
            served.push(taken);
        }
        Ok(StepOutcome {
            state: BestFitState {
                gamma: self.gamma,
                grid: self.grid,
                pmf: new,
                t: self.t + 1,
            },
            decisions,
            served,
            ops,
        })
    }
}

/// Serve decision for a realized size given current consumption.
pub fn decide(
    decision: &ThresholdDecision,
    d_units: u32,
    consumed_units: u32,
    capacity_units: u32,
    draw: f64,
) -> bool {
    decision.serves(d_units, consumed_units, capacity_units, draw)
}

/// Outcome of running the policy through an instance.
#[derive(Debug, Clone)]
pub struct PolicyRun {
    pub feasible: bool,
    /// Threshold failure, if any.
    pub failure: Option<String>,
    pub gammas: Vec<f64>,
    /// Pmf before the first query and after each processed query.
    pub trace: Vec<UtilizationPmf>,
    pub thresholds: Vec<Vec<ThresholdDecision>>,
    /// Ex-ante served probability per query and explicit scenario.
    pub served: Vec<Vec<f64>>,
    /// Exact expected reward collected.
    pub expected_reward: f64,
    /// Largest `lhs - rhs` of the invariant over all steps.
    pub invariant_max: f64,
    /// Smallest `P(X = 0)` over the trace.
    pub min_empty_mass: f64,
    pub ops: u64,
}

impl PolicyRun {
    /// Ratio of served to arrival probability for every active scenario.
    pub fn conditional_rates(&self, inst: &SingleResourceInstance) -> Vec<Vec<f64>> {
        inst.queries()
            .iter()
            .zip(&self.served)
            .map(|(q, s)| {
                q.scenarios()
                    .iter()
                    .zip(s)
                    .map(|(sc, &m)| if sc.prob > 0.0 { m / sc.prob } else { f64::NAN })
                    .collect()
            })
            .collect()
    }

    pub fn expected_utilization_units(&self) -> f64 {
        self.trace.last().map_or(0.0, |p| p.mean_units())
    }
}

/// Runs the policy with a constant `gamma`.
pub fn run_policy(instance: &SingleResourceInstance, gamma: f64) -> Result<PolicyRun> {
    run_with_gammas(instance, &vec![gamma; instance.horizon()])
}

/// Runs the policy with a per-period service rate. The invariant is
/// monitored with the first rate.
pub fn run_with_gammas(instance: &SingleResourceInstance, gammas: &[f64]) -> Result<PolicyRun> {
    if gammas.len() != instance.horizon() {
        return domain(format!(
            "{} rates for {} queries",
            gammas.len(),
            instance.horizon()
        ));
    }
    if let Some(g) = gammas.iter().find(|g| !(0.0..=1.0).contains(*g)) {
        return domain(format!("service rate {} outside [0, 1]", g));
    }
    let grid = instance.grid();
    let g1 = gammas.first().copied().unwrap_or(0.0);
    let mut state = BestFitState::new(g1, grid);
    let mut run = PolicyRun {
        feasible: true,
        failure: None,
        gammas: gammas.to_vec(),
        trace: vec![state.pmf.clone()],
        thresholds: Vec::new(),
        served: Vec::new(),
        expected_reward: 0.0,
        invariant_max: f64::NEG_INFINITY,
        min_empty_mass: 1.0,
        ops: 0,
    };
    let monitor = |pmf: &UtilizationPmf, run: &mut PolicyRun| {
        if g1 > 0.0 {
            run.invariant_max = run
                .invariant_max
                .max(invariant_check(pmf, g1).max_violation);
        }
        run.min_empty_mass = run.min_empty_mass.min(pmf.mass_at(0));
    };
    monitor(&state.pmf, &mut run);
    for (t, q) in instance.queries().iter().enumerate() {
        match state.step_with_gamma(q, gammas[t]) {
            Ok(out) => {
                run.expected_reward += q
                    .scenarios()
                    .iter()
                    .zip(&out.served)
                    .map(|(s, m)| s.reward * m)
                    .sum::<f64>();
                run.ops += out.ops;
                run.thresholds.push(out.decisions);
                run.served.push(out.served);
                state = out.state;
                monitor(&state.pmf, &mut run);
                run.trace.push(state.pmf.clone());
            }
            Err(e @ Error::Infeasible { .. }) => {
                run.feasible = false;
                run.failure = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(run)
}

/// Largest constant `gamma` for which the policy stays feasible, by
/// bisection (feasibility is assumed monotone in `gamma`).
pub fn max_feasible_gamma(instance: &SingleResourceInstance, tol: f64) -> Result<f64> {
    let feasible = |g: f64| run_policy(instance, g).map(|r| r.feasible);
    if feasible(1.0)? {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Invariant report for one pmf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport {
    /// `max_b (1/gamma) mu(0,b] - exp(-(1/gamma) mu(b, 1-b])`.
    pub max_violation: f64,
    pub worst_b_units: u32,
    pub holds: bool,
}

/// Checks `(1/gamma) mu(0,b] <= exp(-(1/gamma) mu(b, 1-b])` on every grid
/// point `b` in `(0, 1/2]`.
pub fn invariant_check(pmf: &UtilizationPmf, gamma: f64) -> InvariantReport {
    let cap = pmf.capacity_units();
    let s = pmf.prefix_sums();
    let mut max_violation = f64::NEG_INFINITY;
    let mut worst = 0;
    for b in 1..=cap / 2 {
        let low = s[b as usize] - s[0];
        let mid = s[(cap - b) as usize] - s[b as usize];
        let v = low / gamma - (-mid / gamma).exp();
        if v > max_violation {
            max_violation = v;
            worst = b;
        }
    }
    if cap < 2 {
        max_violation = f64::NEG_INFINITY;
    }
    InvariantReport {
        max_violation,
        worst_b_units: worst,
        holds: max_violation <= INVARIANT_TOL,
    }
}

/// Rounds every size up to the `K T` grid; rewards are unchanged.
pub fn discretize_instance(
    instance: &ContinuousInstance,
    k: u32,
) -> Result<SingleResourceInstance> {
    let grid = SizeGrid::new(k, instance.queries.len() as u32)?;
    let queries = instance
        .queries
        .iter()
        .map(|q| {
            ScenarioDist::new(
                q.iter()
                    .map(|s| Scenario::new(s.prob, s.reward, grid.ceil_units(s.size)))
                    .collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    SingleResourceInstance::new(grid, queries)
}

/// Smallest `K <= 10^4` placing every size exactly on the `K T` grid.
pub(crate) fn exact_refinement(t: u32, sizes: &[f64]) -> Result<u32> {
    for k in 1..=10_000u32 {
        let c = (k as f64) * t as f64;
        if sizes
            .iter()
            .all(|s| ((s * c) - (s * c).round()).abs() <= 1e-9 * c.max(1.0))
        {
            return Ok(k);
        }
    }
    domain(format!(
        "sizes {:?} do not fit an exact grid for T = {}",
        sizes, t
    ))
}

/// Instance showing the `1/(3 + e^{-2})` guarantee cannot be improved:
/// a tiny sure query, `T - 2` medium queries just above one half, and a
/// rare full-size query, with total expected size exactly one.
pub fn tightness_instance(t: usize, eps: f64) -> Result<SingleResourceInstance> {
    if t < 3 {
        return domain("need T >= 3");
    }
    if !(eps > 0.0 && eps < 0.25) {
        return domain(format!("epsilon {} outside (0, 1/4)", eps));
    }
    let mid_p = (1.0 - 2.0 * eps) / ((t as f64 - 2.0) * (0.5 + eps));
    if mid_p > 1.0 {
        return domain(format!("middle arrival probability {} exceeds 1", mid_p));
    }
    let k = exact_refinement(t as u32, &[eps, 0.5 + eps])?;
    let grid = SizeGrid::new(k, t as u32)?;
    let c = grid.capacity_units();
    let small = (eps * c as f64).round() as u32;
    let medium = ((0.5 + eps) * c as f64).round() as u32;
    let mut queries = Vec::with_capacity(t);
    queries.push(ScenarioDist::single(1.0, 1.0, small)?);
    for _ in 1..t - 1 {
        queries.push(ScenarioDist::single(mid_p, 1.0, medium)?);
    }
    queries.push(ScenarioDist::single(eps, 1.0, c)?);
    SingleResourceInstance::new(grid, queries)
}

/// Four-query instance on which serving only small or only large items
/// loses a factor of four: `(r, eps)` surely, two `(r, 1/2 + eps)` queries,
/// and a rare full-size query worth `r / eps`.
pub fn large_small_instance(r: f64, eps: f64) -> Result<SingleResourceInstance> {
    if !(r > 0.0) || !(eps > 0.0 && eps < 0.25) {
        return domain("need r > 0 and epsilon in (0, 1/4)");
    }
    let k = exact_refinement(4, &[eps, 0.5 + eps])?;
    let grid = SizeGrid::new(k, 4)?;
    let c = grid.capacity_units();
    let small = (eps * c as f64).round() as u32;
    let large = ((0.5 + eps) * c as f64).round() as u32;
    let p_mid = (1.0 - 2.0 * eps) / (1.0 + 2.0 * eps);
    let queries = vec![
        ScenarioDist::single(1.0, r, small)?,
        ScenarioDist::single(p_mid, r, large)?,
        ScenarioDist::single(p_mid, r, large)?,
        ScenarioDist::single(eps, r / eps, c)?,
    ];
    SingleResourceInstance::new(grid, queries)
}

/// Values of the segregated policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeSmallReport {
    pub v_small: f64,
    pub v_large: f64,
    pub up: f64,
    pub ratio: f64,
}

/// Best online value when only items of size at most one half, or only
/// items above one half, may be served, relative to the ex-ante bound.
pub fn large_small_baseline(instance: &SingleResourceInstance) -> Result<LargeSmallReport> {
    let c = instance.capacity_units();
    let is_small = |s: &Scenario| 2 * s.size_units as u64 <= c as u64;
    let v_small = oracle::dp_value(&instance.filtered(is_small))?.value();
    let v_large = oracle::dp_value(&instance.filtered(|s| !is_small(s)))?.value();
    let up = oracle::up_value(instance)?;
    Ok(LargeSmallReport {
        v_small,
        v_large,
        up,
        ratio: v_small.max(v_large) / up,
    })
}
