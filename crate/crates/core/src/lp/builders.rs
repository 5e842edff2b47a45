//! Builders for the upper-bound LP, the k-unit pair and the knapsack
//! pair over reachable remaining-capacity states.

use std::collections::BTreeSet;

use super::{simplex_solve, Direction, LinearProgram, Sense, DEFAULT_LP_TOL};
use crate::error::{domain, Error, Result};
use crate::instance::{MultiResourceInstance, SingleResourceInstance, BUDGET_TOL};
use crate::oracle;

/// Variable cap for the capacity-state LPs.
pub const STATE_CAP: usize = 100_000;

/// Upper-bound LP with the `(t, scenario, resource)` of every variable.
#[derive(Debug, Clone)]
pub struct UpLp {
    pub lp: LinearProgram,
    pub vars: Vec<(usize, usize, usize)>,
}

/// `max sum E[r_tj x_tj]` subject to one expected-size row per resource
/// and `sum_j x_tj <= 1` per scenario.
pub fn build_up_lp(mi: &MultiResourceInstance) -> Result<UpLp> {
    let m = mi.resources();
    let cap = mi.grid().capacity_units() as f64;
    let mut lp = LinearProgram::new(Direction::Max);
    let mut vars = Vec::new();
    let mut budget: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    let mut assign = Vec::new();
    for (t, q) in mi.queries().iter().enumerate() {
        for (s, sc) in q.iter().enumerate() {
            let mut row = Vec::with_capacity(m);
            for j in 0..m {
                let v = lp.add_var(format!("x_{}_{}_{}", t, s, j), sc.prob * sc.rewards[j])?;
                vars.push((t, s, j));
                if sc.sizes_units[j] as f64 > cap {
                    // Never servable, so the offline value cannot use it either.
                    lp.set_upper(v, 0.0);
                }
                budget[j].push((v, sc.prob * sc.sizes_units[j] as f64 / cap));
                row.push((v, 1.0));
            }
            assign.push(row);
        }
    }
    for row in budget {
        lp.add_row(row, Sense::Le, 1.0)?;
    }
    for row in assign {
        lp.add_row(row, Sense::Le, 1.0)?;
    }
    Ok(UpLp { lp, vars })
}

fn check_pk(p: &[f64], k: usize) -> Result<()> {
    if k == 0 {
        return domain("k must be positive");
    }
    if p.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return domain("activity probabilities must lie in [0, 1]");
    }
    let s: f64 = p.iter().sum();
    if s > k as f64 + 1e-9 {
        return domain(format!("sum of p = {} exceeds k = {}", s, k));
    }
    Ok(())
}

/// `max theta` over ex-ante service probabilities `x_{l,t}` of serving
/// query `t` as the `l`-th one.
pub fn build_dual_pk(p: &[f64], k: usize) -> Result<LinearProgram> {
    check_pk(p, k)?;
    let n = p.len();
    let mut lp = LinearProgram::new(Direction::Max);
    let theta = lp.add_var("theta", 1.0)?;
    lp.set_upper(theta, 1.0);
    let mut x = vec![vec![0usize; n]; k];
    for (l, row) in x.iter_mut().enumerate() {
        for (t, v) in row.iter_mut().enumerate() {
            *v = lp.add_var(format!("x_{}_{}", l + 1, t + 1), 0.0)?;
        }
    }
    for t in 0..n {
        let mut row = vec![(theta, p[t])];
        row.extend((0..k).map(|l| (x[l][t], -1.0)));
        lp.add_row(row, Sense::Le, 0.0)?;
        let mut first = vec![(x[0][t], 1.0)];
        first.extend((0..t).map(|tau| (x[0][tau], p[t])));
        lp.add_row(first, Sense::Le, p[t])?;
        for l in 1..k {
            let mut row = vec![(x[l][t], 1.0)];
            for tau in 0..t {
                row.push((x[l - 1][tau], -p[t]));
                row.push((x[l][tau], p[t]));
            }
            lp.add_row(row, Sense::Le, 0.0)?;
        }
    }
    Ok(lp)
}

/// `min sum p_t beta_{1,t}` with worst-case rewards `xi_t` normalized by
/// `sum p_t xi_t = 1`.
pub fn build_primal_pk(p: &[f64], k: usize) -> Result<LinearProgram> {
    check_pk(p, k)?;
    let n = p.len();
    let mut lp = LinearProgram::new(Direction::Min);
    let mut beta = vec![vec![0usize; n]; k];
    for (l, row) in beta.iter_mut().enumerate() {
        for (t, v) in row.iter_mut().enumerate() {
            *v = lp.add_var(
                format!("beta_{}_{}", l + 1, t + 1),
                if l == 0 { p[t] } else { 0.0 },
            )?;
        }
    }
    let xi: Vec<usize> = (0..n)
        .map(|t| lp.add_var(format!("xi_{}", t + 1), 0.0))
        .collect::<Result<_>>()?;
    for t in 0..n {
        for l in 0..k {
            let mut row = vec![(beta[l][t], 1.0), (xi[t], -1.0)];
            for tau in t + 1..n {
                row.push((beta[l][tau], p[tau]));
                if l + 1 < k {
                    row.push((beta[l + 1][tau], -p[tau]));
                }
            }
            lp.add_row(row, Sense::Ge, 0.0)?;
        }
    }
    lp.add_row((0..n).map(|t| (xi[t], p[t])).collect(), Sense::Eq, 1.0)?;
    Ok(lp)
}

pub fn dual_pk_value(p: &[f64], k: usize) -> Result<f64> {
    simplex_solve(&build_dual_pk(p, k)?, DEFAULT_LP_TOL).optimum()
}

pub fn primal_pk_value(p: &[f64], k: usize) -> Result<f64> {
    simplex_solve(&build_primal_pk(p, k)?, DEFAULT_LP_TOL).optimum()
}

/// Remaining-capacity states reachable at the start of each period,
/// `t = 0..=T`, as sorted unit counts.
pub fn reachable_states(inst: &SingleResourceInstance) -> Vec<Vec<u32>> {
    let mut cur: BTreeSet<u32> = BTreeSet::new();
    cur.insert(inst.capacity_units());
    let mut out = vec![cur.iter().copied().collect::<Vec<_>>()];
    for q in inst.queries() {
        let sizes: Vec<u32> = q.size_marginals().iter().map(|&(d, _)| d).collect();
        let mut next = cur.clone();
        for &c in &cur {
            for &d in &sizes {
                if d <= c {
                    next.insert(c - d);
                }
            }
        }
        cur = next;
        out.push(cur.iter().copied().collect());
    }
    out
}

fn check_state_count(inst: &SingleResourceInstance, states: &[Vec<u32>]) -> Result<()> {
    let count: usize = inst
        .queries()
        .iter()
        .zip(states)
        .map(|(q, r)| r.len() * (q.size_marginals().len() + 1))
        .sum();
    if count > STATE_CAP {
        return Err(Error::StateCap(format!(
            "{} capacity-state variables exceed {}",
            count, STATE_CAP
        )));
    }
    Ok(())
}

/// `max theta` over `alpha_t(d, c)`, the ex-ante probability that query
/// `t` arrives with size `d` and is served at remaining capacity `c`.
pub fn build_dual_pd(inst: &SingleResourceInstance) -> Result<LinearProgram> {
    let states = reachable_states(inst);
    check_state_count(inst, &states)?;
    let cap = inst.capacity_units();
    let mut lp = LinearProgram::new(Direction::Max);
    let theta = lp.add_var("theta", 1.0)?;
    lp.set_upper(theta, 1.0);
    // alpha[t] lists (d, c, var) for c >= d.
    let mut alpha: Vec<Vec<(u32, u32, usize)>> = Vec::with_capacity(inst.horizon());
    for (t, q) in inst.queries().iter().enumerate() {
        let mut row = Vec::new();
        for &(d, _) in &q.size_marginals() {
            for &c in states[t].iter().filter(|&&c| c >= d) {
                row.push((d, c, lp.add_var(format!("alpha_{}_{}_{}", t, d, c), 0.0)?));
            }
        }
        alpha.push(row);
    }
    let find = |tau: usize, d: u32, c: u32| {
        alpha[tau]
            .iter()
            .find(|e| e.0 == d && e.1 == c)
            .map(|e| e.2)
    };
    for (t, q) in inst.queries().iter().enumerate() {
        for &(d, pd) in &q.size_marginals() {
            let mut row = vec![(theta, pd)];
            row.extend(alpha[t].iter().filter(|e| e.0 == d).map(|e| (e.2, -1.0)));
            lp.add_row(row, Sense::Le, 0.0)?;
            for &(_, c, v) in alpha[t].iter().filter(|e| e.0 == d) {
                let mut row = vec![(v, 1.0)];
                if c == cap {
                    for tau in 0..t {
                        for e in alpha[tau].iter().filter(|e| e.1 == cap && e.0 > 0) {
                            row.push((e.2, pd));
                        }
                    }
                    lp.add_row(row, Sense::Le, pd)?;
                } else {
                    for tau in 0..t {
                        for &(dt, _) in &inst.queries()[tau].size_marginals() {
                            if let Some(up) = find(tau, dt, c + dt) {
                                row.push((up, -pd));
                            }
                            if let Some(here) = find(tau, dt, c) {
                                row.push((here, pd));
                            }
                        }
                    }
                    lp.add_row(row, Sense::Le, 0.0)?;
                }
            }
        }
    }
    Ok(lp)
}

pub fn dual_pd_value(inst: &SingleResourceInstance) -> Result<f64> {
    simplex_solve(&build_dual_pd(inst)?, DEFAULT_LP_TOL).optimum()
}

/// Value-to-go LP with free rewards `r_t(d)`: `min V_1(C)` subject to
/// `V_t(c) >= V_{t+1}(c) + sum_{d <= c} p_t(d) W_t(d, c)`,
/// `W_t(d, c) >= r_t(d) + V_{t+1}(c - d) - V_{t+1}(c)` and
/// `sum p_t(d) r_t(d) = 1`.
pub fn build_primal_pd(inst: &SingleResourceInstance) -> Result<LinearProgram> {
    let states = reachable_states(inst);
    check_state_count(inst, &states)?;
    let n = inst.horizon();
    let cap = inst.capacity_units();
    let mut lp = LinearProgram::new(Direction::Min);
    let mut value: Vec<Vec<(u32, usize)>> = Vec::with_capacity(n);
    for (t, r) in states.iter().take(n).enumerate() {
        let mut row = Vec::with_capacity(r.len());
        for &c in r {
            let cost = if t == 0 && c == cap { 1.0 } else { 0.0 };
            row.push((c, lp.add_var(format!("V_{}_{}", t, c), cost)?));
        }
        value.push(row);
    }
    let v_at = |t: usize, c: u32| -> Option<usize> {
        if t >= n {
            None
        } else {
            value[t].iter().find(|e| e.0 == c).map(|e| e.1)
        }
    };
    let mut norm = Vec::new();
    for (t, q) in inst.queries().iter().enumerate() {
        let marg = q.size_marginals();
        let mut r_vars = Vec::with_capacity(marg.len());
        for &(d, pd) in &marg {
            let v = lp.add_var(format!("r_{}_{}", t, d), 0.0)?;
            norm.push((v, pd));
            r_vars.push(v);
        }
        for &c in &states[t] {
            let mut row = vec![(v_at(t, c).expect("state exists"), 1.0)];
            if let Some(next) = v_at(t + 1, c) {
                row.push((next, -1.0));
            }
            for (i, &(d, pd)) in marg.iter().enumerate() {
                if d > c {
                    continue;
                }
                let w = lp.add_var(format!("W_{}_{}_{}", t, d, c), 0.0)?;
                row.push((w, -pd));
                let mut wrow = vec![(w, 1.0), (r_vars[i], -1.0)];
                if let Some(after) = v_at(t + 1, c - d) {
                    wrow.push((after, -1.0));
                }
                if let Some(stay) = v_at(t + 1, c) {
                    wrow.push((stay, 1.0));
                }
                lp.add_row(wrow, Sense::Ge, 0.0)?;
            }
            lp.add_row(row, Sense::Ge, 0.0)?;
        }
    }
    lp.add_row(norm, Sense::Eq, 1.0)?;
    Ok(lp)
}

/// Outcome of the value-to-go / OCRS equivalence check.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub dual: f64,
    pub primal: f64,
    /// DP value over the upper bound with the worst-case rewards.
    pub dp_ratio: f64,
    /// DP value over the upper bound with the instance's own rewards.
    pub given_ratio: Option<f64>,
    /// Worst-case reward per query and explicit scenario.
    pub worst_rewards: Vec<Vec<f64>>,
    pub agrees: bool,
}

/// Solves both knapsack LPs, plugs the worst-case rewards into the DP and
/// compares. Also checks that the instance's own rewards do no worse.
pub fn oracle_equivalence(inst: &SingleResourceInstance) -> Result<EquivalenceReport> {
    if inst.horizon() > 6 || inst.capacity_units() > 12 {
        return Err(Error::StateCap(format!(
            "equivalence check is limited to T <= 6 and K T <= 12 (got T = {}, K T = {})",
            inst.horizon(),
            inst.capacity_units()
        )));
    }
    if inst.budget() > 1.0 + BUDGET_TOL {
        return domain(format!("budget {} exceeds 1", inst.budget()));
    }
    if inst.queries().iter().all(|q| q.size_marginals().is_empty()) {
        return domain("instance has no active scenario");
    }
    let dual = dual_pd_value(inst)?;
    let primal_lp = build_primal_pd(inst)?;
    let sol = simplex_solve(&primal_lp, DEFAULT_LP_TOL);
    let primal = sol.optimum()?;
    let worst = inst.with_rewards(|t, _, s| {
        if s.is_inactive() {
            return 0.0;
        }
        primal_lp
            .var(&format!("r_{}_{}", t, s.size_units))
            .map_or(0.0, |v| sol.x[v])
    });
    let worst_rewards = worst
        .queries()
        .iter()
        .map(|q| q.scenarios().iter().map(|s| s.reward).collect())
        .collect();
    let up = oracle::up_value(&worst)?;
    let dp_ratio = oracle::dp_value(&worst)?.value() / up;
    let given_up = oracle::up_value(inst)?;
    let given_ratio = if given_up > 0.0 {
        Some(oracle::dp_value(inst)?.value() / given_up)
    } else {
        None
    };
    let rel = 1e-6 * dual.abs().max(1.0);
    let agrees = (dp_ratio - dual).abs() <= rel
        && (primal - dual).abs() <= rel
        && given_ratio.is_none_or(|g| g >= dual - 1e-9);
    Ok(EquivalenceReport {
        dual,
        primal,
        dp_ratio,
        given_ratio,
        worst_rewards,
        agrees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{MultiScenario, SizeGrid};
    use crate::kunit;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn two_halves_give_two_thirds() {
        assert_abs_diff_eq!(
            dual_pk_value(&[0.5, 0.5], 1).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            primal_pk_value(&[0.5, 0.5], 1).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-9
        );
        let inst =
            SingleResourceInstance::from_triples(1, &[vec![(0.5, 1.0, 2)], vec![(0.5, 1.0, 2)]])
                .unwrap();
        assert_abs_diff_eq!(dual_pd_value(&inst).unwrap(), 2.0 / 3.0, epsilon = 1e-9);
        let rep = oracle_equivalence(&inst).unwrap();
        assert!(rep.agrees, "{:?}", rep);
        assert_abs_diff_eq!(rep.dp_ratio, 2.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn deterministic_single_query() {
        assert_abs_diff_eq!(dual_pk_value(&[1.0], 1).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(primal_pk_value(&[1.0], 1).unwrap(), 1.0, epsilon = 1e-12);
        let inst = SingleResourceInstance::from_triples(2, &[vec![(1.0, 3.0, 2)]]).unwrap();
        assert_abs_diff_eq!(dual_pd_value(&inst).unwrap(), 1.0, epsilon = 1e-12);
        let rep = oracle_equivalence(&inst).unwrap();
        assert!(rep.agrees);
        assert_abs_diff_eq!(rep.dp_ratio, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn knapsack_lp_matches_kunit_lp_for_unit_sizes() {
        let p = [0.4, 0.7, 0.5, 0.3];
        let k = 2;
        let triples: Vec<Vec<(f64, f64, u32)>> = p.iter().map(|&pt| vec![(pt, 1.0, 2)]).collect();
        // k = 2 means size 1/2 = 2 units of a 4-unit grid.
        let inst = SingleResourceInstance::from_triples(1, &triples).unwrap();
        assert_eq!(inst.capacity_units(), 4);
        let a = dual_pd_value(&inst).unwrap();
        let b = dual_pk_value(&p, k).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-8);
    }

    #[test]
    fn up_lp_examples() {
        let grid = SizeGrid::new(1, 2).unwrap();
        let q = |p: f64, r: f64, d: u32| {
            vec![MultiScenario {
                prob: p,
                rewards: vec![r],
                sizes_units: vec![d],
            }]
        };
        let mi = MultiResourceInstance::new(1, grid, vec![q(0.5, 2.0, 1), q(1.0, 1.0, 1)]).unwrap();
        let up = build_up_lp(&mi).unwrap();
        let r = simplex_solve(&up.lp, DEFAULT_LP_TOL);
        assert_abs_diff_eq!(r.objective, 2.0, epsilon = 1e-12);
        // One certain query of size twice the capacity earns half its reward.
        let grid1 = SizeGrid::new(2, 1).unwrap();
        let big = MultiResourceInstance::new(1, grid1, vec![q(1.0, 3.0, 2)]).unwrap();
        let cap = grid1.capacity_units() as f64;
        assert_eq!(cap, 2.0);
        let r = simplex_solve(&build_up_lp(&big).unwrap().lp, DEFAULT_LP_TOL);
        assert_abs_diff_eq!(r.objective, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn up_lp_off_budget_takes_fraction() {
        // Two certain full-size queries: the budget row binds and the LP
        // keeps the better reward plus nothing of the other.
        let grid = SizeGrid::new(1, 2).unwrap();
        let q = |r: f64| {
            vec![MultiScenario {
                prob: 1.0,
                rewards: vec![r],
                sizes_units: vec![2],
            }]
        };
        let mi = MultiResourceInstance::new(1, grid, vec![q(3.0), q(1.0)]).unwrap();
        let r = simplex_solve(&build_up_lp(&mi).unwrap().lp, DEFAULT_LP_TOL);
        assert_abs_diff_eq!(r.objective, 3.0, epsilon = 1e-12);
        // Half-size items worth 1 and a full-size item worth 3: take both halves
        // (value 2) or the full item (3); the fractional optimum is 3.
        let mixed = MultiResourceInstance::new(
            1,
            grid,
            vec![
                vec![MultiScenario {
                    prob: 1.0,
                    rewards: vec![1.0],
                    sizes_units: vec![1],
                }],
                vec![MultiScenario {
                    prob: 1.0,
                    rewards: vec![4.0],
                    sizes_units: vec![2],
                }],
            ],
        )
        .unwrap();
        let r = simplex_solve(&build_up_lp(&mixed).unwrap().lp, DEFAULT_LP_TOL);
        assert_abs_diff_eq!(r.objective, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_two_resources() {
        let grid = SizeGrid::new(1, 2).unwrap();
        let s = MultiScenario {
            prob: 1.0,
            rewards: vec![1.0, 1.0],
            sizes_units: vec![2, 2],
        };
        let mi = MultiResourceInstance::new(2, grid, vec![vec![s.clone()], vec![s]]).unwrap();
        let r = simplex_solve(&build_up_lp(&mi).unwrap().lp, DEFAULT_LP_TOL);
        assert_abs_diff_eq!(r.objective, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn state_cap_is_enforced() {
        let triples: Vec<Vec<(f64, f64, u32)>> = (0..400)
            .map(|i| vec![(0.002, 1.0, 1 + (i % 7) as u32), (0.001, 1.0, 13)])
            .collect();
        let inst = SingleResourceInstance::from_triples(3, &triples).unwrap();
        assert!(matches!(build_dual_pd(&inst), Err(Error::StateCap(_))));
    }

    #[test]
    fn certificate_is_primal_feasible() {
        let p = [0.3, 0.6, 0.2, 0.5, 0.4];
        let k = 2;
        let theta = kunit::solve_theta_star(&p, k, 1e-12).unwrap();
        let cert = kunit::build_dual_certificate(&p, k, theta).unwrap();
        let lp = build_primal_pk(&p, k).unwrap();
        let mut x = vec![0.0; lp.num_vars()];
        for l in 0..k {
            for t in 0..p.len() {
                x[lp.var(&format!("beta_{}_{}", l + 1, t + 1)).unwrap()] = cert.beta[l][t];
            }
        }
        for t in 0..p.len() {
            x[lp.var(&format!("xi_{}", t + 1)).unwrap()] = cert.xi[t];
        }
        assert!(lp.residual(&x) <= 1e-8, "{}", lp.residual(&x));
        assert_abs_diff_eq!(lp.objective_value(&x), theta, epsilon = 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(60))]
        #[test]
        fn dual_matches_construction_and_primal(raw in prop::collection::vec(0.05f64..0.9, 2..9), k in 1usize..4) {
            let s: f64 = raw.iter().sum();
            let scale = if s > k as f64 { k as f64 / s } else { 1.0 };
            let p: Vec<f64> = raw.iter().map(|v| v * scale).collect();
            let lp = dual_pk_value(&p, k).unwrap();
            let pr = primal_pk_value(&p, k).unwrap();
            let th = kunit::solve_theta_star(&p, k, 1e-12).unwrap();
            prop_assert!((lp - th).abs() <= 1e-6, "lp {} theta {}", lp, th);
            prop_assert!((lp - pr).abs() <= 1e-6);
        }
    }
}
