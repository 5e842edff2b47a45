//! Unit-density knapsack (reward equals size): Best-fit with a
//! nonincreasing service-rate sequence derived from the profile `h`.

use crate::error::{domain, Result};
use crate::instance::{expected_size, ScenarioDist, SingleResourceInstance, SizeGrid};
use crate::knapsack::{self, PolicyRun};
use crate::numeric::golden_max;

/// Feasibility slack for the rate-sequence program.
pub const OP_TOL: f64 = 1e-9;

/// Right-hand side shared by the profile and the program constraints:
/// `min(1 - g1 - s, 1 - 2 s - g1 exp(-2 s / g1))`.
fn clause_bound(g1: f64, s: f64) -> f64 {
    let first = 1.0 - g1 - s;
    let second = if g1 > 0.0 {
        1.0 - 2.0 * s - g1 * (-2.0 * s / g1).exp()
    } else {
        1.0 - 2.0 * s
    };
    first.min(second)
}

/// Sampled profile `h` on `[0, 1]`. Between grid points `h` is constant,
/// equal to the value at the right end of the step, so the clause
/// `h(tau) <= bound(int_0^tau h)` holds at every `tau`, not only at grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct HProfile {
    pub gamma0: f64,
    pub step: f64,
    /// `h(i * step)`, with `values[0] = gamma0`.
    pub values: Vec<f64>,
    /// `int_0^{i step} h`.
    pub integral: Vec<f64>,
}

pub fn h_profile(gamma0: f64, delta: f64) -> Result<HProfile> {
    if !(gamma0 > 0.0 && gamma0 < 1.0) {
        return domain(format!("gamma0 {} outside (0, 1)", gamma0));
    }
    if !(delta > 0.0 && delta <= 1e-2) {
        return domain(format!("step {} outside (0, 0.01]", delta));
    }
    let n = (1.0 / delta).round().max(1.0) as usize;
    let step = 1.0 / n as f64;
    let mut values = Vec::with_capacity(n + 1);
    let mut integral = Vec::with_capacity(n + 1);
    values.push(gamma0);
    integral.push(0.0);
    for i in 1..=n {
        let prev = values[i - 1];
        let base = integral[i - 1];
        // v = min(prev, bound(base + step v)); a contraction since step <= 0.01.
        let mut v = prev;
        for _ in 0..8 {
            v = prev.min(clause_bound(gamma0, base + step * v)).max(0.0);
        }
        // Shrinking v only relaxes the bound, so one more pass makes it hold.
        v = v.min(clause_bound(gamma0, base + step * v)).max(0.0);
        values.push(v);
        integral.push(base + step * v);
    }
    Ok(HProfile {
        gamma0,
        step,
        values,
        integral,
    })
}

impl HProfile {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `h(t)` under the step convention.
    pub fn value_at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.values[0];
        }
        let n = self.values.len() - 1;
        let i = ((t / self.step).ceil() as usize).clamp(1, n);
        self.values[i]
    }

    /// `int_0^t h`.
    pub fn integral_to(&self, t: f64) -> f64 {
        let n = self.values.len() - 1;
        let t = t.clamp(0.0, 1.0);
        let i = ((t / self.step).floor() as usize).min(n - 1);
        let frac = (t - i as f64 * self.step).max(0.0);
        self.integral[i] + frac * self.values[i + 1]
    }

    pub fn total(&self) -> f64 {
        *self.integral.last().expect("profile is nonempty")
    }

    /// Largest excess of `h(t)` over its clause bound, for `t > 0`.
    pub fn max_clause_violation(&self) -> f64 {
        (1..self.values.len())
            .map(|i| self.values[i] - clause_bound(self.gamma0, self.integral[i]))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Per-period service rates with cumulative expected sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSequence {
    pub gammas: Vec<f64>,
    /// `k_0 = 0, ..., k_T` with `k_t - k_{t-1} = psi_t`.
    pub cumulative: Vec<f64>,
}

/// Averages of `h` over the windows `[k_{t-1}, k_t]`.
pub fn gamma_sequence(psi: &[f64], gamma0: f64, delta: f64) -> Result<GammaSequence> {
    let profile = h_profile(gamma0, delta)?;
    gamma_sequence_from(&profile, psi)
}

pub fn gamma_sequence_from(profile: &HProfile, psi: &[f64]) -> Result<GammaSequence> {
    if let Some(bad) = psi.iter().find(|&&v| !(v > 0.0)) {
        return domain(format!("window length {} must be positive", bad));
    }
    let total: f64 = psi.iter().sum();
    if total > 1.0 + 1e-12 {
        return domain(format!("window lengths sum to {} > 1", total));
    }
    let mut cumulative = vec![0.0];
    let mut gammas = Vec::with_capacity(psi.len());
    let mut k = 0.0;
    let mut prev_int = 0.0;
    for &w in psi {
        k += w;
        cumulative.push(k);
        let int = profile.integral_to(k);
        gammas.push(((int - prev_int) / w).clamp(0.0, 1.0));
        prev_int = int;
    }
    // Rounding can make consecutive averages tick up by an ulp.
    for t in 1..gammas.len() {
        if gammas[t] > gammas[t - 1] {
            gammas[t] = gammas[t - 1];
        }
    }
    Ok(GammaSequence { gammas, cumulative })
}

/// Constraint excesses of the rate-sequence program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpReport {
    pub feasible: bool,
    pub chain_violation: f64,
    pub first_violation: f64,
    pub second_violation: f64,
}

/// Checks `1 >= g_1 >= ... >= g_T >= 0` and, for each `t < T`,
/// `g_{t+1} <= 1 - g_1 - S_t` and `g_{t+1} <= 1 - 2 S_t - g_1 exp(-2 S_t / g_1)`
/// with `S_t = sum_{tau <= t} g_tau psi_tau`.
pub fn op_report(gammas: &[f64], psi: &[f64]) -> Result<OpReport> {
    if gammas.len() != psi.len() {
        return domain("rates and window lengths differ in length");
    }
    let mut chain: f64 = 0.0;
    let mut first: f64 = f64::NEG_INFINITY;
    let mut second: f64 = f64::NEG_INFINITY;
    if let Some(&g1) = gammas.first() {
        chain = chain.max(g1 - 1.0);
        let mut s = 0.0;
        for t in 0..gammas.len() {
            chain = chain.max(-gammas[t]);
            if t + 1 < gammas.len() {
                chain = chain.max(gammas[t + 1] - gammas[t]);
                s += gammas[t] * psi[t];
                first = first.max(gammas[t + 1] - (1.0 - g1 - s));
                let sec = if g1 > 0.0 {
                    1.0 - 2.0 * s - g1 * (-2.0 * s / g1).exp()
                } else {
                    1.0 - 2.0 * s
                };
                second = second.max(gammas[t + 1] - sec);
            }
        }
    }
    Ok(OpReport {
        feasible: chain <= OP_TOL && first <= OP_TOL && second <= OP_TOL,
        chain_violation: chain,
        first_violation: first,
        second_violation: second,
    })
}

pub fn check_op_feasible(gammas: &[f64], psi: &[f64]) -> bool {
    op_report(gammas, psi).map(|r| r.feasible).unwrap_or(false)
}

/// Lower bound on `P(X_t = 0)` after `t` queries.
pub fn empty_mass_bound(gammas: &[f64], psi: &[f64], t: usize) -> f64 {
    if t == 0 || gammas.is_empty() || gammas[0] == 0.0 {
        return 1.0;
    }
    let s: f64 = gammas.iter().zip(psi).take(t).map(|(g, p)| g * p).sum();
    clause_bound(gammas[0], s)
}

/// Maximizes `int_0^1 h` over `gamma0`. A coarse grid brackets the peak,
/// golden-section search refines it, and the grid point is kept if it
/// turns out better by more than `1e-4`.
pub fn optimize_gamma0(delta: f64, tol: f64) -> Result<(f64, f64)> {
    let value = |g: f64, d: f64| {
        h_profile(g, d)
            .map(|p| p.total())
            .unwrap_or(f64::NEG_INFINITY)
    };
    let coarse_delta = delta.max(1e-3);
    let grid: Vec<f64> = (1..1000).map(|i| i as f64 * 1e-3).collect();
    let scores = map_values(&grid, |&g| value(g, coarse_delta));
    let (best_i, _) = scores
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
    let g_grid = grid[best_i];
    let lo = (g_grid - 2e-3).max(1e-6);
    let hi = (g_grid + 2e-3).min(1.0 - 1e-6);
    let (g_gold, v_gold) = golden_max(|g| value(g, delta), lo, hi, tol.max(1e-12));
    let v_grid = value(g_grid, delta);
    if v_grid > v_gold + 1e-4 {
        log::warn!(
            "grid optimum {} beats golden-section {} by more than 1e-4",
            v_grid,
            v_gold
        );
        return Ok((g_grid, v_grid));
    }
    Ok((g_gold, v_gold))
}

#[cfg(feature = "parallel")]
fn map_values<T: Sync, F: Fn(&T) -> f64 + Sync + Send>(xs: &[T], f: F) -> Vec<f64> {
    use rayon::prelude::*;
    xs.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_values<T, F: Fn(&T) -> f64>(xs: &[T], f: F) -> Vec<f64> {
    xs.iter().map(f).collect()
}

/// Run of the unit-density policy.
#[derive(Debug, Clone)]
pub struct UdRun {
    pub run: PolicyRun,
    pub nonincreasing: bool,
    /// `sum_t gamma_t psi_t`.
    pub planned_utilization: f64,
    /// `P(X_t = 0)` for `t = 0..=T`.
    pub empty_mass: Vec<f64>,
    /// `empty_mass_bound` for `t = 0..=T`.
    pub empty_bounds: Vec<f64>,
}

pub fn is_unit_density(instance: &SingleResourceInstance) -> bool {
    let grid = instance.grid();
    instance
        .queries()
        .iter()
        .flat_map(|q| q.scenarios())
        .all(|s| (s.reward - grid.to_real(s.size_units)).abs() <= 1e-12)
}

/// Best-fit with per-period rates on a unit-density instance. Sequences
/// that are not nonincreasing are run as given and flagged.
pub fn run_ud_policy(instance: &SingleResourceInstance, gammas: &[f64]) -> Result<UdRun> {
    if !is_unit_density(instance) {
        return domain("instance is not unit-density (reward must equal size)");
    }
    let run = knapsack::run_with_gammas(instance, gammas)?;
    let psi: Vec<f64> = instance
        .queries()
        .iter()
        .map(|q| expected_size(q, &instance.grid()))
        .collect();
    let nonincreasing = gammas.windows(2).all(|w| w[1] <= w[0] + 1e-15);
    let planned_utilization = gammas.iter().zip(&psi).map(|(g, p)| g * p).sum();
    let empty_mass = run.trace.iter().map(|p| p.mass_at(0)).collect();
    let empty_bounds = (0..=instance.horizon())
        .map(|t| empty_mass_bound(gammas, &psi, t))
        .collect();
    Ok(UdRun {
        run,
        nonincreasing,
        planned_utilization,
        empty_mass,
        empty_bounds,
    })
}

/// Expected sizes per query.
pub fn window_lengths(instance: &SingleResourceInstance) -> Vec<f64> {
    instance
        .queries()
        .iter()
        .map(|q| expected_size(q, &instance.grid()))
        .collect()
}

/// Instance with sizes `1/2, 1/2, 1/3, 1` arriving with probabilities
/// `2/3, 2/3, 1 - eps, eps/3`, on a 12-unit grid.
pub fn three_size_instance(eps: f64) -> Result<SingleResourceInstance> {
    if !(eps > 0.0 && eps < 1.0) {
        return domain("epsilon must be in (0, 1)");
    }
    let grid = SizeGrid::new(3, 4)?;
    let c = grid.capacity_units();
    let mk = |p: f64, d: u32| ScenarioDist::single(p, d as f64 / c as f64, d);
    SingleResourceInstance::new(
        grid,
        vec![
            mk(2.0 / 3.0, 6)?,
            mk(2.0 / 3.0, 6)?,
            mk(1.0 - eps, 4)?,
            mk(eps / 3.0, 12)?,
        ],
    )
}

/// `T` queries of size `1/2 + 1/T` arriving with probability `2/T`, where
/// at most one item fits.
pub fn ud_upper_instance(t: usize) -> Result<SingleResourceInstance> {
    if t < 3 {
        return domain("need T >= 3");
    }
    let k = if t.is_multiple_of(2) { 1 } else { 2 };
    let grid = SizeGrid::new(k, t as u32)?;
    let c = grid.capacity_units();
    let d = c / 2 + k;
    let q = ScenarioDist::single(2.0 / t as f64, d as f64 / c as f64, d)?;
    SingleResourceInstance::new(grid, vec![q; t])
}

/// `(1/2 + 1/T)(1 - (1 - 2/T)^T)`.
pub fn ud_upper_best_online(t: usize) -> f64 {
    let tf = t as f64;
    (0.5 + 1.0 / tf) * (1.0 - (1.0 - 2.0 / tf).powf(tf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn profile_starts_at_gamma0_and_decreases() {
        let p = h_profile(0.3977, 1e-3).unwrap();
        assert_eq!(p.values[0], 0.3977);
        assert!(p.values.windows(2).all(|w| w[1] <= w[0]));
        assert!(p.values.iter().all(|&v| v >= 0.0));
        assert!(p.max_clause_violation() <= 1e-12);
    }

    #[test]
    fn headline_value_at_reported_gamma0() {
        let p = h_profile(0.3977, 1e-5).unwrap();
        assert!((p.total() - 0.3557).abs() < 1e-3, "{}", p.total());
    }

    #[test]
    fn single_window_is_total() {
        let p = h_profile(0.35, 1e-3).unwrap();
        let g = gamma_sequence_from(&p, &[1.0]).unwrap();
        assert_abs_diff_eq!(g.gammas[0], p.total(), epsilon = 1e-12);
    }

    #[test]
    fn fine_windows_track_the_profile() {
        let p = h_profile(0.4, 1e-4).unwrap();
        let t = 200;
        let g = gamma_sequence_from(&p, &vec![1.0 / t as f64; t]).unwrap();
        for i in (0..t).step_by(17) {
            let mid = (i as f64 + 0.5) / t as f64;
            assert!((g.gammas[i] - p.value_at(mid)).abs() < 5e-3);
        }
    }

    #[test]
    fn op_examples() {
        assert!(check_op_feasible(&[0.0, 0.0, 0.0], &[0.3, 0.3, 0.3]));
        let g = knapsack::default_gamma();
        assert!(check_op_feasible(&[g; 5], &[0.2; 5]));
        let rep = op_report(&[0.9, 0.0], &[0.5, 0.5]).unwrap();
        assert!(rep.second_violation > 0.2);
        assert!(!rep.feasible);
        assert!(!check_op_feasible(&[0.5, 0.6], &[0.1, 0.1]));
    }

    #[test]
    fn empty_bound_edges() {
        assert_eq!(empty_mass_bound(&[0.3, 0.3], &[0.5, 0.5], 0), 1.0);
        assert_eq!(empty_mass_bound(&[0.0, 0.0], &[0.5, 0.5], 2), 1.0);
    }

    #[test]
    fn three_size_hand_sequence() {
        let inst = three_size_instance(1e-9).unwrap();
        let r = run_ud_policy(&inst, &[1.0, 1.0 / 3.0, 5.0 / 9.0, 0.0]).unwrap();
        assert!(r.run.feasible);
        assert!(!r.nonincreasing);
        assert_abs_diff_eq!(r.run.expected_reward, 17.0 / 27.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.planned_utilization, 17.0 / 27.0, epsilon = 1e-6);
    }

    #[test]
    fn three_size_uniform_cap() {
        let inst = three_size_instance(1e-9).unwrap();
        let cap = knapsack::max_feasible_gamma(&inst, 1e-10).unwrap();
        assert_abs_diff_eq!(cap, 9.0 / 22.0, epsilon = 1e-6);
    }

    #[test]
    fn zero_rates_are_feasible() {
        let inst = three_size_instance(0.01).unwrap();
        let r = run_ud_policy(&inst, &[0.0; 4]).unwrap();
        assert!(r.run.feasible);
        assert_eq!(r.run.expected_reward, 0.0);
    }

    #[test]
    fn non_unit_density_rejected() {
        let inst = SingleResourceInstance::from_triples(1, &[vec![(0.5, 2.0, 1)]]).unwrap();
        assert!(run_ud_policy(&inst, &[0.3]).is_err());
    }

    #[test]
    fn upper_instance_shape() {
        let inst = ud_upper_instance(1000).unwrap();
        assert_eq!(inst.capacity_units(), 1000);
        assert_eq!(inst.queries()[0].scenarios()[0].size_units, 501);
        let odd = ud_upper_instance(7).unwrap();
        assert_eq!(odd.capacity_units(), 14);
        assert_eq!(odd.queries()[0].scenarios()[0].size_units, 9);
        assert!((ud_upper_best_online(1_000_000) - (1.0 - (-2.0f64).exp()) / 2.0).abs() < 1e-5);
    }

    #[test]
    fn worst_case_is_full_budget() {
        let p = h_profile(0.3977, 1e-4).unwrap();
        let full = p.total();
        for i in 1..20 {
            let kt = i as f64 / 20.0;
            assert!(p.integral_to(kt) / kt >= full - 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn sequences_are_op_feasible(raw in prop::collection::vec(0.01f64..1.0, 1..12), total in 0.05f64..1.0, g0 in 0.05f64..0.95) {
            let s: f64 = raw.iter().sum();
            let psi: Vec<f64> = raw.iter().map(|v| v / s * total).collect();
            let g = gamma_sequence(&psi, g0, 1e-3).unwrap();
            let rep = op_report(&g.gammas, &psi).unwrap();
            prop_assert!(rep.feasible, "{:?}", rep);
        }
    }
}
