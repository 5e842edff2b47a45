//! k-unit contention resolution: the conservative candidate solution, the
//! instance-optimal guarantee `theta*`, its dual optimality certificate,
//! probability splitting, and the executable policy.
//!
//! Indexing: level `l` (1-based in the math) is `x[l - 1]`, period `t`
//! (1-based) is column `t - 1`. Breakpoints are stored as period counts,
//! so level `l` is zero on the first `breakpoints[l - 1]` periods.

use crate::error::{domain, Error, Result};
use crate::numeric::bisect;

/// Slack for the "first time such that" tests of the construction.
pub const BREAK_SLACK: f64 = 1e-12;
/// Default tolerance for `solve_theta_star`.
pub const DEFAULT_TOL: f64 = 1e-9;
const MAX_BISECTION: usize = 200;
/// Tolerance used by [`verify_certificate`].
pub const CERT_TOL: f64 = 1e-8;

/// Candidate solution `{theta, x_{l,t}}` with its breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSolution {
    pub k: usize,
    pub theta: f64,
    /// `x[l][t]`, `k` rows of length `T`.
    pub x: Vec<Vec<f64>>,
    /// `t_1 = 0, t_2, ..., t_k` followed by `T`.
    pub breakpoints: Vec<usize>,
}

impl CandidateSolution {
    pub fn horizon(&self) -> usize {
        self.x.first().map_or(0, |r| r.len())
    }

    /// `sum_{t <= T-1} x_{k,t} - (1 - theta)`; feasible iff `<= 0`.
    pub fn feasibility_residual(&self) -> f64 {
        let n = self.horizon();
        let last = &self.x[self.k - 1];
        let s: f64 = last[..n.saturating_sub(1)].iter().sum();
        s - (1.0 - self.theta)
    }
}

fn check_inputs(p: &[f64], k: usize) -> Result<()> {
    if k == 0 {
        return domain("k must be at least 1");
    }
    if let Some(bad) = p.iter().find(|&&v| !(0.0..=1.0).contains(&v)) {
        return domain(format!("arrival probability {} outside [0, 1]", bad));
    }
    let total: f64 = p.iter().sum();
    if total > k as f64 + 1e-9 {
        return domain(format!("sum of probabilities {} exceeds k = {}", total, k));
    }
    Ok(())
}

/// Builds the candidate `x_{l,t}(theta)` level by level. Each level is
/// zero until its start, then absorbs what lower levels leave of
/// `theta * p_t`, and after its own breakpoint serves everything it can.
pub fn build_candidate(p: &[f64], k: usize, theta: f64) -> Result<CandidateSolution> {
    check_inputs(p, k)?;
    if !(0.0..=1.0).contains(&theta) {
        return domain(format!("theta {} outside [0, 1]", theta));
    }
    let n = p.len();
    let mut x = vec![vec![0.0; n]; k];
    let mut bp = vec![n; k + 1];
    bp[0] = 0;
    let mut below = vec![0.0; n];

    for l in 0..k {
        let start = bp[l];
        if l + 1 == k {
            for t in start..n {
                x[l][t] = theta * p[t] - below[t];
            }
        } else {
            // Cumulative sums over periods strictly before t.
            let mut cum_prev: f64 = if l > 0 {
                x[l - 1][..start].iter().sum()
            } else {
                0.0
            };
            let mut cum_cur = 0.0;
            let mut absorbing = true;
            for t in start..n {
                let mid = theta * p[t] - below[t];
                let occupancy = if l == 0 {
                    1.0 - cum_cur
                } else {
                    cum_prev - cum_cur
                };
                if absorbing {
                    let switch = if l == 0 {
                        theta > occupancy + BREAK_SLACK
                    } else {
                        mid > p[t] * occupancy + BREAK_SLACK
                    };
                    if switch {
                        absorbing = false;
                        bp[l + 1] = t;
                    }
                }
                x[l][t] = if absorbing { mid } else { p[t] * occupancy };
                if l > 0 {
                    cum_prev += x[l - 1][t];
                }
                cum_cur += x[l][t];
            }
        }
        for t in 0..n {
            below[t] += x[l][t];
        }
    }
    Ok(CandidateSolution {
        k,
        theta,
        x,
        breakpoints: bp,
    })
}

/// Feasibility test: `sum_{t <= T-1} x_{k,t} <= 1 - theta`.
pub fn is_feasible(c: &CandidateSolution) -> bool {
    c.feasibility_residual() <= BREAK_SLACK
}

/// Largest feasible `theta`, by bisection on the monotone residual.
pub fn solve_theta_star(p: &[f64], k: usize, tol: f64) -> Result<f64> {
    check_inputs(p, k)?;
    if !(tol > 0.0) {
        return domain("tolerance must be positive");
    }
    if p.is_empty() {
        return Ok(1.0);
    }
    let residual = |theta: f64| {
        build_candidate(p, k, theta)
            .map(|c| c.feasibility_residual())
            .unwrap_or(f64::INFINITY)
    };
    if residual(1.0) <= 0.0 {
        return Ok(1.0);
    }
    // The residual has slope at most 1 + sum(p) in theta.
    let slope = 1.0 + p.iter().sum::<f64>();
    let (lo, _) = bisect(residual, 0.0, 1.0, tol / (2.0 * slope), MAX_BISECTION);
    Ok(lo)
}

/// Dual solution `{beta, xi}` with the intermediate quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub k: usize,
    /// `beta[l][t]`, `k` rows of length `T`.
    pub beta: Vec<Vec<f64>>,
    pub xi: Vec<f64>,
    /// `b[l][q]` for levels `1..=k` (index 0 unused), `q = 0..=k`.
    pub b: Vec<Vec<f64>>,
    /// `a[l][q][t]` over the same index ranges and all periods.
    pub a: Vec<Vec<Vec<f64>>>,
    /// `delta[l1][l2]`, 1-based.
    pub delta: Vec<Vec<f64>>,
    /// `phi[l]`, 1-based.
    pub phi: Vec<f64>,
    pub r: f64,
    /// Interval endpoints `t_1..t_{k+1}` (1-based index, entry 0 unused).
    pub intervals: Vec<usize>,
}

/// Poisson-binomial probabilities of exactly `q = 0..=k` successes;
/// identical to `e_q(odds) * prod(1 - p)`.
fn push_bernoulli(pb: &mut [f64], p: f64) {
    for q in (1..pb.len()).rev() {
        pb[q] = pb[q] * (1.0 - p) + pb[q - 1] * p;
    }
    pb[0] *= 1.0 - p;
}

/// Builds the dual certificate at `theta_star`. Requires every `p_t < 1`
/// and `p_T > 0`.
pub fn build_dual_certificate(p: &[f64], k: usize, theta_star: f64) -> Result<DualCertificate> {
    check_inputs(p, k)?;
    let n = p.len();
    if n == 0 {
        return Err(Error::Unsupported(
            "certificate needs at least one query".into(),
        ));
    }
    if p.iter().any(|&v| v >= 1.0) {
        return Err(Error::Unsupported(
            "certificate requires every arrival probability below 1".into(),
        ));
    }
    let p_last = p[n - 1];
    if !(p_last > 0.0) {
        return Err(Error::Unsupported(
            "certificate requires a positive last arrival probability".into(),
        ));
    }
    let cand = build_candidate(p, k, theta_star)?;

    // Interval endpoints as 1-based period indices, capped at T-1.
    let mut tb = vec![0usize; k + 2];
    for l in 2..=k {
        tb[l] = cand.breakpoints[l - 1].min(n - 1);
    }
    tb[k + 1] = n - 1;
    for l in 2..=k + 1 {
        tb[l] = tb[l].max(tb[l - 1]);
    }

    // Level l covers 0-based periods tb[l]..tb[l+1].
    let mut b = vec![vec![0.0; k + 1]; k + 1];
    let mut a = vec![vec![vec![0.0; n]; k + 1]; k + 1];
    for l in 1..=k {
        let mut pb = vec![0.0; k + 1];
        pb[0] = 1.0;
        for t in (tb[l]..tb[l + 1]).rev() {
            for q in 0..=k {
                a[l][q][t] = pb[q];
            }
            push_bernoulli(&mut pb, p[t]);
        }
        b[l] = pb;
    }

    // g[j][w]: nested sums over levels j..=k.
    let mut g = vec![vec![0.0; k + 1]; k + 2];
    for w in 0..=k {
        g[k][w] = b[k][k - w];
    }
    for j in (1..k).rev() {
        for w in 0..=j {
            g[j][w] = (w..=j).map(|w2| b[j][w2 - w] * g[j + 1][w2]).sum();
        }
    }
    let mut delta = vec![vec![0.0; k + 1]; k + 1];
    for l1 in 1..k {
        delta[l1][k] = 1.0;
    }
    for l2 in 1..k {
        for l1 in 1..l2 {
            delta[l1][l2] = (l1 + 1..=l2).map(|w0| g[l2 + 1][w0]).sum();
        }
    }

    let mut phi = vec![0.0; k + 1];
    phi[k] = 1.0;
    for l in 1..k {
        let mut acc = 0.0;
        for q in l + 1..=k {
            for w in l + 1..=q {
                let tail: f64 = b[q][..w - l].iter().sum();
                acc += (delta[w - 1][q] - delta[w][q]) * (1.0 - tail);
            }
        }
        phi[l] = acc;
    }

    let level_of = |t: usize| (1..=k).find(|&l| t >= tb[l] && t < tb[l + 1]);
    let weighted: f64 = (0..n - 1)
        .map(|t| p[t] * level_of(t).map_or(0.0, |l| phi[l]))
        .sum();
    let r = 1.0 / (p_last * (weighted + 1.0));
    let scale = p_last * r;

    let mut xi = vec![0.0; n];
    let mut beta = vec![vec![0.0; n]; k];
    for t in 0..n - 1 {
        let Some(l2) = level_of(t) else { continue };
        xi[t] = phi[l2] * scale;
        for l1 in 1..l2 {
            let s: f64 = (l1..l2).map(|w| delta[w][l2] * a[l2][w - l1][t]).sum();
            beta[l1 - 1][t] = scale * s;
        }
    }
    xi[n - 1] = r;
    for row in beta.iter_mut() {
        row[n - 1] = r;
    }

    Ok(DualCertificate {
        k,
        beta,
        xi,
        b,
        a,
        delta,
        phi,
        r,
        intervals: tb,
    })
}

/// Outcome of [`verify_certificate`].
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub theta_star: f64,
    pub primal_violation: f64,
    pub dual_violation: f64,
    pub normalization_error: f64,
    pub slackness_max: f64,
    pub dual_objective: f64,
    pub objective_gap: f64,
    pub primal_feasible: bool,
    pub dual_feasible: bool,
}

impl CertificateReport {
    pub fn passes(&self) -> bool {
        self.primal_feasible
            && self.dual_feasible
            && self.slackness_max <= CERT_TOL
            && self.objective_gap <= CERT_TOL
    }
}

/// Slacks of the candidate's constraints: `(row_a, row_bc)` with
/// `row_a[t] = sum_l x_{l,t} - theta p_t` and `row_bc[l][t]` the slack of
/// the capacity constraint paired with `beta_{l,t}`.
fn candidate_slacks(c: &CandidateSolution, p: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = p.len();
    let k = c.k;
    let mut row_a = vec![0.0; n];
    let mut row_bc = vec![vec![0.0; n]; k];
    let mut cum = vec![0.0; k];
    for t in 0..n {
        row_a[t] = (0..k).map(|l| c.x[l][t]).sum::<f64>() - c.theta * p[t];
        for l in 0..k {
            let occ = if l == 0 {
                1.0 - cum[0]
            } else {
                cum[l - 1] - cum[l]
            };
            row_bc[l][t] = p[t] * occ - c.x[l][t];
        }
        for l in 0..k {
            cum[l] += c.x[l][t];
        }
    }
    (row_a, row_bc)
}

/// Reduced costs of the dual rows, one per `x_{l,t}`.
fn dual_rows(d: &DualCertificate, p: &[f64]) -> Vec<Vec<f64>> {
    let n = p.len();
    let k = d.k;
    let mut rows = vec![vec![0.0; n]; k];
    for l in 0..k {
        // suffix[t] = sum_{tau > t} p_tau (beta_l - beta_{l+1})_tau
        let mut suffix = 0.0;
        for t in (0..n).rev() {
            rows[l][t] = d.beta[l][t] + suffix - d.xi[t];
            let next = if l + 1 < k { d.beta[l + 1][t] } else { 0.0 };
            suffix += p[t] * (d.beta[l][t] - next);
        }
    }
    rows
}

/// Checks candidate feasibility, certificate feasibility, complementary
/// slackness and the objective gap.
pub fn verify_certificate(
    c: &CandidateSolution,
    d: &DualCertificate,
    p: &[f64],
    k: usize,
) -> CertificateReport {
    let n = p.len();
    let (row_a, row_bc) = candidate_slacks(c, p);
    let mut primal_violation: f64 = 0.0;
    for t in 0..n {
        primal_violation = primal_violation.max(-row_a[t]);
        for l in 0..k {
            primal_violation = primal_violation.max(-row_bc[l][t]).max(-c.x[l][t]);
        }
    }
    if k >= 1 && !is_feasible(c) {
        primal_violation = primal_violation.max(c.feasibility_residual());
    }

    let rows = dual_rows(d, p);
    let mut dual_violation: f64 = 0.0;
    for t in 0..n {
        dual_violation = dual_violation.max(-d.xi[t]);
        for l in 0..k {
            dual_violation = dual_violation.max(-rows[l][t]).max(-d.beta[l][t]);
        }
    }
    let norm: f64 = (0..n).map(|t| p[t] * d.xi[t]).sum();
    let normalization_error = (norm - 1.0).abs();

    let mut slack: f64 = c.theta * normalization_error;
    for t in 0..n {
        slack = slack.max((d.xi[t] * row_a[t]).abs());
        for l in 0..k {
            slack = slack.max((d.beta[l][t] * row_bc[l][t]).abs());
            slack = slack.max((c.x[l][t] * rows[l][t]).abs());
        }
    }
    let dual_objective: f64 = (0..n).map(|t| p[t] * d.beta[0][t]).sum();
    CertificateReport {
        theta_star: c.theta,
        primal_violation,
        dual_violation,
        normalization_error,
        slackness_max: slack,
        dual_objective,
        objective_gap: (c.theta - dual_objective).abs(),
        primal_feasible: primal_violation <= CERT_TOL,
        dual_feasible: dual_violation <= CERT_TOL && normalization_error <= CERT_TOL,
    }
}

/// Splits query `q` (1-based) into two consecutive queries with
/// probabilities `sigma p_q` and `(1 - sigma) p_q`.
pub fn split_probability(p: &[f64], q: usize, sigma: f64) -> Result<Vec<f64>> {
    if q == 0 || q > p.len() {
        return domain(format!("split index {} outside 1..={}", q, p.len()));
    }
    if !(0.0..=1.0).contains(&sigma) {
        return domain(format!("split fraction {} outside [0, 1]", sigma));
    }
    let mut out = Vec::with_capacity(p.len() + 1);
    out.extend_from_slice(&p[..q - 1]);
    out.push(sigma * p[q - 1]);
    out.push((1.0 - sigma) * p[q - 1]);
    out.extend_from_slice(&p[q..]);
    Ok(out)
}

/// Conditional service probabilities `q[s][t]` given `s` units used.
#[derive(Debug, Clone, PartialEq)]
pub struct MagicianPolicy {
    pub k: usize,
    pub theta: f64,
    pub serve_prob: Vec<Vec<f64>>,
    /// Largest amount a raw ratio fell outside `[0, 1]` before clamping.
    pub max_clamp: f64,
}

const CLAMP_FAIL: f64 = 1e-8;

pub fn magician_policy(p: &[f64], k: usize, theta: f64) -> Result<MagicianPolicy> {
    let c = build_candidate(p, k, theta)?;
    if !is_feasible(&c) {
        return domain(format!(
            "theta {} is infeasible (residual {:e})",
            theta,
            c.feasibility_residual()
        ));
    }
    let n = p.len();
    let mut q = vec![vec![0.0; n]; k];
    let mut cum = vec![0.0; k];
    let mut max_clamp: f64 = 0.0;
    for t in 0..n {
        for s in 0..k {
            let w = if s == 0 {
                1.0 - cum[0]
            } else {
                cum[s - 1] - cum[s]
            };
            let num = c.x[s][t];
            let den = p[t] * w;
            let raw = if den > 1e-300 {
                num / den
            } else if num.abs() <= 1e-12 {
                0.0
            } else {
                f64::INFINITY
            };
            let clamped = raw.clamp(0.0, 1.0);
            let excess = if raw.is_finite() {
                (raw - clamped).abs()
            } else {
                num.abs()
            };
            if excess > 0.0 {
                log::debug!(
                    "clamped serve probability at s={} t={} by {:e}",
                    s,
                    t,
                    excess
                );
            }
            max_clamp = max_clamp.max(excess);
            q[s][t] = clamped;
        }
        for s in 0..k {
            cum[s] += c.x[s][t];
        }
    }
    if max_clamp > CLAMP_FAIL {
        return Err(Error::Numerical(format!(
            "serve probability outside [0, 1] by {:e}",
            max_clamp
        )));
    }
    Ok(MagicianPolicy {
        k,
        theta,
        serve_prob: q,
        max_clamp,
    })
}

impl MagicianPolicy {
    /// Ex-ante probability of serving each query, by forward propagation
    /// of the served-count distribution.
    pub fn ex_ante_service(&self, p: &[f64]) -> Vec<f64> {
        let mut occ = vec![0.0; self.k + 1];
        occ[0] = 1.0;
        let mut out = vec![0.0; p.len()];
        for (t, &pt) in p.iter().enumerate() {
            let mut moves = vec![0.0; self.k];
            for s in 0..self.k {
                moves[s] = occ[s] * pt * self.serve_prob[s][t];
            }
            for s in 0..self.k {
                occ[s] -= moves[s];
                occ[s + 1] += moves[s];
            }
            out[t] = moves.iter().sum();
        }
        out
    }

    /// Serve decision for an active query `t` when `used` units are taken.
    pub fn decide(&self, t: usize, used: usize, draw: f64) -> bool {
        used < self.k && draw < self.serve_prob[used][t]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn two_halves_candidate_by_hand() {
        let c = build_candidate(&[0.5, 0.5], 1, 2.0 / 3.0).unwrap();
        assert_abs_diff_eq!(c.x[0][0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.x[0][1], 0.5 * (1.0 - 1.0 / 3.0), epsilon = 1e-15);
        assert_eq!(c.breakpoints, vec![0, 2]);
        assert!(is_feasible(&c));
        assert_abs_diff_eq!(c.feasibility_residual(), 0.0, epsilon = 1e-15);
        let over = build_candidate(&[0.5, 0.5], 1, 0.9).unwrap();
        assert_abs_diff_eq!(over.x[0][0], 0.45, epsilon = 1e-15);
        assert!(!is_feasible(&over));
    }

    #[test]
    fn zero_theta_gives_zero_solution() {
        let c = build_candidate(&[0.3, 0.9, 0.4], 3, 0.0).unwrap();
        assert!(c.x.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(&c.breakpoints[1..], &[3, 3, 3]);
        assert!(is_feasible(&c));
    }

    #[test]
    fn stage_switch_at_first_budget_crossing() {
        // p uniform 2/8, k = 2, theta = 1: level 1 absorbs theta*p_t while
        // 1 - sum_{tau<t} theta p_tau >= theta, i.e. only for t = 1.
        let p = vec![0.25; 8];
        let c = build_candidate(&p, 2, 1.0).unwrap();
        assert_eq!(c.breakpoints[1], 1);
        assert_abs_diff_eq!(c.x[0][0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(c.x[0][1], 0.25 * 0.75, epsilon = 1e-15);
    }

    #[test]
    fn sum_above_k_is_rejected() {
        assert!(build_candidate(&[0.9, 0.9], 1, 0.5).is_err());
        assert!(solve_theta_star(&[0.9, 0.9], 1, 1e-9).is_err());
    }

    #[test]
    fn theta_star_examples() {
        assert_abs_diff_eq!(
            solve_theta_star(&[0.5, 0.5], 1, 1e-12).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-11
        );
        assert_eq!(solve_theta_star(&[1.0], 1, 1e-9).unwrap(), 1.0);
        // For k = 1 the guarantee is 1/(1 + sum_{t<T} p_t).
        let p = [0.3, 0.2, 0.1, 0.4];
        let expect = 1.0 / (1.0 + 0.3 + 0.2 + 0.1);
        assert_abs_diff_eq!(
            solve_theta_star(&p, 1, 1e-12).unwrap(),
            expect,
            epsilon = 1e-10
        );
    }

    #[test]
    fn uniform_k2_large_n_near_table_value() {
        let n = 2000;
        let p = vec![1.0 / n as f64; 2 * n];
        let th = solve_theta_star(&p, 2, 1e-9).unwrap();
        assert!((th - 0.6148).abs() < 2e-3, "{}", th);
    }

    #[test]
    fn k1_certificate_specializes() {
        let p = [0.5, 0.4];
        let th = solve_theta_star(&p, 1, 1e-13).unwrap();
        let c = build_candidate(&p, 1, th).unwrap();
        let d = build_dual_certificate(&p, 1, th).unwrap();
        let r = 1.0 / (0.4 * (1.0 + 0.5));
        assert_abs_diff_eq!(d.r, r, epsilon = 1e-12);
        assert_eq!(d.beta[0][0], 0.0);
        assert_abs_diff_eq!(d.beta[0][1], r, epsilon = 1e-12);
        assert_abs_diff_eq!(d.xi[0], 0.4 * r, epsilon = 1e-12);
        let rep = verify_certificate(&c, &d, &p, 1);
        assert!(rep.passes(), "{:?}", rep);
        assert_abs_diff_eq!(rep.dual_objective, th, epsilon = 1e-8);
    }

    #[test]
    fn two_halves_pipeline_passes() {
        let p = [0.5, 0.5];
        let th = solve_theta_star(&p, 1, 1e-12).unwrap();
        let c = build_candidate(&p, 1, th).unwrap();
        let d = build_dual_certificate(&p, 1, th).unwrap();
        assert!(verify_certificate(&c, &d, &p, 1).passes());
    }

    #[test]
    fn perturbations_are_caught() {
        let p = [0.3, 0.5, 0.2, 0.6, 0.4];
        let k = 2;
        let th = solve_theta_star(&p, k, 1e-12).unwrap();
        let d = build_dual_certificate(&p, k, th).unwrap();
        let c_bad = build_candidate(&p, k, (th + 0.05).min(1.0)).unwrap();
        let rep = verify_certificate(&c_bad, &d, &p, k);
        assert!(!rep.primal_feasible);
        let c = build_candidate(&p, k, th).unwrap();
        let mut d2 = d.clone();
        d2.xi.iter_mut().for_each(|v| *v *= 2.0);
        d2.beta.iter_mut().flatten().for_each(|v| *v *= 2.0);
        let rep2 = verify_certificate(&c, &d2, &p, k);
        assert!(!rep2.dual_feasible);
        assert!(rep2.normalization_error > 0.5);
    }

    #[test]
    fn certificate_rejects_deterministic_queries() {
        assert!(matches!(
            build_dual_certificate(&[1.0, 0.5], 2, 0.8),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            build_dual_certificate(&[0.5, 0.0], 1, 1.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn near_deterministic_guarantee_certificate() {
        // Tiny total probability: theta* = 1, xi is constant up to the last
        // period (phi_1 = 1 when k = 1) and beta lives on period T.
        let p = [1e-4, 1e-4, 1e-4];
        let th = solve_theta_star(&p, 1, 1e-12).unwrap();
        assert!(th > 0.9997);
        let d = build_dual_certificate(&p, 1, th).unwrap();
        assert_abs_diff_eq!(d.xi[0], d.xi[1], epsilon = 1e-12);
        assert_eq!(d.beta[0][0], 0.0);
        assert_eq!(d.beta[0][1], 0.0);
        assert!(d.beta[0][2] > 0.0);
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_probability(&[0.6], 1, 0.5).unwrap(), vec![0.3, 0.3]);
        assert_eq!(
            split_probability(&[0.2, 0.6], 2, 1.0).unwrap(),
            vec![0.2, 0.6, 0.0]
        );
        assert!(split_probability(&[0.2], 2, 0.5).is_err());
    }

    #[test]
    fn magician_two_halves_probabilities() {
        let m = magician_policy(&[0.5, 0.5], 1, 2.0 / 3.0).unwrap();
        assert_abs_diff_eq!(m.serve_prob[0][0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.serve_prob[0][1], 1.0, epsilon = 1e-12);
        let z = magician_policy(&[0.5, 0.5], 1, 0.0).unwrap();
        assert!(z.serve_prob.iter().flatten().all(|&q| q == 0.0));
        assert!(magician_policy(&[0.5, 0.5], 1, 0.9).is_err());
    }

    fn probs(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..0.9, 1..max_len)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn candidate_is_nonnegative_and_below_theta_p(p in probs(14), k in 1usize..5, theta in 0.0f64..1.0) {
            prop_assume!(p.iter().sum::<f64>() <= k as f64);
            let c = build_candidate(&p, k, theta).unwrap();
            for t in 0..p.len() {
                let s: f64 = (0..k).map(|l| c.x[l][t]).sum();
                prop_assert!(s <= theta * p[t] + 1e-10);
                for l in 0..k {
                    prop_assert!(c.x[l][t] >= -1e-12, "x[{}][{}] = {}", l, t, c.x[l][t]);
                }
            }
            prop_assert!(c.breakpoints.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn cumulative_monotone_in_theta(p in probs(14), k in 1usize..5, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            prop_assume!(p.iter().sum::<f64>() <= k as f64);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let c1 = build_candidate(&p, k, lo).unwrap();
            let c2 = build_candidate(&p, k, hi).unwrap();
            for l in 0..k {
                let (mut s1, mut s2) = (0.0, 0.0);
                for t in 0..p.len() {
                    s1 += c1.x[l][t];
                    s2 += c2.x[l][t];
                    prop_assert!(s2 >= s1 - 1e-12);
                }
            }
        }

        #[test]
        fn splitting_never_helps(p in probs(10), k in 1usize..4, q in 0usize..10, sigma in 0.0f64..1.0) {
            prop_assume!(p.iter().sum::<f64>() <= k as f64);
            let q = q % p.len() + 1;
            let split = split_probability(&p, q, sigma).unwrap();
            let a = solve_theta_star(&p, k, 1e-11).unwrap();
            let b = solve_theta_star(&split, k, 1e-11).unwrap();
            prop_assert!(b <= a + 1e-9, "{} > {}", b, a);
        }

        #[test]
        fn magician_reproduces_ex_ante_service(p in probs(14), k in 1usize..5) {
            prop_assume!(p.iter().sum::<f64>() <= k as f64);
            let th = solve_theta_star(&p, k, 1e-12).unwrap();
            let m = magician_policy(&p, k, th).unwrap();
            let served = m.ex_ante_service(&p);
            for t in 0..p.len() {
                prop_assert!((served[t] - th * p[t]).abs() <= 1e-9, "t={} {} vs {}", t, served[t], th * p[t]);
            }
        }

        #[test]
        fn certificates_verify(p in prop::collection::vec(0.01f64..0.9, 2..12), k in 1usize..5) {
            prop_assume!(p.iter().sum::<f64>() <= k as f64);
            let th = solve_theta_star(&p, k, 1e-13).unwrap();
            let c = build_candidate(&p, k, th).unwrap();
            let d = build_dual_certificate(&p, k, th).unwrap();
            let rep = verify_certificate(&c, &d, &p, k);
            prop_assert!(rep.passes(), "{:?}", rep);
        }
    }
}
