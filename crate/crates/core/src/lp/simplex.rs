//! Two-phase dense tableau simplex. Dantzig pricing, switching to Bland's
//! rule after `2 * (rows + cols)` pivots so that cycling cannot persist.

use super::{Direction, LinearProgram, LpStatus, Sense, SimplexResult};

/// Reduced-cost tolerance used when callers have no preference.
pub const DEFAULT_LP_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;

struct Tableau {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    a: Vec<Vec<f64>>,
    /// Reduced costs, last entry holds minus the objective.
    obj: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, e: usize) {
        let width = self.cols + 1;
        let p = self.a[r][e];
        {
            let row = &mut self.a[r];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[e] = 1.0;
        }
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[e];
            if f != 0.0 {
                for j in 0..width {
                    row[j] -= f * pivot_row[j];
                }
                row[e] = 0.0;
            }
        }
        let f = self.obj[e];
        if f != 0.0 {
            for j in 0..width {
                self.obj[j] -= f * pivot_row[j];
            }
            self.obj[e] = 0.0;
        }
        self.basis[r] = e;
    }

    /// Loads `cost` (maximized) and prices out the basis.
    fn set_objective(&mut self, cost: &[f64]) {
        let width = self.cols + 1;
        self.obj = vec![0.0; width];
        self.obj[..cost.len()].copy_from_slice(cost);
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = self.obj[b];
            if cb != 0.0 {
                for j in 0..width {
                    self.obj[j] -= cb * self.a[i][j];
                }
                self.obj[b] = 0.0;
            }
        }
    }

    fn value(&self) -> f64 {
        -self.obj[self.cols]
    }
}

enum Outcome {
    Optimal,
    Unbounded,
    Limit,
}

fn run(
    tab: &mut Tableau,
    allowed: &[bool],
    tol: f64,
    iters: &mut usize,
    bland_after: usize,
    max_iter: usize,
) -> Outcome {
    loop {
        if *iters >= max_iter {
            return Outcome::Limit;
        }
        let bland = *iters >= bland_after;
        let mut enter = None;
        let mut best = tol;
        for j in 0..tab.cols {
            if !allowed[j] || tab.obj[j] <= tol {
                continue;
            }
            if bland {
                enter = Some(j);
                break;
            }
            if tab.obj[j] > best {
                best = tab.obj[j];
                enter = Some(j);
            }
        }
        let Some(e) = enter else {
            return Outcome::Optimal;
        };
        let rhs = tab.cols;
        let mut leave: Option<usize> = None;
        let mut ratio = f64::INFINITY;
        for (i, row) in tab.a.iter().enumerate() {
            let aie = row[e];
            if aie <= PIVOT_TOL {
                continue;
            }
            let q = row[rhs].max(0.0) / aie;
            let better = match leave {
                None => true,
                Some(l) => {
                    let tie = (q - ratio).abs() <= 1e-12 * ratio.abs().max(1.0);
                    if tie {
                        tab.basis[i] < tab.basis[l]
                    } else {
                        q < ratio
                    }
                }
            };
            if better {
                leave = Some(i);
                ratio = q;
            }
        }
        let Some(r) = leave else {
            return Outcome::Unbounded;
        };
        tab.pivot(r, e);
        *iters += 1;
    }
}

/// Solves `lp` with reduced-cost tolerance `tol`.
pub fn simplex_solve(lp: &LinearProgram, tol: f64) -> SimplexResult {
    let n = lp.num_vars();
    // Rows in the form a.x (sense) b with b >= 0, upper bounds appended.
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::with_capacity(lp.num_rows());
    for i in 0..lp.num_rows() {
        let r = &lp.rows()[i];
        rows.push((lp.dense_row(i), r.sense, r.rhs));
    }
    for (j, u) in lp.upper_bounds().iter().enumerate() {
        if let Some(u) = *u {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            rows.push((a, Sense::Le, u));
        }
    }
    for (a, sense, b) in rows.iter_mut() {
        if *b < 0.0 {
            a.iter_mut().for_each(|v| *v = -*v);
            *b = -*b;
            *sense = match *sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let cols = n + n_slack + n_art;
    let mut a = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    let mut is_art = vec![false; cols];
    let (mut s_next, mut a_next) = (n, n + n_slack);
    let mut max_rhs: f64 = 1.0;
    for (i, (coeffs, sense, b)) in rows.iter().enumerate() {
        a[i][..n].copy_from_slice(coeffs);
        a[i][cols] = *b;
        max_rhs = max_rhs.max(*b);
        match sense {
            Sense::Le => {
                a[i][s_next] = 1.0;
                basis[i] = s_next;
                s_next += 1;
            }
            Sense::Ge => {
                a[i][s_next] = -1.0;
                s_next += 1;
                a[i][a_next] = 1.0;
                is_art[a_next] = true;
                basis[i] = a_next;
                a_next += 1;
            }
            Sense::Eq => {
                a[i][a_next] = 1.0;
                is_art[a_next] = true;
                basis[i] = a_next;
                a_next += 1;
            }
        }
    }
    let mut tab = Tableau {
        a,
        obj: Vec::new(),
        basis,
        cols,
    };
    let bland_after = 2 * (m + cols);
    let max_iter = 50 * (m + cols) + 10_000;
    let mut iters = 0usize;

    let finish = |status: LpStatus, x: Vec<f64>, iters: usize| {
        let objective = if status == LpStatus::Optimal {
            lp.objective_value(&x)
        } else {
            f64::NAN
        };
        let residual = lp.residual(&x);
        SimplexResult {
            status,
            objective,
            x,
            iterations: iters,
            residual,
        }
    };

    if n_art > 0 {
        let cost: Vec<f64> = is_art
            .iter()
            .map(|&art| if art { -1.0 } else { 0.0 })
            .collect();
        tab.set_objective(&cost);
        let all = vec![true; cols];
        match run(&mut tab, &all, tol, &mut iters, bland_after, max_iter) {
            Outcome::Limit => return finish(LpStatus::IterationLimit, extract(&tab, n), iters),
            // Phase one is bounded above by zero.
            Outcome::Unbounded | Outcome::Optimal => {}
        }
        if tab.value() < -1e-9 * max_rhs {
            return finish(LpStatus::Infeasible, extract(&tab, n), iters);
        }
        // Pivot zero-level artificials out where possible; the rest are
        // redundant rows and stay basic at zero.
        for r in 0..m {
            if !is_art[tab.basis[r]] {
                continue;
            }
            if let Some(e) = (0..cols).find(|&j| !is_art[j] && tab.a[r][j].abs() > 1e-9) {
                tab.pivot(r, e);
            }
        }
    }

    let sign = if lp.direction() == Direction::Max {
        1.0
    } else {
        -1.0
    };
    let cost: Vec<f64> = lp.objective().iter().map(|c| sign * c).collect();
    tab.set_objective(&cost);
    let allowed: Vec<bool> = is_art.iter().map(|&art| !art).collect();
    let status = match run(&mut tab, &allowed, tol, &mut iters, bland_after, max_iter) {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::Unbounded => LpStatus::Unbounded,
        Outcome::Limit => LpStatus::IterationLimit,
    };
    finish(status, extract(&tab, n), iters)
}

fn extract(tab: &Tableau, n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.a[i][tab.cols].max(0.0);
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{Direction, LinearProgram, Sense};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn max_x_below_one() {
        let mut lp = LinearProgram::new(Direction::Max);
        let x = lp.add_var("x", 1.0).unwrap();
        lp.add_row(vec![(x, 1.0)], Sense::Le, 1.0).unwrap();
        let r = simplex_solve(&lp, DEFAULT_LP_TOL);
        assert_eq!(r.status, LpStatus::Optimal);
        assert_abs_diff_eq!(r.objective, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn contradictory_bounds_infeasible() {
        let mut lp = LinearProgram::new(Direction::Max);
        let x = lp.add_var("x", 0.0).unwrap();
        lp.add_row(vec![(x, 1.0)], Sense::Ge, 2.0).unwrap();
        lp.add_row(vec![(x, 1.0)], Sense::Le, 1.0).unwrap();
        assert_eq!(
            simplex_solve(&lp, DEFAULT_LP_TOL).status,
            LpStatus::Infeasible
        );
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LinearProgram::new(Direction::Max);
        let x = lp.add_var("x", 1.0).unwrap();
        let y = lp.add_var("y", 0.0).unwrap();
        lp.add_row(vec![(x, 1.0), (y, -1.0)], Sense::Le, 1.0)
            .unwrap();
        assert_eq!(
            simplex_solve(&lp, DEFAULT_LP_TOL).status,
            LpStatus::Unbounded
        );
    }

    #[test]
    fn minimization_with_equalities() {
        // min x + 2y s.t. x + y = 3, x <= 2 -> x = 2, y = 1.
        let mut lp = LinearProgram::new(Direction::Min);
        let x = lp.add_var("x", 1.0).unwrap();
        let y = lp.add_var("y", 2.0).unwrap();
        lp.add_row(vec![(x, 1.0), (y, 1.0)], Sense::Eq, 3.0)
            .unwrap();
        lp.set_upper(x, 2.0);
        let r = simplex_solve(&lp, DEFAULT_LP_TOL);
        assert_abs_diff_eq!(r.objective, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.x[y], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(Direction::Max);
        let x = lp.add_var("x", 1.0).unwrap();
        let y = lp.add_var("y", 1.0).unwrap();
        lp.add_row(vec![(x, 1.0), (y, 1.0)], Sense::Eq, 1.0)
            .unwrap();
        lp.add_row(vec![(x, 2.0), (y, 2.0)], Sense::Eq, 2.0)
            .unwrap();
        let r = simplex_solve(&lp, DEFAULT_LP_TOL);
        assert_eq!(r.status, LpStatus::Optimal);
        assert_abs_diff_eq!(r.objective, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn negative_rhs_is_normalized() {
        // max -x s.t. -x <= -2 -> x = 2.
        let mut lp = LinearProgram::new(Direction::Max);
        let x = lp.add_var("x", -1.0).unwrap();
        lp.add_row(vec![(x, -1.0)], Sense::Le, -2.0).unwrap();
        let r = simplex_solve(&lp, DEFAULT_LP_TOL);
        assert_abs_diff_eq!(r.objective, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under textbook Dantzig pricing.
        let mut lp = LinearProgram::new(Direction::Max);
        let x: Vec<usize> = (0..4)
            .map(|i| {
                lp.add_var(format!("x{}", i), [0.75, -20.0, 0.5, -6.0][i])
                    .unwrap()
            })
            .collect();
        lp.add_row(
            vec![(x[0], 0.25), (x[1], -8.0), (x[2], -1.0), (x[3], 9.0)],
            Sense::Le,
            0.0,
        )
        .unwrap();
        lp.add_row(
            vec![(x[0], 0.5), (x[1], -12.0), (x[2], -0.5), (x[3], 3.0)],
            Sense::Le,
            0.0,
        )
        .unwrap();
        lp.add_row(vec![(x[2], 1.0)], Sense::Le, 1.0).unwrap();
        let r = simplex_solve(&lp, DEFAULT_LP_TOL);
        assert_eq!(r.status, LpStatus::Optimal);
        assert_abs_diff_eq!(r.objective, 1.25, epsilon = 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        // Weak duality on random packing LPs: max c.x, Ax <= b against
        // min b.y, A^T y >= c agree at the optimum.
        #[test]
        fn packing_duality(
            a in prop::collection::vec(0.0f64..1.0, 12),
            b in prop::collection::vec(0.5f64..2.0, 3),
            c in prop::collection::vec(0.1f64..1.0, 4),
        ) {
            let mut p = LinearProgram::new(Direction::Max);
            let xs: Vec<usize> = (0..4).map(|j| p.add_var(format!("x{}", j), c[j]).unwrap()).collect();
            for i in 0..3 {
                p.add_row((0..4).map(|j| (xs[j], a[i * 4 + j] + 0.05)).collect(), Sense::Le, b[i]).unwrap();
            }
            let mut d = LinearProgram::new(Direction::Min);
            let ys: Vec<usize> = (0..3).map(|i| d.add_var(format!("y{}", i), b[i]).unwrap()).collect();
            for j in 0..4 {
                d.add_row((0..3).map(|i| (ys[i], a[i * 4 + j] + 0.05)).collect(), Sense::Ge, c[j]).unwrap();
            }
            let rp = simplex_solve(&p, DEFAULT_LP_TOL);
            let rd = simplex_solve(&d, DEFAULT_LP_TOL);
            prop_assert!(rp.is_optimal() && rd.is_optimal());
            prop_assert!((rp.objective - rd.objective).abs() <= 1e-8 * rp.objective.abs().max(1.0));
            prop_assert!(rp.residual <= 1e-8 && rd.residual <= 1e-8);
        }
    }
}
