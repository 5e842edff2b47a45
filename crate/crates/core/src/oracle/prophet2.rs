//! Two-unit upper bound against the prophet. Two sure queries of reward 1,
//! then a Poisson(`lambda`) stream of reward `r1`, then a rare query worth
//! `r2 / eps`. Any online policy earns at most `max(V1, V2, 2)` while the
//! prophet earns `V_hat`, in the `eps -> 0` limit.

use serde::Serialize;

/// `g(r1, r2, lambda) = max(V1, V2, 2) / V_hat` given the probabilities of
/// zero and exactly one stream arrival.
fn g_from(r1: f64, r2: f64, p0: f64, p1: f64) -> f64 {
    let rest = 1.0 - p0 - p1;
    let mx = r1.max(r2);
    let v_hat = r2 + 2.0 * p0 + (r1 + 1.0) * p1 + 2.0 * r1 * rest;
    let v1 = 1.0 + p0 * r2 + (1.0 - p0) * mx;
    let v2 = p0 * r2 + p1 * (r1 + r2) + rest * (r1 + mx);
    v1.max(v2).max(2.0) / v_hat
}

/// Closed form with Poisson arrivals.
pub fn prophet2_g(r1: f64, r2: f64, lambda: f64) -> f64 {
    let e = (-lambda).exp();
    g_from(r1, r2, e, lambda * e)
}

/// Same bound with the stream replaced by `n` Bernoulli(`lambda / n`) queries.
pub fn prophet2_g_bernoulli(r1: f64, r2: f64, lambda: f64, n: usize) -> f64 {
    let q = lambda / n as f64;
    let p0 = (1.0 - q).powi(n as i32);
    let p1 = lambda * (1.0 - q).powi(n as i32 - 1);
    g_from(r1, r2, p0, p1)
}

/// Search box and steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prophet2Grid {
    pub r_min: f64,
    pub r_max: f64,
    pub r_step: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_step: f64,
}

impl Default for Prophet2Grid {
    fn default() -> Self {
        Self {
            r_min: 1.0,
            r_max: 2.5,
            r_step: 0.01,
            lambda_min: 0.01,
            lambda_max: 4.0,
            lambda_step: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prophet2Result {
    pub r1: f64,
    pub r2: f64,
    pub lambda: f64,
    pub value: f64,
    /// Best value on the grid before local refinement.
    pub grid_value: f64,
    /// Largest value on the grid.
    pub grid_max: f64,
}

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Best `(min, argmin, max)` over the `r2 x lambda` plane for fixed `r1`.
fn scan_plane(r1: f64, rs: &[f64], ls: &[f64]) -> (f64, (f64, f64, f64), f64) {
    let mut best = (f64::INFINITY, (r1, 0.0, 0.0), f64::NEG_INFINITY);
    for &r2 in rs {
        for &l in ls {
            let v = prophet2_g(r1, r2, l);
            if v < best.0 {
                best.0 = v;
                best.1 = (r1, r2, l);
            }
            best.2 = best.2.max(v);
        }
    }
    best
}

/// Grid minimization followed by local zooming grids.
pub fn prophet2_bound(grid: &Prophet2Grid) -> Prophet2Result {
    let rs = axis(grid.r_min, grid.r_max, grid.r_step);
    let ls = axis(grid.lambda_min, grid.lambda_max, grid.lambda_step);
    #[cfg(feature = "parallel")]
    let planes: Vec<_> = {
        use rayon::prelude::*;
        rs.par_iter().map(|&r1| scan_plane(r1, &rs, &ls)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let planes: Vec<_> = rs.iter().map(|&r1| scan_plane(r1, &rs, &ls)).collect();
    let mut grid_value = f64::INFINITY;
    let mut at = (1.0, 1.0, 1.0);
    let mut grid_max = f64::NEG_INFINITY;
    for (v, arg, mx) in planes {
        if v < grid_value {
            grid_value = v;
            at = arg;
        }
        grid_max = grid_max.max(mx);
    }
    // Zooming grids: the minimum sits on the ridge V1 = V2, where a compass
    // search stalls, so each level scans a box around the previous argmin.
    let (mut r1, mut r2, mut l) = at;
    let mut value = grid_value;
    let mut step = grid.r_step.max(grid.lambda_step);
    while step > 1e-7 {
        let prev = step;
        step /= 10.0;
        let n = (3.0 * prev / step).round() as i32;
        let (c1, c2, cl) = (r1, r2, l);
        for i in -n..=n {
            let a = c1 + i as f64 * step;
            if a < grid.r_min || a > grid.r_max {
                continue;
            }
            for j in -n..=n {
                let b = c2 + j as f64 * step;
                if b < grid.r_min || b > grid.r_max {
                    continue;
                }
                for k in -n..=n {
                    let c = cl + k as f64 * step;
                    if c <= 0.0 || c > grid.lambda_max {
                        continue;
                    }
                    let v = prophet2_g(a, b, c);
                    if v < value {
                        value = v;
                        (r1, r2, l) = (a, b, c);
                    }
                }
            }
        }
    }
    Prophet2Result {
        r1,
        r2,
        lambda: l,
        value,
        grid_value,
        grid_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reported_point() {
        assert!((prophet2_g(1.4119, 1.4119, 1.2319) - 0.6269).abs() < 1e-3);
    }

    #[test]
    fn bernoulli_limit_agrees() {
        let a = prophet2_g(1.4119, 1.4119, 1.2319);
        let b = prophet2_g_bernoulli(1.4119, 1.4119, 1.2319, 2000);
        assert!((a - b).abs() < 2e-3);
    }

    #[test]
    fn small_lambda_bounded_by_two_over_v_hat() {
        let (r1, r2) = (1.3, 1.5);
        let l: f64 = 1e-6;
        let e = (-l).exp();
        let v_hat = r2 + 2.0 * e + (r1 + 1.0) * l * e + 2.0 * r1 * (1.0 - (l + 1.0) * e);
        assert!(prophet2_g(r1, r2, l) >= 2.0 / v_hat - 1e-12);
    }

    #[test]
    fn coarse_search() {
        let g = Prophet2Grid {
            r_step: 0.05,
            lambda_step: 0.05,
            ..Default::default()
        };
        let res = prophet2_bound(&g);
        assert!((res.value - 0.6269).abs() < 1e-3, "{:?}", res);
        assert!(res.value <= res.grid_value);
    }
}
