//! Poisson-limit worst case for k units: the piecewise analytic solution
//! of the served-count ODE, the tight ratio `gamma*_k`, and the
//! discretized cross-check through `theta*` of the uniform instance.
//!
//! Level `l` is zero up to `t_l`, then follows
//! `zeta_l + theta t + sum_q zeta_{l,q} t^q e^{-t}` until it reaches
//! `1 - theta` at `t_{l+1}`, and `1 + sum_q psi_{l,q} t^q e^{-t}` after.

use crate::error::{domain, Error, Result};
use crate::kunit;
use crate::numeric::{bisect, horner};

const BREAK_TOL: f64 = 1e-12;
const MONOTONE_SAMPLES: usize = 64;
/// Largest `k` handled without a conditioning warning.
pub const K_WARN: usize = 16;

/// Piecewise coefficients of all levels at a fixed `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdePieces {
    pub k: usize,
    pub theta: f64,
    /// `t_1 = 0, ..., t_{k+1}` (entry `l - 1` is `t_l`), all in `[0, k]`.
    pub breakpoints: Vec<f64>,
    /// `zeta_l` per level.
    pub zeta: Vec<f64>,
    /// `zeta_{l,q}` for `q = 0..l` (the top entry is zero).
    pub zeta_poly: Vec<Vec<f64>>,
    /// `psi_{l,q}` for `q = 0..l`, present when level `l` crosses
    /// `1 - theta` before `k`.
    pub psi: Vec<Option<Vec<f64>>>,
    /// Level is identically zero on `[0, k]`.
    pub dead: Vec<bool>,
}

fn pre_value(zeta: f64, theta: f64, poly: &[f64], t: f64) -> f64 {
    zeta + theta * t + horner(poly, t) * (-t).exp()
}

fn post_value(psi: &[f64], t: f64) -> f64 {
    1.0 + horner(psi, t) * (-t).exp()
}

/// Solves all levels for `theta` in `(0, 1)`.
pub fn solve_pieces(k: usize, theta: f64) -> Result<OdePieces> {
    if k == 0 {
        return domain("k must be at least 1");
    }
    if !(theta > 0.0 && theta < 1.0) {
        return domain(format!("theta {} outside (0, 1)", theta));
    }
    if k > K_WARN {
        log::warn!(
            "k = {} exceeds {}; coefficients may be poorly conditioned",
            k,
            K_WARN
        );
    }
    let kf = k as f64;
    let target = 1.0 - theta;
    let mut breakpoints = vec![kf; k + 1];
    breakpoints[0] = 0.0;
    let mut zeta = vec![0.0; k];
    let mut zeta_poly: Vec<Vec<f64>> = (0..k).map(|l| vec![0.0; l + 1]).collect();
    let mut psi: Vec<Option<Vec<f64>>> = vec![None; k];
    let mut dead = vec![false; k];
    // Post-breakpoint coefficients of the level below; level 0 is y = 1.
    let mut below: Option<Vec<f64>> = Some(Vec::new());

    for l in 0..k {
        let Some(prev) = below.take() else {
            dead[l] = true;
            continue;
        };
        let t_l = breakpoints[l];
        // zeta_{l,q} = (q+1) zeta_{l,q+1} - psi_{l-1,q}, downward from q = l.
        let poly = &mut zeta_poly[l];
        for q in (0..l).rev() {
            poly[q] = (q as f64 + 1.0) * poly[q + 1] - prev.get(q).copied().unwrap_or(0.0);
        }
        zeta[l] = -theta * t_l - horner(poly, t_l) * (-t_l).exp();
        let pre = |t: f64| pre_value(zeta[l], theta, &zeta_poly[l], t);

        if l + 1 == k {
            check_monotone(&pre, t_l, kf, l)?;
            break;
        }
        if pre(kf) < target {
            check_monotone(&pre, t_l, kf, l)?;
            continue;
        }
        let (_, hi) = bisect(|t| pre(t) - target, t_l, kf, BREAK_TOL, 200);
        let t_next = hi;
        check_monotone(&pre, t_l, t_next, l)?;
        breakpoints[l + 1] = t_next;

        // psi_{l,q} = psi_{l-1,q-1} / q; psi_{l,0} from continuity.
        let mut coeffs = vec![0.0; l + 1];
        for q in 1..=l {
            coeffs[q] = prev[q - 1] / q as f64;
        }
        let higher: f64 = (1..=l).map(|q| coeffs[q] * t_next.powi(q as i32)).sum();
        coeffs[0] = -theta * t_next.exp() - higher;
        psi[l] = Some(coeffs.clone());
        below = Some(coeffs);
    }
    Ok(OdePieces {
        k,
        theta,
        breakpoints,
        zeta,
        zeta_poly,
        psi,
        dead,
    })
}

fn check_monotone<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, l: usize) -> Result<()> {
    if b <= a {
        return Ok(());
    }
    let mut prev = f(a);
    for i in 1..=MONOTONE_SAMPLES {
        let v = f(a + (b - a) * i as f64 / MONOTONE_SAMPLES as f64);
        if v < prev - 1e-10 * prev.abs().max(1.0) {
            return Err(Error::Numerical(format!(
                "level {} pre-breakpoint form decreases on [{}, {}]",
                l + 1,
                a,
                b
            )));
        }
        prev = v;
    }
    Ok(())
}

impl OdePieces {
    /// `y_l(t)` for `l` in `1..=k`, `t` in `[0, k]`.
    pub fn value(&self, l: usize, t: f64) -> Result<f64> {
        if l == 0 || l > self.k {
            return domain(format!("level {} outside 1..={}", l, self.k));
        }
        let kf = self.k as f64;
        if !(t >= -1e-12 && t <= kf + 1e-12) {
            return domain(format!("time {} outside [0, {}]", t, kf));
        }
        let i = l - 1;
        if self.dead[i] || t <= self.breakpoints[i] {
            return Ok(0.0);
        }
        match &self.psi[i] {
            Some(psi) if t > self.breakpoints[i + 1] => Ok(post_value(psi, t)),
            _ => Ok(pre_value(self.zeta[i], self.theta, &self.zeta_poly[i], t)),
        }
    }

    /// Right-hand side of the ODE for level `l` at `t`.
    pub fn derivative(&self, l: usize, t: f64) -> Result<f64> {
        let below = if l == 1 { 1.0 } else { self.value(l - 1, t)? };
        let i = l - 1;
        if self.dead[i] || t < self.breakpoints[i] {
            return Ok(0.0);
        }
        if self.psi[i].is_some() && t > self.breakpoints[i + 1] {
            Ok(below - self.value(l, t)?)
        } else {
            Ok(self.theta - 1.0 + below)
        }
    }

    /// `y_k(k) - (1 - theta)`, nondecreasing in theta.
    pub fn terminal_residual(&self) -> f64 {
        self.value(self.k, self.k as f64).expect("k is in range") - (1.0 - self.theta)
    }
}

/// Convenience wrapper around [`OdePieces::value`].
pub fn y_value(pieces: &OdePieces, l: usize, t: f64) -> Result<f64> {
    pieces.value(l, t)
}

/// Tight ratio `gamma*_k`: the `theta` where `y_k(k) = 1 - theta`.
pub fn gamma_star(k: usize, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return domain("tolerance must be positive");
    }
    let mut err = None;
    let (lo, hi) = bisect(
        |theta| match solve_pieces(k, theta) {
            Ok(p) => p.terminal_residual(),
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        1e-6,
        1.0 - 1e-6,
        tol,
        200,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(0.5 * (lo + hi)),
    }
}

/// `theta*` of `N k` queries each arriving with probability `1/N`.
pub fn euler_gamma(k: usize, n: usize) -> Result<f64> {
    if n == 0 {
        return domain("N must be positive");
    }
    let p = vec![1.0 / n as f64; n * k];
    kunit::solve_theta_star(&p, k, 1e-12)
}

/// Classical guarantee `1 - 1/sqrt(k + 3)`.
pub fn alaei_bound(k: usize) -> f64 {
    1.0 - 1.0 / ((k as f64) + 3.0).sqrt()
}
