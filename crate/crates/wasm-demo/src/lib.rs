//! Browser bindings. Every export returns a JSON string; failures come back
//! as `{"error": "..."}` so the functions are callable (and testable) on
//! the host as well.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use ocrs::generate::{generate, GenParams};
use ocrs::io::{instance_from_json, instance_to_json};
use ocrs::knapsack::{self, default_gamma};
use ocrs::ode::{gamma_star, solve_pieces};
use ocrs::unitdensity;

fn finish(r: Result<Value, String>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Levels `y_1..y_k` of the worst-case ODE sampled on `[0, k]`. A
/// non-positive `theta` means `gamma*_k`.
#[wasm_bindgen]
pub fn ode_levels(k: u32, theta: f64, samples: u32) -> String {
    finish((|| {
        let k = k as usize;
        if k == 0 || k > 16 {
            return Err("k must be in 1..=16".to_string());
        }
        let g = gamma_star(k, 1e-10).map_err(err)?;
        let theta = if theta > 0.0 { theta } else { g };
        let pieces = solve_pieces(k, theta).map_err(err)?;
        let n = samples.clamp(2, 2000) as usize;
        let ts: Vec<f64> = (0..n)
            .map(|i| k as f64 * i as f64 / (n - 1) as f64)
            .collect();
        let levels = (1..=k)
            .map(|l| {
                ts.iter()
                    .map(|&t| pieces.value(l, t))
                    .collect::<ocrs::Result<Vec<f64>>>()
            })
            .collect::<ocrs::Result<Vec<_>>>()
            .map_err(err)?;
        Ok(json!({
            "k": k,
            "theta": theta,
            "gamma_star": g,
            "breakpoints": pieces.breakpoints,
            "terminal_residual": pieces.terminal_residual(),
            "t": ts,
            "levels": levels,
        }))
    })())
}

/// Unit-density rate profile, thinned to at most `max_points` points. A
/// non-positive `gamma0` means the optimized start.
#[wasm_bindgen]
pub fn h_profile(gamma0: f64, delta: f64, max_points: u32) -> String {
    finish((|| {
        let g0 = if gamma0 > 0.0 {
            gamma0
        } else {
            unitdensity::optimize_gamma0(1e-4, 1e-6).map_err(err)?.0
        };
        let prof = unitdensity::h_profile(g0, delta).map_err(err)?;
        let stride = (prof.len() / max_points.max(2) as usize).max(1);
        let idx: Vec<usize> = (0..prof.len())
            .step_by(stride)
            .chain(std::iter::once(prof.len() - 1))
            .collect();
        Ok(json!({
            "gamma0": g0,
            "step": prof.step,
            "total": prof.total(),
            "max_clause_violation": prof.max_clause_violation(),
            "t": idx.iter().map(|&i| i as f64 * prof.step).collect::<Vec<_>>(),
            "h": idx.iter().map(|&i| prof.values[i]).collect::<Vec<_>>(),
            "integral": idx.iter().map(|&i| prof.integral[i]).collect::<Vec<_>>(),
        }))
    })())
}

/// Instance JSON from a named generator with the demo's two knobs.
#[wasm_bindgen]
pub fn preset_instance(name: &str, t: u32, eps: f64, seed: u64) -> String {
    let p = GenParams {
        t,
        eps,
        seed,
        n: 20,
        k: 2,
        ..GenParams::default()
    };
    match generate(name, &p) {
        Ok(inst) => instance_to_json(&inst),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

/// Utilization pmf after every query under Best-fit. A non-positive
/// `gamma` means `1 / (3 + e^{-2})`.
#[wasm_bindgen]
pub fn bestfit_trace(instance_json: &str, gamma: f64) -> String {
    finish((|| {
        let inst = instance_from_json(instance_json).map_err(err)?;
        if inst.capacity_units() > 2000 {
            return Err("capacity above 2000 units is too large to draw".to_string());
        }
        let g = if gamma > 0.0 { gamma } else { default_gamma() };
        let run = knapsack::run_policy(&inst, g).map_err(err)?;
        let decisions: Vec<Vec<Value>> = run
            .thresholds
            .iter()
            .map(|q| {
                q.iter()
                    .map(|d| json!({ "eta": d.eta_units, "tie": d.tie_serve_prob }))
                    .collect()
            })
            .collect();
        Ok(json!({
            "gamma": g,
            "capacity_units": inst.capacity_units(),
            "feasible": run.feasible,
            "failure": run.failure,
            "expected_reward": run.expected_reward,
            "min_empty_mass": run.min_empty_mass,
            "pmfs": run.trace.iter().map(|p| p.masses().to_vec()).collect::<Vec<_>>(),
            "decisions": decisions,
            "served": run.served,
        }))
    })())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn levels_end_at_one_minus_theta() {
        let v = parse(&ode_levels(2, 0.0, 50));
        let theta = v["theta"].as_f64().unwrap();
        assert!((theta - 0.6148).abs() < 5e-4);
        let top = v["levels"][1].as_array().unwrap();
        assert!((top.last().unwrap().as_f64().unwrap() - (1.0 - theta)).abs() < 1e-6);
        assert_eq!(v["t"].as_array().unwrap().len(), 50);
    }

    #[test]
    fn errors_are_json() {
        assert!(parse(&ode_levels(0, 0.5, 10))["error"].is_string());
        assert!(parse(&h_profile(0.4, 0.5, 10))["error"].is_string());
        assert!(parse(&bestfit_trace("{", 0.3))["error"].is_string());
        assert!(parse(&preset_instance("nope", 5, 0.1, 0))["error"].is_string());
    }

    #[test]
    fn profile_is_thinned_and_nonincreasing() {
        let v = parse(&h_profile(0.3977, 1e-3, 100));
        let h: Vec<f64> = v["h"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect();
        assert!(h.len() <= 102);
        assert!(h.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!((v["total"].as_f64().unwrap() - 0.3557).abs() < 2e-3);
    }

    #[test]
    fn trace_on_tightness_preset() {
        let inst = preset_instance("knapsack-tight", 10, 0.05, 0);
        let v = parse(&bestfit_trace(&inst, 0.0));
        assert_eq!(v["feasible"], Value::Bool(true));
        let pmfs = v["pmfs"].as_array().unwrap();
        assert_eq!(pmfs.len(), 11);
        for p in pmfs {
            let s: f64 = p
                .as_array()
                .unwrap()
                .iter()
                .map(|x| x.as_f64().unwrap())
                .sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }
}
