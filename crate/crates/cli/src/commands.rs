use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use ocrs::generate::{generate, GenParams};
use ocrs::instance::{MultiResourceInstance, SingleResourceInstance};
use ocrs::io::{
    instance_from_json, instance_to_json, is_multi_resource_json, multi_instance_from_json,
};
use ocrs::knapsack::{self, default_gamma};
use ocrs::kunit;
use ocrs::lp::{
    self, build_dual_pd, build_dual_pk, build_primal_pd, build_primal_pk, build_up_lp,
    simplex_solve,
};
use ocrs::ode::{alaei_bound, euler_gamma, gamma_star, K_WARN};
use ocrs::oracle::{
    self, monte_carlo, route, simulate_routed, BestFitPolicy, MagicianKnapsack, OnlinePolicy,
    SimStats,
};
use ocrs::reproduce::{reproduce, ReproduceConfig, Target, PRIOR_BOUNDS};
use ocrs::unitdensity;

use crate::out::{csv_line, Emit};
use crate::{
    Cli, Command, KnapsackCommand, KunitArgs, KunitCommand, LpCommand, PolicyKind, UdCommand, Which,
};

/// Runs the selected command; the flag is false when a report has failures.
pub fn dispatch(cli: &Cli) -> Result<(Emit, bool)> {
    let tol = cli.tol;
    match &cli.command {
        Command::GammaK(a) => Ok((gamma_table(&a.k, a.euler_n, tol)?, true)),
        Command::Kunit(KunitCommand::ThetaStar(a)) => Ok((theta_star(a, tol)?, true)),
        Command::Kunit(KunitCommand::Certify(a)) => certify(a, tol),
        Command::Knapsack(KnapsackCommand::Run(a)) => Ok((
            knapsack_run(&a.instance, &a.gamma, a.trials, cli.seed, tol)?,
            true,
        )),
        Command::Ud(c) => Ok((ud(c)?, true)),
        Command::Lp(LpCommand::Solve {
            which,
            instance,
            k,
            export,
        }) => Ok((
            lp_solve(*which, instance, *k, export.as_deref(), tol)?,
            true,
        )),
        Command::Simulate(a) => Ok((
            simulate(a.policy, &a.instance, a.trials, a.gamma, a.delta, cli.seed)?,
            true,
        )),
        Command::Generate(a) => {
            let d = GenParams::default();
            let p = GenParams {
                t: a.t.unwrap_or(d.t),
                k: a.k.unwrap_or(d.k),
                n: a.n.unwrap_or(d.n),
                eps: a.eps.unwrap_or(d.eps),
                r: a.r.unwrap_or(d.r),
                r1: a.r1.unwrap_or(d.r1),
                r2: a.r2.unwrap_or(d.r2),
                lambda: a.lambda.unwrap_or(d.lambda),
                max_scenarios: a.max_scenarios.unwrap_or(d.max_scenarios),
                seed: cli.seed,
            };
            let inst = generate(&a.name, &p)?;
            Ok((
                Emit::json(serde_json::from_str(&instance_to_json(&inst))?),
                true,
            ))
        }
        Command::Reproduce(a) => reproduce_cmd(&a.target, a.instances, cli.seed, tol),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_single(path: &Path) -> Result<SingleResourceInstance> {
    let text = read(path)?;
    if is_multi_resource_json(&text)? {
        bail!(
            "{} is a multi-resource instance; this command needs a single resource",
            path.display()
        );
    }
    instance_from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

enum Loaded {
    Single(SingleResourceInstance),
    Multi(MultiResourceInstance),
}

fn load_any(path: &Path) -> Result<Loaded> {
    let text = read(path)?;
    let ctx = || format!("parsing {}", path.display());
    if is_multi_resource_json(&text)? {
        Ok(Loaded::Multi(
            multi_instance_from_json(&text).with_context(ctx)?,
        ))
    } else {
        Ok(Loaded::Single(instance_from_json(&text).with_context(ctx)?))
    }
}

/// Parses `a`, `a..b` or `a..=b` (both inclusive).
fn parse_k_range(s: &str) -> Result<(usize, usize)> {
    let bad = || anyhow!("invalid k range {:?}; expected k or a..b", s);
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (
            a.trim().parse().map_err(|_| bad())?,
            b.trim()
                .trim_start_matches('=')
                .parse()
                .map_err(|_| bad())?,
        ),
        None => {
            let k = s.trim().parse().map_err(|_| bad())?;
            (k, k)
        }
    };
    if lo == 0 || lo > hi || hi > K_WARN {
        bail!(
            "k range {}..{} must satisfy 1 <= a <= b <= {}",
            lo,
            hi,
            K_WARN
        );
    }
    Ok((lo, hi))
}

fn gamma_table(range: &str, euler_n: usize, tol: f64) -> Result<Emit> {
    let (lo, hi) = parse_k_range(range)?;
    let mut rows = Vec::new();
    let mut csv = csv_line([
        "k",
        "gamma_star",
        "alaei_bound",
        "existing_lower_bound",
        "euler_N",
        "euler_value",
    ]);
    for k in lo..=hi {
        let g = gamma_star(k, tol)?;
        let e = euler_gamma(k, euler_n)?;
        let existing = PRIOR_BOUNDS.get(k - 1).copied();
        csv.push_str(&csv_line([
            k.to_string(),
            g.to_string(),
            alaei_bound(k).to_string(),
            existing.map_or(String::new(), |v| v.to_string()),
            euler_n.to_string(),
            e.to_string(),
        ]));
        rows.push(json!({
            "k": k, "gamma_star": g, "alaei_bound": alaei_bound(k),
            "existing_lower_bound": existing, "euler_N": euler_n, "euler_value": e,
        }));
    }
    Ok(Emit::both(Value::Array(rows), csv))
}

/// Units implied by an instance whose active sizes all equal `C / k`.
fn infer_k(inst: &SingleResourceInstance) -> Result<usize> {
    let mut sizes = inst
        .queries()
        .iter()
        .flat_map(|q| q.size_marginals())
        .map(|(d, _)| d);
    let unit = sizes
        .next()
        .ok_or_else(|| anyhow!("instance has no active scenario"))?;
    let cap = inst.capacity_units();
    if unit == 0 || sizes.any(|d| d != unit) || !cap.is_multiple_of(unit) {
        bail!("active sizes are not all equal to C/k; pass --k explicitly");
    }
    Ok((cap / unit) as usize)
}

fn p_and_k(source: &crate::PSource, k: Option<usize>) -> Result<(Vec<f64>, usize)> {
    match (&source.instance, &source.p) {
        (Some(path), _) => {
            let inst = load_single(path)?;
            let k = match k {
                Some(k) => k,
                None => infer_k(&inst)?,
            };
            Ok((inst.activity(), k))
        }
        (None, Some(p)) => Ok((
            p.clone(),
            k.ok_or_else(|| anyhow!("--k is required with --p"))?,
        )),
        (None, None) => bail!("pass --instance or --p"),
    }
}

fn theta_star(a: &KunitArgs, tol: f64) -> Result<Emit> {
    let (p, k) = p_and_k(&a.source, a.k)?;
    let th = kunit::solve_theta_star(&p, k, tol)?;
    Ok(Emit::both(
        json!({ "k": k, "T": p.len(), "theta_star": th }),
        csv_line(["k", "T", "theta_star"])
            + &csv_line([k.to_string(), p.len().to_string(), th.to_string()]),
    ))
}

fn certify(a: &KunitArgs, tol: f64) -> Result<(Emit, bool)> {
    let (p, k) = p_and_k(&a.source, a.k)?;
    let th = kunit::solve_theta_star(&p, k, tol)?;
    let cand = kunit::build_candidate(&p, k, th)?;
    let cert = kunit::build_dual_certificate(&p, k, th)?;
    let rep = kunit::verify_certificate(&cand, &cert, &p, k);
    let pass = rep.passes();
    let json = json!({
        "theta_star": rep.theta_star,
        "primal_feasible": rep.primal_feasible,
        "dual_feasible": rep.dual_feasible,
        "slackness_max": rep.slackness_max,
        "objective_gap": rep.objective_gap,
        "primal_violation": rep.primal_violation,
        "dual_violation": rep.dual_violation,
        "dual_objective": rep.dual_objective,
        "breakpoints": cand.breakpoints,
        "passes": pass,
    });
    let csv = csv_line([
        "theta_star",
        "primal_feasible",
        "dual_feasible",
        "slackness_max",
        "objective_gap",
        "passes",
    ]) + &csv_line([
        rep.theta_star.to_string(),
        rep.primal_feasible.to_string(),
        rep.dual_feasible.to_string(),
        rep.slackness_max.to_string(),
        rep.objective_gap.to_string(),
        pass.to_string(),
    ]);
    Ok((Emit::both(json, csv), pass))
}

fn parse_gamma(s: &str, inst: &SingleResourceInstance, tol: f64) -> Result<f64> {
    match s {
        "auto" => Ok(default_gamma()),
        "max" => Ok(knapsack::max_feasible_gamma(inst, tol)?),
        v => v
            .parse()
            .map_err(|_| anyhow!("--gamma must be auto, max or a number, got {:?}", v)),
    }
}

fn stats_json(s: &SimStats) -> Result<Value> {
    Ok(serde_json::to_value(s)?)
}

fn knapsack_run(path: &Path, gamma: &str, trials: usize, seed: u64, tol: f64) -> Result<Emit> {
    let inst = load_single(path)?;
    let g = parse_gamma(gamma, &inst, tol)?;
    let run = knapsack::run_policy(&inst, g)?;
    let up = oracle::up_value(&inst)?;
    let rates = run.conditional_rates(&inst);
    let mut csv = csv_line([
        "t",
        "scenario",
        "size_units",
        "prob",
        "served",
        "conditional_rate",
    ]);
    for (t, q) in inst.queries().iter().enumerate() {
        for (s, sc) in q.scenarios().iter().enumerate() {
            csv.push_str(&csv_line([
                t.to_string(),
                s.to_string(),
                sc.size_units.to_string(),
                sc.prob.to_string(),
                run.served
                    .get(t)
                    .and_then(|r| r.get(s))
                    .map_or(String::new(), |v| v.to_string()),
                rates
                    .get(t)
                    .and_then(|r| r.get(s))
                    .map_or(String::new(), |v| v.to_string()),
            ]));
        }
    }
    // NaN rates (zero-probability scenarios) become null in JSON.
    let rates_json: Vec<Vec<Option<f64>>> = rates
        .iter()
        .map(|r| {
            r.iter()
                .map(|&v| if v.is_finite() { Some(v) } else { None })
                .collect()
        })
        .collect();
    let simulation = if trials > 0 && run.feasible {
        let policy = BestFitPolicy::constant(&inst, g)?;
        Some(stats_json(&monte_carlo(&policy, &inst, trials, seed)?)?)
    } else {
        None
    };
    let json = json!({
        "gamma": g,
        "feasible": run.feasible,
        "failure": run.failure,
        "expected_reward": run.expected_reward,
        "up": up,
        "ratio": if up > 0.0 { Some(run.expected_reward / up) } else { None },
        "conditional_rates": rates_json,
        "invariant_max_slack": run.invariant_max,
        "min_empty_mass": run.min_empty_mass,
        "ops": run.ops,
        "simulation": simulation,
    });
    Ok(Emit::both(json, csv))
}

fn resolve_gamma0(gamma0: Option<f64>, delta: f64) -> Result<f64> {
    match gamma0 {
        Some(g) => Ok(g),
        None => Ok(unitdensity::optimize_gamma0(delta, 1e-7)?.0),
    }
}

fn ud(c: &UdCommand) -> Result<Emit> {
    match c {
        UdCommand::Optimize { delta } => {
            let (g0, value) = unitdensity::optimize_gamma0(*delta, 1e-7)?;
            Ok(Emit::both(
                json!({ "delta": delta, "gamma0": g0, "value": value }),
                csv_line(["delta", "gamma0", "value"])
                    + &csv_line([delta.to_string(), g0.to_string(), value.to_string()]),
            ))
        }
        UdCommand::Run {
            instance,
            gamma0,
            delta,
        } => {
            let inst = load_single(instance)?;
            let g0 = resolve_gamma0(*gamma0, *delta)?;
            let seq = unitdensity::gamma_sequence(&unitdensity::window_lengths(&inst), g0, *delta)?;
            let r = unitdensity::run_ud_policy(&inst, &seq.gammas)?;
            let mut csv = csv_line(["t", "gamma", "empty_mass", "empty_bound"]);
            for (t, g) in seq.gammas.iter().enumerate() {
                csv.push_str(&csv_line([
                    t.to_string(),
                    g.to_string(),
                    r.empty_mass[t].to_string(),
                    r.empty_bounds[t].to_string(),
                ]));
            }
            let json = json!({
                "gamma0": g0,
                "gammas": seq.gammas,
                "feasible": r.run.feasible,
                "failure": r.run.failure,
                "expected_utilization": r.run.expected_reward,
                "planned_utilization": r.planned_utilization,
                "nonincreasing": r.nonincreasing,
                "empty_mass": r.empty_mass,
                "empty_bounds": r.empty_bounds,
            });
            Ok(Emit::both(json, csv))
        }
        UdCommand::Profile { gamma0, delta } => {
            let g0 = resolve_gamma0(*gamma0, 1e-5)?;
            let prof = unitdensity::h_profile(g0, *delta)?;
            let mut csv = csv_line(["t", "h", "integral"]);
            let mut rows = Vec::with_capacity(prof.len());
            for i in 0..prof.len() {
                let t = i as f64 * prof.step;
                csv.push_str(&csv_line([
                    t.to_string(),
                    prof.values[i].to_string(),
                    prof.integral[i].to_string(),
                ]));
                rows.push(json!({ "t": t, "h": prof.values[i], "integral": prof.integral[i] }));
            }
            Ok(Emit::both(
                json!({ "gamma0": g0, "step": prof.step, "total": prof.total(), "points": rows }),
                csv,
            ))
        }
    }
}

fn lp_solve(
    which: Which,
    path: &Path,
    k: Option<usize>,
    export: Option<&Path>,
    tol: f64,
) -> Result<Emit> {
    let program = match which {
        Which::DualPk | Which::PrimalPk => {
            let inst = load_single(path)?;
            let k = match k {
                Some(k) => k,
                None => infer_k(&inst)?,
            };
            let p = inst.activity();
            if which == Which::DualPk {
                build_dual_pk(&p, k)?
            } else {
                build_primal_pk(&p, k)?
            }
        }
        Which::DualPd => build_dual_pd(&load_single(path)?)?,
        Which::PrimalPd => build_primal_pd(&load_single(path)?)?,
        Which::Up => {
            let mi = match load_any(path)? {
                Loaded::Single(s) => MultiResourceInstance::from_single(&s),
                Loaded::Multi(m) => m,
            };
            build_up_lp(&mi)?.lp
        }
    };
    if let Some(p) = export {
        crate::out::write_output(Some(p), &program.to_text())?;
    }
    let sol = simplex_solve(&program, tol.max(lp::DEFAULT_LP_TOL));
    let status = format!("{:?}", sol.status);
    let objective = if sol.is_optimal() {
        Some(sol.objective)
    } else {
        None
    };
    let json = json!({
        "which": format!("{:?}", which),
        "status": status,
        "objective": objective,
        "iterations": sol.iterations,
        "residual": sol.residual,
        "vars": program.num_vars(),
        "rows": program.num_rows(),
    });
    let csv = csv_line(["which", "status", "objective", "iterations", "residual"])
        + &csv_line([
            format!("{:?}", which),
            status,
            objective.map_or(String::new(), |v| v.to_string()),
            sol.iterations.to_string(),
            sol.residual.to_string(),
        ]);
    Ok(Emit::both(json, csv))
}

fn policy_name(p: PolicyKind) -> &'static str {
    match p {
        PolicyKind::Magician => "magician",
        PolicyKind::Bestfit => "bestfit",
        PolicyKind::Ud => "ud",
    }
}

fn simulate(
    kind: PolicyKind,
    path: &Path,
    trials: usize,
    gamma: Option<f64>,
    delta: f64,
    seed: u64,
) -> Result<Emit> {
    let (g, stats, up) = match load_any(path)? {
        Loaded::Single(inst) => {
            let up = oracle::up_value(&inst)?;
            let (g, stats) = match kind {
                PolicyKind::Bestfit => {
                    let g = gamma.unwrap_or_else(default_gamma);
                    (
                        g,
                        monte_carlo(&BestFitPolicy::constant(&inst, g)?, &inst, trials, seed)?,
                    )
                }
                PolicyKind::Magician => {
                    let m = MagicianKnapsack::for_instance(&inst, gamma)?;
                    (m.policy.theta, monte_carlo(&m, &inst, trials, seed)?)
                }
                PolicyKind::Ud => {
                    let g0 = resolve_gamma0(gamma, delta)?;
                    let seq = unitdensity::gamma_sequence(
                        &unitdensity::window_lengths(&inst),
                        g0,
                        delta,
                    )?;
                    (
                        g0,
                        monte_carlo(
                            &BestFitPolicy::new(&inst, &seq.gammas)?,
                            &inst,
                            trials,
                            seed,
                        )?,
                    )
                }
            };
            (g, stats, up)
        }
        Loaded::Multi(mi) => {
            if kind != PolicyKind::Bestfit {
                bail!("multi-resource instances are simulated with --policy bestfit only");
            }
            let g = gamma.unwrap_or_else(default_gamma);
            let routing = route(&mi)?;
            let policies = routing
                .subs
                .iter()
                .map(|s| BestFitPolicy::constant(s, g))
                .collect::<ocrs::Result<Vec<_>>>()?;
            let refs: Vec<&dyn OnlinePolicy> =
                policies.iter().map(|p| p as &dyn OnlinePolicy).collect();
            (
                g,
                simulate_routed(&mi, &routing, &refs, trials, seed)?,
                routing.up,
            )
        }
    };
    let name = policy_name(kind);
    let csv = csv_line(["policy", "gamma", "mean", "se", "min_conditional_rate"])
        + &csv_line([
            name.to_string(),
            g.to_string(),
            stats.mean.to_string(),
            stats.se.to_string(),
            stats.min_conditional_rate.to_string(),
        ]);
    let json = json!({ "policy": name, "gamma": g, "up": up, "stats": stats_json(&stats)? });
    Ok(Emit::both(json, csv))
}

fn reproduce_cmd(target: &str, instances: usize, seed: u64, tol: f64) -> Result<(Emit, bool)> {
    let targets: Vec<Target> = if target == "all" {
        Target::ALL.to_vec()
    } else {
        vec![target.parse()?]
    };
    let cfg = ReproduceConfig {
        seed,
        tol,
        instances,
    };
    let mut reports = Vec::new();
    for t in targets {
        log::info!("running {}", t.name());
        reports.push(reproduce(t, &cfg)?);
    }
    let ok = reports.iter().all(|r| r.all_pass());
    for r in &reports {
        for c in r.checks.iter().filter(|c| !c.pass) {
            log::warn!(
                "{} / {}: measured {} expected {} tolerance {}",
                r.target,
                c.name,
                c.measured,
                c.expected,
                c.tolerance
            );
        }
    }
    let mut csv = String::new();
    for (i, r) in reports.iter().enumerate() {
        let body = r.to_csv();
        csv.push_str(if i == 0 {
            &body
        } else {
            body.split_once('\n').map_or("", |(_, rest)| rest)
        });
    }
    let json = json!({ "all_pass": ok, "reports": serde_json::to_value(&reports)? });
    Ok((Emit::both(json, csv), ok))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_ranges() {
        assert_eq!(parse_k_range("1..8").unwrap(), (1, 8));
        assert_eq!(parse_k_range("2..=4").unwrap(), (2, 4));
        assert_eq!(parse_k_range("5").unwrap(), (5, 5));
        assert!(parse_k_range("0..3").is_err());
        assert!(parse_k_range("4..2").is_err());
        assert!(parse_k_range("1..17").is_err());
        assert!(parse_k_range("a").is_err());
    }
}
