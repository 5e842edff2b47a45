use crate::error::{Error, Result};
use crate::instance::{MultiResourceInstance, Scenario, ScenarioDist, SingleResourceInstance};
use crate::lp::{build_up_lp, simplex_solve, DEFAULT_LP_TOL};

/// Random routing from the upper-bound LP solution.
#[derive(Debug, Clone)]
pub struct Routing {
    /// `x[t][s][j]`, the probability of routing scenario `s` of query `t`
    /// to resource `j`.
    pub x: Vec<Vec<Vec<f64>>>,
    /// Upper-bound LP optimum.
    pub up: f64,
    /// Per-resource single-resource instances.
    pub subs: Vec<SingleResourceInstance>,
    /// `scenario_map[j][t][s]`: index of scenario `s` of query `t` within
    /// `subs[j]`, when it has positive routed mass.
    pub scenario_map: Vec<Vec<Vec<Option<usize>>>>,
}

pub fn route(mi: &MultiResourceInstance) -> Result<Routing> {
    let up_lp = build_up_lp(mi)?;
    let sol = simplex_solve(&up_lp.lp, DEFAULT_LP_TOL);
    let up = sol.optimum()?;
    let m = mi.resources();
    let mut x: Vec<Vec<Vec<f64>>> = mi
        .queries()
        .iter()
        .map(|q| vec![vec![0.0; m]; q.len()])
        .collect();
    for (v, &(t, s, j)) in up_lp.vars.iter().enumerate() {
        x[t][s][j] = sol.x[v].clamp(0.0, 1.0);
    }
    for row in x.iter_mut().flatten() {
        let total: f64 = row.iter().sum();
        if total > 1.0 {
            row.iter_mut().for_each(|v| *v /= total);
        }
    }
    let grid = mi.grid();
    let mut subs = Vec::with_capacity(m);
    let mut scenario_map = Vec::with_capacity(m);
    for j in 0..m {
        let mut queries = Vec::with_capacity(mi.horizon());
        let mut maps = Vec::with_capacity(mi.horizon());
        for (t, q) in mi.queries().iter().enumerate() {
            let mut scen = Vec::new();
            let mut map = vec![None; q.len()];
            for (s, sc) in q.iter().enumerate() {
                let mass = sc.prob * x[t][s][j];
                if mass > 0.0 {
                    map[s] = Some(scen.len());
                    scen.push(Scenario::new(mass, sc.rewards[j], sc.sizes_units[j]));
                }
            }
            queries.push(ScenarioDist::new(scen)?);
            maps.push(map);
        }
        subs.push(
            SingleResourceInstance::new(grid, queries)
                .map_err(|e| Error::Lp(format!("routed instance {}: {}", j, e)))?,
        );
        scenario_map.push(maps);
    }
    Ok(Routing {
        x,
        up,
        subs,
        scenario_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{validate, MultiScenario, SizeGrid};
    use crate::oracle::up_value;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_resource_is_identity() {
        let inst =
            SingleResourceInstance::from_triples(2, &[vec![(0.5, 1.0, 2)], vec![(0.25, 3.0, 1)]])
                .unwrap();
        let r = route(&MultiResourceInstance::from_single(&inst)).unwrap();
        assert_eq!(r.subs.len(), 1);
        assert_eq!(r.subs[0], inst);
        assert_abs_diff_eq!(r.up, inst.expected_total_reward(), epsilon = 1e-12);
    }

    #[test]
    fn symmetric_split() {
        let grid = SizeGrid::new(1, 2).unwrap();
        let s = MultiScenario {
            prob: 1.0,
            rewards: vec![1.0, 1.0],
            sizes_units: vec![2, 2],
        };
        let mi = MultiResourceInstance::new(2, grid, vec![vec![s.clone()], vec![s]]).unwrap();
        let r = route(&mi).unwrap();
        let total: f64 = r.subs.iter().map(|h| up_value(h).unwrap()).sum();
        assert_abs_diff_eq!(total, r.up, epsilon = 1e-8);
        for h in &r.subs {
            assert!(validate(h).ok);
        }
    }
}
