//! JSON instance files.
//!
//! Single resource: `{"K":int,"T":int,"queries":[[{"p":..,"r":..,"d_units":..},..],..]}`.
//! Multi resource adds `"m"` and uses arrays for `r` and `d_units`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instance::{
    MultiResourceInstance, MultiScenario, Scenario, ScenarioDist, SingleResourceInstance, SizeGrid,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScenarioJson {
    p: f64,
    r: f64,
    d_units: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceJson {
    #[serde(rename = "K")]
    k: u32,
    #[serde(rename = "T")]
    t: u32,
    queries: Vec<Vec<ScenarioJson>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MultiScenarioJson {
    p: f64,
    r: Vec<f64>,
    d_units: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MultiInstanceJson {
    #[serde(rename = "K")]
    k: u32,
    #[serde(rename = "T")]
    t: u32,
    m: usize,
    queries: Vec<Vec<MultiScenarioJson>>,
}

pub fn instance_from_json(text: &str) -> Result<SingleResourceInstance> {
    let raw: InstanceJson = serde_json::from_str(text)?;
    let grid = SizeGrid::new(raw.k, raw.t)?;
    let queries = raw
        .queries
        .into_iter()
        .map(|q| {
            ScenarioDist::new(
                q.into_iter()
                    .map(|s| Scenario::new(s.p, s.r, s.d_units))
                    .collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    SingleResourceInstance::new(grid, queries)
}

pub fn instance_to_json(inst: &SingleResourceInstance) -> String {
    let raw = InstanceJson {
        k: inst.grid().refinement(),
        t: inst.grid().horizon(),
        queries: inst
            .queries()
            .iter()
            .map(|q| {
                q.scenarios()
                    .iter()
                    .map(|s| ScenarioJson {
                        p: s.prob,
                        r: s.reward,
                        d_units: s.size_units,
                    })
                    .collect()
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("instance serializes")
}

/// True when the file carries an `"m"` field.
pub fn is_multi_resource_json(text: &str) -> Result<bool> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    Ok(v.get("m").is_some())
}

pub fn multi_instance_from_json(text: &str) -> Result<MultiResourceInstance> {
    let raw: MultiInstanceJson = serde_json::from_str(text)?;
    let grid = SizeGrid::new(raw.k, raw.t)?;
    let queries = raw
        .queries
        .into_iter()
        .map(|q| {
            q.into_iter()
                .map(|s| MultiScenario {
                    prob: s.p,
                    rewards: s.r,
                    sizes_units: s.d_units,
                })
                .collect()
        })
        .collect();
    MultiResourceInstance::new(raw.m, grid, queries)
}

pub fn multi_instance_to_json(mi: &MultiResourceInstance) -> String {
    let raw = MultiInstanceJson {
        k: mi.grid().refinement(),
        t: mi.grid().horizon(),
        m: mi.resources(),
        queries: mi
            .queries()
            .iter()
            .map(|q| {
                q.iter()
                    .map(|s| MultiScenarioJson {
                        p: s.prob,
                        r: s.rewards.clone(),
                        d_units: s.sizes_units.clone(),
                    })
                    .collect()
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("instance serializes")
}
