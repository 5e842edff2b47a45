use crate::error::{Error, Result};
use crate::instance::SingleResourceInstance;

/// Largest grid capacity the DP accepts.
pub const DP_CAP: u32 = 10_000;

/// Value-to-go `V[t][c]` over remaining capacity `c` in grid units, for
/// `t = 0..=T` with `V[T] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DpTable {
    pub values: Vec<Vec<f64>>,
    capacity: u32,
    instance: SingleResourceInstance,
}

/// Backward induction `V_t(c) = V_{t+1}(c) + E[max(0, 1{d <= c}(r + V_{t+1}(c - d) - V_{t+1}(c)))]`.
pub fn dp_value(inst: &SingleResourceInstance) -> Result<DpTable> {
    let cap = inst.capacity_units();
    if cap > DP_CAP {
        return Err(Error::StateCap(format!(
            "capacity {} units exceeds the DP limit {}",
            cap, DP_CAP
        )));
    }
    let n = inst.horizon();
    let width = cap as usize + 1;
    let mut values = vec![vec![0.0; width]; n + 1];
    for t in (0..n).rev() {
        let (head, tail) = values.split_at_mut(t + 1);
        let next = &tail[0];
        let cur = &mut head[t];
        for c in 0..width {
            let mut v = next[c];
            for s in inst.queries()[t].scenarios() {
                let d = s.size_units as usize;
                if s.prob > 0.0 && d <= c {
                    let gain = s.reward + next[c - d] - next[c];
                    if gain > 0.0 {
                        v += s.prob * gain;
                    }
                }
            }
            cur[c] = v;
        }
    }
    Ok(DpTable {
        values,
        capacity: cap,
        instance: inst.clone(),
    })
}

impl DpTable {
    /// Optimal online value from full capacity.
    pub fn value(&self) -> f64 {
        self.values[0][self.capacity as usize]
    }

    pub fn at(&self, t: usize, remaining: u32) -> f64 {
        self.values[t][remaining as usize]
    }

    /// Marginal term `max(0, r + V_{t+1}(c - d) - V_{t+1}(c))`, zero if `d > c`.
    pub fn marginal(&self, t: usize, scenario: usize, remaining: u32) -> f64 {
        let s = self.instance.queries()[t].scenarios()[scenario];
        if s.size_units > remaining {
            return 0.0;
        }
        let next = &self.values[t + 1];
        (s.reward + next[(remaining - s.size_units) as usize] - next[remaining as usize]).max(0.0)
    }

    /// Optimal action: serve when it fits and strictly gains.
    pub fn serve(&self, t: usize, scenario: usize, remaining: u32) -> bool {
        let s = self.instance.queries()[t].scenarios()[scenario];
        if s.size_units > remaining {
            return false;
        }
        let next = &self.values[t + 1];
        s.reward + next[(remaining - s.size_units) as usize] - next[remaining as usize] > 0.0
    }

    pub fn capacity_units(&self) -> u32 {
        self.capacity
    }

    pub fn instance(&self) -> &SingleResourceInstance {
        &self.instance
    }
}
