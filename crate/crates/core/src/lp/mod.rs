//! Dense linear programs: a two-phase simplex solver, builders for the
//! OCRS and value-to-go LPs, and a line-oriented text format.

mod builders;
mod simplex;
mod text;

use std::collections::HashMap;

use crate::error::{Error, Result};

pub use builders::{
    build_dual_pd, build_dual_pk, build_primal_pd, build_primal_pk, build_up_lp, dual_pd_value,
    dual_pk_value, oracle_equivalence, primal_pk_value, reachable_states, EquivalenceReport, UpLp,
    STATE_CAP,
};
pub use simplex::{simplex_solve, DEFAULT_LP_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Max,
    Min,
}

/// Constraint row, stored sparsely as `(variable, coefficient)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `max` or `min` of `c.x` subject to rows, `x >= 0` and optional upper bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    direction: Direction,
    names: Vec<String>,
    index: HashMap<String, usize>,
    objective: Vec<f64>,
    upper: Vec<Option<f64>>,
    rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new(direction: Direction) -> Self {
        Self {
            direction,
            names: Vec::new(),
            index: HashMap::new(),
            objective: Vec::new(),
            upper: Vec::new(),
            rows: Vec::new(),
        }
    }

    /// Adds a nonnegative variable with objective coefficient `cost`.
    pub fn add_var(&mut self, name: impl Into<String>, cost: f64) -> Result<usize> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Lp(format!("duplicate variable name {}", name)));
        }
        let id = self.names.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.objective.push(cost);
        self.upper.push(None);
        Ok(id)
    }

    pub fn set_upper(&mut self, var: usize, bound: f64) {
        self.upper[var] = Some(bound);
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    /// Adds a row; repeated variables are merged and zero terms dropped.
    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Result<usize> {
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (v, a) in terms {
            if v >= self.names.len() {
                return Err(Error::Lp(format!("row references unknown variable {}", v)));
            }
            match merged.iter_mut().find(|(u, _)| *u == v) {
                Some(e) => e.1 += a,
                None => merged.push((v, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        merged.sort_by_key(|&(v, _)| v);
        self.rows.push(Row {
            terms: merged,
            sense,
            rhs,
        });
        Ok(self.rows.len() - 1)
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn var(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn upper_bounds(&self) -> &[Option<f64>] {
        &self.upper
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Dense coefficients of row `i`.
    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.names.len()];
        for &(v, a) in &self.rows[i].terms {
            out[v] = a;
        }
        out
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of rows, bounds and nonnegativity at `x`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(-v);
            if let Some(u) = self.upper[j] {
                worst = worst.max(v - u);
            }
        }
        for row in &self.rows {
            let lhs: f64 = row.terms.iter().map(|&(v, a)| a * x[v]).sum();
            let viol = match row.sense {
                Sense::Le => lhs - row.rhs,
                Sense::Ge => row.rhs - lhs,
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    pub fn to_text(&self) -> String {
        text::to_text(self)
    }

    pub fn from_text(s: &str) -> Result<Self> {
        text::from_text(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub status: LpStatus,
    /// Objective in the program's own direction; NaN unless optimal.
    pub objective: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Feasibility residual of `x` against the original rows.
    pub residual: f64,
}

impl SimplexResult {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Objective if optimal, otherwise an error naming the status.
    pub fn optimum(&self) -> Result<f64> {
        if self.is_optimal() {
            Ok(self.objective)
        } else {
            Err(Error::Lp(format!(
                "solver finished with status {:?}",
                self.status
            )))
        }
    }
}
