//! Linear programs and a reference solver.

mod lpfile;
mod simplex;

use crate::error::{Error, Result};

pub use lpfile::to_lp_string;
pub use simplex::{DenseSimplex, WarmStart};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparator {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// A sparse row `Σ coeffs · x  cmp  rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub cmp: Comparator,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.cmp {
            Comparator::Le => (act - self.rhs).max(0.0),
            Comparator::Ge => (self.rhs - act).max(0.0),
            Comparator::Eq => (act - self.rhs).abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, point: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

/// Anything that can solve a [`LinearProgram`] to optimality.
pub trait LpSolver: Send + Sync {
    fn solve(&self, lp: &LinearProgram) -> Result<LpOutcome>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    sense: Sense,
    vars: Vec<Variable>,
    rows: Vec<Constraint>,
    objective: Vec<f64>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        LinearProgram {
            sense,
            vars: Vec::new(),
            rows: Vec::new(),
            objective: Vec::new(),
        }
    }

    /// Adds a variable with bounds `lower <= x <= upper` (either may be
    /// infinite) and objective coefficient 0; returns its index.
    pub fn add_variable(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Result<usize> {
        let name = name.into();
        if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(Error::MalformedLp(format!(
                "variable {name} has bounds [{lower}, {upper}]"
            )));
        }
        self.vars.push(Variable { name, lower, upper });
        self.objective.push(0.0);
        Ok(self.vars.len() - 1)
    }

    /// Appends a dense row; returns the constraint id.
    pub fn add_constraint(&mut self, row: &[f64], cmp: Comparator, rhs: f64) -> Result<usize> {
        if row.len() != self.vars.len() {
            return Err(Error::DimensionMismatch {
                expected: self.vars.len(),
                got: row.len(),
            });
        }
        let coeffs = row
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(|(j, a)| (j, *a))
            .collect();
        self.add_sparse_constraint(coeffs, cmp, rhs)
    }

    /// Appends a row given as `(variable, coefficient)` pairs.
    pub fn add_sparse_constraint(&mut self, coeffs: Vec<(usize, f64)>, cmp: Comparator, rhs: f64) -> Result<usize> {
        if let Some(&(j, _)) = coeffs.iter().find(|(j, _)| *j >= self.vars.len()) {
            return Err(Error::MalformedLp(format!("row refers to unknown variable {j}")));
        }
        if !rhs.is_finite() || coeffs.iter().any(|(_, a)| !a.is_finite()) {
            return Err(Error::MalformedLp("row has non-finite entries".into()));
        }
        self.rows.push(Constraint { coeffs, cmp, rhs });
        Ok(self.rows.len() - 1)
    }

    pub fn set_objective(&mut self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.vars.len() {
            return Err(Error::DimensionMismatch {
                expected: self.vars.len(),
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::MalformedLp("objective has non-finite entries".into()));
        }
        self.objective = coeffs.to_vec();
        Ok(())
    }

    pub fn set_objective_coeff(&mut self, j: usize, c: f64) -> Result<()> {
        if j >= self.vars.len() || !c.is_finite() {
            return Err(Error::MalformedLp(format!("bad objective entry {j} = {c}")));
        }
        self.objective[j] = c;
        Ok(())
    }

    pub fn set_sense(&mut self, sense: Sense) {
        self.sense = sense;
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Whether `x` satisfies rows within `row_tol` and bounds within `bound_tol`.
    pub fn is_feasible(&self, x: &[f64], row_tol: f64, bound_tol: f64) -> bool {
        x.len() == self.vars.len()
            && self
                .vars
                .iter()
                .zip(x)
                .all(|(v, &xi)| xi >= v.lower - bound_tol && xi <= v.upper + bound_tol)
            && self.rows.iter().all(|r| r.violation(x) <= row_tol)
    }
}
