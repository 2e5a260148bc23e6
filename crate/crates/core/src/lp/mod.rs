//! Dense linear-programming kernel: a two-phase revised simplex that returns
//! primal values and constraint duals.
//!
//! Duals follow the sensitivity convention `dual_i = d(objective) / d(rhs_i)` of a
//! minimization, so a binding `<=` row has a nonpositive dual and a binding `>=`
//! row a nonnegative one. Equality rows have free duals.

use std::fmt::{self, Write as _};

mod simplex;

pub const FEASIBILITY_TOL: f64 = 1e-8;
pub const OPTIMALITY_TOL: f64 = 1e-9;
pub const DUALITY_GAP_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `min sum(cost_j x_j)` subject to linear rows and per-variable bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            cost,
        });
        VarId(self.variables.len() - 1)
    }

    /// Shorthand for a variable bounded below by zero.
    pub fn add_nonneg(&mut self, name: impl Into<String>, cost: f64) -> VarId {
        self.add_var(name, 0.0, f64::INFINITY, cost)
    }

    pub fn add_free(&mut self, name: impl Into<String>, cost: f64) -> VarId {
        self.add_var(name, f64::NEG_INFINITY, f64::INFINITY, cost)
    }

    pub fn set_cost(&mut self, var: VarId, cost: f64) {
        self.variables[var.0].cost = cost;
    }

    pub fn add_constraint(
        &mut self,
        terms: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> RowId {
        self.constraints.push(Constraint {
            terms,
            relation,
            rhs,
        });
        RowId(self.constraints.len() - 1)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn validate(&self) -> Result<(), String> {
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(format!(
                    "variable {} has inconsistent bounds [{}, {}]",
                    v.name, v.lower, v.upper
                ));
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(format!("variable {} has an empty domain", v.name));
            }
            if !v.cost.is_finite() {
                return Err(format!("variable {} has non-finite cost", v.name));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(format!("row {i} has non-finite rhs"));
            }
            for &(v, a) in &c.terms {
                if v.0 >= self.variables.len() {
                    return Err(format!("row {i} references undeclared variable {}", v.0));
                }
                if !a.is_finite() {
                    return Err(format!("row {i} has a non-finite coefficient"));
                }
            }
        }
        Ok(())
    }

    /// Human-readable listing, for bug reports.
    pub fn dump(&self) -> String {
        let mut s = String::from("minimize\n ");
        let mut any = false;
        for v in &self.variables {
            if v.cost != 0.0 {
                let _ = write!(s, " {:+} {}", v.cost, v.name);
                any = true;
            }
        }
        if !any {
            s.push_str(" 0");
        }
        s.push_str("\nsubject to\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = write!(s, "  r{i}:");
            for &(v, a) in &c.terms {
                let _ = write!(s, " {:+} {}", a, self.variables[v.0].name);
            }
            let _ = writeln!(s, " {} {}", c.relation, c.rhs);
        }
        s.push_str("bounds\n");
        for v in &self.variables {
            let _ = writeln!(s, "  {} <= {} <= {}", v.lower, v.name, v.upper);
        }
        s
    }

    pub(crate) fn row_activity(&self, row: usize, x: &[f64]) -> f64 {
        self.constraints[row]
            .terms
            .iter()
            .map(|&(v, a)| a * x[v.0])
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "OPTIMAL",
            LpStatus::Infeasible => "INFEASIBLE",
            LpStatus::Unbounded => "UNBOUNDED",
            LpStatus::NumericalFailure => "NUMERICAL_FAILURE",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// One value per variable; empty unless OPTIMAL.
    pub primal: Vec<f64>,
    /// One value per constraint; empty unless OPTIMAL.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub(crate) fn failed(status: LpStatus, iterations: usize) -> Self {
        LpSolution {
            status,
            primal: Vec::new(),
            duals: Vec::new(),
            objective: f64::NAN,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.primal[v.0]
    }

    pub fn dual(&self, r: RowId) -> f64 {
        self.duals[r.0]
    }
}

/// Optimality evidence computed from the original problem data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    /// Worst violation of a row or a bound (infinity norm).
    pub primal_violation: f64,
    /// Worst wrong-signed reduced cost or row dual.
    pub dual_violation: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

impl Certificate {
    pub fn gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
    }

    pub fn holds(&self) -> bool {
        self.primal_violation <= FEASIBILITY_TOL
            && self.dual_violation <= 1e-7
            && self.gap() <= DUALITY_GAP_TOL * (1.0 + self.primal_objective.abs())
    }
}

/// Checks `x` and `y` against one another: primal feasibility, dual sign
/// conditions, and the primal/dual objective values.
pub fn certify(lp: &LinearProgram, x: &[f64], y: &[f64]) -> Certificate {
    let mut primal_violation: f64 = 0.0;
    let mut dual_violation: f64 = 0.0;
    let mut dual_objective = 0.0;
    for (i, c) in lp.constraints.iter().enumerate() {
        let act = lp.row_activity(i, x);
        let viol = match c.relation {
            Relation::Le => (act - c.rhs).max(0.0),
            Relation::Ge => (c.rhs - act).max(0.0),
            Relation::Eq => (act - c.rhs).abs(),
        };
        primal_violation = primal_violation.max(viol);
        let wrong = match c.relation {
            Relation::Le => y[i].max(0.0),
            Relation::Ge => (-y[i]).max(0.0),
            Relation::Eq => 0.0,
        };
        dual_violation = dual_violation.max(wrong);
        dual_objective += c.rhs * y[i];
    }
    let mut reduced: Vec<f64> = lp.variables.iter().map(|v| v.cost).collect();
    for (i, c) in lp.constraints.iter().enumerate() {
        for &(v, a) in &c.terms {
            reduced[v.0] -= a * y[i];
        }
    }
    let mut primal_objective = 0.0;
    for (j, v) in lp.variables.iter().enumerate() {
        primal_objective += v.cost * x[j];
        primal_violation = primal_violation
            .max((v.lower - x[j]).max(0.0))
            .max((x[j] - v.upper).max(0.0));
        let d = reduced[j];
        if d > 0.0 {
            if v.lower.is_finite() {
                dual_objective += d * v.lower;
            } else {
                dual_violation = dual_violation.max(d);
            }
        } else if d < 0.0 {
            if v.upper.is_finite() {
                dual_objective += d * v.upper;
            } else {
                dual_violation = dual_violation.max(-d);
            }
        }
    }
    Certificate {
        primal_violation,
        dual_violation,
        primal_objective,
        dual_objective,
    }
}

/// Solves `lp`. Deterministic: identical input gives bit-identical output.
pub fn solve(lp: &LinearProgram) -> LpSolution {
    if lp.validate().is_err() {
        return LpSolution::failed(LpStatus::NumericalFailure, 0);
    }
    simplex::solve(lp)
}
