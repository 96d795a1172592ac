//! Linear programs: model, solver, text export, and the EFCE-specific
//! assemblies (full-game solving and per-subgame safe refinement).

pub mod assemble;
pub mod simplex;
pub mod text;

use crate::error::{invalid, Result};

pub type VarId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct VarDef {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub obj: f64,
}

#[derive(Debug, Clone)]
pub struct RowDef {
    pub name: String,
    pub relation: Relation,
    pub rhs: f64,
    /// Sparse coefficients; variable ids must be registered.
    pub terms: Vec<(VarId, f64)>,
}

/// Sparse LP in named form. Variables default to `[0, +inf)` unless other
/// bounds are given; value variables are registered free.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub maximize: bool,
    vars: Vec<VarDef>,
    rows: Vec<RowDef>,
}

impl LinearProgram {
    pub fn new(maximize: bool) -> Self {
        LinearProgram {
            maximize,
            vars: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lo: f64, hi: f64, obj: f64) -> VarId {
        self.vars.push(VarDef {
            name: name.into(),
            lo,
            hi,
            obj,
        });
        (self.vars.len() - 1) as VarId
    }

    /// Nonnegative variable.
    pub fn add_nonneg(&mut self, name: impl Into<String>, obj: f64) -> VarId {
        self.add_var(name, 0.0, f64::INFINITY, obj)
    }

    /// Unbounded value variable.
    pub fn add_free(&mut self, name: impl Into<String>, obj: f64) -> VarId {
        self.add_var(name, f64::NEG_INFINITY, f64::INFINITY, obj)
    }

    pub fn set_upper_bound(&mut self, var: VarId, hi: f64) {
        self.vars[var as usize].hi = hi;
    }

    pub fn set_bounds(&mut self, var: VarId, lo: f64, hi: f64) {
        self.vars[var as usize].lo = lo;
        self.vars[var as usize].hi = hi;
    }

    pub fn set_objective(&mut self, var: VarId, obj: f64) {
        self.vars[var as usize].obj = obj;
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        relation: Relation,
        rhs: f64,
        terms: Vec<(VarId, f64)>,
    ) -> Result<()> {
        for &(v, c) in &terms {
            if v as usize >= self.vars.len() {
                return Err(invalid(format!("row references unknown variable {v}")));
            }
            if !c.is_finite() {
                return Err(invalid("non-finite coefficient"));
            }
        }
        if !rhs.is_finite() {
            return Err(invalid("non-finite rhs"));
        }
        self.rows.push(RowDef {
            name: name.into(),
            relation,
            rhs,
            terms,
        });
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn vars(&self) -> &[VarDef] {
        &self.vars
    }

    pub fn rows(&self) -> &[RowDef] {
        &self.rows
    }

    /// Objective value of an assignment (in the user's sense, max or min).
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.vars
            .iter()
            .zip(values)
            .map(|(v, x)| v.obj * x)
            .sum()
    }

    /// Largest constraint or bound violation of an assignment.
    pub fn residual(&self, values: &[f64]) -> f64 {
        let mut res: f64 = 0.0;
        for (v, &x) in self.vars.iter().zip(values) {
            if v.lo.is_finite() {
                res = res.max(v.lo - x);
            }
            if v.hi.is_finite() {
                res = res.max(x - v.hi);
            }
        }
        for row in &self.rows {
            let lhs: f64 = row.terms.iter().map(|&(v, c)| c * values[v as usize]).sum();
            let gap = lhs - row.rhs;
            let viol = match row.relation {
                Relation::Le => gap.max(0.0),
                Relation::Ge => (-gap).max(0.0),
                Relation::Eq => gap.abs(),
            };
            res = res.max(viol);
        }
        res
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub max_residual: f64,
    pub iterations: usize,
}

/// Solves with the built-in revised simplex.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    simplex::solve(lp, &simplex::SimplexOptions::default())
}

/// Objective selection for the assemblies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpObjective {
    /// Zero objective: any feasible point.
    Feasibility,
    /// Maximize expected social welfare (restricted to the subgame's
    /// leaf pairs in refinement LPs).
    MaxSocialWelfare,
}
