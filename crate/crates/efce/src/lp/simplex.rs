//! Two-phase revised simplex for sparse LPs with variable bounds.
//!
//! The basis inverse is kept in product form: a refactorization pass
//! reduces the basis to a sequence of eta columns, and each pivot appends
//! one more eta. Equality and violated rows get phase-1 artificials;
//! Dantzig pricing with a Bland fallback after degenerate stalls.

use super::{LinearProgram, LpSolution, LpStatus, Relation};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Reduced-cost threshold for entering candidates.
    pub dual_tol: f64,
    /// Smallest pivot magnitude accepted in the ratio test.
    pub pivot_tol: f64,
    /// Primal feasibility tolerance (phase-1 target).
    pub feas_tol: f64,
    /// Refactorize after this many pivots.
    pub refactor_every: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub stall_limit: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_iterations: 2_000_000,
            dual_tol: 1e-9,
            pivot_tol: 1e-9,
            feas_tol: 1e-8,
            refactor_every: 80,
            stall_limit: 600,
        }
    }
}

/// One elementary column transformation: at stage `row_pos`, the basis
/// column equals `col` after the previous etas.
struct Eta {
    pivot: usize,
    pivot_value: f64,
    /// Off-pivot entries (position, value).
    entries: Vec<(usize, f64)>,
}

/// Sparse column-major matrix over all columns (structural + slack +
/// artificial).
struct Columns {
    starts: Vec<usize>,
    rows: Vec<usize>,
    vals: Vec<f64>,
}

impl Columns {
    fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let lo = self.starts[j];
        let hi = self.starts[j + 1];
        (&self.rows[lo..hi], &self.vals[lo..hi])
    }
}

struct Worker {
    m: usize,
    cols: Columns,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Phase-2 costs (minimization).
    cost: Vec<f64>,
    /// 1 on artificials during phase 1.
    phase1_cost: Vec<f64>,
    rhs: Vec<f64>,

    basis: Vec<usize>,
    in_basis: Vec<bool>,
    /// Nonbasic values (at a bound or 0 for free); basic entries unused.
    value: Vec<f64>,
    x_basic: Vec<f64>,
    etas: Vec<Eta>,
    pivots_since_refactor: usize,

    work: Vec<f64>,
    work2: Vec<f64>,
    opts: SimplexOptions,
    iterations: usize,
}

pub fn solve(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution> {
    let n = lp.num_vars();
    let m = lp.num_rows();
    if m == 0 {
        // Bound-only problem: pick the best bound per variable.
        let mut values = Vec::with_capacity(n);
        for v in lp.vars() {
            let want_high = if lp.maximize { v.obj > 0.0 } else { v.obj < 0.0 };
            let x = if want_high {
                if v.hi.is_finite() {
                    v.hi
                } else if v.obj != 0.0 {
                    return Ok(unbounded(n));
                } else {
                    0.0
                }
            } else if v.lo.is_finite() {
                v.lo
            } else if v.obj != 0.0 {
                return Ok(unbounded(n));
            } else {
                0.0
            };
            values.push(x);
        }
        return Ok(LpSolution {
            status: LpStatus::Optimal,
            objective: lp.objective_value(&values),
            max_residual: lp.residual(&values),
            values,
            iterations: 0,
        });
    }

    // Column storage: structural vars, then one slack per row, then
    // artificials appended as needed.
    let mut starts = vec![0usize];
    let mut rows_idx = Vec::new();
    let mut vals = Vec::new();
    {
        // Transpose row storage into columns.
        let mut per_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in lp.rows().iter().enumerate() {
            for &(v, c) in &row.terms {
                if c != 0.0 {
                    per_col[v as usize].push((i, c));
                }
            }
        }
        for col in &mut per_col {
            col.sort_unstable_by_key(|&(i, _)| i);
            // Merge duplicate terms.
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(col.len());
            for &(i, c) in col.iter() {
                if let Some(last) = merged.last_mut() {
                    if last.0 == i {
                        last.1 += c;
                        continue;
                    }
                }
                merged.push((i, c));
            }
            for (i, c) in merged {
                rows_idx.push(i);
                vals.push(c);
            }
            starts.push(rows_idx.len());
        }
    }
    let mut lo: Vec<f64> = lp.vars().iter().map(|v| v.lo).collect();
    let mut hi: Vec<f64> = lp.vars().iter().map(|v| v.hi).collect();
    let sign = if lp.maximize { -1.0 } else { 1.0 };
    let mut cost: Vec<f64> = lp.vars().iter().map(|v| sign * v.obj).collect();

    // Slacks.
    for (i, row) in lp.rows().iter().enumerate() {
        rows_idx.push(i);
        vals.push(1.0);
        starts.push(rows_idx.len());
        match row.relation {
            Relation::Le => {
                lo.push(0.0);
                hi.push(f64::INFINITY);
            }
            Relation::Ge => {
                lo.push(f64::NEG_INFINITY);
                hi.push(0.0);
            }
            Relation::Eq => {
                lo.push(0.0);
                hi.push(0.0);
            }
        }
        cost.push(0.0);
    }

    let rhs: Vec<f64> = lp.rows().iter().map(|r| r.rhs).collect();

    // Initial nonbasic values and the implied slack levels.
    let total_nonart = n + m;
    let mut value = vec![0.0; total_nonart];
    for j in 0..n {
        value[j] = if lo[j].is_finite() {
            lo[j]
        } else if hi[j].is_finite() {
            hi[j]
        } else {
            0.0
        };
    }
    let mut slack_level = rhs.clone();
    for (j, lvl) in value.iter().enumerate().take(n) {
        if *lvl != 0.0 {
            let (ri, rv) = col_of(&starts, &rows_idx, &vals, j);
            for (&i, &c) in ri.iter().zip(rv) {
                slack_level[i] -= c * lvl;
            }
        }
    }

    // Basis: slack where its level fits its bounds, otherwise an
    // artificial covering the residual.
    let mut basis = Vec::with_capacity(m);
    let mut phase1_needed = false;
    let mut artificials = Vec::new();
    for i in 0..m {
        let sj = n + i;
        let lvl = slack_level[i];
        if lvl >= lo[sj] - opts.feas_tol && lvl <= hi[sj] + opts.feas_tol {
            basis.push(sj);
        } else {
            // Clamp the slack to its nearest bound and cover the rest
            // with a nonnegative artificial.
            let clamped = if lvl < lo[sj] { lo[sj] } else { hi[sj] };
            value[sj] = clamped;
            let residual = lvl - clamped;
            let aj = total_nonart + artificials.len();
            rows_idx.push(i);
            vals.push(if residual >= 0.0 { 1.0 } else { -1.0 });
            starts.push(rows_idx.len());
            lo.push(0.0);
            hi.push(f64::INFINITY);
            cost.push(0.0);
            artificials.push(aj);
            basis.push(aj);
            phase1_needed = true;
        }
    }
    let total = n + m + artificials.len();
    let mut phase1_cost = vec![0.0; total];
    for &aj in &artificials {
        phase1_cost[aj] = 1.0;
    }
    let mut value_full = value;
    value_full.resize(total, 0.0);

    let mut w = Worker {
        m,
        cols: Columns {
            starts,
            rows: rows_idx,
            vals,
        },
        lo,
        hi,
        cost,
        phase1_cost,
        rhs,
        basis,
        in_basis: Vec::new(),
        value: value_full,
        x_basic: vec![0.0; m],
        etas: Vec::new(),
        pivots_since_refactor: 0,
        work: vec![0.0; m],
        work2: vec![0.0; m],
        opts: opts.clone(),
        iterations: 0,
    };
    w.in_basis = vec![false; total];
    for &b in &w.basis {
        w.in_basis[b] = true;
    }
    w.refactorize()?;
    w.recompute_basic_values();

    if phase1_needed {
        let status = w.optimize(true)?;
        if status == LpStatus::IterationLimit {
            return Ok(w.extract(lp, n, LpStatus::IterationLimit));
        }
        let infeas: f64 = w.phase1_objective();
        if infeas > opts.feas_tol {
            return Ok(w.extract(lp, n, LpStatus::Infeasible));
        }
        // Freeze artificials at zero.
        for aj in total_nonart..total {
            w.lo[aj] = 0.0;
            w.hi[aj] = 0.0;
            if !w.in_basis[aj] {
                w.value[aj] = 0.0;
            }
        }
    }
    let status = w.optimize(false)?;
    Ok(w.extract(lp, n, status))
}

fn unbounded(n: usize) -> LpSolution {
    LpSolution {
        status: LpStatus::Unbounded,
        values: vec![0.0; n],
        objective: f64::INFINITY,
        max_residual: f64::INFINITY,
        iterations: 0,
    }
}

fn col_of<'a>(
    starts: &[usize],
    rows: &'a [usize],
    vals: &'a [f64],
    j: usize,
) -> (&'a [usize], &'a [f64]) {
    (&rows[starts[j]..starts[j + 1]], &vals[starts[j]..starts[j + 1]])
}

impl Worker {
    fn active_cost(&self, phase1: bool, j: usize) -> f64 {
        if phase1 {
            self.phase1_cost[j]
        } else {
            self.cost[j]
        }
    }

    fn phase1_objective(&self) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(k, &j)| self.phase1_cost[j] * self.x_basic[k])
            .sum()
    }

    /// Rebuilds the eta file from the current basis columns, pivoting for
    /// stability; columns processed sparsest-first to limit fill.
    fn refactorize(&mut self) -> Result<()> {
        self.etas.clear();
        self.pivots_since_refactor = 0;
        let m = self.m;
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&k| {
            let j = self.basis[k];
            self.cols.starts[j + 1] - self.cols.starts[j]
        });
        let mut row_taken = vec![false; m];
        let mut new_positions = vec![usize::MAX; m];
        let mut work = vec![0.0; m];
        let mut touched: Vec<usize> = Vec::new();
        for &k in &order {
            let j = self.basis[k];
            // FTRAN the raw column through the etas built so far.
            let (ri, rv) = self.cols.col(j);
            for (&i, &v) in ri.iter().zip(rv) {
                work[i] = v;
                touched.push(i);
            }
            for eta in &self.etas {
                let t = work[eta.pivot];
                if t == 0.0 {
                    continue;
                }
                let t = t / eta.pivot_value;
                work[eta.pivot] = t;
                for &(i, v) in &eta.entries {
                    if work[i] == 0.0 {
                        touched.push(i);
                    }
                    work[i] -= v * t;
                }
            }
            // Pick the largest untaken row as pivot.
            let mut best = 0.0f64;
            let mut pivot = usize::MAX;
            let mut entries = Vec::new();
            for &i in &touched {
                let v = work[i];
                if v != 0.0 && !row_taken[i] && v.abs() > best {
                    best = v.abs();
                    pivot = i;
                }
            }
            if pivot == usize::MAX || best < 1e-11 {
                return Err(Error::Solve(format!(
                    "singular basis at refactorization (column {j})"
                )));
            }
            let pivot_value = work[pivot];
            for &i in &touched {
                if i != pivot && work[i] != 0.0 {
                    entries.push((i, work[i]));
                }
                work[i] = 0.0;
            }
            touched.clear();
            row_taken[pivot] = true;
            new_positions[k] = pivot;
            self.etas.push(Eta {
                pivot,
                pivot_value,
                entries,
            });
        }
        // Reorder basis slots so that slot k owns pivot row given by the
        // eta sequence; the product form keeps the association implicit,
        // but x_basic is indexed by pivot row for the ratio test.
        let mut new_basis = vec![usize::MAX; m];
        for (slot, &k) in order.iter().enumerate() {
            let _ = slot;
            new_basis[new_positions[k]] = self.basis[k];
        }
        self.basis = new_basis;
        Ok(())
    }

    /// x_B = B^{-1} (rhs - N x_N), stored by pivot row.
    fn recompute_basic_values(&mut self) {
        let m = self.m;
        let mut b = self.rhs.clone();
        for j in 0..self.value.len() {
            if self.in_basis[j] || self.value[j] == 0.0 {
                continue;
            }
            let (ri, rv) = self.cols.col(j);
            for (&i, &v) in ri.iter().zip(rv) {
                b[i] -= v * self.value[j];
            }
        }
        self.ftran(&mut b);
        self.x_basic[..m].copy_from_slice(&b[..m]);
    }

    fn ftran(&self, x: &mut [f64]) {
        for eta in &self.etas {
            let t = x[eta.pivot];
            if t == 0.0 {
                continue;
            }
            let t = t / eta.pivot_value;
            x[eta.pivot] = t;
            for &(i, v) in &eta.entries {
                x[i] -= v * t;
            }
        }
    }

    fn btran(&self, x: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut dot = x[eta.pivot];
            for &(i, v) in &eta.entries {
                dot -= v * x[i];
            }
            x[eta.pivot] = dot / eta.pivot_value;
        }
    }

    fn optimize(&mut self, phase1: bool) -> Result<LpStatus> {
        let total = self.value.len();
        let mut stall = 0usize;
        let mut bland = false;
        loop {
            self.iterations += 1;
            if self.iterations > self.opts.max_iterations {
                return Ok(LpStatus::IterationLimit);
            }
            if self.pivots_since_refactor >= self.opts.refactor_every {
                self.refactorize()?;
                self.recompute_basic_values();
            }
            // Duals: y = B^{-T} c_B.
            for k in 0..self.m {
                self.work2[k] = self.active_cost(phase1, self.basis[k]);
            }
            let mut y = std::mem::take(&mut self.work2);
            self.btran(&mut y);

            // Pricing.
            let mut enter = usize::MAX;
            let mut enter_dir = 1.0;
            let mut best_score = self.opts.dual_tol;
            for j in 0..total {
                if self.in_basis[j] || self.lo[j] == self.hi[j] {
                    continue;
                }
                let (ri, rv) = self.cols.col(j);
                let mut d = self.active_cost(phase1, j);
                for (&i, &v) in ri.iter().zip(rv) {
                    d -= y[i] * v;
                }
                let at_lo = self.lo[j].is_finite() && self.value[j] <= self.lo[j];
                let at_hi = self.hi[j].is_finite() && self.value[j] >= self.hi[j];
                let free = !at_lo && !at_hi;
                let (improving, dir, score) = if free {
                    (d.abs() > self.opts.dual_tol, if d > 0.0 { -1.0 } else { 1.0 }, d.abs())
                } else if at_lo {
                    (d < -self.opts.dual_tol, 1.0, -d)
                } else {
                    (d > self.opts.dual_tol, -1.0, d)
                };
                if improving {
                    if bland {
                        enter = j;
                        enter_dir = dir;
                        break;
                    }
                    if score > best_score {
                        best_score = score;
                        enter = j;
                        enter_dir = dir;
                    }
                }
            }
            self.work2 = y;
            if enter == usize::MAX {
                return Ok(LpStatus::Optimal);
            }

            // Column update direction.
            let m = self.m;
            self.work.iter_mut().for_each(|v| *v = 0.0);
            {
                let (ri, rv) = self.cols.col(enter);
                for (&i, &v) in ri.iter().zip(rv) {
                    self.work[i] = v;
                }
            }
            let mut wcol = std::mem::take(&mut self.work);
            self.ftran(&mut wcol);
            self.work = wcol;

            // Two-pass ratio test: find the tightest step, then pick the
            // largest pivot among rows blocking within a small slack of
            // it (Bland mode: the lowest variable index instead).
            let flip_cap = if self.lo[enter].is_finite() && self.hi[enter].is_finite() {
                self.hi[enter] - self.lo[enter]
            } else {
                f64::INFINITY
            };
            let ratio_of = |i: usize, w: &[f64], x_basic: &[f64]| -> Option<(f64, bool)> {
                let wi = w[i];
                if wi.abs() <= self.opts.pivot_tol {
                    return None;
                }
                let bj = self.basis[i];
                let delta = enter_dir * wi;
                let (limit, to_hi) = if delta > 0.0 {
                    (self.lo[bj], false)
                } else {
                    (self.hi[bj], true)
                };
                if !limit.is_finite() {
                    return None;
                }
                let room = if delta > 0.0 {
                    x_basic[i] - limit
                } else {
                    limit - x_basic[i]
                };
                Some(((room / delta.abs()).max(0.0), to_hi))
            };
            let mut t_min = flip_cap;
            for i in 0..m {
                if let Some((t_i, _)) = ratio_of(i, &self.work, &self.x_basic) {
                    t_min = t_min.min(t_i);
                }
            }
            let slack = 1e-9 * (1.0 + t_min.abs());
            let mut t_max = flip_cap;
            let mut leave = usize::MAX; // pivot row
            let mut leave_to_hi = false;
            let mut best_pivot = 0.0f64;
            for i in 0..m {
                if let Some((t_i, to_hi)) = ratio_of(i, &self.work, &self.x_basic) {
                    if t_i > t_min + slack {
                        continue;
                    }
                    let wi_abs = self.work[i].abs();
                    let better = if bland {
                        leave == usize::MAX || self.basis[i] < self.basis[leave]
                    } else {
                        wi_abs > best_pivot
                    };
                    if better {
                        t_max = t_i;
                        leave = i;
                        leave_to_hi = to_hi;
                        best_pivot = wi_abs;
                    }
                }
            }
            if leave != usize::MAX {
                // Never step past the strict minimum ratio by more than
                // the slack; clamp to keep feasibility drift bounded.
                t_max = t_max.min(t_min.max(0.0));
            }

            if t_max.is_infinite() {
                return Ok(if phase1 {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Unbounded
                });
            }

            if t_max <= 1e-12 {
                stall += 1;
                if stall >= self.opts.stall_limit {
                    bland = true;
                }
            } else {
                stall = 0;
                bland = false;
            }

            // Apply the step.
            let step = enter_dir * t_max;
            if leave == usize::MAX {
                // Bound flip: entering runs to its other bound.
                self.value[enter] += step;
                for i in 0..m {
                    if self.work[i] != 0.0 {
                        self.x_basic[i] -= self.work[i] * step;
                    }
                }
                continue;
            }
            let leaving_var = self.basis[leave];
            for i in 0..m {
                if self.work[i] != 0.0 {
                    self.x_basic[i] -= self.work[i] * step;
                }
            }
            let entering_value = self.value[enter] + step;
            self.value[leaving_var] = if leave_to_hi {
                self.hi[leaving_var]
            } else {
                self.lo[leaving_var]
            };
            self.in_basis[leaving_var] = false;
            self.in_basis[enter] = true;
            self.basis[leave] = enter;
            self.x_basic[leave] = entering_value;
            // Append the pivot eta.
            let mut entries = Vec::new();
            for i in 0..m {
                if i != leave && self.work[i] != 0.0 {
                    entries.push((i, self.work[i]));
                }
            }
            self.etas.push(Eta {
                pivot: leave,
                pivot_value: self.work[leave],
                entries,
            });
            self.pivots_since_refactor += 1;
        }
    }

    fn extract(&mut self, lp: &LinearProgram, n: usize, status: LpStatus) -> LpSolution {
        // Refresh for an accurate reading.
        if status == LpStatus::Optimal {
            if self.refactorize().is_ok() {
                self.recompute_basic_values();
            }
        }
        let mut values = vec![0.0; self.value.len()];
        values.copy_from_slice(&self.value);
        for (k, &j) in self.basis.iter().enumerate() {
            values[j] = self.x_basic[k];
        }
        let values: Vec<f64> = values[..n].to_vec();
        let objective = lp.objective_value(&values);
        LpSolution {
            status,
            max_residual: lp.residual(&values),
            objective,
            values,
            iterations: self.iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{LinearProgram, Relation};

    #[test]
    fn two_variable_max() {
        let mut lp = LinearProgram::new(true);
        let x = lp.add_nonneg("x", 1.0);
        let y = lp.add_nonneg("y", 1.0);
        lp.add_row("cap", Relation::Le, 1.0, vec![(x, 1.0), (y, 1.0)])
            .unwrap();
        let sol = solve(&lp, &SimplexOptions::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-9);
        assert!(sol.max_residual < 1e-9);
    }

    #[test]
    fn equality_and_free_vars() {
        // min z s.t. z = x - y, x + y = 1, x,y >= 0; optimum z = -1.
        let mut lp = LinearProgram::new(false);
        let x = lp.add_nonneg("x", 0.0);
        let y = lp.add_nonneg("y", 0.0);
        let z = lp.add_free("z", 1.0);
        lp.add_row("def", Relation::Eq, 0.0, vec![(z, 1.0), (x, -1.0), (y, 1.0)])
            .unwrap();
        lp.add_row("sum", Relation::Eq, 1.0, vec![(x, 1.0), (y, 1.0)])
            .unwrap();
        let sol = solve(&lp, &SimplexOptions::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective + 1.0).abs() < 1e-9, "{}", sol.objective);
    }

    #[test]
    fn infeasible_detected() {
        let mut lp = LinearProgram::new(false);
        let x = lp.add_nonneg("x", 1.0);
        lp.add_row("a", Relation::Ge, 2.0, vec![(x, 1.0)]).unwrap();
        lp.add_row("b", Relation::Le, 1.0, vec![(x, 1.0)]).unwrap();
        let sol = solve(&lp, &SimplexOptions::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::new(true);
        let x = lp.add_nonneg("x", 1.0);
        let y = lp.add_nonneg("y", 0.0);
        lp.add_row("a", Relation::Ge, 0.0, vec![(x, 1.0), (y, -1.0)])
            .unwrap();
        let sol = solve(&lp, &SimplexOptions::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    /// Brute-force vertex enumeration oracle for small LPs with finite
    /// bounds: try every choice of active constraint set.
    fn brute_force_best(lp: &LinearProgram, maximize: bool) -> Option<f64> {
        let n = lp.num_vars();
        // Enumerate candidate vertices: intersections of n constraints
        // drawn from {rows as equalities} + {bounds}. For tiny n and m we
        // can sample all subsets of rows, fixing remaining vars to bounds.
        let rows = lp.rows();
        let m = rows.len();
        let mut best: Option<f64> = None;
        // Iterate over which rows are tight and which vars sit at which
        // bound: brute force over bound patterns (3^n: lo, hi, or solved).
        let mut pattern = vec![0u8; n];
        loop {
            // Solve the system: tight rows over the "solved" vars.
            let solved: Vec<usize> = (0..n).filter(|&j| pattern[j] == 2).collect();
            if solved.len() <= m {
                // choose subsets of rows of size solved.len()
                let row_ids: Vec<usize> = (0..m).collect();
                for combo in combinations(&row_ids, solved.len()) {
                    let k = solved.len();
                    let mut a = vec![vec![0.0; k]; k];
                    let mut b = vec![0.0; k];
                    for (r, &ri) in combo.iter().enumerate() {
                        b[r] = rows[ri].rhs;
                        for &(v, c) in &rows[ri].terms {
                            let vj = v as usize;
                            if let Some(p) = solved.iter().position(|&s| s == vj) {
                                a[r][p] += c;
                            } else {
                                let bound = if pattern[vj] == 0 {
                                    lp.vars()[vj].lo
                                } else {
                                    lp.vars()[vj].hi
                                };
                                b[r] -= c * bound;
                            }
                        }
                    }
                    if let Some(x) = dense_solve(a, b) {
                        let mut full = vec![0.0; n];
                        for j in 0..n {
                            full[j] = match pattern[j] {
                                0 => lp.vars()[j].lo,
                                1 => lp.vars()[j].hi,
                                _ => x[solved.iter().position(|&s| s == j).unwrap()],
                            };
                        }
                        if lp.residual(&full) < 1e-7 {
                            let obj = lp.objective_value(&full);
                            best = Some(match best {
                                None => obj,
                                Some(b0) => {
                                    if maximize {
                                        b0.max(obj)
                                    } else {
                                        b0.min(obj)
                                    }
                                }
                            });
                        }
                    }
                }
            }
            // Next pattern.
            let mut j = 0;
            loop {
                if j == n {
                    return best;
                }
                pattern[j] += 1;
                if pattern[j] == 3 {
                    pattern[j] = 0;
                    j += 1;
                } else {
                    break;
                }
            }
        }
    }

    fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![Vec::new()];
        }
        if items.len() < k {
            return Vec::new();
        }
        let mut out = Vec::new();
        for (pos, &first) in items.iter().enumerate() {
            for mut rest in combinations(&items[pos + 1..], k - 1) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
        out
    }

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let k = b.len();
        for col in 0..k {
            let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
            if a[piv][col].abs() < 1e-10 {
                return None;
            }
            a.swap(col, piv);
            b.swap(col, piv);
            for r in 0..k {
                if r != col && a[r][col] != 0.0 {
                    let f = a[r][col] / a[col][col];
                    for c in col..k {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
        Some((0..k).map(|i| b[i] / a[i][i]).collect())
    }

    #[test]
    fn random_lps_match_vertex_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for case in 0..60 {
            let n = rng.gen_range(1..=3);
            let m = rng.gen_range(1..=3);
            let maximize = rng.gen_bool(0.5);
            let mut lp = LinearProgram::new(maximize);
            for j in 0..n {
                let lo = 0.0;
                let hi = rng.gen_range(1.0..3.0);
                let obj = rng.gen_range(-2.0..2.0);
                lp.add_var(format!("x{j}"), lo, hi, obj);
            }
            for i in 0..m {
                let rel = match rng.gen_range(0..3) {
                    0 => Relation::Le,
                    1 => Relation::Ge,
                    _ => Relation::Eq,
                };
                let terms: Vec<_> = (0..n)
                    .map(|j| (j as u32, rng.gen_range(-2.0..2.0)))
                    .collect();
                let rhs = rng.gen_range(-1.0..2.0);
                lp.add_row(format!("r{i}"), rel, rhs, terms).unwrap();
            }
            let sol = solve(&lp, &SimplexOptions::default()).unwrap();
            let brute = brute_force_best(&lp, maximize);
            match (sol.status, brute) {
                (LpStatus::Optimal, Some(b)) => {
                    assert!(
                        (sol.objective - b).abs() <= 1e-6 * (1.0 + b.abs()),
                        "case {case}: simplex {} vs brute {b}",
                        sol.objective
                    );
                    assert!(sol.max_residual < 1e-7);
                }
                (LpStatus::Infeasible, None) => {}
                (LpStatus::Optimal, None) => {
                    // Vertex enumeration with equality rows can miss
                    // interior-bound patterns only when dependent; accept
                    // a verified-feasible simplex answer.
                    assert!(sol.max_residual < 1e-7, "case {case}");
                }
                (s, b) => panic!("case {case}: simplex {s:?} vs brute {b:?}"),
            }
        }
    }
}
