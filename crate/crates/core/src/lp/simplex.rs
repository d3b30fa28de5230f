//! Dense two-phase tableau simplex.
//!
//! Variables are shifted/split to be non-negative, finite upper bounds become
//! rows, and every row gets a slack or an artificial. Pricing is Dantzig's
//! rule, switching to Bland's rule while pivots stay degenerate so the method
//! cannot cycle.

use super::{Comparator, LinearProgram, LpOutcome, LpSolver, Sense};
use crate::error::{Error, Result};

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 25;

#[derive(Clone, Debug)]
pub struct DenseSimplex {
    /// Smallest pivot element and reduced cost treated as non-zero.
    pub pivot_tol: f64,
    /// Relative phase-one residual above which the program is infeasible.
    pub feas_tol: f64,
    pub max_iters: usize,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        DenseSimplex {
            pivot_tol: 1e-9,
            feas_tol: 1e-7,
            max_iters: 200_000,
        }
    }
}

/// How an original variable is expressed through non-negative columns.
#[derive(Clone, Copy, Debug)]
enum ColMap {
    /// `x = lower + col`
    Shift { col: usize, lower: f64 },
    /// `x = upper - col`
    Neg { col: usize, upper: f64 },
    /// `x = pos - neg`
    Split { pos: usize, neg: usize },
}

struct Tableau {
    rows: usize,
    /// Total number of columns (excluding the right-hand side).
    cols: usize,
    a: Vec<f64>,
    basis: Vec<usize>,
    /// Reduced costs; the last entry is minus the objective value.
    obj: Vec<f64>,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl Tableau {
    #[inline]
    fn width(&self) -> usize {
        self.cols + 1
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.width() + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn set_costs(&mut self, c: &[f64]) {
        let w = self.width();
        self.obj = c.to_vec();
        self.obj.push(0.0);
        for i in 0..self.rows {
            let cb = c[self.basis[i]];
            if cb != 0.0 {
                let row = &self.a[i * w..(i + 1) * w];
                for (o, &v) in self.obj.iter_mut().zip(row) {
                    *o -= cb * v;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width();
        let p = self.at(r, c);
        let (before, rest) = self.a.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        prow.iter_mut().for_each(|v| *v /= p);
        prow[c] = 1.0;
        let nz: Vec<usize> = (0..w).filter(|&j| prow[j] != 0.0).collect();
        let eliminate = |row: &mut [f64]| {
            let f = row[c];
            if f != 0.0 {
                for &j in &nz {
                    row[j] -= f * prow[j];
                }
                row[c] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        eliminate(&mut self.obj);
        self.basis[r] = c;
    }

    fn run(&mut self, allowed: &[bool], solver: &DenseSimplex, iters: &mut usize) -> Result<Phase> {
        let tol = solver.pivot_tol;
        let mut streak = 0;
        loop {
            let bland = streak >= DEGENERATE_STREAK;
            let mut enter = None;
            let mut best = -tol;
            for j in 0..self.cols {
                if allowed[j] && self.obj[j] < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = self.obj[j];
                }
            }
            let Some(c) = enter else {
                return Ok(Phase::Optimal);
            };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, c);
                if a <= tol {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, best)) => {
                        let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs());
                        let better = if tie {
                            if bland {
                                self.basis[i] < self.basis[k]
                            } else {
                                a > self.at(k, c)
                            }
                        } else {
                            ratio < best
                        };
                        if better {
                            Some((i, ratio))
                        } else {
                            Some((k, best))
                        }
                    }
                };
            }
            let Some((r, step)) = leave else {
                return Ok(Phase::Unbounded);
            };
            streak = if step <= tol { streak + 1 } else { 0 };
            self.pivot(r, c);
            *iters += 1;
            if *iters > solver.max_iters {
                return Err(Error::Numerical(format!(
                    "simplex iteration limit ({}) reached",
                    solver.max_iters
                )));
            }
        }
    }
}

/// Standard-form image of a [`LinearProgram`] plus an optimal basis, kept so
/// rows appended to the program later can be re-optimised with dual simplex
/// instead of solving from scratch.
pub struct WarmStart {
    t: Tableau,
    maps: Vec<ColMap>,
    allowed: Vec<bool>,
    rows_seen: usize,
    objective: Vec<f64>,
    sense: Sense,
}

impl std::fmt::Debug for WarmStart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WarmStart")
            .field("rows", &self.t.rows)
            .field("cols", &self.t.cols)
            .field("rows_seen", &self.rows_seen)
            .finish()
    }
}

/// Row over structural columns after substituting the column maps.
fn map_row(maps: &[ColMap], coeffs: &[(usize, f64)], rhs: f64) -> (Vec<(usize, f64)>, f64) {
    let mut out = Vec::with_capacity(coeffs.len() + 1);
    let mut rhs = rhs;
    for &(j, a) in coeffs {
        match maps[j] {
            ColMap::Shift { col, lower } => {
                rhs -= a * lower;
                out.push((col, a));
            }
            ColMap::Neg { col, upper } => {
                rhs -= a * upper;
                out.push((col, -a));
            }
            ColMap::Split { pos, neg } => {
                out.push((pos, a));
                out.push((neg, -a));
            }
        }
    }
    (out, rhs)
}

impl DenseSimplex {
    /// Solves from scratch, returning the final basis when optimal.
    pub fn solve_warm(&self, lp: &LinearProgram) -> Result<(LpOutcome, Option<WarmStart>)> {
        // columns for the original variables
        let mut maps = Vec::with_capacity(lp.num_vars());
        let mut ncols = 0;
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        for v in lp.variables() {
            let map = if v.lower.is_finite() {
                if v.upper.is_finite() {
                    bound_rows.push((ncols, v.upper - v.lower));
                }
                ColMap::Shift {
                    col: ncols,
                    lower: v.lower,
                }
            } else if v.upper.is_finite() {
                ColMap::Neg {
                    col: ncols,
                    upper: v.upper,
                }
            } else {
                ncols += 1;
                ColMap::Split {
                    pos: ncols - 1,
                    neg: ncols,
                }
            };
            ncols += 1;
            maps.push(map);
        }
        let nstruct = ncols;

        // rows over the structural columns, with non-negative right-hand sides
        let mut rows: Vec<(Vec<(usize, f64)>, Comparator, f64)> = lp
            .constraints()
            .iter()
            .map(|r| {
                let (coeffs, rhs) = map_row(&maps, &r.coeffs, r.rhs);
                (coeffs, r.cmp, rhs)
            })
            .collect();
        for &(col, width) in &bound_rows {
            rows.push((vec![(col, 1.0)], Comparator::Le, width));
        }
        for row in rows.iter_mut() {
            if row.2 < 0.0 {
                row.0.iter_mut().for_each(|e| e.1 = -e.1);
                row.2 = -row.2;
                row.1 = match row.1 {
                    Comparator::Le => Comparator::Ge,
                    Comparator::Ge => Comparator::Le,
                    Comparator::Eq => Comparator::Eq,
                };
            }
        }

        let m = rows.len();
        let nslack = rows.iter().filter(|r| r.1 != Comparator::Eq).count();
        let nart = rows.iter().filter(|r| r.1 != Comparator::Le).count();
        let cols = nstruct + nslack + nart;
        let width = cols + 1;
        let mut t = Tableau {
            rows: m,
            cols,
            a: vec![0.0; m * width],
            basis: vec![0; m],
            obj: Vec::new(),
        };
        let (mut next_slack, mut next_art) = (nstruct, nstruct + nslack);
        let mut max_rhs: f64 = 0.0;
        for (i, (coeffs, cmp, rhs)) in rows.iter().enumerate() {
            let row = &mut t.a[i * width..(i + 1) * width];
            for &(j, a) in coeffs {
                row[j] += a;
            }
            row[cols] = *rhs;
            max_rhs = max_rhs.max(rhs.abs());
            match cmp {
                Comparator::Le => {
                    row[next_slack] = 1.0;
                    t.basis[i] = next_slack;
                    next_slack += 1;
                }
                Comparator::Ge => {
                    row[next_slack] = -1.0;
                    next_slack += 1;
                    row[next_art] = 1.0;
                    t.basis[i] = next_art;
                    next_art += 1;
                }
                Comparator::Eq => {
                    row[next_art] = 1.0;
                    t.basis[i] = next_art;
                    next_art += 1;
                }
            }
        }

        let first_art = nstruct + nslack;
        let mut iters = 0;
        if nart > 0 {
            let mut c = vec![0.0; cols];
            c[first_art..].iter_mut().for_each(|v| *v = 1.0);
            t.set_costs(&c);
            t.run(&vec![true; cols], self, &mut iters)?;
            let residual = -t.obj[cols];
            if residual > self.feas_tol * (1.0 + max_rhs) {
                return Ok((LpOutcome::Infeasible, None));
            }
            // drive artificials out of the basis where possible
            for i in 0..m {
                if t.basis[i] >= first_art {
                    let mut best: Option<(usize, f64)> = None;
                    for j in 0..first_art {
                        let a = t.at(i, j).abs();
                        if a > self.pivot_tol && best.is_none_or(|(_, b)| a > b) {
                            best = Some((j, a));
                        }
                    }
                    if let Some((j, _)) = best {
                        t.pivot(i, j);
                    }
                }
            }
        }

        let allowed: Vec<bool> = (0..cols).map(|j| j < first_art).collect();
        t.set_costs(&structural_costs(lp, &maps, cols));
        if let Phase::Unbounded = t.run(&allowed, self, &mut iters)? {
            return Ok((LpOutcome::Unbounded, None));
        }
        let ws = WarmStart {
            t,
            maps,
            allowed,
            rows_seen: lp.num_constraints(),
            objective: lp.objective().to_vec(),
            sense: lp.sense(),
        };
        Ok((extract(lp, &ws), Some(ws)))
    }

    /// Re-optimises after rows were appended to `lp` since `ws` was produced.
    /// Falls back to a cold solve when the objective, sense or variables
    /// changed, or when the dual simplex runs into trouble.
    pub fn reoptimize(&self, lp: &LinearProgram, ws: &mut Option<WarmStart>) -> Result<LpOutcome> {
        let usable = ws.as_ref().is_some_and(|w| {
            w.objective == lp.objective()
                && w.sense == lp.sense()
                && w.maps.len() == lp.num_vars()
                && w.rows_seen <= lp.num_constraints()
        });
        if usable {
            let w = ws.as_mut().expect("checked above");
            if let Some(outcome) = self.dual_reoptimize(lp, w)? {
                return Ok(outcome);
            }
        }
        let (outcome, fresh) = self.solve_warm(lp)?;
        *ws = fresh;
        Ok(outcome)
    }

    /// `None` asks the caller for a cold solve.
    fn dual_reoptimize(&self, lp: &LinearProgram, w: &mut WarmStart) -> Result<Option<LpOutcome>> {
        let mut new_rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        for r in &lp.constraints()[w.rows_seen..] {
            let (coeffs, rhs) = map_row(&w.maps, &r.coeffs, r.rhs);
            let neg = || (coeffs.iter().map(|&(j, a)| (j, -a)).collect::<Vec<_>>(), -rhs);
            match r.cmp {
                Comparator::Le => new_rows.push((coeffs.clone(), rhs)),
                Comparator::Ge => new_rows.push(neg()),
                Comparator::Eq => {
                    new_rows.push((coeffs.clone(), rhs));
                    new_rows.push(neg());
                }
            }
        }
        if new_rows.is_empty() {
            w.rows_seen = lp.num_constraints();
            return Ok(Some(extract(lp, w)));
        }

        // widen the tableau by one slack column per new row
        let old = &w.t;
        let k = new_rows.len();
        let cols = old.cols + k;
        let width = cols + 1;
        let m = old.rows + k;
        let mut a = vec![0.0; m * width];
        for i in 0..old.rows {
            let src = &old.a[i * old.width()..(i + 1) * old.width()];
            a[i * width..i * width + old.cols].copy_from_slice(&src[..old.cols]);
            a[i * width + cols] = src[old.cols];
        }
        let mut basis = old.basis.clone();
        let mut obj = old.obj[..old.cols].to_vec();
        obj.extend(std::iter::repeat_n(0.0, k));
        obj.push(old.obj[old.cols]);
        for (r, (coeffs, rhs)) in new_rows.iter().enumerate() {
            let i = old.rows + r;
            let (done, rest) = a.split_at_mut(i * width);
            let row = &mut rest[..width];
            for &(j, v) in coeffs {
                row[j] += v;
            }
            row[old.cols + r] = 1.0;
            row[cols] = *rhs;
            // express in terms of the current non-basic columns
            for (p, &bc) in basis.iter().enumerate() {
                let f = row[bc];
                if f != 0.0 {
                    let src = &done[p * width..(p + 1) * width];
                    for (x, s) in row.iter_mut().zip(src) {
                        *x -= f * s;
                    }
                    row[bc] = 0.0;
                }
            }
            basis.push(old.cols + r);
        }
        w.t = Tableau {
            rows: m,
            cols,
            a,
            basis,
            obj,
        };
        w.allowed.extend(std::iter::repeat_n(true, k));
        w.rows_seen = lp.num_constraints();

        // dual simplex: restore primal feasibility keeping reduced costs >= 0
        let t = &mut w.t;
        let mut iters = 0;
        loop {
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..t.rows {
                let b = t.rhs(i);
                if b < -self.pivot_tol && leave.is_none_or(|(_, v)| b < v) {
                    leave = Some((i, b));
                }
            }
            let Some((r, _)) = leave else { break };
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..t.cols {
                let arj = t.at(r, j);
                if !w.allowed[j] || arj >= -self.pivot_tol {
                    continue;
                }
                let ratio = t.obj[j].max(0.0) / -arj;
                if enter.is_none_or(|(_, v)| ratio < v) {
                    enter = Some((j, ratio));
                }
            }
            let Some((c, _)) = enter else {
                // a row that cannot be repaired proves infeasibility, but
                // confirm with a cold solve rather than trusting drift
                return Ok(None);
            };
            t.pivot(r, c);
            iters += 1;
            if iters > self.max_iters {
                return Ok(None);
            }
        }
        // clean up reduced costs that drifted negative
        let mut primal_iters = 0;
        match t.run(&w.allowed, self, &mut primal_iters) {
            Ok(Phase::Optimal) => Ok(Some(extract(lp, w))),
            _ => Ok(None),
        }
    }
}

fn structural_costs(lp: &LinearProgram, maps: &[ColMap], cols: usize) -> Vec<f64> {
    let mut c = vec![0.0; cols];
    let sign = match lp.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    for (j, map) in maps.iter().enumerate() {
        let cj = sign * lp.objective()[j];
        match *map {
            ColMap::Shift { col, .. } => c[col] = cj,
            ColMap::Neg { col, .. } => c[col] = -cj,
            ColMap::Split { pos, neg } => {
                c[pos] = cj;
                c[neg] = -cj;
            }
        }
    }
    c
}

fn extract(lp: &LinearProgram, w: &WarmStart) -> LpOutcome {
    let t = &w.t;
    let mut val = vec![0.0; t.cols];
    for i in 0..t.rows {
        val[t.basis[i]] = t.rhs(i).max(0.0);
    }
    let point: Vec<f64> = w
        .maps
        .iter()
        .zip(lp.variables())
        .map(|(map, v)| {
            let x = match *map {
                ColMap::Shift { col, lower } => lower + val[col],
                ColMap::Neg { col, upper } => upper - val[col],
                ColMap::Split { pos, neg } => val[pos] - val[neg],
            };
            x.clamp(v.lower, v.upper)
        })
        .collect();
    LpOutcome::Optimal {
        value: lp.objective_value(&point),
        point,
    }
}

impl LpSolver for DenseSimplex {
    fn solve(&self, lp: &LinearProgram) -> Result<LpOutcome> {
        Ok(self.solve_warm(lp)?.0)
    }
}
