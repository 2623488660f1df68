//! Dense linear programming.
//!
//! Problems are `min c.x` subject to `A x >= b` and per-variable bounds.
//! The solver shifts bounded variables and splits free ones to reach
//! `min c'.z, A' z >= b', z >= 0`, then runs a two-phase tableau simplex on
//! the dual `max b'.y, A'^T y <= c', y >= 0`. The dual has one row per
//! primal variable, so programs with few variables and many constraints
//! (the ALP shape) stay cheap. Primal values are read off the reduced
//! costs of the dual slack columns.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VarBound {
    Free,
    /// `lo <= x <= hi`; either end may be infinite.
    Boxed { lo: f64, hi: f64 },
}

impl VarBound {
    pub const NONNEG: VarBound = VarBound::Boxed {
        lo: 0.0,
        hi: f64::INFINITY,
    };
}

/// `min objective.x` subject to `rows[k].x >= rhs[k]` and `bounds`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub bounds: Vec<VarBound>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, bounds: Vec<VarBound>) -> Result<Self> {
        if objective.len() != bounds.len() {
            return Err(Error::validation(format!(
                "{} objective coefficients for {} variables",
                objective.len(),
                bounds.len()
            )));
        }
        Ok(LinearProgram {
            objective,
            rows: Vec::new(),
            rhs: Vec::new(),
            bounds,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Adds `coeffs.x >= rhs`.
    pub fn add_row(&mut self, coeffs: Vec<f64>, rhs: f64) -> Result<()> {
        if coeffs.len() != self.num_vars() {
            return Err(Error::validation(format!(
                "constraint has {} coefficients, program has {} variables",
                coeffs.len(),
                self.num_vars()
            )));
        }
        self.rows.push(coeffs);
        self.rhs.push(rhs);
        Ok(())
    }

    fn check(&self) -> Result<()> {
        if self.rows.len() != self.rhs.len()
            || self.rows.iter().any(|r| r.len() != self.num_vars())
            || self.bounds.len() != self.num_vars()
        {
            return Err(Error::validation("linear program dimensions are inconsistent"));
        }
        for b in &self.bounds {
            if let VarBound::Boxed { lo, hi } = *b {
                if lo.is_nan() || hi.is_nan() || lo > hi {
                    return Err(Error::validation(format!("invalid bound [{lo}, {hi}]")));
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .rows
            .iter()
            .zip(&self.rhs)
            .map(|(r, &b)| b - dot(r, x))
            .fold(0.0, f64::max);
        let bounds = self
            .bounds
            .iter()
            .zip(x)
            .map(|(b, &v)| match *b {
                VarBound::Free => 0.0,
                VarBound::Boxed { lo, hi } => (lo - v).max(v - hi),
            })
            .fold(0.0, f64::max);
        rows.max(bounds)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// How an original variable is expressed in nonnegative columns.
enum Column {
    /// `x = offset + sign * z[col]`
    Shifted { col: usize, offset: f64, sign: f64 },
    /// `x = z[pos] - z[neg]`
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    cost: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    columns: Vec<Column>,
}

fn standardize(lp: &LinearProgram) -> StandardForm {
    let mut columns = Vec::with_capacity(lp.num_vars());
    let mut ncols = 0;
    let mut upper_rows = Vec::new();
    for b in &lp.bounds {
        let (lo, hi) = match *b {
            VarBound::Free => (f64::NEG_INFINITY, f64::INFINITY),
            VarBound::Boxed { lo, hi } => (lo, hi),
        };
        if lo.is_finite() {
            if hi.is_finite() {
                upper_rows.push((ncols, hi - lo));
            }
            columns.push(Column::Shifted {
                col: ncols,
                offset: lo,
                sign: 1.0,
            });
            ncols += 1;
        } else if hi.is_finite() {
            columns.push(Column::Shifted {
                col: ncols,
                offset: hi,
                sign: -1.0,
            });
            ncols += 1;
        } else {
            columns.push(Column::Split {
                pos: ncols,
                neg: ncols + 1,
            });
            ncols += 2;
        }
    }
    let map_row = |coeffs: &[f64], rhs: f64| {
        let mut row = vec![0.0; ncols];
        let mut shift = 0.0;
        for (c, col) in coeffs.iter().zip(&columns) {
            match *col {
                Column::Shifted { col, offset, sign } => {
                    row[col] += sign * c;
                    shift += c * offset;
                }
                Column::Split { pos, neg } => {
                    row[pos] += c;
                    row[neg] -= c;
                }
            }
        }
        (row, rhs - shift)
    };
    let (cost, _) = map_row(&lp.objective, 0.0);
    let mut rows = Vec::with_capacity(lp.num_rows() + upper_rows.len());
    let mut rhs = Vec::with_capacity(rows.capacity());
    for (r, &b) in lp.rows.iter().zip(&lp.rhs) {
        let (row, b) = map_row(r, b);
        rows.push(row);
        rhs.push(b);
    }
    for (col, width) in upper_rows {
        let mut row = vec![0.0; ncols];
        row[col] = -1.0;
        rows.push(row);
        rhs.push(-width);
    }
    StandardForm {
        cost,
        rows,
        rhs,
        columns,
    }
}

const PIVOT_TOL: f64 = 1e-9;

/// Dense tableau for `T z = rhs`, with the objective row kept last.
struct Tableau {
    nrows: usize,
    ncols: usize,
    /// Row-major, `(nrows + 1) x (ncols + 1)`; the last column is the right-hand side.
    data: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.ncols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.ncols)
    }

    fn obj_row(&self) -> &[f64] {
        let w = self.ncols + 1;
        &self.data[self.nrows * w..(self.nrows + 1) * w]
    }

    /// Sets the objective row to the reduced costs of `cost` for the current basis.
    fn price(&mut self, cost: &[f64]) {
        let w = self.ncols + 1;
        let mut obj = vec![0.0; w];
        obj[..self.ncols].copy_from_slice(cost);
        for r in 0..self.nrows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.data[r * w..(r + 1) * w];
                for (o, v) in obj.iter_mut().zip(row) {
                    *o -= cb * v;
                }
            }
        }
        self.data[self.nrows * w..].copy_from_slice(&obj);
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.ncols + 1;
        let p = self.data[pr * w + pc];
        for v in &mut self.data[pr * w..(pr + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for r in 0..=self.nrows {
            if r == pr {
                continue;
            }
            let f = self.data[r * w + pc];
            if f != 0.0 {
                for (v, pv) in self.data[r * w..(r + 1) * w].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.data[r * w + pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
        self.iterations += 1;
    }

    /// Minimizes the priced objective over columns with `allowed[c]`.
    fn optimize(&mut self, allowed: &[bool], tol: f64, max_iters: usize) -> LpStatus {
        let bland_after = 10 * (self.nrows + self.ncols);
        let start = self.iterations;
        loop {
            let done = self.iterations - start;
            if done >= max_iters {
                return LpStatus::IterationLimit;
            }
            let bland = done >= bland_after;
            let obj = self.obj_row();
            let mut enter = None;
            let mut most = -tol;
            for c in 0..self.ncols {
                if !allowed[c] || obj[c] >= -tol {
                    continue;
                }
                if bland {
                    enter = Some(c);
                    break;
                }
                if obj[c] < most {
                    most = obj[c];
                    enter = Some(c);
                }
            }
            let Some(pc) = enter else {
                return LpStatus::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.nrows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    let better = match leave {
                        None => true,
                        Some((lr, best)) => {
                            ratio < best - 1e-12
                                || (ratio <= best + 1e-12 && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            match leave {
                Some((pr, _)) => self.pivot(pr, pc),
                None => return LpStatus::Unbounded,
            }
        }
    }
}

/// Outcome of `min cost.v` over `{v >= 0 : T v = rhs}` where `T = [A'^T | I]`.
struct DualOutcome {
    status: LpStatus,
    /// Reduced costs of the identity (slack) columns, i.e. the primal point.
    primal: Vec<f64>,
    iterations: usize,
}

/// Solves `max b.y` s.t. `a^T y <= c`, `y >= 0`, for `a` given as rows.
fn solve_dual(rows: &[Vec<f64>], b: &[f64], c: &[f64], tol: f64) -> DualOutcome {
    let nvar = c.len();
    let ncons = rows.len();
    let neg_rows: Vec<usize> = (0..nvar).filter(|&j| c[j] < 0.0).collect();
    let n_art = neg_rows.len();
    let ncols = ncons + nvar + n_art;
    let w = ncols + 1;
    let mut data = vec![0.0; (nvar + 1) * w];
    let mut basis = vec![0; nvar];
    let mut art_of_row = vec![usize::MAX; nvar];
    for (k, &j) in neg_rows.iter().enumerate() {
        art_of_row[j] = ncons + nvar + k;
    }
    for j in 0..nvar {
        let sign = if c[j] < 0.0 { -1.0 } else { 1.0 };
        let row = &mut data[j * w..(j + 1) * w];
        for (k, r) in rows.iter().enumerate() {
            row[k] = sign * r[j];
        }
        row[ncons + j] = sign;
        row[ncols] = sign * c[j];
        if art_of_row[j] != usize::MAX {
            row[art_of_row[j]] = 1.0;
            basis[j] = art_of_row[j];
        } else {
            basis[j] = ncons + j;
        }
    }
    let mut t = Tableau {
        nrows: nvar,
        ncols,
        data,
        basis,
        iterations: 0,
    };
    let max_iters = 50 * (nvar + ncols) + 1000;

    if n_art > 0 {
        let mut cost1 = vec![0.0; ncols];
        for c in cost1.iter_mut().skip(ncons + nvar) {
            *c = 1.0;
        }
        t.price(&cost1);
        let allowed = vec![true; ncols];
        let status = t.optimize(&allowed, tol, max_iters);
        if status == LpStatus::IterationLimit {
            return DualOutcome {
                status,
                primal: Vec::new(),
                iterations: t.iterations,
            };
        }
        let infeasibility: f64 = (0..nvar)
            .filter(|&r| t.basis[r] >= ncons + nvar)
            .map(|r| t.rhs(r))
            .sum();
        if infeasibility > tol.max(1e-9) {
            // No dual feasible point: the primal is infeasible or unbounded.
            return DualOutcome {
                status: LpStatus::Unbounded,
                primal: Vec::new(),
                iterations: t.iterations,
            };
        }
        for r in 0..nvar {
            if t.basis[r] >= ncons + nvar {
                if let Some(c) = (0..ncons + nvar).find(|&c| t.at(r, c).abs() > PIVOT_TOL) {
                    t.pivot(r, c);
                }
            }
        }
    }

    let mut cost2 = vec![0.0; ncols];
    for (k, &bk) in b.iter().enumerate() {
        cost2[k] = -bk;
    }
    t.price(&cost2);
    let mut allowed = vec![true; ncols];
    for a in allowed.iter_mut().skip(ncons + nvar) {
        *a = false;
    }
    let status = t.optimize(&allowed, tol, max_iters);
    let primal = if status == LpStatus::Optimal {
        t.obj_row()[ncons..ncons + nvar].to_vec()
    } else {
        Vec::new()
    };
    // The dual being unbounded means the primal is infeasible.
    let status = match status {
        LpStatus::Unbounded => LpStatus::Infeasible,
        s => s,
    };
    DualOutcome {
        status,
        primal,
        iterations: t.iterations,
    }
}

/// Solves the program to optimality, or fails with the terminal status.
pub fn solve_lp(lp: &LinearProgram, tol: f64) -> Result<LpSolution> {
    lp.check()?;
    let sf = standardize(lp);
    let out = solve_dual(&sf.rows, &sf.rhs, &sf.cost, tol);
    let status = match out.status {
        // Dual infeasible: decide between an infeasible and an unbounded primal.
        LpStatus::Unbounded => {
            let zero = vec![0.0; sf.cost.len()];
            match solve_dual(&sf.rows, &sf.rhs, &zero, tol).status {
                LpStatus::Optimal => LpStatus::Unbounded,
                _ => LpStatus::Infeasible,
            }
        }
        s => s,
    };
    if status != LpStatus::Optimal {
        return Err(Error::Lp {
            status,
            detail: format!(
                "{} variables, {} constraints, {} pivots",
                lp.num_vars(),
                lp.num_rows(),
                out.iterations
            ),
        });
    }
    let z: Vec<f64> = out.primal.iter().map(|v| v.max(0.0)).collect();
    let x: Vec<f64> = sf
        .columns
        .iter()
        .map(|col| match *col {
            Column::Shifted { col, offset, sign } => offset + sign * z[col],
            Column::Split { pos, neg } => z[pos] - z[neg],
        })
        .collect();
    Ok(LpSolution {
        objective: lp.value(&x),
        x,
        iterations: out.iterations,
    })
}
