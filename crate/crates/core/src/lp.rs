//! Revised primal simplex for small linear programs
//!
//! ```text
//! minimize cᵀx  subject to  Ax = b  (or Ax ≤ b),  x ≥ 0
//! ```
//!
//! The constraint matrix is stored column-wise and sparse (the transport
//! problems built by this crate have two or three non-zeros per column), the
//! basis inverse is kept dense and refactorised periodically. Pricing uses
//! Dantzig's rule and falls back to Bland's rule after a run of degenerate
//! pivots; all ties are broken by lowest index, so results are reproducible.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};

pub const DEFAULT_FEAS_TOL: f64 = 1e-9;
pub const DEFAULT_OPT_TOL: f64 = 1e-9;

const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Equal,
    LessEqual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::IterationLimit => "stopped at the iteration limit",
        })
    }
}

/// `minimize cᵀx` subject to `Ax (= | ≤) b`, `x ≥ 0`.
#[derive(Debug, Clone)]
pub struct LpProblem {
    costs: Vec<f64>,
    rhs: Vec<f64>,
    sense: Sense,
    col_start: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    start: Vec<usize>,
}

impl LpProblem {
    /// Builds a problem from sparse columns: `columns[j]` lists the
    /// `(row, coefficient)` pairs of variable `j`.
    pub fn from_columns(
        costs: Vec<f64>,
        columns: &[Vec<(usize, f64)>],
        rhs: Vec<f64>,
        sense: Sense,
    ) -> Result<Self> {
        if costs.len() != columns.len() {
            return Err(Error::InvalidParameter(format!(
                "{} costs for {} columns",
                costs.len(),
                columns.len()
            )));
        }
        let mut col_start = Vec::with_capacity(columns.len() + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_start.push(0);
        for col in columns {
            for &(i, a) in col {
                if i >= rhs.len() {
                    return Err(Error::InvalidParameter(format!(
                        "row index {i} out of range for {} rows",
                        rhs.len()
                    )));
                }
                if a != 0.0 {
                    row_idx.push(i);
                    values.push(a);
                }
            }
            col_start.push(row_idx.len());
        }
        let problem = Self {
            costs,
            rhs,
            sense,
            col_start,
            row_idx,
            values,
            start: Vec::new(),
        };
        problem.check_finite()?;
        Ok(problem)
    }

    /// Builds a problem from a dense row-major `m × n` matrix.
    pub fn from_dense(costs: Vec<f64>, a: &[Vec<f64>], rhs: Vec<f64>, sense: Sense) -> Result<Self> {
        if a.len() != rhs.len() {
            return Err(Error::InvalidParameter(format!(
                "{} matrix rows for {} right-hand sides",
                a.len(),
                rhs.len()
            )));
        }
        let n = costs.len();
        if let Some(row) = a.iter().find(|row| row.len() != n) {
            return Err(Error::InvalidParameter(format!(
                "matrix row of length {} for {n} variables",
                row.len()
            )));
        }
        let columns: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|j| a.iter().enumerate().map(|(i, row)| (i, row[j])).collect())
            .collect();
        Self::from_columns(costs, &columns, rhs, sense)
    }

    fn check_finite(&self) -> Result<()> {
        let all = self.costs.iter().chain(&self.rhs).chain(&self.values);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite LP data".into()));
        }
        Ok(())
    }

    pub fn n_vars(&self) -> usize {
        self.costs.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    /// Non-zeros of column `j`.
    /// Suggests structural columns for the initial basis. If they span a
    /// feasible basic solution the first phase is skipped; otherwise the hint
    /// is discarded and the solver starts from the artificial basis.
    pub fn set_starting_columns(&mut self, columns: Vec<usize>) -> Result<()> {
        if let Some(&j) = columns.iter().find(|&&j| j >= self.n_vars()) {
            return Err(Error::InvalidParameter(format!(
                "starting column {j} out of range for {} variables",
                self.n_vars()
            )));
        }
        self.start = columns;
        Ok(())
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_start[j]..self.col_start[j + 1];
        self.row_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// `Ax`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut ax = vec![0.0; self.n_rows()];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (i, a) in self.column(j) {
                    ax[i] += a * xj;
                }
            }
        }
        ax
    }

    /// `Aᵀy`.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        (0..self.n_vars())
            .map(|j| self.column(j).map(|(i, a)| a * y[i]).sum())
            .collect()
    }

    /// Largest constraint violation of `x` (bounds included).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let ax = self.apply(x);
        let rows = ax.iter().zip(&self.rhs).map(|(l, r)| match self.sense {
            Sense::Equal => (l - r).abs(),
            Sense::LessEqual => (l - r).max(0.0),
        });
        let bounds = x.iter().map(|&v| (-v).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    /// Writes `(c, A, b)` densely as CSV: a `c` row followed by one row per
    /// constraint with its right-hand side in the second column.
    pub fn dump_csv<W: Write>(&self, writer: W) -> Result<()> {
        let n = self.n_vars();
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["row".to_string(), "b".to_string()];
        header.extend((0..n).map(|j| format!("x{j}")));
        w.write_record(&header)?;
        let mut rec = vec!["c".to_string(), String::new()];
        rec.extend(self.costs.iter().map(|c| c.to_string()));
        w.write_record(&rec)?;
        let mut dense = vec![vec![0.0; n]; self.n_rows()];
        for j in 0..n {
            for (i, a) in self.column(j) {
                dense[i][j] = a;
            }
        }
        for (i, row) in dense.iter().enumerate() {
            let mut rec = vec![i.to_string(), self.rhs[i].to_string()];
            rec.extend(row.iter().map(|a| a.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub value: f64,
    /// Simplex multipliers `y` of the original rows (`c − Aᵀy ≥ 0` at an
    /// optimum; `y ≤ 0` for `≤` rows).
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    fn failed(status: LpStatus, n: usize, m: usize, iterations: usize) -> Self {
        Self {
            status,
            x: vec![0.0; n],
            value: f64::NAN,
            duals: vec![0.0; m],
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Turns a non-optimal status into an error.
    pub fn into_optimal(self) -> Result<Self> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            s => Err(Error::Lp(s)),
        }
    }
}

pub fn solve_lp(problem: &LpProblem, feas_tol: f64, opt_tol: f64) -> Result<LpSolution> {
    if !(feas_tol > 0.0 && opt_tol > 0.0) {
        return Err(Error::InvalidParameter(
            "LP tolerances must be positive".into(),
        ));
    }
    Ok(Simplex::new(problem, feas_tol, opt_tol).run())
}

pub fn solve_lp_default(problem: &LpProblem) -> Result<LpSolution> {
    solve_lp(problem, DEFAULT_FEAS_TOL, DEFAULT_OPT_TOL)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

struct Simplex<'a> {
    problem: &'a LpProblem,
    m: usize,
    n_struct: usize,
    /// Column layout: structural, slack, artificial.
    col_start: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    cost: Vec<f64>,
    artificial: Vec<bool>,
    flipped: Vec<bool>,
    b: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    feas_tol: f64,
    opt_tol: f64,
    iterations: usize,
    max_iterations: usize,
    since_refactor: usize,
}

impl<'a> Simplex<'a> {
    fn new(problem: &'a LpProblem, feas_tol: f64, opt_tol: f64) -> Self {
        let m = problem.n_rows();
        let n_struct = problem.n_vars();
        let flipped: Vec<bool> = problem.rhs.iter().map(|&b| b < 0.0).collect();
        let sign = |i: usize| if flipped[i] { -1.0 } else { 1.0 };

        let mut col_start = Vec::with_capacity(n_struct + 2 * m + 1);
        let mut row_idx = Vec::with_capacity(problem.row_idx.len() + 2 * m);
        let mut values = Vec::with_capacity(problem.values.len() + 2 * m);
        col_start.push(0);
        for j in 0..n_struct {
            for (i, a) in problem.column(j) {
                row_idx.push(i);
                values.push(sign(i) * a);
            }
            col_start.push(row_idx.len());
        }
        let mut cost = problem.costs.clone();
        let mut artificial = vec![false; n_struct];
        let mut basis = vec![usize::MAX; m];

        if problem.sense == Sense::LessEqual {
            for i in 0..m {
                row_idx.push(i);
                values.push(sign(i));
                col_start.push(row_idx.len());
                cost.push(0.0);
                artificial.push(false);
                if !flipped[i] {
                    basis[i] = cost.len() - 1;
                }
            }
        }
        for (i, slot) in basis.iter_mut().enumerate() {
            if *slot == usize::MAX {
                row_idx.push(i);
                values.push(1.0);
                col_start.push(row_idx.len());
                cost.push(0.0);
                artificial.push(true);
                *slot = cost.len() - 1;
            }
        }
        let mut is_basic = vec![false; cost.len()];
        for &j in &basis {
            is_basic[j] = true;
        }
        let b: Vec<f64> = problem.rhs.iter().map(|v| v.abs()).collect();
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let n_total = cost.len();
        Self {
            problem,
            m,
            n_struct,
            col_start,
            row_idx,
            values,
            cost,
            artificial,
            flipped,
            xb: b.clone(),
            b,
            basis,
            is_basic,
            binv,
            feas_tol,
            opt_tol,
            iterations: 0,
            max_iterations: 50 * (m + n_total) + 1000,
            since_refactor: 0,
        }
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_start[j]..self.col_start[j + 1];
        self.row_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    fn phase_cost(&self, phase: Phase, j: usize) -> f64 {
        match phase {
            Phase::One => {
                if self.artificial[j] {
                    1.0
                } else {
                    0.0
                }
            }
            Phase::Two => self.cost[j],
        }
    }

    fn run(mut self) -> LpSolution {
        let (n, m) = (self.n_struct, self.m);
        let crashed = self.crash();
        if self.artificial.iter().any(|&a| a) {
            let phase_one = if crashed { LpStatus::Optimal } else { self.iterate(Phase::One) };
            match phase_one {
                LpStatus::Optimal => {}
                LpStatus::IterationLimit => {
                    return LpSolution::failed(LpStatus::IterationLimit, n, m, self.iterations)
                }
                // Phase one is bounded below by zero.
                s => return LpSolution::failed(s, n, m, self.iterations),
            }
            self.refactor();
            let infeasibility: f64 = (0..m)
                .filter(|&r| self.artificial[self.basis[r]])
                .map(|r| self.xb[r].max(0.0))
                .sum();
            let scale = self.b.iter().copied().fold(1.0, f64::max);
            if infeasibility > self.feas_tol * scale {
                return LpSolution::failed(LpStatus::Infeasible, n, m, self.iterations);
            }
            self.drive_out_artificials();
        }
        let status = self.iterate(Phase::Two);
        if status != LpStatus::Optimal {
            return LpSolution::failed(status, n, m, self.iterations);
        }
        self.refactor();
        self.extract()
    }

    /// Pivots the hinted columns into rows held by artificials. Returns
    /// whether the resulting basis is primal feasible; if not, the artificial
    /// basis is restored.
    fn crash(&mut self) -> bool {
        if self.problem.start.is_empty() {
            return false;
        }
        let m = self.m;
        let (basis, is_basic) = (self.basis.clone(), self.is_basic.clone());
        let mut u = vec![0.0; m];
        for &q in &self.problem.start {
            if self.is_basic[q] {
                continue;
            }
            self.ftran(q, &mut u);
            let mut best: Option<usize> = None;
            for r in 0..m {
                if self.artificial[self.basis[r]]
                    && u[r].abs() > 1e-7
                    && best.is_none_or(|b| u[r].abs() > u[b].abs())
                {
                    best = Some(r);
                }
            }
            if let Some(r) = best {
                self.pivot(q, r, &u, 0.0);
            }
        }
        self.iterations = 0;
        self.refactor();
        let scale = self.b.iter().copied().fold(1.0, f64::max);
        let feasible = (0..m).all(|r| {
            let x = self.xb[r];
            x >= -self.feas_tol * scale && !(self.artificial[self.basis[r]] && x > self.feas_tol * scale)
        });
        if !feasible {
            self.basis = basis;
            self.is_basic = is_basic;
            self.binv.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..m {
                self.binv[i * m + i] = 1.0;
            }
            self.xb.clone_from(&self.b);
        }
        feasible
    }

    /// `u = B⁻¹ a_q`.
    fn ftran(&self, q: usize, u: &mut [f64]) {
        let m = self.m;
        u.iter_mut().for_each(|v| *v = 0.0);
        for (i, a) in self.column(q) {
            for (r, ur) in u.iter_mut().enumerate() {
                *ur += self.binv[r * m + i] * a;
            }
        }
    }

    fn duals(&self, phase: Phase) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for r in 0..m {
            let cb = self.phase_cost(phase, self.basis[r]);
            if cb != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yi, bi) in y.iter_mut().zip(row) {
                    *yi += cb * bi;
                }
            }
        }
        y
    }

    fn iterate(&mut self, phase: Phase) -> LpStatus {
        let m = self.m;
        let n_total = self.cost.len();
        let mut degenerate_run = 0usize;
        let mut u = vec![0.0; m];
        loop {
            if self.iterations >= self.max_iterations {
                return LpStatus::IterationLimit;
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let y = self.duals(phase);
            let bland = degenerate_run >= DEGENERATE_RUN;

            // Pricing.
            let mut entering = None;
            let mut best = -self.opt_tol;
            for j in 0..n_total {
                if self.is_basic[j] || (phase == Phase::Two && self.artificial[j]) {
                    continue;
                }
                let d = self.phase_cost(phase, j) - self.column(j).map(|(i, a)| y[i] * a).sum::<f64>();
                if d < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = entering else {
                return LpStatus::Optimal;
            };

            self.ftran(q, &mut u);

            // Ratio test; artificial variables kept in the basis during phase
            // two must stay at zero, so any non-zero entry blocks them.
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                let ur = u[r];
                let ratio = if phase == Phase::Two && self.artificial[self.basis[r]] {
                    if ur.abs() > PIVOT_TOL {
                        0.0
                    } else {
                        continue;
                    }
                } else if ur > PIVOT_TOL {
                    self.xb[r].max(0.0) / ur
                } else {
                    continue;
                };
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((br, bratio)) => {
                        if ratio < bratio - 1e-12
                            || (ratio <= bratio + 1e-12 && self.basis[r] < self.basis[br])
                        {
                            Some((r, ratio))
                        } else {
                            Some((br, bratio))
                        }
                    }
                };
            }
            let Some((r, theta)) = leave else {
                return LpStatus::Unbounded;
            };

            if theta <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(q, r, &u, theta);
        }
    }

    fn pivot(&mut self, q: usize, r: usize, u: &[f64], theta: f64) {
        let m = self.m;
        for (i, x) in self.xb.iter_mut().enumerate() {
            *x -= theta * u[i];
        }
        self.xb[r] = theta;
        let piv = u[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (row_r, after) = rest.split_at_mut(m);
        row_r.iter_mut().for_each(|v| *v /= piv);
        for (i, row) in before.chunks_exact_mut(m).enumerate() {
            let f = u[i];
            if f != 0.0 {
                row.iter_mut().zip(row_r.iter()).for_each(|(a, b)| *a -= f * b);
            }
        }
        for (k, row) in after.chunks_exact_mut(m).enumerate() {
            let f = u[r + 1 + k];
            if f != 0.0 {
                row.iter_mut().zip(row_r.iter()).for_each(|(a, b)| *a -= f * b);
            }
        }
        self.is_basic[self.basis[r]] = false;
        self.is_basic[q] = true;
        self.basis[r] = q;
        self.iterations += 1;
        self.since_refactor += 1;
    }

    /// Recomputes `B⁻¹` by Gauss–Jordan elimination and `x_B = B⁻¹ b`.
    fn refactor(&mut self) {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (c, &j) in self.basis.iter().enumerate() {
            for (i, v) in self.column(j) {
                a[i * m + c] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let p = (col..m)
                .max_by(|&x, &y| a[x * m + col].abs().total_cmp(&a[y * m + col].abs()))
                .unwrap();
            if a[p * m + col].abs() < 1e-14 {
                // Singular basis: keep the product-form inverse we already have.
                self.since_refactor = 0;
                return;
            }
            if p != col {
                for k in 0..m {
                    a.swap(p * m + k, col * m + k);
                    inv.swap(p * m + k, col * m + k);
                }
            }
            let d = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= d;
                inv[col * m + k] /= d;
            }
            for i in 0..m {
                if i != col {
                    let f = a[i * m + col];
                    if f != 0.0 {
                        for k in 0..m {
                            a[i * m + k] -= f * a[col * m + k];
                            inv[i * m + k] -= f * inv[col * m + k];
                        }
                    }
                }
            }
        }
        // Row c of inv is the c-th row of B⁻¹ because column c of B is basis[c].
        self.binv = inv;
        for r in 0..m {
            self.xb[r] = (0..m).map(|i| self.binv[r * m + i] * self.b[i]).sum();
        }
        self.since_refactor = 0;
    }

    fn drive_out_artificials(&mut self) {
        let m = self.m;
        let mut u = vec![0.0; m];
        for r in 0..m {
            if !self.artificial[self.basis[r]] {
                continue;
            }
            let row = &self.binv[r * m..(r + 1) * m];
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.cost.len() {
                if self.is_basic[j] || self.artificial[j] {
                    continue;
                }
                let alpha: f64 = self.column(j).map(|(i, a)| row[i] * a).sum();
                if alpha.abs() > 1e-7 && best.is_none_or(|(_, b)| alpha.abs() > b.abs()) {
                    best = Some((j, alpha));
                }
            }
            // No candidate: the row is redundant and the artificial stays
            // basic at zero.
            if let Some((q, _)) = best {
                self.ftran(q, &mut u);
                let theta = self.xb[r].max(0.0) / u[r];
                let theta = if theta.is_finite() { theta.max(0.0) } else { 0.0 };
                self.pivot(q, r, &u.clone(), theta);
            }
        }
    }

    fn extract(&self) -> LpSolution {
        let mut x = vec![0.0; self.n_struct];
        for (r, &j) in self.basis.iter().enumerate() {
            if j < self.n_struct {
                x[j] = self.xb[r].max(0.0);
            }
        }
        let value = x.iter().zip(&self.problem.costs).map(|(a, c)| a * c).sum();
        let mut duals = self.duals(Phase::Two);
        for (y, &f) in duals.iter_mut().zip(&self.flipped) {
            if f {
                *y = -*y;
            }
        }
        LpSolution {
            status: LpStatus::Optimal,
            x,
            value,
            duals,
            iterations: self.iterations,
        }
    }
}
