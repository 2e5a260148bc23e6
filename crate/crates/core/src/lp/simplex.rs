//! Bounded-to-standard-form transform and the revised simplex itself.
//!
//! The basis inverse is held densely and updated by elementary row operations,
//! with a fresh Gauss-Jordan inverse every `REFACTOR_EVERY` pivots.
#![allow(clippy::needless_range_loop)]

use super::{
    certify, LinearProgram, LpSolution, LpStatus, Relation, FEASIBILITY_TOL, OPTIMALITY_TOL,
};

const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 50;
const STALL_LIMIT: usize = 30;
const TIE_EPS: f64 = 1e-12;

/// How an original variable maps onto nonnegative standard-form columns.
#[derive(Debug, Clone, Copy)]
enum Map {
    /// `x = offset + z`
    Shift { col: usize, offset: f64 },
    /// `x = offset - z`
    Mirror { col: usize, offset: f64 },
    /// `x = z_pos - z_neg`
    Split { pos: usize, neg: usize },
}

struct Standard {
    m: usize,
    /// Column-major, `cols[j][i]`. Artificial columns are appended last.
    cols: Vec<Vec<f64>>,
    cost: Vec<f64>,
    b: Vec<f64>,
    artificial: Vec<bool>,
    /// `-1.0` where the row was negated to make its rhs nonnegative.
    row_sign: Vec<f64>,
    maps: Vec<Map>,
    initial_basis: Vec<usize>,
}

impl Standard {
    fn build(lp: &LinearProgram) -> Standard {
        let mut cost = Vec::new();
        let mut maps = Vec::with_capacity(lp.num_vars());
        let mut bound_rows = Vec::new();
        for v in lp.variables() {
            let map = match (v.lower.is_finite(), v.upper.is_finite()) {
                (true, up) => {
                    let col = cost.len();
                    cost.push(v.cost);
                    if up {
                        bound_rows.push((col, v.upper - v.lower));
                    }
                    Map::Shift {
                        col,
                        offset: v.lower,
                    }
                }
                (false, true) => {
                    let col = cost.len();
                    cost.push(-v.cost);
                    Map::Mirror {
                        col,
                        offset: v.upper,
                    }
                }
                (false, false) => {
                    let pos = cost.len();
                    cost.push(v.cost);
                    cost.push(-v.cost);
                    Map::Split { pos, neg: pos + 1 }
                }
            };
            maps.push(map);
        }
        let n_struct = cost.len();
        let m = lp.num_rows() + bound_rows.len();
        let mut cols = vec![vec![0.0; m]; n_struct];
        let mut b = vec![0.0; m];
        let mut slack_of_row = vec![None; m];

        for (i, c) in lp.constraints().iter().enumerate() {
            b[i] = c.rhs;
            for &(v, a) in &c.terms {
                match maps[v.0] {
                    Map::Shift { col, offset } => {
                        cols[col][i] += a;
                        b[i] -= a * offset;
                    }
                    Map::Mirror { col, offset } => {
                        cols[col][i] -= a;
                        b[i] -= a * offset;
                    }
                    Map::Split { pos, neg } => {
                        cols[pos][i] += a;
                        cols[neg][i] -= a;
                    }
                }
            }
            let s = match c.relation {
                Relation::Le => 1.0,
                Relation::Ge => -1.0,
                Relation::Eq => continue,
            };
            let mut col = vec![0.0; m];
            col[i] = s;
            slack_of_row[i] = Some(cols.len());
            cols.push(col);
            cost.push(0.0);
        }
        for (k, &(col, width)) in bound_rows.iter().enumerate() {
            let i = lp.num_rows() + k;
            cols[col][i] = 1.0;
            b[i] = width;
            let mut s = vec![0.0; m];
            s[i] = 1.0;
            slack_of_row[i] = Some(cols.len());
            cols.push(s);
            cost.push(0.0);
        }

        let mut row_sign = vec![1.0; m];
        for i in 0..m {
            if b[i] < 0.0 {
                row_sign[i] = -1.0;
                b[i] = -b[i];
                for col in cols.iter_mut() {
                    col[i] = -col[i];
                }
            }
        }

        let mut artificial = vec![false; cols.len()];
        let mut initial_basis = Vec::with_capacity(m);
        for i in 0..m {
            match slack_of_row[i] {
                Some(s) if cols[s][i] > 0.0 => initial_basis.push(s),
                _ => {
                    let mut col = vec![0.0; m];
                    col[i] = 1.0;
                    initial_basis.push(cols.len());
                    cols.push(col);
                    cost.push(0.0);
                    artificial.push(true);
                }
            }
        }
        Standard {
            m,
            cols,
            cost,
            b,
            artificial,
            row_sign,
            maps,
            initial_basis,
        }
    }

    fn n(&self) -> usize {
        self.cols.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
    Stuck,
}

struct Simplex<'a> {
    sf: &'a Standard,
    basis: Vec<usize>,
    /// Position of each column in the basis, if basic.
    position: Vec<Option<usize>>,
    /// Row-major `m x m`.
    binv: Vec<f64>,
    xb: Vec<f64>,
    bland: bool,
    iterations: usize,
    max_iterations: usize,
}

impl<'a> Simplex<'a> {
    fn new(sf: &'a Standard, bland: bool) -> Self {
        let m = sf.m;
        let n = sf.n();
        let mut s = Simplex {
            sf,
            basis: sf.initial_basis.clone(),
            position: vec![None; n],
            binv: vec![0.0; m * m],
            xb: vec![0.0; m],
            bland,
            iterations: 0,
            max_iterations: 50 * (m + n) + 1000,
        };
        for (k, &j) in s.basis.iter().enumerate() {
            s.position[j] = Some(k);
        }
        s
    }

    /// Recomputes the basis inverse from scratch. Returns false if B is singular.
    fn refactor(&mut self) -> bool {
        let m = self.sf.m;
        let w = 2 * m;
        let mut aug = vec![0.0; m * w];
        for (k, &j) in self.basis.iter().enumerate() {
            for i in 0..m {
                aug[i * w + k] = self.sf.cols[j][i];
            }
        }
        for i in 0..m {
            aug[i * w + m + i] = 1.0;
        }
        for c in 0..m {
            let mut p = c;
            let mut best = aug[c * w + c].abs();
            for r in c + 1..m {
                let v = aug[r * w + c].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best < 1e-12 {
                return false;
            }
            if p != c {
                for k in 0..w {
                    aug.swap(c * w + k, p * w + k);
                }
            }
            let d = aug[c * w + c];
            for k in 0..w {
                aug[c * w + k] /= d;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = aug[r * w + c];
                if f != 0.0 {
                    for k in 0..w {
                        aug[r * w + k] -= f * aug[c * w + k];
                    }
                }
            }
        }
        for i in 0..m {
            self.binv[i * m..(i + 1) * m].copy_from_slice(&aug[i * w + m..(i + 1) * w]);
        }
        for i in 0..m {
            let v: f64 = (0..m).map(|k| self.binv[i * m + k] * self.sf.b[k]).sum();
            self.xb[i] = if v.abs() < 1e-13 { 0.0 } else { v };
        }
        true
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.sf.m;
        let col = &self.sf.cols[j];
        let mut out = vec![0.0; m];
        for (k, &a) in col.iter().enumerate() {
            if a != 0.0 {
                for i in 0..m {
                    out[i] += self.binv[i * m + k] * a;
                }
            }
        }
        out
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.sf.m;
        let mut y = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            let c = cost[j];
            if c != 0.0 {
                for i in 0..m {
                    y[i] += c * self.binv[k * m + i];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, cost: &[f64], y: &[f64], j: usize) -> f64 {
        let col = &self.sf.cols[j];
        cost[j] - col.iter().zip(y).map(|(a, yi)| a * yi).sum::<f64>()
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let m = self.sf.m;
        let ar = alpha[r];
        let theta = self.xb[r] / ar;
        for i in 0..m {
            if i != r {
                self.xb[i] -= theta * alpha[i];
                if self.xb[i].abs() < 1e-13 {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[r] = theta;
        for k in 0..m {
            self.binv[r * m + k] /= ar;
        }
        for i in 0..m {
            if i == r || alpha[i] == 0.0 {
                continue;
            }
            let f = alpha[i];
            for k in 0..m {
                self.binv[i * m + k] -= f * self.binv[r * m + k];
            }
        }
        let leaving = self.basis[r];
        self.position[leaving] = None;
        self.basis[r] = q;
        self.position[q] = Some(r);
    }

    /// Runs simplex iterations with `cost` until optimal, unbounded or stuck.
    fn run(&mut self, cost: &[f64], allowed: &[bool]) -> Outcome {
        let n = self.sf.n();
        let mut stall = 0usize;
        let mut since_refactor = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return Outcome::Stuck;
            }
            if since_refactor >= REFACTOR_EVERY {
                if !self.refactor() {
                    return Outcome::Stuck;
                }
                since_refactor = 0;
            }
            let y = self.duals(cost);
            let mut entering = None;
            let mut best = -OPTIMALITY_TOL;
            for j in 0..n {
                if !allowed[j] || self.position[j].is_some() {
                    continue;
                }
                let d = self.reduced_cost(cost, &y, j);
                if self.bland {
                    if d < -OPTIMALITY_TOL {
                        entering = Some((j, d));
                        break;
                    }
                } else if d < best - TIE_EPS {
                    best = d;
                    entering = Some((j, d));
                }
            }
            let Some((q, dq)) = entering else {
                return Outcome::Optimal;
            };
            let alpha = self.ftran(q);
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.sf.m {
                let a = alpha[i];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.xb[i].max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best_ratio)) => {
                        if ratio < best_ratio - TIE_EPS * (1.0 + best_ratio) {
                            Some((i, ratio))
                        } else if ratio <= best_ratio + TIE_EPS * (1.0 + best_ratio) {
                            let better = if self.bland {
                                self.basis[i] < self.basis[r]
                            } else {
                                a > alpha[r] + TIE_EPS
                                    || (a >= alpha[r] - TIE_EPS && self.basis[i] < self.basis[r])
                            };
                            if better {
                                Some((i, ratio.min(best_ratio)))
                            } else {
                                Some((r, best_ratio))
                            }
                        } else {
                            Some((r, best_ratio))
                        }
                    }
                };
            }
            let Some((r, ratio)) = leave else {
                return Outcome::Unbounded;
            };
            if ratio * -dq <= 1e-12 {
                stall += 1;
                if stall >= STALL_LIMIT {
                    self.bland = true;
                }
            } else {
                stall = 0;
            }
            self.pivot(r, q, &alpha);
            self.iterations += 1;
            since_refactor += 1;
        }
    }

    /// Pivots basic artificials at zero level out of the basis where possible.
    fn drive_out_artificials(&mut self) {
        let m = self.sf.m;
        for r in 0..m {
            if !self.sf.artificial[self.basis[r]] {
                continue;
            }
            let mut pick = None;
            let mut best = PIVOT_TOL.max(1e-7);
            for j in 0..self.sf.n() {
                if self.sf.artificial[j] || self.position[j].is_some() {
                    continue;
                }
                // Row r of B^{-1} A_j.
                let v: f64 = (0..m)
                    .map(|k| self.binv[r * m + k] * self.sf.cols[j][k])
                    .sum();
                if v.abs() > best {
                    best = v.abs();
                    pick = Some(j);
                }
            }
            if let Some(j) = pick {
                let alpha = self.ftran(j);
                self.pivot(r, j, &alpha);
            }
            // Otherwise the row is redundant and the artificial stays basic at zero.
        }
    }
}

fn attempt(lp: &LinearProgram, sf: &Standard, bland: bool) -> LpSolution {
    let m = sf.m;
    let n = sf.n();
    let mut sx = Simplex::new(sf, bland);
    if !sx.refactor() {
        return LpSolution::failed(LpStatus::NumericalFailure, 0);
    }

    if sf.artificial.iter().any(|&a| a) {
        let phase1: Vec<f64> = sf
            .artificial
            .iter()
            .map(|&a| if a { 1.0 } else { 0.0 })
            .collect();
        let everything = vec![true; n];
        match sx.run(&phase1, &everything) {
            Outcome::Optimal => {}
            // Phase 1 is bounded below by zero.
            Outcome::Unbounded | Outcome::Stuck => {
                return LpSolution::failed(LpStatus::NumericalFailure, sx.iterations)
            }
        }
        let scale = 1.0 + sf.b.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let infeas: f64 = (0..m)
            .filter(|&i| sf.artificial[sx.basis[i]])
            .map(|i| sx.xb[i])
            .sum();
        if infeas > FEASIBILITY_TOL * scale {
            return LpSolution::failed(LpStatus::Infeasible, sx.iterations);
        }
        sx.drive_out_artificials();
        if !sx.refactor() {
            return LpSolution::failed(LpStatus::NumericalFailure, sx.iterations);
        }
    }

    let allowed: Vec<bool> = sf.artificial.iter().map(|&a| !a).collect();
    match sx.run(&sf.cost, &allowed) {
        Outcome::Optimal => {}
        Outcome::Unbounded => return LpSolution::failed(LpStatus::Unbounded, sx.iterations),
        Outcome::Stuck => return LpSolution::failed(LpStatus::NumericalFailure, sx.iterations),
    }
    if !sx.refactor() {
        return LpSolution::failed(LpStatus::NumericalFailure, sx.iterations);
    }

    let mut z = vec![0.0; n];
    for (k, &j) in sx.basis.iter().enumerate() {
        z[j] = sx.xb[k].max(0.0);
    }
    let primal: Vec<f64> = sf
        .maps
        .iter()
        .map(|map| match *map {
            Map::Shift { col, offset } => offset + z[col],
            Map::Mirror { col, offset } => offset - z[col],
            Map::Split { pos, neg } => z[pos] - z[neg],
        })
        .collect();
    let y = sx.duals(&sf.cost);
    let duals: Vec<f64> = (0..lp.num_rows())
        .map(|i| {
            let d = sf.row_sign[i] * y[i];
            if d == 0.0 {
                0.0
            } else {
                d
            }
        })
        .collect();
    let objective = lp
        .variables()
        .iter()
        .zip(&primal)
        .map(|(v, x)| v.cost * x)
        .sum();
    LpSolution {
        status: LpStatus::Optimal,
        primal,
        duals,
        objective,
        iterations: sx.iterations,
    }
}

pub(super) fn solve(lp: &LinearProgram) -> LpSolution {
    let sf = Standard::build(lp);
    let first = attempt(lp, &sf, false);
    if first.status != LpStatus::Optimal {
        if first.status != LpStatus::NumericalFailure {
            return first;
        }
    } else if certify(lp, &first.primal, &first.duals).holds() {
        return first;
    }
    log::debug!(
        "simplex retry with Bland pricing after {} status",
        first.status
    );
    let second = attempt(lp, &sf, true);
    match second.status {
        LpStatus::Optimal if certify(lp, &second.primal, &second.duals).holds() => second,
        LpStatus::Optimal => LpSolution::failed(LpStatus::NumericalFailure, second.iterations),
        _ => second,
    }
}
