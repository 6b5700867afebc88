//! Dense revised simplex for `min c.x  s.t.  A x = b, x >= 0`.
//!
//! The basis inverse is kept explicitly and updated by elementary row
//! operations, with a fresh inversion every `refactor_every` pivots.
//! Pricing is Dantzig's rule; after a streak of degenerate pivots the
//! solver switches to Bland's rule until the objective moves again.
//!
//! One artificial column per row makes the all-artificial basis feasible
//! for phase one. In phase two artificials are pinned to zero: they never
//! re-enter, and a basic artificial blocks any direction that would move it.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Column-major constraint data.
#[derive(Clone, Debug)]
pub struct LpProblem {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    cost: Vec<f64>,
    b: Vec<f64>,
}

impl LpProblem {
    pub fn new(rows: usize, columns: Vec<Vec<f64>>, cost: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if cost.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                got: cost.len(),
            });
        }
        if b.len() != rows {
            return Err(Error::DimensionMismatch { expected: rows, got: b.len() });
        }
        let mut a = Vec::with_capacity(rows * columns.len());
        for col in &columns {
            if col.len() != rows {
                return Err(Error::DimensionMismatch { expected: rows, got: col.len() });
            }
            a.extend_from_slice(col);
        }
        Ok(Self {
            rows,
            cols: columns.len(),
            a,
            cost,
            b,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.a[j * self.rows..(j + 1) * self.rows]
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    /// `max_r |(A x - b)_r|`, evaluated directly from the column data.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (r, v) in self.column(j).iter().enumerate() {
                    ax[r] += v * xj;
                }
            }
        }
        ax.iter().zip(&self.b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    pub tol: f64,
    pub pivot_tol: f64,
    pub max_iters: usize,
    pub refactor_every: usize,
    pub degenerate_streak: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            pivot_tol: 1e-9,
            max_iters: 100_000,
            refactor_every: 50,
            degenerate_streak: 30,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Row multipliers `y` with `c_j - y.A_j >= 0` at optimality.
    pub duals: Vec<f64>,
    pub dual_value: f64,
    pub primal_residual: f64,
    pub dual_infeasibility: f64,
    /// Largest `x_j |c_j - y.A_j|`.
    pub complementarity: f64,
    pub iterations: usize,
    pub bland_pivots: usize,
}

struct State<'a> {
    p: &'a LpProblem,
    opts: &'a SimplexOptions,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    art_sign: Vec<f64>,
    iterations: usize,
    bland_pivots: usize,
}

impl<'a> State<'a> {
    fn column_entry(&self, var: usize, r: usize) -> f64 {
        let m = self.p.rows;
        if var < self.p.cols {
            self.p.a[var * m + r]
        } else if var - self.p.cols == r {
            self.art_sign[r]
        } else {
            0.0
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.p.rows;
        let bmat = DMatrix::from_fn(m, m, |r, k| self.column_entry(self.basis[k], r));
        let inv = bmat
            .try_inverse()
            .ok_or_else(|| Error::Lp("singular basis during refactorization".into()))?;
        for r in 0..m {
            for k in 0..m {
                self.binv[r * m + k] = inv[(r, k)];
            }
        }
        for r in 0..m {
            let v: f64 = (0..m).map(|k| self.binv[r * m + k] * self.p.b[k]).sum();
            self.xb[r] = if v.abs() < self.opts.tol { 0.0 } else { v };
        }
        Ok(())
    }

    fn duals(&self, cost: &dyn Fn(usize) -> f64) -> Vec<f64> {
        let m = self.p.rows;
        let mut y = vec![0.0; m];
        for r in 0..m {
            let cb = cost(self.basis[r]);
            if cb != 0.0 {
                for k in 0..m {
                    y[k] += cb * self.binv[r * m + k];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64], cost: &dyn Fn(usize) -> f64) -> f64 {
        cost(j) - self.p.column(j).iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Runs pivots until optimal for `cost`. `pinned` marks phase two.
    fn optimize(&mut self, cost: &dyn Fn(usize) -> f64, pinned: bool) -> Result<()> {
        let m = self.p.rows;
        let n = self.p.cols;
        let mut streak = 0usize;
        let mut since_refactor = 0usize;
        loop {
            if self.iterations >= self.opts.max_iters {
                return Err(Error::NonConvergence {
                    what: "simplex".into(),
                    iterations: self.iterations,
                    amplitude: f64::NAN,
                });
            }
            let y = self.duals(cost);
            let bland = streak >= self.opts.degenerate_streak;
            let mut entering = None;
            let mut best = -self.opts.tol;
            for j in 0..n {
                if self.in_basis[j] {
                    continue;
                }
                let d = self.reduced_cost(j, &y, cost);
                if d < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = entering else {
                return Ok(());
            };
            let col = self.p.column(q);
            let w: Vec<f64> = (0..m)
                .map(|r| (0..m).map(|k| self.binv[r * m + k] * col[k]).sum())
                .collect();
            let mut leave: Option<usize> = None;
            let mut ratio = f64::INFINITY;
            for r in 0..m {
                let var = self.basis[r];
                let artificial = var >= n;
                let t = if pinned && artificial {
                    if w[r].abs() > self.opts.pivot_tol {
                        0.0
                    } else {
                        continue;
                    }
                } else if w[r] > self.opts.pivot_tol {
                    self.xb[r].max(0.0) / w[r]
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some(l) => {
                        if t < ratio - 1e-12 {
                            true
                        } else if t <= ratio + 1e-12 {
                            if bland {
                                var < self.basis[l]
                            } else {
                                w[r].abs() > w[l].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some(r);
                    ratio = t.min(ratio);
                }
            }
            let Some(r) = leave else {
                return Err(Error::Lp("objective unbounded below".into()));
            };
            let t = ratio;
            if bland {
                self.bland_pivots += 1;
            }
            streak = if t <= self.opts.tol { streak + 1 } else { 0 };

            for i in 0..m {
                if i != r {
                    self.xb[i] -= t * w[i];
                    if self.xb[i].abs() < self.opts.tol * 1e-3 {
                        self.xb[i] = 0.0;
                    }
                }
            }
            self.xb[r] = t;
            let piv = w[r];
            for k in 0..m {
                self.binv[r * m + k] /= piv;
            }
            let prow: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            for i in 0..m {
                if i != r && w[i] != 0.0 {
                    let f = w[i];
                    for k in 0..m {
                        self.binv[i * m + k] -= f * prow[k];
                    }
                }
            }
            let old = self.basis[r];
            if old < n {
                self.in_basis[old] = false;
            }
            self.basis[r] = q;
            self.in_basis[q] = true;
            self.iterations += 1;
            since_refactor += 1;
            if since_refactor >= self.opts.refactor_every {
                self.refactor()?;
                since_refactor = 0;
            }
        }
    }
}

/// Solves the LP. `seed = Some((column, row))` starts phase two directly
/// from the basis made of `column` on `row` and artificials elsewhere; the
/// caller asserts that this point is feasible (it is checked).
pub fn solve(p: &LpProblem, seed: Option<(usize, usize)>, opts: &SimplexOptions) -> Result<LpSolution> {
    let m = p.rows;
    let n = p.cols;
    let art_sign: Vec<f64> = p.b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let mut st = State {
        p,
        opts,
        basis: (n..n + m).collect(),
        in_basis: vec![false; n],
        binv: vec![0.0; m * m],
        xb: vec![0.0; m],
        art_sign,
        iterations: 0,
        bland_pivots: 0,
    };
    let mut seeded = false;
    if let Some((col, row)) = seed {
        if col < n && row < m && p.column(col)[row].abs() > opts.pivot_tol {
            let level = p.b[row] / p.column(col)[row];
            let consistent = level >= 0.0
                && (0..m).all(|r| r == row || (p.column(col)[r] * level - p.b[r]).abs() <= opts.tol);
            if consistent {
                st.basis[row] = col;
                st.in_basis[col] = true;
                seeded = true;
            }
        }
        if !seeded {
            log::warn!("simplex seed is infeasible; running phase one");
        }
    }
    st.refactor()?;

    if !seeded {
        let phase_one = |j: usize| if j >= n { 1.0 } else { 0.0 };
        st.optimize(&phase_one, false)?;
        let infeas: f64 = (0..m).filter(|&r| st.basis[r] >= n).map(|r| st.xb[r]).sum();
        if infeas > opts.tol.sqrt() {
            return Err(Error::Lp(format!("infeasible (phase one residual {infeas:e})")));
        }
    }
    let cost = |j: usize| if j >= n { 0.0 } else { p.cost[j] };
    st.optimize(&cost, true)?;
    st.refactor()?;

    let mut x = vec![0.0; n];
    for r in 0..m {
        if st.basis[r] < n {
            x[st.basis[r]] = st.xb[r].max(0.0);
        }
    }
    let y = st.duals(&cost);
    let value: f64 = x.iter().zip(&p.cost).map(|(a, b)| a * b).sum();
    let dual_value: f64 = y.iter().zip(&p.b).map(|(a, b)| a * b).sum();
    let mut dual_infeasibility: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    for j in 0..n {
        let d = st.reduced_cost(j, &y, &cost);
        dual_infeasibility = dual_infeasibility.max(-d);
        complementarity = complementarity.max(x[j] * d.abs());
    }
    Ok(LpSolution {
        primal_residual: p.residual(&x),
        x,
        value,
        duals: y,
        dual_value,
        dual_infeasibility,
        complementarity,
        iterations: st.iterations,
        bland_pivots: st.bland_pivots,
    })
}
