//! Bounded-variable phase-1 simplex for box-constrained feasibility.
//!
//! Decides feasibility of `{ y ∈ ℝⁿ : A·y = b, -1 ≤ y_j ≤ 1 }` by
//! minimizing the sum of artificial variables with a dense tableau.
//! Structural variables start nonbasic at their lower bound; one artificial
//! per row absorbs the initial residual. Pivoting uses Bland's rule
//! (smallest index entering, smallest basic variable leaving among ties),
//! which guarantees termination; a generous pivot cap catches the
//! floating-point pathologies Bland cannot.
//!
//! Systems here are tiny (rows = n-k, a handful of columns), so no
//! factorization updates or sparsity — a flat tableau is both simplest and
//! fastest at this scale.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math::abs;

const TOL_REDUCED_COST: f64 = 1e-11;
const TOL_PIVOT: f64 = 1e-11;
const RATIO_TIE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

/// Reusable workspace for repeated feasibility solves against the same
/// matrix shape (the rejection sampler calls this millions of times).
#[derive(Clone, Debug)]
pub struct PhaseOneSimplex {
    rows: usize,
    structural: usize,
    cols: usize,
    /// Dense tableau `A_B⁻¹·[A | D]`, row-major `rows × cols`.
    tab: Vec<f64>,
    /// Reduced-cost row.
    cost: Vec<f64>,
    /// Values of the basic variables, aligned with `basis`.
    values: Vec<f64>,
    /// Basic variable per row.
    basis: Vec<usize>,
    state: Vec<VarState>,
    /// Artificials may never re-enter once they leave.
    banned: Vec<bool>,
}

impl PhaseOneSimplex {
    pub fn new(rows: usize, structural: usize) -> Self {
        let cols = structural + rows;
        Self {
            rows,
            structural,
            cols,
            tab: vec![0.0; rows * cols],
            cost: vec![0.0; cols],
            values: vec![0.0; rows],
            basis: vec![0; rows],
            state: vec![VarState::AtLower; cols],
            banned: vec![false; cols],
        }
    }

    #[inline]
    fn lower(&self, var: usize) -> f64 {
        if var < self.structural {
            -1.0
        } else {
            0.0
        }
    }

    /// Minimize the phase-1 objective for `A·y = b`; the optimum is the
    /// residual infeasibility (zero, up to tolerance, iff feasible).
    pub fn solve(&mut self, a: &Matrix, b: &[f64]) -> Result<f64> {
        let (m, n) = (self.rows, self.structural);
        assert_eq!(a.rows(), m);
        assert_eq!(a.cols(), n);
        assert_eq!(b.len(), m);

        // start: structural at lower bound (-1), artificials basic at |r|
        // where r = b + A·1
        for st in self.state.iter_mut() {
            *st = VarState::AtLower;
        }
        for bn in self.banned.iter_mut() {
            *bn = false;
        }
        self.tab.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..m {
            let mut r = b[i];
            let row = a.row(i);
            for &v in row {
                r += v;
            }
            let sigma = if r >= 0.0 { 1.0 } else { -1.0 };
            let trow = &mut self.tab[i * self.cols..(i + 1) * self.cols];
            for (j, &v) in row.iter().enumerate() {
                trow[j] = sigma * v;
            }
            trow[n + i] = 1.0;
            self.values[i] = sigma * r;
            self.basis[i] = n + i;
            self.state[n + i] = VarState::Basic;
        }
        // reduced costs: d_j = c_j - Σ_i T_ij (artificial costs are 1)
        for j in 0..n {
            let mut s = 0.0;
            for i in 0..m {
                s += self.tab[i * self.cols + j];
            }
            self.cost[j] = -s;
        }
        for j in n..self.cols {
            self.cost[j] = 0.0;
        }

        let max_pivots = 64 * (self.cols + 1);
        for _pivot in 0..max_pivots {
            // Bland: smallest improving structural index
            let mut entering = None;
            for j in 0..n {
                if self.state[j] == VarState::Basic || self.banned[j] {
                    continue;
                }
                let d = self.cost[j];
                match self.state[j] {
                    VarState::AtLower if d < -TOL_REDUCED_COST => {
                        entering = Some((j, 1.0));
                    }
                    VarState::AtUpper if d > TOL_REDUCED_COST => {
                        entering = Some((j, -1.0));
                    }
                    _ => continue,
                }
                break;
            }
            let Some((enter, dir)) = entering else {
                return Ok(self.objective());
            };

            // ratio test: entering moves by t ≥ 0, basic values change by
            // -t·w with w = dir·column
            let mut t_max = 2.0; // structural bound-to-bound range
            let mut leaving: Option<usize> = None;
            for i in 0..m {
                let w = dir * self.tab[i * self.cols + enter];
                if w > TOL_PIVOT {
                    let room = self.values[i] - self.lower(self.basis[i]);
                    let t = room / w;
                    if t < t_max - RATIO_TIE
                        || (t < t_max + RATIO_TIE
                            && leaving.is_some_and(|r| self.basis[i] < self.basis[r]))
                    {
                        t_max = t.max(0.0);
                        leaving = Some(i);
                    }
                } else if w < -TOL_PIVOT && self.basis[i] < n {
                    // structural basics are capped above at +1; artificials
                    // are unbounded above
                    let room = 1.0 - self.values[i];
                    let t = room / -w;
                    if t < t_max - RATIO_TIE
                        || (t < t_max + RATIO_TIE
                            && leaving.is_some_and(|r| self.basis[i] < self.basis[r]))
                    {
                        t_max = t.max(0.0);
                        leaving = Some(i);
                    }
                }
            }

            match leaving {
                None => {
                    // bound flip of the entering variable
                    for i in 0..m {
                        let w = dir * self.tab[i * self.cols + enter];
                        self.values[i] -= t_max * w;
                    }
                    self.state[enter] = match self.state[enter] {
                        VarState::AtLower => VarState::AtUpper,
                        VarState::AtUpper => VarState::AtLower,
                        VarState::Basic => unreachable!(),
                    };
                }
                Some(row) => {
                    // move values, then swap basis and pivot the tableau
                    for i in 0..m {
                        let w = dir * self.tab[i * self.cols + enter];
                        self.values[i] -= t_max * w;
                    }
                    let enter_value = match self.state[enter] {
                        VarState::AtLower => self.lower(enter) + t_max,
                        VarState::AtUpper => 1.0 - t_max,
                        VarState::Basic => unreachable!(),
                    };
                    let old = self.basis[row];
                    let w_row = dir * self.tab[row * self.cols + enter];
                    self.state[old] = if w_row > 0.0 {
                        VarState::AtLower
                    } else {
                        VarState::AtUpper
                    };
                    if old >= n {
                        self.banned[old] = true;
                    }
                    self.basis[row] = enter;
                    self.state[enter] = VarState::Basic;
                    self.values[row] = enter_value;

                    let piv = self.tab[row * self.cols + enter];
                    if abs(piv) <= TOL_PIVOT {
                        return Err(Error::NumericalFailure("simplex pivot underflow"));
                    }
                    let inv = 1.0 / piv;
                    let (start, end) = (row * self.cols, (row + 1) * self.cols);
                    for v in &mut self.tab[start..end] {
                        *v *= inv;
                    }
                    for i in 0..m {
                        if i == row {
                            continue;
                        }
                        let f = self.tab[i * self.cols + enter];
                        if f != 0.0 {
                            for j in 0..self.cols {
                                let pivot_row_j = self.tab[start + j];
                                self.tab[i * self.cols + j] -= f * pivot_row_j;
                            }
                        }
                    }
                    let f = self.cost[enter];
                    if f != 0.0 {
                        for j in 0..self.cols {
                            self.cost[j] -= f * self.tab[start + j];
                        }
                    }
                }
            }
        }
        Err(Error::NumericalFailure("simplex pivot cap exceeded"))
    }

    fn objective(&self) -> f64 {
        let mut obj = 0.0;
        for i in 0..self.rows {
            if self.basis[i] >= self.structural {
                obj += self.values[i].max(0.0);
            }
        }
        obj
    }
}

/// One-shot feasibility of `{ y : A·y = b, -1 ≤ y ≤ 1 }` at tolerance
/// `tol` on the residual.
pub fn feasible(a: &Matrix, b: &[f64], tol: f64) -> Result<bool> {
    let mut solver = PhaseOneSimplex::new(a.rows(), a.cols());
    Ok(solver.solve(a, b)? <= tol)
}
