//! Dense two-phase primal simplex with Bland's rule.
//!
//! Solves `min cᵀx  s.t.  Ax = b, x >= 0` for `b >= 0`. Bland's rule (lowest
//! index enters, lowest basic index leaves on ratio ties) guarantees
//! termination on degenerate problems, which transport polytopes are.

use serde::Serialize;

use crate::scalar::LpScalar;

/// Linear program in standard form.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardFormLp<S> {
    /// Constraint rows.
    pub a: Vec<Vec<S>>,
    pub b: Vec<S>,
    pub c: Vec<S>,
}

impl<S: LpScalar> StandardFormLp<S> {
    pub fn rows(&self) -> usize {
        self.a.len()
    }

    pub fn cols(&self) -> usize {
        self.c.len()
    }

    /// Convert every coefficient exactly into another field.
    pub fn convert<U: LpScalar>(&self) -> Option<StandardFormLp<U>> {
        let conv = |v: &[S]| v.iter().map(|x| U::from_f64_exact(x.approx_f64())).collect::<Option<Vec<U>>>();
        Some(StandardFormLp {
            a: self.a.iter().map(|r| conv(r)).collect::<Option<_>>()?,
            b: conv(&self.b)?,
            c: conv(&self.c)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration budget exhausted; the value is the best basic solution reached.
    Stalled,
}

#[derive(Clone, Debug)]
pub struct LpSolution<S> {
    pub status: LpStatus,
    pub value: S,
    pub x: Vec<S>,
    /// Basic column per remaining row.
    pub basis: Vec<usize>,
    pub iterations: usize,
}

pub const DEFAULT_PIVOT_LIMIT: usize = 200_000;

struct Tableau<S> {
    rows: Vec<Vec<S>>,
    obj: Vec<S>,
    basis: Vec<usize>,
    width: usize,
}

impl<S: LpScalar> Tableau<S> {
    fn rhs(&self, i: usize) -> &S {
        &self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c].clone();
            if f.is_zero() {
                continue;
            }
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v = v.clone() - f.clone() * pv.clone();
            }
            row[c] = S::zero();
        }
        let f = self.obj[c].clone();
        if !f.is_zero() {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v = v.clone() - f.clone() * pv.clone();
            }
            self.obj[c] = S::zero();
        }
        self.basis[r] = c;
    }

    /// Run Bland iterations over columns `< allowed`. Returns `Some(true)` at
    /// optimality, `Some(false)` when unbounded, `None` when the budget ran out.
    fn optimize(&mut self, allowed: usize, budget: &mut usize, iterations: &mut usize) -> Option<bool> {
        loop {
            let Some(enter) = (0..allowed).find(|&j| self.obj[j].is_neg()) else {
                return Some(true);
            };
            let mut leave: Option<usize> = None;
            let mut best: Option<S> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][enter];
                if !a.is_pos() {
                    continue;
                }
                let ratio = self.rhs(i).clone() / a.clone();
                let better = match &best {
                    None => true,
                    Some(b) => {
                        let d = ratio.clone() - b.clone();
                        d.is_neg() || (!d.is_pos() && self.basis[i] < self.basis[leave.unwrap()])
                    }
                };
                if better {
                    best = Some(ratio);
                    leave = Some(i);
                }
            }
            let Some(r) = leave else {
                return Some(false);
            };
            if *budget == 0 {
                return None;
            }
            *budget -= 1;
            *iterations += 1;
            self.pivot(r, enter);
        }
    }
}

/// Solve `lp` to optimality (or report why not).
pub fn simplex_solve<S: LpScalar>(lp: &StandardFormLp<S>) -> LpSolution<S> {
    simplex_solve_with_limit(lp, DEFAULT_PIVOT_LIMIT)
}

pub fn simplex_solve_with_limit<S: LpScalar>(lp: &StandardFormLp<S>, pivot_limit: usize) -> LpSolution<S> {
    let (m, n) = (lp.rows(), lp.cols());
    let width = n + m;
    let mut rows = Vec::with_capacity(m);
    for (i, (a, b)) in lp.a.iter().zip(&lp.b).enumerate() {
        let flip = b.is_neg();
        let mut row: Vec<S> = a.iter().map(|x| if flip { -x.clone() } else { x.clone() }).collect();
        row.extend((0..m).map(|k| if k == i { S::one() } else { S::zero() }));
        row.push(if flip { -b.clone() } else { b.clone() });
        rows.push(row);
    }
    // phase 1: minimize the sum of artificials
    let mut obj = vec![S::zero(); width + 1];
    for row in &rows {
        for j in 0..n {
            obj[j] = obj[j].clone() - row[j].clone();
        }
        obj[width] = obj[width].clone() - row[width].clone();
    }
    let mut tab = Tableau {
        rows,
        obj,
        basis: (n..n + m).collect(),
        width,
    };
    let mut budget = pivot_limit;
    let mut iterations = 0;
    let stalled = |tab: &Tableau<S>, iterations| LpSolution {
        status: LpStatus::Stalled,
        value: S::zero(),
        x: primal(tab, n),
        basis: tab.basis.clone(),
        iterations,
    };
    if tab.optimize(width, &mut budget, &mut iterations).is_none() {
        return stalled(&tab, iterations);
    }
    if (-tab.obj[width].clone()).is_pos() {
        return LpSolution {
            status: LpStatus::Infeasible,
            value: S::zero(),
            x: vec![S::zero(); n],
            basis: tab.basis.clone(),
            iterations,
        };
    }
    // drive artificials out of the basis; rows where that is impossible are redundant
    let mut i = 0;
    while i < tab.rows.len() {
        if tab.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| tab.rows[i][j].is_nonzero()) {
                tab.pivot(i, j);
                iterations += 1;
            } else {
                tab.rows.remove(i);
                tab.basis.remove(i);
                continue;
            }
        }
        i += 1;
    }
    // phase 2 reduced costs
    let mut obj: Vec<S> = lp.c.iter().cloned().chain((0..=m).map(|_| S::zero())).collect();
    for (row, &bj) in tab.rows.iter().zip(&tab.basis) {
        let cb = lp.c[bj].clone();
        if cb.is_zero() {
            continue;
        }
        for (o, v) in obj.iter_mut().zip(row) {
            *o = o.clone() - cb.clone() * v.clone();
        }
    }
    tab.obj = obj;
    let status = match tab.optimize(n, &mut budget, &mut iterations) {
        None => LpStatus::Stalled,
        Some(false) => LpStatus::Unbounded,
        Some(true) => LpStatus::Optimal,
    };
    let x = primal(&tab, n);
    let mut value = S::zero();
    for (cj, xj) in lp.c.iter().zip(&x) {
        value = value + cj.clone() * xj.clone();
    }
    LpSolution {
        status,
        value,
        x,
        basis: tab.basis,
        iterations,
    }
}

fn primal<S: LpScalar>(tab: &Tableau<S>, n: usize) -> Vec<S> {
    let mut x = vec![S::zero(); n];
    for (i, &bj) in tab.basis.iter().enumerate() {
        if bj < n {
            x[bj] = tab.rhs(i).clone();
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn lp(a: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>) -> StandardFormLp<f64> {
        StandardFormLp { a, b, c }
    }

    #[test]
    fn small_textbook_problem() {
        // min -x - y  s.t. x + s1 = 2, y + s2 = 3, x + y + s3 = 4
        let p = lp(
            vec![
                vec![1.0, 0.0, 1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0, 1.0, 0.0],
                vec![1.0, 1.0, 0.0, 0.0, 1.0],
            ],
            vec![2.0, 3.0, 4.0],
            vec![-1.0, -1.0, 0.0, 0.0, 0.0],
        );
        let s = simplex_solve(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value + 4.0).abs() < 1e-12);
        let q = simplex_solve(&p.convert::<BigRational>().unwrap());
        assert_eq!(q.value, BigRational::from_integer((-4).into()));
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let inf = lp(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![1.0, 2.0], vec![0.0, 0.0]);
        assert_eq!(simplex_solve(&inf).status, LpStatus::Infeasible);
        let unb = lp(vec![vec![1.0, -1.0]], vec![1.0], vec![0.0, -1.0]);
        assert_eq!(simplex_solve(&unb).status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_rows_are_dropped() {
        let p = lp(vec![vec![1.0, 1.0], vec![2.0, 2.0]], vec![1.0, 2.0], vec![1.0, 2.0]);
        let s = simplex_solve(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.basis.len(), 1);
        assert!((s.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pivot_limit_reports_stall() {
        let p = lp(vec![vec![1.0, 1.0]], vec![1.0], vec![1.0, 0.0]);
        assert_eq!(simplex_solve_with_limit(&p, 0).status, LpStatus::Stalled);
    }
}
