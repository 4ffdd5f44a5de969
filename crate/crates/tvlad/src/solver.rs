//! Exact minimization of the weighted least-absolute-deviation objective
//!
//! ```text
//!     min_beta  sum_t c_t | y_t - x_t' beta |,   c_t >= 0,
//! ```
//!
//! the inner problem of every local fit and bootstrap replicate, plus a
//! weighted least-squares baseline.
//!
//! The LAD solve is a primal simplex specialized to interpolation bases:
//! the minimizer of a full-rank problem sits at a point interpolating p
//! rows. Starting from any nonsingular basis, each step relaxes one basis
//! row, minimizes the one-dimensional piecewise-linear objective exactly by
//! a weighted median over residual breakpoints, and exchanges the basis row
//! for the row whose residual hits zero. Degenerate vertices are traversed
//! with zero-length pivots under a lowest-index rule. Every exchange
//! strictly decreases the objective, so the walk terminates at a point
//! satisfying the subgradient optimality condition.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Outcome classification for a LAD solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Unique minimizer found.
    Optimal,
    /// The minimizer set is a face (flat edge, rank deficiency or an empty
    /// objective); the returned point attains the minimum.
    Degenerate,
    /// Kept for API completeness; the objective is bounded below by zero
    /// for nonnegative weights, so this status is never produced.
    Unbounded,
}

/// One weighted regression problem: `n` rows of a p-column design, a
/// response and nonnegative per-row weights.
#[derive(Debug, Clone)]
pub struct WladProblem {
    n: usize,
    p: usize,
    x: Vec<f64>, // row-major n*p
    y: Vec<f64>,
    c: Vec<f64>,
}

impl WladProblem {
    pub fn new(design: &[Vec<f64>], response: &[f64], weights: &[f64]) -> Result<Self> {
        let n = design.len();
        if n == 0 {
            return Err(Error::Data("empty design".into()));
        }
        let p = design[0].len();
        let mut x = Vec::with_capacity(n * p);
        for row in design {
            if row.len() != p {
                return Err(Error::Data("ragged design matrix".into()));
            }
            x.extend_from_slice(row);
        }
        Self::from_flat(p, x, response.to_vec(), weights.to_vec())
    }

    /// Build from a row-major flat design; the layout the estimator produces.
    pub fn from_flat(p: usize, x: Vec<f64>, y: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if p == 0 || n == 0 {
            return Err(Error::Data("problem needs n >= 1 and p >= 1".into()));
        }
        if x.len() != n * p || c.len() != n {
            return Err(Error::Data(
                "design/response/weight lengths disagree".into(),
            ));
        }
        if x.iter().any(|v| !v.is_finite())
            || y.iter().any(|v| !v.is_finite())
            || c.iter().any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::Data(
                "design, response and weights must be finite with weights >= 0".into(),
            ));
        }
        Ok(Self { n, p, x, y, c })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.x[t * self.p..(t + 1) * self.p]
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn weights(&self) -> &[f64] {
        &self.c
    }

    /// sum_t c_t |y_t - x_t' beta|
    pub fn objective(&self, beta: &[f64]) -> f64 {
        let mut obj = 0.0;
        for t in 0..self.n {
            if self.c[t] == 0.0 {
                continue;
            }
            obj += self.c[t] * (self.y[t] - dot(self.row(t), beta)).abs();
        }
        obj
    }

    /// Largest coordinate-wise violation of the subgradient optimality
    /// condition at `beta`; nonpositive means the certificate holds.
    ///
    /// For each coordinate j the condition is
    /// `|sum_{r_t != 0} c_t sign(r_t) x_tj| <= sum_{r_t = 0} c_t |x_tj| + 1e-7 sum c`.
    pub fn subgradient_violation(&self, beta: &[f64]) -> f64 {
        let ztol = self.zero_tol();
        let slack: f64 = 1e-7 * self.c.iter().sum::<f64>();
        let mut worst = f64::NEG_INFINITY;
        for j in 0..self.p {
            let mut signed = 0.0;
            let mut at_zero = 0.0;
            for t in 0..self.n {
                if self.c[t] == 0.0 {
                    continue;
                }
                let r = self.y[t] - dot(self.row(t), beta);
                let xtj = self.x[t * self.p + j];
                if r.abs() <= ztol {
                    at_zero += self.c[t] * xtj.abs();
                } else {
                    signed += self.c[t] * r.signum() * xtj;
                }
            }
            worst = worst.max(signed.abs() - at_zero - slack);
        }
        worst
    }

    fn zero_tol(&self) -> f64 {
        let ymax = self.y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        1e-9 * (1.0 + ymax)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WladSolution {
    pub beta: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
}

#[derive(Debug, Clone)]
pub struct WlsSolution {
    pub beta: Vec<f64>,
    /// Set when the weighted Gram matrix was singular and a least-norm
    /// solution was substituted.
    pub singular: bool,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Exact weighted LAD minimization.
pub fn solve_wlad(problem: &WladProblem) -> Result<WladSolution> {
    let p = problem.p;
    let active: Vec<usize> = (0..problem.n).filter(|&t| problem.c[t] > 0.0).collect();
    if active.is_empty() {
        return Ok(WladSolution {
            beta: vec![0.0; p],
            objective: 0.0,
            status: SolveStatus::Degenerate,
        });
    }

    // A full set of independent rows sends us down the fast basis walk;
    // otherwise fall back to an SVD rank reduction mapped back through the
    // row space (minimum-norm representative of the optimal face).
    if initial_basis(problem, &active).is_some() {
        return walk_bases(problem, &active);
    }

    let m = active.len();
    let design = DMatrix::from_fn(m, p, |i, j| problem.x[active[i] * p + j]);
    let svd = design.svd(false, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |a, v| a.max(*v));
    let rank_tol = smax * (m.max(p) as f64) * f64::EPSILON;
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > rank_tol)
        .count()
        .min(p.saturating_sub(1));

    if rank == 0 {
        // all active rows (numerically) zero: the objective does not
        // depend on beta and zero is the minimum-norm representative
        let obj: f64 = active
            .iter()
            .map(|&t| problem.c[t] * problem.y[t].abs())
            .sum();
        return Ok(WladSolution {
            beta: vec![0.0; p],
            objective: obj,
            status: SolveStatus::Degenerate,
        });
    }

    let vt = svd.v_t.as_ref().expect("svd computed with v_t");
    // columns of v_r span the (numerical) row space; the reduction is
    // strictly smaller than p, so the recursion terminates
    let v_r = vt.rows(0, rank).transpose(); // p x rank
    let mut xr = Vec::with_capacity(problem.n * rank);
    for t in 0..problem.n {
        let row = problem.row(t);
        for j in 0..rank {
            xr.push((0..p).map(|i| row[i] * v_r[(i, j)]).sum::<f64>());
        }
    }
    let reduced = WladProblem::from_flat(rank, xr, problem.y.clone(), problem.c.clone())?;
    let sol = solve_wlad(&reduced)?;
    let gamma = DVector::from_vec(sol.beta);
    let beta = &v_r * gamma;
    Ok(WladSolution {
        beta: beta.iter().copied().collect(),
        objective: sol.objective,
        status: SolveStatus::Degenerate,
    })
}

/// Full-rank basis-exchange walk.
fn walk_bases(problem: &WladProblem, active: &[usize]) -> Result<WladSolution> {
    let p = problem.p;
    let mut basis = initial_basis(problem, active)
        .ok_or_else(|| Error::Numeric("no nonsingular starting basis found".into()))?;
    let mut beta = solve_basis(problem, &basis)
        .ok_or_else(|| Error::Numeric("singular starting basis".into()))?;

    let ztol = problem.zero_tol();
    let max_exchanges = 60 + 8 * active.len();
    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    let mut flat_edge = false;

    'outer: for _ in 0..max_exchanges {
        let objective = problem.objective(&beta);
        let decrease_tol = 1e-13 * (1.0 + objective);

        let residuals: Vec<f64> = active
            .iter()
            .map(|&t| problem.y[t] - dot(problem.row(t), &beta))
            .collect();

        for i in 0..p {
            let dir = match basis_direction(problem, &basis, i) {
                Some(d) => d,
                None => continue,
            };
            let (theta, enter_pos) = match line_search(problem, active, &residuals, &dir) {
                Some(s) => s,
                None => continue,
            };
            if theta == 0.0 {
                continue;
            }
            let candidate: Vec<f64> = beta.iter().zip(&dir).map(|(b, d)| b + theta * d).collect();
            if problem.objective(&candidate) < objective - decrease_tol {
                let entering = active[enter_pos];
                if basis.contains(&entering) {
                    continue;
                }
                let mut next = basis.clone();
                next[i] = entering;
                next.sort_unstable();
                if let Some(refined) = solve_basis(problem, &next) {
                    basis = next;
                    beta = refined;
                } else {
                    beta = candidate;
                }
                continue 'outer;
            }
        }

        // No strictly improving edge from this basis. Check the one-sided
        // derivatives; pivot through equivalent bases (zero step) if an
        // edge still points downhill numerically.
        let (min_derivative, any_flat) = edge_derivatives(problem, active, &basis, &beta, ztol);
        flat_edge = any_flat;
        if min_derivative >= -1e-9 * (1.0 + objective) {
            break;
        }
        visited.insert(basis.clone());
        let zero_rows: Vec<usize> = active
            .iter()
            .enumerate()
            .filter(|(k, t)| residuals[*k].abs() <= ztol && !basis.contains(t))
            .map(|(_, t)| *t)
            .collect();
        let mut pivoted = false;
        'pivot: for &z in &zero_rows {
            for i in 0..p {
                let mut next = basis.clone();
                next[i] = z;
                next.sort_unstable();
                if visited.contains(&next) {
                    continue;
                }
                if let Some(b) = solve_basis(problem, &next) {
                    visited.insert(next.clone());
                    basis = next;
                    beta = b;
                    pivoted = true;
                    break 'pivot;
                }
            }
        }
        if !pivoted || visited.len() > 500 {
            break;
        }
    }

    let status = if flat_edge {
        SolveStatus::Degenerate
    } else {
        SolveStatus::Optimal
    };
    Ok(WladSolution {
        objective: problem.objective(&beta),
        beta,
        status,
    })
}

/// First p active rows that are linearly independent (greedy Gram-Schmidt).
fn initial_basis(problem: &WladProblem, active: &[usize]) -> Option<Vec<usize>> {
    let p = problem.p;
    let mut chosen: Vec<usize> = Vec::with_capacity(p);
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(p);
    for &t in active {
        let mut v: Vec<f64> = problem.row(t).to_vec();
        let norm0 = dot(&v, &v).sqrt();
        if norm0 == 0.0 {
            continue;
        }
        for q in &ortho {
            let proj = dot(&v, q);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= proj * qi;
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-10 * norm0.max(1.0) {
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            ortho.push(v);
            chosen.push(t);
            if chosen.len() == p {
                return Some(chosen);
            }
        }
    }
    None
}

/// Interpolating coefficients of a basis, if nonsingular.
fn solve_basis(problem: &WladProblem, basis: &[usize]) -> Option<Vec<f64>> {
    let rhs: Vec<f64> = basis.iter().map(|&t| problem.y[t]).collect();
    solve_small(problem, basis, &rhs)
}

/// Direction that relaxes basis position `i` while keeping the other basis
/// rows interpolated: the i-th column of the basis inverse.
fn basis_direction(problem: &WladProblem, basis: &[usize], i: usize) -> Option<Vec<f64>> {
    let p = problem.p;
    let mut rhs = vec![0.0; p];
    rhs[i] = 1.0;
    solve_small(problem, basis, &rhs)
}

/// Solve X_B v = rhs; closed forms for p <= 2, LU above that.
fn solve_small(problem: &WladProblem, basis: &[usize], rhs: &[f64]) -> Option<Vec<f64>> {
    let p = problem.p;
    let finite = |v: Vec<f64>| {
        if v.iter().all(|x| x.is_finite()) {
            Some(v)
        } else {
            None
        }
    };
    match p {
        1 => {
            let a = problem.x[basis[0]];
            if a == 0.0 {
                return None;
            }
            finite(vec![rhs[0] / a])
        }
        2 => {
            let r0 = problem.row(basis[0]);
            let r1 = problem.row(basis[1]);
            let det = r0[0] * r1[1] - r0[1] * r1[0];
            if det == 0.0 {
                return None;
            }
            finite(vec![
                (rhs[0] * r1[1] - r0[1] * rhs[1]) / det,
                (r0[0] * rhs[1] - rhs[0] * r1[0]) / det,
            ])
        }
        _ => {
            let xb = DMatrix::from_fn(p, p, |r, c| problem.x[basis[r] * p + c]);
            let b = DVector::from_column_slice(rhs);
            xb.lu()
                .solve(&b)
                .and_then(|v| finite(v.iter().copied().collect()))
        }
    }
}

/// Exact minimizer of `phi(theta) = sum c_t |r_t - theta s_t|` by weighted
/// median over breakpoints; returns `(theta*, position of entering row)`.
fn line_search(
    problem: &WladProblem,
    active: &[usize],
    residuals: &[f64],
    dir: &[f64],
) -> Option<(f64, usize)> {
    let mut s_vals: Vec<(usize, f64)> = Vec::with_capacity(active.len());
    let mut smax = 0.0f64;
    for (k, &t) in active.iter().enumerate() {
        let s = dot(problem.row(t), dir);
        smax = smax.max(s.abs());
        s_vals.push((k, s));
    }
    if smax == 0.0 {
        return None;
    }
    let s_floor = 1e-12 * smax;
    let mut breaks: Vec<(f64, f64, usize)> = Vec::with_capacity(active.len());
    for (k, s) in s_vals {
        if s.abs() > s_floor {
            let t = active[k];
            breaks.push((residuals[k] / s, problem.c[t] * s.abs(), k));
        }
    }
    if breaks.is_empty() {
        return None;
    }
    breaks.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.2.cmp(&b.2)));
    let total: f64 = breaks.iter().map(|b| b.1).sum();
    let half = 0.5 * total;
    let mut cum = 0.0;
    for (theta, w, k) in &breaks {
        cum += w;
        if cum >= half {
            return Some((*theta, *k));
        }
    }
    let last = breaks.last().unwrap();
    Some((last.0, last.2))
}

/// Minimum one-sided directional derivative over the 2p basis edges and
/// whether any edge is flat (zero derivative within tolerance).
fn edge_derivatives(
    problem: &WladProblem,
    active: &[usize],
    basis: &[usize],
    beta: &[f64],
    ztol: f64,
) -> (f64, bool) {
    let p = problem.p;
    let mut min_d = f64::INFINITY;
    let mut flat = false;
    for i in 0..p {
        let dir = match basis_direction(problem, basis, i) {
            Some(d) => d,
            None => continue,
        };
        let mut fwd = 0.0;
        let mut bwd = 0.0;
        let mut scale = 0.0;
        for &t in active {
            let s = dot(problem.row(t), &dir);
            let r = problem.y[t] - dot(problem.row(t), beta);
            let cs = problem.c[t] * s;
            scale += cs.abs();
            if r.abs() <= ztol {
                fwd += cs.abs();
                bwd += cs.abs();
            } else {
                fwd -= cs * r.signum();
                bwd += cs * r.signum();
            }
        }
        let flat_tol = 1e-9 * (1.0 + scale);
        if fwd.abs() <= flat_tol || bwd.abs() <= flat_tol {
            flat = true;
        }
        min_d = min_d.min(fwd.min(bwd));
    }
    (min_d, flat)
}

/// Weighted least squares via the normal equations; falls back to the
/// least-norm SVD solution when the weighted Gram matrix is singular.
pub fn solve_wls(problem: &WladProblem) -> Result<WlsSolution> {
    let p = problem.p;
    let mut gram = DMatrix::zeros(p, p);
    let mut rhs = DVector::zeros(p);
    for t in 0..problem.n {
        let c = problem.c[t];
        if c == 0.0 {
            continue;
        }
        let row = problem.row(t);
        for i in 0..p {
            rhs[i] += c * row[i] * problem.y[t];
            for j in 0..p {
                gram[(i, j)] += c * row[i] * row[j];
            }
        }
    }
    if let Some(chol) = gram.clone().cholesky() {
        let beta: DVector<f64> = chol.solve(&rhs);
        if beta.iter().all(|v| v.is_finite()) {
            return Ok(WlsSolution {
                beta: beta.iter().copied().collect(),
                singular: false,
            });
        }
    }
    // least-norm solve of sqrt(c) X beta = sqrt(c) y
    let rows = problem.n;
    let mut a = DMatrix::zeros(rows, p);
    let mut b = DVector::zeros(rows);
    for t in 0..rows {
        let w = problem.c[t].sqrt();
        for j in 0..p {
            a[(t, j)] = w * problem.x[t * p + j];
        }
        b[t] = w * problem.y[t];
    }
    let svd = a.svd(true, true);
    let beta = svd
        .solve(&b, f64::EPSILON * rows.max(p) as f64)
        .map_err(|e| Error::Numeric(format!("svd solve failed: {e}")))?;
    Ok(WlsSolution {
        beta: beta.iter().copied().collect(),
        singular: true,
    })
}
