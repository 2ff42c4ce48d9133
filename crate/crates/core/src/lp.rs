//! Dense bounded-variable primal simplex over `{x : Ax <= b, l <= x <= u}`.
//!
//! The solver is built once per polytope (phase 1 runs in the constructor)
//! and then answers any number of `maximize` queries, each warm-started from
//! the previous optimal basis. Every answer is a Lagrangian dual bound
//! recomputed from the original data, so a drifting tableau can only loosen
//! a bound, never cut into the feasible region.
//!
//! Pricing is Dantzig's rule; after a streak of degenerate pivots the solver
//! switches to Bland's rule until it makes progress again.

use crate::error::{Error, Result};
use ndarray::{ArrayView1, ArrayView2};

/// Primal feasibility tolerance (scaled by the largest right-hand side).
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Reduced-cost tolerance for optimality.
pub const OPTIMALITY_TOL: f64 = 1e-9;

const PIVOT_TOL: f64 = 1e-11;
const DEGENERATE_STEP: f64 = 1e-12;
const DEGENERATE_STREAK: usize = 40;
// relative primal/dual gap above which a query is re-solved from scratch
const REFRESH_GAP: f64 = 1e-8;

const NONBASIC: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct BoxLp {
    m: usize,
    p: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    ncols: usize,
    // p × ncols tableau B^{-1}[A | ±I | art]
    tab: Vec<f64>,
    value: Vec<f64>,
    basis: Vec<usize>,
    row_of: Vec<usize>,
    cap: Vec<f64>,
    at_upper: Vec<bool>,
    reduced: Vec<f64>,
}

/// Outcome of one `maximize` query.
#[derive(Debug, Clone, Copy)]
pub struct Bound {
    /// Sound upper bound on the maximum (dual certificate).
    pub dual: f64,
    /// Objective at the final basic solution.
    pub primal: f64,
}

impl BoxLp {
    /// Builds the solver and runs phase 1. Returns `Ok(None)` when the
    /// polytope is empty.
    pub fn new(
        a: ArrayView2<'_, f64>,
        b: ArrayView1<'_, f64>,
        lower: &[f64],
        upper: &[f64],
    ) -> Result<Option<Self>> {
        let (p, m) = a.dim();
        if b.len() != p || lower.len() != m || upper.len() != m {
            return Err(Error::invalid(format!(
                "lp dimensions: A is {p}x{m}, b has {}, bounds have {}/{}",
                b.len(),
                lower.len(),
                upper.len()
            )));
        }
        if lower.iter().chain(upper).any(|v| !v.is_finite()) {
            return Err(Error::Unbounded("variable bounds must be finite".into()));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite constraint data"));
        }
        let scale = 1.0 + lower.iter().chain(upper).fold(0.0f64, |s, v| s.max(v.abs()));
        if lower
            .iter()
            .zip(upper)
            .any(|(l, u)| *l > *u + FEASIBILITY_TOL * scale)
        {
            return Ok(None);
        }

        let a_flat: Vec<f64> = a.iter().copied().collect();
        let b_vec: Vec<f64> = b.to_vec();
        let shifted: Vec<f64> = (0..p)
            .map(|i| {
                let row = &a_flat[i * m..(i + 1) * m];
                b_vec[i] - row.iter().zip(lower).map(|(x, l)| x * l).sum::<f64>()
            })
            .collect();
        let n_art = shifted.iter().filter(|v| **v < 0.0).count();
        let ncols = m + p + n_art;

        let mut tab = vec![0.0; p * ncols];
        let mut value = vec![0.0; p];
        let mut basis = vec![0; p];
        let mut row_of = vec![NONBASIC; ncols];
        let mut cap = vec![f64::INFINITY; ncols];
        for j in 0..m {
            cap[j] = (upper[j] - lower[j]).max(0.0);
        }

        let mut art = m + p;
        for i in 0..p {
            let row = &mut tab[i * ncols..(i + 1) * ncols];
            let src = &a_flat[i * m..(i + 1) * m];
            if shifted[i] >= 0.0 {
                row[..m].copy_from_slice(src);
                row[m + i] = 1.0;
                basis[i] = m + i;
                value[i] = shifted[i];
            } else {
                for (dst, s) in row[..m].iter_mut().zip(src) {
                    *dst = -s;
                }
                row[m + i] = -1.0;
                row[art] = 1.0;
                basis[i] = art;
                value[i] = -shifted[i];
                art += 1;
            }
            row_of[basis[i]] = i;
        }

        let mut lp = BoxLp {
            m,
            p,
            a: a_flat,
            b: b_vec,
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            ncols,
            tab,
            value,
            basis,
            row_of,
            cap,
            at_upper: vec![false; ncols],
            reduced: vec![0.0; ncols],
        };

        if n_art > 0 {
            let mut cost = vec![0.0; ncols];
            for c in cost.iter_mut().skip(m + p) {
                *c = -1.0;
            }
            lp.optimize(&cost)?;
            let infeasibility: f64 = (m + p..ncols)
                .map(|j| match lp.row_of[j] {
                    NONBASIC => 0.0,
                    r => lp.value[r].max(0.0),
                })
                .sum();
            let rhs_scale = 1.0 + shifted.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            if infeasibility > FEASIBILITY_TOL * rhs_scale {
                return Ok(None);
            }
            // artificials stay in the tableau, pinned at zero
            for j in m + p..ncols {
                lp.cap[j] = 0.0;
                lp.at_upper[j] = false;
                if lp.row_of[j] != NONBASIC {
                    let r = lp.row_of[j];
                    lp.value[r] = 0.0;
                }
            }
        }
        Ok(Some(lp))
    }

    pub fn num_vars(&self) -> usize {
        self.m
    }

    pub fn num_rows(&self) -> usize {
        self.p
    }

    /// Current basic solution in the original variable space.
    pub fn point(&self) -> Vec<f64> {
        (0..self.m)
            .map(|j| {
                let shift = match self.row_of[j] {
                    NONBASIC if self.at_upper[j] => self.cap[j],
                    NONBASIC => 0.0,
                    r => self.value[r].clamp(0.0, self.cap[j]),
                };
                self.lower[j] + shift
            })
            .collect()
    }

    /// Maximizes `c·x`. The returned `dual` value is an upper bound on the
    /// true maximum that holds regardless of accumulated round-off.
    pub fn maximize(&mut self, c: &[f64]) -> Result<Bound> {
        if c.len() != self.m {
            return Err(Error::invalid(format!(
                "objective has {} coefficients, expected {}",
                c.len(),
                self.m
            )));
        }
        let mut cost = vec![0.0; self.ncols];
        cost[..self.m].copy_from_slice(c);
        self.optimize(&cost)?;
        let bound = self.certify(c);
        let gap = bound.dual - bound.primal;
        if gap > REFRESH_GAP * (1.0 + bound.primal.abs()) {
            // rebuild and retry once; keep the tighter certificate
            let a = ndarray::ArrayView2::from_shape((self.p, self.m), &self.a)
                .map_err(|e| Error::Internal(e.to_string()))?;
            let b = ndarray::ArrayView1::from(&self.b[..]);
            if let Some(mut fresh) = BoxLp::new(a, b, &self.lower, &self.upper)? {
                fresh.optimize(&cost)?;
                let retry = fresh.certify(c);
                if retry.dual < bound.dual {
                    *self = fresh;
                    return Ok(retry);
                }
            }
        }
        Ok(bound)
    }

    fn certify(&self, c: &[f64]) -> Bound {
        let (m, p) = (self.m, self.p);
        let pi: Vec<f64> = (0..p).map(|i| (-self.reduced[m + i]).max(0.0)).collect();
        let mut dual: f64 = pi.iter().zip(&self.b).map(|(y, b)| y * b).sum();
        for (j, &cj) in c.iter().enumerate().take(m) {
            let mut r = cj;
            for (i, &y) in pi.iter().enumerate() {
                if y != 0.0 {
                    r -= y * self.a[i * m + j];
                }
            }
            dual += if r > 0.0 {
                r * self.upper[j]
            } else {
                r * self.lower[j]
            };
        }
        let primal = self.point().iter().zip(c).map(|(x, c)| x * c).sum();
        Bound { dual, primal }
    }

    fn optimize(&mut self, cost: &[f64]) -> Result<()> {
        let nc = self.ncols;
        self.reduced.copy_from_slice(cost);
        for i in 0..self.p {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.tab[i * nc..(i + 1) * nc];
                for (d, t) in self.reduced.iter_mut().zip(row) {
                    *d -= cb * t;
                }
            }
        }
        for i in 0..self.p {
            self.reduced[self.basis[i]] = 0.0;
        }

        let max_iter = 50 * (self.p + self.m) + 1000;
        let mut streak = 0usize;
        for _ in 0..max_iter {
            let bland = streak > DEGENERATE_STREAK;
            let Some(j) = self.entering(bland) else {
                return Ok(());
            };
            let dir = if self.at_upper[j] { -1.0 } else { 1.0 };

            // ratio test
            let mut theta = self.cap[j];
            let mut leave: Option<(usize, bool)> = None;
            let mut best_pivot = 0.0f64;
            for i in 0..self.p {
                let alpha = dir * self.tab[i * nc + j];
                let bi = self.basis[i];
                let limit = if alpha > PIVOT_TOL {
                    Some(((self.value[i]).max(0.0) / alpha, false))
                } else if alpha < -PIVOT_TOL && self.cap[bi].is_finite() {
                    Some((((self.cap[bi] - self.value[i]).max(0.0)) / -alpha, true))
                } else {
                    None
                };
                let Some((lim, to_upper)) = limit else {
                    continue;
                };
                // ties with a bound flip keep the flip
                let better = if lim < theta - DEGENERATE_STEP {
                    true
                } else if lim <= theta + DEGENERATE_STEP {
                    match leave {
                        Some((r, _)) if bland => bi < self.basis[r],
                        Some(_) => alpha.abs() > best_pivot,
                        None => false,
                    }
                } else {
                    false
                };
                if better {
                    theta = lim.min(theta);
                    leave = Some((i, to_upper));
                    best_pivot = alpha.abs();
                }
            }
            if !theta.is_finite() {
                return Err(Error::Unbounded(format!("column {j} has no blocking bound")));
            }

            let step = dir * theta;
            if step != 0.0 {
                for i in 0..self.p {
                    let t = self.tab[i * nc + j];
                    if t != 0.0 {
                        self.value[i] -= step * t;
                    }
                }
            }
            if theta <= DEGENERATE_STEP {
                streak += 1;
            } else {
                streak = 0;
            }

            match leave {
                None => self.at_upper[j] = !self.at_upper[j],
                Some((r, to_upper)) => {
                    let entering_value = if dir > 0.0 { theta } else { self.cap[j] - theta };
                    let out = self.basis[r];
                    self.row_of[out] = NONBASIC;
                    self.at_upper[out] = to_upper && self.cap[out] > 0.0;
                    self.basis[r] = j;
                    self.row_of[j] = r;
                    self.at_upper[j] = false;
                    self.value[r] = entering_value;
                    self.pivot(r, j);
                }
            }
        }
        Err(Error::Solver(format!(
            "iteration limit reached ({} rows, {} variables)",
            self.p, self.m
        )))
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.ncols {
            if self.row_of[j] != NONBASIC || self.cap[j] <= 0.0 {
                continue;
            }
            let d = self.reduced[j];
            let gain = if self.at_upper[j] { -d } else { d };
            if gain <= OPTIMALITY_TOL {
                continue;
            }
            if bland {
                return Some(j);
            }
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((j, gain));
            }
        }
        best.map(|(j, _)| j)
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let nc = self.ncols;
        let piv = self.tab[r * nc + j];
        let (before, rest) = self.tab.split_at_mut(r * nc);
        let (prow, after) = rest.split_at_mut(nc);
        for v in prow.iter_mut() {
            *v /= piv;
        }
        prow[j] = 1.0;
        for row in before.chunks_exact_mut(nc).chain(after.chunks_exact_mut(nc)) {
            let f = row[j];
            if f != 0.0 {
                for (x, y) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * y;
                }
                row[j] = 0.0;
            }
        }
        let f = self.reduced[j];
        if f != 0.0 {
            for (x, y) in self.reduced.iter_mut().zip(prow.iter()) {
                *x -= f * y;
            }
            self.reduced[j] = 0.0;
        }
    }
}
