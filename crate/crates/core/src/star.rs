//! Generalized star sets `{c + V·α : C·α <= d, α_lo <= α <= α_hi}`.
//!
//! A star over a time-series window lives on the flattened `n_f · t_s` state
//! vector in feature-major order: feature `i`, time `j` (both 0-based) sits at
//! index `i * t_s + j`.

use crate::error::{Error, Result};
use crate::lp::BoxLp;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Outward widening applied to every LP bound.
pub const TAU_LP: f64 = 1e-9;

// dims per warm-started LP chunk; fixed so results do not depend on thread count
const BOUND_CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(Error::invalid(format!("interval [{lower}, {upper}]")));
        }
        Ok(Interval { lower, upper })
    }

    pub fn point(x: f64) -> Self {
        Interval { lower: x, upper: x }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lower <= other.lower && other.upper <= self.upper
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lower = self.lower.max(other.lower);
        let upper = self.upper.min(other.upper);
        (lower <= upper).then_some(Interval { lower, upper })
    }

    pub fn widen(&self, by: f64) -> Interval {
        Interval {
            lower: self.lower - by,
            upper: self.upper + by,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Star {
    center: Array1<f64>,
    basis: Array2<f64>,
    constraints: Array2<f64>,
    rhs: Array1<f64>,
    alpha_lower: Array1<f64>,
    alpha_upper: Array1<f64>,
}

impl Star {
    /// Validates shapes and checks that the predicate is feasible.
    pub fn new(
        center: Array1<f64>,
        basis: Array2<f64>,
        constraints: Array2<f64>,
        rhs: Array1<f64>,
        alpha_lower: Array1<f64>,
        alpha_upper: Array1<f64>,
    ) -> Result<Self> {
        let star = Self::from_parts(center, basis, constraints, rhs, alpha_lower, alpha_upper)?;
        if star.is_empty()? {
            return Err(Error::EmptySet("predicate has no feasible point".into()));
        }
        Ok(star)
    }

    pub(crate) fn from_parts(
        center: Array1<f64>,
        basis: Array2<f64>,
        constraints: Array2<f64>,
        rhs: Array1<f64>,
        alpha_lower: Array1<f64>,
        alpha_upper: Array1<f64>,
    ) -> Result<Self> {
        let n = center.len();
        let m = basis.ncols();
        if basis.nrows() != n {
            return Err(Error::invalid(format!(
                "basis has {} rows, center has {n} entries",
                basis.nrows()
            )));
        }
        if constraints.ncols() != m || alpha_lower.len() != m || alpha_upper.len() != m {
            return Err(Error::invalid(format!(
                "predicate width mismatch: {m} generators, {} constraint columns, {}/{} alpha bounds",
                constraints.ncols(),
                alpha_lower.len(),
                alpha_upper.len()
            )));
        }
        if constraints.nrows() != rhs.len() {
            return Err(Error::invalid(format!(
                "{} constraint rows but {} right-hand sides",
                constraints.nrows(),
                rhs.len()
            )));
        }
        if alpha_lower.iter().chain(alpha_upper.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("alpha bounds must be finite"));
        }
        if center.iter().chain(basis.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("star center and basis must be finite"));
        }
        // reshaping in the layer code relies on row-major storage
        let basis = if basis.is_standard_layout() {
            basis
        } else {
            basis.as_standard_layout().into_owned()
        };
        let constraints = if constraints.is_standard_layout() {
            constraints
        } else {
            constraints.as_standard_layout().into_owned()
        };
        Ok(Star {
            center,
            basis,
            constraints,
            rhs,
            alpha_lower,
            alpha_upper,
        })
    }

    /// Axis-aligned box `[center - radii, center + radii]`. One generator
    /// `radius_k · e_k` with `α_k ∈ [-1, 1]` per strictly positive radius.
    pub fn from_box(center: &[f64], radii: &[f64]) -> Result<Self> {
        if center.len() != radii.len() {
            return Err(Error::invalid(format!(
                "center has {} entries, radii has {}",
                center.len(),
                radii.len()
            )));
        }
        if let Some(r) = radii.iter().find(|r| !r.is_finite() || **r < 0.0) {
            return Err(Error::invalid(format!("radius {r} must be finite and non-negative")));
        }
        let active: Vec<usize> = (0..radii.len()).filter(|&k| radii[k] > 0.0).collect();
        let mut basis = Array2::zeros((center.len(), active.len()));
        for (g, &k) in active.iter().enumerate() {
            basis[[k, g]] = radii[k];
        }
        let m = active.len();
        Self::from_parts(
            Array1::from(center.to_vec()),
            basis,
            Array2::zeros((0, m)),
            Array1::zeros(0),
            Array1::from_elem(m, -1.0),
            Array1::from_elem(m, 1.0),
        )
    }

    pub fn point(x: &[f64]) -> Result<Self> {
        Self::from_box(x, &vec![0.0; x.len()])
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.basis.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.nrows()
    }

    pub fn center(&self) -> ArrayView1<'_, f64> {
        self.center.view()
    }

    pub fn basis(&self) -> ArrayView2<'_, f64> {
        self.basis.view()
    }

    pub fn constraints(&self) -> ArrayView2<'_, f64> {
        self.constraints.view()
    }

    pub fn rhs(&self) -> ArrayView1<'_, f64> {
        self.rhs.view()
    }

    pub fn alpha_lower(&self) -> ArrayView1<'_, f64> {
        self.alpha_lower.view()
    }

    pub fn alpha_upper(&self) -> ArrayView1<'_, f64> {
        self.alpha_upper.view()
    }

    /// Image under `x ↦ W·x + b`. Exact; the predicate is carried over.
    pub fn affine_map(&self, w: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Result<Star> {
        if w.ncols() != self.dim() {
            return Err(Error::invalid(format!(
                "map has {} columns, star dimension is {}",
                w.ncols(),
                self.dim()
            )));
        }
        if b.len() != w.nrows() {
            return Err(Error::invalid(format!(
                "bias has {} entries, map has {} rows",
                b.len(),
                w.nrows()
            )));
        }
        let center = w.dot(&self.center) + b;
        let basis = w.dot(&self.basis);
        Ok(self.with_state(center, basis))
    }

    /// Same predicate, new center and basis. Shapes are the caller's problem.
    pub(crate) fn with_state(&self, center: Array1<f64>, basis: Array2<f64>) -> Star {
        debug_assert_eq!(basis.ncols(), self.num_generators());
        debug_assert_eq!(basis.nrows(), center.len());
        let basis = if basis.is_standard_layout() {
            basis
        } else {
            basis.as_standard_layout().into_owned()
        };
        Star {
            center,
            basis,
            constraints: self.constraints.clone(),
            rhs: self.rhs.clone(),
            alpha_lower: self.alpha_lower.clone(),
            alpha_upper: self.alpha_upper.clone(),
        }
    }

    /// Intersects with `{α : a·α <= rhs}`. Emptiness is not checked.
    pub fn add_halfspace(&self, a: &[f64], rhs: f64) -> Result<Star> {
        if a.len() != self.num_generators() {
            return Err(Error::invalid(format!(
                "halfspace has {} coefficients, star has {} predicate variables",
                a.len(),
                self.num_generators()
            )));
        }
        let mut constraints = self.constraints.clone();
        constraints
            .push_row(ArrayView1::from(a))
            .map_err(|e| Error::Internal(e.to_string()))?;
        let mut d = self.rhs.to_vec();
        d.push(rhs);
        Self::from_parts(
            self.center.clone(),
            self.basis.clone(),
            constraints,
            Array1::from(d),
            self.alpha_lower.clone(),
            self.alpha_upper.clone(),
        )
    }

    /// Adds one predicate variable with its own box bounds.
    pub fn append_generator(&self, column: &[f64], bounds: Interval) -> Result<Star> {
        if column.len() != self.dim() {
            return Err(Error::invalid(format!(
                "generator has {} entries, star dimension is {}",
                column.len(),
                self.dim()
            )));
        }
        let mut basis = self.basis.clone();
        basis
            .push_column(ArrayView1::from(column))
            .map_err(|e| Error::Internal(e.to_string()))?;
        let mut constraints = self.constraints.clone();
        constraints
            .push_column(Array1::zeros(self.num_constraints()).view())
            .map_err(|e| Error::Internal(e.to_string()))?;
        let mut lo = self.alpha_lower.to_vec();
        lo.push(bounds.lower);
        let mut hi = self.alpha_upper.to_vec();
        hi.push(bounds.upper);
        Self::from_parts(
            self.center.clone(),
            basis,
            constraints,
            self.rhs.clone(),
            Array1::from(lo),
            Array1::from(hi),
        )
    }

    fn solver(&self) -> Result<Option<BoxLp>> {
        BoxLp::new(
            self.constraints.view(),
            self.rhs.view(),
            self.alpha_lower.as_slice().expect("contiguous"),
            self.alpha_upper.as_slice().expect("contiguous"),
        )
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(self.solver()?.is_none())
    }

    /// Reusable LP over this star's predicate.
    pub fn predicate_lp(&self) -> Result<PredicateLp> {
        match self.solver()? {
            Some(lp) => Ok(PredicateLp { lp }),
            None => Err(Error::EmptySet("predicate has no feasible point".into())),
        }
    }

    /// `[min, max]` of state coordinate `dim` (0-based), widened by `TAU_LP`.
    pub fn lp_bounds(&self, dim: usize) -> Result<Interval> {
        if dim >= self.dim() {
            return Err(Error::invalid(format!("dimension {dim} out of range 0..{}", self.dim())));
        }
        let mut lp = self.predicate_lp()?;
        lp.range(self.basis.row(dim), self.center[dim])
    }

    /// Range of `direction · x` over the star, widened by `TAU_LP`.
    pub fn range_of(&self, direction: &[f64]) -> Result<Interval> {
        if direction.len() != self.dim() {
            return Err(Error::invalid(format!(
                "direction has {} entries, star dimension is {}",
                direction.len(),
                self.dim()
            )));
        }
        let dir = ArrayView1::from(direction);
        let coeffs = self.basis.t().dot(&dir);
        let offset = dir.dot(&self.center);
        self.predicate_lp()?.range(coeffs.view(), offset)
    }

    /// LP bounds for every state coordinate.
    pub fn bounds(&self) -> Result<Vec<Interval>> {
        let dims: Vec<usize> = (0..self.dim()).collect();
        self.bounds_of(&dims)
    }

    /// LP bounds for the listed coordinates. Chunks of coordinates share one
    /// warm-started solver and run in parallel.
    pub fn bounds_of(&self, dims: &[usize]) -> Result<Vec<Interval>> {
        if let Some(d) = dims.iter().find(|&&d| d >= self.dim()) {
            return Err(Error::invalid(format!("dimension {d} out of range 0..{}", self.dim())));
        }
        let base = self.predicate_lp()?;
        let chunks: Vec<Result<Vec<Interval>>> = dims
            .par_chunks(BOUND_CHUNK)
            .map(|chunk| {
                let mut lp = base.clone();
                chunk
                    .iter()
                    .map(|&d| lp.range(self.basis.row(d), self.center[d]))
                    .collect()
            })
            .collect();
        let mut out = Vec::with_capacity(dims.len());
        for c in chunks {
            out.extend(c?);
        }
        Ok(out)
    }

    /// Cheap outer bounds from the α box alone (ignores `C·α <= d`).
    pub fn interval_hull(&self) -> Vec<Interval> {
        let mid = (&self.alpha_upper + &self.alpha_lower) * 0.5;
        let rad = (&self.alpha_upper - &self.alpha_lower) * 0.5;
        let c = &self.center + &self.basis.dot(&mid);
        let abs_basis = self.basis.mapv(f64::abs);
        let spread = abs_basis.dot(&rad);
        // rounding guard scaled by the magnitude of every summed term
        let scale = self.center.mapv(f64::abs) + abs_basis.dot(&mid.mapv(f64::abs)) + &spread;
        c.iter()
            .zip(spread.iter())
            .zip(scale.iter())
            .map(|((c, s), m)| {
                let slack = 1e-12 * m + f64::MIN_POSITIVE;
                Interval {
                    lower: c - s - slack,
                    upper: c + s + slack,
                }
            })
            .collect()
    }

    /// `c + V·α`.
    pub fn state_of(&self, alpha: ArrayView1<'_, f64>) -> Array1<f64> {
        &self.center + &self.basis.dot(&alpha)
    }

    fn alpha_feasible(&self, alpha: &[f64], tol: f64) -> bool {
        let a = ArrayView1::from(alpha);
        a.iter()
            .zip(self.alpha_lower.iter().zip(self.alpha_upper.iter()))
            .all(|(x, (l, u))| *x >= l - tol && *x <= u + tol)
            && self
                .constraints
                .dot(&a)
                .iter()
                .zip(self.rhs.iter())
                .all(|(lhs, d)| *lhs <= d + tol)
    }

    /// Membership test: does some feasible α give `c + V·α = x` (to `tol`)?
    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "point has {} entries, star dimension is {}",
                x.len(),
                self.dim()
            )));
        }
        let m = self.num_generators();
        let n = self.dim();
        let p = self.num_constraints();
        let mut rows = Array2::zeros((p + 2 * n, m));
        let mut d = Array1::zeros(p + 2 * n);
        rows.slice_mut(s![..p, ..]).assign(&self.constraints);
        d.slice_mut(s![..p]).assign(&self.rhs);
        for i in 0..n {
            let gap = x[i] - self.center[i];
            rows.row_mut(p + 2 * i).assign(&self.basis.row(i));
            d[p + 2 * i] = gap + tol;
            rows.row_mut(p + 2 * i + 1).assign(&(-&self.basis.row(i)));
            d[p + 2 * i + 1] = -gap + tol;
        }
        let lp = BoxLp::new(
            rows.view(),
            d.view(),
            self.alpha_lower.as_slice().expect("contiguous"),
            self.alpha_upper.as_slice().expect("contiguous"),
        )?;
        Ok(lp.is_some())
    }

    /// Draws `k` members deterministically from `seed`.
    ///
    /// Rejection sampling over the α box; if fewer than one draw in 10⁴ is
    /// accepted, switches to a random walk started from an interior point
    /// assembled from LP vertices.
    pub fn sample_members(&self, k: usize, seed: u64) -> Result<Vec<Array1<f64>>> {
        let alphas = self.sample_alphas(k, seed)?;
        Ok(alphas
            .iter()
            .map(|a| self.state_of(ArrayView1::from(&a[..])))
            .collect())
    }

    pub(crate) fn sample_alphas(&self, k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let mut lp = self.predicate_lp()?;
        let m = self.num_generators();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw_box = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..m)
                .map(|j| {
                    let (l, u) = (self.alpha_lower[j], self.alpha_upper[j]);
                    if u > l {
                        rng.gen_range(l..=u)
                    } else {
                        l
                    }
                })
                .collect()
        };

        let mut out = Vec::with_capacity(k);
        let mut attempts = 0usize;
        const PROBE: usize = 10_000;
        while out.len() < k {
            let a = draw_box(&mut rng);
            attempts += 1;
            if self.alpha_feasible(&a, 0.0) {
                out.push(a);
            }
            if attempts >= PROBE && (out.len() as f64) < 1e-4 * attempts as f64 {
                break;
            }
        }
        if out.len() == k {
            return Ok(out);
        }

        // interior point: average of LP optima in random directions
        let mut interior = vec![0.0; m];
        let probes = 2 * m + 2;
        for _ in 0..probes {
            let dir: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            lp.lp.maximize(&dir)?;
            for (s, x) in interior.iter_mut().zip(lp.lp.point()) {
                *s += x / probes as f64;
            }
        }
        if !self.alpha_feasible(&interior, 1e-9) {
            interior = lp.lp.point();
        }
        let widths: Vec<f64> = (0..m)
            .map(|j| self.alpha_upper[j] - self.alpha_lower[j])
            .collect();
        let mut current = interior;
        let mut step = 0.5;
        while out.len() < k {
            let mut accepted = false;
            for _ in 0..50 {
                let proposal: Vec<f64> = current
                    .iter()
                    .zip(&widths)
                    .map(|(x, w)| x + step * w * rng.gen_range(-1.0..1.0))
                    .collect();
                if self.alpha_feasible(&proposal, 0.0) {
                    current = proposal;
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                step *= 0.5;
            }
            out.push(current.clone());
        }
        Ok(out)
    }

    /// Star restricted to the listed coordinates.
    pub fn project(&self, dims: &[usize]) -> Result<Star> {
        if let Some(d) = dims.iter().find(|&&d| d >= self.dim()) {
            return Err(Error::invalid(format!("dimension {d} out of range")));
        }
        let center = Array1::from_iter(dims.iter().map(|&d| self.center[d]));
        let basis = self.basis.select(Axis(0), dims);
        Ok(self.with_state(center, basis))
    }
}

/// A phase-1-solved LP over a star predicate, reusable across objectives.
#[derive(Debug, Clone)]
pub struct PredicateLp {
    lp: BoxLp,
}

impl PredicateLp {
    /// `[min, max]` of `offset + coeffs·α`, widened by `TAU_LP`.
    pub fn range(&mut self, coeffs: ArrayView1<'_, f64>, offset: f64) -> Result<Interval> {
        if coeffs.iter().all(|c| *c == 0.0) {
            return Ok(Interval::point(offset).widen(TAU_LP));
        }
        let c: Vec<f64> = coeffs.to_vec();
        let hi = self.lp.maximize(&c)?.dual;
        let neg: Vec<f64> = c.iter().map(|v| -v).collect();
        let lo = -self.lp.maximize(&neg)?.dual;
        Ok(Interval {
            lower: offset + lo - TAU_LP,
            upper: offset + hi + TAU_LP,
        })
    }

    /// Some feasible α.
    pub fn feasible_point(&self) -> Vec<f64> {
        self.lp.point()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn unit_box() -> Star {
        Star::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn box_star_bounds() {
        let s = unit_box();
        assert_eq!(s.num_generators(), 2);
        for d in 0..2 {
            let b = s.lp_bounds(d).unwrap();
            assert!((b.lower + 1.0 + TAU_LP).abs() < 1e-15 && (b.upper - 1.0 - TAU_LP).abs() < 1e-15);
        }
    }

    #[test]
    fn point_star_has_no_generators() {
        let s = Star::from_box(&[5.0], &[0.0]).unwrap();
        assert_eq!(s.num_generators(), 0);
        let b = s.lp_bounds(0).unwrap();
        assert!((b.lower - 5.0).abs() <= TAU_LP * 1.01 && (b.upper - 5.0).abs() <= TAU_LP * 1.01);
    }

    #[test]
    fn negative_radius_rejected() {
        assert!(matches!(Star::from_box(&[0.0], &[-1.0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn window_disturbance_star() {
        // 4 features × 4 steps, b ∈ [-2, 2] at feature 1, time 2 (1-based)
        let center: Vec<f64> = (0..16).map(|k| k as f64 * 0.5).collect();
        let mut radii = vec![0.0; 16];
        let idx = 1; // (1-1)*4 + (2-1)
        radii[idx] = 2.0;
        let s = Star::from_box(&center, &radii).unwrap();
        assert_eq!(s.num_generators(), 1);
        let b = s.lp_bounds(idx).unwrap();
        assert!((b.lower - (center[idx] - 2.0)).abs() <= 2.0 * TAU_LP);
        assert!((b.upper - (center[idx] + 2.0)).abs() <= 2.0 * TAU_LP);
    }

    #[test]
    fn diagonal_affine_map() {
        let s = unit_box();
        let w = array![[2.0, 0.0], [0.0, 3.0]];
        let b = array![1.0, -1.0];
        let t = s.affine_map(w.view(), b.view()).unwrap();
        assert_eq!(t.center().to_vec(), vec![1.0, -1.0]);
        let b0 = t.lp_bounds(0).unwrap();
        let b1 = t.lp_bounds(1).unwrap();
        assert!((b0.lower + 1.0).abs() <= 2.0 * TAU_LP && (b0.upper - 3.0).abs() <= 2.0 * TAU_LP);
        assert!((b1.lower + 4.0).abs() <= 2.0 * TAU_LP && (b1.upper - 2.0).abs() <= 2.0 * TAU_LP);
    }

    #[test]
    fn identity_map_preserves_star() {
        let s = unit_box().add_halfspace(&[1.0, 1.0], 0.5).unwrap();
        let t = s
            .affine_map(Array2::eye(2).view(), Array1::zeros(2).view())
            .unwrap();
        assert_eq!(s, t);
    }

    #[test]
    fn affine_dimension_mismatch() {
        let s = unit_box();
        let w = Array2::zeros((1, 3));
        assert!(s.affine_map(w.view(), Array1::zeros(1).view()).is_err());
        let w = Array2::zeros((1, 2));
        assert!(s.affine_map(w.view(), Array1::zeros(2).view()).is_err());
    }

    #[test]
    fn halfspace_cuts_box() {
        let s = unit_box().add_halfspace(&[1.0, 0.0], 0.0).unwrap();
        let b = s.lp_bounds(0).unwrap();
        assert!((b.lower + 1.0).abs() <= 2.0 * TAU_LP && b.upper.abs() <= 2.0 * TAU_LP);
        assert!(unit_box().add_halfspace(&[1.0], 0.0).is_err());
    }

    #[test]
    fn contradiction_is_empty() {
        let s = unit_box().add_halfspace(&[1.0, 0.0], -2.0).unwrap();
        assert!(s.is_empty().unwrap());
        assert!(!unit_box().is_empty().unwrap());
        assert!(matches!(s.lp_bounds(0), Err(Error::EmptySet(_))));
        assert!(matches!(s.sample_members(1, 0), Err(Error::EmptySet(_))));
    }

    #[test]
    fn append_null_generator_keeps_set() {
        let s = unit_box();
        let t = s.append_generator(&[0.0, 0.0], Interval::point(0.0)).unwrap();
        assert_eq!(t.num_generators(), 3);
        assert_eq!(s.bounds().unwrap(), t.bounds().unwrap());
    }

    #[test]
    fn append_generator_to_point() {
        let s = Star::point(&[5.0]).unwrap();
        let t = s.append_generator(&[1.0], Interval::new(0.0, 2.0).unwrap()).unwrap();
        let b = t.lp_bounds(0).unwrap();
        assert!((b.lower - 5.0).abs() <= 2.0 * TAU_LP && (b.upper - 7.0).abs() <= 2.0 * TAU_LP);
        assert!(s.append_generator(&[1.0, 2.0], Interval::point(0.0)).is_err());
    }

    #[test]
    fn samples_from_box_and_point() {
        let pts = unit_box().sample_members(10, 7).unwrap();
        assert_eq!(pts.len(), 10);
        assert!(pts.iter().all(|p| p.iter().all(|v| v.abs() <= 1.0)));
        let pts = Star::point(&[3.0, 4.0]).unwrap().sample_members(5, 1).unwrap();
        assert!(pts.iter().all(|p| p.to_vec() == vec![3.0, 4.0]));
    }

    #[test]
    fn thin_polytope_uses_walk_fallback() {
        // sliver: |α1 - α2| <= 1e-6 has acceptance ~1e-6
        let s = unit_box()
            .add_halfspace(&[1.0, -1.0], 1e-6)
            .unwrap()
            .add_halfspace(&[-1.0, 1.0], 1e-6)
            .unwrap();
        let pts = s.sample_members(20, 3).unwrap();
        assert_eq!(pts.len(), 20);
        for p in &pts {
            assert!(s.contains(p.as_slice().unwrap(), 1e-9).unwrap());
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = unit_box().add_halfspace(&[1.0, 1.0], 0.3).unwrap();
        assert_eq!(s.sample_members(50, 11).unwrap(), s.sample_members(50, 11).unwrap());
        assert_ne!(s.sample_members(50, 11).unwrap(), s.sample_members(50, 12).unwrap());
    }

    #[test]
    fn interval_ops() {
        let a = Interval::new(0.0, 4.0).unwrap();
        let b = Interval::new(3.0, 6.0).unwrap();
        assert_eq!(a.intersect(&b), Some(Interval { lower: 3.0, upper: 4.0 }));
        assert!(Interval::new(1.0, 0.0).is_err());
        assert!(a.contains_interval(&Interval::new(1.0, 2.0).unwrap()));
    }
}
