//! The lasso instance `(A, y, mu)`, its discontinuous drift and a reference
//! solver.
//!
//! With `g = A^T (A x - y)` the smooth force, the drift of the diffusion is
//! `b(x) = -g(x) - mu sgn(x)`. Off the coordinate hyperplanes it is one of two
//! branch drifts per coordinate:
//!
//! * `b1_i(x) = -g_i(x) + mu`, the value on the `x_i <= 0` side;
//! * `b2_i(x) = -g_i(x) - mu`, the value on the `x_i > 0` side.
//!
//! A coordinate at zero sticks while `b2_i <= 0 <= b1_i`, i.e. `|g_i| <= mu`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, input, Error, Result};
use crate::linalg::{self, Matrix};

/// Which side of a coordinate hyperplane a branch drift belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// `x_i <= 0`, drift `-g_i + mu`.
    NonPositive,
    /// `x_i > 0`, drift `-g_i - mu`.
    Positive,
}

impl Side {
    /// Side a nonzero value lies on; zero is on the closed negative side.
    #[inline]
    pub fn of(x: f64) -> Self {
        if x > 0.0 {
            Side::Positive
        } else {
            Side::NonPositive
        }
    }

    /// Offset added to the smooth force: `+mu` or `-mu`.
    #[inline]
    pub fn penalty_sign(self) -> f64 {
        match self {
            Side::NonPositive => 1.0,
            Side::Positive => -1.0,
        }
    }
}

impl TryFrom<u8> for Side {
    type Error = Error;

    /// `1` is the non-positive branch, `2` the positive one.
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Side::NonPositive),
            2 => Ok(Side::Positive),
            other => Err(input(format!("branch side must be 1 or 2, got {other}"))),
        }
    }
}

/// An element of `sgn(x)`: `s_i = sign(x_i)` off zero, anything in `[-1, 1]`
/// at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SignSelection(Vec<f64>);

impl SignSelection {
    pub fn new(s: Vec<f64>) -> Result<Self> {
        if let Some(v) = s.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(input(format!("sign selection entry {v} outside [-1, 1]")));
        }
        Ok(Self(s))
    }

    /// The forced signs of `x` with `sgn(0) = 0`.
    pub fn forced(x: &[f64]) -> Self {
        Self(x.iter().map(|&v| linalg::sign0(v)).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Checks `s_i = sign(x_i)` wherever `x_i != 0`.
    pub fn check_consistent(&self, x: &[f64]) -> Result<()> {
        check_len(x.len(), self.0.len())?;
        for (i, (&xi, &si)) in x.iter().zip(&self.0).enumerate() {
            if xi != 0.0 && si != linalg::sign0(xi) {
                return Err(input(format!("sign selection s[{i}] = {si} inconsistent with x[{i}] = {xi}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    a: Matrix,
    y: Vec<f64>,
    mu: f64,
}

/// Result of [`Problem::lasso_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub x: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl Problem {
    pub fn new(a: Matrix, y: Vec<f64>, mu: f64) -> Result<Self> {
        check_len(a.rows(), y.len())?;
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(input(format!("mu must be positive and finite, got {mu}")));
        }
        let finite = (0..a.rows()).all(|r| a.row(r).iter().all(|v| v.is_finite())) && y.iter().all(|v| v.is_finite());
        if !finite {
            return Err(input("A and y must have finite entries"));
        }
        Ok(Self { a, y, mu })
    }

    /// Convenience constructor from nested rows.
    pub fn from_rows(a: &[Vec<f64>], y: Vec<f64>, mu: f64) -> Result<Self> {
        Self::new(Matrix::from_rows(a)?, y, mu)
    }

    /// One-dimensional instance `A = [a]`, `y = [y]`.
    pub fn scalar(a: f64, y: f64, mu: f64) -> Result<Self> {
        Self::new(Matrix::new(1, 1, vec![a])?, vec![y], mu)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    #[inline]
    pub fn n_obs(&self) -> usize {
        self.a.rows()
    }

    #[inline]
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        check_len(self.dim(), x.len())
    }

    /// `g = A^T (A x - y)` written into `out`; `resid` is scratch of length n.
    pub(crate) fn gradient_into(&self, x: &[f64], resid: &mut [f64], out: &mut [f64]) {
        self.a.mul_vec_into(x, resid);
        for (r, yi) in resid.iter_mut().zip(&self.y) {
            *r -= yi;
        }
        self.a.tr_mul_vec_into(resid, out);
    }

    /// The smooth part `g = A^T (A x - y)`.
    pub fn residual_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let mut resid = vec![0.0; self.n_obs()];
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(x, &mut resid, &mut g);
        Ok(g)
    }

    /// `g_i` alone.
    pub fn gradient_component(&self, x: &[f64], i: usize) -> f64 {
        let mut s = 0.0;
        for r in 0..self.n_obs() {
            let row = self.a.row(r);
            s += row[i] * (linalg::dot(row, x) - self.y[r]);
        }
        s
    }

    /// `b = -g - mu s` for a selection `s` consistent with `x`.
    pub fn drift(&self, x: &[f64], s: &SignSelection) -> Result<Vec<f64>> {
        self.check_x(x)?;
        s.check_consistent(x)?;
        let g = self.residual_gradient(x)?;
        Ok(g.iter().zip(s.as_slice()).map(|(gi, si)| -gi - self.mu * si).collect())
    }

    /// One-sided drift of coordinate `i` at `x`.
    pub fn branch_drift(&self, x: &[f64], i: usize, side: Side) -> Result<f64> {
        self.check_x(x)?;
        if i >= self.dim() {
            return Err(input(format!("coordinate {i} out of range 0..{}", self.dim())));
        }
        Ok(-self.gradient_component(x, i) + side.penalty_sign() * self.mu)
    }

    /// Coordinates that are (numerically) at zero and satisfy the sticking
    /// condition `|g_i| <= mu`.
    pub fn sticking_set(&self, x: &[f64], tol_zero: f64) -> Result<Vec<usize>> {
        if !(tol_zero > 0.0) {
            return Err(input("tol_zero must be positive"));
        }
        let g = self.residual_gradient(x)?;
        Ok((0..self.dim()).filter(|&i| x[i].abs() <= tol_zero && g[i].abs() <= self.mu).collect())
    }

    /// `1/2 |A x - y|^2 + mu |x|_1`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut resid = vec![0.0; self.n_obs()];
        self.a.mul_vec_into(x, &mut resid);
        let rss: f64 = resid.iter().zip(&self.y).map(|(r, y)| (r - y) * (r - y)).sum();
        0.5 * rss + self.mu * linalg::norm1(x)
    }

    /// Sup-norm violation of the optimality system
    /// `A_i^T (A x - y) + mu sgn(x_i) = 0`.
    ///
    /// Zero coordinates are recognised by exact equality, which is what the
    /// soft-thresholding step produces.
    pub fn kkt_residual(&self, x: &[f64]) -> Result<f64> {
        let g = self.residual_gradient(x)?;
        Ok(x.iter().zip(&g).fold(0.0, |worst, (&xi, &gi)| {
            let v = if xi != 0.0 {
                (gi + self.mu * linalg::sign0(xi)).abs()
            } else {
                let excess = gi.abs() - self.mu;
                if excess > 0.0 {
                    excess
                } else {
                    0.0
                }
            };
            if v > worst {
                v
            } else {
                worst
            }
        }))
    }

    /// Proximal gradient (ISTA) with step `1 / lambda_max(A^T A)`, stopping
    /// once the KKT residual is at most `tol`.
    pub fn lasso_solve(&self, tol: f64, max_iter: usize) -> Result<LassoSolution> {
        if !(tol > 0.0) {
            return Err(input("tol must be positive"));
        }
        let d = self.dim();
        let mut x = vec![0.0; d];
        let lipschitz = self.a.gram_spectral_radius(50);
        if lipschitz == 0.0 {
            // A = 0: g = 0 everywhere and the origin is optimal.
            let kkt_residual = self.kkt_residual(&x)?;
            return Ok(LassoSolution { x, kkt_residual, iterations: 0 });
        }
        let step = 1.0 / lipschitz;
        let mut resid = vec![0.0; self.n_obs()];
        let mut g = vec![0.0; d];
        let mut residual = self.kkt_residual(&x)?;
        for it in 0..max_iter {
            if residual <= tol {
                return Ok(LassoSolution { x, kkt_residual: residual, iterations: it });
            }
            self.gradient_into(&x, &mut resid, &mut g);
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi = linalg::soft_threshold(*xi - step * gi, step * self.mu);
            }
            residual = self.kkt_residual(&x)?;
        }
        if residual <= tol {
            return Ok(LassoSolution { x, kkt_residual: residual, iterations: max_iter });
        }
        Err(Error::NotConverged { iterations: max_iter, residual, iterate: x })
    }

    /// Upper bound on `|x|_inf` along the zero-noise flow started at `x0`:
    /// the objective never increases, so `mu |x(t)|_1 <= U(x0)`.
    pub fn flow_sup_bound(&self, x0: &[f64]) -> f64 {
        self.objective(x0) / self.mu
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::vec::Vec;

    fn identity2() -> Problem {
        Problem::new(Matrix::identity(2), vec![1.0, 2.0], 1.0).unwrap()
    }

    #[test]
    fn residual_gradient_examples() {
        assert_eq!(identity2().residual_gradient(&[0.0, 0.0]).unwrap(), vec![-1.0, -2.0]);
        let p = Problem::scalar(1.0, 0.0, 1.0).unwrap();
        assert_eq!(p.residual_gradient(&[2.0]).unwrap(), vec![2.0]);
        assert!(matches!(p.residual_gradient(&[1.0, 2.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn drift_examples() {
        let p = Problem::scalar(1.0, 0.0, 1.0).unwrap();
        let s = SignSelection::new(vec![1.0]).unwrap();
        assert_eq!(p.drift(&[2.0], &s).unwrap(), vec![-3.0]);
        let p = Problem::scalar(1.0, 2.0, 1.0).unwrap();
        let s = SignSelection::new(vec![0.0]).unwrap();
        assert_eq!(p.drift(&[0.0], &s).unwrap(), vec![2.0]);
    }

    #[test]
    fn drift_rejects_inconsistent_selection() {
        let p = Problem::scalar(1.0, 0.0, 1.0).unwrap();
        let s = SignSelection::new(vec![-1.0]).unwrap();
        assert!(matches!(p.drift(&[2.0], &s), Err(Error::Input(_))));
        assert!(SignSelection::new(vec![1.5]).is_err());
    }

    #[test]
    fn branch_drift_examples() {
        let p = Problem::scalar(1.0, 0.0, 1.0).unwrap();
        assert_eq!(p.branch_drift(&[0.0], 0, Side::NonPositive).unwrap(), 1.0);
        assert_eq!(p.branch_drift(&[0.0], 0, Side::Positive).unwrap(), -1.0);
        let p = Problem::scalar(1.0, 2.0, 1.0).unwrap();
        assert_eq!(p.branch_drift(&[0.0], 0, Side::NonPositive).unwrap(), 3.0);
        assert_eq!(p.branch_drift(&[0.0], 0, Side::Positive).unwrap(), 1.0);
        assert!(Side::try_from(3).is_err());
        assert_eq!(Side::try_from(1).unwrap(), Side::NonPositive);
        assert!(p.branch_drift(&[0.0], 1, Side::Positive).is_err());
    }

    #[test]
    fn sticking_set_examples() {
        let p = Problem::scalar(1.0, 0.5, 1.0).unwrap();
        assert_eq!(p.sticking_set(&[0.0], 1e-12).unwrap(), vec![0]);
        let p = Problem::scalar(1.0, 2.0, 1.0).unwrap();
        assert!(p.sticking_set(&[0.0], 1e-12).unwrap().is_empty());
        assert!(p.sticking_set(&[0.0], 0.0).is_err());
    }

    #[test]
    fn sticking_set_diagonal_matches_scalar_pieces() {
        let p = Problem::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.5]], vec![0.4, 3.0], 1.0).unwrap();
        let x = [0.0, 0.0];
        let got = p.sticking_set(&x, 1e-12).unwrap();
        let mut expect = Vec::new();
        for (i, (a, y)) in [(2.0, 0.4), (0.5, 3.0)].into_iter().enumerate() {
            let scalar = Problem::scalar(a, y, 1.0).unwrap();
            if !scalar.sticking_set(&[0.0], 1e-12).unwrap().is_empty() {
                expect.push(i);
            }
        }
        assert_eq!(got, expect);
        assert_eq!(got, vec![0]);
    }

    #[test]
    fn lasso_scalar_closed_forms() {
        let p = Problem::scalar(1.0, 2.0, 1.0).unwrap();
        let sol = p.lasso_solve(1e-12, 1000).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert_eq!(p.kkt_residual(&[1.0]).unwrap(), 0.0);

        let p = Problem::scalar(1.0, 0.5, 1.0).unwrap();
        let sol = p.lasso_solve(1e-12, 1000).unwrap();
        assert_eq!(sol.x, vec![0.0]);
        assert_eq!(p.kkt_residual(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn large_mu_gives_origin() {
        let p = Problem::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5]], vec![1.0, -1.0], 10.0).unwrap();
        let sol = p.lasso_solve(1e-10, 1000).unwrap();
        assert_eq!(sol.x, vec![0.0, 0.0]);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn non_convergence_carries_iterate() {
        let p = Problem::from_rows(&[vec![1.0, 0.99], vec![0.99, 1.0]], vec![3.0, -2.0], 0.1).unwrap();
        match p.lasso_solve(1e-14, 1) {
            Err(Error::NotConverged { iterate, residual, iterations }) => {
                assert_eq!(iterations, 1);
                assert_eq!(iterate.len(), 2);
                assert!(residual > 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    /// Independent double-loop evaluation of `A^T (A x - y)`.
    fn naive_gradient(a: &[Vec<f64>], y: &[f64], x: &[f64]) -> Vec<f64> {
        let n = a.len();
        let d = x.len();
        let mut r = std::vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..d {
                s += a[i][j] * x[j];
            }
            r[i] = s - y[i];
        }
        let mut g = std::vec![0.0; d];
        for j in 0..d {
            for i in 0..n {
                g[j] += a[i][j] * r[i];
            }
        }
        g
    }

    fn instance(n: usize, d: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, f64)> {
        (
            proptest::collection::vec(proptest::collection::vec(-2.0..2.0f64, d), n),
            proptest::collection::vec(-2.0..2.0f64, n),
            proptest::collection::vec(-2.0..2.0f64, d),
            0.1..2.0f64,
        )
    }

    proptest! {
        #[test]
        fn gradient_matches_double_loop((a, y, x, mu) in instance(3, 3)) {
            let p = Problem::from_rows(&a, y.clone(), mu).unwrap();
            let g = p.residual_gradient(&x).unwrap();
            let expect = naive_gradient(&a, &y, &x);
            for (gi, ei) in g.iter().zip(&expect) {
                prop_assert!((gi - ei).abs() <= 1e-12);
            }
        }

        #[test]
        fn drift_recomposes((a, y, x, mu) in instance(3, 3)) {
            let p = Problem::from_rows(&a, y, mu).unwrap();
            let s = SignSelection::forced(&x);
            let b = p.drift(&x, &s).unwrap();
            let g = p.residual_gradient(&x).unwrap();
            for i in 0..3 {
                prop_assert!((b[i] - (-g[i] - mu * s.as_slice()[i])).abs() <= 1e-12);
            }
        }

        #[test]
        fn branches_bracket_drift((a, y, x, mu) in instance(3, 3)) {
            let p = Problem::from_rows(&a, y, mu).unwrap();
            let b = p.drift(&x, &SignSelection::forced(&x)).unwrap();
            for i in 0..3 {
                let b1 = p.branch_drift(&x, i, Side::NonPositive).unwrap();
                let b2 = p.branch_drift(&x, i, Side::Positive).unwrap();
                prop_assert!((b1 - b2 - 2.0 * mu).abs() <= 1e-12);
                if x[i] != 0.0 {
                    prop_assert!((b[i] - p.branch_drift(&x, i, Side::of(x[i])).unwrap()).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn lasso_beats_origin_and_least_squares((a, y, _x, mu) in instance(3, 2)) {
            let p = Problem::from_rows(&a, y.clone(), mu).unwrap();
            let Ok(sol) = p.lasso_solve(1e-9, 200_000) else {
                return Ok(());
            };
            prop_assert!(p.objective(&sol.x) <= p.objective(&[0.0, 0.0]) + 1e-12);
            // Least-squares point via the 2x2 normal equations.
            let g00: f64 = a.iter().map(|r| r[0] * r[0]).sum();
            let g01: f64 = a.iter().map(|r| r[0] * r[1]).sum();
            let g11: f64 = a.iter().map(|r| r[1] * r[1]).sum();
            let c0: f64 = a.iter().zip(&y).map(|(r, yi)| r[0] * yi).sum();
            let c1: f64 = a.iter().zip(&y).map(|(r, yi)| r[1] * yi).sum();
            let det = g00 * g11 - g01 * g01;
            if det.abs() > 1e-6 {
                let ls = [(g11 * c0 - g01 * c1) / det, (g00 * c1 - g01 * c0) / det];
                prop_assert!(p.objective(&sol.x) <= p.objective(&ls) + 1e-9);
            }
        }
    }

    #[test]
    fn soft_threshold_oracle_cross_checked_by_grid() {
        // x* = sign(y) max(|y| - mu, 0); also the grid minimiser of the objective.
        for &(y, mu) in &[(2.0, 1.0), (0.5, 1.0), (-3.0, 0.5), (1.0, 1.0)] {
            let closed = libm::copysign((libm::fabs(y) - mu).max(0.0), y);
            let p = Problem::scalar(1.0, y, mu).unwrap();
            let grid_best = (0..=80_000)
                .map(|k| -4.0 + k as f64 * 1e-4)
                .min_by(|a, b| p.objective(&[*a]).total_cmp(&p.objective(&[*b])))
                .unwrap();
            assert!((grid_best - closed).abs() <= 1e-4);
            let sol = p.lasso_solve(1e-12, 10_000).unwrap();
            assert!((sol.x[0] - closed).abs() <= 1e-12);
        }
    }
}
