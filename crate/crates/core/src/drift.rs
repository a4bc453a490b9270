//! Drifts of the form `F(t, x) - mu sgn(x)`.
//!
//! Both the lasso drift (`F = -A^T (A x - y)`) and the forced drift
//! (`F = f(t)`, a step function) have this shape, so the sticky integrator,
//! the local costs and the rate functional are written once against
//! [`DriftModel`].

use crate::linalg;
use crate::path::ForcingPath;
use crate::problem::{Problem, Side};

pub trait DriftModel: Sync {
    fn dim(&self) -> usize;

    fn mu(&self) -> f64;

    /// The smooth force `F(t, x)`.
    fn force_into(&self, t: f64, x: &[f64], out: &mut [f64]);

    fn force_component(&self, t: f64, x: &[f64], i: usize) -> f64;

    /// First time strictly after `t` where the force jumps in time.
    fn next_jump_after(&self, _t: f64) -> Option<f64> {
        None
    }

    /// One-sided drift `F_i + mu` (side 1) or `F_i - mu` (side 2).
    #[inline]
    fn branch(&self, t: f64, x: &[f64], i: usize, side: Side) -> f64 {
        self.force_component(t, x, i) + side.penalty_sign() * self.mu()
    }
}

impl DriftModel for Problem {
    fn dim(&self) -> usize {
        Problem::dim(self)
    }

    fn mu(&self) -> f64 {
        Problem::mu(self)
    }

    fn force_into(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let a = self.a();
        for (r, yr) in self.y().iter().enumerate() {
            let row = a.row(r);
            let resid = linalg::dot(row, x) - yr;
            for (o, aij) in out.iter_mut().zip(row) {
                *o -= aij * resid;
            }
        }
    }

    fn force_component(&self, _t: f64, x: &[f64], i: usize) -> f64 {
        -self.gradient_component(x, i)
    }
}

/// `f(t) - mu sgn(x)` for a piecewise-constant forcing `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcedDrift {
    pub forcing: ForcingPath,
    pub mu: f64,
}

impl ForcedDrift {
    pub fn new(forcing: ForcingPath, mu: f64) -> crate::Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(crate::error::input("mu must be positive and finite"));
        }
        Ok(Self { forcing, mu })
    }
}

impl DriftModel for ForcedDrift {
    fn dim(&self) -> usize {
        self.forcing.dim()
    }

    fn mu(&self) -> f64 {
        self.mu
    }

    fn force_into(&self, t: f64, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(self.forcing.value_at(t));
    }

    fn force_component(&self, t: f64, _x: &[f64], i: usize) -> f64 {
        self.forcing.value_at(t)[i]
    }

    fn next_jump_after(&self, t: f64) -> Option<f64> {
        self.forcing.next_breakpoint_after(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::vec;

    #[test]
    fn lasso_force_is_negative_gradient() {
        let p =
            Problem::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0], vec![0.0, 3.0]], vec![1.0, 0.0, -1.0], 0.7).unwrap();
        let x = [0.3, -0.4];
        let g = p.residual_gradient(&x).unwrap();
        let mut f = [0.0; 2];
        p.force_into(0.0, &x, &mut f);
        for i in 0..2 {
            assert!((f[i] + g[i]).abs() < 1e-14);
            assert!((p.force_component(0.0, &x, i) + g[i]).abs() < 1e-14);
            let b1 = DriftModel::branch(&p, 0.0, &x, i, Side::NonPositive);
            assert!((b1 - p.branch_drift(&x, i, Side::NonPositive).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn forced_branches() {
        let f = ForcingPath::new(vec![0.0, 0.5, 1.0], vec![vec![3.0], vec![-0.5]]).unwrap();
        let m = ForcedDrift::new(f, 1.0).unwrap();
        assert_eq!(m.branch(0.1, &[0.0], 0, Side::NonPositive), 4.0);
        assert_eq!(m.branch(0.1, &[0.0], 0, Side::Positive), 2.0);
        assert_eq!(m.branch(0.7, &[0.0], 0, Side::Positive), -1.5);
        assert_eq!(m.next_jump_after(0.1), Some(0.5));
        assert!(ForcedDrift::new(ForcingPath::constant(vec![0.0], 1.0).unwrap(), 0.0).is_err());
    }
}
