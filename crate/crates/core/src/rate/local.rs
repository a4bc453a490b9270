//! Local costs `L1`, `L2`, `L0` and the dispatch `Ltilde`.

use crate::drift::DriftModel;
use crate::problem::{Problem, Side};

/// Which local cost an evaluation used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    L0,
    L1,
    L2,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::L0 => "L0",
            Branch::L1 => "L1",
            Branch::L2 => "L2",
        }
    }
}

impl core::fmt::Display for Branch {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The two branch drifts of one coordinate at one point: `b1 = F_i + mu`
/// (the `x_i <= 0` side) and `b2 = F_i - mu` (the `x_i > 0` side).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchDrifts {
    pub b1: f64,
    pub b2: f64,
}

impl BranchDrifts {
    #[inline]
    pub fn at<M: DriftModel + ?Sized>(model: &M, t: f64, x: &[f64], i: usize) -> Self {
        let f = model.force_component(t, x, i);
        let mu = model.mu();
        Self { b1: f + mu, b2: f - mu }
    }

    #[inline]
    pub fn l1(&self, beta: f64) -> f64 {
        let e = beta - self.b1;
        e * e
    }

    #[inline]
    pub fn l2(&self, beta: f64) -> f64 {
        let e = beta - self.b2;
        e * e
    }

    /// Three-case closed form of the mixed cost at zero: `0` strictly between
    /// the branch drifts, otherwise the squared distance to the nearer one.
    #[inline]
    pub fn l0(&self, beta: f64) -> f64 {
        if beta <= self.b2 {
            self.l2(beta)
        } else if beta >= self.b1 {
            self.l1(beta)
        } else {
            0.0
        }
    }

    /// Brute-force value of
    /// `inf { p (beta1 - b1)^2 + (1 - p) (beta2 - b2)^2 }` over
    /// `p in (0, 1)`, `beta1 >= 0`, `beta2 <= 0`, `p beta1 + (1 - p) beta2 = beta`.
    ///
    /// `p` runs over `grid_n` Chebyshev-clustered nodes (dense near 0 and 1,
    /// where the infimum is often approached). For each `p` the free velocity is
    /// swept over `grid_n` points and the other one follows from the mean
    /// constraint; for `p < 1/2` the free one is `beta1 in [0, B]`, otherwise
    /// `beta2 in [-B, 0]`, so the dependent one is never amplified by more than
    /// a factor one. Returns `+inf` when no grid point is feasible.
    pub fn l0_oracle(&self, beta: f64, grid_n: usize) -> f64 {
        let n = grid_n.max(10);
        let bound = 2.0 * (beta.abs() + self.b1.abs() + self.b2.abs()) + 1.0;
        let step = bound / (n - 1) as f64;
        let mut best = f64::INFINITY;
        for j in 1..=n {
            let p = 0.5 * (1.0 - libm::cos(core::f64::consts::PI * j as f64 / (n + 1) as f64));
            let q = 1.0 - p;
            for k in 0..n {
                let (beta1, beta2) = if p < 0.5 {
                    let beta1 = k as f64 * step;
                    (beta1, (beta - p * beta1) / q)
                } else {
                    let beta2 = -(k as f64) * step;
                    ((beta - q * beta2) / p, beta2)
                };
                if beta1 < 0.0 || beta2 > 0.0 {
                    continue;
                }
                let e1 = beta1 - self.b1;
                let e2 = beta2 - self.b2;
                let v = p * e1 * e1 + q * e2 * e2;
                if v < best {
                    best = v;
                }
            }
        }
        best
    }

    /// Dispatch on the sign of `x_i`: exact zero uses `L0`.
    #[inline]
    pub fn ltilde(&self, xi: f64, beta: f64) -> (f64, Branch) {
        if xi < 0.0 {
            (self.l1(beta), Branch::L1)
        } else if xi > 0.0 {
            (self.l2(beta), Branch::L2)
        } else {
            (self.l0(beta), Branch::L0)
        }
    }
}

fn drifts(p: &Problem, x: &[f64], i: usize) -> BranchDrifts {
    BranchDrifts::at(p, 0.0, x, i)
}

/// `|beta - b1_i(x)|^2`.
pub fn l1(p: &Problem, x: &[f64], beta: f64, i: usize) -> f64 {
    drifts(p, x, i).l1(beta)
}

/// `|beta - b2_i(x)|^2`.
pub fn l2(p: &Problem, x: &[f64], beta: f64, i: usize) -> f64 {
    drifts(p, x, i).l2(beta)
}

/// One-sided cost on side `side`.
pub fn l_side(p: &Problem, x: &[f64], beta: f64, i: usize, side: Side) -> f64 {
    match side {
        Side::NonPositive => l1(p, x, beta, i),
        Side::Positive => l2(p, x, beta, i),
    }
}

pub fn l0_closed(p: &Problem, x: &[f64], beta: f64, i: usize) -> f64 {
    drifts(p, x, i).l0(beta)
}

pub fn l0_oracle(p: &Problem, x: &[f64], beta: f64, i: usize, grid_n: usize) -> f64 {
    drifts(p, x, i).l0_oracle(beta, grid_n)
}

pub fn ltilde(p: &Problem, x: &[f64], beta: f64, i: usize) -> (f64, Branch) {
    drifts(p, x, i).ltilde(x[i], beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::string::ToString;

    fn origin() -> Problem {
        Problem::scalar(1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn one_sided_examples() {
        let p = origin();
        assert_eq!(l1(&p, &[-2.0], 0.0, 0), 9.0);
        assert_eq!(l2(&p, &[1.0], 0.0, 0), 4.0);
        let b = BranchDrifts::at(&p, 0.0, &[-2.0], 0);
        assert_eq!(b.l1(b.b1), 0.0);
        assert_eq!(b.l2(b.b2), 0.0);
    }

    #[test]
    fn closed_form_examples() {
        let p = origin();
        assert_eq!(l0_closed(&p, &[0.0], 0.0, 0), 0.0);
        assert_eq!(l0_closed(&p, &[0.0], 2.0, 0), 1.0);
        assert_eq!(l0_closed(&p, &[0.0], -3.0, 0), 4.0);
    }

    #[test]
    fn dispatch_examples() {
        let p = origin();
        assert_eq!(ltilde(&p, &[-2.0], 0.0, 0), (9.0, Branch::L1));
        assert_eq!(ltilde(&p, &[1.0], 0.0, 0), (4.0, Branch::L2));
        assert_eq!(ltilde(&p, &[0.0], 2.0, 0), (1.0, Branch::L0));
        assert_eq!(Branch::L0.to_string(), "L0");
    }

    #[test]
    fn oracle_inside_band_tends_to_zero() {
        let b = BranchDrifts { b1: 1.0, b2: -1.0 };
        let coarse = b.l0_oracle(0.3, 50);
        let fine = b.l0_oracle(0.3, 800);
        assert!(fine <= coarse + 1e-15);
        assert!(fine < 1e-4, "{fine}");
    }

    #[test]
    fn oracle_at_band_edge() {
        let b = BranchDrifts { b1: 1.0, b2: -1.0 };
        assert!(b.l0_oracle(1.0, 2000) < 1e-3);
        assert!((b.l0_oracle(3.0, 2000) - 4.0).abs() < 1e-3);
        assert!((b.l0_oracle(-2.5, 2000) - 2.25).abs() < 1e-3);
    }

    #[test]
    fn oracle_is_an_upper_bound_of_the_jensen_floor() {
        // Any feasible mixture costs at least (p b1 + (1-p) b2 - beta)^2 >= dist(beta, [b2, b1])^2.
        for (b1, b2, beta) in [(3.0, 1.0, 2.0), (-1.0, -3.0, -0.5), (0.5, -1.5, 4.0)] {
            let b = BranchDrifts { b1, b2 };
            assert!(b.l0_oracle(beta, 400) + 1e-12 >= b.l0(beta));
        }
    }

    proptest! {
        #[test]
        fn l1_minus_l2_identity(b1 in -5.0..5.0f64, mu in 0.1..3.0f64, beta in -10.0..10.0f64) {
            let b = BranchDrifts { b1, b2: b1 - 2.0 * mu };
            let lhs = b.l1(beta) - b.l2(beta);
            let rhs = (b.b2 - b.b1) * (2.0 * beta - b.b1 - b.b2);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }

        #[test]
        fn l1_recomputed(a in -2.0..2.0f64, y in -2.0..2.0f64, mu in 0.1..2.0f64, x in -3.0..3.0f64, beta in -5.0..5.0f64) {
            let p = Problem::scalar(a, y, mu).unwrap();
            let b1 = -(a * (a * x - y)) + mu;
            let direct = (beta - b1) * (beta - b1);
            prop_assert!((l1(&p, &[x], beta, 0) - direct).abs() <= 1e-12 * (1.0 + direct));
        }

        #[test]
        fn l0_convex_and_ordered(b1 in -5.0..5.0f64, mu in 0.05..3.0f64, u in -10.0..10.0f64, v in -10.0..10.0f64) {
            let b = BranchDrifts { b1, b2: b1 - 2.0 * mu };
            prop_assert!(b.l0(0.5 * (u + v)) <= 0.5 * (b.l0(u) + b.l0(v)) + 1e-12);
            for beta in [u, v] {
                if beta <= 0.0 {
                    prop_assert!(b.l0(beta) <= b.l2(beta) + 1e-12);
                }
                if beta >= 0.0 {
                    prop_assert!(b.l0(beta) <= b.l1(beta) + 1e-12);
                }
            }
        }

        #[test]
        fn l0_continuous(b1 in -5.0..5.0f64, mu in 0.05..3.0f64, beta in -10.0..10.0f64) {
            let b = BranchDrifts { b1, b2: b1 - 2.0 * mu };
            let mut prev = f64::INFINITY;
            for k in 1..6 {
                let h = 10f64.powi(-2 * k);
                let moved = BranchDrifts { b1: b.b1 + h, b2: b.b2 + h };
                let gap = (moved.l0(beta + h) - b.l0(beta)).abs();
                prop_assert!(gap <= prev + 1e-12);
                prev = gap;
            }
            prop_assert!(prev < 1e-8);
        }
    }

    #[test]
    fn dispatch_continuity_where_branches_agree() {
        // beta >= b1 on the left of zero: L0 = L1 there, so the left limit matches.
        let p = origin();
        let at0 = ltilde(&p, &[0.0], 2.0, 0).0;
        let left = ltilde(&p, &[-1e-9], 2.0, 0).0;
        assert!((at0 - left).abs() < 1e-8);
        // beta <= b2 on the right: L0 = L2.
        let at0 = ltilde(&p, &[0.0], -3.0, 0).0;
        let right = ltilde(&p, &[1e-9], -3.0, 0).0;
        assert!((at0 - right).abs() < 1e-8);
    }
}
