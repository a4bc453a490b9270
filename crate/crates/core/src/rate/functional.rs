//! The path rate functional `I(phi) = 1/2 sum_i int Ltilde_i(phi, phi_i') dt`.

use alloc::vec;
use alloc::vec::Vec;

use super::local::{Branch, BranchDrifts};
use crate::drift::DriftModel;
use crate::error::{check_len, input, Result};
use crate::path::PiecewisePath;
use crate::quad::gauss_legendre8;

/// Per-piece, per-coordinate contributions `int Ltilde_i dt` (without the 1/2).
#[derive(Debug, Clone, PartialEq)]
pub struct RateBreakdown {
    /// Half the sum of all `per_interval` entries.
    pub total: f64,
    /// `per_interval[k][i]`.
    pub per_interval: Vec<Vec<f64>>,
    pub branch_used: Vec<Vec<Branch>>,
}

/// Sub-intervals of `[a, b]` cut at the model's time jumps.
fn cut_at_jumps<M: DriftModel + ?Sized>(model: &M, a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut s = a;
    while let Some(j) = model.next_jump_after(s) {
        if j >= b {
            break;
        }
        out.push((s, j));
        s = j;
    }
    out.push((s, b));
    out
}

/// Rate of a path in the class of piecewise-linear paths with zero flags.
///
/// Flagged coordinates cost `L0(phi(t), 0)` along their piece; every other
/// coordinate costs the one-sided `L1` or `L2` fixed by its sign on the
/// piece. Each piece is integrated with eight-node Gauss–Legendre, split at
/// the model's time jumps, which is exact whenever the force is affine in
/// `x` and constant in time on the sub-piece.
pub fn rate_functional<M: DriftModel + ?Sized>(model: &M, phi: &PiecewisePath) -> Result<RateBreakdown> {
    phi.validate()?;
    let d = model.dim();
    check_len(d, phi.dim())?;
    let bp = phi.breakpoints();
    let mut per_interval = Vec::with_capacity(phi.pieces());
    let mut branch_used = Vec::with_capacity(phi.pieces());
    let mut x = vec![0.0; d];
    let mut total = 0.0;
    for k in 0..phi.pieces() {
        let (t0, t1) = (bp[k], bp[k + 1]);
        let mut row = vec![0.0; d];
        let mut tags = vec![Branch::L0; d];
        for i in 0..d {
            let flagged = phi.zero_flags()[k][i];
            let (beta, tag) = if flagged {
                (0.0, Branch::L0)
            } else {
                let mid = 0.5 * (phi.values()[k][i] + phi.values()[k + 1][i]);
                let tag = if mid > 0.0 { Branch::L2 } else { Branch::L1 };
                (phi.slope(k, i), tag)
            };
            let mut c = 0.0;
            for (a, b) in cut_at_jumps(model, t0, t1) {
                c += gauss_legendre8(a, b, |t| {
                    phi.eval_on_piece(k, t, &mut x);
                    let drifts = BranchDrifts::at(model, t, &x, i);
                    match tag {
                        Branch::L0 => drifts.l0(beta),
                        Branch::L1 => drifts.l1(beta),
                        Branch::L2 => drifts.l2(beta),
                    }
                });
            }
            row[i] = c.max(0.0);
            tags[i] = tag;
            total += row[i];
        }
        per_interval.push(row);
        branch_used.push(tags);
    }
    Ok(RateBreakdown { total: 0.5 * total, per_interval, branch_used })
}

/// Rate of a sampled path: for each grid segment, `Ltilde` at the segment
/// midpoint with the forward-difference slope, times the segment length;
/// half the sum.
pub fn discrete_rate<M: DriftModel + ?Sized>(model: &M, times: &[f64], states: &[Vec<f64>]) -> Result<f64> {
    if times.len() < 2 || times.len() != states.len() {
        return Err(input("a sampled path needs at least two samples, one state per time"));
    }
    let d = model.dim();
    for s in states {
        check_len(d, s.len())?;
    }
    let mut mid = vec![0.0; d];
    let mut sum = 0.0;
    for k in 0..times.len() - 1 {
        let h = times[k + 1] - times[k];
        if !(h > 0.0) {
            return Err(input("sample times must increase"));
        }
        let tm = times[k] + 0.5 * h;
        for i in 0..d {
            let (a, b) = (states[k][i], states[k + 1][i]);
            mid[i] = if a == 0.0 && b == 0.0 { 0.0 } else { 0.5 * (a + b) };
        }
        for i in 0..d {
            let slope = (states[k + 1][i] - states[k][i]) / h;
            let (v, _) = BranchDrifts::at(model, tm, &mid, i).ltilde(mid[i], slope);
            sum += h * v;
        }
    }
    Ok(0.5 * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::ForcedDrift;
    use crate::inclusion::exact_piecewise_flow;
    use crate::path::ForcingPath;
    use crate::problem::Problem;
    use proptest::prelude::*;
    use std::vec;

    fn origin() -> Problem {
        Problem::scalar(1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn constant_path_costs_two() {
        let phi = PiecewisePath::new(vec![0.0, 1.0], vec![vec![1.0], vec![1.0]], vec![vec![false]]).unwrap();
        let r = rate_functional(&origin(), &phi).unwrap();
        assert!((r.total - 2.0).abs() < 1e-14);
        assert_eq!(r.branch_used, vec![vec![Branch::L2]]);
        assert!((r.total - 0.5 * r.per_interval[0][0]).abs() < 1e-15);
    }

    #[test]
    fn linear_path_matches_polynomial_integral() {
        let phi = PiecewisePath::new(vec![0.0, 1.0], vec![vec![0.0], vec![1.0]], vec![vec![false]]).unwrap();
        let r = rate_functional(&origin(), &phi).unwrap();
        assert!((r.total - 19.0 / 6.0).abs() < 1e-13);
        // Fine Riemann sum of (2 + t)^2 / 2 as a second opinion.
        let n = 200_000;
        let riemann: f64 = (0..n)
            .map(|k| {
                let t = (k as f64 + 0.5) / n as f64;
                (2.0 + t) * (2.0 + t)
            })
            .sum::<f64>()
            / n as f64;
        assert!((r.total - 0.5 * riemann).abs() < 1e-8);
    }

    #[test]
    fn stuck_piece_in_band_is_free() {
        let p = Problem::scalar(1.0, 0.5, 1.0).unwrap();
        let phi = PiecewisePath::new(vec![0.0, 1.0], vec![vec![0.0], vec![0.0]], vec![vec![true]]).unwrap();
        let r = rate_functional(&p, &phi).unwrap();
        assert_eq!(r.total, 0.0);
        assert_eq!(r.branch_used[0][0], Branch::L0);
        // Out of band (|g| = 2 > mu): L0(., 0) = b2^2 = 1.
        let p = Problem::scalar(1.0, 2.0, 1.0).unwrap();
        assert!((rate_functional(&p, &phi).unwrap().total - 0.5).abs() < 1e-14);
    }

    #[test]
    fn forced_flow_paths_are_free() {
        let f = ForcingPath::new(vec![0.0, 0.3, 0.55, 1.0], vec![vec![-2.0, 0.4], vec![0.7, 2.5], vec![-1.5, -0.2]])
            .unwrap();
        let phi = exact_piecewise_flow(&f, 1.0, &[0.4, -0.1]).unwrap();
        let m = ForcedDrift::new(f, 1.0).unwrap();
        assert!(rate_functional(&m, &phi).unwrap().total.abs() < 1e-12);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let phi =
            PiecewisePath::new(vec![0.0, 1.0], vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![vec![false, false]]).unwrap();
        assert!(rate_functional(&origin(), &phi).is_err());
    }

    #[test]
    fn discrete_rate_converges_to_the_functional() {
        let phi = PiecewisePath::new(
            vec![0.0, 0.5, 1.0],
            vec![vec![-0.5], vec![0.0], vec![0.0]],
            vec![vec![false], vec![true]],
        )
        .unwrap();
        let exact = rate_functional(&origin(), &phi).unwrap().total;
        let n = 4000;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let states = phi.sample(&times);
        let approx = discrete_rate(&origin(), &times, &states).unwrap();
        assert!((approx - exact).abs() < 1e-4, "{approx} vs {exact}");
    }

    proptest! {
        #[test]
        fn refinement_invariance(v in proptest::collection::vec(-2.0..2.0f64, 4), parts in 1usize..5) {
            let times = [0.0, 0.2, 0.6, 0.8, 1.0];
            let mut nodes = vec![vec![0.3]];
            nodes.extend(v.iter().map(|&x| vec![x]));
            let phi = PiecewisePath::from_nodes(&times, &nodes).unwrap();
            let p = Problem::scalar(1.3, 0.4, 0.7).unwrap();
            let a = rate_functional(&p, &phi).unwrap().total;
            let b = rate_functional(&p, &phi.refined(parts)).unwrap().total;
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a));
        }
    }
}
