//! The zero-noise limit: a differential inclusion `dx ∈ {F(t, x) - mu sgn(x)} dt`
//! whose coordinates stick at zero.
//!
//! A coordinate at zero stays there while `|F_i| <= mu` (closed band, with a
//! `1e-12` tolerance); otherwise it leaves on the branch whose drift points away
//! from zero. Away from zero each coordinate follows its branch drift with an
//! explicit Euler step. Zero crossings inside a step are located by linear
//! interpolation, the crossing coordinate is snapped to an exact `0.0`, and the
//! rest of the step is re-evaluated from there.

use alloc::vec;
use alloc::vec::Vec;

use crate::drift::{DriftModel, ForcedDrift};
use crate::error::{check_len, input, Error, Result};
use crate::path::{ForcingPath, PiecewisePath, Trajectory};
use crate::problem::Problem;

/// Band tolerance on the sticking test `|F_i| <= mu`.
pub const TOL_BAND: f64 = 1e-12;

/// Upper bound on zero-crossing events handled inside a single grid step,
/// per coordinate.
const MAX_EVENTS_PER_COORD: usize = 4;

/// Velocity of coordinate `i` at `x_i` under force `force` with penalty `mu`.
#[inline]
fn sticky_slope(xi: f64, force: f64, mu: f64, band: f64) -> f64 {
    if xi > 0.0 {
        force - mu
    } else if xi < 0.0 {
        force + mu
    } else if force > mu + band {
        force - mu
    } else if force < -(mu + band) {
        force + mu
    } else {
        0.0
    }
}

/// Number of grid steps and the grid time of step `k`.
pub(crate) fn grid(horizon: f64, dt: f64) -> (usize, impl Fn(usize) -> f64) {
    let steps = libm::ceil(horizon / dt - 1e-9).max(1.0) as usize;
    (steps, move |k: usize| if k >= steps { horizon } else { k as f64 * dt })
}

fn check_flow_args(horizon: f64, dt: f64, tol_zero: f64) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(input("horizon must be positive and finite"));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(input("dt must be positive and finite"));
    }
    if !(tol_zero >= 0.0) {
        return Err(input("tol_zero must be non-negative"));
    }
    Ok(())
}

/// Sticky Euler integration of `dx ∈ {F(t, x) - mu sgn(x)} dt` on `[0, horizon]`.
pub fn integrate_sticky<M: DriftModel + ?Sized>(
    model: &M,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    tol_zero: f64,
) -> Result<Trajectory> {
    check_flow_args(horizon, dt, tol_zero)?;
    let d = model.dim();
    check_len(d, x0.len())?;
    let mu = model.mu();

    let mut x: Vec<f64> = x0.iter().map(|&v| if v.abs() <= tol_zero { 0.0 } else { v }).collect();
    let mut force = vec![0.0; d];
    let mut slope = vec![0.0; d];
    let mut frozen = vec![false; d];

    let (steps, time_of) = grid(horizon, dt);
    let mut traj = Trajectory::with_capacity(d, steps + 1);

    let record = |t: f64, x: &[f64], force: &mut [f64], frozen: &mut [bool], traj: &mut Trajectory| {
        model.force_into(t, x, force);
        for i in 0..d {
            frozen[i] = x[i] == 0.0 && force[i].abs() <= mu + TOL_BAND;
        }
        traj.push(t, x, frozen);
    };
    record(0.0, &x, &mut force, &mut frozen, &mut traj);

    for k in 0..steps {
        let t_next = time_of(k + 1);
        let mut s = time_of(k);
        let mut events = 0usize;
        while s < t_next {
            let end = match model.next_jump_after(s) {
                Some(j) if j < t_next => j,
                _ => t_next,
            };
            let h = end - s;
            model.force_into(s, &x, &mut force);
            for i in 0..d {
                slope[i] = sticky_slope(x[i], force[i], mu, TOL_BAND);
            }
            // Earliest zero crossing among coordinates heading to zero.
            let mut tau = h;
            let mut hit = false;
            for i in 0..d {
                if x[i] != 0.0 && x[i] * slope[i] < 0.0 {
                    let ti = -x[i] / slope[i];
                    if ti <= tau {
                        tau = ti;
                        hit = true;
                    }
                }
            }
            if hit && events >= MAX_EVENTS_PER_COORD * d + 4 {
                // Too many events in one step: finish the step, clamping any
                // coordinate that would cross.
                for i in 0..d {
                    let nx = x[i] + h * slope[i];
                    x[i] = if x[i] != 0.0 && nx * x[i] <= 0.0 { 0.0 } else { nx };
                }
                s = end;
                continue;
            }
            for i in 0..d {
                let was = x[i];
                let nx = was + tau * slope[i];
                let heading_in = was != 0.0 && was * slope[i] < 0.0;
                x[i] = if heading_in && (nx * was <= 0.0 || nx.abs() <= tol_zero) { 0.0 } else { nx };
            }
            if hit {
                events += 1;
                s = if tau >= h { end } else { s + tau };
            } else {
                s = end;
            }
        }
        record(t_next, &x, &mut force, &mut frozen, &mut traj);
    }
    Ok(traj)
}

/// The zero-noise lasso flow `dx ∈ -{A^T (A x - y) + mu sgn(x)} dt`.
pub fn flow_integrate(p: &Problem, x0: &[f64], horizon: f64, dt: f64, tol_zero: f64) -> Result<Trajectory> {
    integrate_sticky(p, x0, horizon, dt, tol_zero)
}

/// The forced inclusion `dx ∈ {f(t) - mu sgn(x)} dt` on `[0, horizon(f)]`.
pub fn forced_flow_integrate(f: &ForcingPath, mu: f64, x0: &[f64], dt: f64, tol_zero: f64) -> Result<Trajectory> {
    let model = ForcedDrift::new(f.clone(), mu)?;
    integrate_sticky(&model, x0, f.horizon(), dt, tol_zero)
}

/// Terminal state of the lasso flow; for long horizons a lasso minimiser.
pub fn limit_point(p: &Problem, x0: &[f64], horizon: f64, dt: f64, tol_zero: f64) -> Result<Vec<f64>> {
    Ok(flow_integrate(p, x0, horizon, dt, tol_zero)?.terminal().to_vec())
}

/// Exact solution of the forced inclusion for a step-function forcing.
///
/// Within every forcing piece each coordinate moves with constant slope
/// `f_i - mu`, `f_i + mu` or `0`; breakpoints are added at the forcing jumps
/// and at every time a coordinate reaches zero.
pub fn exact_piecewise_flow(f: &ForcingPath, mu: f64, x0: &[f64]) -> Result<PiecewisePath> {
    if !(mu > 0.0) {
        return Err(input("mu must be positive"));
    }
    let d = f.dim();
    check_len(d, x0.len())?;
    let mut x = x0.to_vec();
    let mut bp = vec![0.0];
    let mut vals = vec![x.clone()];
    let mut flags: Vec<Vec<bool>> = Vec::new();
    let mut slope = vec![0.0; d];

    let fbp = f.breakpoints();
    for (piece, force) in f.values().iter().enumerate() {
        let end = fbp[piece + 1];
        let mut s = fbp[piece];
        // Each coordinate can reach zero at most twice per piece (arrive, then
        // nothing: a coordinate that crosses keeps moving away).
        for _ in 0..=2 * d + 1 {
            for i in 0..d {
                slope[i] = sticky_slope(x[i], force[i], mu, 0.0);
            }
            let mut tau = f64::INFINITY;
            for i in 0..d {
                if x[i] != 0.0 && x[i] * slope[i] < 0.0 {
                    tau = tau.min(-x[i] / slope[i]);
                }
            }
            let piece_flags: Vec<bool> = (0..d).map(|i| x[i] == 0.0 && slope[i] == 0.0).collect();
            let reach = s + tau;
            let at_end = reach >= end - 1e-14 * (1.0 + end.abs());
            let stop = if at_end { end } else { reach };
            let h = stop - s;
            for i in 0..d {
                let was = x[i];
                if piece_flags[i] {
                    continue;
                }
                let hits = was != 0.0 && was * slope[i] < 0.0 && (-was / slope[i]) <= tau * (1.0 + 1e-12);
                x[i] = if hits && (at_end && tau <= end - s + 1e-14 * (1.0 + end.abs()) || !at_end) {
                    0.0
                } else {
                    was + h * slope[i]
                };
            }
            bp.push(stop);
            vals.push(x.clone());
            flags.push(piece_flags);
            s = stop;
            if at_end {
                break;
            }
        }
        if s < end {
            return Err(Error::Numerical("exact flow exceeded its event budget".into()));
        }
    }
    PiecewisePath::new(bp, vals, flags)
}

/// Limiting time fractions `(mu - f)/(2 mu)` below and `(f + mu)/(2 mu)`
/// above zero of a coordinate stuck at zero under force `f`.
pub fn occupation_fractions(f: f64, mu: f64) -> Result<(f64, f64)> {
    if !(mu > 0.0) {
        return Err(input("mu must be positive"));
    }
    if f.abs() > mu {
        return Err(Error::NotSticking { force: f, mu });
    }
    Ok(((mu - f) / (2.0 * mu), (f + mu) / (2.0 * mu)))
}
