//! Fixed-order reductions used by the ensemble code.

use alloc::vec::Vec;

/// Mean, sample variance and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
}

impl Summary {
    /// Two-pass summary in slice order. The variance uses the `n - 1`
    /// denominator and is 0 for a single observation.
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { count: 0, mean: f64::NAN, variance: f64::NAN, std_error: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let variance =
            if n > 1 { xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Self { count: n, mean, variance, std_error: libm::sqrt(variance / n as f64) }
    }
}

/// `ln(mean(exp(w)))` with the max shift.
///
/// Returns `None` when every weight is `-inf` (or the slice is empty).
pub fn log_mean_exp(w: &[f64]) -> Option<f64> {
    let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return None;
    }
    let s: f64 = w.iter().map(|&x| libm::exp(x - m)).sum();
    Some(m + libm::log(s / w.len() as f64))
}

/// Least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Effective sample size of a (stationary) series.
///
/// Integrated autocorrelation time summed over Geyer's initial positive
/// sequence of paired autocorrelations.
pub fn effective_sample_size(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return n as f64;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let c0 = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return n as f64;
    }
    let acf = |lag: usize| -> f64 {
        let mut s = 0.0;
        for k in 0..n - lag {
            s += (xs[k] - mean) * (xs[k + lag] - mean);
        }
        s / n as f64 / c0
    };
    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = acf(lag) + acf(lag + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    let tau = if tau < 1.0 { 1.0 } else { tau };
    n as f64 / tau
}

/// Indices `0..n` thinned to at most `max` evenly spaced entries.
pub fn thin_indices(n: usize, max: usize) -> Vec<usize> {
    if n <= max {
        return (0..n).collect();
    }
    let stride = n.div_ceil(max);
    (0..n).step_by(stride).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_observation() {
        let s = Summary::of(&[3.5]);
        assert_eq!(s.mean, 3.5);
        assert_eq!(s.variance, 0.0);
        assert_eq!(s.std_error, 0.0);
    }

    #[test]
    fn log_mean_exp_survives_underflow() {
        let w = [-2000.0, -2001.0, -2002.0];
        let naive = (w.iter().map(|x| libm::exp(*x)).sum::<f64>() / 3.0).ln();
        assert!(naive.is_infinite());
        let stable = log_mean_exp(&w).unwrap();
        let expect = -2000.0 + ((1.0 + libm::exp(-1.0) + libm::exp(-2.0)) / 3.0f64).ln();
        assert!((stable - expect).abs() < 1e-12);
        assert_eq!(log_mean_exp(&[f64::NEG_INFINITY]), None);
    }

    #[test]
    fn iid_series_has_full_ess() {
        let s = crate::rng::GaussianStream::new(5);
        let xs: std::vec::Vec<f64> = (0..4000).map(|i| s.normal_pair(i).0).collect();
        let ess = effective_sample_size(&xs);
        assert!(ess > 2500.0 && ess < 6000.0, "{ess}");
    }

    #[test]
    fn ar1_series_has_reduced_ess() {
        // x_{k+1} = 0.9 x_k + noise: tau = (1 + 0.9) / (1 - 0.9) = 19.
        let s = crate::rng::GaussianStream::new(6);
        let mut x = 0.0;
        let xs: std::vec::Vec<f64> = (0..100_000)
            .map(|i| {
                x = 0.9 * x + s.normal_pair(i).0;
                x
            })
            .collect();
        let tau = xs.len() as f64 / effective_sample_size(&xs);
        assert!((tau - 19.0).abs() < 4.0, "{tau}");
    }
}
