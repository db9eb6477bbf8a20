//! Small statistics helpers shared by the Monte Carlo probes.

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Sample skewness and excess kurtosis (biased moment estimators are fine
/// for the >= 2000-trial normality checks).
pub fn skewness_excess_kurtosis(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = mean(xs);
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Standard error of the empirical covariance of two unit-variance Gaussian
/// coordinates with correlation `rho`, over `n` iid trials.
pub fn cov_standard_error(rho: f64, n: usize) -> f64 {
    ((1.0 + rho * rho) / n as f64).sqrt()
}

/// One-sided Wilson score interval for a binomial proportion; returns
/// (low, high) at roughly z standard deviations.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let margin = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - margin).max(0.0), (center + margin).min(1.0))
}

/// Ordinary least squares fit y = a + b x; returns (a, b, r_squared).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    let _ = n;
    (a, b, r2)
}

/// Quantile by linear interpolation on the sorted sample.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Least-squares fit of a monotone logistic `F(x) = 1/(1+exp(-(x-a)/b))`
/// to (x, frequency) pairs, by nested golden-section search over (a, b).
/// Returns the location parameter `a` (the 1/2 crossing).
pub fn logistic_midpoint(xs: &[f64], fs: &[f64]) -> f64 {
    assert_eq!(xs.len(), fs.len());
    let span = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let sse = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(fs)
            .map(|(&x, &f)| {
                let p = 1.0 / (1.0 + (-(x - a) / b).exp());
                (p - f) * (p - f)
            })
            .sum()
    };
    let golden = |lo: f64, hi: f64, f: &dyn Fn(f64) -> f64| -> f64 {
        let phi = (5.0f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (lo, hi);
        let mut c = hi - phi * (hi - lo);
        let mut d = lo + phi * (hi - lo);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..80 {
            if fc < fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - phi * (hi - lo);
                fc = f(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + phi * (hi - lo);
                fd = f(d);
            }
        }
        (lo + hi) / 2.0
    };
    let x_lo = xs.iter().cloned().fold(f64::INFINITY, f64::min) - span;
    let x_hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + span;
    let best_a_for_b = |b: f64| golden(x_lo, x_hi, &|a| sse(a, b));
    let obj_b = |b: f64| {
        let a = best_a_for_b(b);
        sse(a, b)
    };
    let b = golden(1e-4 * span.max(1e-6), 2.0 * span.max(1e-6), &obj_b);
    best_a_for_b(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn linear_fit_recovers_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let (a, b, r2) = linear_fit(&xs, &ys);
        assert_relative_eq!(a, 1.0, epsilon = 1e-12);
        assert_relative_eq!(b, 2.0, epsilon = 1e-12);
        assert_relative_eq!(r2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn logistic_midpoint_symmetric_data() {
        let xs = [-0.2, -0.1, 0.0, 0.1, 0.2];
        let fs = [0.0, 0.0, 0.5, 1.0, 1.0];
        let a = logistic_midpoint(&xs, &fs);
        assert!(a.abs() < 1e-6, "a = {a}");
    }

    #[test]
    fn logistic_midpoint_translation_equivariant() {
        let xs = [-0.2, -0.1, 0.0, 0.1, 0.2];
        let fs = [0.0, 0.0, 0.5, 1.0, 1.0];
        let shifted: Vec<f64> = xs.iter().map(|x| x + 0.07).collect();
        let a = logistic_midpoint(&shifted, &fs);
        assert_relative_eq!(a, 0.07, epsilon = 1e-6);
    }

    #[test]
    fn wilson_interval_contains_p_hat() {
        let (lo, hi) = wilson_interval(80, 100, 3.0);
        assert!(lo < 0.8 && 0.8 < hi);
        assert!(lo > 0.6 && hi < 0.95);
    }
}
