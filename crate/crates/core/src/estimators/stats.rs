//! Small descriptive-statistics and fitting helpers.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Sample mean and standard error of the mean (`s / sqrt(n)`, with the
/// unbiased sample variance). The standard error is 0 for fewer than two
/// values.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Moment-based skewness and excess kurtosis.
pub fn skewness_kurtosis(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if m2 == 0.0 {
        return (0.0, 0.0);
    }
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Kolmogorov–Smirnov distance between the sample and a normal law with
/// the sample's own mean and standard deviation.
pub fn ks_normal(xs: &[f64]) -> f64 {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = variance(xs).sqrt();
    if !(sd > 0.0) {
        return f64::NAN;
    }
    let mut z: Vec<f64> = xs.iter().map(|x| (x - mean) / sd).collect();
    z.sort_by(|a, b| a.total_cmp(b));
    let mut d: f64 = 0.0;
    for (i, &zi) in z.iter().enumerate() {
        let f = normal_cdf(zi);
        d = d
            .max((i + 1) as f64 / n as f64 - f)
            .max(f - i as f64 / n as f64);
    }
    d
}

/// Median (average of the middle pair for even lengths).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    /// Weighted coefficient of determination.
    pub r_squared: f64,
    pub points: usize,
}

/// Weighted least squares `y ≈ a + b x`.
pub fn weighted_linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<LinearFit> {
    assert!(x.len() == y.len() && y.len() == w.len());
    let pts: Vec<(f64, f64, f64)> = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((&x, &y), &w)| (x, y, w))
        .filter(|&(x, y, w)| x.is_finite() && y.is_finite() && w.is_finite() && w > 0.0)
        .collect();
    if pts.len() < 2 {
        return Err(Error::Numerical(format!(
            "linear fit needs at least two usable points, got {}",
            pts.len()
        )));
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| p.2 * (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Numerical("linear fit with a single abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts
        .iter()
        .map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(LinearFit {
        intercept,
        slope,
        r_squared,
        points: pts.len(),
    })
}

/// Fit `mean(x) ≈ c1 e^{-c2 x}` on the log scale, weighting each point by
/// the inverse variance of its log, `(mean/stderr)^2`. Points with mean
/// below `floor` are dropped. Returns `(c1, c2, fit)`.
pub fn exponential_decay_fit(
    x: &[f64],
    mean: &[f64],
    stderr: &[f64],
    floor: f64,
) -> Result<(f64, f64, LinearFit)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for i in 0..x.len() {
        if mean[i] >= floor && mean[i] > 0.0 {
            xs.push(x[i]);
            ys.push(mean[i].ln());
            ws.push(if stderr[i] > 0.0 {
                (mean[i] / stderr[i]).powi(2)
            } else {
                1.0
            });
        }
    }
    // all-exact inputs (zero stderr everywhere) fall back to equal weights
    if stderr.iter().all(|&s| s == 0.0) {
        ws.iter_mut().for_each(|w| *w = 1.0);
    }
    let fit = weighted_linear_fit(&xs, &ys, &ws)?;
    Ok((fit.intercept.exp(), -fit.slope, fit))
}
