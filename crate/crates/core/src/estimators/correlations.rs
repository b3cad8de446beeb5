use serde::Serialize;

use super::stats::{exponential_decay_fit, mean_stderr, median, weighted_linear_fit, LinearFit};
use super::{par_replicas, Ensemble};
use crate::error::{Error, Result};
use crate::observables::Polymer;
use crate::partition::{forward_tables, segment_until};

/// Means below this are treated as exact-arithmetic noise and kept out of fits.
pub const FIT_FLOOR: f64 = 1e-14;
/// Distances below this are kept out of decay fits.
pub const MIN_FIT_DISTANCE: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub distances: Vec<usize>,
    /// Replica mean of `|P(S_j = 0, S_{j+d} = 0) - P(S_j = 0) P(S_{j+d} = 0)|`.
    pub mean_abs_cov: Vec<f64>,
    pub stderr: Vec<f64>,
    pub c1_hat: f64,
    pub c2_hat: f64,
    pub r_squared: f64,
    /// Points that entered the fit.
    pub fitted_points: usize,
}

fn check_distances(distances: &[usize]) -> Result<()> {
    if distances.is_empty() || distances[0] == 0 || distances.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!(
            "distances must be non-empty, positive and strictly increasing: {distances:?}"
        )));
    }
    Ok(())
}

fn decay_fit(x: &[usize], mean: &[f64], se: &[f64]) -> Result<(f64, f64, LinearFit)> {
    let keep: Vec<usize> = (0..x.len()).filter(|&i| x[i] >= MIN_FIT_DISTANCE).collect();
    let xs: Vec<f64> = keep.iter().map(|&i| x[i] as f64).collect();
    let ms: Vec<f64> = keep.iter().map(|&i| mean[i]).collect();
    let ss: Vec<f64> = keep.iter().map(|&i| se[i]).collect();
    exponential_decay_fit(&xs, &ms, &ss, FIT_FLOOR)
}

/// Two-point contact covariance as a function of distance from the
/// anchor `j = ⌊N/4⌋`, one segment-table pass per replica.
pub fn fit_correlation_decay(ens: &Ensemble, n: usize, distances: &[usize]) -> Result<DecayFit> {
    ens.validate()?;
    check_distances(distances)?;
    let j = n / 4;
    let d_max = *distances.last().unwrap();
    if j == 0 || 4 * d_max >= 3 * n || j + d_max > n {
        return Err(Error::InvalidParameter(format!(
            "distances up to {d_max} do not fit in N = {n} from anchor {j}"
        )));
    }
    let kernel = ens.kernel_for(n)?;
    let rows: Vec<Vec<f64>> = par_replicas(ens.replicas, |r| {
        let d = ens.sample(n, r);
        let poly = Polymer::solve(&d, &ens.params, &kernel)?;
        let seg = segment_until(j, j + d_max, &d, &ens.params, &kernel)?;
        let tb = &poly.tables;
        let pj = poly.contact_probability(j);
        Ok(distances
            .iter()
            .map(|&dist| {
                let t = j + dist;
                let joint = (tb.log_zf[j] + seg.get(t) + tb.log_zb[t] - poly.log_z()).exp();
                (joint - pj * poly.contact_probability(t)).abs()
            })
            .collect())
    })?;
    let mut mean_abs_cov = Vec::new();
    let mut stderr = Vec::new();
    for i in 0..distances.len() {
        let col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
        let (m, s) = mean_stderr(&col);
        mean_abs_cov.push(m);
        stderr.push(s);
    }
    let (c1_hat, c2_hat, fit) = decay_fit(distances, &mean_abs_cov, &stderr)?;
    Ok(DecayFit {
        distances: distances.to_vec(),
        mean_abs_cov,
        stderr,
        c1_hat,
        c2_hat,
        r_squared: fit.r_squared,
        fitted_points: fit.points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryInfluence {
    pub k: Vec<usize>,
    /// `k - ⌊k/2⌋`, the distance from the observed site to the cut.
    pub distance: Vec<usize>,
    /// Replica mean of `|P_N(S_{k/2} = 0) - P_k(S_{k/2} = 0)|`.
    pub mean_abs_diff: Vec<f64>,
    pub stderr: Vec<f64>,
    pub c2_hat: Option<f64>,
    pub r_squared: Option<f64>,
}

/// Effect of cutting the system at `k` on the contact at `⌊k/2⌋`.
pub fn boundary_influence(ens: &Ensemble, n: usize, k_list: &[usize]) -> Result<BoundaryInfluence> {
    ens.validate()?;
    if k_list.is_empty() || k_list.iter().any(|&k| k < 2 || k > n) {
        return Err(Error::InvalidParameter(format!(
            "boundary cuts must satisfy 2 <= k <= N = {n}: {k_list:?}"
        )));
    }
    let kernel = ens.kernel_for(n)?;
    let rows: Vec<Vec<f64>> = par_replicas(ens.replicas, |r| {
        let d = ens.sample(n, r);
        let full = Polymer::solve(&d, &ens.params, &kernel)?;
        k_list
            .iter()
            .map(|&k| {
                let site = k / 2;
                let cut = forward_tables(&d.prefix(k), &ens.params, &kernel)?;
                let pk = (cut.log_zf[site] + cut.log_zb[site] - cut.log_zf[k]).exp();
                Ok((full.contact_probability(site) - pk).abs())
            })
            .collect()
    })?;
    let mut mean_abs_diff = Vec::new();
    let mut stderr = Vec::new();
    for i in 0..k_list.len() {
        let col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
        let (m, s) = mean_stderr(&col);
        mean_abs_diff.push(m);
        stderr.push(s);
    }
    let distance: Vec<usize> = k_list.iter().map(|&k| k - k / 2).collect();
    let fit = decay_fit(&distance, &mean_abs_diff, &stderr).ok();
    Ok(BoundaryInfluence {
        k: k_list.to_vec(),
        distance,
        mean_abs_diff,
        stderr,
        c2_hat: fit.map(|f| f.1),
        r_squared: fit.map(|f| f.2.r_squared),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcursionRateReport {
    pub n: usize,
    pub k: usize,
    pub s_range: (usize, usize),
    /// Least-squares slope of `s ↦ log P(Δ_N(k) = s)`, per replica.
    pub replica_slopes: Vec<f64>,
    pub median_slope: f64,
    /// Slope of the replica-averaged law.
    pub annealed_slope: f64,
    /// Largest `|Σ_s pmf(s) - 1|` over replicas.
    pub max_mass_error: f64,
    /// Replica-averaged law, indexed by `s` in `0..=N`.
    pub mean_pmf: Vec<f64>,
}

impl ExcursionRateReport {
    /// Fraction of replicas whose slope lies in `[-(f + eps), -(f - eps)]`.
    pub fn fraction_within(&self, f: f64, eps: f64) -> f64 {
        let hits = self
            .replica_slopes
            .iter()
            .filter(|&&s| s >= -(f + eps) && s <= -(f - eps))
            .count();
        hits as f64 / self.replica_slopes.len() as f64
    }
}

/// Exponential rate of the law of the excursion covering site `k`, for
/// gap lengths in `s_range` (inclusive).
pub fn excursion_rate_check(
    ens: &Ensemble,
    n: usize,
    k: usize,
    s_range: (usize, usize),
) -> Result<ExcursionRateReport> {
    ens.validate()?;
    let (lo, hi) = s_range;
    if lo == 0 || hi <= lo || hi > n / 2 || k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "excursion rate needs 1 <= s_lo < s_hi <= N/2 and 1 <= k < N, got s = {s_range:?}, k = {k}, N = {n}"
        )));
    }
    let kernel = ens.kernel_for(n)?;
    let laws: Vec<Vec<f64>> = par_replicas(ens.replicas, |r| {
        let d = ens.sample(n, r);
        let poly = Polymer::solve(&d, &ens.params, &kernel)?;
        Ok(poly.excursion_law(k)?.pmf)
    })?;
    let xs: Vec<f64> = (lo..=hi).map(|s| s as f64).collect();
    let ones = vec![1.0; xs.len()];
    let slope_of = |pmf: &[f64]| -> Result<f64> {
        let ys: Vec<f64> = (lo..=hi).map(|s| pmf[s].ln()).collect();
        Ok(weighted_linear_fit(&xs, &ys, &ones)?.slope)
    };
    let replica_slopes = laws
        .iter()
        .map(|p| slope_of(p))
        .collect::<Result<Vec<_>>>()?;
    let mut mean_law = vec![0.0; n + 1];
    for p in &laws {
        for (m, v) in mean_law.iter_mut().zip(p) {
            *m += v / laws.len() as f64;
        }
    }
    let max_mass_error = laws
        .iter()
        .map(|p| (p.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(ExcursionRateReport {
        n,
        k,
        s_range,
        median_slope: median(&replica_slopes),
        annealed_slope: slope_of(&mean_law)?,
        replica_slopes,
        max_mass_error,
        mean_pmf: mean_law,
    })
}
