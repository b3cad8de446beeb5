use serde::Serialize;

use super::free_energy::is_localized;
use super::stats::{exponential_decay_fit, mean_stderr, median};
use super::{check_ladder, par_replicas, Ensemble};
use crate::disorder::{stream, CounterRng};
use crate::error::{Error, Result};
use crate::observables::{max_excursion, PathSampler};

/// Generator for path `path_index` of replica `replica`.
pub fn path_rng(seed: u64, replica: u64, path_index: u64) -> CounterRng {
    CounterRng::new(seed, replica, stream::PATHS.wrapping_add(path_index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MaxExcursionRow {
    pub n: usize,
    pub replica: u64,
    pub path_index: u64,
    pub delta_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxExcursionSummary {
    pub n: usize,
    pub samples: usize,
    pub f_hat: f64,
    pub f_stderr: f64,
    /// `f_hat > 5 stderr`; the band statistics are only meaningful then.
    pub localized: bool,
    pub median_ratio: f64,
    /// Fraction with `Δ_N / log N ∈ [lo, hi] / mu_hat` for each `(lo, hi)`.
    pub bands: Vec<((f64, f64), f64)>,
    /// `P(Δ_N > C log N)` for each `C`.
    pub tail: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxExcursionStudy {
    pub mu_hat: f64,
    pub rows: Vec<MaxExcursionRow>,
    pub summaries: Vec<MaxExcursionSummary>,
}

/// Bands `[(1-ε), (1+ε)]` for `ε ∈ {0.3, 0.5}` plus `[0.5, 2]`.
pub const DEFAULT_BANDS: [(f64, f64); 3] = [(0.7, 1.3), (0.5, 1.5), (0.5, 2.0)];

/// Largest excursion of sampled paths, `paths_per_replica` per replica, at
/// every ladder rung, compared with `log N / mu_hat`.
pub fn max_excursion_study(
    ens: &Ensemble,
    ladder: &[usize],
    paths_per_replica: usize,
    mu_hat: f64,
    c_grid: &[f64],
) -> Result<MaxExcursionStudy> {
    ens.validate()?;
    check_ladder(ladder)?;
    if paths_per_replica == 0 {
        return Err(Error::InvalidParameter(
            "paths_per_replica must be >= 1".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let kernel = ens.kernel_for(*ladder.last().unwrap())?;
    for &n in ladder {
        let per: Vec<(f64, Vec<usize>)> = par_replicas(ens.replicas, |r| {
            let d = ens.sample(n, r);
            let sampler = PathSampler::new(&d, &ens.params, &kernel)?;
            let deltas = (0..paths_per_replica as u64)
                .map(|i| max_excursion(&sampler.sample(&mut path_rng(ens.seed, r, i))))
                .collect();
            Ok((sampler.log_z() / n as f64, deltas))
        })?;
        let f: Vec<f64> = per.iter().map(|p| p.0).collect();
        let (f_hat, f_stderr) = mean_stderr(&f);
        let log_n = (n as f64).ln();
        let mut ratios = Vec::new();
        for (r, (_, deltas)) in per.iter().enumerate() {
            for (i, &delta_n) in deltas.iter().enumerate() {
                rows.push(MaxExcursionRow {
                    n,
                    replica: r as u64,
                    path_index: i as u64,
                    delta_n,
                });
                ratios.push(delta_n as f64 / log_n);
            }
        }
        let total = ratios.len() as f64;
        let frac =
            |pred: &dyn Fn(f64) -> bool| ratios.iter().filter(|&&x| pred(x)).count() as f64 / total;
        let bands = DEFAULT_BANDS
            .iter()
            .map(|&(lo, hi)| ((lo, hi), frac(&|x| x >= lo / mu_hat && x <= hi / mu_hat)))
            .collect();
        let tail = c_grid.iter().map(|&c| (c, frac(&|x| x > c))).collect();
        summaries.push(MaxExcursionSummary {
            n,
            samples: ratios.len(),
            f_hat,
            f_stderr,
            localized: f_hat > 5.0 * f_stderr && is_localized(f_hat, f_stderr),
            median_ratio: median(&ratios),
            bands,
            tail,
        });
    }
    Ok(MaxExcursionStudy {
        mu_hat,
        rows,
        summaries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeetTable {
    pub n: usize,
    pub window_sizes: Vec<usize>,
    /// Replica mean of the frequency of path pairs that share no return
    /// strictly inside the window.
    pub probability: Vec<f64>,
    pub stderr: Vec<f64>,
    pub c2_hat: Option<f64>,
    pub r_squared: Option<f64>,
}

/// Window `(a, a + size)` centered at `N/2`.
pub fn centered_window(n: usize, size: usize) -> (usize, usize) {
    let a = n / 2 - size / 2;
    (a, a + size)
}

/// Probability that two independent paths under the same disorder share
/// no contact strictly inside a centered window, per window size.
pub fn meet_probability(
    ens: &Ensemble,
    n: usize,
    window_sizes: &[usize],
    pairs_per_replica: usize,
) -> Result<MeetTable> {
    ens.validate()?;
    if window_sizes.is_empty()
        || window_sizes.iter().any(|&s| s == 0 || s > n / 2)
        || window_sizes.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::InvalidParameter(format!(
            "window sizes must be increasing within 1..=N/2: {window_sizes:?}"
        )));
    }
    if pairs_per_replica == 0 {
        return Err(Error::InvalidParameter(
            "pairs_per_replica must be >= 1".into(),
        ));
    }
    let kernel = ens.kernel_for(n)?;
    let rows: Vec<Vec<f64>> = par_replicas(ens.replicas, |r| {
        let d = ens.sample(n, r);
        let sampler = PathSampler::new(&d, &ens.params, &kernel)?;
        let mut avoid = vec![0usize; window_sizes.len()];
        let mut both = vec![false; n + 1];
        for pair in 0..pairs_per_replica as u64 {
            let p1 = sampler.sample(&mut path_rng(ens.seed, r, 2 * pair));
            let p2 = sampler.sample(&mut path_rng(ens.seed, r, 2 * pair + 1));
            both.iter_mut().for_each(|b| *b = false);
            for &t in &p1.returns {
                if p2.contains_return(t) {
                    both[t] = true;
                }
            }
            for (i, &size) in window_sizes.iter().enumerate() {
                let (a, b) = centered_window(n, size);
                if !both[a + 1..b].iter().any(|&x| x) {
                    avoid[i] += 1;
                }
            }
        }
        Ok(avoid
            .iter()
            .map(|&c| c as f64 / pairs_per_replica as f64)
            .collect())
    })?;
    let mut probability = Vec::new();
    let mut stderr = Vec::new();
    for i in 0..window_sizes.len() {
        let col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
        let (m, s) = mean_stderr(&col);
        probability.push(m);
        stderr.push(s);
    }
    let xs: Vec<f64> = window_sizes.iter().map(|&s| s as f64).collect();
    let fit = exponential_decay_fit(&xs, &probability, &stderr, 0.0).ok();
    Ok(MeetTable {
        n,
        window_sizes: window_sizes.to_vec(),
        probability,
        stderr,
        c2_hat: fit.map(|f| f.1),
        r_squared: fit.map(|f| f.2.r_squared),
    })
}
