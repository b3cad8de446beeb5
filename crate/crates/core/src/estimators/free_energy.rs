use serde::Serialize;

use super::stats::{ks_normal, mean_stderr, skewness_kurtosis, variance};
use super::{check_ladder, finite, par_replicas, Ensemble};
use crate::disorder::DisorderLaw;
use crate::error::{Error, Result};
use crate::logspace::{log_sum_exp, softplus};
use crate::partition::{forward_log_z, Coupling, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeEnergyEstimate {
    pub n: usize,
    pub replicas: usize,
    /// Replica mean of `(1/N) log Z_N`, an estimate of `F = f - λh`.
    pub f_hat: f64,
    pub stderr: f64,
    /// Richardson value against the previous rung, absent on the first.
    pub f_extrapolated: Option<f64>,
}

/// Richardson extrapolation assuming `f_N = f + c/N`.
pub fn richardson(n1: usize, f1: f64, n2: usize, f2: f64) -> f64 {
    let (a, b) = (n1 as f64, n2 as f64);
    (b * f2 - a * f1) / (b - a)
}

/// `log Z_N` and `W_N` at every rung, one row per replica. Rungs share
/// the disorder prefix of a single sample of the longest length.
pub(crate) fn ladder_samples(ens: &Ensemble, ladder: &[usize]) -> Result<Vec<Vec<(f64, f64)>>> {
    ens.validate()?;
    check_ladder(ladder)?;
    let top = *ladder.last().unwrap();
    let kernel = ens.kernel_for(top)?;
    par_replicas(ens.replicas, |r| {
        let d = ens.sample(top, r);
        let zf = forward_log_z(&d, &ens.params, &kernel)?;
        ladder
            .iter()
            .map(|&n| Ok((finite(zf[n], "log Z")?, d.w(n))))
            .collect()
    })
}

fn free_energy_rows(
    ens: &Ensemble,
    ladder: &[usize],
    rows: &[Vec<(f64, f64)>],
) -> Vec<FreeEnergyEstimate> {
    let mut out: Vec<FreeEnergyEstimate> = Vec::with_capacity(ladder.len());
    for (i, &n) in ladder.iter().enumerate() {
        let f: Vec<f64> = rows.iter().map(|row| row[i].0 / n as f64).collect();
        let (f_hat, stderr) = mean_stderr(&f);
        let f_extrapolated = out
            .last()
            .map(|prev| richardson(prev.n, prev.f_hat, n, f_hat));
        out.push(FreeEnergyEstimate {
            n,
            replicas: ens.replicas,
            f_hat,
            stderr,
            f_extrapolated,
        });
    }
    out
}

pub fn estimate_free_energy(ens: &Ensemble, ladder: &[usize]) -> Result<Vec<FreeEnergyEstimate>> {
    let rows = ladder_samples(ens, ladder)?;
    Ok(free_energy_rows(ens, ladder, &rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuEstimate {
    pub n: usize,
    pub replicas: usize,
    /// `-(1/N) log( (1/R) Σ_r (1 + e^{-2λW_N}) / Z_N )`.
    pub mu_hat: f64,
    /// Delta-method standard error of `mu_hat`.
    pub stderr: f64,
    /// Same with numerator 1; only for a symmetric `ω` law.
    pub mu_hat_symmetric: Option<f64>,
    pub f_hat: f64,
    pub f_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuStudy {
    pub rungs: Vec<MuEstimate>,
    /// `mu_hat` non-decreasing across rungs up to twice the combined stderr.
    pub monotone: bool,
    /// `0 < mu_hat <= f_hat + 3 f_stderr` at every rung.
    pub below_free_energy: bool,
}

/// `-(1/N) (LSE_r a_r - log R)` with the delta-method stderr.
fn annealed_rate(a: &[f64], n: usize) -> (f64, f64) {
    let r = a.len() as f64;
    let lse = log_sum_exp(a);
    let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let y: Vec<f64> = a.iter().map(|x| (x - max).exp()).collect();
    let (mean, se) = mean_stderr(&y);
    (-(lse - r.ln()) / n as f64, se / mean / n as f64)
}

fn mu_rows(ens: &Ensemble, ladder: &[usize], rows: &[Vec<(f64, f64)>]) -> Vec<MuEstimate> {
    let two_lambda = 2.0 * ens.params.lambda;
    let fe = free_energy_rows(ens, ladder, rows);
    ladder
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let a: Vec<f64> = rows
                .iter()
                .map(|row| softplus(-two_lambda * row[i].1) - row[i].0)
                .collect();
            let (mu_hat, stderr) = annealed_rate(&a, n);
            let mu_hat_symmetric = ens.omega_law.is_symmetric().then(|| {
                let b: Vec<f64> = rows.iter().map(|row| -row[i].0).collect();
                annealed_rate(&b, n).0
            });
            MuEstimate {
                n,
                replicas: ens.replicas,
                mu_hat,
                stderr,
                mu_hat_symmetric,
                f_hat: fe[i].f_hat,
                f_stderr: fe[i].stderr,
            }
        })
        .collect()
}

pub fn estimate_mu(ens: &Ensemble, ladder: &[usize]) -> Result<MuStudy> {
    let rows = ladder_samples(ens, ladder)?;
    let rungs = mu_rows(ens, ladder, &rows);
    let monotone = rungs.windows(2).all(|w| {
        let se = (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        w[1].mu_hat >= w[0].mu_hat - 2.0 * se
    });
    let below_free_energy = rungs
        .iter()
        .all(|m| m.mu_hat > 0.0 && m.mu_hat <= m.f_hat + 3.0 * m.f_stderr);
    Ok(MuStudy {
        rungs,
        monotone,
        below_free_energy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CltRow {
    pub n: usize,
    pub replicas: usize,
    pub mean_over_n: f64,
    /// `Var(log Z_N) / N`.
    pub var_over_n: f64,
    pub skewness: f64,
    /// Excess kurtosis.
    pub kurtosis: f64,
    /// KS distance of `log Z_N` to the normal law with fitted moments.
    pub ks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltReport {
    pub rows: Vec<CltRow>,
}

impl CltReport {
    /// Relative difference of `var_over_n` between the top two rungs.
    pub fn top_variance_ratio(&self) -> Option<f64> {
        let k = self.rows.len();
        (k >= 2).then(|| self.rows[k - 1].var_over_n / self.rows[k - 2].var_over_n)
    }
}

pub fn clt_study(ens: &Ensemble, ladder: &[usize]) -> Result<CltReport> {
    let rows = ladder_samples(ens, ladder)?;
    let out = ladder
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let x: Vec<f64> = rows.iter().map(|row| row[i].0).collect();
            let var = variance(&x);
            let (skewness, kurtosis) = skewness_kurtosis(&x);
            CltRow {
                n,
                replicas: ens.replicas,
                mean_over_n: x.iter().sum::<f64>() / (x.len() * n) as f64,
                var_over_n: var / n as f64,
                skewness,
                kurtosis,
                ks: if var > 0.0 { ks_normal(&x) } else { 0.0 },
            }
        })
        .collect();
    Ok(CltReport { rows: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FiniteSizeVerdict {
    BoundedGap,
    LogGrowth,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteSizeReport {
    pub n_ladder: Vec<usize>,
    pub f_n: Vec<f64>,
    pub f_stderr: Vec<f64>,
    /// `N (f_{2N} - f_N)` for consecutive rungs `N, 2N`.
    pub scaled_gap: Vec<f64>,
    pub gap_stderr: Vec<f64>,
    pub verdict: FiniteSizeVerdict,
}

impl FiniteSizeReport {
    /// `f_{2N} >= f_N - 3 stderr` at every rung.
    pub fn superadditive(&self) -> bool {
        (1..self.f_n.len()).all(|i| {
            let se = (self.f_stderr[i].powi(2) + self.f_stderr[i - 1].powi(2)).sqrt();
            self.f_n[i] >= self.f_n[i - 1] - 3.0 * se
        })
    }
}

/// Classify the last three scaled gaps.
///
/// Bounded: within a mutual factor 2, with total drift at most twice the
/// combined stderr plus 10% of the first value. Log growth: strictly
/// increasing with a drift beyond twice the combined stderr. Otherwise
/// inconclusive.
pub fn classify_gaps(gaps: &[f64], stderr: &[f64]) -> FiniteSizeVerdict {
    let k = gaps.len();
    if k < 3 {
        return FiniteSizeVerdict::Inconclusive;
    }
    let g = &gaps[k - 3..];
    let s = &stderr[k - 3..];
    let se = (s[0] * s[0] + s[2] * s[2]).sqrt();
    let lo = g.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let drift = g[2] - g[0];
    if lo > 0.0 && hi <= 2.0 * lo && drift <= 2.0 * se + 0.1 * g[0] {
        return FiniteSizeVerdict::BoundedGap;
    }
    if g[0] < g[1] && g[1] < g[2] && drift > 2.0 * se {
        return FiniteSizeVerdict::LogGrowth;
    }
    FiniteSizeVerdict::Inconclusive
}

/// Finite-size study over a doubling ladder. Each replica is one sample
/// of the top length; rung `N` averages `log Z_N` over its disjoint
/// blocks of length `N`, so the scaled gap of a replica is
/// `½ mean(log Z_{2N} - log Z_N^{left} - log Z_N^{right}) >= 0`.
pub fn finite_size_study(ens: &Ensemble, ladder: &[usize]) -> Result<FiniteSizeReport> {
    ens.validate()?;
    check_ladder(ladder)?;
    if ladder.len() < 5 || ladder.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::InvalidParameter(format!(
            "finite-size ladder needs at least 4 doublings, got {ladder:?}"
        )));
    }
    let top = *ladder.last().unwrap();
    let kernel = ens.kernel_for(top)?;
    let per_replica: Vec<Vec<f64>> = par_replicas(ens.replicas, |r| {
        let d = ens.sample(top, r);
        ladder
            .iter()
            .map(|&n| {
                let blocks = top / n;
                let mut acc = 0.0;
                for b in 0..blocks {
                    let w = d.window(b * n, n);
                    acc += finite(
                        *forward_log_z(&w, &ens.params, &kernel)?.last().unwrap(),
                        "log Z",
                    )?;
                }
                Ok(acc / (blocks * n) as f64)
            })
            .collect()
    })?;
    let mut f_n = Vec::new();
    let mut f_stderr = Vec::new();
    for i in 0..ladder.len() {
        let col: Vec<f64> = per_replica.iter().map(|row| row[i]).collect();
        let (m, s) = mean_stderr(&col);
        f_n.push(m);
        f_stderr.push(s);
    }
    let mut scaled_gap = Vec::new();
    let mut gap_stderr = Vec::new();
    for i in 0..ladder.len() - 1 {
        let n = ladder[i] as f64;
        let col: Vec<f64> = per_replica
            .iter()
            .map(|row| n * (row[i + 1] - row[i]))
            .collect();
        let (m, s) = mean_stderr(&col);
        scaled_gap.push(m);
        gap_stderr.push(s);
    }
    let verdict = classify_gaps(&scaled_gap, &gap_stderr);
    Ok(FiniteSizeReport {
        n_ladder: ladder.to_vec(),
        f_n,
        f_stderr,
        scaled_gap,
        gap_stderr,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyBoundReport {
    pub n: usize,
    pub epsilon_grid: Vec<f64>,
    /// `ε²/2 + F̂(λ, h, λ̃, h̃ - ε)` on common replicas.
    pub bound_values: Vec<f64>,
    pub bound_stderr: Vec<f64>,
    pub best_bound: f64,
    pub best_epsilon: f64,
    pub f_hat: f64,
    pub f_stderr: f64,
    pub mu_hat: f64,
    /// `best_bound - mu_hat`.
    pub gap: f64,
}

pub fn entropy_bound(ens: &Ensemble, n: usize, epsilon_grid: &[f64]) -> Result<EntropyBoundReport> {
    ens.validate()?;
    if ens.omega_tilde_law != DisorderLaw::Gaussian {
        return Err(Error::UnsupportedLaw(format!(
            "entropy bound needs Gaussian ω̃, got {:?}",
            ens.omega_tilde_law
        )));
    }
    if !(ens.params.lambda_tilde > 0.0) {
        return Err(Error::InvalidParameter("entropy bound needs λ̃ > 0".into()));
    }
    if epsilon_grid.is_empty() || epsilon_grid.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidParameter(
            "epsilon grid must be non-empty and finite".into(),
        ));
    }
    let kernel = ens.kernel_for(n)?;
    let p = ens.params;
    // column 0 is the unshifted point, then one column per ε
    let rows: Vec<(f64, Vec<f64>)> = par_replicas(ens.replicas, |r| {
        let d = ens.sample(n, r);
        let base = finite(*forward_log_z(&d, &p, &kernel)?.last().unwrap(), "log Z")?;
        let shifted = epsilon_grid
            .iter()
            .map(|&e| {
                let q = p.with(Coupling::HTilde, p.h_tilde - e);
                finite(*forward_log_z(&d, &q, &kernel)?.last().unwrap(), "log Z")
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((base, shifted))
    })?;
    let nf = n as f64;
    let base: Vec<f64> = rows.iter().map(|r| r.0 / nf).collect();
    let (f_hat, f_stderr) = mean_stderr(&base);
    let mut bound_values = Vec::new();
    let mut bound_stderr = Vec::new();
    for (j, &e) in epsilon_grid.iter().enumerate() {
        let col: Vec<f64> = rows.iter().map(|r| r.1[j] / nf).collect();
        let (m, s) = mean_stderr(&col);
        bound_values.push(0.5 * e * e + m);
        bound_stderr.push(s);
    }
    let best = (0..epsilon_grid.len())
        .min_by(|&a, &b| bound_values[a].total_cmp(&bound_values[b]))
        .unwrap();
    let two_lambda = 2.0 * p.lambda;
    let w_n: Vec<f64> = (0..ens.replicas as u64)
        .map(|r| ens.sample(n, r).w(n))
        .collect();
    let a: Vec<f64> = rows
        .iter()
        .zip(&w_n)
        .map(|(row, &w)| softplus(-two_lambda * w) - row.0)
        .collect();
    let mu_hat = annealed_rate(&a, n).0;
    Ok(EntropyBoundReport {
        n,
        epsilon_grid: epsilon_grid.to_vec(),
        bound_values: bound_values.clone(),
        bound_stderr,
        best_bound: bound_values[best],
        best_epsilon: epsilon_grid[best],
        f_hat,
        f_stderr,
        mu_hat,
        gap: bound_values[best] - mu_hat,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint {
    pub axis1: f64,
    pub axis2: f64,
    pub f_hat: f64,
    pub stderr: f64,
    pub localized: bool,
}

/// Absolute floor of the localization test.
pub const LOCALIZATION_FLOOR: f64 = 1e-3;

pub fn is_localized(f_hat: f64, stderr: f64) -> bool {
    f_hat > (3.0 * stderr).max(LOCALIZATION_FLOOR)
}

/// `F̂` on the grid `values1 × values2` (row-major, `axis1` outer).
pub fn phase_scan(
    ens: &Ensemble,
    axis1: Coupling,
    values1: &[f64],
    axis2: Coupling,
    values2: &[f64],
    n: usize,
) -> Result<Vec<PhasePoint>> {
    if values1.is_empty() || values2.is_empty() {
        return Err(Error::InvalidParameter(
            "phase grid must be non-empty".into(),
        ));
    }
    if axis1 == axis2 {
        return Err(Error::InvalidParameter(
            "phase scan axes must differ".into(),
        ));
    }
    let mut points = Vec::new();
    for &a in values1 {
        for &b in values2 {
            let p: ModelParams = ens.params.with(axis1, a).with(axis2, b);
            p.validate()?;
            points.push((a, b, ens.with_params(p)));
        }
    }
    points
        .iter()
        .map(|(a, b, e)| {
            let est = estimate_free_energy(e, &[n])?[0];
            Ok(PhasePoint {
                axis1: *a,
                axis2: *b,
                f_hat: est.f_hat,
                stderr: est.stderr,
                localized: is_localized(est.f_hat, est.stderr),
            })
        })
        .collect()
}
