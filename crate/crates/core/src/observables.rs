//! Exact per-sample polymer-measure quantities and exact path sampling.

use std::f64::consts::LN_2;

use crate::disorder::{CounterRng, DisorderSample};
use crate::error::{Error, Result};
use crate::kernel::ReturnKernel;
use crate::logspace::{log_half_one_plus_exp_neg, logistic};
use crate::partition::{
    excursion_log_weight_unchecked, forward_log_z, forward_tables, segment_until, zeta,
    ModelParams, PartitionTables,
};

/// Contact and negative-sign marginals, indexed by site.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactProfile {
    /// `p_contact[k] = P(S_k = 0)`; entry 0 is 1 (the origin).
    pub p_contact: Vec<f64>,
    /// `p_neg[n] = E[Δ_n]`, probability that site `n` lies in a negative
    /// excursion; entry 0 is unused and set to 0.
    pub p_neg: Vec<f64>,
}

impl ContactProfile {
    pub fn n(&self) -> usize {
        self.p_contact.len() - 1
    }

    /// `Σ_{n=1}^N E[δ_n]`.
    pub fn total_contacts(&self) -> f64 {
        self.p_contact[1..].iter().sum()
    }
}

/// Law of the length of the excursion containing a site.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcursionLaw {
    pub k: usize,
    /// `pmf[s] = P(Δ_N(k) = s)`; entry 0 is 0.
    pub pmf: Vec<f64>,
}

impl ExcursionLaw {
    pub fn total_mass(&self) -> f64 {
        self.pmf.iter().sum()
    }
}

/// Return set `τ` (ascending, ending at `N`) with one sign per excursion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSample {
    pub n: usize,
    pub returns: Vec<usize>,
    /// `signs[i]` belongs to the excursion ending at `returns[i]`.
    pub signs: Vec<i8>,
}

impl PathSample {
    pub fn contains_return(&self, t: usize) -> bool {
        self.returns.binary_search(&t).is_ok()
    }

    /// `(left end, right end, sign)` for each excursion.
    pub fn excursions(&self) -> impl Iterator<Item = (usize, usize, i8)> + '_ {
        let lefts = std::iter::once(0).chain(self.returns.iter().copied());
        lefts
            .zip(self.returns.iter().copied())
            .zip(self.signs.iter().copied())
            .map(|((u, t), s)| (u, t, s))
    }
}

/// Longest gap between consecutive elements of `{0} ∪ τ`.
pub fn max_excursion(path: &PathSample) -> usize {
    path.excursions().map(|(u, t, _)| t - u).max().unwrap_or(0)
}

/// One disorder sample with its partition tables.
#[derive(Debug, Clone)]
pub struct Polymer<'a> {
    pub disorder: &'a DisorderSample,
    pub params: ModelParams,
    pub kernel: &'a ReturnKernel,
    pub tables: PartitionTables,
}

impl<'a> Polymer<'a> {
    pub fn solve(d: &'a DisorderSample, p: &ModelParams, k: &'a ReturnKernel) -> Result<Self> {
        let tables = forward_tables(d, p, k)?;
        Ok(Polymer {
            disorder: d,
            params: *p,
            kernel: k,
            tables,
        })
    }

    pub fn n(&self) -> usize {
        self.tables.n()
    }

    pub fn log_z(&self) -> f64 {
        self.tables.log_zf[self.n()]
    }

    #[inline]
    fn log_zeta(&self, t: usize) -> f64 {
        zeta(self.disorder.omega_tilde(t), &self.params).0
    }

    /// `log P(excursion (u, t])`, signs summed.
    #[inline]
    fn log_excursion_probability(&self, u: usize, t: usize) -> f64 {
        let tb = &self.tables;
        tb.log_zf[u]
            + excursion_log_weight_unchecked(u, t, self.disorder, &self.params, self.kernel)
            + self.log_zeta(t)
            + tb.log_zb[t]
            - self.log_z()
    }

    /// Probability that `(u, t]` is an excursion of the path.
    pub fn excursion_probability(&self, u: usize, t: usize) -> f64 {
        assert!(u < t && t <= self.n());
        self.log_excursion_probability(u, t).exp()
    }

    pub fn contact_probability(&self, k: usize) -> f64 {
        let tb = &self.tables;
        (tb.log_zf[k] + tb.log_zb[k] - self.log_z()).exp()
    }

    pub fn contact_profile(&self) -> ContactProfile {
        let n = self.n();
        let p_contact = (0..=n).map(|k| self.contact_probability(k)).collect();
        let mut diff = vec![0.0; n + 2];
        let two_lambda = 2.0 * self.params.lambda;
        let d = self.disorder;
        let tb = &self.tables;
        let log_z = self.log_z();
        for t in 1..=n {
            let right = self.log_zeta(t) + tb.log_zb[t] - log_z;
            for u in 0..t {
                // P(excursion) times P(negative | excursion)
                let x = two_lambda * (d.w(t) - d.w(u));
                let q = (tb.log_zf[u] + self.kernel.log_k(t - u) - LN_2 - x + right).exp();
                diff[u + 1] += q;
                diff[t + 1] -= q;
            }
        }
        let mut p_neg = vec![0.0; n + 1];
        let mut acc = 0.0;
        for m in 1..=n {
            acc += diff[m];
            p_neg[m] = acc.clamp(0.0, 1.0);
        }
        ContactProfile { p_contact, p_neg }
    }

    /// `Σ_{u < m <= t} P(excursion (u, t])` for every site `m`; identically 1.
    pub fn excursion_cover(&self) -> Vec<f64> {
        let n = self.n();
        let mut diff = vec![0.0; n + 2];
        for t in 1..=n {
            for u in 0..t {
                let q = self.log_excursion_probability(u, t).exp();
                diff[u + 1] += q;
                diff[t + 1] -= q;
            }
        }
        let mut out = vec![0.0; n + 1];
        let mut acc = 0.0;
        for m in 1..=n {
            acc += diff[m];
            out[m] = acc;
        }
        out
    }

    /// `P(S_{n_1} = ... = S_{n_m} = 0)` for strictly increasing sites in `1..=N`.
    pub fn joint_contact_probability(&self, sites: &[usize]) -> Result<f64> {
        let n = self.n();
        if sites.is_empty() {
            return Ok(1.0);
        }
        if sites.windows(2).any(|w| w[0] >= w[1]) || sites[0] == 0 || *sites.last().unwrap() > n {
            return Err(Error::InvalidParameter(format!(
                "sites must be strictly increasing within 1..={n}: {sites:?}"
            )));
        }
        let tb = &self.tables;
        let mut log_p = tb.log_zf[sites[0]] + tb.log_zb[*sites.last().unwrap()] - self.log_z();
        for w in sites.windows(2) {
            let seg = segment_until(w[0], w[1], self.disorder, &self.params, self.kernel)?;
            log_p += seg.get(w[1]);
        }
        Ok(log_p.exp())
    }

    /// `E(Π_{p ∈ P} δ_p)` for an arbitrary multiset of sites (`δ² = δ`).
    pub fn contact_moment(&self, sites: &[usize]) -> Result<f64> {
        let mut s = sites.to_vec();
        s.sort_unstable();
        s.dedup();
        self.joint_contact_probability(&s)
    }

    /// `Σ_{n, m} E(δ_n; δ_m)` over all ordered pairs of sites in `1..=N`.
    pub fn contact_covariance_sum(&self) -> Result<f64> {
        let n = self.n();
        let p: Vec<f64> = (0..=n).map(|k| self.contact_probability(k)).collect();
        let tb = &self.tables;
        let mut total: f64 = (1..=n).map(|k| p[k] * (1.0 - p[k])).sum();
        for a in 1..n {
            let seg = segment_until(a, n, self.disorder, &self.params, self.kernel)?;
            let base = tb.log_zf[a] - self.log_z();
            for b in a + 1..=n {
                let joint = (base + seg.get(b) + tb.log_zb[b]).exp();
                total += 2.0 * (joint - p[a] * p[b]);
            }
        }
        Ok(total)
    }

    /// `(∂_λ, ∂_h, ∂_λ̃, ∂_h̃) log Z` from the contact and sign marginals.
    pub fn log_z_gradient(&self, profile: &ContactProfile) -> [f64; 4] {
        let d = self.disorder;
        let p = &self.params;
        let n = self.n();
        let mut d_lambda = 0.0;
        let mut neg_total = 0.0;
        let mut d_lambda_tilde = 0.0;
        for m in 1..=n {
            d_lambda += (d.omega(m) + p.h) * profile.p_neg[m];
            neg_total += profile.p_neg[m];
            d_lambda_tilde += (d.omega_tilde(m) + p.h_tilde) * profile.p_contact[m];
        }
        [
            -2.0 * d_lambda,
            -2.0 * p.lambda * neg_total,
            d_lambda_tilde,
            p.lambda_tilde * profile.total_contacts(),
        ]
    }

    /// `P(Δ_N(k) = s)` for all `s`, with `1 <= k <= N-1`.
    pub fn excursion_law(&self, k: usize) -> Result<ExcursionLaw> {
        let n = self.n();
        if k == 0 || k >= n {
            return Err(Error::InvalidParameter(format!(
                "excursion law needs 1 <= k <= N-1, got k = {k}, N = {n}"
            )));
        }
        let tb = &self.tables;
        let d = self.disorder;
        let two_lambda = 2.0 * self.params.lambda;
        let log_z = self.log_z();
        let mut pmf = vec![0.0; n + 1];
        for (s, slot) in pmf.iter_mut().enumerate().skip(1) {
            let lkk = self.kernel.log_k(s);
            let mut acc = 0.0;
            // left end k - l with 0 <= l <= k, right end k + r with r >= 1
            let l_max = (s - 1).min(k);
            for l in 0..=l_max {
                let r = s - l;
                if k + r > n {
                    continue;
                }
                let (u, t) = (k - l, k + r);
                let lw = tb.log_zf[u]
                    + lkk
                    + log_half_one_plus_exp_neg(two_lambda * (d.w(t) - d.w(u)))
                    + self.log_zeta(t)
                    + tb.log_zb[t]
                    - log_z;
                acc += lw.exp();
            }
            *slot = acc;
        }
        Ok(ExcursionLaw { k, pmf })
    }

    pub fn sampler(&self) -> PathSampler<'a> {
        PathSampler {
            disorder: self.disorder,
            params: self.params,
            kernel: self.kernel,
            log_zf: self.tables.log_zf.clone(),
        }
    }

    pub fn sample_path(&self, rng: &mut CounterRng) -> PathSample {
        sample_from_forward(
            &self.tables.log_zf,
            self.disorder,
            &self.params,
            self.kernel,
            rng,
        )
    }
}

/// Exact backward sampler; needs only the forward table.
#[derive(Debug, Clone)]
pub struct PathSampler<'a> {
    disorder: &'a DisorderSample,
    params: ModelParams,
    kernel: &'a ReturnKernel,
    log_zf: Vec<f64>,
}

impl<'a> PathSampler<'a> {
    pub fn new(d: &'a DisorderSample, p: &ModelParams, k: &'a ReturnKernel) -> Result<Self> {
        Ok(PathSampler {
            disorder: d,
            params: *p,
            kernel: k,
            log_zf: forward_log_z(d, p, k)?,
        })
    }

    pub fn log_z(&self) -> f64 {
        *self.log_zf.last().unwrap()
    }

    pub fn log_zf(&self) -> &[f64] {
        &self.log_zf
    }

    pub fn sample(&self, rng: &mut CounterRng) -> PathSample {
        sample_from_forward(&self.log_zf, self.disorder, &self.params, self.kernel, rng)
    }
}

/// Walks back from `N`: the previous return `u` of a return at `t` has
/// probability `Z_u · weight(u, t) / (Z_t / ζ(ω̃_t))`. The normalizer is
/// known exactly, so the scan stops as soon as the cumulative mass passes
/// the uniform draw.
fn sample_from_forward(
    log_zf: &[f64],
    d: &DisorderSample,
    p: &ModelParams,
    k: &ReturnKernel,
    rng: &mut CounterRng,
) -> PathSample {
    let n = log_zf.len() - 1;
    let two_lambda = 2.0 * p.lambda;
    let mut returns = Vec::new();
    let mut signs = Vec::new();
    let mut t = n;
    while t > 0 {
        let norm = log_zf[t] - zeta(d.omega_tilde(t), p).0;
        let target = rng.next_unit();
        let mut cum = 0.0;
        let mut chosen = 0;
        for u in (0..t).rev() {
            cum += (log_zf[u] + excursion_log_weight_unchecked(u, t, d, p, k) - norm).exp();
            if cum >= target {
                chosen = u;
                break;
            }
        }
        let x = two_lambda * (d.w(t) - d.w(chosen));
        let negative = rng.next_unit() < logistic(-x);
        returns.push(t);
        signs.push(if negative { -1 } else { 1 });
        t = chosen;
    }
    returns.reverse();
    signs.reverse();
    PathSample { n, returns, signs }
}

/// Truncated correlation `E(A_1; ...; A_k)` of observables that are
/// products of contact indicators, via the set-partition formula.
///
/// `moment` returns `E(Π δ)` over a multiset of sites.
pub fn ursell<F>(observables: &[&[usize]], mut moment: F) -> Result<f64>
where
    F: FnMut(&[usize]) -> Result<f64>,
{
    let k = observables.len();
    if !(1..=4).contains(&k) {
        return Err(Error::InvalidParameter(format!(
            "ursell order must be within 1..=4, got {k}"
        )));
    }
    let mut total = 0.0;
    for partition in set_partitions(k) {
        let blocks = partition.len();
        let mut factorial = 1.0;
        for j in 1..blocks {
            factorial *= j as f64;
        }
        let sign = if blocks % 2 == 1 { 1.0 } else { -1.0 };
        let mut prod = 1.0;
        for block in &partition {
            let sites: Vec<usize> = block
                .iter()
                .flat_map(|&i| observables[i].iter().copied())
                .collect();
            prod *= moment(&sites)?;
        }
        total += sign * factorial * prod;
    }
    Ok(total)
}

/// All set partitions of `{0, ..., k-1}` (restricted growth strings).
pub fn set_partitions(k: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, k: usize, current: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == k {
            out.push(current.clone());
            return;
        }
        for b in 0..current.len() {
            current[b].push(i);
            rec(i + 1, k, current, out);
            current[b].pop();
        }
        current.push(vec![i]);
        rec(i + 1, k, current, out);
        current.pop();
    }
    let mut out = Vec::new();
    rec(0, k, &mut Vec::new(), &mut out);
    out
}
