//! Exact log-domain partition functions via the renewal decomposition.
//!
//! A configuration is a return set `τ ⊂ {1..N}` with `N ∈ τ` plus one sign per
//! excursion. Summing the signs out leaves, for each excursion `(u, t]`, the
//! weight `K(t-u) · ½(1 + e^{-2λ(W_t - W_u)})` and a pinning factor
//! `ζ(ω̃_t) = e^{λ̃(ω̃_t + h̃)}` at its right end. The origin carries no `ζ`.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::disorder::DisorderSample;
use crate::error::{Error, Result};
use crate::kernel::ReturnKernel;
use crate::logspace::{log_add_exp, log_half_one_plus_exp_neg, log_sum_exp, LogReal};

/// Coupling vector `(λ, h, λ̃, h̃)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub h: f64,
    pub lambda_tilde: f64,
    pub h_tilde: f64,
}

impl ModelParams {
    pub fn new(lambda: f64, h: f64, lambda_tilde: f64, h_tilde: f64) -> Self {
        ModelParams {
            lambda,
            h,
            lambda_tilde,
            h_tilde,
        }
    }

    pub const FREE: ModelParams = ModelParams {
        lambda: 0.0,
        h: 0.0,
        lambda_tilde: 0.0,
        h_tilde: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda, self.h, self.lambda_tilde, self.h_tilde];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("couplings must be finite".into()));
        }
        if self.lambda < 0.0 || self.h < 0.0 || self.lambda_tilde < 0.0 {
            return Err(Error::InvalidParameter(
                "lambda, h and lambda_tilde must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Named coordinate access, used by scans and finite differences.
    pub fn get(&self, axis: Coupling) -> f64 {
        match axis {
            Coupling::Lambda => self.lambda,
            Coupling::H => self.h,
            Coupling::LambdaTilde => self.lambda_tilde,
            Coupling::HTilde => self.h_tilde,
        }
    }

    pub fn with(&self, axis: Coupling, value: f64) -> ModelParams {
        let mut p = *self;
        match axis {
            Coupling::Lambda => p.lambda = value,
            Coupling::H => p.h = value,
            Coupling::LambdaTilde => p.lambda_tilde = value,
            Coupling::HTilde => p.h_tilde = value,
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    Lambda,
    H,
    LambdaTilde,
    HTilde,
}

impl Coupling {
    pub const ALL: [Coupling; 4] = [
        Coupling::Lambda,
        Coupling::H,
        Coupling::LambdaTilde,
        Coupling::HTilde,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Coupling::Lambda => "lambda",
            Coupling::H => "h",
            Coupling::LambdaTilde => "lambda_tilde",
            Coupling::HTilde => "h_tilde",
        }
    }

    pub fn parse(s: &str) -> Option<Coupling> {
        Coupling::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// `log ζ(x) = λ̃ (x + h̃)`.
#[inline]
pub fn zeta(x: f64, p: &ModelParams) -> LogReal {
    LogReal(p.lambda_tilde * (x + p.h_tilde))
}

/// Log weight of the excursion `(u, t]` with its sign averaged out,
/// excluding the pinning factor at `t`.
pub fn excursion_log_weight(
    u: usize,
    t: usize,
    d: &DisorderSample,
    p: &ModelParams,
    k: &ReturnKernel,
) -> Result<LogReal> {
    assert!(u < t && t <= d.len(), "need 0 <= u < t <= n");
    if t - u > k.n_max() {
        return Err(Error::KernelHorizon {
            length: t - u,
            n_max: k.n_max(),
        });
    }
    Ok(LogReal(excursion_log_weight_unchecked(u, t, d, p, k)))
}

#[inline]
pub(crate) fn excursion_log_weight_unchecked(
    u: usize,
    t: usize,
    d: &DisorderSample,
    p: &ModelParams,
    k: &ReturnKernel,
) -> f64 {
    k.log_k(t - u) + log_half_one_plus_exp_neg(2.0 * p.lambda * (d.w(t) - d.w(u)))
}

/// `log Z̃ = log Z + λ W_n`, the partition function without the
/// `e^{-λ Σ(ω+h)}` normalization.
pub fn normalized_to_tilde(log_z: LogReal, d: &DisorderSample, p: &ModelParams) -> LogReal {
    LogReal(log_z.0 + p.lambda * d.w(d.len()))
}

/// Knobs for the O(N²) recursion.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DpOptions {
    /// Skip blocks of terms more than this many log-units below the largest
    /// one. `None` keeps the sum exact.
    pub cutoff: Option<f64>,
}

impl DpOptions {
    /// Length above which callers may choose to enable the cutoff.
    pub const CUTOFF_THRESHOLD: usize = 1 << 14;

    pub fn with_cutoff(units: f64) -> Self {
        DpOptions {
            cutoff: Some(units),
        }
    }
}

/// Forward and backward log partition arrays for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTables {
    n: usize,
    /// `log_zf[t] = log Z_{t,ω}`, pinned at `t`, `ζ(ω̃_t)` included.
    pub log_zf: Vec<f64>,
    /// `log_zb[t] = log Z_{n-t, θ^t ω}`, `ζ(ω̃_t)` excluded.
    pub log_zb: Vec<f64>,
}

impl PartitionTables {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn log_z(&self) -> LogReal {
        LogReal(self.log_zf[self.n])
    }
}

/// Log table of a recursion restarted at `start` on shifted disorder.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentTable {
    pub start: usize,
    /// `log_z[t - start] = log Z_{t-start, θ^start ω}`; entry 0 is 0.
    pub log_z: Vec<f64>,
}

impl SegmentTable {
    pub fn end(&self) -> usize {
        self.start + self.log_z.len() - 1
    }

    #[inline]
    pub fn get(&self, t: usize) -> f64 {
        self.log_z[t - self.start]
    }
}

fn check_sample(d: &DisorderSample, p: &ModelParams, k: &ReturnKernel, len: usize) -> Result<()> {
    if d.h() != p.h {
        return Err(Error::InvalidParameter(format!(
            "disorder prefix sums built with h = {} but params have h = {}",
            d.h(),
            p.h
        )));
    }
    if len > k.n_max() {
        return Err(Error::KernelHorizon {
            length: len,
            n_max: k.n_max(),
        });
    }
    Ok(())
}

pub fn forward_tables(
    d: &DisorderSample,
    p: &ModelParams,
    k: &ReturnKernel,
) -> Result<PartitionTables> {
    forward_tables_with(d, p, k, DpOptions::default())
}

pub fn forward_tables_with(
    d: &DisorderSample,
    p: &ModelParams,
    k: &ReturnKernel,
    opts: DpOptions,
) -> Result<PartitionTables> {
    let n = d.len();
    check_sample(d, p, k, n)?;
    let log_zf = forward_only(d, p, k, 0, n, opts);
    let log_zb = backward_only(d, p, k, opts);
    Ok(PartitionTables { n, log_zf, log_zb })
}

/// `log_zf` alone, which is all that path sampling and free-energy
/// estimation need.
pub fn forward_log_z(d: &DisorderSample, p: &ModelParams, k: &ReturnKernel) -> Result<Vec<f64>> {
    check_sample(d, p, k, d.len())?;
    Ok(forward_only(d, p, k, 0, d.len(), DpOptions::default()))
}

/// `log Z_seg(j, t)` for all `t ∈ (j, n]`.
pub fn segment_tables(
    j: usize,
    d: &DisorderSample,
    p: &ModelParams,
    k: &ReturnKernel,
) -> Result<SegmentTable> {
    segment_until(j, d.len(), d, p, k)
}

/// Segment table from `j` up to `end` only.
pub fn segment_until(
    j: usize,
    end: usize,
    d: &DisorderSample,
    p: &ModelParams,
    k: &ReturnKernel,
) -> Result<SegmentTable> {
    if j > end || end > d.len() {
        return Err(Error::InvalidParameter(format!(
            "segment needs 0 <= j <= end <= n, got j = {j}, end = {end}"
        )));
    }
    check_sample(d, p, k, end - j)?;
    Ok(SegmentTable {
        start: j,
        log_z: forward_only(d, p, k, j, end, DpOptions::default()),
    })
}

fn forward_only(
    d: &DisorderSample,
    p: &ModelParams,
    k: &ReturnKernel,
    start: usize,
    end: usize,
    opts: DpOptions,
) -> Vec<f64> {
    let len = end - start;
    let src = vec![0.0; len + 1];
    let mut dst = Vec::with_capacity(len + 1);
    dst.push(0.0);
    dst.extend((start + 1..=end).map(|t| zeta(d.omega_tilde(t), p).0));
    let w0 = d.w(start);
    let w: Vec<f64> = (start..=end).map(|t| d.w(t) - w0).collect();
    let input = RenewalInput {
        log_k: k.log_table(),
        k_lin: k.linear_table(),
        src_bias: &src,
        dst_bias: &dst,
        w: &w,
        two_lambda: 2.0 * p.lambda,
    };
    convolve_blocked(&input, opts)
}

fn backward_only(
    d: &DisorderSample,
    p: &ModelParams,
    k: &ReturnKernel,
    opts: DpOptions,
) -> Vec<f64> {
    let n = d.len();
    // reversed coordinate q = n - t
    let dst = vec![0.0; n + 1];
    let src: Vec<f64> = (0..=n)
        .map(|q| {
            let t = n - q;
            if t == 0 {
                0.0
            } else {
                zeta(d.omega_tilde(t), p).0
            }
        })
        .collect();
    let wn = d.w(n);
    let w: Vec<f64> = (0..=n).map(|q| wn - d.w(n - q)).collect();
    let input = RenewalInput {
        log_k: k.log_table(),
        k_lin: k.linear_table(),
        src_bias: &src,
        dst_bias: &dst,
        w: &w,
        two_lambda: 2.0 * p.lambda,
    };
    let mut rev = convolve_blocked(&input, opts);
    rev.reverse();
    rev
}

/// Inputs of the generic renewal recursion
/// `z[0] = 0`,
/// `z[i] = dst[i] + log Σ_{j<i} e^{z[j] + src[j]} K(i-j) ½(1 + e^{-2λ(w[i]-w[j])})`.
pub(crate) struct RenewalInput<'a> {
    pub log_k: &'a [f64],
    pub k_lin: &'a [f64],
    pub src_bias: &'a [f64],
    pub dst_bias: &'a [f64],
    pub w: &'a [f64],
    pub two_lambda: f64,
}

/// Term-by-term evaluation of the recursion, one `exp` per term.
#[cfg(test)]
pub(crate) fn convolve_direct(inp: &RenewalInput<'_>) -> Vec<f64> {
    let len = inp.w.len() - 1;
    let mut z = vec![0.0; len + 1];
    let mut terms = Vec::with_capacity(len);
    for i in 1..=len {
        terms.clear();
        for j in 0..i {
            terms.push(
                z[j] + inp.src_bias[j]
                    + inp.log_k[i - j]
                    + log_half_one_plus_exp_neg(inp.two_lambda * (inp.w[i] - inp.w[j])),
            );
        }
        z[i] = inp.dst_bias[i] + log_sum_exp(&terms);
    }
    z
}

const BLOCK: usize = 64;

/// Factored evaluation of the recursion.
///
/// The sign average splits each inner sum into
/// `A_i = Σ_j K(i-j) e^{v_j}` and `B_i = Σ_j K(i-j) e^{v_j + 2λ w_j}`, with
/// `z_i = dst_i - log 2 + log(A_i + e^{-2λ w_i} B_i)`. Completed blocks of
/// `BLOCK` sources are stored as `scale + log(linear values)` so each block
/// contributes one dot product and one `exp`, and no term is ever dropped.
pub(crate) fn convolve_blocked(inp: &RenewalInput<'_>, opts: DpOptions) -> Vec<f64> {
    let len = inp.w.len() - 1;
    let signed = inp.two_lambda != 0.0;
    let mut z = vec![0.0; len + 1];
    let mut va = vec![0.0; len + 1];
    let mut vb = vec![0.0; if signed { len + 1 } else { 0 }];
    let mut lin_a = vec![0.0; len + 1];
    let mut lin_b = vec![0.0; if signed { len + 1 } else { 0 }];
    let n_blocks = len / BLOCK + 1;
    let mut scale_a = Vec::with_capacity(n_blocks);
    let mut scale_b = Vec::with_capacity(n_blocks);
    let mut terms = Vec::with_capacity(n_blocks + BLOCK);

    va[0] = inp.src_bias[0];
    if signed {
        vb[0] = va[0] + inp.two_lambda * inp.w[0];
    }

    for i in 1..=len {
        if i % BLOCK == 0 {
            let b = i / BLOCK - 1;
            let range = b * BLOCK..(b + 1) * BLOCK;
            scale_a.push(finalize_block(
                &va[range.clone()],
                &mut lin_a[range.clone()],
            ));
            if signed {
                scale_b.push(finalize_block(&vb[range.clone()], &mut lin_b[range]));
            }
        }
        let full = i / BLOCK;
        let log_a = block_sum(i, full, &va, &lin_a, &scale_a, inp, opts, &mut terms);
        z[i] = if signed {
            let log_b = block_sum(i, full, &vb, &lin_b, &scale_b, inp, opts, &mut terms);
            inp.dst_bias[i] - LN_2 + log_add_exp(log_a, log_b - inp.two_lambda * inp.w[i])
        } else {
            inp.dst_bias[i] + log_a
        };
        va[i] = z[i] + inp.src_bias[i];
        if signed {
            vb[i] = va[i] + inp.two_lambda * inp.w[i];
        }
    }
    z
}

fn finalize_block(v: &[f64], lin: &mut [f64]) -> f64 {
    let scale = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for (l, &x) in lin.iter_mut().zip(v) {
        *l = (x - scale).exp();
    }
    scale
}

/// `log Σ_{j<i} K(i-j) e^{v_j}` with the first `full` blocks in scaled form.
#[allow(clippy::too_many_arguments)]
#[inline]
fn block_sum(
    i: usize,
    full: usize,
    v: &[f64],
    lin: &[f64],
    scale: &[f64],
    inp: &RenewalInput<'_>,
    opts: DpOptions,
    terms: &mut Vec<f64>,
) -> f64 {
    terms.clear();
    let mut skip_below = f64::NEG_INFINITY;
    if let Some(cut) = opts.cutoff {
        // K is non-increasing, so the nearest source bounds each block.
        let mut best = f64::NEG_INFINITY;
        for (b, &s) in scale.iter().enumerate().take(full) {
            best = best.max(s + inp.log_k[i - (b * BLOCK + BLOCK - 1)]);
        }
        for &x in &v[full * BLOCK..i] {
            best = best.max(x);
        }
        skip_below = best - cut;
    }
    for (b, &s) in scale.iter().enumerate().take(full) {
        let lo = b * BLOCK;
        if s + inp.log_k[i - (lo + BLOCK - 1)] < skip_below {
            continue;
        }
        let dot = block_dot(
            &lin[lo..lo + BLOCK],
            &inp.k_lin[i - lo - BLOCK + 1..=i - lo],
        );
        if dot > 1e-280 {
            terms.push(s + dot.ln());
        } else {
            terms.extend((lo..lo + BLOCK).map(|j| v[j] + inp.log_k[i - j]));
        }
    }
    for j in full * BLOCK..i {
        terms.push(v[j] + inp.log_k[i - j]);
    }
    log_sum_exp(terms)
}

/// `Σ_j lin[j] · k_rev[BLOCK-1-j]`, i.e. the kernel read backwards.
#[inline]
fn block_dot(lin: &[f64], k_fwd: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    for (l4, k4) in lin.chunks_exact(4).zip(k_fwd.rchunks_exact(4)) {
        acc[0] += l4[0] * k4[3];
        acc[1] += l4[1] * k4[2];
        acc[2] += l4[2] * k4[1];
        acc[3] += l4[3] * k4[0];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{freeze_zero_disorder, sample_disorder, DisorderLaw};
    use crate::kernel::{build_powerlaw_kernel, build_srw_kernel, log_central_binomial_4n};

    fn direct_forward(d: &DisorderSample, p: &ModelParams, k: &ReturnKernel) -> Vec<f64> {
        let n = d.len();
        let src = vec![0.0; n + 1];
        let mut dst = vec![0.0];
        dst.extend((1..=n).map(|t| zeta(d.omega_tilde(t), p).0));
        convolve_direct(&RenewalInput {
            log_k: k.log_table(),
            k_lin: k.linear_table(),
            src_bias: &src,
            dst_bias: &dst,
            w: d.w_prefix(),
            two_lambda: 2.0 * p.lambda,
        })
    }

    #[test]
    fn zeta_examples() {
        let p = ModelParams::new(0.0, 0.0, 0.0, 3.0);
        assert_eq!(zeta(1.7, &p).0, 0.0);
        let p = ModelParams::new(0.0, 0.0, 1.0, 0.5);
        assert_eq!(zeta(-0.5, &p).0, 0.0);
        let p = ModelParams::new(0.0, 0.0, 2.0, 1.0);
        assert_eq!(zeta(1.0, &p).0, 4.0);
    }

    #[test]
    fn excursion_weight_examples() {
        let k = build_srw_kernel(8).unwrap();
        let d = DisorderSample::from_values(vec![0.7, -0.2, 1.0], vec![0.0; 3], 0.0);
        let p0 = ModelParams::new(0.0, 0.0, 0.3, 0.1);
        for (u, t) in [(0, 1), (0, 3), (1, 3)] {
            let w = excursion_log_weight(u, t, &d, &p0, &k).unwrap();
            assert!((w.0 - k.log_k(t - u)).abs() < 1e-15);
        }
        // W_t - W_u = 0
        let d = DisorderSample::from_values(vec![0.5, -0.5], vec![0.0; 2], 0.0);
        let p = ModelParams::new(1.7, 0.0, 0.0, 0.0);
        let w = excursion_log_weight(0, 2, &d, &p, &k).unwrap();
        assert!((w.0 - k.log_k(2)).abs() < 1e-15);
        // t-u = 1, λ = 1, ω_t + h = 1
        let d = DisorderSample::from_values(vec![1.0], vec![0.0], 0.0);
        let p = ModelParams::new(1.0, 0.0, 0.0, 0.0);
        let w = excursion_log_weight(0, 1, &d, &p, &k).unwrap();
        let expect = 0.5f64.ln() + (0.5 * (1.0 + (-2.0f64).exp())).ln();
        assert!((w.0 - expect).abs() < 1e-14);
        assert!((w.0 + 1.259366).abs() < 1e-6);
    }

    #[test]
    fn excursion_weight_rejects_long_gap() {
        let k = build_srw_kernel(2).unwrap();
        let d = freeze_zero_disorder(5, 0.0);
        let err = excursion_log_weight(0, 4, &d, &ModelParams::FREE, &k).unwrap_err();
        assert!(matches!(
            err,
            Error::KernelHorizon {
                length: 4,
                n_max: 2
            }
        ));
    }

    #[test]
    fn free_case_two_sites() {
        let k = build_srw_kernel(4).unwrap();
        let d = freeze_zero_disorder(2, 0.0);
        let t = forward_tables(&d, &ModelParams::FREE, &k).unwrap();
        assert!((t.log_z().exp() - 0.375).abs() < 1e-15);
    }

    #[test]
    fn free_case_is_renewal_mass() {
        let k = build_srw_kernel(600).unwrap();
        let d = freeze_zero_disorder(600, 0.0);
        let t = forward_tables(&d, &ModelParams::FREE, &k).unwrap();
        for n in [1, 2, 10, 63, 64, 65, 200, 600] {
            assert!(
                (t.log_zf[n] - log_central_binomial_4n(n)).abs() < 1e-11,
                "n = {n}: {} vs {}",
                t.log_zf[n],
                log_central_binomial_4n(n)
            );
        }
    }

    #[test]
    fn homogeneous_recursion_identity() {
        let k = build_powerlaw_kernel(1.8, 300).unwrap();
        let p = ModelParams::new(0.0, 0.0, 0.7, 0.9);
        let d = freeze_zero_disorder(300, 0.0);
        let t = forward_tables(&d, &p, &k).unwrap();
        let mut z = vec![1.0f64];
        let boost = (0.7f64 * 0.9).exp();
        for n in 1..=300 {
            let s: f64 = (1..=n).map(|j| k.k(j) * z[n - j]).sum();
            z.push(boost * s);
        }
        for n in 1..=300 {
            assert!((t.log_zf[n] - z[n].ln()).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn blocked_matches_direct_and_backward_matches_forward() {
        let k = build_srw_kernel(400).unwrap();
        for (seed, p) in [
            (1u64, ModelParams::new(0.0, 0.0, 1.0, 0.5)),
            (2, ModelParams::new(0.8, 0.3, 1.2, -0.4)),
            (3, ModelParams::new(2.0, 1.5, 0.0, 0.0)),
            (4, ModelParams::new(0.05, 0.0, 2.0, 2.0)),
        ] {
            let d = sample_disorder(
                DisorderLaw::Gaussian,
                DisorderLaw::Gaussian,
                333,
                p.h,
                seed,
                0,
            );
            let t = forward_tables(&d, &p, &k).unwrap();
            let direct = direct_forward(&d, &p, &k);
            for n in 0..=333 {
                let tol = 1e-12 * (1.0 + direct[n].abs());
                assert!((t.log_zf[n] - direct[n]).abs() < tol, "seed {seed}, n {n}");
            }
            let (f, b) = (t.log_zf[333], t.log_zb[0]);
            assert!((f - b).abs() < 1e-10 * (1.0 + f.abs()), "{f} vs {b}");
            assert!(t.log_zf.iter().chain(&t.log_zb).all(|x| x.is_finite()));
        }
    }

    #[test]
    fn cutoff_is_close_to_exact() {
        let k = build_srw_kernel(2000).unwrap();
        let p = ModelParams::new(0.3, 0.1, 1.0, 0.5);
        let d = sample_disorder(
            DisorderLaw::Gaussian,
            DisorderLaw::Gaussian,
            2000,
            p.h,
            8,
            0,
        );
        let exact = forward_tables(&d, &p, &k).unwrap();
        let cut = forward_tables_with(&d, &p, &k, DpOptions::with_cutoff(60.0)).unwrap();
        assert!((exact.log_zf[2000] - cut.log_zf[2000]).abs() < 1e-12 * exact.log_zf[2000].abs());
    }

    #[test]
    fn segment_from_origin_is_forward() {
        let k = build_srw_kernel(100).unwrap();
        let p = ModelParams::new(0.4, 0.2, 0.9, 0.1);
        let d = sample_disorder(
            DisorderLaw::Rademacher,
            DisorderLaw::UniformSym,
            100,
            p.h,
            5,
            0,
        );
        let t = forward_tables(&d, &p, &k).unwrap();
        let s = segment_tables(0, &d, &p, &k).unwrap();
        assert_eq!(s.log_z, t.log_zf);
        // restarting equals a fresh sample on the shifted window
        let s = segment_tables(37, &d, &p, &k).unwrap();
        let fresh = forward_tables(&d.window(37, 63), &p, &k).unwrap();
        for t in 37..=100 {
            assert!((s.get(t) - fresh.log_zf[t - 37]).abs() < 1e-12);
        }
        // backward table is the shifted forward value at the endpoint
        for j in [0, 10, 37, 99] {
            let s = segment_tables(j, &d, &p, &k).unwrap();
            assert!((s.get(100) - t.log_zb[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_couplings_segment() {
        let k = build_srw_kernel(4).unwrap();
        let d = freeze_zero_disorder(2, 0.0);
        let s = segment_tables(1, &d, &ModelParams::FREE, &k).unwrap();
        assert!((s.get(2).exp() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tilde_normalization() {
        let d = DisorderSample::from_values(vec![1.0, 1.5, 0.5], vec![0.0; 3], 0.0);
        let p = ModelParams::new(1.0, 0.0, 0.0, 0.0);
        assert_eq!(normalized_to_tilde(LogReal(-2.0), &d, &p).0, 1.0);
        let p0 = ModelParams::FREE;
        assert_eq!(normalized_to_tilde(LogReal(-2.0), &d, &p0).0, -2.0);
    }

    #[test]
    fn tilde_rate_approaches_lambda_h() {
        let n = 100_000;
        let p = ModelParams::new(0.5, 0.3, 0.0, 0.0);
        let d = sample_disorder(DisorderLaw::Gaussian, DisorderLaw::Gaussian, n, p.h, 3, 0);
        let diff = normalized_to_tilde(LogReal(0.0), &d, &p).0 / n as f64;
        let tol = 5.0 * p.lambda / (n as f64).sqrt();
        assert!((diff - p.lambda * p.h).abs() < tol, "{diff}");
    }

    #[test]
    fn mismatched_bias_is_rejected() {
        let k = build_srw_kernel(10).unwrap();
        let d = freeze_zero_disorder(5, 0.1);
        assert!(forward_tables(&d, &ModelParams::FREE, &k).is_err());
        let d = freeze_zero_disorder(20, 0.0);
        assert!(matches!(
            forward_tables(&d, &ModelParams::FREE, &k),
            Err(Error::KernelHorizon { .. })
        ));
    }

    #[test]
    fn single_excursion_lower_bound_holds() {
        let k = build_srw_kernel(500).unwrap();
        for seed in 0..20u64 {
            let p = ModelParams::new(0.1 * seed as f64, 0.05 * seed as f64, 0.3, -0.5);
            let d = sample_disorder(
                DisorderLaw::Gaussian,
                DisorderLaw::Rademacher,
                500,
                p.h,
                seed,
                0,
            );
            let t = forward_tables(&d, &p, &k).unwrap();
            for n in [1, 7, 100, 500] {
                let bound = zeta(d.omega_tilde(n), &p).0 + k.log_k(n) - LN_2
                    + crate::logspace::softplus(-2.0 * p.lambda * d.w(n));
                assert!(t.log_zf[n] >= bound - 1e-12);
            }
        }
    }
}
