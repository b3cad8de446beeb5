//! Inter-return law `K(n)` of the free process, tabulated in log domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// First-return law of the simple random walk (α = 3/2).
    Srw,
    /// `K(n) = n^{-α} / ζ_R(α)`.
    PowerLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Tail exponent; only read for [`KernelKind::PowerLaw`].
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub n_max: usize,
}

fn default_alpha() -> f64 {
    1.5
}

impl KernelSpec {
    pub fn srw(n_max: usize) -> Self {
        KernelSpec {
            kind: KernelKind::Srw,
            alpha: 1.5,
            n_max,
        }
    }

    pub fn power_law(alpha: f64, n_max: usize) -> Self {
        KernelSpec {
            kind: KernelKind::PowerLaw,
            alpha,
            n_max,
        }
    }

    /// Effective tail exponent of the kernel.
    pub fn tail_exponent(&self) -> f64 {
        match self.kind {
            KernelKind::Srw => 1.5,
            KernelKind::PowerLaw => self.alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_max == 0 {
            return Err(Error::InvalidParameter("kernel n_max must be >= 1".into()));
        }
        if self.kind == KernelKind::PowerLaw && !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "power-law kernel needs alpha > 1, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<ReturnKernel> {
        match self.kind {
            KernelKind::Srw => build_srw_kernel(self.n_max),
            KernelKind::PowerLaw => build_powerlaw_kernel(self.alpha, self.n_max),
        }
    }
}

/// Tabulated return-time law. Immutable once built.
#[derive(Debug, Clone)]
pub struct ReturnKernel {
    spec: KernelSpec,
    /// `log_k[n] = log K(n)`; index 0 holds `-inf`.
    log_k: Vec<f64>,
    /// `k[n] = K(n)`; index 0 holds 0.
    k: Vec<f64>,
    total_mass_defect: f64,
    log_norm: f64,
}

impl ReturnKernel {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn n_max(&self) -> usize {
        self.spec.n_max
    }

    /// `log K(n)` for `1 <= n <= n_max`.
    #[inline]
    pub fn log_k(&self, n: usize) -> f64 {
        self.log_k[n]
    }

    #[inline]
    pub fn k(&self, n: usize) -> f64 {
        self.k[n]
    }

    /// Log table indexed by gap length (entry 0 is `-inf`).
    pub fn log_table(&self) -> &[f64] {
        &self.log_k
    }

    /// Linear table indexed by gap length (entry 0 is 0).
    pub fn linear_table(&self) -> &[f64] {
        &self.k
    }

    /// `1 - Σ_{n <= n_max} K(n)`.
    pub fn total_mass_defect(&self) -> f64 {
        self.total_mass_defect
    }

    /// `log K(n)` from the closed form, valid for any `n >= 1` including
    /// gaps beyond the table horizon.
    pub fn log_k_closed_form(&self, n: usize) -> f64 {
        assert!(n >= 1);
        if n <= self.spec.n_max {
            return self.log_k[n];
        }
        match self.spec.kind {
            KernelKind::Srw => srw_log_k(n),
            KernelKind::PowerLaw => -self.spec.alpha * (n as f64).ln() - self.log_norm,
        }
    }
}

/// `log(C(2n, n) 4^{-n})`, the probability that the walk sits at 0 at time 2n.
pub fn log_central_binomial_4n(n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if n <= 40 {
        let mut u = 1.0f64;
        for j in 1..=n {
            u *= (2 * j - 1) as f64 / (2 * j) as f64;
        }
        return u.ln();
    }
    // Stirling series of lnΓ(2n+1) - 2 lnΓ(n+1) - 2n ln 2.
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series =
        inv * (-1.0 / 8.0 + inv2 * (1.0 / 192.0 + inv2 * (-1.0 / 640.0 + inv2 * (17.0 / 14336.0))));
    -0.5 * (std::f64::consts::PI * x).ln() + series
}

fn srw_log_k(n: usize) -> f64 {
    log_central_binomial_4n(n) - ((2 * n - 1) as f64).ln()
}

pub fn build_srw_kernel(n_max: usize) -> Result<ReturnKernel> {
    let spec = KernelSpec::srw(n_max);
    spec.validate()?;
    let mut log_k = Vec::with_capacity(n_max + 1);
    log_k.push(f64::NEG_INFINITY);
    log_k.extend((1..=n_max).map(srw_log_k));
    let k = log_k.iter().map(|l| l.exp()).collect();
    // Σ_{n<=M} K(n) = 1 - u_M for the walk.
    let total_mass_defect = log_central_binomial_4n(n_max).exp();
    Ok(ReturnKernel {
        spec,
        log_k,
        k,
        total_mass_defect,
        log_norm: 0.0,
    })
}

pub fn build_powerlaw_kernel(alpha: f64, n_max: usize) -> Result<ReturnKernel> {
    let spec = KernelSpec::power_law(alpha, n_max);
    spec.validate()?;
    let zeta = riemann_zeta(alpha);
    let log_norm = zeta.ln();
    let mut log_k = Vec::with_capacity(n_max + 1);
    log_k.push(f64::NEG_INFINITY);
    log_k.extend((1..=n_max).map(|n| -alpha * (n as f64).ln() - log_norm));
    let k = log_k.iter().map(|l| l.exp()).collect();
    let total_mass_defect = hurwitz_zeta(alpha, n_max + 1) / zeta;
    Ok(ReturnKernel {
        spec,
        log_k,
        k,
        total_mass_defect,
        log_norm,
    })
}

/// Bernoulli numbers B_2, B_4, ..., B_14.
const BERNOULLI_EVEN: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

/// `Σ_{n >= a} n^{-s}` for `s > 1`, `a >= 1`: direct summation up to a cut,
/// then an Euler–Maclaurin tail.
pub fn hurwitz_zeta(s: f64, a: usize) -> f64 {
    assert!(s > 1.0 && a >= 1);
    let cut = a.max(64 + 2 * s.ceil() as usize);
    let mut head = 0.0;
    // small terms first for accuracy
    for n in (a..cut).rev() {
        head += (n as f64).powf(-s);
    }
    let m = cut as f64;
    let mut tail = m.powf(1.0 - s) / (s - 1.0) + 0.5 * m.powf(-s);
    // rising factorial s (s+1) ... (s+2k-2) and (2k)!
    let mut rising = s;
    let mut fact = 2.0;
    let mut power = m.powf(-s - 1.0);
    for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b / fact * rising * power;
        tail += term;
        let j = 2 * k as u32 + 1;
        rising *= (s + j as f64) * (s + j as f64 + 1.0);
        fact *= ((2 * k + 3) * (2 * k + 4)) as f64;
        power /= m * m;
    }
    head + tail
}

pub fn riemann_zeta(s: f64) -> f64 {
    hurwitz_zeta(s, 1)
}
