//! Brute-force and closed-form references for the DP engine.
//!
//! Path enumeration runs over all `2^{N-1}` return sets; disorder
//! enumeration over all `2^{2N}` binary configurations. Both are
//! deliberately naive.

use rayon::prelude::*;

mod inequalities;
pub use inequalities::{exact_inequality_suite, InequalityFamily, InequalityReport};

use crate::disorder::{DisorderLaw, DisorderSample};
use crate::error::{Error, Result};
use crate::kernel::ReturnKernel;
use crate::logspace::{log_sum_exp, logistic, LogReal};
use crate::observables::{ContactProfile, ExcursionLaw};
use crate::partition::{excursion_log_weight_unchecked, zeta, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationBudget {
    pub max_n_paths: usize,
    pub max_n_disorder: usize,
}

impl EnumerationBudget {
    pub const MAX_N_PATHS: usize = 20;
    pub const MAX_N_DISORDER: usize = 8;

    pub fn new(max_n_paths: usize, max_n_disorder: usize) -> Result<Self> {
        if max_n_paths > Self::MAX_N_PATHS {
            return Err(Error::BudgetExceeded {
                what: "max_n_paths",
                requested: max_n_paths,
                limit: Self::MAX_N_PATHS,
            });
        }
        if max_n_disorder > Self::MAX_N_DISORDER {
            return Err(Error::BudgetExceeded {
                what: "max_n_disorder",
                requested: max_n_disorder,
                limit: Self::MAX_N_DISORDER,
            });
        }
        Ok(EnumerationBudget {
            max_n_paths,
            max_n_disorder,
        })
    }

    fn check_paths(&self, n: usize) -> Result<()> {
        if n > self.max_n_paths.min(Self::MAX_N_PATHS) {
            return Err(Error::BudgetExceeded {
                what: "path enumeration length",
                requested: n,
                limit: self.max_n_paths,
            });
        }
        Ok(())
    }

    fn check_disorder(&self, n: usize) -> Result<()> {
        if n > self.max_n_disorder.min(Self::MAX_N_DISORDER) {
            return Err(Error::BudgetExceeded {
                what: "disorder enumeration length",
                requested: n,
                limit: self.max_n_disorder,
            });
        }
        Ok(())
    }
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget {
            max_n_paths: Self::MAX_N_PATHS,
            max_n_disorder: Self::MAX_N_DISORDER,
        }
    }
}

/// Return-set bitmask: bit `t-1` set iff `t ∈ τ`; bit `N-1` always set.
pub type ReturnMask = u32;

fn check_input(
    d: &DisorderSample,
    p: &ModelParams,
    k: &ReturnKernel,
    b: &EnumerationBudget,
) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Err(Error::InvalidParameter("enumeration needs N >= 1".into()));
    }
    b.check_paths(n)?;
    if n > k.n_max() {
        return Err(Error::KernelHorizon {
            length: n,
            n_max: k.n_max(),
        });
    }
    if d.h() != p.h {
        return Err(Error::InvalidParameter(format!(
            "disorder prefix sums built with h = {} but params have h = {}",
            d.h(),
            p.h
        )));
    }
    Ok(())
}

fn mask_for(n: usize, subset: u32) -> ReturnMask {
    subset | (1u32 << (n - 1))
}

fn returns_of(mask: ReturnMask) -> impl Iterator<Item = usize> {
    (0..32)
        .filter(move |b| mask & (1u32 << b) != 0)
        .map(|b| b + 1)
}

fn config_log_weight(
    mask: ReturnMask,
    d: &DisorderSample,
    p: &ModelParams,
    k: &ReturnKernel,
) -> f64 {
    let mut u = 0;
    let mut lw = 0.0;
    for t in returns_of(mask) {
        lw += excursion_log_weight_unchecked(u, t, d, p, k) + zeta(d.omega_tilde(t), p).0;
        u = t;
    }
    lw
}

fn enumerate_log_weights(d: &DisorderSample, p: &ModelParams, k: &ReturnKernel) -> Vec<f64> {
    let n = d.len();
    let count = 1u32 << (n - 1);
    (0..count)
        .into_par_iter()
        .map(|s| config_log_weight(mask_for(n, s), d, p, k))
        .collect()
}

/// `log Z_{N,ω}` by direct summation over every return set.
pub fn brute_force_partition(
    d: &DisorderSample,
    p: &ModelParams,
    k: &ReturnKernel,
    budget: &EnumerationBudget,
) -> Result<LogReal> {
    check_input(d, p, k, budget)?;
    Ok(LogReal(log_sum_exp(&enumerate_log_weights(d, p, k))))
}

/// The polymer measure on return sets, held configuration by configuration.
#[derive(Debug, Clone)]
pub struct EnumeratedMeasure {
    n: usize,
    log_z: f64,
    /// `prob[s]` is the probability of the return set `mask_for(n, s)`.
    prob: Vec<f64>,
    /// Per configuration, the conditional probability that site `m`
    /// (index `m-1`) sits in a negative excursion.
    neg: Vec<Vec<f64>>,
}

pub fn brute_force_marginals(
    d: &DisorderSample,
    p: &ModelParams,
    k: &ReturnKernel,
    budget: &EnumerationBudget,
) -> Result<EnumeratedMeasure> {
    check_input(d, p, k, budget)?;
    let n = d.len();
    let lw = enumerate_log_weights(d, p, k);
    let log_z = log_sum_exp(&lw);
    let prob = lw.iter().map(|&x| (x - log_z).exp()).collect();
    let two_lambda = 2.0 * p.lambda;
    let neg = (0..1u32 << (n - 1))
        .into_par_iter()
        .map(|s| {
            let mut out = vec![0.0; n];
            let mut u = 0;
            for t in returns_of(mask_for(n, s)) {
                let q = logistic(-two_lambda * (d.w(t) - d.w(u)));
                out[u..t].iter_mut().for_each(|x| *x = q);
                u = t;
            }
            out
        })
        .collect();
    Ok(EnumeratedMeasure {
        n,
        log_z,
        prob,
        neg,
    })
}

impl EnumeratedMeasure {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    /// Configurations as `(mask, probability)` pairs.
    pub fn configurations(&self) -> impl Iterator<Item = (ReturnMask, f64)> + '_ {
        let n = self.n;
        self.prob
            .iter()
            .enumerate()
            .map(move |(s, &q)| (mask_for(n, s as u32), q))
    }

    /// Probability of an event on the return set.
    pub fn probability<F: Fn(ReturnMask) -> bool>(&self, event: F) -> f64 {
        self.configurations()
            .filter(|&(m, _)| event(m))
            .map(|(_, q)| q)
            .sum()
    }

    pub fn contact_profile(&self) -> ContactProfile {
        let n = self.n;
        let mut p_contact = vec![0.0; n + 1];
        p_contact[0] = 1.0;
        let mut p_neg = vec![0.0; n + 1];
        for (s, (mask, q)) in self.configurations().enumerate() {
            for t in returns_of(mask) {
                p_contact[t] += q;
            }
            for m in 1..=n {
                p_neg[m] += q * self.neg[s][m - 1];
            }
        }
        ContactProfile { p_contact, p_neg }
    }

    pub fn joint_contact_probability(&self, sites: &[usize]) -> f64 {
        let want: u32 = sites.iter().map(|&t| 1u32 << (t - 1)).fold(0, |a, b| a | b);
        self.probability(|m| m & want == want)
    }

    pub fn excursion_law(&self, k: usize) -> ExcursionLaw {
        let n = self.n;
        let mut pmf = vec![0.0; n + 1];
        for (mask, q) in self.configurations() {
            let mut u = 0;
            for t in returns_of(mask) {
                if u <= k && k < t {
                    // a return at k opens the excursion that contains k
                    pmf[t - u] += q;
                }
                u = t;
            }
        }
        ExcursionLaw { k, pmf }
    }
}

/// Disorder functionals whose exact expectation the oracle computes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DisorderFunctional {
    LogZ,
    Z,
    InvZ,
    /// `e^{-2λ W_N} / Z`
    ExpNegOverZ,
    /// `(1 + e^{-2λ W_N}) / Z`
    MuNumerator,
    /// `P_{N,ω}(S_k = 0)`
    Contact(usize),
}

impl DisorderFunctional {
    fn eval(
        self,
        d: &DisorderSample,
        p: &ModelParams,
        k: &ReturnKernel,
        b: &EnumerationBudget,
    ) -> Result<f64> {
        let n = d.len();
        if let DisorderFunctional::Contact(site) = self {
            if site > n {
                return Err(Error::InvalidParameter(format!(
                    "contact site {site} > N = {n}"
                )));
            }
            if site == 0 {
                return Ok(1.0);
            }
            let m = brute_force_marginals(d, p, k, b)?;
            return Ok(m.joint_contact_probability(&[site]));
        }
        let log_z = brute_force_partition(d, p, k, b)?.0;
        let x = 2.0 * p.lambda * d.w(n);
        Ok(match self {
            DisorderFunctional::LogZ => log_z,
            DisorderFunctional::Z => log_z.exp(),
            DisorderFunctional::InvZ => (-log_z).exp(),
            DisorderFunctional::ExpNegOverZ => (-x - log_z).exp(),
            DisorderFunctional::MuNumerator => (-log_z).exp() + (-x - log_z).exp(),
            DisorderFunctional::Contact(_) => unreachable!(),
        })
    }
}

/// Rademacher configuration number `c` of length `n`: bit `m-1` of the
/// low half gives `ω_m`, of the high half `ω̃_m`.
pub fn rademacher_configuration(n: usize, c: u64, h: f64) -> DisorderSample {
    let bit = |b: usize| if c & (1u64 << b) != 0 { 1.0 } else { -1.0 };
    let omega = (0..n).map(bit).collect();
    let omega_tilde = (0..n).map(|m| bit(n + m)).collect();
    DisorderSample::from_values(omega, omega_tilde, h)
}

/// `E[g]` over all `4^n` equally likely Rademacher disorder configurations.
pub fn exact_disorder_expectation(
    g: DisorderFunctional,
    laws: (DisorderLaw, DisorderLaw),
    p: &ModelParams,
    k: &ReturnKernel,
    n: usize,
    budget: &EnumerationBudget,
) -> Result<f64> {
    for law in [laws.0, laws.1] {
        if law != DisorderLaw::Rademacher {
            return Err(Error::UnsupportedLaw(format!(
                "exact disorder enumeration needs Rademacher laws, got {law:?}"
            )));
        }
    }
    budget.check_disorder(n)?;
    budget.check_paths(n)?;
    if n == 0 {
        return Err(Error::InvalidParameter("enumeration needs N >= 1".into()));
    }
    let count = 1u64 << (2 * n);
    let values: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|c| g.eval(&rademacher_configuration(n, c, p.h), p, k, budget))
        .collect::<Result<_>>()?;
    Ok(values.iter().sum::<f64>() / count as f64)
}

/// `Σ_{n>=1} K(n) e^{-bn}` for `b > 0`, summed until the geometric tail
/// bound `K(M) e^{-bM} / (1 - e^{-b})` drops below `1e-18`.
fn laplace_kernel(k: &ReturnKernel, b: f64) -> f64 {
    const CAP: usize = 1 << 26;
    let mut sum = 0.0;
    let inv_tail = 1.0 / (-(-b).exp_m1());
    let mut n = 1;
    loop {
        let term = (k.log_k_closed_form(n) - b * n as f64).exp();
        sum += term;
        if term * inv_tail < 1e-18 || n >= CAP {
            if n >= CAP {
                sum += term * inv_tail;
            }
            return sum;
        }
        n += 1;
    }
}

/// Root `b* >= 0` of `Σ_n K(n) e^{-bn} = e^{-reward}`, the free energy of
/// homogeneous pinning with per-contact reward `reward`.
pub fn homogeneous_pinning_free_energy(k: &ReturnKernel, reward: f64) -> f64 {
    if reward <= 0.0 {
        return 0.0;
    }
    let target = -reward;
    let mut lo = 0.0;
    let mut hi = reward - k.log_k(1) + 1.0;
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if laplace_kernel(k, mid).ln() > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::freeze_zero_disorder;
    use crate::kernel::{build_powerlaw_kernel, build_srw_kernel};
    use crate::logspace::log_half_one_plus_exp_neg;

    #[test]
    fn budget_caps() {
        assert!(EnumerationBudget::new(21, 8).is_err());
        assert!(EnumerationBudget::new(20, 9).is_err());
        let b = EnumerationBudget::new(10, 4).unwrap();
        let k = build_srw_kernel(16).unwrap();
        let d = freeze_zero_disorder(11, 0.0);
        assert!(matches!(
            brute_force_partition(&d, &ModelParams::FREE, &k, &b),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn hand_sums() {
        let k = build_srw_kernel(8).unwrap();
        let b = EnumerationBudget::default();
        let d = freeze_zero_disorder(2, 0.0);
        let z = brute_force_partition(&d, &ModelParams::FREE, &k, &b).unwrap();
        assert!((z.0 - 0.375f64.ln()).abs() < 1e-15);
        let m = brute_force_marginals(&d, &ModelParams::FREE, &k, &b).unwrap();
        let prof = m.contact_profile();
        assert!((prof.p_contact[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((prof.p_contact[2] - 1.0).abs() < 1e-15);

        let p = ModelParams::new(0.7, 0.3, 1.2, -0.4);
        let d = DisorderSample::from_values(vec![-1.0], vec![0.5], p.h);
        let z = brute_force_partition(&d, &p, &k, &b).unwrap();
        let expect =
            k.log_k(1) + log_half_one_plus_exp_neg(2.0 * 0.7 * (-1.0 + 0.3)) + 1.2 * (0.5 - 0.4);
        assert!((z.0 - expect).abs() < 1e-14);
    }

    #[test]
    fn deterministic_disorder_expectations() {
        let k = build_srw_kernel(8).unwrap();
        let b = EnumerationBudget::default();
        let p = ModelParams::new(0.0, 0.3, 0.0, 0.2);
        let n = 5;
        let inv = exact_disorder_expectation(
            DisorderFunctional::InvZ,
            (DisorderLaw::Rademacher, DisorderLaw::Rademacher),
            &p,
            &k,
            n,
            &b,
        )
        .unwrap();
        let u5 = crate::kernel::log_central_binomial_4n(5).exp();
        assert!((inv - 1.0 / u5).abs() < 1e-12 / u5);
        let err = exact_disorder_expectation(
            DisorderFunctional::LogZ,
            (DisorderLaw::Gaussian, DisorderLaw::Rademacher),
            &p,
            &k,
            n,
            &b,
        );
        assert!(matches!(err, Err(Error::UnsupportedLaw(_))));
        let err = exact_disorder_expectation(
            DisorderFunctional::LogZ,
            (DisorderLaw::Rademacher, DisorderLaw::Rademacher),
            &p,
            &k,
            9,
            &b,
        );
        assert!(matches!(err, Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn annealed_jensen() {
        let k = build_srw_kernel(8).unwrap();
        let b = EnumerationBudget::default();
        let p = ModelParams::new(0.4, 0.1, 0.6, 0.2);
        let laws = (DisorderLaw::Rademacher, DisorderLaw::Rademacher);
        let el = exact_disorder_expectation(DisorderFunctional::LogZ, laws, &p, &k, 4, &b).unwrap();
        let ez = exact_disorder_expectation(DisorderFunctional::Z, laws, &p, &k, 4, &b).unwrap();
        assert!(el <= ez.ln() + 1e-12);
    }

    #[test]
    fn excursion_law_sums_to_one() {
        let k = build_srw_kernel(16).unwrap();
        let p = ModelParams::new(0.5, 0.2, 0.9, 0.1);
        let d = crate::disorder::sample_disorder(
            DisorderLaw::Gaussian,
            DisorderLaw::Rademacher,
            9,
            p.h,
            5,
            1,
        );
        let m = brute_force_marginals(&d, &p, &k, &EnumerationBudget::default()).unwrap();
        for site in 1..9 {
            assert!((m.excursion_law(site).total_mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn srw_closed_form_root() {
        let k = build_srw_kernel(64).unwrap();
        assert_eq!(homogeneous_pinning_free_energy(&k, 0.0), 0.0);
        assert_eq!(homogeneous_pinning_free_energy(&k, -1.0), 0.0);
        for reward in [0.2f64, 1.0, 3.0] {
            // Σ K(n) s^n = 1 - sqrt(1 - s) for the walk
            let closed = -(1.0 - (1.0 - (-reward).exp()).powi(2)).ln();
            let b = homogeneous_pinning_free_energy(&k, reward);
            assert!(
                (b - closed).abs() < 1e-11,
                "reward {reward}: {b} vs {closed}"
            );
        }
        let b = homogeneous_pinning_free_energy(&k, 20.0);
        assert!((b - 20.0 - k.log_k(1)).abs() < 1e-3);
    }

    #[test]
    fn root_is_increasing_and_convex() {
        for k in [
            build_srw_kernel(32).unwrap(),
            build_powerlaw_kernel(1.7, 32).unwrap(),
        ] {
            let grid: Vec<f64> = (1..=30).map(|i| 0.1 * i as f64).collect();
            let roots: Vec<f64> = grid
                .iter()
                .map(|&r| homogeneous_pinning_free_energy(&k, r))
                .collect();
            for w in roots.windows(2) {
                assert!(w[1] > w[0]);
            }
            for w in roots.windows(3) {
                assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-10);
            }
        }
    }
}
