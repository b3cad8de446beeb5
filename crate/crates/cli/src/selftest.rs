//! Oracle suites run by `selftest`.

use copolymer::disorder::{freeze_zero_disorder, sample_disorder, CounterRng, DisorderLaw};
use copolymer::kernel::{build_powerlaw_kernel, build_srw_kernel, ReturnKernel};
use copolymer::observables::Polymer;
use copolymer::oracle::{
    brute_force_marginals, brute_force_partition, exact_inequality_suite,
    homogeneous_pinning_free_energy, EnumerationBudget,
};
use copolymer::partition::{forward_log_z, ModelParams};
use rayon::prelude::*;

use crate::commands::Timer;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{fmt_bool, fmt_f, Table};

/// Stream tag for drawing random instances.
const INSTANCE_STREAM: u64 = 0x696e_7374;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub checks: u64,
    /// Largest error, or for the inequality suite the violation count.
    pub worst: f64,
    pub passed: bool,
}

/// One random instance for the partition oracle: length, couplings,
/// laws and kernel all drawn from `(seed, i)`.
pub struct Instance {
    pub n: usize,
    pub params: ModelParams,
    pub laws: (DisorderLaw, DisorderLaw),
    pub power_law: Option<f64>,
}

pub fn random_instance(seed: u64, i: u64, n_max: usize) -> Instance {
    let mut rng = CounterRng::new(seed, i, INSTANCE_STREAM);
    let n = 1 + (rng.next_u64() % n_max as u64) as usize;
    let mut u = || 2.0 * rng.next_unit();
    let params = ModelParams::new(u(), u(), u(), u());
    let all = DisorderLaw::ALL;
    let laws = (all[(i % 3) as usize], all[((i / 3) % 3) as usize]);
    let power_law = (i % 2 == 1).then(|| 1.2 + rng.next_unit());
    Instance {
        n,
        params,
        laws,
        power_law,
    }
}

fn kernel_for(inst: &Instance) -> copolymer::Result<ReturnKernel> {
    match inst.power_law {
        Some(a) => build_powerlaw_kernel(a, inst.n),
        None => build_srw_kernel(inst.n),
    }
}

/// `max |log Z(DP) - log Z(enumeration)|` over `count` random instances.
pub fn partition_oracle(seed: u64, count: usize) -> Result<CheckResult, CliError> {
    let budget = EnumerationBudget::default();
    let errs: Vec<f64> = (0..count as u64)
        .into_par_iter()
        .map(|i| -> copolymer::Result<f64> {
            let inst = random_instance(seed, i, 14);
            let k = kernel_for(&inst)?;
            let d = sample_disorder(inst.laws.0, inst.laws.1, inst.n, inst.params.h, seed, i);
            let dp = *forward_log_z(&d, &inst.params, &k)?.last().unwrap();
            let bf = brute_force_partition(&d, &inst.params, &k, &budget)?.0;
            Ok((dp - bf).abs())
        })
        .collect::<copolymer::Result<_>>()?;
    let worst = errs.iter().copied().fold(0.0, f64::max);
    Ok(CheckResult {
        name: "partition_oracle",
        checks: count as u64,
        worst,
        passed: worst <= 1e-9,
    })
}

/// Exact `C(2N, N) 4^{-N}`.
fn central_binomial_4n(n: usize) -> f64 {
    let mut c: u128 = 1;
    for i in 0..n as u128 {
        c = c * (2 * n as u128 - i) / (i + 1);
    }
    c as f64 / 4f64.powi(n as i32)
}

pub fn free_identities() -> Result<CheckResult, CliError> {
    let k = build_srw_kernel(12)?;
    let mut worst: f64 = 0.0;
    for n in 1..=12 {
        let zf = forward_log_z(&freeze_zero_disorder(n, 0.0), &ModelParams::FREE, &k)?;
        worst = worst.max((zf[n] - central_binomial_4n(n).ln()).abs());
        if n == 2 {
            worst = worst.max((zf[2] - 0.375f64.ln()).abs());
        }
    }
    Ok(CheckResult {
        name: "free_identities",
        checks: 13,
        worst,
        passed: worst <= 1e-12,
    })
}

/// Contact and sign profiles and excursion laws against enumeration.
pub fn marginal_oracle(seed: u64, count: usize) -> Result<CheckResult, CliError> {
    let budget = EnumerationBudget::default();
    let errs: Vec<f64> = (0..count as u64)
        .into_par_iter()
        .map(|i| -> copolymer::Result<f64> {
            let inst = random_instance(seed ^ 0x6d61_7267, i, 10);
            let k = kernel_for(&inst)?;
            let d = sample_disorder(inst.laws.0, inst.laws.1, inst.n, inst.params.h, seed, i);
            let poly = Polymer::solve(&d, &inst.params, &k)?;
            let exact = brute_force_marginals(&d, &inst.params, &k, &budget)?;
            let (a, b) = (poly.contact_profile(), exact.contact_profile());
            let mut e: f64 = 0.0;
            for s in 1..=inst.n {
                e = e.max((a.p_contact[s] - b.p_contact[s]).abs());
                e = e.max((a.p_neg[s] - b.p_neg[s]).abs());
            }
            for site in 1..inst.n {
                let (la, lb) = (poly.excursion_law(site)?, exact.excursion_law(site));
                for (x, y) in la.pmf.iter().zip(&lb.pmf) {
                    e = e.max((x - y).abs());
                }
            }
            Ok(e)
        })
        .collect::<copolymer::Result<_>>()?;
    let worst = errs.iter().copied().fold(0.0, f64::max);
    Ok(CheckResult {
        name: "marginal_oracle",
        checks: count as u64,
        worst,
        passed: worst <= 1e-10,
    })
}

pub fn inequality_suite(n_max: usize) -> Result<CheckResult, CliError> {
    let k = build_srw_kernel(n_max)?;
    let p = ModelParams::new(0.4, 0.1, 0.6, 0.2);
    let rep = exact_inequality_suite(&p, &k, n_max, &EnumerationBudget::default(), 1e-12)?;
    let checks = rep.families.iter().map(|f| f.checks).sum();
    let violations = rep.violations();
    Ok(CheckResult {
        name: "inequality_suite",
        checks,
        worst: violations as f64,
        passed: violations == 0 && rep.families.iter().all(|f| f.checks > 0),
    })
}

/// Bisection root against the closed form for the random-walk kernel.
pub fn homogeneous_root() -> Result<CheckResult, CliError> {
    let k = build_srw_kernel(1 << 12)?;
    let rewards = [0.25, 0.5, 1.0, 2.0];
    let worst = rewards
        .iter()
        .map(|&r: &f64| {
            let closed = -(1.0 - (1.0 - (-r).exp()).powi(2)).ln();
            (homogeneous_pinning_free_energy(&k, r) - closed).abs()
        })
        .fold(0.0, f64::max);
    Ok(CheckResult {
        name: "homogeneous_root",
        checks: rewards.len() as u64,
        worst,
        passed: worst <= 1e-9,
    })
}

pub fn run_checks(cfg: &RunConfig, timer: &mut Timer) -> Result<Vec<CheckResult>, CliError> {
    Ok(vec![
        timer.phase("partition_oracle", || {
            partition_oracle(cfg.seed, cfg.selftest_instances)
        })?,
        timer.phase("free_identities", free_identities)?,
        timer.phase("marginal_oracle", || marginal_oracle(cfg.seed, 10))?,
        timer.phase("inequality_suite", || inequality_suite(cfg.selftest_n_max))?,
        timer.phase("homogeneous_root", homogeneous_root)?,
    ])
}

pub fn table(results: &[CheckResult]) -> Table {
    let mut t = Table::new("selftest.csv", &["check", "passed", "checks", "worst"]);
    for r in results {
        t.push(vec![
            r.name.to_string(),
            fmt_bool(r.passed),
            r.checks.to_string(),
            fmt_f(r.worst),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_binomial_values() {
        assert_eq!(central_binomial_4n(2), 0.375);
        assert_eq!(central_binomial_4n(1), 0.5);
    }

    #[test]
    fn instances_cover_every_law_pair() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..9 {
            let inst = random_instance(1, i, 14);
            assert!((1..=14).contains(&inst.n));
            seen.insert(inst.laws);
        }
        assert_eq!(seen.len(), 9);
    }
}
