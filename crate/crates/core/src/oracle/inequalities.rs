//! Exact inequality checks over every Rademacher disorder configuration.

use rayon::prelude::*;
use serde::Serialize;

use super::{
    brute_force_marginals, rademacher_configuration, EnumeratedMeasure, EnumerationBudget,
    ReturnMask,
};
use crate::error::{Error, Result};
use crate::kernel::ReturnKernel;
use crate::logspace::softplus;
use crate::partition::{zeta, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityFamily {
    pub name: &'static str,
    pub checks: u64,
    pub violations: u64,
    /// Smallest `rhs - lhs` seen (negative means violated).
    pub worst_margin: f64,
}

impl InequalityFamily {
    fn new(name: &'static str) -> Self {
        InequalityFamily {
            name,
            checks: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
        }
    }

    /// Record `lhs <= rhs` up to `tol` relative to the larger magnitude.
    fn check(&mut self, lhs: f64, rhs: f64, tol: f64) {
        self.checks += 1;
        let margin = rhs - lhs;
        self.worst_margin = self.worst_margin.min(margin);
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        if !(margin >= -tol * scale) {
            self.violations += 1;
        }
    }

    fn merge(&mut self, other: &InequalityFamily) {
        self.checks += other.checks;
        self.violations += other.violations;
        self.worst_margin = self.worst_margin.min(other.worst_margin);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub n_max: usize,
    pub families: Vec<InequalityFamily>,
}

impl InequalityReport {
    pub fn violations(&self) -> u64 {
        self.families.iter().map(|f| f.violations).sum()
    }

    pub fn family(&self, name: &str) -> Option<&InequalityFamily> {
        self.families.iter().find(|f| f.name == name)
    }
}

/// Interior condition on one gap of a pin pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GapEvent {
    NoReturn,
    SomeReturn,
    Any,
}

/// Bits `lo+1 ..= hi-1` (sites strictly inside `(lo, hi)`).
fn interior_bits(lo: usize, hi: usize) -> ReturnMask {
    let mut m = 0;
    for t in lo + 1..hi {
        m |= 1 << (t - 1);
    }
    m
}

fn gap_holds(mask: ReturnMask, bits: ReturnMask, ev: GapEvent) -> bool {
    match ev {
        GapEvent::NoReturn => mask & bits == 0,
        GapEvent::SomeReturn => mask & bits != 0,
        GapEvent::Any => true,
    }
}

fn pin_patterns(n: usize, max_m: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() >= 2 {
            out.push(cur.clone());
        }
        if left == 0 {
            return;
        }
        for i in start..=n {
            cur.push(i);
            rec(i + 1, n, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, max_m + 1, &mut Vec::new(), &mut out);
    out
}

fn event_choices(pins: &[usize], rich: bool) -> Vec<Vec<GapEvent>> {
    let mut out = vec![Vec::new()];
    for w in pins.windows(2) {
        let opts: &[GapEvent] = if !rich {
            &[GapEvent::NoReturn]
        } else if w[1] - w[0] >= 2 {
            &[GapEvent::NoReturn, GapEvent::SomeReturn, GapEvent::Any]
        } else {
            &[GapEvent::NoReturn]
        };
        out = out
            .into_iter()
            .flat_map(|prefix| {
                opts.iter().map(move |&e| {
                    let mut v = prefix.clone();
                    v.push(e);
                    v
                })
            })
            .collect();
    }
    out
}

/// Per configuration: `log Z`, `W_N`, and the per-sample family tallies.
struct ConfigResult {
    log_z: f64,
    w_n: f64,
    families: [InequalityFamily; 3],
}

const RICH_EVENTS_MAX_N: usize = 5;

fn per_config(
    n: usize,
    c: u64,
    p: &ModelParams,
    k: &ReturnKernel,
    budget: &EnumerationBudget,
    patterns: &[(Vec<usize>, Vec<Vec<GapEvent>>)],
    tol: f64,
) -> Result<ConfigResult> {
    let d = rademacher_configuration(n, c, p.h);
    let m = brute_force_marginals(&d, p, k, budget)?;
    let log_z = m.log_z();
    let w_n = d.w(n);

    let mut single = InequalityFamily::new("single_excursion_lower_bound");
    let single_log = k.log_k(n) - std::f64::consts::LN_2
        + softplus(-2.0 * p.lambda * w_n)
        + zeta(d.omega_tilde(n), p).0;
    single.check(single_log, log_z, tol);

    let mut positivity = InequalityFamily::new("contact_positivity");
    let prof = m.contact_profile();
    for site in 1..=n {
        let dist = site.min(n - site).max(1) as f64;
        let scaled = prof.p_contact[site]
            * zeta(d.omega_tilde(site).abs(), p).exp()
            * dist.powf(2.0 * k.spec().tail_exponent() + 1.0);
        positivity.checks += 1;
        positivity.worst_margin = positivity.worst_margin.min(scaled);
        if !(scaled > 0.0 && prof.p_contact[site] > 0.0) {
            positivity.violations += 1;
        }
    }

    // segment measures on shifted disorder, keyed by (i, j)
    let mut segments: Vec<Vec<Option<EnumeratedMeasure>>> = vec![vec![None; n + 1]; n + 1];
    for i in 0..n {
        for j in i + 1..=n {
            segments[i][j] = Some(brute_force_marginals(&d.window(i, j - i), p, k, budget)?);
        }
    }
    let mut factor = InequalityFamily::new("renewal_factorization");
    for (pins, choices) in patterns {
        let pin_mask: ReturnMask = pins
            .iter()
            .filter(|&&t| t > 0)
            .map(|&t| 1 << (t - 1))
            .fold(0, |a, b| a | b);
        let gaps: Vec<ReturnMask> = pins.windows(2).map(|w| interior_bits(w[0], w[1])).collect();
        for events in choices {
            let lhs = m.probability(|mask| {
                mask & pin_mask == pin_mask
                    && gaps
                        .iter()
                        .zip(events)
                        .all(|(&bits, &ev)| gap_holds(mask, bits, ev))
            });
            let mut rhs = 1.0;
            for (w, &ev) in pins.windows(2).zip(events) {
                let seg = segments[w[0]][w[1]].as_ref().unwrap();
                let bits = interior_bits(0, w[1] - w[0]);
                rhs *= seg.probability(|mask| gap_holds(mask, bits, ev));
            }
            factor.check(lhs, rhs, tol);
        }
    }
    Ok(ConfigResult {
        log_z,
        w_n,
        families: [single, positivity, factor],
    })
}

/// Every exact inequality the model guarantees that can be checked by
/// enumeration: the sign-flip chain behind the symmetric `μ` formula,
/// submultiplicativity of the `μ` numerator, the single-excursion lower
/// bound, renewal factorization on pin/gap patterns with up to three gaps,
/// and positivity of the contact marginals. Lengths `1..=n_max`.
pub fn exact_inequality_suite(
    p: &ModelParams,
    k: &ReturnKernel,
    n_max: usize,
    budget: &EnumerationBudget,
    tol: f64,
) -> Result<InequalityReport> {
    p.validate()?;
    if n_max == 0 || n_max > budget.max_n_disorder.min(EnumerationBudget::MAX_N_DISORDER) {
        return Err(Error::BudgetExceeded {
            what: "inequality suite length",
            requested: n_max,
            limit: budget.max_n_disorder,
        });
    }
    let mut fams = vec![
        InequalityFamily::new("sign_flip_ratio"),
        InequalityFamily::new("mu_chain_lower"),
        InequalityFamily::new("mu_chain_upper"),
        InequalityFamily::new("submultiplicative"),
        InequalityFamily::new("single_excursion_lower_bound"),
        InequalityFamily::new("contact_positivity"),
        InequalityFamily::new("renewal_factorization"),
    ];
    let two_lambda = 2.0 * p.lambda;
    // a[n] = E[(1 + e^{-2λW_n}) / Z_n]
    let mut a = vec![f64::NAN; n_max + 1];
    for n in 1..=n_max {
        let patterns: Vec<(Vec<usize>, Vec<Vec<GapEvent>>)> = pin_patterns(n, 3)
            .into_iter()
            .map(|pins| {
                let ch = event_choices(&pins, n <= RICH_EVENTS_MAX_N);
                (pins, ch)
            })
            .collect();
        let count = 1u64 << (2 * n);
        let results: Vec<ConfigResult> = (0..count)
            .into_par_iter()
            .map(|c| per_config(n, c, p, k, budget, &patterns, tol))
            .collect::<Result<_>>()?;
        let inv = results.iter().map(|r| (-r.log_z).exp()).sum::<f64>() / count as f64;
        let sign = results
            .iter()
            .map(|r| (-two_lambda * r.w_n - r.log_z).exp())
            .sum::<f64>()
            / count as f64;
        let num = inv + sign;
        a[n] = num;
        let nf = n as f64;
        fams[0].check(sign, inv, tol);
        fams[1].check(inv.ln() / nf, num.ln() / nf, tol);
        fams[2].check(
            num.ln() / nf,
            inv.ln() / nf + std::f64::consts::LN_2 / nf,
            tol,
        );
        for r in &results {
            for (slot, fam) in fams[4..].iter_mut().zip(&r.families) {
                slot.merge(fam);
            }
        }
    }
    for n in 2..=n_max {
        for m in 1..n {
            fams[3].check(a[n], a[m] * a[n - m], tol);
        }
    }
    Ok(InequalityReport {
        n_max,
        families: fams,
    })
}
