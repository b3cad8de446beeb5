//! One function per subcommand; each returns its tables without touching disk.

use std::time::Instant;

use copolymer::estimators::{
    boundary_influence, clt_study, entropy_bound, estimate_free_energy, estimate_mu,
    excursion_rate_check, finite_size_study, fit_correlation_decay, max_excursion_study,
    meet_probability, path_rng, phase_scan, FiniteSizeVerdict, DEFAULT_BANDS,
};
use copolymer::observables::{PathSampler, Polymer};
use rayon::prelude::*;

use crate::config::{RunConfig, MAX_N, MAX_REPLICAS};
use crate::error::CliError;
use crate::output::{fmt_bool, fmt_f, fmt_opt, PhaseTiming, Table};
use crate::selftest;

/// Largest number of rows a path dump may produce.
pub const MAX_DUMP_PATHS: usize = 1_000_000;

#[derive(Debug, Default)]
pub struct Timer {
    pub phases: Vec<PhaseTiming>,
}

impl Timer {
    pub fn phase<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.phases.push(PhaseTiming {
            phase: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Free energy per rung of the ladder, with Richardson extrapolation
    FreeEnergy,
    /// Annealed inverse-partition decay rate
    Mu,
    /// Contact and negative-sign probabilities of one replica
    Profile,
    /// Two-point contact covariance decay
    Correlations,
    /// Influence of a cut at k on the contact at k/2
    Boundary,
    /// Law of the excursion covering a site and its exponential rate
    Excursions,
    /// Maximal excursion of sampled paths
    Maxexc,
    /// Dump sampled paths as excursion lists
    Sample,
    /// Fluctuations of log Z
    Clt,
    /// Scaled gaps N (f_2N - f_N) over a doubling ladder
    FiniteSize,
    /// Gaussian entropy upper bound on the decay rate
    EntropyBound,
    /// Probability that two paths avoid each other in a window
    Meet,
    /// Free energy on a two-axis coupling grid
    PhaseScan,
    /// Oracle suites
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::FreeEnergy => "free-energy",
            Command::Mu => "mu",
            Command::Profile => "profile",
            Command::Correlations => "correlations",
            Command::Boundary => "boundary",
            Command::Excursions => "excursions",
            Command::Maxexc => "maxexc",
            Command::Sample => "sample",
            Command::Clt => "clt",
            Command::FiniteSize => "finite-size",
            Command::EntropyBound => "entropy-bound",
            Command::Meet => "meet",
            Command::PhaseScan => "phase-scan",
            Command::Selftest => "selftest",
        }
    }
}

fn guard_n(n: usize) -> Result<(), CliError> {
    if n > MAX_N {
        return Err(CliError::Guard(format!("N = {n} exceeds {MAX_N}")));
    }
    Ok(())
}

fn guard(cfg: &RunConfig, ladder: &[usize]) -> Result<(), CliError> {
    guard_n(cfg.n)?;
    for &n in ladder {
        guard_n(n)?;
    }
    if cfg.replicas > MAX_REPLICAS {
        return Err(CliError::Guard(format!(
            "replicas = {} exceeds {MAX_REPLICAS}",
            cfg.replicas
        )));
    }
    Ok(())
}

fn doubling_ladder(lo: usize, hi: usize) -> Vec<usize> {
    let mut v = Vec::new();
    let mut n = lo.max(1);
    while n <= hi {
        v.push(n);
        n *= 2;
    }
    v
}

/// Tables of a finished run, plus a failure to report after they are written.
#[derive(Debug)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub failure: Option<CliError>,
}

pub fn run(cmd: Command, cfg: &RunConfig, timer: &mut Timer) -> Result<Outcome, CliError> {
    let tables = match cmd {
        Command::FreeEnergy => free_energy(cfg, timer),
        Command::Mu => mu(cfg, timer),
        Command::Profile => profile(cfg, timer),
        Command::Correlations => correlations(cfg, timer),
        Command::Boundary => boundary(cfg, timer),
        Command::Excursions => excursions(cfg, timer),
        Command::Maxexc => maxexc(cfg, timer),
        Command::Sample => sample(cfg, timer),
        Command::Clt => clt(cfg, timer),
        Command::FiniteSize => finite_size(cfg, timer),
        Command::EntropyBound => entropy(cfg, timer),
        Command::Meet => meet(cfg, timer),
        Command::PhaseScan => phase(cfg, timer),
        Command::Selftest => {
            let results = selftest::run_checks(cfg, timer)?;
            let failed: Vec<&str> = results
                .iter()
                .filter(|r| !r.passed)
                .map(|r| r.name)
                .collect();
            let failure = (!failed.is_empty())
                .then(|| CliError::Numerical(format!("selftest failed: {}", failed.join(", "))));
            return Ok(Outcome {
                tables: vec![selftest::table(&results)],
                failure,
            });
        }
    }?;
    Ok(Outcome {
        tables,
        failure: None,
    })
}

fn free_energy(cfg: &RunConfig, timer: &mut Timer) -> Result<Vec<Table>, CliError> {
    let ladder = cfg.ladder_or(vec![cfg.n]);
    guard(cfg, &ladder)?;
    let est = timer.phase("estimate", || {
        estimate_free_energy(&cfg.ensemble(), &ladder)
    })?;
    let mut t = Table::new(
        "free_energy.csv",
        &["N", "replicas", "f_hat", "stderr", "f_extrapolated"],
    );
    for e in est {
        t.push(vec![
            e.n.to_string(),
            e.replicas.to_string(),
            fmt_f(e.f_hat),
            fmt_f(e.stderr),
            fmt_opt(e.f_extrapolated),
        ]);
    }
    Ok(vec![t])
}

fn mu(cfg: &RunConfig, timer: &mut Timer) -> Result<Vec<Table>, CliError> {
    let ladder = cfg.ladder_or(vec![cfg.n]);
    guard(cfg, &ladder)?;
    let study = timer.phase("estimate", || estimate_mu(&cfg.ensemble(), &ladder))?;
    let mut t = Table::new("mu.csv", &["N", "mu_hat", "mu_hat_symmetric", "f_hat"]);
    let mut se = Table::new("mu_stderr.csv", &["N", "mu_stderr", "f_stderr"]);
    for m in &study.rungs {
        t.push(vec![
            m.n.to_string(),
            fmt_f(m.mu_hat),
            fmt_opt(m.mu_hat_symmetric),
            fmt_f(m.f_hat),
        ]);
        se.push(vec![m.n.to_string(), fmt_f(m.stderr), fmt_f(m.f_stderr)]);
    }
    let mut checks = Table::new("mu_checks.csv", &["monotone", "below_free_energy"]);
    checks.push(vec![
        fmt_bool(study.monotone),
        fmt_bool(study.below_free_energy),
    ]);
    Ok(vec![t, se, checks])
}

fn profile(cfg: &RunConfig, timer: &mut Timer) -> Result<Vec<Table>, CliError> {
    guard(cfg, &[])?;
    let ens = cfg.ensemble();
    ens.validate()?;
    let n = cfg.n;
    let kernel = ens.kernel_for(n)?;
    let d = ens.sample(n, cfg.replica);
    let (prof, log_z) = timer.phase("solve", || -> Result<_, CliError> {
        let poly = Polymer::solve(&d, &ens.params, &kernel)?;
        Ok((poly.contact_profile(), poly.log_z()))
    })?;
    let bad = (1..=n).find(|&k| {
        let (c, s) = (prof.p_contact[k], prof.p_neg[k]);
        !((-1e-12..=1.0 + 1e-12).contains(&c) && (-1e-12..=1.0 + 1e-12).contains(&s))
    });
    if let Some(k) = bad {
        return Err(CliError::Numerical(format!(
            "profile leaves [0, 1] at site {k}"
        )));
    }
    let mut t = Table::new("profile.csv", &["site", "p_contact", "p_neg"]);
    for k in 1..=n {
        t.push(vec![
            k.to_string(),
            fmt_f(prof.p_contact[k]),
            fmt_f(prof.p_neg[k]),
        ]);
    }
    let mut s = Table::new(
        "profile_summary.csv",
        &["N", "replica", "log_z", "total_contacts"],
    );
    s.push(vec![
        n.to_string(),
        cfg.replica.to_string(),
        fmt_f(log_z),
        fmt_f(prof.total_contacts()),
    ]);
    Ok(vec![t, s])
}

fn correlations(cfg: &RunConfig, timer: &mut Timer) -> Result<Vec<Table>, CliError> {
    guard(cfg, &[])?;
    let n = cfg.n;
    let distances = cfg
        .distances
        .clone()
        .unwrap_or_else(|| (1..=(n / 8).min(64)).collect());
    let fit = timer.phase("estimate", || {
        fit_correlation_decay(&cfg.ensemble(), n, &distances)
    })?;
    let mut t = Table::new("decay.csv", &["distance", "mean_abs_cov", "stderr"]);
    for i in 0..fit.distances.len() {
        t.push(vec![
            fit.distances[i].to_string(),
            fmt_f(fit.mean_abs_cov[i]),
            fmt_f(fit.stderr[i]),
        ]);
    }
    let mut f = Table::new(
        "decay_fit.csv",
        &["c1_hat", "c2_hat", "r_squared", "fitted_points"],
    );
    f.push(vec![
        fmt_f(fit.c1_hat),
        fmt_f(fit.c2_hat),
        fmt_f(fit.r_squared),
        fit.fitted_points.to_string(),
    ]);
    Ok(vec![t, f])
}

fn boundary(cfg: &RunConfig, timer: &mut Timer) -> Result<Vec<Table>, CliError> {
    guard(cfg, &[])?;
    let n = cfg.n;
    let step = (n / 8).max(2);
    let k_list = cfg
        .k_list
        .clone()
        .unwrap_or_else(|| (1..).map(|i| i * step).take_while(|&k| k <= n).collect());
    let b = timer.phase("estimate", || {
        boundary_influence(&cfg.ensemble(), n, &k_list)
    })?;
    let mut t = Table::new(
        "boundary.csv",
        &["k", "distance", "mean_abs_diff", "stderr"],
    );
    for i in 0..b.k.len() {
        t.push(vec![
            b.k[i].to_string(),
            b.distance[i].to_string(),
            fmt_f(b.mean_abs_diff[i]),
            fmt_f(b.stderr[i]),
        ]);
    }
    let mut f = Table::new("boundary_fit.csv", &["c2_hat", "r_squared"]);
    f.push(vec![fmt_opt(b.c2_hat), fmt_opt(b.r_squared)]);
    Ok(vec![t, f])
}

fn excursions(cfg: &RunConfig, timer: &mut Timer) -> Result<Vec<Table>, CliError> {
    guard(cfg, &[])?;
    let n = cfg.n;
    let k = cfg.site.unwrap_or(n / 2);
    let s_range = cfg.s_range.unwrap_or((4, (n / 4).min(64)));
    let rep = timer.phase("estimate", || {
        excursion_rate_check(&cfg.ensemble(), n, k, s_range)
    })?;
    if !(rep.max_mass_error < 1e-9) {
        return Err(CliError::Numerical(format!(
            "excursion law mass is off by {:e}",
            rep.max_mass_error
        )));
    }
    let mut law = Table::new("excursions.csv", &["s", "pmf"]);
    for (s, p) in rep.mean_pmf.iter().enumerate().skip(1) {
        law.push(vec![s.to_string(), fmt_f(*p)]);
    }
    let mut slopes = Table::new("excursion_rate.csv", &["replica", "slope"]);
    for (r, s) in rep.replica_slopes.iter().enumerate() {
        slopes.push(vec![r.to_string(), fmt_f(*s)]);
    }
    let mut sum = Table::new(
        "excursion_rate_summary.csv",
        &[
            "N",
            "k",
            "s_lo",
            "s_hi",
            "median_slope",
            "annealed_slope",
            "max_mass_error",
        ],
    );
    sum.push(vec![
        n.to_string(),
        k.to_string(),
        s_range.0.to_string(),
        s_range.1.to_string(),
        fmt_f(rep.median_slope),
        fmt_f(rep.annealed_slope),
        fmt_f(rep.max_mass_error),
    ]);
    Ok(vec![law, slopes, sum])
}

fn maxexc(cfg: &RunConfig, timer: &mut Timer) -> Result<Vec<Table>, CliError> {
    let ladder = cfg.ladder_or(vec![cfg.n]);
    let mu_n = cfg.mu_n.unwrap_or(*ladder.last().unwrap());
    guard(cfg, &ladder)?;
    guard_n(mu_n)?;
    let ens = cfg.ensemble();
    let mu_hat = match cfg.mu_hat {
        Some(m) => m,
        None => {
            let m = timer.phase("mu", || estimate_mu(&ens, &[mu_n]))?.rungs[0].mu_hat;
            if !(m > 0.0) {
                return Err(CliError::Numerical(format!(
                    "mu_hat = {m} at N = {mu_n} is not positive"
                )));
            }
            m
        }
    };
    let c_grid = cfg
        .c_grid
        .clone()
        .unwrap_or_else(|| vec![0.5, 1.0, 2.0, 4.0, 8.0]);
    let study = timer.phase("paths", || {
        max_excursion_study(&ens, &ladder, cfg.paths_per_replica, mu_hat, &c_grid)
    })?;
    let mut rows = Table::new("maxexc.csv", &["N", "replica", "path_index", "delta_n"]);
    for r in &study.rows {
        rows.push(vec![
            r.n.to_string(),
            r.replica.to_string(),
            r.path_index.to_string(),
            r.delta_n.to_string(),
        ]);
    }
    let band_cols: Vec<String> = DEFAULT_BANDS
        .iter()
        .map(|(lo, hi)| format!("band_{lo}_{hi}"))
        .collect();
    let mut header = vec![
        "N",
        "samples",
        "mu_hat",
        "f_hat",
        "f_stderr",
        "localized",
        "median_ratio",
    ];
    header.extend(band_cols.iter().map(|s| s.as_str()));
    let mut sum = Table::new("maxexc_summary.csv", &header);
    let mut tail = Table::new("maxexc_tail.csv", &["N", "c", "p_exceed"]);
    for s in &study.summaries {
        let mut row = vec![
            s.n.to_string(),
            s.samples.to_string(),
            fmt_f(study.mu_hat),
            fmt_f(s.f_hat),
            fmt_f(s.f_stderr),
            fmt_bool(s.localized),
            fmt_f(s.median_ratio),
        ];
        row.extend(s.bands.iter().map(|b| fmt_f(b.1)));
        sum.push(row);
        for &(c, p) in &s.tail {
            tail.push(vec![s.n.to_string(), fmt_f(c), fmt_f(p)]);
        }
    }
    Ok(vec![rows, sum, tail])
}

fn sample(cfg: &RunConfig, timer: &mut Timer) -> Result<Vec<Table>, CliError> {
    guard(cfg, &[])?;
    let total = cfg.replicas.saturating_mul(cfg.paths_per_replica);
    if total > MAX_DUMP_PATHS {
        return Err(CliError::Guard(format!(
            "path dump of {total} paths exceeds {MAX_DUMP_PATHS}"
        )));
    }
    if cfg.paths_per_replica == 0 {
        return Err(CliError::Config("paths_per_replica must be >= 1".into()));
    }
    let ens = cfg.ensemble();
    ens.validate()?;
    let n = cfg.n;
    let kernel = ens.kernel_for(n)?;
    let first = cfg.replica;
    let dumps: Vec<Vec<Vec<String>>> = timer.phase("sample", || {
        (0..cfg.replicas as u64)
            .into_par_iter()
            .map(|i| -> Result<_, CliError> {
                let r = first + i;
                let d = ens.sample(n, r);
                let sampler = PathSampler::new(&d, &ens.params, &kernel)?;
                let mut rows = Vec::new();
                for p in 0..cfg.paths_per_replica as u64 {
                    let path = sampler.sample(&mut path_rng(ens.seed, r, p));
                    for (u, t, sign) in path.excursions() {
                        rows.push(vec![
                            r.to_string(),
                            p.to_string(),
                            u.to_string(),
                            t.to_string(),
                            sign.to_string(),
                        ]);
                    }
                }
                Ok(rows)
            })
            .collect::<Result<_, _>>()
    })?;
    let mut t = Table::new(
        "paths.csv",
        &["replica", "path_index", "start", "end", "sign"],
    );
    for rows in dumps {
        for row in rows {
            t.push(row);
        }
    }
    Ok(vec![t])
}

fn clt(cfg: &RunConfig, timer: &mut Timer) -> Result<Vec<Table>, CliError> {
    let ladder = cfg.ladder_or(if cfg.n >= 2 {
        vec![cfg.n / 2, cfg.n]
    } else {
        vec![cfg.n]
    });
    guard(cfg, &ladder)?;
    let rep = timer.phase("estimate", || clt_study(&cfg.ensemble(), &ladder))?;
    let mut t = Table::new(
        "clt.csv",
        &["N", "var_over_n", "skewness", "kurtosis", "ks"],
    );
    for r in &rep.rows {
        t.push(vec![
            r.n.to_string(),
            fmt_f(r.var_over_n),
            fmt_f(r.skewness),
            fmt_f(r.kurtosis),
            fmt_f(r.ks),
        ]);
    }
    Ok(vec![t])
}

fn finite_size(cfg: &RunConfig, timer: &mut Timer) -> Result<Vec<Table>, CliError> {
    let ladder = cfg.ladder_or(doubling_ladder(cfg.n / 16, cfg.n));
    guard(cfg, &ladder)?;
    let rep = timer.phase("estimate", || finite_size_study(&cfg.ensemble(), &ladder))?;
    let mut t = Table::new(
        "finite_size.csv",
        &["N", "f_n", "stderr", "scaled_gap", "gap_stderr"],
    );
    for (i, &n) in rep.n_ladder.iter().enumerate() {
        t.push(vec![
            n.to_string(),
            fmt_f(rep.f_n[i]),
            fmt_f(rep.f_stderr[i]),
            fmt_opt(rep.scaled_gap.get(i).copied()),
            fmt_opt(rep.gap_stderr.get(i).copied()),
        ]);
    }
    let verdict = match rep.verdict {
        FiniteSizeVerdict::BoundedGap => "bounded_gap",
        FiniteSizeVerdict::LogGrowth => "log_growth",
        FiniteSizeVerdict::Inconclusive => "inconclusive",
    };
    let mut v = Table::new("finite_size_verdict.csv", &["verdict", "superadditive"]);
    v.push(vec![verdict.to_string(), fmt_bool(rep.superadditive())]);
    Ok(vec![t, v])
}

fn entropy(cfg: &RunConfig, timer: &mut Timer) -> Result<Vec<Table>, CliError> {
    guard(cfg, &[])?;
    let grid = cfg
        .epsilon_grid
        .clone()
        .unwrap_or_else(|| (1..=10).map(|i| i as f64 / 10.0).collect());
    let rep = timer.phase("estimate", || entropy_bound(&cfg.ensemble(), cfg.n, &grid))?;
    let mut t = Table::new("entropy_bound.csv", &["epsilon", "bound", "stderr"]);
    for i in 0..rep.epsilon_grid.len() {
        t.push(vec![
            fmt_f(rep.epsilon_grid[i]),
            fmt_f(rep.bound_values[i]),
            fmt_f(rep.bound_stderr[i]),
        ]);
    }
    let mut s = Table::new(
        "entropy_bound_summary.csv",
        &[
            "N",
            "best_bound",
            "best_epsilon",
            "f_hat",
            "f_stderr",
            "mu_hat",
            "gap",
        ],
    );
    s.push(vec![
        rep.n.to_string(),
        fmt_f(rep.best_bound),
        fmt_f(rep.best_epsilon),
        fmt_f(rep.f_hat),
        fmt_f(rep.f_stderr),
        fmt_f(rep.mu_hat),
        fmt_f(rep.gap),
    ]);
    Ok(vec![t, s])
}

fn meet(cfg: &RunConfig, timer: &mut Timer) -> Result<Vec<Table>, CliError> {
    guard(cfg, &[])?;
    let n = cfg.n;
    let sizes = cfg
        .window_sizes
        .clone()
        .unwrap_or_else(|| [4, 8, 16, 32].into_iter().filter(|&s| s <= n / 2).collect());
    let m = timer.phase("estimate", || {
        meet_probability(&cfg.ensemble(), n, &sizes, cfg.pairs_per_replica)
    })?;
    let mut t = Table::new("meet.csv", &["window_size", "probability", "stderr"]);
    for i in 0..m.window_sizes.len() {
        t.push(vec![
            m.window_sizes[i].to_string(),
            fmt_f(m.probability[i]),
            fmt_f(m.stderr[i]),
        ]);
    }
    let mut f = Table::new("meet_fit.csv", &["c2_hat", "r_squared"]);
    f.push(vec![fmt_opt(m.c2_hat), fmt_opt(m.r_squared)]);
    Ok(vec![t, f])
}

fn phase(cfg: &RunConfig, timer: &mut Timer) -> Result<Vec<Table>, CliError> {
    guard(cfg, &[])?;
    let pts = timer.phase("scan", || {
        phase_scan(
            &cfg.ensemble(),
            cfg.axis1,
            &cfg.values1,
            cfg.axis2,
            &cfg.values2,
            cfg.n,
        )
    })?;
    let mut t = Table::new(
        "phase.csv",
        &["axis1", "axis2", "f_hat", "stderr", "localized"],
    );
    for p in pts {
        t.push(vec![
            fmt_f(p.axis1),
            fmt_f(p.axis2),
            fmt_f(p.f_hat),
            fmt_f(p.stderr),
            fmt_bool(p.localized),
        ]);
    }
    Ok(vec![t])
}
