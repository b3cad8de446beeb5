//! Acceptance criteria 1-9, one line each. Run with `cargo test --test acceptance`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use copolymer::disorder::{sample_disorder, CounterRng, DisorderLaw, DisorderSample};
use copolymer::estimators::{
    clt_study, entropy_bound, estimate_free_energy, estimate_mu, finite_size_study,
    fit_correlation_decay, max_excursion_study, meet_probability, Ensemble, FiniteSizeVerdict,
};
use copolymer::kernel::{build_srw_kernel, KernelKind, ReturnKernel};
use copolymer::observables::{ursell, Polymer};
use copolymer::oracle::homogeneous_pinning_free_energy;
use copolymer::partition::{forward_log_z, Coupling, ModelParams};
use copolymer_cli::selftest;

const SEED: u64 = 20240601;

fn v_star() -> ModelParams {
    ModelParams::new(0.0, 0.0, 1.0, 0.5)
}

struct Verdict {
    pass: bool,
    detail: String,
}

type Outcome = Result<Verdict, String>;

fn verdict(pass: bool, detail: String) -> Outcome {
    Ok(Verdict { pass, detail })
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Runs one criterion, prints its line, and returns whether it passed.
fn criterion(id: &str, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let secs = start.elapsed();
    let (pass, detail) = match out {
        Ok(v) => (v.pass && secs <= budget, v.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    let tag = if pass { "PASS" } else { "FAIL" };
    println!(
        "[{tag}] {id:<3} {name}: {detail} ({:.2} s, budget {} s)",
        secs.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn oracle_equivalence() -> Outcome {
    let r = selftest::partition_oracle(SEED, 50).map_err(err)?;
    verdict(
        r.passed,
        format!("{} instances, max |diff| = {:.2e}", r.checks, r.worst),
    )
}

fn free_identities() -> Outcome {
    let r = selftest::free_identities().map_err(err)?;
    verdict(
        r.passed,
        format!("N = 1..12 and Z_2, max |diff| = {:.2e}", r.worst),
    )
}

fn homogeneous_pinning() -> Outcome {
    let ens = Ensemble::new(ModelParams::new(0.0, 0.0, 1.0, 1.0), 2, SEED)
        .with_laws(DisorderLaw::Zero, DisorderLaw::Zero);
    let est = estimate_free_energy(&ens, &[2048, 4096]).map_err(err)?;
    let rich = est[1].f_extrapolated.ok_or("no extrapolation")?;
    let k = build_srw_kernel(4096).map_err(err)?;
    let root = homogeneous_pinning_free_energy(&k, 1.0);
    let diff = (rich - root).abs();
    verdict(
        diff <= 1e-3,
        format!("Richardson {rich:.8} vs b* {root:.8}, |diff| = {diff:.2e}"),
    )
}

fn log_z(d: &DisorderSample, p: &ModelParams, k: &ReturnKernel) -> Result<f64, String> {
    let d = if d.h() == p.h {
        d.clone()
    } else {
        d.with_bias(p.h)
    };
    Ok(*forward_log_z(&d, p, k).map_err(err)?.last().unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn gradient_suite() -> Outcome {
    let n = 256;
    let k = build_srw_kernel(n).map_err(err)?;
    let step = 1e-4;
    let mut worst: f64 = 0.0;
    for i in 0..10u64 {
        let mut rng = CounterRng::new(SEED, i, 0x6772_6164);
        let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.next_unit();
        let p = ModelParams::new(u(0.2, 1.5), u(0.05, 0.6), u(0.2, 1.5), u(-1.0, 1.0));
        let laws = DisorderLaw::ALL;
        let d = sample_disorder(
            laws[i as usize % 3],
            laws[(i as usize + 1) % 3],
            n,
            p.h,
            SEED,
            i,
        );
        let poly = Polymer::solve(&d, &p, &k).map_err(err)?;
        let grad = poly.log_z_gradient(&poly.contact_profile());
        for (j, axis) in Coupling::ALL.iter().enumerate() {
            let v = p.get(*axis);
            let fd = (log_z(&d, &p.with(*axis, v + step), &k)?
                - log_z(&d, &p.with(*axis, v - step), &k)?)
                / (2.0 * step);
            worst = worst.max(rel(grad[j], fd));
        }
    }

    let n2 = 128;
    let k2 = build_srw_kernel(n2).map_err(err)?;
    let p = v_star();
    let d = sample_disorder(
        DisorderLaw::Gaussian,
        DisorderLaw::Gaussian,
        n2,
        p.h,
        SEED,
        99,
    );
    let poly = Polymer::solve(&d, &p, &k2).map_err(err)?;
    let mut u2 = 0.0;
    for a in 1..=n2 {
        for b in 1..=n2 {
            u2 += ursell(&[&[a], &[b]], |s| poly.contact_moment(s)).map_err(err)?;
        }
    }
    let analytic = p.lambda_tilde.powi(2) * u2;
    let s = 1e-3;
    let f = |ht: f64| log_z(&d, &p.with(Coupling::HTilde, ht), &k2);
    let fd = (f(p.h_tilde + s)? - 2.0 * f(p.h_tilde)? + f(p.h_tilde - s)?) / (s * s);
    let urs = rel(analytic, fd);
    verdict(
        worst <= 1e-5 && urs <= 1e-4,
        format!(
            "gradient max rel err {worst:.2e}; Ursell k=2 vs second derivative rel err {urs:.2e}"
        ),
    )
}

fn inequality_suite() -> Outcome {
    let r = selftest::inequality_suite(7).map_err(err)?;
    verdict(
        r.passed,
        format!("N <= 7, {} checks, {} violations", r.checks, r.worst as u64),
    )
}

fn localized_suite() -> Outcome {
    let ens = Ensemble::new(v_star(), 200, SEED)
        .with_kernel(KernelKind::Srw, 1.5)
        .with_laws(DisorderLaw::Gaussian, DisorderLaw::Gaussian);
    let fe = estimate_free_energy(&ens, &[1024]).map_err(err)?[0];
    if !(fe.f_hat > 5.0 * fe.stderr) {
        return verdict(
            false,
            format!("not localized: F = {:.4} +- {:.4}", fe.f_hat, fe.stderr),
        );
    }
    let mut parts = vec![format!("F(1024) = {:.4} +- {:.4}", fe.f_hat, fe.stderr)];
    let mut pass = true;

    let dist: Vec<usize> = (4..=64).collect();
    let decay = fit_correlation_decay(&ens, 1024, &dist).map_err(err)?;
    let a = decay.c2_hat > 0.0 && decay.r_squared >= 0.9;
    pass &= a;
    parts.push(format!(
        "(a) c2 = {:.3}, r2 = {:.3}",
        decay.c2_hat, decay.r_squared
    ));

    let mu = estimate_mu(&ens, &[256, 512, 1024]).map_err(err)?;
    let b = mu.monotone && mu.below_free_energy;
    pass &= b;
    let mus: Vec<String> = mu
        .rungs
        .iter()
        .map(|m| format!("{:.3}", m.mu_hat))
        .collect();
    parts.push(format!("(b) mu = [{}]", mus.join(", ")));
    let mu_hat = mu.rungs.last().unwrap().mu_hat;

    let paths =
        max_excursion_study(&ens.with_replicas(50), &[8192], 4, mu_hat, &[]).map_err(err)?;
    let s = &paths.summaries[0];
    let band = s
        .bands
        .iter()
        .find(|b| b.0 == (0.5, 2.0))
        .ok_or("band missing")?
        .1;
    let c = s.localized && s.samples == 200 && band >= 0.8;
    pass &= c;
    parts.push(format!(
        "(c) {} paths, {:.1}% in band",
        s.samples,
        100.0 * band
    ));

    let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let eb = entropy_bound(&ens, 1024, &grid).map_err(err)?;
    let d = eb.best_bound < eb.f_hat - 2.0 * eb.f_stderr;
    pass &= d;
    parts.push(format!(
        "(d) bound {:.4} < {:.4}",
        eb.best_bound,
        eb.f_hat - 2.0 * eb.f_stderr
    ));

    let windows: Vec<usize> = (4..=32).collect();
    let meet = meet_probability(&ens, 256, &windows, 50).map_err(err)?;
    let rate = meet.c2_hat.unwrap_or(f64::NAN);
    let e = rate > 0.0;
    pass &= e;
    parts.push(format!("(e) meet rate {rate:.3}"));

    verdict(pass, parts.join("; "))
}

fn finite_size() -> Outcome {
    let ens = Ensemble::new(v_star(), 200, SEED);
    let ladder: Vec<usize> = (6..=12).map(|e| 1usize << e).collect();
    let rep = finite_size_study(&ens, &ladder).map_err(err)?;
    let gaps: Vec<String> = rep.scaled_gap.iter().map(|g| format!("{g:.3}")).collect();
    verdict(
        rep.verdict == FiniteSizeVerdict::BoundedGap && rep.superadditive(),
        format!("verdict {:?}, gaps [{}]", rep.verdict, gaps.join(", ")),
    )
}

fn clt() -> Outcome {
    let ens = Ensemble::new(v_star(), 2000, SEED);
    let rep = clt_study(&ens, &[2048, 4096]).map_err(err)?;
    let (lo, hi) = (rep.rows[0], rep.rows[1]);
    let ratio = hi.var_over_n / lo.var_over_n;
    verdict(
        (ratio - 1.0).abs() <= 0.25 && hi.skewness.abs() <= 0.3 && hi.ks <= 0.05,
        format!(
            "var/N {:.4} -> {:.4}, skewness {:.3}, KS {:.4}",
            lo.var_over_n, hi.var_over_n, hi.skewness, hi.ks
        ),
    )
}

fn run_cli(root: &Path, args: &[&str], threads: &str) -> Result<PathBuf, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_copolymer"))
        .args(args)
        .args(["--threads", threads])
        .env("COPOLYMER_RUNS_DIR", root)
        .output()
        .map_err(err)?;
    if !out.status.success() {
        return Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(PathBuf::from(String::from_utf8_lossy(&out.stdout).trim()))
}

fn csv_bytes(dir: &Path) -> Result<Vec<(PathBuf, Vec<u8>)>, String> {
    let mut v = Vec::new();
    for e in fs::read_dir(dir).map_err(err)? {
        let p = e.map_err(err)?.path();
        if p.extension().is_some_and(|x| x == "csv") {
            let bytes = fs::read(&p).map_err(err)?;
            v.push((p.file_name().unwrap().into(), bytes));
        }
    }
    v.sort();
    Ok(v)
}

fn determinism() -> Outcome {
    let common = ["--replicas", "6", "--seed", "11"];
    let cases: &[&[&str]] = &[
        &["free-energy", "--n", "256", "--ladder", "64,128,256"],
        &["mu", "--n", "256", "--ladder", "64,128,256"],
        &["profile", "--n", "256"],
        &["correlations", "--n", "256"],
        &["boundary", "--n", "256"],
        &["excursions", "--n", "256"],
        &["maxexc", "--n", "256", "--ladder", "128,256"],
        &["sample", "--n", "128"],
        &["clt", "--n", "256"],
        &["finite-size", "--n", "512"],
        &["entropy-bound", "--n", "256"],
        &["meet", "--n", "256"],
        &["phase-scan", "--n", "128"],
        &[
            "selftest",
            "--set",
            "selftest_n_max=4",
            "--set",
            "selftest_instances=10",
        ],
    ];
    let roots: Vec<tempfile::TempDir> = (0..3)
        .map(|_| tempfile::tempdir())
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let mut files = 0;
    for case in cases {
        let args: Vec<&str> = case.iter().chain(&common).copied().collect();
        let a = csv_bytes(&run_cli(roots[0].path(), &args, "1")?)?;
        let b = csv_bytes(&run_cli(roots[1].path(), &args, "4")?)?;
        let c = csv_bytes(&run_cli(roots[2].path(), &args, "1")?)?;
        if a.is_empty() || a != b || a != c {
            return verdict(false, format!("{} outputs differ", case[0]));
        }
        files += a.len();
    }
    verdict(
        true,
        format!(
            "{} subcommands, {files} CSV files identical across reruns and --threads 1/4",
            cases.len()
        ),
    )
}

fn main() {
    let mins = |m: u64| Duration::from_secs(60 * m);
    let secs = Duration::from_secs;
    let results = [
        criterion("1", "oracle equivalence", secs(10), oracle_equivalence),
        criterion("2", "free-case identities", secs(1), free_identities),
        criterion("3", "homogeneous pinning", secs(60), homogeneous_pinning),
        criterion("4", "gradient suite", secs(30), gradient_suite),
        criterion("5", "exact inequality suite", secs(120), inequality_suite),
        criterion("6", "localized-phase behavior", mins(10), localized_suite),
        criterion("7", "finite-size", mins(5), finite_size),
        criterion("8", "CLT", mins(10), clt),
        criterion("9", "determinism", mins(5), determinism),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
