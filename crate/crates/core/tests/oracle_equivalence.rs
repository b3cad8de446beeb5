use copolymer::disorder::{sample_disorder, DisorderLaw};
use copolymer::kernel::{build_powerlaw_kernel, build_srw_kernel, ReturnKernel};
use copolymer::observables::Polymer;
use copolymer::oracle::{brute_force_marginals, brute_force_partition, EnumerationBudget};
use copolymer::partition::{forward_tables, ModelParams};
use proptest::prelude::*;

fn law(i: u8) -> DisorderLaw {
    DisorderLaw::ALL[i as usize % 3]
}

fn kernel(power: bool) -> ReturnKernel {
    if power {
        build_powerlaw_kernel(1.4, 16).unwrap()
    } else {
        build_srw_kernel(16).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_z_matches_enumeration(
        n in 1usize..=14,
        c in prop::array::uniform4(0.0f64..2.0),
        laws in (0u8..3, 0u8..3),
        seed in any::<u64>(),
        power in any::<bool>(),
    ) {
        let k = kernel(power);
        let p = ModelParams::new(c[0], c[1], c[2], c[3]);
        let d = sample_disorder(law(laws.0), law(laws.1), n, p.h, seed, 0);
        let dp = forward_tables(&d, &p, &k).unwrap().log_z().0;
        let bf = brute_force_partition(&d, &p, &k, &EnumerationBudget::default()).unwrap().0;
        prop_assert!((dp - bf).abs() <= 1e-9, "{} vs {}", dp, bf);
    }

    #[test]
    fn marginals_match_enumeration(
        n in 2usize..=12,
        c in prop::array::uniform4(0.0f64..2.0),
        laws in (0u8..3, 0u8..3),
        seed in any::<u64>(),
        pair in (1usize..12, 1usize..12),
    ) {
        let k = kernel(false);
        let p = ModelParams::new(c[0], c[1], c[2], c[3] - 1.0);
        let d = sample_disorder(law(laws.0), law(laws.1), n, p.h, seed, 3);
        let poly = Polymer::solve(&d, &p, &k).unwrap();
        let exact = brute_force_marginals(&d, &p, &k, &EnumerationBudget::default()).unwrap();
        let a = poly.contact_profile();
        let b = exact.contact_profile();
        for m in 1..=n {
            prop_assert!((a.p_contact[m] - b.p_contact[m]).abs() <= 1e-10);
            prop_assert!((a.p_neg[m] - b.p_neg[m]).abs() <= 1e-10);
        }
        for site in 1..n {
            let la = poly.excursion_law(site).unwrap();
            let lb = exact.excursion_law(site);
            prop_assert!((la.total_mass() - 1.0).abs() <= 1e-9);
            for s in 1..=n {
                prop_assert!((la.pmf[s] - lb.pmf[s]).abs() <= 1e-10);
            }
        }
        let (i, j) = (pair.0.min(n), pair.1.min(n));
        if i != j {
            let sites = [i.min(j), i.max(j)];
            let ja = poly.joint_contact_probability(&sites).unwrap();
            let jb = exact.joint_contact_probability(&sites);
            prop_assert!((ja - jb).abs() <= 1e-10);
        }
    }
}

#[test]
fn three_point_joints_match_enumeration() {
    let k = build_srw_kernel(16).unwrap();
    let p = ModelParams::new(0.8, 0.3, 1.1, 0.2);
    let d = sample_disorder(DisorderLaw::Gaussian, DisorderLaw::Gaussian, 12, p.h, 17, 0);
    let poly = Polymer::solve(&d, &p, &k).unwrap();
    let exact = brute_force_marginals(&d, &p, &k, &EnumerationBudget::default()).unwrap();
    for a in 1..=10 {
        for b in a + 1..=11 {
            for c in b + 1..=12 {
                let x = poly.joint_contact_probability(&[a, b, c]).unwrap();
                let y = exact.joint_contact_probability(&[a, b, c]);
                assert!((x - y).abs() < 1e-10, "{a} {b} {c}: {x} vs {y}");
            }
        }
    }
}
