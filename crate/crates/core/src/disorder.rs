//! Reproducible IID charge sequences `ω`, `ω̃` and the prefix sums of `ω + h`.
//!
//! Values come from a counter-based generator: site `m` of stream `s` for
//! replica `r` under master seed `seed` is a pure function of
//! `(seed, r, s, m)`, so generation order and thread count never matter.

use serde::{Deserialize, Serialize};

/// Centered, unit-variance single-site law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisorderLaw {
    /// ±1 with probability ½ each.
    Rademacher,
    /// Standard normal.
    Gaussian,
    /// Uniform on `[-√3, √3]`.
    UniformSym,
    /// Point mass at 0, giving the homogeneous model. Not in [`DisorderLaw::ALL`].
    Zero,
}

impl DisorderLaw {
    pub const ALL: [DisorderLaw; 3] = [
        DisorderLaw::Rademacher,
        DisorderLaw::Gaussian,
        DisorderLaw::UniformSym,
    ];

    /// Every provided law satisfies `law(ω) = law(-ω)`.
    pub fn is_symmetric(self) -> bool {
        true
    }

    fn draw(self, bits: u64) -> f64 {
        match self {
            DisorderLaw::Rademacher => {
                if bits >> 63 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            DisorderLaw::Gaussian => inverse_normal_cdf(open_unit(bits)),
            DisorderLaw::UniformSym => (2.0 * open_unit(bits) - 1.0) * 3f64.sqrt(),
            DisorderLaw::Zero => 0.0,
        }
    }
}

/// Stream tags mixed into the counter key.
pub mod stream {
    pub const OMEGA: u64 = 0x6f6d_6567_6131;
    pub const OMEGA_TILDE: u64 = 0x6f6d_6567_6132;
    pub const PATHS: u64 = 0x7061_7468_0000;
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key identifying one `(seed, replica, stream)` triple.
#[inline]
pub fn stream_key(seed: u64, replica: u64, stream: u64) -> u64 {
    let a = mix64(seed.wrapping_add(GOLDEN));
    let b = mix64(
        a ^ replica
            .wrapping_mul(GOLDEN)
            .wrapping_add(0x632b_e59b_d9b4_e019),
    );
    mix64(b ^ stream.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// 64 random bits for counter `m` under `key`.
#[inline]
pub fn counter_bits(key: u64, m: u64) -> u64 {
    mix64(key ^ mix64(m.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Uniform in the open interval (0, 1) from the top 53 bits.
#[inline]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Sequential view of a counter-based stream, used by path samplers.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, replica: u64, stream: u64) -> Self {
        CounterRng {
            key: stream_key(seed, replica, stream),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = counter_bits(self.key, self.counter);
        self.counter += 1;
        v
    }

    /// Uniform in (0, 1).
    pub fn next_unit(&mut self) -> f64 {
        open_unit(self.next_u64())
    }
}

/// Value at site `m` (1-based) of a stream.
pub fn site_value(law: DisorderLaw, seed: u64, replica: u64, stream: u64, m: u64) -> f64 {
    law.draw(counter_bits(stream_key(seed, replica, stream), m))
}

/// One realization of `(ω, ω̃)` on sites `1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderSample {
    n: usize,
    /// `omega[m-1] = ω_m`.
    omega: Vec<f64>,
    omega_tilde: Vec<f64>,
    h: f64,
    /// `w_prefix[t] = Σ_{m <= t} (ω_m + h)`, `w_prefix[0] = 0`.
    w_prefix: Vec<f64>,
    master_seed: u64,
    replica_index: u64,
}

fn prefix_sums(omega: &[f64], h: f64) -> Vec<f64> {
    let mut w = Vec::with_capacity(omega.len() + 1);
    w.push(0.0);
    let mut acc = 0.0;
    for &x in omega {
        acc += x + h;
        w.push(acc);
    }
    w
}

impl DisorderSample {
    /// Build from explicit charges (site `m` at index `m-1`).
    pub fn from_values(omega: Vec<f64>, omega_tilde: Vec<f64>, h: f64) -> Self {
        assert_eq!(omega.len(), omega_tilde.len());
        assert!(!omega.is_empty(), "disorder sample needs n >= 1");
        let w_prefix = prefix_sums(&omega, h);
        DisorderSample {
            n: omega.len(),
            omega,
            omega_tilde,
            h,
            w_prefix,
            master_seed: 0,
            replica_index: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `ω_m` for `1 <= m <= n`.
    #[inline]
    pub fn omega(&self, m: usize) -> f64 {
        self.omega[m - 1]
    }

    #[inline]
    pub fn omega_tilde(&self, m: usize) -> f64 {
        self.omega_tilde[m - 1]
    }

    pub fn omega_values(&self) -> &[f64] {
        &self.omega
    }

    pub fn omega_tilde_values(&self) -> &[f64] {
        &self.omega_tilde
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn w_prefix(&self) -> &[f64] {
        &self.w_prefix
    }

    /// `W_t = Σ_{m <= t} (ω_m + h)`.
    #[inline]
    pub fn w(&self, t: usize) -> f64 {
        self.w_prefix[t]
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn replica_index(&self) -> u64 {
        self.replica_index
    }

    /// Same charges with a different bias `h` in the prefix sums.
    pub fn with_bias(&self, h: f64) -> DisorderSample {
        DisorderSample {
            w_prefix: prefix_sums(&self.omega, h),
            h,
            ..self.clone()
        }
    }

    /// Charges on sites `start+1 ..= start+len`, re-indexed from 1.
    pub fn window(&self, start: usize, len: usize) -> DisorderSample {
        assert!(len >= 1 && start + len <= self.n);
        let omega = self.omega[start..start + len].to_vec();
        let omega_tilde = self.omega_tilde[start..start + len].to_vec();
        DisorderSample {
            master_seed: self.master_seed,
            replica_index: self.replica_index,
            ..DisorderSample::from_values(omega, omega_tilde, self.h)
        }
    }

    /// First `len` sites.
    pub fn prefix(&self, len: usize) -> DisorderSample {
        self.window(0, len)
    }

    /// Same sample with `ω̃` shifted by a constant.
    pub fn with_shifted_omega_tilde(&self, shift: f64) -> DisorderSample {
        let omega_tilde = self.omega_tilde.iter().map(|x| x + shift).collect();
        DisorderSample {
            omega_tilde,
            ..self.clone()
        }
    }
}

pub fn sample_disorder(
    law_omega: DisorderLaw,
    law_omega_tilde: DisorderLaw,
    n: usize,
    h: f64,
    master_seed: u64,
    replica_index: u64,
) -> DisorderSample {
    assert!(n >= 1, "disorder sample needs n >= 1");
    let key_a = stream_key(master_seed, replica_index, stream::OMEGA);
    let key_b = stream_key(master_seed, replica_index, stream::OMEGA_TILDE);
    let omega = (1..=n as u64)
        .map(|m| law_omega.draw(counter_bits(key_a, m)))
        .collect();
    let omega_tilde = (1..=n as u64)
        .map(|m| law_omega_tilde.draw(counter_bits(key_b, m)))
        .collect();
    DisorderSample {
        master_seed,
        replica_index,
        ..DisorderSample::from_values(omega, omega_tilde, h)
    }
}

/// `ω ≡ 0`, `ω̃ ≡ 0`: the homogeneous model.
pub fn freeze_zero_disorder(n: usize, h: f64) -> DisorderSample {
    DisorderSample::from_values(vec![0.0; n], vec![0.0; n], h)
}

/// Inverse standard normal CDF (Wichura, AS 241 `PPND16`).
#[allow(clippy::inconsistent_digit_grouping, clippy::excessive_precision)]
pub fn inverse_normal_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r
                + 67265.770_927_008_7)
                * r
                + 45921.953_931_549_87)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((5226.495_278_852_545 * r + 28729.085_735_721_943) * r
                + 39307.895_800_092_71)
                * r
                + 21213.794_301_586_597)
                * r
                + 5394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_911)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        (((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
                + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_08)
                * r
                + 0.689_767_334_985_100_1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_758_8)
                * r
                + 1.0)
    } else {
        let r = r - 5.0;
        (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_87)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114_4)
            * r
            + 6.657_904_643_501_103)
            / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_132_6e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_8)
                * r
                + 0.599_832_206_555_888)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rademacher_support() {
        let d = sample_disorder(
            DisorderLaw::Rademacher,
            DisorderLaw::Rademacher,
            1000,
            0.0,
            7,
            0,
        );
        assert!(d.omega_values().iter().all(|&x| x == 1.0 || x == -1.0));
        assert!(d
            .omega_tilde_values()
            .iter()
            .all(|&x| x == 1.0 || x == -1.0));
    }

    #[test]
    fn deterministic_and_order_free() {
        let a = sample_disorder(
            DisorderLaw::Gaussian,
            DisorderLaw::UniformSym,
            50,
            0.2,
            11,
            3,
        );
        let b = sample_disorder(
            DisorderLaw::Gaussian,
            DisorderLaw::UniformSym,
            50,
            0.2,
            11,
            3,
        );
        assert_eq!(a, b);
        // query sites in reverse order one at a time
        for m in (1..=50u64).rev() {
            let v = site_value(DisorderLaw::Gaussian, 11, 3, stream::OMEGA, m);
            assert_eq!(v.to_bits(), a.omega(m as usize).to_bits());
        }
        // a longer sample extends a shorter one
        let long = sample_disorder(
            DisorderLaw::Gaussian,
            DisorderLaw::UniformSym,
            80,
            0.2,
            11,
            3,
        );
        assert_eq!(&long.omega_values()[..50], a.omega_values());
    }

    #[test]
    fn gaussian_moments() {
        let n = 1_000_000;
        let d = sample_disorder(
            DisorderLaw::Gaussian,
            DisorderLaw::Gaussian,
            n,
            0.0,
            2024,
            0,
        );
        let xs = d.omega_values();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() <= 0.004, "mean {mean}");
        assert!((0.99..=1.01).contains(&var), "var {var}");
    }

    #[test]
    fn uniform_law_is_centered_unit_variance() {
        let n = 400_000;
        let d = sample_disorder(
            DisorderLaw::UniformSym,
            DisorderLaw::UniformSym,
            n,
            0.0,
            5,
            1,
        );
        let xs = d.omega_values();
        let bound = 3f64.sqrt();
        assert!(xs.iter().all(|x| x.abs() <= bound));
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.01);
    }

    #[test]
    fn replicas_and_streams_are_uncorrelated() {
        let n = 1_000_000;
        let a = sample_disorder(DisorderLaw::Gaussian, DisorderLaw::Gaussian, n, 0.0, 99, 0);
        let b = sample_disorder(DisorderLaw::Gaussian, DisorderLaw::Gaussian, n, 0.0, 99, 1);
        let corr = |x: &[f64], y: &[f64]| {
            let mx = x.iter().sum::<f64>() / n as f64;
            let my = y.iter().sum::<f64>() / n as f64;
            let mut sxy = 0.0;
            let mut sxx = 0.0;
            let mut syy = 0.0;
            for (a, b) in x.iter().zip(y) {
                sxy += (a - mx) * (b - my);
                sxx += (a - mx).powi(2);
                syy += (b - my).powi(2);
            }
            sxy / (sxx * syy).sqrt()
        };
        let bound = 4.0 / (n as f64).sqrt();
        assert!(corr(a.omega_values(), b.omega_values()).abs() <= bound);
        assert!(corr(a.omega_values(), a.omega_tilde_values()).abs() <= bound);
    }

    #[test]
    fn laws_are_symmetric_in_distribution() {
        // empirical odd moments vanish within 4σ
        for law in DisorderLaw::ALL {
            let n = 200_000;
            let d = sample_disorder(law, law, n, 0.0, 17, 0);
            let m3 = d.omega_values().iter().map(|x| x.powi(3)).sum::<f64>() / n as f64;
            // Var(x^3) = 15 for the Gaussian, smaller for the others
            assert!(m3.abs() < 4.0 * (15.0 / n as f64).sqrt(), "{law:?}: {m3}");
        }
    }

    #[test]
    fn zero_disorder_prefix() {
        let d = freeze_zero_disorder(5, 0.3);
        let expect = [0.0, 0.3, 0.6, 0.9, 1.2, 1.5];
        for (a, b) in d.w_prefix().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(d.omega_tilde_values().iter().all(|&x| x == 0.0));
        assert_eq!(freeze_zero_disorder(1, 0.7).w(1), 0.7);
    }

    #[test]
    fn prefix_increments_are_exact() {
        let d = sample_disorder(
            DisorderLaw::UniformSym,
            DisorderLaw::Gaussian,
            100,
            0.25,
            1,
            2,
        );
        assert_eq!(d.w(0), 0.0);
        let mut acc = 0.0;
        for t in 1..=100 {
            acc += d.omega(t) + 0.25;
            assert_eq!(d.w(t), acc);
        }
    }

    #[test]
    fn inverse_cdf_reference_points() {
        assert_eq!(inverse_normal_cdf(0.5), 0.0);
        assert!((inverse_normal_cdf(0.975) - 1.959_963_984_540_054).abs() < 1e-14);
        assert!((inverse_normal_cdf(0.001) + 3.090_232_306_167_813_5).abs() < 1e-13);
        assert!((inverse_normal_cdf(1e-10) + 6.361_340_902_404_056).abs() < 1e-11);
        // round trip through the CDF
        for &p in &[1e-8, 0.01, 0.2, 0.6, 0.99] {
            let x = inverse_normal_cdf(p);
            let back = 0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2);
            assert!(((back - p) / p).abs() < 1e-9, "p = {p}");
        }
    }

    #[test]
    fn window_reindexes() {
        let d = sample_disorder(DisorderLaw::Gaussian, DisorderLaw::Gaussian, 20, 0.1, 3, 0);
        let w = d.window(5, 10);
        assert_eq!(w.len(), 10);
        assert_eq!(w.omega(1), d.omega(6));
        assert!((w.w(10) - (d.w(15) - d.w(5))).abs() < 1e-12);
    }
}
