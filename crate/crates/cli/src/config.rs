//! Run configuration: a flat JSON object, overridden by flags.

use std::path::Path;

use copolymer::disorder::DisorderLaw;
use copolymer::estimators::Ensemble;
use copolymer::kernel::KernelKind;
use copolymer::partition::{Coupling, ModelParams};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Largest chain length accepted by any subcommand.
pub const MAX_N: usize = 1 << 18;
pub const MAX_REPLICAS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub lambda: f64,
    pub h: f64,
    pub lambda_tilde: f64,
    pub h_tilde: f64,
    pub kernel: KernelKind,
    pub alpha: f64,
    pub omega_law: DisorderLaw,
    pub omega_tilde_law: DisorderLaw,
    pub n: usize,
    pub n_ladder: Option<Vec<usize>>,
    pub replicas: usize,
    pub seed: u64,

    /// Replica used by `profile` and as the first replica of `sample`.
    pub replica: u64,
    pub distances: Option<Vec<usize>>,
    pub k_list: Option<Vec<usize>>,
    pub site: Option<usize>,
    pub s_range: Option<(usize, usize)>,
    pub epsilon_grid: Option<Vec<f64>>,
    pub window_sizes: Option<Vec<usize>>,
    pub paths_per_replica: usize,
    pub pairs_per_replica: usize,
    /// Length at which `maxexc` estimates `mu_hat` when none is given.
    pub mu_n: Option<usize>,
    pub mu_hat: Option<f64>,
    pub c_grid: Option<Vec<f64>>,
    pub axis1: Coupling,
    pub values1: Vec<f64>,
    pub axis2: Coupling,
    pub values2: Vec<f64>,
    pub selftest_instances: usize,
    pub selftest_n_max: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lambda: 0.0,
            h: 0.0,
            lambda_tilde: 1.0,
            h_tilde: 0.5,
            kernel: KernelKind::Srw,
            alpha: 1.5,
            omega_law: DisorderLaw::Gaussian,
            omega_tilde_law: DisorderLaw::Gaussian,
            n: 256,
            n_ladder: None,
            replicas: 100,
            seed: 1,
            replica: 0,
            distances: None,
            k_list: None,
            site: None,
            s_range: None,
            epsilon_grid: None,
            window_sizes: None,
            paths_per_replica: 4,
            pairs_per_replica: 50,
            mu_n: None,
            mu_hat: None,
            c_grid: None,
            axis1: Coupling::Lambda,
            values1: vec![0.0, 0.5, 1.0],
            axis2: Coupling::HTilde,
            values2: vec![0.0, 0.5, 1.0],
            selftest_instances: 50,
            selftest_n_max: 7,
        }
    }
}

/// Values given on the command line; `None` leaves the file value alone.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub n: Option<usize>,
    pub ladder: Option<Vec<usize>>,
    pub lambda: Option<f64>,
    pub h: Option<f64>,
    pub lambda_tilde: Option<f64>,
    pub h_tilde: Option<f64>,
    /// Raw `key=value` pairs; the value is parsed as JSON, else taken as a string.
    pub set: Vec<String>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<RunConfig, CliError> {
        let mut map = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?;
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(m)) => m,
                    Ok(_) => return Err(config_err("config file must hold a JSON object")),
                    Err(e) => return Err(config_err(format!("{}: {e}", p.display()))),
                }
            }
            None => Map::new(),
        };
        for kv in &ov.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| config_err(format!("--set expects key=value, got {kv:?}")))?;
            let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
            map.insert(k.trim().to_string(), value);
        }
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                map.insert(k.to_string(), v);
            }
        };
        put("seed", ov.seed.map(Value::from));
        put("replicas", ov.replicas.map(Value::from));
        put("n", ov.n.map(Value::from));
        put("n_ladder", ov.ladder.clone().map(Value::from));
        put("lambda", ov.lambda.map(Value::from));
        put("h", ov.h.map(Value::from));
        put("lambda_tilde", ov.lambda_tilde.map(Value::from));
        put("h_tilde", ov.h_tilde.map(Value::from));
        let cfg: RunConfig =
            serde_json::from_value(Value::Object(map)).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn params(&self) -> ModelParams {
        ModelParams::new(self.lambda, self.h, self.lambda_tilde, self.h_tilde)
    }

    pub fn ensemble(&self) -> Ensemble {
        Ensemble::new(self.params(), self.replicas, self.seed)
            .with_kernel(self.kernel, self.alpha)
            .with_laws(self.omega_law, self.omega_tilde_law)
    }

    /// Shape checks that need no computation. Budget limits are checked
    /// per command.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params()
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        if self.n == 0 {
            return Err(config_err("n must be >= 1"));
        }
        if self.replicas < 2 {
            return Err(config_err("replicas must be >= 2"));
        }
        if let Some(l) = &self.n_ladder {
            if l.is_empty() || l[0] == 0 || l.windows(2).any(|w| w[0] >= w[1]) {
                return Err(config_err(format!(
                    "n_ladder must be positive and strictly increasing: {l:?}"
                )));
            }
        }
        if self.kernel == KernelKind::PowerLaw && !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return Err(config_err("power-law kernel needs alpha > 1"));
        }
        if let Some(e) = &self.epsilon_grid {
            if e.is_empty() || e.iter().any(|x| !x.is_finite()) {
                return Err(config_err("epsilon_grid must be non-empty and finite"));
            }
        }
        if self
            .values1
            .iter()
            .chain(&self.values2)
            .any(|x| !x.is_finite())
        {
            return Err(config_err("scan values must be finite"));
        }
        if matches!(self.mu_hat, Some(m) if !(m > 0.0 && m.is_finite())) {
            return Err(config_err("mu_hat must be positive"));
        }
        Ok(())
    }

    /// Explicit ladder, else `default`.
    pub fn ladder_or(&self, default: Vec<usize>) -> Vec<usize> {
        self.n_ladder.clone().unwrap_or(default)
    }

    /// Fixed-order JSON used for hashing and the manifest echo.
    pub fn canonical_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// First 16 hex digits of SHA-256 over command, config and tool version.
    pub fn run_id(&self, command: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(command.as_bytes());
        hasher.update(b"\n");
        hasher.update(self.canonical_json().to_string().as_bytes());
        hasher.update(b"\n");
        hasher.update(env!("CARGO_PKG_VERSION").as_bytes());
        hex::encode(&hasher.finalize()[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"n": 64, "seed": 3, "lambda": 0.5}"#).unwrap();
        let ov = Overrides {
            seed: Some(9),
            set: vec!["h=0.25".into()],
            ..Default::default()
        };
        let c = RunConfig::load(Some(&path), &ov).unwrap();
        assert_eq!((c.n, c.seed, c.lambda, c.h), (64, 9, 0.5, 0.25));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let ov = Overrides {
            set: vec!["lambdaa=1".into()],
            ..Default::default()
        };
        assert!(matches!(
            RunConfig::load(None, &ov),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn run_id_tracks_every_field() {
        let base = RunConfig::default();
        let id = base.run_id("mu");
        assert_eq!(id, base.clone().run_id("mu"));
        assert_ne!(id, base.run_id("clt"));
        let mut c = base.clone();
        c.seed += 1;
        assert_ne!(id, c.run_id("mu"));
        let mut c = base.clone();
        c.h_tilde = 0.5000001;
        assert_ne!(id, c.run_id("mu"));
        let mut c = base;
        c.omega_law = DisorderLaw::Rademacher;
        assert_ne!(id, c.run_id("mu"));
    }

    #[test]
    fn string_values_parse_as_enums() {
        let ov = Overrides {
            set: vec![
                "kernel=power_law".into(),
                "axis1=h".into(),
                "omega_law=zero".into(),
            ],
            ..Default::default()
        };
        let c = RunConfig::load(None, &ov).unwrap();
        assert_eq!(c.kernel, KernelKind::PowerLaw);
        assert_eq!(c.axis1, Coupling::H);
        assert_eq!(c.omega_law, DisorderLaw::Zero);
    }
}
