use serde::{Deserialize, Serialize};
use thiserror::Error;
use venuetrace_core::risk::{DecayParams, ThresholdTable};
use venuetrace_ledger::federated::FederatedConfig;
use venuetrace_ledger::silo::ClusterConfig;

use crate::pow::PowParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    pub silos: ClusterConfig,
    pub federated: FederatedConfig,
    pub thresholds: ThresholdTable,
    pub decay: DecayParams,
    pub pow: PowParams,
    pub session_ttl_secs: i64,
    /// Credentials that unlock the Investigator role.
    pub investigator_credentials: Vec<String>,
    /// Credentials that unlock the Researcher role.
    pub researcher_credentials: Vec<String>,
    /// Exposure probability of a scan whose questionnaire was never answered.
    pub unanswered_probability: f64,
    /// Seeds nonces, tokens and handles; `None` draws from the OS.
    pub rng_seed: Option<u64>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1".into(),
            port: 8080,
            silos: ClusterConfig::default(),
            federated: FederatedConfig::default(),
            thresholds: ThresholdTable::default(),
            decay: DecayParams::default(),
            pow: PowParams::default(),
            session_ttl_secs: 3600,
            investigator_credentials: Vec::new(),
            researcher_credentials: Vec::new(),
            unanswered_probability: 0.10,
            rng_seed: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config does not parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ServiceConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.thresholds.validate().map_err(|e| invalid(&e))?;
        self.decay.validate().map_err(|e| invalid(&e))?;
        self.pow.validate().map_err(|e| invalid(&e))?;
        self.silos.net.validate().map_err(|e| invalid(&e))?;
        if self.silos.n_silos == 0 {
            return Err(ConfigError::Invalid("silos.n_silos must be positive".into()));
        }
        if self.session_ttl_secs <= 0 {
            return Err(ConfigError::Invalid("session_ttl_secs must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.unanswered_probability) {
            return Err(ConfigError::Invalid("unanswered_probability must lie in [0, 1]".into()));
        }
        if self.federated.k_min == 0 {
            return Err(ConfigError::Invalid("federated.k_min must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = ServiceConfig { port: 9000, investigator_credentials: vec!["s3cret".into()], ..Default::default() };
        assert_eq!(ServiceConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_toml_keeps_defaults() {
        let cfg = ServiceConfig::from_toml("port = 1234\n[silos]\nn_silos = 2\n").unwrap();
        assert_eq!(cfg.port, 1234);
        assert_eq!(cfg.silos.n_silos, 2);
        assert_eq!(cfg.pow, PowParams::default());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ServiceConfig::from_toml("unanswered_probability = 1.5").is_err());
        assert!(ServiceConfig::from_toml("[silos]\nn_silos = 0").is_err());
        assert!(ServiceConfig::from_toml("[pow]\nd_min = 30").is_err());
        assert!(ServiceConfig::from_toml("[silos.net]\nn_nodes = 3\nf_byzantine = 1").is_err());
    }
}
