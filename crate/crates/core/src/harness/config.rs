use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversary::{InjectMode, Policy};
use crate::env::Params;
use crate::error::{Error, Result};
use crate::object::CoreKind;

/// Scenario description. The JSON form is a flat object whose keys match
/// the CLI flags (`log_size` or `log-size`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub n: usize,
    pub t: usize,
    #[serde(alias = "log-size")]
    pub log_size: usize,
    #[serde(alias = "index-num")]
    pub index_num: usize,
    /// `None` selects the default cycle length.
    pub kappa: Option<u64>,
    pub rounds: u64,
    pub trials: usize,
    /// Seed of trial 0; trial `k` uses `seed + k`.
    pub seed: u64,
    pub adversary: Policy,
    pub inject: InjectMode,
    pub core: CoreKind,
    /// Largest decision delay of the delay stub, in rounds.
    pub dmax: u32,
    /// Number of Byzantine nodes; `None` means `t`.
    pub byz: Option<usize>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            n: 4,
            t: 1,
            log_size: 3,
            index_num: 8,
            kappa: None,
            rounds: 500,
            trials: 1,
            seed: 0,
            adversary: Policy::Silent,
            inject: InjectMode::None,
            core: CoreKind::Stub,
            dmax: 2,
            byz: None,
        }
    }
}

impl Config {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(trial as u64)
    }

    pub fn params(&self, trial: usize) -> Params {
        let p = Params::new(
            self.n,
            self.t,
            self.index_num,
            self.log_size,
            self.trial_seed(trial),
        );
        match self.kappa {
            Some(k) => p.with_kappa(k),
            None => p,
        }
    }

    pub fn byz_count(&self) -> usize {
        self.byz.unwrap_or(self.t)
    }

    pub fn validate(&self) -> Result<()> {
        self.params(0).validate()?;
        if self.byz_count() > self.t {
            return Err(Error::Config(format!(
                "byz={} exceeds the fault bound t={}",
                self.byz_count(),
                self.t
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_keys_accept_both_spellings() {
        let a =
            Config::from_json_str(r#"{"log_size": 2, "index-num": 6, "adversary": "worst-sig"}"#)
                .unwrap();
        assert_eq!(
            (a.log_size, a.index_num, a.adversary),
            (2, 6, Policy::WorstSig)
        );
        assert_eq!(a.n, 4);
        assert!(Config::from_json_str(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn validation_reports_parameter_and_fault_bounds() {
        assert!(Config::default().validate().is_ok());
        let bad = Config {
            n: 3,
            ..Config::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidParams(_))));
        let bad = Config {
            byz: Some(2),
            ..Config::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }
}
