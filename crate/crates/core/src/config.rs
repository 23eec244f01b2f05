//! Run configuration, loaded from TOML on top of built-in defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::{FeasibilityConfig, RejectionConfig};
use crate::error::{Error, Result};
use crate::events::SamplerConfig;
use crate::ik::{CopMode, IkParams, TaskWeights};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub seed: u64,
    /// Also write the binary frame encoding next to the JSON lines file.
    pub binary: bool,
    pub cop: CopMode,
    pub sampler: SamplerConfig,
    pub ik: IkParams,
    pub weights: TaskWeights,
    pub feasibility: FeasibilityConfig,
    pub rejection: RejectionConfig,
}

impl AugmentConfig {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        let cfg: AugmentConfig = toml::from_str(text).map_err(|e| Error::parse(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        self.ik.validate()?;
        self.feasibility.validate()?;
        self.rejection.validate()?;
        let w = &self.weights;
        for v in [
            w.compliant_interaction,
            w.foot_placement,
            w.com_stabilization,
            w.keypoint_posture,
            w.joint_posture,
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "task weights must be positive: {w:?}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_overrides_defaults() {
        let text = "seed = 7\n[sampler]\nk_t = [50.0, 500.0]\n";
        let cfg = AugmentConfig::from_toml_str(text, Path::new("x.toml")).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.sampler.k_t, [50.0, 500.0]);
        assert_eq!(cfg.sampler.k_r, [0.1, 10.0]);
        assert_eq!(cfg.ik, IkParams::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = AugmentConfig::default();
        let back =
            AugmentConfig::from_toml_str(&cfg.to_toml_string(), Path::new("x.toml")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(AugmentConfig::from_toml_str("sed = 1\n", Path::new("x.toml")).is_err());
        assert!(
            AugmentConfig::from_toml_str("[ik]\ndamping = -1.0\n", Path::new("x.toml")).is_err()
        );
    }
}
