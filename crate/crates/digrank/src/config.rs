//! Run configuration: one JSON document covering every stage, plus a content
//! digest that ties artifacts to the configuration that produced them.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lm::http::HttpLmConfig;
use crate::lm::MockLmSpec;
use crate::pipeline::PipelineConfig;
use crate::world::WorldSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderConfig {
    Mock(MockLmSpec),
    Http(HttpLmConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub world: WorldSpec,
    pub provider: ProviderConfig,
    pub pipeline: PipelineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            world: WorldSpec::default(),
            provider: ProviderConfig::Mock(crate::world::mock_spec_for_world()),
            pipeline: PipelineConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        if let ProviderConfig::Mock(spec) = &self.provider {
            spec.validate()?;
        }
        self.pipeline.train.validate()?;
        self.pipeline.infer.validate()?;
        self.pipeline.dataset.validate()?;
        self.pipeline.collect.confidence.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Hex digest over the canonical serialization.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = RunConfig::default();
        let b = RunConfig::default();
        assert_eq!(a.digest(), b.digest());
        let mut c = RunConfig::default();
        c.world.n_queries += 1;
        assert_ne!(a.digest(), c.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        let cfg = RunConfig::default();
        cfg.save(&path).unwrap();
        let loaded = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.digest(), loaded.digest());
    }

    #[test]
    fn unknown_keys_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        let mut v = serde_json::to_value(RunConfig::default()).unwrap();
        v["wrold"] = serde_json::json!({});
        std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
        let err = RunConfig::load(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.json"), "{msg}");
        assert!(msg.contains("wrold"), "{msg}");
    }
}
