use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelKind;
use crate::codec::ProductAeSpec;
use crate::error::{Error, Result};
use crate::eval::ExperimentPlan;
use crate::training::TrainConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    /// Directory for checkpoints, history and curves.
    #[serde(default)]
    pub dir: Option<String>,
}

/// Everything one command needs, as one JSON document. Unknown keys are
/// rejected; every optional field has an explicit default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spec: ProductAeSpec,
    pub train: TrainConfig,
    pub channel: ChannelKind,
    #[serde(default)]
    pub experiment: Option<ExperimentPlan>,
    #[serde(default)]
    pub output: OutputPaths,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::Config(format!("{}: {j}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.train.validate(self.spec.iterations)?;
        if let Some(plan) = &self.experiment {
            plan.validate()?;
        }
        Ok(())
    }
}
