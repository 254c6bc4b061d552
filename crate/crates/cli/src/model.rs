//! Model file loading: the JSON schema for a world model and its conversion
//! into validated core types.

use std::path::Path;

use serde::{Deserialize, Serialize};

use covmatch_core::prob::{Channel, CovariateSpace, Distribution, WorldModel};

use crate::commands::CliError;

/// On-disk world model. Probability vectors are accepted within a 1e-9
/// normalization tolerance and renormalized exactly on load; the raw values
/// are kept for byte-faithful echoing in reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Metadata>,
    pub labels: Vec<String>,
    pub probe_prior: Vec<f64>,
    pub imposter_prior: Vec<f64>,
    pub probe_channel: Vec<Vec<f64>>,
    pub gallery_channel: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Io(format!("cannot read model file {}: {e}", path.display())))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Schema(format!("model file {}: {e}", path.display())))
    }

    /// Validate and build the core model. Invariant violations surface as
    /// schema errors naming the failing component.
    pub fn to_world_model(&self) -> Result<WorldModel, CliError> {
        let space = CovariateSpace::new(self.labels.iter().cloned())
            .map_err(|e| CliError::Schema(format!("labels: {e}")))?;
        let probe_prior = Distribution::new(&space, self.probe_prior.clone())
            .map_err(|e| CliError::Schema(format!("probe_prior: {e}")))?;
        let imposter_prior = Distribution::new(&space, self.imposter_prior.clone())
            .map_err(|e| CliError::Schema(format!("imposter_prior: {e}")))?;
        let probe_channel = Channel::new(&space, self.probe_channel.clone())
            .map_err(|e| CliError::Schema(format!("probe_channel: {e}")))?;
        let gallery_channel = Channel::new(&space, self.gallery_channel.clone())
            .map_err(|e| CliError::Schema(format!("gallery_channel: {e}")))?;
        WorldModel::new(probe_prior, imposter_prior, probe_channel, gallery_channel)
            .map_err(|e| CliError::Schema(format!("model: {e}")))
    }

    pub fn name(&self) -> Option<&str> {
        self.metadata.as_ref().and_then(|m| m.name.as_deref())
    }
}
