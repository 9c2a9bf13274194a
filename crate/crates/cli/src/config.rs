use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _};
use evhc::hosting::{FleetKind, HostingConfig, SearchConfig};
use evhc::ingest::{load_feeder, synth_feeder, FeederDataset, SynthSpec};
use evhc::model::Formulation;
use evhc::par::ExecMode;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Resolved settings of one invocation, echoed into every output directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub feeder: Option<PathBuf>,
    pub synth: Option<usize>,
    /// Generator settings used with `synth`; the count comes from `synth`.
    pub synth_spec: SynthSpec,
    pub arrangements: Vec<FleetKind>,
    pub formulations: Vec<Formulation>,
    pub hosting: HostingConfig,
    pub search: SearchConfig,
    pub exec: ExecMode,
    pub jobs: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            feeder: None,
            synth: None,
            synth_spec: SynthSpec::default(),
            arrangements: FleetKind::ALL.to_vec(),
            formulations: vec![Formulation::Robust],
            hosting: HostingConfig::default(),
            search: SearchConfig::default(),
            exec: ExecMode::default(),
            jobs: 0,
            out: PathBuf::from("evhc-out"),
        }
    }
}

impl RunConfig {
    /// Lays the TOML document at `path` over `self`; keys in the file win.
    pub fn overlay_file(self, path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        self.overlay_toml(&text)
            .with_context(|| format!("config {}", path.display()))
    }

    pub fn overlay_toml(self, text: &str) -> anyhow::Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| usage(e.to_string()))?;
        let mut merged = serde_json::to_value(&self)?;
        deep_merge(&mut merged, serde_json::to_value(table)?);
        serde_json::from_value(merged).map_err(|e| usage(format!("invalid config: {e}")).into())
    }

    pub fn validate(&self, needs_source: bool) -> anyhow::Result<()> {
        if needs_source {
            match (&self.feeder, self.synth) {
                (Some(_), Some(_)) => bail!(usage("give either --feeder or --synth, not both")),
                (None, None) => bail!(usage(
                    "a feeder is required: pass --feeder FILE or --synth N"
                )),
                (None, Some(0)) => bail!(usage("--synth needs at least one transformer")),
                _ => {}
            }
        }
        if self.arrangements.is_empty() {
            bail!(usage("at least one arrangement is required"));
        }
        if self.formulations.is_empty() {
            bail!(usage("at least one formulation is required"));
        }
        self.hosting.validate()?;
        Ok(())
    }

    pub fn load_feeder(&self) -> anyhow::Result<FeederDataset> {
        if let Some(path) = &self.feeder {
            return Ok(load_feeder(path)?);
        }
        let spec = SynthSpec {
            transformer_count: self.synth.unwrap_or(self.synth_spec.transformer_count),
            ..self.synth_spec.clone()
        };
        Ok(synth_feeder(&spec)?)
    }
}

/// Configuration mistake reported with the usage exit code.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

fn deep_merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
