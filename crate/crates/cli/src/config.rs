use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use kdistill_core::corpus::SplitSpec;
use kdistill_core::metrics::EvalMode;
use kdistill_core::teacher::EndpointConfig;
use kdistill_core::validate::{policy, semantic};
use kdistill_core::ContextModel;
use serde::Deserialize;

pub const DEFAULT_SCHEMA_CACHE: &str = "schemas/kubernetes-1.30.0";

/// Contents of the optional TOML config file. Every key may be omitted.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub schema_cache: Option<PathBuf>,
    pub kubernetes_version: Option<String>,
    pub out: Option<PathBuf>,
    pub teacher: EndpointConfig,
    pub split: Option<SplitSpec>,
    pub eval: Option<EvalMode>,
    pub disabled_rules: Vec<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Settings after merging flags, environment and the config file.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub schema_cache: PathBuf,
    pub kubernetes_version: String,
    pub teacher: EndpointConfig,
    pub split: SplitSpec,
    pub eval: EvalMode,
    pub disabled_rules: Vec<String>,
}

pub const DEFAULT_SPLIT: SplitSpec = SplitSpec {
    train_size: 1200,
    validation_size: 100,
    test_size: 200,
    seed: 20240917,
    stratified: false,
};

impl PipelineConfig {
    pub fn resolve(file: FileConfig, schema_cache: Option<PathBuf>) -> anyhow::Result<Self> {
        let schema_cache = schema_cache
            .or(file.schema_cache)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_SCHEMA_CACHE));
        if !schema_cache.is_dir() {
            bail!("schema cache {} does not exist", schema_cache.display());
        }
        let known: Vec<&str> = semantic::RULES.iter().chain(&policy::CRITICAL_POLICIES).copied().collect();
        if let Some(bad) = file.disabled_rules.iter().find(|r| !known.contains(&r.as_str())) {
            bail!("disabled_rules names unknown rule {bad:?} (known: {})", known.join(", "));
        }
        let eval = file.eval.unwrap_or_default();
        if eval.max_new_tokens == 0 {
            bail!("eval.max_new_tokens must be positive");
        }
        Ok(Self {
            schema_cache,
            kubernetes_version: file.kubernetes_version.unwrap_or_else(|| "1.30.0".into()),
            teacher: file.teacher,
            split: file.split.unwrap_or(DEFAULT_SPLIT),
            eval,
            disabled_rules: file.disabled_rules,
        })
    }

    pub fn context_model(&self) -> anyhow::Result<ContextModel> {
        let cm = ContextModel::load_default(&self.schema_cache)?;
        if cm.kubernetes_version() != self.kubernetes_version {
            bail!(
                "schema cache targets Kubernetes {} but the config asks for {}",
                cm.kubernetes_version(),
                self.kubernetes_version
            );
        }
        Ok(cm.without(&self.disabled_rules))
    }
}
