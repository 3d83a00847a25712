//! Pipeline configuration: one TOML file plus `F2S_*` environment overrides.
//!
//! Every field has a default, so an absent file or an empty one is a valid
//! configuration. The API key is intentionally *not* a file field — it is
//! read only from the `F2S_API_KEY` environment variable so configs can be
//! committed without leaking credentials.
//!
//! Prompt templates ship embedded in the binary; a config may point any of
//! them at an external file (resolved relative to the config file's
//! directory) to experiment with different wording.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::HttpGatewayConfig;
use crate::losses::LossConfig;
use crate::pairing::JudgeConfig;
use crate::prompt::PromptTemplate;
use crate::sandbox::{ComparePolicy, ExecLimits, ToolchainConfig};
use crate::styleforge::StyleDataConfig;

/// Default prompt wording, compiled in so a bare binary works with no files.
pub const JUDGE_TEMPLATE: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../templates/judge.txt"));
pub const STYLE_AWARE_TEMPLATE: &str = include_str!(concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/../../templates/style_aware.txt"
));
pub const TRANSLATION_TEMPLATE: &str = include_str!(concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/../../templates/translation.txt"
));

/// Environment variable holding the gateway bearer token.
pub const API_KEY_VAR: &str = "F2S_API_KEY";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("environment override {var} is invalid: {message}")]
    Env { var: String, message: String },
    #[error("{role} template file not found: {path}")]
    MissingTemplate { role: &'static str, path: String },
}

/// Gateway connection settings (everything except the API key).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewaySettings {
    /// Completion endpoint; unset disables live completion calls.
    pub completion_url: Option<String>,
    /// Embedding endpoint; unset disables live embedding calls.
    pub embedding_url: Option<String>,
    pub model: String,
    pub embedding_model: String,
    /// Total attempts per request, first try included.
    pub max_attempts: u32,
    /// Base backoff in milliseconds; attempt `i` sleeps `backoff · 2^(i−1)`.
    pub backoff_ms: u64,
    /// Maximum concurrent in-flight requests.
    pub max_in_flight: usize,
    pub timeout_secs: u64,
    /// Alternatives requested per position when scoring labels.
    pub label_top_logprobs: u32,
    /// Recorded responses for the mock gateway (optional).
    pub mock_fixtures: Option<PathBuf>,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        let http = HttpGatewayConfig::default();
        Self {
            completion_url: None,
            embedding_url: None,
            model: "code-model".into(),
            embedding_model: "embed-model".into(),
            max_attempts: http.max_attempts,
            backoff_ms: http.backoff.as_millis() as u64,
            max_in_flight: http.max_in_flight,
            timeout_secs: http.timeout.as_secs(),
            label_top_logprobs: http.label_top_logprobs,
            mock_fixtures: None,
        }
    }
}

impl GatewaySettings {
    /// Materializes the live-backend config; the key comes from the caller
    /// (read via [`PipelineConfig::api_key`], never from the file).
    #[must_use]
    pub fn http_config(&self, api_key: Option<String>) -> HttpGatewayConfig {
        HttpGatewayConfig {
            completion_url: self.completion_url.clone(),
            embedding_url: self.embedding_url.clone(),
            model: self.model.clone(),
            embedding_model: self.embedding_model.clone(),
            api_key,
            max_attempts: self.max_attempts,
            backoff: Duration::from_millis(self.backoff_ms),
            max_in_flight: self.max_in_flight,
            timeout: Duration::from_secs(self.timeout_secs),
            label_top_logprobs: self.label_top_logprobs,
        }
    }
}

/// Optional external template files; unset roles use the embedded wording.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemplatePaths {
    pub judge: Option<PathBuf>,
    pub style_aware: Option<PathBuf>,
    pub translation: Option<PathBuf>,
}

/// The three loaded prompt templates.
#[derive(Debug, Clone)]
pub struct Templates {
    pub judge: PromptTemplate,
    pub style_aware: PromptTemplate,
    pub translation: PromptTemplate,
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            judge: PromptTemplate::from_text(JUDGE_TEMPLATE),
            style_aware: PromptTemplate::from_text(STYLE_AWARE_TEMPLATE),
            translation: PromptTemplate::from_text(TRANSLATION_TEMPLATE),
        }
    }
}

/// Top-level configuration for every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Drives mock synthesis and all sampling order.
    pub seed: u64,
    /// Worker threads; 0 keeps the library default (one per core).
    pub jobs: usize,
    /// Judge acceptance threshold: pairs whose expected score falls below
    /// this are dropped. 3 is the scale's "mostly similar" midpoint.
    pub min_judge_score: f64,
    pub judge: JudgeConfig,
    pub style: StyleDataConfig,
    pub loss: LossConfig,
    pub limits: ExecLimits,
    #[serde(default = "default_compare")]
    pub compare: ComparePolicy,
    /// Per-language command overrides, merged over the built-in defaults.
    pub toolchains: ToolchainConfig,
    pub gateway: GatewaySettings,
    pub templates: TemplatePaths,
    /// Directory external template paths resolve against (the config file's
    /// directory). Not part of the file format.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_compare() -> ComparePolicy {
    ComparePolicy::Exact
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 0,
            min_judge_score: 3.0,
            judge: JudgeConfig::default(),
            style: StyleDataConfig::default(),
            loss: LossConfig::default(),
            limits: ExecLimits::default(),
            compare: default_compare(),
            toolchains: ToolchainConfig::default(),
            gateway: GatewaySettings::default(),
            templates: TemplatePaths::default(),
            base_dir: None,
        }
    }
}

impl PipelineConfig {
    /// Loads a TOML file, or the defaults when `path` is `None`. Environment
    /// overrides are *not* applied here; call [`Self::apply_env`].
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let mut config: PipelineConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        config.base_dir = path.parent().map(Path::to_path_buf);
        Ok(config)
    }

    /// Applies `F2S_*` environment overrides. `lookup` abstracts
    /// `std::env::var` so tests never mutate process state.
    pub fn apply_env(
        &mut self,
        lookup: impl Fn(&str) -> Option<String>,
    ) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(var: &str, raw: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            raw.parse().map_err(|e| ConfigError::Env {
                var: var.into(),
                message: format!("{e} (value {raw:?})"),
            })
        }
        if let Some(raw) = lookup("F2S_SEED") {
            self.seed = parse("F2S_SEED", &raw)?;
        }
        if let Some(raw) = lookup("F2S_JOBS") {
            self.jobs = parse("F2S_JOBS", &raw)?;
        }
        if let Some(raw) = lookup("F2S_MIN_JUDGE_SCORE") {
            self.min_judge_score = parse("F2S_MIN_JUDGE_SCORE", &raw)?;
        }
        if let Some(raw) = lookup("F2S_COMPLETION_URL") {
            self.gateway.completion_url = Some(raw);
        }
        if let Some(raw) = lookup("F2S_EMBEDDING_URL") {
            self.gateway.embedding_url = Some(raw);
        }
        if let Some(raw) = lookup("F2S_MODEL") {
            self.gateway.model = raw;
        }
        if let Some(raw) = lookup("F2S_EMBEDDING_MODEL") {
            self.gateway.embedding_model = raw;
        }
        if let Some(raw) = lookup("F2S_MOCK_FIXTURES") {
            self.gateway.mock_fixtures = Some(PathBuf::from(raw));
        }
        Ok(())
    }

    /// The bearer token, environment-only by design.
    pub fn api_key(lookup: impl Fn(&str) -> Option<String>) -> Option<String> {
        lookup(API_KEY_VAR).filter(|k| !k.trim().is_empty())
    }

    /// Resolves a configured path against the config file's directory.
    #[must_use]
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            return path.to_path_buf();
        }
        match &self.base_dir {
            Some(base) => base.join(path),
            None => path.to_path_buf(),
        }
    }

    /// Checks every sub-config and the existence of referenced templates.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.judge
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.style
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.loss
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.limits
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !self.min_judge_score.is_finite() {
            return Err(ConfigError::Invalid(format!(
                "min_judge_score {} must be finite",
                self.min_judge_score
            )));
        }
        let roles: [(&'static str, &Option<PathBuf>); 3] = [
            ("judge", &self.templates.judge),
            ("style_aware", &self.templates.style_aware),
            ("translation", &self.templates.translation),
        ];
        for (role, path) in roles {
            if let Some(path) = path {
                let resolved = self.resolve(path);
                if !resolved.is_file() {
                    return Err(ConfigError::MissingTemplate {
                        role,
                        path: resolved.display().to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Loads the three prompt templates (external files when configured,
    /// embedded text otherwise).
    pub fn load_templates(&self) -> Result<Templates, ConfigError> {
        let load = |role: &'static str,
                    path: &Option<PathBuf>,
                    embedded: &str|
         -> Result<PromptTemplate, ConfigError> {
            match path {
                Some(path) => {
                    let resolved = self.resolve(path);
                    PromptTemplate::load(&resolved).map_err(|_| ConfigError::MissingTemplate {
                        role,
                        path: resolved.display().to_string(),
                    })
                }
                None => Ok(PromptTemplate::from_text(embedded)),
            }
        };
        Ok(Templates {
            judge: load("judge", &self.templates.judge, JUDGE_TEMPLATE)?,
            style_aware: load(
                "style_aware",
                &self.templates.style_aware,
                STYLE_AWARE_TEMPLATE,
            )?,
            translation: load(
                "translation",
                &self.templates.translation,
                TRANSLATION_TEMPLATE,
            )?,
        })
    }

    /// File-configured toolchains merged over the built-in defaults.
    #[must_use]
    pub fn effective_toolchains(&self) -> ToolchainConfig {
        self.toolchains.clone().merged_over(ToolchainConfig::defaults())
    }

    /// Serializes back to TOML (used by the demo generator).
    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string_pretty(self).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

/// Convenience for tests and `apply_env` callers: a lookup over a fixed map.
pub fn env_from_map(map: BTreeMap<String, String>) -> impl Fn(&str) -> Option<String> {
    move |key| map.get(key).cloned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Language;
    use crate::pairing::JudgeMode;

    #[test]
    fn defaults_are_paper_scale() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.judge.k, 5);
        assert_eq!(cfg.judge.recall_k, 10);
        assert_eq!(cfg.style.m, 10);
        assert_eq!(cfg.style.n, 10);
        assert!((cfg.style.alpha - 0.8).abs() < 1e-12);
        assert!((cfg.style.temperature - 0.7).abs() < 1e-12);
        assert!((cfg.loss.beta - 0.6).abs() < 1e-12);
        assert!((cfg.min_judge_score - 3.0).abs() < 1e-12);
        cfg.validate().unwrap();
    }

    #[test]
    fn toml_round_trip_preserves_everything() {
        let mut cfg = PipelineConfig {
            seed: 42,
            jobs: 4,
            min_judge_score: 2.5,
            ..Default::default()
        };
        cfg.judge.k = 7;
        cfg.style.alpha = 0.65;
        cfg.compare = ComparePolicy::NumericEpsilon(1e-6);
        cfg.gateway.completion_url = Some("http://localhost:9/v1/completions".into());
        let text = cfg.to_toml().unwrap();
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn empty_and_partial_files_fall_back_to_defaults() {
        let empty: PipelineConfig = toml::from_str("").unwrap();
        assert_eq!(empty, PipelineConfig::default());

        let partial: PipelineConfig = toml::from_str(
            "seed = 9\n[judge]\nk = 3\nmode = \"explicit\"\n",
        )
        .unwrap();
        assert_eq!(partial.seed, 9);
        assert_eq!(partial.judge.k, 3);
        assert_eq!(partial.judge.mode, JudgeMode::Explicit);
        assert_eq!(partial.judge.recall_k, 10, "unset fields keep defaults");
        assert_eq!(partial.style, StyleDataConfig::default());
    }

    #[test]
    fn load_resolves_relative_template_paths() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("my_judge.txt"), "judge {SOURCE_CODE}").unwrap();
        let config_path = dir.path().join("config.toml");
        std::fs::write(&config_path, "[templates]\njudge = \"my_judge.txt\"\n").unwrap();

        let cfg = PipelineConfig::load(Some(&config_path)).unwrap();
        cfg.validate().unwrap();
        let templates = cfg.load_templates().unwrap();
        assert_eq!(templates.judge.text(), "judge {SOURCE_CODE}");
        // The other two roles fall back to the embedded wording.
        assert!(templates.translation.text().contains("{SOURCE_CODE}"));
    }

    #[test]
    fn missing_template_file_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("config.toml");
        std::fs::write(&config_path, "[templates]\njudge = \"nope.txt\"\n").unwrap();
        let cfg = PipelineConfig::load(Some(&config_path)).unwrap();
        match cfg.validate().unwrap_err() {
            ConfigError::MissingTemplate { role, .. } => assert_eq!(role, "judge"),
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn env_overrides_apply_and_reject_garbage() {
        let mut cfg = PipelineConfig::default();
        let vars = BTreeMap::from([
            ("F2S_SEED".to_string(), "777".to_string()),
            ("F2S_JOBS".to_string(), "2".to_string()),
            ("F2S_MIN_JUDGE_SCORE".to_string(), "2.25".to_string()),
            ("F2S_MODEL".to_string(), "other-model".to_string()),
            (
                "F2S_COMPLETION_URL".to_string(),
                "http://localhost:1/v1".to_string(),
            ),
        ]);
        cfg.apply_env(env_from_map(vars)).unwrap();
        assert_eq!(cfg.seed, 777);
        assert_eq!(cfg.jobs, 2);
        assert!((cfg.min_judge_score - 2.25).abs() < 1e-12);
        assert_eq!(cfg.gateway.model, "other-model");
        assert_eq!(
            cfg.gateway.completion_url.as_deref(),
            Some("http://localhost:1/v1")
        );

        let bad = BTreeMap::from([("F2S_SEED".to_string(), "not-a-number".to_string())]);
        match cfg.apply_env(env_from_map(bad)).unwrap_err() {
            ConfigError::Env { var, .. } => assert_eq!(var, "F2S_SEED"),
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn api_key_is_environment_only() {
        // The config format has no api_key field at all.
        let text = PipelineConfig::default().to_toml().unwrap();
        assert!(!text.contains("api_key"));

        let vars = BTreeMap::from([(API_KEY_VAR.to_string(), "sk-test".to_string())]);
        assert_eq!(
            PipelineConfig::api_key(env_from_map(vars)).as_deref(),
            Some("sk-test")
        );
        assert_eq!(PipelineConfig::api_key(|_| None), None);
        let blank = BTreeMap::from([(API_KEY_VAR.to_string(), "  ".to_string())]);
        assert_eq!(PipelineConfig::api_key(env_from_map(blank)), None);
    }

    #[test]
    fn toolchain_overrides_merge_over_defaults() {
        let cfg: PipelineConfig = toml::from_str(
            "[toolchains.python]\nrun = [\"python3.11\", \"{src}\"]\n",
        )
        .unwrap();
        let merged = cfg.effective_toolchains();
        assert_eq!(
            merged.get(Language::Python).unwrap().run[0],
            "python3.11",
            "override wins"
        );
        assert!(merged.get(Language::C).is_some(), "defaults retained");
    }

    #[test]
    fn embedded_templates_have_the_required_placeholders() {
        let t = Templates::default();
        for ph in ["SOURCE_LANG", "TARGET_LANG", "SOURCE_CODE", "TARGET_CODE"] {
            assert!(t.judge.placeholders().contains(ph), "judge lacks {ph}");
        }
        for ph in ["SOURCE_LANG", "TARGET_LANG", "SOURCE_CODE"] {
            assert!(
                t.style_aware.placeholders().contains(ph),
                "style_aware lacks {ph}"
            );
            assert!(
                t.translation.placeholders().contains(ph),
                "translation lacks {ph}"
            );
        }
    }

    #[test]
    fn compare_policy_toml_forms() {
        let exact: PipelineConfig =
            toml::from_str("[compare]\nmode = \"exact\"\n").unwrap();
        assert_eq!(exact.compare, ComparePolicy::Exact);
        let eps: PipelineConfig =
            toml::from_str("[compare]\nmode = \"numeric_epsilon\"\nepsilon = 1e-6\n").unwrap();
        assert_eq!(eps.compare, ComparePolicy::NumericEpsilon(1e-6));
    }
}
