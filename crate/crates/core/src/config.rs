//! Layered run configuration: defaults, then a TOML file, then `DOCTABLE_*`
//! environment variables, then command-line flags. Later layers win.
//!
//! The API credential is never a config value: the file or environment only
//! names the variable that holds it (`llm.api_key_env`, default
//! `DOCTABLE_API_KEY`), and the secret is read from the process environment
//! when the HTTP backend is built.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::SimilarityKind;
use crate::extraction::{Chunking, ExtractionConfig, OutputFormat};
use crate::gateway::{
    ChatBackend, Gateway, GatewayLimits, HttpBackend, RetryPolicy, ScriptedBackend,
};
use crate::synthesis::{AgentModels, SynthesisConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config file {path} is not valid TOML: {detail}")]
    Parse { path: PathBuf, detail: String },
    #[error("invalid value for {key}: {detail}")]
    Invalid { key: String, detail: String },
}

/// Fully resolved configuration every subcommand runs with.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub base_url: String,
    /// Model used wherever no per-agent override is set.
    pub default_model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    /// Scripted transcript file; set, it replaces the HTTP backend.
    pub transcript: Option<PathBuf>,
    pub request_timeout_secs: u64,
    pub requests_per_minute: Option<u32>,
    pub token_budget: Option<usize>,
    pub retry: RetryPolicy,
    pub agent_models: AgentModels,
    pub annotation_rounds: u32,
    pub evidence_retries: u32,
    pub plan_retries: u32,
    pub section_retries: u32,
    pub run_judge: bool,
    pub extraction: ExtractionConfig,
    pub tau: f64,
    pub similarity: SimilarityKind,
    pub parallelism: usize,
    /// Directory of prompt template overrides.
    pub prompts_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            base_url: "http://127.0.0.1:8080/v1".to_string(),
            default_model: "default".to_string(),
            api_key_env: "DOCTABLE_API_KEY".to_string(),
            transcript: None,
            request_timeout_secs: 120,
            requests_per_minute: None,
            token_budget: None,
            retry: RetryPolicy::default(),
            agent_models: AgentModels::uniform("default"),
            annotation_rounds: 3,
            evidence_retries: 3,
            plan_retries: 3,
            section_retries: 2,
            run_judge: false,
            extraction: ExtractionConfig::default(),
            tau: 0.85,
            similarity: SimilarityKind::NormalizedEdit,
            parallelism: 4,
            prompts_dir: None,
        }
    }
}

impl RunConfig {
    /// Defaults overlaid with a TOML file when one is given.
    pub fn load(path: Option<&Path>) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let file: FileConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.to_path_buf(),
                detail: e.to_string(),
            })?;
            cfg.apply_file(file)?;
        }
        Ok(cfg)
    }

    fn apply_file(&mut self, file: FileConfig) -> Result<(), ConfigError> {
        let FileConfig { llm, synthesis, extraction, eval, run } = file;
        if let Some(v) = llm.base_url {
            self.base_url = v;
        }
        if let Some(v) = llm.model {
            self.set_default_model(&v);
        }
        if let Some(v) = llm.api_key_env {
            self.api_key_env = v;
        }
        if let Some(v) = llm.transcript {
            self.transcript = Some(v);
        }
        if let Some(v) = llm.request_timeout_secs {
            self.request_timeout_secs = v;
        }
        if let Some(v) = llm.requests_per_minute {
            self.requests_per_minute = Some(v);
        }
        if let Some(v) = llm.token_budget {
            self.token_budget = Some(v);
        }
        if let Some(v) = llm.max_attempts {
            self.retry.max_attempts = v;
        }
        if let Some(v) = llm.base_delay_ms {
            self.retry.base_delay_ms = v;
        }
        if let Some(v) = llm.max_delay_ms {
            self.retry.max_delay_ms = v;
        }
        if let Some(v) = llm.jitter {
            self.retry.jitter = v;
        }
        if let Some(models) = llm.models {
            for (slot, value) in [
                (&mut self.agent_models.annotator, models.annotator),
                (&mut self.agent_models.refiner, models.refiner),
                (&mut self.agent_models.verifier, models.verifier),
                (&mut self.agent_models.planner, models.planner),
                (&mut self.agent_models.writer, models.writer),
                (&mut self.agent_models.judge, models.judge),
            ] {
                if let Some(v) = value {
                    *slot = v;
                }
            }
        }
        if let Some(v) = synthesis.annotation_rounds {
            self.annotation_rounds = v;
        }
        if let Some(v) = synthesis.evidence_retries {
            self.evidence_retries = v;
        }
        if let Some(v) = synthesis.plan_retries {
            self.plan_retries = v;
        }
        if let Some(v) = synthesis.section_retries {
            self.section_retries = v;
        }
        if let Some(v) = synthesis.judge {
            self.run_judge = v;
        }
        if let Some(v) = extraction.format {
            self.extraction.format = parse_format(&v)?;
        }
        if let Some(v) = extraction.chunking {
            self.extraction.chunking = parse_chunking(&v)?;
        }
        if let Some(v) = extraction.max_retries {
            self.extraction.max_retries = v;
        }
        if let Some(v) = eval.tau {
            self.tau = check_tau(v)?;
        }
        if let Some(v) = eval.similarity {
            self.similarity = parse_similarity(&v)?;
        }
        if let Some(v) = run.parallelism {
            self.parallelism = v.max(1);
        }
        if let Some(v) = run.prompts_dir {
            self.prompts_dir = Some(v);
        }
        Ok(())
    }

    /// Overlays `DOCTABLE_*` variables from the process environment.
    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        self.apply_env_from(|name| std::env::var(name).ok())
    }

    /// Same as [`RunConfig::apply_env`] with an injectable lookup, so the
    /// precedence chain is testable without touching the process
    /// environment.
    pub fn apply_env_from<F>(&mut self, get: F) -> Result<(), ConfigError>
    where
        F: Fn(&str) -> Option<String>,
    {
        if let Some(v) = get("DOCTABLE_BASE_URL") {
            self.base_url = v;
        }
        if let Some(v) = get("DOCTABLE_MODEL") {
            self.set_default_model(&v);
        }
        if let Some(v) = get("DOCTABLE_TRANSCRIPT") {
            self.transcript = Some(PathBuf::from(v));
        }
        if let Some(v) = get("DOCTABLE_RPM") {
            self.requests_per_minute = Some(parse_env("DOCTABLE_RPM", &v)?);
        }
        if let Some(v) = get("DOCTABLE_TOKEN_BUDGET") {
            self.token_budget = Some(parse_env::<usize>("DOCTABLE_TOKEN_BUDGET", &v)?);
        }
        if let Some(v) = get("DOCTABLE_TAU") {
            self.tau = check_tau(parse_env("DOCTABLE_TAU", &v)?)?;
        }
        if let Some(v) = get("DOCTABLE_SIMILARITY") {
            self.similarity = parse_similarity(&v)?;
        }
        if let Some(v) = get("DOCTABLE_PARALLELISM") {
            self.parallelism = parse_env::<usize>("DOCTABLE_PARALLELISM", &v)?.max(1);
        }
        if let Some(v) = get("DOCTABLE_PROMPTS_DIR") {
            self.prompts_dir = Some(PathBuf::from(v));
        }
        Ok(())
    }

    /// Replaces the default model everywhere no explicit override was set.
    pub fn set_default_model(&mut self, model: &str) {
        let old = self.default_model.clone();
        for slot in [
            &mut self.agent_models.annotator,
            &mut self.agent_models.refiner,
            &mut self.agent_models.verifier,
            &mut self.agent_models.planner,
            &mut self.agent_models.writer,
            &mut self.agent_models.judge,
        ] {
            if *slot == old {
                *slot = model.to_string();
            }
        }
        self.default_model = model.to_string();
    }

    pub fn synthesis_config(&self) -> SynthesisConfig {
        SynthesisConfig {
            models: self.agent_models.clone(),
            annotation_rounds: self.annotation_rounds,
            evidence_retries: self.evidence_retries,
            plan_retries: self.plan_retries,
            section_retries: self.section_retries,
            run_judge: self.run_judge,
        }
    }

    /// Builds the gateway this run talks through: the scripted transcript
    /// when one is configured, the HTTP backend otherwise. The credential
    /// comes from the environment variable named by `api_key_env`.
    pub fn build_gateway(&self) -> Result<Gateway, ConfigError> {
        let backend: Box<dyn ChatBackend> = match &self.transcript {
            Some(path) => Box::new(ScriptedBackend::from_file(path).map_err(|detail| {
                ConfigError::Invalid { key: "llm.transcript".to_string(), detail }
            })?),
            None => {
                let api_key = std::env::var(&self.api_key_env).ok();
                Box::new(HttpBackend::new(
                    &self.base_url,
                    api_key,
                    Duration::from_secs(self.request_timeout_secs),
                ))
            }
        };
        Ok(Gateway::new(
            backend,
            self.retry.clone(),
            GatewayLimits {
                token_budget: self.token_budget,
                requests_per_minute: self.requests_per_minute,
            },
        ))
    }
}

pub fn parse_format(s: &str) -> Result<OutputFormat, ConfigError> {
    OutputFormat::parse(s).ok_or_else(|| ConfigError::Invalid {
        key: "extraction.format".to_string(),
        detail: format!("{s:?} is not markdown_table or structured_rows"),
    })
}

pub fn parse_chunking(s: &str) -> Result<Chunking, ConfigError> {
    Chunking::parse(s).ok_or_else(|| ConfigError::Invalid {
        key: "extraction.chunking".to_string(),
        detail: format!("{s:?} is not none or sectioned"),
    })
}

pub fn parse_similarity(s: &str) -> Result<SimilarityKind, ConfigError> {
    SimilarityKind::parse(s).ok_or_else(|| ConfigError::Invalid {
        key: "eval.similarity".to_string(),
        detail: format!("{s:?} is not normalized_edit or token_jaccard"),
    })
}

pub fn check_tau(tau: f64) -> Result<f64, ConfigError> {
    if (0.0..=1.0).contains(&tau) {
        Ok(tau)
    } else {
        Err(ConfigError::Invalid {
            key: "eval.tau".to_string(),
            detail: format!("{tau} is outside [0, 1]"),
        })
    }
}

fn parse_env<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::Invalid {
        key: key.to_string(),
        detail: format!("cannot parse {value:?}"),
    })
}

/// Raw TOML shape. Every field optional; unknown keys are rejected so a
/// typo fails loudly instead of silently keeping a default.
#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    llm: LlmSection,
    synthesis: SynthesisSection,
    extraction: ExtractionSection,
    eval: EvalSection,
    run: RunSection,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
struct LlmSection {
    base_url: Option<String>,
    model: Option<String>,
    api_key_env: Option<String>,
    transcript: Option<PathBuf>,
    request_timeout_secs: Option<u64>,
    requests_per_minute: Option<u32>,
    token_budget: Option<usize>,
    max_attempts: Option<u32>,
    base_delay_ms: Option<u64>,
    max_delay_ms: Option<u64>,
    jitter: Option<bool>,
    models: Option<AgentModelsSection>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
struct AgentModelsSection {
    annotator: Option<String>,
    refiner: Option<String>,
    verifier: Option<String>,
    planner: Option<String>,
    writer: Option<String>,
    judge: Option<String>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
struct SynthesisSection {
    annotation_rounds: Option<u32>,
    evidence_retries: Option<u32>,
    plan_retries: Option<u32>,
    section_retries: Option<u32>,
    judge: Option<bool>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
struct ExtractionSection {
    format: Option<String>,
    chunking: Option<String>,
    max_retries: Option<u32>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
struct EvalSection {
    tau: Option<f64>,
    similarity: Option<String>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
struct RunSection {
    parallelism: Option<usize>,
    prompts_dir: Option<PathBuf>,
}
