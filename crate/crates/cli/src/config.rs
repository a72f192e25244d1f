use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use augcat_core::estimation::build_grid;
use augcat_core::evaluation::DataSource;
use augcat_core::scoring::ScorerConfig;
use augcat_core::FitConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::manifest::sha256_hex;

/// Contents of the TOML run file. Every section is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
    pub synthetic: SyntheticSettings,
    pub inputs: InputSettings,
    pub partition: PartitionSettings,
    pub fit: FitSettings,
    pub diagnostics: DiagnosticsSettings,
    pub scorer: ScorerSettings,
    pub augmentation: AugmentationSettings,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSettings {
    pub n: usize,
    /// Bank file to simulate from; the built-in fixture bank otherwise.
    pub generating_bank: Option<PathBuf>,
    pub fixture_seed: u64,
    /// Range of the discrimination of each task's strongest prompt.
    pub strong_discrimination: [f64; 2],
    /// Rating item to copy into an extra, perfectly dependent column.
    pub plant_duplicate: Option<String>,
}

impl Default for SyntheticSettings {
    fn default() -> Self {
        Self {
            n: 3000,
            generating_bank: None,
            fixture_seed: 42,
            strong_discrimination: [1.0, 2.0],
            plant_duplicate: None,
        }
    }
}

/// Real-data inputs. Setting `ratings` switches the run to real data.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSettings {
    pub ratings: Option<PathBuf>,
    pub reverse_keyed: Vec<String>,
    pub external_column: Option<String>,
    pub texts: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSettings {
    pub train_fraction: f64,
    pub validation_fraction: f64,
}

impl Default for PartitionSettings {
    fn default() -> Self {
        Self {
            train_fraction: 2.0 / 3.0,
            validation_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    pub max_em_cycles: usize,
    pub param_tolerance: f64,
    pub quadrature_nodes: usize,
    pub quadrature_bound: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        let d = FitConfig::default();
        Self {
            max_em_cycles: d.max_em_cycles,
            param_tolerance: d.param_tolerance,
            quadrature_nodes: augcat_core::estimation::DEFAULT_NODES,
            quadrature_bound: augcat_core::estimation::DEFAULT_BOUND,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSettings {
    pub q3_threshold: f64,
}

impl Default for DiagnosticsSettings {
    fn default() -> Self {
        Self {
            q3_threshold: augcat_core::diagnostics::DEFAULT_Q3_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerSettings {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_secs: u64,
    pub max_concurrent: usize,
    pub backoff_ms: u64,
    /// Environment variable holding the API key of the real endpoint.
    pub api_key_env: String,
    pub country: String,
    pub stub: bool,
}

impl Default for ScorerSettings {
    fn default() -> Self {
        let d = ScorerConfig::default();
        Self {
            endpoint: d.endpoint,
            model: d.model,
            temperature: d.temperature,
            max_retries: d.max_retries,
            timeout_secs: d.timeout.as_secs(),
            max_concurrent: d.max_concurrent,
            backoff_ms: d.backoff_base.as_millis() as u64,
            api_key_env: "LLM_API_KEY".into(),
            country: "Chinese".into(),
            stub: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationSettings {
    pub k: usize,
}

impl Default for AugmentationSettings {
    fn default() -> Self {
        Self { k: 5 }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub stub_scorer: bool,
    pub k: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

/// Resolved settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    /// Relative input paths in the file resolve against this directory.
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub stub: bool,
    pub k: usize,
    pub config_hash: String,
}

impl Context {
    pub fn load(overrides: &Overrides) -> Result<Self, CliError> {
        let (mut config, base_dir) = match &overrides.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
                let config: RunConfig =
                    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (config, base)
            }
            None => (RunConfig::default(), PathBuf::new()),
        };
        if overrides.seed.is_some() {
            config.seed = overrides.seed;
        }
        if overrides.stub_scorer {
            config.scorer.stub = true;
        }
        if let Some(k) = overrides.k {
            config.augmentation.k = k;
        }
        let seed = config
            .seed
            .ok_or_else(|| CliError::Config("no seed given: set `seed` in the config or pass --seed".into()))?;
        if config.augmentation.k == 0 {
            return Err(CliError::Config("k must be at least 1".into()));
        }
        let out_dir = match (&overrides.out_dir, &config.out_dir) {
            (Some(dir), _) => dir.clone(),
            (None, Some(dir)) => base_dir.join(dir),
            (None, None) => {
                return Err(CliError::Config(
                    "no output directory: set `out_dir` or pass --out-dir".into(),
                ))
            }
        };
        let config_hash = sha256_hex(serde_json::to_string(&config).expect("config serializes").as_bytes());
        Ok(Self {
            stub: config.scorer.stub,
            k: config.augmentation.k,
            config,
            base_dir,
            out_dir,
            seed,
            config_hash,
        })
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn input(&self, path: &Path) -> PathBuf {
        self.base_dir.join(path)
    }

    pub fn source(&self) -> DataSource {
        if self.config.inputs.ratings.is_some() {
            DataSource::Real
        } else {
            DataSource::Synthetic
        }
    }

    pub fn fit_config(&self) -> Result<FitConfig, CliError> {
        let f = &self.config.fit;
        let config = FitConfig {
            max_em_cycles: f.max_em_cycles,
            param_tolerance: f.param_tolerance,
            grid: build_grid(f.quadrature_nodes, -f.quadrature_bound, f.quadrature_bound)?,
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn scorer_config(&self) -> Result<ScorerConfig, CliError> {
        let s = &self.config.scorer;
        let config = ScorerConfig {
            endpoint: s.endpoint.clone(),
            model: s.model.clone(),
            temperature: s.temperature,
            max_retries: s.max_retries,
            timeout: Duration::from_secs(s.timeout_secs),
            max_concurrent: s.max_concurrent,
            backoff_base: Duration::from_millis(s.backoff_ms),
        };
        config.validate()?;
        Ok(config)
    }

    /// Fails with a config error naming the first missing file.
    pub fn require(&self, paths: &[(PathBuf, &str)]) -> Result<(), CliError> {
        for (path, producer) in paths {
            if !path.is_file() {
                return Err(CliError::Config(format!(
                    "missing input {} ({producer})",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}
