//! Config files for the command-line tool.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenarios::{BaseConfig, Preset, ScenarioKind, ScenarioSpec, WanSource, SCHEMA_VERSION};

fn default_protocol() -> String {
    "home_aware".into()
}

fn default_seed() -> u64 {
    42
}

/// A single run, or a pointer to a scenario sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default = "default_protocol")]
    pub protocol: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Workload, topology, WAN profile, duration and prices.
    #[serde(default)]
    pub setup: BaseConfig,
    /// A scenario kind name or a scenario file; when set, `run` sweeps it.
    #[serde(default)]
    pub scenario: Option<String>,
    /// A recorded stream to replay instead of generating one.
    #[serde(default)]
    pub stream: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            protocol: default_protocol(),
            seed: default_seed(),
            setup: BaseConfig::default(),
            scenario: None,
            stream: None,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn preset(p: Preset) -> Self {
        RunConfig {
            setup: p.base(),
            ..RunConfig::default()
        }
    }

    /// Parses and validates; relative paths stay as written.
    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = parse(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c: RunConfig = parse(&text).map_err(|e| in_file(path, e))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        c.stream = c.stream.map(|p| dir.join(p));
        c.out = c.out.map(|p| dir.join(p));
        if let WanSource::File(p) = &c.setup.wan {
            c.setup.wan = WanSource::File(dir.join(p));
        }
        if let Some(s) = &c.scenario {
            if s.parse::<ScenarioKind>().is_err() {
                c.scenario = Some(dir.join(s).display().to_string());
            }
        }
        c.validate().map_err(|e| in_file(path, e))?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        check_version(self.schema_version)?;
        if self.protocol.is_empty() {
            return Err(Error::config("protocol name is empty"));
        }
        self.setup.validate()
    }

    /// The sweep this config points at, if any. Named kinds take the
    /// preset's scenario with this config's seed.
    pub fn scenario_spec(&self, preset: Preset) -> Result<Option<ScenarioSpec>> {
        match &self.scenario {
            None => Ok(None),
            Some(s) => match s.parse::<ScenarioKind>() {
                Ok(kind) => {
                    let mut spec = preset.scenario(kind);
                    spec.seed = self.seed;
                    Ok(Some(spec))
                }
                Err(_) => load_scenario(Path::new(s)).map(Some),
            },
        }
    }
}

/// Reads and checks a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut s: ScenarioSpec = parse(&text).map_err(|e| in_file(path, e))?;
    let dir = path.parent().unwrap_or(Path::new(""));
    if let WanSource::File(p) = &s.base.wan {
        s.base.wan = WanSource::File(dir.join(p));
    }
    s.validate_shape().map_err(|e| in_file(path, e))?;
    Ok(s)
}

fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))
}

fn check_version(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::config(format!(
            "schema_version {v} unsupported (expected {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
        other => other,
    }
}
