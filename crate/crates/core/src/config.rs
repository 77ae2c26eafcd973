//! Plain `name = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Keys cover the physical parameters, the coupling options, and the solver
//! options; any other key is an error.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::coupling::{CouplingConfig, PartitionedOptions};
use crate::model::{ParamError, ParamField, PistonParams};
use crate::piston::FluidModel;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `name = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("key `{key}`: cannot parse `{value}`")]
    BadValue { key: String, value: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Non-parameter keys accepted in a configuration file.
pub const OPTION_KEYS: [&str; 8] = [
    "t_fin",
    "tol",
    "max_iters",
    "relaxation",
    "extrapolation_order",
    "inner_steps",
    "fluid_model",
    "spinup",
];

/// Everything a run configuration file can set.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: PistonParams<f64>,
    pub coupling: CouplingConfig<f64>,
    pub partitioned: PartitionedOptions,
    pub t_fin: Option<f64>,
    pub spinup: Option<f64>,
}

/// Parsed key-value pairs, before interpretation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: raw.to_string(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.to_string(),
                });
            }
            let known = key.parse::<ParamField>().is_ok() || OPTION_KEYS.contains(&key);
            if !known {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
        }
        Ok(KeyValues { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn parsed<V: std::str::FromStr>(&self, key: &str) -> Result<Option<V>, ConfigError> {
        self.get(key)
            .map(|raw| {
                raw.parse::<V>().map_err(|_| ConfigError::BadValue {
                    key: key.to_string(),
                    value: raw.to_string(),
                })
            })
            .transpose()
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let kv = KeyValues::parse(text)?;
        let req = |field: ParamField| -> Result<f64, ConfigError> {
            kv.parsed::<f64>(field.name())?
                .ok_or(ConfigError::Missing(field.name()))
        };
        let params = PistonParams::new(
            req(ParamField::RhoF)?,
            req(ParamField::Ell0)?,
            kv.parsed::<f64>("u0")?.unwrap_or(0.0),
            req(ParamField::MS)?,
            kv.parsed::<f64>("kappa_s")?.unwrap_or(0.0),
            kv.parsed::<f64>("kappa_f")?.unwrap_or(0.0),
            req(ParamField::Tau)?,
        )?;
        let defaults = CouplingConfig::<f64>::default();
        let coupling = CouplingConfig {
            tol: kv.parsed("tol")?.unwrap_or(defaults.tol),
            max_iters: kv.parsed("max_iters")?.unwrap_or(defaults.max_iters),
            relaxation: kv.parsed("relaxation")?.unwrap_or(defaults.relaxation),
            extrapolation_order: kv
                .parsed("extrapolation_order")?
                .unwrap_or(defaults.extrapolation_order),
        };
        coupling
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let popts = PartitionedOptions::default();
        let partitioned = PartitionedOptions {
            model: kv
                .parsed::<FluidModel>("fluid_model")?
                .unwrap_or(popts.model),
            inner_steps: kv.parsed("inner_steps")?.unwrap_or(popts.inner_steps),
        };
        if partitioned.inner_steps < 3 {
            return Err(ConfigError::Invalid("inner_steps must be >= 3".into()));
        }
        Ok(RunConfig {
            params,
            coupling,
            partitioned,
            t_fin: kv.parsed("t_fin")?,
            spinup: kv.parsed("spinup")?,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Renders the configuration back into the file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for f in ParamField::ALL {
            out.push_str(&format!("{} = {}\n", f.name(), self.params.get(f)));
        }
        out.push_str(&format!("tol = {}\n", self.coupling.tol));
        out.push_str(&format!("max_iters = {}\n", self.coupling.max_iters));
        out.push_str(&format!("relaxation = {}\n", self.coupling.relaxation));
        out.push_str(&format!(
            "extrapolation_order = {}\n",
            self.coupling.extrapolation_order
        ));
        out.push_str(&format!("inner_steps = {}\n", self.partitioned.inner_steps));
        out.push_str(&format!(
            "fluid_model = {}\n",
            self.partitioned.model.name()
        ));
        if let Some(t) = self.t_fin {
            out.push_str(&format!("t_fin = {t}\n"));
        }
        if let Some(s) = self.spinup {
            out.push_str(&format!("spinup = {s}\n"));
        }
        out
    }
}
