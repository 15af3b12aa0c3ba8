//! Run configuration and the machine-readable result envelope.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Fisher,
    CrlbSim,
    Div,
    Expfam,
    Rao,
    Geodesic,
    Props,
}

impl CommandKind {
    pub fn label(&self) -> &'static str {
        match self {
            CommandKind::Fisher => "fisher",
            CommandKind::CrlbSim => "crlb-sim",
            CommandKind::Div => "div",
            CommandKind::Expfam => "expfam",
            CommandKind::Rao => "rao",
            CommandKind::Geodesic => "geodesic",
            CommandKind::Props => "props",
        }
    }
}

/// Numeric knobs; the documented defaults reproduce published numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericCfg {
    /// Largest acceptable quadrature residual.
    pub quadrature_tol: f64,
    /// RK4 steps for geodesic integration.
    pub ode_steps: usize,
    /// Convergence tolerance of the Newton solvers.
    pub newton_tol: f64,
}

impl Default for NumericCfg {
    fn default() -> Self {
        NumericCfg {
            quadrature_tol: 1e-10,
            ode_steps: 1000,
            newton_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputCfg {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub format: OutputFormat,
}

impl Default for OutputCfg {
    fn default() -> Self {
        OutputCfg {
            path: None,
            format: OutputFormat::Json,
        }
    }
}

/// A fully resolved run: echoing this object back through `--config`
/// reproduces the run bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<String>,
    pub numeric: NumericCfg,
    pub seed: u64,
    pub output: OutputCfg,
    /// Command-specific parameters (typed per command, unknown keys
    /// rejected at validation).
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub artifact: String,
    pub schema: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultEnvelope {
    pub config_echo: RunConfig,
    pub values: serde_json::Value,
    pub residuals: BTreeMap<String, serde_json::Value>,
    pub versions: Versions,
    pub wall_time_ms: u64,
}

impl ResultEnvelope {
    pub fn new(config: RunConfig, values: serde_json::Value) -> Self {
        ResultEnvelope {
            config_echo: config,
            values,
            residuals: BTreeMap::new(),
            versions: Versions {
                artifact: env!("CARGO_PKG_VERSION").to_string(),
                schema: SCHEMA_VERSION.to_string(),
            },
            wall_time_ms: 0,
        }
    }

    pub fn with_residual(mut self, key: &str, value: f64) -> Self {
        self.residuals.insert(key.to_string(), num(value));
        self
    }
}

/// JSON value for a float: finite values stay numbers (printed with 17
/// significant digits), non-finite values become the strings "inf",
/// "-inf", "nan".
pub fn num(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::Value::Number(serde_json::Number::from_f64(v).expect("finite"))
    } else if v.is_nan() {
        serde_json::Value::String("nan".into())
    } else if v > 0.0 {
        serde_json::Value::String("inf".into())
    } else {
        serde_json::Value::String("-inf".into())
    }
}

pub fn num_slice(v: &[f64]) -> serde_json::Value {
    serde_json::Value::Array(v.iter().map(|&x| num(x)).collect())
}

/// serde_json formatter printing every f64 with 17 significant digits.
struct Sci17;

impl serde_json::ser::Formatter for Sci17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize with the 17-digit float convention.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sci17);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    String::from_utf8(out).map_err(|e| Error::Config(format!("non-utf8 output: {e}")))
}
