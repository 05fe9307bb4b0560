//! Command-line orchestration: dataset generation and replay, training,
//! evaluation, the ablation sweep and report merging.
//!
//! Every command takes a resolved [`ExperimentConfig`] plus an output
//! directory and writes plain-text artifacts only. Output never contains
//! timestamps or absolute paths, so re-running a command with the recorded
//! arguments reproduces its files byte for byte.

pub mod ablation;
pub mod commands;
pub mod config;
pub mod dataset;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub use ablation::{run_ablation, summarize, AblationCell, AblationSummary};
pub use commands::{
    cmd_ablate, cmd_evaluate, cmd_report, cmd_simulate, cmd_train, EvaluateArgs, SimulateTarget,
};
pub use config::{ExperimentConfig, ModeKind};

/// Version of the JSON result files read back by `report`.
pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL: &str = concat!("uwbnov ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Runtime(#[from] crate::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Config(_) => 1,
            Self::Runtime(_) => 2,
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.into())
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        Self::Runtime(e.into())
    }
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Global options shared by every command.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub force: bool,
}

impl Context {
    pub fn new(config: ExperimentConfig, out: impl Into<PathBuf>, force: bool) -> Self {
        Self {
            config,
            out: out.into(),
            force,
        }
    }

    pub fn seed(&self) -> u64 {
        self.config.experiment.seed
    }

    pub(crate) fn ensure_out(&self) -> HarnessResult<()> {
        std::fs::create_dir_all(&self.out)?;
        Ok(())
    }

    pub(crate) fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: &Path) -> HarnessResult<Self> {
        let bytes = std::fs::read(path)?;
        Ok(Self {
            name: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: sha256_hex(&bytes),
        })
    }
}

/// What produced an output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub command: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub args: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<InputDigest>,
}

impl Provenance {
    pub fn new(command: &str, config: &ExperimentConfig, seeds: Vec<u64>) -> Self {
        Self {
            tool: TOOL.to_string(),
            command: command.to_string(),
            config_hash: config.hash(),
            seeds,
            args: BTreeMap::new(),
            inputs: Vec::new(),
        }
    }

    pub fn arg(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.args.insert(key.to_string(), value.into());
        self
    }

    pub fn input(mut self, path: &Path) -> HarnessResult<Self> {
        self.inputs.push(InputDigest::of(path)?);
        Ok(self)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("provenance serializes")
    }
}

/// `run.json`: the provenance plus the resolved configuration, enough to
/// re-run the command.
#[derive(Serialize)]
struct RunRecord<'a> {
    provenance: &'a Provenance,
    config: &'a ExperimentConfig,
}

pub(crate) fn write_run_record(ctx: &Context, prov: &Provenance) -> HarnessResult<()> {
    write_json(
        &ctx.path("run.json"),
        &RunRecord {
            provenance: prov,
            config: &ctx.config,
        },
    )
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> HarnessResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Delimited text with a `# provenance:` comment line above the header row.
pub(crate) struct Csv {
    text: String,
}

impl Csv {
    pub fn new(prov: &Provenance, columns: &[&str]) -> Self {
        let mut text = format!("# provenance: {}\n", prov.to_line());
        text.push_str(&columns.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: std::fmt::Display,
    {
        let mut first = true;
        for f in fields {
            if !first {
                self.text.push(',');
            }
            first = false;
            let _ = write!(self.text, "{f}");
        }
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> HarnessResult<()> {
        std::fs::write(path, &self.text)?;
        Ok(())
    }
}

/// Empty string for `None`, so CSV cells stay blank.
pub(crate) fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}
