//! Command options. Every value can come from a flag, from the command's
//! table in a TOML config, or from the config's top level, in that order.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Opts {
    /// TOML config file with top-level keys and per-command tables.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Directory for CSV tables and reports.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Seed for all randomized steps (required by optimizer commands).
    #[arg(long)]
    pub seed: Option<u64>,

    /// Site counts to sweep.
    #[arg(long = "V", value_delimiter = ',')]
    #[serde(rename = "V")]
    pub sites: Option<Vec<usize>>,

    /// Modes per site.
    #[arg(long)]
    pub p: Option<usize>,

    /// Values of the family parameter mu.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub mu: Option<Vec<f64>>,

    /// Reduced site counts (default: every admissible k).
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,

    /// State family (`mu`) or Hamiltonian families for gs-bound.
    #[arg(long, value_delimiter = ',')]
    pub family: Option<Vec<String>>,

    /// State file in the expansion text format (shape from --V and --p).
    #[arg(long)]
    pub fixture: Option<PathBuf>,

    /// Diagonal 1-RDM entry.
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,

    /// Real part of the off-diagonal 1-RDM entry.
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,

    /// Imaginary part of the off-diagonal 1-RDM entry.
    #[arg(long = "b-im", allow_negative_numbers = true)]
    #[serde(rename = "b-im")]
    pub b_im: Option<f64>,

    /// Occupation of the single-mode state used by verify-clt.
    #[arg(long)]
    pub occupation: Option<f64>,

    /// Cumulant orders.
    #[arg(long, value_delimiter = ',')]
    pub w: Option<Vec<usize>>,

    /// Random cases per algebra suite.
    #[arg(long)]
    pub cases: Option<usize>,

    /// Optimizer restarts.
    #[arg(long)]
    pub restarts: Option<usize>,

    /// Optimizer iterations per restart.
    #[arg(long)]
    pub iters: Option<usize>,

    /// Mixture components.
    #[arg(long)]
    pub components: Option<usize>,

    /// Evaluate the odd-part bound on the operator even when it is not a state.
    #[arg(long = "allow-nonpositive", num_args = 0..=1, default_missing_value = "true")]
    #[serde(rename = "allow-nonpositive")]
    pub allow_nonpositive: Option<bool>,
}

macro_rules! merge_fields {
    ($a:expr, $b:expr, $($f:ident),*) => {
        Opts { config: $a.config.or($b.config), $($f: $a.$f.or($b.$f)),* }
    };
}

impl Opts {
    /// Values in `self` win over `other`.
    pub fn or(self, other: Opts) -> Opts {
        merge_fields!(
            self, other, out, seed, sites, p, mu, k, family, fixture, a, b, b_im, occupation, w, cases, restarts,
            iters, components, allow_nonpositive
        )
    }

    /// Fills unset values from the config file named by `--config`.
    pub fn resolve(self, command: &str) -> Result<Opts, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let file = load_config(&path)?;
        let section = file.section(command)?;
        Ok(self.or(section).or(file.top))
    }

    pub fn require_seed(&self, command: &str) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Usage(format!("{command} needs a seed (--seed or `seed` in the config)")))
    }
}

pub struct ConfigFile {
    pub top: Opts,
    tables: toml::Table,
}

impl ConfigFile {
    pub fn section(&self, command: &str) -> Result<Opts, CliError> {
        match self.tables.get(command) {
            None => Ok(Opts::default()),
            Some(v) => v
                .clone()
                .try_into()
                .map_err(|e| CliError::Usage(format!("config table [{command}]: {e}"))),
        }
    }
}

pub const COMMANDS: [&str; 9] = [
    "check-algebra",
    "check-invariance",
    "verify-lemma3",
    "verify-theorem1",
    "verify-clt",
    "verify-corollary",
    "rdm-spectrum",
    "gs-bound",
    "all",
];

pub fn load_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    let mut tables = toml::Table::new();
    for name in COMMANDS {
        if let Some(v) = table.remove(name) {
            if !v.is_table() {
                return Err(CliError::Usage(format!("config key `{name}` must be a table")));
            }
            tables.insert(name.to_string(), v);
        }
    }
    let top: Opts = toml::Value::Table(table)
        .try_into()
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    Ok(ConfigFile { top, tables })
}
