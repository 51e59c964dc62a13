//! Flag definitions and the config-file merge.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "merw", version, about = "Multi-dimensional elephant random walk: simulation, exact oracles and verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate trajectories and write them as CSV/JSON.
    Simulate(SimulateArgs),
    /// Exact moment table from the recurrence, with optional closed-form and enumeration columns.
    Moments(MomentsArgs),
    /// Regime classification and limit constants.
    Limits(LimitsArgs),
    /// Monte Carlo ensemble with a report against exact or limit targets.
    Ensemble(EnsembleArgs),
    /// Martingale and almost-sure statistics along one trajectory.
    Track(TrackArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
    /// Re-run a command from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Format as ValueEnum>::from_str(s, false)
    }
}

/// Options shared by every command that writes output.
#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Flat `key = value` file mirroring the flags; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Manifest path (defaults to `<out>.manifest.json` when `--out` is set).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct WalkArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    /// Memory parameter; decimal or `num/den`.
    #[arg(long)]
    pub p: Option<String>,
    /// Probability of `+e_1` at the first step; selects the biased first-step law.
    #[arg(long)]
    pub q: Option<String>,
    #[arg(long = "steps", visible_alias = "n")]
    pub steps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// `full` or `reduced` (default).
    #[arg(long)]
    pub engine: Option<String>,
    /// `final`, `positions` (default) or `checkpoints:<stride>`.
    #[arg(long)]
    pub record: Option<String>,
    /// Number of trajectories (streams `0..runs`); more than one needs `--out <dir>`.
    #[arg(long)]
    pub runs: Option<u64>,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Require the closed-form column (it is shown by default whenever it applies).
    #[arg(long)]
    pub closed: bool,
    /// Omit the closed-form column.
    #[arg(long, conflicts_with = "closed")]
    pub no_closed: bool,
    /// Add columns from exact rational enumeration.
    #[arg(long)]
    pub exact_enum: bool,
    /// Enumeration budget in count states at the last step.
    #[arg(long)]
    pub budget: Option<u128>,
    /// Print every `stride`-th row (plus the first and last).
    #[arg(long)]
    pub stride: Option<u64>,
}

#[derive(Debug, Args)]
pub struct LimitsArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Absolute tolerance of the 3F2 value.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long)]
    pub runs: Option<u64>,
    /// diffusive, critical, superdiffusive, occupation or qsl (default: the regime's).
    #[arg(long)]
    pub functional: Option<String>,
    #[arg(long)]
    pub engine: Option<String>,
    /// Worker cap (0 = all cores); the report does not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Checkpoint stride of the occupation functional.
    #[arg(long)]
    pub stride: Option<u64>,
    /// Allow a functional that does not match the regime.
    #[arg(long = "override")]
    pub allow_override: bool,
    /// Pass threshold on |z|.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// `exact` (finite-n, default) or `limit`.
    #[arg(long)]
    pub target: Option<String>,
    /// Exit with status 1 when the report fails.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[command(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long)]
    pub engine: Option<String>,
    #[arg(long)]
    pub stream: Option<u64>,
    /// martingale (default), qsl, lil or occupation.
    #[arg(long)]
    pub stat: Option<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub output: OutputArgs,
    /// `fast` (default) or `full`.
    #[arg(long)]
    pub tier: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Comma-separated criterion numbers.
    #[arg(long)]
    pub only: Option<String>,
    #[arg(long, hide = true)]
    pub inject_fault: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Re-run into temporary paths and compare the outputs byte for byte.
    #[arg(long)]
    pub check: bool,
}

/// Every key a config file may contain.
const KNOWN_KEYS: &[&str] = &[
    "dim", "p", "q", "steps", "seed", "out", "format", "manifest", "engine", "record", "runs", "closed", "no-closed",
    "exact-enum", "budget", "stride", "tol", "functional", "workers", "override", "threshold", "target", "strict",
    "stream", "stat", "tier", "only",
];

/// Parses a flat `key = value` file. `#` starts a comment; `n` is read as `steps`.
pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{}:{}: expected key = value", path.display(), lineno + 1)))?;
        let mut key = key.trim().trim_start_matches("--").replace('_', "-");
        if key == "n" {
            key = "steps".into();
        }
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("{}:{}: unknown key {key:?}", path.display(), lineno + 1)));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

/// Merges flags over the config file and records the effective command line.
pub struct Resolver {
    file: BTreeMap<String, String>,
    args: Vec<String>,
    pub settings: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(subcommand: &str, config: Option<&Path>) -> Result<Self, CliError> {
        let file = match config {
            Some(path) => read_config(path)?,
            None => BTreeMap::new(),
        };
        Ok(Resolver {
            file,
            args: vec![subcommand.to_string()],
            settings: BTreeMap::new(),
        })
    }

    pub fn value<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(text) => Some(
                    text.parse::<T>()
                        .map_err(|e| CliError::Usage(format!("config key {key} = {text:?}: {e}")))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &v {
            let text = v.to_string();
            self.args.push(format!("--{key}"));
            self.args.push(text.clone());
            self.settings.insert(key.to_string(), text);
        }
        Ok(v)
    }

    pub fn or<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        match self.value(key, flag)? {
            Some(v) => Ok(v),
            None => {
                self.settings.insert(key.to_string(), default.to_string());
                Ok(default)
            }
        }
    }

    pub fn required<T>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.value(key, flag)?
            .ok_or_else(|| CliError::Usage(format!("missing --{key} (flag or config key)")))
    }

    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool, CliError> {
        let on = flag
            || match self.file.get(key).map(String::as_str) {
                None | Some("false") => false,
                Some("true") => true,
                Some(other) => return Err(CliError::Usage(format!("config key {key} = {other:?}: expected true or false"))),
            };
        if on {
            self.args.push(format!("--{key}"));
            self.settings.insert(key.to_string(), "true".into());
        }
        Ok(on)
    }

    pub fn path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>, CliError> {
        Ok(self.value::<String>(key, flag.map(|p| p.to_string_lossy().into_owned()))?.map(PathBuf::from))
    }

    /// The effective command line, without the config file.
    pub fn args(&self) -> &[String] {
        &self.args
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn flags_override_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# run\ndim = 2\np = 0.5  # memory\nn = 100\nexact_enum = true").unwrap();
        let mut r = Resolver::new("moments", Some(f.path())).unwrap();
        assert_eq!(r.required::<usize>("dim", Some(3)).unwrap(), 3);
        assert_eq!(r.required::<String>("p", None).unwrap(), "0.5");
        assert_eq!(r.required::<u64>("steps", None).unwrap(), 100);
        assert!(r.switch("exact-enum", false).unwrap());
        assert_eq!(r.args(), ["moments", "--dim", "3", "--p", "0.5", "--steps", "100", "--exact-enum"]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "dimension = 2").unwrap();
        assert!(matches!(read_config(f.path()), Err(CliError::Usage(_))));
    }
}
