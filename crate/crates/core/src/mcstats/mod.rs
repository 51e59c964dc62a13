//! Ensembles of independent trajectories and their Monte Carlo reports.
//!
//! Trajectory `i` always runs on RNG stream `i` of the configured seed. The
//! streams are cut into fixed chunks of [`CHUNK`] consecutive indices; each
//! chunk is accumulated sequentially, and the chunk accumulators are merged
//! by [`accumulator::tree_merge`] in index order. The floating-point
//! operations therefore do not depend on how many workers ran the chunks, and
//! reports are byte-identical for any worker count.

pub mod accumulator;
pub mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use accumulator::{tree_merge, Accumulator};
pub use report::{
    covariance_report, exact_target, limit_target, normality_check, occupation_report, superdiffusive_limit,
    Diagnostic, GofResult, Report,
};

use crate::engine::{self, Engine};
use crate::model::{Regime, RegimeKind, WalkConfig};
use crate::{MerwError, Result};

/// Streams per leaf of the merge tree.
pub const CHUNK: u64 = 256;

/// What is measured on each trajectory at the horizon `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// `S_n / sqrt(n)`.
    Diffusive,
    /// `S_n / sqrt(n log n)`.
    Critical,
    /// `S_n / n^a`.
    Superdiffusive,
    /// `Λ_t(i) = N_t(i)/t` for every axis at every checkpoint `t`.
    Occupation,
    /// The quadratic strong law matrix of the regime, row-major.
    Qsl,
}

impl Functional {
    /// The functional matching a regime's limit theorem.
    pub fn for_regime(kind: RegimeKind) -> Self {
        match kind {
            RegimeKind::Diffusive => Functional::Diffusive,
            RegimeKind::Critical => Functional::Critical,
            RegimeKind::Superdiffusive => Functional::Superdiffusive,
        }
    }

    fn regime(self) -> Option<RegimeKind> {
        match self {
            Functional::Diffusive => Some(RegimeKind::Diffusive),
            Functional::Critical => Some(RegimeKind::Critical),
            Functional::Superdiffusive => Some(RegimeKind::Superdiffusive),
            Functional::Occupation | Functional::Qsl => None,
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Functional::Diffusive => "diffusive",
            Functional::Critical => "critical",
            Functional::Superdiffusive => "superdiffusive",
            Functional::Occupation => "occupation",
            Functional::Qsl => "qsl",
        })
    }
}

impl FromStr for Functional {
    type Err = MerwError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diffusive" => Ok(Functional::Diffusive),
            "critical" => Ok(Functional::Critical),
            "superdiffusive" => Ok(Functional::Superdiffusive),
            "occupation" => Ok(Functional::Occupation),
            "qsl" => Ok(Functional::Qsl),
            other => Err(MerwError::domain(format!(
                "unknown functional {other:?} (diffusive, critical, superdiffusive, occupation or qsl)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleOptions {
    pub engine: Engine,
    /// Upper bound on worker threads; `0` means all available.
    pub workers: usize,
    /// Checkpoint stride of the occupation functional (the horizon is always included).
    pub stride: Option<u64>,
    /// Allows a position functional whose regime differs from the configuration's.
    pub allow_override: bool,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            engine: Engine::Reduced,
            workers: 0,
            stride: None,
            allow_override: false,
        }
    }
}

/// Merged accumulators of one ensemble and what produced them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub config: WalkConfig,
    pub regime: Regime,
    pub functional: Functional,
    pub engine: Engine,
    /// Checkpoints of the occupation functional, else just the horizon.
    pub steps: Vec<u64>,
    pub acc: Accumulator,
}

impl EnsembleStats {
    #[allow(non_snake_case)]
    pub fn R(&self) -> u64 {
        self.acc.runs()
    }
}

fn checkpoints(horizon: u64, stride: Option<u64>) -> Result<Vec<u64>> {
    match stride {
        None => Ok(vec![horizon]),
        Some(0) => Err(MerwError::domain("checkpoint stride must be positive")),
        Some(s) => {
            let mut v: Vec<u64> = (1..=horizon / s).map(|k| k * s).collect();
            if v.last() != Some(&horizon) {
                v.push(horizon);
            }
            Ok(v)
        }
    }
}

/// Checks that `functional` makes sense for `config`.
fn check_functional(config: &WalkConfig, functional: Functional, options: &EnsembleOptions) -> Result<()> {
    let regime = config.regime();
    if let Some(kind) = functional.regime() {
        if kind != regime.kind && !options.allow_override {
            return Err(MerwError::domain(format!(
                "functional {functional} does not match the {} regime of p = {} (override to force it)",
                regime.kind, config.p
            )));
        }
    }
    match functional {
        Functional::Critical if config.horizon < 2 => Err(MerwError::domain("the critical scaling needs n >= 2")),
        Functional::Qsl => match regime.kind {
            RegimeKind::Diffusive if config.horizon >= 2 => Ok(()),
            RegimeKind::Critical if config.horizon >= 3 => Ok(()),
            RegimeKind::Superdiffusive => Err(MerwError::domain("no quadratic strong law in the superdiffusive regime")),
            _ => Err(MerwError::domain("the quadratic strong law statistic needs n >= 2 (diffusive) or n >= 3 (critical)")),
        },
        _ => Ok(()),
    }
}

/// Evaluates the functional on stream `stream`, writing the sample into `out`.
fn sample(
    config: &WalkConfig,
    functional: Functional,
    engine: Engine,
    steps: &[u64],
    stream: u64,
    out: &mut Vec<f64>,
) -> Result<()> {
    out.clear();
    let d = config.d;
    let nf = config.horizon as f64;
    match functional {
        Functional::Occupation => {
            let mut next = 0;
            engine::run(config, engine, stream, |s| {
                if next < steps.len() && s.n == steps[next] {
                    let t = s.n as f64;
                    out.extend((0..d).map(|i| s.counts.axis_occupation(i) as f64 / t));
                    next += 1;
                }
            })?;
        }
        Functional::Qsl => {
            let critical = config.regime().kind == RegimeKind::Critical;
            let mut acc = vec![0.0; d * d];
            engine::run(config, engine, stream, |s| {
                let k = s.n as f64;
                let w = if critical {
                    if s.n < 2 {
                        return;
                    }
                    1.0 / (k * k.ln()).powi(2)
                } else {
                    1.0 / (k * k)
                };
                for i in 0..d {
                    for j in 0..d {
                        acc[i * d + j] += w * (s.position[i] * s.position[j]) as f64;
                    }
                }
            })?;
            let norm = if critical { nf.ln().ln() } else { nf.ln() };
            out.extend(acc.iter().map(|x| x / norm));
        }
        _ => {
            let state = engine::run(config, engine, stream, |_| {})?;
            let scale = match functional {
                Functional::Diffusive => nf.sqrt(),
                Functional::Critical => (nf * nf.ln()).sqrt(),
                _ => nf.powf(config.a()),
            };
            out.extend(state.position.iter().map(|&x| x as f64 / scale));
        }
    }
    Ok(())
}

fn run_chunk(
    config: &WalkConfig,
    functional: Functional,
    engine: Engine,
    steps: &[u64],
    width: usize,
    streams: std::ops::Range<u64>,
) -> Result<Accumulator> {
    let mut acc = Accumulator::new(width);
    let mut buf = Vec::with_capacity(width);
    for stream in streams {
        sample(config, functional, engine, steps, stream, &mut buf)?;
        acc.push(&buf);
    }
    Ok(acc)
}

#[cfg(feature = "parallel")]
fn run_chunks<F>(n_chunks: u64, workers: usize, f: F) -> Result<Vec<Accumulator>>
where
    F: Fn(u64) -> Result<Accumulator> + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| MerwError::Contract(format!("worker pool: {e}")))?;
    pool.install(|| (0..n_chunks).into_par_iter().map(&f).collect())
}

#[cfg(not(feature = "parallel"))]
fn run_chunks<F>(n_chunks: u64, _workers: usize, f: F) -> Result<Vec<Accumulator>>
where
    F: Fn(u64) -> Result<Accumulator>,
{
    (0..n_chunks).map(f).collect()
}

/// Runs `runs` trajectories on streams `0..runs` and merges their samples.
pub fn run_ensemble(
    config: &WalkConfig,
    runs: u64,
    functional: Functional,
    options: &EnsembleOptions,
) -> Result<EnsembleStats> {
    config.validate()?;
    if runs < 2 {
        return Err(MerwError::domain("an ensemble needs at least 2 runs"));
    }
    check_functional(config, functional, options)?;
    let steps = match functional {
        Functional::Occupation => checkpoints(config.horizon, options.stride)?,
        _ => vec![config.horizon],
    };
    let d = config.d;
    let width = match functional {
        Functional::Occupation => d * steps.len(),
        Functional::Qsl => d * d,
        _ => d,
    };
    let n_chunks = runs.div_ceil(CHUNK);
    let parts = run_chunks(n_chunks, options.workers, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(runs);
        run_chunk(config, functional, options.engine, &steps, width, lo..hi)
    })?;
    Ok(EnsembleStats {
        config: config.clone(),
        regime: config.regime(),
        functional,
        engine: options.engine,
        steps,
        acc: tree_merge(parts)?,
    })
}
