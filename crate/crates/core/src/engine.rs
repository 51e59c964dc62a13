//! Trajectory generators.
//!
//! Two engines produce the same law:
//!
//! * [`Engine::Full`] keeps the whole history and follows the literal
//!   mechanism: draw a memory index `k` uniformly in `1..=n`, draw one of the
//!   `2d` signed permutation matrices (identity with probability `p`), apply
//!   it to `X_k`.
//! * [`Engine::Reduced`] keeps only the `2d` signed-direction counts and
//!   samples the next direction from [`model::step_distribution`] by
//!   inverse CDF with one uniform per step.
//!
//! # Streams
//!
//! Trajectory `i` of a run with root seed `s` uses
//! `ChaCha8Rng::seed_from_u64(s)` with `set_stream(i)`: one key per seed, one
//! 64-bit ChaCha nonce per trajectory. Streams never overlap, and any
//! trajectory can be regenerated on its own from `(s, i)`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{self, DirectionCounts, FirstStep, SignedDirection, WalkConfig};
use crate::{MerwError, Result};

/// Per-trajectory random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on `0..n`.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        self.rng.random_range(0..n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Full,
    #[default]
    Reduced,
}

impl std::str::FromStr for Engine {
    type Err = MerwError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Engine::Full),
            "reduced" => Ok(Engine::Reduced),
            other => Err(MerwError::domain(format!("unknown engine {other:?} (full or reduced)"))),
        }
    }
}

/// Which steps a trajectory keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Record {
    FinalOnly,
    Positions,
    /// Every `stride`-th step and the final step.
    Checkpoints(u64),
}

impl Record {
    #[inline]
    pub fn keeps(self, n: u64, horizon: u64) -> bool {
        match self {
            Record::FinalOnly => n == horizon,
            Record::Positions => true,
            Record::Checkpoints(stride) => n % stride == 0 || n == horizon,
        }
    }
}

impl std::str::FromStr for Record {
    type Err = MerwError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "final" => Ok(Record::FinalOnly),
            "positions" => Ok(Record::Positions),
            _ => {
                let stride = s
                    .strip_prefix("checkpoints:")
                    .and_then(|v| v.parse::<u64>().ok())
                    .filter(|&v| v > 0)
                    .ok_or_else(|| {
                        MerwError::domain(format!(
                            "unknown record mode {s:?} (final, positions or checkpoints:<stride>)"
                        ))
                    })?;
                Ok(Record::Checkpoints(stride))
            }
        }
    }
}

/// State after `n` steps. `history` is only kept by the full engine.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkState {
    pub n: u64,
    pub position: Vec<i64>,
    pub counts: DirectionCounts,
    pub history: Option<Vec<SignedDirection>>,
}

impl WalkState {
    pub fn empty(d: usize, with_history: bool) -> Self {
        WalkState {
            n: 0,
            position: vec![0; d],
            counts: DirectionCounts::new(d),
            history: with_history.then(Vec::new),
        }
    }

    #[inline]
    fn push(&mut self, dir: SignedDirection) {
        self.position[dir.axis()] += dir.sign();
        self.counts.record(dir);
        if let Some(h) = self.history.as_mut() {
            h.push(dir);
        }
        self.n += 1;
    }

    /// Parity, count/position consistency and `||S_n||_1 <= n`.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |what: &str| Err(MerwError::Contract(format!("{what} broken at n = {}", self.n)));
        if self.counts.n() != self.n {
            return fail("count total");
        }
        if self.counts.position() != self.position {
            return fail("count/position consistency");
        }
        let l1: u64 = self.position.iter().map(|x| x.unsigned_abs()).sum();
        if l1 > self.n {
            return fail("l1 bound");
        }
        let sum: i64 = self.position.iter().sum();
        if (sum + self.n as i64).rem_euclid(2) != 0 {
            return fail("parity");
        }
        if let Some(h) = &self.history {
            if h.len() as u64 != self.n {
                return fail("history length");
            }
        }
        Ok(())
    }
}

/// Draws `X_1`.
pub fn first_step(d: usize, law: FirstStep, rng: &mut RngStream) -> SignedDirection {
    let u = rng.uniform();
    match law {
        FirstStep::Uniform => SignedDirection::from_index(((u * (2 * d) as f64) as usize).min(2 * d - 1)),
        FirstStep::Biased { q } => {
            if u < q {
                SignedDirection::from_index(0)
            } else {
                let rest = (2 * d - 1) as f64;
                let j = (((u - q) / (1.0 - q) * rest) as usize).min(2 * d - 2);
                SignedDirection::from_index(1 + j)
            }
        }
    }
}

/// Precomputed constants of one `(d, p)`.
#[derive(Debug, Clone, Copy)]
pub struct Sampler {
    d: usize,
    p: f64,
    other: f64,
}

impl Sampler {
    pub fn new(d: usize, p: f64) -> Result<Self> {
        model::memory_to_a(d, p)?;
        Ok(Sampler {
            d,
            p,
            other: (1.0 - p) / (2 * d - 1) as f64,
        })
    }

    /// One step of the full-history engine: memory index, then matrix.
    pub fn advance_full(&self, state: &mut WalkState, rng: &mut RngStream) -> Result<()> {
        let history = state
            .history
            .as_ref()
            .ok_or_else(|| MerwError::Contract("the full engine needs the step history".into()))?;
        if history.is_empty() {
            return Err(MerwError::Contract("advance needs n >= 1".into()));
        }
        let k = rng.below(history.len() as u64) as usize;
        let recalled = history[k];
        let u = rng.uniform();
        let m = if u < self.p {
            0
        } else {
            let rest = (2 * self.d - 1) as f64;
            1 + (((u - self.p) / (1.0 - self.p) * rest) as usize).min(2 * self.d - 2)
        };
        state.push(model::apply_matrix_index(self.d, m, recalled));
        Ok(())
    }

    /// One step of the count-based engine.
    #[inline]
    pub fn advance_reduced(&self, state: &mut WalkState, rng: &mut RngStream) -> Result<()> {
        if state.n == 0 {
            return Err(MerwError::Contract("advance needs n >= 1".into()));
        }
        let dir = self.draw_reduced(&state.counts, rng.uniform());
        state.push(dir);
        Ok(())
    }

    /// Inverse CDF of the step law at `u`, in direction order. Rounding can
    /// leave `u n` past the last cumulative mass; the last direction with
    /// positive mass is returned then.
    #[inline]
    pub fn draw_reduced(&self, counts: &DirectionCounts, u: f64) -> SignedDirection {
        let n = counts.n() as f64;
        let target = u * n;
        let mut acc = 0.0;
        let mut last = 0;
        for (idx, &c) in counts.as_slice().iter().enumerate() {
            let c = c as f64;
            let mass = self.p * c + self.other * (n - c);
            if mass > 0.0 {
                acc += mass;
                last = idx;
                if target < acc {
                    return SignedDirection::from_index(idx);
                }
            }
        }
        SignedDirection::from_index(last)
    }
}

/// Recorded output of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub d: usize,
    pub horizon: u64,
    pub seed: u64,
    pub stream: u64,
    pub engine: Engine,
    /// Recorded step numbers.
    pub steps: Vec<u64>,
    /// Positions at the recorded steps, `d` per step.
    pub positions: Vec<i64>,
    pub final_counts: DirectionCounts,
}

impl Trajectory {
    /// A complete trajectory from explicit positions `S_1..S_n` (`d` per step),
    /// e.g. for synthetic inputs. Every increment must be a signed unit vector.
    pub fn from_positions(d: usize, positions: Vec<i64>) -> Result<Self> {
        if d == 0 || positions.is_empty() || positions.len() % d != 0 {
            return Err(MerwError::domain("positions must hold d >= 1 coordinates per step"));
        }
        let horizon = (positions.len() / d) as u64;
        let mut counts = DirectionCounts::new(d);
        let mut prev = vec![0i64; d];
        for (row, pos) in positions.chunks_exact(d).enumerate() {
            counts.record(unit_step(&prev, pos).ok_or_else(|| {
                MerwError::Contract(format!("step {} is not a signed unit vector", row + 1))
            })?);
            prev.copy_from_slice(pos);
        }
        Ok(Trajectory {
            d,
            horizon,
            seed: 0,
            stream: 0,
            engine: Engine::Reduced,
            steps: (1..=horizon).collect(),
            positions,
            final_counts: counts,
        })
    }

    /// Step directions `X_1..X_n` of a complete trajectory.
    pub fn directions(&self) -> Result<Vec<SignedDirection>> {
        if !self.is_complete() {
            return Err(MerwError::Contract("the trajectory must be recorded with positions".into()));
        }
        let mut prev = vec![0i64; self.d];
        let mut out = Vec::with_capacity(self.steps.len());
        for (row, pos) in self.positions.chunks_exact(self.d).enumerate() {
            out.push(unit_step(&prev, pos).ok_or_else(|| {
                MerwError::Contract(format!("step {} is not a signed unit vector", row + 1))
            })?);
            prev.copy_from_slice(pos);
        }
        Ok(out)
    }

    pub fn position(&self, row: usize) -> &[i64] {
        &self.positions[row * self.d..(row + 1) * self.d]
    }

    pub fn final_position(&self) -> Vec<i64> {
        self.final_counts.position()
    }

    /// Whether every step `1..=horizon` is present.
    pub fn is_complete(&self) -> bool {
        self.steps.len() as u64 == self.horizon
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = String::from("step");
        for i in 1..=self.d {
            header.push_str(&format!(",s{i}"));
        }
        writeln!(out, "{header}")?;
        for (row, step) in self.steps.iter().enumerate() {
            let mut line = step.to_string();
            for x in self.position(row) {
                line.push(',');
                line.push_str(&x.to_string());
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

fn unit_step(prev: &[i64], next: &[i64]) -> Option<SignedDirection> {
    let mut found = None;
    for (axis, (a, b)) in prev.iter().zip(next).enumerate() {
        match b - a {
            0 => {}
            1 | -1 if found.is_none() => found = Some(SignedDirection::new(axis, (b - a) as i8)),
            _ => return None,
        }
    }
    found
}

/// Rejects horizons at which a coordinate could leave `i64`.
pub fn check_horizon(horizon: u64) -> Result<()> {
    if horizon > i64::MAX as u64 {
        return Err(MerwError::Overflow { step: i64::MAX as u64 + 1 });
    }
    Ok(())
}

/// Runs `config.horizon` steps on stream `stream` of `config.seed`, calling
/// `visit` after every step.
pub fn run<F>(config: &WalkConfig, engine: Engine, stream: u64, mut visit: F) -> Result<WalkState>
where
    F: FnMut(&WalkState),
{
    config.validate()?;
    check_horizon(config.horizon)?;
    let sampler = Sampler::new(config.d, config.p)?;
    let mut rng = RngStream::new(config.seed, stream);
    let mut state = WalkState::empty(config.d, engine == Engine::Full);
    state.push(first_step(config.d, config.first_step, &mut rng));
    visit(&state);
    while state.n < config.horizon {
        match engine {
            Engine::Full => sampler.advance_full(&mut state, &mut rng)?,
            Engine::Reduced => sampler.advance_reduced(&mut state, &mut rng)?,
        }
        visit(&state);
    }
    Ok(state)
}

/// One trajectory with the chosen recording policy.
pub fn simulate(config: &WalkConfig, engine: Engine, stream: u64, record: Record) -> Result<Trajectory> {
    if let Record::Checkpoints(0) = record {
        return Err(MerwError::domain("checkpoint stride must be positive"));
    }
    let horizon = config.horizon;
    let mut steps = Vec::new();
    let mut positions = Vec::new();
    let state = run(config, engine, stream, |s| {
        if record.keeps(s.n, horizon) {
            steps.push(s.n);
            positions.extend_from_slice(&s.position);
        }
    })?;
    Ok(Trajectory {
        d: config.d,
        horizon,
        seed: config.seed,
        stream,
        engine,
        steps,
        positions,
        final_counts: state.counts,
    })
}
