//! Parameters, signed directions, regimes and the one-step law of the walk.

use std::fmt;

use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::rational::{self, Rational};
use crate::{MerwError, Result};

/// Law of the very first step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FirstStep {
    /// Each of the `2d` directions with probability `1/(2d)`.
    Uniform,
    /// `+e_1` with probability `q`, every other direction with `(1-q)/(2d-1)`.
    Biased { q: f64 },
}

impl FirstStep {
    /// Probability of the first step landing on `dir`.
    pub fn probability(&self, d: usize, dir: SignedDirection) -> f64 {
        let two_d = (2 * d) as f64;
        match *self {
            FirstStep::Uniform => 1.0 / two_d,
            FirstStep::Biased { q } => {
                if dir.index() == 0 {
                    q
                } else {
                    (1.0 - q) / (two_d - 1.0)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub d: usize,
    pub p: f64,
    pub first_step: FirstStep,
    pub horizon: u64,
    pub seed: u64,
}

impl WalkConfig {
    pub fn new(d: usize, p: f64, horizon: u64, seed: u64) -> Result<Self> {
        let cfg = WalkConfig {
            d,
            p,
            first_step: FirstStep::Uniform,
            horizon,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_first_step(mut self, first_step: FirstStep) -> Result<Self> {
        self.first_step = first_step;
        self.validate()?;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: u64) -> Result<Self> {
        self.horizon = horizon;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.d)?;
        check_unit("p", self.p)?;
        if let FirstStep::Biased { q } = self.first_step {
            check_unit("q", q)?;
        }
        if self.horizon == 0 {
            return Err(MerwError::domain("horizon must be at least 1"));
        }
        Ok(())
    }

    /// The drift parameter `a = (2dp - 1)/(2d - 1)`.
    pub fn a(&self) -> f64 {
        a_of(self.d, self.p)
    }

    pub fn regime(&self) -> Regime {
        classify(self.d, self.p)
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        Err(MerwError::domain("dimension must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(MerwError::domain(format!("{name} = {x} is outside [0, 1]")))
    }
}

/// One of the `2d` signed unit vectors `±e_i`.
///
/// The axis is stored zero-based; `Display` prints the one-based name
/// (`+e1`, `-e2`, ...). Vector layouts use the fixed order
/// `(+e_1, -e_1, +e_2, -e_2, ...)`, see [`SignedDirection::index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SignedDirection {
    axis: usize,
    negative: bool,
}

impl SignedDirection {
    pub fn new(axis: usize, sign: i8) -> Self {
        debug_assert!(sign == 1 || sign == -1);
        SignedDirection {
            axis,
            negative: sign < 0,
        }
    }

    pub fn plus(axis: usize) -> Self {
        SignedDirection {
            axis,
            negative: false,
        }
    }

    pub fn minus(axis: usize) -> Self {
        SignedDirection {
            axis,
            negative: true,
        }
    }

    #[inline]
    pub fn from_index(index: usize) -> Self {
        SignedDirection {
            axis: index / 2,
            negative: index % 2 == 1,
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        2 * self.axis + self.negative as usize
    }

    /// Zero-based axis.
    #[inline]
    pub fn axis(self) -> usize {
        self.axis
    }

    #[inline]
    pub fn sign(self) -> i64 {
        if self.negative {
            -1
        } else {
            1
        }
    }

    pub fn negated(self) -> Self {
        SignedDirection {
            axis: self.axis,
            negative: !self.negative,
        }
    }

    pub fn all(d: usize) -> impl Iterator<Item = SignedDirection> {
        (0..2 * d).map(SignedDirection::from_index)
    }
}

impl fmt::Display for SignedDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.negative { '-' } else { '+' };
        write!(f, "{s}e{}", self.axis + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    Diffusive,
    Critical,
    Superdiffusive,
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegimeKind::Diffusive => "diffusive",
            RegimeKind::Critical => "critical",
            RegimeKind::Superdiffusive => "superdiffusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub kind: RegimeKind,
    pub a: f64,
    pub p_d: f64,
}

/// Phase boundary `p_d = (2d+1)/(4d)`, correctly rounded to the nearest double.
pub fn critical_memory(d: usize) -> Result<f64> {
    check_dim(d)?;
    Ok((2 * d + 1) as f64 / (4 * d) as f64)
}

pub fn critical_memory_exact(d: usize) -> Result<Rational> {
    check_dim(d)?;
    Ok(rational::ratio(2 * d as i64 + 1, 4 * d as i64))
}

/// `a = (2dp - 1)/(2d - 1)`.
pub fn memory_to_a(d: usize, p: f64) -> Result<f64> {
    check_dim(d)?;
    check_unit("p", p)?;
    Ok(a_of(d, p))
}

pub fn memory_to_a_exact(d: usize, p: &Rational) -> Result<Rational> {
    check_dim(d)?;
    if !rational::is_unit_interval(p) {
        return Err(MerwError::domain(format!("p = {p} is outside [0, 1]")));
    }
    let two_d = rational::int(2 * d as i64);
    Ok((&two_d * p - Rational::one()) / (two_d - Rational::one()))
}

#[inline]
pub(crate) fn a_of(d: usize, p: f64) -> f64 {
    let two_d = (2 * d) as f64;
    (two_d * p - 1.0) / (two_d - 1.0)
}

/// Classifies a floating-point memory parameter.
///
/// A `p` equal to the rounded `p_d` counts as critical; otherwise the side of
/// the boundary is decided by comparing `p` against the rounded `p_d`.
pub fn classify_regime(d: usize, p: f64) -> Result<Regime> {
    check_dim(d)?;
    check_unit("p", p)?;
    Ok(classify(d, p))
}

fn classify(d: usize, p: f64) -> Regime {
    let p_d = (2 * d + 1) as f64 / (4 * d) as f64;
    let kind = if p < p_d {
        RegimeKind::Diffusive
    } else if p == p_d {
        RegimeKind::Critical
    } else {
        RegimeKind::Superdiffusive
    };
    Regime {
        kind,
        a: a_of(d, p),
        p_d,
    }
}

/// Exact classification of a rational memory parameter.
pub fn classify_regime_exact(d: usize, p: &Rational) -> Result<Regime> {
    let p_d = critical_memory_exact(d)?;
    let a = memory_to_a_exact(d, p)?;
    let kind = match p.cmp(&p_d) {
        std::cmp::Ordering::Less => RegimeKind::Diffusive,
        std::cmp::Ordering::Equal => RegimeKind::Critical,
        std::cmp::Ordering::Greater => RegimeKind::Superdiffusive,
    };
    Ok(Regime {
        kind,
        a: rational::to_f64(&a),
        p_d: rational::to_f64(&p_d),
    })
}

/// Applies `sign * J_d^power` to `dir`, where `J_d e_i = e_{i-1}` (indices mod d).
pub fn apply_matrix(d: usize, power: usize, sign: i8, dir: SignedDirection) -> Result<SignedDirection> {
    check_dim(d)?;
    if power >= d {
        return Err(MerwError::domain(format!("matrix power {power} outside [0, {}]", d - 1)));
    }
    if sign != 1 && sign != -1 {
        return Err(MerwError::domain(format!("matrix sign must be +-1, got {sign}")));
    }
    if dir.axis >= d {
        return Err(MerwError::domain(format!("{dir} is not a direction in dimension {d}")));
    }
    Ok(apply_matrix_index(d, 2 * power + (sign < 0) as usize, dir))
}

/// Matrix `m` of the table `+I, -I, +J, -J, ..., +J^{d-1}, -J^{d-1}`.
#[inline]
pub(crate) fn apply_matrix_index(d: usize, m: usize, dir: SignedDirection) -> SignedDirection {
    let power = m / 2;
    let axis = (dir.axis + d - power) % d;
    SignedDirection {
        axis,
        negative: dir.negative ^ (m % 2 == 1),
    }
}

/// Signed-direction counts of the first `n` steps.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirectionCounts {
    counts: Vec<u64>,
    n: u64,
}

impl DirectionCounts {
    pub fn new(d: usize) -> Self {
        DirectionCounts {
            counts: vec![0; 2 * d],
            n: 0,
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() || counts.len() % 2 != 0 {
            return Err(MerwError::domain("counts must have length 2d with d >= 1"));
        }
        let n = counts.iter().sum();
        Ok(DirectionCounts { counts, n })
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.counts.len() / 2
    }

    #[inline]
    pub fn n(&self) -> u64 {
        self.n
    }

    #[inline]
    pub fn count(&self, dir: SignedDirection) -> u64 {
        self.counts[dir.index()]
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.counts
    }

    /// `N_n(i)`: steps taken along axis `i` (zero-based), either sign.
    pub fn axis_occupation(&self, axis: usize) -> u64 {
        self.counts[2 * axis] + self.counts[2 * axis + 1]
    }

    pub fn position(&self) -> Vec<i64> {
        self.counts
            .chunks_exact(2)
            .map(|c| c[0] as i64 - c[1] as i64)
            .collect()
    }

    #[inline]
    pub fn record(&mut self, dir: SignedDirection) {
        self.counts[dir.index()] += 1;
        self.n += 1;
    }
}

/// Law of the next step given the signed-direction counts of the past.
///
/// `P(next = δ) = p c_δ/n + (1-p)/(2d-1) (n - c_δ)/n`, in the order of
/// [`SignedDirection::index`].
pub fn step_distribution(counts: &DirectionCounts, p: f64) -> Result<Vec<f64>> {
    check_unit("p", p)?;
    if counts.n == 0 {
        return Err(MerwError::domain(
            "no past steps: the first step follows the first-step law",
        ));
    }
    let n = counts.n as f64;
    let other = (1.0 - p) / (2 * counts.d() - 1) as f64;
    Ok(counts
        .counts
        .iter()
        .map(|&c| {
            let c = c as f64;
            p * c / n + other * (n - c) / n
        })
        .collect())
}

/// Exact rational version of [`step_distribution`].
pub fn step_distribution_exact(counts: &DirectionCounts, p: &Rational) -> Result<Vec<Rational>> {
    if counts.n == 0 {
        return Err(MerwError::domain(
            "no past steps: the first step follows the first-step law",
        ));
    }
    let n = rational::int(counts.n as i64);
    let other = (Rational::one() - p) / rational::int(2 * counts.d() as i64 - 1);
    Ok(counts
        .counts
        .iter()
        .map(|&c| {
            let c = rational::int(c as i64);
            (p * &c + &other * (&n - &c)) / &n
        })
        .collect())
}

/// Exact first-step law as a vector in direction order.
pub fn first_step_law_exact(d: usize, q: Option<&Rational>) -> Vec<Rational> {
    let two_d = 2 * d as i64;
    match q {
        None => vec![rational::ratio(1, two_d); 2 * d],
        Some(q) => {
            let rest = (Rational::one() - q) / rational::int(two_d - 1);
            let mut law = vec![rest; 2 * d];
            law[0] = q.clone();
            law
        }
    }
}
