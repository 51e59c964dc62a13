//! Exact laws by exhaustive enumeration in rational arithmetic.
//!
//! [`enumerate_exact`] runs the forward recursion over count states with the
//! one-step law; [`enumerate_histories`] follows the literal full-history
//! mechanism (uniform memory index, then one of the `2d` signed permutation
//! matrices) over every history and projects onto counts. The two must agree
//! exactly, which is the engine-equivalence oracle.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use super::conditional::{conditional_eps_moments_exact, eps_moments_by_enumeration};
use crate::model::{self, DirectionCounts, SignedDirection};
use crate::rational::{self, Rational};
use crate::{MerwError, Result};

/// Cap on the number of count states at the last level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_states: u128,
}

impl Budget {
    /// 21 states for `d = 1` (n <= 20) and 455 otherwise (n <= 12 at `d = 2`).
    pub fn default_for(d: usize) -> Self {
        Budget {
            max_states: if d == 1 { 21 } else { 455 },
        }
    }

    pub fn unlimited() -> Self {
        Budget { max_states: u128::MAX }
    }
}

/// Number of `2d`-compositions of `n`, i.e. `C(n + 2d - 1, 2d - 1)`.
pub fn state_count(n: u64, d: usize) -> u128 {
    let k = (2 * d - 1) as u128;
    let mut acc: u128 = 1;
    for j in 1..=k {
        acc = match acc.checked_mul(n as u128 + j) {
            Some(v) => v / j,
            None => return u128::MAX,
        };
    }
    acc
}

fn check_budget(n: u64, d: usize, budget: Budget) -> Result<()> {
    let required = state_count(n, d);
    if required > budget.max_states {
        return Err(MerwError::Budget {
            required,
            budget: budget.max_states,
        });
    }
    Ok(())
}

/// Exact law of the counts after `n` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactLaw {
    pub d: usize,
    pub n: u64,
    pub probabilities: BTreeMap<DirectionCounts, Rational>,
}

/// Exact moments of one [`ExactLaw`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMoments {
    pub mean: Vec<Rational>,
    /// `E[S_n S_n^T]`, row-major.
    pub second: Vec<Rational>,
    /// `E[N_n(i)]`, the diagonal of `E[Σ_n]`.
    pub sigma: Vec<Rational>,
    /// `E[||M_n||²] = a_n² E[||S_n||²]`; `None` when `a_n` is undefined (`a = -1`, `n >= 2`).
    pub m_norm2: Option<Rational>,
}

/// `a_n = prod_{k<n} k/(k+a)` in rationals, `None` if some `k + a` vanishes.
pub fn gamma_ratio_exact(n: u64, a: &Rational) -> Option<Rational> {
    let mut acc = Rational::one();
    for k in 1..n {
        let k = rational::int(k as i64);
        let den = &k + a;
        if den.is_zero() {
            return None;
        }
        acc = acc * k / den;
    }
    Some(acc)
}

impl ExactLaw {
    pub fn total(&self) -> Rational {
        self.probabilities.values().fold(Rational::zero(), |acc, p| acc + p)
    }

    pub fn moments(&self, p: &Rational) -> Result<ExactMoments> {
        let d = self.d;
        let mut mean = vec![Rational::zero(); d];
        let mut second = vec![Rational::zero(); d * d];
        let mut sigma = vec![Rational::zero(); d];
        for (counts, prob) in &self.probabilities {
            let pos: Vec<Rational> = counts.position().into_iter().map(rational::int).collect();
            for i in 0..d {
                mean[i] += prob * &pos[i];
                sigma[i] += prob * rational::int(counts.axis_occupation(i) as i64);
                for j in 0..d {
                    second[i * d + j] += prob * &pos[i] * &pos[j];
                }
            }
        }
        let a = model::memory_to_a_exact(d, p)?;
        let norm2 = (0..d).fold(Rational::zero(), |acc, i| acc + &second[i * d + i]);
        let m_norm2 = gamma_ratio_exact(self.n, &a).map(|an| &an * &an * norm2);
        Ok(ExactMoments {
            mean,
            second,
            sigma,
            m_norm2,
        })
    }

    /// Law of `S_n` (several count states can share a position).
    pub fn position_law(&self) -> BTreeMap<Vec<i64>, Rational> {
        let mut out: BTreeMap<Vec<i64>, Rational> = BTreeMap::new();
        for (counts, prob) in &self.probabilities {
            *out.entry(counts.position()).or_insert_with(Rational::zero) += prob;
        }
        out
    }

    fn first(d: usize, q: Option<&Rational>) -> Self {
        let law = model::first_step_law_exact(d, q);
        let mut probabilities = BTreeMap::new();
        for (idx, prob) in law.into_iter().enumerate() {
            if prob.is_zero() {
                continue;
            }
            let mut c = DirectionCounts::new(d);
            c.record(SignedDirection::from_index(idx));
            probabilities.insert(c, prob);
        }
        ExactLaw {
            d,
            n: 1,
            probabilities,
        }
    }

    fn advance(&self, p: &Rational) -> Result<Self> {
        let mut next: BTreeMap<DirectionCounts, Rational> = BTreeMap::new();
        for (counts, prob) in &self.probabilities {
            let law = model::step_distribution_exact(counts, p)?;
            for (idx, step) in law.into_iter().enumerate() {
                if step.is_zero() {
                    continue;
                }
                let mut c = counts.clone();
                c.record(SignedDirection::from_index(idx));
                *next.entry(c).or_insert_with(Rational::zero) += prob * step;
            }
        }
        Ok(ExactLaw {
            d: self.d,
            n: self.n + 1,
            probabilities: next,
        })
    }
}

fn check_inputs(n: u64, d: usize, p: &Rational, q: Option<&Rational>) -> Result<()> {
    if n == 0 {
        return Err(MerwError::domain("enumeration needs n >= 1"));
    }
    model::memory_to_a_exact(d, p)?;
    if let Some(q) = q {
        if !rational::is_unit_interval(q) {
            return Err(MerwError::domain(format!("q = {q} is outside [0, 1]")));
        }
    }
    Ok(())
}

/// Exact laws for every `n' = 1..=n`.
pub fn enumerate_levels(
    n: u64,
    d: usize,
    p: &Rational,
    q: Option<&Rational>,
    budget: Budget,
) -> Result<Vec<ExactLaw>> {
    check_inputs(n, d, p, q)?;
    check_budget(n, d, budget)?;
    let mut levels = vec![ExactLaw::first(d, q)];
    for _ in 1..n {
        let next = levels.last().expect("non-empty").advance(p)?;
        levels.push(next);
    }
    Ok(levels)
}

/// Exact law of the counts after `n` steps (`q = None` is the uniform first step).
pub fn enumerate_exact(n: u64, d: usize, p: &Rational, q: Option<&Rational>, budget: Budget) -> Result<ExactLaw> {
    Ok(enumerate_levels(n, d, p, q, budget)?.pop().expect("n >= 1"))
}

/// Exact law of the counts under the literal history mechanism, by
/// enumerating every history, memory index and matrix.
pub fn enumerate_histories(n: u64, d: usize, p: &Rational, q: Option<&Rational>) -> Result<ExactLaw> {
    check_inputs(n, d, p, q)?;
    let histories = (2 * d as u128).checked_pow(n as u32);
    if histories.is_none_or(|h| h > 1 << 22) {
        return Err(MerwError::Budget {
            required: histories.unwrap_or(u128::MAX),
            budget: 1 << 22,
        });
    }
    let two_d = 2 * d;
    let other = (Rational::one() - p) / rational::int(two_d as i64 - 1);
    let matrix_prob: Vec<Rational> = (0..two_d).map(|m| if m == 0 { p.clone() } else { other.clone() }).collect();
    let mut level: BTreeMap<Vec<SignedDirection>, Rational> = BTreeMap::new();
    for (idx, prob) in model::first_step_law_exact(d, q).into_iter().enumerate() {
        if !prob.is_zero() {
            level.insert(vec![SignedDirection::from_index(idx)], prob);
        }
    }
    for len in 1..n {
        let pick = Rational::new(1.into(), (len as i64).into());
        let mut next: BTreeMap<Vec<SignedDirection>, Rational> = BTreeMap::new();
        for (hist, prob) in &level {
            for k in 0..hist.len() {
                for (m, mp) in matrix_prob.iter().enumerate() {
                    if mp.is_zero() {
                        continue;
                    }
                    let mut h = hist.clone();
                    h.push(model::apply_matrix_index(d, m, hist[k]));
                    *next.entry(h).or_insert_with(Rational::zero) += prob * &pick * mp;
                }
            }
        }
        level = next;
    }
    let mut probabilities: BTreeMap<DirectionCounts, Rational> = BTreeMap::new();
    for (hist, prob) in level {
        let mut c = DirectionCounts::new(d);
        for dir in hist {
            c.record(dir);
        }
        *probabilities.entry(c).or_insert_with(Rational::zero) += prob;
    }
    Ok(ExactLaw { d, n, probabilities })
}

/// `Σ_δ P(δ) (a_{n+1} S_{n+1} - a_n S_n)` at one state.
fn delta_m_mean(counts: &DirectionCounts, p: &Rational, an: &Rational, an1: &Rational) -> Result<Vec<Rational>> {
    let d = counts.d();
    let law = model::step_distribution_exact(counts, p)?;
    let pos = counts.position();
    let mut out = vec![Rational::zero(); d];
    for (idx, prob) in law.iter().enumerate() {
        let dir = SignedDirection::from_index(idx);
        for i in 0..d {
            let next = pos[i] + if i == dir.axis() { dir.sign() } else { 0 };
            out[i] += prob * (an1 * rational::int(next) - an * rational::int(pos[i]));
        }
    }
    Ok(out)
}

/// Outcome of the per-state martingale checks over enumerated levels.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleCheck {
    pub states_checked: usize,
    pub failures: Vec<String>,
    /// `E[Tr <M>_n]` for each level, `None` where `a_n` is undefined.
    pub expected_trace_qv: Vec<Option<Rational>>,
}

impl MartingaleCheck {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks on every state of `levels[..]` (transition `n -> n+1`):
///
/// * `Σ P (M_{n+1} - M_n) = 0`, or `Σ P ε_{n+1} = 0` where `a_{n+1}` is undefined;
/// * the conditional second and fourth moment formulas against direct
///   enumeration, and the bounds `1` and `4/3`;
/// * `E[ε ε^T | F_n]` against the formula for the `<M>` increment, whose
///   trace is at most `1`, so that `Tr <M>_n <= v_n` on every path;
/// * `E[Tr <M>_n] = E[||M_n||²]` level by level.
pub fn check_martingale(levels: &[ExactLaw], p: &Rational) -> Result<MartingaleCheck> {
    let Some(first) = levels.first() else {
        return Err(MerwError::domain("no levels to check"));
    };
    let d = first.d;
    let a = model::memory_to_a_exact(d, p)?;
    let mut failures = Vec::new();
    let mut states_checked = 0;

    // <M>_1 = a_1² E[S_1 S_1^T], trace 1
    let mut qv: Option<Rational> = Some(Rational::one());
    let mut expected_trace_qv = vec![qv.clone()];
    for level in levels {
        let n = level.n;
        let an = gamma_ratio_exact(n, &a);
        let an1 = gamma_ratio_exact(n + 1, &a);
        let mut increment = Rational::zero();
        for (counts, prob) in &level.probabilities {
            states_checked += 1;
            let (mean, m2, m4, cov) = eps_moments_by_enumeration(counts, p)?;
            let formula = conditional_eps_moments_exact(counts, p)?;
            let tag = || format!("n={n} counts={:?}", counts.as_slice());
            let drift_free = match (&an, &an1) {
                (Some(an), Some(an1)) => delta_m_mean(counts, p, an, an1)?.iter().all(|m| m.is_zero()),
                // a_{n+1} undefined: ΔM = a_{n+1} ε, so check E[ε | F_n] = 0 instead
                _ => mean.iter().all(|m| m.is_zero()),
            };
            if !drift_free {
                failures.push(format!("{}: E[ΔM | F_n] != 0", tag()));
            }
            if m2 != formula.second || m4 != formula.fourth || cov != formula.covariance {
                failures.push(format!("{}: conditional moments disagree with the formulas", tag()));
            }
            if m2 > Rational::one() || m4.clone() * rational::int(3) > rational::int(4) {
                failures.push(format!("{}: conditional moment bound violated", tag()));
            }
            let trace = (0..d).fold(Rational::zero(), |acc, i| acc + &cov[i * d + i]);
            if trace > Rational::one() {
                failures.push(format!("{}: Tr <M> increment exceeds a_(n+1)^2", tag()));
            }
            increment += prob * trace;
        }
        if levels.last().map(|l| l.n) == Some(n) {
            break;
        }
        qv = match (qv, an1) {
            (Some(q), Some(an1)) => Some(q + &an1 * &an1 * increment),
            _ => None,
        };
        expected_trace_qv.push(qv.clone());
    }
    for (level, qv) in levels.iter().zip(&expected_trace_qv) {
        let m = level.moments(p)?;
        if m.m_norm2 != *qv {
            failures.push(format!("n={}: E[Tr <M>_n] != E[||M_n||^2]", level.n));
        }
    }
    Ok(MartingaleCheck {
        states_checked,
        failures,
        expected_trace_qv,
    })
}
