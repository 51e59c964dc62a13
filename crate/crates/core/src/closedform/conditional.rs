//! Conditional moments of the martingale difference `ε_{n+1} = S_{n+1} - γ_n S_n`.
//!
//! Given `F_n`, `ε_{n+1} = X_{n+1} - μ` with `μ = (a/n) S_n = E[X_{n+1} | F_n]`.
//! With `u² = ||μ||²` and `ξ_n = (a/n) S_n^T Σ_n S_n + (1-a)/d ||S_n||²`:
//!
//! * `E[||ε||² | F_n] = 1 - u²`
//! * `E[||ε||⁴ | F_n] = 1 - 2u² - 3u⁴ + 4 (a/n)² ξ_n`
//! * `E[ε ε^T | F_n] = (a/n) Σ_n + (1-a)/d I - μ μ^T`

use num_traits::{One, Zero};
use serde::Serialize;

use crate::model::{self, DirectionCounts};
use crate::rational::{self, Rational};
use crate::{MerwError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsMoments {
    pub second: f64,
    pub fourth: f64,
    pub xi: f64,
}

fn check_state(counts: &DirectionCounts) -> Result<()> {
    if counts.n() == 0 {
        return Err(MerwError::domain("conditional moments need n >= 1"));
    }
    Ok(())
}

/// Both conditional moments of `ε_{n+1}` from the counts of the first `n` steps.
pub fn conditional_eps_moments(counts: &DirectionCounts, p: f64) -> Result<EpsMoments> {
    check_state(counts)?;
    let d = counts.d();
    let a = model::memory_to_a(d, p)?;
    let n = counts.n() as f64;
    let pos = counts.position();
    let norm2: f64 = pos.iter().map(|&s| (s * s) as f64).sum();
    let quad: f64 = (0..d)
        .map(|i| (pos[i] * pos[i]) as f64 * counts.axis_occupation(i) as f64)
        .sum();
    let r = a / n;
    let xi = r * quad + (1.0 - a) / d as f64 * norm2;
    let u2 = r * r * norm2;
    Ok(EpsMoments {
        second: 1.0 - u2,
        fourth: 1.0 - 2.0 * u2 - 3.0 * u2 * u2 + 4.0 * r * r * xi,
        xi,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsMomentsExact {
    pub second: Rational,
    pub fourth: Rational,
    /// `E[ε ε^T | F_n]`, row-major.
    pub covariance: Vec<Rational>,
}

/// Rational version of [`conditional_eps_moments`], plus the conditional covariance.
pub fn conditional_eps_moments_exact(counts: &DirectionCounts, p: &Rational) -> Result<EpsMomentsExact> {
    check_state(counts)?;
    let d = counts.d();
    let a = model::memory_to_a_exact(d, p)?;
    let r = &a / rational::int(counts.n() as i64);
    let drift = (Rational::one() - &a) / rational::int(d as i64);
    let pos: Vec<Rational> = counts.position().into_iter().map(rational::int).collect();
    let norm2 = pos.iter().fold(Rational::zero(), |acc, s| acc + s * s);
    let quad = (0..d).fold(Rational::zero(), |acc, i| {
        acc + &pos[i] * &pos[i] * rational::int(counts.axis_occupation(i) as i64)
    });
    let xi = &r * quad + &drift * &norm2;
    let u2 = &r * &r * &norm2;
    let two = rational::int(2);
    let three = rational::int(3);
    let four = rational::int(4);
    let fourth = Rational::one() - &two * &u2 - &three * &u2 * &u2 + four * &r * &r * xi;
    let mut covariance = vec![Rational::zero(); d * d];
    for i in 0..d {
        for j in 0..d {
            let mut c = -(&r * &r * &pos[i] * &pos[j]);
            if i == j {
                c += &r * rational::int(counts.axis_occupation(i) as i64) + &drift;
            }
            covariance[i * d + j] = c;
        }
    }
    Ok(EpsMomentsExact {
        second: Rational::one() - u2,
        fourth,
        covariance,
    })
}

/// Conditional moments computed directly from the one-step law: returns
/// `(E[ε], E[||ε||²], E[||ε||⁴], E[ε ε^T])` given the counts.
pub fn eps_moments_by_enumeration(
    counts: &DirectionCounts,
    p: &Rational,
) -> Result<(Vec<Rational>, Rational, Rational, Vec<Rational>)> {
    let d = counts.d();
    let law = model::step_distribution_exact(counts, p)?;
    let a = model::memory_to_a_exact(d, p)?;
    let r = &a / rational::int(counts.n() as i64);
    let mu: Vec<Rational> = counts.position().into_iter().map(|s| &r * rational::int(s)).collect();
    let mut mean = vec![Rational::zero(); d];
    let mut m2 = Rational::zero();
    let mut m4 = Rational::zero();
    let mut cov = vec![Rational::zero(); d * d];
    for (idx, prob) in law.iter().enumerate() {
        if prob.is_zero() {
            continue;
        }
        let dir = model::SignedDirection::from_index(idx);
        let eps: Vec<Rational> = (0..d)
            .map(|i| {
                let x = if i == dir.axis() { rational::int(dir.sign()) } else { Rational::zero() };
                x - &mu[i]
            })
            .collect();
        let sq = eps.iter().fold(Rational::zero(), |acc, e| acc + e * e);
        for i in 0..d {
            mean[i] += prob * &eps[i];
            for j in 0..d {
                cov[i * d + j] += prob * &eps[i] * &eps[j];
            }
        }
        m4 += prob * &sq * &sq;
        m2 += prob * sq;
    }
    Ok((mean, m2, m4, cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use proptest::prelude::*;

    #[test]
    fn origin_has_unit_second_moment() {
        let c = DirectionCounts::from_counts(vec![3, 3, 2, 2]).unwrap();
        let m = conditional_eps_moments(&c, 0.4).unwrap();
        assert_eq!(m.second, 1.0);
    }

    #[test]
    fn two_plus_steps_in_one_dimension() {
        let c = DirectionCounts::from_counts(vec![2, 0]).unwrap();
        for &p in &[0.0, 0.3, 0.75, 1.0] {
            let a = 2.0 * p - 1.0;
            let m = conditional_eps_moments(&c, p).unwrap();
            assert!((m.second - (1.0 - a * a)).abs() < 1e-15);
        }
        let p = ratio(3, 10);
        let (_, m2, _, _) = eps_moments_by_enumeration(&c, &p).unwrap();
        let a = ratio(-2, 5);
        assert_eq!(m2, Rational::one() - &a * &a);
    }

    fn state() -> impl Strategy<Value = (DirectionCounts, u32)> {
        (1usize..4)
            .prop_flat_map(|d| (prop::collection::vec(0u64..12, 2 * d), 0u32..=20))
            .prop_filter("n >= 1", |(c, _)| c.iter().sum::<u64>() > 0)
            .prop_map(|(c, p)| (DirectionCounts::from_counts(c).unwrap(), p))
    }

    proptest! {
        #[test]
        fn formulas_match_enumeration((counts, p20) in state()) {
            let p = ratio(p20 as i64, 20);
            let exact = conditional_eps_moments_exact(&counts, &p).unwrap();
            let (mean, m2, m4, cov) = eps_moments_by_enumeration(&counts, &p).unwrap();
            prop_assert!(mean.iter().all(|m| m.is_zero()));
            prop_assert_eq!(&exact.second, &m2);
            prop_assert_eq!(&exact.fourth, &m4);
            prop_assert_eq!(&exact.covariance, &cov);
            prop_assert!(m2 <= Rational::one());
            prop_assert!(m4 * rational::int(3) <= rational::int(4));

            let float = conditional_eps_moments(&counts, p20 as f64 / 20.0).unwrap();
            prop_assert!((float.second - rational::to_f64(&exact.second)).abs() < 1e-12);
            prop_assert!((float.fourth - rational::to_f64(&exact.fourth)).abs() < 1e-12);
        }
    }
}
