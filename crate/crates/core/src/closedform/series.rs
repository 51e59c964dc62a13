//! The martingale normaliser `a_n = Γ(a+1)Γ(n)/Γ(n+a)` and `v_n = Σ a_k²`.

use serde::Serialize;

use crate::special::{self, DoubleDouble};
use crate::{MerwError, Result};

pub(crate) fn check_a(a: f64) -> Result<()> {
    if !(a > -1.0) || !a.is_finite() {
        return Err(MerwError::domain(format!("the normaliser needs a > -1, got {a}")));
    }
    Ok(())
}

/// Streams `(n, a_n, v_n)` for `n = 1, 2, ...`.
///
/// Uses `a_{n+1} = a_n n/(n+a)` carried in double-double arithmetic, so the
/// accumulated rounding stays near `1e-30` relative instead of growing like
/// `n` ulps.
#[derive(Debug, Clone)]
pub struct GammaRatioIter {
    a: f64,
    n: u64,
    an: DoubleDouble,
    vn: DoubleDouble,
}

impl GammaRatioIter {
    pub fn new(a: f64) -> Result<Self> {
        check_a(a)?;
        Ok(GammaRatioIter {
            a,
            n: 0,
            an: DoubleDouble::ONE,
            vn: DoubleDouble::default(),
        })
    }
}

impl Iterator for GammaRatioIter {
    type Item = (u64, f64, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.n > 0 {
            let n = self.n as f64;
            let factor = DoubleDouble::from_f64(n).div(DoubleDouble::sum_of(n, self.a));
            self.an = self.an.mul(factor);
        }
        self.n += 1;
        self.vn = self.vn.add(self.an.mul(self.an));
        Some((self.n, self.an.value(), self.vn.value()))
    }
}

/// `a_1..a_N` and `v_1..v_N` for one value of `a`.
#[derive(Debug, Clone, Serialize)]
pub struct GammaRatioSeries {
    pub a: f64,
    pub values: Vec<f64>,
    pub partial_sums: Vec<f64>,
}

impl GammaRatioSeries {
    pub fn new(a: f64, len: usize) -> Result<Self> {
        let (values, partial_sums) = GammaRatioIter::new(a)?
            .take(len)
            .map(|(_, an, vn)| (an, vn))
            .unzip();
        Ok(GammaRatioSeries {
            a,
            values,
            partial_sums,
        })
    }

    /// `a_n`, one-based.
    pub fn an(&self, n: usize) -> f64 {
        self.values[n - 1]
    }

    /// `v_n`, one-based.
    pub fn vn(&self, n: usize) -> f64 {
        self.partial_sums[n - 1]
    }
}

/// `a_n` by the product recurrence.
pub fn gamma_ratio_an(n: u64, a: f64) -> Result<f64> {
    if n == 0 {
        return Err(MerwError::domain("a_n is indexed from n = 1"));
    }
    let mut it = GammaRatioIter::new(a)?;
    Ok(it.nth((n - 1) as usize).map(|(_, an, _)| an).unwrap_or(f64::NAN))
}

/// `a_n = exp(ln Γ(a+1) + ln Γ(n) - ln Γ(n+a))`, the independent closed-form route.
pub fn gamma_ratio_an_closed(n: u64, a: f64) -> Result<f64> {
    check_a(a)?;
    if n == 0 {
        return Err(MerwError::domain("a_n is indexed from n = 1"));
    }
    Ok((special::ln_gamma(a + 1.0)? - special::ln_gamma_ratio(n as f64, a)?).exp())
}

/// `v_n = Σ_{k=1}^n a_k²`.
pub fn vn(n: u64, a: f64) -> Result<f64> {
    if n == 0 {
        return Err(MerwError::domain("v_n is indexed from n = 1"));
    }
    let mut it = GammaRatioIter::new(a)?;
    Ok(it.nth((n - 1) as usize).map(|(_, _, v)| v).unwrap_or(f64::NAN))
}

/// Leading behaviour of `v_n` for the regime of `a`: the value of
/// `v_n / n^{1-2a}`, `v_n / ln n` or `v_n` that the ratio converges to.
pub fn vn_asymptote(a: f64) -> Result<VnAsymptote> {
    check_a(a)?;
    let g2 = special::gamma(a + 1.0)?.powi(2);
    Ok(if a < 0.5 {
        VnAsymptote::Power {
            exponent: 1.0 - 2.0 * a,
            constant: g2 / (1.0 - 2.0 * a),
        }
    } else if a == 0.5 {
        VnAsymptote::Logarithmic { constant: g2 }
    } else {
        VnAsymptote::Finite
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VnAsymptote {
    /// `v_n ~ constant * n^exponent`.
    Power { exponent: f64, constant: f64 },
    /// `v_n ~ constant * ln n`.
    Logarithmic { constant: f64 },
    /// `v_n` converges; see [`super::hyper3f2_unit`].
    Finite,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn first_values() {
        for &a in &[-0.5, 0.0, 1.0 / 3.0, 0.5, 0.9, 1.0] {
            assert_eq!(gamma_ratio_an(1, a).unwrap(), 1.0);
            let a2 = gamma_ratio_an(2, a).unwrap();
            assert!((a2 - 1.0 / (1.0 + a)).abs() < 1e-16);
            assert_eq!(vn(1, a).unwrap(), 1.0);
        }
        assert!(gamma_ratio_an(3, -1.0).is_err());
        assert!(gamma_ratio_an(0, 0.3).is_err());
    }

    #[test]
    fn recurrence_matches_log_gamma() {
        for &a in &[-0.9, -0.2, 0.3, 0.5, 0.8, 1.0] {
            let mut it = GammaRatioIter::new(a).unwrap();
            for (n, an, _) in it.by_ref().take(2000) {
                let closed = gamma_ratio_an_closed(n, a).unwrap();
                assert!((an - closed).abs() <= 1e-13 * closed, "a={a} n={n}");
            }
        }
    }

    #[test]
    fn recurrence_matches_log_gamma_at_ten_million() {
        for &a in &[0.3, 0.5, 0.7] {
            let n = 10_000_000;
            let rec = gamma_ratio_an(n, a).unwrap();
            let closed = gamma_ratio_an_closed(n, a).unwrap();
            assert!((rec - closed).abs() <= 1e-12 * closed, "a={a}: {rec} vs {closed}");
        }
    }

    #[test]
    fn scaled_normaliser_tends_to_gamma() {
        let n = 1_000_000u64;
        let an = gamma_ratio_an(n, 0.5).unwrap();
        let want = PI.sqrt() / 2.0;
        assert!(((n as f64).sqrt() * an / want - 1.0).abs() < 1e-5);
    }

    #[test]
    fn normaliser_partial_sums_telescope() {
        // (a - 1) Σ_{k=2}^n a_k = 1 - n a_n, from a_{k+1} (k + a) = k a_k.
        for &a in &[-0.7, -0.25, 0.2, 0.5, 0.75, 0.95] {
            let mut sum = 0.0;
            for (n, an, _) in GammaRatioIter::new(a).unwrap().take(5000) {
                if n >= 2 {
                    sum += an;
                }
                let rhs = (1.0 - n as f64 * an) / (a - 1.0);
                assert!((sum - rhs).abs() <= 1e-11 * rhs.abs().max(1.0), "a={a} n={n}: {sum} vs {rhs}");
            }
        }
    }

    #[test]
    fn vn_nondecreasing() {
        let s = GammaRatioSeries::new(-0.4, 500).unwrap();
        assert!(s.partial_sums.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(s.an(1), 1.0);
        assert_eq!(s.vn(1), 1.0);
    }

    #[test]
    fn vn_diffusive_asymptote() {
        // v_n / n^{1/3} -> 3 Γ(4/3)^2, 1% at n = 10^6
        let n = 1_000_000;
        let v = vn(n, 1.0 / 3.0).unwrap();
        let VnAsymptote::Power { exponent, constant } = vn_asymptote(1.0 / 3.0).unwrap() else {
            panic!()
        };
        assert!((exponent - 1.0 / 3.0).abs() < 1e-15);
        assert!((constant - 3.0 * special::gamma(4.0 / 3.0).unwrap().powi(2)).abs() < 1e-14);
        let ratio = v / (n as f64).powf(exponent);
        assert!((ratio / constant - 1.0).abs() < 0.01, "{ratio} vs {constant}");
    }

    #[test]
    fn vn_critical_approaches_pi_over_four_from_above() {
        // v_n = (π/4) ln n + C + o(1); the ratio is still ~7% high at 10^6.
        let VnAsymptote::Logarithmic { constant } = vn_asymptote(0.5).unwrap() else {
            panic!()
        };
        assert!((constant - PI / 4.0).abs() < 1e-14);
        let mut offsets = vec![];
        let mut ratios = vec![];
        for (n, _, v) in GammaRatioIter::new(0.5).unwrap().take(1_000_000) {
            if n.is_power_of_two() || n == 1_000_000 {
                let ln = (n as f64).ln();
                ratios.push(v / ln);
                offsets.push(v - constant * ln);
            }
        }
        assert!(ratios[1..].windows(2).all(|w| w[1] < w[0]));
        let last = *offsets.last().unwrap();
        let prev = offsets[offsets.len() - 2];
        assert!((last - prev).abs() < 1e-5, "offset not settled: {prev} {last}");
    }

    #[test]
    fn vn_against_independent_closed_form_terms() {
        // Σ exp(2 (ln Γ(a+1) + ln Γ(k) - ln Γ(k+a)))
        let a = 0.8;
        let mut direct = 0.0;
        for k in 1..=5000u64 {
            direct += gamma_ratio_an_closed(k, a).unwrap().powi(2);
        }
        assert!((vn(5000, a).unwrap() - direct).abs() < 1e-12);
    }
}
