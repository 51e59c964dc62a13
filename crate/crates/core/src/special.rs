//! Log-Gamma, Gamma ratios and a small double-double type.
//!
//! Gamma ratios such as `Γ(n+a)/Γ(n)` are never formed from raw Gamma values:
//! `Γ(x)` overflows near `x = 171`, and the difference of two large
//! `ln Γ` values loses most of its digits. [`ln_gamma_ratio`] evaluates the
//! difference directly from the Stirling series with `ln_1p`, which keeps
//! full relative accuracy for `x` up to `10^16`.

use std::f64::consts::PI;

use crate::{MerwError, Result};

/// Below this the argument is shifted up before using the Stirling series.
const STIRLING_MIN: f64 = 15.0;

/// `B_{2k} / (2k (2k-1))` for k = 1..8.
const STIRLING_COEFFS: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
];

/// `sum_k c_k z^{1-2k}`, the correction to `(z - 1/2) ln z - z + ln(2π)/2`.
fn stirling_tail(z: f64) -> f64 {
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut acc = 0.0;
    for c in STIRLING_COEFFS.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(MerwError::domain(format!("ln_gamma needs x > 0, got {x}")));
    }
    let mut z = x;
    let mut log_shift = 0.0;
    if z < STIRLING_MIN {
        let mut prod = 1.0;
        while z < STIRLING_MIN {
            prod *= z;
            z += 1.0;
        }
        log_shift = prod.ln();
    }
    Ok((z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + stirling_tail(z) - log_shift)
}

/// `Γ(x)` for `x > 0` (may overflow to `inf` past `x ≈ 171.6`).
pub fn gamma(x: f64) -> Result<f64> {
    Ok(ln_gamma(x)?.exp())
}

/// `ln Γ(x + h) - ln Γ(x)` for `x > 0`, `x + h > 0`.
pub fn ln_gamma_ratio(x: f64, h: f64) -> Result<f64> {
    let y = x + h;
    if !(x > 0.0 && y > 0.0) || !x.is_finite() || !h.is_finite() {
        return Err(MerwError::domain(format!(
            "ln_gamma_ratio needs x > 0 and x + h > 0, got x = {x}, h = {h}"
        )));
    }
    if h == 0.0 {
        return Ok(0.0);
    }
    // Γ(x+h)/Γ(x) = Γ(x+m+h)/Γ(x+m) * prod_{j<m} (x+j)/(x+h+j)
    let mut lo = x;
    let mut back = 0.0;
    while lo.min(lo + h) < STIRLING_MIN {
        back += (h / lo).ln_1p();
        lo += 1.0;
    }
    let hi = lo + h;
    let main = (lo - 0.5) * (h / lo).ln_1p() + h * hi.ln() - h;
    Ok(main + (stirling_tail(hi) - stirling_tail(lo)) - back)
}

/// `Γ(x + n) / (Γ(x) n!)`, i.e. the rising factorial `(x)_n / n!`.
///
/// Valid for `x >= -2` (the only range the walk needs, `x = 2a` with
/// `a >= -1`) and any `n`, including the removable poles of `Γ(x)`.
pub fn rising_over_factorial(x: f64, n: u64) -> Result<f64> {
    if !(x >= -2.0) || !x.is_finite() {
        return Err(MerwError::domain(format!("rising_over_factorial needs x >= -2, got {x}")));
    }
    match n {
        0 => Ok(1.0),
        1 => Ok(x),
        2 => Ok(x * (x + 1.0) / 2.0),
        // the factor x + 2 vanishes
        _ if x == -2.0 => Ok(0.0),
        _ => {
            let nf = n as f64;
            let log_ratio = ln_gamma_ratio(nf + 1.0, x - 1.0)?;
            if x > 0.0 {
                Ok((log_ratio - ln_gamma(x)?).exp())
            } else {
                // (x)_n = x (x+1) (x+2)_{n-2},  n! = 2 (3)_{n-2}
                Ok(x * (x + 1.0) * (log_ratio - ln_gamma(x + 2.0)?).exp())
            }
        }
    }
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl DoubleDouble {
    pub const ONE: DoubleDouble = DoubleDouble { hi: 1.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn add(self, other: DoubleDouble) -> DoubleDouble {
        let (s, e) = two_sum(self.hi, other.hi);
        let (t, f) = two_sum(self.lo, other.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DoubleDouble { hi, lo }
    }

    #[inline]
    pub fn mul(self, other: DoubleDouble) -> DoubleDouble {
        let p = self.hi * other.hi;
        let e = self.hi.mul_add(other.hi, -p) + (self.hi * other.lo + self.lo * other.hi);
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }

    #[inline]
    pub fn div(self, other: DoubleDouble) -> DoubleDouble {
        let q1 = self.hi / other.hi;
        let r = self.add(other.mul(DoubleDouble::from_f64(-q1)));
        let q2 = r.hi / other.hi;
        let r = r.add(other.mul(DoubleDouble::from_f64(-q2)));
        let q3 = r.hi / other.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DoubleDouble { hi, lo }.add(DoubleDouble::from_f64(q3))
    }

    /// Exact sum of two doubles.
    #[inline]
    pub fn sum_of(a: f64, b: f64) -> DoubleDouble {
        let (hi, lo) = two_sum(a, b);
        DoubleDouble { hi, lo }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with mpmath at 30 digits.
    const LN_GAMMA_REF: [(f64, f64); 8] = [
        (0.5, 0.572364942924700087071713675677),
        (1.0, 0.0),
        (1.4, -0.119612914172371298638791249376),
        (2.5, 0.284682870472919159632494669683),
        (10.0, 12.8018274800814696112077178746),
        (14.999, 25.1885468705469264246241604639),
        (171.5, 709.143163030928242272363904617),
        (1.0e7, 151180949.369473913940105582879),
    ];

    #[test]
    fn ln_gamma_matches_reference() {
        for (x, want) in LN_GAMMA_REF {
            let got = ln_gamma(x).unwrap();
            let tol = 1e-14 * want.abs().max(1.0);
            assert!((got - want).abs() <= tol, "x={x}: {got} vs {want}");
        }
        assert!(ln_gamma(0.0).is_err());
        assert!(ln_gamma(-1.5).is_err());
    }

    #[test]
    fn gamma_known_values() {
        assert!((gamma(0.5).unwrap() - PI.sqrt()).abs() < 2e-14);
        assert!((gamma(1.5).unwrap() - PI.sqrt() / 2.0).abs() < 1e-14);
        assert!((gamma(5.0).unwrap() - 24.0).abs() < 1e-12);
        // Γ(1.4) from mpmath
        assert!((gamma(1.4).unwrap() - 0.887_263_817_503_075_3).abs() < 1e-14);
    }

    #[test]
    fn ratio_matches_reference_at_large_argument() {
        // mpmath: loggamma(1e7 + 0.7) - loggamma(1e7)
        let want = 11.2826669451708239216881681898;
        let got = ln_gamma_ratio(1.0e7, 0.7).unwrap();
        assert!((got - want).abs() < 1e-14 * want, "{got}");
        // mpmath: loggamma(3.3) - loggamma(1.2)
        let want = 1.07247266789805043759838212792;
        let got = ln_gamma_ratio(1.2, 2.1).unwrap();
        assert!((got - want).abs() < 1e-14, "{got}");
        // negative shift: loggamma(20 - 0.9) - loggamma(20)
        let want = -2.6523800186151398223888814401;
        let got = ln_gamma_ratio(20.0, -0.9).unwrap();
        assert!((got - want).abs() < 1e-14, "{got}");
    }

    #[test]
    fn ratio_agrees_with_difference_where_safe() {
        for &(x, h) in &[(0.3, 0.4), (3.0, -2.5), (16.0, 1.0), (40.5, 0.25)] {
            let direct = ln_gamma(x + h).unwrap() - ln_gamma(x).unwrap();
            assert!((ln_gamma_ratio(x, h).unwrap() - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn rising_factorial_small_cases_are_products() {
        for &x in &[-2.0, -1.9, -1.0, -0.5, 0.0, 0.3, 1.0, 1.7] {
            let mut prod = 1.0;
            for n in 0..40u64 {
                let got = rising_over_factorial(x, n).unwrap();
                assert!(
                    (got - prod).abs() <= 1e-13 * prod.abs().max(1e-300) + 1e-300,
                    "x={x} n={n}: {got} vs {prod}"
                );
                prod *= (x + n as f64) / (n + 1) as f64;
            }
        }
    }

    #[test]
    fn double_double_division() {
        let third = DoubleDouble::ONE.div(DoubleDouble::from_f64(3.0));
        let back = third.mul(DoubleDouble::from_f64(3.0));
        assert!((back.hi - 1.0).abs() + back.lo.abs() < 1e-31);
        let x = DoubleDouble::sum_of(1.0, 1e-20);
        assert_eq!(x.hi, 1.0);
        assert_eq!(x.lo, 1e-20);
    }
}
