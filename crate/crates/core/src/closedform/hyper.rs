//! `3F2(1,1,1; a+1,a+1; 1) = Σ_{k>=0} (Γ(a+1)Γ(k+1)/Γ(a+k+1))²`, the limit of
//! `v_n` when `a > 1/2`.
//!
//! Terms decay like `k^{-2a}`, which is hopeless for plain truncation near
//! `a = 1/2`. The tail past `N` is instead bracketed in closed form: the
//! Gamma ratio sits between two shifted powers (Kershaw's inequality for the
//! fractional part of `a`, elementary bounds for the integer part), and sums
//! of shifted powers sit between an integral and its midpoint version by
//! convexity. The estimate is the partial sum plus the bracket midpoint; the
//! reported bound is the bracket half-width plus a rounding allowance.

use serde::Serialize;

use crate::special::{self, DoubleDouble};
use crate::{MerwError, Result};

/// Partial sums are extended up to this many terms before giving up.
const MAX_TERMS: u64 = 1 << 36;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hyper3F2 {
    pub value: f64,
    /// `|value - true value| <= bound`.
    pub bound: f64,
    /// Terms summed explicitly.
    pub terms: u64,
    /// Partial sum of the first `terms` terms; equals `v_terms`.
    pub partial_sum: f64,
    /// Lower and upper bounds on the tail past `terms`.
    pub tail_lower: f64,
    pub tail_upper: f64,
}

/// Shifts `(c_small, c_big)` with `(k + c_small)^a <= Γ(k+1+a)/Γ(k+1) <= (k + c_big)^a`
/// for every `k >= 0`.
pub(crate) fn ratio_shifts(a: f64) -> (f64, f64) {
    let m = a.ceil() - 1.0;
    let beta = a - m;
    // Γ(y+1)/Γ(y+s) with y = k+β, s = 1-β  (Kershaw, 0 < s < 1)
    let (c_lo, c_hi) = if beta >= 1.0 {
        (1.0, 1.0)
    } else {
        ((1.0 + beta) / 2.0, beta - 0.5 + (1.25 - beta).sqrt())
    };
    if m == 0.0 {
        (c_lo, c_hi)
    } else {
        // integer part: prod_{j=1}^m (k + β + j)
        (c_lo.min(beta + 1.0), c_hi.max(beta + m))
    }
}

/// Bracket on `Σ_{k>=n} t_k` with `t_k = (Γ(a+1)Γ(k+1)/Γ(a+k+1))²`.
pub(crate) fn tail_bracket(a: f64, n: u64) -> Result<(f64, f64)> {
    let (c_small, c_big) = ratio_shifts(a);
    let s = 2.0 * a;
    let ln_g2 = 2.0 * special::ln_gamma(a + 1.0)?;
    let nf = n as f64;
    let ln_s1 = (s - 1.0).ln();
    // Σ_{k>=n} (k+c)^{-s} >= ∫_n^∞ + φ(n)/2
    let x = nf + c_big;
    let lower = (ln_g2 + (1.0 - s) * x.ln() - ln_s1).exp() + 0.5 * (ln_g2 - s * x.ln()).exp();
    // Σ_{k>=n} (k+c)^{-s} <= ∫_{n-1/2}^∞
    let x = nf - 0.5 + c_small;
    let upper = (ln_g2 + (1.0 - s) * x.ln() - ln_s1).exp();
    Ok((lower, upper))
}

/// Evaluates the unit-argument `3F2` to within `tol`.
pub fn hyper3f2_unit(a: f64, tol: f64) -> Result<Hyper3F2> {
    if !(a > 0.5) || !a.is_finite() {
        return Err(MerwError::Divergence(format!(
            "3F2(1,1,1; a+1,a+1; 1) needs a > 1/2, got {a}"
        )));
    }
    if !(tol > 0.0) {
        return Err(MerwError::domain(format!("tolerance must be positive, got {tol}")));
    }
    let mut term = DoubleDouble::ONE;
    let mut sum = DoubleDouble::default();
    let mut k = 0u64;
    let mut target = 64u64;
    loop {
        while k < target {
            sum = sum.add(term);
            let kf = (k + 1) as f64;
            let ratio = DoubleDouble::from_f64(kf).div(DoubleDouble::sum_of(kf, a));
            term = term.mul(ratio).mul(ratio);
            k += 1;
        }
        let (lo, hi) = tail_bracket(a, k)?;
        let partial = sum.value();
        let rounding = 8.0 * f64::EPSILON * (partial + hi);
        let bound = 0.5 * (hi - lo) + rounding;
        if bound <= tol {
            return Ok(Hyper3F2 {
                value: partial + 0.5 * (lo + hi),
                bound,
                terms: k,
                partial_sum: partial,
                tail_lower: lo,
                tail_upper: hi,
            });
        }
        if target >= MAX_TERMS {
            return Err(MerwError::Divergence(format!(
                "tolerance {tol} not reached after {k} terms (bound {bound})"
            )));
        }
        target *= 2;
    }
}
