//! Finite-`n` moments of `S_n` and the limit constants of each regime.

use std::io::Write;

use num_traits::One;
use serde::Serialize;

use super::hyper::{hyper3f2_unit, Hyper3F2};
use super::series::{vn_asymptote, VnAsymptote};
use crate::model::{self, FirstStep, Regime, RegimeKind};
use crate::numfmt::sig17;
use crate::rational::{self, Rational};
use crate::special;
use crate::{MerwError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRow {
    pub n: u64,
    /// `E[S_n]`.
    pub mean: Vec<f64>,
    /// `E[S_n S_n^T]`, row-major `d x d`.
    pub second: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTable {
    pub d: usize,
    pub first_step: FirstStep,
    pub rows: Vec<MomentRow>,
}

impl MomentTable {
    pub fn row(&self, n: u64) -> Option<&MomentRow> {
        self.rows.get(n.checked_sub(1)? as usize)
    }

    pub fn last(&self) -> &MomentRow {
        self.rows.last().expect("moment tables have at least one row")
    }

    pub fn csv_header(d: usize) -> String {
        let mut cols = vec!["n".to_string()];
        cols.extend((1..=d).map(|i| format!("e_s{i}")));
        for i in 1..=d {
            cols.extend((1..=d).map(|j| format!("cov_{i}_{j}")));
        }
        cols.join(",")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::csv_header(self.d))?;
        for row in &self.rows {
            let mut line = row.n.to_string();
            for x in row.mean.iter().chain(&row.second) {
                line.push(',');
                line.push_str(&sig17(*x));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Per-axis `P(X_1 on axis i)`, which is also `E[N_1(i)]` and the diagonal of `E[S_1 S_1^T]`.
fn first_occupation(d: usize, first_step: FirstStep) -> Vec<f64> {
    match first_step {
        FirstStep::Uniform => vec![1.0 / d as f64; d],
        FirstStep::Biased { q } => {
            let other = (1.0 - q) / (2 * d - 1) as f64;
            let mut v = vec![2.0 * other; d];
            v[0] = q + other;
            v
        }
    }
}

fn first_mean(d: usize, first_step: FirstStep) -> Vec<f64> {
    let mut mean = vec![0.0; d];
    if let FirstStep::Biased { q } = first_step {
        mean[0] = (2.0 * d as f64 * q - 1.0) / (2 * d - 1) as f64;
    }
    mean
}

/// Moment table for `n = 1..=horizon` from the exact one-step recurrences
///
/// `E[S_{n+1}] = (1 + a/n) E[S_n]`,
/// `E[S_{n+1}S_{n+1}^T] = (1 + 2a/n) E[S_n S_n^T] + (a/n) E[Σ_n] + (1-a)/d I`,
/// `E[N_{n+1}(i)] = (1 + a/n) E[N_n(i)] + (1-a)/d`.
///
/// Under the uniform first step `E[Σ_n] = (n/d) I` and the middle line
/// collapses to `(1 + 2a/n) E[S_n S_n^T] + I/d`. The biased first step keeps
/// the occupation recursion, which stays exact because the conditional axis
/// law depends on the past only through `N_n(i)`.
pub fn exact_second_moment(horizon: u64, d: usize, p: f64, first_step: FirstStep) -> Result<MomentTable> {
    if horizon == 0 {
        return Err(MerwError::domain("moment tables start at n = 1"));
    }
    let cfg = model::WalkConfig::new(d, p, horizon, 0)?.with_first_step(first_step)?;
    let a = cfg.a();
    let inv_d = 1.0 / d as f64;
    let mut occ = first_occupation(d, first_step);
    let mut mean = first_mean(d, first_step);
    let mut diag = occ.clone();
    let mut rows = Vec::with_capacity(horizon as usize);
    for n in 1..=horizon {
        let mut second = vec![0.0; d * d];
        for i in 0..d {
            second[i * d + i] = diag[i];
        }
        rows.push(MomentRow {
            n,
            mean: mean.clone(),
            second,
        });
        let nf = n as f64;
        for i in 0..d {
            diag[i] = (1.0 + 2.0 * a / nf) * diag[i] + (a / nf) * occ[i] + (1.0 - a) * inv_d;
            occ[i] = (1.0 + a / nf) * occ[i] + (1.0 - a) * inv_d;
            mean[i] *= 1.0 + a / nf;
        }
    }
    Ok(MomentTable { d, first_step, rows })
}

/// `E[N_n(i)]` for every axis at each of the (increasing) steps in `at`,
/// from `E[N_{n+1}(i)] = (1 + a/n) E[N_n(i)] + (1-a)/d`.
pub fn expected_occupation(at: &[u64], d: usize, p: f64, first_step: FirstStep) -> Result<Vec<Vec<f64>>> {
    let cfg = model::WalkConfig::new(d, p, 1, 0)?.with_first_step(first_step)?;
    if at.first() == Some(&0) || at.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MerwError::domain("occupation steps must be increasing and start at n >= 1"));
    }
    let a = cfg.a();
    let drift = (1.0 - a) / d as f64;
    let mut occ = first_occupation(d, first_step);
    let mut n = 1u64;
    let mut out = Vec::with_capacity(at.len());
    for &target in at {
        while n < target {
            let nf = n as f64;
            for o in occ.iter_mut() {
                *o = (1.0 + a / nf) * *o + drift;
            }
            n += 1;
        }
        out.push(occ.clone());
    }
    Ok(out)
}

/// Exact rational moments at one `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalMoments {
    pub n: u64,
    pub mean: Vec<Rational>,
    /// Diagonal of `E[S_n S_n^T]` (the off-diagonal is identically zero).
    pub second_diag: Vec<Rational>,
    /// `E[N_n(i)]`.
    pub occupation: Vec<Rational>,
}

/// The recurrences of [`exact_second_moment`] in rational arithmetic.
pub fn exact_second_moment_rational(
    horizon: u64,
    d: usize,
    p: &Rational,
    q: Option<&Rational>,
) -> Result<Vec<RationalMoments>> {
    if horizon == 0 {
        return Err(MerwError::domain("moment tables start at n = 1"));
    }
    let a = model::memory_to_a_exact(d, p)?;
    let first = model::first_step_law_exact(d, q);
    let drift = (Rational::one() - &a) / rational::int(d as i64);
    let mut occ: Vec<Rational> = first.chunks_exact(2).map(|c| &c[0] + &c[1]).collect();
    let mut mean: Vec<Rational> = first.chunks_exact(2).map(|c| &c[0] - &c[1]).collect();
    let mut diag = occ.clone();
    let mut rows = Vec::with_capacity(horizon as usize);
    for n in 1..=horizon {
        rows.push(RationalMoments {
            n,
            mean: mean.clone(),
            second_diag: diag.clone(),
            occupation: occ.clone(),
        });
        let step = &a / rational::int(n as i64);
        let two_step = &step + &step;
        for i in 0..d {
            diag[i] = (Rational::one() + &two_step) * &diag[i] + &step * &occ[i] + &drift;
            occ[i] = (Rational::one() + &step) * &occ[i] + &drift;
            mean[i] = (Rational::one() + &step) * &mean[i];
        }
    }
    Ok(rows)
}

/// Closed form of the diagonal of `E[S_n S_n^T]` under the uniform first step:
/// `n/(2a-1) ((2a)_n/n! - 1) / d`, with `(2a)_n/n! = Γ(n+2a)/(Γ(n+1)Γ(2a))`.
///
/// The expression has a removable `0/0` at `a = 1/2`, where this returns a
/// domain error; use the recurrence there.
pub fn closed_form_second_moment(n: u64, d: usize, a: f64) -> Result<f64> {
    // a = -1 (d = 1, p = 0) is still fine here: (−2)_n vanishes for n >= 3.
    if !(a >= -1.0) || !a.is_finite() {
        return Err(MerwError::domain(format!("closed form needs a >= -1, got {a}")));
    }
    if a == 0.5 {
        return Err(MerwError::domain("closed form is singular at a = 1/2"));
    }
    if n == 0 || d == 0 {
        return Err(MerwError::domain("need n >= 1 and d >= 1"));
    }
    let g = special::rising_over_factorial(2.0 * a, n)?;
    Ok(n as f64 / (2.0 * a - 1.0) * (g - 1.0) / d as f64)
}

/// `E[L_n L_n^T]` diagonal for `L_n = a_n S_n / Γ(a+1)`, uniform first step:
/// `n/(2a-1) (Γ(n)/Γ(n+a))² ((2a)_n/n! - 1) / d`.
pub fn finite_l_second_moment(n: u64, d: usize, a: f64) -> Result<f64> {
    let second = closed_form_second_moment(n, d, a)?;
    let scale = (-2.0 * special::ln_gamma_ratio(n as f64, a)?).exp();
    Ok(second * scale)
}

/// `E[Σ_n] = (n/d) I` (diagonal returned) for the uniform first step.
pub fn expected_sigma(n: u64, d: usize, first_step: FirstStep) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(MerwError::domain("dimension must be at least 1"));
    }
    match first_step {
        FirstStep::Uniform => Ok(vec![n as f64 / d as f64; d]),
        FirstStep::Biased { .. } => Err(MerwError::NotImplemented(
            "E[Σ_n] closed form is only available for the uniform first step".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LMoments {
    /// `E[L]`.
    pub mean: Vec<f64>,
    /// `E[L L^T]`, row-major.
    pub second: Vec<f64>,
    /// `E[||L||²] = 1/((2a-1)Γ(2a))` in both first-step variants.
    pub norm2: f64,
    /// The rank-one coefficient with `c/Γ(2a+1)` in place of `2c/Γ(2a+1)`,
    /// kept for comparison; `None` under the uniform first step.
    pub second_single_rank_one: Option<Vec<f64>>,
}

/// Moments of the superdiffusive limit `L = lim S_n / n^a`.
///
/// With `c = (2dq-1)/(2d-1)` (zero for the uniform first step):
/// `E[L] = c/Γ(a+1) e_1` and
/// `E[L L^T] = 2c/Γ(2a+1) (e_1 e_1^T - I/d) + I/(d(2a-1)Γ(2a))`.
///
/// The factor 2 on the rank-one term comes from solving the moment
/// recursion with the occupation excess `E[N_n(1)] - n/d = c(1-1/d)/a_n`;
/// it is checked against rational enumeration and the exact recursion in the
/// tests. [`LMoments::second_single_rank_one`] carries the variant without it.
pub fn superdiffusive_moments(d: usize, p: f64, first_step: FirstStep) -> Result<LMoments> {
    let regime = model::classify_regime(d, p)?;
    if regime.kind != RegimeKind::Superdiffusive {
        return Err(MerwError::domain(format!(
            "L is only defined in the superdiffusive regime (p = {p} is {})",
            regime.kind
        )));
    }
    let a = regime.a;
    let df = d as f64;
    let iso = 1.0 / (df * (2.0 * a - 1.0) * special::gamma(2.0 * a)?);
    let c = match first_step {
        FirstStep::Uniform => 0.0,
        FirstStep::Biased { q } => (2.0 * df * q - 1.0) / (2.0 * df - 1.0),
    };
    let g2a1 = special::gamma(2.0 * a + 1.0)?;
    let build = |coef: f64| {
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            let e = if i == 0 { 1.0 } else { 0.0 };
            m[i * d + i] = iso + coef * (e - 1.0 / df);
        }
        m
    };
    let mut mean = vec![0.0; d];
    mean[0] = c / special::gamma(a + 1.0)?;
    Ok(LMoments {
        mean,
        second: build(2.0 * c / g2a1),
        norm2: 1.0 / ((2.0 * a - 1.0) * special::gamma(2.0 * a)?),
        second_single_rank_one: match first_step {
            FirstStep::Uniform => None,
            FirstStep::Biased { .. } => Some(build(c / g2a1)),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitConstants {
    pub d: usize,
    pub p: f64,
    pub first_step: FirstStep,
    pub regime: Regime,
    /// Normalisation of `S_n` in the limit theorem.
    pub normalisation: &'static str,
    /// Per-axis variance of the Gaussian limit (diffusive and critical).
    pub covariance_scale: Option<f64>,
    /// `lim 1/log n Σ ||S_k||²/k²` (diffusive) or its critical analogue.
    pub qsl_trace_limit: Option<f64>,
    pub vn_asymptote: Option<VnAsymptote>,
    /// `lim v_n` for `a > 1/2`.
    pub vn_limit: Option<Hyper3F2>,
    pub l_moments: Option<LMoments>,
}

/// Regime constants for `(d, p)` and the chosen first-step law.
pub fn limit_constants(d: usize, p: f64, first_step: FirstStep, tol: f64) -> Result<LimitConstants> {
    model::WalkConfig::new(d, p, 1, 0)?.with_first_step(first_step)?;
    let regime = model::classify_regime(d, p)?;
    limit_constants_for(d, p, first_step, regime, tol)
}

/// As [`limit_constants`], with the regime decided by the caller (used for
/// exact rational classification of literal inputs).
pub fn limit_constants_for(
    d: usize,
    p: f64,
    first_step: FirstStep,
    regime: Regime,
    tol: f64,
) -> Result<LimitConstants> {
    let a = regime.a;
    let df = d as f64;
    let vn_asym = if a > -1.0 {
        Some(match regime.kind {
            RegimeKind::Critical => vn_asymptote(0.5)?,
            _ => vn_asymptote(a)?,
        })
    } else {
        None
    };
    let (normalisation, scale, qsl) = match regime.kind {
        RegimeKind::Diffusive => ("sqrt(n)", Some(1.0 / (df * (1.0 - 2.0 * a))), Some(1.0 / (1.0 - 2.0 * a))),
        RegimeKind::Critical => ("sqrt(n log n)", Some(1.0 / df), Some(1.0)),
        RegimeKind::Superdiffusive => ("n^a", None, None),
    };
    let (vn_limit, l_moments) = if regime.kind == RegimeKind::Superdiffusive {
        (Some(hyper3f2_unit(a, tol)?), Some(superdiffusive_moments(d, p, first_step)?))
    } else {
        (None, None)
    };
    Ok(LimitConstants {
        d,
        p,
        first_step,
        regime,
        normalisation,
        covariance_scale: scale,
        qsl_trace_limit: qsl,
        vn_asymptote: vn_asym,
        vn_limit,
        l_moments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn first_rows() {
        for d in 1..4 {
            let t = exact_second_moment(2, d, 0.7, FirstStep::Uniform).unwrap();
            let a = model::memory_to_a(d, 0.7).unwrap();
            let df = d as f64;
            for i in 0..d {
                for j in 0..d {
                    let want1 = if i == j { 1.0 / df } else { 0.0 };
                    let want2 = if i == j { (2.0 + 2.0 * a) / df } else { 0.0 };
                    assert!((t.rows[0].second[i * d + j] - want1).abs() < 1e-15);
                    assert!((t.rows[1].second[i * d + j] - want2).abs() < 1e-15);
                }
            }
            assert!(t.rows[1].mean.iter().all(|&m| m == 0.0));
        }
        // d = 1, n = 2: E[S_2²] = 4p
        let t = exact_second_moment(2, 1, 0.3, FirstStep::Uniform).unwrap();
        assert!((t.rows[1].second[0] - 1.2).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_recurrence() {
        for &(d, p) in &[(1, 0.0), (1, 0.25), (1, 1.0), (2, 0.0), (2, 0.3), (2, 0.9), (3, 0.1), (3, 1.0)] {
            let a = model::memory_to_a(d, p).unwrap();
            let t = exact_second_moment(50, d, p, FirstStep::Uniform).unwrap();
            for row in &t.rows {
                let closed = closed_form_second_moment(row.n, d, a).unwrap();
                let rec = row.second[0];
                assert!(
                    (closed - rec).abs() <= 1e-12 * rec.abs().max(1.0),
                    "d={d} p={p} n={}: {closed} vs {rec}",
                    row.n
                );
            }
        }
        assert!(closed_form_second_moment(10, 2, 0.5).is_err());
    }

    #[test]
    fn rational_recurrence_matches_float() {
        let p = ratio(7, 10);
        let exact = exact_second_moment_rational(30, 2, &p, None).unwrap();
        let float = exact_second_moment(30, 2, 0.7, FirstStep::Uniform).unwrap();
        for (e, f) in exact.iter().zip(&float.rows) {
            let x = rational::to_f64(&e.second_diag[0]);
            assert!((x - f.second[0]).abs() < 1e-12 * x);
            // E[N_n(i)] = n/d exactly
            assert_eq!(e.occupation[1], ratio(e.n as i64, 2));
        }
    }

    #[test]
    fn table_is_psd_with_bounded_trace() {
        for &q in &[0.0, 0.3, 1.0] {
            let t = exact_second_moment(200, 3, 0.85, FirstStep::Biased { q }).unwrap();
            for row in &t.rows {
                let tr: f64 = (0..3).map(|i| row.second[i * 3 + i]).sum();
                assert!(tr <= (row.n * row.n) as f64 + 1e-9);
                for i in 0..3 {
                    assert!(row.second[i * 3 + i] >= 0.0);
                    // second moment dominates the squared mean
                    assert!(row.second[i * 3 + i] + 1e-12 >= row.mean[i] * row.mean[i]);
                }
            }
        }
    }

    #[test]
    fn expected_sigma_uniform_only() {
        assert_eq!(expected_sigma(2, 2, FirstStep::Uniform).unwrap(), vec![1.0, 1.0]);
        let s = expected_sigma(17, 3, FirstStep::Uniform).unwrap();
        assert!((s.iter().sum::<f64>() - 17.0).abs() < 1e-12);
        assert!(matches!(
            expected_sigma(5, 2, FirstStep::Biased { q: 0.5 }),
            Err(MerwError::NotImplemented(_))
        ));
    }

    #[test]
    fn limit_constant_examples() {
        for &p in &[0.0, 0.2, 0.5, 0.7] {
            let lc = limit_constants(1, p, FirstStep::Uniform, 1e-10).unwrap();
            assert!((lc.covariance_scale.unwrap() - 1.0 / (3.0 - 4.0 * p)).abs() < 1e-14);
        }
        let lc = limit_constants(1, 0.85, FirstStep::Uniform, 1e-10).unwrap();
        let l = lc.l_moments.unwrap();
        // 1/(0.4 Γ(1.4)), Γ(1.4) = 0.88726381750307528922 (mpmath)
        assert!((l.norm2 - 1.0 / (0.4 * 0.887_263_817_503_075_3)).abs() < 1e-12);
        assert!((l.norm2 - 2.81765).abs() < 1e-5);

        let lc = limit_constants(2, 0.625, FirstStep::Uniform, 1e-10).unwrap();
        assert_eq!(lc.regime.kind, RegimeKind::Critical);
        assert_eq!(lc.covariance_scale, Some(0.5));
        match lc.vn_asymptote.unwrap() {
            VnAsymptote::Logarithmic { constant } => {
                assert!((constant - std::f64::consts::FRAC_PI_4).abs() < 1e-14)
            }
            other => panic!("{other:?}"),
        }
        assert!(superdiffusive_moments(2, 0.5, FirstStep::Uniform).is_err());
    }

    #[test]
    fn biased_at_uniform_q_reduces_to_uniform() {
        for d in 1..4 {
            let q = 1.0 / (2 * d) as f64;
            let u = superdiffusive_moments(d, 0.95, FirstStep::Uniform).unwrap();
            let b = superdiffusive_moments(d, 0.95, FirstStep::Biased { q }).unwrap();
            assert!(b.mean.iter().all(|m| m.abs() < 1e-15));
            for (x, y) in u.second.iter().zip(&b.second) {
                assert!((x - y).abs() < 1e-14);
            }
            assert!((u.norm2 - b.norm2).abs() < 1e-15);
        }
    }

    #[test]
    fn trace_of_l_second_moment_is_norm2() {
        for &q in &[0.0, 0.4, 1.0] {
            let l = superdiffusive_moments(3, 0.9, FirstStep::Biased { q }).unwrap();
            let tr: f64 = (0..3).map(|i| l.second[i * 3 + i]).sum();
            assert!((tr - l.norm2).abs() < 1e-13);
        }
    }

    #[test]
    fn scaled_moments_approach_limit() {
        // E[S_n S_n^T]/n^{2a} from the exact recursion converges to E[LL^T];
        // the rank-one term needs the factor 2.
        for &(d, p, q) in &[(2, 0.9, 1.0), (3, 0.8, 0.2), (2, 0.95, 0.0)] {
            let n = 1_000_000u64;
            let t = exact_second_moment(n, d, p, FirstStep::Biased { q }).unwrap();
            let a = model::memory_to_a(d, p).unwrap();
            let scale = (n as f64).powf(2.0 * a);
            let l = superdiffusive_moments(d, p, FirstStep::Biased { q }).unwrap();
            let alt = l.second_single_rank_one.clone().unwrap();
            let last = t.last();
            for i in 0..d {
                let got = last.second[i * d + i] / scale;
                let want = l.second[i * d + i];
                assert!((got - want).abs() < 2e-3 * want.abs().max(0.1), "d={d} i={i}: {got} vs {want}");
                if q != 1.0 / (2 * d) as f64 && i == 0 {
                    assert!((got - alt[0]).abs() > 10.0 * (got - want).abs());
                }
                let mean = last.mean[i] / (n as f64).powf(a);
                assert!((mean - l.mean[i]).abs() < 1e-4 * l.mean[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn finite_l_tends_to_limit() {
        for &(d, p) in &[(1, 0.85), (2, 0.9), (3, 0.75)] {
            let a = model::memory_to_a(d, p).unwrap();
            let limit = superdiffusive_moments(d, p, FirstStep::Uniform).unwrap().second[0];
            let finite = finite_l_second_moment(1_000_000, d, a).unwrap();
            if a >= 0.6 {
                assert!((finite / limit - 1.0).abs() < 0.01, "d={d} p={p}: {finite} vs {limit}");
            }
            assert!(finite < limit);
        }
    }

    #[test]
    fn csv_layout() {
        let t = exact_second_moment(2, 2, 0.5, FirstStep::Uniform).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "n,e_s1,e_s2,cov_1_1,cov_1_2,cov_2_1,cov_2_2");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1,0.0000000000000000e0,0.0000000000000000e0,5.0000000000000000e-1"));
        assert!(!text.contains('\r'));
    }
}
