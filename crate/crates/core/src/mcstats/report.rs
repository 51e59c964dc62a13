//! Monte Carlo reports: estimates against exact or limit targets with
//! plug-in standard errors, and a null-calibrated goodness-of-fit check.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{EnsembleStats, Functional};
use crate::closedform::{self, moments};
use crate::engine::{Engine, RngStream};
use crate::model::{FirstStep, Regime, RegimeKind, WalkConfig};
use crate::numfmt;
use crate::{MerwError, Result};

/// Default pass threshold on `|z|`.
pub const Z_THRESHOLD: f64 = 3.0;
/// Null replicates used to calibrate the KS threshold.
pub const NULL_REPLICATES: usize = 200;
/// Quantile of the null KS distances used as the pass threshold.
pub const NULL_QUANTILE: f64 = 0.99;

/// A reported comparison that does not decide `pass`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub name: String,
    pub estimate: f64,
    pub target: f64,
    pub standard_error: f64,
    pub gap: f64,
    pub relative_gap: f64,
    pub z_score: f64,
}

impl Diagnostic {
    pub fn new(name: impl Into<String>, estimate: f64, target: f64, standard_error: f64) -> Self {
        Diagnostic {
            name: name.into(),
            estimate,
            target,
            standard_error,
            gap: estimate - target,
            relative_gap: (estimate - target) / target.abs(),
            z_score: z_score(estimate, target, standard_error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GofResult {
    /// Kolmogorov-Smirnov distance of the quadratic form to chi-square(d).
    pub distance: f64,
    /// `NULL_QUANTILE` quantile of the distance under exact chi-square samples.
    pub threshold: f64,
    pub replicates: usize,
    pub sigma2: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config: WalkConfig,
    pub regime: Regime,
    pub functional: Functional,
    pub engine: Engine,
    #[serde(rename = "R")]
    pub runs: u64,
    pub horizon: u64,
    pub labels: Vec<String>,
    pub estimates: Vec<f64>,
    pub targets: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub z_scores: Vec<f64>,
    pub z_threshold: f64,
    pub gof_distance: Option<f64>,
    pub gof_threshold: Option<f64>,
    pub diagnostics: Vec<Diagnostic>,
    pub notes: Vec<String>,
    pub pass: bool,
}

fn z_score(estimate: f64, target: f64, se: f64) -> f64 {
    let gap = estimate - target;
    if se > 0.0 {
        gap / se
    } else if gap == 0.0 {
        0.0
    } else {
        gap.signum() * f64::INFINITY
    }
}

impl Report {
    pub fn new(stats: &EnsembleStats, z_threshold: f64) -> Self {
        let mut notes = Vec::new();
        if stats.regime.a <= 0.0 {
            notes.push(format!(
                "a = {} <= 0 is outside the parameter range covered by the limit theorems",
                stats.regime.a
            ));
        }
        Report {
            config: stats.config.clone(),
            regime: stats.regime,
            functional: stats.functional,
            engine: stats.engine,
            runs: stats.R(),
            horizon: stats.config.horizon,
            labels: Vec::new(),
            estimates: Vec::new(),
            targets: Vec::new(),
            standard_errors: Vec::new(),
            z_scores: Vec::new(),
            z_threshold,
            gof_distance: None,
            gof_threshold: None,
            diagnostics: Vec::new(),
            notes,
            pass: true,
        }
    }

    /// Adds a component that must satisfy `|z| < z_threshold`.
    pub fn check(&mut self, label: impl Into<String>, estimate: f64, target: f64, se: f64) {
        let z = z_score(estimate, target, se);
        self.pass &= z.abs() < self.z_threshold;
        self.labels.push(label.into());
        self.estimates.push(estimate);
        self.targets.push(target);
        self.standard_errors.push(se);
        self.z_scores.push(z);
    }

    pub fn diagnose(&mut self, diagnostic: Diagnostic) {
        self.diagnostics.push(diagnostic);
    }

    pub fn diagnostic(&self, name: &str) -> Option<&Diagnostic> {
        self.diagnostics.iter().find(|d| d.name == name)
    }

    pub fn attach_gof(&mut self, gof: &GofResult) {
        self.gof_distance = Some(gof.distance);
        self.gof_threshold = Some(gof.threshold);
        self.pass &= gof.pass;
    }

    pub fn max_abs_z(&self) -> f64 {
        self.z_scores.iter().fold(0.0, |m, z| m.max(z.abs()))
    }

    pub fn to_json(&self) -> Result<String> {
        numfmt::to_json(self).map_err(|e| MerwError::Contract(format!("report serialisation: {e}")))
    }
}

fn scale2(config: &WalkConfig, functional: Functional) -> Result<f64> {
    let n = config.horizon as f64;
    match functional {
        Functional::Diffusive => Ok(n),
        Functional::Critical => Ok(n * n.ln()),
        Functional::Superdiffusive => Ok(n.powf(2.0 * config.a())),
        _ => Err(MerwError::domain(format!("{functional} is not a position functional"))),
    }
}

fn identity(d: usize, diag: f64) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = diag;
    }
    m
}

/// Exact finite-`n` target of the functional, row-major `d x d`: the raw
/// second moment of the scaled position, or the mean of the QSL matrix.
pub fn exact_target(config: &WalkConfig, functional: Functional) -> Result<Vec<f64>> {
    let table = moments::exact_second_moment(config.horizon, config.d, config.p, config.first_step)?;
    match functional {
        Functional::Qsl => {
            let critical = config.regime().kind == RegimeKind::Critical;
            let d = config.d;
            let mut acc = vec![0.0; d * d];
            for row in &table.rows {
                let k = row.n as f64;
                let w = if critical {
                    if row.n < 2 {
                        continue;
                    }
                    1.0 / (k * k.ln()).powi(2)
                } else {
                    1.0 / (k * k)
                };
                for (a, s) in acc.iter_mut().zip(&row.second) {
                    *a += w * s;
                }
            }
            let n = config.horizon as f64;
            let norm = if critical { n.ln().ln() } else { n.ln() };
            Ok(acc.into_iter().map(|x| x / norm).collect())
        }
        Functional::Occupation => Err(MerwError::domain("use occupation_report for the occupation functional")),
        _ => {
            let s2 = scale2(config, functional)?;
            Ok(table.last().second.iter().map(|x| x / s2).collect())
        }
    }
}

/// `n -> ∞` target of the functional, row-major `d x d`.
pub fn limit_target(config: &WalkConfig, functional: Functional) -> Result<Vec<f64>> {
    let d = config.d;
    let a = config.a();
    let df = d as f64;
    match (functional, config.regime().kind) {
        (Functional::Diffusive, RegimeKind::Diffusive) | (Functional::Qsl, RegimeKind::Diffusive) => {
            Ok(identity(d, 1.0 / (df * (1.0 - 2.0 * a))))
        }
        (Functional::Critical, RegimeKind::Critical) | (Functional::Qsl, RegimeKind::Critical) => {
            Ok(identity(d, 1.0 / df))
        }
        (Functional::Superdiffusive, RegimeKind::Superdiffusive) => {
            Ok(moments::superdiffusive_moments(d, config.p, config.first_step)?.second)
        }
        (f, k) => Err(MerwError::domain(format!("no limit target for the {f} functional in the {k} regime"))),
    }
}

/// Componentwise comparison of the ensemble against `target` (row-major
/// `d x d`), upper triangle including the diagonal. Position functionals
/// compare raw second moments; the QSL functional compares its mean.
pub fn covariance_report(stats: &EnsembleStats, target: &[f64], z_threshold: f64) -> Result<Report> {
    let d = stats.config.d;
    if target.len() != d * d {
        return Err(MerwError::domain(format!("target must have {} entries", d * d)));
    }
    let (est, se, prefix): (Vec<f64>, Vec<f64>, &str) = match stats.functional {
        Functional::Qsl => (stats.acc.mean().to_vec(), stats.acc.mean_se(), "qsl"),
        Functional::Occupation => {
            return Err(MerwError::domain("use occupation_report for the occupation functional"))
        }
        _ => (stats.acc.second_moment().to_vec(), stats.acc.second_moment_se(), "second"),
    };
    let mut report = Report::new(stats, z_threshold);
    for i in 0..d {
        for j in i..d {
            let k = i * d + j;
            report.check(format!("{prefix}_{}_{}", i + 1, j + 1), est[k], target[k], se[k]);
        }
    }
    Ok(report)
}

/// Kolmogorov-Smirnov distance between the empirical law of `cdf_values`
/// (already mapped through the hypothesised CDF) and the uniform law.
fn ks_uniform(mut u: Vec<f64>) -> f64 {
    u.sort_by(f64::total_cmp);
    let r = u.len() as f64;
    u.iter().enumerate().fold(0.0, |m, (i, &x)| {
        let lo = x - i as f64 / r;
        let hi = (i + 1) as f64 / r - x;
        m.max(lo).max(hi)
    })
}

/// `NULL_QUANTILE` quantile of the KS distance of `runs` exact draws. The
/// statistic is distribution-free, so uniform draws calibrate any continuous
/// hypothesised law.
fn null_threshold(runs: usize, seed: u64) -> f64 {
    let null_seed = seed ^ 0x6b73_5f6e_756c_6c00;
    let mut dist: Vec<f64> = (0..NULL_REPLICATES as u64)
        .map(|rep| {
            let mut rng = RngStream::new(null_seed, rep);
            ks_uniform((0..runs).map(|_| rng.uniform()).collect())
        })
        .collect();
    dist.sort_by(f64::total_cmp);
    let idx = ((NULL_QUANTILE * NULL_REPLICATES as f64).ceil() as usize).clamp(1, NULL_REPLICATES) - 1;
    dist[idx]
}

/// Fits `||x||² / sigma2` to chi-square with `d` degrees of freedom, where
/// `x` is the scaled position (`S_n/sqrt(n)` or `S_n/sqrt(n log n)`) and
/// `sigma2` the per-axis variance of `x`.
pub fn normality_check(stats: &EnsembleStats, sigma2: f64) -> Result<GofResult> {
    match stats.functional {
        Functional::Diffusive | Functional::Critical => {}
        Functional::Superdiffusive => {
            return Err(MerwError::domain(
                "the superdiffusive limit is not Gaussian; no chi-square check applies",
            ))
        }
        f => return Err(MerwError::domain(format!("no normality check for the {f} functional"))),
    }
    if stats.regime.kind == RegimeKind::Superdiffusive {
        return Err(MerwError::domain("the superdiffusive limit is not Gaussian; no chi-square check applies"));
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(MerwError::domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    let chi = ChiSquared::new(stats.config.d as f64).map_err(|e| MerwError::domain(e.to_string()))?;
    let u: Vec<f64> = stats.acc.qform().iter().map(|q| chi.cdf(q / sigma2)).collect();
    let runs = u.len();
    let distance = ks_uniform(u);
    let threshold = null_threshold(runs, stats.config.seed);
    Ok(GofResult {
        distance,
        threshold,
        replicates: NULL_REPLICATES,
        sigma2,
        pass: distance < threshold,
    })
}

/// Compares `S_n/n^a` against the finite-`n` moments and the limit `L`.
///
/// Checks (deciding `pass`): `Ê[x]` and `Ê[x x^T]` against the exact
/// finite-`n` values and `Ê[||x||²]` against their trace. Under the uniform
/// first step the second-moment target is `E[L_n L_n^T]` for
/// `L_n = a_n S_n/Γ(a+1)`; otherwise the exact recursion divided by `n^{2a}`.
/// Diagnostics: the gaps to `E[L]`, `E[L L^T]` and `E[||L||²]`.
pub fn superdiffusive_limit(stats: &EnsembleStats, z_threshold: f64) -> Result<Report> {
    let config = &stats.config;
    if stats.functional != Functional::Superdiffusive || stats.regime.kind != RegimeKind::Superdiffusive {
        return Err(MerwError::domain(format!(
            "the superdiffusive report needs the superdiffusive functional and regime (got {} in the {} regime)",
            stats.functional, stats.regime.kind
        )));
    }
    let d = config.d;
    let n = config.horizon;
    let a = stats.regime.a;
    let na = (n as f64).powf(a);
    let table = moments::exact_second_moment(n, d, config.p, config.first_step)?;
    let row = table.last();
    let exact_second: Vec<f64> = row.second.iter().map(|x| x / (na * na)).collect();
    let second_target = match config.first_step {
        FirstStep::Uniform => identity(d, moments::finite_l_second_moment(n, d, a)?),
        FirstStep::Biased { .. } => exact_second.clone(),
    };
    let limit = moments::superdiffusive_moments(d, config.p, config.first_step)?;

    let mean = stats.acc.mean();
    let mean_se = stats.acc.mean_se();
    let second = stats.acc.second_moment();
    let second_se = stats.acc.second_moment_se();
    let (norm2, norm2_se) = stats.acc.norm2();

    let mut report = Report::new(stats, z_threshold);
    for i in 0..d {
        report.check(format!("mean_{}", i + 1), mean[i], row.mean[i] / na, mean_se[i]);
    }
    for i in 0..d {
        for j in i..d {
            let k = i * d + j;
            report.check(format!("second_{}_{}", i + 1, j + 1), second[k], second_target[k], second_se[k]);
        }
    }
    let trace: f64 = (0..d).map(|i| second_target[i * d + i]).sum();
    report.check("norm2", norm2, trace, norm2_se);

    for i in 0..d {
        report.diagnose(Diagnostic::new(format!("limit_mean_{}", i + 1), mean[i], limit.mean[i], mean_se[i]));
    }
    for i in 0..d {
        let k = i * d + i;
        report.diagnose(Diagnostic::new(
            format!("limit_second_{}_{}", i + 1, i + 1),
            second[k],
            limit.second[k],
            second_se[k],
        ));
    }
    report.diagnose(Diagnostic::new("limit_norm2", norm2, limit.norm2, norm2_se));
    match config.first_step {
        FirstStep::Uniform => {
            let k = 0;
            report.diagnose(Diagnostic::new(
                "exact_second_1_1",
                second[k],
                exact_second[k],
                second_se[k],
            ));
            report.notes.push(format!(
                "second-moment targets are E[L_n L_n^T] with L_n = a_n S_n / Gamma(a+1); \
                 E[S_n S_n^T]/n^(2a) differs from it by the factor {:.6e} at this n",
                exact_second[0] / second_target[0]
            ));
        }
        FirstStep::Biased { .. } => {
            if let Some(single) = &limit.second_single_rank_one {
                report.diagnose(Diagnostic::new(
                    "limit_second_1_1_single_rank_one",
                    second[0],
                    single[0],
                    second_se[0],
                ));
            }
        }
    }
    Ok(report)
}

/// Ensemble means of `Λ_t(i)` against `E[N_t(i)]/t` (`1/d` under the
/// uniform first step) at every checkpoint.
pub fn occupation_report(stats: &EnsembleStats, z_threshold: f64) -> Result<Report> {
    if stats.functional != Functional::Occupation {
        return Err(MerwError::domain("the occupation report needs the occupation functional"));
    }
    let config = &stats.config;
    let d = config.d;
    let expected = closedform::expected_occupation(&stats.steps, d, config.p, config.first_step)?;
    let mean = stats.acc.mean();
    let se = stats.acc.mean_se();
    let mut report = Report::new(stats, z_threshold);
    for (c, (&t, exp)) in stats.steps.iter().zip(&expected).enumerate() {
        for i in 0..d {
            let k = c * d + i;
            report.check(format!("lambda_{t}_{}", i + 1), mean[k], exp[i] / t as f64, se[k]);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcstats::{run_ensemble, Accumulator, EnsembleOptions};

    fn gaussian(rng: &mut RngStream) -> f64 {
        // Box-Muller; 1 - u keeps the log argument in (0, 1].
        let u = 1.0 - rng.uniform();
        let v = rng.uniform();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }

    fn synthetic(config: WalkConfig, functional: Functional, sigma2: f64, runs: u64) -> EnsembleStats {
        let d = config.d;
        let mut acc = Accumulator::new(d);
        let mut rng = RngStream::new(config.seed, 1 << 40);
        for _ in 0..runs {
            let x: Vec<f64> = (0..d).map(|_| sigma2.sqrt() * gaussian(&mut rng)).collect();
            acc.push(&x);
        }
        EnsembleStats {
            regime: config.regime(),
            steps: vec![config.horizon],
            config,
            functional,
            engine: Engine::Reduced,
            acc,
        }
    }

    #[test]
    fn ks_of_a_perfect_grid_is_half_a_step() {
        let u: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        assert!((ks_uniform(u) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn null_threshold_matches_kolmogorov_asymptotics() {
        // P(sqrt(R) D > 1.628) = 0.01 asymptotically.
        let r = 2000;
        let t = null_threshold(r, 1) * (r as f64).sqrt();
        assert!((t - 1.628).abs() < 0.25, "{t}");
    }

    #[test]
    fn synthetic_gaussian_passes_every_check() {
        let cfg = WalkConfig::new(2, 0.5, 10_000, 3).unwrap();
        let limit = limit_target(&cfg, Functional::Diffusive).unwrap();
        let stats = synthetic(cfg, Functional::Diffusive, limit[0], 20_000);
        let mut report = covariance_report(&stats, &limit, Z_THRESHOLD).unwrap();
        let gof = normality_check(&stats, limit[0]).unwrap();
        report.attach_gof(&gof);
        assert!(report.pass, "{}", report.to_json().unwrap());

        let crit = WalkConfig::new(2, 0.625, 1000, 4).unwrap();
        let stats = synthetic(crit, Functional::Critical, 0.5, 5_000);
        let gof = normality_check(&stats, 0.5).unwrap();
        assert!(gof.pass);
        let report = covariance_report(&stats, &identity(2, 0.5), Z_THRESHOLD).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn wrong_variance_fails_the_fit() {
        let cfg = WalkConfig::new(2, 0.5, 10_000, 3).unwrap();
        let stats = synthetic(cfg, Functional::Diffusive, 1.5 * 1.1, 20_000);
        assert!(!normality_check(&stats, 1.5).unwrap().pass);
    }

    #[test]
    fn superdiffusive_input_is_refused() {
        let cfg = WalkConfig::new(1, 0.85, 100, 0).unwrap();
        let stats = run_ensemble(&cfg, 10, Functional::Superdiffusive, &EnsembleOptions::default()).unwrap();
        assert!(normality_check(&stats, 1.0).is_err());
    }

    #[test]
    fn exact_target_at_small_n() {
        // d = 1: E[S_2²] = 2 + 2a, so E[(S_2/sqrt 2)²] = 1 + a.
        let cfg = WalkConfig::new(1, 0.25, 2, 0).unwrap();
        let t = exact_target(&cfg, Functional::Diffusive).unwrap();
        assert!((t[0] - 0.5).abs() < 1e-15);
        // QSL at n = 2: (E[S_1²] + E[S_2²]/4)/log 2.
        let q = exact_target(&cfg, Functional::Qsl).unwrap();
        assert!((q[0] - (1.0 + 1.0 / 4.0) / 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn diffusive_ensemble_matches_exact_covariance() {
        let cfg = WalkConfig::new(2, 0.5, 200, 17).unwrap();
        let stats = run_ensemble(&cfg, 4000, Functional::Diffusive, &EnsembleOptions::default()).unwrap();
        let target = exact_target(&cfg, Functional::Diffusive).unwrap();
        let report = covariance_report(&stats, &target, Z_THRESHOLD).unwrap();
        assert!(report.pass, "{}", report.to_json().unwrap());
        let gof = normality_check(&stats, target[0]).unwrap();
        assert!(gof.distance < 0.05);
    }

    #[test]
    fn occupation_means_are_one_over_d() {
        for (d, p) in [(2, 0.3), (3, 0.9)] {
            let cfg = WalkConfig::new(d, p, 300, 8).unwrap();
            let opts = EnsembleOptions {
                stride: Some(50),
                ..Default::default()
            };
            let stats = run_ensemble(&cfg, 2000, Functional::Occupation, &opts).unwrap();
            let report = occupation_report(&stats, Z_THRESHOLD).unwrap();
            assert!(report.targets.iter().all(|t| (t - 1.0 / d as f64).abs() < 1e-12));
            assert!(report.pass, "{}", report.to_json().unwrap());
        }
    }

    #[test]
    fn biased_occupation_target_is_exact() {
        let cfg = WalkConfig::new(2, 0.9, 200, 8)
            .unwrap()
            .with_first_step(FirstStep::Biased { q: 1.0 })
            .unwrap();
        let opts = EnsembleOptions {
            stride: Some(100),
            ..Default::default()
        };
        let stats = run_ensemble(&cfg, 3000, Functional::Occupation, &opts).unwrap();
        let report = occupation_report(&stats, Z_THRESHOLD).unwrap();
        assert!(report.targets[0] > 0.5);
        assert!(report.pass, "{}", report.to_json().unwrap());
    }

    #[test]
    fn superdiffusive_report_small_scale() {
        let cfg = WalkConfig::new(1, 0.85, 500, 21).unwrap();
        let stats = run_ensemble(&cfg, 3000, Functional::Superdiffusive, &EnsembleOptions::default()).unwrap();
        let report = superdiffusive_limit(&stats, Z_THRESHOLD).unwrap();
        assert!(report.pass, "{}", report.to_json().unwrap());
        let lim = report.diagnostic("limit_norm2").unwrap();
        assert!((lim.target - 2.817653).abs() < 1e-5);

        let biased = cfg.with_first_step(FirstStep::Biased { q: 1.0 }).unwrap();
        let stats = run_ensemble(&biased, 3000, Functional::Superdiffusive, &EnsembleOptions::default()).unwrap();
        let report = superdiffusive_limit(&stats, Z_THRESHOLD).unwrap();
        assert!(report.pass, "{}", report.to_json().unwrap());
        let m = report.diagnostic("limit_mean_1").unwrap();
        assert!((m.target - 1.0 / crate::special::gamma(1.7).unwrap()).abs() < 1e-12);
        assert!(m.z_score.abs() < 4.0);
    }

    #[test]
    fn report_json_has_contract_fields() {
        let cfg = WalkConfig::new(2, 0.5, 50, 1).unwrap();
        let stats = run_ensemble(&cfg, 300, Functional::Diffusive, &EnsembleOptions::default()).unwrap();
        let target = exact_target(&cfg, Functional::Diffusive).unwrap();
        let json = covariance_report(&stats, &target, Z_THRESHOLD).unwrap().to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in [
            "config",
            "regime",
            "functional",
            "R",
            "horizon",
            "estimates",
            "targets",
            "standard_errors",
            "z_scores",
            "gof_distance",
            "pass",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["R"], 300);
    }
}
