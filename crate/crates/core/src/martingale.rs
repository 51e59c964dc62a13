//! Martingale objects along one trajectory and the almost-sure statistics.
//!
//! With `a_n = Γ(a+1)Γ(n)/Γ(n+a)`, `M_n = a_n S_n` is a martingale. Its
//! increments are `a_{n+1} ε_{n+1}` with `ε_{n+1} = S_{n+1} - γ_n S_n`,
//! `γ_n = 1 + a/n`, and the predictable quadratic variation is built from
//!
//! `E[ε_{n+1} ε_{n+1}^T | F_n] = (a/n) Σ_n + (1-a)/d I - (a/n)² S_n S_n^T`,
//!
//! where `Σ_n = diag(N_n(1), ..., N_n(d))` holds the axis occupation counts.

use std::io::Write;

use serde::Serialize;

use crate::closedform::series::GammaRatioIter;
use crate::engine::Trajectory;
use crate::model::{self, FirstStep, RegimeKind};
use crate::numfmt::sig17;
use crate::{MerwError, Result};

/// Per-step martingale quantities, flattened (`d` or `d*d` values per step).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleTrack {
    pub d: usize,
    pub a: f64,
    pub an: Vec<f64>,
    /// `M_n = a_n S_n`.
    pub m: Vec<f64>,
    /// `ε_n`, with `ε_1 = S_1`.
    pub eps: Vec<f64>,
    /// `<M>_n`, row-major.
    pub qv: Vec<f64>,
    pub qv_trace: Vec<f64>,
    pub vn: Vec<f64>,
}

impl MartingaleTrack {
    pub fn len(&self) -> usize {
        self.an.len()
    }

    pub fn is_empty(&self) -> bool {
        self.an.is_empty()
    }

    /// `M_n`, one-based.
    pub fn m_at(&self, n: usize) -> &[f64] {
        &self.m[(n - 1) * self.d..n * self.d]
    }

    pub fn eps_at(&self, n: usize) -> &[f64] {
        &self.eps[(n - 1) * self.d..n * self.d]
    }

    pub fn qv_at(&self, n: usize) -> &[f64] {
        let dd = self.d * self.d;
        &self.qv[(n - 1) * dd..n * dd]
    }
}

/// Builds the track of a trajectory recorded with every position.
pub fn track(traj: &Trajectory, p: f64, first_step: FirstStep) -> Result<MartingaleTrack> {
    let d = traj.d;
    if traj.horizon < 2 {
        return Err(MerwError::Degenerate("a martingale track needs at least two steps".into()));
    }
    let dirs = traj.directions()?;
    let a = model::memory_to_a(d, p)?;
    let norm = GammaRatioIter::new(a)?;
    let n_steps = dirs.len();
    let mut out = MartingaleTrack {
        d,
        a,
        an: Vec::with_capacity(n_steps),
        m: Vec::with_capacity(n_steps * d),
        eps: Vec::with_capacity(n_steps * d),
        qv: Vec::with_capacity(n_steps * d * d),
        qv_trace: Vec::with_capacity(n_steps),
        vn: Vec::with_capacity(n_steps),
    };
    let drift = (1.0 - a) / d as f64;
    let mut occupation = vec![0u64; d];
    let mut qv = vec![0.0; d * d];
    // <M>_1 = E[S_1 S_1^T]
    for axis in 0..d {
        let plus = first_step.probability(d, model::SignedDirection::plus(axis));
        let minus = first_step.probability(d, model::SignedDirection::minus(axis));
        qv[axis * d + axis] = plus + minus;
    }
    for ((n, an, vn), row) in norm.zip(0..n_steps) {
        let pos = traj.position(row);
        if n >= 2 {
            // increment from the state at n - 1
            let prev = traj.position(row - 1);
            let k = (n - 1) as f64;
            let r = a / k;
            for i in 0..d {
                for j in 0..d {
                    let mut c = -r * r * (prev[i] * prev[j]) as f64;
                    if i == j {
                        c += r * occupation[i] as f64 + drift;
                    }
                    qv[i * d + j] += an * an * c;
                }
            }
            for i in 0..d {
                out.eps.push(pos[i] as f64 - (1.0 + r) * prev[i] as f64);
            }
        } else {
            out.eps.extend(pos.iter().map(|&x| x as f64));
        }
        occupation[dirs[row].axis()] += 1;
        out.an.push(an);
        out.m.extend(pos.iter().map(|&x| an * x as f64));
        out.qv.extend_from_slice(&qv);
        out.qv_trace.push((0..d).map(|i| qv[i * d + i]).sum());
        out.vn.push(vn);
    }
    Ok(out)
}

/// A statistic along a trajectory: `values` holds `width` numbers per step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatSeries {
    pub name: String,
    pub width: usize,
    pub steps: Vec<u64>,
    pub values: Vec<f64>,
    /// Steps before the first where the normaliser is defined.
    pub skipped: u64,
}

impl StatSeries {
    pub fn at(&self, row: usize) -> &[f64] {
        &self.values[row * self.width..(row + 1) * self.width]
    }

    pub fn last(&self) -> Option<&[f64]> {
        (!self.steps.is_empty()).then(|| self.at(self.steps.len() - 1))
    }

    /// Trace series of a square matrix series.
    pub fn trace(&self) -> StatSeries {
        let d = (self.width as f64).sqrt() as usize;
        StatSeries {
            name: format!("{}_trace", self.name),
            width: 1,
            steps: self.steps.clone(),
            values: self.values.chunks_exact(self.width).map(|m| (0..d).map(|i| m[i * d + i]).sum()).collect(),
            skipped: self.skipped,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = String::from("n");
        if self.width == 1 {
            header.push_str(",value");
        } else {
            let d = (self.width as f64).sqrt() as usize;
            for i in 1..=d {
                for j in 1..=d {
                    header.push_str(&format!(",v_{i}_{j}"));
                }
            }
        }
        writeln!(out, "{header}")?;
        for (row, n) in self.steps.iter().enumerate() {
            let mut line = n.to_string();
            for x in self.at(row) {
                line.push(',');
                line.push_str(&sig17(*x));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

fn positions_complete(traj: &Trajectory) -> Result<()> {
    if !traj.is_complete() {
        return Err(MerwError::Contract("the trajectory must be recorded with positions".into()));
    }
    Ok(())
}

/// Quadratic strong law statistic.
///
/// Diffusive: `(1/log n) Σ_{k=1}^n S_k S_k^T / k²` for `n >= 2`.
/// Critical: `(1/log log n) Σ_{k=2}^n S_k S_k^T / (k log k)²` for `n >= 3`.
pub fn qsl_statistic(traj: &Trajectory, regime: RegimeKind) -> Result<StatSeries> {
    positions_complete(traj)?;
    let d = traj.d;
    let (first_sum, first_emit) = match regime {
        RegimeKind::Diffusive => (1u64, 2u64),
        RegimeKind::Critical => (2, 3),
        RegimeKind::Superdiffusive => {
            return Err(MerwError::domain("no quadratic strong law in the superdiffusive regime"))
        }
    };
    let mut acc = vec![0.0; d * d];
    let mut steps = Vec::new();
    let mut values = Vec::new();
    for (row, &n) in traj.steps.iter().enumerate() {
        let pos = traj.position(row);
        if n >= first_sum {
            let nf = n as f64;
            let w = match regime {
                RegimeKind::Diffusive => 1.0 / (nf * nf),
                _ => 1.0 / (nf * nf.ln()).powi(2),
            };
            for i in 0..d {
                for j in 0..d {
                    acc[i * d + j] += w * (pos[i] * pos[j]) as f64;
                }
            }
        }
        if n >= first_emit {
            let nf = n as f64;
            let norm = match regime {
                RegimeKind::Diffusive => nf.ln(),
                _ => nf.ln().ln(),
            };
            steps.push(n);
            values.extend(acc.iter().map(|x| x / norm));
        }
    }
    Ok(StatSeries {
        name: "qsl".into(),
        width: d * d,
        steps,
        values,
        skipped: first_emit - 1,
    })
}

/// First step where the iterated-logarithm normaliser is positive:
/// `log log n > 0` from `n = 3` (diffusive), `log log log n > 0` from
/// `n = 16 > exp(e)` (critical).
pub fn lil_threshold(regime: RegimeKind) -> Result<u64> {
    match regime {
        RegimeKind::Diffusive => Ok(3),
        RegimeKind::Critical => Ok(16),
        RegimeKind::Superdiffusive => Err(MerwError::domain("no iterated logarithm law in the superdiffusive regime")),
    }
}

/// Law of the iterated logarithm statistic (diagnostic only):
/// `||S_n||² / (2 n log log n)` (diffusive) or
/// `||S_n||² / (2 n log n log log log n)` (critical). Steps below the
/// threshold are counted in `skipped` and not emitted.
pub fn lil_statistic(traj: &Trajectory, regime: RegimeKind) -> Result<StatSeries> {
    let threshold = lil_threshold(regime)?;
    let mut steps = Vec::new();
    let mut values = Vec::new();
    let mut skipped = 0;
    for (row, &n) in traj.steps.iter().enumerate() {
        if n < threshold {
            skipped += 1;
            continue;
        }
        let nf = n as f64;
        let norm = match regime {
            RegimeKind::Diffusive => 2.0 * nf * nf.ln().ln(),
            _ => 2.0 * nf * nf.ln() * nf.ln().ln().ln(),
        };
        let sq: f64 = traj.position(row).iter().map(|&x| (x * x) as f64).sum();
        steps.push(n);
        values.push(sq / norm);
    }
    Ok(StatSeries {
        name: "lil".into(),
        width: 1,
        steps,
        values,
        skipped,
    })
}

/// `Λ_n(i) = N_n(i)/n` at every step.
pub fn occupation(traj: &Trajectory) -> Result<StatSeries> {
    let d = traj.d;
    let dirs = traj.directions()?;
    let mut counts = vec![0u64; d];
    let mut values = Vec::with_capacity(dirs.len() * d);
    for (k, dir) in dirs.iter().enumerate() {
        counts[dir.axis()] += 1;
        let n = (k + 1) as f64;
        values.extend(counts.iter().map(|&c| c as f64 / n));
    }
    Ok(StatSeries {
        name: "occupation".into(),
        width: d,
        steps: traj.steps.clone(),
        values,
        skipped: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate, Engine, Record};
    use crate::model::WalkConfig;
    use proptest::prelude::*;

    fn straight_line(n: i64) -> Trajectory {
        Trajectory::from_positions(1, (1..=n).collect()).unwrap()
    }

    #[test]
    fn first_martingale_value_is_the_first_step() {
        let cfg = WalkConfig::new(2, 0.3, 10, 1).unwrap();
        let t = simulate(&cfg, Engine::Reduced, 0, Record::Positions).unwrap();
        let tr = track(&t, 0.3, FirstStep::Uniform).unwrap();
        let m1 = tr.m_at(1);
        assert_eq!(m1.iter().map(|x| x * x).sum::<f64>(), 1.0);
        assert_eq!(tr.qv_trace[0], 1.0);
    }

    #[test]
    fn straight_line_increments() {
        for &p in &[0.2, 0.6, 0.9] {
            let a = 2.0 * p - 1.0;
            let tr = track(&straight_line(40), p, FirstStep::Uniform).unwrap();
            for n in 2..=40 {
                assert!((tr.eps_at(n)[0] - (1.0 - a)).abs() < 1e-12, "p={p} n={n}");
            }
        }
    }

    #[test]
    fn degenerate_and_incomplete_inputs() {
        assert!(matches!(
            track(&straight_line(1), 0.5, FirstStep::Uniform),
            Err(MerwError::Degenerate(_))
        ));
        let cfg = WalkConfig::new(1, 0.5, 10, 1).unwrap();
        let t = simulate(&cfg, Engine::Reduced, 0, Record::FinalOnly).unwrap();
        assert!(track(&t, 0.5, FirstStep::Uniform).is_err());
        assert!(qsl_statistic(&t, RegimeKind::Diffusive).is_err());
        let t = simulate(&cfg, Engine::Reduced, 0, Record::Positions).unwrap();
        assert!(qsl_statistic(&t, RegimeKind::Superdiffusive).is_err());
        assert!(lil_statistic(&t, RegimeKind::Superdiffusive).is_err());
    }

    #[test]
    fn track_invariants_on_simulated_paths() {
        for &(d, p) in &[(1, 0.3), (2, 0.625), (3, 0.9), (2, 0.05)] {
            let cfg = WalkConfig::new(d, p, 2000, 11).unwrap();
            for stream in 0..3 {
                let t = simulate(&cfg, Engine::Reduced, stream, Record::Positions).unwrap();
                let tr = track(&t, p, FirstStep::Uniform).unwrap();
                let a = tr.a;
                for n in 1..=tr.len() {
                    assert!(tr.qv_trace[n - 1] <= tr.vn[n - 1] * (1.0 + 1e-12));
                    // S_n = M_n / a_n
                    for (m, s) in tr.m_at(n).iter().zip(t.position(n - 1)) {
                        assert_eq!((m / tr.an[n - 1]).round() as i64, *s);
                        assert!((m / tr.an[n - 1] - *s as f64).abs() < 1e-9);
                    }
                    if n >= 2 {
                        let prev: f64 = t.position(n - 2).iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
                        let e: f64 = tr.eps_at(n).iter().map(|x| x * x).sum::<f64>().sqrt();
                        assert!(e <= 1.0 + a.abs() * prev / (n - 1) as f64 + 1e-12);
                        // the increment is PSD and symmetric
                        let inc: Vec<f64> =
                            tr.qv_at(n).iter().zip(tr.qv_at(n - 1)).map(|(x, y)| x - y).collect();
                        for i in 0..d {
                            assert!(inc[i * d + i] >= -1e-15);
                            for j in 0..d {
                                assert!((inc[i * d + j] - inc[j * d + i]).abs() <= 1e-15);
                                assert!(inc[i * d + j].powi(2) <= inc[i * d + i] * inc[j * d + j] + 1e-15);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn qsl_of_straight_line() {
        let s = qsl_statistic(&straight_line(100), RegimeKind::Diffusive).unwrap();
        for (row, &n) in s.steps.iter().enumerate() {
            let want = n as f64 / (n as f64).ln();
            assert!((s.at(row)[0] - want).abs() < 1e-12 * want);
        }
        assert_eq!(s.steps[0], 2);
        let c = qsl_statistic(&straight_line(100), RegimeKind::Critical).unwrap();
        assert_eq!(c.steps[0], 3);
    }

    #[test]
    fn zero_positions_give_zero_statistics() {
        // back and forth: S alternates between e_1 and 0
        let positions: Vec<i64> = (1..=40).map(|k| k % 2).collect();
        let t = Trajectory::from_positions(1, positions).unwrap();
        let lil = lil_statistic(&t, RegimeKind::Diffusive).unwrap();
        assert_eq!(lil.skipped, 2);
        for (row, &n) in lil.steps.iter().enumerate() {
            if n % 2 == 0 {
                assert_eq!(lil.values[row], 0.0);
            }
        }
    }

    #[test]
    fn lil_of_straight_line() {
        let s = lil_statistic(&straight_line(100), RegimeKind::Diffusive).unwrap();
        assert_eq!(s.steps[0], 3);
        for (row, &n) in s.steps.iter().enumerate() {
            let nf = n as f64;
            assert!((s.values[row] - nf / (2.0 * nf.ln().ln())).abs() < 1e-12 * nf);
            assert!(s.values[row].is_finite() && s.values[row] > 0.0);
        }
        let c = lil_statistic(&straight_line(100), RegimeKind::Critical).unwrap();
        assert_eq!(c.steps[0], 16);
        assert_eq!(c.skipped, 15);
        assert!(c.values.iter().all(|v| v.is_finite() && *v > 0.0));
        assert!(3f64.ln().ln() > 0.0 && 2f64.ln().ln() < 0.0);
        assert!(16f64.ln().ln().ln() > 0.0 && 15f64.ln().ln().ln() < 0.0);
    }

    #[test]
    fn occupation_of_one_axis() {
        let t = Trajectory::from_positions(2, (1..=10).flat_map(|k| [k, 0]).collect()).unwrap();
        let o = occupation(&t).unwrap();
        for row in 0..10 {
            assert_eq!(o.at(row), &[1.0, 0.0]);
        }
    }

    #[test]
    fn series_csv() {
        let s = qsl_statistic(&straight_line(4), RegimeKind::Diffusive).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,value\n2,"));
        let t = Trajectory::from_positions(2, vec![1, 0, 1, 1, 2, 1]).unwrap();
        let mut buf = Vec::new();
        qsl_statistic(&t, RegimeKind::Diffusive).unwrap().write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("n,v_1_1,v_1_2,v_2_1,v_2_2\n"));
    }

    fn permute(t: &Trajectory, perm: &[usize]) -> Trajectory {
        let d = t.d;
        let positions = t.positions.chunks_exact(d).flat_map(|row| perm.iter().map(|&j| row[j]).collect::<Vec<_>>()).collect();
        Trajectory::from_positions(d, positions).unwrap()
    }

    proptest! {
        #[test]
        fn statistics_follow_axis_relabelling(seed in 0u64..1000, rot in 0usize..3) {
            let cfg = WalkConfig::new(3, 0.4, 300, seed).unwrap();
            let t = simulate(&cfg, Engine::Reduced, 0, Record::Positions).unwrap();
            let perm: Vec<usize> = (0..3).map(|i| (i + rot) % 3).collect();
            let u = permute(&t, &perm);
            let a = qsl_statistic(&t, RegimeKind::Diffusive).unwrap();
            let b = qsl_statistic(&u, RegimeKind::Diffusive).unwrap();
            for row in 0..a.steps.len() {
                let (ma, mb) = (a.at(row), b.at(row));
                for i in 0..3 {
                    for j in 0..3 {
                        prop_assert!((mb[i * 3 + j] - ma[perm[i] * 3 + perm[j]]).abs() <= 1e-12 * ma[perm[i] * 3 + perm[i]].abs().max(1.0));
                    }
                }
            }
            let la = lil_statistic(&t, RegimeKind::Diffusive).unwrap();
            let lb = lil_statistic(&u, RegimeKind::Diffusive).unwrap();
            prop_assert_eq!(la.values, lb.values);
        }
    }
}
