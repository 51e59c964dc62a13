//! Mergeable one-pass moment accumulator.

use serde::Serialize;

use crate::{MerwError, Result};

/// Streaming first and second moments of a vector-valued sample.
///
/// Means and co-moments follow Welford's update for single samples and
/// Chan's pairwise formula for merges. Alongside the centred co-moment the
/// accumulator keeps the mean and centred second moment of every product
/// `x_i x_j`, which gives plug-in standard errors for raw second moments
/// (the diagonal products carry the fourth moments). The quadratic form
/// `||x||²` of every sample is kept in insertion order for goodness-of-fit
/// checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Accumulator {
    width: usize,
    runs: u64,
    mean: Vec<f64>,
    /// `Σ (x - mean)(x - mean)^T`, row-major, symmetric.
    comoment: Vec<f64>,
    /// Mean of `x_i x_j`, row-major.
    product_mean: Vec<f64>,
    /// `Σ (x_i x_j - product_mean_ij)²`, row-major.
    product_m2: Vec<f64>,
    qform: Vec<f64>,
}

impl Accumulator {
    pub fn new(width: usize) -> Self {
        Accumulator {
            width,
            runs: 0,
            mean: vec![0.0; width],
            comoment: vec![0.0; width * width],
            product_mean: vec![0.0; width * width],
            product_m2: vec![0.0; width * width],
            qform: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn runs(&self) -> u64 {
        self.runs
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// `||x||²` of every sample, in insertion order.
    pub fn qform(&self) -> &[f64] {
        &self.qform
    }

    pub fn push(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.width, "sample width");
        let w = self.width;
        self.runs += 1;
        let r = self.runs as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / r;
        }
        let shrink = (r - 1.0) / r;
        for i in 0..w {
            for j in i..w {
                let c = delta[i] * delta[j] * shrink;
                self.comoment[i * w + j] += c;
                if i != j {
                    self.comoment[j * w + i] += c;
                }
                let y = x[i] * x[j];
                let k = i * w + j;
                let dy = y - self.product_mean[k];
                self.product_mean[k] += dy / r;
                self.product_m2[k] += dy * (y - self.product_mean[k]);
                if i != j {
                    self.product_mean[j * w + i] = self.product_mean[k];
                    self.product_m2[j * w + i] = self.product_m2[k];
                }
            }
        }
        self.qform.push(x.iter().map(|v| v * v).sum());
    }

    /// Chan's merge; `other`'s samples come after `self`'s in [`Self::qform`].
    pub fn merge(&mut self, other: &Accumulator) -> Result<()> {
        if other.width != self.width {
            return Err(MerwError::Contract(format!(
                "cannot merge accumulators of width {} and {}",
                self.width, other.width
            )));
        }
        if other.runs == 0 {
            return Ok(());
        }
        if self.runs == 0 {
            *self = other.clone();
            return Ok(());
        }
        let na = self.runs as f64;
        let nb = other.runs as f64;
        let n = na + nb;
        let wb = nb / n;
        let cross = na * nb / n;
        let w = self.width;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d * wb;
        }
        for i in 0..w {
            for j in 0..w {
                let k = i * w + j;
                self.comoment[k] += other.comoment[k] + delta[i] * delta[j] * cross;
                let dy = other.product_mean[k] - self.product_mean[k];
                self.product_mean[k] += dy * wb;
                self.product_m2[k] += other.product_m2[k] + dy * dy * cross;
            }
        }
        self.runs += other.runs;
        self.qform.extend_from_slice(&other.qform);
        Ok(())
    }

    /// Unbiased covariance estimate, row-major.
    pub fn covariance(&self) -> Vec<f64> {
        let denom = self.runs.saturating_sub(1).max(1) as f64;
        self.comoment.iter().map(|c| c / denom).collect()
    }

    /// Standard error of each component mean.
    pub fn mean_se(&self) -> Vec<f64> {
        let w = self.width;
        let cov = self.covariance();
        (0..w).map(|i| (cov[i * w + i].max(0.0) / self.runs as f64).sqrt()).collect()
    }

    /// Raw second moments `Ê[x_i x_j]`, row-major.
    pub fn second_moment(&self) -> &[f64] {
        &self.product_mean
    }

    /// Standard error of each raw second moment.
    pub fn second_moment_se(&self) -> Vec<f64> {
        let denom = self.runs.saturating_sub(1).max(1) as f64;
        self.product_m2
            .iter()
            .map(|m2| (m2.max(0.0) / denom / self.runs as f64).sqrt())
            .collect()
    }

    /// Mean of `||x||²` and its standard error.
    pub fn norm2(&self) -> (f64, f64) {
        let r = self.qform.len();
        if r == 0 {
            return (f64::NAN, f64::NAN);
        }
        let mut acc = Accumulator::new(1);
        for q in &self.qform {
            acc.push(&[*q]);
        }
        (acc.mean[0], acc.mean_se()[0])
    }
}

/// Merges `parts` pairwise, level by level, in index order. The shape of the
/// tree depends only on `parts.len()`.
pub fn tree_merge(mut parts: Vec<Accumulator>) -> Result<Accumulator> {
    if parts.is_empty() {
        return Err(MerwError::Contract("nothing to merge".into()));
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut left) = it.next() {
            if let Some(right) = it.next() {
                left.merge(&right)?;
            }
            next.push(left);
        }
        parts = next;
    }
    Ok(parts.pop().expect("non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn filled(samples: &[Vec<f64>]) -> Accumulator {
        let mut acc = Accumulator::new(samples[0].len());
        for s in samples {
            acc.push(s);
        }
        acc
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
    }

    #[test]
    fn two_point_sample() {
        let acc = filled(&[vec![1.0, 2.0], vec![3.0, -2.0]]);
        assert_eq!(acc.mean(), &[2.0, 0.0]);
        assert_eq!(acc.covariance(), vec![2.0, -4.0, -4.0, 8.0]);
        assert_eq!(acc.second_moment(), &[5.0, -2.0, -2.0, 4.0]);
        assert_eq!(acc.qform(), &[5.0, 13.0]);
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let mut a = Accumulator::new(1);
        assert!(a.merge(&Accumulator::new(2)).is_err());
    }

    fn samples() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..4).prop_flat_map(|w| prop::collection::vec(prop::collection::vec(-50.0f64..50.0, w), 3..60))
    }

    proptest! {
        #[test]
        fn split_merge_matches_sequential(xs in samples(), cut1 in 0.0f64..1.0, cut2 in 0.0f64..1.0) {
            let seq = filled(&xs);
            let n = xs.len();
            let (mut i, mut j) = ((cut1 * n as f64) as usize, (cut2 * n as f64) as usize);
            if i > j { std::mem::swap(&mut i, &mut j); }
            let w = xs[0].len();
            let part = |s: &[Vec<f64>]| {
                let mut acc = Accumulator::new(w);
                for x in s { acc.push(x); }
                acc
            };
            let (a, b, c) = (part(&xs[..i]), part(&xs[i..j]), part(&xs[j..]));
            let mut left = a.clone();
            left.merge(&b).unwrap();
            left.merge(&c).unwrap();
            let mut bc = b.clone();
            bc.merge(&c).unwrap();
            let mut right = a.clone();
            right.merge(&bc).unwrap();
            for m in [&left, &right] {
                prop_assert_eq!(m.runs(), seq.runs());
                prop_assert_eq!(m.qform(), seq.qform());
                prop_assert!(close(m.mean(), seq.mean(), 1e-12));
                prop_assert!(close(&m.covariance(), &seq.covariance(), 1e-10));
                prop_assert!(close(m.second_moment(), seq.second_moment(), 1e-12));
                prop_assert!(close(&m.second_moment_se(), &seq.second_moment_se(), 1e-8));
            }
        }

        #[test]
        fn covariance_is_symmetric_psd(xs in samples()) {
            let acc = filled(&xs);
            let w = acc.width();
            let cov = acc.covariance();
            for i in 0..w {
                for j in 0..w {
                    prop_assert_eq!(cov[i * w + j], cov[j * w + i]);
                }
            }
            // Gershgorin is too weak; check v^T C v >= -tol on a few directions.
            let scale = cov.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1.0);
            for v in [[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, -1.0, 1.0], [0.3, -2.0, 0.7]] {
                let mut q = 0.0;
                for i in 0..w {
                    for j in 0..w {
                        q += v[i] * cov[i * w + j] * v[j];
                    }
                }
                prop_assert!(q >= -1e-12 * scale);
            }
        }
    }

    #[test]
    fn tree_shape_is_fixed() {
        let xs: Vec<Vec<f64>> = (0..37).map(|i| vec![(i as f64).sin(), (i as f64 * 0.7).cos()]).collect();
        let parts = |k: usize| xs.chunks(k).map(filled).collect::<Vec<_>>();
        let a = tree_merge(parts(5)).unwrap();
        let b = tree_merge(parts(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.qform(), filled(&xs).qform());
    }
}
