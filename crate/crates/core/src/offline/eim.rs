//! Empirical interpolation of tensor-valued coefficient fields.
//!
//! A sample of `c_i` is flattened to one scalar per (point, component) pair,
//! `values[p * d + k]`, and interpolated as a scalar function on that index
//! set. Interpolation pairs are therefore (point, component) pairs.

use faer::Mat;

use crate::error::{Error, Result};
use crate::fem::Coefficient;
use crate::scalar::Scalar;

/// Training samples of one coefficient field.
#[derive(Clone, Debug)]
pub struct TrainingSet<T> {
    pub coefficient: Coefficient,
    pub samples: Vec<Vec<T>>,
    /// `(parameter index, time step)` of each sample.
    pub provenance: Vec<(usize, usize)>,
}

impl<T: Scalar> TrainingSet<T> {
    pub fn new(coefficient: Coefficient) -> Self {
        TrainingSet {
            coefficient,
            samples: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Result of the greedy construction.
#[derive(Clone, Debug)]
pub struct EimData<T> {
    pub coefficient: Coefficient,
    /// Basis vectors `c_i^m`, each with `|c_i^m| ≤ 1` and value 1 at its own
    /// interpolation pair.
    pub basis: Vec<Vec<T>>,
    /// Flattened interpolation indices `p * d + k`.
    pub indices: Vec<usize>,
    /// `B[i][j] = c_i^j[x_i]`: unit lower triangular.
    pub interpolation_matrix: Mat<T>,
    /// `gamma[m][s]`: weight of training sample `s` in `c_i^m`.
    pub gamma: Vec<Vec<T>>,
    pub provenance: Vec<(usize, usize)>,
    /// `error_history[m]`: worst relative training error with `m` modes.
    pub error_history: Vec<f64>,
    pub eps_ei: f64,
}

impl<T: Scalar> EimData<T> {
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Interpolation pair `m` as `(point, component)`.
    pub fn pair(&self, m: usize) -> (usize, usize) {
        let d = self.coefficient.components();
        (self.indices[m] / d, self.indices[m] % d)
    }

    /// Smallest number of modes whose training error is below `eps`.
    pub fn dim_for(&self, eps: f64) -> usize {
        self.error_history
            .iter()
            .position(|&e| e < eps)
            .unwrap_or(self.basis.len())
            .max(1)
            .min(self.basis.len())
    }

    /// Interpolation weights for the first `m` modes from the values of a
    /// field at the first `m` interpolation pairs (forward substitution).
    pub fn theta(&self, values: &[T]) -> Vec<T> {
        forward_substitute(&self.interpolation_matrix, values)
    }

    /// `Σ_m θ_m c_i^m`.
    pub fn combine(&self, theta: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.basis.first().map_or(0, Vec::len)];
        for (b, &t) in self.basis.iter().zip(theta) {
            for (o, &v) in out.iter_mut().zip(b) {
                *o = *o + t * v;
            }
        }
        out
    }

    /// Interpolant of `field` using the first `m` modes.
    pub fn interpolate(&self, field: &[T], m: usize) -> Vec<T> {
        let vals: Vec<T> = self.indices[..m].iter().map(|&i| field[i]).collect();
        self.combine(&self.theta(&vals))
    }

    /// Keeps the leading `m` modes.
    pub fn truncated(&self, m: usize) -> Self {
        let m = m.min(self.basis.len());
        EimData {
            coefficient: self.coefficient,
            basis: self.basis[..m].to_vec(),
            indices: self.indices[..m].to_vec(),
            interpolation_matrix: self.interpolation_matrix.submatrix(0, 0, m, m).to_owned(),
            gamma: self.gamma[..m].to_vec(),
            provenance: self.provenance.clone(),
            error_history: self.error_history[..=m].to_vec(),
            eps_ei: self.eps_ei,
        }
    }
}

/// Solves `B θ = v` for unit lower triangular `B`, using the leading
/// `v.len()` block.
pub fn forward_substitute<T: Scalar>(b: &Mat<T>, v: &[T]) -> Vec<T> {
    let mut theta = Vec::with_capacity(v.len());
    for i in 0..v.len() {
        let mut s = v[i];
        for (j, &t) in theta.iter().enumerate() {
            s = s - b[(i, j)] * t;
        }
        theta.push(s / b[(i, i)]);
    }
    theta
}

fn max_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Greedy empirical interpolation.
///
/// Runs until every training sample is reproduced with relative sup-norm
/// error below `eps_ei`, the residuals vanish, or `max_modes` is reached.
/// The training samples are overwritten by their residuals.
///
/// Ties are broken deterministically: the earliest sample among equally bad
/// ones, the lowest flattened index among equal residual magnitudes.
pub fn eim_greedy<T: Scalar>(training: TrainingSet<T>, eps_ei: f64, max_modes: usize) -> Result<EimData<T>> {
    let TrainingSet {
        coefficient,
        samples: mut residuals,
        provenance,
    } = training;
    let ns = residuals.len();
    if ns == 0 {
        return Err(Error::ZeroTrainingSet);
    }
    let len = residuals[0].len();
    if residuals.iter().any(|r| r.len() != len) {
        return Err(Error::DimensionMismatch("training samples of different length".into()));
    }
    let scale: Vec<T> = residuals.iter().map(|r| max_abs(r)).collect();
    let global = scale.iter().fold(T::zero(), |m, &s| m.max(s));
    if !(global > T::zero()) {
        return Err(Error::ZeroTrainingSet);
    }
    // residual sup-norms, relative to each sample's own sup-norm
    let rel = |r: &[T], s: T| if s > T::zero() { (max_abs(r) / s).to_f64_lossy() } else { 0.0 };
    let mut errors: Vec<f64> = residuals.iter().zip(&scale).map(|(r, &s)| rel(r, s)).collect();
    let mut history = vec![errors.iter().cloned().fold(0.0, f64::max)];
    let mut coefs: Vec<Vec<T>> = vec![Vec::new(); ns];
    let mut basis: Vec<Vec<T>> = Vec::new();
    let mut indices = Vec::new();
    let mut gamma: Vec<Vec<T>> = Vec::new();
    let floor = global * T::lit(1e-14);

    while basis.len() < max_modes.min(ns) {
        let worst = history.last().copied().unwrap_or(0.0);
        if worst < eps_ei {
            break;
        }
        let mut s_m = 0;
        for (s, &e) in errors.iter().enumerate() {
            if e > errors[s_m] {
                s_m = s;
            }
        }
        let r = &residuals[s_m];
        let mut x_m = 0;
        for (i, v) in r.iter().enumerate() {
            if v.abs() > r[x_m].abs() {
                x_m = i;
            }
        }
        let pivot = r[x_m];
        if !(pivot.abs() > floor) {
            break;
        }
        let q: Vec<T> = r.iter().map(|&v| v / pivot).collect();

        let mut g = vec![T::zero(); ns];
        g[s_m] = T::one();
        for (k, gk) in gamma.iter().enumerate() {
            let c = coefs[s_m][k];
            for (a, &b) in g.iter_mut().zip(gk) {
                *a = *a - c * b;
            }
        }
        for a in g.iter_mut() {
            *a = *a / pivot;
        }

        for s in 0..ns {
            let c = residuals[s][x_m];
            coefs[s].push(c);
            if c != T::zero() {
                for (a, &b) in residuals[s].iter_mut().zip(&q) {
                    *a = *a - c * b;
                }
            }
            // the new point is interpolated exactly
            residuals[s][x_m] = T::zero();
            errors[s] = rel(&residuals[s], scale[s]);
        }
        basis.push(q);
        indices.push(x_m);
        gamma.push(g);
        history.push(errors.iter().cloned().fold(0.0, f64::max));
    }
    if basis.is_empty() {
        return Err(Error::ZeroTrainingSet);
    }
    let m = basis.len();
    let b = Mat::from_fn(m, m, |i, j| basis[j][indices[i]]);
    Ok(EimData {
        coefficient,
        basis,
        indices,
        interpolation_matrix: b,
        gamma,
        provenance,
        error_history: history,
        eps_ei,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(samples: Vec<Vec<f64>>) -> TrainingSet<f64> {
        let n = samples.len();
        TrainingSet {
            coefficient: Coefficient::C3,
            samples,
            provenance: (0..n).map(|k| (0, k)).collect(),
        }
    }

    #[test]
    fn multiples_need_one_mode() {
        let c = vec![0.5, -2.0, 1.0, 0.25];
        let two: Vec<f64> = c.iter().map(|x| 2.0 * x).collect();
        let e = eim_greedy(set(vec![c.clone(), two]), 1e-12, 100).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e.indices, vec![1]);
        let r = e.interpolate(&c, 1);
        assert!(r.iter().zip(&c).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn two_directions() {
        let a = vec![1.0, 0.0, 0.5, 0.2];
        let b = vec![0.0, 1.0, 0.3, -0.7];
        let e = eim_greedy(set(vec![a.clone(), b.clone(), vec![2.0, 3.0, 1.9, -1.7]]), 1e-12, 100).unwrap();
        assert_eq!(e.len(), 2);
        for i in 0..2 {
            assert_eq!(e.interpolation_matrix[(i, i)], 1.0);
            for j in i + 1..2 {
                assert_eq!(e.interpolation_matrix[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn theta_examples() {
        let samples: Vec<Vec<f64>> = (0..5)
            .map(|k| (0..20).map(|i| ((k + 1) as f64 * i as f64 * 0.1).sin()).collect())
            .collect();
        let e = eim_greedy(set(samples), 1e-12, 100).unwrap();
        let m = e.len();
        let vals: Vec<f64> = e.indices.iter().map(|&i| e.basis[0][i]).collect();
        let th = e.theta(&vals);
        assert!((th[0] - 1.0).abs() < 1e-14 && th[1..].iter().all(|t| t.abs() < 1e-14));
        assert!(e.theta(&vec![0.0; m]).iter().all(|&t| t == 0.0));
        let field = e.combine(&[0.3, -1.0, 2.0, 0.0, 0.5][..m]);
        let back = e.interpolate(&field, m);
        assert!(back.iter().zip(&field).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn errors_decrease_and_meet_tolerance() {
        let samples: Vec<Vec<f64>> = (0..15)
            .map(|k| (0..60).map(|i| 1.0 / (1.0 + (i as f64 * 0.05 - k as f64 * 0.07).powi(2))).collect())
            .collect();
        let e = eim_greedy(set(samples.clone()), 1e-6, 100).unwrap();
        for w in e.error_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        assert!(*e.error_history.last().unwrap() < 1e-6);
        let m = e.len();
        for s in &samples {
            let r = e.interpolate(s, m);
            let err = s.iter().zip(&r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let sc = s.iter().map(|a| a.abs()).fold(0.0, f64::max);
            assert!(err / sc < 1e-6);
        }
        for q in &e.basis {
            assert!(q.iter().all(|v| v.abs() <= 1.0 + 1e-14));
        }
        // gamma reproduces each basis vector from the samples
        for (q, g) in e.basis.iter().zip(&e.gamma) {
            let mut acc = vec![0.0; q.len()];
            for (s, &w) in samples.iter().zip(g) {
                for (a, &b) in acc.iter_mut().zip(s) {
                    *a += w * b;
                }
            }
            assert!(acc.iter().zip(q).all(|(a, b)| (a - b).abs() < 1e-8));
        }
    }

    #[test]
    fn zero_training_set() {
        assert!(matches!(
            eim_greedy(set(vec![vec![0.0; 4]]), 1e-3, 10),
            Err(Error::ZeroTrainingSet)
        ));
        assert!(matches!(eim_greedy(set(vec![]), 1e-3, 10), Err(Error::ZeroTrainingSet)));
    }
}
