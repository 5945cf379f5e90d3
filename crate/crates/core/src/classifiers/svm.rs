use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Matrix, Rng};

pub const SVM_EPOCHS: usize = 50;

/// Linear SVM `sign(w·x + b)` trained on the primal objective
/// `½‖w‖² + C·Σ hinge` (hinge summed over the training rows, as in the
/// usual soft-margin formulation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
}

/// Pegasos stochastic subgradient descent with regularization
/// `1 / (C·n)`, step `1 / (regularization·t)`, and projection onto the
/// ball of radius `1/√regularization`. The bias is an extra weight on a
/// constant feature. The returned weights average the final epoch's iterates.
pub fn train_linear_svm(x: &Matrix, y: &[u8], c: f64, rng: &mut Rng) -> Result<LinearSvmModel> {
    let n = x.rows();
    if y.len() != n {
        return Err(Error::dims("svm labels", n, y.len()));
    }
    if n < 2 {
        return Err(Error::Degenerate(format!("svm needs at least 2 rows, got {n}")));
    }
    if !y.contains(&0) || !y.contains(&1) {
        return Err(Error::Degenerate("svm training labels hold a single class".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Config(format!("svm C = {c} must be positive")));
    }
    let d = x.cols();
    let reg = 1.0 / (c * n as f64);
    let radius = 1.0 / reg.sqrt();
    // w = scale · v keeps the shrink step O(1).
    let mut v = vec![0.0; d + 1];
    let mut scale = 1.0;
    let mut avg = vec![0.0; d + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0u64;
    for epoch in 0..SVM_EPOCHS {
        order.shuffle(rng);
        let last = epoch + 1 == SVM_EPOCHS;
        for &i in &order {
            t += 1;
            let row = x.row(i);
            let label = if y[i] == 1 { 1.0 } else { -1.0 };
            let margin = label * scale * (dot(&v[..d], row) + v[d]);
            let eta = 1.0 / (reg * t as f64);
            let shrink = 1.0 - eta * reg;
            if shrink > 0.0 {
                scale *= shrink;
            } else {
                // First step: w is reset before the hinge term is added.
                v.iter_mut().for_each(|w| *w = 0.0);
                scale = 1.0;
            }
            if margin < 1.0 {
                let step = eta * label / scale;
                for (w, &xi) in v[..d].iter_mut().zip(row) {
                    *w += step * xi;
                }
                v[d] += step;
            }
            let norm = scale * v.iter().map(|w| w * w).sum::<f64>().sqrt();
            if norm > radius {
                scale *= radius / norm;
            }
            if scale < 1e-100 {
                v.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
            if last {
                for (a, w) in avg.iter_mut().zip(&v) {
                    *a += scale * w;
                }
            }
        }
    }
    avg.iter_mut().for_each(|a| *a /= n as f64);
    let bias = avg.pop().expect("bias entry");
    Ok(LinearSvmModel { weights: avg, bias, c })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearSvmModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.bias
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        if x.cols() != self.weights.len() {
            return Err(Error::dims("svm input width", self.weights.len(), x.cols()));
        }
        Ok(x.row_iter().map(|r| u8::from(self.decision(r) > 0.0)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::seeded;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn separable_blobs() {
        let mut rng = seeded(1);
        let noise = Normal::new(0.0, 0.2).unwrap();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..200 {
            let c = if i % 2 == 0 { 1.0 } else { -1.0 };
            rows.push(vec![c + noise.sample(&mut rng), c + noise.sample(&mut rng)]);
            y.push(u8::from(c > 0.0));
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let m = train_linear_svm(&x, &y, 1.0, &mut rng).unwrap();
        assert_eq!(m.predict(&x).unwrap(), y);
    }

    #[test]
    fn identical_rows_predict_majority() {
        let x = Matrix::filled(10, 3, 0.5);
        let y = [1, 1, 1, 1, 1, 1, 1, 0, 0, 0];
        let m = train_linear_svm(&x, &y, 1.0, &mut seeded(2)).unwrap();
        assert!(m.predict(&x).unwrap().iter().all(|&p| p == 1));
    }

    #[test]
    fn symmetric_data_gives_centered_boundary() {
        // Mirror-symmetric about x₁ = 0, so the max-margin separator is x₁ = 0.
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for k in 0..10 {
            let h = k as f64 * 0.2 - 0.9;
            let off = 1.0 + (k % 3) as f64 * 0.5;
            rows.push(vec![off, h]);
            y.push(1);
            rows.push(vec![-off, h]);
            y.push(0);
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let m = train_linear_svm(&x, &y, 1.0, &mut seeded(3)).unwrap();
        let offset = -m.bias / m.weights[0];
        assert!(offset.abs() < 0.1, "offset {offset}");
        assert!(m.weights[0] > 0.0);
    }

    #[test]
    fn errors() {
        let x = Matrix::filled(4, 2, 0.0);
        assert!(train_linear_svm(&x, &[1, 1, 1, 1], 1.0, &mut seeded(0)).is_err());
        assert!(train_linear_svm(&Matrix::zeros(1, 2), &[1], 1.0, &mut seeded(0)).is_err());
        let m = train_linear_svm(&x, &[1, 0, 1, 0], 1.0, &mut seeded(0)).unwrap();
        assert!(m.predict(&Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn seeded_training_is_deterministic() {
        let x = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![0.2, 0.9], vec![0.8, 0.1]]).unwrap();
        let y = [0, 1, 0, 1];
        assert_eq!(
            train_linear_svm(&x, &y, 1.0, &mut seeded(5)).unwrap(),
            train_linear_svm(&x, &y, 1.0, &mut seeded(5)).unwrap()
        );
    }
}
