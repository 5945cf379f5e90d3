/// Probabilities entering a logarithm are kept inside `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-7;

#[inline]
pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Mean binary cross-entropy and its gradient with respect to each
/// prediction. Inside the clamped band the gradient is zero, matching the
/// loss actually evaluated.
pub fn bce_terms(predictions: &[f64], targets: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(predictions.len(), targets.len(), "bce_terms length mismatch");
    let n = predictions.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = predictions
        .iter()
        .zip(targets)
        .map(|(&p, &t)| {
            let q = clamp_probability(p);
            loss -= t * q.ln() + (1.0 - t) * (1.0 - q).ln();
            if q != p {
                0.0
            } else {
                (-t / q + (1.0 - t) / (1.0 - q)) / n
            }
        })
        .collect();
    (loss / n, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_predictions_give_log_two() {
        let (l, _) = bce_terms(&[0.5, 0.5, 0.5], &[1.0, 0.0, 1.0]);
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn perfect_predictions_give_near_zero() {
        let (l, _) = bce_terms(&[1.0, 0.0], &[1.0, 0.0]);
        assert!(l < 2e-7);
    }

    #[test]
    fn hand_arithmetic() {
        let (l, g) = bce_terms(&[0.8, 0.3], &[1.0, 0.0]);
        let expected = -(0.8f64.ln() + 0.7f64.ln()) / 2.0;
        assert!((l - expected).abs() < 1e-15);
        assert!((g[0] - (-1.0 / 0.8) / 2.0).abs() < 1e-15);
        assert!((g[1] - (1.0 / 0.7) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let p = [0.2, 0.65, 0.9];
        let t = [0.0, 1.0, 1.0];
        let (_, g) = bce_terms(&p, &t);
        let h = 1e-6;
        for i in 0..3 {
            let mut up = p;
            let mut dn = p;
            up[i] += h;
            dn[i] -= h;
            let fd = (bce_terms(&up, &t).0 - bce_terms(&dn, &t).0) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-7);
        }
    }
}
