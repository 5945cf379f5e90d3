use serde::{Deserialize, Serialize};

use super::Variant;
use crate::error::{Error, Result};
use crate::nn::{clamp_probability, Matrix, Mlp};

/// Loss values with gradients with respect to each discriminator output.
#[derive(Clone, Debug, PartialEq)]
pub struct LossTerms {
    pub discriminator_loss: f64,
    /// Gradient of `discriminator_loss`, real rows first, then fake rows.
    pub discriminator_grad: Vec<f64>,
    pub generator_loss: f64,
    /// Gradient of `generator_loss` with respect to the fake outputs.
    pub generator_grad: Vec<f64>,
}

/// `-Σ w [t ln p + (1-t) ln(1-p)]` and its gradient, zero inside the clamp.
fn weighted_bce(p: f64, target: f64, w: f64) -> (f64, f64) {
    let q = clamp_probability(p);
    let loss = -w * (target * q.ln() + (1.0 - target) * (1.0 - q).ln());
    let grad = if q != p {
        0.0
    } else {
        w * (-target / q + (1.0 - target) / (1.0 - q))
    };
    (loss, grad)
}

/// Per-row weights that average within each `s` group when `by_group`, or
/// over the whole batch otherwise.
fn row_weights(s: &[u8], by_group: bool, what: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Err(Error::EmptyGroup(format!("{what} batch is empty")));
    }
    if !by_group {
        return Ok(vec![1.0 / s.len() as f64; s.len()]);
    }
    let n1 = s.iter().filter(|&&v| v == 1).count();
    let n0 = s.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::EmptyGroup(format!("{what} batch holds a single s group")));
    }
    Ok(s.iter()
        .map(|&v| if v == 1 { 1.0 / n1 as f64 } else { 1.0 / n0 as f64 })
        .collect())
}

/// Real-versus-generated objective from D1's outputs.
///
/// `d1_loss = -[mean ln D1(real) + mean ln(1 - D1(fake))]` and the generator
/// part `mean ln(1 - D1(fake))`. For `nfgan2` each mean is replaced by a sum
/// of per-group means, one term per `s` value.
pub fn v1_terms(d_real: &[f64], real_s: &[u8], d_fake: &[f64], fake_s: &[u8], variant: Variant) -> Result<LossTerms> {
    if d_real.len() != real_s.len() || d_fake.len() != fake_s.len() {
        return Err(Error::dims("v1 group labels", d_real.len() + d_fake.len(), real_s.len() + fake_s.len()));
    }
    let by_group = variant == Variant::Nfgan2;
    let w_real = row_weights(real_s, by_group, "real")?;
    let w_fake = row_weights(fake_s, by_group, "generated")?;
    let mut discriminator_loss = 0.0;
    let mut discriminator_grad = Vec::with_capacity(d_real.len() + d_fake.len());
    for (&p, &w) in d_real.iter().zip(&w_real) {
        let (l, g) = weighted_bce(p, 1.0, w);
        discriminator_loss += l;
        discriminator_grad.push(g);
    }
    let mut generator_loss = 0.0;
    let mut generator_grad = Vec::with_capacity(d_fake.len());
    for (&p, &w) in d_fake.iter().zip(&w_fake) {
        let (l, g) = weighted_bce(p, 0.0, w);
        discriminator_loss += l;
        discriminator_grad.push(g);
        // ln(1 - p) = -l, so its gradient is -g.
        generator_loss -= l;
        generator_grad.push(-g);
    }
    Ok(LossTerms {
        discriminator_loss,
        discriminator_grad,
        generator_loss,
        generator_grad,
    })
}

/// Objective `G_Dec` descends against D1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorLoss {
    /// `mean ln(1 - D1(fake))`, the generator part of [`v1_terms`].
    #[default]
    Minimax,
    /// `-mean ln D1(fake)`: same fixed point, but its gradient does not
    /// vanish when D1 rejects every generated row.
    NonSaturating,
}

/// Generator loss and its gradient with respect to D1's fake outputs, with
/// the same per-row weights as [`v1_terms`].
pub fn generator_terms(d_fake: &[f64], fake_s: &[u8], variant: Variant, loss: GeneratorLoss) -> Result<(f64, Vec<f64>)> {
    if d_fake.len() != fake_s.len() {
        return Err(Error::dims("generator group labels", d_fake.len(), fake_s.len()));
    }
    let w = row_weights(fake_s, variant == Variant::Nfgan2, "generated")?;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(d_fake.len());
    for (&p, &w) in d_fake.iter().zip(&w) {
        match loss {
            GeneratorLoss::Minimax => {
                let (l, g) = weighted_bce(p, 0.0, w);
                total -= l;
                grad.push(-g);
            }
            GeneratorLoss::NonSaturating => {
                // The gradient is left unclamped so that it survives a
                // discriminator output below the clamp.
                total -= w * clamp_probability(p).ln();
                grad.push(-w / p.max(f64::MIN_POSITIVE));
            }
        }
    }
    Ok((total, grad))
}

/// Group objective on generated rows from D2's outputs.
///
/// `d2_loss = -[mean_{s=1} ln D2 + mean_{s=0} ln(1 - D2)]`; the generator
/// part is `-λ·d2_loss`. The discriminator is trained on `λ·d2_loss`, so the
/// returned discriminator loss and gradient carry the factor `λ`; the
/// unscaled `d2_loss` is `discriminator_loss / λ` (reported separately by
/// [`v2_losses`]).
pub fn v2_terms(d_fake: &[f64], fake_s: &[u8], lambda: f64) -> Result<(f64, LossTerms)> {
    if d_fake.len() != fake_s.len() {
        return Err(Error::dims("v2 group labels", d_fake.len(), fake_s.len()));
    }
    let w = row_weights(fake_s, true, "generated")?;
    let mut d2_loss = 0.0;
    let mut grad = Vec::with_capacity(d_fake.len());
    for ((&p, &s), &w) in d_fake.iter().zip(fake_s).zip(&w) {
        let (l, g) = weighted_bce(p, f64::from(s), w);
        d2_loss += l;
        grad.push(g);
    }
    let terms = LossTerms {
        discriminator_loss: lambda * d2_loss,
        discriminator_grad: grad.iter().map(|g| lambda * g).collect(),
        generator_loss: -lambda * d2_loss,
        generator_grad: grad.iter().map(|g| -lambda * g).collect(),
    };
    Ok((d2_loss, terms))
}

fn with_s(records: &Matrix, s: &[u8], append: bool) -> Result<Matrix> {
    if append {
        let col: Vec<f64> = s.iter().map(|&v| f64::from(v)).collect();
        records.append_column(&col)
    } else {
        Ok(records.clone())
    }
}

/// `(d1_loss, generator_part)` for record batches `[x | y]`; the protected
/// column is appended for variants whose D1 sees it.
pub fn v1_losses(
    d1: &Mlp,
    real: &Matrix,
    real_s: &[u8],
    fake: &Matrix,
    fake_s: &[u8],
    variant: Variant,
) -> Result<(f64, f64)> {
    let averaging = d1.input_dim() == super::model::d1_width(real.cols(), variant, true);
    let d_real = d1.predict(&d1_input(real, real_s, variant, averaging)?)?;
    let d_fake = d1.predict(&d1_input(fake, fake_s, variant, averaging)?)?;
    let t = v1_terms(d_real.as_slice(), real_s, d_fake.as_slice(), fake_s, variant)?;
    Ok((t.discriminator_loss, t.generator_loss))
}

/// `(d2_loss, generator_part = -λ·d2_loss)` for generated records `[x | y]`.
pub fn v2_losses(d2: &Mlp, fake: &Matrix, fake_s: &[u8], lambda: f64) -> Result<(f64, f64)> {
    let d = d2.predict(fake)?;
    let (d2_loss, t) = v2_terms(d.as_slice(), fake_s, lambda)?;
    Ok((d2_loss, t.generator_loss))
}

pub(crate) fn d1_input(records: &Matrix, s: &[u8], variant: Variant, averaging: bool) -> Result<Matrix> {
    let input = with_s(records, s, variant.d1_sees_s())?;
    if !averaging {
        return Ok(input);
    }
    let means = records.column_means();
    let tiled: Vec<f64> = (0..records.rows()).flat_map(|_| means.iter().copied()).collect();
    input.hstack(&Matrix::from_vec(records.rows(), means.len(), tiled)?)
}

/// Gradient with respect to the records from the gradient with respect to
/// [`d1_input`]: the direct columns plus each row's share of the mean's.
pub(crate) fn d1_record_grad(input_grad: &Matrix, record_width: usize, variant: Variant, averaging: bool) -> Matrix {
    let mut grad = input_grad.select_columns(0..record_width);
    if averaging {
        let offset = record_width + usize::from(variant.d1_sees_s());
        let shared = input_grad.select_columns(offset..offset + record_width).column_means();
        for r in 0..grad.rows() {
            for (g, m) in grad.row_mut(r).iter_mut().zip(&shared) {
                *g += m;
            }
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn uninformative_d1() {
        let t = v1_terms(&[0.5; 3], &[1, 0, 1], &[0.5; 3], &[0, 1, 1], Variant::Fairgan).unwrap();
        assert!((t.discriminator_loss - 2.0 * LN_2).abs() < 1e-15);
        assert!((t.generator_loss + LN_2).abs() < 1e-15);
    }

    #[test]
    fn perfect_d1() {
        let t = v1_terms(&[1.0, 1.0], &[1, 0], &[0.0, 0.0], &[1, 0], Variant::Gan).unwrap();
        assert!(t.discriminator_loss < 1e-6);
    }

    #[test]
    fn hand_fixed_d1_outputs() {
        let t = v1_terms(&[0.8, 0.8], &[1, 0], &[0.3, 0.3], &[1, 0], Variant::Nfgan1).unwrap();
        let expected = -(0.8f64.ln() + 0.7f64.ln());
        assert!((t.discriminator_loss - expected).abs() < 1e-15);
        assert!((t.generator_loss - 0.7f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn nfgan2_sums_group_means() {
        let t = v1_terms(&[0.5; 3], &[1, 0, 1], &[0.5; 2], &[0, 1], Variant::Nfgan2).unwrap();
        assert!((t.discriminator_loss - 4.0 * LN_2).abs() < 1e-15);
        assert!(v1_terms(&[0.5; 2], &[1, 1], &[0.5; 2], &[0, 1], Variant::Nfgan2).is_err());
    }

    #[test]
    fn v2_values() {
        let (d2, t) = v2_terms(&[0.5; 4], &[1, 0, 0, 1], 1.0).unwrap();
        assert!((d2 - 2.0 * LN_2).abs() < 1e-15);
        assert!((t.generator_loss + d2).abs() < 1e-15);

        let (d2, t) = v2_terms(&[0.9, 0.4], &[1, 0], 2.0).unwrap();
        assert!((d2 + (0.9f64.ln() + 0.6f64.ln())).abs() < 1e-15);
        assert!((t.generator_loss + 2.0 * d2).abs() < 1e-15);

        let (_, t) = v2_terms(&[0.9, 0.4], &[1, 0], 0.0).unwrap();
        assert_eq!(t.generator_loss, 0.0);
        assert!(t.generator_grad.iter().all(|&g| g == 0.0));

        assert!(v2_terms(&[0.9, 0.4], &[1, 1], 1.0).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let real = [0.3, 0.7, 0.55];
        let fake = [0.2, 0.6];
        let rs = [1, 0, 1];
        let fs = [0, 1];
        for variant in [Variant::Gan, Variant::Nfgan2] {
            let t = v1_terms(&real, &rs, &fake, &fs, variant).unwrap();
            let h = 1e-7;
            for i in 0..2 {
                let mut up = fake;
                let mut dn = fake;
                up[i] += h;
                dn[i] -= h;
                let lu = v1_terms(&real, &rs, &up, &fs, variant).unwrap();
                let ld = v1_terms(&real, &rs, &dn, &fs, variant).unwrap();
                let fd_d = (lu.discriminator_loss - ld.discriminator_loss) / (2.0 * h);
                let fd_g = (lu.generator_loss - ld.generator_loss) / (2.0 * h);
                assert!((fd_d - t.discriminator_grad[3 + i]).abs() < 1e-6);
                assert!((fd_g - t.generator_grad[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn non_saturating_gradient_matches_finite_differences() {
        let p = [0.2, 0.6, 0.9];
        let s = [1, 0, 1];
        let (_, grad) = generator_terms(&p, &s, Variant::Fairgan, GeneratorLoss::NonSaturating).unwrap();
        for i in 0..3 {
            let h = 1e-7;
            let mut up = p;
            up[i] += h;
            let mut down = p;
            down[i] -= h;
            let loss = |q: &[f64]| generator_terms(q, &s, Variant::Fairgan, GeneratorLoss::NonSaturating).unwrap().0;
            assert!(((loss(&up) - loss(&down)) / (2.0 * h) - grad[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn averaged_record_gradient_matches_finite_differences() {
        use crate::nn::{seeded, Activation};
        let mut rng = seeded(11);
        for variant in [Variant::Fairgan, Variant::Nfgan2] {
            let width = 3;
            let d1 = Mlp::init(&[super::super::model::d1_width(width, variant, true), 5, 1], &[Activation::Tanh, Activation::Sigmoid], &mut rng).unwrap();
            let records = Matrix::from_vec(4, width, (0..12).map(|k| (0.31 * k as f64).sin()).collect()).unwrap();
            let s = [1, 0, 0, 1];
            let upstream = Matrix::from_vec(4, 1, vec![0.5, -1.0, 0.25, 2.0]).unwrap();
            let objective = |r: &Matrix| -> f64 {
                let out = d1.predict(&d1_input(r, &s, variant, true).unwrap()).unwrap();
                out.as_slice().iter().zip(upstream.as_slice()).map(|(a, b)| a * b).sum()
            };
            let cache = d1.forward(&d1_input(&records, &s, variant, true).unwrap()).unwrap();
            let input_grad = d1.backward_input(&cache, &upstream).unwrap();
            let grad = d1_record_grad(&input_grad, width, variant, true);
            let h = 1e-6;
            for k in 0..12 {
                let mut up = records.clone();
                up.as_mut_slice()[k] += h;
                let mut down = records.clone();
                down.as_mut_slice()[k] -= h;
                let numeric = (objective(&up) - objective(&down)) / (2.0 * h);
                assert!((numeric - grad.as_slice()[k]).abs() < 1e-8, "{variant} entry {k}");
            }
        }
    }
}
