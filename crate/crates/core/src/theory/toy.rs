use super::game::{fairgan_value, GameEvaluation};
use super::pmf::{FinitePmf, Outcome};
use crate::data::{TOY_HIGH, TOY_LOW, TOY_MEAN_S0, TOY_MEAN_S1, TOY_VARIANCE};
use crate::error::Result;

pub const TOY_BINS: usize = 64;

pub fn bin_width() -> f64 {
    (TOY_HIGH - TOY_LOW) / TOY_BINS as f64
}

/// Bin of a value on the original scale. Values outside the range land in
/// the edge bins, as clipping would put them there.
pub fn bin_index(v: f64) -> usize {
    let k = ((v - TOY_LOW) / bin_width()).floor();
    if k.is_nan() || k < 0.0 {
        0
    } else {
        (k as usize).min(TOY_BINS - 1)
    }
}

fn normal_cdf(x: f64, mean: f64, variance: f64) -> f64 {
    0.5 * (1.0 + libm::erf((x - mean) / (2.0 * variance).sqrt()))
}

/// Exact bin masses of a normal clipped to the toy range; the tails fold
/// into the edge bins.
pub fn gaussian_bins(mean: f64, variance: f64) -> Vec<f64> {
    let w = bin_width();
    let mut edges: Vec<f64> = (0..=TOY_BINS)
        .map(|k| normal_cdf(TOY_LOW + k as f64 * w, mean, variance))
        .collect();
    edges[0] = 0.0;
    edges[TOY_BINS] = 1.0;
    edges.windows(2).map(|e| e[1] - e[0]).collect()
}

/// Normalized bin frequencies of values on the original scale.
pub fn empirical_bins(values: &[f64]) -> Vec<f64> {
    let mut counts = vec![0.0; TOY_BINS];
    for &v in values {
        counts[bin_index(v)] += 1.0;
    }
    let n = values.len().max(1) as f64;
    counts.iter_mut().for_each(|c| *c /= n);
    counts
}

pub fn bin_space() -> Vec<Outcome> {
    (0..TOY_BINS).map(|k| Outcome::new(format!("bin{k}"), 0, None)).collect()
}

/// `P(x | s)` of the toy data for each group, discretized.
pub fn toy_conditionals() -> Result<(FinitePmf, FinitePmf)> {
    Ok((
        FinitePmf::from_weights(bin_space(), &gaussian_bins(TOY_MEAN_S1, TOY_VARIANCE))?,
        FinitePmf::from_weights(bin_space(), &gaussian_bins(TOY_MEAN_S0, TOY_VARIANCE))?,
    ))
}

/// Discretized toy data with equally likely groups and `y = 0`.
pub fn toy_pmf() -> Result<FinitePmf> {
    let (c1, c0) = toy_conditionals()?;
    FinitePmf::from_conditionals(0.5, &c1, &c0)
}

pub fn bin_centres() -> Vec<f64> {
    (0..TOY_BINS).map(|k| TOY_LOW + (k as f64 + 0.5) * bin_width()).collect()
}

/// Mean of a binned distribution, placing each bin's mass at its centre.
pub fn binned_mean(probs: &[f64]) -> f64 {
    probs.iter().zip(bin_centres()).map(|(p, c)| p * c).sum()
}

/// Generator conditionals minimizing the FairGAN criterion on the
/// discretized toy data, with `P(s)` held at the data's 1/2.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyEquilibrium {
    pub lambda: f64,
    pub g_s1: Vec<f64>,
    pub g_s0: Vec<f64>,
    pub evaluation: GameEvaluation,
    /// `mean(x | s=1) − mean(x | s=0)` under the minimizer, from bin centres.
    pub mean_gap: f64,
}

/// The criterion `2·JSD(P_data ‖ P_G) + 2λ·JSD(g₁ ‖ g₀)` is convex in the
/// pair of conditionals, so exponentiated-gradient descent on the two
/// simplices reaches its global minimum.
pub fn fairgan_toy_equilibrium(lambda: f64, iterations: usize) -> Result<ToyEquilibrium> {
    let (c1, c0) = toy_conditionals()?;
    let (p1, p0) = (c1.probs(), c0.probs());
    let start: Vec<f64> = p1.iter().zip(p0).map(|(a, b)| 0.5 * (a + b)).collect();
    let (mut g1, mut g0) = (start.clone(), start);
    let step = 0.5 / (0.5 + lambda);
    let log_ratio = |a: f64, b: f64| if a > 0.0 { (2.0 * a / (a + b)).ln() } else { 0.0 };
    for _ in 0..iterations {
        let grad1: Vec<f64> = (0..TOY_BINS)
            .map(|k| 0.5 * log_ratio(g1[k], p1[k]) + lambda * log_ratio(g1[k], g0[k]))
            .collect();
        let grad0: Vec<f64> = (0..TOY_BINS)
            .map(|k| 0.5 * log_ratio(g0[k], p0[k]) + lambda * log_ratio(g0[k], g1[k]))
            .collect();
        for (g, grad) in [(&mut g1, grad1), (&mut g0, grad0)] {
            // Scale by the largest factor first so the update cannot overflow.
            let top = grad
                .iter()
                .zip(g.iter())
                .filter(|(_, v)| **v > 0.0)
                .map(|(d, _)| -step * d)
                .fold(f64::NEG_INFINITY, f64::max);
            g.iter_mut().zip(&grad).for_each(|(v, d)| *v *= (-step * d - top).exp());
            let total: f64 = g.iter().sum();
            g.iter_mut().for_each(|v| *v /= total);
        }
    }
    let space = bin_space();
    let g_s1 = FinitePmf::from_weights(space.clone(), &g1)?;
    let g_s0 = FinitePmf::from_weights(space, &g0)?;
    let p_g = FinitePmf::from_conditionals(0.5, &g_s1, &g_s0)?;
    let evaluation = fairgan_value(&toy_pmf()?, &p_g, lambda)?;
    Ok(ToyEquilibrium {
        lambda,
        mean_gap: binned_mean(g_s1.probs()) - binned_mean(g_s0.probs()),
        g_s1: g_s1.probs().to_vec(),
        g_s0: g_s0.probs().to_vec(),
        evaluation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::nfgan2_value_and_optimum;

    #[test]
    fn masses_sum_to_one_and_peak_at_the_mean() {
        for mean in [TOY_MEAN_S1, TOY_MEAN_S0] {
            let b = gaussian_bins(mean, TOY_VARIANCE);
            assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let peak = (0..TOY_BINS).max_by(|&i, &j| b[i].total_cmp(&b[j])).unwrap();
            let centre = TOY_LOW + (peak as f64 + 0.5) * bin_width();
            assert!((centre - mean).abs() <= bin_width());
        }
    }

    #[test]
    fn central_bin_mass_matches_a_direct_integral() {
        // Midpoint-rule integral of the density over one bin.
        let (mean, var) = (TOY_MEAN_S1, TOY_VARIANCE);
        let k = bin_index(mean);
        let (a, w) = (TOY_LOW + k as f64 * bin_width(), bin_width());
        let steps = 10_000;
        let h = w / steps as f64;
        let integral: f64 = (0..steps)
            .map(|i| {
                let x = a + (i as f64 + 0.5) * h;
                (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt() * h
            })
            .sum();
        assert!((gaussian_bins(mean, var)[k] - integral).abs() < 1e-10);
    }

    #[test]
    fn binning_edges() {
        assert_eq!(bin_index(-7.0), 0);
        assert_eq!(bin_index(TOY_LOW), 0);
        assert_eq!(bin_index(TOY_HIGH), TOY_BINS - 1);
        assert_eq!(bin_index(9.0), TOY_BINS - 1);
        assert_eq!(empirical_bins(&[0.0, 0.0, 4.99, -3.0]).iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn equilibrium_satisfies_first_order_conditions() {
        // On the support, every coordinate of the gradient is equal at a
        // minimum over the simplex.
        let (c1, c0) = toy_conditionals().unwrap();
        let eq = fairgan_toy_equilibrium(1.0, 20_000).unwrap();
        let lr = |a: f64, b: f64| (2.0 * a / (a + b)).ln();
        for (g, h, p) in [(&eq.g_s1, &eq.g_s0, c1.probs()), (&eq.g_s0, &eq.g_s1, c0.probs())] {
            let grads: Vec<f64> = (0..TOY_BINS)
                .filter(|&k| g[k] > 1e-9)
                .map(|k| 0.5 * lr(g[k], p[k]) + lr(g[k], h[k]))
                .collect();
            let lo = grads.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = grads.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(hi - lo < 1e-6, "gradient spread {}", hi - lo);
        }
        // Neither pair of conditionals matches both targets at once.
        assert!(eq.evaluation.delta > 0.1);
        assert!(eq.mean_gap < -0.4 && eq.mean_gap > -0.5, "gap {}", eq.mean_gap);
    }

    #[test]
    fn heavier_fairness_weight_narrows_the_gap() {
        let gaps: Vec<f64> = [0.5, 1.0, 2.0, 4.0]
            .iter()
            .map(|&l| fairgan_toy_equilibrium(l, 20_000).unwrap().mean_gap.abs())
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
        assert!(fairgan_toy_equilibrium(0.0, 2_000).unwrap().mean_gap < -1.9);
    }

    #[test]
    fn nfgan2_toy_optimum_is_the_binwise_average() {
        let (c1, c0) = toy_conditionals().unwrap();
        let opt = nfgan2_value_and_optimum(&toy_pmf().unwrap()).unwrap();
        for k in 0..TOY_BINS {
            let avg = 0.5 * (c1.probs()[k] + c0.probs()[k]);
            assert!((opt.optimum.probs()[k] - avg).abs() < 1e-15);
        }
    }
}
