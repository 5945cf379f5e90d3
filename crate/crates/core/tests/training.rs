use proptest::prelude::*;

use fairgan::autoencoder::{pretrain, AutoencoderConfig};
use fairgan::data::sample_toy;
use fairgan::gan::{synthesize, TrainConfig, Trainer, Variant};
use fairgan::nn::{seeded, Activation, Matrix, Mlp};

const ACTS: [Activation; 4] = [Activation::Relu, Activation::Tanh, Activation::Sigmoid, Activation::Identity];

fn dot(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

fn rel(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs()).max(1e-7)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    /// Input gradients chained through two networks, as the generator is
    /// chained into the decoder.
    #[test]
    fn chained_input_gradient_matches_finite_differences(
        seed in 0u64..1000,
        a1 in 0usize..4,
        a2 in 0usize..4,
        width in 2usize..6,
    ) {
        let mut rng = seeded(seed);
        let first = Mlp::init(&[3, width, 4], &[ACTS[a1], Activation::Tanh], &mut rng).unwrap();
        let second = Mlp::init(&[4, width, 2], &[Activation::Tanh, ACTS[a2]], &mut rng).unwrap();
        let input = Matrix::from_vec(2, 3, (0..6).map(|k| 0.37 * k as f64 - 0.9).collect()).unwrap();
        let upstream = Matrix::from_vec(2, 2, vec![0.3, -1.1, 0.7, 0.2]).unwrap();
        let objective = |x: &Matrix| dot(&second.predict(&first.predict(x).unwrap()).unwrap(), &upstream);

        let c1 = first.forward(&input).unwrap();
        let c2 = second.forward(c1.output()).unwrap();
        let mid = second.backward_input(&c2, &upstream).unwrap();
        let grad = first.backward_input(&c1, &mid).unwrap();

        let h = 1e-6;
        for k in 0..6 {
            let mut up = input.clone();
            up.as_mut_slice()[k] += h;
            let mut down = input.clone();
            down.as_mut_slice()[k] -= h;
            let numeric = (objective(&up) - objective(&down)) / (2.0 * h);
            prop_assert!(rel(grad.as_slice()[k], numeric) < 1e-4, "entry {k}: {} vs {numeric}", grad.as_slice()[k]);
        }
    }
}

#[test]
fn autoencoder_final_loss_is_below_initial() {
    let ds = sample_toy(500, &mut seeded(3)).unwrap();
    let cfg = AutoencoderConfig {
        hidden: 8,
        epochs: 20,
        batch: 64,
        learning_rate: 1e-3,
    };
    let out = pretrain(&ds.features_with_decision(), &cfg, &mut seeded(4)).unwrap();
    assert!(*out.trace.last().unwrap() < out.initial_loss);
}

#[test]
fn every_variant_trains_and_synthesizes_valid_records() {
    let ds = sample_toy(300, &mut seeded(5)).unwrap();
    let ae = pretrain(
        &ds.features_with_decision(),
        &AutoencoderConfig {
            hidden: 4,
            epochs: 3,
            batch: 64,
            learning_rate: 1e-3,
        },
        &mut seeded(6),
    )
    .unwrap()
    .model;
    let cfg = TrainConfig {
        phase1_epochs: 3,
        phase2_epochs: 3,
        batch: 64,
        noise_dim: 4,
        g_hidden: vec![8],
        d_hidden: vec![8],
        ..TrainConfig::default()
    };
    for variant in [Variant::Nfgan1, Variant::Nfgan2, Variant::Fairgan] {
        let mut t = Trainer::new(&ds, variant, &ae, &cfg).unwrap();
        t.run_phase1(&ds, cfg.phase1_epochs).unwrap();
        if variant.has_d2() {
            t.run_phase2(&ds, cfg.phase2_epochs).unwrap();
        }
        let outcome = t.into_outcome();
        assert!(outcome.trace.iter().all(|r| r.d1_loss.is_finite() && r.g_loss.is_finite()));
        let syn = synthesize(&outcome.model, ds.schema.clone(), 200, &mut seeded(7)).unwrap();
        assert_eq!(syn.len(), 200);
        assert!(syn.x.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(syn.s.contains(&0) && syn.s.contains(&1));
    }
}
