use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{median, parallel_map, stage_rng, Stage, ToyConfig};
use crate::autoencoder::pretrain;
use crate::data::{sample_toy, unscale_toy, EncodedDataset};
use crate::error::Result;
use crate::fairness::jsd_values;
use crate::gan::{synthesize, TrainConfig, Trainer, Variant};
use crate::theory::{
    bin_width, binned_mean, empirical_bins, fairgan_toy_equilibrium, nfgan2_value_and_optimum, toy_conditionals, toy_pmf,
    TOY_BINS,
};

pub const TOY_VARIANTS: [Variant; 3] = [Variant::Nfgan1, Variant::Nfgan2, Variant::Fairgan];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyVariantResult {
    pub variant: Variant,
    /// `mean(x̂ | ŝ=1) − mean(x̂ | ŝ=0)` on the original scale.
    pub mean_gap: f64,
    /// JSD between the generated `P_G(x)` histogram and the exact mixture.
    pub jsd_marginal: f64,
    /// JSD between each generated conditional and the mixture average that
    /// minimizes the NFGAN-II game.
    pub jsd_s1_vs_optimum: f64,
    pub jsd_s0_vs_optimum: f64,
    pub hist_all: Vec<f64>,
    pub hist_s1: Vec<f64>,
    pub hist_s0: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToySeedResult {
    pub seed: u64,
    pub variants: Vec<ToyVariantResult>,
}

impl ToySeedResult {
    pub fn get(&self, variant: Variant) -> Option<&ToyVariantResult> {
        self.variants.iter().find(|v| v.variant == variant)
    }
}

fn trained(ds: &EncodedDataset, variant: Variant, ae: &crate::autoencoder::AutoencoderModel, cfg: &TrainConfig) -> Result<crate::gan::FairGanModel> {
    let mut t = Trainer::new(ds, variant, ae, cfg)?;
    t.run_phase1(ds, cfg.phase1_epochs)?;
    if variant.has_d2() {
        t.run_phase2(ds, cfg.phase2_epochs)?;
    }
    Ok(t.into_outcome().model)
}

pub fn run_toy_seed(cfg: &ToyConfig, seed: u64) -> Result<ToySeedResult> {
    let ds = sample_toy(cfg.rows, &mut stage_rng(seed, Stage::Data, 0))?;
    let ae = pretrain(
        &ds.features_with_decision(),
        &cfg.autoencoder,
        &mut stage_rng(seed, Stage::Autoencoder, 0),
    )?
    .model;
    let train_cfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let marginal = toy_pmf()?.marginal_xy()?;
    let optimum = nfgan2_value_and_optimum(&toy_pmf()?)?.optimum;
    let mut variants = Vec::new();
    for (k, variant) in TOY_VARIANTS.into_iter().enumerate() {
        let model = trained(&ds, variant, &ae, &train_cfg)?;
        let syn = synthesize(
            &model,
            ds.schema.clone(),
            cfg.synthetic_rows,
            &mut stage_rng(seed, Stage::Synthesis, k as u64),
        )?;
        let x: Vec<f64> = (0..syn.len()).map(|i| unscale_toy(syn.x.get(i, 0))).collect();
        let group = |g: u8| -> Vec<f64> { (0..syn.len()).filter(|&i| syn.s[i] == g).map(|i| x[i]).collect() };
        let (hist_all, hist_s1, hist_s0) = (empirical_bins(&x), empirical_bins(&group(1)), empirical_bins(&group(0)));
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        variants.push(ToyVariantResult {
            variant,
            mean_gap: mean(&group(1)) - mean(&group(0)),
            jsd_marginal: jsd_values(&hist_all, marginal.probs())?,
            jsd_s1_vs_optimum: jsd_values(&hist_s1, optimum.probs())?,
            jsd_s0_vs_optimum: jsd_values(&hist_s0, optimum.probs())?,
            hist_all,
            hist_s1,
            hist_s0,
        });
    }
    Ok(ToySeedResult { seed, variants })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyReport {
    pub config: ToyConfig,
    pub seeds: Vec<ToySeedResult>,
    pub median_fairgan_abs_gap: f64,
    pub median_nfgan1_jsd: f64,
    /// Median over seeds of the worse of the two conditionals.
    pub median_nfgan2_jsd: f64,
    /// Mean gap at the exact minimizer of the FairGAN criterion on the
    /// binned toy data, for the configured `λ`.
    pub equilibrium_gap: f64,
    /// Mean gap of the data itself, from the binned conditionals.
    pub data_gap: f64,
}

pub fn run_toy(cfg: &ToyConfig, workers: usize) -> Result<ToyReport> {
    cfg.validate()?;
    let seeds = parallel_map(&cfg.seeds, workers, |&s| run_toy_seed(cfg, s))?;
    let pick = |v: Variant, f: &dyn Fn(&ToyVariantResult) -> f64| -> f64 {
        median(&seeds.iter().filter_map(|r| r.get(v)).map(f).collect::<Vec<_>>())
    };
    let (c1, c0) = toy_conditionals()?;
    Ok(ToyReport {
        median_fairgan_abs_gap: pick(Variant::Fairgan, &|r| r.mean_gap.abs()),
        median_nfgan1_jsd: pick(Variant::Nfgan1, &|r| r.jsd_marginal),
        median_nfgan2_jsd: pick(Variant::Nfgan2, &|r| r.jsd_s1_vs_optimum.max(r.jsd_s0_vs_optimum)),
        equilibrium_gap: fairgan_toy_equilibrium(cfg.train.lambda, 20_000)?.mean_gap,
        data_gap: binned_mean(c1.probs()) - binned_mean(c0.probs()),
        config: cfg.clone(),
        seeds,
    })
}

/// One row per bin: exact data histograms, the NFGAN-II optimum, the
/// FairGAN equilibrium, then each variant's generated histograms.
pub fn write_toy_histograms(result: &ToySeedResult, lambda: f64, writer: impl Write) -> Result<()> {
    let (c1, c0) = toy_conditionals()?;
    let marginal = toy_pmf()?.marginal_xy()?;
    let optimum = nfgan2_value_and_optimum(&toy_pmf()?)?.optimum;
    let eq = fairgan_toy_equilibrium(lambda, 20_000)?;
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = [
        "bin_low",
        "bin_high",
        "data_all",
        "data_s1",
        "data_s0",
        "nfgan2_optimum",
        "fairgan_equilibrium_s1",
        "fairgan_equilibrium_s0",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for v in &result.variants {
        for part in ["all", "s1", "s0"] {
            header.push(format!("{}_{part}", v.variant));
        }
    }
    w.write_record(&header)?;
    for k in 0..TOY_BINS {
        let low = crate::data::TOY_LOW + k as f64 * bin_width();
        let mut row = vec![
            low,
            low + bin_width(),
            marginal.probs()[k],
            c1.probs()[k],
            c0.probs()[k],
            optimum.probs()[k],
            eq.g_s1[k],
            eq.g_s0[k],
        ];
        for v in &result.variants {
            row.extend([v.hist_all[k], v.hist_s1[k], v.hist_s0[k]]);
        }
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

impl ToyReport {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for r in &self.seeds {
            let path = dir.join(format!("toy_histograms_seed{}.csv", r.seed));
            write_toy_histograms(r, self.config.train.lambda, std::fs::File::create(&path)?)?;
            written.push(path);
        }
        let path = dir.join("toy_summary.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        written.push(path);
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_run_produces_normalized_histograms() {
        let mut cfg = ToyConfig {
            rows: 200,
            synthetic_rows: 500,
            seeds: vec![3],
            ..Default::default()
        };
        cfg.autoencoder.epochs = 2;
        cfg.train.phase1_epochs = 2;
        cfg.train.phase2_epochs = 2;
        cfg.train.g_hidden = vec![8];
        cfg.train.d_hidden = vec![8];
        cfg.train.noise_dim = 4;
        let report = run_toy(&cfg, 1).unwrap();
        let r = &report.seeds[0];
        assert_eq!(r.variants.len(), 3);
        for v in &r.variants {
            for h in [&v.hist_all, &v.hist_s1, &v.hist_s0] {
                assert_eq!(h.len(), TOY_BINS);
                assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        assert!((report.data_gap + 2.0).abs() < 0.01);
        let mut out = Vec::new();
        write_toy_histograms(r, 1.0, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), TOY_BINS + 1);
        assert!(text.starts_with("bin_low,bin_high,data_all,data_s1,data_s0,nfgan2_optimum,"));
        assert_eq!(run_toy_seed(&cfg, 3).unwrap(), *r);
    }
}
