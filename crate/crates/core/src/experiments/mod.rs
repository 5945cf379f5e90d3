//! End-to-end pipelines: the toy comparison and the Adult suite.

mod adult;
mod config;
mod stats;
mod toy;

pub use adult::{
    load_real, prepare_real, pretrain_for_seed, run_adult, run_adult_seed, summarize, train_fairgan_branches,
    write_sweep_csv, AdultReport, AdultSeedResult, SweepRow, SyntheticSummary,
};
pub use config::{resolve_path, RunConfig, ToyConfig, FAST_EPOCHS, FAST_SUBSAMPLE};
pub use stats::{median, spearman};
pub use toy::{run_toy, run_toy_seed, write_toy_histograms, ToyReport, ToySeedResult, ToyVariantResult};

use crate::nn::{seeded_stream, Rng};

/// Independent RNG streams for the pipeline stages of one seed. Training
/// itself draws from the trainer's own streams.
#[derive(Clone, Copy, Debug)]
pub enum Stage {
    Data = 20,
    Autoencoder = 21,
    Synthesis = 22,
}

pub fn stage_rng(seed: u64, stage: Stage, index: u64) -> Rng {
    seeded_stream(seed, stage as u64 * 1000 + index)
}

/// Runs `f` over `items` on up to `workers` threads, keeping input order.
pub fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    workers: usize,
    f: impl Fn(&T) -> crate::Result<R> + Sync,
) -> crate::Result<Vec<R>> {
    use rayon::prelude::*;
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.min(items.len()))
        .build()
        .map_err(|e| crate::Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

/// Worker count from `FAIRGAN_WORKERS`, defaulting to the available cores.
pub fn worker_count() -> usize {
    std::env::var("FAIRGAN_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}
