//! Exact evaluation of the adversarial games on finite distributions.

mod game;
mod pmf;
mod scenario;
mod toy;

pub use game::{
    discriminator_value, fairgan_floor, fairgan_objective, fairgan_stated_floor, fairgan_value, nfgan2_value,
    nfgan2_value_and_optimum, optimal_d1, optimal_d2, GameEvaluation, Nfgan2Evaluation, Nfgan2Optimum, TableEntry,
    CLOSED_FORM_TOLERANCE, LOG4, NFGAN2_FLOOR, NFGAN2_STATED_FLOOR,
};
pub use pmf::{FinitePmf, Outcome, PMF_TOLERANCE};
pub use scenario::{Scenario, ScenarioOutcome, ScenarioReport};
pub use toy::{
    bin_centres, bin_index, bin_space, bin_width, binned_mean, empirical_bins, fairgan_toy_equilibrium, gaussian_bins,
    toy_conditionals, toy_pmf, ToyEquilibrium, TOY_BINS,
};
