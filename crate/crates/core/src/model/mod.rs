//! Stochastic block models: parameters, samplers, the block-structured
//! spike of the expectation matrix, and low-rank deformations.
//!
//! Communities are contiguous blocks of size `N / K`: node `i` belongs to
//! community `floor(i * K / N)`.

mod params;
mod sampling;
mod spike;

pub use params::{solve_probs, validate_params, ParamsSpec, SbmParams};
pub use sampling::{
    expectation_matrix, for_each_lower_bit, rescale, sample_adjacency, sample_cgsbm,
    sample_gaussian_cgsbm, sample_rescaled, trial_rng, TrialRng,
};
pub use spike::{build_spike, deform, DeformationSpec, SpikeBasis};
