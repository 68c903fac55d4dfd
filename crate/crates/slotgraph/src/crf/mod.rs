//! Linear-chain CRF: feature instantiation in the [0, +2] window, potential
//! tables, forward–backward marginals, Viterbi and constrained Viterbi, and
//! the log-likelihood gradient.

mod features;
mod inference;
mod learning;
mod model;

pub use features::{
    default_templates, instantiate_features, validate_templates, FeatureTemplate, BOUNDARY,
};
pub use inference::{
    constrained_viterbi, forward_backward, viterbi, MarginalTable, MARGINAL_FLOOR,
};
pub use learning::log_likelihood_and_gradient;
pub use model::CrfModel;

pub(crate) use learning::{accumulate_nll, compile_extending};

#[cfg(test)]
pub(crate) use inference::enumeration;
