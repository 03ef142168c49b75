//! Shuffle-model protocols: distributed discrete-Laplace noise split into
//! many anonymous messages, and single-message amplification accounting.

mod amplify;
mod batch;
mod multi;
mod negbin;
mod single;

pub use amplify::{amplify_forward, amplify_invert, validity_limit, AmplificationParams};
pub use batch::{BatchHeader, ShuffledBatch};
pub use multi::{
    expected_message_bound, expected_message_count, multi_message_decode, multi_message_encode,
    multi_message_encode_with_noise, multi_message_modulus, shuffle, shuffle_accuracy_bound, MultiMessageParams,
    ShuffleMessage,
};
pub use negbin::{
    discrete_laplace_pmf, discrete_laplace_q, discrete_laplace_variance, neg_binomial_pmf, sample_neg_binomial,
    sample_neg_binomial_share,
};
pub use single::{single_message_pipeline, SingleMessageMechanism, SingleMessageOutcome};
