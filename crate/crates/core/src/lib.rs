//! Record-level private federated labeling with reverse k-NN.
//!
//! Every private record votes on at most `k` of the `s` public query samples
//! nearest to it, so one record moves the aggregated label counts by at most
//! `2kr` in L1 norm no matter how many queries are asked. The label-counting
//! task is a bucketized sparse vector summation: each record owns a set of
//! `k` buckets and an `r`-hot label vector, and the server wants per-bucket
//! vector sums.
//!
//! Modules:
//!
//!  - [`bsvs`]: domain types, exact aggregation, label derivation and
//!    accuracy metrics.
//!  - [`rknn`]: query selection, reverse k-NN connection, local answers and
//!    connection objectives.
//!  - [`central`]: the trusted-curator Laplace mechanism.
//!  - [`local`]: local randomizers (randomized response, local Laplace,
//!    Collision, GSE, separation/concatenation oracles) and an exhaustive
//!    local-DP checker.
//!  - [`shuffle`]: multi-message distributed noise and single-message
//!    amplification accounting.
//!  - [`sim`]: the end-to-end federation simulator.

pub mod bsvs;
pub mod central;
mod error;
pub mod local;
pub mod rknn;
pub mod seed;
pub mod shuffle;
pub mod sim;

pub use bsvs::{
    AccuracySpec, AnswerMatrix, ConnectionMap, LabelVector, NoisyMatrix, PrivacyModel,
    PrivacyParams, QuerySet, Record,
};
pub use error::{Error, Result};
