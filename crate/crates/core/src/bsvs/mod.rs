//! Bucketized sparse vector summation: the shared domain model.
//!
//! Each record carries a set of at most `k` buckets (query indices) and an
//! `r`-hot label vector; the answer for bucket `t` is the sum of the label
//! vectors of the records connected to `t`.

mod accuracy;
mod labeling;
mod types;

pub use accuracy::{empirical_accuracy, FailureRates};
pub use labeling::{count_gap, exact_aggregate, hard_label, is_degenerate, soft_label, SoftLabel};
pub(crate) use types::check_records;
pub use types::{
    AccuracySpec, AnswerMatrix, ConnectionMap, LabelVector, NoisyMatrix, PrivacyModel,
    PrivacyParams, QuerySet, Record,
};
