//! Embedding-space geometry: choosing queries, connecting private records
//! to their nearest queries, and scoring connection graphs.

mod connect;
mod distance;
mod kmeans;
mod objective;
mod select;

pub use connect::{forward_knn_exposure, local_answer, reverse_knn_connect};
pub use distance::{similarity, DistanceMetric};
pub use kmeans::{select_queries_cluster, Clustering, KMeansConfig};
pub use objective::{
    brute_force_best_connection, connection_score, objective_value, query_scores,
    ConnectionObjective, BRUTE_FORCE_MAX_QUERIES, BRUTE_FORCE_MAX_RECORDS,
};
pub use select::{labeling_accuracy, propagate_labels, select_queries_uncertainty};
