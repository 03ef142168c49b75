//! End-to-end federation simulator for record-level private labeling.

mod budget;
mod invariance;
mod partition;
mod run;
mod student;

pub use budget::{account_budget, BudgetLedger, BudgetSummary};
pub use invariance::{verify_partition_invariance, InvarianceOutcome};
pub use partition::{partition_records, Partition, PartitionScheme};
pub use run::{run_algorithm1, IterationReport, LocalMechanism, MechanismReport, SimConfig, SimInput, SimOutcome};
pub use student::ProxyStudent;
