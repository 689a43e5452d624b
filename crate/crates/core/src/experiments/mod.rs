//! Method runners, evaluation metrics and the split protocols built on them.

pub mod methods;
pub mod metrics;
pub mod protocol;

pub use methods::{run_method, BandwidthMode, ExperimentRecord, MethodConfig, MethodId};
pub use metrics::{average_precision, mean_average_precision};
pub use protocol::{aggregate, leakage_delta, leakage_table, run_grid, unlabeled_sweep, AggregateRow, LeakageRow, SplitGrid};
