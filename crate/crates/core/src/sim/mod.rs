//! End-to-end simulation: tasks and data, heterogeneous client assignment,
//! local training, the sharded round loop, and the shard-mean CLT check.

pub mod clt;
pub mod data;
pub mod hetero;
pub mod idx;
pub mod protocol;
pub mod task;
pub mod train;

pub use clt::{clt_check, clt_trials, CltReport, CltSpec};
pub use data::Dataset;
pub use hetero::{assign_heterogeneous, HeterogeneitySpec};
pub use protocol::{run_protocol, run_round, ProtocolConfig, ProtocolRun, RoundMetrics, SimState};
pub use task::{Loss, TaskKind, TaskSpec, TrainTask};
pub use train::local_train;
