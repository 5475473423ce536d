//! Federated training between clients, an aggregation server and a
//! key-generation center, with local SGD and poisoning attacks.

mod attack;
mod data;
mod entity;
mod model;
mod round;

pub use attack::{poison, untargeted, AttackConfig, AttackKind};
pub use data::{partition, quantity_skew, Dataset, FederatedData, MixtureSpec};
pub use entity::{
    AggregateMessage, ClientState, DistanceReport, GlobalModel, KgcState, MaskMessage, ModelUpload, Role,
    ServerKeys, ServerMessage, ServerSafe, ServerState,
};
pub use model::{Model, SgdConfig};
pub use round::{
    run_experiment, Clock, ExperimentConfig, ExperimentResult, Federation, Hoisting, NoClock, PhaseTimes, Pipeline, Reduction,
    RoundTranscript,
};
