//! Cross-layer assembly: completed games, collusion reduction,
//! composition and incentive-compatibility checks.

mod collusion;
mod complete;
mod harness;
mod ic;
mod iewds;
mod protocol;
mod search;

pub use collusion::{enumerate_collusions, CollusionMap, MAX_COLLUSION_POPULATION};
pub use complete::{collusion_reduce, complete, emission_key, CompletedGame};
pub use harness::{random_small_protocol, theorem1_harness, Component, HarnessReport};
pub use ic::{
    best_deviation, check_eta, check_game, check_ic, describe_path, EtaVerdict, ICVerdict, IcConfig, IewdsStatus, Witness, WitnessKind,
};
pub use iewds::{iewds, plan_count, plan_of, plans_for, IewdsResult, Plan};
pub use protocol::{additive_union, g_compose, CompositionMap, Instance, ParamGame, Protocol, TraceFn};
pub use search::{rational_play, RationalTrace};
