//! The censor-only miner game: closed form, oracle, simulation and a
//! resolver for general triple sets.

mod oracle;
mod resolve;
mod schedule;
mod simulate;

pub use oracle::{best_response_oracle, best_response_oracle_with, OracleConfig, OracleResult, RaceSpec};
pub use resolve::{resolve_triples, resolve_triples_with_bounty};
pub use schedule::{
    censor_schedule, censor_schedule_with, inclusion_probability, min_certain_timelock, switch_times,
    CensorSchedule, Depth, ExtReal, SwitchTime, TieBreak,
};
pub use simulate::{simulate_race, McEstimate};
