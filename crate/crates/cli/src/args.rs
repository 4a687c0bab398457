//! Command-line surface. Every analysis parameter is an optional string
//! flag so that a config document can supply it instead; the flag name
//! doubles as the config key.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "blockgame", version, about = "Incentive analysis of blockchain protocols")]
pub struct Cli {
    /// Seed for Monte-Carlo estimates.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// JSON object of parameters; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fee race between a cheap and a pricier conflicting transaction.
    #[command(subcommand)]
    Comg(ComgCmd),
    #[command(subcommand)]
    Htlc(HtlcCmd),
    #[command(subcommand, name = "two-htlc")]
    TwoHtlc(TwoHtlcCmd),
    #[command(subcommand)]
    Wormhole(WormholeCmd),
    #[command(subcommand)]
    Crab(CrabCmd),
    #[command(subcommand)]
    Mev(MevCmd),
    #[command(subcommand)]
    Compose(ComposeCmd),
}

#[derive(Subcommand, Debug)]
pub enum ComgCmd {
    /// Censoring depths and switch rounds.
    Schedule(ScheduleArgs),
    /// Probability that the cheap transaction confirms before the timelock.
    Prob(ProbArgs),
    /// Smallest timelock with certain inclusion.
    MinTimelock(RaceArgs),
    /// Backward-induction solution of the race.
    Oracle(OracleArgs),
    /// Monte-Carlo estimate of the inclusion probability.
    Simulate(SimulateArgs),
    /// Analytic, oracle and simulated probabilities over a timelock range.
    Sweep(SweepArgs),
}

#[derive(Subcommand, Debug)]
pub enum HtlcCmd {
    Analyze(HtlcArgs),
}

#[derive(Subcommand, Debug)]
pub enum TwoHtlcCmd {
    Check(TwoHtlcArgs),
}

#[derive(Subcommand, Debug)]
pub enum WormholeCmd {
    Check(WormholeArgs),
}

#[derive(Subcommand, Debug)]
pub enum CrabCmd {
    /// Searches the full closing game for a profitable old-state close.
    Game(CrabGameArgs),
    Safety(CrabArgs),
}

#[derive(Subcommand, Debug)]
pub enum MevCmd {
    Solve(MevArgs),
}

#[derive(Subcommand, Debug)]
pub enum ComposeCmd {
    /// IC check of a game document under every collusion map.
    CheckIc(CheckIcArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct RaceArgs {
    /// Hashrates `λ_0,…,λ_m`, comma separated.
    #[arg(long)]
    pub lambda: Option<String>,
    /// Fee of the transaction valid now.
    #[arg(long)]
    pub f1: Option<String>,
    /// Fee of the transaction valid from the timelock.
    #[arg(long)]
    pub f2: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct ScheduleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub race: RaceArgs,
    /// Timelock for switch rounds.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: Option<String>,
    /// `include` or `censor` when waiting and including pay the same.
    #[arg(long)]
    pub ties: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct ProbArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub race: RaceArgs,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: Option<String>,
    #[arg(long)]
    pub ties: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct OracleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub race: RaceArgs,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: Option<String>,
    #[arg(long)]
    pub ties: Option<String>,
    #[arg(long = "max-rounds")]
    #[serde(rename = "max-rounds")]
    pub max_rounds: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub race: RaceArgs,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: Option<String>,
    #[arg(long)]
    pub trials: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub race: RaceArgs,
    #[arg(long = "t-min")]
    #[serde(rename = "t-min")]
    pub t_min: Option<String>,
    #[arg(long = "t-max")]
    #[serde(rename = "t-max")]
    pub t_max: Option<String>,
    #[arg(long)]
    pub trials: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct HtlcArgs {
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: Option<String>,
    /// Round the sender learns the secret, or `never`.
    #[arg(long)]
    pub ts: Option<String>,
    /// Horizon; defaults to the timelock.
    #[arg(long)]
    pub te: Option<String>,
    #[arg(long = "v-a")]
    #[serde(rename = "v-a")]
    pub v_a: Option<String>,
    #[arg(long = "v-b")]
    #[serde(rename = "v-b")]
    pub v_b: Option<String>,
    #[arg(long)]
    pub v: Option<String>,
    #[arg(long = "cap-a")]
    #[serde(rename = "cap-a")]
    pub cap_a: Option<String>,
    #[arg(long = "cap-b")]
    #[serde(rename = "cap-b")]
    pub cap_b: Option<String>,
    /// Number of fee steps up to each cap.
    #[arg(long)]
    pub grid: Option<String>,
    /// Bonus for leaves that keep the channel open.
    #[arg(long)]
    pub eps: Option<String>,
    #[arg(long = "plan-bound")]
    #[serde(rename = "plan-bound")]
    pub plan_bound: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct TwoHtlcArgs {
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub t1: Option<String>,
    #[arg(long)]
    pub t2: Option<String>,
    #[arg(long)]
    pub v1: Option<String>,
    #[arg(long)]
    pub v2: Option<String>,
    /// Fee cap of every party.
    #[arg(long)]
    pub cap: Option<String>,
    /// Starting balance of every party.
    #[arg(long)]
    pub balance: Option<String>,
    /// `dep` (reveal follows the second channel) or `ind`.
    #[arg(long)]
    pub mode: Option<String>,
    /// Reveal round for `ind` mode, or `never`.
    #[arg(long)]
    pub reveal: Option<String>,
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long = "plan-bound")]
    #[serde(rename = "plan-bound")]
    pub plan_bound: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct WormholeArgs {
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub t1: Option<String>,
    #[arg(long)]
    pub t2: Option<String>,
    #[arg(long)]
    pub t3: Option<String>,
    #[arg(long)]
    pub v1: Option<String>,
    #[arg(long)]
    pub v2: Option<String>,
    #[arg(long)]
    pub v3: Option<String>,
    #[arg(long)]
    pub balance: Option<String>,
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct CrabArgs {
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: Option<String>,
    /// Collateral forfeited to the miner on punishment.
    #[arg(long)]
    pub c: Option<String>,
    #[arg(long)]
    pub v: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct CrabGameArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub crab: CrabArgs,
    #[arg(long = "bribe-steps")]
    #[serde(rename = "bribe-steps")]
    pub bribe_steps: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct MevArgs {
    #[arg(long)]
    pub lambda: Option<String>,
    /// Limit price of the order; defaults to the spread.
    #[arg(long)]
    pub l: Option<String>,
    /// Spread a sandwich captures.
    #[arg(long)]
    pub s: Option<String>,
    #[arg(long)]
    pub f: Option<String>,
    /// Input index of the trusted miner.
    #[arg(long)]
    pub trusted: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct CheckIcArgs {
    /// Path of a `{"game": …, "settlement": …, "lambda": …}` document.
    #[arg(long)]
    pub game: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long = "plan-bound")]
    #[serde(rename = "plan-bound")]
    pub plan_bound: Option<String>,
    /// Largest coalition size to check.
    #[arg(long = "max-block")]
    #[serde(rename = "max-block")]
    pub max_block: Option<String>,
}
