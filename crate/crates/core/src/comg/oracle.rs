//! Backward-induction solver for the fee race, independent of the
//! closed-form recursion.

use crate::comg::schedule::TieBreak;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{HashrateDistribution, Round};

/// A cheap transaction valid now racing a pricier one valid from round `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct RaceSpec<S> {
    pub lambda: HashrateDistribution<S>,
    pub f1: S,
    pub f2: S,
    pub t: Round,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleConfig {
    pub max_rounds: Round,
    pub max_miners: usize,
    pub ties: TieBreak,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { max_rounds: 32, max_miners: 8, ties: TieBreak::Include }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult<S> {
    /// `censors[j-1][t]`: miner `j` leaves the cheap transaction out in round `t`.
    pub censors: Vec<Vec<bool>>,
    /// First censoring round of each named miner, `t` if it never censors.
    pub switch_rounds: Vec<Round>,
    /// Censoring hashrate per round.
    pub censor_mass: Vec<S>,
    /// Probability that the cheap transaction is mined before round `t`.
    pub probability: S,
    /// Expected fee of each named miner from round 0 on.
    pub values: Vec<S>,
}

pub fn best_response_oracle<S: Scalar>(spec: &RaceSpec<S>) -> Result<OracleResult<S>> {
    best_response_oracle_with(spec, OracleConfig::default())
}

pub fn best_response_oracle_with<S: Scalar>(spec: &RaceSpec<S>, cfg: OracleConfig) -> Result<OracleResult<S>> {
    if spec.f1 >= spec.f2 {
        return Err(Error::FeeOrderViolated);
    }
    if spec.f1.is_negative() {
        return Err(Error::NegativeFee("f1".into()));
    }
    let m = spec.lambda.m();
    if spec.t > cfg.max_rounds {
        return Err(Error::OracleBoundExceeded(format!("T = {} > {}", spec.t, cfg.max_rounds)));
    }
    if m > cfg.max_miners {
        return Err(Error::OracleBoundExceeded(format!("m = {m} > {}", cfg.max_miners)));
    }
    let t = spec.t as usize;
    let lam = spec.lambda.values();
    // value[j] holds V_j^{s+1} while round s is decided
    let mut value: Vec<S> = (1..=m).map(|j| lam[j].clone() * spec.f2.clone()).collect();
    let mut censors = vec![vec![false; t]; m];
    let mut censor_mass = vec![S::zero(); t];
    for s in (0..t).rev() {
        // each miner compares the cheap fee now against the value of waiting;
        // the comparison does not involve the others' choices, so the
        // best-response fixpoint is reached in one pass
        let decide: Vec<bool> = value
            .iter()
            .map(|v| match cfg.ties {
                TieBreak::Include => *v > spec.f1,
                TieBreak::Censor => *v >= spec.f1,
            })
            .collect();
        let mass = (1..=m)
            .filter(|&j| decide[j - 1])
            .fold(S::zero(), |a, j| a + lam[j].clone());
        for j in 1..=m {
            censors[j - 1][s] = decide[j - 1];
            let now = if decide[j - 1] { S::zero() } else { lam[j].clone() * spec.f1.clone() };
            value[j - 1] = now + mass.clone() * value[j - 1].clone();
        }
        censor_mass[s] = mass;
    }
    let survive = censor_mass.iter().fold(S::one(), |a, c| a * c.clone());
    let switch_rounds = censors
        .iter()
        .map(|row| row.iter().position(|&c| c).unwrap_or(t) as Round)
        .collect();
    Ok(OracleResult { censors, switch_rounds, censor_mass, probability: S::one() - survive, values: value })
}
