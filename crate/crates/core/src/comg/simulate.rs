//! Monte-Carlo replay of a fee race under given switch rounds.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::comg::oracle::RaceSpec;
use crate::comg::schedule::SwitchTime;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub p_hat: f64,
    pub se: f64,
    pub trials: u64,
}

/// Each round one miner is drawn by hashrate. Miner 0 always includes the
/// cheap transaction; miner `j` includes it only before `switch[j-1]`.
pub fn simulate_race<S: Scalar>(
    spec: &RaceSpec<S>,
    switch: &[SwitchTime],
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    let m = spec.lambda.m();
    if switch.len() != m {
        return Err(Error::InvalidParams(format!("{} switch rounds for {m} miners", switch.len())));
    }
    let weights = spec.lambda.to_f64();
    let pick = WeightedIndex::new(&weights).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..trials {
        for round in 0..spec.t {
            let j = pick.sample(&mut rng);
            if j == 0 || switch[j - 1].includes_at(round) {
                hits += 1;
                break;
            }
        }
    }
    let p_hat = hits as f64 / trials as f64;
    let se = (p_hat * (1.0 - p_hat) / trials as f64).sqrt();
    Ok(McEstimate { p_hat, se, trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::validate_hashrate;

    fn spec(t: u64) -> RaceSpec<f64> {
        RaceSpec { lambda: validate_hashrate(&[0.5, 0.2, 0.3]).unwrap(), f1: 1.0, f2: 10.0, t }
    }

    #[test]
    fn degenerate_strategies_are_exact() {
        let always = [SwitchTime::At(i64::MAX), SwitchTime::At(i64::MAX)];
        assert_eq!(simulate_race(&spec(2), &always, 1000, 1).unwrap().p_hat, 1.0);
        let lambda = validate_hashrate(&[0.0, 0.4, 0.6]).unwrap();
        let never = [SwitchTime::NegInfinity, SwitchTime::NegInfinity];
        let s = RaceSpec { lambda, f1: 1.0, f2: 10.0, t: 3 };
        let e = simulate_race(&s, &never, 1000, 1).unwrap();
        assert_eq!(e.p_hat, 0.0);
        assert_eq!(e.se, 0.0);
    }

    #[test]
    fn seeded_runs_repeat() {
        let sw = [SwitchTime::At(1), SwitchTime::At(0)];
        let a = simulate_race(&spec(2), &sw, 5000, 42).unwrap();
        let b = simulate_race(&spec(2), &sw, 5000, 42).unwrap();
        assert_eq!(a, b);
        assert!((a.p_hat - 0.85).abs() <= 3.0 * a.se);
    }

    #[test]
    fn rejects_zero_trials() {
        assert!(simulate_race(&spec(1), &[SwitchTime::At(0), SwitchTime::At(0)], 0, 0).is_err());
    }
}
