//! Closed-form solution of the timelocked fee race.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{HashrateDistribution, Round};

/// Slack used when rounding censoring depths computed with logarithms.
const ROUNDING_SLACK: f64 = 1e-9;

/// Extended non-negative real.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinite,
}

impl ExtReal {
    pub fn as_f64(self) -> f64 {
        match self {
            ExtReal::Finite(x) => x,
            ExtReal::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::Infinite => f.write_str("inf"),
        }
    }
}

/// Number of final rounds in which a miner censors, possibly unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Depth {
    Finite(u64),
    Infinite,
}

impl Depth {
    pub fn finite(self) -> Option<u64> {
        match self {
            Depth::Finite(d) => Some(d),
            Depth::Infinite => None,
        }
    }
}

impl fmt::Display for Depth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Depth::Finite(d) => write!(f, "{d}"),
            Depth::Infinite => f.write_str("inf"),
        }
    }
}

/// First round in which a miner censors; `NegInfinity` means from the start
/// regardless of the timelock.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SwitchTime {
    NegInfinity,
    At(i64),
}

impl SwitchTime {
    /// The switch round clamped to `0..=t`.
    pub fn clamped(self, t: Round) -> Round {
        match self {
            SwitchTime::NegInfinity => 0,
            SwitchTime::At(x) => x.clamp(0, t as i64) as Round,
        }
    }

    /// Whether the miner still includes the cheap transaction in `round`.
    pub fn includes_at(self, round: Round) -> bool {
        match self {
            SwitchTime::NegInfinity => false,
            SwitchTime::At(x) => (round as i64) < x,
        }
    }
}

impl fmt::Display for SwitchTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SwitchTime::NegInfinity => f.write_str("-inf"),
            SwitchTime::At(x) => write!(f, "{x}"),
        }
    }
}

/// How a miner acts when waiting and including are worth exactly the same.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Include the immediate transaction (weak threshold inequality).
    #[default]
    Include,
    /// Censor; the pessimistic reading used for safety margins.
    Censor,
}

/// Censoring depths of every named miner for fees `f1 < f2`.
#[derive(Clone, Debug, PartialEq)]
pub struct CensorSchedule<S> {
    /// Number of miners that never censor.
    pub ell: usize,
    /// `rho[j-1]` belongs to miner `j`.
    pub rho: Vec<ExtReal>,
    /// Rounded depths, `r_star[j-1]` for miner `j`.
    pub r_star: Vec<Depth>,
    pub f1: S,
    pub f2: S,
    pub lambda: HashrateDistribution<S>,
    pub ties: TieBreak,
}

impl<S: Scalar> CensorSchedule<S> {
    /// Depth of the largest miner.
    pub fn max_depth(&self) -> Depth {
        *self.r_star.last().expect("at least one named miner")
    }
}

/// Solves the race with ties resolved towards inclusion.
pub fn censor_schedule<S: Scalar>(lambda: &HashrateDistribution<S>, f1: &S, f2: &S) -> Result<CensorSchedule<S>> {
    censor_schedule_with(lambda, f1, f2, TieBreak::Include)
}

pub fn censor_schedule_with<S: Scalar>(
    lambda: &HashrateDistribution<S>,
    f1: &S,
    f2: &S,
    ties: TieBreak,
) -> Result<CensorSchedule<S>> {
    if f1 >= f2 {
        return Err(Error::FeeOrderViolated);
    }
    if f1.is_negative() {
        return Err(Error::NegativeFee("f1".into()));
    }
    if f1.is_zero() {
        return Err(Error::ZeroFee);
    }
    let m = lambda.m();
    // never-censoring prefix: λ_j f2 ≤ f1 (or < f1 when ties censor)
    let ell = (1..=m)
        .take_while(|&j| {
            let gain = lambda.get(j).clone() * f2.clone();
            match ties {
                TieBreak::Include => gain <= *f1,
                TieBreak::Censor => gain < *f1,
            }
        })
        .count();

    let mut rho = Vec::with_capacity(m);
    let mut r_star = Vec::with_capacity(m);
    let mut prev: u64 = 0;
    let mut acc = 0.0_f64;
    let mut unbounded = false;
    let mut prev_rho = 0.0_f64;
    for j in 1..=m {
        if j <= ell {
            rho.push(ExtReal::Finite(0.0));
            r_star.push(Depth::Finite(0));
            continue;
        }
        let tail = lambda.tail(j);
        if unbounded || tail.approx_eq(&S::one()) {
            unbounded = true;
            rho.push(ExtReal::Infinite);
            r_star.push(Depth::Infinite);
            continue;
        }
        let ratio = f1.clone() / (lambda.get(j).clone() * f2.clone());
        let num = ratio.as_f64().ln() - acc;
        let den = tail.as_f64().ln();
        // the raw value may dip below the previous depth when miner j is
        // barely larger than miner j-1; round first, then clamp
        let r = prev as f64 + num / den;
        let depth = match ties {
            TieBreak::Include => (r - ROUNDING_SLACK).ceil().max(prev as f64) as u64,
            TieBreak::Censor => ((r + ROUNDING_SLACK).floor() + 1.0).max(prev as f64) as u64,
        };
        acc += (depth - prev) as f64 * den;
        prev = depth;
        rho.push(ExtReal::Finite(r.max(prev_rho)));
        prev_rho = r.max(prev_rho);
        r_star.push(Depth::Finite(depth));
    }
    Ok(CensorSchedule { ell, rho, r_star, f1: f1.clone(), f2: f2.clone(), lambda: lambda.clone(), ties })
}

/// `t*_j = T − r*_j` for every named miner.
pub fn switch_times<S: Scalar>(schedule: &CensorSchedule<S>, t: Round) -> Vec<SwitchTime> {
    schedule
        .r_star
        .iter()
        .map(|d| match d {
            Depth::Finite(r) => SwitchTime::At(t as i64 - *r as i64),
            Depth::Infinite => SwitchTime::NegInfinity,
        })
        .collect()
}

/// Probability that the cheap immediate transaction wins a race whose
/// delayed rival becomes valid at round `t`.
pub fn inclusion_probability<S: Scalar>(schedule: &CensorSchedule<S>, t: Round) -> S {
    if t == 0 {
        return S::zero();
    }
    let lambda = &schedule.lambda;
    let m = lambda.m();
    let Some(j) = (1..=m).find(|&j| schedule.r_star[j - 1] >= Depth::Finite(t)) else {
        return S::one();
    };
    let depth = |i: usize| -> u64 {
        if i == 0 {
            0
        } else {
            schedule.r_star[i - 1].finite().expect("depths before the bracket are finite")
        }
    };
    let mut survive = lambda.tail(j).powu(t - depth(j - 1));
    for i in 1..j {
        survive = survive * lambda.tail(i).powu(depth(i) - depth(i - 1));
    }
    S::one() - survive
}

/// Smallest timelock for which the immediate transaction is certain to win.
pub fn min_certain_timelock<S: Scalar>(lambda: &HashrateDistribution<S>, f1: &S, f2: &S) -> Result<Depth> {
    let s = censor_schedule(lambda, f1, f2)?;
    Ok(match s.max_depth() {
        Depth::Finite(r) => Depth::Finite(r + 1),
        Depth::Infinite => Depth::Infinite,
    })
}
