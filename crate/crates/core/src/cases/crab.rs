//! Closing a collateralised channel: Alice may publish an outdated
//! commitment and then race her delayed spend against Bob's punishment,
//! whose collateral output goes to the miner that includes it.

use std::collections::HashMap;
use std::sync::Arc;

use crate::comg::{censor_schedule_with, Depth, TieBreak};
use crate::compose::{best_deviation, complete, CompletedGame, Protocol, Witness, WitnessKind};
use crate::error::{Error, Result};
use crate::extform::{fee_grid, Action, Emission, GameTree, NodeId, StrategyProfile, TreeBuilder};
use crate::scalar::Scalar;
use crate::types::{BalanceTable, Balances, ConflictSpec, HashrateDistribution, PlayerId, Round, SettlementRules};

pub const AC_L: &str = "x_AC_l";
pub const AS_L: &str = "x_AS_l";
pub const AC_O: &str = "x_AC_o";
pub const AS_O: &str = "x_AS_o";
pub const AP_O: &str = "x_AP_o";

#[derive(Clone, Debug, PartialEq)]
pub struct CrabParams<S> {
    /// Delay before Alice's spend of a commitment becomes valid.
    pub timelock: Round,
    pub v_a_l: S,
    pub v_b_l: S,
    pub v_a_o: S,
    pub v_b_o: S,
    /// Collateral of each party.
    pub c: S,
    /// Channel value.
    pub v: S,
    /// Fee on commitments and the honest spend.
    pub eps: S,
    /// Grid step of Alice's bribe on the old spend.
    pub bribe_step: S,
    /// Bob's extra fee on the punishment, on top of the collateral.
    pub punish_cap: S,
    pub punish_step: S,
}

impl<S: Scalar> CrabParams<S> {
    /// Latest state gives Alice nothing, the old one gives her everything;
    /// this is the strongest incentive to cheat.
    pub fn worst_case(timelock: Round, c: S, v: S, bribe_steps: i64) -> Self {
        let steps = S::from_i64(bribe_steps.max(1)).expect("small");
        CrabParams {
            timelock,
            v_a_l: S::zero(),
            v_b_l: v.clone(),
            v_a_o: v.clone(),
            v_b_o: S::zero(),
            c,
            bribe_step: v.clone() / steps,
            eps: S::ratio(1, 1000),
            v,
            punish_cap: S::zero(),
            punish_step: S::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.v_a_o <= self.v_a_l {
            return Err(Error::InvalidParams("old state must favour Alice".into()));
        }
        if !(self.v_a_l.clone() + self.v_b_l.clone()).approx_eq(&self.v)
            || !(self.v_a_o.clone() + self.v_b_o.clone()).approx_eq(&self.v)
        {
            return Err(Error::InvalidParams("state balances must add up to the channel value".into()));
        }
        let all = [&self.v_a_l, &self.v_b_l, &self.v_a_o, &self.v_b_o, &self.c, &self.eps, &self.punish_cap];
        if all.iter().any(|x| x.is_negative()) {
            return Err(Error::InvalidParams("balances, collateral and fees must be non-negative".into()));
        }
        Ok(())
    }
}

struct Gen<'a, S> {
    p: &'a CrabParams<S>,
    b: TreeBuilder<S>,
    bribe: Vec<S>,
    punish: Vec<S>,
    memo: HashMap<(Round, bool, bool), NodeId>,
}

impl<'a, S: Scalar> Gen<'a, S> {
    /// Round `t` of the race; `a`, `b` record whether the spend and the
    /// punishment are already out.
    fn race(&mut self, t: Round, a: bool, b: bool) -> NodeId {
        if t > self.p.timelock || (a && b) {
            return self.b.leaf(vec![]);
        }
        if let Some(&n) = self.memo.get(&(t, a, b)) {
            return n;
        }
        let bob = if b {
            self.race(t + 1, a, b)
        } else {
            let idle = self.race(t + 1, a, false);
            let after = self.race(t + 1, a, true);
            let top = self.punish.len() - 1;
            let fee = self.b.fee_choice("B", Some(t), AP_O, t, self.punish.clone(), after, top);
            self.b.decision("B", Some(t), vec![Action::new("punish", vec![], fee), Action::new("nothing", vec![], idle)], 0)
        };
        let node = if a {
            bob
        } else {
            let bob_after = if b { self.race(t + 1, true, true) } else { self.bob_after_spend(t) };
            let fee = self.b.fee_choice("A", Some(t), AS_O, t, self.bribe.clone(), bob_after, 0);
            self.b.decision("A", Some(t), vec![Action::new("spend", vec![], fee), Action::new("nothing", vec![], bob)], 0)
        };
        self.memo.insert((t, a, b), node);
        node
    }

    /// Bob's move in round `t` once Alice's spend is out.
    fn bob_after_spend(&mut self, t: Round) -> NodeId {
        let idle = self.race(t + 1, true, false);
        let done = self.race(t + 1, true, true);
        let top = self.punish.len() - 1;
        let fee = self.b.fee_choice("B", Some(t), AP_O, t, self.punish.clone(), done, top);
        self.b.decision("B", Some(t), vec![Action::new("punish", vec![], fee), Action::new("nothing", vec![], idle)], 0)
    }
}

/// The closing game: latest or old commitment, then the race up to the
/// timelock.
pub fn crab_tree<S: Scalar>(p: &CrabParams<S>) -> Result<(GameTree<S>, StrategyProfile)> {
    p.validate()?;
    let bribe = fee_grid(&(p.v_a_o.clone() - p.v_a_l.clone()), &p.bribe_step)?;
    let punish = fee_grid(&p.punish_cap, &p.punish_step)?;
    let mut g = Gen { p, b: TreeBuilder::new(["A", "B"]), bribe, punish, memo: HashMap::new() };
    let race = g.race(0, false, false);
    let eps = p.eps.clone();
    let spend = g.b.leaf(vec![Emission::paid(AC_L, 0, eps.clone(), "A"), Emission::paid(AS_L, 0, eps.clone(), "A")]);
    let close = g.b.leaf(vec![Emission::paid(AC_L, 0, eps.clone(), "A")]);
    let latest = g.b.decision("A", None, vec![Action::new("spend", vec![], spend), Action::new("nothing", vec![], close)], 0);
    let root = g.b.decision(
        "A",
        None,
        vec![Action::new("old", vec![Emission::paid(AC_O, 0, eps, "A")], race), Action::new("latest", vec![], latest)],
        1,
    );
    g.b.finish(root)
}

pub fn crab_rules<S: Scalar>(p: &CrabParams<S>) -> SettlementRules<S> {
    let bal = |a: S, b: S| Balances::from_pairs([("A", a), ("B", b)]);
    let c = p.c.clone();
    let table = BalanceTable::new([AC_L, AS_L, AC_O, AS_O, AP_O])
        .entry(Vec::<&str>::new(), bal(S::zero(), S::zero()))
        .entry([AC_L], bal(S::zero(), p.v_b_l.clone() + c.clone()))
        .entry([AC_L, AS_L], bal(p.v_a_l.clone() + c.clone(), p.v_b_l.clone() + c.clone()))
        .entry([AC_O], bal(S::zero(), p.v_b_o.clone() + c.clone()))
        .entry([AC_O, AS_O], bal(p.v_a_o.clone() + c.clone(), p.v_b_o.clone() + c.clone()))
        .entry([AC_O, AP_O], bal(S::zero(), p.v.clone() + c.clone()));
    SettlementRules::new(table).with_bounty(AP_O, c)
}

pub fn crab_conflicts<S: Scalar>(p: &CrabParams<S>) -> ConflictSpec {
    ConflictSpec::new().with_pair(AS_O, AP_O).with_validity(AS_O, p.timelock)
}

pub fn crab_game<S: Scalar>(p: &CrabParams<S>) -> Result<Protocol<S, ()>> {
    let (t, ipb) = crab_tree(p)?;
    Ok(Protocol::single(t, ipb))
}

pub fn crab_completed<S: Scalar>(p: &CrabParams<S>, lambda: &HashrateDistribution<S>) -> Result<(CompletedGame<S>, StrategyProfile)> {
    let (t, ipb) = crab_tree(p)?;
    let game = complete(Arc::new(t), lambda.clone(), Arc::new(crab_rules(p)), Arc::new(crab_conflicts(p)))?;
    Ok((game, ipb))
}

/// Alice's most profitable deviation from closing honestly, if it gains.
pub fn crab_cheat<S: Scalar>(p: &CrabParams<S>, lambda: &HashrateDistribution<S>) -> Result<Option<Witness<S>>> {
    let (game, ipb) = crab_completed(p, lambda)?;
    Ok(best_deviation(&game, &ipb, &PlayerId::from("A"))?.filter(|w| w.kind == WitnessKind::StrictGain))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SafetyVerdict {
    pub safe: bool,
    /// `⌈ρ_m(c, v)⌉` with ties resolved towards censoring.
    pub depth: Depth,
    /// Smallest safe delay; `None` when no delay suffices.
    pub min_safe_t: Option<Round>,
}

/// Alice never profits from an old state when `T > ⌈ρ_m(c, v)⌉`. A
/// collateral of at least `v` is safe at any delay.
pub fn crab_safety<S: Scalar>(timelock: Round, c: &S, v: &S, lambda: &HashrateDistribution<S>) -> Result<SafetyVerdict> {
    if c.is_negative() || !v.is_positive() {
        return Err(Error::InvalidParams("need c ≥ 0 and v > 0".into()));
    }
    let depth = if c >= v {
        return Ok(SafetyVerdict { safe: true, depth: Depth::Finite(0), min_safe_t: Some(0) });
    } else if c.is_zero() {
        Depth::Infinite
    } else {
        censor_schedule_with(lambda, c, v, TieBreak::Censor)?.max_depth()
    };
    let min_safe_t = depth.finite().map(|d| d + 1);
    Ok(SafetyVerdict { safe: min_safe_t.map_or(false, |m| timelock >= m), depth, min_safe_t })
}
