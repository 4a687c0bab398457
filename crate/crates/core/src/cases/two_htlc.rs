//! Two channels sharing an intermediary: Alice pays Bob, Charlie pays Dave,
//! and Bob and Charlie are the same party, as are Alice and Dave.
//!
//! Charlie's channel is played first; Alice's channel follows with Bob
//! learning the secret either at a fixed round or when Charlie does.

use std::sync::Arc;

use super::htlc::{all_reveals, deviation_onset, htlc_conflicts, htlc_game, htlc_rules, reveal_time, HtlcParams, HtlcRoles, Reveal};
use crate::compose::{
    additive_union, check_game, complete, g_compose, CollusionMap, CompletedGame, CompositionMap, EtaVerdict,
    IcConfig, Instance, Protocol,
};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::types::{ConflictSpec, HashrateDistribution, SettlementRules};

/// How Bob's reveal time in the first channel is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkMode {
    /// Bob learns the secret at a fixed round.
    Independent(Reveal),
    /// Bob learns it when Charlie does in the second channel.
    Dependent,
}

pub fn alice_bob() -> HtlcRoles {
    HtlcRoles::new("Alice", "Bob", "h1.")
}

pub fn charlie_dave() -> HtlcRoles {
    HtlcRoles::new("Charlie", "Dave", "h2.")
}

/// A composed protocol with its settlement and conflicts.
#[derive(Clone)]
pub struct Composed<S: Scalar> {
    pub protocol: Protocol<S, Reveal>,
    pub rules: SettlementRules<S>,
    pub conflicts: ConflictSpec,
}

impl<S: Scalar> Composed<S> {
    pub fn instance(&self) -> &Instance<S> {
        self.protocol.instances().next().expect("one instance").1
    }

    pub fn complete(&self, lambda: &HashrateDistribution<S>) -> Result<CompletedGame<S>> {
        let inst = self.instance();
        complete(inst.tree.clone(), lambda.clone(), Arc::new(self.rules.clone()), Arc::new(self.conflicts.clone()))
    }
}

/// Common horizon for both channels.
fn aligned<S: Scalar>(p: &HtlcParams<S>, t_e: u64, t_s: Reveal) -> HtlcParams<S> {
    HtlcParams { t_e, t_s, ..p.clone() }
}

/// Charlie's channel (`p2`, secret known to Dave from round 0) followed
/// by Alice's channel (`p1`).
pub fn two_htlc<S: Scalar>(mode: LinkMode, p1: &HtlcParams<S>, p2: &HtlcParams<S>) -> Result<Composed<S>> {
    let t_e = p1.timelock.max(p2.timelock);
    let (r1, r2) = (alice_bob(), charlie_dave());
    let first = htlc_game(&aligned(p2, t_e, Reveal::At(0)), &r2, &[Reveal::At(0)])?;
    let q = aligned(p1, t_e, Reveal::At(0));
    let protocol = match mode {
        LinkMode::Independent(r) => {
            let second = htlc_game(&q, &r1, &[r])?;
            g_compose(&first, &second, &CompositionMap::constant_for([Reveal::At(0)], r))?
        }
        LinkMode::Dependent => {
            let second = htlc_game(&q, &r1, &all_reveals(t_e))?;
            let roles = r2.clone();
            let g = CompositionMap::trace("reveal to Charlie", move |_: &Reveal, play| reveal_time(play, &roles));
            g_compose(&first, &second, &g)?
        }
    };
    let rules = additive_union(&htlc_rules(p1, &r1), &htlc_rules(p2, &r2))?;
    let conflicts = htlc_conflicts(p1, &r1).union(&htlc_conflicts(p2, &r2))?;
    Ok(Composed { protocol, rules, conflicts })
}

/// `t*_m` of a channel, `None` standing for minus infinity.
pub fn t_star<S: Scalar>(lambda: &HashrateDistribution<S>, cap: &S, v: &S, timelock: u64) -> Result<Option<i64>> {
    Ok(deviation_onset(lambda, cap, v, timelock)?.1)
}

/// Necessary condition for Dave to stay honest:
/// `t*_m(cap_C, v_1; T_1) + 1 ≥ t*_m(cap_D, v_2; T_2)`, where the caps are
/// the receivers' fee caps.
pub fn theorem3_condition<S: Scalar>(p1: &HtlcParams<S>, p2: &HtlcParams<S>, lambda: &HashrateDistribution<S>) -> Result<bool> {
    let t1 = t_star(lambda, &p1.fee_cap_b, &p1.v, p1.timelock)?;
    let t2 = t_star(lambda, &p2.fee_cap_b, &p2.v, p2.timelock)?;
    Ok(match (t1, t2) {
        (_, None) => true,
        (None, Some(_)) => false,
        (Some(a), Some(b)) => a + 1 >= b,
    })
}

/// Alice with Dave, Bob with Charlie.
pub fn merged_eta<S: Scalar>(game: &CompletedGame<S>) -> Result<CollusionMap> {
    CollusionMap::merging(game.participants(), &[&["Alice", "Dave"], &["Bob", "Charlie"]])
}

#[derive(Clone, Debug)]
pub struct TwoHtlcReport<S> {
    pub condition: bool,
    pub t_star_1: Option<i64>,
    pub t_star_2: Option<i64>,
    /// Verdict under the merged coalitions.
    pub verdict: EtaVerdict<S>,
    /// Some coalition strictly gains by deviating.
    pub deviation_found: bool,
}

/// Builds the composition and checks the intended behaviour under the
/// merged coalitions.
pub fn two_htlc_check<S: Scalar>(
    mode: LinkMode,
    p1: &HtlcParams<S>,
    p2: &HtlcParams<S>,
    lambda: &HashrateDistribution<S>,
    plan_bound: u64,
) -> Result<TwoHtlcReport<S>> {
    let c = two_htlc(mode, p1, p2)?;
    let game = c.complete(lambda)?;
    let eta = merged_eta(&game)?;
    let cfg = IcConfig { plan_bound, ..IcConfig::with_etas(vec![eta]) };
    let verdict = check_game(&game, &c.instance().ipb, &cfg)?.per_eta.remove(0);
    let t_star_1 = t_star(lambda, &p1.fee_cap_b, &p1.v, p1.timelock)?;
    let t_star_2 = t_star(lambda, &p2.fee_cap_b, &p2.v, p2.timelock)?;
    Ok(TwoHtlcReport {
        condition: theorem3_condition(p1, p2, lambda)?,
        t_star_1,
        t_star_2,
        deviation_found: !verdict.nash,
        verdict,
    })
}
