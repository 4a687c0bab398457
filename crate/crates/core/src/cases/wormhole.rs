//! Three-hop payment Alice → Bob → Charlie → Dave where Bob and Dave
//! collude to skip Charlie and keep his routing fee.
//!
//! Charlie's outgoing channel (to Dave) is played first; Charlie learns
//! the secret when Dave reveals it, which sets the reveal round of Bob's
//! channel to Charlie. Alice's channel to Bob follows with a fixed reveal.

use std::sync::Arc;

use super::htlc::{all_reveals, htlc_conflicts, htlc_game, htlc_rules, reveal_time, HtlcParams, HtlcRoles, Reveal};
use super::two_htlc::Composed;
use crate::compose::{
    additive_union, best_deviation, collusion_reduce, complete, g_compose, CollusionMap, CompositionMap, Witness,
};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::types::{Balances, HashrateDistribution, PlayerId};

pub fn roles() -> [HtlcRoles; 3] {
    [HtlcRoles::new("Alice", "Bob", "h1."), HtlcRoles::new("Bob", "Charlie", "h2."), HtlcRoles::new("Charlie", "Dave", "h3.")]
}

/// Channel parameters with caps at the HTLC value and `n`-step grids.
/// Balances `v_a`, `v_b` belong to the channel's sender and receiver.
pub fn channel<S: Scalar>(timelock: u64, v_a: S, v_b: S, v: S, n: i64) -> HtlcParams<S> {
    HtlcParams::new(timelock, v_a, v_b, v.clone(), v.clone(), v).with_grid(n)
}

/// Charlie's routing fee is the difference of the forwarded amounts.
pub fn routed<S: Scalar>(v3: S, fee: S) -> (S, S) {
    (v3.clone() + fee, v3)
}

/// Builds `H_1 ∘ H_2 ∘ H_3` with `p[i]` for channel `i+1`; Bob learns the
/// first secret at `bob_reveal`.
pub fn wormhole<S: Scalar>(p: [&HtlcParams<S>; 3], bob_reveal: Reveal) -> Result<Composed<S>> {
    let t_e = p.iter().map(|q| q.timelock).max().expect("three channels");
    let [r1, r2, r3] = roles();
    let at = |q: &HtlcParams<S>| HtlcParams { t_e, ..q.clone() };
    let h3 = htlc_game(&at(p[2]), &r3, &[Reveal::At(0)])?;
    let h2 = htlc_game(&at(p[1]), &r2, &all_reveals(t_e))?;
    let h1 = htlc_game(&at(p[0]), &r1, &[bob_reveal])?;
    let dave = r3.clone();
    let inner = g_compose(&h3, &h2, &CompositionMap::trace("reveal to Charlie", move |_: &Reveal, pl| reveal_time(pl, &dave)))?;
    let protocol = g_compose(&inner, &h1, &CompositionMap::constant_for([Reveal::At(0)], bob_reveal))?;
    let rules = additive_union(&additive_union(&htlc_rules(p[0], &r1), &htlc_rules(p[1], &r2))?, &htlc_rules(p[2], &r3))?;
    let conflicts = htlc_conflicts(p[0], &r1).union(&htlc_conflicts(p[1], &r2))?.union(&htlc_conflicts(p[2], &r3))?;
    Ok(Composed { protocol, rules, conflicts })
}

#[derive(Clone, Debug)]
pub struct WormholeReport<S> {
    /// Expected balances on the intended play, per player.
    pub ipb_utilities: Balances<S>,
    /// Bob and Dave together on the intended play.
    pub coalition_utility: S,
    /// Best deviation of Bob and Dave, if any improves or ties.
    pub witness: Option<Witness<S>>,
    /// Strict gain of the best deviation, zero when none.
    pub gain: S,
    pub ic: bool,
}

/// Checks whether Bob and Dave profit from bypassing Charlie.
pub fn wormhole_check<S: Scalar>(p: [&HtlcParams<S>; 3], lambda: &HashrateDistribution<S>) -> Result<WormholeReport<S>> {
    let c = wormhole(p, Reveal::At(0))?;
    let inst = c.instance();
    let game = complete(inst.tree.clone(), lambda.clone(), Arc::new(c.rules.clone()), Arc::new(c.conflicts.clone()))?;
    let eta = CollusionMap::merging(game.participants(), &[&["Bob", "Dave"]])?;
    let reduced = collusion_reduce(&game, eta)?;
    let rep = reduced.eta().rep_of(&PlayerId::from("Dave")).clone();
    let ipb_utilities = game.utility(&inst.ipb)?;
    let coalition_utility = reduced.reduce(&ipb_utilities).get(&rep);
    let witness = best_deviation(&reduced, &inst.ipb, &rep)?;
    let gain = witness.as_ref().map(|w| w.gain.clone()).filter(|g| g.definitely_gt(&S::zero())).unwrap_or_else(S::zero);
    Ok(WormholeReport { ic: gain.is_zero(), ipb_utilities, coalition_utility, witness, gain })
}
