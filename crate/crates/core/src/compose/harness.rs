//! Randomised check that composing incentive-compatible protocols with a
//! constant parameter map stays incentive compatible.

use std::collections::BTreeSet;
use std::fmt::Debug;
use std::sync::Arc;

use rand::Rng;

use super::collusion::enumerate_collusions;
use super::complete::{collusion_reduce, complete};
use super::ic::{check_game, check_ic, ICVerdict, IcConfig};
use super::protocol::{additive_union, g_compose, CompositionMap, Protocol};
use crate::error::{Error, Result};
use crate::extform::{enumerate_profiles, Action, Emission, JointOutcome, Mover, StrategyProfile, TreeBuilder};
use crate::scalar::{Rational, Scalar};
use crate::types::{BalanceTable, Balances, ConflictSpec, HashrateDistribution, PlayerId, SettlementRules};

#[derive(Clone, Debug)]
pub struct HarnessReport<S> {
    pub pass: bool,
    pub composed_ic: bool,
    /// Composed utility equals the sum of component utilities on every
    /// checked profile, for every coalition.
    pub additive: bool,
    pub profiles_checked: usize,
    pub etas_checked: usize,
    pub counterexample: Option<String>,
    pub verdicts: Vec<ICVerdict<S>>,
}

/// A protocol with its settlement rules and conflicts.
pub struct Component<'a, S: Scalar, P: Ord> {
    pub protocol: &'a Protocol<S, P>,
    pub rules: &'a SettlementRules<S>,
    pub conflicts: &'a ConflictSpec,
}

impl<'a, S: Scalar, P: Ord> Clone for Component<'a, S, P> {
    fn clone(&self) -> Self {
        Component { protocol: self.protocol, rules: self.rules, conflicts: self.conflicts }
    }
}

/// Composes `c1` with `c2` at the constant parameter `q` and checks the
/// composition. Both components must be incentive compatible.
pub fn theorem1_harness<S, P, Q>(
    c1: Component<'_, S, P>,
    c2: Component<'_, S, Q>,
    q: &Q,
    lambda: &HashrateDistribution<S>,
    cfg: &IcConfig,
) -> Result<HarnessReport<S>>
where
    S: Scalar,
    P: Ord + Clone + Debug,
    Q: Ord + Clone + Debug,
{
    for (p, v) in check_ic(c1.protocol, lambda, c1.rules, c1.conflicts, cfg)? {
        if !v.holds {
            return Err(Error::PreconditionFailed(format!("first protocol is not IC at {p:?}")));
        }
    }
    let inst2 = c2.protocol.get(q).ok_or_else(|| Error::ParameterOutOfRange(format!("{q:?}")))?;
    let mut only_q = Protocol::new();
    only_q.insert(q.clone(), (*inst2.tree).clone(), inst2.ipb.clone());
    for (p, v) in check_ic(&only_q, lambda, c2.rules, c2.conflicts, cfg)? {
        if !v.holds {
            return Err(Error::PreconditionFailed(format!("second protocol is not IC at {p:?}")));
        }
    }

    let rules = Arc::new(additive_union(c1.rules, c2.rules)?);
    let conflicts = Arc::new(c1.conflicts.union(c2.conflicts)?);
    let g = CompositionMap::constant_for(c1.protocol.params(), q.clone());
    let composed = g_compose(c1.protocol, c2.protocol, &g)?;

    let mut report = HarnessReport {
        pass: true,
        composed_ic: true,
        additive: true,
        profiles_checked: 0,
        etas_checked: 0,
        counterexample: None,
        verdicts: vec![],
    };
    for (p, inst) in composed.instances() {
        let game = complete(inst.tree.clone(), lambda.clone(), rules.clone(), conflicts.clone())?;
        let v = check_game(&game, &inst.ipb, cfg)?;
        report.etas_checked += v.per_eta.len();
        if !v.holds && report.composed_ic {
            report.composed_ic = false;
            report.counterexample = Some(format!("composed game at {p:?} not IC: {:?}", v.witness));
        }
        report.verdicts.push(v);

        // projection consistency on every profile
        let i1 = c1.protocol.get(p).expect("same parameters");
        let offset = i1.tree.len();
        let g1 = complete(i1.tree.clone(), lambda.clone(), Arc::new(c1.rules.clone()), Arc::new(c1.conflicts.clone()))?;
        let g2 = complete(inst2.tree.clone(), lambda.clone(), Arc::new(c2.rules.clone()), Arc::new(c2.conflicts.clone()))?;
        let players: BTreeSet<PlayerId> = game.participants().difference(&game.miners()).cloned().collect();
        let etas = match &cfg.etas {
            Some(e) => e.clone(),
            None => enumerate_collusions(&players, &game.miners(), cfg.max_block)?,
        };
        let reduced: Vec<_> = etas.into_iter().map(|e| collusion_reduce(&game, e)).collect::<Result<_>>()?;
        for prof in enumerate_profiles(&inst.tree, cfg.plan_bound)? {
            let (s1, s2) = split(&prof, offset);
            let u = game.utility(&prof)?;
            let mut sum = g1.utility(&s1)?;
            sum.add_all(&g2.utility(&s2)?);
            report.profiles_checked += 1;
            let coalitions_ok = reduced.iter().all(|r| r.reduce(&u).approx_eq(&r.reduce(&sum)));
            if !u.approx_eq(&sum) || !coalitions_ok {
                report.additive = false;
                if report.counterexample.is_none() {
                    report.counterexample = Some(format!("utility not additive at {p:?}: {u:?} vs {sum:?}"));
                }
            }
        }
    }
    report.pass = report.composed_ic && report.additive;
    Ok(report)
}

fn split(prof: &StrategyProfile, offset: usize) -> (StrategyProfile, StrategyProfile) {
    let mut a = StrategyProfile::new();
    let mut b = StrategyProfile::new();
    for ((n, p), c) in &prof.choices {
        if *n < offset {
            a.set(*n, p, *c);
        } else {
            b.set(n - offset, p, *c);
        }
    }
    (a, b)
}

/// A random game over at most three players with at most eight profiles.
/// Each leaf emits one transaction named `{prefix}{k}`, sometimes with a
/// fee, and the rules assign random integer balances per leaf.
pub fn random_small_protocol<R: Rng>(
    rng: &mut R,
    prefix: &str,
    players: &[&str],
) -> Result<(Protocol<Rational, ()>, SettlementRules<Rational>, ConflictSpec)> {
    let pick = |rng: &mut R| players[rng.gen_range(0..players.len())];
    let mut b = TreeBuilder::<Rational>::new(players.iter().copied());
    let mut leaf_ids = Vec::new();
    let mut leaf = |b: &mut TreeBuilder<Rational>, rng: &mut R| {
        let tx = format!("{prefix}{}", leaf_ids.len());
        let e = if rng.gen_bool(0.5) {
            Emission::paid(&tx, rng.gen_range(0..2), Rational::ratio(rng.gen_range(1..3), 1), pick(rng))
        } else {
            Emission::sentinel(&tx, rng.gen_range(0..2))
        };
        leaf_ids.push(tx);
        b.leaf(vec![e])
    };
    let root = match rng.gen_range(0..4) {
        0 => {
            let (l0, l1) = (leaf(&mut b, rng), leaf(&mut b, rng));
            let o = pick(rng);
            b.decision(o, Some(0), vec![Action::new("a", vec![], l0), Action::new("b", vec![], l1)], rng.gen_range(0..2))
        }
        1 => {
            let o2 = pick(rng);
            let mut kids = Vec::new();
            for _ in 0..2 {
                let (l0, l1) = (leaf(&mut b, rng), leaf(&mut b, rng));
                kids.push(b.decision(
                    o2,
                    Some(1),
                    vec![Action::new("c", vec![], l0), Action::new("d", vec![], l1)],
                    rng.gen_range(0..2),
                ));
            }
            let o1 = pick(rng);
            b.decision(o1, Some(0), vec![Action::new("a", vec![], kids[0]), Action::new("b", vec![], kids[1])], rng.gen_range(0..2))
        }
        2 => {
            let p1 = players[0];
            let p2 = players[players.len() - 1];
            let outs: Vec<JointOutcome<Rational>> =
                (0..4).map(|_| JointOutcome { emit: vec![], child: leaf(&mut b, rng) }).collect();
            let movers = if p1 == p2 {
                vec![(Mover { player: p1.into(), actions: vec!["x".into(), "y".into(), "z".into(), "w".into()] }, rng.gen_range(0..4))]
            } else {
                vec![
                    (Mover { player: p1.into(), actions: vec!["x".into(), "y".into()] }, rng.gen_range(0..2)),
                    (Mover { player: p2.into(), actions: vec!["x".into(), "y".into()] }, rng.gen_range(0..2)),
                ]
            };
            b.simultaneous(Some(0), movers, outs)
        }
        _ => {
            let (l0, l1, l2) = (leaf(&mut b, rng), leaf(&mut b, rng), leaf(&mut b, rng));
            let o2 = pick(rng);
            let inner = b.decision(o2, Some(1), vec![Action::new("c", vec![], l0), Action::new("d", vec![], l1)], rng.gen_range(0..2));
            let o1 = pick(rng);
            b.decision(o1, Some(0), vec![Action::new("a", vec![], inner), Action::new("b", vec![], l2)], rng.gen_range(0..2))
        }
    };
    let (tree, ipb) = b.finish(root)?;
    let mut table = BalanceTable::new(leaf_ids.iter().map(String::as_str));
    for x in &leaf_ids {
        let bal = Balances::from_pairs(players.iter().map(|p| (*p, Rational::ratio(rng.gen_range(0..5), 1))));
        table = table.entry([x.as_str()], bal);
    }
    Ok((Protocol::single(tree, ipb), SettlementRules::new(table), ConflictSpec::new()))
}
