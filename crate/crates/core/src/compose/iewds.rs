//! Reduced normal form and iterated elimination of weakly dominated
//! strategies.
//!
//! A plan fixes a coalition's choices only at nodes its own earlier
//! choices leave reachable, which keeps the strategy tables small.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use super::complete::CompletedGame;
use crate::error::{Error, Result};
use crate::extform::{joint_choice, GameTree, Node, NodeId, StrategyProfile};
use crate::scalar::Scalar;
use crate::types::PlayerId;

/// A coalition's choices at the slots it may face.
pub type Plan = BTreeMap<(NodeId, PlayerId), usize>;

fn merge(a: &Plan, b: &Plan) -> Option<Plan> {
    let mut out = a.clone();
    for (k, v) in b {
        match out.get(k) {
            Some(w) if w != v => return None,
            _ => {
                out.insert(k.clone(), *v);
            }
        }
    }
    Some(out)
}

fn product(lists: &[Rc<Vec<Plan>>], bound: u64) -> Result<Vec<Plan>> {
    let mut acc: Vec<Plan> = vec![Plan::new()];
    for l in lists {
        let mut next = BTreeSet::new();
        for a in &acc {
            for b in l.iter() {
                if let Some(m) = merge(a, b) {
                    next.insert(m);
                }
            }
            if next.len() as u64 > bound {
                return Err(Error::EnumerationBoundExceeded(format!("more than {bound} plans"), bound));
            }
        }
        acc = next.into_iter().collect();
    }
    Ok(acc)
}

struct PlanBuilder<'a, S> {
    tree: &'a GameTree<S>,
    members: &'a BTreeSet<PlayerId>,
    bound: u64,
    memo: HashMap<NodeId, Rc<Vec<Plan>>>,
}

impl<'a, S: Scalar> PlanBuilder<'a, S> {
    fn plans(&mut self, id: NodeId) -> Result<Rc<Vec<Plan>>> {
        if let Some(p) = self.memo.get(&id) {
            return Ok(p.clone());
        }
        let node = self.tree.node(id);
        let out: Vec<Plan> = match node {
            Node::Leaf { .. } => vec![Plan::new()],
            Node::Junction { child, .. } => self.plans(*child)?.as_ref().clone(),
            Node::Simultaneous { movers, outcomes, .. } => {
                let mine: Vec<usize> = (0..movers.len()).filter(|&i| self.members.contains(&movers[i].player)).collect();
                let mut groups: BTreeMap<Vec<usize>, BTreeSet<NodeId>> = BTreeMap::new();
                for (idx, o) in outcomes.iter().enumerate() {
                    let c = joint_choice(movers, idx);
                    let key: Vec<usize> = mine.iter().map(|&i| c[i]).collect();
                    groups.entry(key).or_default().insert(o.child);
                }
                let mut all = BTreeSet::new();
                for (key, kids) in groups {
                    let lists = kids.iter().map(|&k| self.plans(k)).collect::<Result<Vec<_>>>()?;
                    for mut p in product(&lists, self.bound)? {
                        for (j, &i) in mine.iter().enumerate() {
                            p.insert((id, movers[i].player.clone()), key[j]);
                        }
                        all.insert(p);
                    }
                    if all.len() as u64 > self.bound {
                        return Err(Error::EnumerationBoundExceeded(format!("more than {} plans", self.bound), self.bound));
                    }
                }
                all.into_iter().collect()
            }
            _ => {
                let (owner, arity) = node.slots().remove(0);
                let kids = node.children();
                if self.members.contains(&owner) {
                    let mut all = Vec::new();
                    for a in 0..arity {
                        let k = action_child(node, a);
                        for mut p in self.plans(k)?.iter().cloned() {
                            p.insert((id, owner.clone()), a);
                            all.push(p);
                        }
                        if all.len() as u64 > self.bound {
                            return Err(Error::EnumerationBoundExceeded(format!("more than {} plans", self.bound), self.bound));
                        }
                    }
                    all
                } else {
                    let distinct: BTreeSet<NodeId> = kids.into_iter().collect();
                    let lists = distinct.into_iter().map(|k| self.plans(k)).collect::<Result<Vec<_>>>()?;
                    product(&lists, self.bound)?
                }
            }
        };
        let rc = Rc::new(out);
        self.memo.insert(id, rc.clone());
        Ok(rc)
    }
}

fn action_child<S>(node: &Node<S>, a: usize) -> NodeId {
    match node {
        Node::FeeChoice { child, .. } => *child,
        _ => node.children()[a],
    }
}

/// Upper bound on the number of plans, exact when no node is shared
/// between branches. Saturates.
pub fn plan_count<S: Scalar>(tree: &GameTree<S>, members: &BTreeSet<PlayerId>) -> u128 {
    fn go<S: Scalar>(tree: &GameTree<S>, members: &BTreeSet<PlayerId>, id: NodeId, memo: &mut HashMap<NodeId, u128>) -> u128 {
        if let Some(&c) = memo.get(&id) {
            return c;
        }
        let node = tree.node(id);
        let c = match node {
            Node::Leaf { .. } => 1,
            Node::Junction { child, .. } => go(tree, members, *child, memo),
            Node::Simultaneous { movers, outcomes, .. } => {
                let mine: Vec<usize> = (0..movers.len()).filter(|&i| members.contains(&movers[i].player)).collect();
                let mut groups: BTreeMap<Vec<usize>, BTreeSet<NodeId>> = BTreeMap::new();
                for (idx, o) in outcomes.iter().enumerate() {
                    let c = joint_choice(movers, idx);
                    groups.entry(mine.iter().map(|&i| c[i]).collect()).or_default().insert(o.child);
                }
                groups.values().fold(0u128, |acc, kids| {
                    let prod = kids.iter().fold(1u128, |p, &k| p.saturating_mul(go(tree, members, k, memo)));
                    acc.saturating_add(prod)
                })
            }
            _ => {
                let (owner, arity) = node.slots().remove(0);
                if members.contains(&owner) {
                    (0..arity).fold(0u128, |acc, a| acc.saturating_add(go(tree, members, action_child(node, a), memo)))
                } else {
                    let distinct: BTreeSet<NodeId> = node.children().into_iter().collect();
                    distinct.into_iter().fold(1u128, |p, k| p.saturating_mul(go(tree, members, k, memo)))
                }
            }
        };
        memo.insert(id, c);
        c
    }
    go(tree, members, tree.root(), &mut HashMap::new())
}

/// Every plan of the coalition `members`.
pub fn plans_for<S: Scalar>(tree: &GameTree<S>, members: &BTreeSet<PlayerId>, bound: u64) -> Result<Vec<Plan>> {
    let mut b = PlanBuilder { tree, members, bound, memo: HashMap::new() };
    Ok(b.plans(tree.root())?.as_ref().clone())
}

/// The plan a full profile induces for a coalition.
pub fn plan_of<S: Scalar>(tree: &GameTree<S>, members: &BTreeSet<PlayerId>, profile: &StrategyProfile) -> Result<Plan> {
    let mut out = Plan::new();
    let mut seen = BTreeSet::new();
    let mut stack = vec![tree.root()];
    while let Some(id) = stack.pop() {
        if !seen.insert(id) {
            continue;
        }
        let node = tree.node(id);
        match node {
            Node::Simultaneous { movers, outcomes, .. } => {
                let mut fixed = BTreeMap::new();
                for (i, m) in movers.iter().enumerate() {
                    if members.contains(&m.player) {
                        let a = profile.get(id, &m.player).ok_or_else(|| Error::PartialProfile(id, m.player.0.clone()))?;
                        out.insert((id, m.player.clone()), a);
                        fixed.insert(i, a);
                    }
                }
                for (idx, o) in outcomes.iter().enumerate() {
                    let c = joint_choice(movers, idx);
                    if fixed.iter().all(|(&i, &a)| c[i] == a) {
                        stack.push(o.child);
                    }
                }
            }
            Node::Decision { .. } | Node::FeeChoice { .. } => {
                let (owner, _) = node.slots().remove(0);
                let kids = node.children();
                if members.contains(&owner) {
                    let a = profile.get(id, &owner).ok_or_else(|| Error::PartialProfile(id, owner.0.clone()))?;
                    out.insert((id, owner), a);
                    stack.push(action_child(node, a));
                } else {
                    stack.extend(kids);
                }
            }
            Node::Junction { child, .. } => stack.push(*child),
            Node::Leaf { .. } => {}
        }
    }
    Ok(out)
}

/// Strategy tables and the survivors of elimination.
#[derive(Clone, Debug)]
pub struct IewdsResult<S> {
    /// Coalition representatives, in table order.
    pub reps: Vec<PlayerId>,
    pub plans: Vec<Vec<Plan>>,
    /// Surviving plan indices per representative.
    pub survivors: Vec<Vec<usize>>,
    pub rounds: usize,
    payoffs: Vec<Vec<S>>,
}

impl<S: Scalar> IewdsResult<S> {
    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.plans).fold(0, |a, (&i, p)| a * p.len() + i)
    }

    /// Reduced utility of representative `r` (table position) at a joint
    /// plan index.
    pub fn payoff(&self, idx: &[usize], r: usize) -> &S {
        &self.payoffs[self.flat(idx)][r]
    }

    pub fn survives(&self, r: usize, plan: usize) -> bool {
        self.survivors[r].contains(&plan)
    }
}

/// Upper bound on the number of joint plans, saturating.
pub fn table_size<S: Scalar>(game: &CompletedGame<S>, bound: u64) -> Result<u128> {
    let mut size = 1u128;
    for r in game.reps() {
        size = size.saturating_mul(plan_count(game.tree(), &game.members(&r)));
        if size > bound as u128 {
            return Err(Error::EnumerationBoundExceeded(format!("{size}+ joint plans"), bound));
        }
    }
    Ok(size)
}

/// Simultaneous maximal elimination of weakly dominated plans until no
/// plan is dominated. Fails when the joint table exceeds `bound`.
pub fn iewds<S: Scalar>(game: &CompletedGame<S>, bound: u64) -> Result<IewdsResult<S>> {
    table_size(game, bound)?;
    let reps: Vec<PlayerId> = game.reps().into_iter().collect();
    let plans: Vec<Vec<Plan>> =
        reps.iter().map(|r| plans_for(game.tree(), &game.members(r), bound)).collect::<Result<_>>()?;
    let total: usize = plans.iter().map(Vec::len).product();
    let mut payoffs = Vec::with_capacity(total);
    for flat in 0..total {
        let idx = unflatten(flat, &plans);
        let mut profile = StrategyProfile::new();
        for (r, &i) in idx.iter().enumerate() {
            for ((n, p), a) in &plans[r][i] {
                profile.set(*n, p, *a);
            }
        }
        let u = game.reduced_utility(&profile)?;
        payoffs.push(reps.iter().map(|r| u.get(r)).collect());
    }
    let mut res = IewdsResult {
        survivors: plans.iter().map(|p| (0..p.len()).collect()).collect(),
        reps,
        plans,
        rounds: 0,
        payoffs,
    };
    loop {
        let mut removed = false;
        let mut next = res.survivors.clone();
        for r in 0..res.reps.len() {
            let alive = &res.survivors[r];
            if alive.len() < 2 {
                continue;
            }
            let others = other_profiles(&res.survivors, r);
            let dominated: BTreeSet<usize> = alive
                .iter()
                .copied()
                .filter(|&s| alive.iter().any(|&t| t != s && dominates(&res, r, t, s, &others)))
                .collect();
            if !dominated.is_empty() {
                removed = true;
                next[r].retain(|s| !dominated.contains(s));
            }
        }
        if !removed {
            break;
        }
        res.survivors = next;
        res.rounds += 1;
    }
    Ok(res)
}

fn unflatten<T>(mut flat: usize, plans: &[Vec<T>]) -> Vec<usize> {
    let mut idx = vec![0; plans.len()];
    for r in (0..plans.len()).rev() {
        idx[r] = flat % plans[r].len();
        flat /= plans[r].len();
    }
    idx
}

/// All joint index vectors over surviving plans with slot `r` left at 0.
fn other_profiles(survivors: &[Vec<usize>], r: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; survivors.len()]];
    for (k, alive) in survivors.iter().enumerate() {
        if k == r {
            continue;
        }
        out = out
            .into_iter()
            .flat_map(|v| {
                alive.iter().map(move |&a| {
                    let mut w = v.clone();
                    w[k] = a;
                    w
                })
            })
            .collect();
    }
    out
}

fn dominates<S: Scalar>(res: &IewdsResult<S>, r: usize, t: usize, s: usize, others: &[Vec<usize>]) -> bool {
    let mut strict = false;
    for o in others {
        let mut a = o.clone();
        a[r] = t;
        let mut b = o.clone();
        b[r] = s;
        let (ut, us) = (res.payoff(&a, r), res.payoff(&b, r));
        if us.definitely_gt(ut) {
            return false;
        }
        if ut.definitely_gt(us) {
            strict = true;
        }
    }
    strict
}
