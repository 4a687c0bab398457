//! Depth-first searches over completed games: a coalition's best
//! unilateral deviation, and backward-induction play.

use std::collections::{BTreeSet, HashMap};

use super::complete::{emission_key, hash_str, CompletedGame};
use crate::error::Result;
use crate::extform::{joint_choice, joint_index, Emission, Node, NodeId, Step, StrategyProfile};
use crate::scalar::Scalar;
use crate::types::{Balances, PlayerId};

/// Best play found for a coalition.
#[derive(Clone, Debug)]
pub(crate) struct Best<S> {
    pub value: S,
    /// Emissions from the search start (or junction seam) to the leaf.
    pub emits: Vec<Emission<S>>,
    /// Another maximiser with a different emission set exists.
    pub tied: bool,
    /// Choices at coalition-controlled slots along the best play.
    pub choices: Vec<(NodeId, PlayerId, usize)>,
    /// Some choice differs from the base profile.
    pub deviates: bool,
}

pub(crate) fn outcome_hash<S: Scalar>(emits: &[Emission<S>]) -> u64 {
    hash_str(&emission_key(emits))
}

/// Candidate choice vectors at a node: free slots range over all actions,
/// fixed slots follow `base`.
fn candidates<S: Scalar>(
    game: &CompletedGame<S>,
    id: NodeId,
    base: &StrategyProfile,
    free: &dyn Fn(&PlayerId) -> bool,
) -> Result<Vec<Vec<usize>>> {
    let node = game.tree().node(id);
    let fixed = game.tree().choice_at(id, base);
    let slots = node.slots();
    let mut out: Vec<Vec<usize>> = vec![vec![]];
    for (k, (p, n)) in slots.iter().enumerate() {
        let range: Vec<usize> = if free(p) {
            (0..*n).collect()
        } else {
            match &fixed {
                Ok(c) => vec![c[k]],
                Err(e) => return Err(e.clone()),
            }
        };
        out = out
            .into_iter()
            .flat_map(|pre| {
                range.iter().map(move |&a| {
                    let mut v = pre.clone();
                    v.push(a);
                    v
                })
            })
            .collect();
    }
    Ok(out)
}

pub(crate) struct Deviator<'a, S: Scalar> {
    game: &'a CompletedGame<S>,
    base: &'a StrategyProfile,
    members: BTreeSet<PlayerId>,
    memo: HashMap<NodeId, Best<S>>,
}

impl<'a, S: Scalar> Deviator<'a, S> {
    /// Searches deviations of the coalition `members` from `base`.
    pub fn new(game: &'a CompletedGame<S>, base: &'a StrategyProfile, members: BTreeSet<PlayerId>) -> Self {
        Deviator { game, base, members, memo: HashMap::new() }
    }

    fn score(&self, emits: &[Emission<S>]) -> Result<S> {
        Ok(self.game.evaluate(emits)?.sum_over(self.members.iter()))
    }

    pub fn best(&mut self) -> Result<Best<S>> {
        let mut acc = Vec::new();
        self.dfs(self.game.tree().root(), &mut acc, 0)
    }

    fn dfs(&mut self, id: NodeId, acc: &mut Vec<Emission<S>>, base: usize) -> Result<Best<S>> {
        let tree = self.game.tree().clone();
        match tree.node(id) {
            Node::Leaf { emit } => {
                let n = acc.len();
                acc.extend(emit.iter().cloned());
                let value = self.score(acc);
                let emits = acc[base..].to_vec();
                acc.truncate(n);
                Ok(Best { value: value?, emits, tied: false, choices: vec![], deviates: false })
            }
            Node::Junction { emit, child } => {
                let n = acc.len();
                acc.extend(emit.iter().cloned());
                let out = if self.game.is_separable(*child) {
                    let sub = match self.memo.get(child) {
                        Some(b) => b.clone(),
                        None => {
                            let b = self.dfs(*child, acc, acc.len())?;
                            self.memo.insert(*child, b.clone());
                            b
                        }
                    };
                    let mut full = acc.clone();
                    full.extend(sub.emits.iter().cloned());
                    let value = self.score(&full)?;
                    Best { value, emits: full[base..].to_vec(), tied: sub.tied, choices: sub.choices, deviates: sub.deviates }
                } else {
                    self.dfs(*child, acc, base)?
                };
                acc.truncate(n);
                Ok(out)
            }
            node => {
                let members = &self.members;
                let free = |p: &PlayerId| members.contains(p);
                let slots = node.slots();
                let fixed = tree.choice_at(id, self.base).ok();
                let mut best: Option<Best<S>> = None;
                for choice in candidates(self.game, id, self.base, &free)? {
                    let (_, emit, child) = tree.apply(id, node, &choice);
                    let n = acc.len();
                    acc.extend(emit);
                    let r = self.dfs(child, acc, base);
                    acc.truncate(n);
                    let mut cand = r?;
                    for (k, (p, _)) in slots.iter().enumerate() {
                        if self.members.contains(p) {
                            cand.choices.push((id, p.clone(), choice[k]));
                            if fixed.as_ref().map_or(true, |f| f[k] != choice[k]) {
                                cand.deviates = true;
                            }
                        }
                    }
                    best = Some(match best {
                        None => cand,
                        Some(b) => pick_better(b, cand),
                    });
                }
                Ok(best.expect("every node has an action"))
            }
        }
    }
}

fn pick_better<S: Scalar>(mut b: Best<S>, cand: Best<S>) -> Best<S> {
    if cand.value.definitely_gt(&b.value) {
        cand
    } else if b.value.definitely_gt(&cand.value) {
        b
    } else {
        let differ = outcome_hash(&cand.emits) != outcome_hash(&b.emits);
        if differ && cand.deviates && !b.deviates {
            // keep a deviating maximiser so indifference witnesses show it
            return Best { tied: true, ..cand };
        }
        if cand.tied || differ {
            b.tied = true;
        }
        b
    }
}

/// A play produced by backward induction.
#[derive(Clone, Debug)]
pub struct RationalTrace<S> {
    pub steps: Vec<Step>,
    pub emissions: Vec<Emission<S>>,
    /// Expected balances per coalition representative.
    pub utilities: Balances<S>,
    pub profile: StrategyProfile,
}

#[derive(Clone)]
struct Sub<S> {
    emits: Vec<Emission<S>>,
    steps: Vec<Step>,
    choices: Vec<(NodeId, PlayerId, usize)>,
    value: Balances<S>,
}

/// Backward induction with ties broken toward `ipb`. Simultaneous stages
/// take a pure equilibrium of the stage game, preferring the intended one.
pub fn rational_play<S: Scalar>(game: &CompletedGame<S>, ipb: &StrategyProfile) -> Result<RationalTrace<S>> {
    let mut bi = Inductor { game, ipb, memo: HashMap::new() };
    let mut acc = Vec::new();
    let s = bi.dfs(game.tree().root(), &mut acc, 0)?;
    let mut profile = ipb.clone();
    for (n, p, a) in &s.choices {
        profile.set(*n, p, *a);
    }
    Ok(RationalTrace { steps: s.steps, emissions: s.emits, utilities: s.value, profile })
}

struct Inductor<'a, S: Scalar> {
    game: &'a CompletedGame<S>,
    ipb: &'a StrategyProfile,
    memo: HashMap<NodeId, Sub<S>>,
}

impl<'a, S: Scalar> Inductor<'a, S> {
    fn value(&self, emits: &[Emission<S>]) -> Result<Balances<S>> {
        Ok(self.game.reduce(&self.game.evaluate(emits)?))
    }

    fn dfs(&mut self, id: NodeId, acc: &mut Vec<Emission<S>>, base: usize) -> Result<Sub<S>> {
        let tree = self.game.tree().clone();
        match tree.node(id) {
            Node::Leaf { emit } => {
                let n = acc.len();
                acc.extend(emit.iter().cloned());
                let value = self.value(acc);
                let emits = acc[base..].to_vec();
                acc.truncate(n);
                Ok(Sub { emits, steps: vec![], choices: vec![], value: value? })
            }
            Node::Junction { emit, child } => {
                let n = acc.len();
                acc.extend(emit.iter().cloned());
                let out = if self.game.is_separable(*child) {
                    let sub = match self.memo.get(child) {
                        Some(s) => s.clone(),
                        None => {
                            let s = self.dfs(*child, acc, acc.len())?;
                            self.memo.insert(*child, s.clone());
                            s
                        }
                    };
                    let mut full = acc.clone();
                    full.extend(sub.emits.iter().cloned());
                    let value = self.value(&full)?;
                    Sub { emits: full[base..].to_vec(), steps: sub.steps, choices: sub.choices, value }
                } else {
                    self.dfs(*child, acc, base)?
                };
                acc.truncate(n);
                Ok(out)
            }
            node => {
                let intended = tree.choice_at(id, self.ipb)?;
                let slots = node.slots();
                let all = |_: &PlayerId| true;
                let cands = candidates(self.game, id, self.ipb, &all)?;
                let mut subs: Vec<Sub<S>> = Vec::with_capacity(cands.len());
                for choice in &cands {
                    let (step, emit, child) = tree.apply(id, node, choice);
                    let n = acc.len();
                    acc.extend(emit);
                    let r = self.dfs(child, acc, base);
                    acc.truncate(n);
                    let mut s = r?;
                    s.steps.insert(0, step);
                    for (k, (p, _)) in slots.iter().enumerate() {
                        s.choices.push((id, p.clone(), choice[k]));
                    }
                    subs.push(s);
                }
                let pick = if let Node::Simultaneous { movers, .. } = node {
                    let reps: Vec<PlayerId> = movers.iter().map(|m| self.game.eta().rep_of(&m.player).clone()).collect();
                    let is_ne = |idx: usize| {
                        let c = joint_choice(movers, idx);
                        (0..movers.len()).all(|i| {
                            (0..movers[i].actions.len()).all(|a| {
                                let mut d = c.clone();
                                d[i] = a;
                                !subs[joint_index(movers, &d)].value.get(&reps[i]).definitely_gt(&subs[idx].value.get(&reps[i]))
                            })
                        })
                    };
                    let ipb_idx = joint_index(movers, &intended);
                    if is_ne(ipb_idx) {
                        ipb_idx
                    } else {
                        (0..subs.len()).find(|&i| is_ne(i)).unwrap_or(ipb_idx)
                    }
                } else {
                    let owner = self.game.eta().rep_of(&slots[0].0).clone();
                    let mut best = intended[0];
                    for (i, s) in subs.iter().enumerate() {
                        if s.value.get(&owner).definitely_gt(&subs[best].value.get(&owner)) {
                            best = i;
                        }
                    }
                    best
                };
                Ok(subs.swap_remove(pick))
            }
        }
    }
}
