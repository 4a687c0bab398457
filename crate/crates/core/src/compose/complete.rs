//! Cross-layer completion: application plays are resolved by the miner
//! game and settled into expected balances.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex};

use super::collusion::CollusionMap;
use crate::comg::resolve_triples_with_bounty;
use crate::error::Result;
use crate::extform::{Emission, GameTree, Node, NodeId, StrategyProfile};
use crate::scalar::Scalar;
use crate::types::{
    miner_player, settle_with_payers, Balances, ConflictSpec, HashrateDistribution, PlayerId, SettlementRules,
    TransactionTriple, TxId,
};

/// Canonical text of an emission set, independent of order.
pub fn emission_key<S: Scalar>(emissions: &[Emission<S>]) -> String {
    let mut parts: Vec<String> = emissions
        .iter()
        .map(|e| {
            let payer = e.payer.as_ref().map(|p| p.as_str()).unwrap_or("");
            format!("{}@{}:{}:{}", e.triple.tx, e.triple.post_time, e.triple.fee.to_repr(), payer)
        })
        .collect();
    parts.sort();
    parts.join(";")
}

pub(crate) fn hash_str(s: &str) -> u64 {
    let mut h = DefaultHasher::new();
    s.hash(&mut h);
    h.finish()
}

/// An application game joined with hashrates, settlement rules and
/// conflicts, plus a collusion map used for reduced utilities.
pub struct CompletedGame<S: Scalar> {
    tree: Arc<GameTree<S>>,
    lambda: HashrateDistribution<S>,
    rules: Arc<SettlementRules<S>>,
    conflicts: Arc<ConflictSpec>,
    eta: CollusionMap,
    participants: BTreeSet<PlayerId>,
    /// Per node: true when it is a junction child whose subtree settles
    /// independently of what was emitted above.
    separable: Vec<bool>,
    /// Raw balances per emission set, shared by every reduction.
    cache: Arc<Mutex<HashMap<String, Balances<S>>>>,
}

impl<S: Scalar> Clone for CompletedGame<S> {
    fn clone(&self) -> Self {
        CompletedGame {
            tree: self.tree.clone(),
            lambda: self.lambda.clone(),
            rules: self.rules.clone(),
            conflicts: self.conflicts.clone(),
            eta: self.eta.clone(),
            participants: self.participants.clone(),
            separable: self.separable.clone(),
            cache: self.cache.clone(),
        }
    }
}

/// Joins the layers; utilities are computed lazily per profile.
pub fn complete<S: Scalar>(
    tree: Arc<GameTree<S>>,
    lambda: HashrateDistribution<S>,
    rules: Arc<SettlementRules<S>>,
    conflicts: Arc<ConflictSpec>,
) -> Result<CompletedGame<S>> {
    conflicts.validate()?;
    let mut participants: BTreeSet<PlayerId> = tree.players().clone();
    participants.extend(rules.players());
    participants.extend((0..=lambda.m()).map(miner_player));
    let separable = separable_children(&tree, &rules, &conflicts);
    let eta = CollusionMap::identity(participants.iter());
    Ok(CompletedGame { tree, lambda, rules, conflicts, eta, participants, separable, cache: Arc::new(Mutex::new(HashMap::new())) })
}

/// Same game with coalitions acting through their representatives.
pub fn collusion_reduce<S: Scalar>(game: &CompletedGame<S>, eta: CollusionMap) -> Result<CompletedGame<S>> {
    eta.validate()?;
    if let Some(p) = eta.players().find(|p| !game.participants.contains(*p)) {
        return Err(crate::Error::UnknownPlayer(p.0.clone()));
    }
    let mut out = game.clone();
    // players left out of `eta` act alone
    let mut full: BTreeMap<PlayerId, PlayerId> =
        game.participants.iter().map(|p| (p.clone(), eta.rep_of(p).clone())).collect();
    for (k, v) in eta.players().map(|p| (p.clone(), eta.rep_of(p).clone())) {
        full.insert(k, v);
    }
    out.eta = CollusionMap::from_map(full)?;
    Ok(out)
}

fn separable_children<S: Scalar>(tree: &GameTree<S>, rules: &SettlementRules<S>, conflicts: &ConflictSpec) -> Vec<bool> {
    let n = tree.len();
    let mut out = vec![false; n];
    let junction_children: Vec<NodeId> = tree
        .nodes()
        .iter()
        .filter_map(|nd| match nd {
            Node::Junction { child, .. } => Some(*child),
            _ => None,
        })
        .collect();
    if junction_children.is_empty() {
        return out;
    }
    let below = subtree_alphabets(tree);
    let groups: Vec<&BTreeSet<TxId>> = rules
        .tables
        .iter()
        .map(|t| &t.alphabet)
        .chain(conflicts.conflict_sets.iter())
        .collect();
    for c in junction_children {
        let a = &below[c];
        out[c] = groups.iter().all(|g| g.is_subset(a) || g.is_disjoint(a));
    }
    out
}

/// Transaction ids emittable strictly below each node.
pub(crate) fn subtree_alphabets<S: Scalar>(tree: &GameTree<S>) -> Vec<BTreeSet<TxId>> {
    let n = tree.len();
    let mut below: Vec<Option<BTreeSet<TxId>>> = vec![None; n];
    // iterative post-order
    let mut stack = vec![(tree.root(), false)];
    while let Some((id, expanded)) = stack.pop() {
        if below[id].is_some() {
            continue;
        }
        let node = tree.node(id);
        if !expanded {
            stack.push((id, true));
            for c in node.children() {
                if below[c].is_none() {
                    stack.push((c, false));
                }
            }
            continue;
        }
        let mut set = BTreeSet::new();
        match node {
            Node::Leaf { emit } => set.extend(emit.iter().map(|e| e.tx().clone())),
            Node::Junction { emit, child } => {
                set.extend(emit.iter().map(|e| e.tx().clone()));
                set.extend(below[*child].iter().flatten().cloned());
            }
            Node::Decision { actions, .. } => {
                for a in actions {
                    set.extend(a.emit.iter().map(|e| e.tx().clone()));
                    set.extend(below[a.child].iter().flatten().cloned());
                }
            }
            Node::FeeChoice { tx, child, .. } => {
                set.insert(tx.clone());
                set.extend(below[*child].iter().flatten().cloned());
            }
            Node::Simultaneous { outcomes, .. } => {
                for o in outcomes {
                    set.extend(o.emit.iter().map(|e| e.tx().clone()));
                    set.extend(below[o.child].iter().flatten().cloned());
                }
            }
        }
        below[id] = Some(set);
    }
    below.into_iter().map(|s| s.unwrap_or_default()).collect()
}

impl<S: Scalar> CompletedGame<S> {
    pub fn tree(&self) -> &Arc<GameTree<S>> {
        &self.tree
    }
    pub fn lambda(&self) -> &HashrateDistribution<S> {
        &self.lambda
    }
    pub fn rules(&self) -> &Arc<SettlementRules<S>> {
        &self.rules
    }
    pub fn conflicts(&self) -> &Arc<ConflictSpec> {
        &self.conflicts
    }
    pub fn eta(&self) -> &CollusionMap {
        &self.eta
    }
    /// Application players, players named by the rules, and miners.
    pub fn participants(&self) -> &BTreeSet<PlayerId> {
        &self.participants
    }
    pub fn miners(&self) -> BTreeSet<PlayerId> {
        (0..=self.lambda.m()).map(miner_player).collect()
    }
    pub(crate) fn is_separable(&self, child: NodeId) -> bool {
        self.separable[child]
    }

    /// Expected balances of every participant for an emission set.
    pub fn evaluate(&self, emissions: &[Emission<S>]) -> Result<Balances<S>> {
        let key = emission_key(emissions);
        if let Some(b) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(b.clone());
        }
        let triples: Vec<TransactionTriple<S>> = emissions.iter().map(|e| e.triple.clone()).collect();
        let payers: BTreeMap<TxId, PlayerId> =
            emissions.iter().filter_map(|e| e.payer.clone().map(|p| (e.triple.tx.clone(), p))).collect();
        let dist = resolve_triples_with_bounty(&triples, &self.conflicts, &self.lambda, &self.rules.bounty)?;
        let mut out = Balances::new();
        for (ordering, p) in &dist.support {
            let b = settle_with_payers(ordering, &triples, &self.conflicts, &self.rules, &payers)?;
            out.add_all(&b.scaled(p));
        }
        self.cache.lock().expect("cache lock").insert(key, out.clone());
        Ok(out)
    }

    /// Expected balances when every player follows `profile`.
    pub fn utility(&self, profile: &StrategyProfile) -> Result<Balances<S>> {
        let play = self.tree.play(profile)?;
        self.evaluate(&play.emissions)
    }

    /// Sums balances per coalition representative.
    pub fn reduce(&self, b: &Balances<S>) -> Balances<S> {
        let mut out = Balances::new();
        for p in &self.participants {
            out.add(self.eta.rep_of(p), b.get(p));
        }
        out
    }

    pub fn reduced_utility(&self, profile: &StrategyProfile) -> Result<Balances<S>> {
        Ok(self.reduce(&self.utility(profile)?))
    }

    /// Application players whose nodes the representative `r` controls.
    pub fn members(&self, r: &PlayerId) -> BTreeSet<PlayerId> {
        self.participants.iter().filter(|p| self.eta.rep_of(p) == r).cloned().collect()
    }

    pub fn reps(&self) -> BTreeSet<PlayerId> {
        self.participants.iter().map(|p| self.eta.rep_of(p).clone()).collect()
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}
