//! Parametrised games, g-composition and additive settlement.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::extform::{Emission, GameTree, Node, NodeId, Play, Step, StrategyProfile};
use crate::scalar::Scalar;
use crate::types::{PlayerId, SettlementRules, TxId};

/// One parameter's game and intended profile.
#[derive(Clone, Debug)]
pub struct Instance<S> {
    pub tree: Arc<GameTree<S>>,
    pub ipb: StrategyProfile,
}

/// A family of games indexed by a parameter, each with its intended
/// behaviour.
#[derive(Clone, Debug)]
pub struct Protocol<S, P: Ord> {
    instances: BTreeMap<P, Instance<S>>,
}

/// Parametrised application game.
pub type ParamGame<S, P> = Protocol<S, P>;

impl<S: Scalar, P: Ord + Clone> Default for Protocol<S, P> {
    fn default() -> Self {
        Protocol { instances: BTreeMap::new() }
    }
}

impl<S: Scalar, P: Ord + Clone> Protocol<S, P> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, p: P, tree: GameTree<S>, ipb: StrategyProfile) {
        self.instances.insert(p, Instance { tree: Arc::new(tree), ipb });
    }

    pub fn instances(&self) -> impl Iterator<Item = (&P, &Instance<S>)> {
        self.instances.iter()
    }

    pub fn get(&self, p: &P) -> Option<&Instance<S>> {
        self.instances.get(p)
    }

    pub fn params(&self) -> Vec<P> {
        self.instances.keys().cloned().collect()
    }

    pub fn players(&self) -> BTreeSet<PlayerId> {
        self.instances.values().flat_map(|i| i.tree.players().iter().cloned()).collect()
    }

    pub fn alphabet(&self) -> BTreeSet<TxId> {
        self.instances.values().flat_map(|i| i.tree.alphabet()).collect()
    }
}

impl<S: Scalar> Protocol<S, ()> {
    /// A protocol with a single, unparametrised game.
    pub fn single(tree: GameTree<S>, ipb: StrategyProfile) -> Self {
        let mut p = Self::new();
        p.insert((), tree, ipb);
        p
    }
}

/// Observable of a play of the first game, used to pick the second game's
/// parameter.
pub type TraceFn<S, P, Q> = Arc<dyn Fn(&P, &Play<S>) -> Q + Send + Sync>;

/// How the second game's parameter is chosen from the first game's play.
#[derive(Clone)]
pub enum CompositionMap<S, P, Q> {
    /// The same parameter whatever happens in the first game.
    Constant(BTreeMap<P, Q>),
    /// A named statistic of the play path.
    Trace { name: String, f: TraceFn<S, P, Q> },
}

impl<S, P: Ord + Clone, Q: Clone> CompositionMap<S, P, Q> {
    /// Constant map sending every listed parameter to `q`.
    pub fn constant_for(params: impl IntoIterator<Item = P>, q: Q) -> Self {
        CompositionMap::Constant(params.into_iter().map(|p| (p, q.clone())).collect())
    }

    pub fn trace(name: &str, f: impl Fn(&P, &Play<S>) -> Q + Send + Sync + 'static) -> Self {
        CompositionMap::Trace { name: name.to_string(), f: Arc::new(f) }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, CompositionMap::Constant(_))
    }

    pub fn name(&self) -> String {
        match self {
            CompositionMap::Constant(_) => "constant".into(),
            CompositionMap::Trace { name, .. } => name.clone(),
        }
    }
}

/// Every root-to-leaf play of a tree with its leaf.
fn leaf_plays<S: Scalar>(tree: &GameTree<S>) -> Result<Vec<Play<S>>> {
    let deg = tree.in_degrees();
    if let Some(n) = (0..tree.len()).find(|&n| deg[n] > 1) {
        return Err(Error::NonTreeTrace(n));
    }
    let mut out = Vec::new();
    let mut steps: Vec<Step> = Vec::new();
    let mut emits: Vec<Emission<S>> = Vec::new();
    walk(tree, tree.root(), &mut steps, &mut emits, &mut out);
    Ok(out)
}

fn walk<S: Scalar>(
    tree: &GameTree<S>,
    id: NodeId,
    steps: &mut Vec<Step>,
    emits: &mut Vec<Emission<S>>,
    out: &mut Vec<Play<S>>,
) {
    let node = tree.node(id);
    match node {
        Node::Leaf { emit } => {
            let mut e = emits.clone();
            e.extend(emit.iter().cloned());
            out.push(Play { steps: steps.clone(), emissions: e, leaf: id });
        }
        Node::Junction { emit, child } => {
            let n = emits.len();
            emits.extend(emit.iter().cloned());
            walk(tree, *child, steps, emits, out);
            emits.truncate(n);
        }
        _ => {
            let arity: Vec<usize> = node.slots().iter().map(|(_, k)| *k).collect();
            let total: usize = arity.iter().product();
            for flat in 0..total {
                let mut choice = vec![0; arity.len()];
                let mut f = flat;
                for k in (0..arity.len()).rev() {
                    choice[k] = f % arity[k];
                    f /= arity[k];
                }
                let (step, emit, child) = tree.apply(id, node, &choice);
                let (ns, ne) = (steps.len(), emits.len());
                steps.push(step);
                emits.extend(emit);
                walk(tree, child, steps, emits, out);
                steps.truncate(ns);
                emits.truncate(ne);
            }
        }
    }
}

/// Plays the first game, then at each of its leaves the second game for
/// the parameter `g` assigns to that play. Second-game copies are shared
/// between leaves with the same parameter.
pub fn g_compose<S, P, Q>(
    game1: &Protocol<S, P>,
    game2: &Protocol<S, Q>,
    g: &CompositionMap<S, P, Q>,
) -> Result<Protocol<S, P>>
where
    S: Scalar,
    P: Ord + Clone + Debug,
    Q: Ord + Clone + Debug,
{
    let a1 = game1.alphabet();
    let a2 = game2.alphabet();
    if let Some(x) = a1.intersection(&a2).next() {
        return Err(Error::AlphabetOverlap(x.0.clone()));
    }
    let mut out = Protocol::new();
    for (p, inst) in game1.instances() {
        let tree1 = &inst.tree;
        let leaves: Vec<(NodeId, Q)> = match g {
            CompositionMap::Constant(map) => {
                let q = map.get(p).ok_or_else(|| Error::ParameterOutOfRange(format!("{p:?}")))?.clone();
                (0..tree1.len()).filter(|&n| matches!(tree1.node(n), Node::Leaf { .. })).map(|n| (n, q.clone())).collect()
            }
            CompositionMap::Trace { f, .. } => {
                // plays differing only in fee choices share a leaf
                let mut at: BTreeMap<NodeId, Q> = BTreeMap::new();
                for pl in leaf_plays(tree1)? {
                    let q = f(p, &pl);
                    match at.get(&pl.leaf) {
                        Some(prev) if *prev != q => return Err(Error::NonTreeTrace(pl.leaf)),
                        Some(_) => {}
                        None => {
                            at.insert(pl.leaf, q);
                        }
                    }
                }
                at.into_iter().collect()
            }
        };
        let mut tree = (**tree1).clone();
        let mut ipb = inst.ipb.clone();
        let mut roots: BTreeMap<Q, NodeId> = BTreeMap::new();
        let wanted: BTreeSet<Q> = leaves.iter().map(|(_, q)| q.clone()).collect();
        for q in wanted {
            let i2 = game2.get(&q).ok_or_else(|| Error::ParameterOutOfRange(format!("{q:?}")))?;
            let offset = tree.append_nodes(&i2.tree);
            ipb.merge(&i2.ipb.shifted(offset));
            roots.insert(q, offset + i2.tree.root());
        }
        for (leaf, q) in leaves {
            let emit = match tree.node(leaf) {
                Node::Leaf { emit } => emit.clone(),
                _ => unreachable!("leaf ids come from the first tree"),
            };
            tree.replace_node(leaf, Node::Junction { emit, child: roots[&q] });
        }
        tree.validate()?;
        out.insert(p.clone(), tree, ipb);
    }
    Ok(out)
}

/// Settlement for the union of two disjoint applications: base tables
/// are looked up separately and summed.
pub fn additive_union<S: Scalar>(r1: &SettlementRules<S>, r2: &SettlementRules<S>) -> Result<SettlementRules<S>> {
    let (a1, a2) = (r1.alphabet(), r2.alphabet());
    if let Some(x) = a1.intersection(&a2).next() {
        return Err(Error::AlphabetOverlap(x.0.clone()));
    }
    let mut out = r1.clone();
    out.tables.extend(r2.tables.iter().cloned());
    out.payer.extend(r2.payer.iter().map(|(k, v)| (k.clone(), v.clone())));
    out.bounty.extend(r2.bounty.iter().map(|(k, v)| (k.clone(), v.clone())));
    Ok(out)
}
