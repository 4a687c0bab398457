//! Arena representation of finite extensive-form application games.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{PlayerId, Round, TransactionTriple, TxId};

pub type NodeId = usize;

/// A triple produced by the game together with the player paying its fee.
/// Zero-fee sentinels may have no payer.
#[derive(Clone, Debug, PartialEq)]
pub struct Emission<S> {
    pub triple: TransactionTriple<S>,
    pub payer: Option<PlayerId>,
}

impl<S: Scalar> Emission<S> {
    pub fn paid(tx: &str, post_time: Round, fee: S, payer: &str) -> Self {
        Emission { triple: TransactionTriple::new(tx, post_time, fee), payer: Some(PlayerId::from(payer)) }
    }

    /// Zero-fee transaction that only confirms when nothing conflicts.
    pub fn sentinel(tx: &str, post_time: Round) -> Self {
        Emission { triple: TransactionTriple::new(tx, post_time, S::zero()), payer: None }
    }

    pub fn tx(&self) -> &TxId {
        &self.triple.tx
    }

    pub fn with_payer(mut self, payer: &str) -> Self {
        self.payer = Some(PlayerId::from(payer));
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Action<S> {
    pub label: String,
    pub emit: Vec<Emission<S>>,
    pub child: NodeId,
}

impl<S> Action<S> {
    pub fn new(label: &str, emit: Vec<Emission<S>>, child: NodeId) -> Self {
        Action { label: label.to_string(), emit, child }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mover {
    pub player: PlayerId,
    pub actions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointOutcome<S> {
    pub emit: Vec<Emission<S>>,
    pub child: NodeId,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node<S> {
    Decision { owner: PlayerId, round: Option<Round>, actions: Vec<Action<S>> },
    /// The owner picks a fee from `grid` and posts `tx` at `post_time`.
    FeeChoice { owner: PlayerId, round: Option<Round>, tx: TxId, post_time: Round, grid: Vec<S>, child: NodeId },
    /// One-shot simultaneous move; `outcomes` is indexed row-major over
    /// `movers` in order.
    Simultaneous { round: Option<Round>, movers: Vec<Mover>, outcomes: Vec<JointOutcome<S>> },
    Leaf { emit: Vec<Emission<S>> },
    /// Seam between two composed games. Everything below is independent of
    /// the emissions above.
    Junction { emit: Vec<Emission<S>>, child: NodeId },
}

impl<S> Node<S> {
    pub fn children(&self) -> Vec<NodeId> {
        match self {
            Node::Decision { actions, .. } => actions.iter().map(|a| a.child).collect(),
            Node::FeeChoice { child, .. } | Node::Junction { child, .. } => vec![*child],
            Node::Simultaneous { outcomes, .. } => outcomes.iter().map(|o| o.child).collect(),
            Node::Leaf { .. } => vec![],
        }
    }

    pub fn round(&self) -> Option<Round> {
        match self {
            Node::Decision { round, .. } | Node::FeeChoice { round, .. } | Node::Simultaneous { round, .. } => *round,
            _ => None,
        }
    }

    /// Strategy slots of this node: `(player, number of actions)`.
    pub fn slots(&self) -> Vec<(PlayerId, usize)> {
        match self {
            Node::Decision { owner, actions, .. } => vec![(owner.clone(), actions.len())],
            Node::FeeChoice { owner, grid, .. } => vec![(owner.clone(), grid.len())],
            Node::Simultaneous { movers, .. } => movers.iter().map(|m| (m.player.clone(), m.actions.len())).collect(),
            _ => vec![],
        }
    }

    fn shifted(&self, offset: usize) -> Node<S>
    where
        S: Clone,
    {
        let mut n = self.clone();
        match &mut n {
            Node::Decision { actions, .. } => actions.iter_mut().for_each(|a| a.child += offset),
            Node::FeeChoice { child, .. } | Node::Junction { child, .. } => *child += offset,
            Node::Simultaneous { outcomes, .. } => outcomes.iter_mut().for_each(|o| o.child += offset),
            Node::Leaf { .. } => {}
        }
        n
    }
}

/// A validated finite game with a single root.
#[derive(Clone, Debug, PartialEq)]
pub struct GameTree<S> {
    players: BTreeSet<PlayerId>,
    nodes: Vec<Node<S>>,
    root: NodeId,
}

/// Chosen action index per `(node, player)` slot.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StrategyProfile {
    pub choices: BTreeMap<(NodeId, PlayerId), usize>,
}

impl StrategyProfile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, node: NodeId, player: &PlayerId) -> Option<usize> {
        self.choices.get(&(node, player.clone())).copied()
    }

    pub fn set(&mut self, node: NodeId, player: &PlayerId, action: usize) {
        self.choices.insert((node, player.clone()), action);
    }

    /// Copy with some slots overwritten.
    pub fn with(&self, changes: &[(NodeId, PlayerId, usize)]) -> Self {
        let mut out = self.clone();
        for (n, p, a) in changes {
            out.set(*n, p, *a);
        }
        out
    }

    /// Copy with every slot id moved by `offset`.
    pub fn shifted(&self, offset: usize) -> Self {
        StrategyProfile { choices: self.choices.iter().map(|((n, p), a)| ((n + offset, p.clone()), *a)).collect() }
    }

    pub fn merge(&mut self, other: &StrategyProfile) {
        self.choices.extend(other.choices.iter().map(|(k, v)| (k.clone(), *v)));
    }
}

/// One move along a play.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub node: NodeId,
    pub round: Option<Round>,
    /// Player acting; `None` for simultaneous stages.
    pub actor: Option<PlayerId>,
    pub label: String,
}

/// A complete play: moves and accumulated emissions.
#[derive(Clone, Debug, PartialEq)]
pub struct Play<S> {
    pub steps: Vec<Step>,
    pub emissions: Vec<Emission<S>>,
    pub leaf: NodeId,
}

impl<S: Scalar> GameTree<S> {
    pub fn players(&self) -> &BTreeSet<PlayerId> {
        &self.players
    }
    pub fn nodes(&self) -> &[Node<S>] {
        &self.nodes
    }
    pub fn node(&self, id: NodeId) -> &Node<S> {
        &self.nodes[id]
    }
    pub fn root(&self) -> NodeId {
        self.root
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// All strategy slots reachable from the root, in node order.
    pub fn slots(&self) -> Vec<(NodeId, PlayerId, usize)> {
        let reach = self.reachable();
        let mut out = Vec::new();
        for (id, n) in self.nodes.iter().enumerate() {
            if reach[id] {
                out.extend(n.slots().into_iter().map(|(p, k)| (id, p, k)));
            }
        }
        out
    }

    fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            if !seen[n] {
                seen[n] = true;
                stack.extend(self.nodes[n].children());
            }
        }
        seen
    }

    /// Every transaction id any play can emit.
    pub fn alphabet(&self) -> BTreeSet<TxId> {
        let mut out = BTreeSet::new();
        for n in &self.nodes {
            match n {
                Node::Decision { actions, .. } => {
                    out.extend(actions.iter().flat_map(|a| a.emit.iter().map(|e| e.tx().clone())))
                }
                Node::FeeChoice { tx, .. } => {
                    out.insert(tx.clone());
                }
                Node::Simultaneous { outcomes, .. } => {
                    out.extend(outcomes.iter().flat_map(|o| o.emit.iter().map(|e| e.tx().clone())))
                }
                Node::Leaf { emit } | Node::Junction { emit, .. } => out.extend(emit.iter().map(|e| e.tx().clone())),
            }
        }
        out
    }

    /// Number of parents per node, used to detect shared subtrees.
    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for n in &self.nodes {
            for c in n.children() {
                deg[c] += 1;
            }
        }
        deg
    }

    /// Follows `profile` from the root.
    pub fn play(&self, profile: &StrategyProfile) -> Result<Play<S>> {
        self.play_from(self.root, profile)
    }

    pub fn play_from(&self, start: NodeId, profile: &StrategyProfile) -> Result<Play<S>> {
        let mut steps = Vec::new();
        let mut emissions = Vec::new();
        let mut at = start;
        loop {
            match &self.nodes[at] {
                Node::Leaf { emit } => {
                    emissions.extend(emit.iter().cloned());
                    return Ok(Play { steps, emissions, leaf: at });
                }
                Node::Junction { emit, child } => {
                    emissions.extend(emit.iter().cloned());
                    at = *child;
                }
                n => {
                    let choice = self.choice_at(at, profile)?;
                    let (step, emit, child) = self.apply(at, n, &choice);
                    steps.push(step);
                    emissions.extend(emit);
                    at = child;
                }
            }
        }
    }

    /// The choice vector (one entry per slot) a profile makes at a node.
    pub fn choice_at(&self, at: NodeId, profile: &StrategyProfile) -> Result<Vec<usize>> {
        self.nodes[at]
            .slots()
            .into_iter()
            .map(|(p, k)| {
                let a = profile.get(at, &p).ok_or_else(|| Error::PartialProfile(at, p.0.clone()))?;
                if a >= k {
                    return Err(Error::InvalidChoice(at, p.0.clone(), a));
                }
                Ok(a)
            })
            .collect()
    }

    /// Executes one move: the step record, edge emissions and the child.
    pub fn apply(&self, at: NodeId, n: &Node<S>, choice: &[usize]) -> (Step, Vec<Emission<S>>, NodeId) {
        match n {
            Node::Decision { owner, round, actions } => {
                let a = &actions[choice[0]];
                (
                    Step { node: at, round: *round, actor: Some(owner.clone()), label: a.label.clone() },
                    a.emit.clone(),
                    a.child,
                )
            }
            Node::FeeChoice { owner, round, tx, post_time, grid, child } => {
                let fee = grid[choice[0]].clone();
                let label = format!("{tx}@{post_time} fee {}", fee.to_repr());
                let e = Emission {
                    triple: TransactionTriple { tx: tx.clone(), post_time: *post_time, fee },
                    payer: Some(owner.clone()),
                };
                (Step { node: at, round: *round, actor: Some(owner.clone()), label }, vec![e], *child)
            }
            Node::Simultaneous { round, movers, outcomes } => {
                let idx = joint_index(movers, choice);
                let label = movers
                    .iter()
                    .zip(choice)
                    .map(|(m, &c)| format!("{}:{}", m.player, m.actions[c]))
                    .collect::<Vec<_>>()
                    .join(" ");
                let o = &outcomes[idx];
                (Step { node: at, round: *round, actor: None, label }, o.emit.clone(), o.child)
            }
            Node::Leaf { .. } | Node::Junction { .. } => unreachable!("terminal nodes have no moves"),
        }
    }

    /// Appends `other`'s nodes, returning the offset applied to its ids.
    pub(crate) fn append_nodes(&mut self, other: &GameTree<S>) -> usize {
        let offset = self.nodes.len();
        self.nodes.extend(other.nodes.iter().map(|n| n.shifted(offset)));
        self.players.extend(other.players.iter().cloned());
        offset
    }

    pub(crate) fn replace_node(&mut self, id: NodeId, node: Node<S>) {
        self.nodes[id] = node;
    }

    /// Builds and validates a tree from raw parts.
    pub fn from_parts(players: BTreeSet<PlayerId>, nodes: Vec<Node<S>>, root: NodeId) -> Result<Self> {
        let t = GameTree { players, nodes, root };
        t.validate()?;
        Ok(t)
    }

    /// Structural checks: references, owners, grids, acyclicity, payers,
    /// and no tx id emitted twice on one path.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if self.root >= n {
            return Err(Error::DanglingChild(self.root, self.root));
        }
        for (id, node) in self.nodes.iter().enumerate() {
            for c in node.children() {
                if c >= n {
                    return Err(Error::DanglingChild(id, c));
                }
            }
            for (p, k) in node.slots() {
                if !self.players.contains(&p) {
                    return Err(Error::UnknownOwner(p.0));
                }
                if k == 0 {
                    return Err(Error::FeeGridEmpty(id));
                }
            }
            match node {
                Node::FeeChoice { grid, tx, .. } => {
                    if grid.iter().any(|f| f.is_negative()) {
                        return Err(Error::NegativeFee(tx.0.clone()));
                    }
                }
                Node::Simultaneous { movers, outcomes, .. } => {
                    let want: usize = movers.iter().map(|m| m.actions.len()).product();
                    if outcomes.len() != want {
                        return Err(Error::MalformedDocument(format!(
                            "simultaneous node {id} has {} outcomes, expected {want}",
                            outcomes.len()
                        )));
                    }
                }
                _ => {}
            }
            for e in edge_emissions(node).into_iter().flatten() {
                if e.triple.fee.is_negative() {
                    return Err(Error::NegativeFee(e.tx().0.clone()));
                }
                if e.triple.fee.is_positive() && e.payer.is_none() {
                    return Err(Error::MissingPayer(e.tx().0.clone()));
                }
            }
        }
        let order = self.topological_order()?;
        // ids that some path below a node can emit
        let mut below: Vec<Option<BTreeSet<TxId>>> = vec![None; n];
        for &id in order.iter().rev() {
            let node = &self.nodes[id];
            let mut mine = BTreeSet::new();
            let kids = node.children();
            let edges = edge_emissions(node);
            for (k, emit) in edges.iter().enumerate() {
                let mut seen = BTreeSet::new();
                for e in emit {
                    if !seen.insert(e.tx().clone()) {
                        return Err(Error::DuplicateTxId(e.tx().0.clone()));
                    }
                }
                if let Some(&c) = kids.get(k) {
                    let sub = below[c].as_ref().expect("children first");
                    if let Some(x) = seen.iter().find(|x| sub.contains(*x)) {
                        return Err(Error::DuplicateTxId(x.0.clone()));
                    }
                    mine.extend(sub.iter().cloned());
                }
                mine.extend(seen);
            }
            below[id] = Some(mine);
        }
        Ok(())
    }

    /// Reachable nodes with every node after its parents.
    fn topological_order(&self) -> Result<Vec<NodeId>> {
        // 0 unvisited, 1 on stack, 2 done
        let mut state = vec![0u8; self.nodes.len()];
        let mut post = Vec::new();
        let mut stack: Vec<(NodeId, usize)> = vec![(self.root, 0)];
        state[self.root] = 1;
        while let Some(&mut (id, ref mut next)) = stack.last_mut() {
            let kids = self.nodes[id].children();
            if *next < kids.len() {
                let c = kids[*next];
                *next += 1;
                match state[c] {
                    0 => {
                        state[c] = 1;
                        stack.push((c, 0));
                    }
                    1 => return Err(Error::Cyclic(c)),
                    _ => {}
                }
            } else {
                state[id] = 2;
                post.push(id);
                stack.pop();
            }
        }
        post.reverse();
        Ok(post)
    }

    /// Number of pure strategy profiles, saturating.
    pub fn profile_count(&self) -> u128 {
        self.slots().iter().fold(1u128, |a, (_, _, k)| a.saturating_mul(*k as u128))
    }
}

/// Emissions per outgoing edge; fee-choice edges list the tx with a zero
/// placeholder fee.
fn edge_emissions<S: Scalar>(node: &Node<S>) -> Vec<Vec<Emission<S>>> {
    match node {
        Node::Decision { actions, .. } => actions.iter().map(|a| a.emit.clone()).collect(),
        Node::FeeChoice { tx, post_time, owner, .. } => vec![vec![Emission {
            triple: TransactionTriple { tx: tx.clone(), post_time: *post_time, fee: S::zero() },
            payer: Some(owner.clone()),
        }]],
        Node::Simultaneous { outcomes, .. } => outcomes.iter().map(|o| o.emit.clone()).collect(),
        Node::Junction { emit, .. } | Node::Leaf { emit } => vec![emit.clone()],
    }
}

/// Row-major index of a joint choice.
pub fn joint_index(movers: &[Mover], choice: &[usize]) -> usize {
    movers.iter().zip(choice).fold(0, |acc, (m, &c)| acc * m.actions.len() + c)
}

/// Inverse of [`joint_index`].
pub fn joint_choice(movers: &[Mover], mut idx: usize) -> Vec<usize> {
    let mut out = vec![0; movers.len()];
    for (k, m) in movers.iter().enumerate().rev() {
        out[k] = idx % m.actions.len();
        idx /= m.actions.len();
    }
    out
}

/// Incremental construction, children before parents, recording the
/// intended behaviour alongside.
#[derive(Clone, Debug)]
pub struct TreeBuilder<S> {
    players: BTreeSet<PlayerId>,
    nodes: Vec<Node<S>>,
    ipb: StrategyProfile,
}

impl<S: Scalar> TreeBuilder<S> {
    pub fn new<'a>(players: impl IntoIterator<Item = &'a str>) -> Self {
        TreeBuilder { players: players.into_iter().map(PlayerId::from).collect(), nodes: Vec::new(), ipb: StrategyProfile::new() }
    }

    pub fn with_players(players: BTreeSet<PlayerId>) -> Self {
        TreeBuilder { players, nodes: Vec::new(), ipb: StrategyProfile::new() }
    }

    fn push(&mut self, n: Node<S>) -> NodeId {
        self.nodes.push(n);
        self.nodes.len() - 1
    }

    pub fn leaf(&mut self, emit: Vec<Emission<S>>) -> NodeId {
        self.push(Node::Leaf { emit })
    }

    pub fn junction(&mut self, emit: Vec<Emission<S>>, child: NodeId) -> NodeId {
        self.push(Node::Junction { emit, child })
    }

    /// `ipb` is the index of the intended action.
    pub fn decision(&mut self, owner: &str, round: Option<Round>, actions: Vec<Action<S>>, ipb: usize) -> NodeId {
        let id = self.push(Node::Decision { owner: PlayerId::from(owner), round, actions });
        self.ipb.set(id, &PlayerId::from(owner), ipb);
        id
    }

    #[allow(clippy::too_many_arguments)]
    pub fn fee_choice(
        &mut self,
        owner: &str,
        round: Option<Round>,
        tx: &str,
        post_time: Round,
        grid: Vec<S>,
        child: NodeId,
        ipb: usize,
    ) -> NodeId {
        let id = self.push(Node::FeeChoice {
            owner: PlayerId::from(owner),
            round,
            tx: TxId::from(tx),
            post_time,
            grid,
            child,
        });
        self.ipb.set(id, &PlayerId::from(owner), ipb);
        id
    }

    /// `movers` carry their intended action index.
    pub fn simultaneous(
        &mut self,
        round: Option<Round>,
        movers: Vec<(Mover, usize)>,
        outcomes: Vec<JointOutcome<S>>,
    ) -> NodeId {
        let ms: Vec<Mover> = movers.iter().map(|(m, _)| m.clone()).collect();
        let id = self.push(Node::Simultaneous { round, movers: ms, outcomes });
        for (m, a) in movers {
            self.ipb.set(id, &m.player, a);
        }
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Validated tree plus the recorded intended profile.
    pub fn finish(self, root: NodeId) -> Result<(GameTree<S>, StrategyProfile)> {
        let t = GameTree::from_parts(self.players, self.nodes, root)?;
        Ok((t, self.ipb))
    }
}

/// Grid `{0, step, 2·step, …}` up to and including `cap`.
pub fn fee_grid<S: Scalar>(cap: &S, step: &S) -> Result<Vec<S>> {
    grid_between(&S::zero(), cap, step)
}

/// Grid from `min` to `max` in increments of `step`; `max` is always the
/// last entry.
pub fn grid_between<S: Scalar>(min: &S, max: &S, step: &S) -> Result<Vec<S>> {
    if min > max || min.is_negative() {
        return Err(Error::FeeGridEmpty(0));
    }
    if step.is_zero() || min == max {
        return Ok(vec![min.clone()]);
    }
    if step.is_negative() {
        return Err(Error::InvalidParams("negative grid step".into()));
    }
    let mut out = Vec::new();
    let mut k = 0i64;
    loop {
        let v = min.clone() + step.clone() * S::from_i64(k).expect("small");
        if v > *max || v.approx_eq(max) {
            break;
        }
        out.push(v);
        k += 1;
        if k > 1_000_000 {
            return Err(Error::EnumerationBoundExceeded("fee grid".into(), 1_000_000));
        }
    }
    out.push(max.clone());
    Ok(out)
}
