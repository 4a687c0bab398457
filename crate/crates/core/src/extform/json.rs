//! JSON form of game trees.
//!
//! A document is `{"players": [...], "root": <node>}`. Nodes are objects
//! with a `kind` of `decision`, `fee_choice`, `simultaneous`, `leaf` or
//! `junction`. A node may carry an `id`; a later `{"ref": id}` points back
//! to it, which is how shared subtrees are written. Scalars are strings
//! (`"0.1"`, `"1/3"`) or plain numbers. `ipb` selects the intended action,
//! by label or index (a fee value or index for `fee_choice`); it defaults
//! to the first action.

use std::collections::{BTreeSet, HashMap};

use serde_json::{json, Map, Value};

use super::tree::{Action, Emission, GameTree, JointOutcome, Mover, Node, NodeId, StrategyProfile};
use super::{grid_between, TreeBuilder};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{PlayerId, TransactionTriple};

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedDocument(msg.into())
}

pub fn scalar_from_json<S: Scalar>(v: &Value) -> Result<S> {
    match v {
        Value::String(s) => S::parse_decimal(s),
        Value::Number(n) => S::parse_decimal(&n.to_string()),
        other => Err(malformed(format!("expected a number, got {other}"))),
    }
}

fn field<'a>(obj: &'a Value, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| malformed(format!("missing field `{key}`")))
}

fn str_field<'a>(obj: &'a Value, key: &str) -> Result<&'a str> {
    field(obj, key)?.as_str().ok_or_else(|| malformed(format!("field `{key}` must be a string")))
}

fn u64_field(obj: &Value, key: &str) -> Result<u64> {
    field(obj, key)?.as_u64().ok_or_else(|| malformed(format!("field `{key}` must be a non-negative integer")))
}

fn opt_round(obj: &Value) -> Result<Option<u64>> {
    match obj.get("round") {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v.as_u64().map(Some).ok_or_else(|| malformed("`round` must be a non-negative integer")),
    }
}

fn array<'a>(obj: &'a Value, key: &str) -> Result<&'a Vec<Value>> {
    match obj.get(key) {
        Some(Value::Array(a)) => Ok(a),
        _ => Err(malformed(format!("field `{key}` must be an array"))),
    }
}

pub fn emission_from_json<S: Scalar>(v: &Value) -> Result<Emission<S>> {
    let tx = str_field(v, "tx")?;
    let time = u64_field(v, "time")?;
    let fee = match v.get("fee") {
        Some(f) => scalar_from_json(f)?,
        None => S::zero(),
    };
    let payer = match v.get("payer") {
        None | Some(Value::Null) => None,
        Some(Value::String(p)) => Some(PlayerId::from(p.as_str())),
        Some(_) => return Err(malformed("`payer` must be a string")),
    };
    Ok(Emission { triple: TransactionTriple::new(tx, time, fee), payer })
}

pub fn emission_to_json<S: Scalar>(e: &Emission<S>) -> Value {
    let mut m = Map::new();
    m.insert("tx".into(), json!(e.triple.tx.0));
    m.insert("time".into(), json!(e.triple.post_time));
    m.insert("fee".into(), json!(e.triple.fee.to_repr()));
    if let Some(p) = &e.payer {
        m.insert("payer".into(), json!(p.0));
    }
    Value::Object(m)
}

fn emissions<S: Scalar>(obj: &Value) -> Result<Vec<Emission<S>>> {
    match obj.get("emit") {
        None => Ok(vec![]),
        Some(Value::Array(a)) => a.iter().map(emission_from_json).collect(),
        Some(_) => Err(malformed("`emit` must be an array")),
    }
}

/// Resolves an `ipb` entry against a list of labels.
fn pick(ipb: Option<&Value>, labels: &[String]) -> Result<usize> {
    match ipb {
        None | Some(Value::Null) => Ok(0),
        Some(Value::Number(n)) => n
            .as_u64()
            .map(|k| k as usize)
            .filter(|&k| k < labels.len())
            .ok_or_else(|| malformed(format!("ipb index {n} out of range"))),
        Some(Value::String(s)) => {
            labels.iter().position(|l| l == s).ok_or_else(|| malformed(format!("ipb label `{s}` not found")))
        }
        Some(_) => Err(malformed("`ipb` must be a label or index")),
    }
}

struct Loader<S> {
    b: TreeBuilder<S>,
    ids: HashMap<String, NodeId>,
}

impl<S: Scalar> Loader<S> {
    fn node(&mut self, v: &Value) -> Result<NodeId> {
        if let Some(r) = v.get("ref") {
            let key = id_key(r);
            return self.ids.get(&key).copied().ok_or_else(|| malformed(format!("unknown node ref {key}")));
        }
        let kind = str_field(v, "kind")?;
        let id = match kind {
            "leaf" => {
                let emit = emissions(v)?;
                self.b.leaf(emit)
            }
            "junction" => {
                let emit = emissions(v)?;
                let child = self.node(field(v, "child")?)?;
                self.b.junction(emit, child)
            }
            "decision" => {
                let owner = str_field(v, "owner")?.to_string();
                let round = opt_round(v)?;
                let mut actions = Vec::new();
                for a in array(v, "actions")? {
                    let label = str_field(a, "label")?;
                    let emit = emissions(a)?;
                    let child = self.node(field(a, "child")?)?;
                    actions.push(Action::new(label, emit, child));
                }
                let labels: Vec<String> = actions.iter().map(|a| a.label.clone()).collect();
                let ipb = pick(v.get("ipb"), &labels)?;
                self.b.decision(&owner, round, actions, ipb)
            }
            "fee_choice" => {
                let owner = str_field(v, "owner")?.to_string();
                let round = opt_round(v)?;
                let tx = str_field(v, "tx")?.to_string();
                let post = u64_field(v, "post_time")?;
                let grid: Vec<S> = match field(v, "grid")? {
                    Value::Array(a) => a.iter().map(scalar_from_json).collect::<Result<_>>()?,
                    g @ Value::Object(_) => {
                        let min = scalar_from_json(field(g, "min")?)?;
                        let max = scalar_from_json(field(g, "max")?)?;
                        let step = match g.get("step") {
                            Some(s) => scalar_from_json(s)?,
                            None => S::zero(),
                        };
                        grid_between(&min, &max, &step)?
                    }
                    _ => return Err(malformed("`grid` must be an array or {min,max,step}")),
                };
                let ipb = match v.get("ipb") {
                    Some(Value::String(s)) => {
                        let fee = S::parse_decimal(s)?;
                        grid.iter()
                            .position(|g| g.approx_eq(&fee))
                            .ok_or_else(|| malformed(format!("ipb fee {s} not on grid")))?
                    }
                    other => pick(other, &vec![String::new(); grid.len()])?,
                };
                let child = self.node(field(v, "child")?)?;
                self.b.fee_choice(&owner, round, &tx, post, grid, child, ipb)
            }
            "simultaneous" => {
                let round = opt_round(v)?;
                let mut movers = Vec::new();
                for m in array(v, "movers")? {
                    let player = PlayerId::from(str_field(m, "player")?);
                    let actions: Vec<String> = array(m, "actions")?
                        .iter()
                        .map(|a| a.as_str().map(str::to_string).ok_or_else(|| malformed("action labels must be strings")))
                        .collect::<Result<_>>()?;
                    let ipb = pick(m.get("ipb"), &actions)?;
                    movers.push((Mover { player, actions }, ipb));
                }
                let mut outcomes = Vec::new();
                for o in array(v, "outcomes")? {
                    let emit = emissions(o)?;
                    let child = self.node(field(o, "child")?)?;
                    outcomes.push(JointOutcome { emit, child });
                }
                self.b.simultaneous(round, movers, outcomes)
            }
            other => return Err(malformed(format!("unknown node kind `{other}`"))),
        };
        if let Some(k) = v.get("id") {
            self.ids.insert(id_key(k), id);
        }
        Ok(id)
    }
}

fn id_key(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Loads a game and its intended profile.
pub fn game_from_json<S: Scalar>(doc: &Value) -> Result<(GameTree<S>, StrategyProfile)> {
    let players: BTreeSet<PlayerId> = array(doc, "players")?
        .iter()
        .map(|p| p.as_str().map(PlayerId::from).ok_or_else(|| malformed("player ids must be strings")))
        .collect::<Result<_>>()?;
    let mut l = Loader { b: TreeBuilder::with_players(players), ids: HashMap::new() };
    let root = l.node(field(doc, "root")?)?;
    l.b.finish(root)
}

/// Writes a game; shared nodes are emitted once and referenced after.
pub fn game_to_json<S: Scalar>(tree: &GameTree<S>, ipb: Option<&StrategyProfile>) -> Value {
    let shared: Vec<bool> = tree.in_degrees().iter().map(|&d| d > 1).collect();
    let mut done = vec![false; tree.len()];
    let root = write_node(tree, tree.root(), ipb, &shared, &mut done);
    json!({
        "players": tree.players().iter().map(|p| p.0.clone()).collect::<Vec<_>>(),
        "root": root,
    })
}

fn write_node<S: Scalar>(
    tree: &GameTree<S>,
    id: NodeId,
    ipb: Option<&StrategyProfile>,
    shared: &[bool],
    done: &mut [bool],
) -> Value {
    if shared[id] && done[id] {
        return json!({ "ref": id });
    }
    done[id] = true;
    let emits = |e: &[Emission<S>]| Value::Array(e.iter().map(emission_to_json).collect());
    let mut m = Map::new();
    match tree.node(id) {
        Node::Leaf { emit } => {
            m.insert("kind".into(), json!("leaf"));
            m.insert("emit".into(), emits(emit));
        }
        Node::Junction { emit, child } => {
            m.insert("kind".into(), json!("junction"));
            m.insert("emit".into(), emits(emit));
            m.insert("child".into(), write_node(tree, *child, ipb, shared, done));
        }
        Node::Decision { owner, round, actions } => {
            m.insert("kind".into(), json!("decision"));
            m.insert("owner".into(), json!(owner.0));
            if let Some(r) = round {
                m.insert("round".into(), json!(r));
            }
            if let Some(a) = ipb.and_then(|p| p.get(id, owner)) {
                m.insert("ipb".into(), json!(actions[a].label));
            }
            let acts: Vec<Value> = actions
                .iter()
                .map(|a| {
                    json!({
                        "label": a.label,
                        "emit": emits(&a.emit),
                        "child": write_node(tree, a.child, ipb, shared, done),
                    })
                })
                .collect();
            m.insert("actions".into(), Value::Array(acts));
        }
        Node::FeeChoice { owner, round, tx, post_time, grid, child } => {
            m.insert("kind".into(), json!("fee_choice"));
            m.insert("owner".into(), json!(owner.0));
            if let Some(r) = round {
                m.insert("round".into(), json!(r));
            }
            m.insert("tx".into(), json!(tx.0));
            m.insert("post_time".into(), json!(post_time));
            m.insert("grid".into(), Value::Array(grid.iter().map(|g| json!(g.to_repr())).collect()));
            if let Some(a) = ipb.and_then(|p| p.get(id, owner)) {
                m.insert("ipb".into(), json!(a));
            }
            m.insert("child".into(), write_node(tree, *child, ipb, shared, done));
        }
        Node::Simultaneous { round, movers, outcomes } => {
            m.insert("kind".into(), json!("simultaneous"));
            if let Some(r) = round {
                m.insert("round".into(), json!(r));
            }
            let ms: Vec<Value> = movers
                .iter()
                .map(|mv| {
                    let mut o = Map::new();
                    o.insert("player".into(), json!(mv.player.0));
                    o.insert("actions".into(), json!(mv.actions));
                    if let Some(a) = ipb.and_then(|p| p.get(id, &mv.player)) {
                        o.insert("ipb".into(), json!(mv.actions[a]));
                    }
                    Value::Object(o)
                })
                .collect();
            m.insert("movers".into(), Value::Array(ms));
            let outs: Vec<Value> = outcomes
                .iter()
                .map(|o| json!({ "emit": emits(&o.emit), "child": write_node(tree, o.child, ipb, shared, done) }))
                .collect();
            m.insert("outcomes".into(), Value::Array(outs));
        }
    }
    if shared[id] {
        m.insert("id".into(), json!(id));
    }
    Value::Object(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    #[test]
    fn load_small_game() {
        let doc = json!({
            "players": ["A", "B"],
            "root": {
                "kind": "decision", "owner": "A", "round": 0, "ipb": "pay",
                "actions": [
                    {"label": "pay", "child": {
                        "kind": "fee_choice", "owner": "A", "tx": "x", "post_time": 0,
                        "grid": {"min": "0", "max": "1", "step": "0.5"}, "ipb": "1",
                        "child": {"kind": "leaf"}}},
                    {"label": "skip", "emit": [{"tx": "y", "time": 1}], "child": {"kind": "leaf"}}
                ]
            }
        });
        let (t, ipb) = game_from_json::<Rational>(&doc).unwrap();
        assert_eq!(t.profile_count(), 6);
        let out = super::super::outcome(&t, &ipb).unwrap();
        assert_eq!(out, vec![TransactionTriple::new("x", 0, Rational::ratio(1, 1))]);

        let back = game_to_json(&t, Some(&ipb));
        let (t2, ipb2) = game_from_json::<Rational>(&back).unwrap();
        assert_eq!(t2.profile_count(), 6);
        assert_eq!(super::super::outcome(&t2, &ipb2).unwrap(), out);
    }

    #[test]
    fn shared_nodes_round_trip() {
        let mut b = TreeBuilder::<Rational>::new(["A"]);
        let l = b.leaf(vec![Emission::sentinel("z", 0)]);
        let d = b.decision("A", None, vec![Action::new("a", vec![], l), Action::new("b", vec![], l)], 1);
        let (t, ipb) = b.finish(d).unwrap();
        let doc = game_to_json(&t, Some(&ipb));
        let (t2, ipb2) = game_from_json::<Rational>(&doc).unwrap();
        assert_eq!(t2.len(), 2);
        assert_eq!(t2.play(&ipb2).unwrap().steps[0].label, "b");
    }

    #[test]
    fn bad_documents() {
        let e = game_from_json::<f64>(&json!({"players": [], "root": {"kind": "nope"}})).unwrap_err();
        assert!(matches!(e, Error::MalformedDocument(_)));
        let e = game_from_json::<f64>(&json!({"players": ["A"], "root": {"kind": "decision", "owner": "B",
            "actions": [{"label": "x", "child": {"kind": "leaf"}}]}}))
        .unwrap_err();
        assert_eq!(e, Error::UnknownOwner("B".into()));
    }
}
