//! JSON form of triple sets, conflicts and settlement rules.
//!
//! ```json
//! {
//!   "players": ["A", "B"],
//!   "triples": [{"tx": "x1", "time": 0, "fee": "1"}],
//!   "conflicts": [["x1", "x2"]],
//!   "validity": {"x2": 3},
//!   "balances": {"": ["0", "0"], "x1": ["1", "0"], "x2": {"B": "1"}},
//!   "payer": {"x1": "A"},
//!   "bounty": {"x2": "0.5"}
//! }
//! ```
//!
//! Pattern keys are comma-separated sorted transaction ids, `""` for the
//! empty pattern. A balance vector follows `players`; an object names its
//! players directly. The table alphabet is every id that appears anywhere
//! in the document. All fields are optional.

use std::collections::BTreeSet;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::extform::scalar_from_json;
use crate::scalar::Scalar;
use crate::types::{pattern_key, BalanceTable, Balances, ConflictSpec, PlayerId, SettlementRules, TransactionTriple, TxId};

#[derive(Clone, Debug, PartialEq)]
pub struct SettlementDoc<S> {
    pub triples: Vec<TransactionTriple<S>>,
    pub conflicts: ConflictSpec,
    pub rules: SettlementRules<S>,
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedDocument(msg.into())
}

fn object<'a>(doc: &'a Value, key: &str) -> Result<Option<&'a Map<String, Value>>> {
    match doc.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Object(m)) => Ok(Some(m)),
        Some(_) => Err(malformed(format!("`{key}` must be an object"))),
    }
}

fn list<'a>(doc: &'a Value, key: &str) -> Result<&'a [Value]> {
    match doc.get(key) {
        None | Some(Value::Null) => Ok(&[]),
        Some(Value::Array(a)) => Ok(a),
        Some(_) => Err(malformed(format!("`{key}` must be an array"))),
    }
}

fn string(v: &Value, what: &str) -> Result<String> {
    v.as_str().map(str::to_owned).ok_or_else(|| malformed(format!("{what} must be a string")))
}

fn parse_pattern(key: &str) -> BTreeSet<TxId> {
    key.split(',').map(str::trim).filter(|s| !s.is_empty()).map(TxId::from).collect()
}

pub fn settlement_from_json<S: Scalar>(doc: &Value) -> Result<SettlementDoc<S>> {
    if !doc.is_object() {
        return Err(malformed("settlement document must be an object"));
    }
    let players = list(doc, "players")?
        .iter()
        .map(|p| string(p, "player").map(PlayerId::new))
        .collect::<Result<Vec<_>>>()?;
    let mut alphabet = BTreeSet::new();

    let mut triples = Vec::new();
    for t in list(doc, "triples")? {
        let tx = string(t.get("tx").unwrap_or(&Value::Null), "`tx`")?;
        let time = t.get("time").and_then(Value::as_u64).ok_or_else(|| malformed(format!("triple {tx} needs a `time`")))?;
        let fee = match t.get("fee") {
            Some(f) => scalar_from_json(f)?,
            None => S::zero(),
        };
        alphabet.insert(TxId::from(tx.as_str()));
        triples.push(TransactionTriple::new(tx, time, fee));
    }

    let mut conflicts = ConflictSpec::new();
    for set in list(doc, "conflicts")? {
        let ids = set
            .as_array()
            .ok_or_else(|| malformed("each conflict set must be an array"))?
            .iter()
            .map(|x| string(x, "conflicting tx").map(TxId::new))
            .collect::<Result<BTreeSet<_>>>()?;
        alphabet.extend(ids.iter().cloned());
        conflicts.conflict_sets.push(ids);
    }
    for (tx, r) in object(doc, "validity")?.into_iter().flatten() {
        let r = r.as_u64().ok_or_else(|| malformed(format!("validity of {tx} must be a round")))?;
        alphabet.insert(TxId::from(tx.as_str()));
        conflicts.validity.insert(TxId::from(tx.as_str()), r);
    }
    conflicts.validate()?;

    let mut entries = Vec::new();
    for (key, vector) in object(doc, "balances")?.into_iter().flatten() {
        let pattern = parse_pattern(key);
        let balances = match vector {
            Value::Array(xs) => {
                if xs.len() != players.len() {
                    return Err(malformed(format!("pattern `{key}` has {} entries for {} players", xs.len(), players.len())));
                }
                let mut b = Balances::new();
                for (p, x) in players.iter().zip(xs) {
                    b.add(p, scalar_from_json(x)?);
                }
                b
            }
            Value::Object(m) => {
                let mut b = Balances::new();
                for (p, x) in m {
                    b.add(&PlayerId::from(p.as_str()), scalar_from_json(x)?);
                }
                b
            }
            _ => return Err(malformed(format!("balances of `{key}` must be an array or object"))),
        };
        alphabet.extend(pattern.iter().cloned());
        entries.push((pattern, balances));
    }

    let mut payer = Vec::new();
    for (tx, p) in object(doc, "payer")?.into_iter().flatten() {
        alphabet.insert(TxId::from(tx.as_str()));
        payer.push((tx.clone(), string(p, "payer")?));
    }
    let mut bounty = Vec::new();
    for (tx, x) in object(doc, "bounty")?.into_iter().flatten() {
        alphabet.insert(TxId::from(tx.as_str()));
        bounty.push((tx.clone(), scalar_from_json::<S>(x)?));
    }

    let mut table = BalanceTable::new(alphabet.iter().map(|t| t.as_str()));
    for (pattern, b) in entries {
        table.base.insert(pattern, b);
    }
    let mut rules = SettlementRules::new(table);
    for (tx, p) in payer {
        rules = rules.with_payer(&tx, &p);
    }
    for (tx, x) in bounty {
        rules = rules.with_bounty(&tx, x);
    }
    Ok(SettlementDoc { triples, conflicts, rules })
}

/// Writes a document that [`settlement_from_json`] reads back to the same
/// value when the rules hold a single table. Balances use the object form.
pub fn settlement_to_json<S: Scalar>(d: &SettlementDoc<S>) -> Value {
    let triples: Vec<Value> = d
        .triples
        .iter()
        .map(|t| json!({"tx": t.tx.as_str(), "time": t.post_time, "fee": t.fee.to_repr()}))
        .collect();
    let conflicts: Vec<Value> =
        d.conflicts.conflict_sets.iter().map(|s| json!(s.iter().map(|t| t.as_str()).collect::<Vec<_>>())).collect();
    let validity: Map<String, Value> = d.conflicts.validity.iter().map(|(t, r)| (t.0.clone(), json!(r))).collect();
    let mut balances = Map::new();
    for table in &d.rules.tables {
        for (pattern, b) in &table.base {
            let row: Map<String, Value> = b.0.iter().map(|(p, x)| (p.0.clone(), json!(x.to_repr()))).collect();
            balances.insert(pattern_key(pattern), Value::Object(row));
        }
    }
    let payer: Map<String, Value> = d.rules.payer.iter().map(|(t, p)| (t.0.clone(), json!(p.0))).collect();
    let bounty: Map<String, Value> = d.rules.bounty.iter().map(|(t, x)| (t.0.clone(), json!(x.to_repr()))).collect();
    json!({
        "triples": triples,
        "conflicts": conflicts,
        "validity": validity,
        "balances": balances,
        "payer": payer,
        "bounty": bounty,
    })
}
