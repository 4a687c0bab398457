//! Shared domain types and settlement of an ordering into balances.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Block height / round number.
pub type Round = u64;

/// Opaque transaction identifier.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TxId(pub String);

impl TxId {
    pub fn new(s: impl Into<String>) -> Self {
        TxId(s.into())
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TxId {
    fn from(s: &str) -> Self {
        TxId(s.to_string())
    }
}

/// Identifier of an application player or a miner (`m0`, `m1`, ...).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub String);

impl PlayerId {
    pub fn new(s: impl Into<String>) -> Self {
        PlayerId(s.into())
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
    /// Miner index if this id names a miner.
    pub fn miner_index(&self) -> Option<usize> {
        let digits = self.0.strip_prefix('m')?;
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        digits.parse().ok()
    }
    pub fn is_miner(&self) -> bool {
        self.miner_index().is_some()
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PlayerId {
    fn from(s: &str) -> Self {
        PlayerId(s.to_string())
    }
}

/// Player id of miner `j`; `m0` is the aggregated small-miner mass.
pub fn miner_player(j: usize) -> PlayerId {
    PlayerId(format!("m{j}"))
}

/// A transaction together with its posting round and fee.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransactionTriple<S> {
    pub tx: TxId,
    pub post_time: Round,
    pub fee: S,
}

impl<S: Scalar> TransactionTriple<S> {
    pub fn new(tx: impl Into<String>, post_time: Round, fee: S) -> Self {
        TransactionTriple { tx: TxId(tx.into()), post_time, fee }
    }
}

/// Checks unique ids and non-negative fees.
pub fn validate_triples<S: Scalar>(triples: &[TransactionTriple<S>]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for t in triples {
        if t.fee.is_negative() {
            return Err(Error::NegativeFee(t.tx.0.clone()));
        }
        if !seen.insert(&t.tx) {
            return Err(Error::DuplicateTxId(t.tx.0.clone()));
        }
    }
    Ok(())
}

/// Miner population `(λ_0, λ_1, ..., λ_m)` with `λ_1 ≤ ... ≤ λ_m`.
///
/// Index 0 is the aggregate of miners too small to act strategically; it
/// always includes the valid highest-fee transaction it knows.
#[derive(Clone, Debug, PartialEq)]
pub struct HashrateDistribution<S> {
    lambda: Vec<S>,
    original: Vec<usize>,
}

/// Validates and sorts a raw hashrate vector. Entry 0 stays in place.
pub fn validate_hashrate<S: Scalar>(raw: &[S]) -> Result<HashrateDistribution<S>> {
    if raw.is_empty() {
        return Err(Error::EmptyHashrate);
    }
    if let Some(neg) = raw.iter().find(|x| x.is_negative()) {
        return Err(Error::NegativeEntry(neg.to_repr()));
    }
    let sum = raw.iter().fold(S::zero(), |a, b| a + b.clone());
    if !sum.approx_eq(&S::one()) {
        return Err(Error::SumNotOne(sum.to_repr()));
    }
    let mut idx: Vec<usize> = (1..raw.len()).collect();
    // stable: equal hashrates keep their input order
    idx.sort_by(|&a, &b| raw[a].partial_cmp(&raw[b]).expect("hashrates are comparable"));
    let mut original = vec![0];
    original.extend(idx);
    let lambda: Vec<S> = original.iter().map(|&i| raw[i].clone()).collect();
    if lambda.len() < 2 || !lambda[lambda.len() - 1].is_positive() {
        return Err(Error::NonPositiveLargest);
    }
    Ok(HashrateDistribution { lambda, original })
}

impl<S: Scalar> HashrateDistribution<S> {
    /// Number of named miners `m`.
    pub fn m(&self) -> usize {
        self.lambda.len() - 1
    }
    pub fn lambda0(&self) -> &S {
        &self.lambda[0]
    }
    pub fn get(&self, j: usize) -> &S {
        &self.lambda[j]
    }
    /// All entries, index 0 first.
    pub fn values(&self) -> &[S] {
        &self.lambda
    }
    /// Position of sorted miner `j` in the caller's input vector.
    pub fn original_index(&self, j: usize) -> usize {
        self.original[j]
    }
    /// `Σ_{k=j}^m λ_k` for `j ≥ 1`.
    pub fn tail(&self, j: usize) -> S {
        self.lambda[j..].iter().fold(S::zero(), |a, b| a + b.clone())
    }
    pub fn to_f64(&self) -> Vec<f64> {
        self.lambda.iter().map(Scalar::as_f64).collect()
    }
}

/// Mutually exclusive transaction sets plus earliest-inclusion rounds.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConflictSpec {
    pub conflict_sets: Vec<BTreeSet<TxId>>,
    pub validity: BTreeMap<TxId, Round>,
}

impl ConflictSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_pair(mut self, a: &str, b: &str) -> Self {
        self.conflict_sets.push([TxId::from(a), TxId::from(b)].into_iter().collect());
        self
    }

    pub fn with_validity(mut self, tx: &str, round: Round) -> Self {
        self.validity.insert(TxId::from(tx), round);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for set in &self.conflict_sets {
            for tx in set {
                if !seen.insert(tx) {
                    return Err(Error::OverlappingConflictSets(tx.0.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn validity_of(&self, tx: &TxId) -> Round {
        self.validity.get(tx).copied().unwrap_or(0)
    }

    /// The conflict set containing `tx`, if any.
    pub fn set_of(&self, tx: &TxId) -> Option<&BTreeSet<TxId>> {
        self.conflict_sets.iter().find(|s| s.contains(tx))
    }

    /// Every transaction id mentioned here.
    pub fn alphabet(&self) -> BTreeSet<TxId> {
        let mut all: BTreeSet<TxId> = self.conflict_sets.iter().flatten().cloned().collect();
        all.extend(self.validity.keys().cloned());
        all
    }

    /// Union of two specs over disjoint alphabets.
    pub fn union(&self, other: &ConflictSpec) -> Result<ConflictSpec> {
        let a = self.alphabet();
        if let Some(x) = other.alphabet().iter().find(|x| a.contains(*x)) {
            return Err(Error::AlphabetOverlap(x.0.clone()));
        }
        let mut out = self.clone();
        out.conflict_sets.extend(other.conflict_sets.iter().cloned());
        out.validity.extend(other.validity.iter().map(|(k, v)| (k.clone(), *v)));
        Ok(out)
    }
}

/// One mined block. `proposer` is `None` only when no fee-bearing
/// transaction needs crediting.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Block {
    pub round: Round,
    pub proposer: Option<usize>,
    pub txs: Vec<TxId>,
}

/// A chain of non-empty blocks in increasing round order.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ordering {
    pub blocks: Vec<Block>,
}

impl Ordering {
    pub fn confirmed(&self) -> BTreeSet<TxId> {
        self.blocks.iter().flat_map(|b| b.txs.iter().cloned()).collect()
    }

    /// Round in which `tx` was mined.
    pub fn round_of(&self, tx: &TxId) -> Option<Round> {
        self.blocks.iter().find(|b| b.txs.contains(tx)).map(|b| b.round)
    }

    pub fn validate(&self, conflicts: &ConflictSpec) -> Result<()> {
        let mut last: Option<Round> = None;
        let mut seen = BTreeSet::new();
        for b in &self.blocks {
            if let Some(l) = last {
                if b.round <= l {
                    return Err(Error::MalformedOrdering(format!(
                        "round {} does not increase after {l}",
                        b.round
                    )));
                }
            }
            last = Some(b.round);
            for tx in &b.txs {
                if !seen.insert(tx.clone()) {
                    return Err(Error::DuplicateTxId(tx.0.clone()));
                }
            }
        }
        for set in &conflicts.conflict_sets {
            let hit: Vec<&TxId> = set.iter().filter(|t| seen.contains(*t)).collect();
            if hit.len() > 1 {
                return Err(Error::ConflictViolation(hit[0].0.clone(), hit[1].0.clone()));
            }
        }
        Ok(())
    }
}

/// Remarks attached by the resolver to explain modelling choices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ResolverNote {
    /// Equal miner rewards with one side timelocked: the immediate
    /// transaction was assumed to win.
    EqualRewardRace { immediate: TxId, delayed: TxId },
}

/// Finite distribution over orderings.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution<S> {
    pub support: Vec<(Ordering, S)>,
    pub notes: Vec<ResolverNote>,
}

impl<S: Scalar> OutcomeDistribution<S> {
    pub fn total(&self) -> S {
        self.support.iter().fold(S::zero(), |a, (_, p)| a + p.clone())
    }

    /// Probability that `tx` is confirmed.
    pub fn prob_confirmed(&self, tx: &TxId) -> S {
        self.support
            .iter()
            .filter(|(o, _)| o.round_of(tx).is_some())
            .fold(S::zero(), |a, (_, p)| a + p.clone())
    }
}

/// Balance vector over players and miners; missing entries are zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Balances<S>(pub BTreeMap<PlayerId, S>);

impl<S: Scalar> Balances<S> {
    pub fn new() -> Self {
        Balances(BTreeMap::new())
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, S)>) -> Self {
        Balances(pairs.into_iter().map(|(k, v)| (PlayerId::from(k), v)).collect())
    }

    pub fn get(&self, p: &PlayerId) -> S {
        self.0.get(p).cloned().unwrap_or_else(S::zero)
    }

    pub fn add(&mut self, p: &PlayerId, amount: S) {
        let e = self.0.entry(p.clone()).or_insert_with(S::zero);
        *e = e.clone() + amount;
    }

    pub fn add_all(&mut self, other: &Balances<S>) {
        for (p, v) in &other.0 {
            self.add(p, v.clone());
        }
    }

    pub fn scaled(&self, k: &S) -> Balances<S> {
        Balances(self.0.iter().map(|(p, v)| (p.clone(), v.clone() * k.clone())).collect())
    }

    pub fn sub(&self, other: &Balances<S>) -> Balances<S> {
        let mut out = self.clone();
        for (p, v) in &other.0 {
            out.add(p, -v.clone());
        }
        out
    }

    /// Sum over a set of players.
    pub fn sum_over<'a>(&self, players: impl IntoIterator<Item = &'a PlayerId>) -> S {
        players.into_iter().fold(S::zero(), |a, p| a + self.get(p))
    }

    pub fn approx_eq(&self, other: &Balances<S>) -> bool {
        let keys: BTreeSet<&PlayerId> = self.0.keys().chain(other.0.keys()).collect();
        keys.into_iter().all(|k| self.get(k).approx_eq(&other.get(k)))
    }
}

/// Set of confirmed transactions used as a key of the base balance table.
pub type Pattern = BTreeSet<TxId>;

pub fn pattern_key(p: &Pattern) -> String {
    p.iter().map(|t| t.0.as_str()).collect::<Vec<_>>().join(",")
}

/// Base balances for one transaction alphabet.
#[derive(Clone, Debug, PartialEq)]
pub struct BalanceTable<S> {
    pub alphabet: BTreeSet<TxId>,
    pub base: BTreeMap<Pattern, Balances<S>>,
}

impl<S: Scalar> BalanceTable<S> {
    pub fn new<'a>(alphabet: impl IntoIterator<Item = &'a str>) -> Self {
        BalanceTable {
            alphabet: alphabet.into_iter().map(TxId::from).collect(),
            base: BTreeMap::new(),
        }
    }

    /// Adds the balances for a confirmed pattern.
    pub fn entry<'a>(mut self, pattern: impl IntoIterator<Item = &'a str>, b: Balances<S>) -> Self {
        self.base.insert(pattern.into_iter().map(TxId::from).collect(), b);
        self
    }

    fn lookup(&self, confirmed: &Pattern) -> Result<&Balances<S>> {
        let proj: Pattern = confirmed.intersection(&self.alphabet).cloned().collect();
        self.base
            .get(&proj)
            .ok_or_else(|| Error::UnknownPattern(pattern_key(&proj)))
    }
}

/// Execution function: base balances per confirmed pattern, who pays each
/// fee, and extra miner-claimable outputs.
///
/// The base balance is the sum over `tables`, each looked up on the
/// projection of the confirmed set onto its alphabet. Rules built from
/// several tables are additive by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SettlementRules<S> {
    pub tables: Vec<BalanceTable<S>>,
    pub payer: BTreeMap<TxId, PlayerId>,
    /// Amount credited to the proposer of the block that mines the tx,
    /// on top of its fee.
    pub bounty: BTreeMap<TxId, S>,
}

impl<S: Scalar> SettlementRules<S> {
    pub fn new(table: BalanceTable<S>) -> Self {
        SettlementRules { tables: vec![table], payer: BTreeMap::new(), bounty: BTreeMap::new() }
    }

    pub fn with_payer(mut self, tx: &str, p: &str) -> Self {
        self.payer.insert(TxId::from(tx), PlayerId::from(p));
        self
    }

    pub fn with_bounty(mut self, tx: &str, amount: S) -> Self {
        self.bounty.insert(TxId::from(tx), amount);
        self
    }

    pub fn alphabet(&self) -> BTreeSet<TxId> {
        let mut a: BTreeSet<TxId> = self.tables.iter().flat_map(|t| t.alphabet.iter().cloned()).collect();
        a.extend(self.payer.keys().cloned());
        a.extend(self.bounty.keys().cloned());
        a
    }

    /// Players with an entry in some base table.
    pub fn players(&self) -> BTreeSet<PlayerId> {
        self.tables
            .iter()
            .flat_map(|t| t.base.values().flat_map(|b| b.0.keys().cloned()))
            .collect()
    }

    /// Fee-free balances for a confirmed set.
    pub fn base_balance(&self, confirmed: &Pattern) -> Result<Balances<S>> {
        if confirmed.iter().any(|x| !self.tables.iter().any(|t| t.alphabet.contains(x))) {
            return Err(Error::UnknownPattern(pattern_key(confirmed)));
        }
        let mut out = Balances::new();
        for t in &self.tables {
            out.add_all(t.lookup(confirmed)?);
        }
        Ok(out)
    }

    pub fn bounty_of(&self, tx: &TxId) -> S {
        self.bounty.get(tx).cloned().unwrap_or_else(S::zero)
    }
}

/// Balances after mining `ordering`: base balances, minus fees for payers,
/// plus fees and bounties for block proposers.
pub fn settle<S: Scalar>(
    ordering: &Ordering,
    triples: &[TransactionTriple<S>],
    conflicts: &ConflictSpec,
    rules: &SettlementRules<S>,
) -> Result<Balances<S>> {
    settle_with_payers(ordering, triples, conflicts, rules, &BTreeMap::new())
}

/// Like [`settle`], with payers declared outside the rules (for example by
/// the fee-choice nodes of a game tree) taking precedence.
pub fn settle_with_payers<S: Scalar>(
    ordering: &Ordering,
    triples: &[TransactionTriple<S>],
    conflicts: &ConflictSpec,
    rules: &SettlementRules<S>,
    payers: &BTreeMap<TxId, PlayerId>,
) -> Result<Balances<S>> {
    ordering.validate(conflicts)?;
    let fee_of: BTreeMap<&TxId, &S> = triples.iter().map(|t| (&t.tx, &t.fee)).collect();
    let confirmed = ordering.confirmed();
    let mut out = rules.base_balance(&confirmed)?;
    for b in &ordering.blocks {
        for tx in &b.txs {
            let fee = (*fee_of.get(tx).ok_or_else(|| Error::UnknownTx(tx.0.clone()))?).clone();
            let reward = fee.clone() + rules.bounty_of(tx);
            if fee.is_positive() {
                let payer = payers
                    .get(tx)
                    .or_else(|| rules.payer.get(tx))
                    .ok_or_else(|| Error::MissingPayer(tx.0.clone()))?;
                out.add(payer, -fee.clone());
            }
            if !reward.is_zero() {
                let j = b.proposer.ok_or(Error::MissingProposer(b.round))?;
                out.add(&miner_player(j), reward);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    #[test]
    fn hashrate_validation() {
        let h = validate_hashrate(&[q(1, 2), q(3, 10), q(1, 5)]).unwrap();
        assert_eq!(h.values(), &[q(1, 2), q(1, 5), q(3, 10)]);
        assert_eq!(h.original_index(1), 2);
        assert_eq!(h.m(), 2);
        assert_eq!(h.tail(1), q(1, 2));
        let h = validate_hashrate(&[q(0, 1), q(1, 2), q(1, 2)]).unwrap();
        assert_eq!(h.m(), 2);
        assert_eq!(*h.lambda0(), q(0, 1));
        assert!(matches!(validate_hashrate(&[q(2, 5), q(2, 5)]), Err(Error::SumNotOne(_))));
        assert!(matches!(validate_hashrate(&[q(1, 1)]), Err(Error::NonPositiveLargest)));
        assert!(matches!(validate_hashrate(&[q(1, 1), q(0, 1)]), Err(Error::NonPositiveLargest)));
        assert!(matches!(validate_hashrate(&[q(3, 2), q(-1, 2)]), Err(Error::NegativeEntry(_))));
        assert!(matches!(validate_hashrate::<Rational>(&[]), Err(Error::EmptyHashrate)));
        // floats tolerate rounding in the sum
        assert!(validate_hashrate(&[0.1_f64, 0.2, 0.7]).is_ok());
    }

    #[test]
    fn hashrate_ties_keep_input_order() {
        let h = validate_hashrate(&[q(0, 1), q(1, 2), q(1, 2)]).unwrap();
        assert_eq!(h.original_index(1), 1);
        assert_eq!(h.original_index(2), 2);
    }

    fn one_tx_rules() -> SettlementRules<Rational> {
        SettlementRules::new(
            BalanceTable::new(["x1"])
                .entry([], Balances::from_pairs([("A", q(10, 1))]))
                .entry(["x1"], Balances::from_pairs([("A", q(10, 1))])),
        )
        .with_payer("x1", "A")
    }

    #[test]
    fn settle_moves_fee_to_proposer() {
        let triples = vec![TransactionTriple::new("x1", 0, q(2, 1))];
        let ord = Ordering { blocks: vec![Block { round: 0, proposer: Some(1), txs: vec!["x1".into()] }] };
        let b = settle(&ord, &triples, &ConflictSpec::new(), &one_tx_rules()).unwrap();
        assert_eq!(b.get(&"A".into()), q(8, 1));
        assert_eq!(b.get(&miner_player(1)), q(2, 1));
    }

    #[test]
    fn settle_empty_ordering_is_base() {
        let triples = vec![TransactionTriple::new("x1", 0, q(2, 1))];
        let b = settle(&Ordering::default(), &triples, &ConflictSpec::new(), &one_tx_rules()).unwrap();
        assert_eq!(b, Balances::from_pairs([("A", q(10, 1))]));
    }

    #[test]
    fn settle_errors() {
        let triples = vec![TransactionTriple::new("x1", 0, q(2, 1)), TransactionTriple::new("x2", 0, q(1, 1))];
        let both = Ordering {
            blocks: vec![Block { round: 0, proposer: Some(0), txs: vec!["x1".into(), "x2".into()] }],
        };
        let c = ConflictSpec::new().with_pair("x1", "x2");
        assert!(matches!(settle(&both, &triples, &c, &one_tx_rules()), Err(Error::ConflictViolation(..))));
        assert!(matches!(
            settle(&both, &triples, &ConflictSpec::new(), &one_tx_rules()),
            Err(Error::UnknownPattern(_))
        ));
        let unsorted = Ordering {
            blocks: vec![
                Block { round: 2, proposer: Some(0), txs: vec!["x1".into()] },
                Block { round: 1, proposer: Some(0), txs: vec!["x2".into()] },
            ],
        };
        assert!(matches!(
            settle(&unsorted, &triples, &ConflictSpec::new(), &one_tx_rules()),
            Err(Error::MalformedOrdering(_))
        ));
    }

    #[test]
    fn multi_table_rules_add_up() {
        let t1 = BalanceTable::new(["a"])
            .entry([], Balances::from_pairs([("A", q(1, 1))]))
            .entry(["a"], Balances::from_pairs([("A", q(5, 1))]));
        let t2 = BalanceTable::new(["b"])
            .entry([], Balances::from_pairs([("B", q(2, 1))]))
            .entry(["b"], Balances::from_pairs([("A", q(1, 1)), ("B", q(0, 1))]));
        let rules = SettlementRules { tables: vec![t1, t2], payer: BTreeMap::new(), bounty: BTreeMap::new() };
        let p: Pattern = ["a", "b"].into_iter().map(TxId::from).collect();
        let b = rules.base_balance(&p).unwrap();
        assert_eq!(b.get(&"A".into()), q(6, 1));
        assert_eq!(b.get(&"B".into()), q(0, 1));
    }

    #[test]
    fn player_ids() {
        assert_eq!(miner_player(3).miner_index(), Some(3));
        assert_eq!(PlayerId::from("mallory").miner_index(), None);
        assert!(!PlayerId::from("A").is_miner());
    }
}
