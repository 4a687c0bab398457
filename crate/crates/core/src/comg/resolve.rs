//! Resolution of a general triple set into a distribution over orderings.

use std::collections::{BTreeMap, BTreeSet};

use crate::comg::schedule::{censor_schedule, switch_times, SwitchTime};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{
    validate_triples, Block, ConflictSpec, HashrateDistribution, Ordering, OutcomeDistribution, ResolverNote,
    Round, TransactionTriple, TxId,
};

/// Resolves with miner rewards equal to the posted fees.
pub fn resolve_triples<S: Scalar>(
    triples: &[TransactionTriple<S>],
    conflicts: &ConflictSpec,
    lambda: &HashrateDistribution<S>,
) -> Result<OutcomeDistribution<S>> {
    resolve_triples_with_bounty(triples, conflicts, lambda, &BTreeMap::new())
}

struct Race {
    cheap: TxId,
    dear: TxId,
    start: Round,
    end: Round,
    switch: Vec<SwitchTime>,
}

struct Coin {
    a: TxId,
    b: TxId,
    round: Round,
}

/// Resolves a triple set. `bounty` adds miner-claimable value on top of a
/// transaction's fee when miners rank conflicting transactions.
pub fn resolve_triples_with_bounty<S: Scalar>(
    triples: &[TransactionTriple<S>],
    conflicts: &ConflictSpec,
    lambda: &HashrateDistribution<S>,
    bounty: &BTreeMap<TxId, S>,
) -> Result<OutcomeDistribution<S>> {
    validate_triples(triples)?;
    conflicts.validate()?;
    for set in &conflicts.conflict_sets {
        if set.len() > 2 {
            return Err(Error::UnsupportedConflictArity(set.len()));
        }
    }
    let by_id: BTreeMap<&TxId, &TransactionTriple<S>> = triples.iter().map(|t| (&t.tx, t)).collect();
    let avail = |t: &TransactionTriple<S>| t.post_time.max(conflicts.validity_of(&t.tx));
    let reward = |t: &TransactionTriple<S>| t.fee.clone() + bounty.get(&t.tx).cloned().unwrap_or_else(S::zero);

    let mut singles: BTreeMap<Round, Vec<TxId>> = BTreeMap::new();
    let mut races = Vec::new();
    let mut coins = Vec::new();
    let mut notes = Vec::new();
    let mut paired: BTreeSet<&TxId> = BTreeSet::new();

    for set in &conflicts.conflict_sets {
        let present: Vec<&TransactionTriple<S>> = set.iter().filter_map(|x| by_id.get(x).copied()).collect();
        if present.len() < 2 {
            continue;
        }
        let (x, y) = (present[0], present[1]);
        paired.insert(&x.tx);
        paired.insert(&y.tx);
        let (ax, ay) = (avail(x), avail(y));
        if ax == ay {
            let (rx, ry) = (reward(x), reward(y));
            if rx == ry {
                coins.push(Coin { a: x.tx.clone(), b: y.tx.clone(), round: ax });
            } else {
                let w = if rx > ry { x } else { y };
                singles.entry(ax).or_default().push(w.tx.clone());
            }
            continue;
        }
        let (first, second) = if ax < ay { (x, y) } else { (y, x) };
        let (a1, a2) = (avail(first), avail(second));
        let (r1, r2) = (reward(first), reward(second));
        if second.post_time > a1 || r2 <= r1 {
            if second.post_time <= a1 && r2 == r1 {
                notes.push(ResolverNote::EqualRewardRace { immediate: first.tx.clone(), delayed: second.tx.clone() });
            }
            singles.entry(a1).or_default().push(first.tx.clone());
            continue;
        }
        let window = a2 - a1;
        let switch = if r1.is_zero() {
            vec![SwitchTime::NegInfinity; lambda.m()]
        } else {
            switch_times(&censor_schedule(lambda, &r1, &r2)?, window)
        };
        races.push(Race { cheap: first.tx.clone(), dear: second.tx.clone(), start: a1, end: a2, switch });
    }
    for t in triples {
        if !paired.contains(&t.tx) {
            singles.entry(avail(t)).or_default().push(t.tx.clone());
        }
    }

    let mut rounds: BTreeSet<Round> = singles.keys().copied().collect();
    rounds.extend(coins.iter().map(|c| c.round));
    for r in &races {
        rounds.extend(r.start..=r.end);
    }

    let rewarded: BTreeSet<TxId> = triples.iter().filter(|t| reward(t).is_positive()).map(|t| t.tx.clone()).collect();
    let half = S::ratio(1, 2);
    let lam = lambda.values();

    // state: mined blocks so far and which races are settled
    let mut states: BTreeMap<(Vec<Block>, Vec<bool>), S> = BTreeMap::new();
    states.insert((Vec::new(), vec![false; races.len()]), S::one());
    for &round in &rounds {
        let mut next: BTreeMap<(Vec<Block>, Vec<bool>), S> = BTreeMap::new();
        let base: Vec<TxId> = singles.get(&round).cloned().unwrap_or_default();
        // coin flips of this round, expanded into weighted deterministic sets
        let mut flips: Vec<(Vec<TxId>, S)> = vec![(base, S::one())];
        for c in coins.iter().filter(|c| c.round == round) {
            flips = flips
                .into_iter()
                .flat_map(|(set, p)| {
                    let mut with_a = set.clone();
                    with_a.push(c.a.clone());
                    let mut with_b = set;
                    with_b.push(c.b.clone());
                    [(with_a, p.clone() * half.clone()), (with_b, p * half.clone())]
                })
                .collect();
        }
        for ((blocks, done), p) in states {
            for (fixed, pf) in &flips {
                // group proposers by the block they would build
                let mut groups: BTreeMap<(Vec<TxId>, Vec<bool>), Vec<usize>> = BTreeMap::new();
                for (j, w) in lam.iter().enumerate() {
                    if w.is_zero() {
                        continue;
                    }
                    let mut txs = fixed.clone();
                    let mut settled = done.clone();
                    for (k, race) in races.iter().enumerate() {
                        if done[k] || round < race.start || round > race.end {
                            continue;
                        }
                        if round == race.end {
                            txs.push(race.dear.clone());
                            settled[k] = true;
                        } else if j == 0 || race.switch[j - 1].includes_at(round - race.start) {
                            txs.push(race.cheap.clone());
                            settled[k] = true;
                        }
                    }
                    txs.sort();
                    groups.entry((txs, settled)).or_default().push(j);
                }
                for ((txs, settled), miners) in groups {
                    let needs_identity = txs.iter().any(|t| rewarded.contains(t));
                    let mut push = |proposer: Option<usize>, w: S| {
                        let mut b = blocks.clone();
                        if !txs.is_empty() {
                            b.push(Block { round, proposer, txs: txs.clone() });
                        }
                        let e = next.entry((b, settled.clone())).or_insert_with(S::zero);
                        *e = e.clone() + p.clone() * pf.clone() * w;
                    };
                    if needs_identity {
                        for &j in &miners {
                            push(Some(j), lam[j].clone());
                        }
                    } else {
                        let w = miners.iter().fold(S::zero(), |a, &j| a + lam[j].clone());
                        push(None, w);
                    }
                }
            }
        }
        states = next;
    }

    let mut merged: BTreeMap<Ordering, S> = BTreeMap::new();
    for ((blocks, _), p) in states {
        let e = merged.entry(Ordering { blocks }).or_insert_with(S::zero);
        *e = e.clone() + p;
    }
    notes.sort();
    Ok(OutcomeDistribution { support: merged.into_iter().collect(), notes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use crate::types::validate_hashrate;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn lam() -> HashrateDistribution<Rational> {
        validate_hashrate(&[q(1, 2), q(1, 5), q(3, 10)]).unwrap()
    }

    fn tx(s: &str) -> TxId {
        TxId::from(s)
    }

    #[test]
    fn earlier_visible_wins() {
        let t = vec![TransactionTriple::new("x1", 0, q(1, 1)), TransactionTriple::new("x2", 3, q(5, 1))];
        let d = resolve_triples(&t, &ConflictSpec::new().with_pair("x1", "x2"), &lam()).unwrap();
        assert_eq!(d.prob_confirmed(&tx("x1")), q(1, 1));
        assert!(d.support.iter().all(|(o, _)| o.round_of(&tx("x1")) == Some(0)));
        assert_eq!(d.total(), q(1, 1));
    }

    #[test]
    fn equal_fee_tie_splits() {
        let t = vec![TransactionTriple::new("x1", 4, q(2, 1)), TransactionTriple::new("x2", 4, q(2, 1))];
        let d = resolve_triples(&t, &ConflictSpec::new().with_pair("x1", "x2"), &lam()).unwrap();
        assert_eq!(d.prob_confirmed(&tx("x1")), q(1, 2));
        assert_eq!(d.prob_confirmed(&tx("x2")), q(1, 2));
    }

    #[test]
    fn timelocked_race() {
        let t = vec![TransactionTriple::new("x1", 0, q(1, 1)), TransactionTriple::new("x2", 0, q(10, 1))];
        let c = ConflictSpec::new().with_pair("x1", "x2").with_validity("x2", 2);
        let d = resolve_triples(&t, &c, &lam()).unwrap();
        assert_eq!(d.prob_confirmed(&tx("x1")), q(17, 20));
        assert_eq!(d.prob_confirmed(&tx("x2")), q(3, 20));
        assert_eq!(d.total(), q(1, 1));
        assert!(d.notes.is_empty());
    }

    #[test]
    fn equal_reward_race_is_flagged() {
        let t = vec![TransactionTriple::new("x1", 0, q(3, 1)), TransactionTriple::new("x2", 0, q(3, 1))];
        let c = ConflictSpec::new().with_pair("x1", "x2").with_validity("x2", 2);
        let d = resolve_triples(&t, &c, &lam()).unwrap();
        assert_eq!(d.prob_confirmed(&tx("x1")), q(1, 1));
        assert_eq!(d.notes.len(), 1);
    }

    #[test]
    fn zero_fee_cheap_side_only_small_miners_include() {
        let t = vec![TransactionTriple::new("x1", 0, q(0, 1)), TransactionTriple::new("x2", 0, q(1, 1))];
        let c = ConflictSpec::new().with_pair("x1", "x2").with_validity("x2", 2);
        let d = resolve_triples(&t, &c, &lam()).unwrap();
        assert_eq!(d.prob_confirmed(&tx("x1")), q(3, 4));
    }

    #[test]
    fn independent_singles_and_proposers() {
        let t = vec![TransactionTriple::new("a", 0, q(1, 1)), TransactionTriple::new("b", 2, q(0, 1))];
        let d = resolve_triples(&t, &ConflictSpec::new(), &lam()).unwrap();
        // a is fee-bearing: one entry per proposer; b is free
        assert_eq!(d.support.len(), 3);
        assert_eq!(d.prob_confirmed(&tx("b")), q(1, 1));
        assert_eq!(d.total(), q(1, 1));
    }

    #[test]
    fn arity_and_overlap_errors() {
        let t = vec![
            TransactionTriple::new("a", 0, q(1, 1)),
            TransactionTriple::new("b", 0, q(1, 1)),
            TransactionTriple::new("c", 0, q(1, 1)),
        ];
        let mut c = ConflictSpec::new();
        c.conflict_sets.push(["a", "b", "c"].into_iter().map(TxId::from).collect());
        assert_eq!(resolve_triples(&t, &c, &lam()).unwrap_err(), Error::UnsupportedConflictArity(3));
        let c = ConflictSpec::new().with_pair("a", "b").with_pair("b", "c");
        assert!(matches!(resolve_triples(&t, &c, &lam()), Err(Error::OverlappingConflictSets(_))));
    }

    #[test]
    fn bounty_counts_as_reward() {
        // the cheap side pays no fee but carries a bounty above λ_2·f2
        let t = vec![TransactionTriple::new("p", 0, q(0, 1)), TransactionTriple::new("s", 0, q(1, 1))];
        let c = ConflictSpec::new().with_pair("p", "s").with_validity("s", 3);
        let b: BTreeMap<TxId, Rational> = [(tx("p"), q(1, 2))].into_iter().collect();
        let d = resolve_triples_with_bounty(&t, &c, &lam(), &b).unwrap();
        assert_eq!(d.prob_confirmed(&tx("p")), q(1, 1));
    }
}
