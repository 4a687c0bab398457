use blockgame::cases::mev::*;
use blockgame::{validate_hashrate, HashrateDistribution, Rational, Scalar};

fn q(s: &str) -> Rational {
    Rational::parse_decimal(s).unwrap()
}

/// Splits of `total` tenths into `n` entries.
fn splits(n: usize, total: i64) -> Vec<Vec<i64>> {
    if n == 1 {
        return vec![vec![total]];
    }
    (0..=total)
        .flat_map(|k| {
            splits(n - 1, total - k).into_iter().map(move |mut r| {
                r.push(k);
                r
            })
        })
        .collect()
}

/// Hashrate vectors with `m` named miners, at least one of them active.
fn grids(m: usize) -> Vec<Vec<i64>> {
    splits(m + 1, 10).into_iter().filter(|g| g[1..].iter().any(|&k| k > 0)).collect()
}

fn lambda(tenths: &[i64]) -> HashrateDistribution<Rational> {
    validate_hashrate(&tenths.iter().map(|&k| Rational::ratio(k, 10)).collect::<Vec<_>>()).unwrap()
}

fn params(tenths: &[i64], s: &str, trusted: Option<usize>) -> MevParams<Rational> {
    MevParams { l: q("100"), s: q(s), f: q("1"), lambda: lambda(tenths), trusted }
}

#[test]
fn grid_covers_all_splits() {
    assert_eq!(grids(1).len(), 10);
    assert_eq!(grids(3).len(), 285);
}

#[test]
fn without_trusted_miner_everyone_sandwiches() {
    for m in 1..=3 {
        for g in grids(m) {
            for s in ["0", "1", "5"] {
                let r = mev_game(&params(&g, s, None)).unwrap();
                assert_eq!(r.best.user_utility, q("0"), "{g:?} s {s}");
                for c in &r.candidates {
                    assert!(c.equilibria.iter().all(|e| e.values().all(|&m| m == Move::D)), "{g:?} s {s}");
                }
                assert!(r.all_sandwich(None));
            }
        }
    }
}

#[test]
fn trusted_miner_gets_the_order() {
    for m in 1..=3 {
        for g in grids(m) {
            for (t, _) in g.iter().enumerate().filter(|(_, &k)| k > 0) {
                for s in ["0", "1", "5"] {
                    let r = mev_game(&params(&g, s, Some(t))).unwrap();
                    assert_eq!(r.best.share_set.iter().copied().collect::<Vec<_>>(), [t], "{g:?} s {s}");
                    assert_eq!(r.best.user_utility, q(s));
                    assert!(!r.constructs.contains(&t));
                }
            }
        }
    }
}

#[test]
fn zero_spread_leaves_miners_indifferent() {
    let r = mev_game(&params(&[5, 2, 3], "0", None)).unwrap();
    for c in r.candidates.iter().filter(|c| !c.share_set.is_empty()) {
        assert_eq!(c.indifferent, c.share_set.iter().copied().filter(|&j| j < 3).collect());
    }
    let r = mev_game(&params(&[5, 2, 3], "5", None)).unwrap();
    assert!(r.candidates.iter().all(|c| c.indifferent.is_empty() || c.share_set.iter().all(|&j| j == 0)));
}

#[test]
fn miner_payoffs_follow_proposer_odds() {
    let r = mev_game(&params(&[5, 2, 3], "5", None)).unwrap();
    let all = r.candidates.iter().find(|c| c.share_set.len() == 3).unwrap();
    // D earns f + s weighted by the chance of proposing
    assert_eq!(all.miner_utilities[&0], q("3"));
    assert_eq!(all.miner_utilities[&1], q("1.2"));
    assert_eq!(all.miner_utilities[&2], q("1.8"));
    assert_eq!(all.inclusion, q("1"));
    let none = r.candidates.iter().find(|c| c.share_set.is_empty()).unwrap();
    assert_eq!(none.inclusion, q("0"));
}

#[test]
fn rejects_bad_params() {
    assert!(mev_game(&MevParams { f: q("0"), ..params(&[5, 5], "1", None) }).is_err());
    assert!(mev_game(&MevParams { s: q("-1"), ..params(&[5, 5], "1", None) }).is_err());
    assert!(mev_game(&params(&[5, 5], "1", Some(4))).is_err());
}
