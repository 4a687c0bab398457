//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use blockgame::cases::crab::crab_safety;
use blockgame::cases::htlc::{deviation_onset, htlc_analysis, HtlcParams};
use blockgame::cases::mev::{mev_game, MevParams, Move};
use blockgame::cases::two_htlc::{t_star, theorem3_condition, two_htlc_check, LinkMode};
use blockgame::cases::wormhole::{channel, wormhole_check};
use blockgame::comg::*;
use blockgame::compose::{random_small_protocol, theorem1_harness, Component, IcConfig};
use blockgame::{validate_hashrate, Error, HashrateDistribution, Rational, Scalar};
use blockgame_cli::report::{flatten, from_json, pairs_from_csv, sweep_from_csv, to_json};
use blockgame_cli::run;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn q(s: &str) -> Rational {
    Rational::parse_decimal(s).unwrap()
}

fn tenths(n: i64) -> Rational {
    Rational::ratio(n, 10)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixture_lambda() -> HashrateDistribution<Rational> {
    validate_hashrate(&[q("0.5"), q("0.2"), q("0.3")]).unwrap()
}

/// Ascending named-miner splits of `total` tenths.
fn partitions(total: u32, parts: usize, min: u32, out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>) {
    if parts == 0 {
        if total == 0 {
            out.push(cur.clone());
        }
        return;
    }
    for x in min..=total {
        if x * parts as u32 > total {
            break;
        }
        cur.push(x);
        partitions(total - x, parts - 1, x, out, cur);
        cur.pop();
    }
}

/// Hashrate grid with `m ≤ 3`, step 0.1 and `λ_0 ∈ {0, 0.2, 0.5}`.
fn comg_grid() -> Vec<Vec<u32>> {
    let mut all = Vec::new();
    for l0 in [0u32, 2, 5] {
        for m in 1..=3 {
            let mut out = Vec::new();
            partitions(10 - l0, m, 1, &mut out, &mut Vec::new());
            all.extend(out.into_iter().map(|mut v| {
                v.insert(0, l0);
                v
            }));
        }
    }
    all
}

fn exact(v: &[u32]) -> HashrateDistribution<Rational> {
    validate_hashrate(&v.iter().map(|&x| tenths(x as i64)).collect::<Vec<_>>()).unwrap()
}

fn float(v: &[u32]) -> HashrateDistribution<f64> {
    validate_hashrate(&v.iter().map(|&x| x as f64 / 10.0).collect::<Vec<_>>()).unwrap()
}

fn c1_oracle_equivalence() -> Check {
    let mut cases = 0;
    for v in comg_grid() {
        let (le, lf) = (exact(&v), float(&v));
        for k in 1..=19i64 {
            let f1 = Rational::ratio(k, 20);
            let sched = censor_schedule(&lf, &(k as f64 / 20.0), &1.0).map_err(|e| e.to_string())?;
            for t in 1..=6u64 {
                let spec = RaceSpec { lambda: le.clone(), f1: f1.clone(), f2: q("1"), t };
                let o = best_response_oracle(&spec).map_err(|e| e.to_string())?;
                let sw: Vec<u64> = switch_times(&sched, t).iter().map(|s| s.clamped(t)).collect();
                ensure(sw == o.switch_rounds, || format!("{v:?} f1/f2={k}/20 T={t}: {sw:?} vs {:?}", o.switch_rounds))?;
                let p = inclusion_probability(&sched, t);
                ensure((p - o.probability.as_f64()).abs() <= 1e-9, || format!("{v:?} f1/f2={k}/20 T={t}: p {p}"))?;
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} cases"))
}

fn c2_monte_carlo() -> Check {
    let grid = comg_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for i in 0..10u64 {
        let v = &grid[rng.gen_range(0..grid.len())];
        let k = rng.gen_range(1..=19i64);
        let t = rng.gen_range(1..=6u64);
        let sched = censor_schedule(&float(v), &(k as f64 / 20.0), &1.0).map_err(|e| e.to_string())?;
        let p = inclusion_probability(&sched, t);
        let spec = RaceSpec { lambda: exact(v), f1: Rational::ratio(k, 20), f2: q("1"), t };
        let mc = simulate_race(&spec, &switch_times(&sched, t), 100_000, i).map_err(|e| e.to_string())?;
        let dev = (mc.p_hat - p).abs();
        ensure(dev <= 3.0 * mc.se, || format!("{v:?} f1/f2={k}/20 T={t}: p̂ {} vs {p}, se {}", mc.p_hat, mc.se))?;
        if mc.se > 0.0 {
            worst = worst.max(dev / mc.se);
        }
    }
    Ok(format!("10 configs, max |p̂ − p|/SE = {worst:.2}"))
}

fn c3_crab_safety() -> Check {
    let lambda = validate_hashrate(&[q("0"), q("0.5"), q("0.5")]).unwrap();
    let mut cases = 0;
    for v in ["1", "10"] {
        for k in 1..=19i64 {
            let c = q(v) * Rational::ratio(k, 20);
            for t in 1..=10 {
                let s = crab_safety(t, &c, &q(v), &lambda).map_err(|e| e.to_string())?;
                ensure(s.safe == (k > 10), || format!("c/v={k}/20 v={v} T={t}: safe={}", s.safe))?;
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} cases, boundary c/v = 1/2 unsafe"))
}

fn c4_boundary_facts() -> Check {
    let mut grids = 0;
    for v in comg_grid() {
        let le = exact(&v);
        for k in 1..=19i64 {
            let sched = censor_schedule(&le, &Rational::ratio(k, 20), &q("1")).map_err(|e| e.to_string())?;
            ensure(inclusion_probability(&sched, 0) == q("0"), || format!("{v:?} {k}/20: p(0) ≠ 0"))?;
            let mut prev = q("0");
            for t in 0..=8 {
                let p = inclusion_probability(&sched, t);
                ensure(p >= prev, || format!("{v:?} {k}/20: p decreases at T={t}"))?;
                prev = p;
            }
            if let Some(d) = sched.max_depth().finite() {
                let p = inclusion_probability(&sched, d + 1);
                ensure(p == q("1"), || format!("{v:?} {k}/20: p(⌈ρ_m⌉+1) = {}", p.to_repr()))?;
            }
            grids += 1;
        }
    }
    Ok(format!("{grids} schedules"))
}

fn c5_wormhole() -> Check {
    let lambda = fixture_lambda();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut found = 0;
    for _ in 0..50 {
        let (v2, v3) = (tenths(rng.gen_range(1..40)), tenths(rng.gen_range(1..40)));
        let (a, b) = (tenths(rng.gen_range(0..50)), tenths(rng.gen_range(0..50)));
        let p1 = channel(3, a.clone(), b.clone(), v2.clone(), 2);
        let p2 = channel(2, b.clone(), a.clone(), v2.clone(), 2);
        let p3 = channel(1, a.clone(), a, v3.clone(), 2);
        let r = wormhole_check([&p1, &p2, &p3], &lambda).map_err(|e| e.to_string())?;
        let deviation = r.gain > q("0");
        ensure(deviation == (v2 > v3), || format!("v2={} v3={}: deviation={deviation}", v2.to_repr(), v3.to_repr()))?;
        if deviation {
            let w = r.witness.as_ref().ok_or("missing witness")?;
            ensure(w.gain == v2.clone() - v3.clone(), || format!("v2={} v3={}: gain {}", v2.to_repr(), v3.to_repr(), w.gain.to_repr()))?;
            found += 1;
        }
    }
    Ok(format!("50 vectors, {found} with a deviation"))
}

fn c6_two_htlc() -> Check {
    let lambda = fixture_lambda();
    let chan = |t| HtlcParams::new(t, q("10"), q("10"), q("10"), q("1"), q("1")).with_grid(4);
    let e = |e: Error| e.to_string();
    ensure(theorem3_condition(&chan(5), &chan(5), &lambda).map_err(e)?, || "condition false at (5,5)".into())?;
    ensure(!theorem3_condition(&chan(3), &chan(5), &lambda).map_err(e)?, || "condition true at (3,5)".into())?;
    let mut mismatches = Vec::new();
    for t1 in 1..=4 {
        for t2 in 1..=4 {
            let r = two_htlc_check(LinkMode::Dependent, &chan(t1), &chan(t2), &lambda, 0).map_err(e)?;
            if r.deviation_found == r.condition {
                mismatches.push(format!("({t1},{t2}) condition={} deviation={}", r.condition, r.deviation_found));
            }
        }
    }
    let ts = t_star(&lambda, &q("1"), &q("10"), 4).map_err(e)?;
    ensure(mismatches.is_empty(), || format!("t*(4)={ts:?}; deviation ≠ ¬condition at {}", mismatches.join(", ")))?;
    Ok("(5,5) true, (3,5) false, 16 small horizons agree".into())
}

fn c7_htlc() -> Check {
    let lambda = fixture_lambda();
    let e = |e: Error| e.to_string();
    let p = HtlcParams::new(0, q("5"), q("5"), q("10"), q("10"), q("10")).with_grid(4);
    let r = htlc_analysis(&p, &lambda, &IcConfig::default()).map_err(e)?;
    ensure(!r.ic && r.indifference, || format!("T=0: ic={} indifference={}", r.ic, r.indifference))?;
    let mut late = 0;
    for t in 1..=4u64 {
        let p = HtlcParams::new(t, q("5"), q("5"), q("10"), q("10"), q("1")).with_grid(4);
        let (depth, onset) = deviation_onset(&lambda, &q("1"), &q("10"), t).map_err(e)?;
        let r = htlc_analysis(&p, &lambda, &IcConfig::default()).map_err(e)?;
        let expected = depth.finite().map(|d| t as i64 - d as i64);
        ensure(r.onset == expected && onset == expected, || format!("T={t}: onset {:?}, expected {expected:?}", r.onset))?;
        if expected.is_some_and(|s| s > 0) {
            ensure(r.reaches_share_update, || format!("T={t}: rational play misses (share, update)"))?;
            late += 1;
        }
    }
    for cap in ["0.5", "1", "2", "4"] {
        for t in 2..=5u64 {
            let (depth, onset) = deviation_onset(&lambda, &q(cap), &q("10"), t).map_err(e)?;
            let o = best_response_oracle(&RaceSpec { lambda: lambda.clone(), f1: q(cap), f2: q("10"), t }).map_err(e)?;
            if depth.finite().is_some_and(|d| d <= t) {
                let switch = *o.switch_rounds.last().unwrap() as i64;
                ensure(onset == Some(switch), || format!("cap {cap} T={t}: onset {onset:?} vs oracle {switch}"))?;
            }
        }
    }
    ensure(late > 0, || "no timelock with t*_m > 0".into())?;
    Ok(format!("T=0 not IC with indifference; {late} timelocks reach (share, update)"))
}

fn c8_composition() -> Check {
    let lambda = validate_hashrate(&[q("0.5"), q("0.5")]).unwrap();
    let cfg = IcConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut done, mut skipped, mut profiles) = (0, 0, 0);
    while done < 200 {
        let (p1, r1, c1) = random_small_protocol(&mut rng, "a", &["A", "B"]).map_err(|e| e.to_string())?;
        let (p2, r2, c2) = random_small_protocol(&mut rng, "b", &["B", "C"]).map_err(|e| e.to_string())?;
        let comp1 = Component { protocol: &p1, rules: &r1, conflicts: &c1 };
        let comp2 = Component { protocol: &p2, rules: &r2, conflicts: &c2 };
        match theorem1_harness(comp1, comp2, &(), &lambda, &cfg) {
            Ok(rep) => {
                ensure(rep.composed_ic, || format!("pair {done}: composed not IC: {:?}", rep.counterexample))?;
                ensure(rep.additive, || format!("pair {done}: utilities not additive: {:?}", rep.counterexample))?;
                profiles += rep.profiles_checked;
                done += 1;
            }
            // a component that is not IC is resampled
            Err(Error::PreconditionFailed(_)) => skipped += 1,
            Err(e) => return Err(e.to_string()),
        }
        ensure(skipped < 100_000, || "too few IC components sampled".into())?;
    }
    Ok(format!("200 IC pairs ({skipped} non-IC draws resampled), {profiles} profiles additive"))
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

fn c9_mev() -> Check {
    let mut cases = 0;
    for m in 1..=3 {
        for g in splits(m + 1, 10).into_iter().filter(|g| g[1..].iter().any(|&k| k > 0)) {
            let lambda = validate_hashrate(&g.iter().map(|&k| tenths(k)).collect::<Vec<_>>()).unwrap();
            let params = |s: &str, trusted| MevParams { l: q("100"), s: q(s), f: q("1"), lambda: lambda.clone(), trusted };
            for s in ["0", "1", "5"] {
                let r = mev_game(&params(s, None)).map_err(|e| e.to_string())?;
                ensure(r.best.user_utility == q("0"), || format!("{g:?} s={s}: user utility {}", r.best.user_utility.to_repr()))?;
                let all_d = r.candidates.iter().all(|c| c.equilibria.iter().all(|e| e.values().all(|&mv| mv == Move::D)));
                ensure(all_d, || format!("{g:?} s={s}: an equilibrium has an honest miner"))?;
                for t in (0..g.len()).filter(|&t| g[t] > 0) {
                    let r = mev_game(&params(s, Some(t))).map_err(|e| e.to_string())?;
                    let set: Vec<usize> = r.best.share_set.iter().copied().collect();
                    ensure(set == [t], || format!("{g:?} s={s} trusted {t}: share set {set:?}"))?;
                    ensure(r.best.user_utility == q(s), || format!("{g:?} s={s} trusted {t}: utility {}", r.best.user_utility.to_repr()))?;
                    cases += 1;
                }
            }
        }
    }
    Ok(format!("{cases} trusted cases over m ≤ 3"))
}

fn cli(args: &str) -> Result<String, String> {
    let out = run(std::iter::once("blockgame").chain(args.split_whitespace()));
    ensure(out.code == 0, || format!("`{args}` exited {}: {}", out.code, out.stderr))?;
    Ok(out.stdout)
}

fn c10_determinism() -> Check {
    let lam = "--lambda 0.5,0.2,0.3";
    let fixtures = format!("{}/tests/fixtures", env!("CARGO_MANIFEST_DIR"));
    let sweep = format!("comg sweep {lam} --f1 1 --f2 10 --t-max 5 --trials 2000 --seed 7");
    ensure(cli(&sweep)? == cli(&sweep)?, || "seeded sweep differs between runs".into())?;
    let csv = cli(&format!("{sweep} --format csv"))?;
    let rows = sweep_from_csv(&csv).map_err(|e| e.to_string())?;
    let report = from_json(&cli(&sweep)?).map_err(|e| e.to_string())?;
    ensure(report.rows.as_ref() == Some(&rows), || "sweep CSV rows differ from JSON rows".into())?;
    let commands = [
        format!("comg schedule {lam} --f1 1 --f2 10 --T 4"),
        format!("comg prob {lam} --f1 1 --f2 10 --T 2"),
        format!("comg min-timelock {lam} --f1 1 --f2 10"),
        format!("comg oracle {lam} --f1 1 --f2 10 --T 3"),
        format!("comg simulate {lam} --f1 1 --f2 10 --T 2 --trials 1000 --seed 3"),
        format!("htlc analyze {lam} --T 0 --v 10 --v-a 5 --v-b 5"),
        format!("two-htlc check {lam} --t1 3 --t2 5 --grid 2"),
        format!("wormhole check {lam} --v2 1.1 --v3 1"),
        "crab safety --lambda 0,0.5,0.5 --c 0.6 --v 1 --T 1".to_string(),
        "crab game --lambda 0,0.5,0.5 --T 1 --c 0.3 --v 1 --bribe-steps 10".to_string(),
        format!("mev solve {lam} --s 5 --f 1 --trusted 1"),
        format!("compose check-ic --game {fixtures}/trade_ic.json"),
        format!("compose check-ic --game {fixtures}/trade_not_ic.json"),
    ];
    for cmd in &commands {
        let json = cli(cmd)?;
        ensure(json == cli(cmd)?, || format!("`{cmd}` output differs between runs"))?;
        let report = from_json(&json).map_err(|e| format!("{cmd}: {e}"))?;
        ensure(to_json(&report) == json, || format!("`{cmd}` JSON round trip changed the report"))?;
        let pairs = pairs_from_csv(&cli(&format!("{cmd} --format csv"))?).map_err(|e| format!("{cmd}: {e}"))?;
        ensure(pairs == flatten(&report), || format!("`{cmd}` CSV differs from JSON"))?;
    }
    Ok(format!("{} reports round-trip, seeded output byte-identical", commands.len() + 1))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("COMG oracle equivalence", c1_oracle_equivalence),
        ("Monte-Carlo consistency", c2_monte_carlo),
        ("CRAB safety threshold", c3_crab_safety),
        ("inclusion probability boundary facts", c4_boundary_facts),
        ("wormhole deviation gain", c5_wormhole),
        ("two-HTLC timelock condition", c6_two_htlc),
        ("single HTLC claims", c7_htlc),
        ("composition preserves IC", c8_composition),
        ("MEV share sets", c9_mev),
        ("determinism and serialization", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of 10 criteria pass", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
