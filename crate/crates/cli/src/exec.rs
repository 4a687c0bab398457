//! Dispatch from parsed commands to the analysis library.

use std::collections::BTreeMap;

use blockgame::cases::crab::{crab_cheat, crab_completed, crab_safety, crab_tree, CrabParams};
use blockgame::cases::htlc::{htlc_analysis, named, HtlcParams, Reveal};
use blockgame::cases::mev::{mev_game, MevParams};
use blockgame::cases::two_htlc::{two_htlc_check, LinkMode};
use blockgame::cases::wormhole::{channel, wormhole_check};
use blockgame::comg::{
    best_response_oracle_with, censor_schedule_with, inclusion_probability, min_certain_timelock, simulate_race,
    switch_times, CensorSchedule, OracleConfig, RaceSpec, TieBreak,
};
use blockgame::compose::{check_ic, EtaVerdict, ICVerdict, IcConfig, Protocol, Witness};
use blockgame::doc::settlement_from_json;
use blockgame::extform::game_from_json;
use blockgame::{HashrateDistribution, Rational, Scalar};
use serde_json::{json, Map, Value};

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::params::Bindings;
use crate::report::{Provenance, Report, SweepRow};

/// Parameters and seed shared by every subcommand.
pub struct Context<'a> {
    pub config: Option<&'a Map<String, Value>>,
    pub seed: Option<u64>,
}

fn q(x: &Rational) -> Value {
    json!(x.to_repr())
}

fn depth(d: blockgame::comg::Depth) -> Value {
    d.finite().map_or_else(|| json!("inf"), |r| json!(r))
}

fn witness(w: &Witness<Rational>) -> Value {
    json!({
        "coalition": w.eta.members(&w.player).iter().map(|p| p.as_str()).collect::<Vec<_>>(),
        "player": w.player.as_str(),
        "kind": w.kind.as_str(),
        "gain": q(&w.gain),
        "path": w.path,
    })
}

fn opt_witness(w: &Option<Witness<Rational>>) -> Value {
    w.as_ref().map_or(Value::Null, witness)
}

fn eta_verdict(v: &EtaVerdict<Rational>) -> Value {
    json!({
        "eta": v.eta.to_string(),
        "holds": v.holds,
        "nash": v.nash,
        "strict": v.strict,
        "iewds": format!("{:?}", v.iewds),
        "witness": opt_witness(&v.witness),
    })
}

fn ic_verdict(v: &ICVerdict<Rational>) -> Value {
    json!({
        "holds": v.holds,
        "strict": v.strict,
        "witness": opt_witness(&v.witness),
        "per_eta": v.per_eta.iter().map(eta_verdict).collect::<Vec<_>>(),
    })
}

fn ties(b: &Bindings) -> CliResult<TieBreak> {
    Ok(match b.choice("ties", &["include", "censor"], "include")? {
        "censor" => TieBreak::Censor,
        _ => TieBreak::Include,
    })
}

fn reveal(b: &Bindings, key: &str, default: Reveal) -> CliResult<Reveal> {
    match b.opt_str(key) {
        None => Ok(default),
        Some("never") => Ok(Reveal::Never),
        Some(_) => Ok(Reveal::At(b.int(key)?)),
    }
}

fn race(b: &Bindings) -> CliResult<(HashrateDistribution<Rational>, Rational, Rational)> {
    Ok((b.lambda()?, b.scalar("f1")?, b.scalar("f2")?))
}

fn joined<T: std::fmt::Display>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn miners(lambda: &HashrateDistribution<Rational>) -> Value {
    json!((1..=lambda.m()).map(|j| lambda.original_index(j)).collect::<Vec<_>>())
}

fn schedule_json(s: &CensorSchedule<Rational>) -> Value {
    json!({
        "ell": s.ell,
        "rho": s.rho.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
        "r_star": s.r_star.iter().map(|d| depth(*d)).collect::<Vec<_>>(),
        "max_depth": depth(s.max_depth()),
        "miners": miners(&s.lambda),
    })
}

fn comg(cmd: &ComgCmd, ctx: &Context) -> CliResult<(String, Bindings, Value, Option<Vec<SweepRow>>, Option<u64>)> {
    match cmd {
        ComgCmd::Schedule(a) => {
            let b = Bindings::new(a, ctx.config)?;
            let (lambda, f1, f2) = race(&b)?;
            let s = censor_schedule_with(&lambda, &f1, &f2, ties(&b)?)?;
            let mut v = schedule_json(&s);
            if let Some(t) = b.opt_int::<u64>("T")? {
                v["switch_times"] = json!(switch_times(&s, t).iter().map(|x| x.to_string()).collect::<Vec<_>>());
            }
            Ok(("comg schedule".into(), b, v, None, ctx.seed))
        }
        ComgCmd::Prob(a) => {
            let b = Bindings::new(a, ctx.config)?;
            let (lambda, f1, f2) = race(&b)?;
            let t: u64 = b.int("T")?;
            let s = censor_schedule_with(&lambda, &f1, &f2, ties(&b)?)?;
            let p = inclusion_probability(&s, t);
            let v = json!({"T": t, "p": q(&p), "p_f64": p.as_f64()});
            Ok(("comg prob".into(), b, v, None, ctx.seed))
        }
        ComgCmd::MinTimelock(a) => {
            let b = Bindings::new(a, ctx.config)?;
            let (lambda, f1, f2) = race(&b)?;
            let v = json!({"min_timelock": depth(min_certain_timelock(&lambda, &f1, &f2)?)});
            Ok(("comg min-timelock".into(), b, v, None, ctx.seed))
        }
        ComgCmd::Oracle(a) => {
            let b = Bindings::new(a, ctx.config)?;
            let (lambda, f1, f2) = race(&b)?;
            let t: u64 = b.int("T")?;
            let ties = ties(&b)?;
            let cfg = OracleConfig { ties, max_rounds: b.int_or("max-rounds", OracleConfig::default().max_rounds)?, ..OracleConfig::default() };
            let spec = RaceSpec { lambda: lambda.clone(), f1: f1.clone(), f2: f2.clone(), t };
            let o = best_response_oracle_with(&spec, cfg)?;
            let s = censor_schedule_with(&lambda, &f1, &f2, ties)?;
            let analytic: Vec<u64> = switch_times(&s, t).iter().map(|x| x.clamped(t)).collect();
            let v = json!({
                "T": t,
                "switch_rounds": o.switch_rounds,
                "probability": q(&o.probability),
                "probability_f64": o.probability.as_f64(),
                "values": o.values.iter().map(q).collect::<Vec<_>>(),
                "censor_mass": o.censor_mass.iter().map(q).collect::<Vec<_>>(),
                "matches_schedule": analytic == o.switch_rounds && inclusion_probability(&s, t) == o.probability,
                "miners": miners(&lambda),
            });
            Ok(("comg oracle".into(), b, v, None, ctx.seed))
        }
        ComgCmd::Simulate(a) => {
            let b = Bindings::new(a, ctx.config)?;
            let (lambda, f1, f2) = race(&b)?;
            let t: u64 = b.int("T")?;
            let trials: u64 = b.int_or("trials", 100_000)?;
            let seed = ctx.seed.unwrap_or(0);
            let s = censor_schedule_with(&lambda, &f1, &f2, TieBreak::Include)?;
            let spec = RaceSpec { lambda, f1, f2, t };
            let est = simulate_race(&spec, &switch_times(&s, t), trials, seed)?;
            let p = inclusion_probability(&s, t).as_f64();
            let v = json!({
                "T": t,
                "trials": est.trials,
                "p_hat": est.p_hat,
                "se": est.se,
                "p_analytic": p,
                "within_3se": (est.p_hat - p).abs() <= 3.0 * est.se + 1e-12,
            });
            Ok(("comg simulate".into(), b, v, None, Some(seed)))
        }
        ComgCmd::Sweep(a) => {
            let b = Bindings::new(a, ctx.config)?;
            let (lambda, f1, f2) = race(&b)?;
            let t_min: u64 = b.int_or("t-min", 0)?;
            let t_max: u64 = b.int("t-max")?;
            let trials: u64 = b.int_or("trials", 10_000)?;
            let seed = ctx.seed.unwrap_or(0);
            let s = censor_schedule_with(&lambda, &f1, &f2, TieBreak::Include)?;
            let mut rows = Vec::new();
            for t in t_min..=t_max {
                let spec = RaceSpec { lambda: lambda.clone(), f1: f1.clone(), f2: f2.clone(), t };
                let sw = switch_times(&s, t);
                let est = simulate_race(&spec, &sw, trials, seed)?;
                let p_oracle = match best_response_oracle_with(&spec, OracleConfig::default()) {
                    Ok(o) => Some(o.probability.as_f64()),
                    Err(e) if e.kind() == blockgame::ErrorKind::Bound => None,
                    Err(e) => return Err(e.into()),
                };
                rows.push(SweepRow {
                    t,
                    p_analytic: inclusion_probability(&s, t).as_f64(),
                    p_oracle,
                    p_mc: est.p_hat,
                    se: est.se,
                    rho_i: joined(&s.rho),
                    tstar_i: joined(&sw),
                });
            }
            let v = json!({"t_min": t_min, "t_max": t_max, "trials": trials, "schedule": schedule_json(&s)});
            Ok(("comg sweep".into(), b, v, Some(rows), Some(seed)))
        }
    }
}

fn htlc(a: &HtlcArgs, ctx: &Context) -> CliResult<(Bindings, Value)> {
    let b = Bindings::new(a, ctx.config)?;
    let lambda = b.lambda()?;
    let t: u64 = b.int("T")?;
    let v = b.scalar("v")?;
    let mut p = HtlcParams::new(
        t,
        b.scalar_or("v-a", "0")?,
        b.scalar_or("v-b", "0")?,
        v.clone(),
        b.opt_scalar("cap-a")?.unwrap_or_else(|| v.clone()),
        b.opt_scalar("cap-b")?.unwrap_or_else(|| v.clone()),
    )
    .with_grid(b.int_or("grid", 4)?);
    p.t_s = reveal(&b, "ts", Reveal::At(0))?;
    p.t_e = b.int_or("te", t)?;
    if let Some(eps) = b.opt_scalar("eps")? {
        p.epsilon_open = eps;
    }
    let cfg = IcConfig { plan_bound: b.int_or("plan-bound", IcConfig::default().plan_bound)?, ..IcConfig::default() };
    let r = htlc_analysis(&p, &lambda, &cfg)?;
    let v = json!({
        "rho_m": depth(r.rho_m),
        "onset": r.onset,
        "ic": r.ic,
        "indifference": r.indifference,
        "reaches_share_update": r.reaches_share_update,
        "receiver_witness": opt_witness(&r.receiver_witness),
        "trace": r.trace.steps.iter().map(|s| s.label.clone()).collect::<Vec<_>>(),
        "ipb_utilities": named(&r.ipb_utilities),
        "verdict": ic_verdict(&r.verdict),
    });
    Ok((b, v))
}

fn two_htlc(a: &TwoHtlcArgs, ctx: &Context) -> CliResult<(Bindings, Value)> {
    let b = Bindings::new(a, ctx.config)?;
    let lambda = b.lambda()?;
    let (t1, t2): (u64, u64) = (b.int("t1")?, b.int("t2")?);
    let v1 = b.scalar_or("v1", "10")?;
    let v2 = b.opt_scalar("v2")?.unwrap_or_else(|| v1.clone());
    let cap = b.scalar_or("cap", "1")?;
    let bal = b.scalar_or("balance", "10")?;
    let grid = b.int_or("grid", 4)?;
    let mode = match b.choice("mode", &["dep", "ind"], "dep")? {
        "ind" => LinkMode::Independent(reveal(&b, "reveal", Reveal::At(0))?),
        _ => LinkMode::Dependent,
    };
    let mk = |t, v: &Rational| HtlcParams::new(t, bal.clone(), bal.clone(), v.clone(), cap.clone(), cap.clone()).with_grid(grid);
    let r = two_htlc_check(mode, &mk(t1, &v1), &mk(t2, &v2), &lambda, b.int_or("plan-bound", 0)?)?;
    let v = json!({
        "condition": r.condition,
        "t_star_1": r.t_star_1,
        "t_star_2": r.t_star_2,
        "deviation_found": r.deviation_found,
        "verdict": eta_verdict(&r.verdict),
    });
    Ok((b, v))
}

fn wormhole(a: &WormholeArgs, ctx: &Context) -> CliResult<(Bindings, Value)> {
    let b = Bindings::new(a, ctx.config)?;
    let lambda = b.lambda()?;
    let v2 = b.scalar("v2")?;
    let v3 = b.scalar("v3")?;
    let v1 = b.opt_scalar("v1")?.unwrap_or_else(|| v2.clone());
    let bal = b.scalar_or("balance", "5")?;
    let n = b.int_or("grid", 2)?;
    let p1 = channel(b.int_or("t1", 3)?, bal.clone(), bal.clone(), v1, n);
    let p2 = channel(b.int_or("t2", 2)?, bal.clone(), bal.clone(), v2, n);
    let p3 = channel(b.int_or("t3", 1)?, bal.clone(), bal, v3, n);
    let r = wormhole_check([&p1, &p2, &p3], &lambda)?;
    let v = json!({
        "gain": q(&r.gain),
        "ic": r.ic,
        "coalition_utility": q(&r.coalition_utility),
        "ipb_utilities": named(&r.ipb_utilities),
        "witness": opt_witness(&r.witness),
    });
    Ok((b, v))
}

fn crab_inputs(b: &Bindings) -> CliResult<(HashrateDistribution<Rational>, u64, Rational, Rational)> {
    Ok((b.lambda()?, b.int("T")?, b.scalar("c")?, b.scalar("v")?))
}

fn crab_safety_json(t: u64, c: &Rational, v: &Rational, lambda: &HashrateDistribution<Rational>) -> CliResult<Value> {
    let s = crab_safety(t, c, v, lambda)?;
    Ok(json!({"safe": s.safe, "depth": depth(s.depth), "min_safe_t": s.min_safe_t}))
}

fn crab_game(a: &CrabGameArgs, ctx: &Context) -> CliResult<(Bindings, Value)> {
    let b = Bindings::new(a, ctx.config)?;
    let (lambda, t, c, v) = crab_inputs(&b)?;
    let p = CrabParams::worst_case(t, c.clone(), v.clone(), b.int_or("bribe-steps", 20)?);
    let cheat = crab_cheat(&p, &lambda)?;
    let (game, ipb) = crab_completed(&p, &lambda)?;
    let (tree, _) = crab_tree(&p)?;
    let safety = crab_safety_json(t, &c, &v, &lambda)?;
    let value = json!({
        "cheat_found": cheat.is_some(),
        "witness": opt_witness(&cheat),
        "ipb_utilities": named(&game.utility(&ipb)?),
        "nodes": tree.len(),
        "consistent": !(safety["safe"] == json!(true) && cheat.is_some()),
        "safety": safety,
    });
    Ok((b, value))
}

fn crab_safety_cmd(a: &CrabArgs, ctx: &Context) -> CliResult<(Bindings, Value)> {
    let b = Bindings::new(a, ctx.config)?;
    let (lambda, t, c, v) = crab_inputs(&b)?;
    let value = crab_safety_json(t, &c, &v, &lambda)?;
    Ok((b, value))
}

fn mev(a: &MevArgs, ctx: &Context) -> CliResult<(Bindings, Value)> {
    let b = Bindings::new(a, ctx.config)?;
    let s = b.scalar("s")?;
    let p = MevParams {
        // the limit only bounds the spread
        l: b.opt_scalar("l")?.unwrap_or_else(|| s.clone()),
        s,
        f: b.scalar("f")?,
        lambda: b.lambda()?,
        trusted: b.opt_int("trusted")?,
    };
    let r = mev_game(&p)?;
    let moves = |m: &blockgame::cases::mev::MoveProfile| -> BTreeMap<String, String> {
        m.iter().map(|(j, mv)| (j.to_string(), format!("{mv:?}"))).collect()
    };
    let best = &r.best;
    let v = json!({
        "share_set": best.share_set,
        "user_utility": q(&best.user_utility),
        "p_honest": q(&best.p_honest),
        "inclusion": q(&best.inclusion),
        "selected": moves(&best.selected),
        "equilibria": best.equilibria.iter().map(moves).collect::<Vec<_>>(),
        "indifferent": best.indifferent,
        "miner_utilities": best.miner_utilities.iter().map(|(j, u)| (j.to_string(), q(u))).collect::<BTreeMap<_, _>>(),
        "constructs": r.constructs,
        "all_sandwich": r.all_sandwich(p.trusted),
    });
    Ok((b, v))
}

fn check_ic_cmd(a: &CheckIcArgs, ctx: &Context) -> CliResult<(Bindings, Value)> {
    let b = Bindings::new(a, ctx.config)?;
    let path = b.str("game")?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{path}: {e}")))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| blockgame::Error::MalformedDocument(e.to_string()))?;
    let game = doc.get("game").ok_or_else(|| blockgame::Error::MalformedDocument("missing `game`".into()))?;
    let (tree, ipb) = game_from_json::<Rational>(game)?;
    let settlement = settlement_from_json::<Rational>(doc.get("settlement").unwrap_or(&json!({})))?;
    let lambda = match (b.opt_str("lambda"), doc.get("lambda")) {
        (None, Some(l)) => {
            let xs = l
                .as_array()
                .ok_or_else(|| blockgame::Error::MalformedDocument("`lambda` must be an array".into()))?
                .iter()
                .map(blockgame::extform::scalar_from_json::<Rational>)
                .collect::<Result<Vec<_>, _>>()?;
            blockgame::validate_hashrate(&xs)?
        }
        _ => b.lambda()?,
    };
    let cfg = IcConfig {
        plan_bound: b.int_or("plan-bound", IcConfig::default().plan_bound)?,
        max_block: b.int_or("max-block", IcConfig::default().max_block)?,
        ..IcConfig::default()
    };
    let verdicts = check_ic(&Protocol::single(tree, ipb), &lambda, &settlement.rules, &settlement.conflicts, &cfg)?;
    let (_, verdict) = verdicts.into_iter().next().expect("one instance");
    Ok((b, ic_verdict(&verdict)))
}

/// Runs one parsed command.
pub fn execute(cmd: &Command, ctx: &Context) -> CliResult<Report> {
    let (name, b, result, rows, seed) = match cmd {
        Command::Comg(c) => comg(c, ctx)?,
        other => {
            let (name, (b, v)) = match other {
                Command::Htlc(HtlcCmd::Analyze(a)) => ("htlc analyze", htlc(a, ctx)?),
                Command::TwoHtlc(TwoHtlcCmd::Check(a)) => ("two-htlc check", two_htlc(a, ctx)?),
                Command::Wormhole(WormholeCmd::Check(a)) => ("wormhole check", wormhole(a, ctx)?),
                Command::Crab(CrabCmd::Game(a)) => ("crab game", crab_game(a, ctx)?),
                Command::Crab(CrabCmd::Safety(a)) => ("crab safety", crab_safety_cmd(a, ctx)?),
                Command::Mev(MevCmd::Solve(a)) => ("mev solve", mev(a, ctx)?),
                Command::Compose(ComposeCmd::CheckIc(a)) => ("compose check-ic", check_ic_cmd(a, ctx)?),
                Command::Comg(_) => unreachable!("handled above"),
            };
            (name.to_owned(), b, v, None, ctx.seed)
        }
    };
    Ok(Report {
        command: name,
        provenance: Provenance { inputs: b.inputs(), seed, version: env!("CARGO_PKG_VERSION").to_owned() },
        result,
        rows,
    })
}
