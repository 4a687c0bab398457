//! Incentive-compatibility verdicts.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::collusion::{enumerate_collusions, CollusionMap};
use super::complete::{collusion_reduce, complete, CompletedGame};
use super::iewds::{iewds, plan_of};
use super::protocol::Protocol;
use super::search::{outcome_hash, Deviator};
use crate::error::{Error, Result};
use crate::extform::{NodeId, StrategyProfile};
use crate::scalar::Scalar;
use crate::types::{ConflictSpec, HashrateDistribution, PlayerId, SettlementRules};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum WitnessKind {
    /// The deviation strictly improves the coalition.
    StrictGain,
    /// The intended plan is weakly dominated and was eliminated.
    Dominated,
    /// A different outcome gives the coalition exactly the intended utility.
    Indifference,
}

impl WitnessKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WitnessKind::StrictGain => "strict_gain",
            WitnessKind::Dominated => "dominated",
            WitnessKind::Indifference => "indifference",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witness<S> {
    pub eta: CollusionMap,
    /// Deviating coalition representative.
    pub player: PlayerId,
    pub kind: WitnessKind,
    pub gain: S,
    /// Moves of the deviating play, one line per step.
    pub path: Vec<String>,
    /// Slots changed relative to the intended profile.
    pub deviation: Vec<(NodeId, PlayerId, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IewdsStatus {
    Survived,
    Eliminated(PlayerId),
    /// The strategy tables were too large to build.
    Skipped(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EtaVerdict<S> {
    pub eta: CollusionMap,
    pub holds: bool,
    /// No coalition strictly gains by deviating.
    pub nash: bool,
    /// Nash and no coalition is indifferent to another outcome.
    pub strict: bool,
    pub iewds: IewdsStatus,
    pub witness: Option<Witness<S>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ICVerdict<S> {
    pub holds: bool,
    pub strict: bool,
    /// First failing witness, or the first indifference when it holds.
    pub witness: Option<Witness<S>>,
    pub per_eta: Vec<EtaVerdict<S>>,
}

#[derive(Clone, Debug)]
pub struct IcConfig {
    pub max_block: usize,
    /// Largest joint plan table built for elimination.
    pub plan_bound: u64,
    /// Collusion maps to check; all partitions when `None`.
    pub etas: Option<Vec<CollusionMap>>,
    /// Stop at the first collusion map that fails.
    pub stop_at_first: bool,
}

impl Default for IcConfig {
    fn default() -> Self {
        IcConfig { max_block: 4, plan_bound: 200_000, etas: None, stop_at_first: false }
    }
}

impl IcConfig {
    pub fn with_etas(etas: Vec<CollusionMap>) -> Self {
        IcConfig { etas: Some(etas), ..Self::default() }
    }
}

/// Formats the steps of a play.
pub fn describe_path<S: Scalar>(game: &CompletedGame<S>, profile: &StrategyProfile) -> Result<Vec<String>> {
    let play = game.tree().play(profile)?;
    Ok(play
        .steps
        .iter()
        .map(|s| {
            let round = s.round.map(|r| format!("t{r} ")).unwrap_or_default();
            match &s.actor {
                Some(a) => format!("{round}{a}: {}", s.label),
                None => format!("{round}{}", s.label),
            }
        })
        .collect())
}

/// Best unilateral deviation of coalition `rep`: a strict gain, an
/// equally good play with a different outcome, or `None`.
pub fn best_deviation<S: Scalar>(
    game: &CompletedGame<S>,
    ipb: &StrategyProfile,
    rep: &PlayerId,
) -> Result<Option<Witness<S>>> {
    let play = game.tree().play(ipb)?;
    let ipb_hash = outcome_hash(&play.emissions);
    let ipb_util = game.reduce(&game.evaluate(&play.emissions)?);
    let best = Deviator::new(game, ipb, game.members(rep)).best()?;
    let gain = best.value.clone() - ipb_util.get(rep);
    let kind = if gain.definitely_gt(&S::zero()) {
        WitnessKind::StrictGain
    } else if best.tied || outcome_hash(&best.emits) != ipb_hash {
        WitnessKind::Indifference
    } else {
        return Ok(None);
    };
    let deviation: Vec<(NodeId, PlayerId, usize)> =
        best.choices.iter().filter(|(n, p, a)| ipb.get(*n, p) != Some(*a)).cloned().collect();
    Ok(Some(Witness {
        eta: game.eta().clone(),
        player: rep.clone(),
        kind,
        gain,
        path: describe_path(game, &ipb.with(&deviation))?,
        deviation,
    }))
}

/// Checks the intended profile of an already reduced game.
pub fn check_eta<S: Scalar>(game: &CompletedGame<S>, ipb: &StrategyProfile, plan_bound: u64) -> Result<EtaVerdict<S>> {
    let eta = game.eta().clone();
    let owners: BTreeSet<PlayerId> = game.tree().slots().into_iter().map(|(_, p, _)| p).collect();

    let mut strict_gain: Option<Witness<S>> = None;
    let mut indifferent: Option<Witness<S>> = None;
    for r in game.reps() {
        if game.members(&r).is_disjoint(&owners) {
            continue;
        }
        match best_deviation(game, ipb, &r)? {
            Some(w) if w.kind == WitnessKind::StrictGain => {
                strict_gain.get_or_insert(w);
            }
            Some(w) => {
                indifferent.get_or_insert(w);
            }
            None => {}
        }
    }
    let nash = strict_gain.is_none();

    let status = match iewds(game, plan_bound) {
        Ok(res) => {
            let mut status = IewdsStatus::Survived;
            for (k, r) in res.reps.iter().enumerate() {
                let mine = plan_of(game.tree(), &game.members(r), ipb)?;
                let idx = res.plans[k].iter().position(|p| *p == mine).expect("intended plan is a plan");
                if !res.survives(k, idx) {
                    status = IewdsStatus::Eliminated(r.clone());
                    break;
                }
            }
            status
        }
        Err(e @ Error::EnumerationBoundExceeded(..)) => IewdsStatus::Skipped(e.to_string()),
        Err(e) => return Err(e),
    };
    let eliminated = matches!(status, IewdsStatus::Eliminated(_));
    let witness = match (&strict_gain, &status) {
        (Some(w), _) => Some(w.clone()),
        (None, IewdsStatus::Eliminated(r)) => Some(Witness {
            eta: eta.clone(),
            player: r.clone(),
            kind: WitnessKind::Dominated,
            gain: S::zero(),
            path: indifferent.as_ref().map(|w| w.path.clone()).unwrap_or_default(),
            deviation: indifferent
                .as_ref()
                .filter(|w| &w.player == r)
                .map(|w| w.deviation.clone())
                .unwrap_or_default(),
        }),
        _ => indifferent.clone(),
    };
    Ok(EtaVerdict {
        eta,
        holds: nash && !eliminated,
        nash,
        strict: nash && indifferent.is_none(),
        iewds: status,
        witness,
    })
}

/// Checks a completed game under every requested collusion map.
pub fn check_game<S: Scalar>(game: &CompletedGame<S>, ipb: &StrategyProfile, cfg: &IcConfig) -> Result<ICVerdict<S>> {
    let etas = match &cfg.etas {
        Some(e) => e.clone(),
        None => {
            let players: BTreeSet<PlayerId> = game.participants().difference(&game.miners()).cloned().collect();
            enumerate_collusions(&players, &game.miners(), cfg.max_block)?
        }
    };
    let mut per_eta = Vec::with_capacity(etas.len());
    for eta in etas {
        let reduced = collusion_reduce(game, eta)?;
        let v = check_eta(&reduced, ipb, cfg.plan_bound)?;
        let stop = cfg.stop_at_first && !v.holds;
        per_eta.push(v);
        if stop {
            break;
        }
    }
    let holds = per_eta.iter().all(|v| v.holds);
    let strict = per_eta.iter().all(|v| v.strict);
    let witness = per_eta
        .iter()
        .find(|v| !v.holds)
        .or_else(|| per_eta.iter().find(|v| !v.strict))
        .and_then(|v| v.witness.clone());
    Ok(ICVerdict { holds, strict, witness, per_eta })
}

/// Verdict per parameter of a protocol.
pub fn check_ic<S: Scalar, P: Ord + Clone>(
    protocol: &Protocol<S, P>,
    lambda: &HashrateDistribution<S>,
    rules: &SettlementRules<S>,
    conflicts: &ConflictSpec,
    cfg: &IcConfig,
) -> Result<Vec<(P, ICVerdict<S>)>> {
    let rules = Arc::new(rules.clone());
    let conflicts = Arc::new(conflicts.clone());
    let mut out = Vec::new();
    for (p, inst) in protocol.instances() {
        let game = complete(inst.tree.clone(), lambda.clone(), rules.clone(), conflicts.clone())?;
        out.push((p.clone(), check_game(&game, &inst.ipb, cfg)?));
    }
    Ok(out)
}
