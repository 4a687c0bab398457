//! Finite extensive-form application games and their strategy profiles.

mod json;
mod tree;

pub use json::{emission_from_json, emission_to_json, game_from_json, game_to_json, scalar_from_json};
pub use tree::{
    fee_grid, grid_between, joint_choice, joint_index, Action, Emission, GameTree, JointOutcome, Mover, Node,
    NodeId, Play, Step, StrategyProfile, TreeBuilder,
};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{PlayerId, TransactionTriple};

/// Default cap on the number of enumerated profiles.
pub const DEFAULT_PROFILE_BOUND: u64 = 10_000_000;

/// Triples emitted when every player follows `profile`.
pub fn outcome<S: Scalar>(tree: &GameTree<S>, profile: &StrategyProfile) -> Result<Vec<TransactionTriple<S>>> {
    Ok(tree.play(profile)?.emissions.into_iter().map(|e| e.triple).collect())
}

/// Lazy iterator over every pure profile of a game.
#[derive(Clone, Debug)]
pub struct ProfileIter {
    slots: Vec<(NodeId, PlayerId, usize)>,
    digits: Vec<usize>,
    done: bool,
}

impl Iterator for ProfileIter {
    type Item = StrategyProfile;

    fn next(&mut self) -> Option<StrategyProfile> {
        if self.done {
            return None;
        }
        let mut p = StrategyProfile::new();
        for ((n, pl, _), d) in self.slots.iter().zip(&self.digits) {
            p.set(*n, pl, *d);
        }
        // mixed-radix increment
        self.done = true;
        for k in (0..self.digits.len()).rev() {
            self.digits[k] += 1;
            if self.digits[k] < self.slots[k].2 {
                self.done = false;
                break;
            }
            self.digits[k] = 0;
        }
        Some(p)
    }
}

/// All pure profiles, failing when there are more than `bound`.
pub fn enumerate_profiles<S: Scalar>(tree: &GameTree<S>, bound: u64) -> Result<ProfileIter> {
    let count = tree.profile_count();
    if count > bound as u128 {
        return Err(Error::EnumerationBoundExceeded(format!("{count} profiles"), bound));
    }
    let slots = tree.slots();
    let digits = vec![0; slots.len()];
    Ok(ProfileIter { slots, digits, done: false })
}
