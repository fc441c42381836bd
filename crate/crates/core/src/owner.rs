//! The data-owner response procedure.
//!
//! For every candidate it was handed, an owner writes `1` if the candidate
//! occurs in its local data and `0` otherwise, then adds a fresh noise share
//! `X − Y` to that entry. Entries for candidates it was not handed stay
//! exactly zero; those are protected by masking, not by noise.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::Distribution;
use thiserror::Error;

use crate::patterns::{LocalData, Pattern, PatternError};
use crate::privacy::{NoiseParams, OwnerNoiseSampler, PrivacyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OwnerError {
    #[error("assignment of {assigned} candidates exceeds the budget K = {budget}")]
    OverBudget { assigned: usize, budget: usize },
    #[error("candidate index {index} assigned twice")]
    DuplicateIndex { index: usize },
    #[error("candidate index {index} outside round vector of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("candidate {0} was already answered by this owner")]
    RepeatCandidate(Pattern),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
}

/// The candidates one owner must answer this round, with their global
/// indices in the round's response vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateAssignment {
    entries: Vec<(usize, Pattern)>,
    round_vector_len: usize,
}

impl CandidateAssignment {
    pub fn new(entries: Vec<(usize, Pattern)>, round_vector_len: usize) -> Result<Self, OwnerError> {
        let mut seen = BTreeSet::new();
        for (index, _) in &entries {
            if *index >= round_vector_len {
                return Err(OwnerError::IndexOutOfRange { index: *index, len: round_vector_len });
            }
            if !seen.insert(*index) {
                return Err(OwnerError::DuplicateIndex { index: *index });
            }
        }
        Ok(CandidateAssignment { entries, round_vector_len })
    }

    pub fn empty(round_vector_len: usize) -> Self {
        CandidateAssignment { entries: Vec::new(), round_vector_len }
    }

    pub fn entries(&self) -> &[(usize, Pattern)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn round_vector_len(&self) -> usize {
        self.round_vector_len
    }
}

/// One owner's pre-masking upload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseVector(pub Vec<i64>);

impl std::ops::Deref for ResponseVector {
    type Target = [i64];

    fn deref(&self) -> &[i64] {
        &self.0
    }
}

/// Source of per-entry noise shares.
pub trait NoiseShare {
    fn draw(&mut self) -> i64;
}

/// `X − Y` with `X, Y ~ Pólya(1/P, e^(−ε/K))`.
pub struct DistributedNoise<R> {
    sampler: OwnerNoiseSampler,
    rng: R,
}

impl<R: Rng> DistributedNoise<R> {
    pub fn new(params: &NoiseParams, rng: R) -> Result<Self, PrivacyError> {
        Ok(DistributedNoise { sampler: OwnerNoiseSampler::new(params)?, rng })
    }
}

impl<R: Rng> NoiseShare for DistributedNoise<R> {
    fn draw(&mut self) -> i64 {
        self.sampler.sample(&mut self.rng)
    }
}

/// Zero noise, for oracle-agreement runs and tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoNoise;

impl NoiseShare for NoNoise {
    fn draw(&mut self) -> i64 {
        0
    }
}

/// Builds the response vector with an arbitrary noise source. `budget` is
/// the per-owner cap `K` on candidates in one response.
pub fn respond_with<N: NoiseShare + ?Sized>(
    data: &LocalData,
    assignment: &CandidateAssignment,
    budget: usize,
    noise: &mut N,
) -> Result<ResponseVector, OwnerError> {
    if assignment.len() > budget {
        return Err(OwnerError::OverBudget { assigned: assignment.len(), budget });
    }
    let mut out = vec![0i64; assignment.round_vector_len];
    for (index, pattern) in &assignment.entries {
        let present = data.contains(pattern)?;
        out[*index] = i64::from(present) + noise.draw();
    }
    Ok(ResponseVector(out))
}

/// Builds the response vector with distributed Pólya noise drawn from `rng`.
pub fn respond<R: Rng>(
    data: &LocalData,
    assignment: &CandidateAssignment,
    noise: &NoiseParams,
    rng: R,
) -> Result<ResponseVector, OwnerError> {
    let mut source = DistributedNoise::new(noise, rng)?;
    respond_with(data, assignment, noise.k, &mut source)
}

/// Owner-side lifetime accounting: at most `K` distinct candidates, each
/// answered once, across every round the owner takes part in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OwnerLedger {
    budget: usize,
    responded: BTreeSet<Pattern>,
}

impl OwnerLedger {
    pub fn new(budget: usize) -> Self {
        OwnerLedger { budget, responded: BTreeSet::new() }
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.responded.len()
    }

    pub fn has_responded(&self, pattern: &Pattern) -> bool {
        self.responded.contains(pattern)
    }

    pub fn responded(&self) -> &BTreeSet<Pattern> {
        &self.responded
    }

    /// Records `assignment` against the budget, or rejects it untouched.
    pub fn charge(&mut self, assignment: &CandidateAssignment) -> Result<(), OwnerError> {
        if assignment.len() > self.remaining() {
            return Err(OwnerError::OverBudget {
                assigned: self.responded.len() + assignment.len(),
                budget: self.budget,
            });
        }
        if let Some((_, p)) = assignment.entries.iter().find(|(_, p)| self.responded.contains(p)) {
            return Err(OwnerError::RepeatCandidate(p.clone()));
        }
        self.responded.extend(assignment.entries.iter().map(|(_, p)| p.clone()));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::PatternKind;
    use crate::seeding::rng_from_seed;

    fn set(ids: &[u32]) -> Pattern {
        Pattern::itemset(ids.iter().copied()).unwrap()
    }

    #[test]
    fn empty_assignment_is_all_zero() {
        let data = LocalData::new(PatternKind::Itemset, vec![1, 2]);
        let params = NoiseParams::new(2.0, 50, 1000).unwrap();
        let r = respond(&data, &CandidateAssignment::empty(6), &params, rng_from_seed(1)).unwrap();
        assert_eq!(r.0, vec![0; 6]);
    }

    #[test]
    fn noise_free_response_indicates_presence() {
        let data = LocalData::new(PatternKind::Itemset, vec![1, 2, 3]);
        let a = CandidateAssignment::new(vec![(0, set(&[1, 2])), (2, set(&[4]))], 4).unwrap();
        let r = respond_with(&data, &a, 50, &mut NoNoise).unwrap();
        assert_eq!(r.0, vec![1, 0, 0, 0]);
    }

    #[test]
    fn unassigned_entries_stay_zero_under_noise() {
        let data = LocalData::new(PatternKind::Itemset, vec![1, 2, 3]);
        let a = CandidateAssignment::new(vec![(1, set(&[1])), (3, set(&[9]))], 5).unwrap();
        let params = NoiseParams::new(2.0, 5, 2).unwrap();
        for seed in 0..200 {
            let r = respond(&data, &a, &params, rng_from_seed(seed)).unwrap();
            assert_eq!((r[0], r[2], r[4]), (0, 0, 0));
        }
    }

    #[test]
    fn budget_and_index_errors() {
        let data = LocalData::new(PatternKind::Itemset, vec![1]);
        let a = CandidateAssignment::new(vec![(0, set(&[1])), (1, set(&[2]))], 2).unwrap();
        assert_eq!(
            respond_with(&data, &a, 1, &mut NoNoise).unwrap_err(),
            OwnerError::OverBudget { assigned: 2, budget: 1 }
        );
        assert_eq!(
            CandidateAssignment::new(vec![(0, set(&[1])), (0, set(&[2]))], 2).unwrap_err(),
            OwnerError::DuplicateIndex { index: 0 }
        );
        assert_eq!(
            CandidateAssignment::new(vec![(2, set(&[1]))], 2).unwrap_err(),
            OwnerError::IndexOutOfRange { index: 2, len: 2 }
        );
        let wrong_kind = CandidateAssignment::new(vec![(0, Pattern::item(1))], 1).unwrap();
        assert!(matches!(respond_with(&data, &wrong_kind, 5, &mut NoNoise), Err(OwnerError::Pattern(_))));
    }

    #[test]
    fn ledger_enforces_lifetime_budget() {
        let mut ledger = OwnerLedger::new(3);
        let a = CandidateAssignment::new(vec![(0, set(&[1])), (1, set(&[2]))], 2).unwrap();
        ledger.charge(&a).unwrap();
        assert_eq!(ledger.remaining(), 1);
        let again = CandidateAssignment::new(vec![(0, set(&[2]))], 1).unwrap();
        assert_eq!(ledger.charge(&again).unwrap_err(), OwnerError::RepeatCandidate(set(&[2])));
        let two = CandidateAssignment::new(vec![(0, set(&[3])), (1, set(&[4]))], 2).unwrap();
        assert!(matches!(ledger.charge(&two), Err(OwnerError::OverBudget { .. })));
        let one = CandidateAssignment::new(vec![(0, set(&[3]))], 1).unwrap();
        ledger.charge(&one).unwrap();
        assert_eq!(ledger.remaining(), 0);
    }
}
