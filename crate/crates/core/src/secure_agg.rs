//! Simulated secure aggregation with cancelling pairwise masks.
//!
//! Owners are joined by a random near-regular graph. Every edge carries a
//! shared seed; the lower endpoint adds the seed's expansion to its upload and
//! the higher endpoint subtracts it, so all masks cancel in the ring sum and
//! the analyst only recovers the total. Self masks, secret sharing and
//! dropout recovery are not simulated: every session owner must upload.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use thiserror::Error;

use crate::seeding::rng_from_seed;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AggregationError {
    #[error("cannot give {owners} owners {degree} neighbours each")]
    InfeasibleDegree { degree: usize, owners: usize },
    #[error("owner {0} listed twice")]
    DuplicateOwner(u64),
    #[error("owner {0} is not part of the session")]
    UnknownOwner(u64),
    #[error("vector length {got} does not match session length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("owner {0} did not upload (dropouts are not supported)")]
    MissingOwner(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Edge {
    low: usize,
    high: usize,
    seed: u64,
}

/// One round's aggregation setup. Immutable once built.
#[derive(Debug, Clone)]
pub struct AggregationSession {
    owner_ids: Vec<u64>,
    position: BTreeMap<u64, usize>,
    edges: Vec<Edge>,
    incident: Vec<Vec<usize>>,
    vector_len: usize,
}

/// An owner's upload: its response embedded in `Z/2^64` plus its masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedVector {
    pub owner_id: u64,
    pub entries: Vec<u64>,
}

/// `2·ceil(log2 n)` neighbours, clamped to what `n` owners allow.
pub fn default_degree(owners: usize) -> usize {
    if owners < 2 {
        return 0;
    }
    let log = (owners as f64).log2().ceil() as usize;
    (2 * log).clamp(1, owners - 1)
}

impl AggregationSession {
    /// Builds a Harary-style near-regular graph over a shuffled ring: every
    /// owner gets `degree` neighbours, except that when both `degree` and the
    /// owner count are odd a single owner gets one extra.
    pub fn build<R: Rng + ?Sized>(
        owner_ids: Vec<u64>,
        degree: usize,
        vector_len: usize,
        rng: &mut R,
    ) -> Result<Self, AggregationError> {
        let n = owner_ids.len();
        let mut position = BTreeMap::new();
        for (i, &id) in owner_ids.iter().enumerate() {
            if position.insert(id, i).is_some() {
                return Err(AggregationError::DuplicateOwner(id));
            }
        }
        if n >= 2 && (degree == 0 || degree >= n) {
            return Err(AggregationError::InfeasibleDegree { degree, owners: n });
        }

        let mut ring: Vec<usize> = (0..n).collect();
        ring.shuffle(rng);
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        if n >= 2 {
            for offset in 1..=degree / 2 {
                for i in 0..n {
                    pairs.push((ring[i], ring[(i + offset) % n]));
                }
            }
            if degree % 2 == 1 {
                if n % 2 == 0 {
                    for i in 0..n / 2 {
                        pairs.push((ring[i], ring[i + n / 2]));
                    }
                } else {
                    let half = n.div_ceil(2);
                    for i in 0..half {
                        pairs.push((ring[i], ring[(i + half) % n]));
                    }
                }
            }
        }
        let mut edges: Vec<Edge> = pairs
            .into_iter()
            .map(|(a, b)| Edge { low: a.min(b), high: a.max(b), seed: 0 })
            .collect();
        edges.sort_by_key(|e| (e.low, e.high));
        edges.dedup_by_key(|e| (e.low, e.high));
        for e in &mut edges {
            e.seed = rng.next_u64();
        }
        let mut incident = vec![Vec::new(); n];
        for (idx, e) in edges.iter().enumerate() {
            incident[e.low].push(idx);
            incident[e.high].push(idx);
        }
        Ok(AggregationSession { owner_ids, position, edges, incident, vector_len })
    }

    pub fn owner_ids(&self) -> &[u64] {
        &self.owner_ids
    }

    pub fn vector_len(&self) -> usize {
        self.vector_len
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Neighbour count of `owner_id`.
    pub fn degree_of(&self, owner_id: u64) -> Option<usize> {
        self.position.get(&owner_id).map(|&i| self.incident[i].len())
    }

    /// Neighbour ids of `owner_id`, sorted.
    pub fn neighbours(&self, owner_id: u64) -> Option<Vec<u64>> {
        let &i = self.position.get(&owner_id)?;
        let mut out: Vec<u64> = self.incident[i]
            .iter()
            .map(|&e| {
                let edge = self.edges[e];
                self.owner_ids[if edge.low == i { edge.high } else { edge.low }]
            })
            .collect();
        out.sort_unstable();
        Some(out)
    }

    /// Replaces the seed shared by `a` and `b`. Returns false when they are not
    /// neighbours.
    pub fn set_edge_seed(&mut self, a: u64, b: u64, seed: u64) -> bool {
        let (Some(&i), Some(&j)) = (self.position.get(&a), self.position.get(&b)) else {
            return false;
        };
        let (low, high) = (i.min(j), i.max(j));
        match self.edges.iter_mut().find(|e| e.low == low && e.high == high) {
            Some(e) => {
                e.seed = seed;
                true
            }
            None => false,
        }
    }

    /// Embeds `response` in the ring and applies the owner's pairwise masks.
    pub fn mask(&self, response: &[i64], owner_id: u64) -> Result<MaskedVector, AggregationError> {
        let &me = self.position.get(&owner_id).ok_or(AggregationError::UnknownOwner(owner_id))?;
        if response.len() != self.vector_len {
            return Err(AggregationError::LengthMismatch { expected: self.vector_len, got: response.len() });
        }
        // Two's-complement embedding of signed entries.
        let mut entries: Vec<u64> = response.iter().map(|&v| v as u64).collect();
        for &e in &self.incident[me] {
            let edge = self.edges[e];
            let mut prg = rng_from_seed(edge.seed);
            if edge.low == me {
                for x in entries.iter_mut() {
                    *x = x.wrapping_add(prg.next_u64());
                }
            } else {
                for x in entries.iter_mut() {
                    *x = x.wrapping_sub(prg.next_u64());
                }
            }
        }
        Ok(MaskedVector { owner_id, entries })
    }

    /// Ring-sums one upload per owner and maps the result back to signed
    /// integers.
    pub fn aggregate(&self, masked: &[MaskedVector]) -> Result<Vec<i64>, AggregationError> {
        let mut seen = vec![false; self.owner_ids.len()];
        let mut total = vec![0u64; self.vector_len];
        for m in masked {
            let &i = self.position.get(&m.owner_id).ok_or(AggregationError::UnknownOwner(m.owner_id))?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(AggregationError::DuplicateOwner(m.owner_id));
            }
            if m.entries.len() != self.vector_len {
                return Err(AggregationError::LengthMismatch { expected: self.vector_len, got: m.entries.len() });
            }
            for (t, &x) in total.iter_mut().zip(&m.entries) {
                *t = t.wrapping_add(x);
            }
        }
        if let Some(i) = seen.iter().position(|&s| !s) {
            return Err(AggregationError::MissingOwner(self.owner_ids[i]));
        }
        Ok(total.into_iter().map(|x| x as i64).collect())
    }
}

/// Free-function forms of the session API.
pub fn build_session<R: Rng + ?Sized>(
    owner_ids: Vec<u64>,
    neighbors_per_owner: usize,
    vector_len: usize,
    rng: &mut R,
) -> Result<AggregationSession, AggregationError> {
    AggregationSession::build(owner_ids, neighbors_per_owner, vector_len, rng)
}

pub fn mask(response: &[i64], session: &AggregationSession, owner_id: u64) -> Result<MaskedVector, AggregationError> {
    session.mask(response, owner_id)
}

pub fn aggregate(masked: &[MaskedVector], session: &AggregationSession) -> Result<Vec<i64>, AggregationError> {
    session.aggregate(masked)
}
