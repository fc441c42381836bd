//! Pattern representation, containment, Apriori candidate generation and the
//! exact levelwise miner.
//!
//! Three mining flavours share one [`Pattern`] type:
//!
//! * `Item`: a single item id; all items are candidates from the start and
//!   nothing is ever generated from them.
//! * `Itemset`: a strictly increasing list of ids, contained in an owner's
//!   data when every id is present.
//! * `Sequence`: an ordered list of ids, contained when it occurs as a
//!   *contiguous* run of the owner's sequence. Contiguity is what makes the
//!   suffix/prefix join (`a→b` + `b→c` ⇒ `a→b→c`) anti-monotone.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Default cap on pattern cardinality / length.
pub const DEFAULT_MAX_LENGTH: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PatternError {
    #[error("pattern kind {pattern} does not match data kind {data}")]
    KindMismatch { pattern: PatternKind, data: PatternKind },
    #[error("a pattern needs at least one element")]
    Empty,
    #[error("an item pattern holds exactly one element, got {0}")]
    ItemArity(usize),
    #[error("item id {id} outside universe of size {size}")]
    OutOfUniverse { id: u32, size: u32 },
    #[error("max_length must be at least 1")]
    ZeroMaxLength,
    #[error("frequency threshold {0} outside [0, 1]")]
    InvalidFrequency(f64),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("cannot parse pattern `{0}`")]
    Parse(String),
}

/// Which family of patterns is being mined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    Item,
    Itemset,
    Sequence,
}

impl PatternKind {
    pub const ALL: [PatternKind; 3] = [PatternKind::Item, PatternKind::Itemset, PatternKind::Sequence];

    /// Whether local data of this kind is a set (as opposed to an ordered sequence).
    pub fn is_set(self) -> bool {
        !matches!(self, PatternKind::Sequence)
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PatternKind::Item => "item",
            PatternKind::Itemset => "itemset",
            PatternKind::Sequence => "sequence",
        })
    }
}

impl FromStr for PatternKind {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "item" => Ok(PatternKind::Item),
            "itemset" => Ok(PatternKind::Itemset),
            "sequence" => Ok(PatternKind::Sequence),
            other => Err(PatternError::Parse(other.to_string())),
        }
    }
}

/// A candidate or mined pattern in canonical form.
///
/// Ordering is by kind, then length, then elements lexicographically; this is
/// the canonical order used for every tie-break in the crate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pattern {
    kind: PatternKind,
    elements: Vec<u32>,
}

impl Pattern {
    pub fn item(id: u32) -> Self {
        Pattern { kind: PatternKind::Item, elements: vec![id] }
    }

    /// Builds an itemset, sorting and deduplicating the ids.
    pub fn itemset<I: IntoIterator<Item = u32>>(ids: I) -> Result<Self, PatternError> {
        let mut elements: Vec<u32> = ids.into_iter().collect();
        elements.sort_unstable();
        elements.dedup();
        if elements.is_empty() {
            return Err(PatternError::Empty);
        }
        Ok(Pattern { kind: PatternKind::Itemset, elements })
    }

    pub fn sequence<I: IntoIterator<Item = u32>>(ids: I) -> Result<Self, PatternError> {
        let elements: Vec<u32> = ids.into_iter().collect();
        if elements.is_empty() {
            return Err(PatternError::Empty);
        }
        Ok(Pattern { kind: PatternKind::Sequence, elements })
    }

    pub fn new(kind: PatternKind, ids: Vec<u32>) -> Result<Self, PatternError> {
        match kind {
            PatternKind::Item => match ids.as_slice() {
                [id] => Ok(Pattern::item(*id)),
                other => Err(PatternError::ItemArity(other.len())),
            },
            PatternKind::Itemset => Pattern::itemset(ids),
            PatternKind::Sequence => Pattern::sequence(ids),
        }
    }

    /// The single-element pattern of `kind` for `id`.
    pub fn singleton(kind: PatternKind, id: u32) -> Self {
        Pattern { kind, elements: vec![id] }
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    pub fn elements(&self) -> &[u32] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Largest item id referenced by the pattern.
    pub fn max_id(&self) -> u32 {
        self.elements.iter().copied().max().unwrap_or(0)
    }

    /// The Apriori parents of this pattern: every size-(n−1) subset for an
    /// itemset, the length-(n−1) prefix and suffix for a sequence, and nothing
    /// for an item or any single-element pattern.
    pub fn immediate_subpatterns(&self) -> Vec<Pattern> {
        let n = self.elements.len();
        if n <= 1 {
            return Vec::new();
        }
        match self.kind {
            PatternKind::Item => Vec::new(),
            PatternKind::Itemset => {
                // Removing elements from last to first yields canonical order.
                (0..n)
                    .rev()
                    .map(|skip| {
                        let elements = self
                            .elements
                            .iter()
                            .enumerate()
                            .filter(|&(i, _)| i != skip)
                            .map(|(_, &e)| e)
                            .collect();
                        Pattern { kind: PatternKind::Itemset, elements }
                    })
                    .collect()
            }
            PatternKind::Sequence => {
                let prefix = Pattern { kind: PatternKind::Sequence, elements: self.elements[..n - 1].to_vec() };
                let suffix = Pattern { kind: PatternKind::Sequence, elements: self.elements[1..].to_vec() };
                if prefix == suffix {
                    vec![prefix]
                } else {
                    let mut subs = vec![prefix, suffix];
                    subs.sort();
                    subs
                }
            }
        }
    }
}

impl Ord for Pattern {
    fn cmp(&self, other: &Self) -> Ordering {
        self.kind
            .cmp(&other.kind)
            .then_with(|| self.elements.len().cmp(&other.elements.len()))
            .then_with(|| self.elements.cmp(&other.elements))
    }
}

impl PartialOrd for Pattern {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `7` for an item, `{1,2,3}` for an itemset, `[1,2,3]` for a sequence.
impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>| -> fmt::Result {
            for (i, e) in self.elements.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{e}")?;
            }
            Ok(())
        };
        match self.kind {
            PatternKind::Item => write!(f, "{}", self.elements[0]),
            PatternKind::Itemset => {
                f.write_str("{")?;
                join(f)?;
                f.write_str("}")
            }
            PatternKind::Sequence => {
                f.write_str("[")?;
                join(f)?;
                f.write_str("]")
            }
        }
    }
}

impl FromStr for Pattern {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || PatternError::Parse(s.to_string());
        let parse_list = |body: &str| -> Result<Vec<u32>, PatternError> {
            body.split(',').map(|t| t.trim().parse::<u32>().map_err(|_| bad())).collect()
        };
        if let Some(body) = s.strip_prefix('{').and_then(|b| b.strip_suffix('}')) {
            let ids = parse_list(body)?;
            // Non-canonical input would not round-trip.
            if ids.windows(2).any(|w| w[0] >= w[1]) {
                return Err(bad());
            }
            Pattern::itemset(ids)
        } else if let Some(body) = s.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
            Pattern::sequence(parse_list(body)?)
        } else {
            s.parse::<u32>().map(Pattern::item).map_err(|_| bad())
        }
    }
}

impl Serialize for Pattern {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Pattern {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One owner's private data: a set of items, or one ordered sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LocalData {
    kind: PatternKind,
    payload: Vec<u32>,
}

impl LocalData {
    /// Set kinds are sorted and deduplicated; sequences keep their order.
    pub fn new(kind: PatternKind, mut payload: Vec<u32>) -> Self {
        if kind.is_set() {
            payload.sort_unstable();
            payload.dedup();
        }
        LocalData { kind, payload }
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    pub fn payload(&self) -> &[u32] {
        &self.payload
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }

    pub fn contains(&self, pattern: &Pattern) -> Result<bool, PatternError> {
        if self.kind != pattern.kind {
            return Err(PatternError::KindMismatch { pattern: pattern.kind, data: self.kind });
        }
        Ok(self.contains_unchecked(pattern))
    }

    pub(crate) fn contains_unchecked(&self, pattern: &Pattern) -> bool {
        let needle = pattern.elements();
        match self.kind {
            PatternKind::Item | PatternKind::Itemset => {
                needle.iter().all(|id| self.payload.binary_search(id).is_ok())
            }
            PatternKind::Sequence => {
                needle.len() <= self.payload.len() && self.payload.windows(needle.len()).any(|w| w == needle)
            }
        }
    }
}

/// Free-function form of [`LocalData::contains`].
pub fn contains(data: &LocalData, pattern: &Pattern) -> Result<bool, PatternError> {
    data.contains(pattern)
}

/// The space being mined: `size` item ids `0..size`, one pattern kind, and a
/// cap on pattern length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternUniverse {
    pub size: u32,
    pub kind: PatternKind,
    pub max_length: usize,
}

impl PatternUniverse {
    /// A zero-size universe is accepted and simply has no patterns.
    pub fn new(size: u32, kind: PatternKind, max_length: usize) -> Result<Self, PatternError> {
        if max_length == 0 {
            return Err(PatternError::ZeroMaxLength);
        }
        Ok(PatternUniverse { size, kind, max_length })
    }

    pub fn with_default_length(size: u32, kind: PatternKind) -> Self {
        PatternUniverse { size, kind, max_length: DEFAULT_MAX_LENGTH }
    }

    /// Longest admissible pattern; items are always length one.
    pub fn effective_max_length(&self) -> usize {
        match self.kind {
            PatternKind::Item => 1,
            _ => self.max_length,
        }
    }

    pub fn admits(&self, pattern: &Pattern) -> bool {
        pattern.kind == self.kind
            && pattern.len() <= self.effective_max_length()
            && pattern.elements.iter().all(|&e| e < self.size)
    }

    pub fn check_data(&self, data: &LocalData) -> Result<(), PatternError> {
        if data.kind != self.kind {
            return Err(PatternError::KindMismatch { pattern: self.kind, data: data.kind });
        }
        match data.payload.iter().find(|&&id| id >= self.size) {
            Some(&id) => Err(PatternError::OutOfUniverse { id, size: self.size }),
            None => Ok(()),
        }
    }
}

/// Patterns that cannot be generated from anything else: every
/// single-element pattern of the universe, in canonical order.
pub fn basic_patterns(universe: &PatternUniverse) -> Vec<Pattern> {
    (0..universe.size).map(|id| Pattern::singleton(universe.kind, id)).collect()
}

/// Apriori generation with an explored-set lookup.
///
/// Returns every pattern not yet explored, within the length cap, whose
/// immediate subpatterns are all accepted. Item mining never generates.
pub fn generate_candidates_with<F>(
    accepted: &BTreeSet<Pattern>,
    is_explored: F,
    universe: &PatternUniverse,
) -> BTreeSet<Pattern>
where
    F: Fn(&Pattern) -> bool,
{
    let mut out = BTreeSet::new();
    let max_len = universe.effective_max_length();
    if universe.kind == PatternKind::Item {
        return out;
    }
    let mut by_len: BTreeMap<usize, Vec<&Pattern>> = BTreeMap::new();
    for p in accepted.iter().filter(|p| p.kind == universe.kind && universe.admits(p)) {
        by_len.entry(p.len()).or_default().push(p);
    }
    let mut keep = |candidate: Pattern| {
        if candidate.len() <= max_len
            && !is_explored(&candidate)
            && candidate.immediate_subpatterns().iter().all(|s| accepted.contains(s))
        {
            out.insert(candidate);
        }
    };
    for (&len, level) in &by_len {
        if len >= max_len {
            continue;
        }
        // Both joins group level-`len` patterns by a shared (len-1)-slice.
        let mut by_prefix: BTreeMap<&[u32], Vec<&Pattern>> = BTreeMap::new();
        for p in level {
            by_prefix.entry(&p.elements[..len - 1]).or_default().push(p);
        }
        match universe.kind {
            PatternKind::Itemset => {
                for group in by_prefix.values() {
                    for (i, a) in group.iter().enumerate() {
                        for b in &group[i + 1..] {
                            let (x, y) = (a.elements[len - 1], b.elements[len - 1]);
                            let mut elements = a.elements.clone();
                            elements.push(x.max(y));
                            elements[len - 1] = x.min(y);
                            keep(Pattern { kind: PatternKind::Itemset, elements });
                        }
                    }
                }
            }
            PatternKind::Sequence => {
                for a in level {
                    if let Some(group) = by_prefix.get(&a.elements[1..]) {
                        for b in group {
                            let mut elements = a.elements.clone();
                            elements.push(b.elements[len - 1]);
                            keep(Pattern { kind: PatternKind::Sequence, elements });
                        }
                    }
                }
            }
            PatternKind::Item => unreachable!(),
        }
    }
    out
}

/// Apriori generation against an explicit explored set.
pub fn generate_candidates(
    accepted: &BTreeSet<Pattern>,
    already_explored: &BTreeSet<Pattern>,
    universe: &PatternUniverse,
) -> BTreeSet<Pattern> {
    generate_candidates_with(accepted, |p| already_explored.contains(p), universe)
}

/// Integer support threshold `ceil(f·n)`, floored at 1 so that `f = 0`
/// means "present in at least one owner".
pub fn support_threshold(f: f64, n: usize) -> usize {
    // Absorb representation error such as 0.3 * 10 = 3.0000000000000004.
    let raw = (f * n as f64 - 1e-9).ceil();
    (raw.max(1.0)) as usize
}

/// Number of owners whose data contains `pattern`.
pub fn support(dataset: &[LocalData], pattern: &Pattern) -> usize {
    dataset.iter().filter(|d| d.kind == pattern.kind && d.contains_unchecked(pattern)).count()
}

/// Exact frequent patterns with their support counts, by levelwise Apriori.
pub fn exact_fpm_with_support(
    dataset: &[LocalData],
    f: f64,
    universe: &PatternUniverse,
) -> Result<BTreeMap<Pattern, usize>, PatternError> {
    if dataset.is_empty() {
        return Err(PatternError::EmptyDataset);
    }
    if !(0.0..=1.0).contains(&f) {
        return Err(PatternError::InvalidFrequency(f));
    }
    if let Some(d) = dataset.iter().find(|d| d.kind != universe.kind) {
        return Err(PatternError::KindMismatch { pattern: universe.kind, data: d.kind });
    }
    let threshold = support_threshold(f, dataset.len());
    let mut frequent: BTreeMap<Pattern, usize> = BTreeMap::new();
    let mut explored: BTreeSet<Pattern> = BTreeSet::new();
    let mut level: Vec<Pattern> = basic_patterns(universe);
    while !level.is_empty() {
        let counts: Vec<usize> = level.par_iter().map(|p| support(dataset, p)).collect();
        for (p, count) in level.iter().zip(counts) {
            explored.insert(p.clone());
            if count >= threshold {
                frequent.insert(p.clone(), count);
            }
        }
        let accepted: BTreeSet<Pattern> = frequent.keys().cloned().collect();
        level = generate_candidates(&accepted, &explored, universe).into_iter().collect();
    }
    Ok(frequent)
}

/// Exact frequent pattern set: support count `>= ceil(f·|dataset|)`.
pub fn exact_fpm(dataset: &[LocalData], f: f64, universe: &PatternUniverse) -> Result<BTreeSet<Pattern>, PatternError> {
    Ok(exact_fpm_with_support(dataset, f, universe)?.into_keys().collect())
}
