//! Dataset loading, writing and synthetic generation.
//!
//! Text format: one owner per line, whitespace-separated non-negative integer
//! tokens. For item and itemset mining a line is a set (duplicates collapse);
//! for sequence mining it is an ordered sequence. Empty lines are skipped and
//! both LF and CRLF endings are accepted.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Poisson, Zipf};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::patterns::{LocalData, Pattern, PatternKind};

/// Default Zipf exponent of background items.
pub const DEFAULT_ZIPF_EXPONENT: f64 = 1.1;

/// Default mean of the Poisson background length per owner.
pub const DEFAULT_BACKGROUND_MEAN: f64 = 8.0;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: cannot parse token `{token}` as a non-negative integer")]
    Parse { line: usize, token: String },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Mapping from file tokens to dense item ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenMap {
    entries: BTreeMap<u64, u32>,
}

impl TokenMap {
    pub fn id(&self, token: u64) -> Option<u32> {
        self.entries.get(&token).copied()
    }

    pub fn token(&self, id: u32) -> Option<u64> {
        self.entries.iter().find(|(_, &v)| v == id).map(|(&t, _)| t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Two-column `token id` text, one pair per line, in token order.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (token, id) in &self.entries {
            writeln!(out, "{token} {id}")?;
        }
        Ok(())
    }
}

/// How tokens become item ids.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdMapping {
    /// A token is its own id; the universe is `max token + 1`.
    #[default]
    Identity,
    /// Distinct tokens are renumbered `0..` in increasing token order.
    Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub owners: Vec<LocalData>,
    pub token_map: TokenMap,
    /// Smallest universe size admitting every id.
    pub universe_size: u32,
}

/// Parses a dataset from any reader.
pub fn parse_dataset<R: Read>(reader: R, kind: PatternKind, mapping: IdMapping) -> Result<LoadedDataset, DataError> {
    let mut rows: Vec<Vec<u64>> = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let mut row = Vec::new();
        for token in line.split_whitespace() {
            let value = token.parse::<u64>().map_err(|_| DataError::Parse { line: i + 1, token: token.to_string() })?;
            if mapping == IdMapping::Identity && value > u64::from(u32::MAX - 1) {
                return Err(DataError::Parse { line: i + 1, token: token.to_string() });
            }
            row.push(value);
        }
        if !row.is_empty() {
            rows.push(row);
        }
    }
    let mut token_map = TokenMap::default();
    for &t in rows.iter().flatten() {
        token_map.entries.insert(t, 0);
    }
    match mapping {
        IdMapping::Identity => token_map.entries.iter_mut().for_each(|(t, id)| *id = *t as u32),
        IdMapping::Dense => token_map.entries.values_mut().enumerate().for_each(|(i, id)| *id = i as u32),
    }
    let universe_size = token_map.entries.values().max().map_or(0, |&m| m + 1);
    let owners = rows
        .into_iter()
        .map(|row| LocalData::new(kind, row.into_iter().map(|t| token_map.entries[&t]).collect()))
        .collect();
    Ok(LoadedDataset { owners, token_map, universe_size })
}

pub fn load_dataset_with(path: &Path, kind: PatternKind, mapping: IdMapping) -> Result<LoadedDataset, DataError> {
    parse_dataset(fs::File::open(path)?, kind, mapping)
}

/// Loads with identity ids.
pub fn load_dataset(path: &Path, kind: PatternKind) -> Result<LoadedDataset, DataError> {
    load_dataset_with(path, kind, IdMapping::Identity)
}

/// Writes one owner per line in the text format.
pub fn write_dataset<W: Write>(owners: &[LocalData], mut out: W) -> io::Result<()> {
    let mut line = String::new();
    for owner in owners {
        line.clear();
        for (i, id) in owner.payload().iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(&id.to_string());
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Synthetic population with planted patterns over a Zipf background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub owners: usize,
    pub universe: u32,
    pub kind: PatternKind,
    pub zipf_exponent: f64,
    pub background_mean: f64,
    /// `(pattern, probability that an owner receives it)`.
    pub planted: Vec<(Pattern, f64)>,
}

impl SyntheticSpec {
    pub fn new(owners: usize, universe: u32, kind: PatternKind) -> Self {
        SyntheticSpec {
            owners,
            universe,
            kind,
            zipf_exponent: DEFAULT_ZIPF_EXPONENT,
            background_mean: DEFAULT_BACKGROUND_MEAN,
            planted: Vec::new(),
        }
    }

    pub fn plant(mut self, pattern: Pattern, frequency: f64) -> Self {
        self.planted.push((pattern, frequency));
        self
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::InvalidSpec(m));
        if self.universe == 0 {
            return bad("universe must be non-empty".into());
        }
        if !(self.zipf_exponent > 0.0) {
            return bad(format!("Zipf exponent must be positive, got {}", self.zipf_exponent));
        }
        if !(self.background_mean >= 0.0 && self.background_mean.is_finite()) {
            return bad(format!("background mean must be finite and non-negative, got {}", self.background_mean));
        }
        for (p, freq) in &self.planted {
            if p.kind() != self.kind {
                return bad(format!("planted pattern {p} is not of kind {}", self.kind));
            }
            if p.max_id() >= self.universe {
                return bad(format!("planted pattern {p} exceeds universe {}", self.universe));
            }
            if !(*freq > 0.0 && *freq < 1.0) {
                return bad(format!("planted frequency {freq} outside (0, 1)"));
            }
        }
        Ok(())
    }
}

/// Draws background item ids, rank 1 of the Zipf law being item 0.
enum Background {
    Zipf(Zipf<f64>),
    FirstOnly,
}

impl Background {
    fn new(spec: &SyntheticSpec) -> Result<Self, DataError> {
        if spec.zipf_exponent.is_infinite() {
            return Ok(Background::FirstOnly);
        }
        Zipf::new(spec.universe as f64, spec.zipf_exponent)
            .map(Background::Zipf)
            .map_err(|e| DataError::InvalidSpec(e.to_string()))
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match self {
            Background::Zipf(z) => z.sample(rng) as u32 - 1,
            Background::FirstOnly => 0,
        }
    }
}

/// Generates `spec.owners` owners.
///
/// Each owner independently receives every planted pattern with its
/// probability, then a Poisson-length run of Zipf background items. For
/// sequences the background is laid down first and planted runs are spliced
/// in whole at uniformly chosen boundaries, so background never splits a
/// planted run and every planted pattern's frequency is at least its target
/// in expectation. Owners that would come out empty get one background item.
pub fn generate_synthetic<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<Vec<LocalData>, DataError> {
    spec.validate()?;
    let background = Background::new(spec)?;
    let length = if spec.background_mean > 0.0 {
        Some(Poisson::new(spec.background_mean).map_err(|e| DataError::InvalidSpec(e.to_string()))?)
    } else {
        None
    };
    let mut owners = Vec::with_capacity(spec.owners);
    for _ in 0..spec.owners {
        let chosen: Vec<&Pattern> =
            spec.planted.iter().filter(|(_, freq)| rng.random::<f64>() < *freq).map(|(p, _)| p).collect();
        let mut n_background = length.as_ref().map_or(0, |d| d.sample(rng) as usize);
        if n_background == 0 && chosen.is_empty() {
            n_background = 1;
        }
        let payload = if spec.kind.is_set() {
            let mut items: Vec<u32> = chosen.iter().flat_map(|p| p.elements().iter().copied()).collect();
            items.extend((0..n_background).map(|_| background.draw(rng)));
            items
        } else {
            let mut chunks: Vec<Vec<u32>> = (0..n_background).map(|_| vec![background.draw(rng)]).collect();
            for p in chosen {
                let at = rng.random_range(0..=chunks.len());
                chunks.insert(at, p.elements().to_vec());
            }
            chunks.concat()
        };
        owners.push(LocalData::new(spec.kind, payload));
    }
    Ok(owners)
}

/// Planted patterns of [`SyntheticSpec::nested_workload`]: ten patterns over
/// items `0..5`, frequencies 0.05 to 0.3, all inside the five-item pattern.
pub const NESTED_PLANTS: [(&[u32], f64); 10] = [
    (&[0, 1], 0.30),
    (&[2, 3], 0.20),
    (&[0, 1, 2], 0.15),
    (&[3, 4], 0.12),
    (&[1, 4], 0.10),
    (&[0, 2, 4], 0.09),
    (&[0, 1, 2, 3, 4], 0.08),
    (&[1, 2, 3], 0.06),
    (&[0, 3], 0.05),
    (&[2, 4], 0.05),
];

impl SyntheticSpec {
    /// Thirty-item universe with [`NESTED_PLANTS`] over a sparse,
    /// near-uniform background (0.5 items per owner).
    ///
    /// Every subset of `{0,..,4}` lands well above 0.05 and every other
    /// pattern well below, and the candidate lattice stays small enough for
    /// `τ = 20P` runs on a 50,000-owner population.
    /// Item kind has no multi-element patterns and is rejected.
    pub fn nested_workload(owners: usize, kind: PatternKind) -> Result<Self, DataError> {
        if kind == PatternKind::Item {
            return Err(DataError::InvalidSpec("the nested workload needs itemsets or sequences".into()));
        }
        let mut spec = SyntheticSpec::new(owners, 30, kind);
        spec.zipf_exponent = 0.01;
        spec.background_mean = 0.5;
        for (elements, freq) in NESTED_PLANTS {
            let pattern = Pattern::new(kind, elements.to_vec()).map_err(|e| DataError::InvalidSpec(e.to_string()))?;
            spec = spec.plant(pattern, freq);
        }
        Ok(spec)
    }
}
