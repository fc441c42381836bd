//! End-to-end experiment loop and metrics.
//!
//! One round: optional padding, candidate indexing, assignment planning,
//! owner responses under distributed noise, masked aggregation, profile
//! update, filtering and Apriori growth. The loop ends when the pool is
//! empty or the owner population runs out.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyst::{
    plan_assignments, AnalystConfig, AnalystError, CandidatePool, OwnerSupply, ReuseState, RoundCandidates,
    RoundPlan, Strategy,
};
use crate::owner::{respond_with, CandidateAssignment, DistributedNoise, NoNoise, OwnerError, OwnerLedger};
use crate::patterns::{basic_patterns, exact_fpm, LocalData, Pattern, PatternError, PatternUniverse};
use crate::privacy::NoiseParams;
use crate::secure_agg::{default_degree, AggregationError, AggregationSession, MaskedVector};
use crate::seeding::{stream_rng, Stream};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Analyst(#[from] AnalystError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Owner(#[from] OwnerError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    #[default]
    Distributed,
    /// No noise at all; only for oracle-agreement checks.
    Off,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Participation {
    /// `P` owners per candidate drawn from the population, budgets enforced.
    #[default]
    Sampled,
    /// Every owner answers every candidate every round (`P = τ = N`); the
    /// `K` budget is not enforced. A diagnostic mode without privacy.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub analyst: AnalystConfig,
    pub universe: PatternUniverse,
    pub seed: u64,
    /// Cap on unique owners drawn from the population.
    pub owner_cap: Option<usize>,
    /// Neighbours per owner in the aggregation graph; defaults to
    /// `2·ceil(log2 n)`.
    pub aggregation_degree: Option<usize>,
    pub noise: NoiseMode,
    pub participation: Participation,
    /// Recycle population records under fresh owner ids once exhausted.
    pub with_replacement: bool,
}

impl ExperimentConfig {
    pub fn new(analyst: AnalystConfig, universe: PatternUniverse, seed: u64) -> Self {
        ExperimentConfig {
            analyst,
            universe,
            seed,
            owner_cap: None,
            aggregation_degree: None,
            noise: NoiseMode::Distributed,
            participation: Participation::Sampled,
            with_replacement: false,
        }
    }

    /// Noise-free census: every one of `population` owners answers every
    /// candidate, so the mined set must equal the exact frequent set.
    pub fn exhaustive(population: usize, f: f64, universe: PatternUniverse, seed: u64) -> Result<Self, ExperimentError> {
        let noise = NoiseParams::new(1.0, 1, population.max(1)).map_err(AnalystError::from)?;
        let analyst = AnalystConfig::new(noise, f, Strategy::Vanilla)?;
        let analyst = AnalystConfig { tau: noise.p as u64, ..analyst };
        Ok(ExperimentConfig {
            noise: NoiseMode::Off,
            participation: Participation::Exhaustive,
            ..ExperimentConfig::new(analyst, universe, seed)
        })
    }

    pub fn validate(&self, dataset: &[LocalData]) -> Result<(), ExperimentError> {
        self.analyst.validate()?;
        for d in dataset {
            self.universe.check_data(d)?;
        }
        if self.participation == Participation::Exhaustive && self.analyst.noise.p != dataset.len() {
            return Err(ExperimentError::Config(format!(
                "exhaustive participation needs P = population size ({}), got {}",
                dataset.len(),
                self.analyst.noise.p
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: usize,
    pub candidates: usize,
    pub padded: usize,
    pub fresh_owners: usize,
    pub reused_owners: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub held: usize,
    pub generated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub mined: BTreeSet<Pattern>,
    pub truth: BTreeSet<Pattern>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Unique owners that took part (`|D'|`).
    pub owners_used: usize,
    /// Average number of rounds an owner took part in.
    pub mean_rounds_per_owner: f64,
    pub rounds: usize,
    /// The owner population ran out before the pool emptied; `mined` is partial.
    pub exhausted: bool,
    /// Some owners were recycled population records.
    pub recycled_owners: bool,
    pub per_round: Vec<RoundStats>,
}

/// What the loop saw in one round, for tests and diagnostics.
pub struct RoundTrace<'a> {
    pub round: usize,
    pub candidates: &'a RoundCandidates,
    pub plan: &'a RoundPlan,
    /// Aggregated noisy sums, one per candidate.
    pub aggregated: &'a [i64],
    /// Noise-free sums, one per candidate.
    pub clean: &'a [i64],
}

/// `(precision, recall, f1)` of `mined` against `truth`. Empty-vs-empty
/// scores 1 across the board.
pub fn f1_score(mined: &BTreeSet<Pattern>, truth: &BTreeSet<Pattern>) -> (f64, f64, f64) {
    let hit = mined.intersection(truth).count() as f64;
    let precision = match (mined.is_empty(), truth.is_empty()) {
        (true, true) => 1.0,
        (true, false) => 0.0,
        _ => hit / mined.len() as f64,
    };
    let recall = if truth.is_empty() { 1.0 } else { hit / truth.len() as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    (precision, recall, f1)
}

/// Population records handed out in a seed-shuffled order.
struct PopulationSupply {
    order: Vec<usize>,
    issued: usize,
    cap: usize,
    with_replacement: bool,
}

impl PopulationSupply {
    fn new(population: usize, config: &ExperimentConfig) -> Self {
        let mut order: Vec<usize> = (0..population).collect();
        order.shuffle(&mut stream_rng(config.seed, Stream::OwnerShuffle, &[]));
        let cap = match (config.owner_cap, config.with_replacement) {
            (Some(c), true) => c,
            (Some(c), false) => c.min(population),
            (None, true) => usize::MAX,
            (None, false) => population,
        };
        PopulationSupply { order, issued: 0, cap, with_replacement: config.with_replacement }
    }

    fn record(&self, owner_id: u64) -> usize {
        self.order[owner_id as usize % self.order.len()]
    }

    fn recycled(&self) -> bool {
        self.issued > self.order.len()
    }
}

impl OwnerSupply for PopulationSupply {
    fn draw_fresh(&mut self) -> Option<u64> {
        let limit = if self.with_replacement && !self.order.is_empty() { self.cap } else { self.cap.min(self.order.len()) };
        if self.issued >= limit {
            return None;
        }
        self.issued += 1;
        Some(self.issued as u64 - 1)
    }
}

struct Upload {
    masked: MaskedVector,
    clean: Vec<i64>,
}

/// Runs the full loop over `dataset`, one record per owner.
pub fn run_experiment(config: &ExperimentConfig, dataset: &[LocalData]) -> Result<ExperimentResult, ExperimentError> {
    run_experiment_traced(config, dataset, |_| {})
}

/// [`run_experiment`] with a per-round observer.
pub fn run_experiment_traced<F>(
    config: &ExperimentConfig,
    dataset: &[LocalData],
    mut observe: F,
) -> Result<ExperimentResult, ExperimentError>
where
    F: FnMut(&RoundTrace<'_>),
{
    config.validate(dataset)?;
    let analyst = &config.analyst;
    let noise = analyst.noise;
    let exhaustive = config.participation == Participation::Exhaustive;
    let truth = if dataset.is_empty() { BTreeSet::new() } else { exact_fpm(dataset, analyst.f, &config.universe)? };

    let mut pool = CandidatePool::with_candidates(basic_patterns(&config.universe));
    let mut reuse = ReuseState::new();
    let mut supply = PopulationSupply::new(dataset.len(), config);
    let mut ledgers: BTreeMap<u64, OwnerLedger> = BTreeMap::new();
    let mut participations: BTreeMap<u64, usize> = BTreeMap::new();
    let mut per_round = Vec::new();
    let mut exhausted = false;

    while !pool.is_empty() {
        let round_no = per_round.len() + 1;
        pool.pad_candidates(analyst, &config.universe);
        let round = pool.round_candidates();

        let plan = if exhaustive {
            census_plan(&round, dataset.len())?
        } else if dataset.is_empty() {
            exhausted = true;
            break;
        } else {
            match plan_assignments(&round, analyst, &mut reuse, &mut supply) {
                Ok(plan) => plan,
                Err(AnalystError::OwnersExhausted { .. }) => {
                    exhausted = true;
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        };

        if !exhaustive {
            // Owner-side budget check, independent of the planner's books.
            for (id, assignment) in &plan.assignments {
                ledgers.entry(*id).or_insert_with(|| OwnerLedger::new(noise.k)).charge(assignment)?;
            }
        }
        for (id, _) in &plan.assignments {
            *participations.entry(*id).or_default() += 1;
        }

        let ids: Vec<u64> = plan.assignments.iter().map(|(id, _)| *id).collect();
        let degree = config.aggregation_degree.unwrap_or_else(|| default_degree(ids.len())).min(ids.len().saturating_sub(1));
        let session = AggregationSession::build(
            ids,
            degree,
            round.len(),
            &mut stream_rng(config.seed, Stream::AggregationGraph, &[round_no as u64]),
        )?;

        let budget = if exhaustive { usize::MAX } else { noise.k };
        let uploads: Vec<Upload> = plan
            .assignments
            .par_iter()
            .map(|(id, assignment)| {
                let record = if exhaustive { *id as usize } else { supply.record(*id) };
                let data = &dataset[record];
                let response = match config.noise {
                    NoiseMode::Distributed => {
                        let rng = stream_rng(config.seed, Stream::OwnerNoise, &[*id, round_no as u64]);
                        let mut source = DistributedNoise::new(&noise, rng).map_err(OwnerError::from)?;
                        respond_with(data, assignment, budget, &mut source)?
                    }
                    NoiseMode::Off => respond_with(data, assignment, budget, &mut NoNoise)?,
                };
                let clean = respond_with(data, assignment, budget, &mut NoNoise)?.0;
                let masked = session.mask(&response, *id)?;
                Ok(Upload { masked, clean })
            })
            .collect::<Result<_, ExperimentError>>()?;

        let mut clean = vec![0i64; round.len()];
        for u in &uploads {
            for (c, v) in clean.iter_mut().zip(&u.clean) {
                *c += v;
            }
        }
        let masked: Vec<MaskedVector> = uploads.into_iter().map(|u| u.masked).collect();
        let aggregated = session.aggregate(&masked)?;

        observe(&RoundTrace { round: round_no, candidates: &round, plan: &plan, aggregated: &aggregated, clean: &clean });

        pool.update_profiles(&round, &aggregated, noise.p)?;
        let counts = pool.filter(analyst);
        let generated = pool.grow_candidates(&config.universe).len();

        if analyst.strategy != Strategy::OwnerReusing {
            ledgers.clear();
        } else {
            ledgers.retain(|_, l| l.remaining() > 0);
        }

        per_round.push(RoundStats {
            round: round_no,
            candidates: round.len(),
            padded: round.len() - round.real_count(),
            fresh_owners: plan.fresh.len(),
            reused_owners: plan.reused.len(),
            accepted: counts.accepted,
            rejected: counts.rejected,
            held: counts.held,
            generated,
        });
    }

    let mined = pool.accepted().clone();
    let (precision, recall, f1) = f1_score(&mined, &truth);
    let owners_used = participations.len();
    let mean_rounds_per_owner = if owners_used == 0 {
        0.0
    } else {
        participations.values().sum::<usize>() as f64 / owners_used as f64
    };
    Ok(ExperimentResult {
        mined,
        truth,
        precision,
        recall,
        f1,
        owners_used,
        mean_rounds_per_owner,
        rounds: per_round.len(),
        exhausted,
        recycled_owners: supply.recycled(),
        per_round,
    })
}

/// Every owner answers every candidate.
fn census_plan(round: &RoundCandidates, population: usize) -> Result<RoundPlan, ExperimentError> {
    let entries: Vec<(usize, Pattern)> = round.patterns().iter().cloned().enumerate().collect();
    let assignment = CandidateAssignment::new(entries, round.len())?;
    let ids: Vec<u64> = (0..population as u64).collect();
    Ok(RoundPlan {
        assignments: ids.iter().map(|&id| (id, assignment.clone())).collect(),
        fresh: ids,
        reused: Vec::new(),
    })
}

/// One row of a strategy comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub strategy: Strategy,
    pub owners_used: usize,
    pub f1: f64,
    /// Percentage fewer owners than the vanilla row, when one is present.
    pub reduction_vs_vanilla: Option<f64>,
    pub result: ExperimentResult,
}

/// Runs the same seeded experiment once per strategy.
pub fn compare_strategies(
    config: &ExperimentConfig,
    dataset: &[LocalData],
    strategies: &[Strategy],
) -> Result<Vec<StrategyRow>, ExperimentError> {
    let results: Vec<(Strategy, ExperimentResult)> = strategies
        .par_iter()
        .map(|&strategy| {
            let mut cfg = config.clone();
            cfg.analyst.strategy = strategy;
            run_experiment(&cfg, dataset).map(|r| (strategy, r))
        })
        .collect::<Result<_, _>>()?;
    let vanilla = results.iter().find(|(s, _)| *s == Strategy::Vanilla).map(|(_, r)| r.owners_used);
    Ok(results
        .into_iter()
        .map(|(strategy, result)| StrategyRow {
            strategy,
            owners_used: result.owners_used,
            f1: result.f1,
            reduction_vs_vanilla: vanilla
                .filter(|&v| v > 0)
                .map(|v| 100.0 * (v as f64 - result.owners_used as f64) / v as f64),
            result,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::PatternKind;

    fn set(ids: &[u32]) -> Pattern {
        Pattern::itemset(ids.iter().copied()).unwrap()
    }

    #[test]
    fn f1_examples() {
        let truth: BTreeSet<_> = (0..16).map(Pattern::item).collect();
        assert_eq!(f1_score(&truth, &truth), (1.0, 1.0, 1.0));
        let other: BTreeSet<_> = (100..110).map(Pattern::item).collect();
        assert_eq!(f1_score(&other, &truth), (0.0, 0.0, 0.0));
        let mined: BTreeSet<_> = (8..18).map(Pattern::item).collect();
        let (p, r, f1) = f1_score(&mined, &truth);
        assert_eq!((p, r), (0.8, 0.5));
        assert!((f1 - 0.615_384_615_384_615_4).abs() < 1e-12);
        assert_eq!(f1_score(&BTreeSet::new(), &BTreeSet::new()), (1.0, 1.0, 1.0));
        assert_eq!(f1_score(&BTreeSet::new(), &truth), (0.0, 0.0, 0.0));
        assert_eq!(f1_score(&truth, &BTreeSet::new()).1, 1.0);
    }

    #[test]
    fn empty_universe_runs_zero_rounds() {
        let noise = NoiseParams::new(2.0, 50, 10).unwrap();
        let analyst = AnalystConfig::new(noise, 0.5, Strategy::Vanilla).unwrap();
        let universe = PatternUniverse::with_default_length(0, PatternKind::Item);
        let data = vec![LocalData::new(PatternKind::Item, vec![]); 5];
        let r = run_experiment(&ExperimentConfig::new(analyst, universe, 1), &data).unwrap();
        assert_eq!(r.rounds, 0);
        assert!(r.mined.is_empty());
        assert_eq!(r.f1, 1.0);
        assert_eq!(r.owners_used, 0);
    }

    #[test]
    fn exhaustive_noise_free_matches_oracle() {
        let universe = PatternUniverse::with_default_length(5, PatternKind::Itemset);
        let data: Vec<_> = (0..40u32)
            .map(|i| LocalData::new(PatternKind::Itemset, (0..5).filter(|j| (i + j) % 3 != 0 || j % 2 == 0).collect()))
            .collect();
        let cfg = ExperimentConfig::exhaustive(data.len(), 0.4, universe, 3).unwrap();
        let r = run_experiment(&cfg, &data).unwrap();
        assert_eq!(r.mined, exact_fpm(&data, 0.4, &universe).unwrap());
        assert_eq!(r.f1, 1.0);
        assert!(!r.exhausted);
    }

    #[test]
    fn exhaustive_requires_matching_population() {
        let universe = PatternUniverse::with_default_length(3, PatternKind::Itemset);
        let cfg = ExperimentConfig::exhaustive(10, 0.4, universe, 3).unwrap();
        let data = vec![LocalData::new(PatternKind::Itemset, vec![0]); 9];
        assert!(matches!(run_experiment(&cfg, &data), Err(ExperimentError::Config(_))));
    }

    #[test]
    fn kind_mismatch_rejected() {
        let noise = NoiseParams::new(2.0, 50, 2).unwrap();
        let analyst = AnalystConfig::new(noise, 0.5, Strategy::Vanilla).unwrap();
        let universe = PatternUniverse::with_default_length(3, PatternKind::Sequence);
        let data = vec![LocalData::new(PatternKind::Itemset, vec![0]); 4];
        assert!(matches!(
            run_experiment(&ExperimentConfig::new(analyst, universe, 1), &data),
            Err(ExperimentError::Pattern(_))
        ));
    }

    #[test]
    fn exhaustion_is_flagged() {
        let noise = NoiseParams::new(2.0, 50, 10).unwrap();
        let analyst = AnalystConfig::new(noise, 0.3, Strategy::Vanilla).unwrap();
        let universe = PatternUniverse::with_default_length(4, PatternKind::Itemset);
        let data = vec![LocalData::new(PatternKind::Itemset, vec![0, 1]); 25];
        let r = run_experiment(&ExperimentConfig::new(analyst, universe, 9), &data).unwrap();
        assert!(r.exhausted);
        assert_eq!(r.owners_used, 20);
        assert_eq!(r.rounds, 2);
    }

    #[test]
    fn with_replacement_recycles() {
        let noise = NoiseParams::new(2.0, 50, 10).unwrap();
        let mut analyst = AnalystConfig::new(noise, 0.3, Strategy::Vanilla).unwrap();
        analyst.tau = 30;
        let universe = PatternUniverse::with_default_length(2, PatternKind::Item);
        let data = vec![LocalData::new(PatternKind::Item, vec![0]); 15];
        let mut cfg = ExperimentConfig::new(analyst, universe, 9);
        cfg.with_replacement = true;
        let r = run_experiment(&cfg, &data).unwrap();
        assert!(!r.exhausted);
        assert!(r.recycled_owners);
        assert!(r.mined.is_subset(&[Pattern::item(0), Pattern::item(1)].into()));
    }

    #[test]
    fn round_trace_sanity() {
        let noise = NoiseParams::new(2.0, 5, 30).unwrap();
        let analyst = AnalystConfig::new(noise, 0.2, Strategy::OwnerReusing).unwrap();
        let universe = PatternUniverse::with_default_length(4, PatternKind::Itemset);
        let data: Vec<_> =
            (0..3000u32).map(|i| LocalData::new(PatternKind::Itemset, vec![i % 4, (i / 4) % 4])).collect();
        let cfg = ExperimentConfig::new(analyst, universe, 5);
        let mut rounds = 0;
        let r = run_experiment_traced(&cfg, &data, |t| {
            rounds += 1;
            for (i, &c) in t.clean.iter().enumerate() {
                assert!((0..=30).contains(&c), "clean sum {c}");
                let responders = t.plan.assignments.iter().filter(|(_, a)| a.entries().iter().any(|(j, _)| *j == i));
                assert_eq!(responders.count(), 30);
                let _ = t.aggregated[i];
            }
        })
        .unwrap();
        assert_eq!(rounds, r.rounds);
        assert!(r.mined.is_disjoint(&BTreeSet::new()));
        assert!(r.mined.iter().all(|p| r.truth.contains(p) || p.len() <= 2));
        assert_eq!(r.owners_used, r.per_round.iter().map(|s| s.fresh_owners).sum::<usize>());
        let _ = set(&[0]);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let noise = NoiseParams::new(2.0, 10, 20).unwrap();
        let analyst = AnalystConfig::new(noise, 0.2, Strategy::CandidatePadding).unwrap();
        let universe = PatternUniverse::with_default_length(5, PatternKind::Sequence);
        let data: Vec<_> =
            (0..4000u32).map(|i| LocalData::new(PatternKind::Sequence, vec![i % 5, (i * 7) % 5, 1])).collect();
        let cfg = ExperimentConfig::new(analyst, universe, 77);
        assert_eq!(run_experiment(&cfg, &data).unwrap(), run_experiment(&cfg, &data).unwrap());
    }
}
