//! The analyst: candidate pool, confidence-bound filtering, assignment
//! planning, Apriori growth and the two budget-saving strategies.
//!
//! A candidate's profile `(r, n, m)` holds the sum of its aggregated noisy
//! responses, the number of responses and the number of rounds it has been
//! measured. `r/n` is an unbiased frequency estimate; its error splits into a
//! sampling part (Hoeffding, `η_s`) and a geometric-noise part (Chebyshev,
//! `η_g`), and the filter accepts or rejects once the estimate clears `f` by
//! the sum of both bounds. A candidate that reaches `τ` responses is decided
//! on the raw estimate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::owner::{CandidateAssignment, OwnerError};
use crate::patterns::{generate_candidates_with, Pattern, PatternUniverse};
use crate::privacy::{NoiseParams, PrivacyError};

/// Default confidence parameters for both error sources.
pub const DEFAULT_ETA: f64 = 0.01;

/// Default `τ` as a multiple of `P`.
pub const DEFAULT_TAU_ROUNDS: u64 = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalystError {
    #[error("candidate has no responses yet (m = 0)")]
    NoResponses,
    #[error("aggregate has length {got}, round has {expected} candidates")]
    LengthMismatch { expected: usize, got: usize },
    #[error("owner supply exhausted: needed {needed} fresh owners, obtained {obtained}")]
    OwnersExhausted { needed: usize, obtained: usize },
    #[error("invalid analyst configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error(transparent)]
    Owner(#[from] OwnerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Vanilla,
    CandidatePadding,
    OwnerReusing,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Vanilla, Strategy::CandidatePadding, Strategy::OwnerReusing];
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Vanilla => "vanilla",
            Strategy::CandidatePadding => "padding",
            Strategy::OwnerReusing => "reusing",
        })
    }
}

impl FromStr for Strategy {
    type Err = AnalystError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vanilla" => Ok(Strategy::Vanilla),
            "padding" | "candidate-padding" => Ok(Strategy::CandidatePadding),
            "reusing" | "owner-reusing" => Ok(Strategy::OwnerReusing),
            other => Err(AnalystError::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

/// `(r_c, n_c, m_c)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateProfile {
    pub r: i64,
    pub n: u64,
    pub m: u64,
}

impl CandidateProfile {
    /// `r/n`, or 0 for a candidate without responses.
    pub fn ratio(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.r as f64 / self.n as f64
        }
    }

    /// Adds one round's aggregate from `p` responders.
    pub fn record(&mut self, aggregate: i64, p: usize) {
        self.r += aggregate;
        self.n += p as u64;
        self.m += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalystConfig {
    pub noise: NoiseParams,
    /// Target frequency.
    pub f: f64,
    /// Responses after which a candidate is force-filtered.
    pub tau: u64,
    pub eta_g: f64,
    pub eta_s: f64,
    pub strategy: Strategy,
}

impl AnalystConfig {
    /// Config with `τ = 20·P` and `η_g = η_s = 0.01`.
    pub fn new(noise: NoiseParams, f: f64, strategy: Strategy) -> Result<Self, AnalystError> {
        let config = AnalystConfig {
            noise,
            f,
            tau: DEFAULT_TAU_ROUNDS * noise.p as u64,
            eta_g: DEFAULT_ETA,
            eta_s: DEFAULT_ETA,
            strategy,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), AnalystError> {
        self.noise.validate()?;
        if !(self.f > 0.0 && self.f < 1.0) {
            return Err(AnalystError::Config(format!("f must lie in (0, 1), got {}", self.f)));
        }
        let p = self.noise.p as u64;
        if self.tau < p || self.tau % p != 0 {
            return Err(AnalystError::Config(format!("tau = {} must be a positive multiple of P = {p}", self.tau)));
        }
        for (name, eta) in [("eta_g", self.eta_g), ("eta_s", self.eta_s)] {
            if !(eta > 0.0 && eta < 1.0) {
                return Err(AnalystError::Config(format!("{name} must lie in (0, 1), got {eta}")));
            }
        }
        Ok(())
    }
}

/// Chebyshev radius of the averaged geometric noise after `m` rounds:
/// `sqrt(2α / (2(1−α)²·P²·m·η_g))` with `α = e^(−ε/K)`.
pub fn geometric_term(noise: &NoiseParams, m: u64, eta_g: f64) -> f64 {
    let alpha = noise.alpha();
    let p = noise.p as f64;
    (2.0 * alpha / (2.0 * (1.0 - alpha).powi(2) * p * p * m as f64 * eta_g)).sqrt()
}

/// Hoeffding radius of the sampling error after `n` responses:
/// `sqrt(ln η_s / (−2n))`.
pub fn sampling_term(n: u64, eta_s: f64) -> f64 {
    (eta_s.ln() / (-2.0 * n as f64)).sqrt()
}

/// Total confidence radius `B` around `r/n`.
pub fn bound_term(profile: &CandidateProfile, config: &AnalystConfig) -> Result<f64, AnalystError> {
    if profile.m == 0 || profile.n == 0 {
        return Err(AnalystError::NoResponses);
    }
    Ok(geometric_term(&config.noise, profile.m, config.eta_g) + sampling_term(profile.n, config.eta_s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FilterDecision {
    AcceptFrequent,
    RejectInfrequent,
    Hold,
}

/// Which rule produced a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterRule {
    UpperConfidence,
    LowerConfidence,
    ForcedByTau,
    NotYetDecided,
}

impl FilterRule {
    pub fn decision(self, ratio_at_least_f: bool) -> FilterDecision {
        match self {
            FilterRule::UpperConfidence => FilterDecision::AcceptFrequent,
            FilterRule::LowerConfidence => FilterDecision::RejectInfrequent,
            FilterRule::ForcedByTau if ratio_at_least_f => FilterDecision::AcceptFrequent,
            FilterRule::ForcedByTau => FilterDecision::RejectInfrequent,
            FilterRule::NotYetDecided => FilterDecision::Hold,
        }
    }
}

/// Decision plus the rule that fired. Candidates without responses hold.
pub fn classify(profile: &CandidateProfile, config: &AnalystConfig) -> (FilterDecision, FilterRule) {
    let Ok(bound) = bound_term(profile, config) else {
        return (FilterDecision::Hold, FilterRule::NotYetDecided);
    };
    let ratio = profile.ratio();
    let rule = if ratio - bound >= config.f {
        FilterRule::UpperConfidence
    } else if ratio + bound <= config.f {
        FilterRule::LowerConfidence
    } else if profile.n >= config.tau {
        FilterRule::ForcedByTau
    } else {
        FilterRule::NotYetDecided
    };
    (rule.decision(ratio >= config.f), rule)
}

pub fn filter_candidate(profile: &CandidateProfile, config: &AnalystConfig) -> FilterDecision {
    classify(profile, config).0
}

/// The candidate list of one round, with indices `0..len`.
///
/// Real pool members come first (ordered by the round they entered the pool,
/// then canonically); padded virtual candidates follow in padding order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundCandidates {
    patterns: Vec<Pattern>,
    real: usize,
}

impl RoundCandidates {
    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Number of real (non-padded) candidates.
    pub fn real_count(&self) -> usize {
        self.real
    }

    pub fn is_padded(&self, index: usize) -> bool {
        index >= self.real
    }
}

/// Outcome counts of one filtering pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterCounts {
    pub accepted: usize,
    pub rejected: usize,
    pub held: usize,
}

/// Live candidates, accepted set `F`, rejected set, and virtual (padded)
/// candidates with their accumulated profiles.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidatePool {
    live: BTreeMap<Pattern, CandidateProfile>,
    entered: BTreeMap<Pattern, u64>,
    accepted: BTreeSet<Pattern>,
    rejected: BTreeSet<Pattern>,
    padded: BTreeSet<Pattern>,
    padding_order: Vec<Pattern>,
    padded_profiles: BTreeMap<Pattern, CandidateProfile>,
    generation: u64,
}

impl CandidatePool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pool seeded with `patterns`, all with zero profiles.
    pub fn with_candidates<I: IntoIterator<Item = Pattern>>(patterns: I) -> Self {
        let mut pool = Self::new();
        for p in patterns {
            pool.insert_live(p, CandidateProfile::default());
        }
        pool.generation += 1;
        pool
    }

    fn insert_live(&mut self, pattern: Pattern, profile: CandidateProfile) {
        self.entered.insert(pattern.clone(), self.generation);
        self.live.insert(pattern, profile);
    }

    pub fn live(&self) -> &BTreeMap<Pattern, CandidateProfile> {
        &self.live
    }

    pub fn accepted(&self) -> &BTreeSet<Pattern> {
        &self.accepted
    }

    pub fn rejected(&self) -> &BTreeSet<Pattern> {
        &self.rejected
    }

    /// Virtual candidates padded into the current round.
    pub fn padded(&self) -> &BTreeSet<Pattern> {
        &self.padded
    }

    /// Accumulated profiles of every pattern ever padded and not yet promoted.
    pub fn padded_profiles(&self) -> &BTreeMap<Pattern, CandidateProfile> {
        &self.padded_profiles
    }

    pub fn profile(&self, pattern: &Pattern) -> Option<&CandidateProfile> {
        self.live.get(pattern).or_else(|| self.padded_profiles.get(pattern))
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    fn is_explored(&self, p: &Pattern) -> bool {
        self.live.contains_key(p) || self.accepted.contains(p) || self.rejected.contains(p)
    }

    /// Fixes this round's candidate indices.
    pub fn round_candidates(&self) -> RoundCandidates {
        let mut real: Vec<&Pattern> = self.live.keys().collect();
        real.sort_by(|a, b| self.entered[*a].cmp(&self.entered[*b]).then_with(|| a.cmp(b)));
        let real_count = real.len();
        let mut patterns: Vec<Pattern> = real.into_iter().cloned().collect();
        // `padded` is kept in padding order by `pad_candidates`.
        patterns.extend(self.padding_order.iter().cloned());
        RoundCandidates { patterns, real: real_count }
    }

    /// Adds one round's aggregate to every candidate of the round.
    pub fn update_profiles(
        &mut self,
        round: &RoundCandidates,
        aggregated: &[i64],
        p: usize,
    ) -> Result<(), AnalystError> {
        if aggregated.len() != round.len() {
            return Err(AnalystError::LengthMismatch { expected: round.len(), got: aggregated.len() });
        }
        for (i, (pattern, &value)) in round.patterns.iter().zip(aggregated).enumerate() {
            let profile = if round.is_padded(i) {
                self.padded_profiles.entry(pattern.clone()).or_default()
            } else {
                self.live.get_mut(pattern).ok_or_else(|| AnalystError::LengthMismatch {
                    expected: round.len(),
                    got: aggregated.len(),
                })?
            };
            profile.record(value, p);
        }
        Ok(())
    }

    /// Filters every live candidate that has been measured, moving decided
    /// ones to the accepted or rejected set.
    pub fn filter(&mut self, config: &AnalystConfig) -> FilterCounts {
        let mut counts = FilterCounts::default();
        let decisions: Vec<(Pattern, FilterDecision)> =
            self.live.iter().map(|(p, prof)| (p.clone(), filter_candidate(prof, config))).collect();
        for (pattern, decision) in decisions {
            match decision {
                FilterDecision::AcceptFrequent => {
                    self.live.remove(&pattern);
                    self.entered.remove(&pattern);
                    self.accepted.insert(pattern);
                    counts.accepted += 1;
                }
                FilterDecision::RejectInfrequent => {
                    self.live.remove(&pattern);
                    self.entered.remove(&pattern);
                    self.rejected.insert(pattern);
                    counts.rejected += 1;
                }
                FilterDecision::Hold => counts.held += 1,
            }
        }
        counts
    }

    /// Moves every Apriori-generable, unexplored pattern into the live pool.
    /// A pattern that was measured as a padded candidate keeps its profile.
    pub fn grow_candidates(&mut self, universe: &PatternUniverse) -> Vec<Pattern> {
        let new = generate_candidates_with(&self.accepted, |p| self.is_explored(p), universe);
        self.generation += 1;
        let mut added = Vec::with_capacity(new.len());
        for pattern in new {
            let profile = self.padded_profiles.remove(&pattern).unwrap_or_default();
            self.padded.remove(&pattern);
            self.padding_order.retain(|p| p != &pattern);
            self.insert_live(pattern.clone(), profile);
            added.push(pattern);
        }
        self.generation += 1;
        added
    }

    /// Fills the round up to `K` candidates with speculative future
    /// candidates.
    ///
    /// Live candidates are virtually accepted in order of decreasing `r/n`
    /// (ties canonical); after each virtual acceptance the Apriori rule is
    /// re-run and anything new is padded, and padded candidates are in turn
    /// queued for virtual acceptance. Padded candidates that already hold `τ`
    /// responses are not measured again. Returns the padded patterns.
    pub fn pad_candidates(&mut self, config: &AnalystConfig, universe: &PatternUniverse) -> Vec<Pattern> {
        self.padded.clear();
        self.padding_order.clear();
        let k = config.noise.k;
        if config.strategy != Strategy::CandidatePadding || self.live.len() >= k {
            return Vec::new();
        }
        let mut queue: Vec<(Pattern, f64)> = self.live.iter().map(|(p, prof)| (p.clone(), prof.ratio())).collect();
        queue.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut queue: std::collections::VecDeque<Pattern> = queue.into_iter().map(|(p, _)| p).collect();

        let mut virtual_accepted = self.accepted.clone();
        let mut speculated: BTreeSet<Pattern> = BTreeSet::new();
        let mut slots = k - self.live.len();
        while slots > 0 {
            let Some(next) = queue.pop_front() else { break };
            virtual_accepted.insert(next);
            let generated = generate_candidates_with(
                &virtual_accepted,
                |p| self.is_explored(p) || speculated.contains(p),
                universe,
            );
            for g in generated {
                speculated.insert(g.clone());
                queue.push_back(g.clone());
                let saturated = self.padded_profiles.get(&g).is_some_and(|prof| prof.n >= config.tau);
                if !saturated && slots > 0 {
                    self.padded.insert(g.clone());
                    self.padding_order.push(g);
                    slots -= 1;
                }
            }
        }
        self.padding_order.clone()
    }
}

/// Analyst-side record of an owner kept for later rounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SavedOwner {
    pub remaining: usize,
    pub responded: BTreeSet<Pattern>,
}

/// Owners waiting for more work under the owner-reusing strategy.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReuseState {
    saved: BTreeMap<u64, SavedOwner>,
}

impl ReuseState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn saved(&self) -> &BTreeMap<u64, SavedOwner> {
        &self.saved
    }

    pub fn len(&self) -> usize {
        self.saved.len()
    }

    pub fn is_empty(&self) -> bool {
        self.saved.is_empty()
    }

    fn evict_exhausted(&mut self) {
        self.saved.retain(|_, s| s.remaining > 0);
    }
}

/// Source of never-before-used owner ids.
pub trait OwnerSupply {
    fn draw_fresh(&mut self) -> Option<u64>;
}

/// Ids `0, 1, 2, ...`, optionally capped.
#[derive(Debug, Clone, Default)]
pub struct CountingSupply {
    next: u64,
    cap: Option<u64>,
}

impl CountingSupply {
    pub fn new(cap: Option<u64>) -> Self {
        CountingSupply { next: 0, cap }
    }

    pub fn issued(&self) -> u64 {
        self.next
    }
}

impl OwnerSupply for CountingSupply {
    fn draw_fresh(&mut self) -> Option<u64> {
        if self.cap.is_some_and(|c| self.next >= c) {
            return None;
        }
        self.next += 1;
        Some(self.next - 1)
    }
}

/// Who answers what in one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundPlan {
    /// `(owner id, assignment)`, ordered by owner id.
    pub assignments: Vec<(u64, CandidateAssignment)>,
    pub fresh: Vec<u64>,
    pub reused: Vec<u64>,
}

impl RoundPlan {
    pub fn owner_count(&self) -> usize {
        self.assignments.len()
    }
}

/// Gives every round candidate exactly `P` distinct owners, using saved
/// owners first under owner reuse and then as few fresh owners as the `K`
/// packing bound allows.
///
/// Fresh owners are filled cyclically: with `D` outstanding slots and
/// `M = max(max demand, ceil(D/K))` owners, each candidate takes the next
/// `demand ≤ M` owners around the cycle, so its owners are distinct and no
/// owner receives more than `ceil(D/M) ≤ K` candidates.
pub fn plan_assignments<S: OwnerSupply + ?Sized>(
    round: &RoundCandidates,
    config: &AnalystConfig,
    reuse: &mut ReuseState,
    supply: &mut S,
) -> Result<RoundPlan, AnalystError> {
    let p = config.noise.p;
    let k = config.noise.k;
    let len = round.len();
    let mut demand = vec![p; len];
    let mut per_owner: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    let mut reused = Vec::new();

    if config.strategy == Strategy::OwnerReusing {
        reuse.evict_exhausted();
        for (&id, saved) in &reuse.saved {
            let mut capacity = saved.remaining.min(k);
            let mut mine = Vec::new();
            for (i, pattern) in round.patterns.iter().enumerate() {
                if capacity == 0 {
                    break;
                }
                if demand[i] > 0 && !saved.responded.contains(pattern) {
                    demand[i] -= 1;
                    capacity -= 1;
                    mine.push(i);
                }
            }
            if !mine.is_empty() {
                reused.push(id);
                per_owner.insert(id, mine);
            }
        }
    }

    let outstanding: usize = demand.iter().sum();
    let mut fresh = Vec::new();
    if outstanding > 0 {
        let max_demand = demand.iter().copied().max().unwrap_or(0);
        let needed = max_demand.max(outstanding.div_ceil(k));
        while fresh.len() < needed {
            match supply.draw_fresh() {
                Some(id) => fresh.push(id),
                None => return Err(AnalystError::OwnersExhausted { needed, obtained: fresh.len() }),
            }
        }
        let mut cursor = 0usize;
        for (i, &d) in demand.iter().enumerate() {
            for _ in 0..d {
                per_owner.entry(fresh[cursor % needed]).or_default().push(i);
                cursor += 1;
            }
        }
    }

    let mut assignments = Vec::with_capacity(per_owner.len());
    for (id, mut indices) in per_owner {
        indices.sort_unstable();
        let entries = indices.iter().map(|&i| (i, round.patterns[i].clone())).collect();
        assignments.push((id, CandidateAssignment::new(entries, len)?));
    }

    if config.strategy == Strategy::OwnerReusing {
        for (id, assignment) in &assignments {
            let saved = reuse
                .saved
                .entry(*id)
                .or_insert_with(|| SavedOwner { remaining: k, responded: BTreeSet::new() });
            saved.remaining -= assignment.len();
            saved.responded.extend(assignment.entries().iter().map(|(_, p)| p.clone()));
        }
        reuse.evict_exhausted();
    }

    Ok(RoundPlan { assignments, fresh, reused })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::PatternKind;

    fn set(ids: &[u32]) -> Pattern {
        Pattern::itemset(ids.iter().copied()).unwrap()
    }

    fn default_config(f: f64) -> AnalystConfig {
        AnalystConfig::new(NoiseParams::new(2.0, 50, 1000).unwrap(), f, Strategy::Vanilla).unwrap()
    }

    #[test]
    fn bound_terms_match_high_precision_values() {
        let c = default_config(0.1);
        // Reference values from a 40-digit evaluation of the closed forms.
        let g = geometric_term(&c.noise, 1, 0.01);
        assert!((g - 0.249_983_334_111_078_3).abs() < 1e-12, "{g}");
        let s = sampling_term(1000, 0.01);
        assert!((s - 0.047_985_259_121_880_81).abs() < 1e-12, "{s}");
        let b = bound_term(&CandidateProfile { r: 0, n: 1000, m: 1 }, &c).unwrap();
        assert!((b - 0.297_968_593_232_959_1).abs() < 1e-12);
    }

    #[test]
    fn bound_terms_scale_as_inverse_sqrt() {
        let c = default_config(0.1);
        let g1 = geometric_term(&c.noise, 3, 0.01);
        let g4 = geometric_term(&c.noise, 12, 0.01);
        assert!((g1 / g4 - 2.0).abs() < 1e-12);
        assert!((sampling_term(500, 0.01) / sampling_term(2000, 0.01) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bound_requires_responses() {
        let c = default_config(0.1);
        assert_eq!(bound_term(&CandidateProfile::default(), &c), Err(AnalystError::NoResponses));
        assert_eq!(filter_candidate(&CandidateProfile::default(), &c), FilterDecision::Hold);
    }

    #[test]
    fn filter_examples() {
        let accept = CandidateProfile { r: 400, n: 1000, m: 1 };
        assert_eq!(classify(&accept, &default_config(0.10)), (FilterDecision::AcceptFrequent, FilterRule::UpperConfidence));
        let reject = CandidateProfile { r: 0, n: 1000, m: 1 };
        assert_eq!(
            classify(&reject, &default_config(0.40)),
            (FilterDecision::RejectInfrequent, FilterRule::LowerConfidence)
        );
        let mut c = default_config(0.05);
        c.tau = 5000;
        let forced = CandidateProfile { r: 350, n: 5000, m: 5 };
        assert_eq!(classify(&forced, &c), (FilterDecision::AcceptFrequent, FilterRule::ForcedByTau));
        let forced_low = CandidateProfile { r: 200, n: 5000, m: 5 };
        assert_eq!(classify(&forced_low, &c), (FilterDecision::RejectInfrequent, FilterRule::ForcedByTau));
        let hold = CandidateProfile { r: 350, n: 4000, m: 4 };
        assert_eq!(filter_candidate(&hold, &c), FilterDecision::Hold);
    }

    #[test]
    fn config_validation() {
        let n = NoiseParams::new(2.0, 50, 100).unwrap();
        assert!(AnalystConfig::new(n, 0.0, Strategy::Vanilla).is_err());
        assert!(AnalystConfig::new(n, 1.0, Strategy::Vanilla).is_err());
        let mut c = AnalystConfig::new(n, 0.1, Strategy::Vanilla).unwrap();
        assert_eq!(c.tau, 2000);
        c.tau = 150;
        assert!(c.validate().is_err());
        c.tau = 50;
        assert!(c.validate().is_err());
        c.tau = 100;
        c.eta_g = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert!("greedy".parse::<Strategy>().is_err());
    }

    #[test]
    fn profile_updates_accumulate() {
        let mut pool = CandidatePool::with_candidates([set(&[1]), set(&[2])]);
        let round = pool.round_candidates();
        pool.update_profiles(&round, &[812, -3], 1000).unwrap();
        assert_eq!(pool.live()[&set(&[1])], CandidateProfile { r: 812, n: 1000, m: 1 });
        assert_eq!(pool.live()[&set(&[2])], CandidateProfile { r: -3, n: 1000, m: 1 });
        assert!(pool.live()[&set(&[2])].ratio() < 0.0);
        let round = pool.round_candidates();
        pool.update_profiles(&round, &[790, 0], 1000).unwrap();
        assert_eq!(pool.live()[&set(&[1])], CandidateProfile { r: 1602, n: 2000, m: 2 });
        assert_eq!(
            pool.update_profiles(&round, &[1], 1000),
            Err(AnalystError::LengthMismatch { expected: 2, got: 1 })
        );
    }

    #[test]
    fn round_indices_follow_entry_then_canonical_order() {
        let u = PatternUniverse::with_default_length(4, PatternKind::Itemset);
        let mut pool = CandidatePool::with_candidates([set(&[2]), set(&[0]), set(&[1]), set(&[3])]);
        let round = pool.round_candidates();
        assert_eq!(round.patterns(), &[set(&[0]), set(&[1]), set(&[2]), set(&[3])]);
        pool.update_profiles(&round, &[900, 900, 900, 0], 1000).unwrap();
        pool.filter(&default_config(0.1));
        assert_eq!(pool.accepted().len(), 3);
        pool.grow_candidates(&u);
        let round = pool.round_candidates();
        assert_eq!(round.patterns(), &[set(&[3]), set(&[0, 1]), set(&[0, 2]), set(&[1, 2])]);
    }

    #[test]
    fn growth_examples() {
        let u = PatternUniverse::with_default_length(5, PatternKind::Itemset);
        let mut pool = CandidatePool::new();
        pool.accepted = [set(&[1, 2]), set(&[1, 3])].into();
        assert!(pool.grow_candidates(&u).is_empty());
        pool.accepted.insert(set(&[2, 3]));
        assert_eq!(pool.grow_candidates(&u), vec![set(&[1, 2, 3])]);
        assert_eq!(pool.live()[&set(&[1, 2, 3])], CandidateProfile::default());

        let mut pool = CandidatePool::new();
        pool.accepted = [set(&[1, 2]), set(&[1, 3]), set(&[2, 3])].into();
        pool.rejected = [set(&[1, 2, 3])].into();
        assert!(pool.grow_candidates(&u).is_empty());
    }

    #[test]
    fn filter_moves_decided_candidates() {
        let mut pool = CandidatePool::with_candidates([set(&[1]), set(&[2]), set(&[3])]);
        let round = pool.round_candidates();
        pool.update_profiles(&round, &[400, 0, 200], 1000).unwrap();
        let counts = pool.filter(&default_config(0.1));
        assert_eq!(counts, FilterCounts { accepted: 1, rejected: 0, held: 2 });
        assert!(pool.accepted().contains(&set(&[1])));
        assert!(pool.accepted().is_disjoint(pool.rejected()));
    }

    #[test]
    fn padding_trace() {
        let u = PatternUniverse::with_default_length(5, PatternKind::Itemset);
        let mut c = default_config(0.1);
        c.strategy = Strategy::CandidatePadding;
        c.noise.k = 4;
        let mut pool = CandidatePool::new();
        pool.accepted = [set(&[1]), set(&[2]), set(&[3])].into();
        pool.insert_live(set(&[1, 2]), CandidateProfile { r: 900, n: 1000, m: 1 });
        pool.insert_live(set(&[1, 3]), CandidateProfile { r: 800, n: 1000, m: 1 });
        pool.insert_live(set(&[2, 3]), CandidateProfile { r: 700, n: 1000, m: 1 });
        assert_eq!(pool.pad_candidates(&c, &u), vec![set(&[1, 2, 3])]);
        let round = pool.round_candidates();
        assert_eq!(round.len(), 4);
        assert!(round.is_padded(3));
        pool.update_profiles(&round, &[1, 2, 3, 640], 1000).unwrap();
        assert_eq!(pool.padded_profiles()[&set(&[1, 2, 3])], CandidateProfile { r: 640, n: 1000, m: 1 });

        // Promotion carries the virtual profile over.
        for p in [set(&[1, 2]), set(&[1, 3]), set(&[2, 3])] {
            pool.live.remove(&p);
            pool.accepted.insert(p);
        }
        assert_eq!(pool.grow_candidates(&u), vec![set(&[1, 2, 3])]);
        assert_eq!(pool.live()[&set(&[1, 2, 3])], CandidateProfile { r: 640, n: 1000, m: 1 });
        assert!(pool.padded().is_empty());
    }

    #[test]
    fn padding_noop_cases() {
        let u = PatternUniverse::with_default_length(5, PatternKind::Itemset);
        let mut c = default_config(0.1);
        c.strategy = Strategy::CandidatePadding;
        c.noise.k = 2;
        let mut pool = CandidatePool::with_candidates([set(&[1]), set(&[2])]);
        assert!(pool.pad_candidates(&c, &u).is_empty());

        let ui = PatternUniverse::with_default_length(5, PatternKind::Item);
        c.noise.k = 50;
        let mut pool = CandidatePool::with_candidates((0..5).map(Pattern::item));
        assert!(pool.pad_candidates(&c, &ui).is_empty());

        c.strategy = Strategy::Vanilla;
        let mut pool = CandidatePool::with_candidates([set(&[1]), set(&[2])]);
        assert!(pool.pad_candidates(&c, &u).is_empty());
    }

    #[test]
    fn padding_speculates_from_fresh_singletons() {
        let u = PatternUniverse::with_default_length(3, PatternKind::Itemset);
        let mut c = default_config(0.1);
        c.strategy = Strategy::CandidatePadding;
        c.noise.k = 50;
        let mut pool = CandidatePool::with_candidates([set(&[0]), set(&[1]), set(&[2])]);
        let padded = pool.pad_candidates(&c, &u);
        assert_eq!(padded, vec![set(&[0, 1]), set(&[0, 2]), set(&[1, 2]), set(&[0, 1, 2])]);
    }

    fn plan_config(p: usize, k: usize, strategy: Strategy) -> AnalystConfig {
        AnalystConfig::new(NoiseParams::new(2.0, k, p).unwrap(), 0.1, strategy).unwrap()
    }

    fn check_plan(plan: &RoundPlan, round: &RoundCandidates, c: &AnalystConfig) {
        let mut per_candidate = vec![BTreeSet::new(); round.len()];
        for (id, a) in &plan.assignments {
            assert!(a.len() <= c.noise.k);
            for (i, _) in a.entries() {
                assert!(per_candidate[*i].insert(*id));
            }
        }
        assert!(per_candidate.iter().all(|s| s.len() == c.noise.p));
        let lower = (round.len() * c.noise.p).div_ceil(c.noise.k);
        assert!(plan.owner_count() >= lower);
    }

    #[test]
    fn plan_single_candidate() {
        let c = plan_config(3, 50, Strategy::Vanilla);
        let round = CandidatePool::with_candidates([set(&[1])]).round_candidates();
        let plan = plan_assignments(&round, &c, &mut ReuseState::new(), &mut CountingSupply::new(None)).unwrap();
        assert_eq!(plan.fresh, vec![0, 1, 2]);
        assert!(plan.assignments.iter().all(|(_, a)| a.len() == 1));
        check_plan(&plan, &round, &c);
    }

    #[test]
    fn plan_packing_bound() {
        let c = plan_config(7, 10, Strategy::Vanilla);
        let round = CandidatePool::with_candidates((0..10).map(|i| set(&[i]))).round_candidates();
        let plan = plan_assignments(&round, &c, &mut ReuseState::new(), &mut CountingSupply::new(None)).unwrap();
        assert_eq!(plan.owner_count(), 7);
        assert!(plan.assignments.iter().all(|(_, a)| a.len() == 10));

        for (n, p, k) in [(23usize, 5usize, 4usize), (3, 10, 2), (50, 13, 7)] {
            let c = plan_config(p, k, Strategy::Vanilla);
            let round = CandidatePool::with_candidates((0..n as u32).map(|i| set(&[i]))).round_candidates();
            let plan = plan_assignments(&round, &c, &mut ReuseState::new(), &mut CountingSupply::new(None)).unwrap();
            check_plan(&plan, &round, &c);
            assert_eq!(plan.owner_count(), p.max((n * p).div_ceil(k)));
        }
    }

    #[test]
    fn plan_exhaustion() {
        let c = plan_config(3, 50, Strategy::Vanilla);
        let round = CandidatePool::with_candidates([set(&[1])]).round_candidates();
        let err = plan_assignments(&round, &c, &mut ReuseState::new(), &mut CountingSupply::new(Some(2))).unwrap_err();
        assert_eq!(err, AnalystError::OwnersExhausted { needed: 3, obtained: 2 });
    }

    #[test]
    fn reuse_two_round_scenario() {
        let c = plan_config(20, 50, Strategy::OwnerReusing);
        let mut reuse = ReuseState::new();
        let mut supply = CountingSupply::new(None);
        let r1 = CandidatePool::with_candidates((0..10).map(|i| set(&[i]))).round_candidates();
        let plan1 = plan_assignments(&r1, &c, &mut reuse, &mut supply).unwrap();
        check_plan(&plan1, &r1, &c);
        assert_eq!(plan1.fresh.len(), 20);
        assert_eq!(reuse.len(), 20);
        assert!(reuse.saved().values().all(|s| s.remaining == 40));

        let r2 = CandidatePool::with_candidates((10..15).map(|i| set(&[i]))).round_candidates();
        let plan2 = plan_assignments(&r2, &c, &mut reuse, &mut supply).unwrap();
        check_plan(&plan2, &r2, &c);
        assert!(plan2.fresh.is_empty());
        assert_eq!(plan2.reused.len(), 20);
        assert_eq!(supply.issued(), 20);
        assert!(reuse.saved().values().all(|s| s.remaining == 35));
    }

    #[test]
    fn reuse_never_repeats_a_candidate_and_evicts_spent_owners() {
        let c = plan_config(4, 3, Strategy::OwnerReusing);
        let mut reuse = ReuseState::new();
        let mut supply = CountingSupply::new(None);
        let pool = CandidatePool::with_candidates([set(&[0]), set(&[1])]);
        let r = pool.round_candidates();
        plan_assignments(&r, &c, &mut reuse, &mut supply).unwrap();
        // Same candidates again: saved owners have answered them already.
        let plan = plan_assignments(&r, &c, &mut reuse, &mut supply).unwrap();
        check_plan(&plan, &r, &c);
        assert!(plan.reused.is_empty());
        assert_eq!(plan.fresh.len(), 4);
        let r3 = CandidatePool::with_candidates([set(&[2])]).round_candidates();
        let plan = plan_assignments(&r3, &c, &mut reuse, &mut supply).unwrap();
        assert_eq!(plan.reused.len(), 4);
        assert!(plan.fresh.is_empty());
        // The four owners that just answered {2} are now spent.
        assert_eq!(reuse.len(), 4);
        assert!(reuse.saved().values().all(|s| s.remaining > 0 && s.remaining <= c.noise.k));
    }
}
