//! Pólya and two-sided geometric distributions.
//!
//! Each responding owner adds `X − Y` with `X, Y ~ Pólya(1/P, α)`. Summed over
//! the `P` responders of a candidate, those shares form exactly one draw of
//! the two-sided geometric mechanism with parameter `α = exp(−ε/K)`, which is
//! `ε/K`-DP for a sensitivity-one count.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrivacyError {
    #[error("epsilon must be finite and positive, got {0}")]
    Epsilon(f64),
    #[error("K (candidates per owner) must be positive")]
    ZeroBudget,
    #[error("P (responders per candidate) must be positive")]
    ZeroResponders,
    #[error("Pólya shape must be finite and positive, got {0}")]
    Shape(f64),
    #[error("Pólya probability must lie in (0, 1), got {0}")]
    Probability(f64),
}

/// Privacy budget `ε`, per-owner candidate budget `K` and per-candidate
/// responder count `P`. `α` is always recomputed from `ε/K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub epsilon: f64,
    pub k: usize,
    pub p: usize,
}

impl NoiseParams {
    pub fn new(epsilon: f64, k: usize, p: usize) -> Result<Self, PrivacyError> {
        let params = NoiseParams { epsilon, k, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), PrivacyError> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(PrivacyError::Epsilon(self.epsilon));
        }
        if self.k == 0 {
            return Err(PrivacyError::ZeroBudget);
        }
        if self.p == 0 {
            return Err(PrivacyError::ZeroResponders);
        }
        let alpha = self.alpha();
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(PrivacyError::Probability(alpha));
        }
        Ok(())
    }

    /// Per-candidate privacy loss `ε/K`.
    pub fn per_candidate_epsilon(&self) -> f64 {
        self.epsilon / self.k as f64
    }

    /// `α = exp(−ε/K)`.
    pub fn alpha(&self) -> f64 {
        (-self.per_candidate_epsilon()).exp()
    }

    /// Distribution of each owner's `X` and `Y`: `Pólya(1/P, α)`.
    pub fn owner_share(&self) -> PolyaParams {
        PolyaParams { r: 1.0 / self.p as f64, p: self.alpha() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyaParams {
    pub r: f64,
    pub p: f64,
}

impl PolyaParams {
    pub fn new(r: f64, p: f64) -> Result<Self, PrivacyError> {
        if !(r.is_finite() && r > 0.0) {
            return Err(PrivacyError::Shape(r));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(PrivacyError::Probability(p));
        }
        Ok(PolyaParams { r, p })
    }

    pub fn mean(&self) -> f64 {
        self.r * self.p / (1.0 - self.p)
    }

    pub fn variance(&self) -> f64 {
        self.r * self.p / ((1.0 - self.p) * (1.0 - self.p))
    }
}

/// Poisson–Gamma mixture sampler for `Pólya(r, p)`: draw
/// `γ ~ Gamma(shape r, scale p/(1−p))`, then `Poisson(γ)`.
#[derive(Debug, Clone, Copy)]
pub struct PolyaSampler {
    gamma: Gamma<f64>,
}

impl PolyaSampler {
    pub fn new(params: PolyaParams) -> Result<Self, PrivacyError> {
        let params = PolyaParams::new(params.r, params.p)?;
        let scale = params.p / (1.0 - params.p);
        let gamma = Gamma::new(params.r, scale).map_err(|_| PrivacyError::Shape(params.r))?;
        Ok(PolyaSampler { gamma })
    }
}

impl Distribution<u64> for PolyaSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let rate = self.gamma.sample(rng);
        // Small shapes routinely underflow the gamma draw to zero.
        if !(rate > 0.0) {
            return 0;
        }
        match Poisson::new(rate) {
            Ok(poisson) => poisson.sample(rng) as u64,
            Err(_) => u64::MAX,
        }
    }
}

pub fn sample_polya<R: Rng + ?Sized>(params: PolyaParams, rng: &mut R) -> Result<u64, PrivacyError> {
    Ok(PolyaSampler::new(params)?.sample(rng))
}

/// `Γ(r+x)/(Γ(r)·x!) · p^x · (1−p)^r`, evaluated in log space.
pub fn polya_pmf(params: PolyaParams, x: u64) -> f64 {
    let PolyaParams { r, p } = params;
    let xf = x as f64;
    let log_coeff = ln_gamma(r + xf) - ln_gamma(r) - ln_gamma(xf + 1.0);
    (log_coeff + xf * p.ln() + r * (1.0 - p).ln()).exp()
}

/// Two-sided geometric PMF `((1−α)/(1+α))·α^|x|`.
pub fn geometric_pmf(alpha: f64, x: i64) -> f64 {
    (1.0 - alpha) / (1.0 + alpha) * alpha.powf(x.unsigned_abs() as f64)
}

/// `Var(G(α)) = 2α/(1−α)²`.
pub fn geometric_variance(alpha: f64) -> f64 {
    2.0 * alpha / ((1.0 - alpha) * (1.0 - alpha))
}

/// One owner's noise share `X − Y`.
#[derive(Debug, Clone, Copy)]
pub struct OwnerNoiseSampler {
    share: PolyaSampler,
}

impl OwnerNoiseSampler {
    pub fn new(params: &NoiseParams) -> Result<Self, PrivacyError> {
        params.validate()?;
        Ok(OwnerNoiseSampler { share: PolyaSampler::new(params.owner_share())? })
    }
}

impl Distribution<i64> for OwnerNoiseSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let x = self.share.sample(rng) as i64;
        let y = self.share.sample(rng) as i64;
        x - y
    }
}

pub fn sample_owner_noise<R: Rng + ?Sized>(params: &NoiseParams, rng: &mut R) -> Result<i64, PrivacyError> {
    Ok(OwnerNoiseSampler::new(params)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from_seed;

    #[test]
    fn alpha_is_derived() {
        let n = NoiseParams::new(2.0, 50, 1000).unwrap();
        assert_eq!(n.alpha(), (-0.04f64).exp());
        assert_eq!(n.owner_share(), PolyaParams { r: 0.001, p: (-0.04f64).exp() });
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(NoiseParams::new(0.0, 50, 10).is_err());
        assert!(NoiseParams::new(f64::NAN, 50, 10).is_err());
        assert!(NoiseParams::new(1.0, 0, 10).is_err());
        assert!(NoiseParams::new(1.0, 5, 0).is_err());
        assert!(PolyaParams::new(0.0, 0.5).is_err());
        assert!(PolyaParams::new(1.0, 1.0).is_err());
        assert!(PolyaParams::new(1.0, 0.0).is_err());
    }

    #[test]
    fn polya_pmf_at_zero() {
        let p = PolyaParams::new(1.0, 0.5).unwrap();
        assert!((polya_pmf(p, 0) - 0.5).abs() < 1e-15);
        let p = PolyaParams::new(0.37, 0.8).unwrap();
        assert!((polya_pmf(p, 0) - 0.2f64.powf(0.37)).abs() < 1e-14);
    }

    #[test]
    fn polya_pmf_integer_shape_is_geometric() {
        let p = PolyaParams::new(1.0, 0.7).unwrap();
        for x in 0..40u64 {
            let expect = 0.3 * 0.7f64.powi(x as i32);
            assert!((polya_pmf(p, x) - expect).abs() < 1e-14 * expect.max(1e-300) + 1e-16, "x={x}");
        }
    }

    #[test]
    fn polya_pmf_tail_mass() {
        let p = PolyaParams::new(0.001, 0.96).unwrap();
        let total: f64 = (0..=10_000u64).map(|x| polya_pmf(p, x)).sum();
        assert!(total >= 1.0 - 1e-9, "total={total}");
        assert!(total <= 1.0 + 1e-9);
    }

    #[test]
    fn geometric_pmf_symmetry_and_centre() {
        let a = 0.8;
        assert!((geometric_pmf(a, 0) - 0.2 / 1.8).abs() < 1e-15);
        for x in 0..50 {
            assert_eq!(geometric_pmf(a, x), geometric_pmf(a, -x));
        }
    }

    #[test]
    fn geometric_variance_by_summation() {
        let a = (-0.04f64).exp();
        let summed: f64 = (-20_000i64..=20_000).map(|x| (x * x) as f64 * geometric_pmf(a, x)).sum();
        assert!((summed - geometric_variance(a)).abs() < 1e-6 * summed);
        // 2α/(1−α)² at α = e^−0.04, evaluated to 40 digits.
        assert!((summed - 1249.833_346_665_82).abs() < 1e-6, "{summed}");
    }

    #[test]
    fn sampler_is_deterministic() {
        let params = NoiseParams::new(2.0, 50, 100).unwrap();
        let draws = |seed| {
            let mut rng = rng_from_seed(seed);
            (0..100).map(|_| sample_owner_noise(&params, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draws(5), draws(5));
    }

    #[test]
    fn polya_zero_probability_matches() {
        // P(X = 0) = 0.5 for r = 1, p = 0.5.
        let sampler = PolyaSampler::new(PolyaParams::new(1.0, 0.5).unwrap()).unwrap();
        let mut rng = rng_from_seed(11);
        let n = 200_000;
        let zeros = (0..n).filter(|_| sampler.sample(&mut rng) == 0).count();
        let frac = zeros as f64 / n as f64;
        assert!((frac - 0.5).abs() < 4.0 * (0.25f64 / n as f64).sqrt(), "{frac}");
    }
}
