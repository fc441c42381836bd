use ddp_fpm::analyst::{AnalystConfig, Strategy};
use ddp_fpm::data::{generate_synthetic, SyntheticSpec};
use ddp_fpm::patterns::{PatternKind, PatternUniverse};
use ddp_fpm::privacy::{geometric_pmf, NoiseParams, OwnerNoiseSampler};
use ddp_fpm::runtime::{run_experiment_traced, ExperimentConfig};
use ddp_fpm::seeding::{rng_from_seed, stream_rng, Stream};
use ddp_fpm::stats::{chi_square_gof, histogram, mean_and_standard_error, sample_variance, SIGNIFICANCE};
use rand::distr::Distribution;

#[test]
fn owner_share_moments() {
    let params = NoiseParams::new(2.0, 50, 1000).unwrap();
    let share = params.owner_share();
    let sampler = OwnerNoiseSampler::new(&params).unwrap();
    let mut rng = rng_from_seed(11);
    let draws: Vec<f64> = (0..400_000).map(|_| sampler.sample(&mut rng) as f64).collect();
    let (mean, se) = mean_and_standard_error(&draws);
    assert!(mean.abs() < 4.0 * se, "mean {mean} se {se}");
    let expected = 2.0 * share.variance();
    let var = sample_variance(&draws);
    // The share is extremely heavy-tailed, so only a loose check is meaningful.
    assert!((var / expected - 1.0).abs() < 0.25, "variance {var} vs {expected}");
}

#[test]
fn noise_seen_by_the_analyst_is_geometric() {
    let spec = SyntheticSpec::nested_workload(20_000, PatternKind::Itemset).unwrap();
    let data = generate_synthetic(&spec, &mut stream_rng(3, Stream::Synthetic, &[])).unwrap();
    let noise = NoiseParams::new(2.0, 50, 200).unwrap();
    let analyst = AnalystConfig::new(noise, 0.05, Strategy::OwnerReusing).unwrap();
    let config = ExperimentConfig::new(analyst, PatternUniverse::with_default_length(30, PatternKind::Itemset), 3);
    let mut residuals = Vec::new();
    let result = run_experiment_traced(&config, &data, |t| {
        residuals.extend(t.aggregated.iter().zip(t.clean).map(|(a, c)| a - c));
    })
    .unwrap();
    assert!(!result.exhausted);
    assert!(residuals.len() > 500, "only {} residuals", residuals.len());
    let alpha = noise.alpha();
    let gof = chi_square_gof(&histogram(residuals), |x| geometric_pmf(alpha, x), 0);
    assert!(gof.passes(SIGNIFICANCE), "{gof:?}");
}
