//! Chi-square goodness-of-fit for integer-valued samplers.

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Significance level used by every goodness-of-fit check in the test suites.
pub const SIGNIFICANCE: f64 = 0.001;

/// Support is truncated where the remaining tail mass drops below this.
pub const TAIL_MASS: f64 = 1e-7;

/// Minimum expected count per pooled cell.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GofOutcome {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub cells: usize,
}

impl GofOutcome {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value >= significance
    }
}

/// Histogram of integer samples.
pub fn histogram<I: IntoIterator<Item = i64>>(samples: I) -> BTreeMap<i64, u64> {
    let mut h = BTreeMap::new();
    for s in samples {
        *h.entry(s).or_insert(0) += 1;
    }
    h
}

/// Chi-square test of `counts` against `pmf`.
///
/// The support is grown outward from `centre` until the covered mass reaches
/// `1 − TAIL_MASS`; everything outside is pooled into the two end cells, and
/// adjacent cells are merged left to right until each expects at least
/// [`MIN_EXPECTED`] observations.
pub fn chi_square_gof<F>(counts: &BTreeMap<i64, u64>, pmf: F, centre: i64) -> GofOutcome
where
    F: Fn(i64) -> f64,
{
    let n: u64 = counts.values().sum();
    let nf = n as f64;
    let (mut lo, mut hi) = (centre, centre);
    let mut mass = pmf(centre);
    // Hard cap so a pmf with a mistaken normalisation cannot loop forever.
    for _ in 0..10_000_000 {
        if mass >= 1.0 - TAIL_MASS {
            break;
        }
        let (left, right) = (pmf(lo - 1), pmf(hi + 1));
        if left <= 0.0 && right <= 0.0 && pmf(lo - 2) <= 0.0 && pmf(hi + 2) <= 0.0 {
            break;
        }
        if left >= right {
            lo -= 1;
            mass += left;
        } else {
            hi += 1;
            mass += right;
        }
    }
    let outside = (1.0 - mass).max(0.0);
    let left_has_support = pmf(lo - 1) > 0.0;
    let right_has_support = pmf(hi + 1) > 0.0;
    let (left_share, right_share) = match (left_has_support, right_has_support) {
        (true, true) => {
            let (l, r) = (pmf(lo - 1), pmf(hi + 1));
            (outside * l / (l + r), outside * r / (l + r))
        }
        (true, false) => (outside, 0.0),
        _ => (0.0, outside),
    };

    let mut cells: Vec<(f64, f64)> = (lo..=hi)
        .map(|x| (nf * pmf(x), counts.get(&x).copied().unwrap_or(0) as f64))
        .collect();
    let below: u64 = counts.range(..lo).map(|(_, &c)| c).sum();
    let above: u64 = counts.range(hi + 1..).map(|(_, &c)| c).sum();
    if let Some(first) = cells.first_mut() {
        first.0 += nf * left_share;
        first.1 += below as f64;
    }
    if let Some(last) = cells.last_mut() {
        last.0 += nf * right_share;
        last.1 += above as f64;
    }

    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (e, o) in cells {
        acc.0 += e;
        acc.1 += o;
        if acc.0 >= MIN_EXPECTED {
            pooled.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 > 0.0 || acc.1 > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => pooled.push(acc),
        }
    }

    let statistic: f64 = pooled.iter().map(|&(e, o)| (o - e) * (o - e) / e).sum();
    let dof = pooled.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).map(|d| d.sf(statistic)).unwrap_or(0.0)
    };
    GofOutcome { statistic, dof, p_value, cells: pooled.len() }
}

/// Sample mean and its standard error.
pub fn mean_and_standard_error(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Unbiased sample variance.
pub fn sample_variance(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}
