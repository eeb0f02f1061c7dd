//! Seeded percentile bootstrap for confidence intervals.

use super::MetricsError;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Percentile-bootstrap confidence interval of `metric` over `items`.
///
/// Each of `iters` resamples draws `items.len()` elements with replacement.
/// Resamples on which the metric is undefined are dropped; the percentile
/// runs over the defined values only. Deterministic for a given seed.
pub fn bootstrap_ci<T: Clone, F>(
    items: &[T],
    metric: F,
    iters: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64), MetricsError>
where
    F: Fn(&[T]) -> Option<f64>,
{
    if items.is_empty() {
        return Err(MetricsError::EmptyInput("nothing to resample"));
    }
    if iters == 0 {
        return Err(MetricsError::DomainError("bootstrap needs at least one iteration".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(MetricsError::DomainError(format!(
            "confidence level {level} outside (0,1)"
        )));
    }

    let n = items.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Vec::with_capacity(iters);
    let mut sample = Vec::with_capacity(n);
    for _ in 0..iters {
        sample.clear();
        for _ in 0..n {
            sample.push(items[rng.random_range(0..n)].clone());
        }
        if let Some(v) = metric(&sample) {
            stats.push(v);
        }
    }
    if stats.is_empty() {
        return Err(MetricsError::DomainError(
            "metric undefined on every bootstrap resample".into(),
        ));
    }
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok((percentile(&stats, alpha), percentile(&stats, 1.0 - alpha)))
}

/// Lower empirical percentile: element at rank ceil(q·B), 1-based, clamped.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let b = sorted.len();
    let rank = (q * b as f64).ceil() as usize;
    sorted[rank.clamp(1, b) - 1]
}
