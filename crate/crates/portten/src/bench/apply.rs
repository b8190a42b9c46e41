use portten_core::codegen::ApplySpec;
use portten_core::Tensor;

use super::time_mean;
use crate::backend::{dispatch_apply, Backend};
use crate::{Error, Result};

pub const DEFAULT_SIZES: [usize; 5] = [1_000, 10_000, 100_000, 1_000_000, 10_000_000];
pub const DEFAULT_EXPRESSION: &str = "x = x + 1";
pub const MIN_REPS: usize = 3;

/// Bytes moved per element: one read plus one write of an f32.
const BYTES_PER_ELEMENT: f64 = 4.0 * 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ApplyBenchConfig {
    pub sizes: Vec<usize>,
    pub reps: usize,
    pub expression: String,
}

impl Default for ApplyBenchConfig {
    fn default() -> Self {
        Self {
            sizes: DEFAULT_SIZES.to_vec(),
            reps: 5,
            expression: DEFAULT_EXPRESSION.into(),
        }
    }
}

impl ApplyBenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps < MIN_REPS {
            return Err(Error::Validation(format!("--reps must be at least {MIN_REPS}, got {}", self.reps)));
        }
        if self.sizes.is_empty() {
            return Err(Error::Validation("no sizes given".into()));
        }
        if self.sizes.contains(&0) {
            return Err(Error::Validation("sizes must be at least 1".into()));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!("sizes must be strictly ascending: {:?}", self.sizes)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthRow {
    pub size: usize,
    pub reps: usize,
    /// `None` when the size could not be allocated.
    pub mean_time_s: Option<f64>,
}

impl BandwidthRow {
    pub fn gb_per_s(&self) -> Option<f64> {
        self.mean_time_s.map(|t| self.size as f64 * BYTES_PER_ELEMENT / t / 1e9)
    }

    pub fn skipped(&self) -> bool {
        self.mean_time_s.is_none()
    }
}

/// Parses a comma-separated list such as `1e3,1e4,25000`.
pub fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|item| {
            let item = item.trim();
            let value: f64 = item
                .parse()
                .map_err(|_| Error::Validation(format!("size {item:?} is not a number")))?;
            if !(value >= 1.0 && value.fract() == 0.0 && value <= usize::MAX as f64) {
                return Err(Error::Validation(format!("size {item:?} must be a positive integer")));
            }
            Ok(value as usize)
        })
        .collect()
}

/// One row per size: the unary apply is dispatched once to warm the kernel
/// cache, then timed over `reps` dispatches.
pub fn bench_apply(backend: &dyn Backend, config: &ApplyBenchConfig) -> Result<Vec<BandwidthRow>> {
    config.validate()?;
    let spec = ApplySpec::new(1, &config.expression)?;
    let mut rows = Vec::with_capacity(config.sizes.len());
    for &size in &config.sizes {
        let x = match Tensor::zeros(&[size]) {
            Ok(x) => x,
            Err(portten_core::Error::Alloc(_)) => {
                log::warn!("skipping size {size}: allocation failed");
                rows.push(BandwidthRow { size, reps: config.reps, mean_time_s: None });
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let (mean, ()) = time_mean(config.reps, || dispatch_apply(backend, &spec, &[&x], 0.0))?;
        log::info!("apply size {size}: {:.3e} s", mean.as_secs_f64());
        rows.push(BandwidthRow { size, reps: config.reps, mean_time_s: Some(mean.as_secs_f64()) });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ReferenceBackend;

    #[test]
    fn parses_scientific_sizes() {
        assert_eq!(parse_sizes("1e3, 1e4,25000").unwrap(), vec![1000, 10000, 25000]);
        assert!(parse_sizes("1.5").is_err());
        assert!(parse_sizes("0").is_err());
        assert!(parse_sizes("ten").is_err());
    }

    #[test]
    fn rejects_too_few_reps() {
        let config = ApplyBenchConfig { reps: 1, ..Default::default() };
        assert!(matches!(bench_apply(&ReferenceBackend::new(), &config), Err(Error::Validation(_))));
    }

    #[test]
    fn rejects_unsorted_sizes() {
        let config = ApplyBenchConfig { sizes: vec![100, 10], ..Default::default() };
        assert!(config.validate().is_err());
    }

    #[test]
    fn one_positive_row_per_size() {
        let config = ApplyBenchConfig { sizes: vec![10, 1000], reps: 3, ..Default::default() };
        let rows = bench_apply(&ReferenceBackend::new(), &config).unwrap();
        assert_eq!(rows.iter().map(|r| r.size).collect::<Vec<_>>(), vec![10, 1000]);
        assert!(rows.iter().all(|r| r.reps == 3 && r.gb_per_s().unwrap() > 0.0));
    }
}
