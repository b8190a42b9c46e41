//! Measurement harness: per-element bandwidth sweeps and per-layer model timing.

mod apply;
mod model;
mod report;
mod spec;

pub use apply::{bench_apply, parse_sizes, ApplyBenchConfig, BandwidthRow, DEFAULT_EXPRESSION, DEFAULT_SIZES, MIN_REPS};
pub use model::{bench_model, LayerRow, ModelBenchConfig, ModelReport, SummaryRow};
pub use report::{gnuplot_bandwidth_script, gnuplot_script, write_bandwidth_csv, write_layer_csv, write_summary_csv, BANDWIDTH_COLUMNS, LAYER_COLUMNS, SUMMARY_COLUMNS};
pub use spec::{LayerSpec, ModelSpec, Shape, BUNDLED_MODELS};

use std::time::{Duration, Instant};

/// Runs `f` once untimed, then `reps` timed times on the monotonic clock;
/// returns the mean of the timed runs.
pub(crate) fn time_mean<T>(reps: usize, mut f: impl FnMut() -> crate::Result<T>) -> crate::Result<(Duration, T)> {
    let mut last = f()?;
    let mut total = Duration::ZERO;
    for _ in 0..reps {
        let start = Instant::now();
        last = f()?;
        total += start.elapsed();
    }
    Ok((total / reps.max(1) as u32, last))
}
