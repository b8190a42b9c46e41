use portten_core::codegen::ApplySpec;
use portten_core::conv::{conv_backward_input, conv_backward_weight, ConvGeometry};
use portten_core::layers::{maxpool_backward, maxpool_forward, relu_backward};
use portten_core::Tensor;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::spec::{LayerSpec, ModelSpec};
use super::{time_mean, MIN_REPS};
use crate::backend::{dispatch_apply, Backend};
use crate::registry::SharedRegistry;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBenchConfig {
    pub scale: usize,
    pub batch: usize,
    pub reps: usize,
    /// Convolution implementation to force; registry selection when `None`.
    pub implementation: Option<String>,
    pub backward: bool,
    pub seed: u64,
}

impl Default for ModelBenchConfig {
    fn default() -> Self {
        Self {
            scale: 16,
            batch: 2,
            reps: 3,
            implementation: None,
            backward: false,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerRow {
    pub index: usize,
    pub kind: &'static str,
    pub geometry: String,
    pub mean_time_s: f64,
    /// Sum of the layer's forward output.
    pub checksum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub kind: &'static str,
    pub total_time_s: f64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelReport {
    pub model: String,
    pub layers: Vec<LayerRow>,
    pub summary: Vec<SummaryRow>,
}

impl ModelReport {
    pub fn total_time_s(&self) -> f64 {
        self.layers.iter().map(|l| l.mean_time_s).sum()
    }

    pub fn share(&self, kind: &str) -> f64 {
        self.summary.iter().find(|s| s.kind == kind).map_or(0.0, |s| s.percent)
    }
}

fn uniform(sizes: &[usize], bound: f32, rng: &mut StdRng) -> Result<Tensor> {
    let n = sizes.iter().product();
    Ok(Tensor::from_vec(sizes, (0..n).map(|_| rng.gen_range(-bound..=bound)).collect())?)
}

fn checksum(t: &Tensor) -> f64 {
    t.to_vec().iter().map(|&v| v as f64).sum()
}

fn summarize(layers: &[LayerRow]) -> Vec<SummaryRow> {
    let total: f64 = layers.iter().map(|l| l.mean_time_s).sum();
    let mut summary: Vec<SummaryRow> = Vec::new();
    for layer in layers {
        match summary.iter_mut().find(|s| s.kind == layer.kind) {
            Some(s) => s.total_time_s += layer.mean_time_s,
            None => summary.push(SummaryRow { kind: layer.kind, total_time_s: layer.mean_time_s, percent: 0.0 }),
        }
    }
    for s in &mut summary {
        s.percent = if total > 0.0 { 100.0 * s.total_time_s / total } else { 0.0 };
    }
    summary
}

/// Runs the scaled model layer by layer on a seeded random batch, feeding
/// each layer's output to the next. Convolutions go through `registry`,
/// ReLU through `backend`, pooling runs on the host.
pub fn bench_model(spec: &ModelSpec, backend: &dyn Backend, registry: &SharedRegistry, config: &ModelBenchConfig) -> Result<ModelReport> {
    if config.reps < MIN_REPS {
        return Err(Error::Validation(format!("--reps must be at least {MIN_REPS}, got {}", config.reps)));
    }
    if config.batch == 0 {
        return Err(Error::Validation("batch must be at least 1".into()));
    }
    if let Some(name) = &config.implementation {
        if registry.get(name).is_none() {
            return Err(Error::Validation(format!(
                "unknown convolution implementation {name:?} (registered: {})",
                registry.names().join(", ")
            )));
        }
    }
    let spec = spec.scaled(config.scale)?;
    let shapes = spec.shapes()?;
    let mut rng = StdRng::seed_from_u64(config.seed);
    let input = shapes[0];
    let mut x = uniform(&[config.batch, input.channels, input.height, input.width], 1.0, &mut rng)?;
    let relu = ApplySpec::new(2, "x = max(y, 0)")?;
    let mut rows = Vec::with_capacity(spec.layers.len());

    for (index, layer) in spec.layers.iter().enumerate() {
        let (mean, y) = match layer {
            LayerSpec::Conv { .. } => {
                let g = layer.conv_geometry(config.batch).expect("conv layer");
                let bound = 1.0 / ((g.in_channels * g.kernel_h * g.kernel_w) as f32).sqrt();
                let w = uniform(&g.weight_sizes(), bound, &mut rng)?;
                let b = uniform(&[g.out_channels], 0.1, &mut rng)?;
                let name = conv_impl(registry, config.implementation.as_deref(), &g)?;
                time_mean(config.reps, || {
                    let y = registry.run(Some(&name), &x, &w, Some(&b), &g)?;
                    if config.backward {
                        conv_backward_input(&y, &w, &g)?;
                        conv_backward_weight(&x, &y, &g)?;
                    }
                    Ok(y)
                })?
            }
            LayerSpec::PoolMax(p) => time_mean(config.reps, || {
                let (y, argmax) = maxpool_forward(&x, p)?;
                if config.backward {
                    maxpool_backward(&y, &argmax, x.sizes())?;
                }
                Ok(y)
            })?,
            LayerSpec::Relu => {
                let y = Tensor::zeros(x.sizes())?;
                let (mean, ()) = time_mean(config.reps, || {
                    dispatch_apply(backend, &relu, &[&y, &x], 0.0)?;
                    if config.backward {
                        relu_backward(&y, &x)?;
                    }
                    Ok(())
                })?;
                (mean, y)
            }
        };
        let row = LayerRow {
            index,
            kind: layer.kind(),
            geometry: layer.describe(shapes[index]),
            mean_time_s: mean.as_secs_f64(),
            checksum: checksum(&y),
        };
        log::info!("layer {index} {} {}: {:.3e} s", row.kind, row.geometry, row.mean_time_s);
        rows.push(row);
        x = y;
    }
    let summary = summarize(&rows);
    Ok(ModelReport { model: spec.name.clone(), layers: rows, summary })
}

/// The forced implementation when it supports `g`, otherwise the registry's
/// choice (with a warning when an implementation was forced).
fn conv_impl(registry: &SharedRegistry, forced: Option<&str>, g: &ConvGeometry) -> Result<String> {
    if let Some(name) = forced {
        match registry.get(name) {
            Some(e) if (e.supports)(g) => return Ok(name.to_owned()),
            _ => log::warn!("{name} does not support {g:?}; using registry selection"),
        }
    }
    registry.select(g)
}
