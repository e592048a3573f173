//! Training-set size needed by each scheme to reach a forward-net accuracy.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cascade::metrics::median;
use crate::cascade::training::{forward_task, new_forward, NetConfig};
use crate::error::{Error, Result};
use crate::neural::network::Mlp;
use crate::neural::train::{train, DataSplit, Objective, Regression};
use crate::sampling::dataset::{build_dataset, Dataset, SamplingOptions};
use crate::scalar::Scalar;
use crate::stage::{Scheme, Stage};
use crate::surrogate::Simulator;

/// Seed offset separating validation draws from training draws.
const VALIDATION_SEED_OFFSET: u64 = 1_000_003;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub stage: Stage,
    /// Ascending training-set sizes.
    pub sample_counts: Vec<usize>,
    /// One training run per seed and cell; at least two.
    pub seeds: Vec<u64>,
    pub validation_size: usize,
    /// Seed of the shared per-scheme validation sets.
    pub data_seed: u64,
    #[serde(default)]
    pub sampling: SamplingOptions,
    pub net: NetConfig,
    /// Accuracy both schemes are compared at; defaults to the worse scheme's
    /// best median.
    #[serde(default)]
    pub target_mse: Option<f64>,
}

impl ConvergenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_counts.is_empty() || self.sample_counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("sample_counts must be non-empty and strictly ascending"));
        }
        if self.sample_counts[0] < 2 {
            return Err(Error::invalid("sample_counts must be at least 2"));
        }
        if self.seeds.len() < 2 {
            return Err(Error::invalid("convergence study needs at least two seeds"));
        }
        if self.validation_size == 0 {
            return Err(Error::invalid("validation_size must be positive"));
        }
        if self.target_mse.is_some_and(|t| t.is_nan() || t <= 0.0) {
            return Err(Error::invalid("target_mse must be positive"));
        }
        self.net.train.validate()
    }
}

/// One `(scheme, n, seed)` cell; failed cells keep their error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub scheme: Scheme,
    pub n_train: usize,
    pub seed: u64,
    pub validation_mse: Option<f64>,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeCurve {
    pub scheme: Scheme,
    pub n_train: Vec<usize>,
    pub median_mse: Vec<f64>,
    /// Interpolated size at which the median first reaches the target.
    pub samples_needed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub stage: Stage,
    pub rows: Vec<ConvergenceRow>,
    pub curves: Vec<SchemeCurve>,
    pub target_mse: f64,
    /// custom / fixed samples needed.
    pub ratio: Option<f64>,
}

impl ConvergenceSummary {
    pub fn curve(&self, scheme: Scheme) -> &SchemeCurve {
        self.curves
            .iter()
            .find(|c| c.scheme == scheme)
            .expect("both schemes present")
    }
}

/// Validation MSE of a forward net on a dataset of its own scheme.
///
/// Layouts of the two schemes have equal widths, so a cross-scheme score
/// would compute silently; it is rejected instead.
pub fn evaluate_forward<T: Scalar>(net: &Mlp<T>, validation: &Dataset) -> Result<f64> {
    match net.meta.scheme {
        Some(s) if s == validation.scheme() => {}
        Some(s) => {
            return Err(Error::invalid(format!(
                "{s}-scheme network cannot be scored on {}-scheme validation data",
                validation.scheme()
            )))
        }
        None => return Err(Error::invalid("network metadata lacks a scheme")),
    }
    if net.meta.stage != Some(validation.stage()) {
        return Err(Error::invalid("network and validation data differ in stage"));
    }
    let task = forward_task::<T>(validation)?;
    task.loss(net, &(0..validation.len()).collect::<Vec<_>>())
}

/// First size at which `mse` reaches `target`, interpolated linearly in
/// log-log space between the bracketing ladder points.
pub fn crossing(n: &[usize], mse: &[f64], target: f64) -> Option<f64> {
    let i = mse.iter().position(|&m| m <= target)?;
    if i == 0 {
        return Some(n[0] as f64);
    }
    let (n0, n1) = ((n[i - 1] as f64).ln(), (n[i] as f64).ln());
    let (m0, m1) = (mse[i - 1].ln(), mse[i].ln());
    if m1 == m0 {
        return Some(n[i] as f64);
    }
    Some((n0 + (target.ln() - m0) * (n1 - n0) / (m1 - m0)).exp())
}

fn train_cell(
    stage: Stage,
    scheme: Scheme,
    n: usize,
    seed: u64,
    val: &Dataset,
    cfg: &ConvergenceConfig,
    sim: &dyn Simulator,
) -> Result<f64> {
    let ds = build_dataset(stage, scheme, n, seed, sim, &cfg.sampling)?;
    // Train and validation rows share one objective; only the validation
    // rows are scored.
    let mut all = ds.samples.clone();
    all.extend(val.samples.iter().cloned());
    let joint = Dataset {
        meta: ds.meta.clone(),
        samples: all,
    };
    let task: Regression<f64> = forward_task(&joint)?;
    let split = DataSplit {
        train: (0..n).collect(),
        validation: (n..n + val.len()).collect(),
    };
    let mut net_cfg = cfg.net.clone();
    net_cfg.train.seed = seed;
    net_cfg.architecture.init_seed = seed;
    let mut net = new_forward::<f64>(stage, scheme, &net_cfg.architecture)?;
    train(&mut net, &task, &split, &net_cfg.train)?;
    evaluate_forward(&net, val)
}

/// Runs the full ladder for both schemes.
pub fn convergence_study(cfg: &ConvergenceConfig, sim: &dyn Simulator) -> Result<ConvergenceSummary> {
    cfg.validate()?;
    let stage = cfg.stage;
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for scheme in [Scheme::Fixed, Scheme::Custom] {
        let val = build_dataset(
            stage,
            scheme,
            cfg.validation_size,
            cfg.data_seed.wrapping_add(VALIDATION_SEED_OFFSET),
            sim,
            &cfg.sampling,
        )?;
        let mut medians = Vec::new();
        for &n in &cfg.sample_counts {
            let mut cell = Vec::new();
            for &seed in &cfg.seeds {
                let start = Instant::now();
                let result = train_cell(stage, scheme, n, cfg.data_seed ^ seed.rotate_left(17), &val, cfg, sim);
                log::info!("{stage} {scheme} n={n} seed={seed}: {result:?}");
                let (validation_mse, error) = match result {
                    Ok(m) => (Some(m), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                cell.extend(validation_mse);
                rows.push(ConvergenceRow {
                    scheme,
                    n_train: n,
                    seed,
                    validation_mse,
                    wall_time_s: start.elapsed().as_secs_f64(),
                    error,
                });
            }
            medians.push(median(&cell));
        }
        curves.push(SchemeCurve {
            scheme,
            n_train: cfg.sample_counts.clone(),
            median_mse: medians,
            samples_needed: None,
        });
    }
    let best = |c: &SchemeCurve| {
        c.median_mse
            .iter()
            .copied()
            .filter(|m| m.is_finite())
            .fold(f64::INFINITY, f64::min)
    };
    let target_mse = cfg.target_mse.unwrap_or_else(|| best(&curves[0]).max(best(&curves[1])));
    for c in &mut curves {
        c.samples_needed = crossing(&c.n_train, &c.median_mse, target_mse);
    }
    let ratio = match (curves[0].samples_needed, curves[1].samples_needed) {
        (Some(f), Some(c)) => Some(c / f),
        _ => None,
    };
    Ok(ConvergenceSummary {
        stage,
        rows,
        curves,
        target_mse,
        ratio,
    })
}
