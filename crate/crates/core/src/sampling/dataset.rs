//! Training-sample generation, range augmentation and dataset assembly.
//!
//! Randomness comes from ChaCha8 streams: sample `i` of a run seeded with `s`
//! draws from `ChaCha8Rng::seed_from_u64(s)` switched to stream `i`, so every
//! sample is reproducible on its own and independent of generation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::layout;
use crate::error::{Error, Result};
use crate::sampling::normalize::{normalize_floating, RangeConstraint};
use crate::sampling::registry::{phig_spec, registry, ParameterSpec};
use crate::stage::{Scheme, Stage};
use crate::surrogate::{scale_curve, Simulator};

pub const DATASET_FORMAT_VERSION: u32 = 1;

/// Default probability of a zero-width (fixed-value) range during training.
pub const DEFAULT_P_FIXED: f64 = 0.1;

/// Knobs of the random draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingOptions {
    /// Probability that a sampled range collapses to the parameter value.
    pub p_fixed: f64,
    /// Draw strictly positive parameters uniformly in log space.
    pub log_uniform: bool,
    /// Testing hook: every range equals the global range.
    pub force_global_ranges: bool,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self {
            p_fixed: DEFAULT_P_FIXED,
            log_uniform: false,
            force_global_ranges: false,
        }
    }
}

/// Generator for sample `index` of a run seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn uniform_between<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    (lo + (hi - lo) * u).clamp(lo, hi)
}

fn draw_one<R: Rng + ?Sized>(spec: &ParameterSpec, rng: &mut R, log_uniform: bool) -> f64 {
    if log_uniform && spec.global_min > 0.0 {
        let (lo, hi) = (spec.global_min.ln(), spec.global_max.ln());
        uniform_between(rng, lo, hi)
            .exp()
            .clamp(spec.global_min, spec.global_max)
    } else {
        uniform_between(rng, spec.global_min, spec.global_max)
    }
}

/// Independent uniform draw of every parameter within its global range.
pub fn sample_params<R: Rng + ?Sized>(specs: &[ParameterSpec], rng: &mut R) -> Vec<f64> {
    sample_params_with(specs, rng, false)
}

pub fn sample_params_with<R: Rng + ?Sized>(specs: &[ParameterSpec], rng: &mut R, log_uniform: bool) -> Vec<f64> {
    specs.iter().map(|s| draw_one(s, rng, log_uniform)).collect()
}

/// Random window around `x`.
///
/// With probability `p_fixed` returns `(x, x)`; otherwise
/// `local_min ~ U[global_min, x]` and `local_max ~ U[x, global_max]`.
pub fn sample_local_range<R: Rng + ?Sized>(
    spec: &ParameterSpec,
    x: f64,
    rng: &mut R,
    p_fixed: f64,
) -> Result<RangeConstraint> {
    if !spec.contains(x) {
        return Err(Error::constraint(
            spec.name,
            format!(
                "value {x} outside global range [{}, {}]",
                spec.global_min, spec.global_max
            ),
        ));
    }
    let fix: f64 = rng.random();
    if fix < p_fixed {
        return Ok(RangeConstraint::fixed(x));
    }
    let local_min = uniform_between(rng, spec.global_min, x).min(x);
    let local_max = uniform_between(rng, x, spec.global_max).max(x);
    Ok(RangeConstraint::new(local_min, local_max))
}

/// One row of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    /// Physical parameter values, canonical order.
    pub params: Vec<f64>,
    pub ranges: Vec<RangeConstraint>,
    /// Floating-normalized parameters.
    pub normalized: Vec<f64>,
    /// Network-space curve.
    pub curve: Vec<f64>,
    /// Work function companion (Id stage only).
    pub phig: Option<f64>,
}

impl TrainingSample {
    /// Normalizes `params` against `ranges` and assembles a sample.
    pub fn new(
        stage: Stage,
        params: Vec<f64>,
        ranges: Vec<RangeConstraint>,
        curve: Vec<f64>,
        phig: Option<f64>,
    ) -> Result<Self> {
        let specs = registry(stage);
        if params.len() != specs.len() || ranges.len() != specs.len() {
            return Err(Error::invalid(format!(
                "{stage} sample needs {} params and ranges",
                specs.len()
            )));
        }
        if curve.len() != stage.curve_len() {
            return Err(Error::invalid(format!(
                "{stage} curve needs {} points",
                stage.curve_len()
            )));
        }
        if (stage == Stage::Id) != phig.is_some() {
            return Err(Error::invalid("PHIG companion present iff stage is id"));
        }
        let normalized = specs
            .iter()
            .zip(params.iter().zip(&ranges))
            .map(|(s, (&x, c))| {
                c.validate(s)?;
                normalize_floating(x, c, s.span()).map_err(|e| Error::constraint(s.name, e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params,
            ranges,
            normalized,
            curve,
            phig,
        })
    }

    pub fn forward_input(&self, stage: Stage) -> Vec<f64> {
        layout::forward_input(stage, &self.normalized, &self.ranges, self.phig)
    }

    pub fn inverse_input(&self, stage: Stage) -> Vec<f64> {
        layout::inverse_input(stage, &self.curve, &self.ranges, self.phig)
    }
}

/// Provenance stored in the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub stage: Stage,
    pub scheme: Scheme,
    pub seed: u64,
    pub n_samples: usize,
    /// Number of distinct simulated curves behind the samples.
    pub n_curves: usize,
    pub options: SamplingOptions,
    /// Copies per source sample, for augmented datasets.
    pub augment_k: Option<usize>,
    /// Seed of the dataset an augmented set was derived from.
    pub source_seed: Option<u64>,
    pub parameter_order: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub samples: Vec<TrainingSample>,
}

impl Dataset {
    pub fn stage(&self) -> Stage {
        self.meta.stage
    }

    pub fn scheme(&self) -> Scheme {
        self.meta.scheme
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Keeps the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let samples: Vec<_> = indices.iter().map(|&i| self.samples[i].clone()).collect();
        let mut meta = self.meta.clone();
        meta.n_samples = samples.len();
        meta.n_curves = meta.n_curves.min(samples.len());
        Dataset { meta, samples }
    }
}

fn sample_ranges<R: Rng + ?Sized>(
    specs: &[ParameterSpec],
    params: &[f64],
    scheme: Scheme,
    options: &SamplingOptions,
    rng: &mut R,
) -> Result<Vec<RangeConstraint>> {
    specs
        .iter()
        .zip(params)
        .map(|(s, &x)| match scheme {
            Scheme::Custom if !options.force_global_ranges => sample_local_range(s, x, rng, options.p_fixed),
            _ => Ok(RangeConstraint::global(s)),
        })
        .collect()
}

/// Generates one sample; `index` selects its random stream.
pub fn generate_sample(
    stage: Stage,
    scheme: Scheme,
    seed: u64,
    index: usize,
    simulator: &dyn Simulator,
    options: &SamplingOptions,
) -> Result<TrainingSample> {
    let specs = registry(stage);
    let mut rng = sample_rng(seed, index as u64);
    let params = sample_params_with(specs, &mut rng, options.log_uniform);
    let phig = match stage {
        Stage::Cgg => None,
        Stage::Id => Some(draw_one(phig_spec(), &mut rng, false)),
    };
    let ranges = sample_ranges(specs, &params, scheme, options, &mut rng)?;
    let curve = simulator
        .simulate(stage, &params, phig)
        .and_then(|c| scale_curve(&c, stage))
        .map_err(|e| Error::Simulation {
            index,
            source: Box::new(e),
        })?;
    TrainingSample::new(stage, params, ranges, curve, phig)
}

/// Simulates `n` random devices.
pub fn build_dataset(
    stage: Stage,
    scheme: Scheme,
    n: usize,
    seed: u64,
    simulator: &dyn Simulator,
    options: &SamplingOptions,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("dataset size must be at least 1"));
    }
    if !(0.0..=1.0).contains(&options.p_fixed) {
        return Err(Error::invalid("p_fixed must lie in [0, 1]"));
    }
    let samples = (0..n)
        .map(|i| generate_sample(stage, scheme, seed, i, simulator, options))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        meta: DatasetMeta {
            format_version: DATASET_FORMAT_VERSION,
            stage,
            scheme,
            seed,
            n_samples: n,
            n_curves: n,
            options: *options,
            augment_k: None,
            source_seed: None,
            parameter_order: crate::sampling::parameter_names(stage),
        },
        samples,
    })
}

/// Derives `k` custom-range samples from every sample of a fixed-range set.
///
/// Curves and parameters are reused as-is, so no simulation happens.
pub fn augment_with_ranges(fixed: &Dataset, k: usize, seed: u64, options: &SamplingOptions) -> Result<Dataset> {
    if k < 1 {
        return Err(Error::invalid("augmentation factor k must be at least 1"));
    }
    if fixed.scheme() != Scheme::Fixed {
        return Err(Error::invalid("augmentation expects a fixed-scheme dataset"));
    }
    let stage = fixed.stage();
    let specs = registry(stage);
    let mut samples = Vec::with_capacity(fixed.len() * k);
    for (i, src) in fixed.samples.iter().enumerate() {
        for j in 0..k {
            let mut rng = sample_rng(seed, (i * k + j) as u64);
            let ranges = sample_ranges(specs, &src.params, Scheme::Custom, options, &mut rng)?;
            samples.push(TrainingSample::new(
                stage,
                src.params.clone(),
                ranges,
                src.curve.clone(),
                src.phig,
            )?);
        }
    }
    let scheme = if options.force_global_ranges {
        Scheme::Fixed
    } else {
        Scheme::Custom
    };
    Ok(Dataset {
        meta: DatasetMeta {
            format_version: DATASET_FORMAT_VERSION,
            stage,
            scheme,
            seed,
            n_samples: samples.len(),
            n_curves: fixed.meta.n_curves,
            options: *options,
            augment_k: Some(k),
            source_seed: Some(fixed.meta.seed),
            parameter_order: fixed.meta.parameter_order.clone(),
        },
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::registry::find;
    use crate::surrogate::Surrogate;

    #[test]
    fn degenerate_spec_always_returns_its_value() {
        let mut s = *find("PHIG").unwrap();
        s.global_min = 4.4;
        s.global_max = 4.4;
        let mut rng = sample_rng(1, 0);
        for _ in 0..100 {
            assert_eq!(sample_params(&[s], &mut rng), vec![4.4]);
        }
    }

    #[test]
    fn local_range_at_global_min_starts_at_global_min() {
        let s = find("PHIG").unwrap();
        let mut rng = sample_rng(3, 0);
        for _ in 0..1000 {
            let c = sample_local_range(s, s.global_min, &mut rng, 0.0).unwrap();
            assert_eq!(c.local_min, s.global_min);
        }
    }

    #[test]
    fn local_range_for_worked_example() {
        let s = find("PHIG").unwrap();
        let mut rng = sample_rng(4, 0);
        for _ in 0..10_000 {
            let c = sample_local_range(s, 4.3, &mut rng, 0.1).unwrap();
            assert!((4.2..=4.3).contains(&c.local_min));
            assert!((4.3..=4.8).contains(&c.local_max));
        }
    }

    #[test]
    fn local_range_rejects_out_of_range_value() {
        let s = find("PHIG").unwrap();
        let err = sample_local_range(s, 4.9, &mut sample_rng(0, 0), 0.1).unwrap_err();
        assert_eq!(err.parameter(), Some("PHIG"));
    }

    #[test]
    fn forward_input_lengths() {
        let sim = Surrogate::new();
        let opts = SamplingOptions::default();
        let cgg = build_dataset(Stage::Cgg, Scheme::Custom, 3, 5, &sim, &opts).unwrap();
        assert!(cgg.samples.iter().all(|s| s.forward_input(Stage::Cgg).len() == 18));
        assert!(cgg.samples.iter().all(|s| s.inverse_input(Stage::Cgg).len() == 27));
        let id = build_dataset(Stage::Id, Scheme::Custom, 3, 5, &sim, &opts).unwrap();
        assert!(id.samples.iter().all(|s| s.forward_input(Stage::Id).len() == 34));
        assert!(id.samples.iter().all(|s| s.inverse_input(Stage::Id).len() == 39));
        assert!(id.samples.iter().all(|s| s.phig.is_some()));
    }

    #[test]
    fn fixed_scheme_uses_global_ranges() {
        let ds = build_dataset(Stage::Id, Scheme::Fixed, 20, 9, &Surrogate::new(), &Default::default()).unwrap();
        for s in &ds.samples {
            for (c, spec) in s.ranges.iter().zip(registry(Stage::Id)) {
                assert_eq!(*c, RangeConstraint::global(spec));
            }
        }
    }

    #[test]
    fn generation_is_order_independent() {
        let sim = Surrogate::new();
        let opts = SamplingOptions::default();
        let ds = build_dataset(Stage::Cgg, Scheme::Custom, 10, 77, &sim, &opts).unwrap();
        let seventh = generate_sample(Stage::Cgg, Scheme::Custom, 77, 7, &sim, &opts).unwrap();
        assert_eq!(ds.samples[7], seventh);
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(build_dataset(Stage::Cgg, Scheme::Fixed, 0, 1, &Surrogate::new(), &Default::default()).is_err());
    }

    #[test]
    fn augmentation_rejects_bad_input() {
        let sim = Surrogate::new();
        let fixed = build_dataset(Stage::Cgg, Scheme::Fixed, 4, 1, &sim, &Default::default()).unwrap();
        assert!(augment_with_ranges(&fixed, 0, 2, &Default::default()).is_err());
        let custom = augment_with_ranges(&fixed, 2, 2, &Default::default()).unwrap();
        assert!(augment_with_ranges(&custom, 2, 2, &Default::default()).is_err());
    }
}
