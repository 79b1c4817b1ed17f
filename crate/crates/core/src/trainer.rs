//! Sparse fitting of an ERBF network to a molecule's density map.
//!
//! The loop alternates between a sparsity phase, where the L1 penalty pulls
//! weights and axis scales toward zero and neurons with negligible weight are
//! pruned, and an accuracy phase that minimizes the squared density error
//! alone. During the first `sparse_iter` iterations the phase is picked at
//! every pruning checkpoint from the training error (RMS by default, see
//! [`ErrorMetric`]); afterwards the network size is frozen and only the error
//! term is optimized.
//!
//! The error term of each minibatch is rescaled by `M / B` by default so
//! that it estimates the sum over all `M` training points; this keeps the
//! balance between the penalty and the fit independent of molecule size.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{DensityMap, UniformGrid, DEFAULT_DECAY};
use crate::erbf::{loss_and_gradient, ErbfNeuron, ErbfParams, LossWeights, Sample, PARAMS_PER_NEURON};
use crate::error::{Error, Result};
use crate::pqr::AtomSet;

pub const DEFAULT_ISOVALUE: f64 = 1.0;

/// Lattice points near the isosurface, labelled with the density.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub points: Vec<Vector3<f64>>,
    pub targets: Vec<f64>,
    pub isovalue: f64,
    pub band: f64,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn samples(&self) -> Vec<Sample> {
        self.points
            .iter()
            .zip(&self.targets)
            .map(|(p, t)| Sample {
                point: *p,
                target: *t,
            })
            .collect()
    }

    /// Largest `|forward(x_m) - target_m|` over the whole set.
    pub fn max_error(&self, params: &ErbfParams) -> f64 {
        self.errors(params).max
    }

    pub fn errors(&self, params: &ErbfParams) -> ErrorSummary {
        let (max, sq) = params
            .forward_many(&self.points)
            .iter()
            .zip(&self.targets)
            .map(|(y, t)| (y - t).abs())
            .fold((0.0, 0.0), |(m, s), e| (f64::max(m, e), s + e * e));
        ErrorSummary {
            max,
            rms: (sq / self.len() as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub max: f64,
    pub rms: f64,
}

impl ErrorSummary {
    pub fn get(&self, metric: ErrorMetric) -> f64 {
        match metric {
            ErrorMetric::Max => self.max,
            ErrorMetric::Rms => self.rms,
        }
    }
}

/// Training-set error statistic compared against `tol2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMetric {
    Max,
    #[default]
    Rms,
}

/// How the squared-error sum over a batch is scaled before `rho2` is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ErrorReduction {
    /// Batch sum rescaled by `M / B`, an unbiased estimate of the sum over
    /// the whole training set.
    #[default]
    Full,
    /// Plain sum over the batch.
    Sum,
    /// Sum divided by the batch length.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_iter: usize,
    pub sparse_iter: usize,
    pub batch_size: usize,
    /// Prune neurons with `|w~| < tol1`.
    pub tol1: f64,
    /// Training error (see `error_metric`) tolerated before the sparse phase
    /// falls back to pure fitting.
    pub tol2: f64,
    pub check_step: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub rho1_initial: f64,
    pub rho2_initial: f64,
    pub error_reduction: ErrorReduction,
    pub error_metric: ErrorMetric,
    pub grid_spacing: f64,
    pub padding: f64,
    pub band: f64,
    pub seed: u64,
    /// Use the literal constants `d~ = 0.5`, `w~ = exp(r^2 / 4)` instead of
    /// the exact-match initialization.
    pub legacy_init: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_iter: 10_000,
            sparse_iter: 6_000,
            batch_size: 1_000,
            tol1: 1e-3,
            tol2: 0.2,
            check_step: 20,
            learning_rate: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            rho1_initial: 10.0,
            rho2_initial: 1.0,
            error_reduction: ErrorReduction::default(),
            error_metric: ErrorMetric::default(),
            grid_spacing: 1.0,
            padding: 5.0,
            band: 1.0,
            seed: 42,
            legacy_init: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.sparse_iter > self.max_iter {
            return bad(format!(
                "sparse_iter {} exceeds max_iter {}",
                self.sparse_iter, self.max_iter
            ));
        }
        if self.batch_size == 0 || self.check_step == 0 {
            return bad("batch_size and check_step must be >= 1".into());
        }
        for (name, v) in [
            ("tol1", self.tol1),
            ("tol2", self.tol2),
            ("learning_rate", self.learning_rate),
            ("epsilon", self.epsilon),
            ("grid_spacing", self.grid_spacing),
            ("band", self.band),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)".into());
        }
        if !(self.padding >= 0.0) {
            return bad(format!("padding must be >= 0, got {}", self.padding));
        }
        LossWeights::new(self.rho1_initial, self.rho2_initial)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step_count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub loss: f64,
    pub neuron_count: usize,
    pub max_error: Option<f64>,
    pub rms_error: Option<f64>,
    pub rho1: f64,
    pub rho2: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainTrace {
    /// `iteration,loss,neuron_count,max_error`; `max_error` is empty on rows
    /// where it was not evaluated.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,loss,neuron_count,max_error\n");
        for r in &self.records {
            let err = r.max_error.map(|e| format!("{e:?}")).unwrap_or_default();
            let _ = writeln!(out, "{},{:?},{},{}", r.iteration, r.loss, r.neuron_count, err);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn final_neuron_count(&self) -> Option<usize> {
        self.records.last().map(|r| r.neuron_count)
    }
}

/// Labels the padded lattice with `phi` and keeps points with
/// `|phi - isovalue| <= band`.
pub fn build_training_set(map: &DensityMap, config: &TrainConfig, isovalue: f64) -> Result<TrainingSet> {
    if !(isovalue > 0.0) || !isovalue.is_finite() {
        return Err(Error::InvalidConfig(format!("isovalue must be > 0, got {isovalue}")));
    }
    let bbox = map.atoms().bounding_box(config.padding)?;
    let grid = UniformGrid::with_spacing(bbox, config.grid_spacing)?;
    let field = map.sample_grid(&grid)?;
    let mut points = Vec::new();
    let mut targets = Vec::new();
    for (idx, &value) in field.values.iter().enumerate() {
        if (value - isovalue).abs() <= config.band {
            let [i, j, k] = grid.coords(idx);
            points.push(grid.point(i, j, k));
            targets.push(value);
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyTrainingSet {
            isovalue,
            band: config.band,
            spacing: config.grid_spacing,
        });
    }
    Ok(TrainingSet {
        points,
        targets,
        isovalue,
        band: config.band,
    })
}

/// One neuron per atom, reproducing `phi` exactly: centers on the atoms, no
/// rotation, `d~ = decay^(1/4)` so that the exponent is `decay |x - c|^2`,
/// and `w~ = exp(decay r^2 / 2)` so that the weight is `exp(decay r^2)`.
pub fn initialize(atoms: &AtomSet, decay: f64) -> Result<ErbfParams> {
    if !(decay > 0.0) || !decay.is_finite() {
        return Err(Error::InvalidConfig(format!("decay must be > 0, got {decay}")));
    }
    let d_tilde = decay.powf(0.25);
    Ok(init_with(atoms, |r| (decay * r * r / 2.0).exp(), d_tilde))
}

/// The literal constants `d~ = 0.5` and `w~ = exp(r^2 / 4)`. These only
/// match `phi` in the weights, and only at decay 0.5.
pub fn initialize_legacy(atoms: &AtomSet) -> ErbfParams {
    init_with(atoms, |r| (r * r / 4.0).exp(), 0.5)
}

fn init_with(atoms: &AtomSet, w_tilde: impl Fn(f64) -> f64, d_tilde: f64) -> ErbfParams {
    ErbfParams::new(
        atoms
            .atoms()
            .iter()
            .map(|a| ErbfNeuron {
                w_tilde: w_tilde(a.radius),
                d_tilde: Vector3::repeat(d_tilde),
                center: a.center,
                angles: Vector3::zeros(),
            })
            .collect(),
    )
}

/// Drops every neuron with `|w~| < tol1` along with its optimizer slots.
pub fn prune(params: &ErbfParams, adam: &AdamState, tol1: f64) -> Result<(ErbfParams, AdamState, usize)> {
    if !(tol1 > 0.0) {
        return Err(Error::InvalidConfig(format!("tol1 must be > 0, got {tol1}")));
    }
    if adam.len() != params.param_count() {
        return Err(Error::LengthMismatch {
            expected: params.param_count(),
            actual: adam.len(),
        });
    }
    let keep: Vec<bool> = params.neurons.iter().map(|n| n.w_tilde.abs() >= tol1).collect();
    let removed = keep.iter().filter(|k| !**k).count();
    if removed == params.len() && removed > 0 {
        return Err(Error::AllPruned);
    }
    Ok(retain(params, adam, &keep, removed))
}

fn retain(params: &ErbfParams, adam: &AdamState, keep: &[bool], removed: usize) -> (ErbfParams, AdamState, usize) {
    if removed == 0 {
        return (params.clone(), adam.clone(), 0);
    }
    let neurons = params
        .neurons
        .iter()
        .zip(keep)
        .filter(|(_, k)| **k)
        .map(|(n, _)| *n)
        .collect();
    let slots = |v: &[f64]| -> Vec<f64> {
        v.chunks_exact(PARAMS_PER_NEURON)
            .zip(keep)
            .filter(|(_, k)| **k)
            .flat_map(|(c, _)| c.iter().copied())
            .collect()
    };
    let state = AdamState {
        m: slots(&adam.m),
        v: slots(&adam.v),
        step_count: adam.step_count,
    };
    (ErbfParams::new(neurons), state, removed)
}

/// `prune`, except that the neuron with the largest `|w~|` survives when
/// every neuron falls below the threshold.
fn prune_keep_one(params: &ErbfParams, adam: &AdamState, tol1: f64) -> Result<(ErbfParams, AdamState, usize)> {
    match prune(params, adam, tol1) {
        Err(Error::AllPruned) => {
            let best = params
                .neurons
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.w_tilde.abs().total_cmp(&b.1.w_tilde.abs()))
                .map(|(i, _)| i)
                .unwrap_or(0);
            let keep: Vec<bool> = (0..params.len()).map(|i| i == best).collect();
            Ok(retain(params, adam, &keep, params.len() - 1))
        }
        other => other,
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut ErbfParams, adam: &mut AdamState, gradient: &[f64], config: &TrainConfig) -> Result<()> {
    let n = params.param_count();
    if gradient.len() != n || adam.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: if gradient.len() != n { gradient.len() } else { adam.len() },
        });
    }
    if gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    adam.step_count += 1;
    let k = adam.step_count as i32;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(k);
    let c2 = 1.0 - b2.powi(k);
    let mut flat = params.to_flat();
    for i in 0..n {
        let g = gradient[i];
        adam.m[i] = b1 * adam.m[i] + (1.0 - b1) * g;
        adam.v[i] = b2 * adam.v[i] + (1.0 - b2) * g * g;
        let m_hat = adam.m[i] / c1;
        let v_hat = adam.v[i] / c2;
        flat[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
    params.set_flat(&flat)
}

/// Epoch-shuffled batches drawn without replacement.
struct BatchSampler {
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
    batch: usize,
}

impl BatchSampler {
    fn new(len: usize, batch: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..len).collect();
        if batch < len {
            order.shuffle(&mut rng);
        }
        BatchSampler {
            order,
            cursor: 0,
            rng,
            batch,
        }
    }

    fn next_into(&mut self, all: &[Sample], out: &mut Vec<Sample>) {
        out.clear();
        if self.batch >= all.len() {
            out.extend_from_slice(all);
            return;
        }
        while out.len() < self.batch {
            if self.cursor == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            let take = (self.batch - out.len()).min(self.order.len() - self.cursor);
            out.extend(self.order[self.cursor..self.cursor + take].iter().map(|&i| all[i]));
            self.cursor += take;
        }
    }
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ErbfParams,
    pub trace: TrainTrace,
    pub training_points: usize,
}

/// Runs the full fit for a molecule.
pub fn train(atoms: &AtomSet, config: &TrainConfig, decay: f64, isovalue: f64) -> Result<TrainOutcome> {
    config.validate()?;
    let map = DensityMap::new(atoms.clone(), decay)?;
    let set = build_training_set(&map, config, isovalue)?;
    let params = if config.legacy_init {
        initialize_legacy(atoms)
    } else {
        initialize(atoms, decay)?
    };
    train_from(params, &set, config)
}

/// Runs the optimization loop from given parameters on a prepared training set.
pub fn train_from(mut params: ErbfParams, set: &TrainingSet, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if params.is_empty() {
        return Err(Error::InvalidConfig("network has no neurons".into()));
    }
    let samples = set.samples();
    let mut adam = AdamState::new(params.param_count());
    let mut sampler = BatchSampler::new(samples.len(), config.batch_size, config.seed);
    let mut batch = Vec::with_capacity(config.batch_size.min(samples.len()));
    let mut trace = TrainTrace::default();
    let mut accuracy_only = false;

    for iteration in 1..=config.max_iter {
        let sparse_phase = iteration <= config.sparse_iter;
        let mut errors = None;
        if sparse_phase && iteration % config.check_step == 0 {
            let (p, a, _) = prune_keep_one(&params, &adam, config.tol1)?;
            params = p;
            adam = a;
            let e = set.errors(&params);
            accuracy_only = e.get(config.error_metric) > config.tol2;
            errors = Some(e);
        }
        if iteration == config.max_iter {
            errors = Some(set.errors(&params));
        }

        sampler.next_into(&samples, &mut batch);
        let scale = match config.error_reduction {
            ErrorReduction::Sum => 1.0,
            ErrorReduction::Mean => 1.0 / batch.len() as f64,
            ErrorReduction::Full => set.len() as f64 / batch.len() as f64,
        };
        let rho1 = if sparse_phase && !accuracy_only {
            config.rho1_initial
        } else {
            0.0
        };
        let weights = LossWeights {
            rho1,
            rho2: config.rho2_initial * scale,
        };
        let step = loss_and_gradient(&params, &batch, &weights)
            .and_then(|(loss, grad)| adam_step(&mut params, &mut adam, &grad, config).map(|_| loss));
        let loss = match step {
            Ok(l) => l,
            Err(Error::NonFinite(_)) => {
                return Err(Error::Divergence {
                    iteration,
                    trace: Box::new(trace),
                })
            }
            Err(e) => return Err(e),
        };
        trace.records.push(TraceRecord {
            iteration,
            loss,
            neuron_count: params.len(),
            max_error: errors.map(|e| e.max),
            rms_error: errors.map(|e| e.rms),
            rho1,
            rho2: weights.rho2,
        });
    }

    Ok(TrainOutcome {
        params,
        trace,
        training_points: set.len(),
    })
}

/// Convenience wrapper with the default decay and isovalue.
pub fn train_default(atoms: &AtomSet, config: &TrainConfig) -> Result<TrainOutcome> {
    train(atoms, config, DEFAULT_DECAY, DEFAULT_ISOVALUE)
}
