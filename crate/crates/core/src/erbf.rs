//! Ellipsoid Gaussian RBF network.
//!
//! Each neuron evaluates `psi(x) = exp(-|S R (x - c)|^2)` where
//! `S = diag(d~_1^2, d~_2^2, d~_3^2)` and `R = Rz(gamma) Ry(beta) Rx(alpha)`.
//! The network output is `sum_i w~_i^2 psi_i(x)`. Weights and axis scales are
//! stored as the unconstrained "tilde" variables whose squares are the
//! physical, non-negative quantities, so every parameter is a free real and
//! the L1 penalty `sum w + sum d = sum w~^2 + sum d~^2` is smooth.
//!
//! Flat parameter vectors are neuron-major; each neuron contributes ten
//! consecutive entries: `w~, d~1, d~2, d~3, c1, c2, c3, alpha, beta, gamma`.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalars per neuron in a flat parameter vector.
pub const PARAMS_PER_NEURON: usize = 10;

/// Points per work unit when reducing over a batch. Fixed so that the
/// reduction order, and therefore the result, does not depend on the number
/// of worker threads.
const CHUNK: usize = 64;

/// `Rz(gamma) * Ry(beta) * Rx(alpha)`, written out entrywise.
pub fn rotation_matrix(angles: &Vector3<f64>) -> Matrix3<f64> {
    let (sa, ca) = angles.x.sin_cos();
    let (sb, cb) = angles.y.sin_cos();
    let (sg, cg) = angles.z.sin_cos();
    Matrix3::new(
        cb * cg,
        -ca * sg + sa * sb * cg,
        sa * sg + ca * cg * sb,
        cb * sg,
        ca * cg + sa * sb * sg,
        -sa * cg + ca * sb * sg,
        -sb,
        cb * sa,
        ca * cb,
    )
}

/// Partial derivatives of [`rotation_matrix`] with respect to alpha, beta
/// and gamma.
pub fn rotation_derivatives(angles: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    let (sa, ca) = angles.x.sin_cos();
    let (sb, cb) = angles.y.sin_cos();
    let (sg, cg) = angles.z.sin_cos();
    let d_alpha = Matrix3::new(
        0.0,
        sa * sg + ca * sb * cg,
        ca * sg - sa * cg * sb,
        0.0,
        -sa * cg + ca * sb * sg,
        -ca * cg - sa * sb * sg,
        0.0,
        cb * ca,
        -sa * cb,
    );
    let d_beta = Matrix3::new(
        -sb * cg,
        sa * cb * cg,
        ca * cg * cb,
        -sb * sg,
        sa * cb * sg,
        ca * cb * sg,
        -cb,
        -sb * sa,
        -ca * sb,
    );
    let d_gamma = Matrix3::new(
        -cb * sg,
        -ca * cg - sa * sb * sg,
        sa * cg - ca * sg * sb,
        cb * cg,
        -ca * sg + sa * sb * cg,
        sa * sg + ca * sb * cg,
        0.0,
        0.0,
        0.0,
    );
    [d_alpha, d_beta, d_gamma]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErbfNeuron {
    /// Physical weight is `w_tilde^2`.
    pub w_tilde: f64,
    /// Physical axis scales are `d_tilde[q]^2`.
    pub d_tilde: Vector3<f64>,
    pub center: Vector3<f64>,
    /// `(alpha, beta, gamma)` in radians; unconstrained.
    pub angles: Vector3<f64>,
}

impl ErbfNeuron {
    pub fn weight(&self) -> f64 {
        self.w_tilde * self.w_tilde
    }

    pub fn axes(&self) -> Vector3<f64> {
        self.d_tilde.component_mul(&self.d_tilde)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rotation_matrix(&self.angles)
    }

    pub fn psi(&self, x: &Vector3<f64>) -> f64 {
        Prepared::new(self).psi(x)
    }
}

/// Per-neuron quantities that do not depend on the query point.
#[derive(Debug, Clone, Copy)]
struct Prepared {
    weight: f64,
    scale: Vector3<f64>,
    center: Vector3<f64>,
    rot: Matrix3<f64>,
}

impl Prepared {
    fn new(n: &ErbfNeuron) -> Self {
        Prepared {
            weight: n.weight(),
            scale: n.axes(),
            center: n.center,
            rot: n.rotation(),
        }
    }

    #[inline]
    fn exponent(&self, x: &Vector3<f64>) -> f64 {
        let u = self.rot * (x - self.center);
        u.component_mul(&self.scale).norm_squared()
    }

    #[inline]
    fn psi(&self, x: &Vector3<f64>) -> f64 {
        (-self.exponent(x)).exp()
    }
}

pub fn psi(neuron: &ErbfNeuron, x: &Vector3<f64>) -> f64 {
    neuron.psi(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Sparsity (L1) weight.
    pub rho1: f64,
    /// Accuracy (squared density error) weight.
    pub rho2: f64,
}

impl LossWeights {
    pub fn new(rho1: f64, rho2: f64) -> Result<Self> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !ok(rho1) || !ok(rho2) || (rho1 == 0.0 && rho2 == 0.0) {
            return Err(Error::InvalidConfig(format!(
                "loss weights must be >= 0 and not both zero, got ({rho1}, {rho2})"
            )));
        }
        Ok(LossWeights { rho1, rho2 })
    }
}

/// A labelled point: the network is fit so that `forward(point) ~ target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub point: Vector3<f64>,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ErbfParams {
    pub neurons: Vec<ErbfNeuron>,
}

impl ErbfParams {
    pub fn new(neurons: Vec<ErbfNeuron>) -> Self {
        ErbfParams { neurons }
    }

    pub fn len(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    pub fn param_count(&self) -> usize {
        self.neurons.len() * PARAMS_PER_NEURON
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for n in &self.neurons {
            out.push(n.w_tilde);
            out.extend(n.d_tilde.iter());
            out.extend(n.center.iter());
            out.extend(n.angles.iter());
        }
        out
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() % PARAMS_PER_NEURON != 0 {
            return Err(Error::LengthMismatch {
                expected: flat.len() / PARAMS_PER_NEURON * PARAMS_PER_NEURON,
                actual: flat.len(),
            });
        }
        let neurons = flat
            .chunks_exact(PARAMS_PER_NEURON)
            .map(|p| ErbfNeuron {
                w_tilde: p[0],
                d_tilde: Vector3::new(p[1], p[2], p[3]),
                center: Vector3::new(p[4], p[5], p[6]),
                angles: Vector3::new(p[7], p[8], p[9]),
            })
            .collect();
        Ok(ErbfParams { neurons })
    }

    /// Overwrites the parameters from a flat vector of the same length.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::LengthMismatch {
                expected: self.param_count(),
                actual: flat.len(),
            });
        }
        for (n, p) in self.neurons.iter_mut().zip(flat.chunks_exact(PARAMS_PER_NEURON)) {
            n.w_tilde = p[0];
            n.d_tilde = Vector3::new(p[1], p[2], p[3]);
            n.center = Vector3::new(p[4], p[5], p[6]);
            n.angles = Vector3::new(p[7], p[8], p[9]);
        }
        Ok(())
    }

    fn prepare(&self) -> Vec<Prepared> {
        self.neurons.iter().map(Prepared::new).collect()
    }

    pub fn forward(&self, x: &Vector3<f64>) -> f64 {
        self.neurons
            .iter()
            .map(|n| n.weight() * n.psi(x))
            .sum()
    }

    /// Evaluates the network at many points, reusing the per-neuron setup.
    pub fn forward_many(&self, points: &[Vector3<f64>]) -> Vec<f64> {
        let prep = self.prepare();
        points
            .par_iter()
            .map(|x| prep.iter().map(|p| p.weight * p.psi(x)).sum())
            .collect()
    }

    /// `sum_i w~_i^2 + sum_{i,q} d~_iq^2`, the L1 norm of the physical
    /// weights and axis scales.
    pub fn l1_norm(&self) -> f64 {
        self.neurons
            .iter()
            .map(|n| n.weight() + n.axes().sum())
            .sum()
    }
}

/// `rho1 * l1_norm + rho2 * sum_m (forward(x_m) - y_m)^2`.
pub fn loss(params: &ErbfParams, batch: &[Sample], weights: &LossWeights) -> Result<f64> {
    let prep = params.prepare();
    let sq_err: f64 = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .map(|s| {
                    let out: f64 = prep.iter().map(|p| p.weight * p.psi(&s.point)).sum();
                    let r = out - s.target;
                    r * r
                })
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let value = weights.rho1 * params.l1_norm() + weights.rho2 * sq_err;
    if !value.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    Ok(value)
}

pub fn loss_gradient(params: &ErbfParams, batch: &[Sample], weights: &LossWeights) -> Result<Vec<f64>> {
    loss_and_gradient(params, batch, weights).map(|(_, g)| g)
}

struct NeuronCache {
    prep: Prepared,
    derivs: [Matrix3<f64>; 3],
    d_tilde: Vector3<f64>,
    w_tilde: f64,
}

/// Loss value and its analytic gradient in the flat neuron-major layout.
pub fn loss_and_gradient(
    params: &ErbfParams,
    batch: &[Sample],
    weights: &LossWeights,
) -> Result<(f64, Vec<f64>)> {
    let n_params = params.param_count();
    let cache: Vec<NeuronCache> = params
        .neurons
        .iter()
        .map(|n| NeuronCache {
            prep: Prepared::new(n),
            derivs: rotation_derivatives(&n.angles),
            d_tilde: n.d_tilde,
            w_tilde: n.w_tilde,
        })
        .collect();

    let partials: Vec<(f64, Vec<f64>)> = if weights.rho2 == 0.0 {
        Vec::new()
    } else {
        batch
            .par_chunks(CHUNK)
            .map(|chunk| error_term_chunk(&cache, chunk, weights.rho2, n_params))
            .collect()
    };

    let mut sq_err = 0.0;
    let mut grad = vec![0.0; n_params];
    for (e, g) in partials {
        sq_err += e;
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v;
        }
    }

    if weights.rho1 != 0.0 {
        for (i, n) in params.neurons.iter().enumerate() {
            let base = i * PARAMS_PER_NEURON;
            grad[base] += 2.0 * weights.rho1 * n.w_tilde;
            for q in 0..3 {
                grad[base + 1 + q] += 2.0 * weights.rho1 * n.d_tilde[q];
            }
        }
    }

    let value = weights.rho1 * params.l1_norm() + weights.rho2 * sq_err;
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("loss gradient"));
    }
    Ok((value, grad))
}

/// Squared-error sum and its rho2-weighted gradient over one chunk.
fn error_term_chunk(cache: &[NeuronCache], chunk: &[Sample], rho2: f64, n_params: usize) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; n_params];
    let mut sq_err = 0.0;
    let mut local: Vec<(Vector3<f64>, Vector3<f64>, f64)> = Vec::with_capacity(cache.len());
    for s in chunk {
        local.clear();
        let mut out = 0.0;
        for c in cache {
            let v = s.point - c.prep.center;
            let u = c.prep.rot * v;
            let z = u.component_mul(&c.prep.scale);
            let psi = (-z.norm_squared()).exp();
            out += c.prep.weight * psi;
            local.push((v, u, psi));
        }
        let r = out - s.target;
        sq_err += r * r;
        let g = 2.0 * rho2 * r;
        if g == 0.0 {
            continue;
        }
        for (i, (c, &(v, u, psi))) in cache.iter().zip(local.iter()).enumerate() {
            if psi == 0.0 {
                continue;
            }
            let base = i * PARAMS_PER_NEURON;
            grad[base] += g * 2.0 * c.w_tilde * psi;
            // dL/dE for E = |S u|^2 is -a
            let a = g * c.prep.weight * psi;
            let s2 = c.prep.scale.component_mul(&c.prep.scale);
            let dq = 2.0 * s2.component_mul(&u);
            for q in 0..3 {
                let dt = c.d_tilde[q];
                grad[base + 1 + q] -= a * 4.0 * dt * dt * dt * u[q] * u[q];
            }
            let dc = c.prep.rot.tr_mul(&dq) * a;
            grad[base + 4] += dc.x;
            grad[base + 5] += dc.y;
            grad[base + 6] += dc.z;
            for k in 0..3 {
                grad[base + 7 + k] -= a * dq.dot(&(c.derivs[k] * v));
            }
        }
    }
    (sq_err, grad)
}
