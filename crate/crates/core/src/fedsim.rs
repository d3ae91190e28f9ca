//! Federated full-batch gradient descent on linear regression.
//!
//! Each round every device starts from the global parameters, takes `N`
//! gradient steps on its own data, and the server averages the results.
//! This ties the iteration counts `M` and `N` used by the energy model to
//! an actual training run.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

/// One training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }
}

/// Per-device local datasets sharing one input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    devices: Vec<Vec<Sample>>,
    dim: usize,
}

impl Dataset {
    pub fn new(devices: Vec<Vec<Sample>>) -> Result<Self> {
        let Some(dim) = devices.first().and_then(|d| d.first()).map(|s| s.x.len()) else {
            return invalid("dataset needs at least one device with samples");
        };
        for (k, samples) in devices.iter().enumerate() {
            if samples.is_empty() {
                return invalid(format!("device {k} has no samples"));
            }
            if samples.iter().any(|s| s.x.len() != dim) {
                return invalid(format!("device {k} has inputs of the wrong dimension"));
            }
            if samples
                .iter()
                .any(|s| !s.y.is_finite() || s.x.iter().any(|v| !v.is_finite()))
            {
                return invalid(format!("device {k} has non-finite data"));
            }
        }
        Ok(Self { devices, dim })
    }

    pub fn devices(&self) -> &[Vec<Sample>] {
        &self.devices
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.devices.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.devices.iter().map(Vec::len).collect()
    }

    /// All samples merged, device by device.
    pub fn pooled(&self) -> Vec<Sample> {
        self.devices.iter().flatten().cloned().collect()
    }

    /// Largest eigenvalue of the sample-averaged Gram matrix over every
    /// device and over the pooled data: the smoothness constant of every
    /// loss a training step can see.
    pub fn smoothness(&self) -> f64 {
        let pooled = self.pooled();
        self.devices
            .iter()
            .map(|d| gram_max_eigenvalue(d, self.dim))
            .fold(gram_max_eigenvalue(&pooled, self.dim), f64::max)
    }

    /// Step sizes below this value make every gradient step a descent step.
    pub fn stability_threshold(&self) -> f64 {
        1.0 / self.smoothness()
    }
}

fn gram_max_eigenvalue(samples: &[Sample], dim: usize) -> f64 {
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    for s in samples {
        for i in 0..dim {
            for j in 0..dim {
                gram[(i, j)] += s.x[i] * s.x[j];
            }
        }
    }
    gram /= samples.len() as f64;
    SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Linear model weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub w: Vec<f64>,
}

impl ModelParams {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite()) {
            return invalid("model parameters must be finite");
        }
        Ok(Self { w })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { w: vec![0.0; dim] }
    }

    fn dot(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

/// Squared-error loss `(y - w.x)^2 / 2` of one sample.
pub fn sample_loss(w: &ModelParams, x: &[f64], y: f64) -> Result<f64> {
    if x.len() != w.w.len() {
        return invalid(format!(
            "input has dimension {}, model has {}",
            x.len(),
            w.w.len()
        ));
    }
    let r = y - w.dot(x);
    Ok(0.5 * r * r)
}

/// Mean loss over a device's samples and its gradient.
pub fn device_loss_grad(w: &ModelParams, samples: &[Sample]) -> Result<(f64, Vec<f64>)> {
    if samples.is_empty() {
        return invalid("device dataset is empty");
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; w.w.len()];
    for s in samples {
        loss += sample_loss(w, &s.x, s.y)?;
        let r = s.y - w.dot(&s.x);
        for (g, xi) in grad.iter_mut().zip(&s.x) {
            *g -= r * xi;
        }
    }
    let n = samples.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad))
}

/// Sample-weighted mean of the device losses.
pub fn global_loss(w: &ModelParams, data: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for samples in data.devices() {
        total += device_loss_grad(w, samples)?.0 * samples.len() as f64;
    }
    Ok(total / data.sizes().iter().sum::<usize>() as f64)
}

/// How the server combines the uploaded device parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Plain mean over devices.
    #[default]
    Unweighted,
    /// Mean weighted by local sample counts.
    BySampleCount,
}

fn check_step(eta: f64, local_iters: u32) -> Result<()> {
    if !(eta.is_finite() && eta > 0.0) {
        return invalid("learning rate must be positive");
    }
    if local_iters == 0 {
        return invalid("at least one local iteration is required");
    }
    Ok(())
}

/// One global round with unweighted averaging.
pub fn federated_round(
    global: &ModelParams,
    data: &Dataset,
    eta: f64,
    local_iters: u32,
) -> Result<ModelParams> {
    federated_round_with(global, data, eta, local_iters, Aggregation::Unweighted)
}

pub fn federated_round_with(
    global: &ModelParams,
    data: &Dataset,
    eta: f64,
    local_iters: u32,
    aggregation: Aggregation,
) -> Result<ModelParams> {
    check_step(eta, local_iters)?;
    if global.w.len() != data.dim() {
        return invalid("model and data dimensions differ");
    }
    let locals: Vec<Result<Vec<f64>>> = data
        .devices()
        .par_iter()
        .enumerate()
        .map(|(k, samples)| {
            let mut w = global.clone();
            for _ in 0..local_iters {
                let (_, grad) = device_loss_grad(&w, samples)?;
                for (wi, gi) in w.w.iter_mut().zip(&grad) {
                    *wi -= eta * gi;
                }
                if w.w.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Divergence { device: k });
                }
            }
            Ok(w.w)
        })
        .collect();

    let weights: Vec<f64> = match aggregation {
        Aggregation::Unweighted => vec![1.0; data.k()],
        Aggregation::BySampleCount => data.sizes().iter().map(|&n| n as f64).collect(),
    };
    let total: f64 = weights.iter().sum();
    // Sequential reduction in device order keeps results bit-identical.
    let mut avg = vec![0.0; data.dim()];
    for (local, weight) in locals.into_iter().zip(&weights) {
        for (a, v) in avg.iter_mut().zip(local?) {
            *a += weight * v;
        }
    }
    avg.iter_mut().for_each(|a| *a /= total);
    Ok(ModelParams { w: avg })
}

/// Global parameters and loss after each round, starting from the initial point.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTrajectory {
    pub params: Vec<ModelParams>,
    pub losses: Vec<f64>,
    pub eta: f64,
    pub global_iters: u32,
    pub local_iters: u32,
}

impl TrainingTrajectory {
    pub fn final_loss(&self) -> f64 {
        *self
            .losses
            .last()
            .expect("trajectory holds the initial point")
    }

    /// CSV with columns `round, global_loss, w0, w1, ...`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let dim = self.params.first().map_or(0, |p| p.w.len());
        let mut header = vec!["round".to_string(), "global_loss".to_string()];
        header.extend((0..dim).map(|i| format!("w{i}")));
        wtr.write_record(&header)?;
        for (round, (p, loss)) in self.params.iter().zip(&self.losses).enumerate() {
            let mut row = vec![round.to_string(), loss.to_string()];
            row.extend(p.w.iter().map(f64::to_string));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn run_training(
    data: &Dataset,
    eta: f64,
    global_iters: u32,
    local_iters: u32,
    initial: ModelParams,
) -> Result<TrainingTrajectory> {
    run_training_with(
        data,
        eta,
        global_iters,
        local_iters,
        initial,
        Aggregation::Unweighted,
    )
}

pub fn run_training_with(
    data: &Dataset,
    eta: f64,
    global_iters: u32,
    local_iters: u32,
    initial: ModelParams,
    aggregation: Aggregation,
) -> Result<TrainingTrajectory> {
    check_step(eta, local_iters)?;
    let mut losses = vec![global_loss(&initial, data)?];
    let mut params = vec![initial];
    for _ in 0..global_iters {
        let next = federated_round_with(
            params.last().expect("non-empty"),
            data,
            eta,
            local_iters,
            aggregation,
        )?;
        losses.push(global_loss(&next, data)?);
        params.push(next);
    }
    Ok(TrainingTrajectory {
        params,
        losses,
        eta,
        global_iters,
        local_iters,
    })
}

/// Fixed-seed linear model `y = theta.x + noise` with Gaussian inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub samples_per_device: Vec<usize>,
    pub dim: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn uniform(devices: usize, samples: usize, dim: usize, noise_std: f64, seed: u64) -> Self {
        Self {
            samples_per_device: vec![samples; devices],
            dim,
            noise_std,
            seed,
        }
    }

    /// The dataset and the true weights it was drawn from.
    pub fn generate(&self) -> Result<(Dataset, Vec<f64>)> {
        if self.dim == 0 {
            return invalid("synthetic data needs a positive dimension");
        }
        let noise = Normal::new(0.0, self.noise_std)
            .map_err(|e| Error::InvalidInput(format!("noise level: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let theta: Vec<f64> = (0..self.dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let devices = self
            .samples_per_device
            .iter()
            .map(|&n| {
                (0..n)
                    .map(|_| {
                        let x: Vec<f64> = (0..self.dim)
                            .map(|_| StandardNormal.sample(&mut rng))
                            .collect();
                        let y = theta.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()
                            + noise.sample(&mut rng);
                        Sample { x, y }
                    })
                    .collect()
            })
            .collect();
        Ok((Dataset::new(devices)?, theta))
    }
}
