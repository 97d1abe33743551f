//! A desk-scale trainable decision function.
//!
//! A multinomial-logistic model over average-pooled window features: the
//! 4-channel d×d window is pooled to 16×16 per channel, flattened, and
//! given a bias term; a softmax pair decides walk/stop and an independent
//! sigmoid per angle bucket scores directions. It trains by SGD on the
//! same loss the search labels are built for: action cross entropy plus,
//! on walk-labeled examples, mean-squared error over the angle vector.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TrainingExample;
use crate::tracer::{DecisionContext, DecisionError, DecisionFunction, DecisionInput, DecisionOutput};

/// Pooled feature-map side length.
pub const POOL: usize = 16;
/// Probability clamp for the cross-entropy term.
pub const LOSS_EPSILON: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
    #[error("no training examples")]
    Empty,
}

/// Action cross entropy plus, when the target is a walk, mean-squared
/// error over the angle vector. Probabilities are clamped to
/// [ε, 1−ε] before the logarithm, so the loss is finite for hard 0/1
/// outputs and zero (to within ~ε) exactly when outputs equal targets.
pub fn loss(out: &DecisionOutput, target_action: (f64, f64), target_angles: &[f64]) -> f64 {
    let clamp = |p: f64| p.clamp(LOSS_EPSILON, 1.0 - LOSS_EPSILON);
    let ce = -(target_action.0 * clamp(out.o_walk).ln() + target_action.1 * clamp(out.o_stop).ln());
    let mse = if target_action.0 == 1.0 {
        let a = target_angles.len() as f64;
        out.angles
            .iter()
            .zip(target_angles)
            .map(|(&o, &t)| (o - t) * (o - t))
            .sum::<f64>()
            / a
    } else {
        0.0
    };
    ce + mse
}

/// Analytic gradient of [`loss`] with respect to the output entries,
/// valid where the clamp is inactive: returns
/// (∂L/∂o_walk, ∂L/∂o_stop, ∂L/∂angles).
pub fn loss_grad_wrt_output(
    out: &DecisionOutput,
    target_action: (f64, f64),
    target_angles: &[f64],
) -> (f64, f64, Vec<f64>) {
    let d_walk = -target_action.0 / out.o_walk.clamp(LOSS_EPSILON, 1.0 - LOSS_EPSILON);
    let d_stop = -target_action.1 / out.o_stop.clamp(LOSS_EPSILON, 1.0 - LOSS_EPSILON);
    let a = target_angles.len() as f64;
    let d_angles = if target_action.0 == 1.0 {
        out.angles.iter().zip(target_angles).map(|(&o, &t)| 2.0 * (o - t) / a).collect()
    } else {
        vec![0.0; target_angles.len()]
    };
    (d_walk, d_stop, d_angles)
}

/// Average-pool the 4 window channels to POOL×POOL each and append a bias
/// feature.
pub fn pooled_features(input: &DecisionInput) -> Vec<f64> {
    let d = input.d;
    assert!(d >= POOL, "window side {d} too small to pool to {POOL}");
    let mut features = Vec::with_capacity(POOL * POOL * 4 + 1);
    for ch in 0..4 {
        for pr in 0..POOL {
            let r0 = pr * d / POOL;
            let r1 = (pr + 1) * d / POOL;
            for pc in 0..POOL {
                let c0 = pc * d / POOL;
                let c1 = (pc + 1) * d / POOL;
                let mut sum = 0.0;
                for r in r0..r1 {
                    for c in c0..c1 {
                        sum += input.at(r, c, ch) as f64;
                    }
                }
                features.push(sum / ((r1 - r0) * (c1 - c0)) as f64);
            }
        }
    }
    features.push(1.0);
    features
}

pub const FEATURE_DIM: usize = POOL * POOL * 4 + 1;

/// Linear model: two action logits (softmax) and one logit per angle
/// bucket (sigmoid), all over the pooled features.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToyModel {
    pub angle_buckets: usize,
    /// Row-major [2 × FEATURE_DIM].
    pub action_weights: Vec<f64>,
    /// Row-major [angle_buckets × FEATURE_DIM].
    pub angle_weights: Vec<f64>,
}

impl ToyModel {
    pub fn zeros(angle_buckets: usize) -> Self {
        ToyModel {
            angle_buckets,
            action_weights: vec![0.0; 2 * FEATURE_DIM],
            angle_weights: vec![0.0; angle_buckets * FEATURE_DIM],
        }
    }

    /// Small random initialization, deterministic in the seed.
    pub fn random(angle_buckets: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = ToyModel::zeros(angle_buckets);
        for w in model.action_weights.iter_mut().chain(model.angle_weights.iter_mut()) {
            *w = rng.random_range(-0.05..0.05);
        }
        model
    }

    pub fn n_params(&self) -> usize {
        self.action_weights.len() + self.angle_weights.len()
    }

    pub fn param(&self, i: usize) -> f64 {
        if i < self.action_weights.len() {
            self.action_weights[i]
        } else {
            self.angle_weights[i - self.action_weights.len()]
        }
    }

    pub fn param_mut(&mut self, i: usize) -> &mut f64 {
        if i < self.action_weights.len() {
            &mut self.action_weights[i]
        } else {
            let j = i - self.action_weights.len();
            &mut self.angle_weights[j]
        }
    }

    pub fn forward(&self, features: &[f64]) -> DecisionOutput {
        debug_assert_eq!(features.len(), FEATURE_DIM);
        let dot = |row: &[f64]| -> f64 { row.iter().zip(features).map(|(w, x)| w * x).sum() };
        let z_walk = dot(&self.action_weights[..FEATURE_DIM]);
        let z_stop = dot(&self.action_weights[FEATURE_DIM..]);
        // Stable two-way softmax.
        let m = z_walk.max(z_stop);
        let ew = (z_walk - m).exp();
        let es = (z_stop - m).exp();
        let o_walk = ew / (ew + es);
        let o_stop = es / (ew + es);
        let angles = (0..self.angle_buckets)
            .map(|i| {
                let z = dot(&self.angle_weights[i * FEATURE_DIM..(i + 1) * FEATURE_DIM]);
                1.0 / (1.0 + (-z).exp())
            })
            .collect();
        DecisionOutput { o_walk, o_stop, angles }
    }

    /// Loss and its gradient with respect to every parameter for a single
    /// example, as (loss, flat gradient matching the param indexing).
    pub fn loss_and_grad(
        &self,
        features: &[f64],
        target_action: (f64, f64),
        target_angles: &[f64],
    ) -> (f64, Vec<f64>) {
        let out = self.forward(features);
        let value = loss(&out, target_action, target_angles);
        let mut grad = vec![0.0; self.n_params()];

        // Softmax + cross entropy: dL/dz_k = p_k − t_k.
        let dz = [out.o_walk - target_action.0, out.o_stop - target_action.1];
        for (k, &dzk) in dz.iter().enumerate() {
            let base = k * FEATURE_DIM;
            for (f, &x) in features.iter().enumerate() {
                grad[base + f] = dzk * x;
            }
        }
        // Sigmoid + MSE (walk targets only): dL/dz_i = (2/a)(σ−t)σ(1−σ).
        if target_action.0 == 1.0 {
            let a = target_angles.len() as f64;
            for (i, (&sig, &t)) in out.angles.iter().zip(target_angles).enumerate() {
                let dzi = 2.0 / a * (sig - t) * sig * (1.0 - sig);
                let base = self.action_weights.len() + i * FEATURE_DIM;
                for (f, &x) in features.iter().enumerate() {
                    grad[base + f] += dzi * x;
                }
            }
        }
        (value, grad)
    }

    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> std::io::Result<Self> {
        let file = std::fs::File::open(path)?;
        let model = serde_json::from_reader(std::io::BufReader::new(file))?;
        Ok(model)
    }
}

/// Pre-pooled training set (windows reduced to feature vectors once).
pub struct PooledExample {
    pub features: Vec<f64>,
    pub target_action: (f64, f64),
    pub target_angles: Vec<f64>,
}

impl PooledExample {
    pub fn from_example(example: &TrainingExample) -> PooledExample {
        PooledExample {
            features: pooled_features(&example.input),
            target_action: example.target_action,
            target_angles: example.target_angles.clone(),
        }
    }
}

/// SGD over the examples; returns the trained model and the mean loss per
/// epoch. Deterministic in the seed.
pub fn train_toy_decider(
    examples: &[PooledExample],
    angle_buckets: usize,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<(ToyModel, Vec<f64>), TrainError> {
    if examples.is_empty() {
        return Err(TrainError::Empty);
    }
    let mut model = ToyModel::random(angle_buckets, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(epochs);

    for epoch in 0..epochs {
        // Fisher-Yates with the session rng keeps runs reproducible.
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let mut total = 0.0;
        for &idx in &order {
            let ex = &examples[idx];
            let (value, grad) =
                model.loss_and_grad(&ex.features, ex.target_action, &ex.target_angles);
            total += value;
            for (i, g) in grad.iter().enumerate() {
                *model.param_mut(i) -= learning_rate * g;
            }
        }
        let mean = total / examples.len() as f64;
        if !mean.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        epoch_losses.push(mean);
    }
    Ok((model, epoch_losses))
}

/// The toy model packaged as a decision function.
pub struct ToyDecider {
    pub model: ToyModel,
}

impl ToyDecider {
    pub fn new(model: ToyModel) -> Self {
        ToyDecider { model }
    }
}

impl DecisionFunction for ToyDecider {
    fn decide(&mut self, ctx: &mut DecisionContext<'_>) -> Result<DecisionOutput, DecisionError> {
        if ctx.config.angle_buckets != self.model.angle_buckets {
            return Err(DecisionError::Protocol(format!(
                "toy model trained for {} angle buckets, search uses {}",
                self.model.angle_buckets, ctx.config.angle_buckets
            )));
        }
        let features = pooled_features(ctx.window());
        Ok(self.model.forward(&features))
    }
}
