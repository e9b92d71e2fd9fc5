use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::BowVector;
use crate::corpus::{fisher_yates, Label};
use crate::error::{Error, Result};
use crate::numerics::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-4,
            epochs: 50,
            seed: 0,
        }
    }
}

/// Primal linear SVM: `f(x) = w.x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmParams {
    pub w: Vec<f64>,
    pub b: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmTrainReport {
    /// Regularized hinge objective after each epoch.
    pub objectives: Vec<f64>,
}

fn sign(label: Label) -> f64 {
    match label {
        Label::Popular => 1.0,
        Label::Unpopular => -1.0,
    }
}

impl SvmParams {
    pub fn zeros(dim: usize, lambda: f64) -> Self {
        SvmParams {
            w: vec![0.0; dim],
            b: 0.0,
            lambda,
        }
    }

    pub fn margin(&self, x: &BowVector) -> Result<f64> {
        if x.dim() != self.w.len() {
            return Err(Error::Shape(format!(
                "feature vector has dimension {}, model expects {}",
                x.dim(),
                self.w.len()
            )));
        }
        Ok(x.dot(&self.w) + self.b)
    }

    /// `max(0, 1 - y f(x))` with y in {-1, +1}.
    pub fn hinge_loss(&self, x: &BowVector, label: Label) -> Result<f64> {
        Ok((1.0 - sign(label) * self.margin(x)?).max(0.0))
    }

    /// `lambda/2 (|w|^2 + b^2) + mean hinge`.
    pub fn objective(&self, data: &[(BowVector, Label)]) -> Result<f64> {
        let reg = 0.5 * self.lambda * (self.w.iter().map(|v| v * v).sum::<f64>() + self.b * self.b);
        let mut hinge = 0.0;
        for (x, y) in data {
            hinge += self.hinge_loss(x, *y)?;
        }
        Ok(reg + hinge / data.len().max(1) as f64)
    }
}

/// Scaled representation `w = scale * v` so the per-step shrink is O(1).
struct ScaledWeights {
    v: Vec<f64>,
    b: f64,
    scale: f64,
    /// |v|^2, updated incrementally
    v_norm2: f64,
}

impl ScaledWeights {
    fn margin(&self, x: &BowVector) -> f64 {
        self.scale * x.dot(&self.v) + self.b
    }

    fn shrink(&mut self, factor: f64) {
        if factor <= 0.0 {
            self.v.iter_mut().for_each(|v| *v = 0.0);
            self.v_norm2 = 0.0;
            self.scale = 1.0;
            self.b = 0.0;
            return;
        }
        self.scale *= factor;
        self.b *= factor;
        if self.scale < 1e-9 {
            self.renormalize();
        }
    }

    fn renormalize(&mut self) {
        let s = self.scale;
        self.v.iter_mut().for_each(|v| *v *= s);
        self.v_norm2 = self.v.iter().map(|v| v * v).sum();
        self.scale = 1.0;
    }

    fn add(&mut self, x: &BowVector, step: f64) {
        let delta_scale = step / self.scale;
        for &(i, c) in x.entries() {
            let d = delta_scale * c as f64;
            self.v_norm2 += 2.0 * self.v[i] * d + d * d;
            self.v[i] += d;
        }
        self.b += step;
    }

    fn norm(&self) -> f64 {
        (self.scale * self.scale * self.v_norm2.max(0.0) + self.b * self.b).sqrt()
    }

    fn into_params(mut self, lambda: f64) -> SvmParams {
        self.renormalize();
        SvmParams {
            w: self.v,
            b: self.b,
            lambda,
        }
    }
}

/// Pegasos stochastic subgradient descent on the regularized hinge loss.
/// The bias is treated as the weight of a constant feature.
pub fn svm_train(data: &[(BowVector, Label)], config: SvmConfig) -> Result<(SvmParams, SvmTrainReport)> {
    if data.is_empty() {
        return Err(Error::Data("SVM training set is empty".into()));
    }
    if !(config.lambda.is_finite() && config.lambda > 0.0) {
        return Err(Error::Config(format!("SVM lambda must be positive, got {}", config.lambda)));
    }
    let positives = data.iter().filter(|(_, y)| *y == Label::Popular).count();
    if positives == 0 || positives == data.len() {
        return Err(Error::Data("SVM training data contains a single class".into()));
    }
    let dim = data[0].0.dim();
    if let Some((x, _)) = data.iter().find(|(x, _)| x.dim() != dim) {
        return Err(Error::Shape(format!("mixed feature dimensions {dim} and {}", x.dim())));
    }

    let lambda = config.lambda;
    let radius = 1.0 / lambda.sqrt();
    let mut w = ScaledWeights {
        v: vec![0.0; dim],
        b: 0.0,
        scale: 1.0,
        v_norm2: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut t = 0u64;
    let mut objectives = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        fisher_yates(&mut order, &mut rng);
        for &i in &order {
            t += 1;
            let (x, label) = &data[i];
            let y = sign(*label);
            let eta = 1.0 / (lambda * t as f64);
            let violated = y * w.margin(x) < 1.0;
            w.shrink(1.0 - eta * lambda);
            if violated {
                w.add(x, eta * y);
            }
            let norm = w.norm();
            if norm > radius {
                w.shrink(radius / norm);
            }
        }
        let snapshot = SvmParams {
            w: w.v.iter().map(|v| v * w.scale).collect(),
            b: w.b,
            lambda,
        };
        objectives.push(snapshot.objective(data)?);
    }
    let params = w.into_params(lambda);
    if !params.b.is_finite() || params.w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("SVM weights".into()));
    }
    Ok((params, SvmTrainReport { objectives }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmPrediction {
    pub margin: f64,
    /// `sigmoid(margin)`, reported for uniformity with the neural models.
    pub score: f64,
    pub label: Label,
}

/// Positive margin means popular; a zero margin goes to the unpopular class.
pub fn svm_predict(params: &SvmParams, x: &BowVector) -> Result<SvmPrediction> {
    let margin = params.margin(x)?;
    Ok(SvmPrediction {
        margin,
        score: sigmoid(margin),
        label: Label::from_bool(margin > 0.0),
    })
}
