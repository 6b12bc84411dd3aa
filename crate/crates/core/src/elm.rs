//! Single-hidden-layer extreme learning machine.
//!
//! The hidden layer is drawn once from a seeded uniform distribution and
//! never trained; only the output weights are fit, in closed form, through
//! a ridge-regularized least-squares solve. Features are z-score normalized
//! so the meter-scale position channels cannot drown out the radian-scale
//! ones in the random projection.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Input dimension: \[x, y, heading, yaw_rate, vx, vy, slip_fl, slip_fr\].
pub const FEATURE_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
        }
    }
}

/// Hyperparameters for hidden-layer construction and training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden_nodes: usize,
    /// Ridge coefficient C; larger C weighs the data misfit more.
    pub regularization: f64,
    pub seed: u64,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_nodes: 55,
            regularization: 100.0,
            seed: 7,
            activation: Activation::Sigmoid,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_nodes < 1 {
            return Err(Error::InvalidArgument(
                "need at least one hidden node".into(),
            ));
        }
        if self.regularization <= 0.0 || !self.regularization.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "regularization must be positive and finite, got {}",
                self.regularization
            )));
        }
        Ok(())
    }
}

/// One labeled record: vehicle-state features and the realized one-step
/// predictive error \[m\].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub features: [f64; FEATURE_DIM],
    pub label: f64,
}

impl TrainingSample {
    pub fn is_finite(&self) -> bool {
        self.label.is_finite() && self.features.iter().all(|v| v.is_finite())
    }
}

/// Regression quality on a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub rmse: f64,
    pub max_abs_error: f64,
    pub r_squared: f64,
}

/// Random-hidden-layer regressor with ridge-trained output weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElmModel {
    /// l x 8 input weights, drawn from U\[-1, 1\].
    input_weights: DMatrix<f64>,
    /// Hidden biases, drawn from U\[0, 1\].
    biases: DVector<f64>,
    /// Trained output weights; zero until `train` runs.
    output_weights: DVector<f64>,
    activation: Activation,
    norm_mean: DVector<f64>,
    norm_std: DVector<f64>,
    seed: u64,
}

impl ElmModel {
    /// Draw the hidden layer deterministically from the seed. Weights fill
    /// row by row, then biases, so the layout is reproducible byte for byte.
    pub fn new(config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let l = config.hidden_nodes;
        let mut rng = SeededRng::new(config.seed);
        let mut input_weights = DMatrix::zeros(l, FEATURE_DIM);
        for i in 0..l {
            for j in 0..FEATURE_DIM {
                input_weights[(i, j)] = rng.range(-1.0, 1.0);
            }
        }
        let biases = DVector::from_fn(l, |_, _| rng.unit());
        Ok(ElmModel {
            input_weights,
            biases,
            output_weights: DVector::zeros(l),
            activation: config.activation,
            norm_mean: DVector::zeros(FEATURE_DIM),
            norm_std: DVector::from_element(FEATURE_DIM, 1.0),
            seed: config.seed,
        })
    }

    pub fn hidden_nodes(&self) -> usize {
        self.biases.len()
    }

    pub fn input_weights(&self) -> &DMatrix<f64> {
        &self.input_weights
    }

    pub fn output_weights(&self) -> &DVector<f64> {
        &self.output_weights
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Hidden-layer response G(a_i . x' + b_i) on the normalized features.
    pub fn hidden_output(&self, features: &[f64; FEATURE_DIM]) -> DVector<f64> {
        let mut normalized = DVector::zeros(FEATURE_DIM);
        for j in 0..FEATURE_DIM {
            normalized[j] = (features[j] - self.norm_mean[j]) / self.norm_std[j];
        }
        let pre = &self.input_weights * normalized + &self.biases;
        pre.map(|z| self.activation.apply(z))
    }

    /// Estimated predictive error \[m\] for one feature vector.
    pub fn predict(&self, features: &[f64; FEATURE_DIM]) -> f64 {
        self.output_weights.dot(&self.hidden_output(features))
    }

    /// Fit the output weights: beta = (I/C + H'H)^-1 H'L via a Cholesky
    /// solve of the regularized Gram matrix. Also (re)computes the feature
    /// normalization statistics from the samples.
    pub fn train(&mut self, samples: &[TrainingSample], regularization: f64) -> Result<()> {
        if samples.is_empty() {
            return Err(Error::InvalidData(
                "training requires at least one sample".into(),
            ));
        }
        if regularization <= 0.0 || !regularization.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "regularization must be positive and finite, got {regularization}"
            )));
        }
        for (row, s) in samples.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::InvalidData(format!(
                    "non-finite value in training sample {row}"
                )));
            }
        }

        let n = samples.len();
        let mut mean = DVector::zeros(FEATURE_DIM);
        for s in samples {
            for j in 0..FEATURE_DIM {
                mean[j] += s.features[j];
            }
        }
        mean /= n as f64;
        let mut var = DVector::zeros(FEATURE_DIM);
        for s in samples {
            for j in 0..FEATURE_DIM {
                let d = s.features[j] - mean[j];
                var[j] += d * d;
            }
        }
        var /= n as f64;
        // constant features (e.g. the zero slip ratios) get unit std
        let std = var.map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 });
        self.norm_mean = mean;
        self.norm_std = std;

        let l = self.hidden_nodes();
        let mut hidden = DMatrix::zeros(n, l);
        for (row, s) in samples.iter().enumerate() {
            let h = self.hidden_output(&s.features);
            hidden.row_mut(row).copy_from(&h.transpose());
        }
        let labels = DVector::from_iterator(n, samples.iter().map(|s| s.label));

        let gram = hidden.transpose() * &hidden + DMatrix::identity(l, l) / regularization;
        let rhs = hidden.transpose() * labels;
        let chol = Cholesky::new(gram).ok_or_else(|| {
            Error::InvalidData("regularized Gram matrix is not positive definite".into())
        })?;
        self.output_weights = chol.solve(&rhs);
        Ok(())
    }

    /// rmse, max |error| and R^2 over a sample set.
    pub fn evaluate(&self, samples: &[TrainingSample]) -> Result<RegressionMetrics> {
        if samples.is_empty() {
            return Err(Error::InvalidData(
                "evaluation requires at least one sample".into(),
            ));
        }
        let n = samples.len() as f64;
        let mean_label = samples.iter().map(|s| s.label).sum::<f64>() / n;
        let mut ss_res = 0.0;
        let mut ss_tot = 0.0;
        let mut max_abs: f64 = 0.0;
        for s in samples {
            let err = self.predict(&s.features) - s.label;
            ss_res += err * err;
            ss_tot += (s.label - mean_label) * (s.label - mean_label);
            max_abs = max_abs.max(err.abs());
        }
        let r_squared = if ss_tot > 0.0 {
            1.0 - ss_res / ss_tot
        } else if ss_res == 0.0 {
            1.0
        } else {
            0.0
        };
        Ok(RegressionMetrics {
            rmse: (ss_res / n).sqrt(),
            max_abs_error: max_abs,
            r_squared,
        })
    }

    /// Self-describing JSON serialization.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ElmModel =
            serde_json::from_str(text).map_err(|e| Error::Io(format!("model parse: {e}")))?;
        if model.norm_std.iter().any(|&s| s <= 0.0 || s.is_nan()) {
            return Err(Error::InvalidData(
                "model has non-positive feature scales".into(),
            ));
        }
        Ok(model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
