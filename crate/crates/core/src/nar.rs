//! Nonlinear autoregressive network `y(t) = f(y(t−d₁), …, y(t−d_k))`.
//!
//! One tanh hidden layer and a linear output unit:
//!
//! ```text
//! ŷ = b_out + Σ_h w_out[h] · tanh(b_h + Σ_j W[h][j] · x_j)
//! ```
//!
//! All training happens in min-max normalized space ([`NormParams`]).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::LeastSquaresProblem;
use crate::rng::PortableRng;
use crate::series::LagEmbedding;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NarLayout {
    lags: Vec<usize>,
    hidden_units: usize,
}

impl Default for NarLayout {
    fn default() -> Self {
        Self {
            lags: vec![1, 2],
            hidden_units: 10,
        }
    }
}

impl NarLayout {
    pub fn new(lags: Vec<usize>, hidden_units: usize) -> Result<Self> {
        if lags.is_empty() {
            return Err(Error::Config("at least one lag is required".into()));
        }
        if lags[0] == 0 || lags.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "lags must be positive and strictly increasing, got {lags:?}"
            )));
        }
        if hidden_units == 0 {
            return Err(Error::Config("hidden_units must be positive".into()));
        }
        Ok(Self { lags, hidden_units })
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden_units
    }

    pub fn max_lag(&self) -> usize {
        *self.lags.last().expect("layout has at least one lag")
    }

    pub fn input_count(&self) -> usize {
        self.lags.len()
    }

    pub fn param_count(&self) -> usize {
        self.hidden_units * (self.input_count() + 1) + self.hidden_units + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarWeights {
    /// `hidden_units × |lags|`
    pub input_weights: DMatrix<f64>,
    pub hidden_bias: DVector<f64>,
    pub output_weights: DVector<f64>,
    pub output_bias: f64,
}

impl NarWeights {
    pub fn zeros(layout: &NarLayout) -> Self {
        let h = layout.hidden_units();
        Self {
            input_weights: DMatrix::zeros(h, layout.input_count()),
            hidden_bias: DVector::zeros(h),
            output_weights: DVector::zeros(h),
            output_bias: 0.0,
        }
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden_bias.len()
    }

    pub fn input_count(&self) -> usize {
        self.input_weights.ncols()
    }

    pub fn param_count(&self) -> usize {
        let h = self.hidden_units();
        h * self.input_count() + 2 * h + 1
    }

    /// Flattened order: input weights row-major, hidden biases, output
    /// weights, output bias.
    pub fn flatten(&self) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for h in 0..self.hidden_units() {
            out.extend(self.input_weights.row(h).iter());
        }
        out.extend(self.hidden_bias.iter());
        out.extend(self.output_weights.iter());
        out.push(self.output_bias);
        DVector::from_vec(out)
    }

    pub fn unflatten(layout: &NarLayout, params: &[f64]) -> Result<Self> {
        if params.len() != layout.param_count() {
            return Err(Error::DimensionMismatch(format!(
                "layout needs {} parameters, got {}",
                layout.param_count(),
                params.len()
            )));
        }
        let h = layout.hidden_units();
        let k = layout.input_count();
        let (iw, rest) = params.split_at(h * k);
        let (hb, rest) = rest.split_at(h);
        let (ow, ob) = rest.split_at(h);
        Ok(Self {
            input_weights: DMatrix::from_row_slice(h, k, iw),
            hidden_bias: DVector::from_column_slice(hb),
            output_weights: DVector::from_column_slice(ow),
            output_bias: ob[0],
        })
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|x| x.is_finite())
    }

    fn pre_activation(&self, h: usize, lag_vector: &[f64]) -> f64 {
        self.hidden_bias[h]
            + self
                .input_weights
                .row(h)
                .iter()
                .zip(lag_vector)
                .map(|(w, x)| w * x)
                .sum::<f64>()
    }
}

/// Uniform `[−0.5, 0.5]` initialization drawn in flattened order from
/// [`PortableRng`].
pub fn init_weights(layout: &NarLayout, seed: u64) -> NarWeights {
    let mut rng = PortableRng::new(seed);
    let flat: Vec<f64> = (0..layout.param_count())
        .map(|_| rng.uniform_range(-0.5, 0.5))
        .collect();
    NarWeights::unflatten(layout, &flat).expect("length matches layout")
}

/// Min-max bounds mapping `[y_min, y_max]` onto `[−1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub y_min: f64,
    pub y_max: f64,
}

impl NormParams {
    pub fn fit(values: &[f64]) -> Result<Self> {
        let (y_min, y_max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        if values.is_empty() || y_max.partial_cmp(&y_min) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::DegenerateSeries);
        }
        Ok(Self { y_min, y_max })
    }

    pub fn apply(&self, x: f64) -> f64 {
        2.0 * (x - self.y_min) / (self.y_max - self.y_min) - 1.0
    }

    pub fn invert(&self, x: f64) -> f64 {
        (x + 1.0) * (self.y_max - self.y_min) / 2.0 + self.y_min
    }
}

/// Normalizes with bounds fitted on `values` themselves.
pub fn normalize(values: &[f64]) -> Result<(Vec<f64>, NormParams)> {
    let params = NormParams::fit(values)?;
    Ok((values.iter().map(|&v| params.apply(v)).collect(), params))
}

pub fn denormalize(values: &[f64], params: &NormParams) -> Vec<f64> {
    values.iter().map(|&v| params.invert(v)).collect()
}

pub fn forward(weights: &NarWeights, lag_vector: &[f64]) -> f64 {
    debug_assert_eq!(lag_vector.len(), weights.input_count());
    let mut y = weights.output_bias;
    for h in 0..weights.hidden_units() {
        y += weights.output_weights[h] * weights.pre_activation(h, lag_vector).tanh();
    }
    y
}

/// Predictions for every row of `lag_matrix` plus the `N × P` Jacobian of
/// the predictions with respect to the flattened weights.
pub fn batch_jacobian(weights: &NarWeights, lag_matrix: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = lag_matrix.nrows();
    let h_units = weights.hidden_units();
    let k = weights.input_count();
    let p = weights.param_count();
    let hb_off = h_units * k;
    let ow_off = hb_off + h_units;

    let mut preds = DVector::zeros(n);
    let mut jac = DMatrix::zeros(n, p);
    let mut row = vec![0.0; k];
    for i in 0..n {
        for (j, x) in row.iter_mut().enumerate() {
            *x = lag_matrix[(i, j)];
        }
        let mut y = weights.output_bias;
        for h in 0..h_units {
            let act = weights.pre_activation(h, &row).tanh();
            y += weights.output_weights[h] * act;
            let d_hidden = weights.output_weights[h] * (1.0 - act * act);
            for (j, x) in row.iter().enumerate() {
                jac[(i, h * k + j)] = d_hidden * x;
            }
            jac[(i, hb_off + h)] = d_hidden;
            jac[(i, ow_off + h)] = act;
        }
        jac[(i, p - 1)] = 1.0;
        preds[i] = y;
    }
    (preds, jac)
}

/// Open-loop predictions: every row uses the observed lagged values.
pub fn one_step_predictions(weights: &NarWeights, embedded: &LagEmbedding) -> DVector<f64> {
    let inputs = &embedded.inputs;
    let mut row = vec![0.0; inputs.ncols()];
    DVector::from_fn(inputs.nrows(), |i, _| {
        for (j, x) in row.iter_mut().enumerate() {
            *x = inputs[(i, j)];
        }
        forward(weights, &row)
    })
}

/// Fits the network outputs to fixed targets; residual = prediction − target.
pub struct NarProblem<'a> {
    layout: &'a NarLayout,
    inputs: DMatrix<f64>,
    targets: DVector<f64>,
}

impl<'a> NarProblem<'a> {
    pub fn new(layout: &'a NarLayout, inputs: DMatrix<f64>, targets: DVector<f64>) -> Result<Self> {
        if inputs.ncols() != layout.input_count() || inputs.nrows() != targets.len() {
            return Err(Error::DimensionMismatch(format!(
                "inputs {}x{} vs targets {} for {} lags",
                inputs.nrows(),
                inputs.ncols(),
                targets.len(),
                layout.input_count()
            )));
        }
        Ok(Self {
            layout,
            inputs,
            targets,
        })
    }

    fn weights(&self, params: &DVector<f64>) -> NarWeights {
        NarWeights::unflatten(self.layout, params.as_slice()).expect("optimizer keeps parameter length")
    }
}

impl LeastSquaresProblem for NarProblem<'_> {
    fn param_count(&self) -> usize {
        self.layout.param_count()
    }

    fn residual_count(&self) -> usize {
        self.targets.len()
    }

    fn residuals(&self, params: &DVector<f64>) -> DVector<f64> {
        let w = self.weights(params);
        let mut row = vec![0.0; self.inputs.ncols()];
        DVector::from_fn(self.targets.len(), |i, _| {
            for (j, x) in row.iter_mut().enumerate() {
                *x = self.inputs[(i, j)];
            }
            forward(&w, &row) - self.targets[i]
        })
    }

    fn jacobian(&self, params: &DVector<f64>) -> DMatrix<f64> {
        self.residuals_and_jacobian(params).1
    }

    fn residuals_and_jacobian(&self, params: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let (preds, jac) = batch_jacobian(&self.weights(params), &self.inputs);
        (preds - &self.targets, jac)
    }
}
