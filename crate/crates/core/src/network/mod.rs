//! The coordinate network `f: R³ -> R`.
//!
//! # Architecture
//!
//! The input features are `φ(x) = [x, w_0 γ_0(x), ..., w_{L-1} γ_{L-1}(x)]`
//! where `γ_j` holds the sine/cosine pair at frequency `2^j π` for each
//! coordinate and `w_j` is the progressive band weight (see
//! [`band_weight`]). `num_layers` linear layers follow; every layer except
//! the last is followed by `softplus(k t) / k`. The layer with index
//! `skip_layer` (0-based) receives `[h, φ(x)]`, re-injecting the input
//! features. The last layer maps to a scalar.
//!
//! # Parameter layout
//!
//! Parameters live in one flat `f64` vector. For each layer in order: the
//! weight matrix (`out × in`, row-major) followed by the bias (`out`). Within
//! an input row the columns are ordered `x, y, z`, then for each coordinate
//! in `x, y, z` and each band `j = 0..L`: `sin(2^j π p), cos(2^j π p)`. For
//! the skip layer the hidden columns come first, followed by the same
//! feature columns.

mod encoding;
mod eval;
mod init;

use serde::{Deserialize, Serialize};

pub use encoding::{band_weight, positional_encode};
pub use eval::TangentTape;

use crate::error::{Error, Result};
use crate::geometry::Vector3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub hidden_dim: usize,
    /// Number of linear layers, including the scalar output layer.
    pub num_layers: usize,
    /// 0-based index of the layer whose input is `[hidden, features]`.
    pub skip_layer: Option<usize>,
    /// Number of positional-encoding frequency bands `L`.
    pub pe_dims: usize,
    /// Radius of the sphere approximated at initialization.
    pub sphere_radius: f64,
    /// Sharpness `k` of the softplus activation `softplus(k t) / k`.
    pub activation_sharpness: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 512,
            num_layers: 8,
            skip_layer: Some(5),
            pe_dims: 6,
            sphere_radius: 0.5,
            activation_sharpness: 100.0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.num_layers == 0 {
            return Err(Error::invalid("hidden_dim and num_layers must be at least 1"));
        }
        if let Some(s) = self.skip_layer {
            if s == 0 || s >= self.num_layers {
                return Err(Error::invalid(format!(
                    "skip_layer {s} must lie in 1..{}",
                    self.num_layers
                )));
            }
        }
        if !(self.sphere_radius > 0.0) || !(self.activation_sharpness > 0.0) {
            return Err(Error::invalid("sphere_radius and activation_sharpness must be positive"));
        }
        Ok(())
    }

    /// Width of the feature vector `φ(x)`: 3 raw coordinates plus `6 L` encodings.
    pub fn feature_dim(&self) -> usize {
        3 + 6 * self.pe_dims
    }

    pub fn layout(&self) -> Vec<LayerLayout> {
        let mut offset = 0;
        (0..self.num_layers)
            .map(|l| {
                let inputs = if l == 0 {
                    self.feature_dim()
                } else if Some(l) == self.skip_layer {
                    self.hidden_dim + self.feature_dim()
                } else {
                    self.hidden_dim
                };
                let outputs = if l + 1 == self.num_layers { 1 } else { self.hidden_dim };
                let layer = LayerLayout {
                    inputs,
                    outputs,
                    weight_offset: offset,
                    bias_offset: offset + inputs * outputs,
                };
                offset += (inputs + 1) * outputs;
                layer
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layout()
            .last()
            .map(|l| l.bias_offset + l.outputs)
            .unwrap_or(0)
    }
}

/// Position of one linear layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerLayout {
    pub inputs: usize,
    pub outputs: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl LayerLayout {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.weight_offset..self.bias_offset
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        self.bias_offset..self.bias_offset + self.outputs
    }
}

/// Parameters of `f` plus the progressive-encoding state.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateNetwork {
    config: NetworkConfig,
    layout: Vec<LayerLayout>,
    params: Vec<f64>,
    pe_progress: f64,
}

/// Exact derivatives of `f` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGradients {
    pub value: f64,
    /// `∂f/∂θ` in parameter layout order.
    pub d_value_d_params: Vec<f64>,
    /// `∇ₓ f`.
    pub d_value_d_input: Vector3,
    /// `∂|∇ₓ f|/∂θ`; zero when `∇ₓ f` vanishes.
    pub d_gradnorm_d_params: Vec<f64>,
}

impl CoordinateNetwork {
    pub fn from_parameters(config: NetworkConfig, params: Vec<f64>, pe_progress: f64) -> Result<Self> {
        config.validate()?;
        let expected = config.parameter_count();
        if params.len() != expected {
            return Err(Error::invalid(format!(
                "expected {expected} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite parameter"));
        }
        let mut net = Self {
            layout: config.layout(),
            config,
            params,
            pe_progress: 0.0,
        };
        net.set_pe_progress(pe_progress);
        Ok(net)
    }

    /// The single-layer network `f(x) = w · x + b` without encoding. Useful
    /// as an exactly known field.
    pub fn affine(w: Vector3, b: f64) -> Self {
        let config = NetworkConfig {
            hidden_dim: 1,
            num_layers: 1,
            skip_layer: None,
            pe_dims: 0,
            ..Default::default()
        };
        Self::from_parameters(config, vec![w.x, w.y, w.z, b], 0.0).expect("affine layout")
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layout(&self) -> &[LayerLayout] {
        &self.layout
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access for optimizers; the length is fixed by the layout.
    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn pe_progress(&self) -> f64 {
        self.pe_progress
    }

    /// Sets the encoding progress `α`, clamped to `[0, L]`.
    pub fn set_pe_progress(&mut self, alpha: f64) {
        let l = self.config.pe_dims as f64;
        self.pe_progress = if alpha.is_nan() { 0.0 } else { alpha.clamp(0.0, l) };
    }

    /// Weights of the `L` frequency bands at the current progress.
    pub fn band_weights(&self) -> Vec<f64> {
        (0..self.config.pe_dims)
            .map(|j| band_weight(j, self.pe_progress))
            .collect()
    }
}

/// Beyond this `|k t|`, `1 + exp(-|k t|)` rounds to 1 and softplus is
/// exactly linear (or zero) in `f64`.
const SATURATION: f64 = 37.0;

/// `softplus(k t) / k` and its first two derivatives.
#[inline]
pub(crate) fn activation(t: f64, k: f64) -> (f64, f64, f64) {
    let kt = k * t;
    if kt > SATURATION {
        return (t, 1.0, 0.0);
    }
    if kt < -SATURATION {
        return (0.0, 0.0, 0.0);
    }
    let e = (-kt.abs()).exp();
    let value = (kt.max(0.0) + (1.0 + e).ln()) / k;
    let r = 1.0 / (1.0 + e);
    let s = if kt >= 0.0 { r } else { e * r };
    (value, s, k * s * (1.0 - s))
}

/// `softplus(k t) / k`.
#[inline]
pub(crate) fn softplus(t: f64, k: f64) -> f64 {
    let kt = k * t;
    if kt.abs() > SATURATION {
        return t.max(0.0);
    }
    (kt.max(0.0) + (1.0 + (-kt.abs()).exp()).ln()) / k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_matches_architecture() {
        let cfg = NetworkConfig::default();
        let layout = cfg.layout();
        assert_eq!(layout.len(), 8);
        assert_eq!(cfg.feature_dim(), 39);
        assert_eq!(layout[0].inputs, 39);
        assert_eq!(layout[5].inputs, 512 + 39);
        assert_eq!(layout[7].outputs, 1);
        assert_eq!(cfg.parameter_count(), layout[7].bias_offset + 1);
    }

    #[test]
    fn config_validation() {
        let mut cfg = NetworkConfig { skip_layer: Some(8), ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg.skip_layer = Some(0);
        assert!(cfg.validate().is_err());
        cfg.skip_layer = None;
        cfg.num_layers = 1;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn activation_derivatives() {
        let k = 100.0;
        for &t in &[-0.3, -0.01, 0.0, 0.004, 0.2, 50.0, -50.0] {
            let (v, d1, d2) = activation(t, k);
            let h = 1e-6;
            let fd1 = (activation(t + h, k).0 - activation(t - h, k).0) / (2.0 * h);
            let fd2 = (activation(t + h, k).1 - activation(t - h, k).1) / (2.0 * h);
            assert!(v >= t.max(0.0));
            assert!((d1 - fd1).abs() < 1e-6, "{t}");
            assert!((d2 - fd2).abs() < 1e-4 * (1.0 + d2.abs()), "{t}");
        }
    }

    #[test]
    fn pe_progress_is_clamped() {
        let mut net = CoordinateNetwork::geometric_init(&NetworkConfig { hidden_dim: 4, ..Default::default() }, 0).unwrap();
        net.set_pe_progress(99.0);
        assert_eq!(net.pe_progress(), 6.0);
        net.set_pe_progress(-1.0);
        assert_eq!(net.pe_progress(), 0.0);
        net.set_pe_progress(2.5);
        let expected = [1.0, 1.0, 0.5, 0.0, 0.0, 0.0];
        assert!(net.band_weights().iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-15));
    }
}
