use std::f64::consts::PI;

use rand_distr::{Distribution, Normal};

use super::{CoordinateNetwork, NetworkConfig};
use crate::error::Result;

impl CoordinateNetwork {
    /// Initialization approximating the signed distance to a sphere of
    /// radius `config.sphere_radius`: `f(x) ≈ |x| - r`.
    ///
    /// Hidden weights on raw coordinates / hidden units are drawn from
    /// `N(0, 2 / fan_in)`; every weight that reads positional-encoding
    /// features or the skip concatenation starts at zero. The output layer has
    /// constant weights `√(3π) / fan_in` and bias `-r`. With `fan_in = h` the
    /// first layer amplifies norms by about `√(h / 3)`, which keeps hidden
    /// pre-activations well away from the softplus knee; the output constant
    /// divides that gain back out. Encoding progress starts at 0.
    pub fn geometric_init(config: &NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = vec![0.0; config.parameter_count()];
        let layout = config.layout();
        let hidden = config.hidden_dim;
        let last = layout.len() - 1;
        let mut rng = crate::rng::stream(seed, &[0x6e6574]);
        for (l, layer) in layout.iter().enumerate() {
            let w = &mut params[layer.weight_range()];
            if l == last {
                let raw_inputs = if l == 0 { 3 } else { hidden };
                let value = (3.0 * PI).sqrt() / raw_inputs as f64;
                for (i, v) in w.iter_mut().enumerate() {
                    if i < raw_inputs {
                        *v = value;
                    }
                }
                params[layer.bias_offset] = -config.sphere_radius;
                continue;
            }
            let raw_inputs = if l == 0 { 3 } else { hidden };
            let normal = Normal::new(0.0, (2.0 / raw_inputs as f64).sqrt()).expect("finite std");
            for row in w.chunks_mut(layer.inputs) {
                for v in &mut row[..raw_inputs] {
                    *v = normal.sample(&mut rng);
                }
            }
        }
        Self::from_parameters(config.clone(), params, 0.0)
    }

    /// Fully random weights `N(0, 1 / fan_in)` and small random biases, with
    /// every block active. Used for derivative checks and benchmarks.
    pub fn random(config: &NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = vec![0.0; config.parameter_count()];
        let mut rng = crate::rng::stream(seed, &[0x726e64]);
        for layer in config.layout() {
            let normal = Normal::new(0.0, (1.0 / layer.inputs as f64).sqrt()).expect("finite std");
            for v in &mut params[layer.weight_range()] {
                *v = normal.sample(&mut rng);
            }
            let bias = Normal::new(0.0, 0.05).expect("finite std");
            for v in &mut params[layer.bias_range()] {
                *v = bias.sample(&mut rng);
            }
        }
        Self::from_parameters(config.clone(), params, config.pe_dims as f64)
    }
}
