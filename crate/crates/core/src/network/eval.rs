//! Batched evaluation and exact differentiation.
//!
//! Three passes are provided:
//! - value only ([`CoordinateNetwork::forward_batch`]),
//! - value and input gradient by reverse accumulation
//!   ([`CoordinateNetwork::value_and_input_gradient`]), used by the sampler,
//! - a tangent pass carrying `∂/∂x, ∂/∂y, ∂/∂z` alongside every activation
//!   ([`CoordinateNetwork::tangent_forward`]). Its reverse sweep
//!   ([`CoordinateNetwork::accumulate_parameter_gradient`]) yields the exact
//!   parameter gradient of any weighted sum of values and input gradients,
//!   which covers both the energy and the Eikonal terms.

use ndarray::{linalg::general_mat_mul, s, Array2, ArrayView2, ArrayViewMut2, Axis};
use rayon::prelude::*;

use super::encoding::{features, pull_back};
use super::{activation, softplus, CoordinateNetwork, LayerLayout, NetworkGradients};
use crate::geometry::{Point3, Vector3};

/// Points per evaluation chunk. Fixed so results do not depend on thread count.
pub(crate) const CHUNK: usize = 256;

/// Activations recorded by [`CoordinateNetwork::tangent_forward`]. Every
/// matrix has `4 B` columns: values, then the x, y and z tangents.
#[derive(Debug, Clone)]
pub struct TangentTape {
    batch: usize,
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
    values: Vec<f64>,
    gradients: Vec<Vector3>,
}

impl TangentTape {
    pub fn len(&self) -> usize {
        self.batch
    }

    pub fn is_empty(&self) -> bool {
        self.batch == 0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `∇ₓ f` at every point.
    pub fn gradients(&self) -> &[Vector3] {
        &self.gradients
    }
}

impl CoordinateNetwork {
    fn weights(&self, layer: &LayerLayout) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((layer.outputs, layer.inputs), &self.params[layer.weight_range()])
            .expect("layout matches parameter vector")
    }

    fn add_bias(&self, z: &mut Array2<f64>, layer: &LayerLayout, columns: usize) {
        let bias = &self.params[layer.bias_range()];
        for (mut row, &b) in z.axis_iter_mut(Axis(0)).zip(bias) {
            row.slice_mut(s![..columns]).mapv_inplace(|v| v + b);
        }
    }

    fn is_skip(&self, l: usize) -> bool {
        self.config.skip_layer == Some(l)
    }

    /// `f(x)`.
    pub fn forward(&self, x: &Point3) -> f64 {
        self.forward_batch(std::slice::from_ref(x))[0]
    }

    pub fn forward_batch(&self, points: &[Point3]) -> Vec<f64> {
        points
            .par_chunks(CHUNK)
            .flat_map_iter(|chunk| self.forward_chunk(chunk))
            .collect()
    }

    fn forward_chunk(&self, points: &[Point3]) -> Vec<f64> {
        let weights = self.band_weights();
        let k = self.config.activation_sharpness;
        let phi = features(points, &weights, false);
        let mut a = phi.clone();
        for (l, layer) in self.layout.iter().enumerate() {
            if self.is_skip(l) {
                a = ndarray::concatenate(Axis(0), &[a.view(), phi.view()]).expect("same width");
            }
            let mut z = self.weights(layer).dot(&a);
            self.add_bias(&mut z, layer, points.len());
            if l + 1 < self.layout.len() {
                z.mapv_inplace(|t| softplus(t, k));
            }
            a = z;
        }
        a.row(0).to_vec()
    }

    /// `f(x)` and `∇ₓ f(x)` for every point (reverse accumulation).
    pub fn value_and_input_gradient(&self, points: &[Point3]) -> (Vec<f64>, Vec<Vector3>) {
        let parts: Vec<(Vec<f64>, Vec<Vector3>)> = points
            .par_chunks(CHUNK)
            .map(|chunk| self.reverse_chunk(chunk))
            .collect();
        let mut values = Vec::with_capacity(points.len());
        let mut grads = Vec::with_capacity(points.len());
        for (v, g) in parts {
            values.extend(v);
            grads.extend(g);
        }
        (values, grads)
    }

    fn reverse_chunk(&self, points: &[Point3]) -> (Vec<f64>, Vec<Vector3>) {
        let weights = self.band_weights();
        let k = self.config.activation_sharpness;
        let n = self.layout.len();
        let b = points.len();
        let phi = features(points, &weights, false);
        let mut pre = Vec::with_capacity(n);
        let mut a = phi.clone();
        for (l, layer) in self.layout.iter().enumerate() {
            if self.is_skip(l) {
                a = ndarray::concatenate(Axis(0), &[a.view(), phi.view()]).expect("same width");
            }
            let mut z = self.weights(layer).dot(&a);
            self.add_bias(&mut z, layer, b);
            if l + 1 < n {
                a = z.mapv(|t| softplus(t, k));
                pre.push(z);
            } else {
                a = z;
            }
        }
        let values = a.row(0).to_vec();

        let hidden = self.config.hidden_dim;
        let mut phi_bar = Array2::<f64>::zeros(phi.raw_dim());
        let mut cot = Array2::<f64>::ones((1, b));
        for l in (0..n).rev() {
            let a_bar = self.weights(&self.layout[l]).t().dot(&cot);
            if l == 0 {
                phi_bar += &a_bar;
                break;
            }
            if self.is_skip(l) {
                phi_bar += &a_bar.slice(s![hidden.., ..]);
            }
            let z = &pre[l - 1];
            cot = a_bar.slice(s![..hidden, ..]).to_owned();
            ndarray::Zip::from(&mut cot)
                .and(z)
                .for_each(|c, &t| *c *= activation(t, k).1);
        }
        let grads = pull_back(points, &weights, &phi_bar)
            .into_iter()
            .map(Vector3::from)
            .collect();
        (values, grads)
    }

    /// Forward pass propagating input tangents; records everything the
    /// parameter-gradient sweep needs.
    pub fn tangent_forward(&self, points: &[Point3]) -> TangentTape {
        let weights = self.band_weights();
        let k = self.config.activation_sharpness;
        let n = self.layout.len();
        let b = points.len();
        let phi = features(points, &weights, true);
        let mut inputs = Vec::with_capacity(n);
        let mut pre_activations = Vec::with_capacity(n.saturating_sub(1));
        let mut a = phi.clone();
        for (l, layer) in self.layout.iter().enumerate() {
            if self.is_skip(l) {
                a = ndarray::concatenate(Axis(0), &[a.view(), phi.view()]).expect("same width");
            }
            let mut z = self.weights(layer).dot(&a);
            self.add_bias(&mut z, layer, b);
            inputs.push(a);
            if l + 1 < n {
                let mut h = Array2::<f64>::zeros(z.raw_dim());
                for (mut h_row, z_row) in h.axis_iter_mut(Axis(0)).zip(z.axis_iter(Axis(0))) {
                    for i in 0..b {
                        let (v, d1, _) = activation(z_row[i], k);
                        h_row[i] = v;
                        for t in 1..4 {
                            h_row[t * b + i] = d1 * z_row[t * b + i];
                        }
                    }
                }
                pre_activations.push(z);
                a = h;
            } else {
                a = z;
            }
        }
        let out = a.row(0);
        let values = out.slice(s![..b]).to_vec();
        let gradients = (0..b)
            .map(|i| Vector3::new(out[b + i], out[2 * b + i], out[3 * b + i]))
            .collect();
        TangentTape {
            batch: b,
            inputs,
            pre_activations,
            values,
            gradients,
        }
    }

    /// Adds `∂/∂θ Σᵢ (cᵢ f(xᵢ) + eᵢ · ∇ₓ f(xᵢ))` to `grad`, where `c` are
    /// `value_weights` and `e` are `gradient_weights`.
    pub fn accumulate_parameter_gradient(
        &self,
        tape: &TangentTape,
        value_weights: &[f64],
        gradient_weights: &[Vector3],
        grad: &mut [f64],
    ) {
        let b = tape.batch;
        assert_eq!(value_weights.len(), b);
        assert_eq!(gradient_weights.len(), b);
        assert_eq!(grad.len(), self.params.len());
        let k = self.config.activation_sharpness;
        let hidden = self.config.hidden_dim;
        let n = self.layout.len();

        let mut cot = Array2::<f64>::zeros((1, 4 * b));
        for i in 0..b {
            cot[[0, i]] = value_weights[i];
            for t in 0..3 {
                cot[[0, (t + 1) * b + i]] = gradient_weights[i][t];
            }
        }
        for l in (0..n).rev() {
            let layer = &self.layout[l];
            let (w_part, rest) = grad[layer.weight_offset..].split_at_mut(layer.inputs * layer.outputs);
            let mut gw = ArrayViewMut2::from_shape((layer.outputs, layer.inputs), w_part)
                .expect("layout matches gradient vector");
            general_mat_mul(1.0, &cot, &tape.inputs[l].t(), 1.0, &mut gw);
            for (o, g) in rest[..layer.outputs].iter_mut().enumerate() {
                *g += cot.slice(s![o, ..b]).sum();
            }
            if l == 0 {
                break;
            }
            let a_bar = self.weights(layer).t().dot(&cot);
            let z = &tape.pre_activations[l - 1];
            let mut next = Array2::<f64>::zeros((hidden, 4 * b));
            for r in 0..hidden {
                let ab = a_bar.row(r);
                let zr = z.row(r);
                let mut out = next.row_mut(r);
                for i in 0..b {
                    let (_, d1, d2) = activation(zr[i], k);
                    let mut second = 0.0;
                    for t in 1..4 {
                        second += ab[t * b + i] * zr[t * b + i];
                        out[t * b + i] = d1 * ab[t * b + i];
                    }
                    out[i] = d1 * ab[i] + d2 * second;
                }
            }
            cot = next;
        }
    }

    /// Exact derivatives at a single point.
    pub fn backward(&self, x: &Point3) -> NetworkGradients {
        let tape = self.tangent_forward(std::slice::from_ref(x));
        let g = tape.gradients[0];
        let mut d_value = vec![0.0; self.params.len()];
        self.accumulate_parameter_gradient(&tape, &[1.0], &[Vector3::zeros()], &mut d_value);
        let mut d_norm = vec![0.0; self.params.len()];
        let norm = g.norm();
        if norm > 0.0 {
            self.accumulate_parameter_gradient(&tape, &[0.0], &[g / norm], &mut d_norm);
        }
        NetworkGradients {
            value: tape.values[0],
            d_value_d_params: d_value,
            d_value_d_input: g,
            d_gradnorm_d_params: d_norm,
        }
    }

    /// Parameter gradient of `Σᵢ (cᵢ f(xᵢ) + eᵢ · ∇ₓ f(xᵢ))` where the weights
    /// are chosen per point by `weigh(i, f(xᵢ), ∇ₓ f(xᵢ))`. Also returns the
    /// values and input gradients. Chunks are processed in parallel and summed
    /// in a fixed order.
    pub fn weighted_parameter_gradient<F>(
        &self,
        points: &[Point3],
        weigh: F,
    ) -> (Vec<f64>, Vec<f64>, Vec<Vector3>)
    where
        F: Fn(usize, f64, &Vector3) -> (f64, Vector3) + Sync,
    {
        let parts: Vec<(Vec<f64>, Vec<f64>, Vec<Vector3>)> = points
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let tape = self.tangent_forward(chunk);
                let (cs, es): (Vec<f64>, Vec<Vector3>) = (0..chunk.len())
                    .map(|i| weigh(c * CHUNK + i, tape.values[i], &tape.gradients[i]))
                    .unzip();
                let mut g = vec![0.0; self.params.len()];
                self.accumulate_parameter_gradient(&tape, &cs, &es, &mut g);
                (g, tape.values, tape.gradients)
            })
            .collect();
        let mut grad = vec![0.0; self.params.len()];
        let mut values = Vec::with_capacity(points.len());
        let mut grads = Vec::with_capacity(points.len());
        for (g, v, d) in parts {
            for (acc, x) in grad.iter_mut().zip(&g) {
                *acc += x;
            }
            values.extend(v);
            grads.extend(d);
        }
        (grad, values, grads)
    }
}
