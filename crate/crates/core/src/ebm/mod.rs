//! The Gibbs model `p(x) ∝ exp(-β |f(x)|)` and its sampler.
//!
//! The partition function is never needed: training only uses samples from
//! the model, obtained by Langevin dynamics started from a persistent replay
//! buffer.

mod buffer;
mod langevin;

pub use buffer::{ReplayBuffer, DEFAULT_BUFFER_CAPACITY};
pub use langevin::{
    langevin_step, sample_negatives, sample_negatives_traced, step_schedule, LangevinConfig,
    SamplerTrace, TraceRow, BUFFER_FRACTION, FRESH_STATE_STD,
};

use crate::error::{Error, Result};
use crate::geometry::{Point3, Vector3};
use crate::network::CoordinateNetwork;

/// A network paired with an inverse temperature.
#[derive(Debug, Clone, Copy)]
pub struct GibbsModel<'a> {
    network: &'a CoordinateNetwork,
    beta: f64,
}

impl<'a> GibbsModel<'a> {
    pub fn new(network: &'a CoordinateNetwork, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { network, beta })
    }

    pub fn network(&self) -> &'a CoordinateNetwork {
        self.network
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `E(x) = |f(x)|`.
    pub fn energy(&self, x: &Point3) -> f64 {
        self.network.forward(x).abs()
    }

    /// Energies and their input gradients `sign(f) ∇f` (zero where `f = 0`).
    pub fn energy_and_gradient(&self, points: &[Point3]) -> (Vec<f64>, Vec<Vector3>) {
        let (values, grads) = self.network.value_and_input_gradient(points);
        let grads = values.iter().zip(grads).map(|(&f, g)| sign(f) * g).collect();
        (values.into_iter().map(f64::abs).collect(), grads)
    }
}

/// `E(x) = |f(x)|` for a single point.
pub fn energy(model: &GibbsModel<'_>, x: &Point3) -> f64 {
    model.energy(x)
}

pub(crate) fn sign(f: f64) -> f64 {
    if f > 0.0 {
        1.0
    } else if f < 0.0 {
        -1.0
    } else {
        0.0
    }
}
