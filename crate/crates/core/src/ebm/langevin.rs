use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{GibbsModel, ReplayBuffer};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3, PointCloud, Vector3};

/// Share of chains started from the replay buffer once it holds enough states.
pub const BUFFER_FRACTION: f64 = 0.95;
/// Standard deviation of the isotropic offset applied to fresh chain starts.
pub const FRESH_STATE_STD: f64 = 0.1;

/// Step-size schedule `α_k = α₀ / (1 + s (k - 1))` and chain length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LangevinConfig {
    pub alpha0: f64,
    pub s: f64,
    pub steps: usize,
    /// States are clamped to `[-h, h]³`.
    pub clamp_half_extent: f64,
}

impl Default for LangevinConfig {
    fn default() -> Self {
        Self::for_beta(1.0)
    }
}

impl LangevinConfig {
    /// `α₀ = 0.03 / β`, `s = 1`, `K = 30`.
    pub fn for_beta(beta: f64) -> Self {
        Self {
            alpha0: 0.03 / beta,
            s: 1.0,
            steps: 30,
            clamp_half_extent: 1.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::invalid("alpha0 must be positive"));
        }
        if !(self.s >= 0.0 && self.s.is_finite()) {
            return Err(Error::invalid("step decay s must be non-negative"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("Langevin chains need at least one step"));
        }
        if !(self.clamp_half_extent > 0.0) {
            return Err(Error::invalid("clamp box must have positive extent"));
        }
        Ok(())
    }

    pub fn clamp_box(&self) -> Aabb {
        Aabb::cube(self.clamp_half_extent)
    }
}

/// `α_k` for the 1-based step index `k`.
pub fn step_schedule(cfg: &LangevinConfig, k: usize) -> f64 {
    debug_assert!(k >= 1);
    cfg.alpha0 / (1.0 + cfg.s * (k as f64 - 1.0))
}

/// One Langevin update on `p ∝ exp(-βE)`:
/// `x' = clamp(x - α β ∇E(x) + √(2α) ε)`.
pub fn langevin_step(
    model: &GibbsModel<'_>,
    x: &Point3,
    alpha: f64,
    noise: &Vector3,
    clamp: &Aabb,
) -> Result<Point3> {
    let (_, g) = model.energy_and_gradient(std::slice::from_ref(x));
    advance(x, &g[0], model.beta(), alpha, noise, clamp).ok_or(Error::SamplerDiverged { step: 1, chain: 0 })
}

#[inline]
fn advance(x: &Point3, grad: &Vector3, beta: f64, alpha: f64, noise: &Vector3, clamp: &Aabb) -> Option<Point3> {
    let next = x - alpha * beta * grad + (2.0 * alpha).sqrt() * noise;
    crate::geometry::is_finite(&next).then(|| clamp.clamp(&next))
}

/// One recorded chain state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub chain: usize,
    pub x: Point3,
    pub energy: f64,
}

/// Every intermediate state of one sampling call.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SamplerTrace {
    pub rows: Vec<TraceRow>,
}

impl SamplerTrace {
    /// CSV with header `step,chain,x,y,z,energy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,chain,x,y,z,energy\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.step, r.chain, r.x.x, r.x.y, r.x.z, r.energy
            ));
        }
        out
    }
}

/// Draws `n` negatives by running persistent Langevin chains and pushes the
/// end states into `buffer`.
///
/// While the buffer holds fewer than `n` states every chain starts fresh;
/// otherwise each chain independently starts from a uniformly chosen buffer
/// entry with probability 0.95 and fresh with probability 0.05. A fresh
/// start is a random cloud point plus `N(0, 0.1² I)`. Chain `i` draws all of
/// its randomness from the stream `(seed, i)`.
pub fn sample_negatives(
    model: &GibbsModel<'_>,
    cfg: &LangevinConfig,
    buffer: &mut ReplayBuffer,
    cloud: &PointCloud,
    n: usize,
    seed: u64,
) -> Result<Vec<Point3>> {
    run_chains(model, cfg, buffer, cloud, n, seed, None)
}

/// [`sample_negatives`] that also records every state.
pub fn sample_negatives_traced(
    model: &GibbsModel<'_>,
    cfg: &LangevinConfig,
    buffer: &mut ReplayBuffer,
    cloud: &PointCloud,
    n: usize,
    seed: u64,
    trace: &mut SamplerTrace,
) -> Result<Vec<Point3>> {
    run_chains(model, cfg, buffer, cloud, n, seed, Some(trace))
}

fn run_chains(
    model: &GibbsModel<'_>,
    cfg: &LangevinConfig,
    buffer: &mut ReplayBuffer,
    cloud: &PointCloud,
    n: usize,
    seed: u64,
    mut trace: Option<&mut SamplerTrace>,
) -> Result<Vec<Point3>> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::invalid("need at least one negative"));
    }
    let clamp = cfg.clamp_box();
    let mut rngs: Vec<ChaCha8Rng> = (0..n).map(|i| crate::rng::stream(seed, &[i as u64])).collect();
    let warm = buffer.len() >= n;
    let mut states: Vec<Point3> = rngs
        .iter_mut()
        .map(|rng| {
            if warm && rng.random_bool(BUFFER_FRACTION) {
                *buffer.get(rng.random_range(0..buffer.len())).expect("index in range")
            } else {
                fresh_state(cloud, rng, &clamp)
            }
        })
        .collect();

    for k in 1..=cfg.steps {
        let alpha = step_schedule(cfg, k);
        let (energies, grads) = model.energy_and_gradient(&states);
        if let Some(t) = trace.as_deref_mut() {
            record(t, k - 1, &states, &energies);
        }
        for (chain, ((x, g), rng)) in states.iter_mut().zip(&grads).zip(&mut rngs).enumerate() {
            let noise = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
            *x = advance(x, g, model.beta(), alpha, &noise, &clamp).ok_or(Error::SamplerDiverged { step: k, chain })?;
        }
    }
    if let Some(t) = trace {
        let energies: Vec<f64> = model.network().forward_batch(&states).into_iter().map(f64::abs).collect();
        record(t, cfg.steps, &states, &energies);
    }
    buffer.extend(states.iter().copied());
    Ok(states)
}

fn fresh_state(cloud: &PointCloud, rng: &mut ChaCha8Rng, clamp: &Aabb) -> Point3 {
    let p = cloud.points()[rng.random_range(0..cloud.len())];
    let offset = Vector3::from_fn(|_, _| {
        let z: f64 = StandardNormal.sample(rng);
        FRESH_STATE_STD * z
    });
    clamp.clamp(&(p + offset))
}

fn record(trace: &mut SamplerTrace, step: usize, states: &[Point3], energies: &[f64]) {
    trace.rows.extend(
        states
            .iter()
            .zip(energies)
            .enumerate()
            .map(|(chain, (x, &energy))| TraceRow { step, chain, x: *x, energy }),
    );
}
