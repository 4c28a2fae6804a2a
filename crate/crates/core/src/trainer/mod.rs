//! Maximum-likelihood training of the energy `|f|` with an Eikonal penalty.
//!
//! Each update draws a batch of positives from the cloud (with replacement),
//! runs the Langevin sampler for negatives, evaluates
//! `L = β (mean |f(pos)| - mean |f(neg)|) + γ mean (|∇f| - 1)²` and takes an
//! Adam step. `β` rises in log-spaced stages; the first update and every
//! stage change use the slower stability sampler settings. The positional
//! encoding is opened linearly over the first part of training.

mod adam;
mod loss;
mod output;

use log::{debug, info};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use adam::{Adam, AdamConfig};
pub use loss::{loss_ebm, loss_eikonal, total_loss, Loss, LossTerms};
pub use output::RunWriter;

use crate::checkpoint::Checkpoint;
use crate::ebm::{sample_negatives, sample_negatives_traced, GibbsModel, LangevinConfig, ReplayBuffer, SamplerTrace};
use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};
use crate::network::{CoordinateNetwork, NetworkConfig};
use crate::rng::{derive_seed, stream};

const TAG_INIT: u64 = 1;
const TAG_POSITIVES: u64 = 2;
const TAG_NEGATIVES: u64 = 3;

/// Langevin settings expressed independently of `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSchedule {
    /// `α₀ = alpha_scale / β`.
    pub alpha_scale: f64,
    pub s: f64,
    pub steps: usize,
    pub clamp_half_extent: f64,
}

impl Default for SamplerSchedule {
    fn default() -> Self {
        Self {
            alpha_scale: 0.03,
            s: 1.0,
            steps: 30,
            clamp_half_extent: 1.1,
        }
    }
}

impl SamplerSchedule {
    pub fn at(&self, beta: f64) -> LangevinConfig {
        LangevinConfig {
            alpha0: self.alpha_scale / beta,
            s: self.s,
            steps: self.steps,
            clamp_half_extent: self.clamp_half_extent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_positive: usize,
    pub batch_negative: usize,
    pub lr: f64,
    /// Eikonal weight `γ`.
    pub gamma: f64,
    pub beta_init: f64,
    pub beta_target: f64,
    /// Share of the epochs over which `β` climbs to its target.
    pub beta_stage_fraction: f64,
    pub beta_stages: usize,
    pub stability_s: f64,
    pub stability_steps: usize,
    /// Share of the updates over which the encoding opens from 0 to `L`.
    pub pe_ramp_fraction: f64,
    pub checkpoint_every: usize,
    pub buffer_capacity: usize,
    pub sampler: SamplerSchedule,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 150,
            batch_positive: 256,
            batch_negative: 2048,
            lr: 3e-4,
            gamma: 5.0,
            beta_init: 10.0,
            beta_target: 800.0,
            beta_stage_fraction: 0.5,
            beta_stages: 4,
            stability_s: 0.1,
            stability_steps: 1000,
            pe_ramp_fraction: 0.5,
            checkpoint_every: 10,
            buffer_capacity: crate::ebm::DEFAULT_BUFFER_CAPACITY,
            sampler: SamplerSchedule::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("epochs", self.epochs),
            ("batch_positive", self.batch_positive),
            ("batch_negative", self.batch_negative),
            ("beta_stages", self.beta_stages),
            ("stability_steps", self.stability_steps),
            ("checkpoint_every", self.checkpoint_every),
            ("buffer_capacity", self.buffer_capacity),
            ("sampler.steps", self.sampler.steps),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("{name} must be at least 1")));
        }
        if !(self.lr > 0.0) || !(self.gamma >= 0.0) {
            return Err(Error::invalid("lr must be positive and gamma non-negative"));
        }
        if !(self.beta_init > 0.0 && self.beta_init <= self.beta_target && self.beta_target.is_finite()) {
            return Err(Error::invalid("need 0 < beta_init <= beta_target"));
        }
        for (name, v) in [
            ("beta_stage_fraction", self.beta_stage_fraction),
            ("pe_ramp_fraction", self.pe_ramp_fraction),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1]")));
            }
        }
        if !(self.stability_s >= 0.0) || !(self.sampler.s >= 0.0) || !(self.sampler.alpha_scale > 0.0) {
            return Err(Error::invalid("invalid sampler schedule"));
        }
        Ok(())
    }

    pub fn updates_per_epoch(&self, cloud_size: usize) -> usize {
        cloud_size.div_ceil(self.batch_positive)
    }
}

/// `β` for an epoch: `beta_stages` log-spaced values from `beta_init` to
/// `beta_target`, the last of which is reached once `beta_stage_fraction`
/// of the epochs have passed.
pub fn beta_schedule(cfg: &TrainConfig, epoch: usize) -> f64 {
    let last = cfg.beta_stages.saturating_sub(1);
    if last == 0 {
        return cfg.beta_target;
    }
    let span = cfg.beta_stage_fraction * cfg.epochs as f64;
    let stage = ((last as f64 * epoch as f64 / span).floor() as usize).min(last);
    if stage == last {
        return cfg.beta_target;
    }
    cfg.beta_init * (cfg.beta_target / cfg.beta_init).powf(stage as f64 / last as f64)
}

/// Encoding progress `α` before update `update` of `total`.
pub fn pe_schedule(cfg: &TrainConfig, bands: usize, update: usize, total: usize) -> f64 {
    let t = update as f64 / (cfg.pe_ramp_fraction * total as f64);
    bands as f64 * t.min(1.0)
}

/// Diagnostics of one update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub update: usize,
    pub epoch: usize,
    pub beta: f64,
    pub pe_progress: f64,
    pub ebm: f64,
    pub eikonal: f64,
    pub total: f64,
}

/// Everything a training run owns.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub network: CoordinateNetwork,
    pub optimizer: Adam,
    pub buffer: ReplayBuffer,
    pub beta: f64,
    /// Epochs completed.
    pub epoch: usize,
    /// Updates completed.
    pub update: usize,
    pub history: Vec<LossRecord>,
}

impl TrainState {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            network: self.network.clone(),
            normalization: None,
            epoch: self.epoch,
            update: self.update,
            beta: self.beta,
        }
    }
}

/// Hooks into a training run. Every method has a no-op default.
pub trait TrainObserver {
    fn on_update(&mut self, _record: &LossRecord) {}

    /// Called after every `checkpoint_every` epochs and after the last.
    fn on_checkpoint(&mut self, _state: &TrainState, _last: bool) -> Result<()> {
        Ok(())
    }

    /// Whether the sampling call of `update` should be recorded.
    fn wants_trace(&self, _update: usize) -> bool {
        false
    }

    fn on_trace(&mut self, _update: usize, _trace: SamplerTrace) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

/// Stepwise training driver.
pub struct Trainer<'a> {
    cloud: &'a PointCloud,
    cfg: TrainConfig,
    state: TrainState,
    updates_per_epoch: usize,
}

impl<'a> Trainer<'a> {
    /// Geometric initialization plus fresh optimizer and buffer.
    pub fn new(cloud: &'a PointCloud, net_cfg: &NetworkConfig, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let network = CoordinateNetwork::geometric_init(net_cfg, derive_seed(cfg.seed, &[TAG_INIT]))?;
        let optimizer = Adam::new(
            AdamConfig {
                lr: cfg.lr,
                ..Default::default()
            },
            network.parameters().len(),
        );
        Ok(Self {
            cloud,
            updates_per_epoch: cfg.updates_per_epoch(cloud.len()),
            state: TrainState {
                network,
                optimizer,
                buffer: ReplayBuffer::new(cfg.buffer_capacity),
                beta: cfg.beta_init,
                epoch: 0,
                update: 0,
                history: Vec::new(),
            },
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    pub fn updates_per_epoch(&self) -> usize {
        self.updates_per_epoch
    }

    pub fn total_updates(&self) -> usize {
        self.cfg.epochs * self.updates_per_epoch
    }

    pub fn is_finished(&self) -> bool {
        self.state.update >= self.total_updates()
    }

    /// Performs one update; returns its record.
    pub fn step(&mut self, observer: &mut dyn TrainObserver) -> Result<LossRecord> {
        let update = self.state.update;
        let epoch = update / self.updates_per_epoch;
        let bands = self.state.network.config().pe_dims;
        let alpha = pe_schedule(&self.cfg, bands, update, self.total_updates());
        self.state.network.set_pe_progress(alpha);

        let beta = beta_schedule(&self.cfg, epoch);
        let mut langevin = self.cfg.sampler.at(beta);
        if update == 0 || beta != self.state.beta {
            debug!("update {update}: stability sampling at beta {beta}");
            langevin.s = self.cfg.stability_s;
            langevin.steps = self.cfg.stability_steps;
        }
        self.state.beta = beta;

        let mut rng = stream(self.cfg.seed, &[TAG_POSITIVES, update as u64]);
        let points = self.cloud.points();
        let positives: Vec<Point3> = (0..self.cfg.batch_positive)
            .map(|_| points[rng.random_range(0..points.len())])
            .collect();

        let model = GibbsModel::new(&self.state.network, beta)?;
        let seed = derive_seed(self.cfg.seed, &[TAG_NEGATIVES, update as u64]);
        let n = self.cfg.batch_negative;
        let negatives = if observer.wants_trace(update) {
            let mut trace = SamplerTrace::default();
            let out = sample_negatives_traced(&model, &langevin, &mut self.state.buffer, self.cloud, n, seed, &mut trace)?;
            observer.on_trace(update, trace)?;
            out
        } else {
            sample_negatives(&model, &langevin, &mut self.state.buffer, self.cloud, n, seed)?
        };

        let terms = total_loss(&self.state.network, beta, self.cfg.gamma, &positives, &negatives)?;
        if !terms.total.is_finite() || terms.gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { update });
        }
        self.state
            .optimizer
            .step(self.state.network.parameters_mut(), &terms.gradient);

        let record = LossRecord {
            update,
            epoch,
            beta,
            pe_progress: alpha,
            ebm: terms.ebm,
            eikonal: terms.eikonal,
            total: terms.total,
        };
        self.state.history.push(record);
        self.state.update += 1;
        observer.on_update(&record);

        if self.state.update.is_multiple_of(self.updates_per_epoch) {
            self.state.epoch = epoch + 1;
            let last = self.state.epoch == self.cfg.epochs;
            info!(
                "epoch {}/{}: beta {beta:.1}, L_EBM {:.5}, L_E {:.5}",
                self.state.epoch, self.cfg.epochs, terms.ebm, terms.eikonal
            );
            if last || self.state.epoch.is_multiple_of(self.cfg.checkpoint_every) {
                observer.on_checkpoint(&self.state, last)?;
            }
        }
        Ok(record)
    }

    /// Runs the remaining updates.
    pub fn run(mut self, observer: &mut dyn TrainObserver) -> Result<TrainState> {
        while !self.is_finished() {
            self.step(observer)?;
        }
        Ok(self.state)
    }
}

/// Trains from geometric initialization on a normalized cloud.
pub fn train(cloud: &PointCloud, net_cfg: &NetworkConfig, cfg: &TrainConfig) -> Result<TrainState> {
    Trainer::new(cloud, net_cfg, cfg)?.run(&mut ())
}

/// [`train`] with hooks.
pub fn train_with(
    cloud: &PointCloud,
    net_cfg: &NetworkConfig,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainState> {
    Trainer::new(cloud, net_cfg, cfg)?.run(observer)
}
