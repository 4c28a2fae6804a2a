use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{LossRecord, TrainObserver, TrainState};
use crate::ebm::SamplerTrace;
use crate::error::Result;
use crate::geometry::NormalizationTransform;

/// Writes a run directory:
///
/// - `checkpoints/epoch_NNNN.ckpt` at every checkpoint,
/// - `final.ckpt` after the last epoch,
/// - `losses.csv`, rewritten at every checkpoint,
/// - `traces/update_NNNNNN.csv` for traced sampler calls.
#[derive(Debug)]
pub struct RunWriter {
    dir: PathBuf,
    normalization: Option<NormalizationTransform>,
    trace_every: Option<usize>,
    losses: String,
}

pub const LOSS_HEADER: &str = "update,epoch,beta,pe_progress,loss_ebm,loss_eikonal,loss_total\n";

impl RunWriter {
    pub fn new(dir: impl AsRef<Path>, normalization: Option<NormalizationTransform>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(dir.join("checkpoints"))?;
        Ok(Self {
            dir,
            normalization,
            trace_every: None,
            losses: LOSS_HEADER.to_string(),
        })
    }

    /// Records the sampler on every `n`-th update, starting with the first.
    pub fn trace_every(mut self, n: usize) -> Self {
        self.trace_every = Some(n.max(1));
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn final_checkpoint_path(&self) -> PathBuf {
        self.dir.join("final.ckpt")
    }
}

impl TrainObserver for RunWriter {
    fn on_update(&mut self, r: &LossRecord) {
        let _ = writeln!(
            self.losses,
            "{},{},{},{},{},{},{}",
            r.update, r.epoch, r.beta, r.pe_progress, r.ebm, r.eikonal, r.total
        );
    }

    fn on_checkpoint(&mut self, state: &TrainState, last: bool) -> Result<()> {
        let mut ck = state.checkpoint();
        ck.normalization = self.normalization;
        ck.save(self.dir.join("checkpoints").join(format!("epoch_{:04}.ckpt", state.epoch)))?;
        if last {
            ck.save(self.final_checkpoint_path())?;
        }
        std::fs::write(self.dir.join("losses.csv"), &self.losses)?;
        Ok(())
    }

    fn wants_trace(&self, update: usize) -> bool {
        self.trace_every.is_some_and(|n| update.is_multiple_of(n))
    }

    fn on_trace(&mut self, update: usize, trace: SamplerTrace) -> Result<()> {
        let dir = self.dir.join("traces");
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join(format!("update_{update:06}.csv")), trace.to_csv())?;
        Ok(())
    }
}
