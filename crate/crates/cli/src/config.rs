use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use ebsurf::mesher::GridSpec;
use ebsurf::metrics::EvalConfig;
use ebsurf::scanner::ScanConfig;
use ebsurf::trainer::TrainConfig;
use ebsurf::NetworkConfig;

/// Every tunable of the pipeline. Missing keys in a config file fall back to
/// the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scan: ScanConfig,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub grid: GridSpec,
    pub eval: EvalConfig,
    /// Neighbors used when a cloud needs estimated normals for evaluation.
    pub normal_neighbors: usize,
    /// Target `β` per scan noise level `σ`.
    pub beta_table: Vec<BetaEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaEntry {
    pub sigma: f64,
    pub beta: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scan: ScanConfig::default(),
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
            grid: GridSpec::default(),
            eval: EvalConfig::default(),
            normal_neighbors: ebsurf::geometry::DEFAULT_NORMAL_NEIGHBORS,
            beta_table: [(0.0, 800.0), (0.01, 150.0), (0.03, 50.0), (0.05, 30.0)]
                .into_iter()
                .map(|(sigma, beta)| BetaEntry { sigma, beta })
                .collect(),
        }
    }
}

impl RunConfig {
    /// Reads a JSON or TOML file; the format follows the extension, and
    /// files without a known extension are tried as JSON, then TOML.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let parsed = match ext.as_str() {
            "json" => serde_json::from_str(&text).map_err(anyhow::Error::from),
            "toml" => toml::from_str(&text).map_err(anyhow::Error::from),
            _ => serde_json::from_str(&text)
                .map_err(anyhow::Error::from)
                .or_else(|_| toml::from_str(&text).map_err(anyhow::Error::from)),
        };
        parsed.with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// `β` for noise level `sigma`: the table entry within 1e-9, otherwise
    /// the `√2 / σ` rule capped at the clean-data value.
    pub fn beta_for_sigma(&self, sigma: f64) -> anyhow::Result<f64> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            bail!("sigma must be a non-negative number, got {sigma}");
        }
        if let Some(e) = self.beta_table.iter().find(|e| (e.sigma - sigma).abs() < 1e-9) {
            return Ok(e.beta);
        }
        let cap = self
            .beta_table
            .iter()
            .map(|e| e.beta)
            .fold(f64::NAN, f64::max);
        let cap = if cap.is_nan() { 800.0 } else { cap };
        let beta = if sigma > 0.0 { (2f64.sqrt() / sigma).min(cap) } else { cap };
        log::warn!("sigma {sigma} is not in the beta table; using beta {beta:.1}");
        Ok(beta)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.scan.validate()?;
        self.network.validate()?;
        self.train.validate()?;
        self.grid.validate()?;
        if !(self.eval.tau > 0.0) || self.eval.samples == 0 {
            bail!("eval needs tau > 0 and at least one sample");
        }
        if self.normal_neighbors < 3 {
            bail!("normal_neighbors must be at least 3");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_table_lookup() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.beta_for_sigma(0.0).unwrap(), 800.0);
        assert_eq!(cfg.beta_for_sigma(0.01).unwrap(), 150.0);
        assert_eq!(cfg.beta_for_sigma(0.03).unwrap(), 50.0);
        assert_eq!(cfg.beta_for_sigma(0.05).unwrap(), 30.0);
        assert!((cfg.beta_for_sigma(0.02).unwrap() - 2f64.sqrt() / 0.02).abs() < 1e-12);
        assert_eq!(cfg.beta_for_sigma(1e-6).unwrap(), 800.0);
        assert!(cfg.beta_for_sigma(-1.0).is_err());
    }

    #[test]
    fn json_and_toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.train.epochs = 3;
        let toml_text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&toml_text).unwrap();
        assert_eq!(back, cfg);
        // TOML has no null, so only JSON can express a disabled skip layer
        cfg.network.skip_layer = None;
        let json: RunConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(json, cfg);
    }

    #[test]
    fn partial_files_use_defaults() {
        let cfg: RunConfig = toml::from_str("[train]\nepochs = 7\n").unwrap();
        assert_eq!(cfg.train.epochs, 7);
        assert_eq!(cfg.train.batch_negative, 2048);
        assert!(toml::from_str::<RunConfig>("bogus = 1\n").is_err());
    }
}
