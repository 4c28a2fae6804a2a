//! Surface comparison metrics.
//!
//! With `d(p, S) = min_{q ∈ S} |p - q|`:
//! - Chamfer distance: `½ (mean_{r∈R} d(r, G) + mean_{g∈G} d(g, R))`, plain
//!   (not squared) Euclidean distances.
//! - F-score at `τ`: harmonic mean of precision `|{r : d(r, G) < τ}| / |R|`
//!   and recall `|{g : d(g, R) < τ}| / |G|`.
//! - Normal consistency: `½ (mean_r |n_r · n_{NN_G(r)}| + mean_g |n_g · n_{NN_R(g)}|)`.
//!
//! Nearest-neighbor ties resolve to the lowest index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sample_surface, Point3, PointCloud, SpatialIndex, TriangleMesh, Vector3};
use crate::rng::derive_seed;

pub const CHAMFER_CONVENTION: &str = "0.5*(mean_R min_G |r-g| + mean_G min_R |g-r|), L2 not squared";
pub const F_SCORE_CONVENTION: &str = "harmonic mean of precision/recall with strict d < tau";
pub const NCS_CONVENTION: &str = "0.5*(mean_R |n_r.n_NN(r)| + mean_G |n_g.n_NN(g)|)";

/// Index and distance of the nearest `to` point for every `from` point.
pub fn nearest_neighbors(from: &[Point3], to: &[Point3]) -> Result<Vec<(usize, f64)>> {
    if from.is_empty() || to.is_empty() {
        return Err(Error::EmptyGeometry);
    }
    let index = SpatialIndex::build(to)?;
    Ok(from.par_iter().map(|p| index.nearest(p)).collect())
}

fn mean_distance(nn: &[(usize, f64)]) -> f64 {
    nn.iter().map(|&(_, d)| d).sum::<f64>() / nn.len() as f64
}

fn share_within(nn: &[(usize, f64)], tau: f64) -> f64 {
    nn.iter().filter(|&&(_, d)| d < tau).count() as f64 / nn.len() as f64
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

pub fn chamfer_distance(r: &[Point3], g: &[Point3]) -> Result<f64> {
    Ok(0.5 * (mean_distance(&nearest_neighbors(r, g)?) + mean_distance(&nearest_neighbors(g, r)?)))
}

/// `(precision, recall)` at threshold `tau`.
pub fn precision_recall(r: &[Point3], g: &[Point3], tau: f64) -> Result<(f64, f64)> {
    if !(tau > 0.0) {
        return Err(Error::invalid("tau must be positive"));
    }
    Ok((
        share_within(&nearest_neighbors(r, g)?, tau),
        share_within(&nearest_neighbors(g, r)?, tau),
    ))
}

pub fn f_score(r: &[Point3], g: &[Point3], tau: f64) -> Result<f64> {
    let (p, rec) = precision_recall(r, g, tau)?;
    Ok(f_score_from(p, rec))
}

/// Harmonic mean of precision and recall, 0 when both vanish.
pub fn f_score_from(precision: f64, recall: f64) -> f64 {
    harmonic(precision, recall)
}

fn mean_alignment(from: &[Vector3], to: &[Vector3], nn: &[(usize, f64)]) -> f64 {
    nn.iter()
        .zip(from)
        .map(|(&(j, _), n)| n.dot(&to[j]).abs())
        .sum::<f64>()
        / nn.len() as f64
}

pub fn normal_consistency(r: &PointCloud, g: &PointCloud) -> Result<f64> {
    let (rn, gn) = match (r.normals(), g.normals()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::MissingNormals),
    };
    let rg = nearest_neighbors(r.points(), g.points())?;
    let gr = nearest_neighbors(g.points(), r.points())?;
    Ok(0.5 * (mean_alignment(rn, gn, &rg) + mean_alignment(gn, rn, &gr)))
}

/// Sampling parameters for [`evaluate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub samples: usize,
    pub tau: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            samples: 200_000,
            tau: 0.005,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub chamfer: f64,
    pub f_score: f64,
    pub precision: f64,
    pub recall: f64,
    pub ncs: f64,
    pub tau: f64,
    pub sample_count: usize,
    pub seed: u64,
    pub chamfer_convention: String,
    pub f_score_convention: String,
    pub ncs_convention: String,
}

impl MetricsReport {
    /// Chamfer distance in units of 10⁻³.
    pub fn chamfer_x1e3(&self) -> f64 {
        self.chamfer * 1e3
    }

    pub fn f_score_percent(&self) -> f64 {
        self.f_score * 100.0
    }

    /// Normal consistency in units of 10⁻².
    pub fn ncs_x1e2(&self) -> f64 {
        self.ncs * 100.0
    }
}

/// Samples both surfaces and computes every metric. Both meshes are sampled
/// with the same random stream, so a mesh compared with itself scores
/// exactly `CD = 0`, `F = 1`, `NCS = 1`.
pub fn evaluate(recon: &TriangleMesh, gt: &TriangleMesh, cfg: &EvalConfig) -> Result<MetricsReport> {
    let seed = derive_seed(cfg.seed, &[0x6576_616c]);
    let r = sample_surface(recon, cfg.samples, seed)?;
    let g = sample_surface(gt, cfg.samples, seed)?;
    evaluate_clouds(&r, &g, cfg.tau, cfg.seed)
}

/// Every metric between two clouds with normals.
pub fn evaluate_clouds(r: &PointCloud, g: &PointCloud, tau: f64, seed: u64) -> Result<MetricsReport> {
    if !(tau > 0.0) {
        return Err(Error::invalid("tau must be positive"));
    }
    let (rn, gn) = match (r.normals(), g.normals()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::MissingNormals),
    };
    let rg = nearest_neighbors(r.points(), g.points())?;
    let gr = nearest_neighbors(g.points(), r.points())?;
    let (precision, recall) = (share_within(&rg, tau), share_within(&gr, tau));
    Ok(MetricsReport {
        chamfer: 0.5 * (mean_distance(&rg) + mean_distance(&gr)),
        f_score: harmonic(precision, recall),
        precision,
        recall,
        ncs: 0.5 * (mean_alignment(rn, gn, &rg) + mean_alignment(gn, rn, &gr)),
        tau,
        sample_count: r.len().min(g.len()),
        seed,
        chamfer_convention: CHAMFER_CONVENTION.into(),
        f_score_convention: F_SCORE_CONVENTION.into(),
        ncs_convention: NCS_CONVENTION.into(),
    })
}
