use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use log::{error, info};
use rayon::prelude::*;
use serde::Serialize;

use ebsurf::checkpoint::Checkpoint;
use ebsurf::geometry::io::{load_mesh, load_point_cloud, save_mesh, save_point_cloud};
use ebsurf::geometry::{estimate_normals, sample_surface, NormalizationTransform};
use ebsurf::mesher::extract as extract_mesh;
use ebsurf::metrics::{evaluate_clouds, MetricsReport};
use ebsurf::scanner::scan as scan_mesh;
use ebsurf::trainer::{train_with, RunWriter};
use ebsurf::{PointCloud, TriangleMesh};

use crate::config::RunConfig;
use crate::logging;
use crate::{Common, EvalArgs, ExtractArgs, PipelineArgs, ReconstructArgs, ScanArgs};

pub const RESULTS_HEADER: &str = "mesh,sigma,beta,cd_x1e3,f_score_pct,ncs_x1e2\n";

/// An error with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: 1,
            error: anyhow!(msg.into()),
        }
    }

    pub fn runtime(error: anyhow::Error) -> Self {
        Self { code: 2, error }
    }
}

type CmdResult = Result<(), Failure>;

trait Runtime<T> {
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Runtime<T> for Result<T, E> {
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::runtime(e.into()))
    }
}

fn usage_err(e: anyhow::Error) -> Failure {
    Failure { code: 1, error: e }
}

fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf, Failure> {
    value.as_ref().ok_or_else(|| Failure::usage(format!("--{flag} is required")))
}

fn existing<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf, Failure> {
    let path = require(value, flag)?;
    if !path.is_file() {
        return Err(Failure::usage(format!("input file not found: {}", path.display())));
    }
    Ok(path)
}

/// Defaults, then the config file, then `adjust` for the flags.
fn resolve(common: &Common, adjust: impl FnOnce(&mut RunConfig) -> anyhow::Result<()>) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => {
            if !path.is_file() {
                return Err(Failure::usage(format!("config file not found: {}", path.display())));
            }
            RunConfig::load(path).map_err(usage_err)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.scan.seed = seed;
        cfg.train.seed = seed;
    }
    adjust(&mut cfg).map_err(usage_err)?;
    cfg.validate().map_err(usage_err)?;
    Ok(cfg)
}

/// Prints the configuration and reports whether the command should stop.
fn printed(common: &Common, cfg: &RunConfig) -> bool {
    if common.print_config {
        print!("{}", cfg.to_json());
    }
    common.print_config
}

fn set_beta(cfg: &mut RunConfig, sigma: Option<f64>, beta_override: Option<f64>) -> anyhow::Result<()> {
    if let Some(sigma) = sigma {
        cfg.train.beta_target = cfg.beta_for_sigma(sigma)?;
    }
    if let Some(beta) = beta_override {
        cfg.train.beta_target = beta;
    }
    cfg.train.beta_init = cfg.train.beta_init.min(cfg.train.beta_target);
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

#[derive(Serialize)]
struct Resolved<'a, I: Serialize> {
    command: &'a str,
    inputs: I,
    config: &'a RunConfig,
}

pub fn scan(a: ScanArgs) -> CmdResult {
    let cfg = resolve(&a.common, |c| {
        if let Some(s) = a.sigma {
            c.scan.noise_sigma = s;
        }
        if let Some(n) = a.scans {
            c.scan.num_scans = n;
        }
        if let Some(n) = a.rays {
            c.scan.rays_per_scan = n;
        }
        Ok(())
    })?;
    if printed(&a.common, &cfg) {
        return Ok(());
    }
    let mesh_path = existing(&a.mesh, "mesh")?;
    let out = require(&a.out, "out")?;
    let mesh = load_mesh(mesh_path).runtime()?;
    let (normalized, t) = normalize_mesh(&mesh).runtime()?;
    let cloud = scan_mesh(&normalized, &cfg.scan).runtime()?;
    save_point_cloud(out, &t.invert_cloud(&cloud)).runtime()?;
    info!("wrote {} points to {}", cloud.len(), out.display());
    Ok(())
}

fn normalize_mesh(mesh: &TriangleMesh) -> ebsurf::Result<(TriangleMesh, NormalizationTransform)> {
    let t = NormalizationTransform::fit(&mesh.bounds().ok_or(ebsurf::Error::EmptyGeometry)?);
    Ok((t.apply_mesh(mesh), t))
}

/// Trains in `dir` and extracts the mesh in the network frame.
fn train_and_extract(
    cloud: &PointCloud,
    normalization: NormalizationTransform,
    cfg: &RunConfig,
    dir: &Path,
    trace_every: Option<usize>,
) -> anyhow::Result<TriangleMesh> {
    let mut writer = RunWriter::new(dir, Some(normalization))?;
    if let Some(n) = trace_every {
        writer = writer.trace_every(n);
    }
    info!(
        "training on {} points: {} epochs, beta {} -> {}",
        cloud.len(),
        cfg.train.epochs,
        cfg.train.beta_init,
        cfg.train.beta_target
    );
    let state = train_with(cloud, &cfg.network, &cfg.train, &mut writer)?;
    let mesh = extract_mesh(&state.network, &cfg.grid)?;
    info!("extracted {} vertices, {} triangles", mesh.vertices().len(), mesh.triangles().len());
    Ok(mesh)
}

pub fn reconstruct(a: ReconstructArgs) -> CmdResult {
    let cfg = resolve(&a.common, |c| {
        if let Some(e) = a.epochs {
            c.train.epochs = e;
        }
        set_beta(c, a.sigma, a.beta_override)
    })?;
    if printed(&a.common, &cfg) {
        return Ok(());
    }
    let cloud_path = existing(&a.cloud, "cloud")?;
    let dir = require(&a.out, "out")?;
    std::fs::create_dir_all(dir).runtime()?;
    let _log = logging::capture(&dir.join("log.txt")).runtime()?;
    let run = || -> anyhow::Result<()> {
        write_json(
            &dir.join("config.json"),
            &Resolved {
                command: "reconstruct",
                inputs: serde_json::json!({ "cloud": cloud_path, "sigma": a.sigma }),
                config: &cfg,
            },
        )?;
        let raw = load_point_cloud(cloud_path)?.without_normals();
        let t = NormalizationTransform::fit(raw.bounds());
        let cloud = t.apply_cloud(&raw);
        let mesh = train_and_extract(&cloud, t, &cfg, dir, a.trace_sampler.then_some(a.trace_every))?;
        save_mesh(dir.join("mesh.ply"), &t.invert_mesh(&mesh))?;
        Ok(())
    };
    run().map_err(|e| {
        error!("{e:#}");
        Failure::runtime(e)
    })
}

pub fn extract(a: ExtractArgs) -> CmdResult {
    let cfg = resolve(&a.common, |c| {
        if let Some(r) = a.resolution {
            c.grid.resolution = r;
        }
        Ok(())
    })?;
    if printed(&a.common, &cfg) {
        return Ok(());
    }
    let ckpt_path = existing(&a.checkpoint, "checkpoint")?;
    let out = require(&a.out, "out")?;
    let ckpt = Checkpoint::load(ckpt_path).runtime()?;
    let mesh = extract_mesh(&ckpt.network, &cfg.grid).runtime()?;
    let mesh = match ckpt.normalization {
        Some(t) => t.invert_mesh(&mesh),
        None => mesh,
    };
    save_mesh(out, &mesh).runtime()?;
    info!("wrote {} triangles to {}", mesh.triangles().len(), out.display());
    Ok(())
}

/// Metrics between two meshes already in the same normalized frame.
fn score(recon: &TriangleMesh, gt: &TriangleMesh, cfg: &RunConfig) -> anyhow::Result<MetricsReport> {
    Ok(ebsurf::metrics::evaluate(recon, gt, &cfg.eval)?)
}

pub fn eval(a: EvalArgs) -> CmdResult {
    let cfg = resolve(&a.common, |c| {
        if let Some(t) = a.tau {
            c.eval.tau = t;
        }
        if let Some(n) = a.samples {
            c.eval.samples = n;
        }
        if let Some(s) = a.common.seed {
            c.eval.seed = s;
        }
        Ok(())
    })?;
    if printed(&a.common, &cfg) {
        return Ok(());
    }
    let recon_path = existing(&a.mesh, "mesh")?;
    let gt_path = existing(&a.gt, "gt")?;
    let gt = load_mesh(gt_path).runtime()?;
    let (gt, t) = normalize_mesh(&gt).runtime()?;
    let report = match load_mesh(recon_path) {
        Ok(recon) if !recon.is_empty() => score(&t.apply_mesh(&recon), &gt, &cfg),
        // a bare cloud is scored with estimated normals
        Ok(_) | Err(ebsurf::Error::EmptyGeometry) | Err(ebsurf::Error::DegenerateMesh(_)) => (|| {
            let cloud = t.apply_cloud(&load_point_cloud(recon_path)?);
            let cloud = match cloud.normals() {
                Some(_) => cloud,
                None => estimate_normals(&cloud, cfg.normal_neighbors)?,
            };
            let g = sample_surface(&gt, cfg.eval.samples, ebsurf::rng::derive_seed(cfg.eval.seed, &[0x6576_616c]))?;
            Ok(evaluate_clouds(&cloud, &g, cfg.eval.tau, cfg.eval.seed)?)
        })(),
        Err(e) => Err(e.into()),
    }
    .runtime()?;
    let text = serde_json::to_string_pretty(&report).runtime()? + "\n";
    print!("{text}");
    if let Some(out) = &a.out {
        std::fs::write(out, &text).runtime()?;
    }
    Ok(())
}

struct Job {
    name: String,
    mesh: PathBuf,
    sigma: f64,
    beta: f64,
    dir: PathBuf,
}

struct Row {
    name: String,
    sigma: f64,
    beta: f64,
    report: MetricsReport,
}

pub fn pipeline(a: PipelineArgs) -> CmdResult {
    let cfg = resolve(&a.common, |c| {
        if let Some(e) = a.epochs {
            c.train.epochs = e;
        }
        for &s in &a.sigmas {
            c.beta_for_sigma(s)?;
        }
        if let Some(b) = a.beta_override {
            set_beta(c, None, Some(b))?;
        }
        Ok(())
    })?;
    if printed(&a.common, &cfg) {
        return Ok(());
    }
    let out = require(&a.out, "out")?;
    if a.meshes.is_empty() {
        return Err(Failure::usage("--meshes needs at least one mesh"));
    }
    if a.jobs == 0 {
        return Err(Failure::usage("--jobs must be at least 1"));
    }
    let mut jobs = Vec::new();
    let mut names = std::collections::HashSet::new();
    for mesh in &a.meshes {
        existing(&Some(mesh.clone()), "meshes")?;
        let name = mesh.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh").to_string();
        if !names.insert(name.clone()) {
            return Err(Failure::usage(format!("two meshes share the name '{name}'")));
        }
        for &sigma in &a.sigmas {
            let beta = match a.beta_override {
                Some(b) => b,
                None => cfg.beta_for_sigma(sigma).map_err(usage_err)?,
            };
            jobs.push(Job {
                dir: out.join(format!("{name}_sigma{sigma}")),
                name: name.clone(),
                mesh: mesh.clone(),
                sigma,
                beta,
            });
        }
    }
    std::fs::create_dir_all(out).runtime()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs).build().runtime()?;
    let results: Vec<anyhow::Result<Row>> = if a.jobs == 1 {
        jobs.iter().map(|j| run_job(j, &cfg)).collect()
    } else {
        pool.install(|| jobs.par_iter().map(|j| run_job(j, &cfg)).collect())
    };

    let mut csv = RESULTS_HEADER.to_string();
    let mut failed = 0;
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok(row) => {
                let _ = writeln!(
                    csv,
                    "{},{},{},{:.4},{:.2},{:.2}",
                    row.name,
                    row.sigma,
                    row.beta,
                    row.report.chamfer_x1e3(),
                    row.report.f_score_percent(),
                    row.report.ncs_x1e2()
                );
            }
            Err(e) => {
                failed += 1;
                error!("{} at sigma {}: {e:#}", job.name, job.sigma);
            }
        }
    }
    std::fs::write(out.join("results.csv"), &csv).runtime()?;
    print!("{csv}");
    if failed > 0 {
        return Err(Failure::runtime(anyhow!("{failed} of {} runs failed", jobs.len())));
    }
    Ok(())
}

fn run_job(job: &Job, base: &RunConfig) -> anyhow::Result<Row> {
    std::fs::create_dir_all(&job.dir)?;
    let _log = logging::capture(&job.dir.join("log.txt"))?;
    let mut cfg = base.clone();
    cfg.scan.noise_sigma = job.sigma;
    cfg.train.beta_target = job.beta;
    cfg.train.beta_init = cfg.train.beta_init.min(job.beta);
    write_json(
        &job.dir.join("config.json"),
        &Resolved {
            command: "pipeline",
            inputs: serde_json::json!({ "mesh": job.mesh, "sigma": job.sigma }),
            config: &cfg,
        },
    )?;
    info!("{}: sigma {}, beta {}", job.name, job.sigma, job.beta);
    let (gt, _) = normalize_mesh(&load_mesh(&job.mesh)?)?;
    save_mesh(job.dir.join("gt.ply"), &gt)?;
    let cloud = scan_mesh(&gt, &cfg.scan)?;
    save_point_cloud(job.dir.join("cloud.ply"), &cloud)?;
    // the cloud already lives in the normalized frame of the ground truth
    let mesh = train_and_extract(&cloud, NormalizationTransform::identity(), &cfg, &job.dir, None)?;
    save_mesh(job.dir.join("mesh.ply"), &mesh)?;
    let report = score(&mesh, &gt, &cfg)?;
    write_json(&job.dir.join("report.json"), &report)?;
    info!(
        "{}: CD {:.4}e-3, F {:.2}%, NCS {:.2}e-2",
        job.name,
        report.chamfer_x1e3(),
        report.f_score_percent(),
        report.ncs_x1e2()
    );
    Ok(Row {
        name: job.name.clone(),
        sigma: job.sigma,
        beta: job.beta,
        report,
    })
}
