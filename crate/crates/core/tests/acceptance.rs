//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run a subset by passing criterion numbers, e.g.
//! `cargo test --release --test acceptance -- 1 5`.

use std::process::ExitCode;
use std::time::Instant;

use ebsurf::checkpoint::Checkpoint;
use ebsurf::ebm::{sample_negatives, GibbsModel, LangevinConfig, ReplayBuffer};
use ebsurf::geometry::io::save_mesh;
use ebsurf::geometry::shapes::{self, sphere_sdf};
use ebsurf::geometry::normalize;
use ebsurf::mesher::{extract, extract_field, GridSpec};
use ebsurf::metrics::{self, evaluate, EvalConfig, MetricsReport};
use ebsurf::network::{CoordinateNetwork, NetworkConfig};
use ebsurf::scanner::{scan, ScanConfig};
use ebsurf::trainer::{train_with, RunWriter, TrainConfig};
use ebsurf::{Point3, PointCloud, TriangleMesh, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn uniform_points(n: usize, half: f64, seed: u64) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            Point3::new(
                rng.random_range(-half..half),
                rng.random_range(-half..half),
                rng.random_range(-half..half),
            )
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// 1. derivatives against central finite differences

const FD_H: f64 = 1e-5;

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}

fn perturbed(net: &CoordinateNetwork, i: usize, delta: f64) -> CoordinateNetwork {
    let mut p = net.parameters().to_vec();
    p[i] += delta;
    CoordinateNetwork::from_parameters(net.config().clone(), p, net.pe_progress()).unwrap()
}

fn fd_params(net: &CoordinateNetwork, g: impl Fn(&CoordinateNetwork) -> f64) -> Vec<f64> {
    (0..net.parameters().len())
        .map(|i| (g(&perturbed(net, i, FD_H)) - g(&perturbed(net, i, -FD_H))) / (2.0 * FD_H))
        .collect()
}

fn gradient_suite() -> Outcome {
    let cfg = NetworkConfig {
        hidden_dim: 16,
        num_layers: 8,
        skip_layer: Some(5),
        pe_dims: 3,
        ..Default::default()
    };
    let nets = 24;
    let mut worst: f64 = 0.0;
    for seed in 0..nets {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut net = CoordinateNetwork::random(&cfg, seed).map_err(|e| e.to_string())?;
        net.set_pe_progress(rng.random_range(0.0..3.0));
        let x = Point3::new(rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9));
        let g = net.backward(&x);

        let value_err = (g.value - net.forward(&x)).abs() / net.forward(&x).abs().max(1e-12);
        let mut fd_x = Vector3::zeros();
        for a in 0..3 {
            let (mut p, mut m) = (x, x);
            p[a] += FD_H;
            m[a] -= FD_H;
            fd_x[a] = (net.forward(&p) - net.forward(&m)) / (2.0 * FD_H);
        }
        let input_err = (g.d_value_d_input - fd_x).norm() / fd_x.norm().max(1e-12);
        let param_err = rel_err(&g.d_value_d_params, &fd_params(&net, |n| n.forward(&x)));
        let norm_of = |n: &CoordinateNetwork| n.value_and_input_gradient(&[x]).1[0].norm();
        let eik_err = rel_err(&g.d_gradnorm_d_params, &fd_params(&net, norm_of));
        worst = worst.max(value_err).max(input_err).max(param_err).max(eik_err);
    }
    check(worst < 1e-3, format!("{nets} networks at hidden 16, worst relative error {worst:.2e} (< 1e-3)"))
}

// 2. Langevin stationarity under E = |x|

fn stationarity() -> Outcome {
    let net = CoordinateNetwork::affine(Vector3::x(), 0.0);
    let cloud = PointCloud::new(vec![Point3::origin()]).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for beta in [30.0, 50.0, 150.0] {
        let model = GibbsModel::new(&net, beta).map_err(|e| e.to_string())?;
        let cfg = LangevinConfig {
            alpha0: 0.02 / (beta * beta),
            s: 0.0,
            steps: 3000,
            clamp_half_extent: 1.1,
        };
        let xs = sample_negatives(&model, &cfg, &mut ReplayBuffer::default(), &cloud, 2000, 7)
            .map_err(|e| e.to_string())?;
        let std = (xs.iter().map(|p| p.x * p.x).sum::<f64>() / xs.len() as f64).sqrt();
        let ratio = std / (2f64.sqrt() / beta);
        ok &= (ratio - 1.0).abs() < 0.1;
        parts.push(format!("beta {beta}: std/(sqrt2/beta) = {ratio:.3}"));
    }
    check(ok, format!("{} (within 10%)", parts.join(", ")))
}

// 3. geometric initialization

fn geometric_init() -> Outcome {
    let cfg = NetworkConfig::default();
    let r = cfg.sphere_radius;
    let net = CoordinateNetwork::geometric_init(&cfg, 0).map_err(|e| e.to_string())?;
    let pts: Vec<Point3> = uniform_points(20_000, 0.9, 3)
        .into_iter()
        .filter(|p| (p.coords.norm() - r).abs() > 0.15)
        .collect();
    let f = net.forward_batch(&pts);
    let agree = pts.iter().zip(&f).filter(|(p, v)| (p.coords.norm() - r).signum() == v.signum()).count();
    let rate = agree as f64 / pts.len() as f64;
    let mesh = extract(&net, &GridSpec::new(48)).map_err(|e| e.to_string())?;
    let closed = mesh.is_watertight() && mesh.connected_components() == 1;
    let genus = mesh.genus();
    check(
        rate >= 0.99 && closed && genus == Some(0),
        format!("sign agreement {:.2}% on {} points (>= 99%), mesh watertight={closed} genus={genus:?}", 100.0 * rate, pts.len()),
    )
}

// 4. marching cubes on an analytic SDF

fn sphere_mesh(res: usize, r: f64) -> Result<TriangleMesh, String> {
    extract_field(|pts| pts.iter().map(|p| sphere_sdf(p, r)).collect(), &GridSpec::new(res)).map_err(|e| e.to_string())
}

fn marching_cubes() -> Outcome {
    let r = 0.5;
    let coarse = sphere_mesh(64, r)?;
    let h = GridSpec::new(64).cell_size();
    let worst = coarse.vertices().iter().map(|v| (v.coords.norm() - r).abs()).fold(0.0, f64::max);
    let area = sphere_mesh(128, r)?.total_area();
    let exact = 4.0 * std::f64::consts::PI * r * r;
    let area_err = (area / exact - 1.0).abs();
    check(
        worst < 2.0 * h && area_err < 0.05,
        format!("res 64 max radial error {:.2} cells (< 2), res 128 area error {:.3}% (< 5%)", worst / h, 100.0 * area_err),
    )
}

// 5. metrics against brute force

fn brute_nn(p: &Point3, set: &[Point3]) -> usize {
    let mut best = 0;
    for (j, q) in set.iter().enumerate() {
        if (p - q).norm() < (p - set[best]).norm() {
            best = j;
        }
    }
    best
}

fn random_cloud(n: usize, rng: &mut ChaCha8Rng) -> PointCloud {
    let pts = (0..n)
        .map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let normals = (0..n)
        .map(|_| Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize())
        .collect();
    PointCloud::with_normals(pts, normals).unwrap()
}

fn brute_report(r: &PointCloud, g: &PointCloud, tau: f64) -> (f64, f64, f64) {
    let side = |a: &PointCloud, b: &PointCloud| {
        let (mut dist, mut hit, mut align) = (0.0, 0.0, 0.0);
        for (p, n) in a.points().iter().zip(a.normals().unwrap()) {
            let j = brute_nn(p, b.points());
            let d = (p - b.points()[j]).norm();
            dist += d;
            hit += f64::from(u8::from(d < tau));
            align += n.dot(&b.normals().unwrap()[j]).abs();
        }
        let n = a.len() as f64;
        (dist / n, hit / n, align / n)
    };
    let (d1, precision, a1) = side(r, g);
    let (d2, recall, a2) = side(g, r);
    let f = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    (0.5 * (d1 + d2), f, 0.5 * (a1 + a2))
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst: f64 = 0.0;
    let trials = 20;
    for _ in 0..trials {
        let (nr, ng) = (rng.random_range(1..=1000), rng.random_range(1..=1000));
        let (r, g) = (random_cloud(nr, &mut rng), random_cloud(ng, &mut rng));
        let tau = rng.random_range(0.02..0.3);
        let fast = metrics::evaluate_clouds(&r, &g, tau, 0).map_err(|e| e.to_string())?;
        let (cd, f, ncs) = brute_report(&r, &g, tau);
        worst = worst.max((fast.chamfer - cd).abs()).max((fast.f_score - f).abs()).max((fast.ncs - ncs).abs());
    }
    let algebra = [
        (metrics::f_score_from(1.0, 1.0), 1.0),
        (metrics::f_score_from(0.0, 0.0), 0.0),
        (metrics::f_score_from(1.0, 0.5), 2.0 / 3.0),
    ];
    let exact = algebra.iter().all(|(a, b)| a == b);
    check(
        worst < 1e-9 && exact,
        format!("{trials} random set pairs, worst deviation {worst:.1e} (< 1e-9); F-score cases 1, 0, 2/3 exact={exact}"),
    )
}

// 6 and 7. scaled-down reconstructions

/// Eikonal residual `mean (|∇f| - 1)²` over uniform points of the meshing box.
fn box_eikonal(net: &CoordinateNetwork) -> f64 {
    let pts = uniform_points(20_000, 1.0, 99);
    let (_, grads) = net.value_and_input_gradient(&pts);
    grads.iter().map(|g| (g.norm() - 1.0).powi(2)).sum::<f64>() / grads.len() as f64
}

struct Recon {
    report: MetricsReport,
    eikonal: f64,
    /// Eikonal term over the last training batch.
    train_eikonal: f64,
    points: usize,
    seconds: f64,
}

fn reconstruct(gt: &TriangleMesh, scan_cfg: &ScanConfig, net_cfg: &NetworkConfig, cfg: &TrainConfig, res: usize, eval: &EvalConfig) -> Result<Recon, String> {
    let start = Instant::now();
    let cloud = scan(gt, scan_cfg).map_err(|e| e.to_string())?;
    let state = train_with(&cloud, net_cfg, cfg, &mut ()).map_err(|e| e.to_string())?;
    let mesh = extract(&state.network, &GridSpec::new(res)).map_err(|e| e.to_string())?;
    let report = evaluate(&mesh, gt, eval).map_err(|e| e.to_string())?;
    Ok(Recon {
        report,
        eikonal: box_eikonal(&state.network),
        train_eikonal: state.history.last().map_or(f64::NAN, |r| r.eikonal),
        points: cloud.len(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn normalized(mesh: &TriangleMesh) -> TriangleMesh {
    normalize(mesh).unwrap().0
}

// Desk scale: width, epochs and negatives are reduced; the sampler keeps its
// defaults (K = 30, 1000 stability steps). Rays per scan give about 20K points.
const E2E_EPOCHS: usize = 40;
const E2E_NEGATIVES: usize = 256;

fn e2e_clean() -> Outcome {
    let net_cfg = NetworkConfig { hidden_dim: 128, ..Default::default() };
    let cfg = TrainConfig {
        epochs: E2E_EPOCHS,
        batch_negative: E2E_NEGATIVES,
        beta_target: 800.0,
        seed: 1,
        ..Default::default()
    };
    let eval = EvalConfig { tau: 0.01, ..Default::default() };
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, mesh, rays) in [("sphere", shapes::icosphere(0.5, 5), 6000), ("torus", shapes::torus(0.5, 0.2, 128, 64), 10_000)] {
        let scan_cfg = ScanConfig { rays_per_scan: rays, seed: 1, ..Default::default() };
        let r = reconstruct(&normalized(&mesh), &scan_cfg, &net_cfg, &cfg, 64, &eval)?;
        let pass = r.report.chamfer < 0.01 && r.report.f_score > 0.9 && r.eikonal < 0.05;
        ok &= pass;
        parts.push(format!(
            "{name}: {} pts, CD {:.5} (< 0.01), F {:.2}% (> 90%), box Eikonal {:.4} (< 0.05; {:.4} on the last training batch), {:.0}s",
            r.points,
            r.report.chamfer,
            100.0 * r.report.f_score,
            r.eikonal,
            r.train_eikonal,
            r.seconds
        ));
    }
    check(ok, parts.join("; "))
}

const NOISE_SEEDS: [u64; 3] = [1, 2, 3];

/// Desk scale: about 7K points, hidden 64, 20 epochs, 256 negatives.
fn noise_ordering() -> Outcome {
    let gt = normalized(&shapes::icosphere(0.5, 5));
    let net_cfg = NetworkConfig { hidden_dim: 64, ..Default::default() };
    let eval = EvalConfig { tau: 0.01, samples: 50_000, seed: 1 };
    let runs = |beta: f64| -> Result<(Vec<f64>, Vec<f64>), String> {
        let (mut cd, mut ncs) = (Vec::new(), Vec::new());
        for seed in NOISE_SEEDS {
            let scan_cfg = ScanConfig { rays_per_scan: 2000, noise_sigma: 0.03, seed, ..Default::default() };
            let cfg = TrainConfig {
                epochs: 20,
                batch_negative: 256,
                beta_target: beta,
                seed,
                ..Default::default()
            };
            let r = reconstruct(&gt, &scan_cfg, &net_cfg, &cfg, 64, &eval)?;
            cd.push(r.report.chamfer);
            ncs.push(r.report.ncs);
        }
        Ok((cd, ncs))
    };
    let (cd50, ncs50) = runs(50.0)?;
    let (cd800, ncs800) = runs(800.0)?;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>().join("/");
    let detail = format!(
        "CD beta50 {} vs beta800 {}, NCS beta50 {} vs beta800 {}",
        fmt(&cd50),
        fmt(&cd800),
        fmt(&ncs50),
        fmt(&ncs800)
    );
    let (mcd50, mcd800, mncs50, mncs800) = (median(cd50), median(cd800), median(ncs50), median(ncs800));
    check(
        mcd50 < mcd800 && mncs50 > mncs800,
        format!("median CD {mcd50:.5} < {mcd800:.5}, median NCS {mncs50:.4} > {mncs800:.4} ({detail})"),
    )
}

// 8. determinism

fn run_artifacts(dir: &std::path::Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let gt = normalized(&shapes::torus(0.5, 0.2, 48, 24));
    let cloud = scan(&gt, &ScanConfig { num_scans: 4, rays_per_scan: 800, noise_sigma: 0.01, seed: 5, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let net_cfg = NetworkConfig { hidden_dim: 32, num_layers: 4, skip_layer: Some(2), pe_dims: 3, ..Default::default() };
    let mut cfg = TrainConfig {
        epochs: 4,
        batch_negative: 64,
        stability_steps: 20,
        checkpoint_every: 2,
        beta_target: 150.0,
        seed: 5,
        ..Default::default()
    };
    cfg.sampler.steps = 5;
    let mut writer = RunWriter::new(dir, None).map_err(|e| e.to_string())?;
    train_with(&cloud, &net_cfg, &cfg, &mut writer).map_err(|e| e.to_string())?;
    let ck = Checkpoint::load(writer.final_checkpoint_path()).map_err(|e| e.to_string())?;
    let mesh = extract(&ck.network, &GridSpec::new(48)).map_err(|e| e.to_string())?;
    save_mesh(dir.join("mesh.ply"), &mesh).map_err(|e| e.to_string())?;
    let report = evaluate(&mesh, &gt, &EvalConfig { samples: 20_000, ..Default::default() }).map_err(|e| e.to_string())?;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report).unwrap()).map_err(|e| e.to_string())?;
    ["checkpoints/epoch_0002.ckpt", "final.ckpt", "losses.csv", "mesh.ply", "report.json"]
        .iter()
        .map(|f| Ok((f.to_string(), std::fs::read(dir.join(f)).map_err(|e| e.to_string())?)))
        .collect()
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_artifacts(a.path())?;
    let second = run_artifacts(b.path())?;
    let differing: Vec<&str> = first.iter().zip(&second).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.as_str()).collect();
    let names: Vec<&str> = first.iter().map(|x| x.0.as_str()).collect();
    check(
        differing.is_empty() && !first.iter().any(|x| x.1.is_empty()),
        format!("compared {}; differing: {:?}", names.join(", "), differing),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (1, "gradient suite", gradient_suite),
        (2, "Langevin stationarity", stationarity),
        (3, "geometric initialization", geometric_init),
        (4, "marching cubes oracle", marching_cubes),
        (5, "metrics oracle", metrics_oracle),
        (6, "end-to-end clean reconstruction", e2e_clean),
        (7, "noise-robustness ordering", noise_ordering),
        (8, "determinism", determinism),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {id}. {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id}. {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
