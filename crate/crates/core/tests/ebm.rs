use ebsurf::ebm::{
    energy, langevin_step, sample_negatives, sample_negatives_traced, step_schedule, GibbsModel,
    LangevinConfig, ReplayBuffer, SamplerTrace,
};
use ebsurf::geometry::Aabb;
use ebsurf::network::{CoordinateNetwork, NetworkConfig};
use ebsurf::{Point3, PointCloud, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn x_axis() -> CoordinateNetwork {
    CoordinateNetwork::affine(Vector3::x(), 0.0)
}

fn origin_cloud() -> PointCloud {
    PointCloud::new(vec![Point3::origin()]).unwrap()
}

fn laplace_cdf(x: f64, scale: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / scale).exp()
    } else {
        1.0 - 0.5 * (-x / scale).exp()
    }
}

/// Long-run chain states under `E = |x₁|`.
fn stationary_samples(beta: f64, seed: u64) -> Vec<f64> {
    let net = x_axis();
    let model = GibbsModel::new(&net, beta).unwrap();
    let cfg = LangevinConfig {
        alpha0: 0.02 / (beta * beta),
        s: 0.0,
        steps: 3000,
        clamp_half_extent: 1.1,
    };
    let mut buffer = ReplayBuffer::default();
    sample_negatives(&model, &cfg, &mut buffer, &origin_cloud(), 2000, seed)
        .unwrap()
        .iter()
        .map(|p| p.x)
        .collect()
}

#[test]
fn energy_is_absolute_value() {
    let net = CoordinateNetwork::affine(Vector3::zeros(), -0.2);
    let model = GibbsModel::new(&net, 10.0).unwrap();
    assert_eq!(energy(&model, &Point3::new(0.3, 0.1, 0.0)), 0.2);
    let net = x_axis();
    let model = GibbsModel::new(&net, 10.0).unwrap();
    assert_eq!(model.energy(&Point3::new(0.0, 0.4, -0.2)), 0.0);
}

#[test]
fn energy_gradient_matches_finite_differences() {
    let cfg = NetworkConfig {
        hidden_dim: 16,
        pe_dims: 2,
        ..Default::default()
    };
    let net = CoordinateNetwork::random(&cfg, 5).unwrap();
    let model = GibbsModel::new(&net, 1.0).unwrap();
    let pts = [Point3::new(0.3, -0.2, 0.5), Point3::new(-0.6, 0.1, 0.05), Point3::new(0.0, 0.7, -0.4)];
    let (_, grads) = model.energy_and_gradient(&pts);
    let h = 1e-6;
    for (p, g) in pts.iter().zip(grads) {
        assert!(net.forward(p).abs() > 1e-3);
        for a in 0..3 {
            let mut e = Vector3::zeros();
            e[a] = h;
            let fd = (model.energy(&(p + e)) - model.energy(&(p - e))) / (2.0 * h);
            assert!((fd - g[a]).abs() < 1e-6 * (1.0 + fd.abs()), "{fd} vs {}", g[a]);
        }
    }
}

#[test]
fn rejects_non_positive_beta() {
    let net = x_axis();
    assert!(GibbsModel::new(&net, 0.0).is_err());
    assert!(GibbsModel::new(&net, f64::NAN).is_err());
}

#[test]
fn step_on_abs_field_matches_hand_evaluation() {
    let net = x_axis();
    let model = GibbsModel::new(&net, 1.0).unwrap();
    let clamp = Aabb::cube(1.1);
    let x = langevin_step(&model, &Point3::new(0.5, 0.0, 0.0), 0.1, &Vector3::zeros(), &clamp).unwrap();
    assert!((x.x - 0.4).abs() < 1e-15);
    let x = langevin_step(&model, &Point3::new(-0.5, 0.2, 0.0), 0.1, &Vector3::zeros(), &clamp).unwrap();
    assert!((x.x + 0.4).abs() < 1e-15 && x.y == 0.2);
}

#[test]
fn zero_gradient_without_noise_is_a_fixed_point() {
    let net = CoordinateNetwork::affine(Vector3::zeros(), 0.3);
    let model = GibbsModel::new(&net, 50.0).unwrap();
    let p = Point3::new(0.1, -0.2, 0.3);
    let x = langevin_step(&model, &p, 0.05, &Vector3::zeros(), &Aabb::cube(1.1)).unwrap();
    assert_eq!(x, p);
}

#[test]
fn noise_only_step_has_expected_spread() {
    let net = CoordinateNetwork::affine(Vector3::zeros(), 0.3);
    let model = GibbsModel::new(&net, 50.0).unwrap();
    let alpha = 0.002;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 20_000;
    let mut sq = Vector3::zeros();
    for _ in 0..n {
        let noise = Vector3::from_fn(|_, _| StandardNormal.sample(&mut rng));
        let x = langevin_step(&model, &Point3::origin(), alpha, &noise, &Aabb::cube(1.1)).unwrap();
        sq += x.coords.component_mul(&x.coords);
    }
    let expected = (2.0 * alpha).sqrt();
    for a in 0..3 {
        let std = (sq[a] / n as f64).sqrt();
        assert!((std / expected - 1.0).abs() < 0.03, "axis {a}: {std} vs {expected}");
    }
}

#[test]
fn schedule_follows_harmonic_decay() {
    let cfg = LangevinConfig::for_beta(50.0);
    assert!((step_schedule(&cfg, 1) - 6e-4).abs() < 1e-18);
    assert!((step_schedule(&cfg, 2) - 3e-4).abs() < 1e-18);
    let flat = LangevinConfig { s: 0.0, ..cfg.clone() };
    assert_eq!(step_schedule(&flat, 1), step_schedule(&flat, 1000));
    assert_eq!(cfg.steps, 30);
}

#[test]
fn invalid_config_is_rejected() {
    let net = x_axis();
    let model = GibbsModel::new(&net, 1.0).unwrap();
    let mut buffer = ReplayBuffer::default();
    for cfg in [
        LangevinConfig { steps: 0, ..Default::default() },
        LangevinConfig { alpha0: 0.0, ..Default::default() },
        LangevinConfig { s: -1.0, ..Default::default() },
    ] {
        assert!(sample_negatives(&model, &cfg, &mut buffer, &origin_cloud(), 4, 0).is_err());
    }
    assert!(sample_negatives(&model, &LangevinConfig::default(), &mut buffer, &origin_cloud(), 0, 0).is_err());
}

#[test]
fn cold_start_fills_buffer() {
    let net = x_axis();
    let model = GibbsModel::new(&net, 10.0).unwrap();
    let mut buffer = ReplayBuffer::default();
    let out = sample_negatives(&model, &LangevinConfig::for_beta(10.0), &mut buffer, &origin_cloud(), 100, 3).unwrap();
    assert_eq!(out.len(), 100);
    assert_eq!(buffer.len(), 100);
}

#[test]
fn buffer_never_exceeds_capacity() {
    let net = x_axis();
    let model = GibbsModel::new(&net, 10.0).unwrap();
    let mut buffer = ReplayBuffer::new(150);
    for seed in 0..4 {
        sample_negatives(&model, &LangevinConfig::for_beta(10.0), &mut buffer, &origin_cloud(), 100, seed).unwrap();
        assert!(buffer.len() <= 150);
    }
    assert_eq!(buffer.len(), 150);
}

#[test]
fn warm_start_mixes_buffer_and_fresh_states() {
    // buffer states sit in a corner no fresh start can reach in one tiny step
    let net = CoordinateNetwork::affine(Vector3::zeros(), 0.0);
    let model = GibbsModel::new(&net, 1.0).unwrap();
    let cfg = LangevinConfig {
        alpha0: 1e-12,
        s: 0.0,
        steps: 1,
        clamp_half_extent: 1.1,
    };
    let n = 4000;
    let mut buffer = ReplayBuffer::new(8192);
    buffer.extend(std::iter::repeat_n(Point3::new(1.05, 1.05, 1.05), n));
    let out = sample_negatives(&model, &cfg, &mut buffer, &origin_cloud(), n, 9).unwrap();
    let from_buffer = out.iter().filter(|p| p.x > 1.0).count() as f64;
    let mean = 0.95 * n as f64;
    let sd = (n as f64 * 0.95 * 0.05).sqrt();
    assert!((from_buffer - mean).abs() < 4.0 * sd, "{from_buffer} of {n}");
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = NetworkConfig {
        hidden_dim: 16,
        pe_dims: 2,
        ..Default::default()
    };
    let net = CoordinateNetwork::geometric_init(&cfg, 1).unwrap();
    let model = GibbsModel::new(&net, 30.0).unwrap();
    let cloud = PointCloud::new(vec![Point3::new(0.5, 0.0, 0.0), Point3::new(0.0, -0.5, 0.0)]).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut buffer = ReplayBuffer::default();
            let lc = LangevinConfig::for_beta(30.0);
            let a = sample_negatives(&model, &lc, &mut buffer, &cloud, 700, 5).unwrap();
            let b = sample_negatives(&model, &lc, &mut buffer, &cloud, 700, 6).unwrap();
            (a, b)
        })
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn trace_records_every_state() {
    let net = x_axis();
    let model = GibbsModel::new(&net, 10.0).unwrap();
    let mut buffer = ReplayBuffer::default();
    let mut trace = SamplerTrace::default();
    let cfg = LangevinConfig { steps: 4, ..LangevinConfig::for_beta(10.0) };
    let out = sample_negatives_traced(&model, &cfg, &mut buffer, &origin_cloud(), 3, 1, &mut trace).unwrap();
    assert_eq!(trace.rows.len(), 3 * 5);
    let last: Vec<Point3> = trace.rows.iter().filter(|r| r.step == 4).map(|r| r.x).collect();
    assert_eq!(last, out);
    assert!(trace.to_csv().starts_with("step,chain,x,y,z,energy\n"));
}

#[test]
fn stationary_spread_matches_laplace() {
    for beta in [30.0, 50.0, 150.0] {
        let xs = stationary_samples(beta, 11);
        let std = (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt();
        let expected = 2f64.sqrt() / beta;
        assert!((std / expected - 1.0).abs() < 0.1, "beta {beta}: std {std} vs {expected}");
    }
}

#[test]
fn stationary_samples_pass_ks_test() {
    let beta = 50.0;
    let mut stats: Vec<f64> = (0..3)
        .map(|seed| {
            let mut xs = stationary_samples(beta, 100 + seed);
            xs.sort_by(f64::total_cmp);
            let n = xs.len() as f64;
            xs.iter()
                .enumerate()
                .map(|(i, &x)| {
                    let c = laplace_cdf(x, 1.0 / beta);
                    (c - i as f64 / n).abs().max((i as f64 + 1.0) / n - c)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let critical = 1.628 / (2000f64).sqrt();
    assert!(stats[1] < critical, "median KS statistic {} >= {critical}", stats[1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn negatives_stay_in_clamp_box(seed in 0u64..1000, beta in 1.0f64..100.0, half in 0.2f64..1.5) {
        let net = CoordinateNetwork::random(&NetworkConfig { hidden_dim: 8, pe_dims: 1, ..Default::default() }, seed).unwrap();
        let model = GibbsModel::new(&net, beta).unwrap();
        let cloud = PointCloud::new(vec![Point3::new(0.9, -0.9, 0.9)]).unwrap();
        let cfg = LangevinConfig { alpha0: 0.5, clamp_half_extent: half, ..LangevinConfig::for_beta(beta) };
        let mut buffer = ReplayBuffer::default();
        let out = sample_negatives(&model, &cfg, &mut buffer, &cloud, 64, seed).unwrap();
        let bb = Aabb::cube(half);
        prop_assert!(out.iter().all(|p| bb.contains(p)));
    }
}
