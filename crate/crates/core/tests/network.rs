//! Derivative checks against central finite differences, plus the
//! geometric-initialization properties.

use ebsurf::network::{CoordinateNetwork, NetworkConfig};
use ebsurf::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-4;

fn small_config() -> NetworkConfig {
    NetworkConfig {
        hidden_dim: 16,
        num_layers: 8,
        skip_layer: Some(5),
        pe_dims: 3,
        ..Default::default()
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}

fn with_param(net: &CoordinateNetwork, i: usize, delta: f64) -> CoordinateNetwork {
    let mut p = net.parameters().to_vec();
    p[i] += delta;
    CoordinateNetwork::from_parameters(net.config().clone(), p, net.pe_progress()).unwrap()
}

/// Parameter gradient of `g(net)` by central differences.
fn fd_params(net: &CoordinateNetwork, g: impl Fn(&CoordinateNetwork) -> f64) -> Vec<f64> {
    (0..net.parameters().len())
        .map(|i| (g(&with_param(net, i, H)) - g(&with_param(net, i, -H))) / (2.0 * H))
        .collect()
}

fn fd_input(net: &CoordinateNetwork, x: &Point3) -> Vector3 {
    let mut g = Vector3::zeros();
    for a in 0..3 {
        let mut p = *x;
        let mut m = *x;
        p[a] += H;
        m[a] -= H;
        g[a] = (net.forward(&p) - net.forward(&m)) / (2.0 * H);
    }
    g
}

fn random_case(seed: u64) -> (CoordinateNetwork, Point3) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = CoordinateNetwork::random(&small_config(), seed).unwrap();
    net.set_pe_progress(rng.random_range(0.0..3.0));
    let x = Point3::new(
        rng.random_range(-0.9..0.9),
        rng.random_range(-0.9..0.9),
        rng.random_range(-0.9..0.9),
    );
    (net, x)
}

#[test]
fn derivatives_match_finite_differences() {
    for seed in 0..20 {
        let (net, x) = random_case(seed);
        let g = net.backward(&x);

        let fd_x = fd_input(&net, &x);
        assert!((g.d_value_d_input - fd_x).norm() / fd_x.norm() < 1e-3, "input grad, seed {seed}");

        let fd_v = fd_params(&net, |n| n.forward(&x));
        let e = rel_err(&g.d_value_d_params, &fd_v);
        assert!(e < 1e-3, "value/param grad seed {seed}: {e}");

        // |∇ₓ f| through the reverse-accumulation route, differenced in θ
        let fd_n = fd_params(&net, |n| n.value_and_input_gradient(&[x]).1[0].norm());
        let e = rel_err(&g.d_gradnorm_d_params, &fd_n);
        assert!(e < 1e-3, "gradnorm/param grad seed {seed}: {e}");
    }
}

#[test]
fn tangent_and_reverse_routes_agree() {
    let (net, _) = random_case(99);
    let pts: Vec<Point3> = (0..600)
        .map(|i| {
            let t = i as f64 * 0.01;
            Point3::new(t.sin() * 0.8, (1.3 * t).cos() * 0.7, (0.7 * t).sin() * 0.5)
        })
        .collect();
    let (v, g) = net.value_and_input_gradient(&pts);
    let tape = net.tangent_forward(&pts);
    let fwd = net.forward_batch(&pts);
    for i in 0..pts.len() {
        assert!((v[i] - tape.values()[i]).abs() < 1e-12);
        assert!((v[i] - fwd[i]).abs() < 1e-12);
        assert!((g[i] - tape.gradients()[i]).norm() < 1e-10);
    }
}

#[test]
fn batched_weighted_gradient_equals_sum_of_single_points() {
    let (net, _) = random_case(5);
    let pts: Vec<Point3> = (0..300)
        .map(|i| Point3::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos(), (i as f64 * 0.05).sin()))
        .collect();
    let weigh = |i: usize, _f: f64, g: &Vector3| (i as f64 * 0.01 - 1.0, g * 0.3);
    let (grad, _, _) = net.weighted_parameter_gradient(&pts, weigh);
    let mut expected = vec![0.0; grad.len()];
    for (i, p) in pts.iter().enumerate() {
        let tape = net.tangent_forward(std::slice::from_ref(p));
        let (c, e) = weigh(i, tape.values()[0], &tape.gradients()[0]);
        net.accumulate_parameter_gradient(&tape, &[c], &[e], &mut expected);
    }
    assert!(rel_err(&grad, &expected) < 1e-12);
}

#[test]
fn linear_network_derivatives_are_analytic() {
    let cfg = NetworkConfig {
        num_layers: 1,
        skip_layer: None,
        pe_dims: 0,
        ..Default::default()
    };
    let w = [0.3, -1.2, 0.4];
    let net = CoordinateNetwork::from_parameters(cfg, vec![w[0], w[1], w[2], 0.7], 0.0).unwrap();
    let g = net.backward(&Point3::new(0.5, 0.1, -0.2));
    let wv = Vector3::new(w[0], w[1], w[2]);
    assert_eq!(g.d_value_d_input, wv);
    let unit = wv / wv.norm();
    for a in 0..3 {
        assert!((g.d_gradnorm_d_params[a] - unit[a]).abs() < 1e-15);
    }
    assert_eq!(g.d_gradnorm_d_params[3], 0.0);
    assert_eq!(g.d_value_d_params, vec![0.5, 0.1, -0.2, 1.0]);
}

#[test]
fn zero_input_gradient_gives_zero_norm_gradient() {
    let cfg = NetworkConfig {
        num_layers: 1,
        skip_layer: None,
        pe_dims: 0,
        ..Default::default()
    };
    let net = CoordinateNetwork::from_parameters(cfg, vec![0.0, 0.0, 0.0, 0.2], 0.0).unwrap();
    let g = net.backward(&Point3::origin());
    assert!(g.d_gradnorm_d_params.iter().all(|&v| v == 0.0));
}

fn init_config() -> NetworkConfig {
    NetworkConfig {
        hidden_dim: 128,
        ..Default::default()
    }
}

fn box_points(n: usize, seed: u64) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            Point3::new(
                rng.random_range(-0.9..0.9),
                rng.random_range(-0.9..0.9),
                rng.random_range(-0.9..0.9),
            )
        })
        .collect()
}

#[test]
fn geometric_init_approximates_sphere_sdf() {
    for seed in [3, 4] {
        let net = CoordinateNetwork::geometric_init(&NetworkConfig::default(), seed).unwrap();
        let at_origin = net.forward(&Point3::origin());
        assert!((at_origin + 0.5).abs() < 0.2, "f(0) = {at_origin}");
        assert!(net.forward(&Point3::new(0.9, 0.0, 0.0)) > 0.0);

        let pts = box_points(1000, 11);
        let f = net.forward_batch(&pts);
        let target: Vec<f64> = pts.iter().map(|p| p.coords.norm() - 0.5).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (mf, mt) = (mean(&f), mean(&target));
        let cov: f64 = f.iter().zip(&target).map(|(a, b)| (a - mf) * (b - mt)).sum();
        let vf: f64 = f.iter().map(|a| (a - mf).powi(2)).sum();
        let vt: f64 = target.iter().map(|b| (b - mt).powi(2)).sum();
        let corr = cov / (vf * vt).sqrt();
        assert!(corr > 0.9, "correlation {corr}");
    }
}

#[test]
fn geometric_init_sign_property() {
    for (cfg, seed) in [(init_config(), 8), (init_config(), 9), (NetworkConfig::default(), 8)] {
        let net = CoordinateNetwork::geometric_init(&cfg, seed).unwrap();
        let pts: Vec<Point3> = box_points(20_000, 2)
            .into_iter()
            .filter(|p| (p.coords.norm() - 0.5).abs() > 0.15)
            .collect();
        let f = net.forward_batch(&pts);
        let agree = pts
            .iter()
            .zip(&f)
            .filter(|(p, v)| (p.coords.norm() - 0.5).signum() == v.signum())
            .count();
        let rate = agree as f64 / pts.len() as f64;
        assert!(rate >= 0.99, "hidden {} seed {seed}: {rate}", cfg.hidden_dim);
    }
}

#[test]
fn zero_progress_ignores_encoding_weights() {
    let mut net = CoordinateNetwork::random(&small_config(), 4).unwrap();
    net.set_pe_progress(0.0);
    let x = Point3::new(0.2, -0.4, 0.6);
    let before = net.forward(&x);
    // perturb every weight that reads an encoding column of the first layer
    let layout = net.layout()[0];
    let mut p = net.parameters().to_vec();
    for row in 0..layout.outputs {
        for col in 3..layout.inputs {
            p[layout.weight_offset + row * layout.inputs + col] += 1.0;
        }
    }
    let skip = net.layout()[5];
    for row in 0..skip.outputs {
        for col in 16 + 3..skip.inputs {
            p[skip.weight_offset + row * skip.inputs + col] -= 2.0;
        }
    }
    let perturbed = CoordinateNetwork::from_parameters(net.config().clone(), p, 0.0).unwrap();
    assert_eq!(perturbed.forward(&x), before);
}

#[test]
fn forward_is_continuous_in_progress_and_space() {
    let net = CoordinateNetwork::random(&small_config(), 6).unwrap();
    let x = Point3::new(0.1, 0.2, -0.3);
    for j in 0..=3 {
        let a = j as f64;
        let mut lo = net.clone();
        let mut hi = net.clone();
        lo.set_pe_progress(a - 1e-7);
        hi.set_pe_progress(a + 1e-7);
        assert!((lo.forward(&x) - hi.forward(&x)).abs() < 1e-5);
    }
    for p in box_points(50, 1) {
        let q = p + Vector3::new(1e-5, -1e-5, 1e-5);
        assert!((net.forward(&p) - net.forward(&q)).abs() < 1e-5 * 100.0);
    }
}

#[test]
fn initialization_is_deterministic() {
    let a = CoordinateNetwork::geometric_init(&init_config(), 42).unwrap();
    let b = CoordinateNetwork::geometric_init(&init_config(), 42).unwrap();
    assert_eq!(a.parameters(), b.parameters());
    let c = CoordinateNetwork::geometric_init(&init_config(), 43).unwrap();
    assert_ne!(a.parameters(), c.parameters());
    let x = Point3::new(0.3, 0.3, 0.3);
    assert_eq!(a.forward(&x).to_bits(), b.forward(&x).to_bits());
}


