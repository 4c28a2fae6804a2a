use ebsurf::geometry::shapes::{sphere_sdf, torus_sdf};
use ebsurf::mesher::{extract, extract_field, GridSpec};
use ebsurf::network::{CoordinateNetwork, NetworkConfig};
use ebsurf::{Error, Point3, TriangleMesh};

fn sphere(res: usize) -> TriangleMesh {
    extract_field(
        |pts| pts.iter().map(|p| sphere_sdf(p, 0.5)).collect(),
        &GridSpec::new(res),
    )
    .unwrap()
}

/// Largest radial error over vertices, edge midpoints and face centroids.
fn hausdorff_to_sphere(mesh: &TriangleMesh) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 0..mesh.triangles().len() {
        let [a, b, c] = mesh.corners(t);
        let pts = [a, b, c, nalgebra::center(&a, &b), nalgebra::center(&b, &c), nalgebra::center(&c, &a), Point3::from((a.coords + b.coords + c.coords) / 3.0)];
        for p in pts {
            worst = worst.max((p.coords.norm() - 0.5).abs());
        }
    }
    worst
}

#[test]
fn sphere_vertices_lie_near_the_surface() {
    let grid = GridSpec::new(64);
    let mesh = sphere(64);
    let h = grid.cell_size();
    assert!(mesh.vertices().iter().all(|v| (v.coords.norm() - 0.5).abs() < 2.0 * h));
    assert!(mesh.is_watertight());
    assert_eq!(mesh.genus(), Some(0));
    assert_eq!(mesh.connected_components(), 1);
}

#[test]
fn sphere_area_converges() {
    let area = sphere(128).total_area();
    let exact = std::f64::consts::PI;
    assert!((area / exact - 1.0).abs() < 0.05, "{area}");
}

#[test]
fn normals_point_outward() {
    let mesh = sphere(48);
    let outward = (0..mesh.triangles().len())
        .filter(|&t| {
            let [a, b, c] = mesh.corners(t);
            mesh.face_normal(t).dot(&(a.coords + b.coords + c.coords)) > 0.0
        })
        .count();
    assert!(outward as f64 >= 0.99 * mesh.triangles().len() as f64);
}

#[test]
fn vertices_interpolate_sign_changes() {
    let grid = GridSpec::new(40);
    let f = |p: &Point3| torus_sdf(p, 0.5, 0.2) + 0.05 * (7.0 * p.x).sin();
    let mesh = extract_field(|pts| pts.iter().map(f).collect(), &grid).unwrap();
    let h = grid.cell_size();
    let lo = grid.bounds[0];
    for v in mesh.vertices() {
        let offgrid: Vec<usize> = (0..3)
            .filter(|&a| {
                let u = (v[a] - lo) / h;
                (u - u.round()).abs() > 1e-9
            })
            .collect();
        assert!(offgrid.len() <= 1, "vertex {v} is not on a grid edge");
        let Some(&axis) = offgrid.first() else {
            assert!(f(v).abs() < 1e-12);
            continue;
        };
        let u = (v[axis] - lo) / h;
        let (mut p0, mut p1) = (*v, *v);
        p0[axis] = lo + u.floor() * h;
        p1[axis] = lo + u.ceil() * h;
        let (f0, f1) = (f(&p0), f(&p1));
        assert!((f0 < 0.0) != (f1 < 0.0), "edge at {v} has no sign change");
        let s = u - u.floor();
        assert!((f0 + s * (f1 - f0)).abs() < 1e-6);
    }
}

#[test]
fn refinement_reduces_hausdorff_distance() {
    let d: Vec<f64> = [32, 64, 128].iter().map(|&r| hausdorff_to_sphere(&sphere(r))).collect();
    assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
}

#[test]
fn torus_has_genus_one() {
    let mesh = extract_field(
        |pts| pts.iter().map(|p| torus_sdf(p, 0.5, 0.2)).collect(),
        &GridSpec::new(64),
    )
    .unwrap();
    assert!(mesh.is_watertight());
    assert_eq!(mesh.genus(), Some(1));
}

#[test]
fn constant_field_has_no_level_set() {
    let r = extract_field(|pts| vec![1.0; pts.len()], &GridSpec::new(16));
    assert!(matches!(r, Err(Error::EmptyLevelSet)));
}

#[test]
fn rejects_tiny_grid() {
    assert!(extract_field(|pts| vec![1.0; pts.len()], &GridSpec::new(1)).is_err());
}

#[test]
fn initialized_network_gives_closed_sphere() {
    let net = CoordinateNetwork::geometric_init(&NetworkConfig { hidden_dim: 128, ..Default::default() }, 2).unwrap();
    let mesh = extract(&net, &GridSpec::new(48)).unwrap();
    assert!(mesh.is_watertight());
    assert_eq!(mesh.connected_components(), 1);
    assert_eq!(mesh.genus(), Some(0));
}
