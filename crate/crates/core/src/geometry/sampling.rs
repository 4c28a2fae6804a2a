use rand::Rng;

use super::{PointCloud, TriangleMesh};
use crate::error::{Error, Result};

/// Draws `n` points uniformly by area from the mesh surface. Each point
/// carries the unit normal of the face it was drawn from.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let mut cumulative = Vec::with_capacity(mesh.triangles().len());
    let mut total = 0.0;
    for f in 0..mesh.triangles().len() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateMesh("zero total surface area"));
    }
    let mut rng = crate::rng::stream(seed, &[0x5a4d]);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let r = rng.random::<f64>() * total;
        let face = cumulative
            .partition_point(|&c| c <= r)
            .min(cumulative.len() - 1);
        let [a, b, c] = mesh.corners(face);
        let s = rng.random::<f64>().sqrt();
        let t = rng.random::<f64>();
        let (v, w) = (s * (1.0 - t), s * t);
        points.push(a + (b - a) * v + (c - a) * w);
        normals.push(mesh.face_normal(face));
    }
    PointCloud::with_normals(points, normals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{shapes, Point3, Vector3};

    #[test]
    fn square_samples_center_on_centroid() {
        let c = sample_surface(&shapes::unit_square(), 100_000, 1).unwrap();
        let mean = c.points().iter().fold(Vector3::zeros(), |a, p| a + p.coords) / c.len() as f64;
        assert!((mean - Vector3::new(0.5, 0.5, 0.0)).norm() < 0.01);
        assert!(c.normals().unwrap().iter().all(|n| *n == Vector3::z()));
    }

    #[test]
    fn single_triangle_contains_samples() {
        let v = vec![
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        let m = TriangleMesh::new(v, vec![[0, 1, 2]]).unwrap();
        let c = sample_surface(&m, 3, 9).unwrap();
        for p in c.points() {
            // plane x + y + z = 1
            assert!((p.x + p.y + p.z - 1.0).abs() < 1e-9);
            assert!(p.x >= 0.0 && p.y >= 0.0 && p.z >= 0.0);
        }
    }

    #[test]
    fn deterministic_and_sized() {
        let m = shapes::icosphere(1.0, 2);
        let a = sample_surface(&m, 200_000, 4).unwrap();
        assert_eq!(a.len(), 200_000);
        assert_eq!(a, sample_surface(&m, 200_000, 4).unwrap());
        assert_ne!(a, sample_surface(&m, 200_000, 5).unwrap());
    }

    #[test]
    fn degenerate_mesh_is_rejected() {
        let v = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0)];
        let m = TriangleMesh::new(v, vec![[0, 1, 2]]).unwrap();
        assert!(sample_surface(&m, 10, 0).is_err());
    }
}
