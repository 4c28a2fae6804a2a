//! Simulated multi-view range scanning.
//!
//! Cameras sit on a sphere of radius `camera_radius` at Fibonacci-lattice
//! directions, rotated as a whole by a seeded random rotation, and look at
//! the origin. Each casts rays through a jittered square pixel grid spanning
//! a 60° field of view. The first hit `p` along direction `d` is reported as
//! `p + η d` with `η ~ N(0, σ²)`; hits from all views are merged.

use nalgebra::{Rotation3, Unit};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3, PointCloud, TriangleMesh, Vector3};
use crate::rng::stream;

const BARYCENTRIC_EPS: f64 = 1e-9;
const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub num_scans: usize,
    pub rays_per_scan: usize,
    /// Depth noise standard deviation in normalized units.
    pub noise_sigma: f64,
    pub camera_radius: f64,
    pub fov_degrees: f64,
    pub seed: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            num_scans: 10,
            rays_per_scan: 10_000,
            noise_sigma: 0.0,
            camera_radius: 2.5,
            fov_degrees: 60.0,
            seed: 0,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_scans == 0 || self.rays_per_scan == 0 {
            return Err(Error::invalid("need at least one scan and one ray per scan"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise_sigma must be non-negative"));
        }
        if !(self.fov_degrees > 0.0 && self.fov_degrees < 180.0) {
            return Err(Error::invalid("field of view must lie in (0, 180) degrees"));
        }
        Ok(())
    }
}

/// One ray that hit the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanHit {
    pub scan: usize,
    pub ray: usize,
    pub origin: Point3,
    /// Unit ray direction.
    pub direction: Vector3,
    /// Exact first intersection.
    pub hit: Point3,
    /// `hit + η direction`.
    pub point: Point3,
}

/// Camera centers for `cfg`, in scan order.
pub fn camera_positions(cfg: &ScanConfig) -> Vec<Point3> {
    let n = cfg.num_scans;
    let mut rng = stream(cfg.seed, &[0x0063_616d]);
    let axis = Unit::new_normalize(Vector3::from_fn(|_, _| StandardNormal.sample(&mut rng)));
    let rotation = Rotation3::from_axis_angle(&axis, rng.random_range(0.0..std::f64::consts::TAU));
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            let dir = rotation * Vector3::new(r * phi.cos(), r * phi.sin(), z);
            Point3::from(dir * cfg.camera_radius)
        })
        .collect()
}

/// Point cloud from all scans.
pub fn scan(mesh: &TriangleMesh, cfg: &ScanConfig) -> Result<PointCloud> {
    let hits = scan_hits(mesh, cfg)?;
    PointCloud::new(hits.into_iter().map(|h| h.point).collect())
}

/// Every hit with its ray; order is by scan, then ray.
pub fn scan_hits(mesh: &TriangleMesh, cfg: &ScanConfig) -> Result<Vec<ScanHit>> {
    cfg.validate()?;
    if !(mesh.total_area() > 0.0) {
        return Err(Error::DegenerateMesh("zero surface area"));
    }
    let bounds = mesh.bounds().ok_or(Error::EmptyGeometry)?;
    let reach = bounds.min.coords.abs().sup(&bounds.max.coords.abs()).norm();
    if cfg.camera_radius <= reach {
        return Err(Error::invalid(format!(
            "camera radius {} does not clear the scene (extent {reach:.3})",
            cfg.camera_radius
        )));
    }
    let bvh = Bvh::build(mesh);
    let side = (cfg.rays_per_scan as f64).sqrt().ceil() as usize;
    let half = (cfg.fov_degrees.to_radians() / 2.0).tan();
    let mut hits = Vec::new();
    for (s, eye) in camera_positions(cfg).into_iter().enumerate() {
        let forward = (-eye.coords).normalize();
        let helper = if forward.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
        let right = forward.cross(&helper).normalize();
        let up = right.cross(&forward);
        let scan_hits: Vec<Option<ScanHit>> = (0..cfg.rays_per_scan)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream(cfg.seed, &[s as u64, r as u64]);
                let (px, py) = ((r % side) as f64, (r / side) as f64);
                let u = (2.0 * (px + rng.random::<f64>()) / side as f64 - 1.0) * half;
                let v = (2.0 * (py + rng.random::<f64>()) / side as f64 - 1.0) * half;
                let direction = (forward + u * right + v * up).normalize();
                let t = bvh.first_hit(mesh, &eye, &direction)?;
                let hit = eye + t * direction;
                let eta: f64 = StandardNormal.sample(&mut rng);
                Some(ScanHit {
                    scan: s,
                    ray: r,
                    origin: eye,
                    direction,
                    hit,
                    point: hit + cfg.noise_sigma * eta * direction,
                })
            })
            .collect();
        hits.extend(scan_hits.into_iter().flatten());
    }
    if hits.is_empty() {
        return Err(Error::NotVisible);
    }
    Ok(hits)
}

enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Bounding-volume hierarchy over triangles, split at the centroid median of
/// the widest axis.
struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl Bvh {
    fn build(mesh: &TriangleMesh) -> Self {
        let n = mesh.triangles().len();
        let centroids: Vec<Point3> = (0..n)
            .map(|t| {
                let [a, b, c] = mesh.corners(t);
                Point3::from((a.coords + b.coords + c.coords) / 3.0)
            })
            .collect();
        let mut bvh = Bvh {
            nodes: Vec::new(),
            order: (0..n).collect(),
        };
        bvh.split(mesh, &centroids, 0, n);
        bvh
    }

    fn split(&mut self, mesh: &TriangleMesh, centroids: &[Point3], start: usize, end: usize) -> usize {
        let bounds = Aabb::from_points(self.order[start..end].iter().flat_map(|&t| mesh.corners(t)).collect::<Vec<_>>().iter())
            .expect("non-empty range");
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return id;
        }
        self.nodes.push(Node::Leaf { bounds, start, end });
        let extent = bounds.extent();
        let axis = extent.imax();
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
        });
        let left = self.split(mesh, centroids, start, mid);
        let right = self.split(mesh, centroids, mid, end);
        self.nodes[id] = Node::Inner { bounds, left, right };
        id
    }

    /// Ray parameter of the closest intersection.
    fn first_hit(&self, mesh: &TriangleMesh, origin: &Point3, dir: &Vector3) -> Option<f64> {
        let inv = dir.map(|d| 1.0 / d);
        let mut best: Option<f64> = None;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let limit = best.unwrap_or(f64::INFINITY);
            if !slab_test(node.bounds(), origin, &inv, limit) {
                continue;
            }
            match *node {
                Node::Leaf { start, end, .. } => {
                    for &t in &self.order[start..end] {
                        if let Some(d) = intersect(&mesh.corners(t), origin, dir) {
                            if d < best.unwrap_or(f64::INFINITY) {
                                best = Some(d);
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best
    }
}

fn slab_test(b: &Aabb, o: &Point3, inv: &Vector3, limit: f64) -> bool {
    let mut t0: f64 = 0.0;
    let mut t1 = limit;
    for a in 0..3 {
        let (mut near, mut far) = ((b.min[a] - o[a]) * inv[a], (b.max[a] - o[a]) * inv[a]);
        if near > far {
            std::mem::swap(&mut near, &mut far);
        }
        // NaN (origin on a slab plane with a zero direction) keeps the box
        t0 = if near > t0 { near } else { t0 };
        t1 = if far < t1 { far } else { t1 };
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// Möller–Trumbore with slightly widened barycentric bounds; either side.
fn intersect([a, b, c]: &[Point3; 3], o: &Point3, d: &Vector3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-15 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - a;
    let u = s.dot(&p) * inv;
    if !(-BARYCENTRIC_EPS..=1.0 + BARYCENTRIC_EPS).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < -BARYCENTRIC_EPS || u + v > 1.0 + BARYCENTRIC_EPS {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 1e-9).then_some(t)
}
