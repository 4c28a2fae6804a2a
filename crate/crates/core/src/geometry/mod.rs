//! Geometric primitives shared by every stage of the pipeline: point clouds,
//! triangle meshes, normalization into the working box, nearest-neighbor
//! search, surface sampling, normal estimation and file I/O.

mod cloud;
pub mod io;
mod kdtree;
mod mesh;
mod normalize;
mod normals;
mod sampling;
pub mod shapes;

pub use cloud::PointCloud;
pub use kdtree::SpatialIndex;
pub use mesh::TriangleMesh;
pub use normalize::{normalize, Normalize, NormalizationTransform, NORMALIZED_HALF_EXTENT};
pub use normals::{estimate_normals, DEFAULT_NORMAL_NEIGHBORS};
pub use sampling::sample_surface;

/// A position in model space.
pub type Point3 = nalgebra::Point3<f64>;
/// A direction or displacement in model space.
pub type Vector3 = nalgebra::Vector3<f64>;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    /// The cube `[-half, half]³`.
    pub fn cube(half: f64) -> Self {
        Aabb {
            min: Point3::new(-half, -half, -half),
            max: Point3::new(half, half, half),
        }
    }

    /// Smallest box containing every point, `None` for an empty iterator.
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut bb = Aabb { min: first, max: first };
        for p in it {
            bb.grow(p);
        }
        Some(bb)
    }

    pub fn grow(&mut self, p: &Point3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn center(&self) -> Point3 {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn extent(&self) -> Vector3 {
        self.max - self.min
    }

    /// Componentwise projection onto the box.
    pub fn clamp(&self, p: &Point3) -> Point3 {
        Point3::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
            p.z.clamp(self.min.z, self.max.z),
        )
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}

pub(crate) fn is_finite(p: &Point3) -> bool {
    p.iter().all(|c| c.is_finite())
}
