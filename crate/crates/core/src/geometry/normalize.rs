use serde::{Deserialize, Serialize};

use super::{Aabb, Point3, PointCloud, TriangleMesh};
use crate::error::{Error, Result};

/// Largest half-extent of normalized geometry: everything fits in [-0.9, 0.9]³.
pub const NORMALIZED_HALF_EXTENT: f64 = 0.9;

/// Affine map `p -> (p - center) * scale` into the normalized working box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTransform {
    pub center: [f64; 3],
    pub scale: f64,
}

impl Default for NormalizationTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl NormalizationTransform {
    pub fn identity() -> Self {
        Self {
            center: [0.0; 3],
            scale: 1.0,
        }
    }

    /// Transform centering `bounds` at the origin with its largest half-extent
    /// mapped to [`NORMALIZED_HALF_EXTENT`]. Zero extent keeps scale 1.
    pub fn fit(bounds: &Aabb) -> Self {
        let half = bounds.extent().max() / 2.0;
        let scale = if half > 0.0 {
            NORMALIZED_HALF_EXTENT / half
        } else {
            1.0
        };
        let c = bounds.center();
        Self {
            center: [c.x, c.y, c.z],
            scale,
        }
    }

    fn center_point(&self) -> Point3 {
        Point3::new(self.center[0], self.center[1], self.center[2])
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from((p - self.center_point()) * self.scale)
    }

    pub fn invert(&self, p: &Point3) -> Point3 {
        self.center_point() + p.coords / self.scale
    }

    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        cloud.map_points(|p| self.apply(p))
    }

    pub fn invert_cloud(&self, cloud: &PointCloud) -> PointCloud {
        cloud.map_points(|p| self.invert(p))
    }

    pub fn apply_mesh(&self, mesh: &TriangleMesh) -> TriangleMesh {
        mesh.map_vertices(|p| self.apply(p))
    }

    pub fn invert_mesh(&self, mesh: &TriangleMesh) -> TriangleMesh {
        mesh.map_vertices(|p| self.invert(p))
    }

    /// Lengths measured in normalized units, expressed in original units.
    pub fn invert_length(&self, len: f64) -> f64 {
        len / self.scale
    }

    /// The composition `outer ∘ self` (apply `self` first).
    pub fn then(&self, outer: &NormalizationTransform) -> NormalizationTransform {
        // outer((p - c1) s1) = (p - c1 - c2/s1) s1 s2
        let c1 = self.center_point();
        let c = c1 + outer.center_point().coords / self.scale;
        NormalizationTransform {
            center: [c.x, c.y, c.z],
            scale: self.scale * outer.scale,
        }
    }
}

/// Geometry that can be moved into the normalized working box.
pub trait Normalize: Sized {
    fn normalized(&self) -> Result<(Self, NormalizationTransform)>;
}

impl Normalize for PointCloud {
    fn normalized(&self) -> Result<(Self, NormalizationTransform)> {
        let t = NormalizationTransform::fit(self.bounds());
        Ok((t.apply_cloud(self), t))
    }
}

impl Normalize for TriangleMesh {
    fn normalized(&self) -> Result<(Self, NormalizationTransform)> {
        let bounds = self.bounds().ok_or(Error::EmptyGeometry)?;
        let t = NormalizationTransform::fit(&bounds);
        Ok((t.apply_mesh(self), t))
    }
}

/// Free-function form of [`Normalize::normalized`].
pub fn normalize<T: Normalize>(geometry: &T) -> Result<(T, NormalizationTransform)> {
    geometry.normalized()
}
