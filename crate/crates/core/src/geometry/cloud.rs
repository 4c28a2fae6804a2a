use super::{is_finite, Aabb, Point3, Vector3};
use crate::error::{Error, Result};

const UNIT_TOLERANCE: f64 = 1e-6;

/// An ordered set of sample positions, optionally carrying unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
    normals: Option<Vec<Vector3>>,
    bounds: Aabb,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.iter().any(|p| !is_finite(p)) {
            return Err(Error::invalid("point cloud contains non-finite coordinates"));
        }
        let bounds = Aabb::from_points(&points).ok_or(Error::EmptyGeometry)?;
        Ok(Self {
            points,
            normals: None,
            bounds,
        })
    }

    /// Builds a cloud with per-point normals, which must be unit length.
    pub fn with_normals(points: Vec<Point3>, normals: Vec<Vector3>) -> Result<Self> {
        if normals.len() != points.len() {
            return Err(Error::invalid(format!(
                "{} normals for {} points",
                normals.len(),
                points.len()
            )));
        }
        if let Some(i) = normals
            .iter()
            .position(|n| !((n.norm() - 1.0).abs() <= UNIT_TOLERANCE))
        {
            return Err(Error::invalid(format!("normal {i} is not unit length")));
        }
        let mut cloud = Self::new(points)?;
        cloud.normals = Some(normals);
        Ok(cloud)
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vector3]> {
        self.normals.as_deref()
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Drops the normals, keeping positions.
    pub fn without_normals(mut self) -> Self {
        self.normals = None;
        self
    }

    pub fn into_parts(self) -> (Vec<Point3>, Option<Vec<Vector3>>) {
        (self.points, self.normals)
    }

    /// Applies `f` to every position, keeping normals as they are.
    pub(crate) fn map_points(&self, f: impl Fn(&Point3) -> Point3) -> Self {
        let points: Vec<Point3> = self.points.iter().map(f).collect();
        let bounds = Aabb::from_points(&points).expect("non-empty");
        Self {
            points,
            normals: self.normals.clone(),
            bounds,
        }
    }
}
