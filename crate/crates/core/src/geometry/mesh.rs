use std::collections::HashMap;

use super::{is_finite, Aabb, Point3, Vector3};
use crate::error::{Error, Result};

/// Indexed triangle set. Faces are wound counter-clockwise when seen from
/// the side their normal points to.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if vertices.iter().any(|p| !is_finite(p)) {
            return Err(Error::invalid("mesh contains non-finite vertices"));
        }
        let n = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i as usize >= n)) {
            return Err(Error::invalid(format!(
                "triangle {t:?} references a vertex beyond {n}"
            )));
        }
        Ok(Self { vertices, triangles })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::from_points(&self.vertices)
    }

    pub fn corners(&self, face: usize) -> [Point3; 3] {
        self.triangles[face].map(|i| self.vertices[i as usize])
    }

    /// Cross product of the two edges leaving the first corner (twice the area).
    fn raw_normal(&self, face: usize) -> Vector3 {
        let [a, b, c] = self.corners(face);
        (b - a).cross(&(c - a))
    }

    /// Unit face normal; zero for a degenerate face.
    pub fn face_normal(&self, face: usize) -> Vector3 {
        let n = self.raw_normal(face);
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vector3::zeros()
        }
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.raw_normal(face).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|f| self.face_area(f)).sum()
    }

    /// Drops faces with repeated indices or zero area. Returns how many were removed.
    pub fn remove_degenerate(&mut self) -> usize {
        let before = self.triangles.len();
        let vertices = &self.vertices;
        self.triangles.retain(|t| {
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return false;
            }
            let [a, b, c] = t.map(|i| vertices[i as usize]);
            (b - a).cross(&(c - a)).norm_squared() > 0.0
        });
        before - self.triangles.len()
    }

    /// Flips the orientation of every face.
    pub fn flip_winding(&mut self) {
        for t in &mut self.triangles {
            t.swap(1, 2);
        }
    }

    pub(crate) fn map_vertices(&self, f: impl Fn(&Point3) -> Point3) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
            triangles: self.triangles.clone(),
        }
    }

    fn edge_counts(&self) -> HashMap<(u32, u32), usize> {
        let mut counts = HashMap::with_capacity(self.triangles.len() * 3 / 2);
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Number of undirected edges used by exactly one face.
    pub fn boundary_edge_count(&self) -> usize {
        self.edge_counts().values().filter(|&&c| c == 1).count()
    }

    /// Closed 2-manifold check: every edge is shared by exactly two faces.
    pub fn is_watertight(&self) -> bool {
        !self.triangles.is_empty() && self.edge_counts().values().all(|&c| c == 2)
    }

    /// V - E + F over the vertices referenced by at least one face.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &i in t {
                used[i as usize] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - self.edge_counts().len() as i64 + self.triangles.len() as i64
    }

    /// Number of edge-connected face components.
    pub fn connected_components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for t in &self.triangles {
            let r0 = find(&mut parent, t[0] as usize);
            for &i in &t[1..] {
                let r = find(&mut parent, i as usize);
                parent[r] = r0;
            }
        }
        let mut roots: Vec<usize> = self
            .triangles
            .iter()
            .map(|t| find(&mut parent, t[0] as usize))
            .collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }

    /// Genus of a closed connected mesh, `None` when the mesh has boundary or
    /// several components.
    pub fn genus(&self) -> Option<i64> {
        if !self.is_watertight() || self.connected_components() != 1 {
            return None;
        }
        Some((2 - self.euler_characteristic()) / 2)
    }
}
