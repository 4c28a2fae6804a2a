//! Zero-level-set extraction by marching cubes.
//!
//! The field is sampled on a regular grid, one z-slab at a time. A cube
//! corner counts as inside when its value is negative. Each crossing edge
//! gets one vertex, placed by linear interpolation and shared by all cubes
//! touching the edge, so the output is indexed and closed wherever the level
//! set does not leave the grid. Triangles are wound so that their normals
//! point toward positive values.

mod tables;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, TriangleMesh};
use crate::network::CoordinateNetwork;
use tables::{CORNERS, EDGES, TRIANGLES};

/// Sampling grid: `resolution` samples per axis spanning `[lo, hi]³`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub resolution: usize,
    pub bounds: [f64; 2],
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            resolution: 128,
            bounds: [-1.0, 1.0],
        }
    }
}

impl GridSpec {
    pub fn new(resolution: usize) -> Self {
        Self {
            resolution,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::invalid("grid resolution must be at least 2"));
        }
        let [lo, hi] = self.bounds;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::invalid("grid bounds must satisfy lo < hi"));
        }
        Ok(())
    }

    /// Distance between neighboring samples.
    pub fn cell_size(&self) -> f64 {
        (self.bounds[1] - self.bounds[0]) / (self.resolution - 1) as f64
    }

    fn coordinate(&self, i: usize) -> f64 {
        self.bounds[0] + i as f64 * self.cell_size()
    }

    fn point(&self, [i, j, k]: [usize; 3]) -> Point3 {
        Point3::new(self.coordinate(i), self.coordinate(j), self.coordinate(k))
    }
}

/// Meshes `{x : f(x) = 0}` of the network.
pub fn extract(net: &CoordinateNetwork, grid: &GridSpec) -> Result<TriangleMesh> {
    extract_field(|pts| net.forward_batch(pts), grid)
}

/// Meshes the zero level set of any batched scalar field.
pub fn extract_field<F>(field: F, grid: &GridSpec) -> Result<TriangleMesh>
where
    F: Fn(&[Point3]) -> Vec<f64>,
{
    grid.validate()?;
    let n = grid.resolution;
    let mut values = Vec::with_capacity(n * n * n);
    let mut slab = Vec::with_capacity(n * n);
    for k in 0..n {
        slab.clear();
        for j in 0..n {
            for i in 0..n {
                slab.push(grid.point([i, j, k]));
            }
        }
        let v = field(&slab);
        if v.len() != slab.len() {
            return Err(Error::invalid("field returned the wrong number of values"));
        }
        values.extend(v);
    }
    polygonize(&values, grid)
}

fn polygonize(values: &[f64], grid: &GridSpec) -> Result<TriangleMesh> {
    let n = grid.resolution;
    let index = |[i, j, k]: [usize; 3]| i + n * (j + n * k);
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut edge_vertex: HashMap<usize, u32> = HashMap::new();

    for k in 0..n - 1 {
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let corner = |c: usize| [i + CORNERS[c][0], j + CORNERS[c][1], k + CORNERS[c][2]];
                let v: [f64; 8] = std::array::from_fn(|c| values[index(corner(c))]);
                let case = (0..8).filter(|&c| v[c] < 0.0).fold(0usize, |acc, c| acc | (1 << c));
                let row = &TRIANGLES[case];
                for tri in row.chunks_exact(3).take_while(|t| t[0] >= 0) {
                    let ids: [u32; 3] = std::array::from_fn(|t| {
                        let [a, b] = EDGES[tri[t] as usize];
                        let (pa, pb) = (corner(a), corner(b));
                        let axis = (0..3).find(|&d| pa[d] != pb[d]).expect("edge spans one axis");
                        let low = if pa[axis] < pb[axis] { pa } else { pb };
                        *edge_vertex.entry(3 * index(low) + axis).or_insert_with(|| {
                            let s = v[a] / (v[a] - v[b]);
                            let p = grid.point(pa) + (grid.point(pb) - grid.point(pa)) * s;
                            vertices.push(p);
                            (vertices.len() - 1) as u32
                        })
                    });
                    // table order winds toward the inside; reverse it
                    triangles.push([ids[0], ids[2], ids[1]]);
                }
            }
        }
    }
    if triangles.is_empty() {
        return Err(Error::EmptyLevelSet);
    }
    TriangleMesh::new(vertices, triangles)
}
