use std::cmp::Reverse;
use std::collections::BinaryHeap;

use nalgebra::{Matrix3, SymmetricEigen};

use super::{PointCloud, SpatialIndex, Vector3};
use crate::error::{Error, Result};

/// Neighborhood size used when clouds need normals for evaluation.
pub const DEFAULT_NORMAL_NEIGHBORS: usize = 40;

/// Per-point normals from the k-nearest-neighbor covariance (smallest
/// eigenvector), made locally consistent by propagating orientation along a
/// maximum-agreement spanning tree of the k-NN graph.
///
/// Global orientation is not guaranteed.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<PointCloud> {
    let n = cloud.len();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!(
            "normal estimation needs k in 1..{n}, got {k}"
        )));
    }
    let points = cloud.points();
    let index = SpatialIndex::build(points)?;

    let mut neighbors = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for p in points {
        let nn = index.k_nearest(p, k + 1);
        let mean = nn.iter().fold(Vector3::zeros(), |acc, &(i, _)| acc + points[i].coords)
            / nn.len() as f64;
        let mut cov = Matrix3::zeros();
        for &(i, _) in &nn {
            let d = points[i].coords - mean;
            cov += d * d.transpose();
        }
        let eig = SymmetricEigen::new(cov);
        let smallest = eig.eigenvalues.imin();
        normals.push(eig.eigenvectors.column(smallest).normalize());
        neighbors.push(nn.into_iter().map(|(i, _)| i).collect::<Vec<_>>());
    }

    orient(&mut normals, &neighbors, cloud);
    PointCloud::with_normals(points.to_vec(), normals)
}

/// Prim's algorithm over the symmetrized k-NN graph with edge cost
/// `1 - |n_i · n_j|`; each visited normal is flipped to agree with its parent.
fn orient(normals: &mut [Vector3], neighbors: &[Vec<usize>], cloud: &PointCloud) {
    let n = normals.len();
    let mut adj: Vec<Vec<usize>> = neighbors.to_vec();
    for (i, nn) in neighbors.iter().enumerate() {
        for &j in nn {
            if j != i {
                adj[j].push(i);
            }
        }
    }
    let points = cloud.points();
    let mut visited = vec![false; n];
    // roots are processed highest-z first; their normals point to +z
    let mut roots: Vec<usize> = (0..n).collect();
    roots.sort_by(|&a, &b| points[b].z.total_cmp(&points[a].z).then(a.cmp(&b)));
    let key = |c: f64| (c * 1e12) as u64;
    for root in roots {
        if visited[root] {
            continue;
        }
        if normals[root].z < 0.0 {
            normals[root] = -normals[root];
        }
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0u64, root, root)));
        while let Some(Reverse((_, node, parent))) = heap.pop() {
            if visited[node] {
                continue;
            }
            visited[node] = true;
            if normals[node].dot(&normals[parent]) < 0.0 {
                normals[node] = -normals[node];
            }
            for &j in &adj[node] {
                if !visited[j] {
                    let cost = 1.0 - normals[node].dot(&normals[j]).abs();
                    heap.push(Reverse((key(cost.max(0.0)), j, node)));
                }
            }
        }
    }
}
