//! Cubic voxel grids and clustering of points into voxels.
//!
//! Voxel `(ix, iy, iz)` has linear index `ix + k * (iy + k * iz)` where `k`
//! is the number of voxels per axis. Grids always have an even `k`, so no
//! voxel is centered on the origin.

use std::collections::BTreeMap;

use nalgebra::Vector3;

use crate::error::GridError;

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    origin: Vector3<f64>,
    resolution: f64,
    radius: f64,
    per_axis: usize,
    octree_depth: u32,
}

/// Builds the grid of voxel centers filling the cube of half-edge `radius`
/// about `origin`.
pub fn voxelize(radius: f64, resolution: f64, origin: Vector3<f64>) -> Result<VoxelGrid, GridError> {
    let err = || GridError::InvalidResolution { resolution, radius };
    if !(resolution > 0.0) || !resolution.is_finite() || !radius.is_finite() || resolution > radius {
        return Err(err());
    }
    if !origin.iter().all(|v| v.is_finite()) {
        return Err(err());
    }
    let half = (radius / resolution + 1e-9).floor() as usize;
    let per_axis = 2 * half;
    let ratio = 2.0 * radius / resolution;
    let snapped = if (ratio - ratio.round()).abs() < 1e-9 {
        ratio.round()
    } else {
        ratio
    };
    let octree_depth = snapped.log2().ceil().max(0.0) as u32;
    Ok(VoxelGrid {
        origin,
        resolution,
        radius,
        per_axis,
        octree_depth,
    })
}

impl VoxelGrid {
    pub fn origin(&self) -> &Vector3<f64> {
        &self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Voxels along each axis.
    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn octree_depth(&self) -> u32 {
        self.octree_depth
    }

    pub fn len(&self) -> usize {
        self.per_axis.pow(3)
    }

    pub fn is_empty(&self) -> bool {
        self.per_axis == 0
    }

    pub fn linear_index(&self, cell: [usize; 3]) -> usize {
        let k = self.per_axis;
        cell[0] + k * (cell[1] + k * cell[2])
    }

    pub fn cell(&self, index: usize) -> [usize; 3] {
        let k = self.per_axis;
        [index % k, (index / k) % k, index / (k * k)]
    }

    fn axis_offset(&self, i: usize) -> f64 {
        self.resolution * (i as f64 - (self.per_axis / 2) as f64 + 0.5)
    }

    pub fn center(&self, index: usize) -> Vector3<f64> {
        let [i, j, k] = self.cell(index);
        self.origin + Vector3::new(self.axis_offset(i), self.axis_offset(j), self.axis_offset(k))
    }

    /// All centers in linear-index order.
    pub fn centers(&self) -> Vec<Vector3<f64>> {
        (0..self.len()).map(|i| self.center(i)).collect()
    }

    /// Half-edge of the cube actually covered by voxels.
    pub fn half_extent(&self) -> f64 {
        self.resolution * (self.per_axis / 2) as f64
    }

    /// Index of the voxel nearest to `p` and whether `p` lies inside the
    /// covered cube (boundary included). Points on a face shared by two
    /// voxels go to the lower index.
    pub fn nearest_voxel(&self, p: &Vector3<f64>) -> (usize, bool) {
        let lo = self.origin.add_scalar(-self.half_extent());
        let k = self.per_axis as f64;
        let mut cell = [0usize; 3];
        let mut inside = true;
        for a in 0..3 {
            let t = (p[a] - lo[a]) / self.resolution;
            if !(0.0..=k).contains(&t) {
                inside = false;
            }
            let idx = (t.ceil() - 1.0).clamp(0.0, k - 1.0);
            cell[a] = if idx.is_nan() { 0 } else { idx as usize };
        }
        (self.linear_index(cell), inside)
    }
}

/// Sparse octree over the implicit cube of `2^depth` voxels per side whose
/// leaves are point buckets.
#[derive(Debug, Clone)]
struct Octree {
    depth: u32,
    nodes: Vec<[u32; 8]>,
    buckets: Vec<(usize, Vec<usize>)>,
}

const EMPTY: u32 = u32::MAX;

impl Octree {
    fn new(depth: u32) -> Self {
        Self {
            depth,
            nodes: vec![[EMPTY; 8]],
            buckets: Vec::new(),
        }
    }

    /// Bucket for octree cell `cell`, created on first use.
    fn bucket(&mut self, cell: [usize; 3], voxel: usize) -> &mut Vec<usize> {
        let mut node = 0usize;
        for level in (0..self.depth).rev() {
            let octant = (0..3).fold(0usize, |acc, a| acc | (((cell[a] >> level) & 1) << a));
            let next = self.nodes[node][octant];
            let next = if next != EMPTY {
                next
            } else if level == 0 {
                self.buckets.push((voxel, Vec::new()));
                let id = (self.buckets.len() - 1) as u32;
                self.nodes[node][octant] = id;
                id
            } else {
                self.nodes.push([EMPTY; 8]);
                let id = (self.nodes.len() - 1) as u32;
                self.nodes[node][octant] = id;
                id
            };
            if level == 0 {
                return &mut self.buckets[next as usize].1;
            }
            node = next as usize;
        }
        unreachable!("octree depth is at least one")
    }
}

/// Points grouped by voxel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Clustering {
    /// Voxel index to point indices, both ascending.
    pub clusters: BTreeMap<usize, Vec<usize>>,
    /// Points outside the grid cube, snapped to the nearest boundary voxel.
    pub out_of_bounds: Vec<usize>,
}

/// Assigns each point to its containing voxel.
pub fn cluster_points(grid: &VoxelGrid, points: &[Vector3<f64>]) -> Clustering {
    let mut depth = grid.octree_depth.max(1);
    while (1usize << depth) < grid.per_axis {
        depth += 1;
    }
    let mut tree = Octree::new(depth);
    let shift = ((1usize << tree.depth) - grid.per_axis) / 2;
    let mut out_of_bounds = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let (voxel, inside) = grid.nearest_voxel(p);
        if !inside {
            out_of_bounds.push(i);
        }
        let c = grid.cell(voxel);
        tree.bucket([c[0] + shift, c[1] + shift, c[2] + shift], voxel).push(i);
    }
    Clustering {
        clusters: tree.buckets.into_iter().collect(),
        out_of_bounds,
    }
}
