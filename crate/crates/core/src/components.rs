//! Connected-component labelling and binary morphology on 3D masks.
//!
//! Out-of-volume neighbours are always treated as unset: dilation never
//! reaches outside the grid, and erosion removes voxels on the volume border.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Dims, Mask};

/// Voxel adjacency.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Connectivity {
    /// Shared face.
    #[serde(rename = "face-6")]
    Face6,
    /// Shared face or edge.
    #[serde(rename = "edge-18")]
    Edge18,
    /// Shared face, edge or corner.
    #[serde(rename = "vertex-26")]
    Vertex26,
}

impl Connectivity {
    pub const ALL: [Connectivity; 3] = [
        Connectivity::Face6,
        Connectivity::Edge18,
        Connectivity::Vertex26,
    ];

    /// Largest number of non-zero axis steps allowed between neighbours.
    fn max_axes(self) -> u32 {
        match self {
            Connectivity::Face6 => 1,
            Connectivity::Edge18 => 2,
            Connectivity::Vertex26 => 3,
        }
    }

    /// All neighbour displacements, in scan order.
    pub fn offsets(self) -> Vec<(i32, i32, i32)> {
        let mut out = Vec::with_capacity(26);
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1i32 {
                    let axes = (dx != 0) as u32 + (dy != 0) as u32 + (dz != 0) as u32;
                    if axes > 0 && axes <= self.max_axes() {
                        out.push((dx, dy, dz));
                    }
                }
            }
        }
        out
    }

    /// Neighbours already visited by an x-fastest scan.
    fn backward_offsets(self) -> Vec<(i32, i32, i32)> {
        self.offsets()
            .into_iter()
            .filter(|&(dx, dy, dz)| dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0))))
            .collect()
    }
}

impl std::fmt::Display for Connectivity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Connectivity::Face6 => "face-6",
            Connectivity::Edge18 => "edge-18",
            Connectivity::Vertex26 => "vertex-26",
        })
    }
}

/// Component id per voxel: 0 is background, components are numbered `1..=count`
/// in order of their first voxel in x-fastest scan order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentMap {
    dims: Dims,
    ids: Vec<u32>,
    count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComponentSize {
    pub id: u32,
    pub voxels: usize,
    /// Physical volume in mm³.
    pub volume: f64,
}

impl ComponentMap {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mask_of(&self, id: u32) -> Mask {
        Mask::from_fn(self.dims, |i| self.ids[i] == id)
    }

    /// Voxel count per component, indexed by `id - 1`.
    pub fn voxel_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.count];
        for &id in &self.ids {
            if id > 0 {
                counts[id as usize - 1] += 1;
            }
        }
        counts
    }

    /// Per-component voxel count and physical volume.
    pub fn sizes(&self, spacing: [f64; 3]) -> Vec<ComponentSize> {
        let voxel_volume: f64 = spacing.iter().product();
        self.voxel_counts()
            .into_iter()
            .enumerate()
            .map(|(k, voxels)| ComponentSize {
                id: k as u32 + 1,
                voxels,
                volume: voxels as f64 * voxel_volume,
            })
            .collect()
    }

    /// Flat voxel indices of each component, indexed by `id - 1`.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (i, &id) in self.ids.iter().enumerate() {
            if id > 0 {
                out[id as usize - 1].push(i);
            }
        }
        out
    }
}

/// Free function form of [`ComponentMap::sizes`].
pub fn component_sizes(cm: &ComponentMap, spacing: [f64; 3]) -> Vec<ComponentSize> {
    cm.sizes(spacing)
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut a: u32) -> u32 {
        while self.parent[a as usize] != a {
            let grand = self.parent[self.parent[a as usize] as usize];
            self.parent[a as usize] = grand;
            a = grand;
        }
        a
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let ra = self.find(a);
        let rb = self.find(b);
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        lo
    }
}

/// Two-pass union-find labelling.
pub fn connected_components(mask: &Mask, conn: Connectivity) -> ComponentMap {
    let dims = mask.dims();
    let back = conn.backward_offsets();
    const UNSET: u32 = u32::MAX;
    let mut provisional = vec![UNSET; dims.len()];
    let mut sets = DisjointSet { parent: Vec::new() };

    for z in 0..dims.nz {
        for y in 0..dims.ny {
            for x in 0..dims.nx {
                let i = dims.index(x, y, z);
                if !mask.get(i) {
                    continue;
                }
                let mut label = UNSET;
                for &d in &back {
                    if let Some(j) = dims.offset((x, y, z), d) {
                        let lj = provisional[j];
                        if lj != UNSET {
                            label = if label == UNSET {
                                sets.find(lj)
                            } else {
                                sets.union(label, lj)
                            };
                        }
                    }
                }
                provisional[i] = if label == UNSET { sets.make() } else { label };
            }
        }
    }

    let mut final_id = vec![0u32; sets.parent.len()];
    let mut count = 0u32;
    let ids = provisional
        .iter()
        .map(|&p| {
            if p == UNSET {
                return 0;
            }
            let root = sets.find(p) as usize;
            if final_id[root] == 0 {
                count += 1;
                final_id[root] = count;
            }
            final_id[root]
        })
        .collect();

    ComponentMap {
        dims,
        ids,
        count: count as usize,
    }
}

/// Sets every voxel adjacent to a set voxel, `iterations` times.
pub fn dilate(mask: &Mask, iterations: usize, conn: Connectivity) -> Mask {
    let dims = mask.dims();
    let offsets = conn.offsets();
    let mut current = mask.clone();
    for _ in 0..iterations {
        let mut next = current.clone();
        for i in current.iter_set() {
            let c = dims.coords(i);
            for &d in &offsets {
                if let Some(j) = dims.offset(c, d) {
                    next.set(j, true);
                }
            }
        }
        if next == current {
            break;
        }
        current = next;
    }
    current
}

/// Keeps a voxel only if it and all its in-volume neighbours are set and none
/// of its neighbours falls outside the volume, `iterations` times.
pub fn erode(mask: &Mask, iterations: usize, conn: Connectivity) -> Mask {
    let dims = mask.dims();
    let offsets = conn.offsets();
    let mut current = mask.clone();
    for _ in 0..iterations {
        let next = Mask::from_fn(dims, |i| {
            if !current.get(i) {
                return false;
            }
            let c = dims.coords(i);
            offsets
                .iter()
                .all(|&d| dims.offset(c, d).is_some_and(|j| current.get(j)))
        });
        if next == current {
            break;
        }
        current = next;
    }
    current
}

/// Dilation followed by erosion with the same iteration count.
pub fn close(mask: &Mask, iterations: usize, conn: Connectivity) -> Mask {
    erode(&dilate(mask, iterations, conn), iterations, conn)
}

/// Reconstruction by dilation: the union of the components of `limit` that
/// contain at least one `marker` voxel.
pub fn morph_reconstruct(marker: &Mask, limit: &Mask, conn: Connectivity) -> Result<Mask> {
    if marker.dims() != limit.dims() {
        return Err(Error::Shape(format!(
            "marker {} vs limit {}",
            marker.dims(),
            limit.dims()
        )));
    }
    if !marker.is_subset_of(limit) {
        return Err(Error::Precondition(
            "marker is not contained in limit".into(),
        ));
    }
    let dims = limit.dims();
    let offsets = conn.offsets();
    let mut out = marker.clone();
    let mut queue: VecDeque<usize> = marker.iter_set().collect();
    while let Some(i) = queue.pop_front() {
        let c = dims.coords(i);
        for &d in &offsets {
            if let Some(j) = dims.offset(c, d) {
                if limit.get(j) && !out.get(j) {
                    out.set(j, true);
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(out)
}
