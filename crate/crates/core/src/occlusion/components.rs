//! Connected-component labeling for 2D masks and 3D label volumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Volume3D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            _ => Err(Error::invalid(format!("connectivity must be 4 or 8, got {n}"))),
        }
    }

    pub fn count(self) -> u32 {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

/// Component labels of a 2D mask: 0 for background, `1..=count` otherwise.
///
/// Labels are numbered in raster order of each component's first pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentMap {
    pub rows: usize,
    pub cols: usize,
    pub labels: Vec<u32>,
    pub count: usize,
}

impl ComponentMap {
    /// Pixel indices of every component, `result[k]` for label `k + 1`.
    pub fn pixel_lists(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (p, &l) in self.labels.iter().enumerate() {
            if l > 0 {
                out[l as usize - 1].push(p);
            }
        }
        out
    }
}

struct DisjointSets {
    parent: Vec<u32>,
}

impl DisjointSets {
    fn new() -> Self {
        // slot 0 is the background
        Self { parent: vec![0] }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let next = self.parent[x as usize];
            self.parent[x as usize] = self.parent[next as usize];
            x = next;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Two-pass union-find labeling of `mask` (`true` is foreground).
pub fn connected_components(mask: &[bool], rows: usize, cols: usize, conn: Connectivity) -> ComponentMap {
    assert_eq!(mask.len(), rows * cols, "mask length does not match {rows}x{cols}");
    let mut labels = vec![0u32; mask.len()];
    let mut sets = DisjointSets::new();

    for r in 0..rows {
        for c in 0..cols {
            let p = r * cols + c;
            if !mask[p] {
                continue;
            }
            let mut neighbors = [0u32; 4];
            let mut n = 0;
            let mut push = |q: usize| {
                if labels[q] != 0 {
                    neighbors[n] = labels[q];
                    n += 1;
                }
            };
            if c > 0 {
                push(p - 1);
            }
            if r > 0 {
                push(p - cols);
                if conn == Connectivity::Eight {
                    if c > 0 {
                        push(p - cols - 1);
                    }
                    if c + 1 < cols {
                        push(p - cols + 1);
                    }
                }
            }
            labels[p] = if n == 0 {
                sets.make()
            } else {
                let first = neighbors[0];
                for &other in &neighbors[1..n] {
                    sets.union(first, other);
                }
                first
            };
        }
    }

    // compact roots to 1..=count in raster order of first appearance
    let mut compact = vec![0u32; sets.parent.len()];
    let mut count = 0u32;
    for l in labels.iter_mut() {
        if *l == 0 {
            continue;
        }
        let root = sets.find(*l) as usize;
        if compact[root] == 0 {
            count += 1;
            compact[root] = count;
        }
        *l = compact[root];
    }
    ComponentMap {
        rows,
        cols,
        labels,
        count: count as usize,
    }
}

/// 26-connected components of a binary label volume.
///
/// Returns per-voxel component ids (0 background, `1..=count`) and the voxel
/// count of each component (`sizes[k]` for id `k + 1`).
pub fn label_volume_26(labels: &Volume3D) -> (Vec<u32>, Vec<usize>) {
    let d = labels.dims();
    let data = labels.data();
    let mut ids = vec![0u32; data.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();

    for start in 0..data.len() {
        if data[start] == 0.0 || ids[start] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        let mut size = 0usize;
        ids[start] = id;
        stack.push(start);
        while let Some(p) = stack.pop() {
            size += 1;
            let x = (p % d.nx) as i64;
            let y = ((p / d.nx) % d.ny) as i64;
            let z = (p / (d.nx * d.ny)) as i64;
            for dz in -1..=1 {
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (qx, qy, qz) = (x + dx, y + dy, z + dz);
                        if !d.contains(qx, qy, qz) {
                            continue;
                        }
                        let q = d.index(qx as usize, qy as usize, qz as usize);
                        if data[q] != 0.0 && ids[q] == 0 {
                            ids[q] = id;
                            stack.push(q);
                        }
                    }
                }
            }
        }
        sizes.push(size);
    }
    (ids, sizes)
}
