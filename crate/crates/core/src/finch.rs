//! First-neighbor clustering (FINCH).
//!
//! Each point is linked to its nearest other point; the connected components
//! of that graph form a partition. Re-running on the cluster means yields a
//! hierarchy of successively coarser partitions, ending at one cluster.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// One level of the hierarchy, expressed over the original points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub assignments: Vec<usize>,
    pub num_clusters: usize,
}

/// Which hierarchy level to export centers and sizes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PartitionLevel {
    /// The finest partition.
    #[default]
    First,
    /// The coarsest partition (always a single cluster).
    Last,
    /// A zero-based level, clamped to the deepest available.
    Index(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinchResult {
    /// Cluster id per point at the exported level.
    pub assignments: Vec<usize>,
    /// Mean of each cluster's members, K×d.
    pub centers: Matrix,
    pub sizes: Vec<usize>,
    /// Every partition from finest to coarsest.
    pub hierarchy: Vec<Partition>,
    /// Index into `hierarchy` of the exported level.
    pub level: usize,
}

impl FinchResult {
    pub fn num_clusters(&self) -> usize {
        self.sizes.len()
    }
}

/// Index of each point's nearest other point (Euclidean, smallest index on
/// ties). A lone point is its own neighbor.
pub fn first_neighbors(points: &Matrix) -> Result<Vec<usize>> {
    let n = points.rows();
    if n == 0 {
        return Err(Error::EmptyInput("first_neighbors points"));
    }
    if !points.all_finite() {
        return Err(Error::NonFinite("first_neighbors points"));
    }
    let mut out = vec![0usize; n];
    for (i, slot) in out.iter_mut().enumerate() {
        let pi = points.row(i);
        let mut best = i;
        let mut best_d = f64::INFINITY;
        for j in 0..n {
            if j == i {
                continue;
            }
            let d: f64 = pi
                .iter()
                .zip(points.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        *slot = best;
    }
    Ok(out)
}

/// Connected components of the graph with an edge `i - neighbors[i]`.
/// Component ids are numbered by each component's smallest member.
pub fn neighbor_components(neighbors: &[usize]) -> Partition {
    let n = neighbors.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, &j) in neighbors.iter().enumerate() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            parent[hi] = lo;
        }
    }
    let mut id_of_root = vec![usize::MAX; n];
    let mut assignments = vec![0; n];
    let mut next = 0;
    for i in 0..n {
        let r = find(&mut parent, i);
        if id_of_root[r] == usize::MAX {
            id_of_root[r] = next;
            next += 1;
        }
        assignments[i] = id_of_root[r];
    }
    Partition {
        assignments,
        num_clusters: next,
    }
}

/// Per-cluster means and member counts.
pub fn cluster_means(points: &Matrix, assignments: &[usize], k: usize) -> (Matrix, Vec<usize>) {
    let d = points.cols();
    let mut sums = Matrix::zeros(k, d);
    let mut sizes = vec![0usize; k];
    for (i, &c) in assignments.iter().enumerate() {
        sizes[c] += 1;
        for (s, v) in sums.row_mut(c).iter_mut().zip(points.row(i)) {
            *s += v;
        }
    }
    for (c, &s) in sizes.iter().enumerate() {
        let inv = 1.0 / s as f64;
        sums.row_mut(c).iter_mut().for_each(|v| *v *= inv);
    }
    (sums, sizes)
}

/// Runs the full hierarchy and exports the finest partition.
pub fn finch_partition(points: &Matrix) -> Result<FinchResult> {
    finch_partition_at(points, PartitionLevel::First)
}

pub fn finch_partition_at(points: &Matrix, level: PartitionLevel) -> Result<FinchResult> {
    if points.rows() == 0 {
        return Err(Error::EmptyInput("finch points"));
    }
    let first = neighbor_components(&first_neighbors(points)?);
    let mut hierarchy = vec![first];
    loop {
        let current = &hierarchy[hierarchy.len() - 1];
        if current.num_clusters <= 1 {
            break;
        }
        let (means, _) = cluster_means(points, &current.assignments, current.num_clusters);
        let merged = neighbor_components(&first_neighbors(&means)?);
        if merged.num_clusters >= current.num_clusters {
            break;
        }
        let assignments = current
            .assignments
            .iter()
            .map(|&c| merged.assignments[c])
            .collect();
        hierarchy.push(Partition {
            assignments,
            num_clusters: merged.num_clusters,
        });
    }
    let level = match level {
        PartitionLevel::First => 0,
        PartitionLevel::Last => hierarchy.len() - 1,
        PartitionLevel::Index(i) => i.min(hierarchy.len() - 1),
    };
    let chosen = &hierarchy[level];
    let (centers, sizes) = cluster_means(points, &chosen.assignments, chosen.num_clusters);
    Ok(FinchResult {
        assignments: chosen.assignments.clone(),
        centers,
        sizes,
        hierarchy,
        level,
    })
}
