//! Per-client cluster centers of each (modality, label) embedding set, and
//! their server-side concatenation into a global pool. Only centers and
//! integer sizes ever leave a client.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::Instance;
use crate::error::{check_dim, Error, Result};
use crate::finch::{finch_partition_at, PartitionLevel};
use crate::model::{gather, Modality, MultimodalModel};
use crate::numkit::Matrix;

/// Centers (K×d) and member counts of one clustered embedding set.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    pub centers: Matrix,
    pub sizes: Vec<usize>,
}

/// One client's clusters, indexed by modality and label. `None` marks a
/// (modality, label) pair the client holds no data for.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalClusters {
    pet: Vec<Option<ClusterSet>>,
    mri: Vec<Option<ClusterSet>>,
}

impl LocalClusters {
    pub fn empty(classes: usize) -> Self {
        Self {
            pet: vec![None; classes],
            mri: vec![None; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.pet.len()
    }

    pub fn get(&self, modality: Modality, label: usize) -> Option<&ClusterSet> {
        self.side(modality).get(label).and_then(Option::as_ref)
    }

    fn side(&self, modality: Modality) -> &[Option<ClusterSet>] {
        match modality {
            Modality::Pet => &self.pet,
            Modality::Mri => &self.mri,
        }
    }

    fn side_mut(&mut self, modality: Modality) -> &mut Vec<Option<ClusterSet>> {
        match modality {
            Modality::Pet => &mut self.pet,
            Modality::Mri => &mut self.mri,
        }
    }

    pub fn set(&mut self, modality: Modality, label: usize, clusters: ClusterSet) {
        let side = self.side_mut(modality);
        if side.len() <= label {
            side.resize(label + 1, None);
        }
        side[label] = Some(clusters);
    }
}

/// Embeds each (modality, label) group of a client's data with `model` and
/// clusters it.
pub fn compute_local_clusters(
    model: &MultimodalModel,
    data: &[Instance],
    classes: usize,
    level: PartitionLevel,
) -> Result<LocalClusters> {
    let mut out = LocalClusters::empty(classes);
    for m in Modality::ALL {
        let (idx, xs) = gather(data, m, model.input_dim(m))?;
        if idx.is_empty() {
            continue;
        }
        let z = model.encode_batch(m, &xs)?;
        for label in 0..classes {
            let rows: Vec<usize> = idx
                .iter()
                .enumerate()
                .filter(|(_, &i)| data[i].label == label)
                .map(|(r, _)| r)
                .collect();
            if rows.is_empty() {
                continue;
            }
            let r = finch_partition_at(&z.select_rows(&rows), level)?;
            out.set(
                m,
                label,
                ClusterSet {
                    centers: r.centers,
                    sizes: r.sizes,
                },
            );
        }
    }
    Ok(out)
}

/// Global centers for one (modality, label), with the contributing client
/// of each center.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub centers: Matrix,
    pub sizes: Vec<usize>,
    pub clients: Vec<usize>,
}

impl PoolEntry {
    fn empty(dim: usize) -> Self {
        Self {
            centers: Matrix::zeros(0, dim),
            sizes: Vec::new(),
            clients: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn total_size(&self) -> usize {
        self.sizes.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPool {
    dim: usize,
    pet: Vec<PoolEntry>,
    mri: Vec<PoolEntry>,
}

impl ClusterPool {
    pub fn empty(classes: usize, dim: usize) -> Self {
        Self {
            dim,
            pet: vec![PoolEntry::empty(dim); classes],
            mri: vec![PoolEntry::empty(dim); classes],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.pet.len()
    }

    /// Empty entry for labels beyond the pool's range.
    pub fn entry(&self, modality: Modality, label: usize) -> Option<&PoolEntry> {
        let side = match modality {
            Modality::Pet => &self.pet,
            Modality::Mri => &self.mri,
        };
        side.get(label).filter(|e| !e.is_empty())
    }

    pub fn entries(&self, modality: Modality) -> &[PoolEntry] {
        match modality {
            Modality::Pet => &self.pet,
            Modality::Mri => &self.mri,
        }
    }

    pub fn total_centers(&self, modality: Modality) -> usize {
        self.entries(modality).iter().map(PoolEntry::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_centers(Modality::Pet) + self.total_centers(Modality::Mri) == 0
    }
}

/// Concatenates client clusters per (modality, label) in ascending client
/// index. `locals[i]` is client `i`.
pub fn assemble_global_pool(locals: &[LocalClusters]) -> Result<ClusterPool> {
    let classes = locals.iter().map(LocalClusters::classes).max().unwrap_or(0);
    let mut dim = None;
    for l in locals {
        for m in Modality::ALL {
            for set in l.side(m).iter().flatten() {
                match dim {
                    None => dim = Some(set.centers.cols()),
                    Some(d) if d != set.centers.cols() => {
                        return Err(Error::Protocol(format!(
                            "center dimension {} disagrees with {d}",
                            set.centers.cols()
                        )))
                    }
                    _ => {}
                }
            }
        }
    }
    let mut pool = ClusterPool::empty(classes, dim.unwrap_or(0));
    for (client, l) in locals.iter().enumerate() {
        for m in Modality::ALL {
            for (label, set) in l.side(m).iter().enumerate() {
                let Some(set) = set else { continue };
                check_dim("cluster sizes", set.centers.rows(), set.sizes.len())?;
                let entry = match m {
                    Modality::Pet => &mut pool.pet[label],
                    Modality::Mri => &mut pool.mri[label],
                };
                entry.centers = entry.centers.vstack(&set.centers)?;
                entry.sizes.extend_from_slice(&set.sizes);
                entry.clients.extend(core::iter::repeat_n(client, set.sizes.len()));
            }
        }
    }
    Ok(pool)
}
