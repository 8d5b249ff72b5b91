//! Index container format (little-endian throughout):
//!
//! ```text
//! magic "USPINDEX" | u32 version | u8 kind {0 flat, 1 ensemble, 2 hierarchical}
//! u8 distance | u64 n | u64 d | u64 dataset checksum | kind payload
//! ```
//!
//! Models are embedded as length-prefixed model-file blobs. Partitions are
//! stored as `u32 m`, `n x i32` assignment and `(m + 1) x i64` lookup offsets;
//! member lists are rebuilt from the assignment and checked against the
//! offsets on load.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use super::{
    AnnIndex, EnsembleIndex, EnsembleQueryMode, FlatIndex, HierarchicalIndex, HierarchyNode, NodeKind, Partition,
};
use crate::binio::{Reader, Writer};
use crate::data::{Dataset, DistanceFn};
use crate::model::PartitionerModel;
use crate::{Error, Result};

const INDEX_MAGIC: &[u8; 8] = b"USPINDEX";
const INDEX_VERSION: u32 = 1;

/// Any of the learned index kinds, as read back from disk.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
pub enum LoadedIndex {
    Flat(FlatIndex),
    Ensemble(EnsembleIndex),
    Hierarchical(HierarchicalIndex),
}

impl LoadedIndex {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LoadedIndex::Flat(_) => "flat",
            LoadedIndex::Ensemble(_) => "ensemble",
            LoadedIndex::Hierarchical(_) => "hierarchical",
        }
    }

    fn inner(&self) -> &dyn AnnIndex {
        match self {
            LoadedIndex::Flat(i) => i,
            LoadedIndex::Ensemble(i) => i,
            LoadedIndex::Hierarchical(i) => i,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let ds = self.inner().dataset();
        let mut w = Writer::default();
        w.bytes(INDEX_MAGIC);
        w.u32(INDEX_VERSION);
        w.u8(match self {
            LoadedIndex::Flat(_) => 0,
            LoadedIndex::Ensemble(_) => 1,
            LoadedIndex::Hierarchical(_) => 2,
        });
        w.u8(self.inner().distance().tag());
        w.u64(ds.n() as u64);
        w.u64(ds.d() as u64);
        w.u64(ds.checksum());
        match self {
            LoadedIndex::Flat(i) => write_flat(&mut w, i),
            LoadedIndex::Ensemble(e) => {
                w.u32(e.members().len() as u32);
                w.u8(e.mode().tag());
                e.members().iter().for_each(|m| write_flat(&mut w, m));
                for row in e.weight_history() {
                    row.iter().for_each(|&v| w.f64(v));
                }
            }
            LoadedIndex::Hierarchical(h) => {
                w.u32(h.fanouts().len() as u32);
                h.fanouts().iter().for_each(|&f| w.u32(f as u32));
                w.u32(h.nodes().len() as u32);
                for node in h.nodes() {
                    w.u8(match node.kind {
                        NodeKind::Internal { .. } => 0,
                        NodeKind::Leaf { early: false } => 1,
                        NodeKind::Leaf { early: true } => 2,
                    });
                    w.u32(node.level as u32);
                    w.u64(node.leaf_offset as u64);
                    w.u64(node.span as u64);
                    w.u64(node.num_points as u64);
                    if let NodeKind::Internal { model, children } = &node.kind {
                        write_model(&mut w, model);
                        w.u32(children.len() as u32);
                        children.iter().for_each(|&c| w.u32(c as u32));
                    }
                }
                write_partition(&mut w, h.partition());
            }
        }
        w.buf
    }
}

impl From<FlatIndex> for LoadedIndex {
    fn from(i: FlatIndex) -> Self {
        LoadedIndex::Flat(i)
    }
}

impl From<EnsembleIndex> for LoadedIndex {
    fn from(i: EnsembleIndex) -> Self {
        LoadedIndex::Ensemble(i)
    }
}

impl From<HierarchicalIndex> for LoadedIndex {
    fn from(i: HierarchicalIndex) -> Self {
        LoadedIndex::Hierarchical(i)
    }
}

impl AnnIndex for LoadedIndex {
    fn dataset(&self) -> &Dataset {
        self.inner().dataset()
    }

    fn distance(&self) -> DistanceFn {
        self.inner().distance()
    }

    fn num_bins(&self) -> usize {
        self.inner().num_bins()
    }

    fn candidate_set(&self, q: &[f64], m_prime: usize) -> Result<Vec<u32>> {
        self.inner().candidate_set(q, m_prime)
    }
}

fn write_model(w: &mut Writer, model: &PartitionerModel) {
    let blob = model.to_bytes();
    w.u64(blob.len() as u64);
    w.bytes(&blob);
}

fn write_partition(w: &mut Writer, p: &Partition) {
    w.u32(p.m() as u32);
    p.assignment().iter().for_each(|&b| w.i32(b as i32));
    p.offsets().iter().for_each(|&o| w.i64(o as i64));
}

fn write_flat(w: &mut Writer, i: &FlatIndex) {
    write_model(w, i.model());
    write_partition(w, i.partition());
}

fn read_model(r: &mut Reader<'_>) -> Result<PartitionerModel> {
    let len = r.len_prefix(1)?;
    let at = r.offset();
    let blob = r.bytes(len)?;
    PartitionerModel::from_bytes(blob).map_err(|e| match e {
        Error::Format { offset, message } => Error::Format { offset: at + offset, message },
        other => other,
    })
}

fn read_partition(r: &mut Reader<'_>, n: usize) -> Result<Partition> {
    let at = r.offset();
    let m = r.u32()? as usize;
    if m == 0 {
        return Err(Error::Format { offset: at, message: "partition with zero bins".into() });
    }
    let mut assignment = Vec::with_capacity(n.min(r.remaining() / 4));
    for _ in 0..n {
        let at = r.offset();
        let b = r.i32()?;
        if b < 0 || b as usize >= m {
            return Err(Error::Format { offset: at, message: format!("bin id {b} out of range for m={m}") });
        }
        assignment.push(b as u32);
    }
    let offsets_at = r.offset();
    let mut offsets = Vec::with_capacity((m + 1).min(r.remaining() / 8));
    for _ in 0..=m {
        offsets.push(r.i64()?);
    }
    let p = Partition::from_assignment(assignment, m)?;
    if p.offsets().iter().zip(&offsets).any(|(&a, &b)| a as i64 != b) {
        return Err(Error::Format { offset: offsets_at, message: "lookup offsets disagree with assignment".into() });
    }
    Ok(p)
}

fn read_flat(r: &mut Reader<'_>, ds: &Arc<Dataset>, dist: DistanceFn) -> Result<FlatIndex> {
    let model = read_model(r)?;
    let partition = read_partition(r, ds.n())?;
    let at = r.offset();
    FlatIndex::from_parts(model, partition, ds.clone(), dist)
        .map_err(|e| Error::Format { offset: at, message: e.to_string() })
}

/// Decodes an index for `dataset`, which must be the dataset it was built on.
pub fn read_index(bytes: &[u8], dataset: Arc<Dataset>) -> Result<LoadedIndex> {
    let mut r = Reader::new(bytes);
    r.expect_magic(INDEX_MAGIC)?;
    let version = r.u32()?;
    if version != INDEX_VERSION {
        return Err(r.error(format!("unsupported index version {version}")));
    }
    let kind = r.u8()?;
    let dist_tag = r.u8()?;
    let dist = DistanceFn::from_tag(dist_tag).ok_or_else(|| r.error(format!("unknown distance tag {dist_tag}")))?;
    let n = r.u64()? as usize;
    let d = r.u64()? as usize;
    let checksum = r.u64()?;
    if n != dataset.n() || d != dataset.d() || checksum != dataset.checksum() {
        return Err(Error::StaleCache { expected: dataset.checksum(), found: checksum });
    }
    let index = match kind {
        0 => LoadedIndex::Flat(read_flat(&mut r, &dataset, dist)?),
        1 => {
            let e = r.u32()? as usize;
            let mode_tag = r.u8()?;
            let mode = EnsembleQueryMode::from_tag(mode_tag)
                .ok_or_else(|| r.error(format!("unknown ensemble mode {mode_tag}")))?;
            if e == 0 {
                return Err(r.error("ensemble with no members"));
            }
            let mut members = Vec::with_capacity(e.min(64));
            for _ in 0..e {
                members.push(read_flat(&mut r, &dataset, dist)?);
            }
            let mut history = Vec::with_capacity(e);
            for _ in 0..e {
                let mut row = Vec::with_capacity(n.min(r.remaining() / 8));
                for _ in 0..n {
                    row.push(r.f64()?);
                }
                history.push(row);
            }
            let at = r.offset();
            let ens = EnsembleIndex::new(members, history)
                .map_err(|e| Error::Format { offset: at, message: e.to_string() })?;
            LoadedIndex::Ensemble(ens.with_mode(mode))
        }
        2 => {
            let levels = r.u32()? as usize;
            let mut fanouts = Vec::with_capacity(levels.min(64));
            for _ in 0..levels {
                fanouts.push(r.u32()? as usize);
            }
            let count = r.u32()? as usize;
            let mut nodes = Vec::with_capacity(count.min(r.remaining() / 29 + 1));
            for _ in 0..count {
                let at = r.offset();
                let tag = r.u8()?;
                let level = r.u32()? as usize;
                let leaf_offset = r.u64()? as usize;
                let span = r.u64()? as usize;
                let num_points = r.u64()? as usize;
                let kind = match tag {
                    0 => {
                        let model = read_model(&mut r)?;
                        let c = r.u32()? as usize;
                        let mut children = Vec::with_capacity(c.min(r.remaining() / 4));
                        for _ in 0..c {
                            children.push(r.u32()? as usize);
                        }
                        NodeKind::Internal { model, children }
                    }
                    1 => NodeKind::Leaf { early: false },
                    2 => NodeKind::Leaf { early: true },
                    other => return Err(Error::Format { offset: at, message: format!("unknown node tag {other}") }),
                };
                nodes.push(HierarchyNode { level, leaf_offset, span, num_points, kind });
            }
            let partition = read_partition(&mut r, n)?;
            let at = r.offset();
            let h = HierarchicalIndex::from_parts(fanouts, nodes, partition, dataset, dist)
                .map_err(|e| Error::Format { offset: at, message: e.to_string() })?;
            LoadedIndex::Hierarchical(h)
        }
        other => return Err(Error::Format { offset: 12, message: format!("unknown index kind {other}") }),
    };
    if !r.is_empty() {
        return Err(r.error(format!("{} trailing bytes after index", r.remaining())));
    }
    Ok(index)
}

pub fn save_index(path: impl AsRef<Path>, index: &LoadedIndex) -> Result<()> {
    fs::write(path, index.to_bytes())?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>, dataset: Arc<Dataset>) -> Result<LoadedIndex> {
    read_index(&fs::read(path)?, dataset)
}
