//! Binary voxel encoding of gripper-frame clouds and exact duplicate removal.
//!
//! Two features are the same when their occupancy grids are bit-identical. A 64-bit digest
//! buckets grids; membership inside a bucket is always settled by a full comparison, so digest
//! collisions never merge different grids.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::Xxh3;

use crate::error::{Error, Result};
use crate::geometry::{GraspPose, GridDims, GripperSpec};
use crate::region::GripperFrameCloud;

/// `a×b×c` occupancy bits packed into 64-bit words using the `.gfa` bit order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OccupancyGrid {
    dims: GridDims,
    words: Vec<u64>,
    occupied: usize,
}

impl OccupancyGrid {
    fn zeroed(dims: GridDims) -> Self {
        OccupancyGrid { dims, words: vec![0; dims.voxel_count().div_ceil(64)], occupied: 0 }
    }

    fn set_bit(&mut self, index: usize) {
        let (w, b) = (index / 64, index % 64);
        if self.words[w] & (1 << b) == 0 {
            self.words[w] |= 1 << b;
            self.occupied += 1;
        }
    }

    fn nonempty(self) -> Result<Self> {
        if self.occupied == 0 {
            Err(Error::InvalidInput("occupancy grid has no occupied voxel".into()))
        } else {
            Ok(self)
        }
    }

    /// Grid with the listed voxels `(i_u, i_v, i_t)` set.
    pub fn from_voxels(
        dims: GridDims,
        voxels: impl IntoIterator<Item = (usize, usize, usize)>,
    ) -> Result<Self> {
        let mut grid = OccupancyGrid::zeroed(dims);
        for (iu, iv, it) in voxels {
            if iu >= dims.a || iv >= dims.b || it >= dims.c {
                return Err(Error::InvalidInput(format!(
                    "voxel ({iu}, {iv}, {it}) outside {dims}"
                )));
            }
            grid.set_bit(dims.bit_index(iu, iv, it));
        }
        grid.nonempty()
    }

    /// Grid from one bit per voxel in linear bit order.
    pub fn from_bits(dims: GridDims, bits: &[bool]) -> Result<Self> {
        if bits.len() != dims.voxel_count() {
            return Err(Error::InvalidInput(format!(
                "{} bits for a {dims} grid",
                bits.len()
            )));
        }
        let mut grid = OccupancyGrid::zeroed(dims);
        for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
            grid.set_bit(i);
        }
        grid.nonempty()
    }

    /// Grid from `.gfa` packed bytes (LSB-first, zero padding).
    pub fn from_packed(dims: GridDims, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != dims.packed_len() {
            return Err(Error::Format(format!(
                "{} packed bytes for a {dims} grid",
                bytes.len()
            )));
        }
        let n = dims.voxel_count();
        let mut grid = OccupancyGrid::zeroed(dims);
        for (i, chunk) in bytes.chunks(8).enumerate() {
            let mut word = [0u8; 8];
            word[..chunk.len()].copy_from_slice(chunk);
            grid.words[i] = u64::from_le_bytes(word);
        }
        if n % 64 != 0 && grid.words.last().unwrap() >> (n % 64) != 0 {
            return Err(Error::Format("nonzero padding bits".into()));
        }
        grid.occupied = grid.words.iter().map(|w| w.count_ones() as usize).sum();
        grid.nonempty()
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied
    }

    pub fn get(&self, iu: usize, iv: usize, it: usize) -> bool {
        self.bit(self.dims.bit_index(iu, iv, it))
    }

    pub fn bit(&self, index: usize) -> bool {
        self.words[index / 64] >> (index % 64) & 1 == 1
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn packed_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(self.dims.packed_len());
        out
    }
}

fn axis_index(coord: f64, offset: f64, resolution: f64, count: usize) -> Option<usize> {
    let raw = ((coord + offset) / resolution).floor();
    if raw < 0.0 {
        return None;
    }
    let i = raw as usize;
    // a coordinate just below the upper face can round up to `count` in the division
    Some(if i == count { count - 1 } else { i }).filter(|&i| i < count)
}

/// Binary occupancy of a region: a voxel is set iff at least one point falls in it.
pub fn voxelize(region: &GripperFrameCloud, spec: &GripperSpec) -> Result<OccupancyGrid> {
    let dims = spec.dims();
    let r = spec.resolution();
    let mut grid = OccupancyGrid::zeroed(dims);
    for p in region.points() {
        if !spec.contains(p) {
            return Err(Error::invariant(
                "voxelize",
                format!("point {p:?} outside the closing volume"),
            ));
        }
        let idx = (
            axis_index(p.x, spec.width() / 2.0, r, dims.a),
            axis_index(p.y, spec.height() / 2.0, r, dims.b),
            axis_index(p.z, 0.0, r, dims.c),
        );
        let (Some(iu), Some(iv), Some(it)) = idx else {
            return Err(Error::invariant(
                "voxelize",
                format!("point {p:?} maps outside the {dims} grid"),
            ));
        };
        grid.set_bit(dims.bit_index(iu, iv, it));
    }
    grid.nonempty().map_err(|_| Error::invariant("voxelize", "empty region"))
}

/// Exact equality of two grids of the same dimensions.
pub fn grids_identical(a: &OccupancyGrid, b: &OccupancyGrid) -> Result<bool> {
    if a.dims != b.dims {
        return Err(Error::DimsMismatch { left: a.dims.as_tuple(), right: b.dims.as_tuple() });
    }
    Ok(a.occupied == b.occupied && a.words == b.words)
}

/// Stable 64-bit digest of `(dims, packed bytes)`. Identical grids always share a key; the key
/// does not depend on the process or platform.
pub fn canonical_key(grid: &OccupancyGrid) -> u64 {
    let mut h = Xxh3::new();
    for d in [grid.dims.a, grid.dims.b, grid.dims.c] {
        h.update(&(d as u16).to_le_bytes());
    }
    h.update(&grid.packed_bytes());
    h.digest()
}

/// Where a duplicate came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRef {
    pub object: String,
    pub pose: GraspPose,
}

/// One distinct grid with its first-seen region and every contributor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub grid: OccupancyGrid,
    pub exemplar: GripperFrameCloud,
    pub sources: Vec<SourceRef>,
    pub canonical_key: u64,
    /// Position of the exemplar in the input stream.
    pub first_seen: usize,
}

/// Hash-bucketed set of distinct grids.
///
/// Entries keep insertion order; [`DedupIndex::merge`] appends another index's entries in its
/// own order, so partitions built in parallel and merged left to right give the same result as
/// one sequential pass.
pub struct DedupIndex<T> {
    dims: Option<GridDims>,
    buckets: HashMap<u64, Vec<usize>>,
    entries: Vec<Entry<T>>,
}

pub struct Entry<T> {
    pub grid: OccupancyGrid,
    pub key: u64,
    /// Payloads of every inserted duplicate, in insertion order; the first is the exemplar.
    pub members: Vec<T>,
}

impl<T> Default for DedupIndex<T> {
    fn default() -> Self {
        DedupIndex { dims: None, buckets: HashMap::new(), entries: Vec::new() }
    }
}

impl<T> DedupIndex<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `grid` with a precomputed `key`. Returns the entry slot and whether it is new.
    pub fn insert(&mut self, grid: OccupancyGrid, key: u64, payload: T) -> Result<(usize, bool)> {
        match self.dims {
            None => self.dims = Some(grid.dims),
            Some(d) if d != grid.dims => {
                return Err(Error::DimsMismatch { left: d.as_tuple(), right: grid.dims.as_tuple() })
            }
            Some(_) => {}
        }
        let bucket = self.buckets.entry(key).or_default();
        for &slot in bucket.iter() {
            if grids_identical(&self.entries[slot].grid, &grid)? {
                self.entries[slot].members.push(payload);
                return Ok((slot, false));
            }
        }
        let slot = self.entries.len();
        bucket.push(slot);
        self.entries.push(Entry { grid, key, members: vec![payload] });
        Ok((slot, true))
    }

    pub fn merge(&mut self, other: DedupIndex<T>) -> Result<()> {
        for entry in other.entries {
            let mut members = entry.members.into_iter();
            let first = members.next().expect("entries have at least one member");
            let (slot, _) = self.insert(entry.grid, entry.key, first)?;
            self.entries[slot].members.extend(members);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn into_entries(self) -> Vec<Entry<T>> {
        self.entries
    }
}

/// Voxelizes every region in parallel, preserving input order.
pub fn voxelize_all(
    regions: &[GripperFrameCloud],
    spec: &GripperSpec,
) -> Result<Vec<(OccupancyGrid, u64)>> {
    regions
        .par_iter()
        .map(|r| voxelize(r, spec).map(|g| {
            let k = canonical_key(&g);
            (g, k)
        }))
        .collect()
}

const PARTITION: usize = 4096;

/// Builds the distinct-grid index over `(grid, key, payload)` triples. Partitions are indexed
/// in parallel and merged in input order.
pub fn build_index<T: Send>(items: Vec<(OccupancyGrid, u64, T)>) -> Result<DedupIndex<T>> {
    let mut parts: Vec<Vec<(OccupancyGrid, u64, T)>> = Vec::new();
    let mut iter = items.into_iter().peekable();
    while iter.peek().is_some() {
        parts.push(iter.by_ref().take(PARTITION).collect());
    }
    let partials = parts
        .into_par_iter()
        .map(|part| {
            let mut index = DedupIndex::new();
            for (grid, key, payload) in part {
                index.insert(grid, key, payload)?;
            }
            Ok(index)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut merged = DedupIndex::new();
    for partial in partials {
        merged.merge(partial)?;
    }
    Ok(merged)
}

/// One record per distinct grid, sorted by `(occupied_count, canonical_key, first_seen)`.
pub fn dedup(regions: Vec<GripperFrameCloud>, spec: &GripperSpec) -> Result<Vec<FeatureRecord>> {
    let grids = voxelize_all(&regions, spec)?;
    dedup_voxelized(regions, grids)
}

/// [`dedup`] on regions whose grids and keys were already computed.
pub fn dedup_voxelized(
    regions: Vec<GripperFrameCloud>,
    grids: Vec<(OccupancyGrid, u64)>,
) -> Result<Vec<FeatureRecord>> {
    let items = regions
        .into_iter()
        .zip(grids)
        .enumerate()
        .map(|(i, (region, (grid, key)))| (grid, key, (i, region)))
        .collect();
    let index = build_index(items)?;
    let mut records: Vec<FeatureRecord> = index
        .into_entries()
        .into_iter()
        .map(|entry| {
            let mut members = entry.members.into_iter();
            let (first_seen, exemplar) = members.next().unwrap();
            let mut sources = vec![SourceRef {
                object: exemplar.source_object().to_owned(),
                pose: *exemplar.pose(),
            }];
            sources.extend(members.map(|(_, r)| SourceRef {
                object: r.source_object().to_owned(),
                pose: *r.pose(),
            }));
            FeatureRecord { grid: entry.grid, exemplar, sources, canonical_key: entry.key, first_seen }
        })
        .collect();
    records.sort_by_key(|r| (r.grid.occupied_count(), r.canonical_key, r.first_seen));
    Ok(records)
}
