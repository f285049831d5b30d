use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::Xxh3;

use super::config::PipelineConfig;
use super::stats::{report_stats, PlaneCounts, StageTimings, StatsReport};
use crate::assembly::{classify_plane, layout, AssembledObject, Plane, PlaneClassification};
use crate::dedup::{
    canonical_key, dedup_voxelized, voxelize, voxelize_all, FeatureRecord, OccupancyGrid,
    SourceRef,
};
use crate::error::{Error, Result};
use crate::geometry::{
    derive_seed, estimate_normals, sample_grasp_candidates, sample_surface_points, GridDims,
    GripperSpec,
};
use crate::model_io::{
    load_mesh, load_point_cloud, read_text, write_file, write_grid_set, write_manifest,
    write_ply_ascii, GridRecord, Mesh, PointCloud, PoseEntry,
};
use crate::region::{extract_region_prefiltered, filter_nonempty, GripperFrameCloud};

pub const NAIVE_GRID_SET: &str = "naive.gfa";
pub const UNIQUE_GRID_SET: &str = "unique.gfa";
pub const COMPOSITE_PLY: &str = "composite.ply";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const STATS_JSON: &str = "stats.json";
pub const REGIONS_JSON: &str = "regions.json";
pub const FEATURES_JSON: &str = "features.json";

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectGeometry {
    Mesh(Mesh),
    Cloud(PointCloud),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedObject {
    pub name: String,
    pub path: PathBuf,
    pub geometry: ObjectGeometry,
    /// Digest of the geometry alone; objects with identical geometry share it.
    pub content_key: u64,
}

fn geometry_key(geometry: &ObjectGeometry) -> u64 {
    fn put_points<'a>(h: &mut Xxh3, coords: impl Iterator<Item = &'a f64>) {
        for c in coords {
            h.update(&c.to_bits().to_le_bytes());
        }
    }
    let mut h = Xxh3::new();
    match geometry {
        ObjectGeometry::Mesh(mesh) => {
            put_points(&mut h, mesh.vertices().iter().flat_map(|p| p.iter()));
            h.update(b"triangles");
            for i in mesh.triangles().iter().flatten() {
                h.update(&i.to_le_bytes());
            }
        }
        ObjectGeometry::Cloud(cloud) => {
            put_points(&mut h, cloud.points().iter().flat_map(|p| p.iter()));
            if let Some(normals) = cloud.normals() {
                put_points(&mut h, normals.iter().flat_map(|n| n.iter()));
            }
            h.update(b"cloud");
        }
    }
    h.digest()
}

/// Reads `.obj` meshes and `.ply` clouds. Fails on the first unreadable file in list order.
pub fn load_objects(files: &[PathBuf]) -> Result<Vec<LoadedObject>> {
    files
        .par_iter()
        .map(|path| {
            let geometry = match path.extension().and_then(|e| e.to_str()) {
                Some("obj") => ObjectGeometry::Mesh(load_mesh(path)?),
                Some("ply") => ObjectGeometry::Cloud(load_point_cloud(path)?),
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "{}: unsupported object file (expected .obj or .ply)",
                        path.display()
                    )))
                }
            };
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            Ok(LoadedObject {
                content_key: geometry_key(&geometry),
                name,
                path: path.clone(),
                geometry,
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Seed for everything random about one object. It depends on the geometry, not on the file
/// name or list position, so duplicated objects produce identical candidates and regions.
pub fn object_seed(seed: u64, object: &LoadedObject) -> u64 {
    derive_seed(seed, object.content_key)
}

/// Surface cloud with normals plus grasp candidates for one object.
pub struct PreparedObject {
    pub cloud: PointCloud,
    pub candidates: crate::geometry::CandidateSet,
}

pub fn prepare_object(object: &LoadedObject, config: &PipelineConfig) -> Result<PreparedObject> {
    let seed = object_seed(config.seed, object);
    let cloud = match &object.geometry {
        ObjectGeometry::Mesh(mesh) => {
            let surface = sample_surface_points(mesh, config.samples_per_object, derive_seed(seed, 0))?;
            estimate_normals(&surface, config.k_neighbors)?
        }
        ObjectGeometry::Cloud(cloud) if cloud.normals().is_some() => cloud.clone(),
        ObjectGeometry::Cloud(cloud) => estimate_normals(cloud, config.k_neighbors)?,
    };
    let candidates = sample_grasp_candidates(
        &cloud,
        config.grasps_per_object,
        &config.gripper,
        derive_seed(seed, 1),
    )?;
    Ok(PreparedObject { cloud, candidates })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractCounts {
    pub objects: usize,
    pub candidates: usize,
    pub candidates_skipped: usize,
    pub regions_empty: usize,
    pub regions_extracted: usize,
    pub regions_below_min_points: usize,
}

pub struct Extraction {
    pub regions: Vec<GripperFrameCloud>,
    pub counts: ExtractCounts,
}

/// Samples candidates on every object and extracts their regions, in object order then
/// candidate order.
pub fn extract_objects(
    objects: &[LoadedObject],
    config: &PipelineConfig,
    timings: &mut StageTimings,
) -> Result<Extraction> {
    let spec = config.gripper;
    let start = Instant::now();
    let prepared = objects
        .par_iter()
        .map(|o| prepare_object(o, config).map_err(|e| e.in_file(&o.path)))
        .collect::<Result<Vec<_>>>()?;
    timings.sample_ms = ms(start);

    let start = Instant::now();
    let per_object: Vec<Vec<Option<GripperFrameCloud>>> = objects
        .par_iter()
        .zip(&prepared)
        .map(|(o, prep)| {
            prep.candidates
                .poses
                .par_iter()
                .map(|pose| extract_region_prefiltered(&prep.cloud, pose, &spec, &o.name))
                .collect()
        })
        .collect();
    let candidates: usize = prepared.iter().map(|p| p.candidates.poses.len()).sum();
    let outcome = filter_nonempty(per_object.into_iter().flatten());
    let regions_extracted = outcome.kept.len();
    let (regions, small): (Vec<_>, Vec<_>) =
        outcome.kept.into_iter().partition(|r| r.len() >= config.min_points);
    timings.extract_ms = ms(start);

    Ok(Extraction {
        regions,
        counts: ExtractCounts {
            objects: objects.len(),
            candidates,
            candidates_skipped: prepared.iter().map(|p| p.candidates.skipped).sum(),
            regions_empty: outcome.dropped,
            regions_extracted,
            regions_below_min_points: small.len(),
        },
    })
}

fn record_metadata(object: &str, pose: &crate::geometry::GraspPose, occupied: usize, sources: usize) -> String {
    serde_json::json!({
        "source_object": object,
        "pose": PoseEntry::from_transform(&pose.frame),
        "occupied_count": occupied,
        "source_count": sources,
    })
    .to_string()
}

pub struct DedupOutput {
    pub records: Vec<FeatureRecord>,
    pub grids_total: usize,
    /// Grid-set file with one record per input region.
    pub naive: Vec<u8>,
    /// Grid-set file with one record per unique grid.
    pub unique: Vec<u8>,
}

pub fn dedup_stage(regions: Vec<GripperFrameCloud>, spec: &GripperSpec) -> Result<DedupOutput> {
    let grids = voxelize_all(&regions, spec)?;
    let naive_records: Vec<GridRecord> = regions
        .iter()
        .zip(&grids)
        .map(|(r, (g, _))| GridRecord {
            metadata: record_metadata(r.source_object(), r.pose(), g.occupied_count(), 1),
            bits: g.packed_bytes(),
        })
        .collect();
    let naive = write_grid_set(spec.dims(), &naive_records)?;
    drop(naive_records);

    let grids_total = regions.len();
    let records = dedup_voxelized(regions, grids)?;
    let unique = write_grid_set(spec.dims(), &unique_grid_records(&records))?;
    Ok(DedupOutput { records, grids_total, naive, unique })
}

pub fn unique_grid_records(records: &[FeatureRecord]) -> Vec<GridRecord> {
    records
        .iter()
        .map(|r| GridRecord {
            metadata: record_metadata(
                r.exemplar.source_object(),
                r.exemplar.pose(),
                r.grid.occupied_count(),
                r.sources.len(),
            ),
            bits: r.grid.packed_bytes(),
        })
        .collect()
}

pub fn classify_records(records: &[FeatureRecord]) -> Vec<PlaneClassification> {
    records.par_iter().map(|r| classify_plane(&r.grid)).collect()
}

pub fn plane_counts(classes: &[PlaneClassification]) -> PlaneCounts {
    let count = |p: Plane| classes.iter().filter(|c| c.plane == p).count();
    PlaneCounts { uv: count(Plane::Uv), ut: count(Plane::Ut), vt: count(Plane::Vt) }
}

/// Runs `f` on a pool of exactly `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub naive_grid_set: PathBuf,
    pub unique_grid_set: PathBuf,
    pub composite: PathBuf,
    pub manifest: PathBuf,
    pub stats: PathBuf,
}

impl OutputPaths {
    pub fn in_dir(dir: &Path) -> Self {
        OutputPaths {
            naive_grid_set: dir.join(NAIVE_GRID_SET),
            unique_grid_set: dir.join(UNIQUE_GRID_SET),
            composite: dir.join(COMPOSITE_PLY),
            manifest: dir.join(MANIFEST_JSON),
            stats: dir.join(STATS_JSON),
        }
    }
}

pub struct PipelineOutput {
    pub paths: OutputPaths,
    pub stats: StatsReport,
    pub assembled: AssembledObject,
    pub records: Vec<FeatureRecord>,
}

pub fn dump_regions(dir: &Path, regions: &[GripperFrameCloud]) -> Result<()> {
    for (i, r) in regions.iter().enumerate() {
        let cloud = PointCloud::new(r.points().to_vec());
        write_file(
            &dir.join(format!("{i:06}_{}.ply", r.source_object())),
            write_ply_ascii(&cloud),
        )?;
    }
    Ok(())
}

pub fn dump_panels(dir: &Path, assembled: &AssembledObject) -> Result<()> {
    let pts = assembled.composite_cloud.points();
    for plane in Plane::ALL {
        let panel: Vec<_> = assembled
            .placements
            .iter()
            .zip(assembled.point_ranges())
            .filter(|(p, _)| p.classification.plane == plane)
            .flat_map(|(_, range)| pts[range].iter().copied())
            .collect();
        write_file(
            &dir.join(format!("panel_{plane}.ply")),
            write_ply_ascii(&PointCloud::new(panel)),
        )?;
    }
    Ok(())
}

/// Writes the composite cloud and manifest, returning their paths.
pub fn write_assembly(dir: &Path, assembled: &AssembledObject) -> Result<(PathBuf, PathBuf)> {
    let paths = OutputPaths::in_dir(dir);
    write_file(&paths.composite, write_ply_ascii(&assembled.composite_cloud))?;
    write_file(&paths.manifest, write_manifest(assembled)?)?;
    Ok((paths.composite, paths.manifest))
}

/// Full pipeline: load, sample, extract, deduplicate, classify, assemble, write.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate()?;
    with_workers(config.workers, || run_inner(config))?
}

fn run_inner(config: &PipelineConfig) -> Result<PipelineOutput> {
    let total = Instant::now();
    let spec = config.gripper;
    let mut timings = StageTimings::default();

    let start = Instant::now();
    let files = config.object_files()?;
    let objects = load_objects(&files)?;
    timings.load_ms = ms(start);

    let extraction = extract_objects(&objects, config, &mut timings)?;
    let out_dir = &config.output_dir;
    if config.dump_regions {
        dump_regions(&out_dir.join("regions"), &extraction.regions)?;
    }

    let start = Instant::now();
    let dedup = dedup_stage(extraction.regions, &spec)?;
    timings.dedup_ms = ms(start);

    let start = Instant::now();
    let classes = classify_records(&dedup.records);
    timings.classify_ms = ms(start);

    let start = Instant::now();
    let assembled = layout(&dedup.records, &classes, &spec, config.spacing())?;
    timings.assemble_ms = ms(start);

    let start = Instant::now();
    let paths = OutputPaths::in_dir(out_dir);
    write_file(&paths.naive_grid_set, &dedup.naive)?;
    write_file(&paths.unique_grid_set, &dedup.unique)?;
    write_assembly(out_dir, &assembled)?;
    if config.dump_panels {
        dump_panels(&out_dir.join("panels"), &assembled)?;
    }
    timings.write_ms = ms(start);

    let counts = &extraction.counts;
    let mut stats = StatsReport {
        objects: counts.objects,
        workers: config.workers,
        candidates: counts.candidates,
        candidates_skipped: counts.candidates_skipped,
        regions_empty: counts.regions_empty,
        regions_extracted: counts.regions_extracted,
        regions_below_min_points: counts.regions_below_min_points,
        grids_total: dedup.grids_total,
        grids_unique: dedup.records.len(),
        naive_bytes: dedup.naive.len() as u64,
        unique_bytes: dedup.unique.len() as u64,
        composite_points: assembled.composite_cloud.len(),
        plane_counts: plane_counts(&classes),
        ..Default::default()
    };
    check_conservation(&stats, &dedup.records)?;
    timings.total_ms = ms(total);
    stats.timings = timings;
    stats.finalize();
    let (_, json) = report_stats(&stats)?;
    write_file(&paths.stats, json)?;

    Ok(PipelineOutput { paths, stats, assembled, records: dedup.records })
}

/// Every extracted region ends up either as a source of exactly one record or below
/// `min_points`.
pub fn check_conservation(stats: &StatsReport, records: &[FeatureRecord]) -> Result<()> {
    let sources: usize = records.iter().map(|r| r.sources.len()).sum();
    if stats.regions_extracted != sources + stats.regions_below_min_points {
        return Err(Error::invariant(
            "dedup",
            format!(
                "{} regions extracted but {} sources + {} below min_points",
                stats.regions_extracted, sources, stats.regions_below_min_points
            ),
        ));
    }
    if stats.candidates != stats.regions_empty + stats.regions_extracted {
        return Err(Error::invariant(
            "extract",
            format!(
                "{} candidates but {} empty + {} extracted",
                stats.candidates, stats.regions_empty, stats.regions_extracted
            ),
        ));
    }
    Ok(())
}

/// Stage file written by `extract`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionsFile {
    pub gripper: GripperSpec,
    pub counts: ExtractCounts,
    pub regions: Vec<GripperFrameCloud>,
}

impl RegionsFile {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file: RegionsFile = serde_json::from_str(&read_text(path)?)
            .map_err(|e| Error::Serialization(e.to_string()).in_file(path))?;
        for r in &file.regions {
            r.validate(&file.gripper).map_err(|e| e.in_file(path))?;
        }
        Ok(file)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub canonical_key: String,
    pub first_seen: usize,
    pub exemplar: GripperFrameCloud,
    pub sources: Vec<SourceRef>,
}

/// Stage file written by `dedup`: the unique features with their exemplar clouds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturesFile {
    pub gripper: GripperSpec,
    pub counts: ExtractCounts,
    pub grids_total: usize,
    pub naive_bytes: u64,
    pub unique_bytes: u64,
    pub features: Vec<FeatureEntry>,
}

impl FeaturesFile {
    pub fn new(
        gripper: GripperSpec,
        counts: ExtractCounts,
        dedup: &DedupOutput,
    ) -> Self {
        FeaturesFile {
            gripper,
            counts,
            grids_total: dedup.grids_total,
            naive_bytes: dedup.naive.len() as u64,
            unique_bytes: dedup.unique.len() as u64,
            features: dedup
                .records
                .iter()
                .map(|r| FeatureEntry {
                    canonical_key: format!("{:016x}", r.canonical_key),
                    first_seen: r.first_seen,
                    exemplar: r.exemplar.clone(),
                    sources: r.sources.clone(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Reads the file and rebuilds each record's grid from its exemplar.
    pub fn read(path: &Path) -> Result<(Self, Vec<FeatureRecord>)> {
        let file: FeaturesFile = serde_json::from_str(&read_text(path)?)
            .map_err(|e| Error::Serialization(e.to_string()).in_file(path))?;
        let spec = file.gripper;
        let records = file
            .features
            .iter()
            .map(|f| {
                f.exemplar.validate(&spec)?;
                let grid: OccupancyGrid = voxelize(&f.exemplar, &spec)?;
                let key = canonical_key(&grid);
                if format!("{key:016x}") != f.canonical_key {
                    return Err(Error::invariant(
                        "assemble",
                        format!("exemplar grid digest {key:016x} != stored {}", f.canonical_key),
                    ));
                }
                if f.sources.is_empty() {
                    return Err(Error::InvalidInput("feature without sources".into()));
                }
                Ok(FeatureRecord {
                    grid,
                    exemplar: f.exemplar.clone(),
                    sources: f.sources.clone(),
                    canonical_key: key,
                    first_seen: f.first_seen,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_file(path))?;
        Ok((file, records))
    }
}

/// Grid dimensions recorded in a stage file must match the active gripper.
pub fn check_dims(expected: GridDims, found: GridDims) -> Result<()> {
    if expected != found {
        return Err(Error::DimsMismatch { left: expected.as_tuple(), right: found.as_tuple() });
    }
    Ok(())
}
