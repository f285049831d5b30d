use std::fs;
use std::path::{Path, PathBuf};

use grasp_atlas_core::model_io::{
    load_point_cloud, read_grid_set, read_manifest, write_obj, write_ply_ascii, PointCloud,
};
use grasp_atlas_core::pipeline::{
    box_mesh, gen_synthetic_corpus, run_pipeline, PipelineConfig, PipelineOutput, ShapeFamily,
};
use grasp_atlas_core::Error;
use nalgebra::{Point3, Vector3};

fn cfg(objects: Vec<PathBuf>, out: &Path) -> PipelineConfig {
    let mut c = PipelineConfig::new(objects, out.to_path_buf());
    c.samples_per_object = 400;
    c.grasps_per_object = 150;
    c.seed = 3;
    c
}

fn write_cube(dir: &Path, name: &str, edge: f64) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, write_obj(&box_mesh(Vector3::repeat(edge)))).unwrap();
    path
}

fn run(c: &PipelineConfig) -> PipelineOutput {
    run_pipeline(c).unwrap()
}

#[test]
fn two_identical_cubes_match_one() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write_cube(tmp.path(), "cube_a.obj", 0.05);
    let b = write_cube(tmp.path(), "cube_b.obj", 0.05);
    let one = run(&cfg(vec![a.clone()], &tmp.path().join("one")));
    let two = run(&cfg(vec![a, b], &tmp.path().join("two")));
    assert!(one.stats.grids_unique > 0);
    assert_eq!(one.stats.grids_unique, two.stats.grids_unique);
    assert_eq!(two.stats.grids_total, 2 * one.stats.grids_total);
    // unique output is the same apart from the doubled source counts
    let ga = read_grid_set(&fs::read(&one.paths.unique_grid_set).unwrap()).unwrap();
    let gb = read_grid_set(&fs::read(&two.paths.unique_grid_set).unwrap()).unwrap();
    for (x, y) in ga.records.iter().zip(&gb.records) {
        assert_eq!(x.bits, y.bits);
    }
}

#[test]
fn adding_a_duplicate_never_grows_the_unique_set() {
    let tmp = tempfile::tempdir().unwrap();
    let files = gen_synthetic_corpus(&tmp.path().join("c"), ShapeFamily::Mixed, 3, 2, 5).unwrap();
    let distinct: Vec<PathBuf> = files.iter().step_by(2).cloned().collect();
    let mut prev = run(&cfg(distinct.clone(), &tmp.path().join("base"))).stats.grids_unique;
    let mut objects = distinct;
    for (i, dup) in files.iter().skip(1).step_by(2).enumerate() {
        objects.push(dup.clone());
        let n = run(&cfg(objects.clone(), &tmp.path().join(format!("plus{i}")))).stats.grids_unique;
        assert!(n <= prev, "{n} > {prev}");
        prev = n;
    }
}

#[test]
fn same_config_twice_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let files = gen_synthetic_corpus(&tmp.path().join("c"), ShapeFamily::Boxes, 2, 2, 1).unwrap();
    let mut c = cfg(files, &tmp.path().join("a"));
    c.workers = 3;
    let a = run(&c);
    c.output_dir = tmp.path().join("b");
    let b = run(&c);
    for (x, y) in [
        (&a.paths.naive_grid_set, &b.paths.naive_grid_set),
        (&a.paths.unique_grid_set, &b.paths.unique_grid_set),
        (&a.paths.manifest, &b.paths.manifest),
        (&a.paths.composite, &b.paths.composite),
    ] {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
}

#[test]
fn empty_object_list_is_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let err = run_pipeline(&cfg(vec![], tmp.path())).err().unwrap();
    assert!(matches!(err, Error::Config(_)), "{err}");
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn unparseable_object_names_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write_cube(tmp.path(), "good.obj", 0.04);
    let bad = tmp.path().join("bad.obj");
    fs::write(&bad, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 x\n").unwrap();
    let err = run_pipeline(&cfg(vec![good, bad], &tmp.path().join("out"))).err().unwrap();
    assert!(err.to_string().contains("bad.obj"), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn stats_match_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let files = gen_synthetic_corpus(&tmp.path().join("c"), ShapeFamily::Cylinders, 2, 3, 9).unwrap();
    let out = run(&cfg(files, &tmp.path().join("out")));
    let s = &out.stats;
    assert_eq!(s.naive_bytes, fs::metadata(&out.paths.naive_grid_set).unwrap().len());
    assert_eq!(s.unique_bytes, fs::metadata(&out.paths.unique_grid_set).unwrap().len());
    let naive = read_grid_set(&fs::read(&out.paths.naive_grid_set).unwrap()).unwrap();
    let unique = read_grid_set(&fs::read(&out.paths.unique_grid_set).unwrap()).unwrap();
    assert_eq!(naive.records.len(), s.grids_total);
    assert_eq!(unique.records.len(), s.grids_unique);
    let ratio = s.dedup_ratio.unwrap();
    assert!(ratio > 0.0 && ratio <= 1.0);
    let counts = &s.plane_counts;
    assert_eq!(counts.uv + counts.ut + counts.vt, s.grids_unique);

    let manifest = read_manifest(&fs::read_to_string(&out.paths.manifest).unwrap()).unwrap();
    let composite = load_point_cloud(&out.paths.composite).unwrap();
    assert_eq!(manifest.composite_points, composite.len());
    assert_eq!(s.composite_points, composite.len());
    let sources: usize = manifest.features.iter().map(|f| f.source_count).sum();
    assert_eq!(sources + s.regions_below_min_points, s.regions_extracted);

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out.paths.stats).unwrap()).unwrap();
    assert_eq!(json["grids_unique"], s.grids_unique);
}

#[test]
fn min_points_drops_sparse_regions() {
    let tmp = tempfile::tempdir().unwrap();
    let cube = write_cube(tmp.path(), "cube.obj", 0.05);
    let mut c = cfg(vec![cube], &tmp.path().join("out"));
    c.min_points = 40;
    let out = run(&c);
    assert!(out.stats.regions_below_min_points > 0);
    assert!(out.records.iter().all(|r| r.exemplar.len() >= 40));
}

#[test]
fn point_cloud_objects_are_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    // a flat 1 mm grid; normals are estimated since the file has none
    let pts: Vec<_> = (0..40)
        .flat_map(|i| (0..40).map(move |j| Point3::new(i as f64 * 1e-3, j as f64 * 1e-3, 0.0)))
        .collect();
    let ply = tmp.path().join("sheet.ply");
    fs::write(&ply, write_ply_ascii(&PointCloud::new(pts))).unwrap();
    let out = run(&cfg(vec![ply], &tmp.path().join("out")));
    assert_eq!(out.stats.objects, 1);
    assert!(out.stats.grids_unique > 0);
}

#[test]
fn example_config_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/example.toml");
    let c = PipelineConfig::load(&path).unwrap();
    assert_eq!(c.grasps_per_object, 500);
    assert_eq!(c.gripper.dims().as_tuple(), (8, 2, 6));
    assert!(c.objects[0].ends_with("corpus"));
}
