use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_grasp-atlas"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn grasp-atlas")
}

fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    fs::write(
        &path,
        format!(
            "objects = [\"corpus\"]\noutput_dir = \"out\"\nsamples_per_object = 300\n\
             grasps_per_object = 60\n{extra}"
        ),
    )
    .unwrap();
    path
}

fn gen_corpus(dir: &Path, unique: usize, copies: usize) {
    let out = run(bin()
        .arg("gen-corpus")
        .arg("--out")
        .arg(dir.join("corpus"))
        .args(["--unique", &unique.to_string(), "--copies", &copies.to_string()]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn run_writes_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    gen_corpus(tmp.path(), 2, 2);
    let cfg = write_config(tmp.path(), "");
    let out = run(bin().arg("run").arg("--config").arg(&cfg).arg("--dump-regions"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("compression factor"));
    let dir = tmp.path().join("out");
    for f in ["naive.gfa", "unique.gfa", "composite.ply", "manifest.json", "stats.json"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    assert!(fs::read_dir(dir.join("regions")).unwrap().count() > 0);

    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("stats.json")).unwrap()).unwrap();
    let naive = fs::metadata(dir.join("naive.gfa")).unwrap().len();
    let unique = fs::metadata(dir.join("unique.gfa")).unwrap().len();
    assert_eq!(stats["naive_bytes"].as_u64(), Some(naive));
    assert_eq!(stats["unique_bytes"].as_u64(), Some(unique));
}

#[test]
fn overrides_take_effect() {
    let tmp = tempfile::tempdir().unwrap();
    gen_corpus(tmp.path(), 1, 1);
    let cfg = write_config(tmp.path(), "");
    let other = tmp.path().join("elsewhere");
    let out = run(bin()
        .arg("run")
        .arg("--config")
        .arg(&cfg)
        .args(["--workers", "3", "--seed", "9"])
        .arg("--out")
        .arg(&other));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(other.join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["workers"], 3);
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn stage_commands_match_full_run() {
    let tmp = tempfile::tempdir().unwrap();
    gen_corpus(tmp.path(), 2, 1);
    let cfg = write_config(tmp.path(), "");
    assert!(run(bin().arg("run").arg("--config").arg(&cfg)).status.success());

    let st = tmp.path().join("stages");
    let ok = |o: Output| assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    ok(run(bin().arg("extract").arg("--config").arg(&cfg).arg("--out").arg(&st)));
    ok(run(bin().arg("dedup").arg("--input").arg(st.join("regions.json")).arg("--out").arg(&st)));
    ok(run(bin()
        .arg("assemble")
        .arg("--input")
        .arg(st.join("features.json"))
        .arg("--out")
        .arg(&st)
        .arg("--dump-panels")));
    for f in ["naive.gfa", "unique.gfa", "composite.ply", "manifest.json"] {
        let a = fs::read(tmp.path().join("out").join(f)).unwrap();
        let b = fs::read(st.join(f)).unwrap();
        assert!(a == b, "{f} differs between run and stage commands");
    }
    assert!(st.join("panels").is_dir());

    let out = run(bin().arg("stats").arg("--input").arg(st.join("stats.json")));
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("dedup ratio"));
}

#[test]
fn usage_and_config_errors_exit_1() {
    assert_eq!(run(bin().arg("run")).status.code(), Some(1));
    assert_eq!(run(bin().arg("frobnicate")).status.code(), Some(1));

    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("empty.toml");
    fs::write(&cfg, "objects = []\n").unwrap();
    let out = run(bin().arg("run").arg("--config").arg(&cfg));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("object list is empty"));

    fs::write(&cfg, "objects = [\"a.obj\"]\nbogus_key = 1\n").unwrap();
    assert_eq!(run(bin().arg("run").arg("--config").arg(&cfg)).status.code(), Some(1));

    let out = run(bin().args(["gen-corpus", "--family", "spheres", "--out"]).arg(tmp.path()));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_object_exits_2_with_file_name() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("corpus");
    fs::create_dir(&dir).unwrap();
    fs::write(dir.join("broken.obj"), "v 0 0 0\nv 1 0 0\nf 1 2 7\n").unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = run(bin().arg("run").arg("--config").arg(&cfg));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.obj"));
}

#[test]
fn corrupted_features_file_is_invariant_error() {
    let tmp = tempfile::tempdir().unwrap();
    gen_corpus(tmp.path(), 1, 1);
    let cfg = write_config(tmp.path(), "");
    let st = tmp.path().join("st");
    assert!(run(bin().arg("extract").arg("--config").arg(&cfg).arg("--out").arg(&st)).status.success());
    assert!(run(bin().arg("dedup").arg("--input").arg(st.join("regions.json")).arg("--out").arg(&st))
        .status
        .success());
    let path = st.join("features.json");
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    v["features"][0]["canonical_key"] = "0000000000000000".into();
    fs::write(&path, v.to_string()).unwrap();
    let out = run(bin().arg("assemble").arg("--input").arg(&path).arg("--out").arg(&st));
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("assemble"));
}
