use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GripperSpec, DEFAULT_K_NEIGHBORS};

fn default_gripper() -> GripperSpec {
    GripperSpec::new(0.08, 0.02, 0.06, 0.01).expect("default gripper is valid")
}
fn default_samples() -> usize {
    1000
}
fn default_grasps() -> usize {
    500
}
fn default_k() -> usize {
    DEFAULT_K_NEIGHBORS
}
fn default_one() -> usize {
    1
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_mode() -> String {
    "static".into()
}

/// Pipeline parameters, read from a TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// OBJ meshes, ASCII PLY clouds, or directories holding them.
    pub objects: Vec<PathBuf>,
    #[serde(default = "default_gripper")]
    pub gripper: GripperSpec,
    #[serde(default = "default_samples")]
    pub samples_per_object: usize,
    #[serde(default = "default_grasps")]
    pub grasps_per_object: usize,
    #[serde(default = "default_k")]
    pub k_neighbors: usize,
    #[serde(default)]
    pub seed: u64,
    /// Cell size of the assembly panels; defaults to the gripper's largest extent.
    #[serde(default)]
    pub spacing: Option<f64>,
    #[serde(default = "default_one")]
    pub min_points: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_one")]
    pub workers: usize,
    /// Only `"static"` is implemented.
    #[serde(default = "default_mode")]
    pub extraction_mode: String,
    #[serde(default)]
    pub dump_regions: bool,
    #[serde(default)]
    pub dump_panels: bool,
}

impl PipelineConfig {
    pub fn new(objects: Vec<PathBuf>, output_dir: PathBuf) -> Self {
        PipelineConfig {
            objects,
            gripper: default_gripper(),
            samples_per_object: default_samples(),
            grasps_per_object: default_grasps(),
            k_neighbors: default_k(),
            seed: 0,
            spacing: None,
            min_points: 1,
            output_dir,
            workers: 1,
            extraction_mode: default_mode(),
            dump_regions: false,
            dump_panels: false,
        }
    }

    /// Parses TOML text. Relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for p in cfg.objects.iter_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        PipelineConfig::from_toml(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other.in_file(path),
        })
    }

    pub fn spacing(&self) -> f64 {
        self.spacing.unwrap_or_else(|| self.gripper.max_extent())
    }

    pub fn validate(&self) -> Result<()> {
        if self.objects.is_empty() {
            return Err(Error::Config("object list is empty".into()));
        }
        for (name, v) in [
            ("samples_per_object", self.samples_per_object),
            ("grasps_per_object", self.grasps_per_object),
            ("min_points", self.min_points),
            ("workers", self.workers),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.k_neighbors < 3 {
            return Err(Error::Config("k_neighbors must be at least 3".into()));
        }
        if self.samples_per_object <= self.k_neighbors {
            return Err(Error::Config(format!(
                "samples_per_object ({}) must exceed k_neighbors ({})",
                self.samples_per_object, self.k_neighbors
            )));
        }
        if self.extraction_mode != "static" {
            return Err(Error::Config(format!(
                "extraction_mode `{}` is not supported (only \"static\")",
                self.extraction_mode
            )));
        }
        let spacing = self.spacing();
        if !(spacing.is_finite() && spacing >= self.gripper.max_extent()) {
            return Err(Error::Config(format!(
                "spacing {spacing} must be at least the gripper's largest extent {}",
                self.gripper.max_extent()
            )));
        }
        Ok(())
    }

    /// Object files in processing order: listed files as given, directories expanded to their
    /// `.obj`/`.ply` entries sorted by name.
    pub fn object_files(&self) -> Result<Vec<PathBuf>> {
        let mut files = Vec::new();
        for p in &self.objects {
            if p.is_dir() {
                let mut entries: Vec<PathBuf> = std::fs::read_dir(p)
                    .map_err(|e| Error::io(p, e))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|e| {
                        e.is_file()
                            && matches!(
                                e.extension().and_then(|x| x.to_str()),
                                Some("obj" | "ply")
                            )
                    })
                    .collect();
                entries.sort();
                files.extend(entries);
            } else {
                files.push(p.clone());
            }
        }
        if files.is_empty() {
            return Err(Error::Config("no object files found".into()));
        }
        Ok(files)
    }
}
