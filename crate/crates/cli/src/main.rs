//! `grasp-atlas`: builds a deduplicated grasp-feature dataset and assembles it into one
//! composite object.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use grasp_atlas_core::assembly::layout;
use grasp_atlas_core::error::{Error, Result};
use grasp_atlas_core::model_io::{read_text, write_file};
use grasp_atlas_core::pipeline::{
    check_conservation, classify_records, dedup_stage, dump_panels, dump_regions,
    extract_objects, gen_synthetic_corpus, load_objects, plane_counts, report_stats,
    run_pipeline, with_workers, write_assembly, FeaturesFile, PipelineConfig, RegionsFile,
    ShapeFamily, StageTimings, StatsReport, FEATURES_JSON, NAIVE_GRID_SET, REGIONS_JSON,
    STATS_JSON, UNIQUE_GRID_SET,
};

#[derive(Parser)]
#[command(name = "grasp-atlas", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write naive.gfa, unique.gfa, composite.ply, manifest.json and stats.json.
    Run(RunArgs),
    /// Write a synthetic corpus of parametric shapes, each duplicated several times.
    GenCorpus(GenCorpusArgs),
    /// Sample grasps and extract gripper-frame regions into regions.json.
    Extract(RunArgs),
    /// Voxelize and deduplicate regions.json into naive.gfa, unique.gfa and features.json.
    Dedup(DedupArgs),
    /// Classify and lay out features.json into composite.ply, manifest.json and stats.json.
    Assemble(AssembleArgs),
    /// Print a stats.json report as text.
    Stats(StatsArgs),
}

/// Config defaults (TOML keys): samples_per_object = 1000, grasps_per_object = 500,
/// k_neighbors = 10, seed = 0, min_points = 1, workers = 1, output_dir = "out",
/// spacing = largest gripper extent, [gripper] width = 0.08, height = 0.02, depth = 0.06,
/// resolution = 0.01. See configs/example.toml.
#[derive(Args)]
struct RunArgs {
    /// TOML pipeline config.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (overrides config).
    #[arg(long)]
    workers: Option<usize>,
    /// Base seed (overrides config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write each extracted region as PLY under <out>/regions.
    #[arg(long)]
    dump_regions: bool,
    /// Also write each assembly panel as PLY under <out>/panels.
    #[arg(long)]
    dump_panels: bool,
}

#[derive(Args)]
struct GenCorpusArgs {
    /// Directory to write the OBJ files into.
    #[arg(long)]
    out: PathBuf,
    /// boxes, cylinders or mixed.
    #[arg(long, default_value = "boxes")]
    family: String,
    /// Number of distinct shapes.
    #[arg(long, default_value_t = 8)]
    unique: usize,
    /// Copies of each shape.
    #[arg(long, default_value_t = 8)]
    copies: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DedupArgs {
    /// regions.json written by `extract`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct AssembleArgs {
    /// features.json written by `dedup`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Gap between panel cells in metres; defaults to the largest gripper extent.
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    dump_panels: bool,
}

#[derive(Args)]
struct StatsArgs {
    /// stats.json written by `run` or `assemble`.
    #[arg(long)]
    input: PathBuf,
    /// Print the JSON form instead of text.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => {
            let config = load_config(&args)?;
            let output = run_pipeline(&config)?;
            print!("{}", report_stats(&output.stats)?.0);
            Ok(())
        }
        Command::GenCorpus(args) => {
            let family: ShapeFamily = args.family.parse()?;
            let files = gen_synthetic_corpus(&args.out, family, args.unique, args.copies, args.seed)?;
            println!("wrote {} files to {}", files.len(), args.out.display());
            Ok(())
        }
        Command::Extract(args) => extract(&args),
        Command::Dedup(args) => dedup(&args),
        Command::Assemble(args) => assemble(&args),
        Command::Stats(args) => {
            let text = read_text(&args.input)?;
            let report: StatsReport = serde_json::from_str(&text)
                .map_err(|e| Error::Serialization(e.to_string()).in_file(&args.input))?;
            let (text, json) = report_stats(&report)?;
            print!("{}", if args.json { json } else { text });
            Ok(())
        }
    }
}

fn load_config(args: &RunArgs) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::load(&args.config)?;
    if let Some(w) = args.workers {
        config.workers = w;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    config.dump_regions |= args.dump_regions;
    config.dump_panels |= args.dump_panels;
    config.validate()?;
    Ok(config)
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}


fn extract(args: &RunArgs) -> Result<()> {
    let config = load_config(args)?;
    with_workers(config.workers, || -> Result<()> {
        let mut timings = StageTimings::default();
        let objects = load_objects(&config.object_files()?)?;
        let extraction = extract_objects(&objects, &config, &mut timings)?;
        if config.dump_regions {
            dump_regions(&config.output_dir.join("regions"), &extraction.regions)?;
        }
        let file = RegionsFile {
            gripper: config.gripper,
            counts: extraction.counts,
            regions: extraction.regions,
        };
        let path = config.output_dir.join(REGIONS_JSON);
        write_file(&path, file.to_json()?)?;
        println!(
            "{} regions ({} empty candidates dropped) -> {}",
            file.regions.len(),
            file.counts.regions_empty,
            path.display()
        );
        Ok(())
    })?
}

fn dedup(args: &DedupArgs) -> Result<()> {
    with_workers(args.workers, || -> Result<()> {
        let regions = RegionsFile::read(&args.input)?;
        let spec = regions.gripper;
        let dedup = dedup_stage(regions.regions, &spec)?;
        write_file(&args.out.join(NAIVE_GRID_SET), &dedup.naive)?;
        write_file(&args.out.join(UNIQUE_GRID_SET), &dedup.unique)?;
        let features = FeaturesFile::new(spec, regions.counts, &dedup);
        write_file(&args.out.join(FEATURES_JSON), features.to_json()?)?;
        println!("{} grids, {} unique", dedup.grids_total, dedup.records.len());
        Ok(())
    })?
}

fn assemble(args: &AssembleArgs) -> Result<()> {
    with_workers(args.workers, || -> Result<()> {
        let total = Instant::now();
        let (file, records) = FeaturesFile::read(&args.input)?;
        let spec = file.gripper;
        let spacing = args.spacing.unwrap_or_else(|| spec.max_extent());
        if !(spacing.is_finite() && spacing >= spec.max_extent()) {
            return Err(Error::Config(format!(
                "spacing {spacing} must be at least the gripper's largest extent {}",
                spec.max_extent()
            )));
        }
        let mut timings = StageTimings::default();
        let start = Instant::now();
        let classes = classify_records(&records);
        timings.classify_ms = elapsed_ms(start);
        let start = Instant::now();
        let assembled = layout(&records, &classes, &spec, spacing)?;
        timings.assemble_ms = elapsed_ms(start);
        let start = Instant::now();
        write_assembly(&args.out, &assembled)?;
        if args.dump_panels {
            dump_panels(&args.out.join("panels"), &assembled)?;
        }
        timings.write_ms = elapsed_ms(start);
        timings.total_ms = elapsed_ms(total);

        let c = &file.counts;
        let mut stats = StatsReport {
            objects: c.objects,
            workers: args.workers,
            candidates: c.candidates,
            candidates_skipped: c.candidates_skipped,
            regions_empty: c.regions_empty,
            regions_extracted: c.regions_extracted,
            regions_below_min_points: c.regions_below_min_points,
            grids_total: file.grids_total,
            grids_unique: records.len(),
            naive_bytes: file.naive_bytes,
            unique_bytes: file.unique_bytes,
            composite_points: assembled.composite_cloud.len(),
            plane_counts: plane_counts(&classes),
            timings,
            ..Default::default()
        };
        check_conservation(&stats, &records)?;
        stats.finalize();
        let (text, json) = report_stats(&stats)?;
        write_file(&args.out.join(STATS_JSON), json)?;
        print!("{text}");
        Ok(())
    })?
}

