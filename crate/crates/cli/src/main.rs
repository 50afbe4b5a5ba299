//! `pathorient`: scene synthesis, orientation, evaluation and ablations.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pathorient::config::RunConfig;
use pathorient::eval::{emit_report, score_fixed_scope, EvalReport};
use pathorient::io::{
    load_point_cloud_auto, load_scanner_metadata, save_point_cloud, save_scanner_metadata, PointFormat, PointLabel,
};
use pathorient::orient::{orient, write_run};
use pathorient::pipeline::Phase;
use pathorient::synth::{scenes, SceneSpec};
use pathorient::Error;

#[derive(Parser)]
#[command(name = "pathorient", version, about = "Normal orientation for indoor point clouds by multi-bounce path tracing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scan (S1..S4 or a scene spec file).
    Synth {
        /// Scene name (s1, s2, s3, s4) or path to a `key = value` scene file.
        #[arg(long)]
        scene: String,
        #[arg(long)]
        output_dir: PathBuf,
        /// Write ASCII instead of binary PLY.
        #[arg(long)]
        ascii: bool,
    },
    /// Orient the normals of a point cloud.
    Orient {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
        /// Scanner file; enables scoring and the correctness cloud.
        #[arg(long)]
        scanners: Option<PathBuf>,
        /// Report location (default: <output-dir>/report.json).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write each plane's occupancy bitmap as PGM into <output-dir>/bitmaps.
        #[arg(long)]
        dump_bitmaps: bool,
        /// Write the per-patch phase table to <output-dir>/phases.tsv.
        #[arg(long)]
        dump_phases: bool,
        #[command(flatten)]
        params: Params,
    },
    /// Score an oriented cloud against scanner positions.
    Eval {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        scanners: PathBuf,
        /// Class-colored cloud from `orient`; restricts scoring to interior
        /// and exterior points.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare bounce budgets on a synthetic scene.
    Ablate {
        #[arg(long, default_value = "s3")]
        scene: String,
        #[arg(long, value_delimiter = ',', default_value = "1,2,8")]
        bounces_list: Vec<usize>,
        /// Scale tau with the bounce budget (tau * b / 8) instead of keeping it fixed.
        #[arg(long)]
        scale_tau: bool,
        #[arg(long)]
        output_dir: PathBuf,
        #[command(flatten)]
        params: Params,
    },
}

/// Run parameters; flags override the config file, which overrides defaults.
#[derive(Args, Default)]
struct Params {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Estimate normals by PCA instead of using the stored ones.
    #[arg(long)]
    estimate_normals: bool,
    #[arg(long)]
    knn: Option<usize>,
    #[arg(long)]
    ransac_eps: Option<f64>,
    #[arg(long)]
    ransac_alpha: Option<f64>,
    #[arg(long)]
    min_support: Option<usize>,
    #[arg(long)]
    cell_size: Option<f64>,
    /// Rays per patch side (k).
    #[arg(long)]
    rays: Option<usize>,
    /// Bounce budget (b).
    #[arg(long)]
    bounces: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    /// Cone half-angle in degrees.
    #[arg(long)]
    cone_deg: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

impl Params {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let mut set = |key: &str, v: Option<String>| v.map_or(Ok(()), |v| cfg.set(key, &v));
        set("knn", self.knn.map(|v| v.to_string()))?;
        set("ransac_eps", self.ransac_eps.map(|v| v.to_string()))?;
        set("ransac_alpha", self.ransac_alpha.map(|v| v.to_string()))?;
        set("min_support", self.min_support.map(|v| v.to_string()))?;
        set("cell_size", self.cell_size.map(|v| v.to_string()))?;
        set("rays", self.rays.map(|v| v.to_string()))?;
        set("bounces", self.bounces.map(|v| v.to_string()))?;
        set("tau", self.tau.map(|v| v.to_string()))?;
        set("cone_deg", self.cone_deg.map(|v| v.to_string()))?;
        set("seed", self.seed.map(|v| v.to_string()))?;
        set("threads", self.threads.map(|v| v.to_string()))?;
        if self.estimate_normals {
            cfg.estimate_normals = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::InvalidInput(_) => 3,
        Error::InvalidParam { .. } | Error::InvalidSpec(_) => 4,
        Error::Pipeline(_) => 5,
        Error::Io { .. } => 6,
    }
}

fn load_scene(name: &str) -> Result<SceneSpec, Error> {
    match scenes::by_name(name) {
        Some(spec) => Ok(spec),
        None => SceneSpec::load(Path::new(name)),
    }
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Synth { scene, output_dir, ascii } => {
            let spec = load_scene(&scene)?;
            let generated = spec.generate()?;
            create_dir(&output_dir)?;
            let fmt = if ascii { PointFormat::PlyAscii } else { PointFormat::PlyBinaryLe };
            let cloud_path = output_dir.join("scene.ply");
            save_point_cloud(&generated.scan.cloud, &cloud_path, fmt)?;
            save_scanner_metadata(&generated.scan.scanners, output_dir.join("scanners.txt"))?;
            let spec_path = output_dir.join("scene.txt");
            std::fs::write(&spec_path, spec.to_text()).map_err(|source| Error::Io { path: spec_path, source })?;
            println!(
                "{} points from {} scanners, {} surfaces -> {}",
                generated.scan.cloud.len(),
                generated.scan.scanners.len(),
                generated.model.surfaces.len(),
                cloud_path.display()
            );
        }
        Command::Orient {
            input,
            output_dir,
            scanners,
            report,
            dump_bitmaps,
            dump_phases,
            params,
        } => {
            let cfg = params.resolve()?;
            let cloud = load_point_cloud_auto(&input)?;
            let scanners = scanners.map(load_scanner_metadata).transpose()?;
            let out = orient(cloud, &cfg)?;
            let (_, table, files) = write_run(&out, &cfg, scanners.as_ref(), &output_dir, report.as_deref())?;
            if dump_bitmaps {
                out.patches.dump_bitmaps(&output_dir.join("bitmaps"))?;
            }
            if dump_phases {
                let path = output_dir.join("phases.tsv");
                std::fs::write(&path, out.result.phase_table()).map_err(|source| Error::Io { path, source })?;
            }
            print!("{table}");
            println!("report: {}", files.report.display());
        }
        Command::Eval {
            input,
            scanners,
            labels,
            report,
        } => {
            let cloud = load_point_cloud_auto(&input)?;
            let scanners = load_scanner_metadata(&scanners)?;
            let scope = match labels {
                Some(path) => {
                    let labeled = load_point_cloud_auto(&path)?;
                    let colors = labeled
                        .colors
                        .ok_or_else(|| Error::InvalidInput(format!("{} has no colors", path.display())))?;
                    if colors.len() != cloud.len() {
                        return Err(Error::InvalidInput("label cloud does not match the input".into()));
                    }
                    let scored = [PointLabel::Interior.color(), PointLabel::Exterior.color()];
                    colors.iter().map(|c| scored.contains(c)).collect()
                }
                None => vec![true; cloud.len()],
            };
            let eval = EvalReport::from_oriented(&cloud, &scanners, &scope)?;
            let table = match report {
                Some(path) => emit_report(&eval, None, &path)?,
                None => eval.table(None),
            };
            print!("{table}");
        }
        Command::Ablate {
            scene,
            bounces_list,
            scale_tau,
            output_dir,
            params,
        } => {
            let base = params.resolve()?;
            let spec = load_scene(&scene)?;
            let generated = spec.generate()?;
            let enclosed: Vec<bool> = generated
                .scan
                .surface
                .iter()
                .map(|&s| generated.model.surfaces[s].shared)
                .collect();
            create_dir(&output_dir)?;
            println!("bounces\ttau\t1A_enclosed\t1A\t2B");
            for b in bounces_list {
                let mut cfg = base.clone();
                cfg.trace.bounces = b;
                if scale_tau {
                    cfg.trace.tau = base.trace.tau * b as f64 / 8.0;
                }
                let out = orient(generated.scan.cloud.clone(), &cfg)?;
                let dir = output_dir.join(format!("b{b}"));
                let (eval, _, _) = write_run(&out, &cfg, Some(&generated.scan.scanners), &dir, None)?;
                let enclosed_1a = score_fixed_scope(&out.cloud, &out.patches, &out.result, &generated.scan.scanners, &enclosed, Phase::P1A)?;
                let pct = |p: Phase| eval.score(p).map_or("-".to_string(), |s| format!("{:.2}", s.percent));
                println!(
                    "{b}\t{}\t{:.2} ({}/{})\t{}\t{}",
                    cfg.trace.tau,
                    enclosed_1a.percent,
                    enclosed_1a.correct,
                    enclosed_1a.total,
                    pct(Phase::P1A),
                    pct(Phase::P2B)
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
