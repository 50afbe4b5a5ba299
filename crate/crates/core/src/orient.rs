//! End-to-end orientation run: normals, planes, patches, both phases and
//! propagation back to the points.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{emit_report, ground_truth_sign, runtime_path, EvalReport, RuntimeReport};
use crate::io::{save_labeled_cloud, save_point_cloud, PointCloud, PointFormat, PointLabel, ScannerMetadata};
use crate::knn::KnnIndex;
use crate::normals::estimate_normals;
use crate::patches::{build_patches, PatchSet};
use crate::pipeline::{propagate_to_points, run_pipeline, PhaseTimings, PipelineResult};
use crate::ransac::{detect_planes_masked, Detection};
use crate::ray::Scene;

/// Wall-clock time per stage (ms).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub normals_ms: f64,
    pub detection_ms: f64,
    pub patches_ms: f64,
    pub scene_ms: f64,
    pub phases: PhaseTimings,
    pub propagation_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone)]
pub struct OrientOutput {
    /// Input cloud, with estimated normals when requested.
    pub cloud: PointCloud,
    /// Points left out of plane detection (degenerate PCA neighborhoods).
    pub excluded: Vec<bool>,
    pub detection: Detection,
    pub patches: PatchSet,
    pub result: PipelineResult,
    /// Final oriented cloud.
    pub oriented: PointCloud,
    pub labels: Vec<PointLabel>,
    pub timings: StageTimings,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Run the full pipeline on `cloud`. Uses a dedicated thread pool when
/// `cfg.threads` is set; the output does not depend on the thread count.
pub fn orient(cloud: PointCloud, cfg: &RunConfig) -> Result<OrientOutput> {
    cfg.validate()?;
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Pipeline(format!("thread pool: {e}")))?
            .install(|| orient_inner(cloud, cfg)),
        None => orient_inner(cloud, cfg),
    }
}

fn orient_inner(cloud: PointCloud, cfg: &RunConfig) -> Result<OrientOutput> {
    cloud.validate()?;
    if cloud.is_empty() {
        return Err(Error::InvalidInput("point cloud is empty".into()));
    }
    let start = Instant::now();
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let (cloud, excluded) = if cfg.estimate_normals {
        let index = KnnIndex::build(&cloud.points)?;
        let est = estimate_normals(&cloud, &index, cfg.knn)?;
        (est.cloud, est.degenerate)
    } else if cloud.normals.is_some() {
        let n = cloud.len();
        (cloud, vec![false; n])
    } else {
        return Err(Error::InvalidInput("input has no normals; enable normal estimation".into()));
    };
    timings.normals_ms = ms(t);

    let t = Instant::now();
    let detection = detect_planes_masked(&cloud, &cfg.detection, Some(&excluded))?;
    timings.detection_ms = ms(t);
    if detection.planes.is_empty() {
        return Err(Error::Pipeline(format!(
            "no planes detected (min_support {}, epsilon {} m, alpha {} deg)",
            cfg.detection.min_support, cfg.detection.epsilon, cfg.detection.alpha_deg
        )));
    }

    let t = Instant::now();
    let patches = build_patches(&detection.planes, &cloud, cfg.cell_size)?;
    timings.patches_ms = ms(t);

    let t = Instant::now();
    let scene = Scene::from_patches(&patches);
    timings.scene_ms = ms(t);

    let result = run_pipeline(&patches, &scene, &cfg.trace)?;
    timings.phases = result.timings;

    let t = Instant::now();
    let (oriented, labels) = propagate_to_points(&cloud, &patches, &result)?;
    timings.propagation_ms = ms(t);
    timings.total_ms = ms(start);

    Ok(OrientOutput {
        cloud,
        excluded,
        detection,
        patches,
        result,
        oriented,
        labels,
        timings,
    })
}

/// Paths written by [`write_run`].
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub oriented: PathBuf,
    pub classes: PathBuf,
    pub correctness: Option<PathBuf>,
    pub report: PathBuf,
    pub runtime: PathBuf,
}

/// Write the oriented cloud (`oriented.ply`), class colors (`classes.ply`),
/// correctness colors (`correctness.ply`, with scanners only) and the
/// report into `dir`. `report` overrides the report location.
pub fn write_run(
    out: &OrientOutput,
    cfg: &RunConfig,
    scanners: Option<&ScannerMetadata>,
    dir: &Path,
    report: Option<&Path>,
) -> Result<(EvalReport, String, RunFiles)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = RunFiles {
        oriented: dir.join("oriented.ply"),
        classes: dir.join("classes.ply"),
        correctness: scanners.map(|_| dir.join("correctness.ply")),
        report: report.map_or_else(|| dir.join("report.json"), Path::to_path_buf),
        runtime: PathBuf::new(),
    };
    save_point_cloud(&out.oriented, &files.oriented, PointFormat::PlyBinaryLe)?;
    save_labeled_cloud(&out.oriented, &out.labels, &files.classes)?;
    let eval = EvalReport::from_run(out, scanners, cfg)?;
    if let (Some(s), Some(path)) = (scanners, &files.correctness) {
        let labels = correctness_labels(out, s)?;
        save_labeled_cloud(&out.oriented, &labels, path)?;
    }
    let runtime = RuntimeReport {
        timings: out.timings,
        threads: cfg.threads.unwrap_or_else(rayon::current_num_threads),
    };
    let table = emit_report(&eval, Some(&runtime), &files.report)?;
    let files = RunFiles {
        runtime: runtime_path(&files.report),
        ..files
    };
    Ok((eval, table, files))
}

/// Green/red for scored points, yellow for outside, gray off patches.
pub fn correctness_labels(out: &OrientOutput, scanners: &ScannerMetadata) -> Result<Vec<PointLabel>> {
    let normals = out
        .oriented
        .normals()
        .ok_or_else(|| Error::InvalidInput("oriented cloud has no normals".into()))?;
    let ids = out
        .oriented
        .scan_ids
        .as_deref()
        .ok_or_else(|| Error::InvalidInput("cloud has no scan ids".into()))?;
    scanners.check_covers(&out.oriented)?;
    Ok(out
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| match l {
            PointLabel::Interior | PointLabel::Exterior => {
                match ground_truth_sign(&normals[i], &out.oriented.points[i], scanners.get(ids[i]).unwrap()) {
                    Some(1) => PointLabel::Correct,
                    Some(_) => PointLabel::Incorrect,
                    None => PointLabel::OffPatch,
                }
            }
            other => *other,
        })
        .collect())
}
