//! Ground truth from scanner positions, per-phase scoring and reports.
//!
//! A point's normal is correct when it faces the scanner that observed the
//! point. Correctness is measured over the points on non-outside patches;
//! points whose normal is exactly perpendicular to the scanner direction
//! have no ground truth and are counted separately.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geom::{Point, Vector};
use crate::io::{PointCloud, ScannerMetadata};
use crate::orient::{OrientOutput, StageTimings};
use crate::patches::PatchSet;
use crate::pipeline::{oriented_normals, PatchClass, Phase, PipelineResult};

/// `+1` if `normal` faces `scanner` from `point`, `-1` if it faces away,
/// `None` if it is perpendicular.
pub fn ground_truth_sign(normal: &Vector, point: &Point, scanner: &Point) -> Option<i8> {
    let d = normal.dot(&(scanner - point));
    if d > 0.0 {
        Some(1)
    } else if d < 0.0 {
        Some(-1)
    } else {
        None
    }
}

fn scan_ids(cloud: &PointCloud) -> Result<&[u32]> {
    cloud
        .scan_ids
        .as_deref()
        .ok_or_else(|| Error::InvalidInput("cloud has no scan ids".into()))
}

/// Ground-truth sign of every point's normal as stored in `cloud`.
pub fn ground_truth_signs(cloud: &PointCloud, scanners: &ScannerMetadata) -> Result<Vec<Option<i8>>> {
    let ids = scan_ids(cloud)?;
    let normals = cloud
        .normals()
        .ok_or_else(|| Error::InvalidInput("cloud has no normals".into()))?;
    scanners.check_covers(cloud)?;
    Ok(cloud
        .points
        .par_iter()
        .zip(normals)
        .zip(ids)
        .map(|((p, n), id)| ground_truth_sign(n, p, scanners.get(*id).unwrap()))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseScore {
    pub phase: String,
    pub correct: usize,
    /// Scored points with defined ground truth.
    pub total: usize,
    pub percent: f64,
}

/// Score `normals` over the points flagged in `scope`.
///
/// Returns the score and the number of in-scope points without ground truth.
pub fn score_normals(
    cloud: &PointCloud,
    normals: &[Vector],
    scanners: &ScannerMetadata,
    scope: &[bool],
    phase: &str,
) -> Result<(PhaseScore, usize)> {
    let ids = scan_ids(cloud)?;
    scanners.check_covers(cloud)?;
    if normals.len() != cloud.len() || scope.len() != cloud.len() {
        return Err(Error::InvalidInput("snapshot does not cover the cloud".into()));
    }
    let (correct, total, undefined) = (0..cloud.len())
        .into_par_iter()
        .filter(|&i| scope[i])
        .map(|i| match ground_truth_sign(&normals[i], &cloud.points[i], scanners.get(ids[i]).unwrap()) {
            Some(1) => (1, 1, 0),
            Some(_) => (0, 1, 0),
            None => (0, 0, 1),
        })
        .reduce(|| (0usize, 0usize, 0usize), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let percent = if total == 0 { 0.0 } else { 100.0 * correct as f64 / total as f64 };
    Ok((
        PhaseScore {
            phase: phase.to_string(),
            correct,
            total,
            percent,
        },
        undefined,
    ))
}

/// Points on patches that are not classified outside.
pub fn scored_points(set: &PatchSet, result: &PipelineResult) -> Vec<bool> {
    set.point_patch
        .iter()
        .map(|pp| pp.is_some_and(|p| result.decisions[p].class != PatchClass::Out))
        .collect()
}

/// Score the snapshot of every phase.
pub fn score_phases(
    cloud: &PointCloud,
    set: &PatchSet,
    result: &PipelineResult,
    scanners: &ScannerMetadata,
    scope: &[bool],
) -> Result<(Vec<PhaseScore>, usize)> {
    let mut scores = Vec::new();
    let mut undefined = 0;
    for phase in Phase::ALL {
        let normals = oriented_normals(cloud, set, result, phase)?;
        let (s, u) = score_normals(cloud, &normals, scanners, scope, phase.as_str())?;
        undefined = u;
        scores.push(s);
    }
    Ok((scores, undefined))
}

/// Score at `phase` over a fixed point subset, independent of classification:
/// the denominator is every in-scope point with defined ground truth, and
/// points left without an orientation (off patches or outside) count as
/// incorrect. Comparable across runs whose outside sets differ.
pub fn score_fixed_scope(
    cloud: &PointCloud,
    set: &PatchSet,
    result: &PipelineResult,
    scanners: &ScannerMetadata,
    scope: &[bool],
    phase: Phase,
) -> Result<PhaseScore> {
    let truth = ground_truth_signs(cloud, scanners)?;
    let normals = cloud.normals().unwrap();
    if scope.len() != cloud.len() {
        return Err(Error::InvalidInput("scope does not cover the cloud".into()));
    }
    let (correct, total) = (0..cloud.len())
        .into_par_iter()
        .filter(|&i| scope[i])
        .filter_map(|i| {
            let gt = truth[i]?;
            let oriented = set.point_patch[i].and_then(|p| result.decisions[p].sign(phase).map(|s| set.patches[p].normal * s as f64));
            let ok = oriented.is_some_and(|o| {
                let agree = normals[i].dot(&o);
                (agree > 0.0 && gt > 0) || (agree < 0.0 && gt < 0)
            });
            Some((usize::from(ok), 1usize))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(PhaseScore {
        phase: phase.as_str().to_string(),
        correct,
        total,
        percent: if total == 0 { 0.0 } else { 100.0 * correct as f64 / total as f64 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistics {
    pub points: usize,
    pub scans: usize,
    pub points_on_patches: usize,
    pub fraction_on_patches: f64,
    pub points_non_outside: usize,
    pub fraction_non_outside: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneStats {
    pub planes: usize,
    pub patches: usize,
    pub patches_in: usize,
    pub patches_ex: usize,
    pub patches_out: usize,
}

/// Deterministic part of a run report. Timings live in [`RuntimeReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub statistics: Statistics,
    pub plane_detection: Option<PlaneStats>,
    /// Scores at 1A, 1B, 2A, 2B; empty without ground truth.
    pub correctness: Vec<PhaseScore>,
    pub undefined_ground_truth: usize,
    pub config: Option<RunConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeReport {
    pub timings: StageTimings,
    pub threads: usize,
}

impl EvalReport {
    /// Report of an orientation run, scored when scanners are given.
    pub fn from_run(out: &OrientOutput, scanners: Option<&ScannerMetadata>, cfg: &RunConfig) -> Result<EvalReport> {
        let scope = scored_points(&out.patches, &out.result);
        let n = out.cloud.len();
        let on = out.patches.points_on_patches();
        let non_out = scope.iter().filter(|&&s| s).count();
        let count = |c: PatchClass| out.result.decisions.iter().filter(|d| d.class == c).count();
        let (correctness, undefined) = match scanners {
            Some(s) => score_phases(&out.cloud, &out.patches, &out.result, s, &scope)?,
            None => (Vec::new(), 0),
        };
        Ok(EvalReport {
            statistics: Statistics {
                points: n,
                scans: count_scans(&out.cloud),
                points_on_patches: on,
                fraction_on_patches: on as f64 / n as f64,
                points_non_outside: non_out,
                fraction_non_outside: non_out as f64 / n as f64,
            },
            plane_detection: Some(PlaneStats {
                planes: out.detection.planes.len(),
                patches: out.patches.patches.len(),
                patches_in: count(PatchClass::In),
                patches_ex: count(PatchClass::Ex),
                patches_out: count(PatchClass::Out),
            }),
            correctness,
            undefined_ground_truth: undefined,
            config: Some(cfg.clone()),
        })
    }

    /// Standalone scoring of an oriented cloud over the points in `scope`.
    pub fn from_oriented(cloud: &PointCloud, scanners: &ScannerMetadata, scope: &[bool]) -> Result<EvalReport> {
        let normals = cloud
            .normals()
            .ok_or_else(|| Error::InvalidInput("cloud has no normals".into()))?;
        let (score, undefined) = score_normals(cloud, normals, scanners, scope, "final")?;
        let n = cloud.len();
        let scoped = scope.iter().filter(|&&s| s).count();
        Ok(EvalReport {
            statistics: Statistics {
                points: n,
                scans: count_scans(cloud),
                points_on_patches: scoped,
                fraction_on_patches: scoped as f64 / n.max(1) as f64,
                points_non_outside: scoped,
                fraction_non_outside: scoped as f64 / n.max(1) as f64,
            },
            plane_detection: None,
            correctness: vec![score],
            undefined_ground_truth: undefined,
            config: None,
        })
    }

    pub fn score(&self, phase: Phase) -> Option<&PhaseScore> {
        self.correctness.iter().find(|s| s.phase == phase.as_str())
    }

    /// Text table with statistics, plane detection, correctness and runtime blocks.
    pub fn table(&self, runtime: Option<&StageTimings>) -> String {
        let s = &self.statistics;
        let mut out = String::new();
        out.push_str("Statistics\n");
        out.push_str(&format!("  points                 {:>12}\n", s.points));
        out.push_str(&format!("  scans                  {:>12}\n", s.scans));
        out.push_str(&format!("  on patches             {:>11.2}%\n", 100.0 * s.fraction_on_patches));
        out.push_str(&format!("  non-outside            {:>11.2}%\n", 100.0 * s.fraction_non_outside));
        out.push_str("Plane detection\n");
        match &self.plane_detection {
            Some(p) => {
                out.push_str(&format!("  planes                 {:>12}\n", p.planes));
                out.push_str(&format!("  patches (in/ex/out)    {:>12}\n", format!("{}/{}/{}", p.patches_in, p.patches_ex, p.patches_out)));
            }
            None => out.push_str("  -\n"),
        }
        out.push_str("Correctness\n");
        if self.correctness.is_empty() {
            out.push_str("  no ground truth\n");
        }
        for c in &self.correctness {
            out.push_str(&format!("  {:<22} {:>11.2}%  ({}/{})\n", c.phase, c.percent, c.correct, c.total));
        }
        if self.undefined_ground_truth > 0 {
            out.push_str(&format!("  undefined ground truth {:>12}\n", self.undefined_ground_truth));
        }
        out.push_str("Runtime\n");
        match runtime {
            Some(t) => {
                let rows = [
                    ("normals", t.normals_ms),
                    ("plane detection", t.detection_ms),
                    ("patches", t.patches_ms),
                    ("scene", t.scene_ms),
                    ("phase 1A", t.phases.phase_1a_ms),
                    ("phase 1B", t.phases.phase_1b_ms),
                    ("phase 2A", t.phases.phase_2a_ms),
                    ("phase 2B", t.phases.phase_2b_ms),
                    ("propagation", t.propagation_ms),
                    ("total", t.total_ms),
                ];
                for (name, v) in rows {
                    out.push_str(&format!("  {name:<22} {v:>10.1} ms\n"));
                }
            }
            None => out.push_str("  -\n"),
        }
        out
    }
}

fn count_scans(cloud: &PointCloud) -> usize {
    cloud.scan_ids.as_ref().map_or(0, |ids| {
        let mut v = ids.clone();
        v.sort_unstable();
        v.dedup();
        v.len()
    })
}

/// Sibling file for timings: `report.json` -> `report.runtime.json`.
pub fn runtime_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.runtime.json"))
}

/// Write the report as pretty JSON to `path`, plus the timings to
/// [`runtime_path`] when given. Returns the text table.
pub fn emit_report(report: &EvalReport, runtime: Option<&RuntimeReport>, path: &Path) -> Result<String> {
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::InvalidInput(e.to_string()))?;
    std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))?;
    if let Some(rt) = runtime {
        let p = runtime_path(path);
        let json = serde_json::to_string_pretty(rt).map_err(|e| Error::InvalidInput(e.to_string()))?;
        std::fs::write(&p, json + "\n").map_err(|e| Error::io(&p, e))?;
    }
    Ok(report.table(runtime.map(|r| &r.timings)))
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}
