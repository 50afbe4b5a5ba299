//! Patch classification and orientation.
//!
//! Phase 1 traces multi-bounce paths from both sides of every patch,
//! classifies patches as interior / exterior / outside and picks a side per
//! patch (1A), then lets all patches of a plane vote for one orientation
//! (1B). Phase 2 casts single-bounce rays along the chosen side and flips
//! patches that look at the back of other surfaces (2A), followed by a
//! second vote (2B). Final patch orientations are copied onto the points.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{canonical_sign, signum, Vector};
use crate::io::{PointCloud, PointLabel};
use crate::patches::{Patch, PatchSet};
use crate::ray::{sample_cone, side_key, trace_paths, PathSample, Scene, Side, TraceConfig};
use crate::rng::{Domain, KeyedRng};

/// Monte Carlo aggregates of one patch side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideStats {
    /// Sum of `ln(1 + l)` over all segments of all paths.
    pub length: f64,
    /// Mean number of hits per path.
    pub mean_bounces: f64,
}

pub fn accumulate_stats(samples: &[PathSample]) -> SideStats {
    assert!(!samples.is_empty(), "at least one path is required");
    let length = samples.iter().flat_map(|s| s.lengths.iter()).map(|&l| l.ln_1p()).sum();
    let total: usize = samples.iter().map(|s| s.bounces).sum();
    SideStats {
        length,
        mean_bounces: total as f64 / samples.len() as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchClass {
    /// Between rooms.
    In,
    /// Between a room and the outside.
    Ex,
    /// Clutter outside the building.
    Out,
}

impl PatchClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PatchClass::In => "in",
            PatchClass::Ex => "ex",
            PatchClass::Out => "out",
        }
    }
}

pub fn classify_patch(front: &SideStats, back: &SideStats, tau: f64) -> PatchClass {
    let front_open = front.mean_bounces < tau;
    let back_open = back.mean_bounces < tau;
    match (front_open, back_open) {
        (true, true) => PatchClass::Out,
        (true, false) | (false, true) => PatchClass::Ex,
        (false, false) => PatchClass::In,
    }
}

/// Orientation sign relative to the reference normal.
///
/// Exterior patches face away from their open side; interior patches face
/// the side with the larger accumulated length (ties go to the back).
pub fn orient_patch(class: PatchClass, front: &SideStats, back: &SideStats, tau: f64) -> Result<i8> {
    match class {
        PatchClass::Out => Err(Error::Pipeline("outside patches have no orientation".into())),
        PatchClass::Ex => Ok(if back.mean_bounces < tau { 1 } else { -1 }),
        PatchClass::In => Ok(if front.length > back.length { 1 } else { -1 }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceVote {
    pub plane_id: usize,
    pub theta: i64,
    pub voters: usize,
    /// Resulting orientation relative to the plane's reference normal.
    pub sign: i8,
}

/// Majority vote of oriented patch normals against the plane normal.
/// A tie flips the plane. `None` when nobody votes.
pub fn vote_surface(plane_id: usize, plane_normal: &Vector, oriented: &[Vector]) -> Option<SurfaceVote> {
    if oriented.is_empty() {
        return None;
    }
    let theta: i64 = oriented.iter().map(|n| signum(n.dot(plane_normal)) as i64).sum();
    Some(SurfaceVote {
        plane_id,
        theta,
        voters: oriented.len(),
        sign: if theta > 0 { 1 } else { -1 },
    })
}

/// Single-bounce façade check for one patch.
///
/// `signs[p']` is the current orientation of every patch; rays that escape
/// count zero. Returns `phi` and the corrected sign (kept only if `phi < 0`).
pub fn facade_correct(scene: &Scene, patch: &Patch, sign: i8, signs: &[Option<i8>], cfg: &TraceConfig) -> (i64, i8) {
    let axis = patch.normal * sign as f64;
    let key = side_key(&axis);
    let mut phi = 0i64;
    for ray in 0..cfg.rays as u64 {
        let mut rng = KeyedRng::new(cfg.seed, Domain::Facade, &[patch.id as u64, key, ray]);
        let dir = sample_cone(&axis, cfg.cone_half_angle_deg, &mut rng);
        if let Some(hit) = scene.intersect(&patch.center, &dir, cfg.t_min) {
            if let Some(s) = signs[hit.patch] {
                let hit_normal = scene.normal(hit.patch) * s as f64;
                phi += signum(hit_normal.dot(&dir)) as i64;
            }
        }
    }
    (phi, if phi < 0 { sign } else { -sign })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "1A")]
    P1A,
    #[serde(rename = "1B")]
    P1B,
    #[serde(rename = "2A")]
    P2A,
    #[serde(rename = "2B")]
    P2B,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::P1A, Phase::P1B, Phase::P2A, Phase::P2B];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::P1A => "1A",
            Phase::P1B => "1B",
            Phase::P2A => "2A",
            Phase::P2B => "2B",
        }
    }
}

/// Per-patch outcome. Signs are relative to the patch reference normal and
/// absent for outside patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchDecision {
    pub class: PatchClass,
    pub front: SideStats,
    pub back: SideStats,
    pub phi: Option<i64>,
    pub sign_1a: Option<i8>,
    pub sign_1b: Option<i8>,
    pub sign_2a: Option<i8>,
    pub sign_2b: Option<i8>,
}

impl PatchDecision {
    pub fn sign(&self, phase: Phase) -> Option<i8> {
        match phase {
            Phase::P1A => self.sign_1a,
            Phase::P1B => self.sign_1b,
            Phase::P2A => self.sign_2a,
            Phase::P2B => self.sign_2b,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub phase_1a_ms: f64,
    pub phase_1b_ms: f64,
    pub phase_2a_ms: f64,
    pub phase_2b_ms: f64,
}

impl PhaseTimings {
    pub fn total_ms(&self) -> f64 {
        self.phase_1a_ms + self.phase_1b_ms + self.phase_2a_ms + self.phase_2b_ms
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub decisions: Vec<PatchDecision>,
    pub votes_1b: Vec<SurfaceVote>,
    pub votes_2b: Vec<SurfaceVote>,
    /// Planes whose patches are all outside; they take no part in voting.
    pub dropped_planes: Vec<usize>,
    pub timings: PhaseTimings,
}

impl PipelineResult {
    pub fn signs(&self, phase: Phase) -> Vec<Option<i8>> {
        self.decisions.iter().map(|d| d.sign(phase)).collect()
    }

    /// Tab-separated phase table: patch id, class, signs at 1A/1B/2A/2B, phi.
    pub fn phase_table(&self) -> String {
        let fmt = |s: Option<i8>| s.map_or("-".to_string(), |v| format!("{v:+}"));
        let mut out = String::from("patch\tclass\t1A\t1B\t2A\t2B\tphi\n");
        for (i, d) in self.decisions.iter().enumerate() {
            out.push_str(&format!(
                "{i}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                d.class.as_str(),
                fmt(d.sign_1a),
                fmt(d.sign_1b),
                fmt(d.sign_2a),
                fmt(d.sign_2b),
                d.phi.map_or("-".to_string(), |p| p.to_string())
            ));
        }
        out
    }
}

fn vote_all(set: &PatchSet, signs: &[Option<i8>]) -> (Vec<SurfaceVote>, Vec<usize>, Vec<Option<i8>>) {
    let mut oriented: Vec<Vec<Vector>> = vec![Vec::new(); set.bitmaps.len()];
    for (p, s) in set.patches.iter().zip(signs) {
        if let Some(s) = s {
            oriented[p.plane_id].push(p.normal * *s as f64);
        }
    }
    let mut votes = Vec::new();
    let mut dropped = Vec::new();
    let mut plane_sign = vec![None; set.bitmaps.len()];
    for (plane_id, normals) in oriented.iter().enumerate() {
        match vote_surface(plane_id, &set.bitmaps[plane_id].normal, normals) {
            Some(v) => {
                plane_sign[plane_id] = Some(v.sign);
                votes.push(v);
            }
            None => dropped.push(plane_id),
        }
    }
    let out = set
        .patches
        .iter()
        .zip(signs)
        .map(|(p, s)| s.and(plane_sign[p.plane_id]))
        .collect();
    (votes, dropped, out)
}

/// Run both phases over the patch set. `scene` must be built from `set`
/// with all patches active.
pub fn run_pipeline(set: &PatchSet, scene: &Scene, cfg: &TraceConfig) -> Result<PipelineResult> {
    cfg.validate()?;
    if set.patches.is_empty() {
        return Err(Error::Pipeline("no patches to orient".into()));
    }
    if scene.len() != set.patches.len() {
        return Err(Error::InvalidInput("scene does not match the patch set".into()));
    }

    let t = Instant::now();
    let phase1: Vec<(PatchClass, SideStats, SideStats, Option<i8>)> = set
        .patches
        .par_iter()
        .map(|p| {
            let front = accumulate_stats(&trace_paths(scene, p, Side::Front, cfg));
            let back = accumulate_stats(&trace_paths(scene, p, Side::Back, cfg));
            let class = classify_patch(&front, &back, cfg.tau);
            let sign = orient_patch(class, &front, &back, cfg.tau).ok();
            (class, front, back, sign)
        })
        .collect();
    let signs_1a: Vec<Option<i8>> = phase1.iter().map(|x| x.3).collect();
    let phase_1a_ms = ms(t);

    let t = Instant::now();
    let (votes_1b, dropped_planes, signs_1b) = vote_all(set, &signs_1a);
    let phase_1b_ms = ms(t);

    let t = Instant::now();
    let active: Vec<bool> = signs_1b.iter().map(Option::is_some).collect();
    let inner = scene.with_active(&active);
    let facade: Vec<Option<(i64, i8)>> = set
        .patches
        .par_iter()
        .map(|p| signs_1b[p.id].map(|s| facade_correct(&inner, p, s, &signs_1b, cfg)))
        .collect();
    let signs_2a: Vec<Option<i8>> = facade.iter().map(|f| f.map(|x| x.1)).collect();
    let phase_2a_ms = ms(t);

    let t = Instant::now();
    let (votes_2b, _, signs_2b) = vote_all(set, &signs_2a);
    let phase_2b_ms = ms(t);

    let decisions = phase1
        .into_iter()
        .enumerate()
        .map(|(i, (class, front, back, _))| PatchDecision {
            class,
            front,
            back,
            phi: facade[i].map(|f| f.0),
            sign_1a: signs_1a[i],
            sign_1b: signs_1b[i],
            sign_2a: signs_2a[i],
            sign_2b: signs_2b[i],
        })
        .collect();
    Ok(PipelineResult {
        decisions,
        votes_1b,
        votes_2b,
        dropped_planes,
        timings: PhaseTimings {
            phase_1a_ms,
            phase_1b_ms,
            phase_2a_ms,
            phase_2b_ms,
        },
    })
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Point normals flipped to agree with their patch's orientation at `phase`.
/// Points without an orientation (off patches, outside patches, or normals
/// perpendicular to their patch) get the canonical sign, so the output never
/// depends on the signs of the input normals.
pub fn oriented_normals(cloud: &PointCloud, set: &PatchSet, result: &PipelineResult, phase: Phase) -> Result<Vec<Vector>> {
    let normals = cloud
        .normals()
        .ok_or_else(|| Error::InvalidInput("cloud has no normals to orient".into()))?;
    Ok(normals
        .iter()
        .zip(&set.point_patch)
        .map(|(n, pp)| {
            let target = pp.and_then(|p| result.decisions[p].sign(phase).map(|s| set.patches[p].normal * s as f64));
            let d = target.map_or(0.0, |t| n.dot(&t));
            if d > 0.0 {
                *n
            } else if d < 0.0 {
                -n
            } else {
                n * canonical_sign(n)
            }
        })
        .collect())
}

/// Classification label per point (interior / exterior / outside / off-patch).
pub fn class_labels(set: &PatchSet, result: &PipelineResult) -> Vec<PointLabel> {
    set.point_patch
        .iter()
        .map(|pp| match pp.map(|p| result.decisions[p].class) {
            None => PointLabel::OffPatch,
            Some(PatchClass::In) => PointLabel::Interior,
            Some(PatchClass::Ex) => PointLabel::Exterior,
            Some(PatchClass::Out) => PointLabel::Outside,
        })
        .collect()
}

/// Final (2B) oriented cloud plus per-point class labels.
pub fn propagate_to_points(cloud: &PointCloud, set: &PatchSet, result: &PipelineResult) -> Result<(PointCloud, Vec<PointLabel>)> {
    let mut out = cloud.clone();
    out.normals = Some(oriented_normals(cloud, set, result, Phase::P2B)?);
    Ok((out, class_labels(set, result)))
}
