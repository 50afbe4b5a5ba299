//! Greedy multi-plane RANSAC with normal-deviation and connectivity gates.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{canonical_sign, Point, Vector};
use crate::io::PointCloud;
use crate::knn::KnnIndex;
use crate::normals::pca_normal;
use crate::rng::{Domain, KeyedRng};

/// Second and third sample points are drawn from this many nearest
/// neighbors of the first one.
const SAMPLE_NEIGHBORHOOD: usize = 48;

/// Sampling attempts allowed per requested candidate before a round gives up.
const ATTEMPTS_PER_CANDIDATE: usize = 20;

/// An infinite plane `<normal, x> = offset` with an in-plane frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub id: usize,
    pub normal: Vector,
    pub offset: f64,
    pub frame_u: Vector,
    pub frame_v: Vector,
    pub inliers: Vec<usize>,
}

impl Plane {
    /// Plane with unit `normal`; the frame's `u` axis is the projection of
    /// the world axis least aligned with the normal.
    pub fn new(id: usize, normal: Vector, offset: f64) -> Self {
        let normal = normal.normalize();
        let mut axis = 0;
        for a in 1..3 {
            if normal[a].abs() < normal[axis].abs() {
                axis = a;
            }
        }
        let mut e = Vector::zeros();
        e[axis] = 1.0;
        let frame_u = (e - normal * normal.dot(&e)).normalize();
        let frame_v = normal.cross(&frame_u);
        Self {
            id,
            normal,
            offset,
            frame_u,
            frame_v,
            inliers: Vec::new(),
        }
    }

    pub fn through_point(id: usize, normal: Vector, point: &Point) -> Self {
        let n = normal.normalize();
        Self::new(id, n, n.dot(&point.coords))
    }

    #[inline]
    pub fn signed_distance(&self, p: &Point) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }

    /// In-plane coordinates of `p`'s orthogonal projection.
    #[inline]
    pub fn to_2d(&self, p: &Point) -> (f64, f64) {
        (self.frame_u.dot(&p.coords), self.frame_v.dot(&p.coords))
    }

    /// The point on the plane with in-plane coordinates `(u, v)`.
    #[inline]
    pub fn lift(&self, u: f64, v: f64) -> Point {
        Point::from(self.normal * self.offset + self.frame_u * u + self.frame_v * v)
    }

    pub fn project(&self, p: &Point) -> Point {
        let (u, v) = self.to_2d(p);
        self.lift(u, v)
    }

    #[inline]
    fn accepts(&self, p: &Point, n: &Vector, epsilon: f64, cos_alpha: f64) -> bool {
        self.signed_distance(p).abs() <= epsilon && self.normal.dot(n).abs() >= cos_alpha
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    /// Inlier distance threshold (m).
    pub epsilon: f64,
    /// Maximum deviation between point normal and plane normal (degrees).
    pub alpha_deg: f64,
    pub min_support: usize,
    /// Grid spacing (m) for the connected-component filter.
    pub connectivity_cell: f64,
    /// Candidate planes scored per extraction round.
    pub max_candidates: usize,
    pub seed: u64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            epsilon: 0.02,
            alpha_deg: 20.0,
            min_support: 500,
            connectivity_cell: 0.3,
            max_candidates: 48,
            seed: 0,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::param("epsilon", "must be positive"));
        }
        if !(self.alpha_deg > 0.0 && self.alpha_deg < 90.0) {
            return Err(Error::param("alpha", "must lie in (0, 90) degrees"));
        }
        if self.min_support < 3 {
            return Err(Error::param("min_support", "must be at least 3"));
        }
        if !(self.connectivity_cell > 0.0) {
            return Err(Error::param("connectivity_cell", "must be positive"));
        }
        if self.max_candidates == 0 {
            return Err(Error::param("max_candidates", "must be positive"));
        }
        Ok(())
    }

    fn cos_alpha(&self) -> f64 {
        self.alpha_deg.to_radians().cos()
    }
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub planes: Vec<Plane>,
    /// Owning plane per point.
    pub assignment: Vec<Option<usize>>,
}

impl Detection {
    pub fn assigned_fraction(&self) -> f64 {
        if self.assignment.is_empty() {
            return 0.0;
        }
        self.assignment.iter().filter(|a| a.is_some()).count() as f64 / self.assignment.len() as f64
    }
}

/// Unassigned points within `epsilon` of `plane` whose normal is within
/// `alpha_deg` of the plane normal (either sign).
pub fn plane_inliers(plane: &Plane, cloud: &PointCloud, unassigned: &[bool], epsilon: f64, alpha_deg: f64) -> Vec<usize> {
    let Some(normals) = cloud.normals() else {
        return Vec::new();
    };
    let cos_alpha = alpha_deg.to_radians().cos();
    cloud
        .points
        .par_iter()
        .zip(normals.par_iter())
        .enumerate()
        .filter(|(i, (p, n))| unassigned[*i] && plane.accepts(p, n, epsilon, cos_alpha))
        .map(|(i, _)| i)
        .collect()
}

pub fn detect_planes(cloud: &PointCloud, params: &DetectionParams) -> Result<Detection> {
    detect_planes_masked(cloud, params, None)
}

/// [`detect_planes`] with points flagged in `excluded` never assigned.
pub fn detect_planes_masked(cloud: &PointCloud, params: &DetectionParams, excluded: Option<&[bool]>) -> Result<Detection> {
    params.validate()?;
    let normals = cloud
        .normals()
        .ok_or_else(|| Error::InvalidInput("plane detection requires point normals".into()))?;
    let n = cloud.len();
    let mut assignment = vec![None; n];
    let mut planes = Vec::new();
    if n < params.min_support {
        return Ok(Detection { planes, assignment });
    }
    let index = KnnIndex::build(&cloud.points)?;
    let mut unassigned: Vec<bool> = match excluded {
        Some(mask) => mask.iter().map(|&e| !e).collect(),
        None => vec![true; n],
    };
    let cos_alpha = params.cos_alpha();

    for round in 0u64.. {
        let open: Vec<usize> = (0..n).filter(|&i| unassigned[i]).collect();
        if open.len() < params.min_support {
            break;
        }
        let candidates = draw_candidates(cloud, normals, &index, &unassigned, &open, params, round);
        if candidates.is_empty() {
            break;
        }
        let mut scored: Vec<(usize, usize)> = candidates
            .par_iter()
            .enumerate()
            .map(|(ci, plane)| {
                let count = open
                    .iter()
                    .filter(|&&i| plane.accepts(&cloud.points[i], &normals[i], params.epsilon, cos_alpha))
                    .count();
                (count, ci)
            })
            .collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

        let mut accepted = None;
        for &(count, ci) in &scored {
            if count < params.min_support {
                break;
            }
            if let Some(found) = extract(&candidates[ci], cloud, &unassigned, params) {
                accepted = Some(found);
                break;
            }
        }
        let Some(mut plane) = accepted else {
            break;
        };
        plane.id = planes.len();
        for &i in &plane.inliers {
            unassigned[i] = false;
            assignment[i] = Some(plane.id);
        }
        planes.push(plane);
    }
    Ok(Detection { planes, assignment })
}

/// Inliers of `candidate` reduced to their largest connected component, then
/// refined by a least-squares refit. `None` if support falls below the minimum.
fn extract(candidate: &Plane, cloud: &PointCloud, unassigned: &[bool], params: &DetectionParams) -> Option<Plane> {
    let inliers = plane_inliers(candidate, cloud, unassigned, params.epsilon, params.alpha_deg);
    let component = largest_component(candidate, &cloud.points, &inliers, params.connectivity_cell);
    if component.len() < params.min_support {
        return None;
    }
    let pts: Vec<Point> = component.iter().map(|&i| cloud.points[i]).collect();
    let (mut normal, _) = pca_normal(&pts);
    if normal.dot(&candidate.normal) < 0.0 {
        normal = -normal;
    }
    let centroid = pts.iter().fold(Vector::zeros(), |a, p| a + p.coords) / pts.len() as f64;
    let refit = Plane::new(0, normal, normal.dot(&centroid));
    let refit_inliers = plane_inliers(&refit, cloud, unassigned, params.epsilon, params.alpha_deg);
    let refit_component = largest_component(&refit, &cloud.points, &refit_inliers, params.connectivity_cell);

    let (mut plane, members) = if refit_component.len() >= component.len() {
        (refit, refit_component)
    } else {
        (candidate.clone(), component)
    };
    plane.inliers = members;
    Some(plane)
}

/// Largest 8-connected group of occupied grid cells (by point count).
pub(crate) fn largest_component(plane: &Plane, points: &[Point], members: &[usize], cell: f64) -> Vec<usize> {
    let mut cells: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for &i in members {
        let (u, v) = plane.to_2d(&points[i]);
        cells
            .entry(((u / cell).floor() as i64, (v / cell).floor() as i64))
            .or_default()
            .push(i);
    }
    let mut label: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut best: Option<(usize, usize)> = None; // (count, component id)
    let mut components: Vec<Vec<(i64, i64)>> = Vec::new();
    for &start in cells.keys() {
        if label.contains_key(&start) {
            continue;
        }
        let cid = components.len();
        let mut queue = VecDeque::from([start]);
        label.insert(start, cid);
        let mut comp = Vec::new();
        let mut count = 0;
        while let Some(c) = queue.pop_front() {
            count += cells[&c].len();
            comp.push(c);
            for di in -1..=1 {
                for dj in -1..=1 {
                    let nb = (c.0 + di, c.1 + dj);
                    if cells.contains_key(&nb) && !label.contains_key(&nb) {
                        label.insert(nb, cid);
                        queue.push_back(nb);
                    }
                }
            }
        }
        components.push(comp);
        if best.map_or(true, |(bc, _)| count > bc) {
            best = Some((count, cid));
        }
    }
    let Some((_, cid)) = best else {
        return Vec::new();
    };
    let mut out: Vec<usize> = components[cid].iter().flat_map(|c| cells[c].iter().copied()).collect();
    out.sort_unstable();
    out
}

fn draw_candidates(
    cloud: &PointCloud,
    normals: &[Vector],
    index: &KnnIndex,
    unassigned: &[bool],
    open: &[usize],
    params: &DetectionParams,
    round: u64,
) -> Vec<Plane> {
    let cos_alpha = params.cos_alpha();
    let mut rng = KeyedRng::new(params.seed, Domain::Ransac, &[round]);
    let mut out = Vec::with_capacity(params.max_candidates);
    for _ in 0..params.max_candidates * ATTEMPTS_PER_CANDIDATE {
        if out.len() == params.max_candidates {
            break;
        }
        let first = open[rng.below(open.len() as u64) as usize];
        let local: Vec<usize> = index
            .knn(&cloud.points[first], SAMPLE_NEIGHBORHOOD)
            .into_iter()
            .filter(|&i| i != first && unassigned[i])
            .collect();
        if local.len() < 2 {
            continue;
        }
        let a = rng.below(local.len() as u64) as usize;
        let mut b = rng.below(local.len() as u64 - 1) as usize;
        if b >= a {
            b += 1;
        }
        let sample = [first, local[a], local[b]];
        let [p0, p1, p2] = sample.map(|i| cloud.points[i]);
        let cross = (p1 - p0).cross(&(p2 - p0));
        let scale = (p1 - p0).norm() * (p2 - p0).norm();
        if scale == 0.0 || cross.norm() < 1e-3 * scale {
            continue;
        }
        let mut normal = cross.normalize();
        normal *= canonical_sign(&normal);
        if sample.iter().any(|&i| normals[i].dot(&normal).abs() < cos_alpha) {
            continue;
        }
        out.push(Plane::through_point(0, normal, &p0));
    }
    out
}
