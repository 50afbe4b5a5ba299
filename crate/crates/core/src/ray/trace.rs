use crate::geom::{canonical_sign, Point, Vector};
use crate::patches::Patch;
use crate::rng::{Domain, KeyedRng};

use super::{sample_cone, Scene, TraceConfig};

/// Which side of a patch a ray batch leaves from, relative to its reference normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Front,
    Back,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Front => 1.0,
            Side::Back => -1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Front => Side::Back,
            Side::Back => Side::Front,
        }
    }
}

/// Stream key for a launch direction. Derived from the geometric direction,
/// not from the side label, so flipping a reference normal and the side
/// together reproduces the same random numbers.
pub fn side_key(axis: &Vector) -> u64 {
    if canonical_sign(axis) > 0.0 {
        0
    } else {
        1
    }
}

/// One traced path: segment lengths (zero after termination) and hit count.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub lengths: Vec<f64>,
    pub bounces: usize,
}

/// Trace `cfg.rays` paths from the patch center into the cone around
/// `side · normal`.
///
/// At every hit the next direction is drawn from the cone around the hit
/// patch's normal, flipped to face the incoming ray. A path ends when it
/// escapes or after `cfg.bounces` hits.
pub fn trace_paths(scene: &Scene, patch: &Patch, side: Side, cfg: &TraceConfig) -> Vec<PathSample> {
    let launch_axis = patch.normal * side.sign();
    let key = side_key(&launch_axis);
    (0..cfg.rays)
        .map(|ray| trace_one(scene, patch.id, &patch.center, launch_axis, key, ray as u64, cfg))
        .collect()
}

fn trace_one(scene: &Scene, patch_id: usize, start: &Point, launch_axis: Vector, key: u64, ray: u64, cfg: &TraceConfig) -> PathSample {
    let mut lengths = vec![0.0; cfg.bounces];
    let mut bounces = 0;
    let mut origin = *start;
    let mut axis = launch_axis;
    for (j, slot) in lengths.iter_mut().enumerate() {
        let mut rng = KeyedRng::new(cfg.seed, Domain::PathTrace, &[patch_id as u64, key, ray, j as u64]);
        let dir = sample_cone(&axis, cfg.cone_half_angle_deg, &mut rng);
        let Some(hit) = scene.intersect(&origin, &dir, cfg.t_min) else {
            break;
        };
        *slot = hit.distance;
        bounces += 1;
        let n = scene.normal(hit.patch);
        axis = if n.dot(&dir) < 0.0 { *n } else { -n };
        origin = hit.point;
    }
    PathSample { lengths, bounces }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Quad;

    fn patch_at(id: usize, center: Point, normal: Vector) -> Patch {
        Patch {
            id,
            plane_id: 0,
            cell: (0, 0),
            center,
            normal,
            members: vec![],
        }
    }

    /// Closed axis-aligned box [0, s]^3 tiled with `cells` x `cells` quads
    /// per face. Normals alternate in sign to exercise sign invariance.
    fn closed_box(s: f64, cells: usize) -> (Scene, Vec<Patch>) {
        let c = s / cells as f64;
        let mut quads = Vec::new();
        let mut normals = Vec::new();
        for axis in 0..3 {
            let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
            for level in [0.0, s] {
                for i in 0..cells {
                    for j in 0..cells {
                        let mut o = Point::origin();
                        o[axis] = level;
                        o[ua] = i as f64 * c;
                        o[va] = j as f64 * c;
                        let mut eu = Vector::zeros();
                        eu[ua] = c;
                        let mut ev = Vector::zeros();
                        ev[va] = c;
                        quads.push(Quad::new(o, eu, ev));
                        let mut n = Vector::zeros();
                        n[axis] = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                        normals.push(n);
                    }
                }
            }
        }
        let patches = quads
            .iter()
            .zip(&normals)
            .enumerate()
            .map(|(id, (q, n))| patch_at(id, q.center(), *n))
            .collect();
        (Scene::new(quads, normals), patches)
    }

    fn inward_side(p: &Patch, center: &Point) -> Side {
        if p.normal.dot(&(center - p.center)) > 0.0 {
            Side::Front
        } else {
            Side::Back
        }
    }

    #[test]
    fn closed_box_barely_escapes() {
        // Paths can only leak through a seam when a hit lands within t_min
        // of a box edge, so nearly every path runs the full bounce budget.
        let (scene, patches) = closed_box(4.0, 4);
        let cfg = TraceConfig::default();
        let center = Point::new(2.0, 2.0, 2.0);
        let mut full = 0;
        let mut total = 0;
        for p in patches.iter().step_by(7) {
            let samples = trace_paths(&scene, p, inward_side(p, &center), &cfg);
            assert_eq!(samples.len(), cfg.rays);
            for s in &samples {
                assert!(s.bounces >= 1);
                assert!(s.lengths[..s.bounces].iter().all(|&l| l > 0.0));
                full += usize::from(s.bounces == cfg.bounces);
                total += 1;
            }
        }
        assert!(full as f64 >= 0.97 * total as f64, "{full}/{total}");
    }

    #[test]
    fn open_side_escapes_immediately() {
        let (scene, patches) = closed_box(4.0, 4);
        let cfg = TraceConfig::default();
        let center = Point::new(2.0, 2.0, 2.0);
        let p = &patches[5];
        for s in trace_paths(&scene, p, inward_side(p, &center).opposite(), &cfg) {
            assert_eq!(s.bounces, 0);
            assert!(s.lengths.iter().all(|&l| l == 0.0));
        }
    }

    #[test]
    fn parallel_walls_segment_bounds() {
        // Two 200 m x 200 m walls 3 m apart: nearly every ray bounces between them.
        let big = 200.0;
        let cells = 40;
        let c = big / cells as f64;
        let mut quads = Vec::new();
        for z in [0.0, 3.0] {
            for i in 0..cells {
                for j in 0..cells {
                    quads.push(Quad::new(
                        Point::new(i as f64 * c - big / 2.0, j as f64 * c - big / 2.0, z),
                        Vector::x() * c,
                        Vector::y() * c,
                    ));
                }
            }
        }
        let normals = vec![Vector::z(); quads.len()];
        let scene = Scene::new(quads, normals);
        let p = patch_at(0, Point::origin(), Vector::z());
        let cfg = TraceConfig::default();
        for s in trace_paths(&scene, &p, Side::Front, &cfg) {
            assert_eq!(s.bounces, 8);
            for &l in &s.lengths {
                assert!(l >= 3.0 - 1e-9 && l <= 6.0 + 1e-9, "segment {l}");
            }
        }
    }

    #[test]
    fn reference_sign_invariance() {
        let (scene, patches) = closed_box(4.0, 3);
        let flipped_normals: Vec<Vector> = (0..scene.len()).map(|i| -scene.normal(i)).collect();
        let flipped = scene.with_normals(flipped_normals);
        let cfg = TraceConfig {
            seed: 99,
            ..Default::default()
        };
        for p in &patches {
            let fp = Patch {
                normal: -p.normal,
                ..p.clone()
            };
            for side in [Side::Front, Side::Back] {
                let a = trace_paths(&scene, p, side, &cfg);
                let b = trace_paths(&flipped, &fp, side.opposite(), &cfg);
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn zero_padding_beyond_bounce_count() {
        // a single floor: paths hit once, then escape upward
        let q = Quad::new(Point::new(-50.0, -50.0, 0.0), Vector::x() * 100.0, Vector::y() * 100.0);
        let scene = Scene::new(vec![q], vec![Vector::z()]);
        let p = patch_at(7, Point::new(0.0, 0.0, 2.0), Vector::z());
        for s in trace_paths(&scene, &p, Side::Back, &TraceConfig::default()) {
            assert_eq!(s.bounces, 1);
            assert!(s.lengths[0] >= 2.0);
            assert!(s.lengths[1..].iter().all(|&l| l == 0.0));
        }
    }
}
