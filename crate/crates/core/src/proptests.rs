//! Property tests for the module invariants.

use proptest::prelude::*;

use crate::eval::score_normals;
use crate::geom::{Point, Quad, Vector};
use crate::io::{parse_ply_bytes, ply_bytes, PointCloud, ScannerMetadata};
use crate::knn::KnnIndex;
use crate::normals::{estimate_normals, pca_normal};
use crate::patches::build_patches;
use crate::pipeline::{accumulate_stats, facade_correct, classify_patch, orient_patch, vote_surface, PatchClass};
use crate::ransac::{detect_planes, DetectionParams};
use crate::ray::{sample_cone, trace_paths, Bvh, Scene, Side, TraceConfig};
use crate::rng::{Domain, KeyedRng};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 32,
        ..ProptestConfig::default()
    }
}

fn coord() -> impl Strategy<Value = f64> {
    -50.0..50.0f64
}

fn point() -> impl Strategy<Value = Point> {
    (coord(), coord(), coord()).prop_map(|(x, y, z)| Point::new(x, y, z))
}

fn unit() -> impl Strategy<Value = Vector> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("non-degenerate", |(x, y, z)| x * x + y * y + z * z > 0.01)
        .prop_map(|(x, y, z)| Vector::new(x, y, z).normalize())
}

fn cloud(max: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec((point(), unit(), 0u32..5), 1..max).prop_map(|v| PointCloud {
        points: v.iter().map(|x| x.0).collect(),
        normals: Some(v.iter().map(|x| x.1).collect()),
        scan_ids: Some(v.iter().map(|x| x.2).collect()),
        colors: None,
    })
}

/// Random rotation from a unit quaternion.
fn rotation() -> impl Strategy<Value = nalgebra::Rotation3<f64>> {
    (unit(), 0.0..std::f64::consts::TAU).prop_map(|(axis, angle)| {
        nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle)
    })
}

/// Grid samples on the plane through `origin` spanned by the frame of `n`.
fn plane_grid(origin: Point, n: Vector, count: usize, spacing: f64) -> Vec<Point> {
    let (u, v) = crate::geom::orthonormal_basis(&n);
    let mut pts = Vec::new();
    for i in 0..count {
        for j in 0..count {
            pts.push(origin + u * (i as f64 * spacing) + v * (j as f64 * spacing));
        }
    }
    pts
}

/// Closed cube of side 3, four quads per face, normals along +axis.
fn cube() -> (Vec<Quad>, Vec<Vector>) {
    let mut quads = Vec::new();
    let mut normals = Vec::new();
    for axis in 0..3 {
        let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
        for level in [0.0, 3.0] {
            for i in 0..2 {
                for j in 0..2 {
                    let mut o = Point::origin();
                    o[axis] = level;
                    o[a] = i as f64 * 1.5;
                    o[b] = j as f64 * 1.5;
                    let mut eu = Vector::zeros();
                    eu[a] = 1.5;
                    let mut ev = Vector::zeros();
                    ev[b] = 1.5;
                    quads.push(Quad::new(o, eu, ev));
                    let mut n = Vector::zeros();
                    n[axis] = 1.0;
                    normals.push(n);
                }
            }
        }
    }
    (quads, normals)
}

fn bare_patch(id: usize, quad: &Quad, normal: Vector) -> crate::patches::Patch {
    crate::patches::Patch {
        id,
        plane_id: 0,
        cell: (0, 0),
        center: quad.center(),
        normal,
        members: vec![],
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn ply_binary_round_trip_is_exact(c in cloud(200)) {
        let back = parse_ply_bytes(&ply_bytes(&c, true)).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn ply_ascii_round_trip_within_tolerance(c in cloud(100)) {
        let back = parse_ply_bytes(&ply_bytes(&c, false)).unwrap();
        prop_assert_eq!(back.len(), c.len());
        prop_assert_eq!(&back.points, &c.points);
        for (a, b) in back.normals.unwrap().iter().zip(c.normals.as_ref().unwrap()) {
            prop_assert!((a - b).norm() <= 1e-6);
        }
        prop_assert_eq!(back.scan_ids, c.scan_ids);
    }

    #[test]
    fn label_colors_keep_count_and_order(c in cloud(100)) {
        let mut colored = c.clone();
        colored.colors = Some(vec![[1, 2, 3]; c.len()]);
        let back = parse_ply_bytes(&ply_bytes(&colored, true)).unwrap();
        prop_assert_eq!(back.points, c.points);
    }

    #[test]
    fn knn_matches_brute_force(pts in prop::collection::vec(point(), 1..300), q in point(), k in 1usize..20) {
        let index = KnnIndex::build(&pts).unwrap();
        let mut brute: Vec<(f64, usize)> = pts.iter().enumerate().map(|(i, p)| ((p - q).norm_squared(), i)).collect();
        brute.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let expected: Vec<usize> = brute.iter().take(k).map(|x| x.1).collect();
        prop_assert_eq!(index.knn(&q, k), expected);
    }

    #[test]
    fn coplanar_pca_normal_exact(n in unit(), o in point(), count in 3usize..8) {
        let pts = plane_grid(o, n, count, 0.1);
        let (est, degenerate) = pca_normal(&pts);
        prop_assert!(!degenerate);
        prop_assert!((est.norm() - 1.0).abs() < 1e-12);
        prop_assert!(1.0 - est.dot(&n).abs() < 1e-9, "{:?} vs {:?}", est, n);
    }

    #[test]
    fn normals_are_rotation_equivariant(rot in rotation(), seed in 0u64..1000) {
        // gently curved patch so neighbourhoods are well conditioned
        let mut r = KeyedRng::new(seed, Domain::Test, &[]);
        let pts: Vec<Point> = (0..400)
            .map(|_| {
                let (x, y) = (r.next_f64() * 2.0, r.next_f64() * 2.0);
                Point::new(x, y, 0.05 * (x * x - y))
            })
            .collect();
        let a = PointCloud::from_points(pts.clone());
        let b = PointCloud::from_points(pts.iter().map(|p| rot * p).collect());
        let ea = estimate_normals(&a, &KnnIndex::build(&a.points).unwrap(), 12).unwrap();
        let eb = estimate_normals(&b, &KnnIndex::build(&b.points).unwrap(), 12).unwrap();
        for (na, nb) in ea.cloud.normals.unwrap().iter().zip(eb.cloud.normals.as_ref().unwrap()) {
            prop_assert!((na.norm() - 1.0).abs() < 1e-9);
            prop_assert!(1.0 - (rot * na).dot(nb).abs() < 1e-6);
        }
    }

    #[test]
    fn ransac_inliers_disjoint_valid_and_deterministic(
        n1 in unit(), n2 in unit(), d in 0.5..3.0f64, seed in 0u64..100,
    ) {
        let mut pts = plane_grid(Point::origin(), n1, 30, 0.05);
        pts.extend(plane_grid(Point::from(n2 * d), n2, 30, 0.05));
        let mut normals: Vec<Vector> = vec![n1; 900];
        normals.extend(vec![-n2; 900]);
        let c = PointCloud { points: pts, normals: Some(normals.clone()), ..Default::default() };
        let params = DetectionParams { min_support: 200, seed, ..Default::default() };
        let det = detect_planes(&c, &params).unwrap();
        let mut seen = vec![false; c.len()];
        let cos_a = params.alpha_deg.to_radians().cos();
        for plane in &det.planes {
            for &i in &plane.inliers {
                prop_assert!(!seen[i]);
                seen[i] = true;
                prop_assert!(plane.signed_distance(&c.points[i]).abs() <= params.epsilon);
                prop_assert!(normals[i].dot(&plane.normal).abs() >= cos_a);
            }
        }
        let again = detect_planes(&c, &params).unwrap();
        prop_assert_eq!(again.assignment, det.assignment);
    }

    #[test]
    fn patches_partition_inliers(n in unit(), count in 5usize..40, cell in 0.05..0.5f64) {
        let pts = plane_grid(Point::new(0.3, -0.2, 0.1), n, count, 0.037);
        let c = PointCloud::from_points(pts);
        let mut plane = crate::ransac::Plane::through_point(0, n, &c.points[0]);
        plane.inliers = (0..c.len()).collect();
        let set = build_patches(&[plane], &c, cell).unwrap();
        let mut members: Vec<usize> = set.patches.iter().flat_map(|p| p.members.iter().copied()).collect();
        members.sort_unstable();
        prop_assert_eq!(members, (0..c.len()).collect::<Vec<_>>());
        let ones: usize = set.bitmaps.iter().map(|b| b.count_ones()).sum();
        prop_assert_eq!(ones, set.patches.len());
        let bm = &set.bitmaps[0];
        for p in &set.patches {
            prop_assert!(bm.get(p.cell.0, p.cell.1));
            for &m in &p.members {
                let q = c.points[m].coords;
                prop_assert_eq!(bm.cell_of(q.dot(&bm.frame_u), q.dot(&bm.frame_v)), Some(p.cell));
            }
        }
    }

    #[test]
    fn bvh_matches_linear_scan(seed in 0u64..10_000, n in 1usize..200) {
        let mut r = KeyedRng::new(seed, Domain::Test, &[]);
        let quads: Vec<Quad> = (0..n)
            .map(|_| {
                let o = Point::new(r.next_f64() * 10.0, r.next_f64() * 10.0, r.next_f64() * 10.0);
                let a = Vector::new(r.next_gaussian(), r.next_gaussian(), r.next_gaussian());
                let b = Vector::new(r.next_gaussian(), r.next_gaussian(), r.next_gaussian());
                Quad::new(o, a, b)
            })
            .collect();
        let bvh = Bvh::build(&quads, 0..n);
        for _ in 0..50 {
            let o = Point::new(r.next_f64() * 10.0, r.next_f64() * 10.0, r.next_f64() * 10.0);
            let d = Vector::new(r.next_gaussian(), r.next_gaussian(), r.next_gaussian()).normalize();
            let mut best: Option<(usize, f64)> = None;
            for (i, q) in quads.iter().enumerate() {
                if let Some(t) = q.intersect(&o, &d, 1e-3) {
                    if best.map_or(true, |b| t < b.1) {
                        best = Some((i, t));
                    }
                }
            }
            prop_assert_eq!(bvh.intersect(&o, &d, 1e-3).map(|h| (h.primitive, h.t)), best);
        }
    }

    #[test]
    fn cone_samples_stay_in_cap(axis in unit(), half in 1.0..89.0f64, seed: u64) {
        let mut r = KeyedRng::new(seed, Domain::Test, &[]);
        let cos_max = half.to_radians().cos();
        for _ in 0..200 {
            let d = sample_cone(&axis, half, &mut r);
            prop_assert!((d.norm() - 1.0).abs() < 1e-12);
            prop_assert!(d.dot(&axis) >= cos_max - 1e-12);
        }
    }

    #[test]
    fn tracing_ignores_reference_signs(flips in prop::collection::vec(any::<bool>(), 24), patch in 0usize..24, seed: u64) {
        let (quads, normals) = cube();
        let scene = Scene::new(quads.clone(), normals.clone());
        let flipped: Vec<Vector> = normals.iter().zip(&flips).map(|(n, f)| if *f { -n } else { *n }).collect();
        let other = scene.with_normals(flipped.clone());
        let cfg = TraceConfig { rays: 10, seed, ..Default::default() };
        let p = bare_patch(patch, &quads[patch], normals[patch]);
        let q = crate::patches::Patch { normal: flipped[patch], ..p.clone() };
        for side in [Side::Front, Side::Back] {
            let other_side = if flips[patch] { side.opposite() } else { side };
            let a = trace_paths(&scene, &p, side, &cfg);
            let b = trace_paths(&other, &q, other_side, &cfg);
            for s in &a {
                prop_assert!(s.bounces <= cfg.bounces);
                prop_assert!(s.lengths[s.bounces..].iter().all(|&l| l == 0.0));
                prop_assert!(s.lengths[..s.bounces].iter().all(|&l| l > 0.0));
            }
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn facade_phi_bounded_by_rays(
        signs in prop::collection::vec(prop::option::of(prop_oneof![Just(1i8), Just(-1i8)]), 24),
        patch in 0usize..24, sign in prop_oneof![Just(1i8), Just(-1i8)], rays in 1usize..40, seed: u64,
    ) {
        let (quads, normals) = cube();
        let scene = Scene::new(quads.clone(), normals.clone());
        let cfg = TraceConfig { rays, seed, ..Default::default() };
        let p = bare_patch(patch, &quads[patch], normals[patch]);
        let (phi, out) = facade_correct(&scene, &p, sign, &signs, &cfg);
        prop_assert!(phi.unsigned_abs() as usize <= rays);
        prop_assert_eq!(out, if phi < 0 { sign } else { -sign });
    }

    #[test]
    fn class_and_orientation_rules(bp in 0.0..8.0f64, bm in 0.0..8.0f64, lp in 0.0..500.0f64, lm in 0.0..500.0f64, tau in 0.5..8.0f64) {
        let front = crate::pipeline::SideStats { length: lp, mean_bounces: bp };
        let back = crate::pipeline::SideStats { length: lm, mean_bounces: bm };
        let class = classify_patch(&front, &back, tau);
        // swapping the sides never changes the class and flips the orientation
        prop_assert_eq!(classify_patch(&back, &front, tau), class);
        match class {
            PatchClass::Out => prop_assert!(orient_patch(class, &front, &back, tau).is_err()),
            PatchClass::Ex => {
                let s = orient_patch(class, &front, &back, tau).unwrap();
                prop_assert_eq!(s, orient_patch(class, &back, &front, tau).unwrap() * -1);
            }
            PatchClass::In => {
                let s = orient_patch(class, &front, &back, tau).unwrap();
                prop_assert_eq!(s, if lp > lm { 1 } else { -1 });
            }
        }
    }

    #[test]
    fn votes_are_bounded_and_unanimous(signs in prop::collection::vec(prop::bool::ANY, 1..50), n in unit()) {
        let oriented: Vec<Vector> = signs.iter().map(|&s| if s { n } else { -n }).collect();
        let v = vote_surface(0, &n, &oriented).unwrap();
        prop_assert!(v.theta.unsigned_abs() as usize <= signs.len());
        prop_assert_eq!(v.voters, signs.len());
        let plus = signs.iter().filter(|&&s| s).count() as i64;
        prop_assert_eq!(v.theta, 2 * plus - signs.len() as i64);
    }

    #[test]
    fn stats_bounds(lengths in prop::collection::vec(prop::collection::vec(0.0..20.0f64, 8), 1..20)) {
        let samples: Vec<crate::ray::PathSample> = lengths
            .iter()
            .map(|l| {
                let b = l.iter().take_while(|&&x| x > 0.0).count();
                let mut l = l.clone();
                for x in &mut l[b..] {
                    *x = 0.0;
                }
                crate::ray::PathSample { lengths: l, bounces: b }
            })
            .collect();
        let s = accumulate_stats(&samples);
        prop_assert!(s.length >= 0.0);
        prop_assert!(s.mean_bounces >= 0.0 && s.mean_bounces <= 8.0);
    }

    #[test]
    fn scoring_is_pure_and_complementary(c in cloud(100), scope_bits in prop::collection::vec(any::<bool>(), 100)) {
        let scanners = ScannerMetadata::from_positions((0..5).map(|i| Point::new(i as f64 * 7.0, 3.0, -2.0)));
        let scope: Vec<bool> = scope_bits[..c.len()].to_vec();
        let normals = c.normals.clone().unwrap();
        let (a, ua) = score_normals(&c, &normals, &scanners, &scope, "x").unwrap();
        let (b, ub) = score_normals(&c, &normals, &scanners, &scope, "x").unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(ua, ub);
        let neg: Vec<Vector> = normals.iter().map(|n| -n).collect();
        let (n, _) = score_normals(&c, &neg, &scanners, &scope, "x").unwrap();
        prop_assert_eq!(n.total, a.total);
        prop_assert_eq!(n.correct, a.total - a.correct);
    }
}
