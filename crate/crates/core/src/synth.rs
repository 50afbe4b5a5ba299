//! Parametric axis-aligned buildings and a terrestrial scanner simulator.
//!
//! Rooms sit on a `stories x rows x cols` grid. Every wall, floor and
//! ceiling is a slab of constant thickness: a room contributes its six
//! inner faces, and wherever a room borders the outside (or a void cell)
//! the slab's outer face is added as well. Openings are cut through both
//! faces of a slab and lined with four reveal faces.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{canonical_sign, Point, Quad, Vector};
use crate::io::{PointCloud, ScannerMetadata};
use crate::ray::Bvh;
use crate::rng::{Domain, KeyedRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RoomId {
    pub story: usize,
    pub row: usize,
    pub col: usize,
}

impl RoomId {
    pub fn new(story: usize, row: usize, col: usize) -> Self {
        Self { story, row, col }
    }
}

impl fmt::Display for RoomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.story, self.row, self.col)
    }
}

/// Face of a room's interior box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    West,
    East,
    South,
    North,
    Floor,
    Ceiling,
}

impl Side {
    pub const ALL: [Side; 6] = [Side::West, Side::East, Side::South, Side::North, Side::Floor, Side::Ceiling];

    fn parse(s: &str) -> Option<Side> {
        Some(match s.to_ascii_lowercase().as_str() {
            "west" => Side::West,
            "east" => Side::East,
            "south" => Side::South,
            "north" => Side::North,
            "floor" => Side::Floor,
            "ceiling" => Side::Ceiling,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Side::West => "west",
            Side::East => "east",
            Side::South => "south",
            Side::North => "north",
            Side::Floor => "floor",
            Side::Ceiling => "ceiling",
        }
    }

    /// (axis, +1 if the face is at the max end of the box).
    fn axis(self) -> (usize, bool) {
        match self {
            Side::West => (0, false),
            Side::East => (0, true),
            Side::South => (1, false),
            Side::North => (1, true),
            Side::Floor => (2, false),
            Side::Ceiling => (2, true),
        }
    }

    fn opposite(self) -> Side {
        match self {
            Side::West => Side::East,
            Side::East => Side::West,
            Side::South => Side::North,
            Side::North => Side::South,
            Side::Floor => Side::Ceiling,
            Side::Ceiling => Side::Floor,
        }
    }

    /// In-face axes `(a, b)`. Vertical walls use `b = z`.
    fn face_axes(self) -> (usize, usize) {
        match self.axis().0 {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        }
    }

    fn is_wall(self) -> bool {
        self.axis().0 != 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpeningKind {
    Door,
    Window,
}

/// Rectangular hole through the wall `side` of `room`, in wall coordinates:
/// `u` runs along the wall from its low-coordinate end, `z` up from the floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Opening {
    pub kind: OpeningKind,
    pub room: RoomId,
    pub side: Side,
    pub u0: f64,
    pub z0: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingSpec {
    pub stories: usize,
    pub rows: usize,
    pub cols: usize,
    /// Interior room size (x, y, height) in meters.
    pub room_size: [f64; 3],
    pub wall_thickness: f64,
    /// Grid cells left empty (courtyards).
    pub voids: Vec<RoomId>,
    pub openings: Vec<Opening>,
    /// Free-standing rectangles outside the building.
    pub clutter: Vec<Quad>,
}

impl Default for BuildingSpec {
    fn default() -> Self {
        Self {
            stories: 1,
            rows: 1,
            cols: 1,
            room_size: [6.0, 5.0, 3.0],
            wall_thickness: 0.2,
            voids: Vec::new(),
            openings: Vec::new(),
            clutter: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfaceKind {
    /// Inner face of a room.
    Inner(Side),
    /// Outer face of a slab bordering the outside.
    Outer(Side),
    /// Lining of an opening.
    Reveal,
    Clutter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub quad: Quad,
    /// Unit normal pointing into the room (inner faces), away from the
    /// building (outer faces), into the opening (reveals), or `edge_u x edge_v`
    /// for clutter.
    pub normal: Vector,
    /// Room the face belongs to; `None` for outer faces and clutter.
    pub room: Option<RoomId>,
    pub kind: SurfaceKind,
    /// Whether a room lies on the far side of the slab.
    pub shared: bool,
}

#[derive(Debug, Clone)]
pub struct SurfaceModel {
    pub surfaces: Vec<Surface>,
    pub spec: BuildingSpec,
}

impl BuildingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.stories == 0 || self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidSpec("stories, rows and cols must be positive".into()));
        }
        if self.room_size.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidSpec("room_size must be positive".into()));
        }
        if !(self.wall_thickness > 0.0) {
            return Err(Error::InvalidSpec("wall_thickness must be positive".into()));
        }
        for v in &self.voids {
            self.check_cell(v)?;
        }
        for o in &self.openings {
            self.check_cell(&o.room)?;
            if self.voids.contains(&o.room) {
                return Err(Error::InvalidSpec(format!("opening in void cell {}", o.room)));
            }
            if !o.side.is_wall() {
                return Err(Error::InvalidSpec("openings must be on walls".into()));
            }
            let len = self.room_size[o.side.face_axes().0];
            let h = self.room_size[2];
            let ok = o.u0 >= 0.0 && o.z0 >= 0.0 && o.width > 0.0 && o.height > 0.0 && o.u0 + o.width <= len && o.z0 + o.height <= h;
            if !ok {
                return Err(Error::InvalidSpec(format!(
                    "opening on {} wall of room {} exceeds the wall",
                    o.side.name(),
                    o.room
                )));
            }
        }
        Ok(())
    }

    fn check_cell(&self, r: &RoomId) -> Result<()> {
        if r.story >= self.stories || r.row >= self.rows || r.col >= self.cols {
            return Err(Error::InvalidSpec(format!("cell {r} outside the {}x{}x{} grid", self.stories, self.rows, self.cols)));
        }
        Ok(())
    }

    pub fn is_room(&self, r: &RoomId) -> bool {
        r.story < self.stories && r.row < self.rows && r.col < self.cols && !self.voids.contains(r)
    }

    pub fn rooms(&self) -> Vec<RoomId> {
        let mut out = Vec::new();
        for story in 0..self.stories {
            for row in 0..self.rows {
                for col in 0..self.cols {
                    let r = RoomId { story, row, col };
                    if self.is_room(&r) {
                        out.push(r);
                    }
                }
            }
        }
        out
    }

    /// Interior box `(min, max)` of a grid cell.
    pub fn cell_box(&self, r: &RoomId) -> (Point, Point) {
        let t = self.wall_thickness;
        let [sx, sy, sz] = self.room_size;
        let min = Point::new(
            t + r.col as f64 * (sx + t),
            t + r.row as f64 * (sy + t),
            t + r.story as f64 * (sz + t),
        );
        (min, min + Vector::new(sx, sy, sz))
    }

    pub fn room_center(&self, r: &RoomId) -> Point {
        let (a, b) = self.cell_box(r);
        nalgebra::center(&a, &b)
    }

    /// Outer bounds of the whole building envelope.
    pub fn envelope(&self) -> (Point, Point) {
        let t = self.wall_thickness;
        let [sx, sy, sz] = self.room_size;
        (
            Point::origin(),
            Point::new(
                t + self.cols as f64 * (sx + t),
                t + self.rows as f64 * (sy + t),
                t + self.stories as f64 * (sz + t),
            ),
        )
    }

    fn neighbor(&self, r: &RoomId, side: Side) -> Option<RoomId> {
        let (axis, max) = side.axis();
        let step = |v: usize, lim: usize| -> Option<usize> {
            if max {
                (v + 1 < lim).then_some(v + 1)
            } else {
                v.checked_sub(1)
            }
        };
        let n = match axis {
            0 => RoomId { col: step(r.col, self.cols)?, ..*r },
            1 => RoomId { row: step(r.row, self.rows)?, ..*r },
            _ => RoomId { story: step(r.story, self.stories)?, ..*r },
        };
        self.is_room(&n).then_some(n)
    }
}

/// A face rectangle in its own `(a, b)` parameterization.
#[derive(Debug, Clone, Copy)]
struct Face {
    origin: Point,
    axis_a: Vector,
    axis_b: Vector,
    len_a: f64,
    len_b: f64,
}

impl Face {
    fn quad(&self, a0: f64, a1: f64, b0: f64, b1: f64) -> Quad {
        Quad::new(
            self.origin + self.axis_a * a0 + self.axis_b * b0,
            self.axis_a * (a1 - a0),
            self.axis_b * (b1 - b0),
        )
    }
}

/// `face` minus the holes `(a0, b0, a1, b1)`, as row-merged rectangles.
fn subtract_holes(face: &Face, holes: &[[f64; 4]]) -> Vec<Quad> {
    let mut a_cuts = vec![0.0, face.len_a];
    let mut b_cuts = vec![0.0, face.len_b];
    for h in holes {
        a_cuts.extend([h[0], h[2]]);
        b_cuts.extend([h[1], h[3]]);
    }
    for cuts in [&mut a_cuts, &mut b_cuts] {
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
    }
    let inside_hole = |a: f64, b: f64| holes.iter().any(|h| a > h[0] && a < h[2] && b > h[1] && b < h[3]);
    let mut out = Vec::new();
    for bw in b_cuts.windows(2) {
        let bm = 0.5 * (bw[0] + bw[1]);
        let mut run: Option<f64> = None;
        for aw in a_cuts.windows(2) {
            let am = 0.5 * (aw[0] + aw[1]);
            if inside_hole(am, bm) {
                if let Some(start) = run.take() {
                    out.push(face.quad(start, aw[0], bw[0], bw[1]));
                }
            } else if run.is_none() {
                run = Some(aw[0]);
            }
        }
        if let Some(start) = run {
            out.push(face.quad(start, face.len_a, bw[0], bw[1]));
        }
    }
    out
}

fn unit(axis: usize) -> Vector {
    let mut v = Vector::zeros();
    v[axis] = 1.0;
    v
}

/// Build the surface model of `spec`.
pub fn build_building(spec: &BuildingSpec) -> Result<SurfaceModel> {
    spec.validate()?;
    let t = spec.wall_thickness;

    // holes per (room, side) in that face's own (a, b) coordinates;
    // outer faces use the key (room, side) with an offset applied later
    let mut inner_holes: BTreeMap<(RoomId, Side), Vec<[f64; 4]>> = BTreeMap::new();
    let mut outer_holes: BTreeMap<(RoomId, Side), Vec<[f64; 4]>> = BTreeMap::new();
    let mut reveals = Vec::new();
    for o in &spec.openings {
        let hole = [o.u0, o.z0, o.u0 + o.width, o.z0 + o.height];
        inner_holes.entry((o.room, o.side)).or_default().push(hole);
        match spec.neighbor(&o.room, o.side) {
            Some(nb) => inner_holes.entry((nb, o.side.opposite())).or_default().push(hole),
            None => outer_holes.entry((o.room, o.side)).or_default().push(hole),
        }
        reveals.extend(opening_reveals(spec, o));
    }
    for (key, holes) in inner_holes.iter().chain(outer_holes.iter()) {
        for (i, a) in holes.iter().enumerate() {
            for b in &holes[i + 1..] {
                if a[0] < b[2] && b[0] < a[2] && a[1] < b[3] && b[1] < a[3] {
                    return Err(Error::InvalidSpec(format!(
                        "overlapping openings on the {} wall of room {}",
                        key.1.name(),
                        key.0
                    )));
                }
            }
        }
    }

    let mut surfaces = Vec::new();
    for room in spec.rooms() {
        let (lo, hi) = spec.cell_box(&room);
        for side in Side::ALL {
            let (axis, max) = side.axis();
            let (ia, ib) = side.face_axes();
            let mut origin = lo;
            if max {
                origin[axis] = hi[axis];
            }
            let inward = if max { -unit(axis) } else { unit(axis) };
            let neighbor = spec.neighbor(&room, side);
            let face = Face {
                origin,
                axis_a: unit(ia),
                axis_b: unit(ib),
                len_a: hi[ia] - lo[ia],
                len_b: hi[ib] - lo[ib],
            };
            let holes = inner_holes.get(&(room, side)).cloned().unwrap_or_default();
            for quad in subtract_holes(&face, &holes) {
                surfaces.push(Surface {
                    quad,
                    normal: inward,
                    room: Some(room),
                    kind: SurfaceKind::Inner(side),
                    shared: neighbor.is_some(),
                });
            }
            if neighbor.is_none() {
                // outer face, extended over the slab edges: by the full
                // thickness at the envelope, by half where a room continues
                let ext = |s: Side| if spec.neighbor(&room, s).is_some() { 0.5 * t } else { t };
                let (lo_a, hi_a, lo_b, hi_b) = {
                    let side_of = |axis: usize, max: bool| {
                        *Side::ALL.iter().find(|s| s.axis() == (axis, max)).unwrap()
                    };
                    (ext(side_of(ia, false)), ext(side_of(ia, true)), ext(side_of(ib, false)), ext(side_of(ib, true)))
                };
                let mut o = origin - unit(ia) * lo_a - unit(ib) * lo_b;
                o[axis] += if max { t } else { -t };
                let outer = Face {
                    origin: o,
                    axis_a: unit(ia),
                    axis_b: unit(ib),
                    len_a: face.len_a + lo_a + hi_a,
                    len_b: face.len_b + lo_b + hi_b,
                };
                let holes: Vec<[f64; 4]> = outer_holes
                    .get(&(room, side))
                    .map(|hs| hs.iter().map(|h| [h[0] + lo_a, h[1] + lo_b, h[2] + lo_a, h[3] + lo_b]).collect())
                    .unwrap_or_default();
                for quad in subtract_holes(&outer, &holes) {
                    surfaces.push(Surface {
                        quad,
                        normal: -inward,
                        room: None,
                        kind: SurfaceKind::Outer(side),
                        shared: false,
                    });
                }
            }
        }
    }
    surfaces.extend(reveals);
    for q in &spec.clutter {
        surfaces.push(Surface {
            quad: *q,
            normal: q.normal(),
            room: None,
            kind: SurfaceKind::Clutter,
            shared: false,
        });
    }
    Ok(SurfaceModel {
        surfaces,
        spec: spec.clone(),
    })
}

fn opening_reveals(spec: &BuildingSpec, o: &Opening) -> Vec<Surface> {
    let t = spec.wall_thickness;
    let (lo, hi) = spec.cell_box(&o.room);
    let (axis, max) = o.side.axis();
    let (ia, ib) = o.side.face_axes();
    let mut base = lo;
    if max {
        base[axis] = hi[axis];
    }
    let depth = if max { unit(axis) * t } else { -unit(axis) * t };
    let (ua, ub) = (unit(ia), unit(ib));
    let corner = |a: f64, b: f64| base + ua * a + ub * b;
    let (a0, a1, b0, b1) = (o.u0, o.u0 + o.width, o.z0, o.z0 + o.height);
    let quads = [
        (Quad::new(corner(a0, b0), ua * o.width, depth), ub),
        (Quad::new(corner(a0, b1), ua * o.width, depth), -ub),
        (Quad::new(corner(a0, b0), ub * o.height, depth), ua),
        (Quad::new(corner(a1, b0), ub * o.height, depth), -ua),
    ];
    quads
        .into_iter()
        .map(|(quad, normal)| Surface {
            quad,
            normal,
            room: Some(o.room),
            kind: SurfaceKind::Reveal,
            shared: false,
        })
        .collect()
}

/// Output of [`simulate_scan`].
#[derive(Debug, Clone)]
pub struct ScanResult {
    /// Points with scan ids and unoriented normals (largest component positive).
    pub cloud: PointCloud,
    pub scanners: ScannerMetadata,
    /// Surface normal facing the observing scanner.
    pub true_normals: Vec<Vector>,
    /// Index into `SurfaceModel::surfaces` of the surface each point lies on.
    pub surface: Vec<usize>,
}

/// Number of polar rings and azimuth steps of a sweep at `angular_step_deg`.
pub fn sweep_dims(angular_step_deg: f64) -> (usize, usize) {
    ((180.0 / angular_step_deg).round() as usize, (360.0 / angular_step_deg).round() as usize)
}

/// Unit direction of sweep ray `(ring, step)`.
pub fn sweep_direction(angular_step_deg: f64, ring: usize, step: usize) -> Vector {
    let (rings, steps) = sweep_dims(angular_step_deg);
    let theta = (ring as f64 + 0.5) * std::f64::consts::PI / rings as f64;
    let phi = step as f64 * std::f64::consts::TAU / steps as f64;
    Vector::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

/// Check that a scanner stands in free space: inside a grid cell's interior
/// (room or void) or outside the building envelope.
pub fn check_scanner(spec: &BuildingSpec, p: &Point) -> Result<()> {
    let (elo, ehi) = spec.envelope();
    let inside_env = (0..3).all(|a| p[a] >= elo[a] && p[a] <= ehi[a]);
    if !inside_env {
        return Ok(());
    }
    for story in 0..spec.stories {
        for row in 0..spec.rows {
            for col in 0..spec.cols {
                let (lo, hi) = spec.cell_box(&RoomId { story, row, col });
                if (0..3).all(|a| p[a] > lo[a] && p[a] < hi[a]) {
                    return Ok(());
                }
            }
        }
    }
    Err(Error::InvalidSpec(format!(
        "scanner at ({}, {}, {}) is embedded in a slab",
        p.x, p.y, p.z
    )))
}

/// Spherical sweep from each scanner; first hits only, with Gaussian noise
/// of standard deviation `noise_sigma` along the surface normal.
pub fn simulate_scan(model: &SurfaceModel, scanners: &[Point], angular_step_deg: f64, noise_sigma: f64, seed: u64) -> Result<ScanResult> {
    if !(angular_step_deg > 0.0 && angular_step_deg <= 90.0) {
        return Err(Error::param("angular_step", "must lie in (0, 90] degrees"));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::param("noise", "must be non-negative"));
    }
    for s in scanners {
        check_scanner(&model.spec, s)?;
    }
    let quads: Vec<Quad> = model.surfaces.iter().map(|s| s.quad).collect();
    let bvh = Bvh::build(&quads, 0..quads.len());
    let (rings, steps) = sweep_dims(angular_step_deg);

    let per_scanner: Vec<Vec<(Point, Vector, usize)>> = scanners
        .par_iter()
        .enumerate()
        .map(|(sid, s)| {
            let mut pts = Vec::new();
            for ring in 0..rings {
                for step in 0..steps {
                    let d = sweep_direction(angular_step_deg, ring, step);
                    let Some(hit) = bvh.intersect(s, &d, 0.0) else {
                        continue;
                    };
                    let surf = &model.surfaces[hit.primitive];
                    let mut p = s + d * hit.t;
                    let n = if surf.normal.dot(&(s - p)) >= 0.0 { surf.normal } else { -surf.normal };
                    if noise_sigma > 0.0 {
                        let ray = (ring * steps + step) as u64;
                        let mut rng = KeyedRng::new(seed, Domain::Scan, &[sid as u64, ray]);
                        p += n * (noise_sigma * rng.next_gaussian());
                    }
                    pts.push((p, n, hit.primitive));
                }
            }
            pts
        })
        .collect();

    let mut cloud = PointCloud::default();
    let mut ids = Vec::new();
    let mut normals = Vec::new();
    let mut true_normals = Vec::new();
    let mut surface = Vec::new();
    for (sid, pts) in per_scanner.into_iter().enumerate() {
        for (p, n, s) in pts {
            cloud.points.push(p);
            ids.push(sid as u32);
            normals.push(n * canonical_sign(&n));
            true_normals.push(n);
            surface.push(s);
        }
    }
    cloud.normals = Some(normals);
    cloud.scan_ids = Some(ids);
    Ok(ScanResult {
        cloud,
        scanners: ScannerMetadata::from_positions(scanners.iter().copied()),
        true_normals,
        surface,
    })
}

/// A building plus the scan that samples it.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub building: BuildingSpec,
    /// Explicit scanner positions; empty means one per room, see [`SceneSpec::scanner_positions`].
    pub scanners: Vec<Point>,
    pub angular_step_deg: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            building: BuildingSpec::default(),
            scanners: Vec::new(),
            angular_step_deg: 1.0,
            noise_sigma: 0.0,
            seed: 1,
        }
    }
}

/// Everything produced for one synthetic scene.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub model: SurfaceModel,
    pub scan: ScanResult,
}

impl SceneSpec {
    /// Explicit scanners, or one per room placed 1.5 m above the floor and
    /// slightly off the room center.
    pub fn scanner_positions(&self) -> Vec<Point> {
        if !self.scanners.is_empty() {
            return self.scanners.clone();
        }
        let b = &self.building;
        b.rooms()
            .iter()
            .map(|r| {
                let (lo, hi) = b.cell_box(r);
                Point::new(
                    lo.x + 0.53 * (hi.x - lo.x),
                    lo.y + 0.46 * (hi.y - lo.y),
                    lo.z + 1.5f64.min(0.8 * (hi.z - lo.z)),
                )
            })
            .collect()
    }

    pub fn generate(&self) -> Result<SyntheticScene> {
        let model = build_building(&self.building)?;
        let scan = simulate_scan(&model, &self.scanner_positions(), self.angular_step_deg, self.noise_sigma, self.seed)?;
        Ok(SyntheticScene { model, scan })
    }

    /// Parse the `key = value` scene format. Repeatable keys: `void`,
    /// `door`, `window`, `clutter`, `scanner`.
    pub fn parse(text: &str) -> Result<SceneSpec> {
        let mut spec = SceneSpec::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidSpec(format!("line {}: expected `key = value`", i + 1)))?;
            let key = key.trim();
            let bad = |what: &str| Error::InvalidSpec(format!("line {}: invalid value for `{key}`: {what}", i + 1));
            let nums = |n: usize| -> Result<Vec<f64>> {
                let v: Vec<f64> = value
                    .split_whitespace()
                    .map(|s| s.parse::<f64>().ok().filter(|x| x.is_finite()))
                    .collect::<Option<_>>()
                    .ok_or_else(|| bad("expected numbers"))?;
                if v.len() != n {
                    return Err(bad(&format!("expected {n} numbers")));
                }
                Ok(v)
            };
            let count = |v: f64| -> Result<usize> {
                if v >= 0.0 && v.fract() == 0.0 {
                    Ok(v as usize)
                } else {
                    Err(bad("expected a non-negative integer"))
                }
            };
            let b = &mut spec.building;
            match key {
                "stories" => b.stories = count(nums(1)?[0])?,
                "rows" => b.rows = count(nums(1)?[0])?,
                "cols" => b.cols = count(nums(1)?[0])?,
                "room_size" => {
                    let v = nums(3)?;
                    b.room_size = [v[0], v[1], v[2]];
                }
                "wall_thickness" => b.wall_thickness = nums(1)?[0],
                "void" => {
                    let v = nums(3)?;
                    b.voids.push(RoomId::new(count(v[0])?, count(v[1])?, count(v[2])?));
                }
                "door" | "window" => {
                    let f: Vec<&str> = value.split_whitespace().collect();
                    if f.len() != 8 {
                        return Err(bad("expected `story row col side u0 z0 width height`"));
                    }
                    let n: Vec<f64> = f
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| *k != 3)
                        .map(|(_, s)| s.parse::<f64>().ok())
                        .collect::<Option<_>>()
                        .ok_or_else(|| bad("expected numbers"))?;
                    let side = Side::parse(f[3]).ok_or_else(|| bad("unknown wall side"))?;
                    b.openings.push(Opening {
                        kind: if key == "door" { OpeningKind::Door } else { OpeningKind::Window },
                        room: RoomId::new(count(n[0])?, count(n[1])?, count(n[2])?),
                        side,
                        u0: n[3],
                        z0: n[4],
                        width: n[5],
                        height: n[6],
                    });
                }
                "clutter" => {
                    let v = nums(9)?;
                    b.clutter.push(Quad::new(
                        Point::new(v[0], v[1], v[2]),
                        Vector::new(v[3], v[4], v[5]),
                        Vector::new(v[6], v[7], v[8]),
                    ));
                }
                "scanner" => {
                    let v = nums(3)?;
                    spec.scanners.push(Point::new(v[0], v[1], v[2]));
                }
                "angular_step" => spec.angular_step_deg = nums(1)?[0],
                "noise" => spec.noise_sigma = nums(1)?[0],
                "seed" => spec.seed = count(nums(1)?[0])? as u64,
                other => return Err(Error::InvalidSpec(format!("line {}: unknown key `{other}`", i + 1))),
            }
        }
        spec.building.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<SceneSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Inverse of [`SceneSpec::parse`].
    pub fn to_text(&self) -> String {
        let b = &self.building;
        let mut s = format!(
            "stories = {}\nrows = {}\ncols = {}\nroom_size = {} {} {}\nwall_thickness = {}\n",
            b.stories, b.rows, b.cols, b.room_size[0], b.room_size[1], b.room_size[2], b.wall_thickness
        );
        for v in &b.voids {
            s.push_str(&format!("void = {v}\n"));
        }
        for o in &b.openings {
            let key = match o.kind {
                OpeningKind::Door => "door",
                OpeningKind::Window => "window",
            };
            s.push_str(&format!("{key} = {} {} {} {} {} {}\n", o.room, o.side.name(), o.u0, o.z0, o.width, o.height));
        }
        for q in &b.clutter {
            s.push_str(&format!(
                "clutter = {} {} {} {} {} {} {} {} {}\n",
                q.origin.x, q.origin.y, q.origin.z, q.edge_u.x, q.edge_u.y, q.edge_u.z, q.edge_v.x, q.edge_v.y, q.edge_v.z
            ));
        }
        for p in &self.scanners {
            s.push_str(&format!("scanner = {} {} {}\n", p.x, p.y, p.z));
        }
        s.push_str(&format!("angular_step = {}\nnoise = {}\nseed = {}\n", self.angular_step_deg, self.noise_sigma, self.seed));
        s
    }
}

/// The fixed scene battery.
pub mod scenes {
    use super::*;

    /// Closed single room, one scanner, about 100k points.
    pub fn s1() -> SceneSpec {
        SceneSpec {
            building: BuildingSpec {
                room_size: [6.0, 5.0, 3.0],
                ..Default::default()
            },
            angular_step_deg: 0.8,
            seed: 11,
            ..Default::default()
        }
    }

    /// Two rooms sharing a wall with a door.
    pub fn s2() -> SceneSpec {
        SceneSpec {
            building: BuildingSpec {
                cols: 2,
                room_size: [5.0, 4.0, 3.0],
                openings: vec![Opening {
                    kind: OpeningKind::Door,
                    room: RoomId::new(0, 0, 0),
                    side: Side::East,
                    u0: 1.5,
                    z0: 0.0,
                    width: 1.0,
                    height: 2.1,
                }],
                ..Default::default()
            },
            angular_step_deg: 1.0,
            seed: 12,
            ..Default::default()
        }
    }

    /// Two stories of 2 x 2 rooms connected by doors; the shared walls and
    /// the slab between the stories are enclosed by rooms on both sides.
    pub fn s3() -> SceneSpec {
        let door = |story, row, col, side, u0| Opening {
            kind: OpeningKind::Door,
            room: RoomId::new(story, row, col),
            side,
            u0,
            z0: 0.0,
            width: 0.9,
            height: 2.1,
        };
        let mut openings = Vec::new();
        for story in 0..2 {
            openings.push(door(story, 0, 0, Side::East, 1.2));
            openings.push(door(story, 1, 0, Side::East, 2.0));
            openings.push(door(story, 0, 0, Side::North, 3.1));
        }
        SceneSpec {
            building: BuildingSpec {
                stories: 2,
                rows: 2,
                cols: 2,
                room_size: [5.0, 4.0, 3.0],
                openings,
                ..Default::default()
            },
            angular_step_deg: 1.2,
            seed: 13,
            ..Default::default()
        }
    }

    /// Two rooms facing each other across a courtyard. A window in the
    /// first room looks at the second room's façade, another at a
    /// free-standing board outside.
    pub fn s4() -> SceneSpec {
        let window = |side, u0, width| Opening {
            kind: OpeningKind::Window,
            room: RoomId::new(0, 0, 0),
            side,
            u0,
            z0: 0.9,
            width,
            height: 1.5,
        };
        SceneSpec {
            building: BuildingSpec {
                cols: 3,
                room_size: [5.0, 4.0, 3.0],
                voids: vec![RoomId::new(0, 0, 1)],
                openings: vec![window(Side::East, 1.0, 2.0), window(Side::South, 1.5, 2.0)],
                clutter: vec![Quad::new(Point::new(0.7, -4.0, 0.0), Vector::new(4.0, 0.0, 0.0), Vector::new(0.0, 0.0, 2.5))],
                ..Default::default()
            },
            angular_step_deg: 0.8,
            seed: 14,
            ..Default::default()
        }
    }

    pub fn by_name(name: &str) -> Option<SceneSpec> {
        match name.to_ascii_lowercase().as_str() {
            "s1" => Some(s1()),
            "s2" => Some(s2()),
            "s3" => Some(s3()),
            "s4" => Some(s4()),
            _ => None,
        }
    }
}
