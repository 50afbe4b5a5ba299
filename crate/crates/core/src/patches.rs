//! Occupancy bitmaps on detected planes and the patch set built from them.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{Point, Quad, Vector};
use crate::io::PointCloud;
use crate::ransac::Plane;

pub const DEFAULT_CELL_SIZE: f64 = 0.2;

/// Binary occupancy grid in a plane's `(u, v)` frame.
///
/// Cells sit on a lattice anchored at the frame origin, so cell `(i, j)` of
/// the bitmap covers `[origin.0 + i*s, origin.0 + (i+1)*s) x [origin.1 + j*s, ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyBitmap {
    pub plane_id: usize,
    /// Lattice index of cell `(0, 0)`.
    pub first_cell: (i64, i64),
    pub origin: (f64, f64),
    pub cell_size: f64,
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
    pub normal: Vector,
    pub offset: f64,
    pub frame_u: Vector,
    pub frame_v: Vector,
}

impl OccupancyBitmap {
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[j * self.width + i]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    fn lift(&self, u: f64, v: f64) -> Point {
        Point::from(self.normal * self.offset + self.frame_u * u + self.frame_v * v)
    }

    /// Cell containing in-plane coordinates `(u, v)`, if inside the bitmap.
    pub fn cell_of(&self, u: f64, v: f64) -> Option<(usize, usize)> {
        let (i0, j0) = self.first_cell;
        let (i, j) = lattice_index(u, v, self.cell_size);
        let (di, dj) = (i - i0, j - j0);
        (di >= 0 && dj >= 0 && (di as usize) < self.width && (dj as usize) < self.height).then(|| (di as usize, dj as usize))
    }

    /// Binary PGM (P5), row 0 at the top, occupied cells white.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for j in (0..self.height).rev() {
            for i in 0..self.width {
                out.push(if self.get(i, j) { 255 } else { 0 });
            }
        }
        out
    }
}

#[inline]
fn lattice_index(u: f64, v: f64, cell: f64) -> (i64, i64) {
    ((u / cell).floor() as i64, (v / cell).floor() as i64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub id: usize,
    pub plane_id: usize,
    /// Cell coordinates inside the owning bitmap.
    pub cell: (usize, usize),
    pub center: Point,
    /// Reference normal shared with the owning plane.
    pub normal: Vector,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PatchSet {
    /// One bitmap per plane, indexed by plane id.
    pub bitmaps: Vec<OccupancyBitmap>,
    pub patches: Vec<Patch>,
    /// Owning patch per point.
    pub point_patch: Vec<Option<usize>>,
}

impl PatchSet {
    pub fn quad(&self, patch: &Patch) -> Quad {
        patch_quad(patch, &self.bitmaps[patch.plane_id])
    }

    pub fn quads(&self) -> Vec<Quad> {
        self.patches.iter().map(|p| self.quad(p)).collect()
    }

    /// Number of points that belong to some patch.
    pub fn points_on_patches(&self) -> usize {
        self.point_patch.iter().filter(|p| p.is_some()).count()
    }

    /// Write each bitmap as `plane_<id>.pgm` into `dir`.
    pub fn dump_bitmaps(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for bm in &self.bitmaps {
            let path = dir.join(format!("plane_{:04}.pgm", bm.plane_id));
            std::fs::write(&path, bm.to_pgm()).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// The cell square of `patch` lifted back into 3D. Edges run along the
/// plane's `u` and `v` axes, so the quad normal equals the plane normal.
pub fn patch_quad(patch: &Patch, bitmap: &OccupancyBitmap) -> Quad {
    let s = bitmap.cell_size;
    let u0 = bitmap.origin.0 + patch.cell.0 as f64 * s;
    let v0 = bitmap.origin.1 + patch.cell.1 as f64 * s;
    Quad::new(bitmap.lift(u0, v0), bitmap.frame_u * s, bitmap.frame_v * s)
}

struct PlaneCells {
    bitmap: OccupancyBitmap,
    /// (cell, members, projected centroid), row-major cell order.
    cells: Vec<((usize, usize), Vec<usize>, Point)>,
}

fn rasterize(plane: &Plane, points: &[Point], cell_size: f64) -> PlaneCells {
    let coords: Vec<(i64, i64)> = plane
        .inliers
        .iter()
        .map(|&i| {
            let (u, v) = plane.to_2d(&points[i]);
            lattice_index(u, v, cell_size)
        })
        .collect();
    let (mut imin, mut jmin, mut imax, mut jmax) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
    for &(i, j) in &coords {
        imin = imin.min(i);
        jmin = jmin.min(j);
        imax = imax.max(i);
        jmax = jmax.max(j);
    }
    let (width, height) = if coords.is_empty() {
        (imin, jmin) = (0, 0);
        (0, 0)
    } else {
        ((imax - imin + 1) as usize, (jmax - jmin + 1) as usize)
    };
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); width * height];
    for (&pi, &(i, j)) in plane.inliers.iter().zip(&coords) {
        members[(j - jmin) as usize * width + (i - imin) as usize].push(pi);
    }
    let bitmap = OccupancyBitmap {
        plane_id: plane.id,
        first_cell: (imin, jmin),
        origin: (imin as f64 * cell_size, jmin as f64 * cell_size),
        cell_size,
        width,
        height,
        bits: members.iter().map(|m| !m.is_empty()).collect(),
        normal: plane.normal,
        offset: plane.offset,
        frame_u: plane.frame_u,
        frame_v: plane.frame_v,
    };
    let cells = members
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(k, m)| {
            let centroid = m.iter().fold(Vector::zeros(), |acc, &i| acc + points[i].coords) / m.len() as f64;
            let center = plane.project(&Point::from(centroid));
            ((k % width, k / width), m, center)
        })
        .collect();
    PlaneCells { bitmap, cells }
}

/// Rasterize every plane's inliers and emit one patch per occupied cell.
///
/// Patch centers are the projected centroids of their member points.
pub fn build_patches(planes: &[Plane], cloud: &PointCloud, cell_size: f64) -> Result<PatchSet> {
    if !(cell_size > 0.0) {
        return Err(Error::param("cell_size", "must be positive"));
    }
    for (k, p) in planes.iter().enumerate() {
        if p.id != k {
            return Err(Error::InvalidInput(format!("plane at position {k} has id {}", p.id)));
        }
    }
    let per_plane: Vec<PlaneCells> = planes.par_iter().map(|p| rasterize(p, &cloud.points, cell_size)).collect();

    let mut bitmaps = Vec::with_capacity(planes.len());
    let mut patches = Vec::new();
    let mut point_patch = vec![None; cloud.len()];
    for (plane, pc) in planes.iter().zip(per_plane) {
        for (cell, members, center) in pc.cells {
            let id = patches.len();
            for &m in &members {
                point_patch[m] = Some(id);
            }
            patches.push(Patch {
                id,
                plane_id: plane.id,
                cell,
                center,
                normal: plane.normal,
                members,
            });
        }
        bitmaps.push(pc.bitmap);
    }
    Ok(PatchSet {
        bitmaps,
        patches,
        point_patch,
    })
}
