//! Ray casting against the patch set: scene, cone sampling and the
//! multi-bounce path tracer.

mod bvh;
mod sampling;
mod trace;

pub use bvh::{Bvh, BvhHit};
pub use sampling::sample_cone;
pub use trace::{side_key, trace_paths, PathSample, Side};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point, Quad, Vector};
use crate::patches::PatchSet;

/// Parameters of the path tracing and façade passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    /// Rays per patch side.
    pub rays: usize,
    /// Maximum surface hits per path.
    pub bounces: usize,
    /// Mean-bounce threshold separating open from enclosed sides.
    pub tau: f64,
    /// Half-angle of the sampling cone (degrees).
    pub cone_half_angle_deg: f64,
    /// Hits closer than this (m) are ignored.
    pub t_min: f64,
    pub seed: u64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            rays: 50,
            bounces: 8,
            tau: 4.0,
            cone_half_angle_deg: 60.0,
            t_min: 1e-3,
            seed: 0,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rays == 0 {
            return Err(Error::param("rays", "must be at least 1"));
        }
        if self.bounces == 0 {
            return Err(Error::param("bounces", "must be at least 1"));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::param("tau", "must be non-negative"));
        }
        if !(self.cone_half_angle_deg > 0.0 && self.cone_half_angle_deg < 90.0) {
            return Err(Error::param("cone_half_angle", "must lie in (0, 90) degrees"));
        }
        if !(self.t_min >= 0.0) {
            return Err(Error::param("t_min", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub patch: usize,
    pub point: Point,
    pub distance: f64,
}

/// Patch quads with their reference normals and a BVH over the active ones.
#[derive(Debug, Clone)]
pub struct Scene {
    quads: Vec<Quad>,
    normals: Vec<Vector>,
    active: Vec<bool>,
    bvh: Bvh,
}

impl Scene {
    /// All patches active.
    pub fn from_patches(set: &PatchSet) -> Self {
        let quads = set.quads();
        let normals = set.patches.iter().map(|p| p.normal).collect();
        Self::new(quads, normals)
    }

    /// Scene over arbitrary quads; `normals[i]` is the reference normal of quad `i`.
    pub fn new(quads: Vec<Quad>, normals: Vec<Vector>) -> Self {
        assert_eq!(quads.len(), normals.len(), "one normal per quad");
        let active = vec![true; quads.len()];
        let bvh = Bvh::build(&quads, 0..quads.len());
        Self {
            quads,
            normals,
            active,
            bvh,
        }
    }

    /// Same geometry, traced against only the patches flagged in `active`.
    pub fn with_active(&self, active: &[bool]) -> Self {
        assert_eq!(active.len(), self.quads.len());
        let bvh = Bvh::build(&self.quads, (0..self.quads.len()).filter(|&i| active[i]));
        Self {
            quads: self.quads.clone(),
            normals: self.normals.clone(),
            active: active.to_vec(),
            bvh,
        }
    }

    /// Copy with every reference normal replaced by `normals`.
    pub fn with_normals(&self, normals: Vec<Vector>) -> Self {
        assert_eq!(normals.len(), self.quads.len());
        Self {
            normals,
            ..self.clone()
        }
    }

    pub fn len(&self) -> usize {
        self.quads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quads.is_empty()
    }

    pub fn quads(&self) -> &[Quad] {
        &self.quads
    }

    pub fn normal(&self, patch: usize) -> &Vector {
        &self.normals[patch]
    }

    pub fn is_active(&self, patch: usize) -> bool {
        self.active[patch]
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Nearest active patch hit at distance `> t_min`.
    pub fn intersect(&self, origin: &Point, dir: &Vector, t_min: f64) -> Option<Hit> {
        self.bvh.intersect(origin, dir, t_min).map(|h| Hit {
            patch: h.primitive,
            point: origin + dir * h.t,
            distance: h.t,
        })
    }
}
