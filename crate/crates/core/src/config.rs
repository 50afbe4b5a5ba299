//! Run configuration: every tunable of a full orientation run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normals::DEFAULT_K_NEIGHBORS;
use crate::patches::DEFAULT_CELL_SIZE;
use crate::ransac::DetectionParams;
use crate::ray::TraceConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Re-estimate normals by PCA even if the input has some.
    pub estimate_normals: bool,
    /// Neighborhood size for normal estimation.
    pub knn: usize,
    pub detection: DetectionParams,
    /// Patch edge length (m).
    pub cell_size: f64,
    pub trace: TraceConfig,
    /// Worker threads; results do not depend on it, so it stays out of reports.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            estimate_normals: false,
            knn: DEFAULT_K_NEIGHBORS,
            detection: DetectionParams::default(),
            cell_size: DEFAULT_CELL_SIZE,
            trace: TraceConfig::default(),
            threads: None,
        }
    }
}

/// Keys accepted by [`RunConfig::set`] and the config file.
pub const CONFIG_KEYS: &[&str] = &[
    "estimate_normals",
    "knn",
    "ransac_eps",
    "ransac_alpha",
    "min_support",
    "connectivity_cell",
    "max_candidates",
    "cell_size",
    "rays",
    "bounces",
    "tau",
    "cone_deg",
    "t_min",
    "seed",
    "threads",
];

impl RunConfig {
    /// Set one key from its textual value. `seed` seeds both plane detection
    /// and path tracing.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = |what: &str| Error::InvalidSpec(format!("invalid value `{value}` for `{key}`: {what}"));
        let float = || -> Result<f64> { value.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad("expected a number")) };
        let int = || -> Result<u64> { value.parse::<u64>().map_err(|_| bad("expected a non-negative integer")) };
        match key {
            "estimate_normals" => {
                self.estimate_normals = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(bad("expected true or false")),
                }
            }
            "knn" => self.knn = int()? as usize,
            "ransac_eps" => self.detection.epsilon = float()?,
            "ransac_alpha" => self.detection.alpha_deg = float()?,
            "min_support" => self.detection.min_support = int()? as usize,
            "connectivity_cell" => self.detection.connectivity_cell = float()?,
            "max_candidates" => self.detection.max_candidates = int()? as usize,
            "cell_size" => self.cell_size = float()?,
            "rays" => self.trace.rays = int()? as usize,
            "bounces" => self.trace.bounces = int()? as usize,
            "tau" => self.trace.tau = float()?,
            "cone_deg" => self.trace.cone_half_angle_deg = float()?,
            "t_min" => self.trace.t_min = float()?,
            "seed" => {
                let s = int()?;
                self.detection.seed = s;
                self.trace.seed = s;
            }
            "threads" => {
                let n = int()? as usize;
                if n == 0 {
                    return Err(bad("must be at least 1"));
                }
                self.threads = Some(n);
            }
            _ => return Err(Error::InvalidSpec(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Apply `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidSpec(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(k.trim(), v).map_err(|e| match e {
                Error::InvalidSpec(m) => Error::InvalidSpec(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.knn < 3 {
            return Err(Error::param("knn", "must be at least 3"));
        }
        if !(self.cell_size > 0.0) {
            return Err(Error::param("cell_size", "must be positive"));
        }
        self.detection.validate()?;
        self.trace.validate()
    }

    /// The config as `key = value` lines, readable by [`RunConfig::apply_text`].
    pub fn to_text(&self) -> String {
        let d = &self.detection;
        let t = &self.trace;
        let mut s = format!(
            "estimate_normals = {}\nknn = {}\nransac_eps = {}\nransac_alpha = {}\nmin_support = {}\nconnectivity_cell = {}\nmax_candidates = {}\ncell_size = {}\nrays = {}\nbounces = {}\ntau = {}\ncone_deg = {}\nt_min = {}\nseed = {}\n",
            self.estimate_normals,
            self.knn,
            d.epsilon,
            d.alpha_deg,
            d.min_support,
            d.connectivity_cell,
            d.max_candidates,
            self.cell_size,
            t.rays,
            t.bounces,
            t.tau,
            t.cone_half_angle_deg,
            t.t_min,
            t.seed
        );
        if let Some(n) = self.threads {
            s.push_str(&format!("threads = {n}\n"));
        }
        s
    }
}
