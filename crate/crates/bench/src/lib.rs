//! Shared fixtures for the benchmarks.

use pathorient::config::RunConfig;
use pathorient::io::PointCloud;
use pathorient::patches::{build_patches, PatchSet};
use pathorient::ransac::detect_planes;
use pathorient::ray::Scene;
use pathorient::synth::{scenes, SceneSpec};

pub struct Fixture {
    pub cloud: PointCloud,
    pub patches: PatchSet,
    pub scene: Scene,
    pub cfg: RunConfig,
}

/// Single-room scene sampled at `angular_step_deg`, with its patches and ray scene.
pub fn single_room(angular_step_deg: f64) -> Fixture {
    let spec = SceneSpec {
        angular_step_deg,
        ..scenes::s1()
    };
    let cloud = spec.generate().expect("scene").scan.cloud;
    let cfg = RunConfig::default();
    let detection = detect_planes(&cloud, &cfg.detection).expect("planes");
    let patches = build_patches(&detection.planes, &cloud, cfg.cell_size).expect("patches");
    let scene = Scene::from_patches(&patches);
    Fixture {
        cloud,
        patches,
        scene,
        cfg,
    }
}
