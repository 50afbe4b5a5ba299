//! Phase 1A correctness on scene S3 for several bounce budgets, scored on
//! the surfaces enclosed by rooms on both sides.
//!
//! `cargo run --release -p pathorient-core --example bounce_ablation [b ...]`

use pathorient::eval::{score_normals, scored_points};
use pathorient::orient::orient;
use pathorient::pipeline::{oriented_normals, Phase};
use pathorient::synth::scenes;
use pathorient::RunConfig;

fn main() -> pathorient::Result<()> {
    let mut budgets: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("bounce count")).collect();
    if budgets.is_empty() {
        budgets = vec![1, 2, 8];
    }
    let scene = scenes::s3().generate()?;
    let shared: Vec<bool> = scene.scan.surface.iter().map(|&s| scene.model.surfaces[s].shared).collect();
    for b in budgets {
        let mut cfg = RunConfig::default();
        cfg.trace.bounces = b;
        cfg.trace.tau = 4.0 * b as f64 / 8.0;
        let out = orient(scene.scan.cloud.clone(), &cfg)?;
        let scope: Vec<bool> = scored_points(&out.patches, &out.result).iter().zip(&shared).map(|(a, b)| *a && *b).collect();
        let normals = oriented_normals(&out.cloud, &out.patches, &out.result, Phase::P1A)?;
        let (s, _) = score_normals(&out.cloud, &normals, &scene.scan.scanners, &scope, "1A")?;
        let all = scored_points(&out.patches, &out.result);
        let (t, _) = score_normals(&out.cloud, &normals, &scene.scan.scanners, &all, "1A")?;
        println!("b={b} tau={}: occluded {:.2}% ({}/{}), all {:.2}%", cfg.trace.tau, s.percent, s.correct, s.total, t.percent);
    }
    Ok(())
}
