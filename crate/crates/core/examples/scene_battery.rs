//! Runs the synthetic scene battery and prints one report per scene.
//!
//! `cargo run --release -p pathorient-core --example scene_battery [s1 s2 ...]`

use pathorient::eval::EvalReport;
use pathorient::orient::orient;
use pathorient::synth::scenes;
use pathorient::RunConfig;

fn main() -> pathorient::Result<()> {
    let mut names: Vec<String> = std::env::args().skip(1).collect();
    if names.is_empty() {
        names = ["s1", "s2", "s3", "s4"].map(String::from).to_vec();
    }
    let cfg = RunConfig::default();
    for name in names {
        let spec = scenes::by_name(&name).expect("unknown scene");
        let scene = spec.generate()?;
        let out = orient(scene.scan.cloud.clone(), &cfg)?;
        let report = EvalReport::from_run(&out, Some(&scene.scan.scanners), &cfg)?;
        println!("== {name}");
        print!("{}", report.table(Some(&out.timings)));
    }
    Ok(())
}
