//! Trains the standard configuration for one problem and prints its report.
//!
//! `cargo run --release -p hyperfront-core --example reproduce -- ZDT1 trans 0`
//!
//! Set `RESTARTS=16` to train MoE networks with the multi-start settings.

use hyperfront::hypernet::ArchKind;
use hyperfront::problems::ProblemId;
use hyperfront::train::presets::{multistart_moe, preset_config, preset_kind};
use hyperfront::train::{evaluate_run, train, EvalOptions};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let id: ProblemId = args.first().map_or("CVX1", String::as_str).parse().expect("problem id");
    let kind: ArchKind = args.get(1).map_or(Ok(preset_kind(id)), |s| s.parse()).expect("arch kind");
    let seed: u64 = args.get(2).map_or(0, |s| s.parse().expect("seed"));
    let iterations: usize = args.get(3).map_or(20_000, |s| s.parse().expect("iterations"));
    let mut config = preset_config(id, kind, seed);
    config.iterations = iterations;
    if let Some(n) = std::env::var("RESTARTS").ok().and_then(|v| v.parse().ok()) {
        config = multistart_moe(config, n);
    }
    let ck = train(&config, None).expect("training");
    let report = evaluate_run(&ck, &EvalOptions::new(3, (0..30).collect())).expect("evaluation");
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    println!("train {:.1}s", ck.wall_clock_s);
}
