//! Regenerates the discretization-bias constants of `registry::bias_constants`.
//!
//! cargo run --release -p srpath-core --example bias_study -- <model> [paths] [horizon]

use srpath_core::diffusion::SimConfig;
use srpath_core::geometry::canonical_connection;
use srpath_core::registry;
use srpath_core::stats::Executor;
use srpath_core::verify::Verifier;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let name = args.get(1).map(String::as_str).unwrap_or("heisenberg3");
    let paths = args.get(2).map(|s| s.parse().expect("paths")).unwrap_or(10_000);
    let horizon = args.get(3).map(|s| s.parse().expect("horizon")).unwrap_or(0.5);
    let model = registry::model(name).expect("model");
    let conn = canonical_connection(&model);
    let exec = Executor::new(std::thread::available_parallelism().map_or(1, |n| n.get()));
    let verifier = Verifier::new(&model, &conn, SimConfig::new(horizon, 400, paths, 2024), &exec).expect("config");
    let study = verifier.bias_study().expect("bias study");
    for e in &study.entries {
        println!("{:<30} scale {:.3e}  residual {:.3e}  stderr {:.3e}", e.check, e.scale, e.residual, e.stderr);
    }
    println!("{name}: {:?}", study.constants);
}
