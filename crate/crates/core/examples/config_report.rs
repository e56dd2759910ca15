//! Driving the command layer from a configuration string and writing the
//! report as CSV.
//!
//! Run with `cargo run --example config_report`.

use hetero_cycle::cli::{cmd_build_tower, cmd_verify, EXIT_OK};
use hetero_cycle::config::{Format, RunConfig};

const CONFIG: &str = r#"
seed = 7

[model]
lambda = 0.95
beta = 1.2

[tower]
c = 400.0
levels = 3

[verify]
eps = [0.2]
dictionary = ["one", "b_phase"]
"#;

fn main() {
    let config = RunConfig::from_toml(CONFIG).expect("parses");
    config.validate().expect("valid");
    let config = config.resolved();

    let built = cmd_build_tower(&config, false).expect("runs");
    assert_eq!(built.code, EXIT_OK, "{:?}", built.message);
    let mut out = std::io::stdout();
    built.report.write(Format::Csv, &mut out).expect("stdout");

    let verified = cmd_verify(&config, None, false).expect("runs");
    let v = verified.report.verify.as_ref().expect("verify section");
    println!("\n{} checks, passed: {}", v.checks.len(), v.passed);
    for c in v.checks.iter().filter(|c| c.name.starts_with("ergodicity")) {
        println!("  {}: {}", c.name, c.detail);
    }
}
