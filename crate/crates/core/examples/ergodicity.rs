//! Test functions, periodic measures and the ergodicity criterion along a
//! five-level tower.
//!
//! Run with `cargo run --release --example ergodicity`.

use std::sync::Arc;

use hetero_cycle::measure::{
    central_exponent_of_measure, check_ergodicity_criterion, choose_n, default_dictionary,
    exponent_trace, integrate, weak_star_gap, PeriodicMeasure,
};
use hetero_cycle::model::{build_model, CycleSpec};
use hetero_cycle::tower::{Tower, TowerConfig};

fn main() {
    let sys = build_model(CycleSpec::default()).expect("default model");
    let tower = Tower::build(sys, TowerConfig { levels: 5, ..TowerConfig::default() }).expect("tower");
    let sys = tower.system();
    let dict = default_dictionary(sys);

    let trace = exponent_trace(&tower);
    println!("central exponents of the periodic measures:");
    for lv in tower.levels() {
        let mu = PeriodicMeasure::new(Arc::clone(&lv.orbit));
        println!("  mu_{}: chi = {:.4e}", lv.n, central_exponent_of_measure(sys, &mu));
    }
    println!("  decay ratio {:.3}, extrapolated limit {:?}", trace.decay_ratio, trace.extrapolated_limit);

    println!("\nintegrals against the dictionary, and gaps between consecutive levels:");
    for phi in &dict {
        let values: Vec<String> = tower.levels()[1..]
            .iter()
            .map(|lv| format!("{:+.5}", integrate(sys, &PeriodicMeasure::new(Arc::clone(&lv.orbit)), phi)))
            .collect();
        println!("  {:<24} lipschitz {:>9.2e}  {}", phi.id, phi.lipschitz, values.join(" "));
    }
    for n in 1..tower.top() {
        let a = PeriodicMeasure::new(Arc::clone(&tower.level(n).orbit));
        let b = PeriodicMeasure::new(Arc::clone(&tower.level(n + 1).orbit));
        println!("  gap(mu_{n}, mu_{}) = {:.3e}", n + 1, weak_star_gap(sys, &a, &b, &dict));
    }

    for eps in [0.1, 0.05] {
        println!("\neps = {eps}:");
        for phi in &dict {
            let choice = match choose_n(&tower, phi, eps) {
                Ok(c) => c,
                Err(e) => {
                    println!("  {}: {e}", phi.id);
                    continue;
                }
            };
            let report = check_ergodicity_criterion(&tower, phi, eps).expect("admissible N");
            let worst = report.pairs.iter().map(|p| p.max_deviation).fold(0.0, f64::max);
            println!(
                "  {:<24} N = {}, delta = {:.2e}, worst deviation {:.2e}, passed {}",
                phi.id, choice.n, choice.delta, worst, report.passed
            );
        }
    }
}
