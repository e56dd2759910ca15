//! Building a tower of periodic orbits with halving central exponents and
//! checking the measure bounds along it.
//!
//! Run with `cargo run --release --example build_tower [levels]`.

use hetero_cycle::model::{build_model, CycleSpec};
use hetero_cycle::tower::{kappa_product, r_sequence, support_bound, Tower, TowerConfig};

fn main() {
    let levels = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let sys = build_model(CycleSpec::default()).expect("default model");
    let tower = match Tower::build(sys, TowerConfig { levels, ..TowerConfig::default() }) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("tower build failed: {e}");
            std::process::exit(2);
        }
    };

    println!("{:>2} {:>4} {:>4} {:>8} {:>11} {:>10} {:>10} {:>10} {:>7}", "n", "l", "m", "period", "chi", "d", "gamma", "ceiling", "kappa");
    for lv in tower.levels() {
        let ceiling = if lv.n >= 1 { tower.gamma_ceiling(lv.n) } else { f64::NAN };
        println!(
            "{:>2} {:>4} {:>4} {:>8} {:>11.4e} {:>10.3e} {:>10.3e} {:>10.3e} {:>7.4}",
            lv.n,
            lv.l,
            lv.m,
            lv.period(),
            lv.chi,
            lv.d,
            lv.gamma().unwrap_or(f64::NAN),
            ceiling,
            lv.kappa().unwrap_or(f64::NAN)
        );
    }

    println!("\nkappa products with tail bound:");
    for n in 1..=tower.top() {
        let kp = kappa_product(&tower, n).expect("positive kappas");
        println!("  from {n}: built {:.4}, tail {:.4}, total {:.4}", kp.built, kp.tail, kp.total);
    }
    match r_sequence(&tower) {
        Ok(rs) => {
            for b in rs {
                println!("  r_{} = {:.3e} <= d_{}/3 = {:.3e}", b.n, b.r, b.n, b.bound);
            }
        }
        Err(e) => println!("  radius chain fails: {e}"),
    }
    if tower.top() >= 2 {
        let sb = support_bound(&tower, 1, tower.top()).expect("counting");
        println!(
            "  {} balls around X_1, each holding at least {} points of X_{} ({} required)",
            sb.ball_count, sb.min_count, sb.m, sb.required
        );
    }
    let json = serde_json::to_string_pretty(&tower.choices()).expect("serializable");
    println!("\nrecorded choices (enough to rebuild the tower):\n{json}");
}
