//! Realizing periodic orbits of the cycle model from itinerary words.
//!
//! Run with `cargo run --example orbits`.

use std::sync::Arc;

use hetero_cycle::model::{
    build_model, central_exponent, child_cycle, min_orbit_gap, realize_orbit, CycleSpec,
    ItineraryWord, Token,
};

fn main() {
    let sys = build_model(CycleSpec::default()).expect("default model");
    let b = Arc::new(realize_orbit(&sys, ItineraryWord::new(vec![Token::B(1)])).expect("saddle B"));
    println!("B: period {}, sigma {:.4}, chi {:.5}", b.period, b.sigma, b.chi);

    // Shadow B for m = 3 periods, then spend l = 10 periods near A.
    let first = child_cycle(&sys, &b, 10, 3, 0.0).expect("child of B");
    let first = Arc::new(realize_orbit(&sys, first.word).expect("closed word"));
    println!(
        "R(10, 3): period {}, sigma {:.6}, chi {:.6e}, base x_c {:.12}, gap {:.3e}",
        first.period,
        first.sigma,
        first.chi,
        first.base.central(),
        min_orbit_gap(&sys, &first)
    );
    println!("  Birkhoff exponent {:.6e}, closure defect {:.1e}", central_exponent(&sys, &first), first.closure_defect(&sys));

    // A child of the first orbit: two repetitions, then one period near A.
    let child = child_cycle(&sys, &first, 1, 2, 0.0).expect("anchored parent");
    let child = realize_orbit(&sys, child.word).expect("closed word");
    println!(
        "child: period {}, chi {:.6e} (parent chi / 2 = {:.6e})",
        child.period,
        child.chi,
        first.chi / 2.0
    );
    println!("first points of the child:");
    for p in child.points(&sys, 0, 6) {
        println!("  {:<6} x_c = {:.9}", p.chart.to_string(), p.central());
    }
}
