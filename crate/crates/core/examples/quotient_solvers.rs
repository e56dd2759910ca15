//! Closing translations, the two-saddle solver and the closed-form
//! multipliers on the central line.
//!
//! Run with `cargo run --example quotient_solvers`.

use hetero_cycle::quotient::{
    corbd_solve, multiplier_closed_form, nu_for_fixed_point, theta_bound, CycleCentralData,
    Orientation,
};

fn main() {
    let data = CycleCentralData::new(0.5, 2.0, 1.0);
    println!("saddles R_(l,m) for lambda = 0.5, beta = 2, tau = +1");
    println!("{:>3} {:>3} {:>12} {:>12} {:>7} {:>10}", "l", "m", "nu", "multiplier", "period", "residual");
    for (l, m) in [(1, 1), (3, 4), (5, 2), (10, 10)] {
        let s = nu_for_fixed_point(&data, l, m);
        println!(
            "{l:>3} {m:>3} {:>12.6} {:>12.4} {:>7} {:>10.1e}",
            s.nu,
            s.multiplier,
            s.period,
            s.residual(&data)
        );
    }

    println!("\ntwo saddles sharing one translation, lambda = 0.5, k = 4");
    for (orientation, p, q) in [(Orientation::Preserving, 2, 6), (Orientation::Reversing, 6, 2)] {
        let s = corbd_solve(0.5, 4, p, q, orientation).expect("bracketed root");
        let (l, m) = s.closed_form_pair();
        let closed = multiplier_closed_form(0.5, s.beta_bar, s.xi_offset, m, orientation).expect("in regime");
        println!(
            "{orientation:?}: beta_bar = {:.6}, xi = {:.6}, nu_k = {:.6}; |sigma(l={l}, m={m})| = {:.6}, closed form {:.6}",
            s.beta_bar,
            s.xi_offset,
            s.nu_k,
            s.multiplier(0.5),
            closed
        );
    }
    println!(
        "\ntheta bound at lambda = 0.95: {:.4}",
        theta_bound(&CycleCentralData::default(), Orientation::Preserving)
    );
}
