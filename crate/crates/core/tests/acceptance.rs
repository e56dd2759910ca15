//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Every check recomputes its quantity independently of the
//! library routine it judges, or compares against a closed form.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;
use twofloat::TwoFloat;

use hetero_cycle::cli;
use hetero_cycle::config::{ConfigError, RunConfig};
use hetero_cycle::measure::{
    central_exponent_of_measure, check_ergodicity_criterion, choose_n, default_dictionary,
    projectable_points, PeriodicMeasure,
};
use hetero_cycle::model::{
    build_model, child_cycle, min_orbit_gap, realize_orbit, AmbientPoint, CycleSpec, CycleSystem,
    ItineraryWord, PeriodicOrbit, Token,
};
use hetero_cycle::quotient::{
    corbd_solve, multiplier_closed_form, nu_for_fixed_point, CycleCentralData, Orientation,
    QuotientError,
};
use hetero_cycle::tower::{r_sequence, Tower, TowerConfig, TowerError};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: f64, what: &str) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_secs, || {
        format!("{what} took {:.2} s, limit {limit_secs} s", elapsed.as_secs_f64())
    })
}

fn default_system() -> CycleSystem {
    build_model(CycleSpec::default()).expect("default model")
}

fn default_tower(levels: usize) -> Tower {
    Tower::build(default_system(), TowerConfig { levels, ..TowerConfig::default() }).expect("default tower")
}

fn points(sys: &CycleSystem, orbit: &PeriodicOrbit) -> Vec<AmbientPoint> {
    orbit.points(sys, 0, orbit.period).collect()
}

/// `x^n` by repeated double-double multiplication.
fn dd_pow(x: f64, n: u64) -> TwoFloat {
    (0..n).fold(TwoFloat::from(1.0), |acc, _| acc * x)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (mut cells, mut identity_cells) = (0, 0);
    let (mut worst_residual, mut worst_fixed) = (0.0_f64, 0.0_f64);
    for lambda in [0.3, 0.5, 0.7, 0.9, 0.95, 0.99] {
        for beta in [1.05, 1.2, 2.0, 3.0] {
            for tau in [1.0, -1.0] {
                let data = CycleCentralData::new(lambda, beta, tau);
                for l in 1..=40 {
                    for m in 1..=40 {
                        let s = nu_for_fixed_point(&data, l, m);
                        let nu = TwoFloat::from(s.nu) + s.nu_lo;
                        let (bm, ll) = (dd_pow(beta, m), dd_pow(lambda, l));
                        let residual = f64::from(bm * (nu - ll * tau) - 1.0);
                        worst_residual = worst_residual.max(residual.abs());
                        // One loop of the return map applied to 1, in double-double.
                        let image = f64::from(bm * (ll * -1.0 * tau + nu));
                        match s.fixed_point(&data) {
                            Ok(x) => worst_fixed = worst_fixed.max((x - 1.0).abs()),
                            Err(QuotientError::EveryPointFixed) => {
                                identity_cells += 1;
                                worst_fixed = worst_fixed.max((image - 1.0).abs());
                            }
                            Err(e) => return Err(format!("({lambda}, {beta}, {tau}, {l}, {m}): {e}")),
                        }
                        cells += 1;
                    }
                }
            }
        }
    }
    check(worst_residual < 1e-12, || format!("worst residual {worst_residual:e}"))?;
    check(worst_fixed < 1e-10, || format!("worst fixed point error {worst_fixed:e}"))?;
    within(start.elapsed(), 1.0, "grid")?;
    Ok(format!(
        "{cells} cells, worst residual {worst_residual:.1e}, worst fixed point error {worst_fixed:.1e}, \
         {identity_cells} identity return maps"
    ))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut worst_eq = 0.0_f64;
    let mut worst_cf = 0.0_f64;
    let mut cases = 0;
    for lambda in [0.5, 0.95] {
        for k in [4u64, 6, 8] {
            for (orientation, p, q) in [(Orientation::Preserving, 2u64, 6u64), (Orientation::Reversing, 6, 2)] {
                let s = corbd_solve(lambda, k, p, q, orientation)
                    .map_err(|e| format!("lambda {lambda}, k {k}, {orientation:?}: {e}"))?;
                let b = s.beta_bar;
                let (lk2, lk) = (lambda.powi(k as i32 - 2), lambda.powi(k as i32));
                // Defining equation and the offset.
                let (outer, inner) = match orientation {
                    Orientation::Preserving => (p, q),
                    Orientation::Reversing => (q, p),
                };
                let eq = b.powi(outer as i32) * (lk2 - lk + b.powi(-(inner as i32))) - 1.0;
                let xi = (s.xi_offset - b.powi(-(inner as i32))).abs();
                // Both saddles close at 1 with the common translation.
                let tau = orientation.tau();
                let close = |l: u64, m: u64| b.powi(m as i32) * (-tau * lambda.powi(l as i32) + s.nu_k) - 1.0;
                let r1 = close(k - 2, q).abs();
                let r2 = close(k, p).abs();
                worst_eq = worst_eq.max(eq.abs()).max(xi).max(r1).max(r2);
                let (l, m) = match orientation {
                    Orientation::Preserving => (k, p),
                    Orientation::Reversing => (k - 2, q),
                };
                let solved = (b.powi(m as i32) * lambda.powi(l as i32)).abs();
                let closed = multiplier_closed_form(lambda, b, s.xi_offset, m, orientation)
                    .map_err(|e| e.to_string())?;
                worst_cf = worst_cf.max((solved - closed).abs());
                cases += 1;
            }
        }
        let l2 = lambda * lambda;
        let pres = multiplier_closed_form(lambda, 1.5, 0.0, 3, Orientation::Preserving).map_err(|e| e.to_string())?;
        let rev = multiplier_closed_form(lambda, 1.5, 0.0, 3, Orientation::Reversing).map_err(|e| e.to_string())?;
        check((pres - l2 / (1.0 - l2)).abs() < 1e-12 && (rev - 1.0 / (1.0 - l2)).abs() < 1e-12, || {
            format!("xi = 0 limits at lambda {lambda}: {pres}, {rev}")
        })?;
    }
    check(worst_eq < 1e-10, || format!("worst equation residual {worst_eq:e}"))?;
    check(worst_cf < 1e-9, || format!("worst closed-form mismatch {worst_cf:e}"))?;
    within(start.elapsed(), 1.0, "solver cases")?;
    Ok(format!("{cases} cases, worst residual {worst_eq:.1e}, worst closed-form gap {worst_cf:.1e}"))
}

/// Closed words `(A^a T_ab(nu) B^b T_ba)^k` of bounded period whose
/// multiplier is far enough from 1 for 200 iterations to converge.
fn word_strategy(
    data: CycleCentralData,
    max_len: u64,
    max_period: u64,
) -> impl Strategy<Value = Vec<(u64, f64, u64)>> {
    prop::collection::vec((1..=max_len, -1.0..1.0_f64, 1..=max_len), 1..=3).prop_filter(
        "period and multiplier",
        move |segs| {
            let period: u64 = segs.iter().map(|(a, _, b)| a + b + 4).sum();
            let log_sigma: f64 = segs.iter().map(|(a, _, b)| *a as f64 * data.lambda.ln() + *b as f64 * data.beta.ln()).sum();
            period <= max_period && log_sigma.abs() > 0.2
        },
    )
}

fn word_of(segs: &[(u64, f64, u64)]) -> ItineraryWord {
    let mut tokens = Vec::new();
    for &(a, nu, b) in segs {
        tokens.extend([Token::A(a), Token::tab(nu), Token::B(b), Token::Tba]);
    }
    ItineraryWord::new(tokens)
}

/// The central map of the word as slope and intercept, composed by hand.
fn word_map(data: &CycleCentralData, segs: &[(u64, f64, u64)]) -> (f64, f64) {
    let (mut s, mut i) = (1.0, 0.0);
    for &(a, nu, b) in segs {
        let la = data.lambda.powi(a as i32);
        (s, i) = (la * s, la * i);
        (s, i) = (data.tau * s, data.tau * i + nu);
        let bb = data.beta.powi(b as i32);
        (s, i) = (bb * s, bb * i);
        (s, i) = (-s, -i);
    }
    (s, i)
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut runner = TestRunner::deterministic();
    let mut worst_base = 0.0_f64;
    let mut words = 0;
    for tau in [1.0, -1.0] {
        let data = CycleCentralData::new(0.95, 1.2, tau);
        let sys = build_model(CycleSpec::from_central(data)).map_err(|e| e.to_string())?;
        let strategy = word_strategy(data, 12, 30);
        for _ in 0..25 {
            let segs = strategy.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
            let orbit = realize_orbit(&sys, word_of(&segs)).map_err(|e| e.to_string())?;
            let (s, i) = word_map(&data, &segs);
            let mut x = 0.5;
            for _ in 0..200 {
                x = if s.abs() < 1.0 { s * x + i } else { (x - i) / s };
            }
            let err = (orbit.base.central() - x).abs() / x.abs().max(1.0);
            check(err < 1e-9, || format!("word {segs:?}: base {} vs iterate {x}", orbit.base.central()))?;
            worst_base = worst_base.max(err);
            words += 1;
        }
    }
    let sys = default_system();
    let data = *sys.central_data();
    let strategy = word_strategy(data, 60, 200);
    let mut worst_gap = 0.0_f64;
    let mut gaps = 0;
    for _ in 0..20 {
        let segs = strategy.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
        let orbit = realize_orbit(&sys, word_of(&segs)).map_err(|e| e.to_string())?;
        let pts = points(&sys, &orbit);
        let mut brute = f64::INFINITY;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                brute = brute.min(sys.distance(&pts[i], &pts[j]));
            }
        }
        let gap = min_orbit_gap(&sys, &orbit);
        let err = (gap - brute).abs();
        check(err <= 1e-12, || format!("word {segs:?}: gap {gap:e} vs brute force {brute:e}"))?;
        worst_gap = worst_gap.max(err);
        gaps += 1;
    }
    within(start.elapsed(), 10.0, "oracle comparisons")?;
    Ok(format!(
        "{words} words, worst base error {worst_base:.1e}; {gaps} gap checks, worst difference {worst_gap:.1e}"
    ))
}

fn brute_gap(sys: &CycleSystem, orbit: &PeriodicOrbit) -> f64 {
    let pts = points(sys, orbit);
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            best = best.min(sys.distance(&pts[i], &pts[j]));
        }
    }
    best
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let tower = default_tower(4);
    let sys = tower.system();
    let cfg = tower.config();
    check(tower.top() == 4, || format!("built {} levels", tower.top()))?;
    check(tower.level(4).period() <= 1_000_000, || "period cap exceeded".into())?;
    let levels = tower.levels();
    // Separation d_i, recomputed by brute force where affordable.
    let mut d = vec![f64::INFINITY];
    for lv in &levels[1..] {
        let di = if lv.period() <= 1000 { brute_gap(sys, &lv.orbit) } else { lv.d };
        check((di - lv.d).abs() <= 1e-12 * di.max(1e-300) || di == lv.d, || {
            format!("level {}: d {:e} vs brute force {:e}", lv.n, lv.d, di)
        })?;
        d.push(di);
    }
    for n in 1..=tower.top() {
        check(levels[n].period() > levels[n - 1].period(), || format!("periods do not grow at level {n}"))?;
        check(levels[n].chi < 0.5 * levels[n - 1].chi, || {
            format!("chi_{n} = {:e} is not below chi_{}/2 = {:e}", levels[n].chi, n - 1, 0.5 * levels[n - 1].chi)
        })?;
    }
    let mut worst_kappa = f64::INFINITY;
    let mut worst_gamma = 0.0_f64;
    for n in 0..tower.top() {
        let link = levels[n].link.as_ref().ok_or_else(|| format!("level {n} has no certificate"))?;
        let c = &link.certificate;
        let required = 1.0 - cfg.c * levels[n].chi;
        check(c.kappa >= required, || format!("kappa_{n} = {} below 1 - C chi_{n} = {required}", c.kappa))?;
        check(c.gamma_measured < link.gamma, || format!("level {n}: shadow {:e} >= gamma {:e}", c.gamma_measured, link.gamma))?;
        worst_kappa = worst_kappa.min(c.kappa - required);
        if n >= 1 {
            let ceiling = d[1..=n].iter().cloned().fold(f64::INFINITY, f64::min) / (3.0 * 2f64.powi(n as i32));
            check(link.gamma < ceiling, || format!("gamma_{n} = {:e} not below {ceiling:e}", link.gamma))?;
            worst_gamma = worst_gamma.max(link.gamma / ceiling);
        }
    }
    within(start.elapsed(), 300.0, "tower build")?;
    let periods: Vec<u64> = levels.iter().map(|l| l.period()).collect();
    Ok(format!(
        "periods {periods:?}, smallest kappa margin {worst_kappa:.3}, largest gamma/ceiling {worst_gamma:.3}"
    ))
}

fn criterion_5() -> Outcome {
    let tower = default_tower(4);
    let sys = tower.system();
    let data = sys.central_data();
    let chi_1 = tower.level(1).chi;
    let mut log_sigma = f64::from(data.pi_b) * data.beta.ln();
    let mut worst = 0.0_f64;
    for lv in &tower.levels()[1..] {
        // |sigma_n| = |sigma_(n-1)|^m lambda^l.
        log_sigma = lv.m as f64 * log_sigma + (lv.l * u64::from(data.pi_a)) as f64 * data.lambda.ln();
        let analytic = log_sigma / lv.period() as f64;
        let measured = central_exponent_of_measure(sys, &PeriodicMeasure::new(Arc::clone(&lv.orbit)));
        check((measured - analytic).abs() <= 1e-12, || {
            format!("level {}: exponent of measure {measured:e} vs {analytic:e}", lv.n)
        })?;
        worst = worst.max((measured - analytic).abs());
        let bound = chi_1 * 0.5f64.powi(lv.n as i32 - 1);
        check(lv.chi <= bound, || format!("chi_{} = {:e} above {bound:e}", lv.n, lv.chi))?;
    }
    let chis: Vec<String> = tower.levels()[1..].iter().map(|l| format!("{:.2e}", l.chi)).collect();
    Ok(format!("chi = [{}], worst exponent difference {worst:.1e}", chis.join(", ")))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let tower = default_tower(4);
    let sys = tower.system();
    let top = tower.top();
    let rs = r_sequence(&tower).map_err(|e| e.to_string())?;
    // r_n = sum of gamma_k up to the top plus the geometric tail sum_{k >= top} D/(3 2^k).
    let min_d = (1..=top).map(|i| tower.level(i).d).fold(f64::INFINITY, f64::min);
    let tail = 2.0 * min_d / (3.0 * 2f64.powi(top as i32));
    let mut r = vec![0.0; top + 1];
    r[top] = tail;
    for n in (1..top).rev() {
        r[n] = tower.level(n).gamma().expect("linked level") + r[n + 1];
    }
    for n in 1..=top {
        let bound = tower.level(n).d / 3.0;
        let ok = if n < top { r[n] < bound } else { r[n] <= bound };
        check(ok, || format!("r_{n} = {:e} vs d_{n}/3 = {bound:e}", r[n]))?;
        let lib = rs.iter().find(|b| b.n == n).ok_or_else(|| format!("no r_{n} reported"))?;
        check((lib.r - r[n]).abs() <= 1e-12 * r[n], || format!("r_{n}: reported {:e}, recomputed {:e}", lib.r, r[n]))?;
    }
    let mut pairs = 0;
    let mut tightest = f64::INFINITY;
    for n in 1..=3.min(top - 1) {
        let centers = points(sys, &tower.level(n).orbit);
        let mut kappa = 1.0;
        for m in n + 1..=top {
            kappa *= tower.level(m - 1).kappa().expect("linked level");
            let xm = points(sys, &tower.level(m).orbit);
            let pi_m = xm.len() as f64;
            let required = kappa / centers.len() as f64;
            for c in &centers {
                let count = xm.iter().filter(|p| sys.distance(c, p) <= r[n]).count();
                let mass = count as f64 / pi_m;
                check(mass >= required, || format!("n={n}, m={m}: ball mass {mass} below {required}"))?;
                tightest = tightest.min(mass / required);
            }
            pairs += 1;
        }
    }
    within(start.elapsed(), 120.0, "measure chain")?;
    Ok(format!("r_n < d_n/3 at {top} levels; {pairs} (n, m) pairs counted, smallest mass/bound {tightest:.4}"))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let tower = default_tower(5);
    let sys = tower.system();
    let mut summary = Vec::new();
    let mut reintegrated = 0;
    for eps in [0.1, 0.05] {
        for phi in default_dictionary(sys) {
            let choice = choose_n(&tower, &phi, eps).map_err(|e| e.to_string())?;
            let report = check_ergodicity_criterion(&tower, &phi, eps).map_err(|e| e.to_string())?;
            check(report.passed, || format!("{} at eps {eps} fails: {report:?}", phi.id))?;
            check(report.n == choice.n, || "criterion used a different N".into())?;
            let expected_pairs = (choice.n..tower.top()).map(|n| tower.top() - n).sum::<usize>();
            check(report.pairs.len() == expected_pairs, || format!("{} pairs tested, {expected_pairs} expected", report.pairs.len()))?;
            // Direct double-loop re-integration where the child period is small.
            for pair in report.pairs.iter().filter(|p| tower.level(p.m).period() <= 10_000) {
                let xn = points(sys, &tower.level(pair.n).orbit);
                let xm = points(sys, &tower.level(pair.m).orbit);
                let val = |p: &AmbientPoint| phi.eval(p.chart, p.central());
                let mean = xn.iter().map(val).sum::<f64>() / xn.len() as f64;
                let keep = projectable_points(&tower, pair.m, report.n).map_err(|e| e.to_string())?;
                let mut worst = 0.0_f64;
                let mut kept = 0;
                for i in (0..xm.len()).filter(|&i| keep[i]) {
                    let avg = (0..xn.len()).map(|j| val(&xm[(i + j) % xm.len()])).sum::<f64>() / xn.len() as f64;
                    worst = worst.max((avg - mean).abs());
                    kept += 1;
                }
                check(kept as f64 / xm.len() as f64 > 1.0 - eps, || format!("pair {pair:?}: kept fraction too small"))?;
                check(worst < eps && (worst - pair.max_deviation).abs() < 1e-12, || {
                    format!("{} pair ({}, {}): direct {worst:e}, reported {:e}", phi.id, pair.n, pair.m, pair.max_deviation)
                })?;
                reintegrated += 1;
            }
            summary.push(format!("{}@{eps}: N={}", phi.id, choice.n));
        }
    }
    within(start.elapsed(), 300.0, "ergodicity checks")?;
    Ok(format!("5 levels; {}; {reintegrated} pairs re-integrated", summary.join(", ")))
}

fn criterion_8() -> Outcome {
    let cfg = RunConfig::from_toml("[tower]\nc = 100.0\n").map_err(|e| e.to_string())?;
    match cfg.validate() {
        Err(ConfigError::Invalid { key, constraint }) if key == "tower.c" && constraint.contains("311.93") => {}
        other => return Err(format!("C = 100 not rejected as expected: {other:?}")),
    }
    let c_min = 16.0 / 0.95f64.ln().abs();
    check((c_min - 311.93).abs() < 5e-3, || format!("16/|ln 0.95| = {c_min}"))?;
    let sys = default_system();
    let low_c = TowerConfig { c: 100.0, ..TowerConfig::default() };
    check(matches!(Tower::build(sys.clone(), low_c), Err(TowerError::Config(_))), || "tower accepted C = 100".into())?;

    // Init: chi_1 above 1/C, and chi_1 above chi_B/2.
    let b = Arc::new(realize_orbit(&sys, ItineraryWord::new(vec![Token::B(1)])).map_err(|e| e.to_string())?);
    let mut rejected = 0;
    for (l, m) in [(1, 1), (0, 20)] {
        let child = child_cycle(&sys, &b, l, m, 0.0).map_err(|e| e.to_string())?;
        let orbit = Arc::new(realize_orbit(&sys, child.word).map_err(|e| e.to_string())?);
        match Tower::init(sys.clone(), TowerConfig::default(), orbit) {
            Err(TowerError::InitRejected(_)) => rejected += 1,
            other => return Err(format!("(l={l}, m={m}) not rejected: {:?}", other.map(|t| t.top()))),
        }
    }

    // Every extend carries its inequality reports, and they hold.
    let tower = default_tower(4);
    let mut reports = 0;
    for lv in &tower.levels()[1..] {
        for name in ["C_bound", "chi_positive", "chi_halving", "fraction"] {
            let r = lv
                .checks
                .iter()
                .find(|r| r.name == name)
                .ok_or_else(|| format!("level {} lacks the {name} report", lv.n))?;
            check(r.holds && r.lhs < r.rhs, || format!("level {}: {name} fails, {} vs {}", lv.n, r.lhs, r.rhs))?;
            reports += 1;
        }
    }
    Ok(format!("C = 100 rejected (bound {c_min:.2}); {rejected} first orbits rejected; {reports} reports hold"))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let tower = path(&format!("tower{run}.json"));
        let verify = path(&format!("verify{run}.json"));
        let code = cli::run(["hetero-cycle", "build-tower", "--no-timing", "--out", &tower]);
        check(code == 0, || format!("build-tower exited {code}"))?;
        let code = cli::run(["hetero-cycle", "verify", &tower, "--no-timing", "--out", &verify]);
        check(code == 0, || format!("verify exited {code}"))?;
        let read = |p: &str| std::fs::read(p).map_err(|e| e.to_string());
        outputs.push((read(&tower)?, read(&verify)?));
    }
    let same_tower = outputs[0].0 == outputs[1].0;
    let same_verify = outputs[0].1 == outputs[1].1;
    check(same_tower && same_verify, || "reports differ between runs".into())?;
    Ok(format!("build-tower {} bytes and verify {} bytes identical", outputs[0].0.len(), outputs[0].1.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("quotient identities", criterion_1),
        ("two-saddle solver", criterion_2),
        ("oracle equivalence", criterion_3),
        ("tower build", criterion_4),
        ("exponent decay", criterion_5),
        ("measure-positivity chain", criterion_6),
        ("ergodicity criterion", criterion_7),
        ("constants and inequality reports", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} [{secs:.2} s] {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name} [{secs:.2} s] {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
