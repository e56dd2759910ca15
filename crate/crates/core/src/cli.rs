//! Commands behind the `hetero-cycle` binary.
//!
//! Exit codes: 0 success, 2 infeasible search or solver failure, 3 failed
//! certificate or assertion, 64 unreadable input or bad usage, 65 invalid
//! configuration.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::config::{load_config, ConfigError, Format, RunConfig};
use crate::measure::{
    central_exponent_of_measure, check_ergodicity_criterion, default_dictionary, exponent_trace,
    PeriodicMeasure,
};
use crate::quotient::{
    corbd_solve, multiplier_closed_form, nu_for_fixed_point,
    section6_checks, theta_bound, CycleCentralData,
};
use crate::report::{
    BuildFailure, CheckRow, CorbdRow, ErgodicityBlock, NuRow, RunReport, SolveReport, SweepRow,
    TowerReport, VerifyReport,
};
use crate::tower::{kappa_product, r_sequence, support_bound, Tower, TowerError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;
pub const EXIT_PARSE: i32 = 64;
pub const EXIT_INVALID: i32 = 65;

#[derive(Debug, Parser)]
#[command(name = "hetero-cycle", version, about = "Periodic-orbit towers in a heterodimensional cycle model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file; defaults apply when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Overrides `tower.levels`.
    #[arg(long, global = true)]
    pub levels: Option<usize>,
    /// Leaves the timing block out of the report.
    #[arg(long, global = true)]
    pub no_timing: bool,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Also writes plot columns (`<out>.plot.csv`, or after the report).
    #[arg(long, global = true)]
    pub emit_plot_data: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tables of translations, corbd roots and closed forms.
    Solve,
    /// Builds the tower level by level.
    BuildTower,
    /// Checks a tower: rebuilt from a saved build report, or built afresh.
    Verify { tower: Option<PathBuf> },
    /// Builds towers over a parameter grid.
    Sweep,
    /// Re-emits a saved JSON report, or builds and verifies in one report.
    Report { input: Option<PathBuf> },
}

/// A report together with the exit code it earned.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: RunReport,
    pub code: i32,
    pub message: Option<String>,
}

impl Outcome {
    fn ok(report: RunReport) -> Self {
        Self { report, code: EXIT_OK, message: None }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        let code = match e {
            ConfigError::Parse(_) => EXIT_PARSE,
            ConfigError::Invalid { .. } => EXIT_INVALID,
        };
        CliError { code, message: e.to_string() }
    }
}

struct Timer {
    enabled: bool,
    phases: BTreeMap<String, f64>,
}

impl Timer {
    fn new(enabled: bool) -> Self {
        Self { enabled, phases: BTreeMap::new() }
    }

    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.phases.insert(name.to_string(), start.elapsed().as_secs_f64());
        out
    }

    fn finish(self) -> Option<BTreeMap<String, f64>> {
        self.enabled.then_some(self.phases)
    }
}

fn base_report(command: &str, config: &RunConfig) -> RunReport {
    RunReport { command: command.to_string(), config: config.clone(), ..RunReport::default() }
}

pub fn cmd_solve(config: &RunConfig) -> Outcome {
    let mut report = base_report("solve", config);
    let data = config.spec().central;
    let s = &config.solve;
    let mut out = SolveReport::default();
    for l in s.l_min..=s.l_max {
        for m in s.m_min..=s.m_max {
            let sol = nu_for_fixed_point(&data, l, m);
            out.nu.push(NuRow {
                l,
                m,
                nu: sol.nu,
                nu_lo: sol.nu_lo,
                multiplier: sol.multiplier,
                period: sol.period,
                residual: sol.residual(&data),
                fixed_point: sol.fixed_point(&data).ok(),
                chi: sol.multiplier.abs().ln() / sol.period as f64,
            });
            out.inequalities.extend(section6_checks(
                &data,
                config.tower.c,
                data.chi_b(),
                u64::from(data.pi_b),
                l,
                m,
                data.transition_time(),
            ));
        }
    }
    let mut failure = None;
    for case in &s.corbd {
        let lambda = case.lambda.unwrap_or(data.lambda);
        let solved = corbd_solve(lambda, case.k, case.p, case.q, case.orientation).and_then(|sol| {
            let (_, m) = sol.closed_form_pair();
            multiplier_closed_form(lambda, sol.beta_bar, sol.xi_offset, m, case.orientation).map(|c| (sol, c))
        });
        match solved {
            Ok((sol, closed)) => {
                let theta_data = CycleCentralData { lambda, beta: sol.beta_bar, ..data };
                out.corbd.push(CorbdRow {
                    lambda,
                    k: case.k,
                    p: case.p,
                    q: case.q,
                    orientation: case.orientation,
                    beta_bar: sol.beta_bar,
                    xi_offset: sol.xi_offset,
                    nu_k: sol.nu_k,
                    residual_1: sol.residual_1,
                    residual_2: sol.residual_2,
                    multiplier: sol.multiplier(lambda),
                    closed_form: closed,
                    theta: theta_bound(&theta_data, case.orientation),
                });
            }
            Err(e) => {
                failure.get_or_insert(format!("corbd (k={}, p={}, q={}): {e}", case.k, case.p, case.q));
            }
        }
    }
    report.solve = Some(out);
    match failure {
        None => Outcome::ok(report),
        Some(msg) => Outcome { report, code: EXIT_INFEASIBLE, message: Some(msg) },
    }
}

/// Builds as many levels as possible; the error says why the build stopped.
pub fn build_partial(config: &RunConfig) -> Result<(Tower, Option<TowerError>), CliError> {
    let sys = config.system()?;
    let tc = config.tower.clone();
    if tc.levels == 0 {
        return Tower::build(sys, tc).map(|t| (t, None)).map_err(tower_error);
    }
    let base = || Tower::build(config.system().expect("validated"), crate::tower::TowerConfig { levels: 0, ..tc.clone() });
    let first = match Tower::select_first_orbit(&sys, &tc) {
        Ok(f) => f,
        Err(e) => return Ok((base().map_err(tower_error)?, Some(e))),
    };
    let mut tower = match Tower::init(sys, tc.clone(), first) {
        Ok(t) => t,
        Err(e) => return Ok((base().map_err(tower_error)?, Some(e))),
    };
    while tower.top() < tc.levels {
        if let Err(e) = tower.extend() {
            return Ok((tower, Some(e)));
        }
    }
    Ok((tower, None))
}

fn tower_error(e: TowerError) -> CliError {
    let code = match e {
        TowerError::Config(_) => EXIT_INVALID,
        TowerError::Infeasible { .. } | TowerError::InitRejected(_) => EXIT_INFEASIBLE,
        _ => EXIT_VIOLATION,
    };
    CliError { code, message: e.to_string() }
}

fn build_failure(e: &TowerError) -> BuildFailure {
    match e {
        TowerError::Infeasible { level, best, tried } => {
            BuildFailure { level: *level, message: e.to_string(), best: best.clone(), tried: *tried }
        }
        _ => BuildFailure { level: 1, message: e.to_string(), best: None, tried: 0 },
    }
}

/// The hypotheses of the construction as numeric assertions, in a fixed
/// order: growing periods, the first-level window, then good approximation
/// (condition 3), the gamma ceiling (condition 4) and exponent halving
/// (condition 5) level by level, and the per-level inequality reports.
pub fn level_checks(tower: &Tower) -> Vec<CheckRow> {
    let mut rows = Vec::new();
    let cfg = tower.config();
    let top = tower.top();
    for n in 1..=top {
        let (p0, p1) = (tower.level(n - 1).period(), tower.level(n).period());
        rows.push(CheckRow::new(
            format!("condition 2: period grows (level {n})"),
            p1 > p0,
            p1 as f64,
            p0 as f64,
            format!("pi_{n} = {p1}, pi_{} = {p0}", n - 1),
        ));
    }
    if top >= 1 {
        let chi1 = tower.level(1).chi;
        let half_b = 0.5 * tower.system().central_data().chi_b();
        rows.push(CheckRow::new(
            "first level: 0 < chi_1 < chi_B/2",
            chi1 > 0.0 && chi1 < half_b,
            chi1,
            half_b,
            format!("chi_1 = {chi1:e}"),
        ));
        rows.push(CheckRow::new(
            "first level: chi_1 < 1/C",
            chi1 < 1.0 / cfg.c,
            chi1,
            1.0 / cfg.c,
            format!("chi_1 = {chi1:e}, C = {}", cfg.c),
        ));
    }
    for n in 0..top {
        let lv = tower.level(n);
        let Some(link) = lv.link.as_ref() else {
            rows.push(CheckRow::new(
                format!("condition 3: good approximation (level {n})"),
                false,
                f64::NAN,
                f64::NAN,
                "no certificate",
            ));
            continue;
        };
        let c = &link.certificate;
        rows.push(CheckRow::new(
            format!("condition 3: good approximation (level {n})"),
            c.passed() && c.gamma_measured < link.gamma,
            c.kappa,
            c.kappa_required,
            format!(
                "kept {}/{} blocks, measured {:e} < gamma {:e}",
                c.included_blocks, c.total_blocks, c.gamma_measured, link.gamma
            ),
        ));
    }
    for n in 1..top {
        let gamma = tower.level(n).gamma().unwrap_or(f64::NAN);
        let ceiling = tower.gamma_ceiling(n);
        rows.push(CheckRow::new(
            format!("condition 4: gamma below separation ceiling (level {n})"),
            gamma < ceiling,
            gamma,
            ceiling,
            format!("gamma_{n} = {gamma:e}, min d_i/(3*2^{n}) = {ceiling:e}"),
        ));
    }
    for n in 1..top {
        let (a, b) = (tower.level(n).chi, tower.level(n + 1).chi);
        rows.push(CheckRow::new(
            format!("condition 5: exponent halving (level {})", n + 1),
            b > 0.0 && b < cfg.halving_ratio * a,
            b,
            cfg.halving_ratio * a,
            format!("chi_{} = {b:e}, chi_{n} = {a:e}", n + 1),
        ));
    }
    for lv in &tower.levels()[1..] {
        for r in lv.checks.iter().filter(|r| r.name == "fraction" || r.name == "chi_positive") {
            rows.push(CheckRow::new(
                format!("inequality {} (level {})", r.name, lv.n),
                r.holds,
                r.lhs,
                r.rhs,
                format!("lhs {:e} < rhs {:e}", r.lhs, r.rhs),
            ));
        }
    }
    rows
}

pub fn cmd_build_tower(config: &RunConfig, timing: bool) -> Result<Outcome, CliError> {
    let mut timer = Timer::new(timing);
    let (tower, err) = timer.time("build", || build_partial(config))?;
    let mut report = base_report("build-tower", config);
    let mut tr = TowerReport::from_tower(&tower);
    tr.failure = err.as_ref().map(build_failure);
    report.tower = Some(tr);
    report.timing = timer.finish();
    if let Some(e) = err {
        let code = tower_error(e.clone()).code;
        return Ok(Outcome { report, code, message: Some(e.to_string()) });
    }
    if let Some(bad) = level_checks(&tower).into_iter().find(|r| !r.holds) {
        let msg = format!("{} fails: {}", bad.name, bad.detail);
        return Ok(Outcome { report, code: EXIT_VIOLATION, message: Some(msg) });
    }
    Ok(Outcome::ok(report))
}

/// Rebuilds a tower from a saved build report; the model and tower settings
/// come from the report's own configuration echo.
pub fn tower_from_report(saved: &RunReport) -> Result<(Tower, TowerReport), CliError> {
    let tr = saved.tower.clone().ok_or_else(|| CliError {
        code: EXIT_PARSE,
        message: "report has no tower section".into(),
    })?;
    saved.config.validate()?;
    let choices = tr.choices().map_err(|m| CliError { code: EXIT_PARSE, message: m })?;
    let sys = saved.config.system()?;
    let tower = Tower::from_choices(sys, saved.config.tower.clone(), &choices).map_err(tower_error)?;
    Ok((tower, tr))
}

fn reproduction_checks(tower: &Tower, recorded: &TowerReport) -> Vec<CheckRow> {
    let fresh = TowerReport::from_tower(tower);
    let mut rows = Vec::new();
    for (a, b) in recorded.levels.iter().zip(&fresh.levels) {
        let same = a.period == b.period
            && a.chi == b.chi
            && a.d == b.d
            && a.kappa == b.kappa
            && a.gamma_measured == b.gamma_measured;
        rows.push(CheckRow::new(
            format!("recorded numbers reproduced (level {})", a.n),
            same,
            b.chi,
            a.chi,
            format!("period {} vs {}, kappa {:?} vs {:?}", b.period, a.period, b.kappa, a.kappa),
        ));
    }
    if recorded.levels.len() != fresh.levels.len() {
        rows.push(CheckRow::new(
            "recorded numbers reproduced (level count)",
            false,
            fresh.levels.len() as f64,
            recorded.levels.len() as f64,
            "level count differs",
        ));
    }
    rows
}

/// Every check of `verify` on a built tower, compared against `recorded`
/// when the tower was rebuilt from a saved report.
pub fn verify_tower(tower: &Tower, config: &RunConfig, recorded: Option<&TowerReport>) -> VerifyReport {
    verify_timed(tower, config, recorded, &mut Timer::new(false))
}

fn verify_timed(tower: &Tower, config: &RunConfig, recorded: Option<&TowerReport>, timer: &mut Timer) -> VerifyReport {
    let mut v = VerifyReport { checks: level_checks(tower), ..VerifyReport::default() };
    if let Some(rec) = recorded {
        v.checks.extend(reproduction_checks(tower, rec));
    }
    let top = tower.top();
    timer.time("bounds", || {
        match r_sequence(tower) {
            Ok(rs) => {
                for b in &rs {
                    let strict = b.n < top;
                    v.checks.push(CheckRow::new(
                        format!("r_{} below d_{}/3", b.n, b.n),
                        if strict { b.r < b.bound } else { b.r <= b.bound },
                        b.r,
                        b.bound,
                        format!("margin {:e}", b.margin),
                    ));
                }
                v.r_chain = rs;
            }
            Err(e) => v.checks.push(CheckRow::new("r chain", false, f64::NAN, f64::NAN, e.to_string())),
        }
        for n in 1..=top {
            match kappa_product(tower, n) {
                Ok(kp) => {
                    v.checks.push(CheckRow::new(
                        format!("kappa product from level {n} positive"),
                        kp.total > 0.0,
                        kp.total,
                        0.0,
                        format!("built {:e}, tail {:e}", kp.built, kp.tail),
                    ));
                    v.kappa_products.push(kp);
                }
                Err(e) => v.checks.push(CheckRow::new(
                    format!("kappa product from level {n} positive"),
                    false,
                    f64::NAN,
                    0.0,
                    e.to_string(),
                )),
            }
        }
        for n in 1..=config.verify.support_max_n.min(top.saturating_sub(1)) {
            for m in n + 1..=top {
                let name = format!("support bound (n={n}, m={m})");
                match support_bound(tower, n, m) {
                    Ok(sb) => {
                        v.checks.push(CheckRow::new(
                            name,
                            sb.min_count >= sb.required,
                            sb.min_count as f64,
                            sb.required as f64,
                            format!("{} balls, mass bound {:e}", sb.ball_count, sb.measure_lower_bound),
                        ));
                        v.support.push(sb);
                    }
                    Err(e) => v.checks.push(CheckRow::new(name, false, f64::NAN, f64::NAN, e.to_string())),
                }
            }
        }
    });
    timer.time("exponents", || {
        let sys = tower.system();
        let trace = exponent_trace(tower);
        let chi1 = tower.levels().get(1).map(|l| l.chi).unwrap_or(f64::NAN);
        let h = tower.config().halving_ratio;
        for lv in &tower.levels()[1..] {
            let measured = central_exponent_of_measure(sys, &PeriodicMeasure::new(Arc::clone(&lv.orbit)));
            let bound = chi1 * h.powi(lv.n as i32 - 1);
            v.checks.push(CheckRow::new(
                format!("exponent of measure matches orbit (level {})", lv.n),
                (measured - lv.chi).abs() <= 1e-12,
                measured,
                lv.chi,
                format!("difference {:e}", measured - lv.chi),
            ));
            v.checks.push(CheckRow::new(
                format!("exponent decay (level {})", lv.n),
                lv.chi <= bound,
                lv.chi,
                bound,
                format!("chi_{} = {:e} <= chi_1 h^{} = {bound:e}", lv.n, lv.chi, lv.n - 1),
            ));
        }
        v.exponent_trace = Some(trace);
    });
    timer.time("ergodicity", || {
        let dict: Vec<_> = default_dictionary(tower.system())
            .into_iter()
            .filter(|f| config.verify.dictionary.contains(&f.id))
            .collect();
        for &eps in &config.verify.eps {
            let mut block = ErgodicityBlock { eps, reports: Vec::new() };
            for phi in &dict {
                let name = format!("ergodicity criterion ({}, eps={eps})", phi.id);
                match check_ergodicity_criterion(tower, phi, eps) {
                    Ok(r) => {
                        let worst = r.pairs.iter().map(|p| p.max_deviation).fold(0.0, f64::max);
                        v.checks.push(CheckRow::new(
                            name,
                            r.passed,
                            worst,
                            eps,
                            format!("N = {}, {} pairs", r.n, r.pairs.len()),
                        ));
                        block.reports.push(r);
                    }
                    Err(e) => v.checks.push(CheckRow::new(name, false, f64::NAN, eps, e.to_string())),
                }
            }
            v.ergodicity.push(block);
        }
    });
    v.passed = v.checks.iter().all(|c| c.holds);
    v.first_failure = v.checks.iter().find(|c| !c.holds).map(|c| format!("{}: {}", c.name, c.detail));
    v
}

pub fn cmd_verify(config: &RunConfig, tower_file: Option<&Path>, timing: bool) -> Result<Outcome, CliError> {
    let mut timer = Timer::new(timing);
    let (tower, recorded) = match tower_file {
        Some(path) => {
            let saved = read_report(path)?;
            let (tower, tr) = timer.time("rebuild", || tower_from_report(&saved))?;
            (tower, Some(tr))
        }
        None => {
            let (tower, err) = timer.time("build", || build_partial(config))?;
            if let Some(e) = err {
                let mut report = base_report("verify", config);
                report.tower = Some(TowerReport::from_tower(&tower));
                return Ok(Outcome { report, code: tower_error(e.clone()).code, message: Some(e.to_string()) });
            }
            (tower, None)
        }
    };
    let v = verify_timed(&tower, config, recorded.as_ref(), &mut timer);
    let mut report = base_report("verify", config);
    report.tower = Some(TowerReport::from_tower(&tower));
    let failure = v.first_failure.clone();
    report.verify = Some(v);
    report.timing = timer.finish();
    Ok(match failure {
        None => Outcome::ok(report),
        Some(msg) => Outcome { report, code: EXIT_VIOLATION, message: Some(msg) },
    })
}

fn sweep_cell(cell: usize, config: RunConfig) -> SweepRow {
    let spec = config.spec();
    let mut row = SweepRow {
        cell,
        lambda: spec.central.lambda,
        beta: spec.central.beta,
        c: config.tower.c,
        halving_ratio: config.tower.halving_ratio,
        status: "ok".into(),
        levels_built: 0,
        top_period: 1,
        top_chi: spec.central.chi_b(),
        kappa_product: None,
        message: String::new(),
    };
    if let Err(e) = config.validate() {
        row.status = "invalid".into();
        row.message = e.to_string();
        return row;
    }
    match build_partial(&config) {
        Ok((tower, err)) => {
            row.levels_built = tower.top();
            row.top_period = tower.level(tower.top()).period();
            row.top_chi = tower.level(tower.top()).chi;
            row.kappa_product = kappa_product(&tower, 1.min(tower.top())).ok().map(|k| k.total);
            if let Some(e) = err {
                row.status = "infeasible".into();
                row.message = e.to_string();
            }
        }
        Err(e) => {
            row.status = "invalid".into();
            row.message = e.message;
        }
    }
    row
}

/// Runs the cartesian product of the sweep grids; cells are spread over
/// worker threads and reported in cell order.
pub fn cmd_sweep(config: &RunConfig, timing: bool) -> Outcome {
    let mut timer = Timer::new(timing);
    let s = &config.sweep;
    let spec = config.spec();
    let or_base = |v: &Vec<f64>, base: f64| if v.is_empty() { vec![base] } else { v.clone() };
    let lambdas = or_base(&s.lambda, spec.central.lambda);
    let betas = or_base(&s.beta, spec.central.beta);
    let cs = or_base(&s.c, config.tower.c);
    let hs = or_base(&s.halving_ratio, config.tower.halving_ratio);
    let mut cells = Vec::new();
    for &lambda in &lambdas {
        for &beta in &betas {
            for &c in &cs {
                for &h in &hs {
                    let mut cfg = config.clone();
                    cfg.model.lambda = Some(lambda);
                    cfg.model.beta = Some(beta);
                    if s.lambda.len() > 1 || s.beta.len() > 1 {
                        cfg.model.rho_s = None;
                        cfg.model.rho_u = None;
                        cfg.model.section6_regime = None;
                    }
                    cfg.tower.c = c;
                    cfg.tower.halving_ratio = h;
                    if let Some(levels) = s.levels {
                        cfg.tower.levels = levels;
                    }
                    cells.push(cfg);
                }
            }
        }
    }
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cells.len()).max(1);
    let rows = timer.time("sweep", || {
        let mut rows: Vec<Option<SweepRow>> = vec![None; cells.len()];
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let cells = &cells;
                    scope.spawn(move || {
                        (w..cells.len())
                            .step_by(workers)
                            .map(|i| sweep_cell(i, cells[i].clone()))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for row in h.join().expect("sweep worker panicked") {
                    let i = row.cell;
                    rows[i] = Some(row);
                }
            }
        });
        rows.into_iter().map(|r| r.expect("every cell ran")).collect::<Vec<_>>()
    });
    let mut report = base_report("sweep", config);
    report.sweep = Some(rows);
    report.timing = timer.finish();
    Outcome::ok(report)
}

pub fn cmd_report(config: &RunConfig, input: Option<&Path>, timing: bool) -> Result<Outcome, CliError> {
    if let Some(path) = input {
        return Ok(Outcome::ok(read_report(path)?));
    }
    let mut outcome = cmd_verify(config, None, timing)?;
    outcome.report.command = "report".into();
    Ok(outcome)
}

pub fn read_report(path: &Path) -> Result<RunReport, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError { code: EXIT_PARSE, message: format!("{}: {e}", path.display()) })?;
    RunReport::from_json(&text)
        .map_err(|e| CliError { code: EXIT_PARSE, message: format!("{}: {e}", path.display()) })
}

/// Loads the configuration and applies the command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(levels) = cli.levels {
        config.tower.levels = levels;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(format) = cli.format {
        config.output.format = format;
    }
    config.validate()?;
    Ok(config.resolved())
}

pub fn dispatch(cli: &Cli, config: &RunConfig) -> Result<Outcome, CliError> {
    let timing = !cli.no_timing;
    match &cli.command {
        Command::Solve => Ok(cmd_solve(config)),
        Command::BuildTower => cmd_build_tower(config, timing),
        Command::Verify { tower } => cmd_verify(config, tower.as_deref(), timing),
        Command::Sweep => Ok(cmd_sweep(config, timing)),
        Command::Report { input } => cmd_report(config, input.as_deref(), timing),
    }
}

fn emit(cli: &Cli, config: &RunConfig, report: &RunReport) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError { code: EXIT_PARSE, message: e.to_string() };
    let format = config.output.format;
    // `--out` is not echoed into the report, so reruns to another file stay identical.
    match cli.out.as_ref().or(config.output.path.as_ref()) {
        Some(path) => {
            let mut f = std::fs::File::create(path).map_err(io)?;
            report.write(format, &mut f).map_err(io)?;
            if cli.emit_plot_data {
                let plot = report.plot_csv().map_err(|e| io(std::io::Error::other(e)))?;
                std::fs::write(path.with_extension("plot.csv"), plot).map_err(io)?;
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            report.write(format, &mut lock).map_err(io)?;
            if cli.emit_plot_data {
                let plot = report.plot_csv().map_err(|e| io(std::io::Error::other(e)))?;
                lock.write_all(b"\n").and_then(|_| lock.write_all(plot.as_bytes())).map_err(io)?;
            }
        }
    }
    Ok(())
}

/// Parses `args`, runs the command, writes the report and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = resolve_config(&cli).and_then(|config| {
        let outcome = dispatch(&cli, &config)?;
        emit(&cli, &config, &outcome.report)?;
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            if let Some(msg) = &outcome.message {
                eprintln!("hetero-cycle: {msg}");
            }
            outcome.code
        }
        Err(e) => {
            eprintln!("hetero-cycle: {}", e.message);
            e.code
        }
    }
}
