//! The inductive construction of nested periodic orbits.
//!
//! Level 0 is the saddle B. Level `n + 1` repeats level `n` `m` times, then
//! visits A for `l` periods. Level `n` records the tolerance `gamma_n` and
//! fraction `kappa_n` with which level `n + 1` approximates it.

mod bounds;
mod certificate;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bounds::{kappa_product, r_sequence, support_bound, KappaProduct, RBound, SupportBound};
pub use certificate::{
    certify_from_profile, shadow_profile, shadow_span, verify_good_approx, GoodApproxCertificate,
    ShadowProfile, ShadowSpan,
};

use crate::dd::{to_f64, Dd};
use crate::model::{
    child_cycle, min_orbit_gap, realize_orbit, CycleSystem, ItineraryWord, ModelError,
    PeriodicOrbit, Token,
};
use crate::quotient::{section6_checks, InequalityReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchOrder {
    /// Smallest `m` first, then the smallest admissible `l`.
    Lexicographic,
    /// Smallest child period first.
    MinPeriod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TowerConfig {
    pub c: f64,
    pub halving_ratio: f64,
    /// Number of levels above the B saddle.
    pub levels: usize,
    pub m_max: u64,
    pub l_max: u64,
    pub max_period: u64,
    /// Lower end of the first level's exponent band, as a fraction of `1/C`.
    pub first_chi_floor: f64,
    /// Worst shadow deviation of a new child, as a fraction of the ceiling.
    pub shadow_fraction: f64,
    pub search: SearchOrder,
}

impl Default for TowerConfig {
    fn default() -> Self {
        Self {
            c: 320.0,
            halving_ratio: 0.5,
            levels: 4,
            m_max: 4096,
            l_max: 1 << 20,
            max_period: 1_000_000,
            first_chi_floor: 0.5,
            shadow_fraction: 0.25,
            search: SearchOrder::Lexicographic,
        }
    }
}

impl TowerConfig {
    /// Checks the ranges and `C > 16 / |chi_A|`.
    pub fn validate(&self, sys: &CycleSystem) -> Result<(), TowerError> {
        let bad = |msg: String| Err(TowerError::Config(msg));
        let chi_a = sys.central_data().chi_a();
        let c_min = 16.0 / chi_a.abs();
        if !(self.c > c_min) {
            return bad(format!("C = {} must exceed 16/|chi_A| = {c_min:.5}", self.c));
        }
        if !(self.halving_ratio > 0.0 && self.halving_ratio < 1.0) {
            return bad(format!("halving_ratio = {} must lie in (0, 1)", self.halving_ratio));
        }
        if self.m_max == 0 {
            return bad("m_max must be positive".into());
        }
        if !(self.first_chi_floor >= 0.0 && self.first_chi_floor < 1.0) {
            return bad(format!("first_chi_floor = {} must lie in [0, 1)", self.first_chi_floor));
        }
        if !(self.shadow_fraction > 0.0 && self.shadow_fraction < 1.0) {
            return bad(format!("shadow_fraction = {} must lie in (0, 1)", self.shadow_fraction));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFailure {
    pub l: u64,
    pub m: u64,
    /// One of `index`, `halving`, `fraction`, `gamma`, `period`.
    pub condition: String,
    pub margin: f64,
}

impl fmt::Display for CandidateFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(l={}, m={}) fails {} by {:e}", self.l, self.m, self.condition, self.margin)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TowerError {
    #[error("invalid tower configuration: {0}")]
    Config(String),
    #[error("first orbit rejected: {0}")]
    InitRejected(String),
    #[error("no admissible orbit for level {level}; best candidate: {}", best.as_ref().map_or("none".to_string(), |c| c.to_string()))]
    Infeasible { level: usize, best: Option<CandidateFailure>, tried: usize },
    #[error("kappa_{index} = {value} is not positive")]
    NonPositive { index: usize, value: f64 },
    #[error("r_{n} = {r:e} is not below d_{n}/3 = {bound:e}")]
    BoundViolated { n: usize, r: f64, bound: f64 },
    #[error("balls of radius {r:e} around level {n} are not disjoint")]
    DisjointnessFailed { n: usize, r: f64 },
    #[error("ball {index} of level {n} carries {count} points of level {m}, needs {required}")]
    CountingShortfall { n: usize, m: usize, index: usize, count: u64, required: u64 },
    #[error("child word does not repeat its parent")]
    NoShadow,
    #[error("levels {0} out of range")]
    BadLevel(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How level `n + 1` approximates level `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelLink {
    pub gamma: f64,
    pub kappa: f64,
    /// `min_{1<=i<=n} d_i / (3 * 2^n)`; infinite at level 0.
    pub gamma_ceiling: f64,
    pub certificate: GoodApproxCertificate,
}

#[derive(Debug, Clone)]
pub struct TowerLevel {
    pub n: usize,
    pub orbit: Arc<PeriodicOrbit>,
    pub l: u64,
    pub m: u64,
    pub exit_offset: f64,
    pub nu: Dd,
    pub chi: f64,
    pub d: f64,
    /// Largest central derivative from the base along one period.
    pub max_derivative: f64,
    /// Inequalities checked when this level was chosen.
    pub checks: Vec<InequalityReport>,
    pub link: Option<LevelLink>,
}

impl TowerLevel {
    pub fn period(&self) -> u64 {
        self.orbit.period
    }

    pub fn sigma(&self) -> f64 {
        self.orbit.sigma
    }

    pub fn gamma(&self) -> Option<f64> {
        self.link.as_ref().map(|l| l.gamma)
    }

    pub fn kappa(&self) -> Option<f64> {
        self.link.as_ref().map(|l| l.kappa)
    }

    pub fn nu_f64(&self) -> f64 {
        to_f64(self.nu)
    }
}

fn max_derivative(sys: &CycleSystem, orbit: &PeriodicOrbit) -> f64 {
    orbit.central_points(sys).map(|p| p.deriv.abs()).fold(0.0, f64::max)
}

#[allow(clippy::too_many_arguments)]
fn make_level(
    sys: &CycleSystem,
    n: usize,
    orbit: Arc<PeriodicOrbit>,
    l: u64,
    m: u64,
    exit_offset: f64,
    nu: Dd,
    checks: Vec<InequalityReport>,
) -> TowerLevel {
    let d = min_orbit_gap(sys, &orbit);
    let max_derivative = max_derivative(sys, &orbit);
    let chi = orbit.chi;
    TowerLevel { n, orbit, l, m, exit_offset, nu, chi, d, max_derivative, checks, link: None }
}

/// Reads `(l, m, nu)` back from a word `T_ba, a^l, T_ab(nu), b^m`.
pub fn lm_of_word(word: &ItineraryWord) -> Option<(u64, u64, Dd)> {
    let mut l = 0;
    let mut m = 0;
    let mut nu = None;
    let tokens = word.tokens();
    if !matches!(tokens.first(), Some(Token::Tba)) {
        return None;
    }
    for t in &tokens[1..] {
        match t {
            Token::A(k) if nu.is_none() => l += k,
            Token::Tab(v) if nu.is_none() => nu = Some(*v),
            Token::B(k) if nu.is_some() => m += k,
            _ => return None,
        }
    }
    Some((l, m, nu?))
}

/// A candidate child, before realization.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    l: u64,
    m: u64,
    period: u64,
}

#[derive(Debug, Clone)]
pub struct Tower {
    system: CycleSystem,
    config: TowerConfig,
    levels: Vec<TowerLevel>,
}

impl Tower {
    pub fn system(&self) -> &CycleSystem {
        &self.system
    }

    pub fn config(&self) -> &TowerConfig {
        &self.config
    }

    pub fn levels(&self) -> &[TowerLevel] {
        &self.levels
    }

    pub fn level(&self, n: usize) -> &TowerLevel {
        &self.levels[n]
    }

    /// Index of the highest level.
    pub fn top(&self) -> usize {
        self.levels.len() - 1
    }

    /// `min_{1<=i<=n} d_i / (3 * 2^n)`; infinite for `n = 0`.
    pub fn gamma_ceiling(&self, n: usize) -> f64 {
        if n == 0 {
            return f64::INFINITY;
        }
        let min_d = self.levels[1..=n].iter().map(|lv| lv.d).fold(f64::INFINITY, f64::min);
        min_d / (3.0 * 2f64.powi(n as i32))
    }

    /// Builds the B level and the first orbit with its certificate.
    pub fn init(
        system: CycleSystem,
        config: TowerConfig,
        first_orbit: Arc<PeriodicOrbit>,
    ) -> Result<Tower, TowerError> {
        config.validate(&system)?;
        let data = *system.central_data();
        let chi = first_orbit.chi;
        if !(first_orbit.sigma.abs() > 1.0) {
            return Err(TowerError::InitRejected(format!(
                "|sigma| = {} is not above 1",
                first_orbit.sigma.abs()
            )));
        }
        let half_b = 0.5 * data.chi_b();
        if !(chi > 0.0 && chi < half_b) {
            return Err(TowerError::InitRejected(format!(
                "0 < chi_1 < chi_B/2 fails: chi_1 = {chi}, chi_B/2 = {half_b}"
            )));
        }
        if !(chi < 1.0 / config.c) {
            return Err(TowerError::InitRejected(format!(
                "chi_1 = {chi} is not below 1/C = {}",
                1.0 / config.c
            )));
        }
        let (l, m, nu) = lm_of_word(&first_orbit.word).ok_or_else(|| {
            TowerError::InitRejected("first orbit is not of the form T_ba a^l T_ab b^m".into())
        })?;
        let b = Arc::new(realize_orbit(&system, ItineraryWord::new(vec![Token::B(1)]))?);
        let base = make_level(&system, 0, b, 0, 0, 0.0, Dd::from(0.0), Vec::new());
        let checks = section6_checks(&data, config.c, data.chi_b(), u64::from(data.pi_b), l, m, data.transition_time());
        let first = make_level(&system, 1, first_orbit, l, m, 0.0, nu, checks);
        let mut tower = Tower { system, config, levels: vec![base, first] };
        let gamma0 = 2.0 * tower.system.spec().chart_radius;
        tower.link(0, Some(gamma0))?;
        Ok(tower)
    }

    /// Certificate of level `n + 1` against level `n`.
    ///
    /// With `gamma = None` the tolerance is chosen as the geometric mean of
    /// the measured shadow distance and the ceiling.
    fn link(&mut self, n: usize, gamma: Option<f64>) -> Result<&LevelLink, TowerError> {
        let ceiling = self.gamma_ceiling(n);
        let kappa_required = 1.0 - self.config.c * self.levels[n].chi;
        let cert = {
            let sys = &self.system;
            let parent = &self.levels[n].orbit;
            let child = &self.levels[n + 1].orbit;
            let span = shadow_span(sys, child, parent).ok_or(TowerError::NoShadow)?;
            let profile = shadow_profile(sys, child, parent, span);
            let gamma = gamma.unwrap_or_else(|| {
                let probe = certify_from_profile(&profile, child.period, ceiling, kappa_required);
                if probe.gamma_measured > 0.0 {
                    (probe.gamma_measured * ceiling).sqrt()
                } else {
                    0.5 * ceiling
                }
            });
            certify_from_profile(&profile, child.period, gamma, kappa_required)
        };
        self.levels[n].link = Some(LevelLink {
            gamma: cert.gamma,
            kappa: cert.kappa,
            gamma_ceiling: ceiling,
            certificate: cert,
        });
        Ok(self.levels[n].link.as_ref().expect("just set"))
    }

    /// Chooses the first orbit: the first `(l, m)` in search order whose
    /// exponent lies in `[floor/C, 1/C)` and below `chi_B/2`.
    pub fn select_first_orbit(
        system: &CycleSystem,
        config: &TowerConfig,
    ) -> Result<Arc<PeriodicOrbit>, TowerError> {
        config.validate(system)?;
        let data = system.central_data();
        let upper = (1.0 / config.c).min(0.5 * data.chi_b());
        let lower = config.first_chi_floor / config.c;
        let log_b = f64::from(data.pi_b) * system.slope_b().ln();
        let b = realize_orbit(system, ItineraryWord::new(vec![Token::B(1)]))?;
        let candidates = search_candidates(system, config, log_b, u64::from(data.pi_b), upper);
        let mut best = None;
        for cand in &candidates {
            let chi = child_log_sigma(system, log_b, cand.l, cand.m) / cand.period as f64;
            if chi < lower {
                best = Some(CandidateFailure {
                    l: cand.l,
                    m: cand.m,
                    condition: "band".into(),
                    margin: chi - lower,
                });
                continue;
            }
            let parent = Arc::new(b);
            let child = child_cycle(system, &parent, cand.l, cand.m, 0.0)?;
            return Ok(Arc::new(realize_orbit(system, child.word)?));
        }
        Err(TowerError::Infeasible { level: 1, best, tried: candidates.len() })
    }

    /// Builds B, the first orbit and `config.levels - 1` further levels.
    /// With `levels = 0` only the B saddle is built.
    pub fn build(system: CycleSystem, config: TowerConfig) -> Result<Tower, TowerError> {
        let levels = config.levels;
        if levels == 0 {
            config.validate(&system)?;
            return Tower::from_choices(system, config, &[]);
        }
        let first = Tower::select_first_orbit(&system, &config)?;
        let mut tower = Tower::init(system, config, first)?;
        while tower.top() < levels {
            tower.extend()?;
        }
        Ok(tower)
    }

    /// Adds the first admissible child of the top level.
    pub fn extend(&mut self) -> Result<&TowerLevel, TowerError> {
        let n = self.top();
        let (parent, parent_chi, log_parent) = {
            let top = &self.levels[n];
            (Arc::clone(&top.orbit), top.chi, top.orbit.log_abs_sigma)
        };
        let ceiling = self.gamma_ceiling(n);
        let h = self.config.halving_ratio;
        let c = self.config.c;
        let kappa_required = 1.0 - c * parent_chi;
        let candidates =
            search_candidates(&self.system, &self.config, log_parent, parent.period, h * parent_chi);
        let data = *self.system.central_data();
        let scale = self.system.coord_scale();
        let max_deriv = self.levels[n].max_derivative;
        let mut best: Option<CandidateFailure> = None;
        let mut keep_best = |f: CandidateFailure| {
            if best.as_ref().is_none_or(|b| f.margin > b.margin) {
                best = Some(f);
            }
        };
        for cand in &candidates {
            let predicted = ((cand.m - 1) * parent.period) as f64 / cand.period as f64;
            if predicted < kappa_required {
                keep_best(CandidateFailure {
                    l: cand.l,
                    m: cand.m,
                    condition: "fraction".into(),
                    margin: predicted - kappa_required,
                });
                continue;
            }
            let exit_offset =
                self.config.shadow_fraction * ceiling * parent.sigma.abs() / (max_deriv * scale);
            let child = child_cycle(&self.system, &parent, cand.l, cand.m, exit_offset)?;
            let orbit = Arc::new(realize_orbit(&self.system, child.word)?);
            let checks = section6_checks(
                &data,
                c,
                parent_chi,
                parent.period,
                cand.l,
                cand.m,
                data.transition_time(),
            );
            let level = make_level(&self.system, n + 1, orbit, cand.l, cand.m, exit_offset, child.nu, checks);
            self.levels.push(level);
            let link = self.link(n, None)?.clone();
            let cert = &link.certificate;
            let gamma_ok = cert.gamma_bound_ok && link.gamma < ceiling;
            let d_ok = self.levels[n + 1].d > 0.0;
            if gamma_ok && cert.kappa_ok && cert.fibers_equal && d_ok {
                return Ok(&self.levels[n + 1]);
            }
            self.levels.pop();
            self.levels[n].link = None;
            let (condition, margin) = if !cert.kappa_ok {
                ("fraction", cert.kappa - kappa_required)
            } else if !d_ok {
                ("gap", 0.0)
            } else {
                ("gamma", ceiling - cert.gamma_measured)
            };
            keep_best(CandidateFailure { l: cand.l, m: cand.m, condition: condition.into(), margin });
        }
        Err(TowerError::Infeasible { level: n + 1, best, tried: candidates.len() })
    }

    /// Rebuilds a tower from recorded choices, attaching the recorded
    /// tolerances instead of choosing new ones.
    pub fn from_choices(
        system: CycleSystem,
        config: TowerConfig,
        choices: &[LevelChoice],
    ) -> Result<Tower, TowerError> {
        config.validate(&system)?;
        let data = *system.central_data();
        let b = Arc::new(realize_orbit(&system, ItineraryWord::new(vec![Token::B(1)]))?);
        let mut levels = vec![make_level(&system, 0, b, 0, 0, 0.0, Dd::from(0.0), Vec::new())];
        for (i, ch) in choices.iter().enumerate() {
            let parent = Arc::clone(&levels[i].orbit);
            let child = child_cycle(&system, &parent, ch.l, ch.m, ch.exit_offset)?;
            let orbit = Arc::new(realize_orbit(&system, child.word)?);
            let checks = section6_checks(
                &data,
                config.c,
                levels[i].chi,
                parent.period,
                ch.l,
                ch.m,
                data.transition_time(),
            );
            levels.push(make_level(&system, i + 1, orbit, ch.l, ch.m, ch.exit_offset, child.nu, checks));
        }
        let mut tower = Tower { system, config, levels };
        for (i, ch) in choices.iter().enumerate() {
            tower.link(i, Some(ch.parent_gamma))?;
        }
        Ok(tower)
    }

    /// The recorded choices that reproduce this tower.
    pub fn choices(&self) -> Vec<LevelChoice> {
        self.levels[1..]
            .iter()
            .enumerate()
            .map(|(i, lv)| LevelChoice {
                l: lv.l,
                m: lv.m,
                exit_offset: lv.exit_offset,
                parent_gamma: self.levels[i].gamma().unwrap_or(f64::NAN),
            })
            .collect()
    }
}

/// What is needed to rebuild level `n + 1` of a tower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelChoice {
    pub l: u64,
    pub m: u64,
    pub exit_offset: f64,
    /// `gamma_n` of the parent level.
    pub parent_gamma: f64,
}

fn child_log_sigma(sys: &CycleSystem, log_parent: f64, l: u64, m: u64) -> f64 {
    let pi_a = u64::from(sys.central_data().pi_a);
    m as f64 * log_parent + (l * pi_a) as f64 * sys.slope_a().ln()
}

/// For each `m`, the smallest `l` with `0 < chi_child < chi_max`, in search
/// order.
fn search_candidates(
    sys: &CycleSystem,
    config: &TowerConfig,
    log_parent: f64,
    parent_period: u64,
    chi_max: f64,
) -> Vec<Candidate> {
    let data = sys.central_data();
    let pi_a = u64::from(data.pi_a);
    let t = data.transition_time();
    let log_a = pi_a as f64 * sys.slope_a().ln();
    let chi_of = |l: u64, m: u64| {
        let period = m * parent_period + l * pi_a + t;
        child_log_sigma(sys, log_parent, l, m) / period as f64
    };
    let mut out = Vec::new();
    for m in 1..=config.m_max {
        // chi is decreasing in l while positive; start from the linear estimate.
        let est = (m as f64 * log_parent - chi_max * (m * parent_period + t) as f64)
            / (chi_max * pi_a as f64 - log_a);
        let mut l = if est.is_finite() && est > 0.0 { est.floor() as u64 } else { 0 };
        while l > 0 && chi_of(l - 1, m) < chi_max {
            l -= 1;
        }
        while chi_of(l, m) >= chi_max && l <= config.l_max {
            l += 1;
        }
        if l > config.l_max || chi_of(l, m) <= 0.0 {
            continue;
        }
        let period = m * parent_period + l * pi_a + t;
        if period > config.max_period {
            continue;
        }
        out.push(Candidate { l, m, period });
    }
    if config.search == SearchOrder::MinPeriod {
        out.sort_by_key(|c| c.period);
    }
    out
}

#[cfg(test)]
mod tests;
