//! One-dimensional central quotient dynamics of a simple cycle.
//!
//! Everything here is a pure function of value inputs: affine map algebra,
//! the closing parameter for the saddles `R_{l,m}`, the two-saddle solver,
//! closed-form multipliers and the scalar inequalities used by the tower.

use std::collections::BTreeMap;

use crate::dd::{dd, div, powu, to_f64, Dd};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuotientError {
    #[error("translation x -> x + {intercept} has no fixed point")]
    NoFixedPoint { intercept: f64 },
    #[error("identity map: every point is fixed")]
    EveryPointFixed,
    #[error("no sign change of the residual for beta_bar in (1, {beta_max}]")]
    NoRoot { beta_max: f64 },
    #[error("lambda^(k-2) - lambda^k = {gap:e} is below tolerance")]
    Degenerate { gap: f64 },
    #[error("beta_bar^m * xi = {product} is not below 1")]
    OutOfRegime { product: f64 },
    #[error("invalid cycle data: {0}")]
    InvalidData(String),
}

/// `x -> slope * x + intercept` on the central line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap1D {
    pub slope: f64,
    pub intercept: f64,
}

impl AffineMap1D {
    pub const IDENTITY: AffineMap1D = AffineMap1D { slope: 1.0, intercept: 0.0 };

    pub fn new(slope: f64, intercept: f64) -> Self {
        Self { slope, intercept }
    }

    pub fn linear(slope: f64) -> Self {
        Self { slope, intercept: 0.0 }
    }

    pub fn apply(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    /// Inverse map; `None` when the slope is zero.
    pub fn inverse(&self) -> Option<AffineMap1D> {
        if self.slope == 0.0 {
            return None;
        }
        Some(AffineMap1D { slope: 1.0 / self.slope, intercept: -self.intercept / self.slope })
    }
}

/// `f ∘ g`, i.e. `x -> f(g(x))`.
pub fn compose(f: AffineMap1D, g: AffineMap1D) -> AffineMap1D {
    AffineMap1D { slope: f.slope * g.slope, intercept: f.slope * g.intercept + f.intercept }
}

/// Composes a sequence listed in application order: `maps[0]` acts first.
pub fn compose_all<I: IntoIterator<Item = AffineMap1D>>(maps: I) -> AffineMap1D {
    maps.into_iter().fold(AffineMap1D::IDENTITY, |acc, m| compose(m, acc))
}

pub fn fixed_point(f: AffineMap1D) -> Result<f64, QuotientError> {
    if f.slope == 1.0 {
        return if f.intercept == 0.0 {
            Err(QuotientError::EveryPointFixed)
        } else {
            Err(QuotientError::NoFixedPoint { intercept: f.intercept })
        };
    }
    Ok(f.intercept / (1.0 - f.slope))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Preserving,
    Reversing,
}

impl Orientation {
    pub fn tau(self) -> f64 {
        match self {
            Orientation::Preserving => 1.0,
            Orientation::Reversing => -1.0,
        }
    }

    pub fn from_tau(tau: f64) -> Self {
        if tau < 0.0 {
            Orientation::Reversing
        } else {
            Orientation::Preserving
        }
    }
}

/// Central multipliers, orientation, periods and transition times of a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleCentralData {
    pub lambda: f64,
    pub beta: f64,
    pub tau: f64,
    pub pi_a: u32,
    pub pi_b: u32,
    pub t_ab: u32,
    pub t_ba: u32,
}

impl Default for CycleCentralData {
    fn default() -> Self {
        Self { lambda: 0.95, beta: 1.2, tau: 1.0, pi_a: 1, pi_b: 1, t_ab: 2, t_ba: 2 }
    }
}

impl CycleCentralData {
    pub fn new(lambda: f64, beta: f64, tau: f64) -> Self {
        Self { lambda, beta, tau, ..Self::default() }
    }

    pub fn validate(&self, section6_regime: bool) -> Result<(), QuotientError> {
        let bad = |msg: String| Err(QuotientError::InvalidData(msg));
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return bad(format!("lambda = {} must lie in (0, 1)", self.lambda));
        }
        if !(self.beta > 1.0) || !self.beta.is_finite() {
            return bad(format!("beta = {} must exceed 1", self.beta));
        }
        if self.tau != 1.0 && self.tau != -1.0 {
            return bad(format!("tau = {} must be +1 or -1", self.tau));
        }
        if self.pi_a == 0 || self.pi_b == 0 || self.t_ab == 0 || self.t_ba == 0 {
            return bad("periods and transition times must be positive".into());
        }
        if section6_regime && self.lambda <= 0.9 {
            return bad(format!("lambda = {} must lie in (0.9, 1) in the tower regime", self.lambda));
        }
        Ok(())
    }

    pub fn orientation(&self) -> Orientation {
        Orientation::from_tau(self.tau)
    }

    /// Central exponent of the A saddle, `ln(lambda) / pi_a`.
    pub fn chi_a(&self) -> f64 {
        self.lambda.ln() / f64::from(self.pi_a)
    }

    /// Central exponent of the B saddle, `ln(beta) / pi_b`.
    pub fn chi_b(&self) -> f64 {
        self.beta.ln() / f64::from(self.pi_b)
    }

    pub fn transition_time(&self) -> u64 {
        u64::from(self.t_ab) + u64::from(self.t_ba)
    }

    pub fn period_lm(&self, l: u64, m: u64) -> u64 {
        m * u64::from(self.pi_b) + l * u64::from(self.pi_a) + self.transition_time()
    }
}

/// `T_ba` on the central line: `x -> -x`.
pub fn t_ba_map() -> AffineMap1D {
    AffineMap1D::linear(-1.0)
}

/// `T_ab,nu` on the central line: `x -> tau * x + nu`.
pub fn t_ab_map(tau: f64, nu: f64) -> AffineMap1D {
    AffineMap1D::new(tau, nu)
}

fn powi(x: f64, n: u64) -> f64 {
    match i32::try_from(n) {
        Ok(k) => x.powi(k),
        Err(_) => x.powf(n as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuSolution {
    pub l: u64,
    pub m: u64,
    pub nu: f64,
    /// Low word of `nu`: `beta^-m` vanishes next to `lambda^l` in a single
    /// double once `beta^m lambda^l` is large.
    pub nu_lo: f64,
    pub multiplier: f64,
    pub period: u64,
}

impl NuSolution {
    pub fn nu_dd(&self) -> Dd {
        dd(self.nu) + dd(self.nu_lo)
    }

    /// `beta^m (-tau lambda^l + nu) - 1`, in double-double.
    pub fn residual(&self, data: &CycleCentralData) -> f64 {
        let beta_m = powu(dd(data.beta), self.m);
        let lam_l = powu(dd(data.lambda), self.l);
        to_f64(beta_m * (self.nu_dd() - lam_l * data.tau) - dd(1.0))
    }

    /// Fixed point of the return map, in double-double.
    ///
    /// The map is `x -> -tau beta^m lambda^l x + beta^m nu`.
    pub fn fixed_point(&self, data: &CycleCentralData) -> Result<f64, QuotientError> {
        let beta_m = powu(dd(data.beta), self.m);
        let slope = -(beta_m * powu(dd(data.lambda), self.l) * data.tau);
        let intercept = beta_m * self.nu_dd();
        if slope == dd(1.0) {
            return if intercept == dd(0.0) {
                Err(QuotientError::EveryPointFixed)
            } else {
                Err(QuotientError::NoFixedPoint { intercept: to_f64(intercept) })
            };
        }
        Ok(to_f64(div(intercept, dd(1.0) - slope)))
    }
}

/// Return map of the word `T_ba, a^l, T_ab(nu), b^m`, started at the B exit.
pub fn return_map(data: &CycleCentralData, nu: f64, l: u64, m: u64) -> AffineMap1D {
    compose_all([
        t_ba_map(),
        AffineMap1D::linear(powi(data.lambda, l)),
        t_ab_map(data.tau, nu),
        AffineMap1D::linear(powi(data.beta, m)),
    ])
}

/// The translation `nu` that makes central coordinate 1 a fixed point of the
/// return map.
pub fn nu_for_fixed_point(data: &CycleCentralData, l: u64, m: u64) -> NuSolution {
    let exact = div(dd(1.0), powu(dd(data.beta), m)) + powu(dd(data.lambda), l) * data.tau;
    let nu = exact.hi();
    let multiplier = return_map(data, nu, l, m).slope;
    NuSolution { l, m, nu, nu_lo: exact.lo(), multiplier, period: data.period_lm(l, m) }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorbdSolution {
    pub k: u64,
    pub p: u64,
    pub q: u64,
    pub beta_bar: f64,
    pub xi_offset: f64,
    pub nu_k: f64,
    pub orientation: Orientation,
    pub residual_1: f64,
    pub residual_2: f64,
}

impl CorbdSolution {
    /// `(l, m)` of the saddle whose multiplier matches the closed form.
    pub fn closed_form_pair(&self) -> (u64, u64) {
        match self.orientation {
            Orientation::Preserving => (self.k, self.p),
            Orientation::Reversing => (self.k - 2, self.q),
        }
    }

    /// `|beta_bar^m lambda^l|` for the pair returned by [`Self::closed_form_pair`].
    pub fn multiplier(&self, lambda: f64) -> f64 {
        let (l, m) = self.closed_form_pair();
        (powi(self.beta_bar, m) * powi(lambda, l)).abs()
    }
}

pub const CORBD_BRACKET_LOW: f64 = 1.0 + 1e-9;
pub const CORBD_BRACKET_HIGH: f64 = 64.0;
const CORBD_TOL: f64 = 1e-13;

/// Solves for `beta_bar` so that both saddles of the two-saddle lemma close
/// at central coordinate 1 with a common translation `nu_k`.
///
/// Preserving: `beta_bar^p (lambda^(k-2) - lambda^k + beta_bar^-q) = 1`.
/// Reversing: `beta_bar^q (lambda^(k-2) - lambda^k + beta_bar^-p) = 1`.
/// The residual dips below zero just above 1 and then grows; the root taken
/// is the largest one, the branch that tends to the `xi = 0` limit.
pub fn corbd_solve(
    lambda: f64,
    k: u64,
    p: u64,
    q: u64,
    orientation: Orientation,
) -> Result<CorbdSolution, QuotientError> {
    if k < 4 || k % 2 == 1 {
        return Err(QuotientError::InvalidData(format!("k = {k} must be even and at least 4")));
    }
    if p == 0 || q == 0 {
        return Err(QuotientError::InvalidData("p and q must be positive".into()));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(QuotientError::InvalidData(format!("lambda = {lambda} must lie in (0, 1)")));
    }
    let gap = powi(lambda, k - 2) - powi(lambda, k);
    if gap < 1e-300 || gap < f64::EPSILON * powi(lambda, k - 2) {
        return Err(QuotientError::Degenerate { gap });
    }
    let (outer, inner) = match orientation {
        Orientation::Preserving => (p, q),
        Orientation::Reversing => (q, p),
    };
    let residual = |b: f64| powi(b, outer) * (gap + powi(b, inner).recip()) - 1.0;

    // Scan downward from the top of the bracket for the last sign change.
    let samples = 4096;
    let log_lo = CORBD_BRACKET_LOW.ln();
    let log_hi = CORBD_BRACKET_HIGH.ln();
    let at = |i: usize| (log_lo + (log_hi - log_lo) * i as f64 / samples as f64).exp();
    let mut hi = CORBD_BRACKET_HIGH;
    let mut f_hi = residual(hi);
    if !(f_hi > 0.0) {
        return Err(QuotientError::NoRoot { beta_max: CORBD_BRACKET_HIGH });
    }
    let mut lo = None;
    for i in (0..samples).rev() {
        let b = at(i);
        let f = residual(b);
        if f <= 0.0 {
            lo = Some(b);
            break;
        }
        hi = b;
        f_hi = f;
    }
    let Some(mut lo) = lo else {
        return Err(QuotientError::NoRoot { beta_max: CORBD_BRACKET_HIGH });
    };
    let mut f_lo = residual(lo);

    let mut root = hi;
    for _ in 0..200 {
        // Secant proposal, falling back to bisection outside the bracket.
        let secant = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        let mid = 0.5 * (lo + hi);
        let cand = if secant > lo && secant < hi { secant } else { mid };
        let f = residual(cand);
        root = cand;
        if f.abs() < CORBD_TOL {
            break;
        }
        if f > 0.0 {
            hi = cand;
            f_hi = f;
        } else {
            lo = cand;
            f_lo = f;
        }
        let bisect = 0.5 * (lo + hi);
        let fb = residual(bisect);
        root = bisect;
        if fb.abs() < CORBD_TOL || hi - lo <= f64::EPSILON * hi {
            break;
        }
        if fb > 0.0 {
            hi = bisect;
            f_hi = fb;
        } else {
            lo = bisect;
            f_lo = fb;
        }
    }

    let beta_bar = root;
    let xi_offset = powi(beta_bar, inner).recip();
    let nu_k = match orientation {
        Orientation::Preserving => powi(lambda, k - 2) + xi_offset,
        Orientation::Reversing => -powi(lambda, k) + xi_offset,
    };
    let tau = orientation.tau();
    let close = |l: u64, m: u64| {
        compose_all([
            t_ba_map(),
            AffineMap1D::linear(powi(lambda, l)),
            t_ab_map(tau, nu_k),
            AffineMap1D::linear(powi(beta_bar, m)),
        ])
        .apply(1.0)
    };
    let residual_1 = (close(k - 2, q) - 1.0).abs();
    let residual_2 = (close(k, p) - 1.0).abs();
    Ok(CorbdSolution { k, p, q, beta_bar, xi_offset, nu_k, orientation, residual_1, residual_2 })
}

pub fn multiplier_closed_form(
    lambda: f64,
    beta_bar: f64,
    xi_offset: f64,
    m: u64,
    orientation: Orientation,
) -> Result<f64, QuotientError> {
    let product = powi(beta_bar, m) * xi_offset;
    if product >= 1.0 {
        return Err(QuotientError::OutOfRegime { product });
    }
    let l2 = lambda * lambda;
    Ok(match orientation {
        Orientation::Preserving => (1.0 - product) * l2 / (1.0 - l2),
        Orientation::Reversing => (1.0 - product) / (1.0 - l2),
    })
}

/// `2 max(V, 1/V)` with `V` the `xi = 0` closed-form multiplier.
pub fn theta_bound(data: &CycleCentralData, orientation: Orientation) -> f64 {
    let v = multiplier_closed_form(data.lambda, 1.0, 0.0, 0, orientation)
        .expect("xi = 0 is always in regime");
    2.0 * v.max(v.recip())
}

/// Per-step factor that turns a multiplier of the given period into `(1+eps)^period`.
pub fn franks_rescale_factor(multiplier: f64, period: u64, eps: f64) -> f64 {
    (1.0 + eps) * multiplier.abs().powf(-1.0 / period as f64)
}

/// Translation `t_k` aligning `lambda^k zeta + k lambda^(k-1) t` with `-lambda^(k+1)`.
pub fn biaccumulation_alignment(lambda: f64, zeta_c: f64, k: u64) -> f64 {
    (-lambda * zeta_c - lambda * lambda) / k as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub context: BTreeMap<String, f64>,
}

impl InequalityReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, context: &[(&str, f64)]) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            holds: lhs < rhs,
            context: context.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Scalar inequalities for a candidate child `[parent]^m, T_ba, a^l, T_ab`.
///
/// `parent_period` and `chi_parent` describe the orbit being shadowed
/// (`pi_b` and `ln(beta)/pi_b` for the B saddle); `t` is the total transition
/// time. Reports, in order: `C_bound`, `chi_positive`, `chi_halving`,
/// `fraction`, `l_bound`.
pub fn section6_checks(
    data: &CycleCentralData,
    c: f64,
    chi_parent: f64,
    parent_period: u64,
    l: u64,
    m: u64,
    t: u64,
) -> Vec<InequalityReport> {
    let chi_a = data.chi_a();
    let log_sigma_parent = chi_parent * parent_period as f64;
    let shadow = m as f64 * parent_period as f64;
    let period = shadow + (l * u64::from(data.pi_a) + t) as f64;
    let chi = (m as f64 * log_sigma_parent + l as f64 * data.lambda.ln()) / period;
    let fraction = shadow / period;
    let ctx = [
        ("lambda", data.lambda),
        ("C", c),
        ("chi_parent", chi_parent),
        ("parent_period", parent_period as f64),
        ("l", l as f64),
        ("m", m as f64),
        ("t", t as f64),
    ];
    // Transition central derivatives are isometries, so T = 1.
    let transition_constant: f64 = 1.0;
    let log_sqrt_lambda = 0.5 * data.lambda.ln();
    let l_bound = -transition_constant.ln() / log_sqrt_lambda
        - m as f64 * (log_sigma_parent * 2.0) / log_sqrt_lambda;
    vec![
        InequalityReport::new("C_bound", 16.0 / chi_a.abs(), c, &ctx),
        InequalityReport::new("chi_positive", 0.0, chi, &ctx),
        InequalityReport::new("chi_halving", chi, 0.5 * chi_parent, &ctx),
        InequalityReport::new("fraction", 1.0 - c * chi_parent, fraction, &ctx),
        InequalityReport::new("l_bound", l as f64, l_bound, &ctx),
    ]
}
