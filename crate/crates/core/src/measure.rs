//! Uniform measures on periodic orbits and the ergodicity check on towers.
//!
//! Test functions depend on the chart class and the central coordinate only.
//! Within a chart the ambient distance is `coord_scale * |difference|`, and
//! points in different charts are `chart_separation` apart, so a function
//! with in-chart slope `k` and global oscillation `w` is Lipschitz with
//! constant `max(k / coord_scale, w / chart_separation)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dd::{dd, to_f64, Dd};
use crate::model::{CentralPoint, ChartId, CycleSystem, PeriodicOrbit};
use crate::tower::{kappa_product, r_sequence, Tower, TowerError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error(
        "no admissible N for {phi} at eps = {eps}: the tower has {top} levels, about {required_depth} are needed"
    )]
    NoSuchN { phi: String, eps: f64, top: usize, required_depth: usize },
    #[error("eps = {0} must be positive")]
    BadEps(f64),
    #[error(transparent)]
    Tower(#[from] TowerError),
}

/// Uniform probability measure on a periodic orbit.
#[derive(Debug, Clone)]
pub struct PeriodicMeasure {
    pub orbit: Arc<PeriodicOrbit>,
}

impl PeriodicMeasure {
    pub fn new(orbit: Arc<PeriodicOrbit>) -> Self {
        Self { orbit }
    }

    pub fn atom_mass(&self) -> f64 {
        1.0 / self.orbit.period as f64
    }
}

/// The four kinds of chart; a test function is one polynomial per kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChartClass {
    A,
    B,
    Ab,
    Ba,
}

impl ChartClass {
    pub const ALL: [ChartClass; 4] = [ChartClass::A, ChartClass::B, ChartClass::Ab, ChartClass::Ba];

    pub fn of(chart: ChartId) -> Self {
        match chart {
            ChartId::A(_) => ChartClass::A,
            ChartId::B(_) => ChartClass::B,
            ChartId::Ab(_) => ChartClass::Ab,
            ChartId::Ba(_) => ChartClass::Ba,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// `phi(p) = P_class(clamp(x_c, -R, R))` with one polynomial per chart class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub id: String,
    /// Coefficients in increasing degree, indexed by [`ChartClass`].
    pub coeffs: [Vec<f64>; 4],
    pub clamp: f64,
    /// Lipschitz constant in the ambient metric.
    pub lipschitz: f64,
    /// Upper bound for `sup phi - inf phi`.
    pub oscillation: f64,
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

impl TestFunction {
    /// Builds the function and derives its Lipschitz constant and
    /// oscillation bound for `sys`.
    pub fn new(sys: &CycleSystem, id: impl Into<String>, coeffs: [Vec<f64>; 4], clamp: f64) -> Self {
        let r = clamp;
        let mut slope = 0.0_f64;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for c in &coeffs {
            let c0 = c.first().copied().unwrap_or(0.0);
            let spread: f64 = c.iter().enumerate().skip(1).map(|(k, a)| a.abs() * r.powi(k as i32)).sum();
            let deriv: f64 =
                c.iter().enumerate().skip(1).map(|(k, a)| k as f64 * a.abs() * r.powi(k as i32 - 1)).sum();
            slope = slope.max(deriv);
            lo = lo.min(c0 - spread);
            hi = hi.max(c0 + spread);
        }
        let oscillation = hi - lo;
        let lipschitz = (slope / sys.coord_scale()).max(oscillation / sys.spec().chart_separation);
        Self { id: id.into(), coeffs, clamp, lipschitz, oscillation }
    }

    /// A function that is constant on each chart class.
    pub fn chart_constant(sys: &CycleSystem, id: impl Into<String>, values: [f64; 4]) -> Self {
        Self::new(sys, id, values.map(|v| vec![v]), 1.0)
    }

    pub fn eval(&self, chart: ChartId, x_c: f64) -> f64 {
        let x = x_c.clamp(-self.clamp, self.clamp);
        poly(&self.coeffs[ChartClass::of(chart).index()], x)
    }

    pub fn eval_central(&self, p: &CentralPoint) -> f64 {
        self.eval(p.chart, to_f64(p.x))
    }
}

/// Constant 1, central coordinate, A-phase and B-phase indicators and the
/// central log-derivative.
pub fn default_dictionary(sys: &CycleSystem) -> Vec<TestFunction> {
    let one = [1.0; 4];
    let log_a = sys.central_log_derivative(ChartId::A(0));
    let log_b = sys.central_log_derivative(ChartId::B(0));
    let log_ab = sys.central_log_derivative(ChartId::Ab(0));
    let log_ba = sys.central_log_derivative(ChartId::Ba(0));
    vec![
        TestFunction::chart_constant(sys, "one", one),
        TestFunction::new(sys, "central", [0, 1, 2, 3].map(|_| vec![0.0, 1.0]), 2.0),
        TestFunction::chart_constant(sys, "a_phase", [1.0, 0.0, 0.0, 0.0]),
        TestFunction::chart_constant(sys, "b_phase", [0.0, 1.0, 0.0, 0.0]),
        TestFunction::chart_constant(sys, "central_log_derivative", [log_a, log_b, log_ab, log_ba]),
    ]
}

/// `phi` along one period of `orbit`, from its base.
pub fn phi_stream(sys: &CycleSystem, orbit: &PeriodicOrbit, phi: &TestFunction) -> Vec<f64> {
    orbit.central_points(sys).map(|p| phi.eval_central(&p)).collect()
}

pub fn integrate(sys: &CycleSystem, mu: &PeriodicMeasure, phi: &TestFunction) -> f64 {
    let total = mu.orbit.central_points(sys).fold(dd(0.0), |acc, p| acc + phi.eval_central(&p));
    to_f64(total) / mu.orbit.period as f64
}

/// Average of `phi` over the `n` points of `orbit` starting at index `from`.
pub fn n_measure_integral(
    sys: &CycleSystem,
    orbit: &PeriodicOrbit,
    from: u64,
    n: u64,
    phi: &TestFunction,
) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let values = phi_stream(sys, orbit, phi);
    let len = values.len();
    let total = (0..n as usize).fold(dd(0.0), |acc, k| acc + values[(from as usize + k) % len]);
    to_f64(total) / n as f64
}

/// `sup_{dist(x, y) < delta} |phi(x) - phi(y)|`, bounded by the Lipschitz
/// constant and capped at the oscillation.
pub fn modulus_of_continuity(phi: &TestFunction, delta: f64) -> f64 {
    if delta <= 0.0 {
        return 0.0;
    }
    (phi.lipschitz * delta).min(phi.oscillation)
}

/// The largest `delta` with `modulus_of_continuity(phi, delta) < eps`.
pub fn delta_for(phi: &TestFunction, eps: f64) -> f64 {
    if eps > phi.oscillation {
        f64::INFINITY
    } else {
        eps / phi.lipschitz
    }
}

pub fn central_exponent_of_measure(sys: &CycleSystem, mu: &PeriodicMeasure) -> f64 {
    let total = mu
        .orbit
        .central_points(sys)
        .fold(dd(0.0), |acc, p| acc + sys.central_log_derivative(p.chart));
    to_f64(total) / mu.orbit.period as f64
}

/// Largest difference of integrals over the dictionary.
pub fn weak_star_gap(
    sys: &CycleSystem,
    a: &PeriodicMeasure,
    b: &PeriodicMeasure,
    dictionary: &[TestFunction],
) -> f64 {
    dictionary
        .iter()
        .map(|phi| (integrate(sys, a, phi) - integrate(sys, b, phi)).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentTrace {
    /// `(n, chi(mu_n))` for the levels above the saddle.
    pub pairs: Vec<(usize, f64)>,
    /// Aitken extrapolation of the last three values.
    pub extrapolated_limit: Option<f64>,
    /// Largest ratio `chi_{n+1} / chi_n`.
    pub decay_ratio: f64,
}

pub fn exponent_trace(tower: &Tower) -> ExponentTrace {
    let sys = tower.system();
    let pairs: Vec<(usize, f64)> = tower.levels()[1..]
        .iter()
        .map(|lv| (lv.n, central_exponent_of_measure(sys, &PeriodicMeasure::new(Arc::clone(&lv.orbit)))))
        .collect();
    let values: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let decay_ratio = values.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    let extrapolated_limit = match values.as_slice() {
        [.., x0, x1, x2] => {
            let denom = x2 - 2.0 * x1 + x0;
            if denom != 0.0 {
                x2 - (x2 - x1) * (x2 - x1) / denom
            } else {
                *x2
            }
        }
        [.., last] => *last,
        [] => f64::NAN,
    };
    let extrapolated_limit = extrapolated_limit.is_finite().then_some(extrapolated_limit);
    ExponentTrace { pairs, extrapolated_limit, decay_ratio }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NChoice {
    pub n: usize,
    pub delta: f64,
    pub r_n: f64,
    pub kappa_product: f64,
    /// `delta - r_N`.
    pub r_margin: f64,
    /// `kappa_product - (1 - eps)`.
    pub kappa_margin: f64,
}

/// Smallest `N < top` with `r_N < delta(eps, phi)` and
/// `prod_{k >= N} kappa_k > 1 - eps`.
pub fn choose_n(tower: &Tower, phi: &TestFunction, eps: f64) -> Result<NChoice, MeasureError> {
    if !(eps > 0.0) {
        return Err(MeasureError::BadEps(eps));
    }
    let delta = delta_for(phi, eps);
    let rs = r_sequence(tower)?;
    let top = tower.top();
    for n in 1..top {
        let r_n = rs[n - 1].r;
        let kp = kappa_product(tower, n)?.total;
        if r_n < delta && kp > 1.0 - eps {
            return Ok(NChoice {
                n,
                delta,
                r_n,
                kappa_product: kp,
                r_margin: delta - r_n,
                kappa_margin: kp - (1.0 - eps),
            });
        }
    }
    Err(MeasureError::NoSuchN {
        phi: phi.id.clone(),
        eps,
        top,
        required_depth: depth_estimate(tower, delta, eps),
    })
}

/// Depth at which the geometric majorants of `r_N` and the kappa tail would
/// both clear, counting one more level for the pair above `N`.
fn depth_estimate(tower: &Tower, delta: f64, eps: f64) -> usize {
    let cfg = tower.config();
    let top = tower.top();
    let ceiling = tower.gamma_ceiling(top.max(1));
    let chi = tower.level(top).chi;
    let mut depth = top;
    loop {
        let k = depth - top;
        let r = 2.0 * ceiling / 2f64.powi(k as i32);
        let mut log_tail = 0.0;
        let mut x = cfg.c * chi * cfg.halving_ratio.powi(k as i32);
        while x > 1e-18 {
            log_tail += (-x.min(1.0 - 1e-300)).ln_1p();
            x *= cfg.halving_ratio;
        }
        if (r < delta && log_tail.exp() > 1.0 - eps) || depth > top + 4096 {
            return depth + 1;
        }
        depth += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub n: usize,
    pub m: usize,
    /// Largest `|nu_{pi_n}(x)(phi) - mu_n(phi)|` over the tested points.
    pub max_deviation: f64,
    pub tested_points: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityCheckReport {
    pub phi: String,
    pub eps: f64,
    pub n: usize,
    /// `None` when every `delta` works, i.e. `eps` exceeds the oscillation.
    pub delta: Option<f64>,
    pub pairs: Vec<PairCheck>,
    /// `(m, mu_m(tilde X_m))` for `N < m <= top`.
    pub good_fraction: Vec<(usize, f64)>,
    pub passed: bool,
}

/// Points of `X_m` whose projections down to `X_n` are all defined.
pub fn projectable_points(tower: &Tower, m: usize, n: usize) -> Result<Vec<bool>, TowerError> {
    let period = tower.level(m).period();
    let mut keep = Vec::with_capacity(period as usize);
    let mut links = Vec::new();
    for k in (n..m).rev() {
        let link = tower
            .level(k)
            .link
            .as_ref()
            .ok_or_else(|| TowerError::BadLevel(format!("level {k} has no certificate")))?;
        let mut kept = vec![false; link.certificate.total_blocks as usize];
        for &b in &link.certificate.blocks {
            kept[b as usize] = true;
        }
        links.push((tower.level(k + 1).period(), tower.level(k).period(), link.certificate.span.start, kept));
    }
    for i in 0..period {
        let mut j = i;
        let mut ok = true;
        for (child_period, parent_period, start, kept) in &links {
            let rel = (j + child_period - start % child_period) % child_period;
            let b = (rel / parent_period) as usize;
            if b >= kept.len() || !kept[b] {
                ok = false;
                break;
            }
            j = rel % parent_period;
        }
        keep.push(ok);
    }
    Ok(keep)
}

/// Checks both conditions of the ergodicity criterion for `phi` at `eps`
/// over every pair `N <= n < m <= top`, at every point of `tilde X_m`.
pub fn check_ergodicity_criterion(
    tower: &Tower,
    phi: &TestFunction,
    eps: f64,
) -> Result<ErgodicityCheckReport, MeasureError> {
    let choice = choose_n(tower, phi, eps)?;
    let sys = tower.system();
    let top = tower.top();
    let big_n = choice.n;
    let means: Vec<f64> = tower
        .levels()
        .iter()
        .map(|lv| integrate(sys, &PeriodicMeasure::new(Arc::clone(&lv.orbit)), phi))
        .collect();
    let mut pairs = Vec::new();
    let mut good_fraction = Vec::new();
    let mut passed = true;
    for m in big_n + 1..=top {
        let orbit = &tower.level(m).orbit;
        let keep = projectable_points(tower, m, big_n)?;
        let tested = keep.iter().filter(|&&k| k).count() as u64;
        let fraction = tested as f64 / orbit.period as f64;
        passed &= fraction > 1.0 - eps;
        good_fraction.push((m, fraction));
        let values = phi_stream(sys, orbit, phi);
        let len = values.len();
        let mut prefix: Vec<Dd> = Vec::with_capacity(2 * len + 1);
        prefix.push(dd(0.0));
        for k in 0..2 * len {
            let last = prefix[k];
            prefix.push(last + values[k % len]);
        }
        for n in big_n..m {
            let window = tower.level(n).period() as usize;
            let mut worst = 0.0_f64;
            for (i, _) in keep.iter().enumerate().filter(|(_, &k)| k) {
                let avg = to_f64(prefix[i + window] - prefix[i]) / window as f64;
                worst = worst.max((avg - means[n]).abs());
            }
            passed &= worst < eps;
            pairs.push(PairCheck { n, m, max_deviation: worst, tested_points: tested });
        }
    }
    Ok(ErgodicityCheckReport {
        phi: phi.id.clone(),
        eps,
        n: big_n,
        delta: choice.delta.is_finite().then_some(choice.delta),
        pairs,
        good_fraction,
        passed,
    })
}
