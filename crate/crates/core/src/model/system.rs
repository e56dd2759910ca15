use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::dd::{dd, to_f64, Dd};
use crate::quotient::{AffineMap1D, CycleCentralData};

/// Strong-coordinate offsets added on the first step of each transition.
/// Empty vectors mean zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrongOffsets {
    pub ab_s: Vec<f64>,
    pub ab_u: Vec<f64>,
    pub ba_s: Vec<f64>,
    pub ba_u: Vec<f64>,
}

impl StrongOffsets {
    pub fn is_zero(&self) -> bool {
        [&self.ab_s, &self.ab_u, &self.ba_s, &self.ba_u]
            .iter()
            .all(|v| v.iter().all(|x| *x == 0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSpec {
    pub central: CycleCentralData,
    pub s_dim: usize,
    pub u_dim: usize,
    pub rho_s: f64,
    pub rho_u: f64,
    pub chart_radius: f64,
    pub chart_separation: f64,
    pub strong_offsets: StrongOffsets,
    /// Restricts `lambda` to (0.9, 1).
    pub section6_regime: bool,
}

impl Default for CycleSpec {
    fn default() -> Self {
        Self::from_central(CycleCentralData::default())
    }
}

impl CycleSpec {
    /// Default geometry around the given central data: one strong direction
    /// of each kind, `rho_s = lambda/2`, `rho_u = 2 beta`.
    pub fn from_central(central: CycleCentralData) -> Self {
        Self {
            central,
            s_dim: 1,
            u_dim: 1,
            rho_s: 0.5 * central.lambda,
            rho_u: 2.0 * central.beta,
            chart_radius: 1e-3,
            chart_separation: 1.0,
            strong_offsets: StrongOffsets::default(),
            section6_regime: central.lambda > 0.9,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: String| Err(ModelError::SpecViolation(msg));
        if let Err(e) = self.central.validate(self.section6_regime) {
            return fail(e.to_string());
        }
        if !(self.rho_s > 0.0 && self.rho_s < 1.0) {
            return fail(format!("rho_s = {} must lie in (0, 1)", self.rho_s));
        }
        if !(self.rho_u > 1.0) || !self.rho_u.is_finite() {
            return fail(format!("rho_u = {} must exceed 1", self.rho_u));
        }
        let step_a = self.central.lambda.powf(1.0 / f64::from(self.central.pi_a));
        let step_b = self.central.beta.powf(1.0 / f64::from(self.central.pi_b));
        if !(self.rho_s < step_a) {
            return fail(format!(
                "domination: rho_s = {} must be below lambda^(1/pi_a) = {step_a}",
                self.rho_s
            ));
        }
        if !(step_b < self.rho_u) {
            return fail(format!(
                "domination: rho_u = {} must exceed beta^(1/pi_b) = {step_b}",
                self.rho_u
            ));
        }
        if !(self.chart_radius > 0.0) || !self.chart_radius.is_finite() {
            return fail(format!("chart_radius = {} must be positive", self.chart_radius));
        }
        if !(self.chart_separation > 2.0 * self.chart_radius) {
            return fail(format!(
                "chart_separation = {} must exceed 2 * chart_radius = {}",
                self.chart_separation,
                2.0 * self.chart_radius
            ));
        }
        let o = &self.strong_offsets;
        for (name, v, dim) in [
            ("ab_s", &o.ab_s, self.s_dim),
            ("ab_u", &o.ab_u, self.u_dim),
            ("ba_s", &o.ba_s, self.s_dim),
            ("ba_u", &o.ba_u, self.u_dim),
        ] {
            if !v.is_empty() && v.len() != dim {
                return fail(format!("strong offset {name} has length {}, expected {dim}", v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return fail(format!("strong offset {name} is not finite"));
            }
        }
        Ok(())
    }
}

/// One chart component: a phase of A or B, or one step of a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChartId {
    A(u32),
    B(u32),
    Ab(u32),
    Ba(u32),
}

impl fmt::Display for ChartId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChartId::A(j) => write!(f, "A{j}"),
            ChartId::B(j) => write!(f, "B{j}"),
            ChartId::Ab(j) => write!(f, "ab{j}"),
            ChartId::Ba(j) => write!(f, "ba{j}"),
        }
    }
}

impl ChartId {
    pub fn is_a_phase(self) -> bool {
        matches!(self, ChartId::A(_))
    }

    pub fn is_b_phase(self) -> bool {
        matches!(self, ChartId::B(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmbientPoint {
    pub chart: ChartId,
    pub x_s: Vec<f64>,
    pub x_c: Dd,
    pub x_u: Vec<f64>,
}

impl AmbientPoint {
    pub fn new(chart: ChartId, x_s: Vec<f64>, x_c: f64, x_u: Vec<f64>) -> Self {
        Self { chart, x_s, x_c: dd(x_c), x_u }
    }

    pub fn central(&self) -> f64 {
        to_f64(self.x_c)
    }

    /// Largest coordinate difference, charts ignored.
    pub fn max_coord_diff(&self, other: &AmbientPoint) -> f64 {
        let c = to_f64(self.x_c - other.x_c).abs();
        let s = self.x_s.iter().zip(&other.x_s).map(|(a, b)| (a - b).abs());
        let u = self.x_u.iter().zip(&other.x_u).map(|(a, b)| (a - b).abs());
        s.chain(u).fold(c, f64::max)
    }
}

/// The affine action of one step between two charts.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchMap {
    pub source: ChartId,
    pub target: ChartId,
    pub rho_s: f64,
    pub offset_s: Vec<f64>,
    pub central: AffineMap1D,
    /// Exact translation; `central.intercept` is its rounded value.
    pub central_intercept: Dd,
    pub rho_u: f64,
    pub offset_u: Vec<f64>,
    pub central_log_derivative: f64,
}

impl BranchMap {
    pub fn apply(&self, p: &AmbientPoint) -> AmbientPoint {
        let strong = |x: &[f64], rho: f64, off: &[f64]| -> Vec<f64> {
            x.iter()
                .enumerate()
                .map(|(i, v)| rho * v + off.get(i).copied().unwrap_or(0.0))
                .collect()
        };
        AmbientPoint {
            chart: self.target,
            x_s: strong(&p.x_s, self.rho_s, &self.offset_s),
            x_c: p.x_c * self.central.slope + self.central_intercept,
            x_u: strong(&p.x_u, self.rho_u, &self.offset_u),
        }
    }
}

/// A validated model: chart layout, per-step slopes and the metric.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleSystem {
    spec: CycleSpec,
    charts: Vec<ChartId>,
    slope_a: f64,
    slope_b: f64,
    sqrt_dim: f64,
}

pub fn build_model(spec: CycleSpec) -> Result<CycleSystem, ModelError> {
    spec.validate()?;
    let c = &spec.central;
    let mut charts = Vec::new();
    charts.extend((0..c.pi_a).map(ChartId::A));
    charts.extend((0..c.pi_b).map(ChartId::B));
    charts.extend((0..c.t_ab).map(ChartId::Ab));
    charts.extend((0..c.t_ba).map(ChartId::Ba));
    let slope_a = c.lambda.powf(1.0 / f64::from(c.pi_a));
    let slope_b = c.beta.powf(1.0 / f64::from(c.pi_b));
    let sqrt_dim = ((spec.s_dim + 1 + spec.u_dim) as f64).sqrt();
    Ok(CycleSystem { spec, charts, slope_a, slope_b, sqrt_dim })
}

impl CycleSystem {
    pub fn spec(&self) -> &CycleSpec {
        &self.spec
    }

    pub fn central_data(&self) -> &CycleCentralData {
        &self.spec.central
    }

    pub fn charts(&self) -> &[ChartId] {
        &self.charts
    }

    /// Dense index of a chart in [`Self::charts`].
    pub fn chart_index(&self, chart: ChartId) -> usize {
        let c = &self.spec.central;
        match chart {
            ChartId::A(j) => j as usize,
            ChartId::B(j) => (c.pi_a + j) as usize,
            ChartId::Ab(j) => (c.pi_a + c.pi_b + j) as usize,
            ChartId::Ba(j) => (c.pi_a + c.pi_b + c.t_ab + j) as usize,
        }
    }

    pub fn contains_chart(&self, chart: ChartId) -> bool {
        let c = &self.spec.central;
        match chart {
            ChartId::A(j) => j < c.pi_a,
            ChartId::B(j) => j < c.pi_b,
            ChartId::Ab(j) => j < c.t_ab,
            ChartId::Ba(j) => j < c.t_ba,
        }
    }

    pub fn slope_a(&self) -> f64 {
        self.slope_a
    }

    pub fn slope_b(&self) -> f64 {
        self.slope_b
    }

    /// Central slope of the step leaving `chart`, with `T_ab` given orientation `tau`.
    pub fn central_slope(&self, chart: ChartId) -> f64 {
        match chart {
            ChartId::A(_) => self.slope_a,
            ChartId::B(_) => self.slope_b,
            ChartId::Ab(0) => self.spec.central.tau,
            ChartId::Ba(0) => -1.0,
            ChartId::Ab(_) | ChartId::Ba(_) => 1.0,
        }
    }

    pub fn central_log_derivative(&self, chart: ChartId) -> f64 {
        self.central_slope(chart).abs().ln()
    }

    /// Charts reachable in one step from `source`.
    pub fn successors(&self, source: ChartId) -> Vec<ChartId> {
        let c = &self.spec.central;
        match source {
            ChartId::A(j) if j + 1 < c.pi_a => vec![ChartId::A(j + 1)],
            ChartId::A(_) => vec![ChartId::A(0), ChartId::Ab(0)],
            ChartId::B(j) if j + 1 < c.pi_b => vec![ChartId::B(j + 1)],
            ChartId::B(_) => vec![ChartId::B(0), ChartId::Ba(0)],
            ChartId::Ab(j) if j + 1 < c.t_ab => vec![ChartId::Ab(j + 1)],
            ChartId::Ab(_) => vec![ChartId::B(0), ChartId::Ba(0)],
            ChartId::Ba(j) if j + 1 < c.t_ba => vec![ChartId::Ba(j + 1)],
            ChartId::Ba(_) => vec![ChartId::A(0), ChartId::Ab(0)],
        }
    }

    /// Offsets added to the strong coordinates when leaving `source`.
    pub fn strong_offsets(&self, source: ChartId) -> (&[f64], &[f64]) {
        let o = &self.spec.strong_offsets;
        match source {
            ChartId::Ab(0) => (&o.ab_s, &o.ab_u),
            ChartId::Ba(0) => (&o.ba_s, &o.ba_u),
            _ => (&[], &[]),
        }
    }

    /// The branch from `source` to `target`; `nu` is used only on the
    /// first step of the a-to-b transition.
    pub fn branch(&self, source: ChartId, target: ChartId, nu: Dd) -> Result<BranchMap, ModelError> {
        if !self.contains_chart(source) || !self.successors(source).contains(&target) {
            return Err(ModelError::NoBranch { from: source, to: target });
        }
        let slope = self.central_slope(source);
        let intercept = if source == ChartId::Ab(0) { nu } else { dd(0.0) };
        let (offset_s, offset_u) = self.strong_offsets(source);
        Ok(BranchMap {
            source,
            target,
            rho_s: self.spec.rho_s,
            offset_s: offset_s.to_vec(),
            central: AffineMap1D::new(slope, to_f64(intercept)),
            central_intercept: intercept,
            rho_u: self.spec.rho_u,
            offset_u: offset_u.to_vec(),
            central_log_derivative: slope.abs().ln(),
        })
    }

    /// Applies the branch from `p`'s chart to `target`.
    pub fn step(&self, p: &AmbientPoint, target: ChartId, nu: Dd) -> Result<AmbientPoint, ModelError> {
        Ok(self.branch(p.chart, target, nu)?.apply(p))
    }

    pub fn origin(&self, chart: ChartId) -> AmbientPoint {
        AmbientPoint {
            chart,
            x_s: vec![0.0; self.spec.s_dim],
            x_c: dd(0.0),
            x_u: vec![0.0; self.spec.u_dim],
        }
    }

    /// Distance between two charts' components; a uniform table.
    pub fn chart_distance(&self, a: ChartId, b: ChartId) -> f64 {
        if a == b {
            0.0
        } else {
            self.spec.chart_separation
        }
    }

    /// Scale turning a normalized coordinate difference into ambient distance.
    pub fn coord_scale(&self) -> f64 {
        self.spec.chart_radius / self.sqrt_dim
    }

    pub fn distance(&self, p: &AmbientPoint, q: &AmbientPoint) -> f64 {
        if p.chart != q.chart {
            return self.chart_distance(p.chart, q.chart);
        }
        let dc = to_f64(p.x_c - q.x_c);
        let mut sq = dc * dc;
        for (a, b) in p.x_s.iter().zip(&q.x_s) {
            sq += (a - b) * (a - b);
        }
        for (a, b) in p.x_u.iter().zip(&q.x_u) {
            sq += (a - b) * (a - b);
        }
        self.coord_scale() * sq.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> CycleSpec {
        let mut spec = CycleSpec::from_central(CycleCentralData::new(0.5, 2.0, 1.0));
        spec.rho_s = 0.25;
        spec.rho_u = 4.0;
        spec
    }

    #[test]
    fn six_charts() {
        let sys = build_model(small_spec()).unwrap();
        assert_eq!(sys.charts().len(), 6);
        for (i, c) in sys.charts().iter().enumerate() {
            assert_eq!(sys.chart_index(*c), i);
        }
    }

    #[test]
    fn split_a_period() {
        let mut spec = small_spec();
        spec.central.pi_a = 2;
        let sys = build_model(spec).unwrap();
        assert!((sys.central_slope(ChartId::A(0)) - 0.5_f64.sqrt()).abs() < 1e-15);
        assert_eq!(sys.central_slope(ChartId::A(0)), sys.central_slope(ChartId::A(1)));
    }

    #[test]
    fn domination_is_enforced() {
        let spec = CycleSpec { rho_s: 0.96, ..CycleSpec::default() };
        assert!(matches!(build_model(spec), Err(ModelError::SpecViolation(m)) if m.contains("domination")));
    }

    #[test]
    fn step_examples() {
        let sys = build_model(small_spec()).unwrap();
        let b = sys.origin(ChartId::B(0));
        assert_eq!(sys.step(&b, ChartId::B(0), dd(0.0)).unwrap(), b);

        let a = AmbientPoint::new(ChartId::A(0), vec![0.0], -1.0, vec![0.0]);
        let next = sys.step(&a, ChartId::A(0), dd(0.0)).unwrap();
        assert_eq!(next.central(), -0.5);

        let exit = AmbientPoint::new(ChartId::Ba(0), vec![0.0], 1.0, vec![0.0]);
        let mid = sys.step(&exit, ChartId::Ba(1), dd(0.0)).unwrap();
        let entry = sys.step(&mid, ChartId::A(0), dd(0.0)).unwrap();
        assert_eq!(entry.chart, ChartId::A(0));
        assert_eq!(entry.central(), -1.0);

        assert!(matches!(
            sys.step(&a, ChartId::B(0), dd(0.0)),
            Err(ModelError::NoBranch { .. })
        ));
    }

    #[test]
    fn branch_bands() {
        let sys = build_model(CycleSpec::default()).unwrap();
        let c = sys.central_data();
        for chart in sys.charts() {
            let d = sys.central_slope(*chart).abs();
            match chart {
                ChartId::A(_) => {
                    let pa = f64::from(c.pi_a);
                    assert!(c.lambda.powf(2.0 / pa) <= d && d <= c.lambda.powf(0.5 / pa));
                }
                ChartId::B(_) => {
                    let pb = f64::from(c.pi_b);
                    assert!(c.beta.powf(0.5 / pb) <= d && d <= c.beta.powf(2.0 / pb));
                }
                _ => assert_eq!(d, 1.0),
            }
        }
    }

    #[test]
    fn metric_examples() {
        let sys = build_model(CycleSpec::default()).unwrap();
        let p = AmbientPoint::new(ChartId::A(0), vec![0.3], 0.2, vec![-0.1]);
        assert_eq!(sys.distance(&p, &p), 0.0);
        let lo = AmbientPoint::new(ChartId::A(0), vec![-1.0], -1.0, vec![-1.0]);
        let hi = AmbientPoint::new(ChartId::A(0), vec![1.0], 1.0, vec![1.0]);
        assert!(sys.distance(&lo, &hi) <= 2.0 * sys.spec().chart_radius * (1.0 + 1e-15));
        let q = AmbientPoint::new(ChartId::B(0), vec![0.3], 0.2, vec![-0.1]);
        assert_eq!(sys.distance(&p, &q), 1.0);
    }
}
