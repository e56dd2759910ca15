use std::collections::VecDeque;
use std::sync::Arc;

use super::system::{AmbientPoint, ChartId, CycleSystem};
use super::word::{ItineraryWord, Moves, Token};
use super::ModelError;
use crate::dd::{dd, div, powu, to_f64, Dd};
use crate::quotient::AffineMap1D;

/// A periodic orbit given by its itinerary and the fixed point of the
/// composed return map.
#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub word: ItineraryWord,
    pub base: AmbientPoint,
    pub period: u64,
    pub central_return: AffineMap1D,
    pub sigma: f64,
    pub chi: f64,
    /// `ln|sigma|`, accumulated per token so it stays finite for long words.
    pub log_abs_sigma: f64,
    pub(crate) sigma_dd: Dd,
}

pub(crate) fn powf_u(x: f64, n: u64) -> f64 {
    match i32::try_from(n) {
        Ok(k) => x.powi(k),
        Err(_) => x.powf(n as f64),
    }
}

/// Chart, central slope and translation of step `step` inside a plain token.
fn plain_step(sys: &CycleSystem, token: &Token, step: u64) -> (ChartId, f64, Dd) {
    let c = sys.central_data();
    let chart = match token {
        Token::A(_) => ChartId::A((step % u64::from(c.pi_a)) as u32),
        Token::B(_) => ChartId::B((step % u64::from(c.pi_b)) as u32),
        Token::Tab(_) => ChartId::Ab(step as u32),
        Token::Tba => ChartId::Ba(step as u32),
        Token::Cycle { .. } => unreachable!("cycle tokens are expanded by the caller"),
    };
    let intercept = match token {
        Token::Tab(nu) if step == 0 => *nu,
        _ => dd(0.0),
    };
    (chart, sys.central_slope(chart), intercept)
}

struct TokenMaps {
    c_slope: Dd,
    c_int: Dd,
    log: f64,
    s_slope: f64,
    s_int: Vec<f64>,
    /// Inverse of the unstable action.
    u_inv_slope: f64,
    u_inv_int: Vec<f64>,
}

fn token_maps(sys: &CycleSystem, token: &Token) -> TokenMaps {
    let spec = sys.spec();
    let (s_dim, u_dim) = (spec.s_dim, spec.u_dim);
    let len = token.len(sys);
    let rs = powf_u(spec.rho_s, len);
    let ru_inv = powf_u(spec.rho_u.recip(), len);
    let zero = |d: usize| vec![0.0; d];
    match token {
        Token::A(_) | Token::B(_) => {
            let slope = sys.central_slope(plain_step(sys, token, 0).0);
            TokenMaps {
                c_slope: powu(dd(slope), len),
                c_int: dd(0.0),
                log: len as f64 * slope.abs().ln(),
                s_slope: rs,
                s_int: zero(s_dim),
                u_inv_slope: ru_inv,
                u_inv_int: zero(u_dim),
            }
        }
        Token::Tab(_) | Token::Tba => {
            let (chart, slope, int) = plain_step(sys, token, 0);
            let (off_s, off_u) = sys.strong_offsets(chart);
            let lead = powf_u(spec.rho_s, len - 1);
            TokenMaps {
                c_slope: dd(slope),
                c_int: int,
                log: 0.0,
                s_slope: rs,
                s_int: (0..s_dim).map(|i| lead * off_s.get(i).copied().unwrap_or(0.0)).collect(),
                u_inv_slope: ru_inv,
                u_inv_int: (0..u_dim)
                    .map(|i| -off_u.get(i).copied().unwrap_or(0.0) / spec.rho_u)
                    .collect(),
            }
        }
        Token::Cycle { orbit, count } => {
            let sig = powu(orbit.sigma_dd, *count);
            let p = orbit.base.x_c;
            TokenMaps {
                c_slope: sig,
                c_int: p * (dd(1.0) - sig),
                log: *count as f64 * orbit.log_abs_sigma,
                s_slope: rs,
                s_int: orbit.base.x_s.iter().map(|v| v * (1.0 - rs)).collect(),
                u_inv_slope: ru_inv,
                u_inv_int: orbit.base.x_u.iter().map(|v| v * (1.0 - ru_inv)).collect(),
            }
        }
    }
}

/// Realizes the periodic orbit of a closed word.
///
/// The base is the fixed point of the composed map, solved per block: the
/// stable block by forward contraction, the unstable block through the
/// inverse maps and the central coordinate in double-double.
pub fn realize_orbit(sys: &CycleSystem, word: ItineraryWord) -> Result<PeriodicOrbit, ModelError> {
    word.check_closed(sys)?;
    let spec = sys.spec();
    let maps: Vec<TokenMaps> = word.tokens().iter().map(|t| token_maps(sys, t)).collect();

    let (mut a, mut b) = (dd(1.0), dd(0.0));
    let mut log_abs_sigma = 0.0;
    let (mut ss, mut sb) = (1.0, vec![0.0; spec.s_dim]);
    for m in &maps {
        a = m.c_slope * a;
        b = m.c_slope * b + m.c_int;
        log_abs_sigma += m.log;
        ss *= m.s_slope;
        for (acc, add) in sb.iter_mut().zip(&m.s_int) {
            *acc = m.s_slope * *acc + add;
        }
    }
    let (mut gs, mut gi) = (1.0, vec![0.0; spec.u_dim]);
    for m in maps.iter().rev() {
        gs *= m.u_inv_slope;
        for (acc, add) in gi.iter_mut().zip(&m.u_inv_int) {
            *acc = m.u_inv_slope * *acc + add;
        }
    }

    let sigma = to_f64(a);
    if (sigma.abs() - 1.0).abs() < 1e-12 {
        return Err(ModelError::DegenerateWord { slope: sigma });
    }
    let x_c = div(b, dd(1.0) - a);
    let x_s = sb.iter().map(|v| v / (1.0 - ss)).collect();
    let x_u = gi.iter().map(|v| v / (1.0 - gs)).collect();
    let chart = word.first_chart().expect("closed words are non-empty");
    let period = word.period(sys);
    Ok(PeriodicOrbit {
        base: AmbientPoint { chart, x_s, x_c, x_u },
        period,
        central_return: AffineMap1D::new(sigma, to_f64(b)),
        sigma,
        chi: log_abs_sigma / period as f64,
        log_abs_sigma,
        sigma_dd: a,
        word,
    })
}

/// Central coordinate of an orbit point and the derivative reaching it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralPoint {
    pub chart: ChartId,
    pub x: Dd,
    /// Central derivative from the start of the stream to this point.
    pub deriv: f64,
}

struct CycleState<'a> {
    orbit: &'a PeriodicOrbit,
    iter: CentralIter<'a>,
    /// Offset from the sub-orbit base at the start of the current repetition.
    off: Dd,
    rep: u64,
    count: u64,
    entry_deriv: f64,
    rep_scale: f64,
}

/// One period of central coordinates.
///
/// Inside a repeated sub-orbit, points are evaluated as sub-orbit point plus
/// derivative times offset rather than by forward iteration, so rounding is
/// not amplified by the expansion along the orbit.
pub struct CentralIter<'a> {
    sys: &'a CycleSystem,
    tokens: &'a [Token],
    tok: usize,
    step: u64,
    x: Dd,
    deriv: f64,
    inner: Option<Box<CycleState<'a>>>,
}

impl<'a> CentralIter<'a> {
    pub fn new(sys: &'a CycleSystem, orbit: &'a PeriodicOrbit) -> Self {
        Self::from_entry(sys, &orbit.word, orbit.base.x_c)
    }

    /// Streams `word` from an arbitrary entry coordinate.
    pub fn from_entry(sys: &'a CycleSystem, word: &'a ItineraryWord, x: Dd) -> Self {
        Self { sys, tokens: word.tokens(), tok: 0, step: 0, x, deriv: 1.0, inner: None }
    }
}

impl Iterator for CentralIter<'_> {
    type Item = CentralPoint;

    fn next(&mut self) -> Option<CentralPoint> {
        loop {
            if let Some(cs) = self.inner.as_mut() {
                if let Some(p) = cs.iter.next() {
                    return Some(CentralPoint {
                        chart: p.chart,
                        x: p.x + cs.off * p.deriv,
                        deriv: cs.entry_deriv * cs.rep_scale * p.deriv,
                    });
                }
                cs.off *= cs.orbit.sigma_dd;
                cs.rep_scale *= cs.orbit.sigma;
                cs.rep += 1;
                if cs.rep < cs.count {
                    cs.iter = CentralIter::new(self.sys, cs.orbit);
                    continue;
                }
                self.x = cs.orbit.base.x_c + cs.off;
                self.deriv = cs.entry_deriv * cs.rep_scale;
                self.inner = None;
                self.tok += 1;
                continue;
            }
            let token = self.tokens.get(self.tok)?;
            if let Token::Cycle { orbit, count } = token {
                self.inner = Some(Box::new(CycleState {
                    orbit,
                    iter: CentralIter::new(self.sys, orbit),
                    off: self.x - orbit.base.x_c,
                    rep: 0,
                    count: *count,
                    entry_deriv: self.deriv,
                    rep_scale: 1.0,
                }));
                continue;
            }
            let (chart, slope, intercept) = plain_step(self.sys, token, self.step);
            let point = CentralPoint { chart, x: self.x, deriv: self.deriv };
            self.x = self.x * slope + intercept;
            self.deriv *= slope;
            self.step += 1;
            if self.step == token.len(self.sys) {
                self.tok += 1;
                self.step = 0;
            }
            return Some(point);
        }
    }
}

/// Look-ahead window for the unstable coordinates; `rho_u^-WINDOW` is
/// negligible for any admissible `rho_u`.
const U_WINDOW: u64 = 128;

/// Lazily generated orbit points, cyclic in the index.
pub struct OrbitPoints<'a> {
    sys: &'a CycleSystem,
    orbit: &'a PeriodicOrbit,
    central: CentralIter<'a>,
    s: Vec<f64>,
    ahead: Moves<'a>,
    ahead_pos: u64,
    events: VecDeque<(u64, &'a [f64])>,
    u_powers: Vec<f64>,
    track_u: bool,
    pos: u64,
    remaining: u64,
}

impl<'a> OrbitPoints<'a> {
    pub fn new(sys: &'a CycleSystem, orbit: &'a PeriodicOrbit, from: u64, count: u64) -> Self {
        let spec = sys.spec();
        let track_u = spec.strong_offsets.ab_u.iter().chain(&spec.strong_offsets.ba_u).any(|v| *v != 0.0);
        let u_powers = (0..=U_WINDOW).map(|d| powf_u(spec.rho_u.recip(), d)).collect();
        let mut it = Self {
            sys,
            orbit,
            central: CentralIter::new(sys, orbit),
            s: orbit.base.x_s.clone(),
            ahead: Moves::new(sys, &orbit.word),
            ahead_pos: 0,
            events: VecDeque::new(),
            u_powers,
            track_u,
            pos: 0,
            remaining: from,
        };
        if track_u {
            while it.ahead_pos < U_WINDOW {
                it.pull_ahead();
            }
        }
        while it.next().is_some() {}
        it.remaining = count;
        it
    }

    fn pull_ahead(&mut self) {
        let mv = self.ahead.next().expect("moves are cyclic");
        let (_, off_u) = self.sys.strong_offsets(mv.source);
        if off_u.iter().any(|v| *v != 0.0) {
            self.events.push_back((self.ahead_pos, off_u));
        }
        self.ahead_pos += 1;
    }

    fn unstable_here(&self) -> Vec<f64> {
        let mut u = vec![0.0; self.sys.spec().u_dim];
        for (pos, off) in &self.events {
            let w = self.u_powers[(pos - self.pos + 1) as usize];
            for (acc, o) in u.iter_mut().zip(off.iter()) {
                *acc -= w * o;
            }
        }
        u
    }
}

impl Iterator for OrbitPoints<'_> {
    type Item = AmbientPoint;

    fn next(&mut self) -> Option<AmbientPoint> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let cp = match self.central.next() {
            Some(cp) => cp,
            None => {
                self.central = CentralIter::new(self.sys, self.orbit);
                self.central.next().expect("orbits have at least one point")
            }
        };
        let x_u = if self.track_u { self.unstable_here() } else { vec![0.0; self.sys.spec().u_dim] };
        let point = AmbientPoint { chart: cp.chart, x_s: self.s.clone(), x_c: cp.x, x_u };

        let spec = self.sys.spec();
        let (off_s, _) = self.sys.strong_offsets(cp.chart);
        for (i, v) in self.s.iter_mut().enumerate() {
            *v = spec.rho_s * *v + off_s.get(i).copied().unwrap_or(0.0);
        }
        self.pos += 1;
        if self.track_u {
            while self.events.front().is_some_and(|(p, _)| *p < self.pos) {
                self.events.pop_front();
            }
            while self.ahead_pos < self.pos + U_WINDOW {
                self.pull_ahead();
            }
        }
        Some(point)
    }
}

impl PeriodicOrbit {
    /// `count` consecutive points starting at index `from`.
    pub fn points<'a>(&'a self, sys: &'a CycleSystem, from: u64, count: u64) -> OrbitPoints<'a> {
        OrbitPoints::new(sys, self, from, count)
    }

    pub fn central_points<'a>(&'a self, sys: &'a CycleSystem) -> CentralIter<'a> {
        CentralIter::new(sys, self)
    }

    pub fn moves<'a>(&'a self, sys: &'a CycleSystem) -> Moves<'a> {
        Moves::new(sys, &self.word)
    }

    /// Largest coordinate mismatch between the image of each point and its
    /// successor, including the step from the last point back to the base.
    pub fn closure_defect(&self, sys: &CycleSystem) -> f64 {
        let mut pts = self.points(sys, 0, self.period + 1);
        let mut moves = self.moves(sys);
        let mut prev = pts.next().expect("non-empty orbit");
        let mut worst: f64 = 0.0;
        for next in pts {
            let mv = moves.next().expect("cyclic");
            let image = sys
                .step(&prev, next.chart, mv.intercept)
                .map(|img| img.max_coord_diff(&next))
                .unwrap_or(f64::INFINITY);
            worst = worst.max(image);
            prev = next;
        }
        worst.max(prev.max_coord_diff(&self.base))
    }
}

pub fn orbit_points<'a>(
    sys: &'a CycleSystem,
    orbit: &'a PeriodicOrbit,
    from: u64,
    count: u64,
) -> OrbitPoints<'a> {
    OrbitPoints::new(sys, orbit, from, count)
}

/// Birkhoff average of the central log-derivative over one period.
pub fn central_exponent(sys: &CycleSystem, orbit: &PeriodicOrbit) -> f64 {
    const BLOCK: u64 = 4096;
    let mut moves = orbit.moves(sys);
    let mut total = 0.0;
    let mut left = orbit.period;
    while left > 0 {
        let n = left.min(BLOCK);
        let block: f64 = moves.by_ref().take(n as usize).map(|m| m.slope.abs().ln()).sum();
        total += block;
        left -= n;
    }
    total / orbit.period as f64
}

/// Minimal distance between distinct points of the orbit; `+inf` for a
/// single point.
pub fn min_orbit_gap(sys: &CycleSystem, orbit: &PeriodicOrbit) -> f64 {
    if orbit.period <= 1 {
        return f64::INFINITY;
    }
    let mut by_chart: Vec<Vec<AmbientPoint>> = vec![Vec::new(); sys.charts().len()];
    for p in orbit.points(sys, 0, orbit.period) {
        by_chart[sys.chart_index(p.chart)].push(p);
    }
    let occupied = by_chart.iter().filter(|v| !v.is_empty()).count();
    let mut best = if occupied > 1 { sys.spec().chart_separation } else { f64::INFINITY };
    let scale = sys.coord_scale();
    for pts in &mut by_chart {
        pts.sort_by(|a, b| a.x_c.partial_cmp(&b.x_c).expect("finite coordinates"));
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if to_f64(pts[j].x_c - pts[i].x_c) * scale >= best {
                    break;
                }
                best = best.min(sys.distance(&pts[i], &pts[j]));
            }
        }
    }
    best
}

/// The translation and word of a child orbit that shadows `parent` for `m`
/// repetitions, then visits A for `l` periods.
#[derive(Debug, Clone)]
pub struct ChildCycle {
    pub nu: Dd,
    pub word: ItineraryWord,
}

impl ChildCycle {
    pub fn nu_f64(&self) -> f64 {
        to_f64(self.nu)
    }
}

fn is_b_saddle(orbit: &PeriodicOrbit) -> bool {
    matches!(orbit.word.tokens(), [Token::B(1)])
}

/// Builds the child word of `parent`.
///
/// For the B saddle this is `T_ba, a^l, T_ab(nu), b^m` with base central
/// coordinate 1. Otherwise the word is `[parent]^m, T_ba, a^l, T_ab(nu')`;
/// the shadow phase leaves the parent at `p + exit_offset` (`p` the parent
/// base) and the child base is `p + exit_offset * sigma_parent^-m`. With a
/// zero offset the child enters the shadow phase exactly at the parent base.
/// The parent base must lie within 1/2 of the heteroclinic point.
pub fn child_cycle(
    sys: &CycleSystem,
    parent: &Arc<PeriodicOrbit>,
    l: u64,
    m: u64,
    exit_offset: f64,
) -> Result<ChildCycle, ModelError> {
    let c = sys.central_data();
    let lam = powu(dd(sys.slope_a()), l * u64::from(c.pi_a));
    if is_b_saddle(parent) {
        let nu = div(dd(1.0), powu(dd(sys.slope_b()), m * u64::from(c.pi_b))) + lam * c.tau;
        return Ok(ChildCycle { nu, word: ItineraryWord::lm(l, m, nu) });
    }
    if parent.base.chart != ChartId::Ba(0) {
        return Err(ModelError::ParentNotAnchored(format!(
            "parent base lies in chart {}, expected the b-to-a exit chart",
            parent.base.chart
        )));
    }
    if (to_f64(parent.base.x_c) - 1.0).abs() > 0.5 {
        return Err(ModelError::ParentNotAnchored(format!(
            "parent base central coordinate {} is far from the heteroclinic point 1",
            to_f64(parent.base.x_c)
        )));
    }
    if parent.sigma.abs() <= 1.0 {
        return Err(ModelError::ParentNotAnchored(format!(
            "parent multiplier {} is not expanding",
            parent.sigma
        )));
    }
    if m == 0 {
        return Err(ModelError::MalformedWord("the shadow phase needs m >= 1".into()));
    }
    let p = parent.base.x_c;
    let eta = dd(exit_offset);
    let x0 = p + div(eta, powu(parent.sigma_dd, m));
    let exit = p + eta;
    let nu = x0 + lam * exit * c.tau;
    let word = ItineraryWord::new(vec![
        Token::cycle(Arc::clone(parent), m),
        Token::Tba,
        Token::A(l),
        Token::Tab(nu),
    ]);
    Ok(ChildCycle { nu, word })
}
