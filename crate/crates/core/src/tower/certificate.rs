use serde::{Deserialize, Serialize};

use crate::model::{CycleSystem, PeriodicOrbit, Token};

/// Where the child repeats its parent: index of the first shadowing step and
/// the number of complete parent repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShadowSpan {
    pub start: u64,
    pub reps: u64,
}

/// Locates the repetitions of `parent` inside `child`'s word.
pub fn shadow_span(sys: &CycleSystem, child: &PeriodicOrbit, parent: &PeriodicOrbit) -> Option<ShadowSpan> {
    let mut start = 0;
    for token in child.word.tokens() {
        match token {
            Token::Cycle { orbit, count }
                if std::ptr::eq(orbit.as_ref(), parent)
                    || (orbit.period == parent.period && orbit.base == parent.base) =>
            {
                return Some(ShadowSpan { start, reps: *count });
            }
            Token::B(n) if matches!(parent.word.tokens(), [Token::B(1)]) => {
                return Some(ShadowSpan { start, reps: *n });
            }
            _ => {}
        }
        start += token.len(sys);
    }
    None
}

/// Per-block maxima of the shadow distance.
///
/// Entry `b` holds the maximum over block `b` and the maximum over its first
/// `pi_parent - 1` points; there are `reps + 1` entries, the last one
/// covering the steps after the shadow phase.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowProfile {
    pub span: ShadowSpan,
    pub parent_period: u64,
    pub full: Vec<f64>,
    pub head: Vec<f64>,
}

impl ShadowProfile {
    /// Largest distance met by any trajectory of length `pi_parent` that
    /// starts in block `b`.
    pub fn block_max(&self, b: usize) -> f64 {
        self.full[b].max(self.head[b + 1])
    }
}

pub fn shadow_profile(
    sys: &CycleSystem,
    child: &PeriodicOrbit,
    parent: &PeriodicOrbit,
    span: ShadowSpan,
) -> ShadowProfile {
    let pp = parent.period;
    let blocks = span.reps as usize + 1;
    let total = (span.reps + 1) * pp - 1;
    let mut full = vec![0.0_f64; blocks];
    let mut head = vec![0.0_f64; blocks];
    let child_pts = child.points(sys, span.start % child.period, total);
    let parent_pts = parent.points(sys, 0, total);
    for (k, (y, x)) in child_pts.zip(parent_pts).enumerate() {
        let d = sys.distance(&y, &x);
        let b = k / pp as usize;
        let i = k as u64 % pp;
        full[b] = full[b].max(d);
        if i + 1 < pp {
            head[b] = head[b].max(d);
        }
    }
    ShadowProfile { span, parent_period: pp, full, head }
}

/// Evidence that a child orbit is a good approximation of its parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodApproxCertificate {
    pub gamma: f64,
    pub kappa: f64,
    pub kappa_required: f64,
    pub gamma_measured: f64,
    pub included_blocks: u64,
    pub total_blocks: u64,
    pub fiber_count: u64,
    /// Indices of the kept repetition blocks.
    pub blocks: Vec<u64>,
    pub span: ShadowSpan,
    pub gamma_bound_ok: bool,
    pub kappa_ok: bool,
    pub fibers_equal: bool,
}

impl GoodApproxCertificate {
    pub fn passed(&self) -> bool {
        self.gamma_bound_ok && self.kappa_ok && self.fibers_equal
    }
}

/// Keeps the repetition blocks whose trajectories stay within `gamma` of the
/// parent for a full parent period.
pub fn certify_from_profile(
    profile: &ShadowProfile,
    child_period: u64,
    gamma: f64,
    kappa_required: f64,
) -> GoodApproxCertificate {
    let reps = profile.span.reps as usize;
    let blocks: Vec<u64> = (0..reps)
        .filter(|&b| profile.block_max(b) < gamma)
        .map(|b| b as u64)
        .collect();
    let gamma_measured = blocks
        .iter()
        .map(|&b| profile.block_max(b as usize))
        .fold(0.0, f64::max);
    let included = blocks.len() as u64;
    let kappa = (included * profile.parent_period) as f64 / child_period as f64;
    let nonempty = included > 0;
    GoodApproxCertificate {
        gamma,
        kappa,
        kappa_required,
        gamma_measured,
        included_blocks: included,
        total_blocks: profile.span.reps,
        fiber_count: included,
        blocks,
        span: profile.span,
        gamma_bound_ok: nonempty && gamma_measured < gamma,
        kappa_ok: nonempty && kappa >= kappa_required,
        fibers_equal: nonempty,
    }
}

/// Certificate of `child` against `parent` at tolerance `gamma`.
///
/// Returns `None` when the child's word does not repeat the parent.
pub fn verify_good_approx(
    sys: &CycleSystem,
    child: &PeriodicOrbit,
    parent: &PeriodicOrbit,
    gamma: f64,
    kappa_required: f64,
) -> Option<GoodApproxCertificate> {
    let span = shadow_span(sys, child, parent)?;
    let profile = shadow_profile(sys, child, parent, span);
    Some(certify_from_profile(&profile, child.period, gamma, kappa_required))
}
