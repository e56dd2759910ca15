use serde::{Deserialize, Serialize};

use super::{Tower, TowerError};
use crate::dd::to_f64;
use crate::model::AmbientPoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaProduct {
    pub from_n: usize,
    /// Product of the recorded `kappa_k` for `from_n <= k < top`.
    pub built: f64,
    /// Lower bound for the product over `k >= top`.
    pub tail: f64,
    pub total: f64,
}

/// Lower bound for `prod_{k >= from_n} kappa_k`.
///
/// Levels beyond the top are bounded by `1 - C chi_top h^j`, summed in log
/// space.
pub fn kappa_product(tower: &Tower, from_n: usize) -> Result<KappaProduct, TowerError> {
    let top = tower.top();
    if from_n > top {
        return Err(TowerError::BadLevel(format!("from_n = {from_n} above top {top}")));
    }
    let mut log_built = 0.0;
    for k in from_n..top {
        let kappa = tower.level(k).kappa().unwrap_or(0.0);
        if !(kappa > 0.0) {
            return Err(TowerError::NonPositive { index: k, value: kappa });
        }
        log_built += kappa.ln();
    }
    let cfg = tower.config();
    let first = cfg.c * tower.level(top).chi;
    if !(first < 1.0) {
        return Err(TowerError::NonPositive { index: top, value: 1.0 - first });
    }
    let mut log_tail = 0.0;
    let mut deficit = first;
    while deficit > 1e-18 {
        log_tail += (-deficit).ln_1p();
        deficit *= cfg.halving_ratio;
    }
    // Remaining terms: sum ln(1 - x) >= -x/(1 - x) per term, geometric.
    log_tail -= deficit / (1.0 - cfg.halving_ratio) / (1.0 - deficit);
    let built = log_built.exp();
    let tail = log_tail.exp();
    Ok(KappaProduct { from_n, built, tail, total: (log_built + log_tail).exp() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RBound {
    pub n: usize,
    pub r: f64,
    /// `d_n / 3`.
    pub bound: f64,
    pub margin: f64,
}

/// `r_n = sum_{k >= n} gamma_k` for `1 <= n <= top`, checked against
/// `d_n / 3`.
///
/// Levels at or above the top contribute their ceilings
/// `min_{1<=i<=top} d_i / (3 * 2^k)`.
pub fn r_sequence(tower: &Tower) -> Result<Vec<RBound>, TowerError> {
    let top = tower.top();
    if top == 0 {
        return Ok(Vec::new());
    }
    let tail = 2.0 * tower.gamma_ceiling(top);
    let mut out = Vec::with_capacity(top);
    let mut r = tail;
    let mut rs = vec![0.0; top + 1];
    rs[top] = r;
    for n in (1..top).rev() {
        let gamma = tower
            .level(n)
            .gamma()
            .ok_or_else(|| TowerError::BadLevel(format!("level {n} has no gamma")))?;
        r += gamma;
        rs[n] = r;
    }
    for (n, &r) in rs.iter().enumerate().skip(1) {
        let bound = tower.level(n).d / 3.0;
        let ok = if n == top { r <= bound } else { r < bound };
        if !ok {
            return Err(TowerError::BoundViolated { n, r, bound });
        }
        out.push(RBound { n, r, bound, margin: bound - r });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportBound {
    pub n: usize,
    pub m: usize,
    pub r: f64,
    pub ball_count: u64,
    /// `prod_{k=n}^{m-1} kappa_k / pi(X_n)`.
    pub measure_lower_bound: f64,
    /// Fewest points of `X_m` found in a single ball.
    pub min_count: u64,
    /// Points each ball must carry: `prod_{k=n}^{m-1}` kept blocks.
    pub required: u64,
}

/// Counts the points of `X_m` in the closed `r_n`-balls around `X_n`.
pub fn support_bound(tower: &Tower, n: usize, m: usize) -> Result<SupportBound, TowerError> {
    let top = tower.top();
    if !(1 <= n && n < m && m <= top) {
        return Err(TowerError::BadLevel(format!("need 1 <= n < m <= {top}, got n={n}, m={m}")));
    }
    let rb = r_sequence(tower)?;
    let RBound { r, bound, .. } = rb[n - 1];
    if !(r < bound) {
        return Err(TowerError::DisjointnessFailed { n, r });
    }
    let sys = tower.system();
    let mut required: u64 = 1;
    let mut kappa = 1.0;
    for k in n..m {
        let link = tower
            .level(k)
            .link
            .as_ref()
            .ok_or_else(|| TowerError::BadLevel(format!("level {k} has no certificate")))?;
        required = required.saturating_mul(link.certificate.included_blocks);
        kappa *= link.kappa;
    }
    let xn = &tower.level(n).orbit;
    let xm = &tower.level(m).orbit;

    let mut by_chart: Vec<Vec<(usize, AmbientPoint)>> = vec![Vec::new(); sys.charts().len()];
    for (i, p) in xn.points(sys, 0, xn.period).enumerate() {
        by_chart[sys.chart_index(p.chart)].push((i, p));
    }
    for pts in &mut by_chart {
        pts.sort_by(|a, b| a.1.x_c.partial_cmp(&b.1.x_c).expect("finite coordinates"));
    }
    let window = r / sys.coord_scale();
    let mut counts = vec![0_u64; xn.period as usize];
    for q in xm.points(sys, 0, xm.period) {
        let pts = &by_chart[sys.chart_index(q.chart)];
        let qc = to_f64(q.x_c);
        let lo = pts.partition_point(|(_, p)| to_f64(p.x_c) < qc - window);
        for (i, p) in &pts[lo..] {
            if to_f64(p.x_c) > qc + window {
                break;
            }
            if sys.distance(p, &q) <= r {
                counts[*i] += 1;
                break;
            }
        }
    }
    let (index, &min_count) = counts
        .iter()
        .enumerate()
        .min_by_key(|(_, c)| **c)
        .expect("periodic orbit is nonempty");
    if min_count < required {
        return Err(TowerError::CountingShortfall { n, m, index, count: min_count, required });
    }
    Ok(SupportBound {
        n,
        m,
        r,
        ball_count: xn.period,
        measure_lower_bound: kappa / xn.period as f64,
        min_count,
        required,
    })
}
