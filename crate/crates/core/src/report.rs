//! Report records and their JSON and CSV forms.
//!
//! JSON goes through `serde_json`, whose shortest round-trip float output is
//! lossless. CSV floats use 17 significant digits. Non-finite values are
//! stored as `None` (JSON `null`, empty CSV cell).

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::measure::{ErgodicityCheckReport, ExponentTrace};
use crate::quotient::{InequalityReport, Orientation};
use crate::tower::{CandidateFailure, KappaProduct, LevelChoice, RBound, SupportBound, Tower};

pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// A float with 17 significant digits; empty for non-finite values.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn fmt_opt_display<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuRow {
    pub l: u64,
    pub m: u64,
    pub nu: f64,
    /// Low word of `nu` in double-double.
    pub nu_lo: f64,
    pub multiplier: f64,
    pub period: u64,
    pub residual: f64,
    /// Fixed point of the return map; 1 up to rounding.
    pub fixed_point: Option<f64>,
    pub chi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorbdRow {
    pub lambda: f64,
    pub k: u64,
    pub p: u64,
    pub q: u64,
    pub orientation: Orientation,
    pub beta_bar: f64,
    pub xi_offset: f64,
    pub nu_k: f64,
    pub residual_1: f64,
    pub residual_2: f64,
    pub multiplier: f64,
    pub closed_form: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub nu: Vec<NuRow>,
    pub corbd: Vec<CorbdRow>,
    /// Inequalities for each `(l, m)` child of the B saddle.
    pub inequalities: Vec<InequalityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub n: usize,
    pub l: u64,
    pub m: u64,
    pub period: u64,
    pub sigma: f64,
    pub chi: f64,
    pub exit_offset: f64,
    pub nu: f64,
    pub d: Option<f64>,
    pub r: Option<f64>,
    pub gamma: Option<f64>,
    pub gamma_ceiling: Option<f64>,
    pub gamma_measured: Option<f64>,
    pub kappa: Option<f64>,
    pub kappa_required: Option<f64>,
    pub included_blocks: Option<u64>,
    pub total_blocks: Option<u64>,
    pub cert_gamma_ok: Option<bool>,
    pub cert_kappa_ok: Option<bool>,
    pub cert_fibers_equal: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelInequalities {
    pub n: usize,
    pub reports: Vec<InequalityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildFailure {
    pub level: usize,
    pub message: String,
    pub best: Option<CandidateFailure>,
    pub tried: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TowerReport {
    pub levels: Vec<LevelRow>,
    pub inequalities: Vec<LevelInequalities>,
    pub failure: Option<BuildFailure>,
}

impl TowerReport {
    pub fn from_tower(tower: &Tower) -> Self {
        let r: BTreeMap<usize, f64> = crate::tower::r_sequence(tower)
            .map(|rs| rs.into_iter().map(|b| (b.n, b.r)).collect())
            .unwrap_or_default();
        let levels = tower
            .levels()
            .iter()
            .map(|lv| {
                let link = lv.link.as_ref();
                let cert = link.map(|l| &l.certificate);
                LevelRow {
                    n: lv.n,
                    l: lv.l,
                    m: lv.m,
                    period: lv.period(),
                    sigma: lv.sigma(),
                    chi: lv.chi,
                    exit_offset: lv.exit_offset,
                    nu: lv.nu_f64(),
                    d: finite(lv.d),
                    r: r.get(&lv.n).copied(),
                    gamma: link.map(|l| l.gamma),
                    gamma_ceiling: link.and_then(|l| finite(l.gamma_ceiling)),
                    gamma_measured: cert.map(|c| c.gamma_measured),
                    kappa: link.map(|l| l.kappa),
                    kappa_required: cert.map(|c| c.kappa_required),
                    included_blocks: cert.map(|c| c.included_blocks),
                    total_blocks: cert.map(|c| c.total_blocks),
                    cert_gamma_ok: cert.map(|c| c.gamma_bound_ok),
                    cert_kappa_ok: cert.map(|c| c.kappa_ok),
                    cert_fibers_equal: cert.map(|c| c.fibers_equal),
                }
            })
            .collect();
        let inequalities = tower.levels()[1..]
            .iter()
            .map(|lv| LevelInequalities { n: lv.n, reports: lv.checks.clone() })
            .collect();
        TowerReport { levels, inequalities, failure: None }
    }

    /// The recorded choices for levels `1..`, with each parent's `gamma`.
    pub fn choices(&self) -> Result<Vec<LevelChoice>, String> {
        self.levels
            .windows(2)
            .map(|w| {
                let gamma = w[0].gamma.ok_or_else(|| format!("level {} has no gamma", w[0].n))?;
                Ok(LevelChoice { l: w[1].l, m: w[1].m, exit_offset: w[1].exit_offset, parent_gamma: gamma })
            })
            .collect()
    }
}

/// One named assertion of `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub holds: bool,
    pub value: Option<f64>,
    pub bound: Option<f64>,
    pub detail: String,
}

impl CheckRow {
    pub fn new(name: impl Into<String>, holds: bool, value: f64, bound: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), holds, value: finite(value), bound: finite(bound), detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityBlock {
    pub eps: f64,
    pub reports: Vec<ErgodicityCheckReport>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckRow>,
    pub r_chain: Vec<RBound>,
    pub kappa_products: Vec<KappaProduct>,
    pub support: Vec<SupportBound>,
    pub ergodicity: Vec<ErgodicityBlock>,
    pub exponent_trace: Option<ExponentTrace>,
    pub passed: bool,
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cell: usize,
    pub lambda: f64,
    pub beta: f64,
    pub c: f64,
    pub halving_ratio: f64,
    /// `ok`, `infeasible` or `invalid`.
    pub status: String,
    pub levels_built: usize,
    pub top_period: u64,
    pub top_chi: f64,
    pub kappa_product: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub solve: Option<SolveReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tower: Option<TowerReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub verify: Option<VerifyReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sweep: Option<Vec<SweepRow>>,
    /// Wall-clock seconds per phase.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<BTreeMap<String, f64>>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// The main table of the report as CSV: solver rows, levels, checks or
    /// sweep cells, in that order of preference by command.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        match (self.command.as_str(), &self.solve, &self.tower, &self.verify, &self.sweep) {
            ("solve", Some(s), ..) => write_solve(&mut w, s)?,
            ("sweep", _, _, _, Some(rows)) => write_sweep(&mut w, rows)?,
            ("verify", _, _, Some(v), _) => write_checks(&mut w, v)?,
            (_, _, Some(t), _, _) => write_levels(&mut w, t)?,
            (_, _, _, Some(v), _) => write_checks(&mut w, v)?,
            _ => w.write_record(["command"]).and_then(|_| w.write_record([&self.command]))?,
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    /// Plot-ready columns: `chi_n` against `n` with its halving bound, kappa
    /// products, and the gamma and r margins.
    pub fn plot_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "n",
            "chi",
            "chi_halving_bound",
            "kappa",
            "kappa_product",
            "gamma",
            "gamma_ceiling",
            "r",
            "d_over_3",
        ])?;
        if let Some(t) = &self.tower {
            let h = self.config.tower.halving_ratio;
            let chi_1 = t.levels.get(1).map(|l| l.chi);
            let products: BTreeMap<usize, f64> = self
                .verify
                .as_ref()
                .map(|v| v.kappa_products.iter().map(|k| (k.from_n, k.total)).collect())
                .unwrap_or_default();
            for row in t.levels.iter().skip(1) {
                let bound = chi_1.map(|c| c * h.powi(row.n as i32 - 1));
                w.write_record([
                    row.n.to_string(),
                    fmt_f64(row.chi),
                    fmt_opt(bound),
                    fmt_opt(row.kappa),
                    fmt_opt(products.get(&row.n).copied()),
                    fmt_opt(row.gamma),
                    fmt_opt(row.gamma_ceiling),
                    fmt_opt(row.r),
                    fmt_opt(row.d.map(|d| d / 3.0)),
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn write(&self, format: crate::config::Format, out: &mut dyn Write) -> std::io::Result<()> {
        let text = match format {
            crate::config::Format::Json => self.to_json(),
            crate::config::Format::Csv => self.to_csv().map_err(std::io::Error::other)?,
        };
        out.write_all(text.as_bytes())
    }
}

fn write_solve(w: &mut csv::Writer<Vec<u8>>, s: &SolveReport) -> Result<(), csv::Error> {
    w.write_record(["table", "l", "m", "nu", "nu_lo", "multiplier", "period", "residual", "fixed_point", "chi"])?;
    for r in &s.nu {
        w.write_record([
            "nu".to_string(),
            r.l.to_string(),
            r.m.to_string(),
            fmt_f64(r.nu),
            fmt_f64(r.nu_lo),
            fmt_f64(r.multiplier),
            r.period.to_string(),
            fmt_f64(r.residual),
            fmt_opt(r.fixed_point),
            fmt_f64(r.chi),
        ])?;
    }
    if s.corbd.is_empty() {
        return Ok(());
    }
    // A second header introduces the corbd rows.
    w.write_record([
        "table",
        "lambda",
        "k",
        "p",
        "q",
        "orientation",
        "beta_bar",
        "xi_offset",
        "nu_k",
        "residual_1",
        "residual_2",
        "multiplier",
        "closed_form",
        "theta",
    ])?;
    for r in &s.corbd {
        w.write_record([
            "corbd".to_string(),
            fmt_f64(r.lambda),
            r.k.to_string(),
            r.p.to_string(),
            r.q.to_string(),
            match r.orientation {
                Orientation::Preserving => "preserving".to_string(),
                Orientation::Reversing => "reversing".to_string(),
            },
            fmt_f64(r.beta_bar),
            fmt_f64(r.xi_offset),
            fmt_f64(r.nu_k),
            fmt_f64(r.residual_1),
            fmt_f64(r.residual_2),
            fmt_f64(r.multiplier),
            fmt_f64(r.closed_form),
            fmt_f64(r.theta),
        ])?;
    }
    Ok(())
}

fn write_levels(w: &mut csv::Writer<Vec<u8>>, t: &TowerReport) -> Result<(), csv::Error> {
    w.write_record([
        "n",
        "l",
        "m",
        "period",
        "sigma",
        "chi",
        "gamma",
        "kappa",
        "d",
        "r",
        "gamma_ceiling",
        "gamma_measured",
        "kappa_required",
        "included_blocks",
        "total_blocks",
        "exit_offset",
        "nu",
        "cert_gamma_ok",
        "cert_kappa_ok",
        "cert_fibers_equal",
    ])?;
    for r in &t.levels {
        w.write_record([
            r.n.to_string(),
            r.l.to_string(),
            r.m.to_string(),
            r.period.to_string(),
            fmt_f64(r.sigma),
            fmt_f64(r.chi),
            fmt_opt(r.gamma),
            fmt_opt(r.kappa),
            fmt_opt(r.d),
            fmt_opt(r.r),
            fmt_opt(r.gamma_ceiling),
            fmt_opt(r.gamma_measured),
            fmt_opt(r.kappa_required),
            fmt_opt_display(r.included_blocks),
            fmt_opt_display(r.total_blocks),
            fmt_f64(r.exit_offset),
            fmt_f64(r.nu),
            fmt_opt_display(r.cert_gamma_ok),
            fmt_opt_display(r.cert_kappa_ok),
            fmt_opt_display(r.cert_fibers_equal),
        ])?;
    }
    Ok(())
}

fn write_checks(w: &mut csv::Writer<Vec<u8>>, v: &VerifyReport) -> Result<(), csv::Error> {
    w.write_record(["name", "holds", "value", "bound", "detail"])?;
    for c in &v.checks {
        w.write_record([c.name.clone(), c.holds.to_string(), fmt_opt(c.value), fmt_opt(c.bound), c.detail.clone()])?;
    }
    Ok(())
}

fn write_sweep(w: &mut csv::Writer<Vec<u8>>, rows: &[SweepRow]) -> Result<(), csv::Error> {
    w.write_record([
        "cell",
        "lambda",
        "beta",
        "c",
        "halving_ratio",
        "status",
        "levels_built",
        "top_period",
        "top_chi",
        "kappa_product",
        "message",
    ])?;
    for r in rows {
        w.write_record([
            r.cell.to_string(),
            fmt_f64(r.lambda),
            fmt_f64(r.beta),
            fmt_f64(r.c),
            fmt_f64(r.halving_ratio),
            r.status.clone(),
            r.levels_built.to_string(),
            r.top_period.to_string(),
            fmt_f64(r.top_chi),
            fmt_opt(r.kappa_product),
            r.message.clone(),
        ])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.0018662650798822e-3, -4.1826682371766016e12, 5e-324] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "");
    }

    #[test]
    fn json_round_trips() {
        let report = RunReport {
            command: "solve".into(),
            solve: Some(SolveReport {
                nu: vec![NuRow {
                    l: 1,
                    m: 2,
                    nu: 0.1 + 0.2,
                    nu_lo: -2.0e-17,
                    multiplier: 1.368,
                    period: 7,
                    residual: 0.0,
                    fixed_point: Some(1.0),
                    chi: 0.0447,
                }],
                ..SolveReport::default()
            }),
            ..RunReport::default()
        };
        let back = RunReport::from_json(&report.to_json()).unwrap();
        assert_eq!(back, report);
        let csv = report.to_csv().unwrap();
        assert!(csv.starts_with("table,l,m,nu"));
        assert!(csv.contains("3.0000000000000004e-1"));
    }
}
