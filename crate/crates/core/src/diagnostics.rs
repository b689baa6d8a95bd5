//! Per-iteration diagnostics, their CSV form, and the convergence checks run
//! on them.

use std::fmt;
use std::io;

use crate::error::{Error, Result};

/// Scalars logged after outer iteration `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub k: usize,
    /// TV of each channel of `uᵏ`.
    pub tv: Vec<f64>,
    /// `‖rᵏ‖`
    pub residual: f64,
    /// `‖qᵏ − qᵏ⁻¹‖`
    pub dual_step: f64,
    pub psnr: Option<f64>,
    /// Symmetric Bregman distance between consecutive iterates, summed over
    /// channels.
    pub sym_bregman: Option<f64>,
    /// Max over channel pairs of the two infimal-convolution stationarity
    /// distances.
    pub stationarity: Option<(f64, f64)>,
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn header(channels: usize, sym: bool, stat: bool) -> Vec<String> {
    let mut cols = vec!["k".to_owned()];
    cols.extend((0..channels).map(|i| format!("tv_{i}")));
    cols.extend(["residual", "dual_step", "psnr"].map(String::from));
    if sym {
        cols.push("sym_bregman".into());
    }
    if stat {
        cols.push("stat_plus".into());
        cols.push("stat_minus".into());
    }
    cols
}

/// Writes `records` with a header; every float carries 17 significant digits.
pub fn write_csv<W: io::Write>(records: &[DiagnosticsRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let channels = records.first().map_or(0, |r| r.tv.len());
    let sym = records.iter().any(|r| r.sym_bregman.is_some());
    let stat = records.iter().any(|r| r.stationarity.is_some());
    w.write_record(header(channels, sym, stat))?;
    for r in records {
        if r.tv.len() != channels {
            return Err(Error::ShapeMismatch("records disagree on channel count".into()));
        }
        let mut row = vec![r.k.to_string()];
        row.extend(r.tv.iter().map(|&v| fmt_float(v)));
        row.push(fmt_float(r.residual));
        row.push(fmt_float(r.dual_step));
        row.push(r.psnr.map(fmt_float).unwrap_or_default());
        if sym {
            row.push(r.sym_bregman.map(fmt_float).unwrap_or_default());
        }
        if stat {
            let (plus, minus) = r
                .stationarity
                .map_or((String::new(), String::new()), |(p, m)| (fmt_float(p), fmt_float(m)));
            row.push(plus);
            row.push(minus);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(records: &[DiagnosticsRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Diagnostics(e.to_string()))
}

fn parse_float(field: &str, line: usize, col: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| {
        Error::Diagnostics(format!("line {line}: column {col}: cannot parse '{field}'"))
    })
}

fn parse_optional(field: Option<&str>, line: usize, col: &str) -> Result<Option<f64>> {
    match field.map(str::trim) {
        None | Some("") => Ok(None),
        Some(f) => parse_float(f, line, col).map(Some),
    }
}

/// Reads a CSV produced by [`write_csv`].
pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<DiagnosticsRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let missing = |name: &str| Error::Diagnostics(format!("missing column '{name}'"));
    let k_col = find("k").ok_or_else(|| missing("k"))?;
    let res_col = find("residual").ok_or_else(|| missing("residual"))?;
    let step_col = find("dual_step").ok_or_else(|| missing("dual_step"))?;
    let psnr_col = find("psnr");
    let sym_col = find("sym_bregman");
    let plus_col = find("stat_plus");
    let minus_col = find("stat_minus");
    let tv_cols: Vec<usize> = (0..)
        .map_while(|i| find(&format!("tv_{i}")))
        .collect();

    let mut records = Vec::new();
    for (n, row) in rdr.records().enumerate() {
        let row = row?;
        let line = n + 2;
        let get = |c: usize| row.get(c).ok_or_else(|| Error::Diagnostics(format!("line {line}: short row")));
        let k = get(k_col)?
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Diagnostics(format!("line {line}: bad iteration index")))?;
        let tv = tv_cols
            .iter()
            .map(|&c| parse_float(get(c)?, line, "tv"))
            .collect::<Result<Vec<_>>>()?;
        let stationarity = match (
            parse_optional(plus_col.and_then(|c| row.get(c)), line, "stat_plus")?,
            parse_optional(minus_col.and_then(|c| row.get(c)), line, "stat_minus")?,
        ) {
            (Some(p), Some(m)) => Some((p, m)),
            _ => None,
        };
        records.push(DiagnosticsRecord {
            k,
            tv,
            residual: parse_float(get(res_col)?, line, "residual")?,
            dual_step: parse_float(get(step_col)?, line, "dual_step")?,
            psnr: parse_optional(psnr_col.and_then(|c| row.get(c)), line, "psnr")?,
            sym_bregman: parse_optional(sym_col.and_then(|c| row.get(c)), line, "sym_bregman")?,
            stationarity,
        });
    }
    if records.is_empty() {
        return Err(Error::Diagnostics("no data rows".into()));
    }
    if let Some(w) = records.windows(2).find(|w| w[1].k <= w[0].k) {
        return Err(Error::Diagnostics(format!(
            "iteration index not increasing at k={}",
            w[1].k
        )));
    }
    Ok(records)
}

/// Outcome of a non-increase check on one column.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityReport {
    pub column: &'static str,
    /// First `k` whose value exceeds its predecessor by more than the slack.
    pub offending_k: Option<usize>,
    /// Largest increase over the predecessor, 0 if none.
    pub worst_increase: f64,
    pub slack: f64,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.offending_k.is_none()
    }
}

/// Checks `v[t+1] ≤ v[t] + rel_slack·v[0]`.
pub fn check_monotone(
    column: &'static str,
    ks: &[usize],
    values: &[f64],
    rel_slack: f64,
) -> MonotonicityReport {
    let slack = rel_slack * values.first().map_or(0.0, |v| v.abs());
    let mut offending_k = None;
    let mut worst_increase = 0.0f64;
    for t in 1..values.len() {
        let inc = values[t] - values[t - 1];
        worst_increase = worst_increase.max(inc);
        if inc > slack && offending_k.is_none() {
            offending_k = Some(ks[t]);
        }
    }
    MonotonicityReport {
        column,
        offending_k,
        worst_increase,
        slack,
    }
}

/// Fit of `‖rᵏ‖ ≈ C/√k` together with the bound `max k‖rᵏ‖² ≤ 2·k₁‖r^{k₁}‖²`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    /// Least-squares `C`.
    pub c_fit: f64,
    /// `max_k k‖rᵏ‖²`
    pub max_k_r2: f64,
    /// `k₁‖r^{k₁}‖²` of the first row.
    pub first: f64,
}

impl RateReport {
    pub fn passed(&self) -> bool {
        self.max_k_r2 <= 2.0 * self.first
    }
}

/// `None` when fewer than two rows are available.
pub fn check_rate(records: &[DiagnosticsRecord]) -> Option<RateReport> {
    if records.len() < 2 {
        return None;
    }
    let (mut num, mut den, mut max_k_r2) = (0.0, 0.0, 0.0f64);
    for r in records {
        let k = r.k.max(1) as f64;
        num += r.residual / k.sqrt();
        den += 1.0 / k;
        max_k_r2 = max_k_r2.max(k * r.residual * r.residual);
    }
    let r0 = &records[0];
    Some(RateReport {
        c_fit: num / den,
        max_k_r2,
        first: r0.k.max(1) as f64 * r0.residual * r0.residual,
    })
}

/// Relative slack allowed for inexact inner solves.
pub const MONOTONE_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnoseReport {
    pub residual: MonotonicityReport,
    pub dual_step: MonotonicityReport,
    pub rate: Option<RateReport>,
}

impl DiagnoseReport {
    pub fn passed(&self) -> bool {
        self.residual.passed()
            && self.dual_step.passed()
            && self.rate.as_ref().is_none_or(RateReport::passed)
    }
}

pub fn diagnose(records: &[DiagnosticsRecord], rel_slack: f64) -> DiagnoseReport {
    let ks: Vec<usize> = records.iter().map(|r| r.k).collect();
    let res: Vec<f64> = records.iter().map(|r| r.residual).collect();
    let step: Vec<f64> = records.iter().map(|r| r.dual_step).collect();
    DiagnoseReport {
        residual: check_monotone("residual", &ks, &res, rel_slack),
        dual_step: check_monotone("dual_step", &ks, &step, rel_slack),
        rate: check_rate(records),
    }
}

impl fmt::Display for MonotonicityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.offending_k {
            None => write!(f, "PASS {} non-increasing", self.column),
            Some(k) => write!(
                f,
                "FAIL {} increases at k={k} (largest increase {:.3e}, slack {:.3e})",
                self.column, self.worst_increase, self.slack
            ),
        }
    }
}

impl fmt::Display for DiagnoseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.residual)?;
        writeln!(f, "{}", self.dual_step)?;
        match &self.rate {
            None => writeln!(f, "SKIP rate check needs at least two rows"),
            Some(r) => writeln!(
                f,
                "{} rate C/sqrt(k): fitted C = {:.6e}, max k*r^2 = {:.6e}, bound 2*k1*r1^2 = {:.6e}",
                if r.passed() { "PASS" } else { "FAIL" },
                r.c_fit,
                r.max_k_r2,
                2.0 * r.first
            ),
        }
    }
}
