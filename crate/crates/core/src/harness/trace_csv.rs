//! Text formats for traces, bounds and PGS demos. Floats are written with
//! 17 significant digits so parsing recovers them exactly.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::solver::{ConditionFlag, TraceRecord};

pub const TRACE_HEADER: &str = "iter,delta,rho,sigma,condition,fidelity_value";
pub const BOUND_HEADER: &str = "iter,delta,bound,margin";
pub const PGS_HEADER: &str = "k,y,partial_sum,chunk_bound";

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_trace(records: &[TraceRecord]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in records {
        let cond = r.condition.map_or_else(|| "NA".to_string(), |c| c.to_string());
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iter,
            num(r.delta),
            num(r.rho),
            num(r.sigma),
            cond,
            num(r.fidelity_value)
        )
        .unwrap();
    }
    out
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_HEADER => {}
        Some((_, h)) => {
            return Err(Error::Csv {
                line: 1,
                reason: format!("expected header `{TRACE_HEADER}`, found `{h}`"),
            })
        }
        None => {
            return Err(Error::Csv {
                line: 1,
                reason: "empty file".into(),
            })
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| Error::Csv { line: line_no, reason };
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 6 {
            return Err(bad(format!("expected 6 columns, found {}", cols.len())));
        }
        let float = |idx: usize, name: &str| -> Result<f64> {
            cols[idx]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("invalid {name} `{}`", cols[idx])))
        };
        let iter: usize = cols[0]
            .parse()
            .map_err(|_| bad(format!("invalid iter `{}`", cols[0])))?;
        if iter != records.len() + 1 {
            return Err(bad(format!(
                "iter {iter} out of sequence, expected {}",
                records.len() + 1
            )));
        }
        let condition = match cols[4] {
            "NA" => None,
            s => Some(s.parse::<ConditionFlag>().map_err(bad)?),
        };
        records.push(TraceRecord {
            iter,
            delta: float(1, "delta")?,
            rho: float(2, "rho")?,
            sigma: float(3, "sigma")?,
            condition,
            fidelity_value: float(5, "fidelity_value")?,
        });
    }
    Ok(records)
}

/// Rows of `iter,delta,bound,margin`; margin is `delta/bound`.
pub fn write_bound(deltas: &[f64], bound: &[f64]) -> String {
    let mut out = String::from(BOUND_HEADER);
    out.push('\n');
    for (i, (&d, &y)) in deltas.iter().zip(bound).enumerate() {
        let margin = if d == 0.0 { 0.0 } else { d / y };
        writeln!(out, "{},{},{},{}", i + 1, num(d), num(y), num(margin)).unwrap();
    }
    out
}
