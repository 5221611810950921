//! Per-episode trace and curve CSV files.
//!
//! Reals are written in plain decimal notation with 10 significant digits;
//! absent values (the estimate and ramp-up parameter of a classical agent)
//! are empty fields. Lines end with LF.

use std::io::{self, Write};

use thiserror::Error;

use crate::experiments::{CurvePoint, EpisodeRecord, RunTrace};

pub const TRACE_HEADER: &str = "run_id,episode,phase,true_q,est_q,rewarded,m,k";
pub const CURVE_HEADER: &str = "episode,mean,se,ci95,n";

/// `x` rounded to 10 significant digits, without exponent notation.
pub fn format_sig10(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    // `{:e}` rounds correctly, including carries into a new leading digit
    let sci = format!("{:.9e}", x.abs());
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let sign = if x < 0.0 { "-" } else { "" };
    let body = if exp < 0 {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    } else {
        let int_len = exp as usize + 1;
        if int_len >= digits.len() {
            format!("{}{}", digits, "0".repeat(int_len - digits.len()))
        } else {
            format!("{}.{}", &digits[..int_len], &digits[int_len..])
        }
    };
    format!("{sign}{body}")
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig10).unwrap_or_default()
}

pub fn write_trace_row<W: Write>(out: &mut W, run_id: usize, r: &EpisodeRecord) -> io::Result<()> {
    writeln!(
        out,
        "{},{},{},{},{},{},{},{}",
        run_id,
        r.episode,
        r.phase,
        format_sig10(r.true_q),
        opt(r.est_q),
        u8::from(r.rewarded),
        opt(r.m),
        r.k
    )
}

/// Header plus one row per episode, runs in the given order.
pub fn write_trace_csv<W: Write>(out: &mut W, traces: &[RunTrace]) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for t in traces {
        for r in &t.records {
            write_trace_row(out, t.run_id, r)?;
        }
    }
    Ok(())
}

pub fn write_curve_csv<W: Write>(out: &mut W, curve: &[CurvePoint]) -> io::Result<()> {
    writeln!(out, "{CURVE_HEADER}")?;
    for p in curve {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.episode,
            format_sig10(p.stats.mean),
            format_sig10(p.stats.se),
            format_sig10(p.stats.ci95),
            p.stats.n
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceParseError {
    #[error("missing or wrong header")]
    Header,
    #[error("line {line}: {reason}")]
    Row { line: usize, reason: String },
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub run_id: usize,
    pub record: EpisodeRecord,
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>, TraceParseError> {
    let mut lines = text.split('\n');
    if lines.next() != Some(TRACE_HEADER) {
        return Err(TraceParseError::Header);
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.is_empty() {
            continue;
        }
        let err = |reason: &str| TraceParseError::Row {
            line: line_no,
            reason: reason.into(),
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(err("expected 8 fields"));
        }
        let real = |s: &str, name: &str| s.parse::<f64>().map_err(|_| err(name));
        let opt_real = |s: &str, name: &str| {
            if s.is_empty() {
                Ok(None)
            } else {
                real(s, name).map(Some)
            }
        };
        rows.push(TraceRow {
            run_id: fields[0].parse().map_err(|_| err("run_id"))?,
            record: EpisodeRecord {
                episode: fields[1].parse().map_err(|_| err("episode"))?,
                phase: fields[2].parse().map_err(|_| err("phase"))?,
                true_q: real(fields[3], "true_q")?,
                est_q: opt_real(fields[4], "est_q")?,
                rewarded: match fields[5] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(err("rewarded")),
                },
                m: opt_real(fields[6], "m")?,
                k: fields[7].parse().map_err(|_| err("k"))?,
            },
        });
    }
    Ok(rows)
}
