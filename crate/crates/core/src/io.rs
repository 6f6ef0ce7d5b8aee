//! Plain-text CSV formats.
//!
//! * Trace: `t,v0,v1,v2,s1[,label]`. A dataset file is several traces
//!   concatenated; a new trace starts wherever time stops increasing or the
//!   label changes.
//! * Residuals: `t,r1,r2,valid2,active1,active2`, booleans as `0`/`1`.
//!
//! Floats are written with 9 significant digits.

use std::fmt::Write as _;

use thiserror::Error;

use crate::mb::{ResidualPoint, ResidualTrace};
use crate::model::{Label, ModelError, Sample, Trace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("file contains no data rows")]
    Empty,
    #[error("expected a single trace, found {0}")]
    MultipleTraces(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

const TRACE_HEADER: &str = "t,v0,v1,v2,s1";
const LABELED_HEADER: &str = "t,v0,v1,v2,s1,label";
const RESIDUAL_HEADER: &str = "t,r1,r2,valid2,active1,active2";

/// Formats `x` like C's `%.9g`.
pub fn fmt_sig9(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn push_sample(out: &mut String, s: &Sample, label: Option<Label>) {
    let _ = write!(
        out,
        "{},{},{},{},{}",
        fmt_sig9(s.t),
        fmt_sig9(s.v0),
        fmt_sig9(s.v1),
        fmt_sig9(s.v2),
        s.s1
    );
    if let Some(l) = label {
        out.push(',');
        out.push_str(l.as_str());
    }
    out.push('\n');
}

/// Serialises one trace; the label column is present iff the trace is labeled.
pub fn write_trace(trace: &Trace) -> String {
    let mut out = String::new();
    out.push_str(if trace.label.is_some() {
        LABELED_HEADER
    } else {
        TRACE_HEADER
    });
    out.push('\n');
    for s in trace.samples() {
        push_sample(&mut out, s, trace.label);
    }
    out
}

/// Serialises several labeled traces into one dataset file.
pub fn write_dataset(traces: &[Trace]) -> Result<String, FormatError> {
    let mut out = String::from(LABELED_HEADER);
    out.push('\n');
    for (i, tr) in traces.iter().enumerate() {
        let label = tr.label.ok_or(FormatError::Parse {
            line: 0,
            msg: format!("trace {i} has no label"),
        })?;
        for s in tr.samples() {
            push_sample(&mut out, s, Some(label));
        }
    }
    Ok(out)
}

fn parse_f64(cell: &str, line: usize, what: &str) -> Result<f64, FormatError> {
    cell.trim().parse::<f64>().map_err(|e| FormatError::Parse {
        line,
        msg: format!("{what} `{cell}`: {e}"),
    })
}

/// Parses a trace or dataset file into its traces.
pub fn read_traces(text: &str) -> Result<Vec<Trace>, FormatError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or(FormatError::Empty)?;
    let labeled = match header.trim() {
        TRACE_HEADER => false,
        LABELED_HEADER => true,
        other => {
            return Err(FormatError::Parse {
                line: hline,
                msg: format!("unexpected header `{other}`"),
            })
        }
    };
    let width = if labeled { 6 } else { 5 };

    let mut traces = Vec::new();
    let mut current: Vec<Sample> = Vec::new();
    let mut current_label: Option<Label> = None;
    for (line, row) in lines {
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != width {
            return Err(FormatError::Parse {
                line,
                msg: format!("expected {width} columns, got {}", cells.len()),
            });
        }
        let s1 = match cells[4].trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(FormatError::Parse {
                    line,
                    msg: format!("s1 must be 0 or 1, got `{other}`"),
                })
            }
        };
        let sample = Sample {
            t: parse_f64(cells[0], line, "t")?,
            v0: parse_f64(cells[1], line, "v0")?,
            v1: parse_f64(cells[2], line, "v1")?,
            v2: parse_f64(cells[3], line, "v2")?,
            s1,
        };
        let label = if labeled {
            Some(cells[5].parse::<Label>().map_err(|e| FormatError::Parse {
                line,
                msg: e.to_string(),
            })?)
        } else {
            None
        };
        let restart = current
            .last()
            .is_some_and(|prev| sample.t <= prev.t || label != current_label);
        if restart {
            traces.push(Trace::new(std::mem::take(&mut current), current_label)?);
        }
        current_label = label;
        current.push(sample);
    }
    if current.is_empty() {
        return Err(FormatError::Empty);
    }
    traces.push(Trace::new(current, current_label)?);
    Ok(traces)
}

/// Parses a file that must hold exactly one trace.
pub fn read_trace(text: &str) -> Result<Trace, FormatError> {
    let mut traces = read_traces(text)?;
    match traces.len() {
        1 => Ok(traces.pop().expect("one trace")),
        n => Err(FormatError::MultipleTraces(n)),
    }
}

pub fn write_residuals(res: &ResidualTrace) -> String {
    let b = |v: bool| if v { '1' } else { '0' };
    let mut out = String::from(RESIDUAL_HEADER);
    out.push('\n');
    for p in &res.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_sig9(p.t),
            fmt_sig9(p.r1),
            fmt_sig9(p.r2),
            b(p.valid2),
            b(p.active1),
            b(p.active2)
        );
    }
    out
}

/// Parses a residual CSV. Transition indices are not stored in the file and
/// are left empty.
pub fn read_residuals(text: &str) -> Result<ResidualTrace, FormatError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or(FormatError::Empty)?;
    if header.trim() != RESIDUAL_HEADER {
        return Err(FormatError::Parse {
            line: hline,
            msg: format!("unexpected header `{header}`"),
        });
    }
    let flag = |c: &str, line: usize| match c.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(FormatError::Parse {
            line,
            msg: format!("flag must be 0 or 1, got `{other}`"),
        }),
    };
    let mut points = Vec::new();
    for (line, row) in lines {
        let c: Vec<&str> = row.split(',').collect();
        if c.len() != 6 {
            return Err(FormatError::Parse {
                line,
                msg: format!("expected 6 columns, got {}", c.len()),
            });
        }
        points.push(ResidualPoint {
            t: parse_f64(c[0], line, "t")?,
            r1: parse_f64(c[1], line, "r1")?,
            r2: parse_f64(c[2], line, "r2")?,
            valid2: flag(c[3], line)?,
            active1: flag(c[4], line)?,
            active2: flag(c[5], line)?,
        });
    }
    Ok(ResidualTrace {
        points,
        transitions: Vec::new(),
    })
}
