//! Trace CSV and JSON report envelopes.

use std::io::Write;

use anyhow::Result;
use serde::Serialize;
use serde_json::{json, Value};

use extfix_core::{CElement, PairedTrace, Point};

pub const TOOL: &str = "extfix";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const TRACE_COLUMNS: [&str; 8] = ["n", "x_n", "u_n", "y_n", "v_n", "rho_xy", "f_a_u", "f_b_v"];

/// 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn point(p: &Point) -> String {
    p.coords().iter().map(|c| num(*c)).collect::<Vec<_>>().join(";")
}

pub fn element(c: &CElement) -> String {
    match c {
        CElement::Vector(p) => point(p),
        CElement::Atom(k) => format!("#{k}"),
        CElement::Pair(a, b) => format!("[{}|{}]", element(a), element(b)),
    }
}

pub fn write_trace_csv<W: Write>(out: W, trace: &PairedTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for n in 0..trace.len() {
        let (x, u) = &trace.a.states[n];
        let (y, v) = &trace.b.states[n];
        w.write_record([
            n.to_string(),
            point(x),
            element(u),
            point(y),
            element(v),
            num(trace.rho[n]),
            num(trace.a.f_values[n]),
            num(trace.b.f_values[n]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `{tool, version, command, seed, config, result}`
pub fn envelope(command: &str, seed: Option<u64>, config: &impl Serialize, result: Value) -> Result<Value> {
    Ok(json!({
        "tool": TOOL,
        "version": VERSION,
        "command": command,
        "seed": seed,
        "config": serde_json::to_value(config)?,
        "result": result,
    }))
}
