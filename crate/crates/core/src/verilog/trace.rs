//! Stimulus and trace files: a header row of port names, then one row of
//! `0`/`1` values per cycle.

use crate::error::{Error, Result};
use crate::sim::Trace;

pub fn write_trace_csv(trace: &Trace) -> String {
    let mut out = trace.ports.join(",");
    out.push('\n');
    for row in &trace.rows {
        let cells: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn read_trace_csv(text: &str) -> Result<Trace> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Config("trace file is empty".into()))?;
    let ports: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines {
        let row = line
            .split(',')
            .map(|v| match v.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::Config(format!(
                    "trace line {}: bad value '{other}'",
                    i + 1
                ))),
            })
            .collect::<Result<Vec<bool>>>()?;
        if row.len() != ports.len() {
            return Err(Error::Config(format!(
                "trace line {}: {} values for {} ports",
                i + 1,
                row.len(),
                ports.len()
            )));
        }
        rows.push(row);
    }
    Ok(Trace { ports, rows })
}
