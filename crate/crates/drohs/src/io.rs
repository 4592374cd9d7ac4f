// SPDX-License-Identifier: Apache-2.0

//! Case files, result files and the trace CSV.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use drohs_core::engine::{RunResult, RunStatus, TraceRow};
use drohs_core::matpower::parse_matpower_case;
use drohs_core::{Complex64, NetworkCase};
use serde::{Deserialize, Serialize};

/// Read a case from JSON (`.json`) or MATPOWER text (`.m`).
pub fn load_case(path: &Path) -> Result<NetworkCase> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read case {}", path.display()))?;
    let case = match path.extension().and_then(|e| e.to_str()) {
        Some("m") => parse_matpower_case(&text)?,
        Some("json") => parse_json_case(&text)?,
        _ => bail!("unknown case format for {} (expected .json or .m)", path.display()),
    };
    Ok(case)
}

pub fn parse_json_case(text: &str) -> Result<NetworkCase> {
    let case: NetworkCase = serde_json::from_str(text).context("malformed JSON case")?;
    Ok(case.normalized()?)
}

/// Solution file shared by run results and reference solutions. Only the
/// voltage, generation and objective fields are required.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolutionFile {
    #[serde(default)]
    pub name: String,
    pub bus_ids: Vec<u32>,
    pub v_re: Vec<f64>,
    pub v_im: Vec<f64>,
    pub pg: Vec<f64>,
    pub qg: Vec<f64>,
    /// Total cost in $/h.
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<String>,
}

impl SolutionFile {
    pub fn from_run(case: &NetworkCase, r: &RunResult) -> SolutionFile {
        SolutionFile {
            name: case.name.clone(),
            bus_ids: case.buses.iter().map(|b| b.id).collect(),
            v_re: r.voltages.iter().map(|v| v.re).collect(),
            v_im: r.voltages.iter().map(|v| v.im).collect(),
            pg: r.pg.clone(),
            qg: r.qg.clone(),
            objective: r.objective,
            status: Some(status_name(r.status).into()),
            iterations: Some(r.iterations),
            tags: Some(r.tags.iter().map(|t| t.letter()).collect()),
        }
    }

    pub fn voltages(&self) -> Vec<Complex64> {
        self.v_re.iter().zip(&self.v_im).map(|(&a, &b)| Complex64::new(a, b)).collect()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.bus_ids.len();
        if self.v_re.len() != n || self.v_im.len() != n {
            bail!("schema mismatch: {} bus ids but {}/{} voltage entries", n, self.v_re.len(), self.v_im.len());
        }
        if self.pg.len() != self.qg.len() {
            bail!("schema mismatch: pg and qg lengths differ");
        }
        Ok(())
    }
}

pub fn status_name(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Converged => "converged",
        RunStatus::MaxIter => "max_iter",
    }
}

pub fn load_solution(path: &Path) -> Result<SolutionFile> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let s: SolutionFile = serde_json::from_str(&text).with_context(|| format!("schema mismatch in {}", path.display()))?;
    s.check()?;
    Ok(s)
}

pub fn save_solution(path: &Path, s: &SolutionFile) -> Result<()> {
    let text = serde_json::to_string_pretty(s)?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

pub const TRACE_HEADER: &str = "k,W,H,dx,dy,dz,n_exact,n_proj,n_reject,max_node_ms,msgs_power,msgs_voltage";

/// One CSV line without the newline. Floats use the shortest round-trip
/// form so equal values always print equal; an unmeasured time is empty.
pub fn trace_line(r: &TraceRow) -> String {
    let ms = r.max_node_ms.map(|t| format!("{t:.3}")).unwrap_or_default();
    format!(
        "{},{:e},{:e},{:e},{:e},{:e},{},{},{},{},{},{}",
        r.k, r.w, r.h, r.dx, r.dy, r.dz, r.n_exact, r.n_proj, r.n_reject, ms, r.msgs_power, r.msgs_voltage
    )
}

/// Writes trace rows as they are produced.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{TRACE_HEADER}")?;
        Ok(TraceWriter { out })
    }

    pub fn row(&mut self, r: &TraceRow) -> Result<()> {
        writeln!(self.out, "{}", trace_line(r))?;
        self.out.flush()?;
        Ok(())
    }
}
