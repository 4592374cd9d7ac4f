// SPDX-License-Identifier: Apache-2.0

//! Reader for the MATPOWER text case format (`mpc.baseMVA`, `mpc.bus`,
//! `mpc.branch`, `mpc.gen`, `mpc.gencost`). Only polynomial costs of degree
//! at most two are accepted.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::case::{Branch, Bus, BusType, Cost, Gen, NetworkCase};
use crate::error::{Error, Result};

struct Matrix {
    rows: Vec<(usize, Vec<f64>)>,
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Parse the text of a `.m` case file into a normalized, validated case.
pub fn parse_matpower_case(text: &str) -> Result<NetworkCase> {
    if !text.contains("mpc.") {
        return Err(Error::Parse { line: 0, msg: "no mpc structure found".into() });
    }
    let mut base: Option<f64> = None;
    let mut name = String::new();
    let mut mats: Vec<(String, Matrix)> = Vec::new();

    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    while i < lines.len() {
        let lineno = i + 1;
        let line = strip_comment(lines[i]).trim();
        i += 1;
        if let Some(rest) = line.strip_prefix("function") {
            if let Some(eq) = rest.find('=') {
                name = rest[eq + 1..].trim().trim_end_matches(';').to_string();
            }
            continue;
        }
        let Some(rest) = line.strip_prefix("mpc.") else { continue };
        let Some(eq) = rest.find('=') else { continue };
        let field = rest[..eq].trim().to_string();
        let value = rest[eq + 1..].trim();
        if field == "baseMVA" {
            let v = value.trim_end_matches(';').trim();
            base = Some(v.parse().map_err(|_| Error::Parse { line: lineno, msg: format!("bad baseMVA value '{v}'") })?);
            continue;
        }
        let Some(open) = value.strip_prefix('[') else { continue };
        let mut rows = Vec::new();
        let mut pending = String::new();
        let mut pending_line = lineno;
        let mut closed = false;
        let mut chunk = open.to_string();
        let mut chunk_line = lineno;
        loop {
            let (body, done) = match chunk.find(']') {
                Some(k) => (chunk[..k].to_string(), true),
                None => (chunk.clone(), false),
            };
            for (n, piece) in body.split(';').enumerate() {
                if n > 0 {
                    push_row(&mut rows, &pending, pending_line)?;
                    pending.clear();
                }
                if pending.trim().is_empty() {
                    pending_line = chunk_line;
                }
                pending.push(' ');
                pending.push_str(piece);
            }
            // A newline also ends a row.
            push_row(&mut rows, &pending, pending_line)?;
            pending.clear();
            if done {
                closed = true;
                break;
            }
            if i >= lines.len() {
                break;
            }
            chunk = strip_comment(lines[i]).to_string();
            chunk_line = i + 1;
            i += 1;
        }
        if !closed {
            return Err(Error::Parse { line: lineno, msg: format!("matrix mpc.{field} is not closed") });
        }
        mats.push((field, Matrix { rows }));
    }

    let base = base.ok_or(Error::Parse { line: 0, msg: "missing mpc.baseMVA".into() })?;
    let get = |f: &str| mats.iter().find(|(n, _)| n == f).map(|(_, m)| m);
    let bus_m = get("bus").ok_or(Error::Parse { line: 0, msg: "missing mpc.bus".into() })?;
    let gen_m = get("gen").ok_or(Error::Parse { line: 0, msg: "missing mpc.gen".into() })?;
    let br_m = get("branch").ok_or(Error::Parse { line: 0, msg: "missing mpc.branch".into() })?;

    let mut buses = Vec::new();
    for (line, r) in &bus_m.rows {
        need(r, 13, *line, "bus")?;
        let id = as_id(r[0], *line)?;
        let code = r[1] as i64;
        if code == 4 {
            continue;
        }
        let bus_type = BusType::from_code(code).ok_or(Error::Parse { line: *line, msg: format!("unknown bus type {}", r[1]) })?;
        buses.push(Bus { id, bus_type, pd: r[2] / base, qd: r[3] / base, gs: r[4] / base, bs: r[5] / base, base_kv: r[9], vmax: r[11], vmin: r[12] });
    }
    let mut gens = Vec::new();
    for (line, r) in &gen_m.rows {
        need(r, 10, *line, "gen")?;
        gens.push(Gen {
            bus: as_id(r[0], *line)?,
            qmax: r[3] / base,
            qmin: r[4] / base,
            status: (r[7] > 0.0) as u8,
            pmax: r[8] / base,
            pmin: r[9] / base,
        });
    }
    let mut branches = Vec::new();
    for (line, r) in &br_m.rows {
        need(r, 11, *line, "branch")?;
        branches.push(Branch {
            from: as_id(r[0], *line)?,
            to: as_id(r[1], *line)?,
            r: r[2],
            x: r[3],
            b: r[4],
            rate_a: r[5] / base,
            tap: r[8],
            shift: r[9],
            status: (r[10] > 0.0) as u8,
        });
    }
    let mut costs = Vec::new();
    if let Some(gc) = get("gencost") {
        for (k, (line, r)) in gc.rows.iter().enumerate() {
            if k >= gens.len() {
                // Reactive cost rows are not used.
                break;
            }
            need(r, 4, *line, "gencost")?;
            if r[0] as i64 != 2 {
                return Err(Error::Parse { line: *line, msg: "only polynomial cost model 2 is supported".into() });
            }
            let n = r[3] as usize;
            if n > 3 {
                return Err(Error::Parse { line: *line, msg: format!("cost polynomial of degree {} not supported", n - 1) });
            }
            need(r, 4 + n, *line, "gencost")?;
            let coef = &r[4..4 + n];
            let pick = |deg: usize| if deg < n { coef[n - 1 - deg] } else { 0.0 };
            costs.push(Cost { gen: k, a: pick(2), b: pick(1), c: pick(0) });
        }
    }
    NetworkCase { name, base_mva: base, buses, branches, gens, costs }.normalized()
}

fn push_row(rows: &mut Vec<(usize, Vec<f64>)>, text: &str, line: usize) -> Result<()> {
    let t = text.trim();
    if t.is_empty() {
        return Ok(());
    }
    let mut vals = Vec::new();
    for tok in t.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()) {
        let v = match tok {
            "Inf" | "inf" => f64::INFINITY,
            "-Inf" | "-inf" => f64::NEG_INFINITY,
            _ => tok.parse::<f64>().map_err(|_| Error::Parse { line, msg: format!("malformed matrix row: bad number '{tok}'") })?,
        };
        vals.push(v);
    }
    rows.push((line, vals));
    Ok(())
}

fn need(r: &[f64], n: usize, line: usize, what: &str) -> Result<()> {
    if r.len() < n {
        return Err(Error::Parse { line, msg: format!("malformed {what} row: {} columns, need at least {n}", r.len()) });
    }
    Ok(())
}

fn as_id(v: f64, line: usize) -> Result<u32> {
    if v >= 1.0 && libm::trunc(v) == v && v <= u32::MAX as f64 {
        Ok(v as u32)
    } else {
        Err(Error::Parse { line, msg: format!("bad bus id {v}") })
    }
}
