// SPDX-License-Identifier: Apache-2.0

//! Workflows behind the command line: run, model check, comparison, bench.

use std::io::Write;
use std::time::Instant;

use anyhow::Result;
use drohs_core::admittance::{build_admittance, AdmittanceModel};
use drohs_core::diagnostics::{feasibility_residuals, phase_align_and_compare, FeasibilityReport, SolutionComparison};
use drohs_core::engine::{converged, finish, Engine, EngineConfig, Executor, RunResult, RunStatus};
use drohs_core::tensor::{build_star_model, local_quadratic, low_rank_decompose, numerical_rank, Kind, StarModel};
use drohs_core::NetworkCase;

use crate::io::{SolutionFile, TraceWriter};

pub struct RunOutput {
    pub result: RunResult,
    pub feasibility: FeasibilityReport,
    pub n_var_max: usize,
}

/// Build the model and iterate to termination, streaming trace rows.
pub fn run_case<E: Executor, W: Write>(
    case: &NetworkCase,
    config: &EngineConfig,
    exec: &E,
    mut trace: Option<&mut TraceWriter<W>>,
) -> Result<RunOutput> {
    let adm = build_admittance(case)?;
    let model = build_star_model(case, &adm, config.model_config())?;
    let mut eng = Engine::initialize(&model, config.clone())?;
    let mut status = RunStatus::MaxIter;
    while eng.central.k < config.max_iter {
        let row = eng.iterate_once(exec);
        log::debug!("k={} W={:.6e} H={:.6e} dx={:.3e} dz={:.3e}", row.k, row.w, row.h, row.dx, row.dz);
        if let Some(t) = trace.as_deref_mut() {
            t.row(row)?;
        }
        if converged(&eng.trace, config.tol) {
            status = RunStatus::Converged;
            break;
        }
    }
    let result = finish(&eng, case, &adm, status);
    let feasibility = feasibility_residuals(&result.voltages, &result.pg, &result.qg, case, &adm)?;
    Ok(RunOutput { result, feasibility, n_var_max: model.n_var_max() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantityCheck {
    pub what: String,
    pub expected: usize,
    pub found: usize,
    /// Relative Frobenius error of the stored factor (NaN if it failed).
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeCheck {
    pub id: u32,
    pub nl: usize,
    pub ng: usize,
    pub x_len: usize,
    pub mu_len: usize,
    pub quantities: Vec<QuantityCheck>,
}

impl NodeCheck {
    pub fn ok(&self) -> bool {
        self.x_len == 8 * self.nl + 10 && self.quantities.iter().all(|q| q.found == q.expected)
    }
}

/// Rank and reconstruction checks for every quantity of every bus. Ranks
/// are taken on the local support, where all nonzero eigenvalues live.
pub fn check_model(case: &NetworkCase) -> Result<Vec<NodeCheck>> {
    let adm = build_admittance(case)?;
    let mut out = Vec::with_capacity(case.nb());
    for j in 0..case.nb() {
        let mut items: Vec<(Kind, Option<usize>)> = vec![(Kind::PInj, None), (Kind::QInj, None)];
        let lines: Vec<usize> = (0..adm.branches.len()).filter(|&l| adm.branches[l].from == j || adm.branches[l].to == j).collect();
        for &l in &lines {
            items.push((Kind::PFlow, Some(l)));
            items.push((Kind::QFlow, Some(l)));
        }
        items.push((Kind::Vmag, None));
        let mut quantities = Vec::new();
        for (kind, line) in items {
            let loc = local_quadratic(&adm, kind, j, line)?;
            let found = numerical_rank(&loc.block);
            let residual = match low_rank_decompose(&loc.block, kind.rank()) {
                Ok(lr) => {
                    let sig = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lr.signature.clone()));
                    let rec = &lr.phi * sig * lr.phi.transpose();
                    (rec - &loc.block).norm() / loc.block.norm()
                }
                Err(_) => f64::NAN,
            };
            let what = match line {
                Some(l) => format!("{} on branch {}", kind.name(), l),
                None => kind.name().to_string(),
            };
            quantities.push(QuantityCheck { what, expected: kind.rank(), found, residual });
        }
        let nl = lines.len();
        let ng = case.gens.iter().filter(|g| g.bus == case.buses[j].id).count();
        out.push(NodeCheck { id: case.buses[j].id, nl, ng, x_len: 8 * nl + 10, mu_len: 10 * nl + 2 * ng + 11, quantities });
    }
    Ok(out)
}

/// Model build only, for callers that need the star model itself.
pub fn build_model(case: &NetworkCase, config: &EngineConfig) -> Result<(AdmittanceModel, StarModel)> {
    let adm = build_admittance(case)?;
    let model = build_star_model(case, &adm, config.model_config())?;
    Ok((adm, model))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub voltage: SolutionComparison,
    /// `|f − f_ref| / |f_ref|`.
    pub objective_gap: f64,
}

impl Comparison {
    pub fn pass(&self, tol: f64) -> bool {
        self.voltage.distance <= tol && self.objective_gap <= tol
    }
}

pub fn compare(result: &SolutionFile, reference: &SolutionFile) -> Result<Comparison> {
    if result.bus_ids != reference.bus_ids {
        anyhow::bail!("schema mismatch: the two files list different buses");
    }
    let voltage = phase_align_and_compare(&result.voltages(), &reference.voltages())?;
    let objective_gap = (result.objective - reference.objective).abs() / reference.objective.abs().max(1e-12);
    Ok(Comparison { voltage, objective_gap })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub case: String,
    pub nb: usize,
    pub n_var_max: usize,
    pub n_iter: usize,
    pub max_node_ms: f64,
    pub total_ms: f64,
}

pub const BENCH_HEADER: &str = "case,Nb,n_var_max,N_iter,max_node_ms,total_ms";

impl BenchRow {
    pub fn csv(&self) -> String {
        format!("{},{},{},{},{:.3},{:.3}", self.case, self.nb, self.n_var_max, self.n_iter, self.max_node_ms, self.total_ms)
    }
}

/// One timed run; `max_node_ms` is the largest single nodal solve time seen.
pub fn bench_case<E: Executor>(name: &str, case: &NetworkCase, config: &EngineConfig, exec: &E) -> Result<BenchRow> {
    let t = Instant::now();
    let out = run_case::<E, std::io::Sink>(case, config, exec, None)?;
    let total_ms = t.elapsed().as_secs_f64() * 1e3;
    let max_node_ms = out.result.trace.iter().filter_map(|r| r.max_node_ms).fold(0.0, f64::max);
    Ok(BenchRow { case: name.to_string(), nb: case.nb(), n_var_max: out.n_var_max, n_iter: out.result.iterations, max_node_ms, total_ms })
}
