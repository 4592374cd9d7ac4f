// SPDX-License-Identifier: Apache-2.0

//! Drives the engine one iteration at a time and measures the per-iteration
//! invariants of the central update.

use drohs_core::admittance::build_admittance;
use drohs_core::engine::{converged, finish, Engine, EngineConfig, RunResult, RunStatus, Sequential};
use drohs_core::linalg::{dot, norm};
use drohs_core::nodal::CaseTag;
use drohs_core::tensor::{build_star_model, StarModel};
use drohs_core::NetworkCase;

#[derive(Debug, Clone, Default)]
pub struct Worst {
    /// max ‖Φz‖ / ‖z‖.
    pub phi_z: f64,
    /// max_j ‖x_j − Φ_jᵀy‖.
    pub consistency: f64,
    /// max |Δzᵀ Δx| / (‖Δz‖‖Δx‖).
    pub orthogonality: f64,
    /// Iterations where ‖Δx‖ exceeded the bound built from the accepted candidates.
    pub chain_violations: usize,
    /// Largest ratio ‖Δx‖ / bound seen.
    pub chain_ratio: f64,
    /// Iterations with H^{k+1} > H^k + C·τ^k.
    pub descent_violations: usize,
    /// Largest `H^{k+1} − H^k − C·τ^k` seen, and the largest `|H|`.
    pub descent_excess: f64,
    pub h_max: f64,
    pub iterations: usize,
}

fn global_phi_z(model: &StarModel, zs: &[Vec<f64>]) -> f64 {
    let mut out = vec![0.0; model.dim_y];
    for (node, z) in model.nodes.iter().zip(zs) {
        node.phi_add(z, &mut out);
    }
    let zn = norm(&zs.concat());
    norm(&out) / zn.max(f64::MIN_POSITIVE)
}

pub fn instrumented_run(case: &NetworkCase, config: &EngineConfig) -> (Worst, RunResult) {
    let adm = build_admittance(case).unwrap();
    let model = build_star_model(case, &adm, config.model_config()).unwrap();
    let mut eng = Engine::initialize(&model, config.clone()).unwrap();
    let rho = model.rho_diag();
    let rho_ratio = rho.iter().cloned().fold(0.0, f64::max) / rho.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut w = Worst { phi_z: global_phi_z(&model, &eng.zs()), ..Worst::default() };
    let mut h_bound: Option<(f64, f64)> = None;
    let mut status = RunStatus::MaxIter;

    while eng.central.k < config.max_iter {
        let x_old = eng.xs().concat();
        let z_old = eng.zs().concat();
        let delta = eng.central.delta;
        let tau = config.tau0 / (eng.central.k + 1) as f64;
        let x_per_node = eng.xs();
        let row = eng.iterate_once(&Sequential).clone();
        w.iterations += 1;

        let xs = eng.xs();
        let zs = eng.zs();
        w.phi_z = w.phi_z.max(global_phi_z(&model, &zs));
        for (j, node) in model.nodes.iter().enumerate() {
            let target = node.phi_t(&eng.central.y);
            let d: Vec<f64> = xs[j].iter().zip(&target).map(|(a, b)| a - b).collect();
            w.consistency = w.consistency.max(norm(&d));
        }

        let dx: Vec<f64> = xs.concat().iter().zip(&x_old).map(|(a, b)| a - b).collect();
        let dz: Vec<f64> = zs.concat().iter().zip(&z_old).map(|(a, b)| a - b).collect();
        let scale = norm(&dx) * norm(&dz);
        if scale > 0.0 {
            w.orthogonality = w.orthogonality.max(dot(&dx, &dz).abs() / scale);
        }

        let mut cand2 = 0.0;
        for (j, st) in eng.last_steps.iter().enumerate() {
            if st.tag != CaseTag::Rejected {
                let zeta = st.zeta.as_ref().expect("accepted step carries a candidate");
                cand2 += zeta.iter().zip(&x_per_node[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            }
        }
        let bound = delta * (1.0 + tau) * rho_ratio.sqrt() * cand2.sqrt();
        let moved = norm(&dx);
        if moved > 0.0 {
            let ratio = moved / bound.max(f64::MIN_POSITIVE);
            w.chain_ratio = w.chain_ratio.max(ratio);
            if moved > bound * (1.0 + 1e-12) + 1e-14 {
                w.chain_violations += 1;
            }
        }

        w.h_max = w.h_max.max(row.h.abs());
        match h_bound {
            None => h_bound = Some((row.h, 10.0 * row.h.abs())),
            Some((prev, c)) => {
                let excess = row.h - prev - c * tau;
                w.descent_excess = w.descent_excess.max(excess);
                if excess > 0.0 {
                    w.descent_violations += 1;
                }
                h_bound = Some((row.h, c));
            }
        }

        if converged(&eng.trace, config.tol) {
            status = RunStatus::Converged;
            break;
        }
    }
    let result = finish(&eng, case, &adm, status);
    (w, result)
}
