// SPDX-License-Identifier: Apache-2.0

//! Multipliers that make a known optimum stationary for every node problem.
//!
//! At an optimum the Lagrangian gradient is `Σ λ_p ∇P + λ_q ∇Q + μ ∇E = ∇cost`.
//! In nodal coordinates `∇_α (αᵀĪα) = 2Īα`, so the node multiplier that
//! cancels the local gradient is `z_α = −2λ_p Īα` (same for β and ω).

use drohs::io::SolutionFile;
use drohs_core::engine::Engine;
use drohs_core::tensor::{symmetric_quadratic_matrix, Kind};
use drohs_core::{AdmittanceModel, NetworkCase};
use nalgebra::{DMatrix, DVector};

pub struct Fit {
    /// Relative residual of the least-squares multiplier fit.
    pub residual: f64,
    /// ‖Σ_j Φ_j z_j‖ / ‖z‖.
    pub phi_z: f64,
}

/// Replace the engine's multipliers by the ones implied by `reference`.
/// Generator buses take the marginal cost as their real-power price; the
/// remaining prices and the multipliers of voltages at their upper bound are
/// fitted by least squares.
pub fn set_optimal_multipliers(eng: &mut Engine<'_>, case: &NetworkCase, adm: &AdmittanceModel, reference: &SolutionFile) -> Fit {
    let nb = case.nb();
    let mut v = reference.v_re.clone();
    v.extend(&reference.v_im);
    let v = DVector::from_vec(v);
    let grad = |k: Kind, j: usize| 2.0 * symmetric_quadratic_matrix(adm, k, j, None).unwrap() * &v;
    let model = eng.model;
    let mut rhs = DVector::zeros(2 * nb);
    let mut cols: Vec<(usize, usize, DVector<f64>)> = Vec::new();
    let mut lam = vec![[0.0f64; 3]; nb];
    for j in 0..nb {
        let node = &model.nodes[j];
        if let Some(&(a, b)) = node.costs.first() {
            let g = reference.pg[node.basis.gens[0]];
            lam[j][0] = 2.0 * a * g + 2.0 * b;
            rhs -= grad(Kind::PInj, j) * lam[j][0];
        } else {
            cols.push((j, 0, grad(Kind::PInj, j)));
            cols.push((j, 1, grad(Kind::QInj, j)));
        }
        let vm = (v[j] * v[j] + v[j + nb] * v[j + nb]).sqrt();
        if vm > case.buses[j].vmax - 1e-6 {
            cols.push((j, 2, grad(Kind::Vmag, j)));
        }
    }
    let mut a = DMatrix::zeros(2 * nb, cols.len());
    for (c, col) in cols.iter().enumerate() {
        a.set_column(c, &col.2);
    }
    let sol = a.clone().svd(true, true).solve(&rhs, 1e-12).unwrap();
    let residual = (&a * &sol - &rhs).norm() / rhs.norm();
    for (c, col) in cols.iter().enumerate() {
        lam[col.0][col.1] = sol[c];
    }

    let mut acc = vec![0.0; model.dim_y];
    let mut zn = 0.0;
    for j in 0..nb {
        let node = &model.nodes[j];
        let d = node.dims();
        let x = &eng.nodes[j].x;
        let sig = &node.basis.signature;
        let mut z = vec![0.0; d.x_len()];
        for k in 0..4 {
            z[d.alpha() + k] = -2.0 * lam[j][0] * sig[d.alpha() + k] * x[d.alpha() + k];
            z[d.beta() + k] = -2.0 * lam[j][1] * sig[d.beta() + k] * x[d.beta() + k];
        }
        for k in 0..2 {
            z[d.omega() + k] = -2.0 * lam[j][2] * x[d.omega() + k];
        }
        node.phi_add(&z, &mut acc);
        zn += z.iter().map(|t| t * t).sum::<f64>();
        eng.nodes[j].z = z;
    }
    let phi_z = acc.iter().map(|t| t * t).sum::<f64>().sqrt() / zn.sqrt();
    Fit { residual, phi_z }
}
