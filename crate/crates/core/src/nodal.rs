// SPDX-License-Identifier: Apache-2.0

//! One node's lifted subproblem and the acceptance test on its solution.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::diagnostics::{dispatch, reactive_split};
use crate::linalg::{frobenius, norm, sqrt, SymSparse};
use crate::sdp::{leading_decomposition, solve, SdpOptions, SdpProblem, SdpSolution, SdpStatus};
use crate::tensor::{evaluate_quantities, StarModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseTag {
    Exact,
    Projected,
    Rejected,
}

impl CaseTag {
    pub fn letter(self) -> char {
        match self {
            CaseTag::Exact => 'E',
            CaseTag::Projected => 'P',
            CaseTag::Rejected => 'R',
        }
    }
}

/// `λ₂ ≤ RANK1_TOL·λ₁` counts as an exact rank-one solution.
pub const RANK1_TOL: f64 = 1e-9;
/// Smallest |homogenization entry| of the leading eigenvector that is rescaled.
pub const END_GUARD: f64 = 0.1;
/// Generator limits narrower than this are treated as fixed outputs.
const FIXED_OUTPUT: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct NodalSubproblem {
    pub node: usize,
    pub sdp: SdpProblem,
    pub end: usize,
    pub x_len: usize,
    /// Part of the objective that only regularizes the auxiliary coordinates.
    pub reg: SymSparse,
    /// `Φ_jᵀy` at assembly.
    pub center: Vec<f64>,
}

impl NodalSubproblem {
    /// Objective value at `z` without the regularizer.
    pub fn value(&self, z: &DMatrix<f64>) -> f64 {
        self.sdp.c.inner(z) - self.reg.inner(z)
    }
}

/// Build the lifted subproblem of node `j` at central vector `y` and multiplier `z`.
///
/// The objective packs the generation cost, `ρ/2‖x‖²` on the diagonal of the
/// x-block, the linear penalty part `(z − ρ∘Φᵀy)ᵀx` against the
/// homogenization column and the constant `ρ/2‖Φᵀy‖² − zᵀΦᵀy` in the corner,
/// so at a rank-one `Z = μμᵀ` it equals `f_j(x) + ρ/2‖x − Φᵀy‖² + zᵀ(x − Φᵀy)`.
///
/// `kappa > 0` adds `κ(μ_i − c_i)²` on the flow and generation coordinates,
/// centered at the values implied by `Φᵀy`. Those coordinates have no other
/// curvature, and without the term the solver returns the analytic center of
/// a flat optimal face instead of a rank-one point.
pub fn lift_to_sdp(model: &StarModel, j: usize, y: &[f64], z: &[f64], kappa: f64) -> NodalSubproblem {
    let node = &model.nodes[j];
    let d = node.dims();
    let n = d.mu_len();
    let e = d.end();
    let center = node.phi_t(y);

    let mut c = node.m_ob.clone();
    let mut constant = 0.0;
    for k in 0..d.x_len() {
        let r = node.rho[k];
        c.add(k, k, 0.5 * r);
        c.add(k, e, 0.5 * (z[k] - r * center[k]));
        constant += 0.5 * r * center[k] * center[k] - z[k] * center[k];
    }

    let mut reg = SymSparse::new(n);
    if kappa > 0.0 {
        let q = evaluate_quantities(&center, &node.basis);
        let gp = dispatch(&node.costs, &node.gen_limits, q.p + node.pd);
        let gq = reactive_split(&node.gen_limits, q.q + node.qd);
        let mut prox = |coord: usize, at: f64| {
            reg.add(coord, coord, kappa);
            reg.add(coord, e, -kappa * at);
            reg.add(e, e, kappa * at * at);
        };
        for l in 0..d.nl {
            prox(d.f(l), q.f[l]);
            prox(d.fbar(l), q.fbar[l]);
        }
        for m in 0..d.ng {
            prox(d.gp(m), gp[m]);
            prox(d.gq(m), gq[m]);
        }
    }
    for &ent in &reg.entries {
        c.entries.push(ent);
    }
    c.add(e, e, constant);

    let pis = &node.pis;
    let mut eqs = vec![(pis.pi_s.clone(), -node.pd), (pis.pi_sbar.clone(), -node.qd)];
    for l in 0..d.nl {
        eqs.push((pis.pi_f[l].clone(), 0.0));
        eqs.push((pis.pi_fbar[l].clone(), 0.0));
    }
    let mut corner = SymSparse::new(n);
    corner.add(e, e, 1.0);
    eqs.push((corner, 1.0));

    let mut ineqs = Vec::new();
    for (l, le) in node.basis.lines.iter().enumerate() {
        if let Some(cap) = le.cap {
            ineqs.push((pis.pi_flow_max[l].clone(), cap * cap));
        }
    }
    for (m, g) in node.gen_limits.iter().enumerate() {
        for (pi, lo, hi, coord) in [(&pis.pi_gp[m], g.pmin, g.pmax, d.gp(m)), (&pis.pi_gq[m], g.qmin, g.qmax, d.gq(m))] {
            if hi - lo < FIXED_OUTPUT {
                let mut fix = SymSparse::new(n);
                fix.add(coord, e, 0.5);
                eqs.push((fix, 0.5 * (hi + lo)));
            } else {
                ineqs.push((pi.clone(), -hi * lo));
            }
        }
    }
    ineqs.push((pis.pi_e.clone(), node.emax));
    let mut neg_e = pis.pi_e.clone();
    neg_e.entries.iter_mut().for_each(|t| t.2 = -t.2);
    ineqs.push((neg_e, -node.emin));

    NodalSubproblem { node: j, sdp: SdpProblem { m: n, c, equalities: eqs, inequalities: ineqs }, end: e, x_len: d.x_len(), reg, center }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Rescaled leading eigenvector over all of `μ_j`; `None` when it cannot be normalized.
    pub mu: Option<Vec<f64>>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub eps: f64,
}

impl Candidate {
    pub fn zeta(&self, x_len: usize) -> Option<&[f64]> {
        self.mu.as_deref().map(|m| &m[..x_len])
    }
}

/// `ε = τ[√(‖x‖² + ‖Z − x̄x̄ᵀ‖_F) − ‖x‖]` with `x̄` the zero-padded `x`.
pub fn epsilon(z: &DMatrix<f64>, x: &[f64], tau: f64) -> f64 {
    let mut r = z.clone();
    for a in 0..x.len() {
        for b in 0..x.len() {
            r[(a, b)] -= x[a] * x[b];
        }
    }
    let nx = norm(x);
    tau * (sqrt(nx * nx + frobenius(&r)) - nx)
}

pub fn candidate_and_epsilon(z: &DMatrix<f64>, x: &[f64], end: usize, tau: f64) -> Candidate {
    let (vals, vecs) = leading_decomposition(z);
    let lambda1 = vals[0];
    let lambda2 = if vals.len() > 1 { vals[1].max(0.0) } else { 0.0 };
    let eps = epsilon(z, x, tau);
    if !(lambda1 > 0.0) {
        return Candidate { mu: None, lambda1, lambda2, eps };
    }
    let s = sqrt(lambda1);
    let lead: Vec<f64> = vecs.column(0).iter().map(|u| u * s).collect();
    let h = lead[end];
    let mu = if h.abs() > END_GUARD { Some(lead.iter().map(|v| v / h).collect()) } else { None };
    Candidate { mu, lambda1, lambda2, eps }
}

/// Acceptance test on the two leading eigenvalues: returns the accepted proposal and its tag.
pub fn classify(lambda1: f64, lambda2: f64, eps: f64, zeta: Option<&[f64]>, x: &[f64]) -> (Vec<f64>, CaseTag) {
    match zeta {
        Some(zv) if lambda1 > 0.0 && lambda2 <= RANK1_TOL * lambda1 => (zv.to_vec(), CaseTag::Exact),
        Some(zv) if lambda1 > 0.0 && lambda2 <= 2.0 * lambda1 * eps => (zv.to_vec(), CaseTag::Projected),
        _ => (x.to_vec(), CaseTag::Rejected),
    }
}

/// `x̂ = x + Δ(ζ̂ − x)`.
pub fn blend(x: &[f64], zeta_hat: &[f64], delta: f64) -> Vec<f64> {
    x.iter().zip(zeta_hat).map(|(a, b)| a + delta * (b - a)).collect()
}

/// Everything a node reports after one local step.
#[derive(Debug, Clone)]
pub struct NodeStep {
    pub x_hat: Vec<f64>,
    pub zeta_hat: Vec<f64>,
    /// Extracted candidate restricted to `x_j` (before acceptance), if any.
    pub zeta: Option<Vec<f64>>,
    pub tag: CaseTag,
    pub status: SdpStatus,
    pub lambda1: f64,
    pub lambda2: f64,
    pub eps: f64,
    /// Subproblem optimal value without the regularizer.
    pub value: f64,
    /// Relaxed generation cost `tr(M_ob Z)` of the solution.
    pub cost: f64,
    pub ipm_iters: usize,
}

pub fn solve_node(
    model: &StarModel,
    j: usize,
    y: &[f64],
    z: &[f64],
    x: &[f64],
    tau: f64,
    delta: f64,
    kappa: f64,
    opts: &SdpOptions,
) -> (NodeStep, SdpSolution, NodalSubproblem) {
    let sub = lift_to_sdp(model, j, y, z, kappa);
    let sol = solve(&sub.sdp, opts);
    let value = sub.value(&sol.z);
    let cost = model.nodes[j].m_ob.inner(&sol.z);
    let step = if matches!(sol.status, SdpStatus::Optimal | SdpStatus::NearOptimal) {
        let cand = candidate_and_epsilon(&sol.z, x, sub.end, tau);
        let zeta = cand.zeta(sub.x_len).map(|s| s.to_vec());
        let (zeta_hat, tag) = classify(cand.lambda1, cand.lambda2, cand.eps, zeta.as_deref(), x);
        let x_hat = if tag == CaseTag::Rejected { x.to_vec() } else { blend(x, &zeta_hat, delta) };
        NodeStep {
            x_hat,
            zeta_hat,
            zeta,
            tag,
            status: sol.status,
            lambda1: cand.lambda1,
            lambda2: cand.lambda2,
            eps: cand.eps,
            value,
            cost,
            ipm_iters: sol.iterations,
        }
    } else {
        NodeStep {
            x_hat: x.to_vec(),
            zeta_hat: x.to_vec(),
            zeta: None,
            tag: CaseTag::Rejected,
            status: sol.status,
            lambda1: f64::NAN,
            lambda2: f64::NAN,
            eps: f64::NAN,
            value,
            cost,
            ipm_iters: sol.iterations,
        }
    };
    (step, sol, sub)
}
