// SPDX-License-Identifier: Apache-2.0

//! Checks computed straight from complex voltages and the admittance model,
//! plus objective bookkeeping.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::admittance::AdmittanceModel;
use crate::case::NetworkCase;
use crate::error::{Error, Result};
use crate::linalg::sqrt;
use crate::tensor::{evaluate_quantities, GenLimits, NodeModel, StarModel};

/// Per-unit cost coefficients of generator `g` in the `a·g² + 2b·g + c`
/// convention used by the nodal model.
///
/// The file stores `a·P² + b·P + c` with `P = base·g` in MW, so the per-unit
/// quadratic coefficient is `a·base²` and the linear one, halved for the
/// `2b` form, is `b·base/2`. This is the only place the conversion happens.
pub fn cost_coefficients(case: &NetworkCase, g: usize) -> (f64, f64, f64) {
    let (a, b, c) = case.cost_of(g);
    let base = case.base_mva;
    (a * base * base, 0.5 * b * base, c)
}

/// `gᵀdiag(a)g + 2bᵀg` for per-unit real generation `g`; constants excluded.
pub fn central_objective(g: &[f64], case: &NetworkCase) -> f64 {
    g.iter()
        .enumerate()
        .map(|(k, &p)| {
            let (a, b, _) = cost_coefficients(case, k);
            a * p * p + 2.0 * b * p
        })
        .sum()
}

/// Total cost in $/h including the constant terms.
pub fn total_cost(g: &[f64], case: &NetworkCase) -> f64 {
    central_objective(g, case) + (0..g.len()).map(|k| case.cost_of(k).2).sum::<f64>()
}

/// Least-cost split of `total` across generators with costs `a·g² + 2b·g`.
///
/// Outside the combined limits every unit sits on its bound and the excess
/// is shared equally, so the split always sums to `total`.
pub fn dispatch(costs: &[(f64, f64)], limits: &[GenLimits], total: f64) -> Vec<f64> {
    let n = costs.len();
    match n {
        0 => return Vec::new(),
        1 => return vec![total],
        _ => {}
    }
    let lo: f64 = limits.iter().map(|l| l.pmin).sum();
    let hi: f64 = limits.iter().map(|l| l.pmax).sum();
    if total <= lo || total >= hi {
        let edge = total >= hi;
        let base: f64 = if edge { hi } else { lo };
        let share = (total - base) / n as f64;
        return limits.iter().map(|l| if edge { l.pmax } else { l.pmin } + share).collect();
    }
    let at = |lam: f64| -> Vec<f64> {
        costs
            .iter()
            .zip(limits)
            .map(|(&(a, b), l)| {
                let a = a.max(1e-9);
                ((lam - 2.0 * b) / (2.0 * a)).clamp(l.pmin, l.pmax)
            })
            .collect()
    };
    let sum = |lam: f64| at(lam).iter().sum::<f64>();
    let (mut a, mut b) = (-1.0, 1.0);
    while sum(a) > total {
        a *= 2.0;
    }
    while sum(b) < total {
        b *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if sum(mid) < total {
            a = mid;
        } else {
            b = mid;
        }
    }
    let mut g = at(0.5 * (a + b));
    // Put the remaining rounding on the first unit strictly inside its limits.
    let err = total - g.iter().sum::<f64>();
    if let Some(k) = (0..n).find(|&k| g[k] > limits[k].pmin && g[k] < limits[k].pmax) {
        g[k] += err;
    }
    g
}

/// Split reactive output in proportion to each unit's range.
pub fn reactive_split(limits: &[GenLimits], total: f64) -> Vec<f64> {
    let n = limits.len();
    match n {
        0 => return Vec::new(),
        1 => return vec![total],
        _ => {}
    }
    let lo: f64 = limits.iter().map(|l| l.qmin).sum();
    let span: f64 = limits.iter().map(|l| l.qmax - l.qmin).sum();
    if span > 1e-12 {
        let frac = (total - lo) / span;
        limits.iter().map(|l| l.qmin + frac * (l.qmax - l.qmin)).collect()
    } else {
        vec![total / n as f64; n]
    }
}

/// Generation cost of one node given its nodal vector: the real output
/// implied by `x` is dispatched at least cost.
pub fn nodal_objective(node: &NodeModel, x: &[f64]) -> f64 {
    if node.costs.is_empty() {
        return 0.0;
    }
    let q = evaluate_quantities(x, &node.basis);
    let g = dispatch(&node.costs, &node.gen_limits, q.p + node.pd);
    g.iter().zip(&node.costs).map(|(g, (a, b))| a * g * g + 2.0 * b * g).sum()
}

/// `W = Σ f_j(x_j) + ρ_j/2‖x_j − Φ_jᵀy‖² + z_jᵀ(x_j − Φ_jᵀy)`, and `H`, the
/// same sum with `f_j` replaced by the relaxed cost `u_j` of the last solve.
/// Returns `(H, W)`.
pub fn surrogate_and_lagrangian(model: &StarModel, xs: &[Vec<f64>], y: &[f64], zs: &[Vec<f64>], relaxed: &[f64]) -> (f64, f64) {
    let mut f = 0.0;
    let mut g = 0.0;
    for ((node, x), z) in model.nodes.iter().zip(xs).zip(zs) {
        let c = node.phi_t(y);
        f += nodal_objective(node, x);
        for k in 0..x.len() {
            let r = x[k] - c[k];
            g += 0.5 * node.rho[k] * r * r + z[k] * r;
        }
    }
    (relaxed.iter().sum::<f64>() + g, f + g)
}

/// `η = (W − W*)/W*`.
pub fn progress_measure(w: f64, w_star: f64) -> Result<f64> {
    if w_star == 0.0 {
        return Err(Error::Invalid("progress measure needs a nonzero reference value".into()));
    }
    Ok((w - w_star) / w_star)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionComparison {
    /// `‖e^{jθ}v − v_ref‖ / ‖v_ref‖` at the best θ.
    pub distance: f64,
    pub rotation: f64,
    pub worst_bus: usize,
    pub worst_deviation: f64,
}

pub fn phase_align_and_compare(v: &[Complex64], v_ref: &[Complex64]) -> Result<SolutionComparison> {
    if v.len() != v_ref.len() {
        return Err(Error::Dimension("voltage vectors differ in length".into()));
    }
    let inner: Complex64 = v.iter().zip(v_ref).map(|(a, b)| a.conj() * b).sum();
    let rot = if inner.norm() > 0.0 { inner / inner.norm() } else { Complex64::new(1.0, 0.0) };
    let mut num = 0.0;
    let mut den = 0.0;
    let mut worst = (0, 0.0);
    for (i, (a, b)) in v.iter().zip(v_ref).enumerate() {
        let d = (a * rot - b).norm();
        num += d * d;
        den += b.norm_sqr();
        if d > worst.1 {
            worst = (i, d);
        }
    }
    let distance = if den > 0.0 { sqrt(num / den) } else { sqrt(num) };
    Ok(SolutionComparison { distance, rotation: rot.arg(), worst_bus: worst.0, worst_deviation: worst.1 })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeasibilityReport {
    pub max_balance: f64,
    pub mean_balance: f64,
    pub max_flow: f64,
    pub max_gen: f64,
    pub max_voltage: f64,
    /// Bus id, branch index, generator index, bus id of the worst offenders.
    pub worst_balance_bus: Option<u32>,
    pub worst_flow_branch: Option<usize>,
    pub worst_gen: Option<usize>,
    pub worst_voltage_bus: Option<u32>,
}

impl FeasibilityReport {
    pub fn max(&self) -> f64 {
        self.max_balance.max(self.max_flow).max(self.max_gen).max(self.max_voltage)
    }
}

/// Residuals of the network equations and limits at `(v, pg, qg)`.
pub fn feasibility_residuals(v: &[Complex64], pg: &[f64], qg: &[f64], case: &NetworkCase, adm: &AdmittanceModel) -> Result<FeasibilityReport> {
    let nb = case.nb();
    if v.len() != nb || pg.len() != case.ng() || qg.len() != case.ng() {
        return Err(Error::Dimension("voltage or generation vector length".into()));
    }
    let idx = case.bus_index()?;
    let mut gen_at = vec![Complex64::new(0.0, 0.0); nb];
    for (k, g) in case.gens.iter().enumerate() {
        gen_at[idx[&g.bus]] += Complex64::new(pg[k], qg[k]);
    }
    let s = adm.injections(v);
    let mut rep = FeasibilityReport::default();
    let mut total = 0.0;
    for i in 0..nb {
        let b = &case.buses[i];
        let mis = s[i] - gen_at[i] + Complex64::new(b.pd, b.qd);
        let r = mis.re.abs().max(mis.im.abs());
        total += r;
        if r > rep.max_balance || rep.worst_balance_bus.is_none() {
            rep.max_balance = r;
            rep.worst_balance_bus = Some(b.id);
        }
        let vm = v[i].norm();
        let viol = (vm - b.vmax).max(b.vmin - vm).max(0.0);
        if viol > rep.max_voltage {
            rep.max_voltage = viol;
            rep.worst_voltage_bus = Some(b.id);
        }
    }
    rep.mean_balance = total / nb as f64;
    for (l, br) in case.branches.iter().enumerate() {
        if let Some(cap) = br.cap() {
            let (sf, st) = adm.branch_flows(l, v);
            let viol = (sf.norm() - cap).max(st.norm() - cap).max(0.0);
            if viol > rep.max_flow {
                rep.max_flow = viol;
                rep.worst_flow_branch = Some(l);
            }
        }
    }
    for (k, g) in case.gens.iter().enumerate() {
        let viol = (pg[k] - g.pmax).max(g.pmin - pg[k]).max(qg[k] - g.qmax).max(g.qmin - qg[k]).max(0.0);
        if viol > rep.max_gen {
            rep.max_gen = viol;
            rep.worst_gen = Some(k);
        }
    }
    Ok(rep)
}

/// Generator outputs implied by a voltage: each bus's net injection plus
/// demand is split among its units.
pub fn generation_from_voltage(model: &StarModel, case: &NetworkCase, adm: &AdmittanceModel, v: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    let s = adm.injections(v);
    let mut pg = vec![0.0; case.ng()];
    let mut qg = vec![0.0; case.ng()];
    for (j, node) in model.nodes.iter().enumerate() {
        if node.basis.gens.is_empty() {
            continue;
        }
        let p = dispatch(&node.costs, &node.gen_limits, s[j].re + node.pd);
        let q = reactive_split(&node.gen_limits, s[j].im + node.qd);
        for (m, &g) in node.basis.gens.iter().enumerate() {
            pg[g] = p[m];
            qg[g] = q[m];
        }
    }
    (pg, qg)
}
