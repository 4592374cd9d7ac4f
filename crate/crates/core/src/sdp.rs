// SPDX-License-Identifier: Apache-2.0

//! Dense primal-dual interior-point method for small semidefinite programs
//!
//! ```text
//! minimize  tr(C Z)
//! s.t.      tr(A_i Z) = b_i,   tr(B_l Z) <= c_l,   Z ⪰ 0
//! ```
//!
//! Inequalities get nonnegative slacks, so the cone is PSD(m) × R^q_+.
//! Search directions use Nesterov-Todd scaling with a Mehrotra
//! predictor-corrector; the Schur complement is formed from the sparse
//! constraint entries and factored by Cholesky.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::linalg::{dot, eigen_desc, frobenius, norm, sqrt, symmetrize, SymSparse};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SdpProblem {
    pub m: usize,
    pub c: SymSparse,
    pub equalities: Vec<(SymSparse, f64)>,
    pub inequalities: Vec<(SymSparse, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub max_iter: usize,
    /// When progress stalls, the best iterate is still reported as
    /// [`SdpStatus::NearOptimal`] if its residuals and gap are within this.
    pub tol_near: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions { tol_feas: 1e-8, tol_gap: 1e-8, max_iter: 100, tol_near: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    /// Stalled short of the tolerances, with the best iterate accurate to `tol_near`.
    NearOptimal,
    Infeasible,
    MaxIter,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub z: DMatrix<f64>,
    /// Dual slack matrix `C − Σ y_i A_i − Σ w_l B_l`.
    pub s: DMatrix<f64>,
    pub y_eq: Vec<f64>,
    /// Multipliers of the inequalities, `w_l ≤ 0` in the sign used above.
    pub w_ineq: Vec<f64>,
    pub status: SdpStatus,
    pub primal_obj: f64,
    pub dual_obj: f64,
    /// `|pobj − dobj| / (‖C‖_F + |pobj| + |dobj|)`.
    pub gap: f64,
    pub primal_res: f64,
    pub dual_res: f64,
    pub iterations: usize,
}

/// Bound on the dual objective past which the primal is declared infeasible.
const DIVERGE: f64 = 1e12;

struct Scaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    w: DMatrix<f64>,
    lam: Vec<f64>,
    lz: DMatrix<f64>,
    ls: DMatrix<f64>,
}

fn nt_scaling(z: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<Scaling> {
    let lz = Cholesky::new(z.clone())?.l();
    let ls = Cholesky::new(s.clone())?.l();
    let svd = (ls.transpose() * &lz).svd(false, true);
    let vt = svd.v_t?;
    let lam: Vec<f64> = svd.singular_values.iter().copied().collect();
    if lam.iter().any(|&l| !(l > 0.0)) {
        return None;
    }
    let m = z.nrows();
    // G = L_z V Λ^{-1/2};  G⁻¹ = Λ^{1/2} Vᵀ L_z⁻¹.
    let v = vt.transpose();
    let mut g = &lz * &v;
    for k in 0..m {
        let f = 1.0 / sqrt(lam[k]);
        g.column_mut(k).scale_mut(f);
    }
    let lz_inv = lz.clone().solve_lower_triangular(&DMatrix::identity(m, m))?;
    let mut g_inv = vt * lz_inv;
    for k in 0..m {
        let f = sqrt(lam[k]);
        g_inv.row_mut(k).scale_mut(f);
    }
    let mut w = &g * g.transpose();
    symmetrize(&mut w);
    Some(Scaling { g, g_inv, w, lam, lz, ls })
}

/// `⟨A_k, W A_j W⟩` from sparse entries.
fn schur_entry(a: &SymSparse, b: &SymSparse, w: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for &(r, c, v) in &b.entries {
        for &(r2, c2, v2) in &a.entries {
            // (W E_rc W)[r2, c2] for the symmetric unit E_rc.
            let x = if r == c { w[(r2, r)] * w[(r, c2)] } else { w[(r2, r)] * w[(c, c2)] + w[(r2, c)] * w[(r, c2)] };
            let f = if r2 == c2 { 1.0 } else { 2.0 };
            acc += v * v2 * f * x;
        }
    }
    acc
}

/// Largest step in (0, 1] keeping `L⁻¹(X + αΔ)L⁻ᵀ` positive definite.
fn max_step_psd(l: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let m = l.nrows();
    let Some(t) = l.clone().solve_lower_triangular(d) else { return 0.0 };
    let Some(t) = l.clone().solve_lower_triangular(&t.transpose()) else { return 0.0 };
    let mut t = t;
    symmetrize(&mut t);
    let lmin = if m == 0 { 0.0 } else { t.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min) };
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn max_step_lp(x: &[f64], dx: &[f64]) -> f64 {
    x.iter().zip(dx).filter(|(_, d)| **d < 0.0).map(|(x, d)| -x / d).fold(f64::INFINITY, f64::min)
}

/// Solve with the cost normalized to unit Frobenius norm, so that scaling `C`
/// by `s > 0` gives the same iterates and the same `Z`. Objectives and dual
/// variables are reported in the original scale; `gap` and `dual_res` are
/// relative to the normalized cost.
pub fn solve(p: &SdpProblem, opts: &SdpOptions) -> SdpSolution {
    let scale = p.c.frobenius();
    if !(scale > 0.0) || !scale.is_finite() {
        return solve_normalized(p, opts);
    }
    let mut q = p.clone();
    q.c.entries.iter_mut().for_each(|e| e.2 /= scale);
    let mut sol = solve_normalized(&q, opts);
    sol.s *= scale;
    sol.y_eq.iter_mut().for_each(|v| *v *= scale);
    sol.w_ineq.iter_mut().for_each(|v| *v *= scale);
    sol.primal_obj *= scale;
    sol.dual_obj *= scale;
    sol
}

fn solve_normalized(p: &SdpProblem, opts: &SdpOptions) -> SdpSolution {
    let m = p.m;
    let ne = p.equalities.len();
    let ni = p.inequalities.len();
    let nc = ne + ni;
    let cons: Vec<&SymSparse> = p.equalities.iter().map(|e| &e.0).chain(p.inequalities.iter().map(|e| &e.0)).collect();
    let rhs: Vec<f64> = p.equalities.iter().map(|e| e.1).chain(p.inequalities.iter().map(|e| e.1)).collect();
    let c = p.c.to_dense();
    let c_norm = frobenius(&c);
    let b_norm = norm(&rhs);
    let a_norms: Vec<f64> = cons.iter().map(|a| a.frobenius()).collect();

    let sm = sqrt(m as f64);
    let mut xi = 10.0f64.max(sm);
    for (k, an) in a_norms.iter().enumerate() {
        xi = xi.max(sm * (1.0 + rhs[k].abs()) / (1.0 + an));
    }
    let mut eta = 10.0f64.max(sm).max(c_norm);
    for an in &a_norms {
        eta = eta.max(*an);
    }
    let mut z = DMatrix::identity(m, m) * xi;
    let mut s = DMatrix::identity(m, m) * eta;
    let mut sl = vec![xi; ni];
    let mut t = vec![eta; ni];
    let mut y = vec![0.0; nc];

    let sol = |z: &DMatrix<f64>, s: &DMatrix<f64>, y: &[f64], status, pobj, dobj, gap, pr, dr, it| SdpSolution {
        z: z.clone(),
        s: s.clone(),
        y_eq: y[..ne].to_vec(),
        w_ineq: y[ne..].to_vec(),
        status,
        primal_obj: pobj,
        dual_obj: dobj,
        gap,
        primal_res: pr,
        dual_res: dr,
        iterations: it,
    };

    let mut last = (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    // Best iterate seen so far by max(pres, dres, gap), and its merit history.
    let mut best: Option<SdpSolution> = None;
    let mut best_merit = f64::INFINITY;
    let mut history: Vec<f64> = Vec::new();
    let give_up = |best: Option<SdpSolution>, fallback: SdpSolution| match best {
        Some(mut b) if b.primal_res.max(b.dual_res).max(b.gap) <= opts.tol_near => {
            b.status = SdpStatus::NearOptimal;
            b
        }
        _ => fallback,
    };
    for it in 0..=opts.max_iter {
        // Residuals.
        let rp: Vec<f64> = (0..nc).map(|k| rhs[k] - cons[k].inner(&z) - if k >= ne { sl[k - ne] } else { 0.0 }).collect();
        let mut rd = c.clone() - &s;
        for k in 0..nc {
            cons[k].add_to(&mut rd, -y[k]);
        }
        let rt: Vec<f64> = (0..ni).map(|l| -y[ne + l] - t[l]).collect();
        let pobj = c.dot(&z);
        let dobj = dot(&rhs, &y);
        let pres = norm(&rp) / (1.0 + b_norm);
        let (fd, ft) = (frobenius(&rd), norm(&rt));
        let dres = sqrt(fd * fd + ft * ft) / (1.0 + c_norm);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let compl = z.dot(&s) + dot(&sl, &t);
        debug_assert!(compl > 0.0, "complementarity must stay positive at interior iterates");
        last = (pobj, dobj, gap, pres, dres);
        if pres <= opts.tol_feas && dres <= opts.tol_feas && gap <= opts.tol_gap {
            return sol(&z, &s, &y, SdpStatus::Optimal, pobj, dobj, gap, pres, dres, it);
        }
        let merit = pres.max(dres).max(gap);
        if merit < best_merit {
            best_merit = merit;
            best = Some(sol(&z, &s, &y, SdpStatus::MaxIter, pobj, dobj, gap, pres, dres, it));
        }
        history.push(best_merit);
        // No tenfold improvement over eight iterations.
        if history.len() > 8 && best_merit > 0.1 * history[history.len() - 9] && best_merit <= opts.tol_near {
            return give_up(best, sol(&z, &s, &y, SdpStatus::NumericalFailure, pobj, dobj, gap, pres, dres, it));
        }
        if dobj > DIVERGE * (1.0 + pobj.abs().min(DIVERGE)) || !dobj.is_finite() {
            return sol(&z, &s, &y, SdpStatus::Infeasible, pobj, dobj, gap, pres, dres, it);
        }
        if pobj < -DIVERGE || !pobj.is_finite() {
            return sol(&z, &s, &y, SdpStatus::NumericalFailure, pobj, dobj, gap, pres, dres, it);
        }
        if it == opts.max_iter {
            break;
        }
        let mu = compl / (m + ni) as f64;

        let Some(sc) = nt_scaling(&z, &s) else {
            return give_up(best, sol(&z, &s, &y, SdpStatus::NumericalFailure, pobj, dobj, gap, pres, dres, it));
        };
        let dlp: Vec<f64> = sl.iter().zip(&t).map(|(a, b)| a / b).collect();

        // Schur complement.
        let mut schur = DMatrix::zeros(nc, nc);
        for k in 0..nc {
            for j in k..nc {
                let v = schur_entry(cons[k], cons[j], &sc.w);
                schur[(k, j)] = v;
                schur[(j, k)] = v;
            }
        }
        for l in 0..ni {
            schur[(ne + l, ne + l)] += dlp[l];
        }
        let chol = match Cholesky::new(schur.clone()) {
            Some(ch) => ch,
            None => {
                let bump = 1e-13 * (0..nc).map(|k| schur[(k, k)]).fold(1.0f64, f64::max);
                let mut reg = schur;
                for k in 0..nc {
                    reg[(k, k)] += bump;
                }
                match Cholesky::new(reg) {
                    Some(ch) => ch,
                    None => return give_up(best, sol(&z, &s, &y, SdpStatus::NumericalFailure, pobj, dobj, gap, pres, dres, it)),
                }
            }
        };
        let wrdw = {
            let mut x = &sc.w * &rd * &sc.w;
            symmetrize(&mut x);
            x
        };

        // Direction for a given complementarity target `h` (scaled space) and LP target `hl`.
        let direction = |h: &DMatrix<f64>, hl: &[f64]| {
            let mut rc = DMatrix::zeros(m, m);
            for i in 0..m {
                for j in 0..m {
                    rc[(i, j)] = 2.0 * h[(i, j)] / (sc.lam[i] + sc.lam[j]);
                }
            }
            let mut grg = &sc.g * &rc * sc.g.transpose();
            symmetrize(&mut grg);
            let mut r = DVector::zeros(nc);
            for k in 0..nc {
                r[k] = rp[k] - cons[k].inner(&grg) + cons[k].inner(&wrdw);
                if k >= ne {
                    let l = k - ne;
                    r[k] -= hl[l] / t[l] - dlp[l] * rt[l];
                }
            }
            let dy = chol.solve(&r);
            let mut ds = rd.clone();
            for k in 0..nc {
                cons[k].add_to(&mut ds, -dy[k]);
            }
            let mut dz = grg - &sc.w * &ds * &sc.w;
            symmetrize(&mut dz);
            let dt: Vec<f64> = (0..ni).map(|l| rt[l] - dy[ne + l]).collect();
            let dsl: Vec<f64> = (0..ni).map(|l| hl[l] / t[l] - dlp[l] * dt[l]).collect();
            (dz, ds, dy, dsl, dt)
        };

        let steps = |dz: &DMatrix<f64>, ds: &DMatrix<f64>, dsl: &[f64], dt: &[f64]| {
            let ap = max_step_psd(&sc.lz, dz).min(max_step_lp(&sl, dsl));
            let ad = max_step_psd(&sc.ls, ds).min(max_step_lp(&t, dt));
            (ap, ad)
        };

        // Predictor.
        let lam2 = DMatrix::from_diagonal(&DVector::from_iterator(m, sc.lam.iter().map(|l| -l * l)));
        let hl_aff: Vec<f64> = (0..ni).map(|l| -sl[l] * t[l]).collect();
        let (dz_a, ds_a, _, dsl_a, dt_a) = direction(&lam2, &hl_aff);
        let (ap, ad) = steps(&dz_a, &ds_a, &dsl_a, &dt_a);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let compl_aff = (&z + &dz_a * ap).dot(&(&s + &ds_a * ad)) + (0..ni).map(|l| (sl[l] + ap * dsl_a[l]) * (t[l] + ad * dt_a[l])).sum::<f64>();
        let ratio = (compl_aff / compl).max(0.0);
        let sigma = (ratio * ratio * ratio).min(1.0);

        // Corrector: H = σμI − Λ² − (ΔZ̃ ΔS̃ + ΔS̃ ΔZ̃)/2.
        let dzt = &sc.g_inv * &dz_a * sc.g_inv.transpose();
        let dst = sc.g.transpose() * &ds_a * &sc.g;
        let prod = &dzt * &dst;
        let mut h = lam2;
        for i in 0..m {
            h[(i, i)] += sigma * mu;
            for j in 0..m {
                h[(i, j)] -= 0.5 * (prod[(i, j)] + prod[(j, i)]);
            }
        }
        let hl: Vec<f64> = (0..ni).map(|l| sigma * mu - sl[l] * t[l] - dsl_a[l] * dt_a[l]).collect();
        let (dz, ds, dy, dsl, dt) = direction(&h, &hl);
        let (ap, ad) = steps(&dz, &ds, &dsl, &dt);
        let gamma = if pres < 1e-3 && dres < 1e-3 { 0.98 } else { 0.95 };
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            return give_up(best, sol(&z, &s, &y, SdpStatus::NumericalFailure, pobj, dobj, gap, pres, dres, it));
        }
        z += &dz * ap;
        symmetrize(&mut z);
        for l in 0..ni {
            sl[l] += ap * dsl[l];
        }
        s += &ds * ad;
        symmetrize(&mut s);
        for k in 0..nc {
            y[k] += ad * dy[k];
        }
        for l in 0..ni {
            t[l] += ad * dt[l];
        }
    }
    let (pobj, dobj, gap, pres, dres) = last;
    give_up(best, sol(&z, &s, &y, SdpStatus::MaxIter, pobj, dobj, gap, pres, dres, opts.max_iter))
}

/// Full spectrum of a symmetric matrix, descending, with eigenvectors as
/// columns. Each eigenvector has its largest-magnitude entry positive.
pub fn leading_decomposition(z: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (vals, mut vecs) = eigen_desc(z);
    for k in 0..vecs.ncols() {
        let mut col: Vec<f64> = vecs.column(k).iter().copied().collect();
        crate::linalg::fix_sign(&mut col);
        vecs.set_column(k, &DVector::from_vec(col));
    }
    (vals, vecs)
}
