// SPDX-License-Identifier: Apache-2.0

//! Star-network nodal model.
//!
//! With `v = (v_x; v_y)` the real coordinates of the bus voltages, every
//! injection, branch-end flow and voltage magnitude at a bus is a quadratic
//! form `vᵀMv`. Each `M` has rank 4 (rank 2 for magnitudes) and is factored
//! as `Φ·diag(sig)·Φᵀ`, so the quantity becomes `xᵀ·diag(sig)·x` with the
//! nodal variable `x = Φᵀv`. Node `j` stacks
//!
//! ```text
//! x_j = [α(4), β(4), γ_1..γ_nl (4 each), δ_1..δ_nl (4 each), ω(2)]
//! μ_j = [x_j, f_1..f_nl, f̄_1..f̄_nl, gp_1..gp_ng, gq_1..gq_ng, 1]
//! ```
//!
//! where α/β carry real/reactive injection, γ/δ real/reactive flow out of
//! each incident branch end, and ω the voltage coordinates.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::admittance::AdmittanceModel;
use crate::case::NetworkCase;
use crate::diagnostics::cost_coefficients;
use crate::error::{Error, Result};
use crate::linalg::{eigen_desc, fix_sign, sqrt, SymSparse};

/// Numerical rank cutoff relative to the largest |eigenvalue|.
pub const RANK_TOL: f64 = 1e-9;
/// Eigenvalues closer than this (relative) are treated as one eigenspace.
const CLUSTER_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    PInj,
    QInj,
    PFlow,
    QFlow,
    Vmag,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::PInj => "real injection",
            Kind::QInj => "reactive injection",
            Kind::PFlow => "real flow",
            Kind::QFlow => "reactive flow",
            Kind::Vmag => "voltage magnitude",
        }
    }

    pub fn rank(self) -> usize {
        if self == Kind::Vmag {
            2
        } else {
            4
        }
    }
}

/// How node variables map onto the central vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelLayout {
    /// One voltage `y = v ∈ R^{2Nb}` feeds both the power and voltage channels.
    #[default]
    Shared,
    /// `y = (v_L; v_M) ∈ R^{4Nb}`: power blocks read `v_L`, ω reads `v_M`.
    Split,
}

/// Symmetric matrix that is zero outside `support × support`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSym {
    pub support: Vec<usize>,
    pub block: DMatrix<f64>,
}

impl LocalSym {
    pub fn to_dense(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        for (a, &i) in self.support.iter().enumerate() {
            for (b, &k) in self.support.iter().enumerate() {
                m[(i, k)] = self.block[(a, b)];
            }
        }
        m
    }
}

/// The complex admittance row whose product with `V` is the current behind
/// the requested quantity at bus `j`.
fn admittance_row(adm: &AdmittanceModel, kind: Kind, j: usize, line: Option<usize>) -> Result<Vec<(usize, Complex64)>> {
    let nb = adm.nb();
    match kind {
        Kind::PInj | Kind::QInj => {
            let mut near = vec![false; nb];
            near[j] = true;
            for p in &adm.branches {
                if p.from == j {
                    near[p.to] = true;
                } else if p.to == j {
                    near[p.from] = true;
                }
            }
            Ok((0..nb).filter(|&k| near[k] || adm.ybus[(j, k)] != Complex64::new(0.0, 0.0)).map(|k| (k, adm.ybus[(j, k)])).collect())
        }
        Kind::PFlow | Kind::QFlow => {
            let l = line.ok_or_else(|| Error::Dimension("flow matrix needs a line".into()))?;
            let p = adm.branches.get(l).ok_or(Error::NotIncident { bus: j as u32, branch: l })?;
            let mut row = if p.from == j {
                vec![(p.from, p.yff), (p.to, p.yft)]
            } else if p.to == j {
                vec![(p.from, p.ytf), (p.to, p.ytt)]
            } else {
                return Err(Error::NotIncident { bus: j as u32, branch: l });
            };
            row.sort_by_key(|e| e.0);
            Ok(row)
        }
        Kind::Vmag => Ok(vec![(j, Complex64::new(0.0, 0.0))]),
    }
}

/// Local form of the quadratic matrix, restricted to the buses the row touches.
pub fn local_quadratic(adm: &AdmittanceModel, kind: Kind, j: usize, line: Option<usize>) -> Result<LocalSym> {
    let nb = adm.nb();
    let row = admittance_row(adm, kind, j, line)?;
    let buses: Vec<usize> = row.iter().map(|e| e.0).collect();
    let s = buses.len();
    let mut support: Vec<usize> = buses.clone();
    support.extend(buses.iter().map(|b| b + nb));
    let pos_j = buses.iter().position(|&b| b == j).expect("row contains its own bus");
    let (jx, jy) = (pos_j, pos_j + s);
    let mut m = DMatrix::zeros(2 * s, 2 * s);
    if kind == Kind::Vmag {
        m[(jx, jx)] = 1.0;
        m[(jy, jy)] = 1.0;
        return Ok(LocalSym { support, block: m });
    }
    // Re(Y v) = aᵀv and Im(Y v) = bᵀv with a = [G, -B], b = [B, G].
    let mut a = DVector::zeros(2 * s);
    let mut b = DVector::zeros(2 * s);
    for (k, (_, y)) in row.iter().enumerate() {
        a[k] = y.re;
        a[k + s] = -y.im;
        b[k] = y.im;
        b[k + s] = y.re;
    }
    // P = vx_j·aᵀv + vy_j·bᵀv,  Q = vy_j·aᵀv − vx_j·bᵀv.
    for c in 0..2 * s {
        match kind {
            Kind::PInj | Kind::PFlow => {
                m[(jx, c)] += a[c];
                m[(jy, c)] += b[c];
            }
            _ => {
                m[(jy, c)] += a[c];
                m[(jx, c)] -= b[c];
            }
        }
    }
    let sym = (&m + m.transpose()) * 0.5;
    Ok(LocalSym { support, block: sym })
}

/// Dense `2Nb × 2Nb` symmetric matrix whose quadratic form in `v` is the
/// named quantity at bus `j` (and branch `line` for flows).
pub fn symmetric_quadratic_matrix(adm: &AdmittanceModel, kind: Kind, j: usize, line: Option<usize>) -> Result<DMatrix<f64>> {
    Ok(local_quadratic(adm, kind, j, line)?.to_dense(2 * adm.nb()))
}

/// `Φ·diag(signature)·Φᵀ` factor of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRank {
    pub phi: DMatrix<f64>,
    pub signature: Vec<f64>,
}

/// Numerical rank of a symmetric matrix under [`RANK_TOL`].
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let vals = m.clone().symmetric_eigenvalues();
    let big = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if big == 0.0 {
        return 0;
    }
    vals.iter().filter(|v| v.abs() > RANK_TOL * big).count()
}

/// Factor a symmetric matrix with the canonical column convention.
///
/// Columns come in order of descending |λ| (positive first on ties) and are
/// scaled by √|λ|. Eigenvalues that repeat (the power matrices are invariant
/// under a global phase rotation, so theirs come in pairs) have no unique
/// eigenvectors; the basis of such a space is fixed by pivoted Gram-Schmidt
/// on the projected unit vectors, and the block is scaled by the symmetric
/// square root of the compressed matrix. Every column has its
/// largest-magnitude entry positive.
///
/// Returns `Err(found_rank)` when the numerical rank differs from `expected`.
pub fn low_rank_decompose(m: &DMatrix<f64>, expected: usize) -> core::result::Result<LowRank, usize> {
    let n = m.nrows();
    let (vals, vecs) = eigen_desc(m);
    let big = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if big == 0.0 {
        return Err(0);
    }
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i].abs() > RANK_TOL * big).collect();
    if keep.len() != expected {
        return Err(keep.len());
    }
    // Group eigenvalues (already sorted descending) into clusters.
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &i in &keep {
        match clusters.last_mut() {
            Some(c) if (vals[*c.last().unwrap()] - vals[i]).abs() <= CLUSTER_TOL * big => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    let mean = |c: &Vec<usize>| c.iter().map(|&i| vals[i]).sum::<f64>() / c.len() as f64;
    clusters.sort_by(|a, b| {
        let (la, lb) = (mean(a), mean(b));
        lb.abs().total_cmp(&la.abs()).then(lb.total_cmp(&la))
    });

    let mut phi = DMatrix::zeros(n, expected);
    let mut signature = Vec::with_capacity(expected);
    let mut col = 0;
    for c in &clusters {
        let sign = if mean(c) > 0.0 { 1.0 } else { -1.0 };
        let mut u = DMatrix::zeros(n, c.len());
        for (k, &i) in c.iter().enumerate() {
            u.set_column(k, &vecs.column(i));
        }
        let basis = canonical_basis(&u);
        let k = &basis.transpose() * m * &basis;
        let k = (&k + k.transpose()) * (0.5 * sign);
        let (kv, kw) = eigen_desc(&k);
        let root = &kw * DMatrix::from_diagonal(&DVector::from_iterator(kv.len(), kv.iter().map(|v| sqrt(v.max(0.0))))) * kw.transpose();
        let block = &basis * root;
        for b in 0..c.len() {
            let mut v: Vec<f64> = block.column(b).iter().copied().collect();
            fix_sign(&mut v);
            phi.set_column(col, &DVector::from_vec(v));
            signature.push(sign);
            col += 1;
        }
    }
    Ok(LowRank { phi, signature })
}

/// Orthonormal basis of span(u) independent of which orthonormal `u` was given.
fn canonical_basis(u: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, r) = u.shape();
    if r == 1 {
        return u.clone();
    }
    let p = u * u.transpose();
    let mut q: Vec<DVector<f64>> = Vec::with_capacity(r);
    let mut used = vec![false; n];
    for _ in 0..r {
        let resid = |k: usize| {
            let mut v: DVector<f64> = p.column(k).into_owned();
            for b in &q {
                let d = b.dot(&v);
                v -= b * d;
            }
            v
        };
        let norms: Vec<f64> = (0..n).map(|k| if used[k] { -1.0 } else { resid(k).norm() }).collect();
        let top = norms.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let k = norms.iter().position(|&x| x >= top * (1.0 - 1e-9)).unwrap();
        used[k] = true;
        let mut v = resid(k);
        // Second pass keeps the basis orthogonal to rounding.
        for b in &q {
            let d = b.dot(&v);
            v -= b * d;
        }
        let nv = v.norm();
        q.push(v / nv);
    }
    let mut out = DMatrix::zeros(n, r);
    for (k, v) in q.iter().enumerate() {
        out.set_column(k, v);
    }
    out
}

/// One branch as seen from one of its ends.
#[derive(Debug, Clone, PartialEq)]
pub struct LineEnd {
    pub branch: usize,
    pub from_side: bool,
    pub other: usize,
    /// Apparent power limit (p.u.); `None` when the branch is unlimited.
    pub cap: Option<f64>,
}

/// Coordinate layout of `x_j` and `μ_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub nl: usize,
    pub ng: usize,
}

impl Dims {
    pub fn x_len(&self) -> usize {
        8 * self.nl + 10
    }
    pub fn mu_len(&self) -> usize {
        10 * self.nl + 2 * self.ng + 11
    }
    pub fn power_len(&self) -> usize {
        8 * self.nl + 8
    }
    pub fn alpha(&self) -> usize {
        0
    }
    pub fn beta(&self) -> usize {
        4
    }
    pub fn gamma(&self, l: usize) -> usize {
        8 + 4 * l
    }
    pub fn delta(&self, l: usize) -> usize {
        8 + 4 * self.nl + 4 * l
    }
    pub fn omega(&self) -> usize {
        8 * self.nl + 8
    }
    pub fn f(&self, l: usize) -> usize {
        self.x_len() + l
    }
    pub fn fbar(&self, l: usize) -> usize {
        self.x_len() + self.nl + l
    }
    pub fn gp(&self, m: usize) -> usize {
        self.x_len() + 2 * self.nl + m
    }
    pub fn gq(&self, m: usize) -> usize {
        self.x_len() + 2 * self.nl + self.ng + m
    }
    pub fn end(&self) -> usize {
        self.mu_len() - 1
    }
}

/// Low-rank bases of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalBasis {
    /// Bus position in the case and its id.
    pub bus: usize,
    pub id: u32,
    pub nb: usize,
    pub lines: Vec<LineEnd>,
    pub gens: Vec<usize>,
    /// Rows of `v` that the power blocks touch: the bus and its neighbours,
    /// real parts then imaginary parts.
    pub support: Vec<usize>,
    /// `support.len() × (8nl + 8)` nonzero rows of `Φ_L`.
    pub phi_l: DMatrix<f64>,
    /// ±1 per column of `Φ_L`.
    pub signature: Vec<f64>,
}

impl NodalBasis {
    pub fn dims(&self) -> Dims {
        Dims { nl: self.lines.len(), ng: self.gens.len() }
    }

    /// Full `2Nb × (8nl + 8)` matrix `Φ_L`.
    pub fn phi_l_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(2 * self.nb, self.phi_l.ncols());
        for (r, &i) in self.support.iter().enumerate() {
            m.set_row(i, &self.phi_l.row(r));
        }
        m
    }

    /// `2Nb × 2` matrix `Φ_M` with columns `e_j`, `e_{j+Nb}`.
    pub fn phi_m_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(2 * self.nb, 2);
        m[(self.bus, 0)] = 1.0;
        m[(self.bus + self.nb, 1)] = 1.0;
        m
    }

    /// `x_j = [Φ_L Φ_M]ᵀ v` for a voltage `v ∈ R^{2Nb}`.
    pub fn project_voltage(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dims();
        let mut x = vec![0.0; d.x_len()];
        for (r, &i) in self.support.iter().enumerate() {
            let vi = v[i];
            if vi != 0.0 {
                for c in 0..d.power_len() {
                    x[c] += self.phi_l[(r, c)] * vi;
                }
            }
        }
        x[d.omega()] = v[self.bus];
        x[d.omega() + 1] = v[self.bus + self.nb];
        x
    }
}

/// `x_j` from a voltage vector (`v = 0` gives `x = 0`).
pub fn project_to_nodal(v: &[f64], basis: &NodalBasis) -> Vec<f64> {
    basis.project_voltage(v)
}

/// Physical quantities encoded by a nodal vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantities {
    pub p: f64,
    pub q: f64,
    pub f: Vec<f64>,
    pub fbar: Vec<f64>,
    pub e: f64,
}

fn signed_square(x: &[f64], sig: &[f64]) -> f64 {
    x.iter().zip(sig).map(|(a, s)| s * a * a).sum()
}

pub fn evaluate_quantities(x: &[f64], basis: &NodalBasis) -> Quantities {
    let d = basis.dims();
    let sig = &basis.signature;
    let blk = |s: usize| signed_square(&x[s..s + 4], &sig[s..s + 4]);
    let w = d.omega();
    Quantities {
        p: blk(d.alpha()),
        q: blk(d.beta()),
        f: (0..d.nl).map(|l| blk(d.gamma(l))).collect(),
        fbar: (0..d.nl).map(|l| blk(d.delta(l))).collect(),
        e: x[w] * x[w] + x[w + 1] * x[w + 1],
    }
}

/// Block selectors of `μ_j`, as lists of selected coordinates (one column per entry).
#[derive(Debug, Clone, PartialEq)]
pub struct SelectorSet {
    pub mu_len: usize,
    pub a_ab: Vec<usize>,
    pub a_gd: Vec<Vec<usize>>,
    pub a_w: Vec<usize>,
    pub a_fl: Vec<Vec<usize>>,
    pub a_g: Vec<usize>,
    pub a_gm: Vec<Vec<usize>>,
    pub a_j: Vec<usize>,
    pub end: usize,
}

impl SelectorSet {
    pub fn new(d: Dims) -> SelectorSet {
        let range = |s: usize, n: usize| (s..s + n).collect::<Vec<_>>();
        let mut a_g = range(d.gp(0), d.ng);
        a_g.extend(range(d.gq(0), d.ng));
        SelectorSet {
            mu_len: d.mu_len(),
            a_ab: range(0, 8),
            a_gd: (0..d.nl)
                .map(|l| {
                    let mut v = range(d.gamma(l), 4);
                    v.extend(range(d.delta(l), 4));
                    v
                })
                .collect(),
            a_w: range(d.omega(), 2),
            a_fl: (0..d.nl).map(|l| vec![d.f(l), d.fbar(l)]).collect(),
            a_g,
            a_gm: (0..d.ng).map(|m| vec![d.gp(m), d.gq(m)]).collect(),
            a_j: range(0, d.x_len()),
            end: d.end(),
        }
    }

    /// 0/1 matrix of a selector: column `k` has its single 1 in row `cols[k]`.
    pub fn matrix(&self, cols: &[usize]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.mu_len, cols.len());
        for (k, &r) in cols.iter().enumerate() {
            m[(r, k)] = 1.0;
        }
        m
    }
}

/// Constraint matrices of one node; each is symmetric of size `|μ_j|`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiSet {
    /// `μᵀΠ_Sμ + d = 0`: real power balance (real part of the complex pair).
    pub pi_s: SymSparse,
    /// `μᵀΠ_S̄μ + d̄ = 0`: reactive power balance.
    pub pi_sbar: SymSparse,
    /// `μᵀΠ_Fμ = 0` per line: f equals the γ quadratic form.
    pub pi_f: Vec<SymSparse>,
    pub pi_fbar: Vec<SymSparse>,
    /// `μᵀΠμ ≤ cap²` per line: `f² + f̄²`.
    pub pi_flow_max: Vec<SymSparse>,
    /// `μᵀΠμ + pmax·pmin ≤ 0` per generator, real then reactive.
    pub pi_gp: Vec<SymSparse>,
    pub pi_gq: Vec<SymSparse>,
    /// `Emin ≤ μᵀΠ_Eμ ≤ Emax`.
    pub pi_e: SymSparse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenLimits {
    pub pmin: f64,
    pub pmax: f64,
    pub qmin: f64,
    pub qmax: f64,
}

impl PiSet {
    pub fn new(d: Dims, sig: &[f64], gens: &[GenLimits]) -> PiSet {
        let n = d.mu_len();
        let e = d.end();
        let diag_block = |s: usize| {
            let mut m = SymSparse::new(n);
            for k in 0..4 {
                m.add(s + k, s + k, sig[s + k]);
            }
            m
        };
        let mut pi_s = diag_block(d.alpha());
        let mut pi_sbar = diag_block(d.beta());
        for m in 0..d.ng {
            pi_s.add(d.gp(m), e, -0.5);
            pi_sbar.add(d.gq(m), e, -0.5);
        }
        let flow = |s: usize, fc: usize| {
            let mut m = diag_block(s);
            m.add(fc, e, -0.5);
            m
        };
        let pi_f = (0..d.nl).map(|l| flow(d.gamma(l), d.f(l))).collect();
        let pi_fbar = (0..d.nl).map(|l| flow(d.delta(l), d.fbar(l))).collect();
        let pi_flow_max = (0..d.nl)
            .map(|l| {
                let mut m = SymSparse::new(n);
                m.add(d.f(l), d.f(l), 1.0);
                m.add(d.fbar(l), d.fbar(l), 1.0);
                m
            })
            .collect();
        let gbox = |c: usize, lo: f64, hi: f64| {
            let mut m = SymSparse::new(n);
            m.add(c, c, 1.0);
            m.add(c, e, -0.5 * (hi + lo));
            m
        };
        let pi_gp = gens.iter().enumerate().map(|(m, g)| gbox(d.gp(m), g.pmin, g.pmax)).collect();
        let pi_gq = gens.iter().enumerate().map(|(m, g)| gbox(d.gq(m), g.qmin, g.qmax)).collect();
        let mut pi_e = SymSparse::new(n);
        pi_e.add(d.omega(), d.omega(), 1.0);
        pi_e.add(d.omega() + 1, d.omega() + 1, 1.0);
        PiSet { pi_s, pi_sbar, pi_f, pi_fbar, pi_flow_max, pi_gp, pi_gq, pi_e }
    }
}

/// Everything one node needs to build its subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeModel {
    pub basis: NodalBasis,
    pub selectors: SelectorSet,
    pub pis: PiSet,
    /// `μᵀM_obμ = Σ a·gp² + 2b·gp` (per-unit coefficients).
    pub m_ob: SymSparse,
    /// Cost constant terms ($/h) of the node's generators.
    pub cost_const: f64,
    /// Per generator (a, b) in per-unit with the `a·g² + 2b·g` convention.
    pub costs: Vec<(f64, f64)>,
    pub gen_limits: Vec<GenLimits>,
    pub pd: f64,
    pub qd: f64,
    pub emin: f64,
    pub emax: f64,
    /// Penalty weight per `x_j` coordinate.
    pub rho: Vec<f64>,
    /// Rows of `y` read by `x_j`: `support` rows for the power blocks, then ω.
    pub y_rows: Vec<usize>,
    pub omega_rows: [usize; 2],
}

impl NodeModel {
    pub fn dims(&self) -> Dims {
        self.basis.dims()
    }

    /// `x_j = Φ_jᵀ y`.
    pub fn phi_t(&self, y: &[f64]) -> Vec<f64> {
        let b = &self.basis;
        let d = b.dims();
        let mut x = vec![0.0; d.x_len()];
        for (r, &i) in self.y_rows.iter().enumerate() {
            let yi = y[i];
            if yi != 0.0 {
                for c in 0..d.power_len() {
                    x[c] += b.phi_l[(r, c)] * yi;
                }
            }
        }
        x[d.omega()] = y[self.omega_rows[0]];
        x[d.omega() + 1] = y[self.omega_rows[1]];
        x
    }

    /// Accumulate `Φ_j x` into `out`.
    pub fn phi_add(&self, x: &[f64], out: &mut [f64]) {
        let b = &self.basis;
        let d = b.dims();
        for (r, &i) in self.y_rows.iter().enumerate() {
            let mut acc = 0.0;
            for c in 0..d.power_len() {
                acc += b.phi_l[(r, c)] * x[c];
            }
            out[i] += acc;
        }
        out[self.omega_rows[0]] += x[d.omega()];
        out[self.omega_rows[1]] += x[d.omega() + 1];
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub rho_power: f64,
    pub rho_voltage: f64,
    pub layout: ChannelLayout,
    /// Multiplier on the cost coefficients; does not move the minimizer.
    pub cost_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { rho_power: 20.0, rho_voltage: 200.0, layout: ChannelLayout::Shared, cost_scale: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct StarModel {
    pub nb: usize,
    pub base_mva: f64,
    pub config: ModelConfig,
    pub nodes: Vec<NodeModel>,
    /// Start of each node's slice in the stacked `x`.
    pub offsets: Vec<usize>,
    pub dim_y: usize,
    /// Cholesky factor of `ΦD_ρΦᵀ`.
    pub normal: Cholesky<f64, Dyn>,
}

impl StarModel {
    pub fn total_x(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Dense `dim_y × Σ|x_j|` global `Φ`.
    pub fn phi_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim_y, self.total_x());
        for (j, node) in self.nodes.iter().enumerate() {
            let n = node.dims().x_len();
            for c in 0..n {
                let mut e = vec![0.0; n];
                e[c] = 1.0;
                let mut col = vec![0.0; self.dim_y];
                node.phi_add(&e, &mut col);
                m.set_column(self.offsets[j] + c, &DVector::from_vec(col));
            }
        }
        m
    }

    pub fn rho_diag(&self) -> Vec<f64> {
        self.nodes.iter().flat_map(|n| n.rho.iter().copied()).collect()
    }

    /// `y = (ΦD_ρΦᵀ)⁻¹ Φ D_ρ x`, summing node contributions in node order.
    pub fn central_solve(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        let mut rhs = vec![0.0; self.dim_y];
        for (node, x) in self.nodes.iter().zip(xs) {
            let dx: Vec<f64> = x.iter().zip(&node.rho).map(|(a, r)| a * r).collect();
            node.phi_add(&dx, &mut rhs);
        }
        let sol = self.normal.solve(&DVector::from_vec(rhs));
        sol.iter().copied().collect()
    }

    /// Voltage carried by the ω channel of `y`.
    pub fn voltage(&self, y: &[f64]) -> Vec<Complex64> {
        self.nodes.iter().map(|n| Complex64::new(y[n.omega_rows[0]], y[n.omega_rows[1]])).collect()
    }

    /// Central vector holding voltage `v` in every channel.
    pub fn embed_voltage(&self, v: &[f64]) -> Vec<f64> {
        match self.config.layout {
            ChannelLayout::Shared => v.to_vec(),
            ChannelLayout::Split => {
                let mut y = v.to_vec();
                y.extend_from_slice(v);
                y
            }
        }
    }

    /// Maximum `|μ_j|` over the nodes.
    pub fn n_var_max(&self) -> usize {
        self.nodes.iter().map(|n| n.dims().mu_len()).max().unwrap_or(0)
    }
}

/// Factor every quantity at bus `j` and assemble its basis.
pub fn build_basis(case: &NetworkCase, adm: &AdmittanceModel, j: usize) -> Result<NodalBasis> {
    let nb = adm.nb();
    let id = case.buses[j].id;
    let lines: Vec<LineEnd> = adm
        .branches
        .iter()
        .enumerate()
        .filter(|(_, p)| p.from == j || p.to == j)
        .map(|(l, p)| LineEnd { branch: l, from_side: p.from == j, other: if p.from == j { p.to } else { p.from }, cap: case.branches[l].cap() })
        .collect();
    let gens: Vec<usize> = (0..case.ng()).filter(|&g| case.gens[g].bus == id).collect();
    let inj = local_quadratic(adm, Kind::PInj, j, None)?;
    let support = inj.support.clone();
    let pos = |i: usize| support.iter().position(|&s| s == i);
    let d = Dims { nl: lines.len(), ng: gens.len() };
    let mut phi_l = DMatrix::zeros(support.len(), d.power_len());
    let mut signature = vec![0.0; d.power_len()];
    let mut place = |loc: &LocalSym, what: String, col0: usize| -> Result<()> {
        let lr = low_rank_decompose(&loc.block, 4).map_err(|found| Error::Rank { bus: id, what: what.clone(), expected: 4, found })?;
        for (r, &i) in loc.support.iter().enumerate() {
            let pr = pos(i).ok_or_else(|| Error::Dimension(format!("bus {id}: {what} leaves the local support")))?;
            for c in 0..4 {
                phi_l[(pr, col0 + c)] = lr.phi[(r, c)];
            }
        }
        signature[col0..col0 + 4].copy_from_slice(&lr.signature);
        Ok(())
    };
    place(&inj, Kind::PInj.name().into(), d.alpha())?;
    place(&local_quadratic(adm, Kind::QInj, j, None)?, Kind::QInj.name().into(), d.beta())?;
    for (l, le) in lines.iter().enumerate() {
        let what = |k: Kind| format!("{} on branch {}", k.name(), le.branch);
        place(&local_quadratic(adm, Kind::PFlow, j, Some(le.branch))?, what(Kind::PFlow), d.gamma(l))?;
        place(&local_quadratic(adm, Kind::QFlow, j, Some(le.branch))?, what(Kind::QFlow), d.delta(l))?;
    }
    Ok(NodalBasis { bus: j, id, nb, lines, gens, support, phi_l, signature })
}

pub fn build_star_model(case: &NetworkCase, adm: &AdmittanceModel, config: ModelConfig) -> Result<StarModel> {
    if !(config.rho_power > 0.0 && config.rho_voltage > 0.0 && config.cost_scale > 0.0) {
        return Err(Error::Invalid("penalty weights and cost scale must be positive".into()));
    }
    let nb = case.nb();
    let mut nodes = Vec::with_capacity(nb);
    let mut offsets = vec![0];
    for j in 0..nb {
        if adm.branches.iter().all(|p| p.from != j && p.to != j) {
            return Err(Error::Disconnected { island: vec![case.buses[j].id] });
        }
        let basis = build_basis(case, adm, j)?;
        let d = basis.dims();
        let gen_limits: Vec<GenLimits> = basis
            .gens
            .iter()
            .map(|&g| {
                let r = &case.gens[g];
                GenLimits { pmin: r.pmin, pmax: r.pmax, qmin: r.qmin, qmax: r.qmax }
            })
            .collect();
        let mut m_ob = SymSparse::new(d.mu_len());
        let mut costs = Vec::new();
        let mut cost_const = 0.0;
        for (m, &g) in basis.gens.iter().enumerate() {
            let (a, b, c) = cost_coefficients(case, g);
            let (a, b) = (a * config.cost_scale, b * config.cost_scale);
            m_ob.add(d.gp(m), d.gp(m), a);
            m_ob.add(d.gp(m), d.end(), b);
            costs.push((a, b));
            cost_const += c;
        }
        let pis = PiSet::new(d, &basis.signature, &gen_limits);
        let selectors = SelectorSet::new(d);
        let mut rho = vec![config.rho_power; d.power_len()];
        rho.extend([config.rho_voltage; 2]);
        let (y_rows, omega_rows) = match config.layout {
            ChannelLayout::Shared => (basis.support.clone(), [j, j + nb]),
            ChannelLayout::Split => (basis.support.clone(), [2 * nb + j, 3 * nb + j]),
        };
        let bus = &case.buses[j];
        offsets.push(offsets.last().unwrap() + d.x_len());
        nodes.push(NodeModel {
            basis,
            selectors,
            pis,
            m_ob,
            cost_const,
            costs,
            gen_limits,
            pd: bus.pd,
            qd: bus.qd,
            emin: bus.vmin * bus.vmin,
            emax: bus.vmax * bus.vmax,
            rho,
            y_rows,
            omega_rows,
        });
    }
    let dim_y = match config.layout {
        ChannelLayout::Shared => 2 * nb,
        ChannelLayout::Split => 4 * nb,
    };
    let mut normal = DMatrix::zeros(dim_y, dim_y);
    for node in &nodes {
        let b = &node.basis;
        let d = b.dims();
        let mut rows: Vec<(usize, Vec<f64>)> = node
            .y_rows
            .iter()
            .enumerate()
            .map(|(r, &i)| (i, (0..d.x_len()).map(|c| if c < d.power_len() { b.phi_l[(r, c)] } else { 0.0 }).collect()))
            .collect();
        for (k, &i) in node.omega_rows.iter().enumerate() {
            let mut v = vec![0.0; d.x_len()];
            v[d.omega() + k] = 1.0;
            rows.push((i, v));
        }
        for (i, ri) in &rows {
            for (k, rk) in &rows {
                let s: f64 = ri.iter().zip(rk).zip(&node.rho).map(|((a, b), r)| a * b * r).sum();
                normal[(*i, *k)] += s;
            }
        }
    }
    let normal = Cholesky::new(normal).ok_or(Error::SingularNormal)?;
    Ok(StarModel { nb, base_mva: case.base_mva, config, nodes, offsets, dim_y, normal })
}
