// SPDX-License-Identifier: Apache-2.0

//! Brute-force reference for small equality-form SDPs
//!
//!   minimize tr(CZ)  s.t.  tr(A_i Z) = b_i,  Z ⪰ 0
//!
//! by an augmented Lagrangian whose inner problems are solved with
//! accelerated projected gradient on the PSD cone. Slow and simple on
//! purpose: it shares no code with the interior-point solver beyond the
//! dense eigen-decomposition used for the cone projection.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Dense {
    pub c: DMatrix<f64>,
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<f64>,
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

pub fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let e = SymmetricEigen::new(sym);
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for k in 0..e.eigenvalues.len() {
        let l = e.eigenvalues[k];
        if l > 0.0 {
            let u = e.eigenvectors.column(k);
            out += u * u.transpose() * l;
        }
    }
    out
}

/// Objective value and primal point, accurate to roughly `tol`.
pub fn solve(p: &Dense, tol: f64) -> (f64, DMatrix<f64>) {
    let n = p.c.nrows();
    let beta = 10.0;
    let lip = beta * p.a.iter().map(|a| inner(a, a)).sum::<f64>();
    let step = 1.0 / lip;
    let mut y = vec![0.0; p.a.len()];
    let mut z = DMatrix::<f64>::identity(n, n);
    let residual = |z: &DMatrix<f64>| -> Vec<f64> { p.a.iter().zip(&p.b).map(|(a, b)| inner(a, z) - b).collect() };
    for _outer in 0..400 {
        // FISTA on the augmented Lagrangian at fixed y.
        let mut w = z.clone();
        let mut t = 1.0f64;
        for _ in 0..20_000 {
            let r = residual(&w);
            let mut g = p.c.clone();
            for (i, a) in p.a.iter().enumerate() {
                g -= a * (y[i] - beta * r[i]);
            }
            let z_next = project_psd(&(&w - g * step));
            let moved = (&z_next - &z).norm();
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            w = &z_next + (&z_next - &z) * ((t - 1.0) / t_next);
            z = z_next;
            t = t_next;
            if moved < tol * 1e-3 {
                break;
            }
        }
        let r = residual(&z);
        for i in 0..y.len() {
            y[i] -= beta * r[i];
        }
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rn < tol * 1e-2 {
            break;
        }
    }
    (inner(&p.c, &z), z)
}

fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&g + g.transpose()) * 0.5
}

/// Bounded, strictly feasible problem: `C ≻ 0` and `b = A(Z₀)` for some `Z₀ ≻ 0`.
pub fn random_problem(seed: u64, n: usize, n_eq: usize) -> Dense {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let c = &r * r.transpose() / n as f64 + DMatrix::identity(n, n) * 0.1;
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let z0 = &g * g.transpose() / n as f64 + DMatrix::identity(n, n);
    let a: Vec<DMatrix<f64>> = (0..n_eq).map(|_| random_sym(&mut rng, n)).collect();
    let b = a.iter().map(|a| inner(a, &z0)).collect();
    Dense { c, a, b }
}
