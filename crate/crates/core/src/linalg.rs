// SPDX-License-Identifier: Apache-2.0

//! Small dense helpers on top of nalgebra, plus a sparse symmetric matrix
//! type used for constraint data.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub fn norm(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|a| a * a).sum())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Eigenvalues in descending order with matching eigenvector columns.
pub fn eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Flip `v` so that its largest-magnitude entry is positive. Near-ties go to
/// the earliest index.
pub fn fix_sign(v: &mut [f64]) {
    let big = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if big == 0.0 {
        return;
    }
    if let Some(k) = v.iter().position(|x| x.abs() >= big * (1.0 - 1e-9)) {
        if v[k] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    sqrt(m.iter().map(|a| a * a).sum())
}

/// Symmetric matrix stored as its upper-triangle entries `(r, c, v)` with
/// `r <= c`. Repeated coordinates add.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SymSparse {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SymSparse {
    pub fn new(n: usize) -> Self {
        SymSparse { n, entries: Vec::new() }
    }

    /// Add `v` to entry (r, c) and, if off-diagonal, to (c, r).
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let (r, c) = if r <= c { (r, c) } else { (c, r) };
        debug_assert!(c < self.n);
        if v != 0.0 {
            self.entries.push((r, c, v));
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        self.add_to(&mut m, 1.0);
        m
    }

    pub fn add_to(&self, m: &mut DMatrix<f64>, scale: f64) {
        for &(r, c, v) in &self.entries {
            m[(r, c)] += scale * v;
            if r != c {
                m[(c, r)] += scale * v;
            }
        }
    }

    /// Trace inner product `tr(self · z)` for symmetric `z`.
    pub fn inner(&self, z: &DMatrix<f64>) -> f64 {
        self.entries.iter().map(|&(r, c, v)| if r == c { v * z[(r, r)] } else { 2.0 * v * z[(r, c)] }).sum()
    }

    pub fn quad(&self, x: &[f64]) -> f64 {
        self.entries.iter().map(|&(r, c, v)| if r == c { v * x[r] * x[r] } else { 2.0 * v * x[r] * x[c] }).sum()
    }

    pub fn frobenius(&self) -> f64 {
        frobenius(&self.to_dense())
    }
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
