// SPDX-License-Identifier: Apache-2.0

//! Bus and branch admittance matrices from the branch π-model.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::case::NetworkCase;
use crate::error::{Error, Result};

/// Primitive two-port admittances of one branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPrimitive {
    pub from: usize,
    pub to: usize,
    pub yff: Complex64,
    pub yft: Complex64,
    pub ytf: Complex64,
    pub ytt: Complex64,
}

#[derive(Debug, Clone)]
pub struct AdmittanceModel {
    pub ybus: DMatrix<Complex64>,
    /// Row `l` maps bus voltages to the current leaving the from end of branch `l`.
    pub yf: DMatrix<Complex64>,
    /// Row `l` maps bus voltages to the current leaving the to end of branch `l`.
    pub yt: DMatrix<Complex64>,
    pub ysh: Vec<Complex64>,
    pub branches: Vec<BranchPrimitive>,
}

pub fn build_admittance(case: &NetworkCase) -> Result<AdmittanceModel> {
    let idx = case.bus_index()?;
    let nb = case.nb();
    let nl = case.nl();
    let mut ybus = DMatrix::from_element(nb, nb, Complex64::new(0.0, 0.0));
    let mut yf = DMatrix::from_element(nl, nb, Complex64::new(0.0, 0.0));
    let mut yt = DMatrix::from_element(nl, nb, Complex64::new(0.0, 0.0));
    let mut prims = Vec::with_capacity(nl);
    for (l, br) in case.branches.iter().enumerate() {
        if br.r == 0.0 && br.x == 0.0 {
            return Err(Error::ZeroImpedance { from: br.from, to: br.to });
        }
        let f = *idx.get(&br.from).ok_or(Error::UnknownBus { what: "branch".into(), bus: br.from })?;
        let t = *idx.get(&br.to).ok_or(Error::UnknownBus { what: "branch".into(), bus: br.to })?;
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let ytt = ys + Complex64::new(0.0, br.b / 2.0);
        let tap = Complex64::from_polar(br.ratio(), br.shift.to_radians());
        let yff = ytt / (tap * tap.conj());
        let yft = -ys / tap.conj();
        let ytf = -ys / tap;
        yf[(l, f)] = yff;
        yf[(l, t)] = yft;
        yt[(l, f)] = ytf;
        yt[(l, t)] = ytt;
        ybus[(f, f)] += yff;
        ybus[(f, t)] += yft;
        ybus[(t, f)] += ytf;
        ybus[(t, t)] += ytt;
        prims.push(BranchPrimitive { from: f, to: t, yff, yft, ytf, ytt });
    }
    let ysh: Vec<Complex64> = case.buses.iter().map(|b| Complex64::new(b.gs, b.bs)).collect();
    for (i, y) in ysh.iter().enumerate() {
        ybus[(i, i)] += *y;
    }
    Ok(AdmittanceModel { ybus, yf, yt, ysh, branches: prims })
}

impl AdmittanceModel {
    pub fn nb(&self) -> usize {
        self.ybus.nrows()
    }

    /// Complex power injected at every bus, `V ∘ conj(Ybus V)`.
    pub fn injections(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.nb();
        (0..n)
            .map(|i| {
                let mut cur = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    cur += self.ybus[(i, k)] * v[k];
                }
                v[i] * cur.conj()
            })
            .collect()
    }

    /// Complex power entering branch `l` at its from and to ends.
    pub fn branch_flows(&self, l: usize, v: &[Complex64]) -> (Complex64, Complex64) {
        let p = &self.branches[l];
        let i_f = p.yff * v[p.from] + p.yft * v[p.to];
        let i_t = p.ytf * v[p.from] + p.ytt * v[p.to];
        (v[p.from] * i_f.conj(), v[p.to] * i_t.conj())
    }
}
