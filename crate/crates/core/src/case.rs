// SPDX-License-Identifier: Apache-2.0

//! Network case records. Powers, impedances and shunts are per unit on
//! `base_mva`; cost coefficients are kept exactly as they appear in the
//! source file ($/MW²h, $/MWh, $/h).

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum BusType {
    Pq,
    Pv,
    Ref,
}

impl BusType {
    pub fn from_code(code: i64) -> Option<BusType> {
        match code {
            1 => Some(BusType::Pq),
            2 => Some(BusType::Pv),
            3 => Some(BusType::Ref),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Bus {
    pub id: u32,
    pub bus_type: BusType,
    pub pd: f64,
    pub qd: f64,
    /// Shunt conductance and susceptance at V = 1 p.u.
    #[cfg_attr(feature = "serde", serde(default))]
    pub gs: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub bs: f64,
    pub vmin: f64,
    pub vmax: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub base_kv: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Branch {
    pub from: u32,
    pub to: u32,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance.
    #[cfg_attr(feature = "serde", serde(default))]
    pub b: f64,
    /// Off-nominal tap ratio; 0 means 1.
    #[cfg_attr(feature = "serde", serde(default))]
    pub tap: f64,
    /// Phase shift in degrees.
    #[cfg_attr(feature = "serde", serde(default))]
    pub shift: f64,
    /// Apparent power limit; 0 means unlimited.
    #[cfg_attr(feature = "serde", serde(default))]
    pub rate_a: f64,
    #[cfg_attr(feature = "serde", serde(default = "one"))]
    pub status: u8,
}

impl Branch {
    pub fn ratio(&self) -> f64 {
        if self.tap == 0.0 {
            1.0
        } else {
            self.tap
        }
    }

    pub fn cap(&self) -> Option<f64> {
        if self.rate_a > 0.0 {
            Some(self.rate_a)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Gen {
    pub bus: u32,
    pub pmin: f64,
    pub pmax: f64,
    pub qmin: f64,
    pub qmax: f64,
    #[cfg_attr(feature = "serde", serde(default = "one"))]
    pub status: u8,
}

/// Polynomial cost `a·P² + b·P + c` with P in MW.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Cost {
    pub gen: usize,
    pub a: f64,
    pub b: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub c: f64,
}

#[cfg(feature = "serde")]
fn one() -> u8 {
    1
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct NetworkCase {
    #[cfg_attr(feature = "serde", serde(default))]
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub gens: Vec<Gen>,
    pub costs: Vec<Cost>,
}

impl NetworkCase {
    pub fn nb(&self) -> usize {
        self.buses.len()
    }

    pub fn nl(&self) -> usize {
        self.branches.len()
    }

    pub fn ng(&self) -> usize {
        self.gens.len()
    }

    /// Drop out-of-service branches and generators (with their costs),
    /// then validate.
    pub fn normalized(mut self) -> Result<NetworkCase> {
        self.branches.retain(|b| b.status != 0);
        let mut keep = Vec::with_capacity(self.gens.len());
        let mut remap = vec![usize::MAX; self.gens.len()];
        for (i, g) in self.gens.iter().enumerate() {
            if g.status != 0 {
                remap[i] = keep.len();
                keep.push(g.clone());
            }
        }
        let mut costs = Vec::with_capacity(keep.len());
        for c in &self.costs {
            if c.gen >= remap.len() {
                return Err(Error::Invalid(format!("cost row for missing generator {}", c.gen)));
            }
            if remap[c.gen] != usize::MAX {
                costs.push(Cost { gen: remap[c.gen], ..c.clone() });
            }
        }
        self.gens = keep;
        self.costs = costs;
        self.validate()?;
        Ok(self)
    }

    /// Map from bus id to position in `buses`.
    pub fn bus_index(&self) -> Result<BTreeMap<u32, usize>> {
        let mut idx = BTreeMap::new();
        for (i, b) in self.buses.iter().enumerate() {
            if idx.insert(b.id, i).is_some() {
                return Err(Error::DuplicateBus(b.id));
            }
        }
        Ok(idx)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_mva > 0.0) {
            return Err(Error::Invalid(format!("baseMVA must be positive, got {}", self.base_mva)));
        }
        if self.buses.is_empty() {
            return Err(Error::Invalid("case has no buses".into()));
        }
        let idx = self.bus_index()?;
        for b in &self.buses {
            if b.id == 0 {
                return Err(Error::Invalid("bus ids must be positive".into()));
            }
            if !(b.vmin > 0.0) || !(b.vmax >= b.vmin) {
                return Err(Error::Invalid(format!("bus {}: voltage bounds [{}, {}]", b.id, b.vmin, b.vmax)));
            }
        }
        for (l, br) in self.branches.iter().enumerate() {
            for id in [br.from, br.to] {
                if !idx.contains_key(&id) {
                    return Err(Error::UnknownBus { what: format!("branch {l}"), bus: id });
                }
            }
            if br.from == br.to {
                return Err(Error::Invalid(format!("branch {l} connects bus {} to itself", br.from)));
            }
            if br.r == 0.0 && br.x == 0.0 {
                return Err(Error::ZeroImpedance { from: br.from, to: br.to });
            }
            if br.r < 0.0 && br.x == 0.0 {
                return Err(Error::Invalid(format!("branch {l} has negative resistance")));
            }
        }
        for (i, g) in self.gens.iter().enumerate() {
            if !idx.contains_key(&g.bus) {
                return Err(Error::UnknownBus { what: format!("generator {i}"), bus: g.bus });
            }
            if g.pmax < g.pmin || g.qmax < g.qmin {
                return Err(Error::Invalid(format!("generator {i}: inverted limits")));
            }
        }
        let mut seen = vec![false; self.gens.len()];
        for c in &self.costs {
            if c.gen >= self.gens.len() {
                return Err(Error::Invalid(format!("cost row for missing generator {}", c.gen)));
            }
            if seen[c.gen] {
                return Err(Error::Invalid(format!("generator {} has two cost rows", c.gen)));
            }
            seen[c.gen] = true;
            if c.a < 0.0 {
                return Err(Error::Invalid(format!("generator {}: negative quadratic cost", c.gen)));
            }
        }
        let island = self.unreachable(&idx);
        if !island.is_empty() {
            return Err(Error::Disconnected { island });
        }
        Ok(())
    }

    fn unreachable(&self, idx: &BTreeMap<u32, usize>) -> Vec<u32> {
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for br in &self.branches {
            let (f, t) = (idx[&br.from], idx[&br.to]);
            adj[f].push(t);
            adj[t].push(f);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &k in &adj[i] {
                if !seen[k] {
                    seen[k] = true;
                    queue.push_back(k);
                }
            }
        }
        (0..n).filter(|&i| !seen[i]).map(|i| self.buses[i].id).collect()
    }

    /// Cost rows indexed by generator; generators without a row cost nothing.
    pub fn cost_of(&self, gen: usize) -> (f64, f64, f64) {
        self.costs.iter().find(|c| c.gen == gen).map(|c| (c.a, c.b, c.c)).unwrap_or((0.0, 0.0, 0.0))
    }
}
