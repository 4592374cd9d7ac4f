// SPDX-License-Identifier: Apache-2.0

//! The distributed iteration: local solves, central least-squares update,
//! multiplier update, consistency projection and step schedules.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::admittance::{build_admittance, AdmittanceModel};
use crate::case::NetworkCase;
use crate::diagnostics::{central_objective, generation_from_voltage, surrogate_and_lagrangian, total_cost};
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::nodal::{solve_node, CaseTag, NodeStep};
use crate::sdp::SdpOptions;
use crate::tensor::{build_star_model, ChannelLayout, ModelConfig, StarModel};

#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    /// Every entry of `y` uniform in [−1, 1].
    Cold,
    /// Real parts 1, imaginary parts uniform in [−0.1, 0.1].
    Flat,
    /// Given voltage `(v_x; v_y)` of length `2Nb`.
    Warm(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub rho_power: f64,
    pub rho_voltage: f64,
    pub delta0: f64,
    pub a: f64,
    pub tau0: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub start: Start,
    /// Weight of the proximal term on flow and generation coordinates.
    pub kappa: f64,
    /// Scale of the random null-space vectors the multipliers start from.
    pub z_init_scale: f64,
    pub layout: ChannelLayout,
    /// Objective multiplier applied inside the node problems.
    pub cost_scale: f64,
    pub sdp: SdpOptions,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            rho_power: 20.0,
            rho_voltage: 200.0,
            delta0: 0.3,
            a: 0.75,
            tau0: 1e-3,
            max_iter: 100,
            tol: 1e-7,
            seed: 0,
            start: Start::Flat,
            kappa: 1e-3,
            z_init_scale: 1.0,
            layout: ChannelLayout::Shared,
            cost_scale: 1.0,
            sdp: SdpOptions::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(m.into()));
        if !(self.delta0 > 0.0 && self.delta0 < 1.0) {
            return bad("delta0 must lie in (0, 1)");
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return bad("a must lie in (0, 1)");
        }
        if !(self.tau0 > 0.0) || !(self.tol > 0.0) {
            return bad("tau0 and tol must be positive");
        }
        if !(self.rho_power > 0.0 && self.rho_voltage > 0.0) {
            return bad("penalty weights must be positive");
        }
        if !(self.kappa >= 0.0) || !(self.z_init_scale >= 0.0) {
            return bad("kappa and z_init_scale must be nonnegative");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig { rho_power: self.rho_power, rho_voltage: self.rho_voltage, layout: self.layout, cost_scale: self.cost_scale }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeIterate {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub tau: f64,
    pub eps: f64,
    pub last_case: CaseTag,
    pub zeta_hat: Vec<f64>,
    /// Candidate extracted at the last solve, accepted or not.
    pub zeta: Option<Vec<f64>>,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Subproblem optimal value at the last solve.
    pub value: f64,
    /// Relaxed generation cost at the last solve.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralState {
    pub y: Vec<f64>,
    pub delta: f64,
    /// Number of completed iterations.
    pub k: usize,
    pub tau_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub w: f64,
    pub h: f64,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub n_exact: usize,
    pub n_proj: usize,
    pub n_reject: usize,
    pub max_node_ms: Option<f64>,
    pub msgs_power: u64,
    pub msgs_voltage: u64,
}

/// Scalars exchanged between nodes and center, per channel and direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CommLedger {
    pub power_up: u64,
    pub power_down: u64,
    pub voltage_up: u64,
    pub voltage_down: u64,
}

impl CommLedger {
    pub fn total(&self) -> u64 {
        self.power_up + self.power_down + self.voltage_up + self.voltage_down
    }
}

/// Runs independent per-node jobs. Results come back in job order;
/// the second element is the job's wall time in milliseconds when measured.
pub trait Executor {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<(T, Option<f64>)>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

/// Runs jobs one after another on the calling thread without timing.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<(T, Option<f64>)>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..n).map(|j| (f(j), None)).collect()
    }
}

pub struct Engine<'m> {
    pub model: &'m StarModel,
    pub config: EngineConfig,
    pub nodes: Vec<NodeIterate>,
    pub central: CentralState,
    pub trace: Vec<TraceRow>,
    pub ledger: CommLedger,
    /// Node reports of the last iteration.
    pub last_steps: Vec<NodeStep>,
}

/// Orthonormal basis of the row space of node `j`'s block of Φ, as columns.
fn row_space(model: &StarModel, j: usize) -> DMatrix<f64> {
    let node = &model.nodes[j];
    let d = node.dims();
    let rows = node.y_rows.len() + 2;
    let mut k = DMatrix::zeros(rows, d.x_len());
    for r in 0..node.y_rows.len() {
        for c in 0..d.power_len() {
            k[(r, c)] = node.basis.phi_l[(r, c)];
        }
    }
    k[(rows - 2, d.omega())] = 1.0;
    k[(rows - 1, d.omega() + 1)] = 1.0;
    let svd = k.transpose().svd(true, false);
    let u = svd.u.expect("requested U");
    let top = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let cols: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-10 * top).collect();
    let mut b = DMatrix::zeros(d.x_len(), cols.len());
    for (o, &i) in cols.iter().enumerate() {
        b.set_column(o, &u.column(i));
    }
    b
}

impl<'m> Engine<'m> {
    /// Starting point, null-space multipliers and consistent `x`.
    pub fn initialize(model: &'m StarModel, config: EngineConfig) -> Result<Engine<'m>> {
        config.validate()?;
        let nb = model.nb;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let y = match &config.start {
            Start::Cold => (0..model.dim_y).map(|_| rng.random_range(-1.0..=1.0)).collect(),
            Start::Flat => {
                let mut v = vec![1.0; 2 * nb];
                for k in 0..nb {
                    v[nb + k] = rng.random_range(-0.1..=0.1);
                }
                model.embed_voltage(&v)
            }
            Start::Warm(v) => {
                if v.len() != 2 * nb {
                    return Err(Error::Dimension(alloc::format!("warm start has {} entries, expected {}", v.len(), 2 * nb)));
                }
                model.embed_voltage(v)
            }
        };
        let mut nodes = Vec::with_capacity(nb);
        for j in 0..nb {
            let n = model.nodes[j].dims().x_len();
            let r: Vec<f64> = (0..n).map(|_| config.z_init_scale * rng.random_range(-1.0..=1.0)).collect();
            let basis = row_space(model, j);
            let rv = nalgebra::DVector::from_vec(r);
            let z = &rv - &basis * (basis.transpose() * &rv);
            let x = model.nodes[j].phi_t(&y);
            nodes.push(NodeIterate {
                zeta_hat: x.clone(),
                x,
                z: z.iter().copied().collect(),
                tau: config.tau0,
                eps: 0.0,
                last_case: CaseTag::Exact,
                zeta: None,
                lambda1: f64::NAN,
                lambda2: f64::NAN,
                value: f64::NAN,
                cost: f64::NAN,
            });
        }
        let central = CentralState { y, delta: config.delta0, k: 0, tau_max: config.tau0 };
        Ok(Engine { model, config, nodes, central, trace: Vec::new(), ledger: CommLedger::default(), last_steps: Vec::new() })
    }

    pub fn xs(&self) -> Vec<Vec<f64>> {
        self.nodes.iter().map(|n| n.x.clone()).collect()
    }

    pub fn zs(&self) -> Vec<Vec<f64>> {
        self.nodes.iter().map(|n| n.z.clone()).collect()
    }

    /// One iteration: node steps, central update, multipliers and the consistency
    /// projection, then the step-size schedules.
    pub fn iterate_once<E: Executor>(&mut self, exec: &E) -> &TraceRow {
        let model = self.model;
        let cfg = &self.config;
        let tau = cfg.tau0 / (self.central.k + 1) as f64;
        let delta = self.central.delta;
        let y = &self.central.y;
        let nodes = &self.nodes;
        let results = exec.map(model.nb, |j| {
            let it = &nodes[j];
            solve_node(model, j, y, &it.z, &it.x, tau, delta, cfg.kappa, &cfg.sdp).0
        });
        let max_ms = results.iter().map(|r| r.1).try_fold(0.0f64, |m, t| t.map(|t| m.max(t)));
        let steps: Vec<NodeStep> = results.into_iter().map(|r| r.0).collect();

        let x_hat: Vec<Vec<f64>> = steps.iter().map(|s| s.x_hat.clone()).collect();
        let y_new = model.central_solve(&x_hat);
        let mut dx2 = 0.0;
        let mut dz2 = 0.0;
        let (mut ne, mut np, mut nr) = (0, 0, 0);
        for (j, (it, st)) in self.nodes.iter_mut().zip(&steps).enumerate() {
            let node = &model.nodes[j];
            let x_new = node.phi_t(&y_new);
            for k in 0..x_new.len() {
                let dz = node.rho[k] * (st.x_hat[k] - x_new[k]);
                it.z[k] += dz;
                dz2 += dz * dz;
                let d = x_new[k] - it.x[k];
                dx2 += d * d;
            }
            it.x = x_new;
            it.tau = tau;
            it.eps = st.eps;
            it.last_case = st.tag;
            it.zeta_hat = st.zeta_hat.clone();
            it.zeta = st.zeta.clone();
            it.lambda1 = st.lambda1;
            it.lambda2 = st.lambda2;
            it.value = st.value;
            it.cost = st.cost;
            match st.tag {
                CaseTag::Exact => ne += 1,
                CaseTag::Projected => np += 1,
                CaseTag::Rejected => nr += 1,
            }
        }
        let dy = norm(&y_new.iter().zip(&self.central.y).map(|(a, b)| a - b).collect::<Vec<_>>());
        self.central.y = y_new;
        self.central.delta = delta - cfg.a * delta * delta;
        self.central.k += 1;
        self.central.tau_max = cfg.tau0 / self.central.k as f64;

        // Center sends Φ_jᵀy, node returns x̂_j and a tag (counted on the power channel).
        let mut power = 0u64;
        let mut voltage = 0u64;
        for node in &model.nodes {
            let d = node.dims();
            power += 2 * d.power_len() as u64 + 1;
            voltage += 4;
        }
        for node in &model.nodes {
            let d = node.dims();
            self.ledger.power_down += d.power_len() as u64;
            self.ledger.power_up += d.power_len() as u64 + 1;
            self.ledger.voltage_down += 2;
            self.ledger.voltage_up += 2;
        }
        let relaxed: Vec<f64> = steps.iter().map(|s| s.cost).collect();
        let (h, w) = surrogate_and_lagrangian(model, &self.xs(), &self.central.y, &self.zs(), &relaxed);
        self.last_steps = steps;
        self.trace.push(TraceRow {
            k: self.central.k,
            w,
            h,
            dx: libm::sqrt(dx2),
            dy,
            dz: libm::sqrt(dz2),
            n_exact: ne,
            n_proj: np,
            n_reject: nr,
            max_node_ms: max_ms,
            msgs_power: power,
            msgs_voltage: voltage,
        });
        self.trace.last().unwrap()
    }

    pub fn run<E: Executor>(&mut self, exec: &E) -> RunStatus {
        while self.central.k < self.config.max_iter {
            self.iterate_once(exec);
            if converged(&self.trace, self.config.tol) {
                return RunStatus::Converged;
            }
        }
        RunStatus::MaxIter
    }
}

/// True when the last three iterations have successive relative changes of
/// `W` within `tol`.
pub fn converged(trace: &[TraceRow], tol: f64) -> bool {
    if trace.len() < 3 {
        return false;
    }
    let n = trace.len();
    (n - 2..n).all(|k| {
        let (w, prev) = (trace[k].w, trace[k - 1].w);
        (w - prev).abs() / w.abs().max(1.0) <= tol
    })
}

/// Stop when converged or when the iteration budget is spent.
pub fn termination_check(trace: &[TraceRow], config: &EngineConfig) -> bool {
    converged(trace, config.tol) || trace.last().is_some_and(|r| r.k >= config.max_iter)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub status: RunStatus,
    pub iterations: usize,
    /// Bus voltages from the ω channel of the final `y`.
    pub voltages: Vec<Complex64>,
    /// Voltage implied by the power channel in the split layout (equal to
    /// `voltages` in the shared one).
    pub voltages_power: Vec<Complex64>,
    pub pg: Vec<f64>,
    pub qg: Vec<f64>,
    /// Total cost in $/h including constant terms.
    pub objective: f64,
    /// `gᵀdiag(a)g + 2bᵀg` in the per-unit convention.
    pub objective_variable: f64,
    pub trace: Vec<TraceRow>,
    pub ledger: CommLedger,
    pub tags: Vec<CaseTag>,
    pub y: Vec<f64>,
}

/// Build everything from a case and run to termination.
pub fn run<E: Executor>(case: &NetworkCase, config: &EngineConfig, exec: &E) -> Result<RunResult> {
    let adm = build_admittance(case)?;
    let model = build_star_model(case, &adm, config.model_config())?;
    let mut eng = Engine::initialize(&model, config.clone())?;
    let status = eng.run(exec);
    Ok(finish(&eng, case, &adm, status))
}

pub fn finish(eng: &Engine<'_>, case: &NetworkCase, adm: &AdmittanceModel, status: RunStatus) -> RunResult {
    let model = eng.model;
    let y = &eng.central.y;
    let voltages = model.voltage(y);
    let nb = model.nb;
    let voltages_power = match model.config.layout {
        ChannelLayout::Shared => voltages.clone(),
        ChannelLayout::Split => (0..nb).map(|j| Complex64::new(y[j], y[j + nb])).collect(),
    };
    let (pg, qg) = generation_from_voltage(model, case, adm, &voltages);
    RunResult {
        status,
        iterations: eng.central.k,
        objective: total_cost(&pg, case),
        objective_variable: central_objective(&pg, case),
        voltages,
        voltages_power,
        pg,
        qg,
        trace: eng.trace.clone(),
        ledger: eng.ledger,
        tags: eng.nodes.iter().map(|n| n.last_case).collect(),
        y: y.clone(),
    }
}
