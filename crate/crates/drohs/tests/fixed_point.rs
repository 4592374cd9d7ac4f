// SPDX-License-Identifier: Apache-2.0

//! Starting at the reference optimum with its optimal multipliers, the
//! iteration should stay put. This checks the node problems, the lift and the
//! central update against an independently computed optimum.

mod common;

use common::multipliers::set_optimal_multipliers;
use drohs_core::admittance::build_admittance;
use drohs_core::diagnostics::phase_align_and_compare;
use drohs_core::engine::{finish, Engine, EngineConfig, RunStatus, Sequential, Start};
use drohs_core::tensor::build_star_model;

#[test]
fn case9_reference_is_stationary() {
    let case = common::case("case9");
    let reference = common::reference("case9");
    let mut warm = reference.v_re.clone();
    warm.extend(&reference.v_im);
    // A small cost scale keeps ρI + 2λĪ positive definite in every node, so
    // the optimum is also the minimizer of each node problem.
    let cfg = EngineConfig { start: Start::Warm(warm), cost_scale: 1e-4, max_iter: 10, ..EngineConfig::default() };
    let adm = build_admittance(&case).unwrap();
    let model = build_star_model(&case, &adm, cfg.model_config()).unwrap();
    let mut eng = Engine::initialize(&model, cfg.clone()).unwrap();
    let fit = set_optimal_multipliers(&mut eng, &case, &adm, &reference);
    assert!(fit.residual < 1e-10, "multiplier fit residual {:e}", fit.residual);
    assert!(fit.phi_z < 1e-8, "Φz* {:e}", fit.phi_z);

    let vref = reference.voltages();
    for _ in 0..cfg.max_iter {
        eng.iterate_once(&Sequential);
        let r = finish(&eng, &case, &adm, RunStatus::MaxIter);
        let d = phase_align_and_compare(&r.voltages, &vref).unwrap().distance;
        assert!(d < 1e-5, "drifted to {d:e} at k={}", eng.central.k);
    }
}

#[test]
fn case9_zero_multipliers_move_away() {
    // Control for the test above: without the multipliers the costs pull the
    // voltages off the optimum.
    let case = common::case("case9");
    let reference = common::reference("case9");
    let mut warm = reference.v_re.clone();
    warm.extend(&reference.v_im);
    let cfg = EngineConfig { start: Start::Warm(warm), cost_scale: 1e-4, z_init_scale: 0.0, max_iter: 10, ..EngineConfig::default() };
    let adm = build_admittance(&case).unwrap();
    let model = build_star_model(&case, &adm, cfg.model_config()).unwrap();
    let mut eng = Engine::initialize(&model, cfg.clone()).unwrap();
    eng.run(&Sequential);
    let r = finish(&eng, &case, &adm, RunStatus::MaxIter);
    let d = phase_align_and_compare(&r.voltages, &reference.voltages()).unwrap().distance;
    assert!(d > 1e-4, "distance {d:e}");
}
