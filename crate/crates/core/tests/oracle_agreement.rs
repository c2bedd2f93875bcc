//! The SCP optimizers against exhaustive search on tiny instances.
//!
//! Each desk instance is laid out so that its exact optimum is a point of
//! the oracle's grid (see `common`). The oracle then has no resolution error
//! at the optimum and doubles as an upper bound on anything the optimizers
//! can reach.

mod common;

use common::*;
use skyhaul_core::oracle::single_uav_lattice;
use skyhaul_core::{
    benchmark_resource_only, brute_force_oracle, check_feasibility, evaluate, optimize_alternating,
    optimize_resources, Allocation, Placement, Scenario, ScpConfig, Solution,
};

fn resources(s: &Scenario, p: &Placement) -> f64 {
    let out = optimize_resources(s, p, &Allocation::equal_split(s), &ScpConfig::default()).unwrap();
    assert!(check_feasibility(p, &out.allocation, s, out.eta).unwrap().feasible);
    out.eta
}

fn alternating(s: &Scenario, start: &Placement) -> Solution {
    let sol = optimize_alternating(s, start, &ScpConfig::default()).unwrap();
    assert!(check_feasibility(&sol.placement, &sol.allocation, s, sol.eta).unwrap().feasible);
    sol
}

#[test]
fn single_user_resources_match_oracle_and_closed_form() {
    let (s, p) = relay_k1();
    let oracle = brute_force_oracle(&s, std::slice::from_ref(&p), 200).unwrap();
    let exact = shannon(&s, B / 2.0, s.uav_power()[0], H * H + 1000.0 * 1000.0);
    assert!(rel(oracle.eta, exact) < 1e-9, "oracle {} vs {}", oracle.eta, exact);

    let eta = resources(&s, &p);
    assert!(rel(eta, oracle.eta) < 0.01, "scp {eta} vs oracle {}", oracle.eta);

    let out = optimize_resources(&s, &p, &Allocation::equal_split(&s), &ScpConfig::default()).unwrap();
    let r = evaluate(&p, &out.allocation, &s).unwrap();
    assert!(rel(r.gateway_rate[0], r.access_rate[0][0]) < 0.01, "{r:?}");
}

#[test]
fn two_user_resources_match_oracle_and_closed_form() {
    let (s, p) = relay_k2_circle();
    let oracle = brute_force_oracle(&s, std::slice::from_ref(&p), 40).unwrap();
    let exact = shannon(&s, B / 4.0, s.uav_power()[0] / 2.0, H * H + 1000.0 * 1000.0);
    assert!(rel(oracle.eta, exact) < 1e-9, "oracle {} vs {}", oracle.eta, exact);

    let eta = resources(&s, &p);
    assert!(rel(eta, oracle.eta) < 0.01, "scp {eta} vs oracle {}", oracle.eta);
}

#[test]
fn collocated_user_joint_optimum() {
    let s = collocated_k1();
    let grid = single_uav_lattice([-1000.0, -1000.0], [1000.0, 1000.0], 21);
    let oracle = brute_force_oracle(&s, &grid, 148).unwrap();
    assert_eq!(oracle.placement.uav_positions[0], [0.0, 0.0]);
    let exact = shannon(&s, B / 2.0, s.uav_power()[0], H * H);
    assert!(rel(oracle.eta, exact) < 1e-9);

    let sol = alternating(&s, &s.start_placement());
    assert!(rel(sol.eta, oracle.eta) < 0.02, "alternating {} vs oracle {}", sol.eta, oracle.eta);

    // From elsewhere the run can only improve on its start and never beat
    // the exact optimum.
    let off = at(&[[600.0, -400.0]]);
    let sol = alternating(&s, &off);
    let base = benchmark_resource_only(&s, &off, &ScpConfig::default()).unwrap();
    assert!(sol.eta >= base.eta * (1.0 - 1e-6));
    assert!(sol.eta <= oracle.eta * (1.0 + 1e-6));
}

#[test]
fn symmetric_pair_joint_optimum() {
    let s = symmetric_k2();
    let grid = single_uav_lattice([-400.0, -400.0], [400.0, 400.0], 9);
    let oracle = brute_force_oracle(&s, &grid, 24).unwrap();
    assert_eq!(oracle.placement.uav_positions[0], [0.0, 0.0]);
    let exact = shannon(&s, B / 4.0, s.uav_power()[0] / 2.0, H * H + 1000.0 * 1000.0);
    assert!(rel(oracle.eta, exact) < 1e-9);

    let sol = alternating(&s, &s.start_placement());
    assert!(rel(sol.eta, oracle.eta) < 0.02);

    // Moving straight toward the user axis raises every rate at once, so
    // the placement loop walks all the way in.
    let sol = alternating(&s, &at(&[[0.0, 800.0]]));
    assert!(rel(sol.eta, oracle.eta) < 0.01, "alternating {} vs oracle {}", sol.eta, oracle.eta);
    assert!(sol.placement.uav_positions[0][1].abs() < 1.0);
}

/// On a gateway–UAV–user line the resource loop ends with the gateway and
/// access rates equal. With the allocation frozen, any horizontal move
/// raises one of them and lowers the other, so the placement loop has no
/// improving step and the alternation stops well short of the joint optimum
/// near either end of the line.
#[test]
fn alternation_stalls_on_a_balanced_relay() {
    let (s, mid) = relay_k1();
    assert_eq!(s.start_placement(), mid);
    let sol = alternating(&s, &mid);
    let base = resources(&s, &mid);
    assert!(rel(sol.eta, base) < 1e-3);

    let near_gateway = single_uav_lattice([0.0, -100.0], [200.0, 100.0], 21);
    let oracle = brute_force_oracle(&s, &near_gateway, 148).unwrap();
    assert!(oracle.eta > 1.02 * sol.eta, "oracle {} vs alternating {}", oracle.eta, sol.eta);
}
