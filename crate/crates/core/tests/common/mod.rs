#![allow(dead_code)]

use skyhaul_core::{build_default_radio, dbm_to_watts, GroundNode, Placement, Scenario};

pub const B: f64 = 10e6;
pub const H: f64 = 100.0;

pub fn scenario(m: usize, users: &[[f64; 2]], gateway: [f64; 2], power_dbm: f64) -> Scenario {
    let radio = build_default_radio(5e9, dbm_to_watts(-169.0)).unwrap();
    let p = dbm_to_watts(power_dbm);
    Scenario::new(
        m,
        users.iter().map(|u| GroundNode::new(u[0], u[1])).collect(),
        GroundNode::new(gateway[0], gateway[1]),
        H,
        B,
        vec![p; m],
        p,
        radio,
    )
    .unwrap()
}

pub fn at(points: &[[f64; 2]]) -> Placement {
    Placement::new(points.to_vec()).unwrap()
}

/// One UAV halfway between the gateway at the origin and a user 2 km away.
/// Both links see the same channel, so the optimum gives each half the band.
pub fn relay_k1() -> (Scenario, Placement) {
    (scenario(1, &[[2000.0, 0.0]], [0.0, 0.0], 30.0), at(&[[1000.0, 0.0]]))
}

/// One UAV at the origin with the gateway and both users on a 1 km circle
/// around it: the optimum gives the gateway half the band and each user a
/// quarter, with the UAV power split evenly.
pub fn relay_k2_circle() -> (Scenario, Placement) {
    let s = 1000.0 * (3f64).sqrt() / 2.0;
    (
        scenario(1, &[[-500.0, s], [-500.0, -s]], [1000.0, 0.0], 30.0),
        at(&[[0.0, 0.0]]),
    )
}

/// One UAV serving a user that stands at the gateway: the joint optimum
/// hovers right above them with the band split in half.
pub fn collocated_k1() -> Scenario {
    scenario(1, &[[0.0, 0.0]], [0.0, 0.0], 30.0)
}

/// Two users 1 km either side of the gateway. The gateway power is cut so
/// that, with the UAV above the gateway, all three links have the same SNR
/// per Hz; the joint optimum is then the point above the gateway with half
/// the band on the gateway link and a quarter on each access link.
pub fn symmetric_k2() -> Scenario {
    let radio = build_default_radio(5e9, dbm_to_watts(-169.0)).unwrap();
    let p = dbm_to_watts(30.0);
    let users = vec![GroundNode::new(-1000.0, 0.0), GroundNode::new(1000.0, 0.0)];
    let p0 = p * H * H / (H * H + 1000.0 * 1000.0);
    Scenario::new(1, users, GroundNode::new(0.0, 0.0), H, B, vec![p], p0, radio).unwrap()
}

/// Rate of a link with bandwidth `w`, power `p` and 3D distance squared `d2`.
pub fn shannon(s: &Scenario, w: f64, p: f64, d2: f64) -> f64 {
    w * (1.0 + s.radio().gamma0() * p / (w * d2)).log2()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
