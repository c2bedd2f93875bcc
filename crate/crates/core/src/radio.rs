//! Free-space link model: gains, Shannon rates, rate reports and feasibility.
//!
//! Access (UAV to user) and gateway (gateway to UAV) links include the common
//! flying altitude `H`; UAV-to-UAV links use horizontal separation only since
//! every UAV flies at the same altitude. Backhaul separations are clamped at
//! [`D_MIN`] so that colliding UAVs do not produce infinite gains.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math;
use crate::scenario::{GroundNode, Placement, Scenario};

/// Reference distance (m) below which UAV-to-UAV separations are clamped.
pub const D_MIN: f64 = 1.0;

/// Relative tolerance applied to every feasibility check.
pub const TOL_FEAS: f64 = 1e-6;

/// Bandwidth (Hz) and transmit power (W) of every link.
///
/// Matrices are indexed `[transmitter][receiver]`; backhaul diagonals are
/// unused and kept at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub access_bw: Vec<Vec<f64>>,
    pub gateway_bw: Vec<f64>,
    pub backhaul_bw: Vec<Vec<f64>>,
    pub access_pw: Vec<Vec<f64>>,
    pub gateway_pw: Vec<f64>,
    pub backhaul_pw: Vec<Vec<f64>>,
}

impl Allocation {
    pub fn zeros(num_uavs: usize, num_users: usize) -> Self {
        Self {
            access_bw: vec![vec![0.0; num_users]; num_uavs],
            gateway_bw: vec![0.0; num_uavs],
            backhaul_bw: vec![vec![0.0; num_uavs]; num_uavs],
            access_pw: vec![vec![0.0; num_users]; num_uavs],
            gateway_pw: vec![0.0; num_uavs],
            backhaul_pw: vec![vec![0.0; num_uavs]; num_uavs],
        }
    }

    /// Every link gets `B / (MK + M(M-1) + M)`; each UAV splits its budget
    /// over its `K + M - 1` outgoing links and the gateway over `M` links.
    pub fn equal_split(scenario: &Scenario) -> Self {
        let m_count = scenario.num_uavs();
        let k_count = scenario.num_users();
        let bw = scenario.total_bandwidth() / scenario.num_links() as f64;
        let mut a = Self::zeros(m_count, k_count);
        for m in 0..m_count {
            let pw = scenario.uav_power()[m] / (k_count + m_count - 1) as f64;
            for k in 0..k_count {
                a.access_bw[m][k] = bw;
                a.access_pw[m][k] = pw;
            }
            for n in 0..m_count {
                if n != m {
                    a.backhaul_bw[m][n] = bw;
                    a.backhaul_pw[m][n] = pw;
                }
            }
            a.gateway_bw[m] = bw;
            a.gateway_pw[m] = scenario.gateway_power() / m_count as f64;
        }
        a
    }

    pub fn num_uavs(&self) -> usize {
        self.gateway_bw.len()
    }

    pub fn num_users(&self) -> usize {
        self.access_bw.first().map_or(0, Vec::len)
    }

    /// Checks every matrix against the scenario's `M` and `K`.
    pub fn check_dims(&self, scenario: &Scenario) -> Result<()> {
        let m = scenario.num_uavs();
        let k = scenario.num_users();
        let rows = |what: &'static str, v: &Vec<Vec<f64>>, cols: usize| -> Result<()> {
            if v.len() != m {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: m,
                    found: v.len(),
                });
            }
            for r in v {
                if r.len() != cols {
                    return Err(Error::DimensionMismatch {
                        what,
                        expected: cols,
                        found: r.len(),
                    });
                }
            }
            Ok(())
        };
        rows("access bandwidth", &self.access_bw, k)?;
        rows("access power", &self.access_pw, k)?;
        rows("backhaul bandwidth", &self.backhaul_bw, m)?;
        rows("backhaul power", &self.backhaul_pw, m)?;
        for (what, v) in [
            ("gateway bandwidth", &self.gateway_bw),
            ("gateway power", &self.gateway_pw),
        ] {
            if v.len() != m {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: m,
                    found: v.len(),
                });
            }
        }
        Ok(())
    }

    /// Total bandwidth over all links (backhaul diagonal ignored).
    pub fn total_bandwidth(&self) -> f64 {
        let m_count = self.num_uavs();
        let mut sum: f64 = self.gateway_bw.iter().sum();
        for m in 0..m_count {
            sum += self.access_bw[m].iter().sum::<f64>();
            sum += (0..m_count)
                .filter(|&n| n != m)
                .map(|n| self.backhaul_bw[m][n])
                .sum::<f64>();
        }
        sum
    }

    /// Power radiated by UAV `m` over its access and backhaul links.
    pub fn uav_power(&self, m: usize) -> f64 {
        self.access_pw[m].iter().sum::<f64>()
            + (0..self.num_uavs())
                .filter(|&n| n != m)
                .map(|n| self.backhaul_pw[m][n])
                .sum::<f64>()
    }

    pub fn gateway_power(&self) -> f64 {
        self.gateway_pw.iter().sum()
    }
}

fn horizontal_sq(a: [f64; 2], b: GroundNode) -> f64 {
    let dx = a[0] - b.x;
    let dy = a[1] - b.y;
    dx * dx + dy * dy
}

fn separation_sq(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Channel gain from UAV `m` to user `k`: `beta0 / (H^2 + |u_m - w_k|^2)`.
pub fn access_gain(placement: &Placement, scenario: &Scenario, m: usize, k: usize) -> f64 {
    let h = scenario.altitude();
    scenario.radio().beta0() / (h * h + horizontal_sq(placement.position(m), scenario.user(k)))
}

/// Channel gain between UAVs `m` and `n`: `beta0 / max(|u_m - u_n|^2, D_MIN^2)`.
pub fn backhaul_gain(placement: &Placement, scenario: &Scenario, m: usize, n: usize) -> Result<f64> {
    if m == n {
        return Err(invalid("backhaul gain needs two distinct UAVs"));
    }
    let s = separation_sq(placement.position(m), placement.position(n));
    Ok(scenario.radio().beta0() / s.max(D_MIN * D_MIN))
}

/// Channel gain from the gateway to UAV `m`.
pub fn gateway_gain(placement: &Placement, scenario: &Scenario, m: usize) -> f64 {
    let h = scenario.altitude();
    scenario.radio().beta0() / (h * h + horizontal_sq(placement.position(m), scenario.gateway()))
}

/// `w log2(1 + x / w)` with the convention that a zero-bandwidth link carries
/// nothing. `x` is `gain * power / n0` (Hz).
#[inline]
pub(crate) fn shannon(w: f64, x: f64) -> f64 {
    if w <= 0.0 {
        0.0
    } else {
        w * math::log2_1p(x / w)
    }
}

/// Achievable rate (bps) of one orthogonal link.
pub fn link_rate(bandwidth: f64, power: f64, gain: f64, n0: f64) -> Result<f64> {
    if !(bandwidth >= 0.0) || !(power >= 0.0) {
        return Err(invalid("bandwidth and power must be non-negative"));
    }
    if !(gain > 0.0) || !(n0 > 0.0) {
        return Err(invalid("gain and noise density must be positive"));
    }
    Ok(shannon(bandwidth, gain * power / n0))
}

/// Link gains for a placement, precomputed once per evaluation.
#[derive(Debug, Clone)]
pub(crate) struct Gains {
    pub access: Vec<Vec<f64>>,
    pub gateway: Vec<f64>,
    pub backhaul: Vec<Vec<f64>>,
}

impl Gains {
    pub fn new(placement: &Placement, scenario: &Scenario) -> Self {
        let m_count = scenario.num_uavs();
        let access = (0..m_count)
            .map(|m| {
                (0..scenario.num_users())
                    .map(|k| access_gain(placement, scenario, m, k))
                    .collect()
            })
            .collect();
        let gateway = (0..m_count)
            .map(|m| gateway_gain(placement, scenario, m))
            .collect();
        let backhaul = (0..m_count)
            .map(|m| {
                (0..m_count)
                    .map(|n| backhaul_gain(placement, scenario, m, n).unwrap_or(0.0))
                    .collect()
            })
            .collect();
        Self {
            access,
            gateway,
            backhaul,
        }
    }
}

/// Every link rate plus derived per-user and per-UAV quantities (bps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub access_rate: Vec<Vec<f64>>,
    pub gateway_rate: Vec<f64>,
    pub backhaul_rate: Vec<Vec<f64>>,
    pub user_throughput: Vec<f64>,
    pub common_throughput: f64,
    /// Incoming minus outgoing rate at each UAV.
    pub flow_slack: Vec<f64>,
    pub flow_in: Vec<f64>,
    pub flow_out: Vec<f64>,
}

/// Evaluates every rate of `allocation` at `placement`.
pub fn evaluate(placement: &Placement, allocation: &Allocation, scenario: &Scenario) -> Result<RateReport> {
    allocation.check_dims(scenario)?;
    if placement.len() != scenario.num_uavs() {
        return Err(Error::DimensionMismatch {
            what: "placement",
            expected: scenario.num_uavs(),
            found: placement.len(),
        });
    }
    let gains = Gains::new(placement, scenario);
    Ok(evaluate_with_gains(&gains, allocation, scenario))
}

pub(crate) fn evaluate_with_gains(gains: &Gains, allocation: &Allocation, scenario: &Scenario) -> RateReport {
    let m_count = scenario.num_uavs();
    let k_count = scenario.num_users();
    let n0 = scenario.radio().noise_density();
    let access_rate: Vec<Vec<f64>> = (0..m_count)
        .map(|m| {
            (0..k_count)
                .map(|k| {
                    shannon(
                        allocation.access_bw[m][k],
                        gains.access[m][k] * allocation.access_pw[m][k] / n0,
                    )
                })
                .collect()
        })
        .collect();
    let gateway_rate: Vec<f64> = (0..m_count)
        .map(|m| shannon(allocation.gateway_bw[m], gains.gateway[m] * allocation.gateway_pw[m] / n0))
        .collect();
    let backhaul_rate: Vec<Vec<f64>> = (0..m_count)
        .map(|m| {
            (0..m_count)
                .map(|n| {
                    if n == m {
                        0.0
                    } else {
                        shannon(
                            allocation.backhaul_bw[m][n],
                            gains.backhaul[m][n] * allocation.backhaul_pw[m][n] / n0,
                        )
                    }
                })
                .collect()
        })
        .collect();
    let user_throughput: Vec<f64> = (0..k_count)
        .map(|k| (0..m_count).map(|m| access_rate[m][k]).sum())
        .collect();
    let common_throughput = user_throughput.iter().copied().fold(f64::INFINITY, f64::min);
    let mut flow_in = vec![0.0; m_count];
    let mut flow_out = vec![0.0; m_count];
    for m in 0..m_count {
        flow_in[m] = gateway_rate[m] + (0..m_count).map(|n| backhaul_rate[n][m]).sum::<f64>();
        flow_out[m] = access_rate[m].iter().sum::<f64>() + backhaul_rate[m].iter().sum::<f64>();
    }
    let flow_slack = flow_in.iter().zip(&flow_out).map(|(i, o)| i - o).collect();
    RateReport {
        access_rate,
        gateway_rate,
        backhaul_rate,
        user_throughput,
        common_throughput,
        flow_slack,
        flow_in,
        flow_out,
    }
}

/// Which constraint of the max-min problem a violation refers to (0-based indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintId {
    TotalBandwidth,
    UavPower(usize),
    GatewayPower,
    FlowConservation(usize),
    UserThroughput(usize),
    Nonnegativity,
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintId::TotalBandwidth => write!(f, "bandwidth-budget"),
            ConstraintId::UavPower(m) => write!(f, "uav-power[{}]", m + 1),
            ConstraintId::GatewayPower => write!(f, "gateway-power"),
            ConstraintId::FlowConservation(m) => write!(f, "flow-conservation[{}]", m + 1),
            ConstraintId::UserThroughput(k) => write!(f, "user-throughput[{}]", k + 1),
            ConstraintId::Nonnegativity => write!(f, "nonnegativity"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintId,
    /// Amount by which the constraint is exceeded, in its natural unit.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

/// Checks budgets, flow conservation, nonnegativity and `user_throughput >= eta`.
pub fn check_feasibility(
    placement: &Placement,
    allocation: &Allocation,
    scenario: &Scenario,
    eta: f64,
) -> Result<FeasibilityVerdict> {
    let report = evaluate(placement, allocation, scenario)?;
    Ok(check_report(&report, allocation, scenario, eta))
}

pub(crate) fn check_report(
    report: &RateReport,
    allocation: &Allocation,
    scenario: &Scenario,
    eta: f64,
) -> FeasibilityVerdict {
    let mut violations = Vec::new();
    let mut flag = |constraint, excess: f64, scale: f64| {
        if excess > TOL_FEAS * scale {
            violations.push(Violation {
                constraint,
                magnitude: excess,
            });
        }
    };
    let b = scenario.total_bandwidth();
    flag(ConstraintId::TotalBandwidth, allocation.total_bandwidth() - b, b);
    for m in 0..scenario.num_uavs() {
        let pm = scenario.uav_power()[m];
        flag(ConstraintId::UavPower(m), allocation.uav_power(m) - pm, pm);
    }
    let p0 = scenario.gateway_power();
    flag(ConstraintId::GatewayPower, allocation.gateway_power() - p0, p0);
    for m in 0..scenario.num_uavs() {
        let scale = report.flow_in[m].max(report.flow_out[m]).max(1.0);
        flag(ConstraintId::FlowConservation(m), -report.flow_slack[m], scale);
    }
    for (k, &r) in report.user_throughput.iter().enumerate() {
        flag(ConstraintId::UserThroughput(k), eta - r, eta.abs().max(1.0));
    }
    let most_negative = |rows: &[Vec<f64>], v: &[f64]| {
        rows.iter()
            .flatten()
            .chain(v.iter())
            .copied()
            .fold(0.0f64, f64::min)
    };
    let neg_bw = most_negative(&allocation.access_bw, &allocation.gateway_bw)
        .min(most_negative(&allocation.backhaul_bw, &[]));
    let neg_pw_uav = most_negative(&allocation.access_pw, &[]).min(most_negative(&allocation.backhaul_pw, &[]));
    let neg_pw_gw = most_negative(&[], &allocation.gateway_pw);
    let pmax = scenario.uav_power().iter().copied().fold(0.0, f64::max);
    if -neg_bw > TOL_FEAS * b || -neg_pw_uav > TOL_FEAS * pmax || -neg_pw_gw > TOL_FEAS * p0 {
        violations.push(Violation {
            constraint: ConstraintId::Nonnegativity,
            magnitude: -(neg_bw.min(neg_pw_uav).min(neg_pw_gw)),
        });
    }
    FeasibilityVerdict {
        feasible: violations.is_empty(),
        violations,
    }
}
