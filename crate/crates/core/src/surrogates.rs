//! First-order Taylor surrogates of the link-rate functions.
//!
//! Under a fixed placement each rate `w log2(1 + gamma p / w)` is jointly
//! concave in bandwidth and power, so its tangent plane over-estimates it
//! (type I). Under a fixed allocation the rate is convex in the squared link
//! distance, so its tangent line in that variable under-estimates it (type II).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::math::{self, LN_2, LOG2_E};
use crate::radio::{shannon, Allocation, Gains, D_MIN};
use crate::scenario::{Placement, Scenario};

/// Relative bandwidth floor (fraction of `B`) for expansion points.
pub const EPS_BW_REL: f64 = 1e-6;

/// Value and partial derivatives of `w log2(1 + gamma p / w)` for `w > 0`.
///
/// `gamma` is gain over noise density, so `gamma * p` is in Hz.
#[inline]
pub(crate) fn rate_with_gradient(w: f64, p: f64, gamma: f64) -> (f64, f64, f64) {
    let x = gamma * p;
    let value = w * math::log2_1p(x / w);
    let denom = LN_2 * (w + x);
    let d_w = math::log2_1p(x / w) - x / denom;
    let d_p = w * gamma / denom;
    (value, d_w, d_p)
}

/// Analytic partial derivatives `(d/dw, d/dp)` of [`crate::radio::link_rate`].
pub fn link_rate_partials(bandwidth: f64, power: f64, gain: f64, n0: f64) -> Result<(f64, f64)> {
    if !(bandwidth > 0.0) || !(power >= 0.0) || !(gain > 0.0) || !(n0 > 0.0) {
        return Err(invalid("partials need positive bandwidth, gain, n0 and non-negative power"));
    }
    let (_, dw, dp) = rate_with_gradient(bandwidth, power, gain / n0);
    Ok((dw, dp))
}

/// Tangent-plane over-estimator of the link rate at `(ref_bandwidth, ref_power)`.
///
/// Affine in `(bandwidth, power)`; equals the rate at the reference point.
pub fn surrogate_i_rate(
    bandwidth: f64,
    power: f64,
    ref_bandwidth: f64,
    ref_power: f64,
    gain: f64,
    n0: f64,
) -> Result<f64> {
    if !(ref_bandwidth > 0.0) {
        return Err(invalid("expansion bandwidth must be above the floor"));
    }
    if !(ref_power >= 0.0) || !(gain > 0.0) || !(n0 > 0.0) {
        return Err(invalid("expansion power must be non-negative and gain, n0 positive"));
    }
    Ok(tangent_plane(bandwidth, power, ref_bandwidth, ref_power, gain / n0))
}

#[inline]
pub(crate) fn tangent_plane(w: f64, p: f64, w_ref: f64, p_ref: f64, gamma: f64) -> f64 {
    let (f0, dw, dp) = rate_with_gradient(w_ref, p_ref, gamma);
    f0 + dw * (w - w_ref) + dp * (p - p_ref)
}

/// Value and slope (per m^2) of the type-II surrogate at its reference point.
#[inline]
pub(crate) fn distance_tangent(w: f64, p: f64, ref_sq: f64, altitude_sq: f64, gamma0: f64) -> (f64, f64) {
    if w <= 0.0 || p <= 0.0 {
        return (0.0, 0.0);
    }
    let d0 = altitude_sq + ref_sq;
    let value = shannon(w, gamma0 * p / d0);
    let slope = -(w * p * gamma0 * LOG2_E) / (w * d0 * d0 + p * gamma0 * d0);
    (value, slope)
}

/// Tangent-line under-estimator of the link rate in the squared horizontal
/// distance `sq_distance`, expanded at `ref_sq_distance`.
///
/// Use `altitude_sq = H^2` for gateway and access links and `0` for UAV-to-UAV
/// links. Affine in `sq_distance`.
pub fn surrogate_ii_rate(
    bandwidth: f64,
    power: f64,
    sq_distance: f64,
    ref_sq_distance: f64,
    altitude_sq: f64,
    gamma0: f64,
) -> Result<f64> {
    if !(bandwidth > 0.0) {
        return Err(invalid("type-II surrogate needs positive bandwidth"));
    }
    if !(power >= 0.0) || !(ref_sq_distance >= 0.0) || !(altitude_sq >= 0.0) || !(gamma0 > 0.0) {
        return Err(invalid("type-II surrogate arguments out of domain"));
    }
    if altitude_sq + ref_sq_distance <= 0.0 {
        return Err(invalid("reference distance must be positive"));
    }
    let (value, slope) = distance_tangent(bandwidth, power, ref_sq_distance, altitude_sq, gamma0);
    Ok(value + slope * (sq_distance - ref_sq_distance))
}

/// Allocation iterate around which the flow constraint is linearized, with
/// the channel gains of the (fixed) placement.
#[derive(Debug, Clone)]
pub struct ResourceExpansionPoint {
    allocation: Allocation,
    pub(crate) gains: Gains,
    eps_bw: f64,
}

impl ResourceExpansionPoint {
    /// Bandwidths below `EPS_BW_REL * B` are lifted to that floor.
    pub fn new(allocation: &Allocation, placement: &Placement, scenario: &Scenario) -> Result<Self> {
        allocation.check_dims(scenario)?;
        let eps_bw = EPS_BW_REL * scenario.total_bandwidth();
        let mut a = allocation.clone();
        let m_count = scenario.num_uavs();
        for m in 0..m_count {
            for w in &mut a.access_bw[m] {
                *w = w.max(eps_bw);
            }
            for n in 0..m_count {
                if n != m {
                    a.backhaul_bw[m][n] = a.backhaul_bw[m][n].max(eps_bw);
                }
            }
            a.gateway_bw[m] = a.gateway_bw[m].max(eps_bw);
        }
        Ok(Self {
            allocation: a,
            gains: Gains::new(placement, scenario),
            eps_bw,
        })
    }

    pub fn allocation(&self) -> &Allocation {
        &self.allocation
    }

    pub fn eps_bw(&self) -> f64 {
        self.eps_bw
    }
}

/// Flow residual with outgoing rates replaced by their type-I surrogates:
/// `incoming(true) - outgoing(surrogate)` per UAV, in bps.
pub fn resource_constraint_residuals(
    alloc: &Allocation,
    expansion: &ResourceExpansionPoint,
    scenario: &Scenario,
) -> Result<Vec<f64>> {
    alloc.check_dims(scenario)?;
    let m_count = scenario.num_uavs();
    let n0 = scenario.radio().noise_density();
    let g = &expansion.gains;
    let e = &expansion.allocation;
    let mut out = vec![0.0; m_count];
    for m in 0..m_count {
        let mut incoming = shannon(alloc.gateway_bw[m], g.gateway[m] * alloc.gateway_pw[m] / n0);
        let mut outgoing = 0.0;
        for n in 0..m_count {
            if n == m {
                continue;
            }
            incoming += shannon(alloc.backhaul_bw[n][m], g.backhaul[n][m] * alloc.backhaul_pw[n][m] / n0);
            outgoing += tangent_plane(
                alloc.backhaul_bw[m][n],
                alloc.backhaul_pw[m][n],
                e.backhaul_bw[m][n],
                e.backhaul_pw[m][n],
                g.backhaul[m][n] / n0,
            );
        }
        for k in 0..scenario.num_users() {
            outgoing += tangent_plane(
                alloc.access_bw[m][k],
                alloc.access_pw[m][k],
                e.access_bw[m][k],
                e.access_pw[m][k],
                g.access[m][k] / n0,
            );
        }
        out[m] = incoming - outgoing;
    }
    Ok(out)
}

/// Reference placement and its squared horizontal distances.
#[derive(Debug, Clone)]
pub struct PlacementExpansionPoint {
    placement: Placement,
    /// `|w_0 - u_m|^2`
    pub gateway_sq: Vec<f64>,
    /// `|u_n - u_m|^2`, clamped at `D_MIN^2`; indexed `[n][m]`.
    pub uav_sq: Vec<Vec<f64>>,
    /// `|u_m - w_k|^2`
    pub access_sq: Vec<Vec<f64>>,
}

impl PlacementExpansionPoint {
    pub fn new(placement: &Placement, scenario: &Scenario) -> Result<Self> {
        let m_count = scenario.num_uavs();
        if placement.len() != m_count {
            return Err(Error::DimensionMismatch {
                what: "placement",
                expected: m_count,
                found: placement.len(),
            });
        }
        let geo = Geometry::new(placement, scenario);
        Ok(Self {
            placement: placement.clone(),
            gateway_sq: geo.gateway_sq,
            uav_sq: geo.uav_sq,
            access_sq: geo.access_sq,
        })
    }

    pub fn placement(&self) -> &Placement {
        &self.placement
    }
}

/// Squared horizontal distances of a placement (UAV separations clamped).
pub(crate) struct Geometry {
    pub gateway_sq: Vec<f64>,
    pub uav_sq: Vec<Vec<f64>>,
    pub access_sq: Vec<Vec<f64>>,
}

impl Geometry {
    pub fn new(placement: &Placement, scenario: &Scenario) -> Self {
        let m_count = scenario.num_uavs();
        let gw = scenario.gateway();
        let sq = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]);
        Self {
            gateway_sq: (0..m_count)
                .map(|m| sq(placement.position(m), [gw.x, gw.y]))
                .collect(),
            uav_sq: (0..m_count)
                .map(|n| {
                    (0..m_count)
                        .map(|m| {
                            if n == m {
                                0.0
                            } else {
                                sq(placement.position(n), placement.position(m)).max(D_MIN * D_MIN)
                            }
                        })
                        .collect()
                })
                .collect(),
            access_sq: (0..m_count)
                .map(|m| {
                    scenario
                        .users()
                        .iter()
                        .map(|u| sq(placement.position(m), [u.x, u.y]))
                        .collect()
                })
                .collect(),
        }
    }
}

/// Placement-subproblem residuals at `placement` for a fixed allocation:
/// `(per-UAV flow residual, per-user surrogate throughput)`, both in bps.
///
/// Incoming gateway and backhaul rates, and every access rate feeding the
/// user throughput, use type-II surrogates; outgoing rates on the flow
/// constraint stay exact.
pub fn placement_constraint_residuals(
    placement: &Placement,
    expansion: &PlacementExpansionPoint,
    alloc: &Allocation,
    scenario: &Scenario,
) -> Result<(Vec<f64>, Vec<f64>)> {
    alloc.check_dims(scenario)?;
    if placement.len() != scenario.num_uavs() {
        return Err(Error::DimensionMismatch {
            what: "placement",
            expected: scenario.num_uavs(),
            found: placement.len(),
        });
    }
    let m_count = scenario.num_uavs();
    let k_count = scenario.num_users();
    let gamma0 = scenario.radio().gamma0();
    let h2 = scenario.altitude() * scenario.altitude();
    let now = Geometry::new(placement, scenario);
    let lin = |w: f64, p: f64, s: f64, s_ref: f64, alt: f64| {
        let (v, slope) = distance_tangent(w, p, s_ref, alt, gamma0);
        v + slope * (s - s_ref)
    };
    let mut flow = vec![0.0; m_count];
    for m in 0..m_count {
        let mut incoming = lin(
            alloc.gateway_bw[m],
            alloc.gateway_pw[m],
            now.gateway_sq[m],
            expansion.gateway_sq[m],
            h2,
        );
        let mut outgoing = 0.0;
        for n in 0..m_count {
            if n == m {
                continue;
            }
            incoming += lin(
                alloc.backhaul_bw[n][m],
                alloc.backhaul_pw[n][m],
                now.uav_sq[n][m],
                expansion.uav_sq[n][m],
                0.0,
            );
            outgoing += shannon(
                alloc.backhaul_bw[m][n],
                gamma0 * alloc.backhaul_pw[m][n] / now.uav_sq[m][n],
            );
        }
        for k in 0..k_count {
            outgoing += shannon(
                alloc.access_bw[m][k],
                gamma0 * alloc.access_pw[m][k] / (h2 + now.access_sq[m][k]),
            );
        }
        flow[m] = incoming - outgoing;
    }
    let users = (0..k_count)
        .map(|k| {
            (0..m_count)
                .map(|m| {
                    lin(
                        alloc.access_bw[m][k],
                        alloc.access_pw[m][k],
                        now.access_sq[m][k],
                        expansion.access_sq[m][k],
                        h2,
                    )
                })
                .sum()
        })
        .collect();
    Ok((flow, users))
}
