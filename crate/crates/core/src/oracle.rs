//! Exhaustive grid search for tiny instances, used to cross-check the
//! optimizers.
//!
//! Bandwidth is split over all links on a simplex grid with the whole budget
//! in use: any leftover could go to a gateway link, which only adds incoming
//! traffic. Gateway power is likewise always spent in full. UAV power is
//! different, since more outgoing power can break flow conservation, so each
//! UAV's simplex carries an extra "unused" share.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::radio::{shannon, Allocation, Gains, TOL_FEAS};
use crate::scenario::{Placement, Scenario};

/// Largest instance the oracle accepts.
pub const MAX_UAVS: usize = 2;
pub const MAX_USERS: usize = 2;
/// Cap on the number of evaluated (placement, allocation) pairs.
pub const MAX_EVALUATIONS: u128 = 10_000_000;

/// Best point found by [`brute_force_oracle`].
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub placement: Placement,
    pub allocation: Allocation,
    /// Common throughput (bps).
    pub eta: f64,
    pub evaluations: u128,
}

/// Number of ways to write `total` as an ordered sum of `parts` nonnegative
/// integers.
fn simplex_size(total: usize, parts: usize) -> u128 {
    if parts == 0 {
        return u128::from(total == 0);
    }
    // C(total + parts - 1, parts - 1)
    let (n, k) = ((total + parts - 1) as u128, (parts - 1) as u128);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// All compositions of `total` into `parts`, in lexicographic order.
fn simplex_points(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for v in 0..=left {
            prefix.push(v);
            rec(left - v, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

/// Link order for the bandwidth simplex: access `(m, k)` row-major, then
/// gateway `m`, then backhaul `(m, n)`, `n != m`.
struct Links {
    m: usize,
    k: usize,
}

impl Links {
    fn count(&self) -> usize {
        self.m * self.k + self.m + self.m * (self.m - 1)
    }
    fn access(&self, m: usize, k: usize) -> usize {
        m * self.k + k
    }
    fn gateway(&self, m: usize) -> usize {
        self.m * self.k + m
    }
    fn backhaul(&self, m: usize, n: usize) -> usize {
        let col = if n < m { n } else { n - 1 };
        self.m * self.k + self.m + m * (self.m - 1) + col
    }
    /// Links transmitted by UAV `m`: its access links, then its backhaul
    /// links in increasing `n`.
    fn uav_outgoing(&self, m: usize) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.k).map(|k| self.access(m, k)).collect();
        v.extend((0..self.m).filter(|&n| n != m).map(|n| self.backhaul(m, n)));
        v
    }
}

/// Exhaustive search over `placement_grid` and simplex grids of step
/// `1 / alloc_resolution` for bandwidth and power shares.
///
/// Ties are broken in favor of the first point in enumeration order
/// (placements in the given order, then bandwidth, UAV power and gateway
/// power grids lexicographically).
pub fn brute_force_oracle(
    scenario: &Scenario,
    placement_grid: &[Placement],
    alloc_resolution: usize,
) -> Result<OracleResult> {
    let (mc, kc) = (scenario.num_uavs(), scenario.num_users());
    if mc > MAX_UAVS || kc > MAX_USERS {
        return Err(Error::InvalidArgument(alloc::format!(
            "oracle handles at most {MAX_UAVS} UAVs and {MAX_USERS} users, got {mc} and {kc}"
        )));
    }
    if alloc_resolution == 0 {
        return Err(Error::InvalidArgument("alloc_resolution must be at least 1".into()));
    }
    if placement_grid.is_empty() {
        return Err(Error::InvalidArgument("placement grid is empty".into()));
    }
    if let Some(p) = placement_grid.iter().find(|p| p.len() != mc) {
        return Err(Error::DimensionMismatch {
            what: "placement",
            expected: mc,
            found: p.len(),
        });
    }

    let links = Links { m: mc, k: kc };
    let r = alloc_resolution;
    let out_parts = kc + mc - 1 + 1;
    let evaluations = (placement_grid.len() as u128)
        .saturating_mul(simplex_size(r, links.count()))
        .saturating_mul(simplex_size(r, out_parts).saturating_pow(mc as u32))
        .saturating_mul(simplex_size(r, mc));
    if evaluations > MAX_EVALUATIONS {
        return Err(Error::InstanceTooLarge {
            evaluations,
            limit: MAX_EVALUATIONS,
        });
    }

    let bw_grid = simplex_points(r, links.count());
    let uav_grid = simplex_points(r, out_parts);
    let gw_grid = simplex_points(r, mc);
    let outgoing: Vec<Vec<usize>> = (0..mc).map(|m| links.uav_outgoing(m)).collect();
    // Every combination of per-UAV power points, lexicographic in UAV index.
    let uav_combos: Vec<Vec<usize>> = {
        let mut combos = vec![Vec::new()];
        for _ in 0..mc {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    (0..uav_grid.len()).map(move |i| {
                        let mut c = c.clone();
                        c.push(i);
                        c
                    })
                })
                .collect();
        }
        combos
    };

    let b = scenario.total_bandwidth();
    let n0 = scenario.radio().noise_density();
    let step = 1.0 / r as f64;
    let mut best: Option<(usize, usize, usize, usize, f64)> = None;
    let mut power = vec![0.0; links.count()];
    let mut rate = vec![0.0; links.count()];

    for (pi, placement) in placement_grid.iter().enumerate() {
        let gains = Gains::new(placement, scenario);
        let mut link_gain = vec![0.0; links.count()];
        for m in 0..mc {
            for k in 0..kc {
                link_gain[links.access(m, k)] = gains.access[m][k];
            }
            link_gain[links.gateway(m)] = gains.gateway[m];
            for n in 0..mc {
                if n != m {
                    link_gain[links.backhaul(m, n)] = gains.backhaul[m][n];
                }
            }
        }
        for (bi, bw) in bw_grid.iter().enumerate() {
            for (ui, combo) in uav_combos.iter().enumerate() {
                for m in 0..mc {
                    let shares = &uav_grid[combo[m]];
                    for (slot, &l) in outgoing[m].iter().enumerate() {
                        power[l] = shares[slot] as f64 * step * scenario.uav_power()[m];
                    }
                }
                for (gi, gw) in gw_grid.iter().enumerate() {
                    for m in 0..mc {
                        power[links.gateway(m)] = gw[m] as f64 * step * scenario.gateway_power();
                    }
                    for l in 0..links.count() {
                        let w = bw[l] as f64 * step * b;
                        rate[l] = shannon(w, link_gain[l] * power[l] / n0);
                    }
                    let flows_ok = (0..mc).all(|m| {
                        let incoming = rate[links.gateway(m)]
                            + (0..mc).filter(|&n| n != m).map(|n| rate[links.backhaul(n, m)]).sum::<f64>();
                        let out: f64 = outgoing[m].iter().map(|&l| rate[l]).sum();
                        incoming - out >= -TOL_FEAS * incoming.max(out).max(1.0)
                    });
                    if !flows_ok {
                        continue;
                    }
                    let eta = (0..kc)
                        .map(|k| (0..mc).map(|m| rate[links.access(m, k)]).sum::<f64>())
                        .fold(f64::INFINITY, f64::min);
                    if best.is_none_or(|(.., e)| eta > e) {
                        best = Some((pi, bi, ui, gi, eta));
                    }
                }
            }
        }
    }

    // The zero-power point is always flow-feasible, so `best` is set.
    let (pi, bi, ui, gi, eta) = best.ok_or_else(|| Error::Infeasible("no grid point conserves flow".into()))?;
    let mut alloc = Allocation::zeros(mc, kc);
    let bw = &bw_grid[bi];
    let share = |v: usize, total: f64| v as f64 * step * total;
    for m in 0..mc {
        let shares = &uav_grid[uav_combos[ui][m]];
        for k in 0..kc {
            alloc.access_bw[m][k] = share(bw[links.access(m, k)], b);
            alloc.access_pw[m][k] = share(shares[k], scenario.uav_power()[m]);
        }
        let mut slot = kc;
        for n in 0..mc {
            if n != m {
                alloc.backhaul_bw[m][n] = share(bw[links.backhaul(m, n)], b);
                alloc.backhaul_pw[m][n] = share(shares[slot], scenario.uav_power()[m]);
                slot += 1;
            }
        }
        alloc.gateway_bw[m] = share(bw[links.gateway(m)], b);
        alloc.gateway_pw[m] = share(gw_grid[gi][m], scenario.gateway_power());
    }
    Ok(OracleResult {
        placement: placement_grid[pi].clone(),
        allocation: alloc,
        eta,
        evaluations,
    })
}

/// Square lattice of single-UAV placements with `n x n` points spanning
/// `[min, max]` in both coordinates (endpoints included).
pub fn single_uav_lattice(min: [f64; 2], max: [f64; 2], n: usize) -> Vec<Placement> {
    let n = n.max(2);
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let fx = i as f64 / (n - 1) as f64;
            let fy = j as f64 / (n - 1) as f64;
            out.push(Placement {
                uav_positions: vec![[min[0] + fx * (max[0] - min[0]), min[1] + fy * (max[1] - min[1])]],
            });
        }
    }
    out
}
