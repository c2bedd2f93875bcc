//! Successive convex programming for the max-min throughput problem.
//!
//! * [`optimize_resources`] fixes the placement and repeatedly solves the
//!   allocation problem with outgoing rates on the flow constraint replaced by
//!   their tangent planes (over-estimators), so every solution stays feasible
//!   for the true constraints.
//! * [`optimize_placement`] fixes the allocation and repeatedly solves the
//!   placement problem with incoming and user rates replaced by their tangent
//!   lines in squared distance (under-estimators).
//! * [`optimize_alternating`] alternates the two.
//!
//! Bandwidths are normalized by `B`, powers by the transmitter's budget and
//! rates by `B` before they reach the barrier solver.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::convex::{self, AffineRow, Constraint, ConvexProgram, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::radio::{check_report, evaluate, evaluate_with_gains, shannon, Allocation, Gains, RateReport, D_MIN};
use crate::scenario::{Placement, Scenario};
use crate::surrogates::{distance_tangent, rate_with_gradient, Geometry, EPS_BW_REL};

/// Tuning knobs for the SCP loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScpConfig {
    /// Iteration cap for each run of the resource or placement loop.
    pub max_scp_iters: usize,
    /// Stop when `|eta_new - eta_old| <= rel_tol_eta * eta_new`.
    pub rel_tol_eta: f64,
    /// Cap on alternating rounds.
    pub max_alt_rounds: usize,
    /// Per-UAV step limit for placement updates (m); `None` disables it.
    pub trust_radius_m: Option<f64>,
    /// Reject placement steps that lower the true common throughput and
    /// retry with half the trust radius.
    pub safeguard: bool,
    #[serde(skip, default)]
    pub solver: SolverSettings,
}

impl Default for ScpConfig {
    fn default() -> Self {
        Self {
            max_scp_iters: 50,
            rel_tol_eta: 1e-3,
            max_alt_rounds: 20,
            trust_radius_m: Some(2000.0),
            safeguard: true,
            solver: SolverSettings::default(),
        }
    }
}

impl ScpConfig {
    /// Plain alternating SCP without step control.
    pub fn unguarded() -> Self {
        Self {
            trust_radius_m: None,
            safeguard: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_scp_iters == 0 || self.max_alt_rounds == 0 {
            return Err(Error::InvalidArgument("iteration caps must be at least 1".into()));
        }
        if !(self.rel_tol_eta > 0.0) {
            return Err(Error::InvalidArgument("rel_tol_eta must be positive".into()));
        }
        if let Some(r) = self.trust_radius_m {
            if !(r > 0.0) {
                return Err(Error::InvalidArgument("trust radius must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Resource,
    Placement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Alternating,
    ResourceOnly,
    PlacementOnly,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Alternating, Scheme::ResourceOnly, Scheme::PlacementOnly];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Alternating => "alternating",
            Scheme::ResourceOnly => "resource_only",
            Scheme::PlacementOnly => "placement_only",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxIters,
    Failed,
}

/// One accepted SCP iterate. `eta` is the true common throughput (bps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub round: usize,
    pub algorithm: Algorithm,
    pub iteration: usize,
    pub eta: f64,
}

/// An accepted iterate, as passed to observers.
pub struct Iterate<'a> {
    pub entry: TraceEntry,
    pub placement: &'a Placement,
    pub allocation: &'a Allocation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub scheme: Scheme,
    pub placement: Placement,
    pub allocation: Allocation,
    /// Common throughput (bps).
    pub eta: f64,
    pub report: RateReport,
    pub trace: Vec<TraceEntry>,
    pub status: RunStatus,
    pub rounds: usize,
}

/// Outcome of one run of the resource loop.
#[derive(Debug, Clone)]
pub struct ResourceOutcome {
    pub allocation: Allocation,
    pub eta: f64,
    pub trace: Vec<TraceEntry>,
    pub status: RunStatus,
}

/// Outcome of one run of the placement loop.
#[derive(Debug, Clone)]
pub struct PlacementOutcome {
    pub placement: Placement,
    pub eta: f64,
    pub trace: Vec<TraceEntry>,
    pub status: RunStatus,
}

type Observer<'o> = &'o mut dyn FnMut(Iterate<'_>);

fn converged(old: f64, new: f64, rel_tol: f64) -> bool {
    (new - old).abs() <= rel_tol * new.abs().max(f64::MIN_POSITIVE)
}

/// Slack allowed when comparing throughputs of consecutive iterates.
fn eta_slack(eta: f64) -> f64 {
    crate::radio::TOL_FEAS * eta.abs().max(1.0)
}

// ---------------------------------------------------------------------------
// Resource allocation subproblem

/// Variable layout: bandwidths of every link, then powers in the same order,
/// then `eta`.
struct LinkLayout {
    m: usize,
    k: usize,
}

impl LinkLayout {
    fn links(&self) -> usize {
        self.m * self.k + self.m + self.m * (self.m - 1)
    }
    fn access(&self, m: usize, k: usize) -> usize {
        m * self.k + k
    }
    fn gateway(&self, m: usize) -> usize {
        self.m * self.k + m
    }
    fn backhaul(&self, m: usize, n: usize) -> usize {
        debug_assert!(m != n);
        let col = if n < m { n } else { n - 1 };
        self.m * self.k + self.m + m * (self.m - 1) + col
    }
    fn power(&self, link: usize) -> usize {
        self.links() + link
    }
    fn eta(&self) -> usize {
        2 * self.links()
    }
    fn num_vars(&self) -> usize {
        2 * self.links() + 1
    }
}

/// Normalized per-link data: SNR coefficient and the two budget scales.
struct LinkScales {
    /// `gain * P_tx / (n0 * B)` per link index.
    gamma: Vec<f64>,
    /// Power budget of each link's transmitter.
    budget: Vec<f64>,
}

fn link_scales(layout: &LinkLayout, gains: &Gains, scenario: &Scenario) -> LinkScales {
    let n0 = scenario.radio().noise_density();
    let b = scenario.total_bandwidth();
    let mut gamma = vec![0.0; layout.links()];
    let mut budget = vec![0.0; layout.links()];
    for m in 0..layout.m {
        let pm = scenario.uav_power()[m];
        for k in 0..layout.k {
            let l = layout.access(m, k);
            gamma[l] = gains.access[m][k] * pm / (n0 * b);
            budget[l] = pm;
        }
        for n in 0..layout.m {
            if n != m {
                let l = layout.backhaul(m, n);
                gamma[l] = gains.backhaul[m][n] * pm / (n0 * b);
                budget[l] = pm;
            }
        }
        let l = layout.gateway(m);
        gamma[l] = gains.gateway[m] * scenario.gateway_power() / (n0 * b);
        budget[l] = scenario.gateway_power();
    }
    LinkScales { gamma, budget }
}

fn to_vector(layout: &LinkLayout, alloc: &Allocation, scenario: &Scenario, scales: &LinkScales) -> Vec<f64> {
    let b = scenario.total_bandwidth();
    let mut x = vec![0.0; layout.num_vars()];
    let mut put = |l: usize, w: f64, p: f64| {
        x[l] = w / b;
        x[layout.power(l)] = p / scales.budget[l];
    };
    for m in 0..layout.m {
        for k in 0..layout.k {
            put(layout.access(m, k), alloc.access_bw[m][k], alloc.access_pw[m][k]);
        }
        for n in 0..layout.m {
            if n != m {
                put(layout.backhaul(m, n), alloc.backhaul_bw[m][n], alloc.backhaul_pw[m][n]);
            }
        }
        put(layout.gateway(m), alloc.gateway_bw[m], alloc.gateway_pw[m]);
    }
    x
}

fn to_placement(layout: &LinkLayout, x: &[f64], scenario: &Scenario, scales: &LinkScales) -> Allocation {
    let b = scenario.total_bandwidth();
    let mut a = Allocation::zeros(layout.m, layout.k);
    let get = |l: usize| (x[l] * b, x[layout.power(l)] * scales.budget[l]);
    for m in 0..layout.m {
        for k in 0..layout.k {
            (a.access_bw[m][k], a.access_pw[m][k]) = get(layout.access(m, k));
        }
        for n in 0..layout.m {
            if n != m {
                (a.backhaul_bw[m][n], a.backhaul_pw[m][n]) = get(layout.backhaul(m, n));
            }
        }
        (a.gateway_bw[m], a.gateway_pw[m]) = get(layout.gateway(m));
    }
    a
}

/// Concave rate `w log2(1 + gamma p / w)` on support slots `(w, p)`.
#[derive(Clone, Copy)]
struct RateSlot {
    w: usize,
    p: usize,
    gamma: f64,
}

/// Tangent plane of a rate at a reference point, on support slots `(w, p)`.
#[derive(Clone, Copy)]
struct PlaneSlot {
    w: usize,
    p: usize,
    value: f64,
    d_w: f64,
    d_p: f64,
    w_ref: f64,
    p_ref: f64,
}

/// `sum(rates) - sum(planes) - eta`.
struct RateBalance {
    support: Vec<usize>,
    rates: Vec<RateSlot>,
    planes: Vec<PlaneSlot>,
    eta: Option<usize>,
}

impl RateBalance {
    fn new() -> Self {
        Self {
            support: Vec::new(),
            rates: Vec::new(),
            planes: Vec::new(),
            eta: None,
        }
    }

    fn slot(&mut self, var: usize) -> usize {
        self.support.push(var);
        self.support.len() - 1
    }

    fn add_rate(&mut self, w: usize, p: usize, gamma: f64) {
        let (w, p) = (self.slot(w), self.slot(p));
        self.rates.push(RateSlot { w, p, gamma });
    }

    fn subtract_plane(&mut self, w: usize, p: usize, w_ref: f64, p_ref: f64, gamma: f64) {
        let (value, d_w, d_p) = rate_with_gradient(w_ref, p_ref, gamma);
        let (w, p) = (self.slot(w), self.slot(p));
        self.planes.push(PlaneSlot {
            w,
            p,
            value,
            d_w,
            d_p,
            w_ref,
            p_ref,
        });
    }

    fn subtract_eta(&mut self, var: usize) {
        let s = self.slot(var);
        self.eta = Some(s);
    }
}

impl Constraint for RateBalance {
    fn support(&self) -> &[usize] {
        &self.support
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let v = |slot: usize| x[self.support[slot]];
        let mut total = 0.0;
        for r in &self.rates {
            let w = v(r.w);
            if !(w > 0.0) {
                grad[r.w] = 0.0;
                grad[r.p] = 0.0;
                return f64::NAN;
            }
            let (f, dw, dp) = rate_with_gradient(w, v(r.p), r.gamma);
            total += f;
            grad[r.w] = dw;
            grad[r.p] = dp;
        }
        for pl in &self.planes {
            total -= pl.value + pl.d_w * (v(pl.w) - pl.w_ref) + pl.d_p * (v(pl.p) - pl.p_ref);
            grad[pl.w] = -pl.d_w;
            grad[pl.p] = -pl.d_p;
        }
        if let Some(e) = self.eta {
            total -= v(e);
            grad[e] = -1.0;
        }
        total
    }
}

fn build_resource_program<'a>(
    layout: &LinkLayout,
    scales: &LinkScales,
    expansion: &[f64],
    eps: f64,
) -> ConvexProgram<'a> {
    let (mc, kc) = (layout.m, layout.k);
    let mut prog = ConvexProgram::new(layout.num_vars());
    prog.objective = vec![(layout.eta(), 1.0)];
    for l in 0..layout.links() {
        prog.lower[l] = eps;
        prog.lower[layout.power(l)] = 0.0;
    }
    for k in 0..kc {
        let mut c = RateBalance::new();
        for m in 0..mc {
            let l = layout.access(m, k);
            c.add_rate(l, layout.power(l), scales.gamma[l]);
        }
        c.subtract_eta(layout.eta());
        prog.add_constraint(c);
    }
    for m in 0..mc {
        let mut c = RateBalance::new();
        let l = layout.gateway(m);
        c.add_rate(l, layout.power(l), scales.gamma[l]);
        for n in 0..mc {
            if n != m {
                let l = layout.backhaul(n, m);
                c.add_rate(l, layout.power(l), scales.gamma[l]);
            }
        }
        let mut outgoing: Vec<usize> = (0..kc).map(|k| layout.access(m, k)).collect();
        outgoing.extend((0..mc).filter(|&n| n != m).map(|n| layout.backhaul(m, n)));
        for l in outgoing {
            let p = layout.power(l);
            c.subtract_plane(l, p, expansion[l], expansion[p], scales.gamma[l]);
        }
        prog.add_constraint(c);
    }
    prog.affine.push(AffineRow {
        coeffs: (0..layout.links()).map(|l| (l, 1.0)).collect(),
        upper: 1.0,
    });
    for m in 0..mc {
        let mut coeffs: Vec<(usize, f64)> = (0..kc).map(|k| (layout.power(layout.access(m, k)), 1.0)).collect();
        coeffs.extend(
            (0..mc)
                .filter(|&n| n != m)
                .map(|n| (layout.power(layout.backhaul(m, n)), 1.0)),
        );
        prog.affine.push(AffineRow { coeffs, upper: 1.0 });
    }
    prog.affine.push(AffineRow {
        coeffs: (0..mc).map(|m| (layout.power(layout.gateway(m)), 1.0)).collect(),
        upper: 1.0,
    });
    prog
}

/// Iterate with bandwidths lifted to the floor and the budgets rescaled to
/// stay strictly inside.
fn lift_to_floor(layout: &LinkLayout, x: &mut [f64], eps: f64) {
    let links = layout.links();
    for v in &mut x[..links] {
        *v = v.max(eps);
    }
    let total: f64 = x[..links].iter().sum();
    if total >= 1.0 {
        let scale = (1.0 - 1e-9) / total;
        for v in &mut x[..links] {
            *v = (*v * scale).max(eps);
        }
    }
    for v in &mut x[links..2 * links] {
        *v = v.max(0.0);
    }
}

fn run_resources(
    scenario: &Scenario,
    placement: &Placement,
    init_alloc: &Allocation,
    config: &ScpConfig,
    round: usize,
    observer: &mut Option<Observer<'_>>,
) -> Result<ResourceOutcome> {
    config.validate()?;
    init_alloc.check_dims(scenario)?;
    let layout = LinkLayout {
        m: scenario.num_uavs(),
        k: scenario.num_users(),
    };
    let gains = Gains::new(placement, scenario);
    let scales = link_scales(&layout, &gains, scenario);
    let eps = EPS_BW_REL;

    let mut current = init_alloc.clone();
    let mut report = evaluate_with_gains(&gains, &current, scenario);
    // The start counts as an iterate only if it is feasible as given.
    let mut eta: Option<f64> = check_report(&report, &current, scenario, report.common_throughput)
        .feasible
        .then_some(report.common_throughput);
    let mut trace = Vec::new();
    let mut status = RunStatus::MaxIters;

    for iter in 1..=config.max_scp_iters {
        let mut x = to_vector(&layout, &current, scenario, &scales);
        lift_to_floor(&layout, &mut x, eps);
        // The expansion point is the (floored) current iterate.
        let expansion = x.clone();
        let prog = build_resource_program(&layout, &scales, &expansion, eps);
        let min_user = (0..layout.k)
            .map(|k| {
                (0..layout.m)
                    .map(|m| {
                        let l = layout.access(m, k);
                        shannon(x[l], scales.gamma[l] * x[layout.power(l)])
                    })
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        x[layout.eta()] = min_user - 1e-2 * min_user.abs().max(1e-12);
        let res = convex::solve(&prog, Some(&x), &config.solver);
        log::debug!(
            "resource iter {iter}: status {:?}, newton {}, eta {:.6e}",
            res.status,
            res.iterations,
            res.objective_value * scenario.total_bandwidth()
        );
        if !matches!(res.status, SolveStatus::Optimal | SolveStatus::MaxIter) {
            status = RunStatus::Failed;
            break;
        }
        let candidate = to_placement(&layout, &res.x, scenario, &scales);
        let cand_report = evaluate_with_gains(&gains, &candidate, scenario);
        let cand_eta = cand_report.common_throughput;
        let verdict = check_report(&cand_report, &candidate, scenario, cand_eta);
        if !verdict.feasible || eta.is_some_and(|e| cand_eta < e - eta_slack(e)) {
            log::debug!("resource iter {iter}: rejected ({:?})", verdict.violations);
            status = if eta.is_some() {
                RunStatus::Converged
            } else {
                RunStatus::Failed
            };
            break;
        }
        current = candidate;
        report = cand_report;
        let entry = TraceEntry {
            round,
            algorithm: Algorithm::Resource,
            iteration: iter,
            eta: cand_eta,
        };
        trace.push(entry);
        if let Some(obs) = observer.as_mut() {
            obs(Iterate {
                entry,
                placement,
                allocation: &current,
            });
        }
        let done = eta.is_some_and(|e| converged(e, cand_eta, config.rel_tol_eta));
        eta = Some(cand_eta);
        if done {
            status = RunStatus::Converged;
            break;
        }
    }
    let _ = report;
    Ok(ResourceOutcome {
        allocation: current,
        eta: eta.unwrap_or(0.0),
        trace,
        status,
    })
}

/// Resource SCP loop under a fixed placement.
pub fn optimize_resources(
    scenario: &Scenario,
    placement: &Placement,
    init_alloc: &Allocation,
    config: &ScpConfig,
) -> Result<ResourceOutcome> {
    run_resources(scenario, placement, init_alloc, config, 1, &mut None)
}

// ---------------------------------------------------------------------------
// Placement subproblem

/// Where the far end of a link sits.
#[derive(Clone, Copy)]
enum Anchor {
    Ground([f64; 2]),
    Uav(usize),
}

/// One rate term of a placement constraint. `uav` is the end whose
/// position is a variable; distances are horizontal and squared.
#[derive(Clone, Copy)]
struct GeoTerm {
    uav: usize,
    anchor: Anchor,
    altitude_sq: f64,
    kind: GeoKind,
}

#[derive(Clone, Copy)]
enum GeoKind {
    /// `value + slope * (s - s_ref)` added to the constraint.
    Tangent { value: f64, slope: f64, s_ref: f64 },
    /// Exact rate subtracted from the constraint.
    Exact { w: f64, x: f64 },
}

/// Placement constraint over all UAV coordinates (and optionally `eta`).
struct GeoRow {
    support: Vec<usize>,
    terms: Vec<GeoTerm>,
    origin: [f64; 2],
    scale: f64,
    rate_scale: f64,
    eta: Option<usize>,
}

impl GeoRow {
    fn position(&self, x: &[f64], m: usize) -> [f64; 2] {
        [
            self.origin[0] + self.scale * x[2 * m],
            self.origin[1] + self.scale * x[2 * m + 1],
        ]
    }
}

impl Constraint for GeoRow {
    fn support(&self) -> &[usize] {
        &self.support
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        // Support is [z_0x, z_0y, ..., z_(M-1)y, (eta)] so slots equal indices.
        for g in grad.iter_mut() {
            *g = 0.0;
        }
        let mut total = 0.0;
        for t in &self.terms {
            let u = self.position(x, t.uav);
            let far = match t.anchor {
                Anchor::Ground(p) => p,
                Anchor::Uav(n) => self.position(x, n),
            };
            let dx = u[0] - far[0];
            let dy = u[1] - far[1];
            let s = dx * dx + dy * dy;
            // d(value)/ds, accumulated with the sign of the term.
            let (value, d_ds, clamp_active) = match t.kind {
                GeoKind::Tangent { value, slope, s_ref } => (value + slope * (s - s_ref), slope, false),
                GeoKind::Exact { w, x: snr_num } => {
                    let clamped = matches!(t.anchor, Anchor::Uav(_)) && s < D_MIN * D_MIN;
                    let s_eff = if clamped { D_MIN * D_MIN } else { s };
                    let d = t.altitude_sq + s_eff;
                    let value = shannon(w, snr_num / d);
                    let (_, slope) = distance_tangent(w, snr_num, s_eff, t.altitude_sq, 1.0);
                    (-value, -slope, clamped)
                }
            };
            total += value;
            if clamp_active {
                continue;
            }
            let gx = d_ds * 2.0 * dx * self.scale / self.rate_scale;
            let gy = d_ds * 2.0 * dy * self.scale / self.rate_scale;
            grad[2 * t.uav] += gx;
            grad[2 * t.uav + 1] += gy;
            if let Anchor::Uav(n) = t.anchor {
                grad[2 * n] -= gx;
                grad[2 * n + 1] -= gy;
            }
        }
        let mut total = total / self.rate_scale;
        if let Some(e) = self.eta {
            total -= x[e];
            grad[e] = -1.0;
        }
        total
    }
}

/// `r^2 - |z_m - z_m_ref|^2 >= 0` in normalized coordinates.
struct TrustRow {
    support: [usize; 2],
    center: [f64; 2],
    radius_sq: f64,
}

impl Constraint for TrustRow {
    fn support(&self) -> &[usize] {
        &self.support
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let dx = x[self.support[0]] - self.center[0];
        let dy = x[self.support[1]] - self.center[1];
        grad[0] = -2.0 * dx;
        grad[1] = -2.0 * dy;
        self.radius_sq - dx * dx - dy * dy
    }
}

struct PlacementFrame {
    origin: [f64; 2],
    scale: f64,
}

impl PlacementFrame {
    fn new(scenario: &Scenario) -> Self {
        let g = scenario.gateway();
        Self {
            origin: [g.x, g.y],
            scale: 10.0 * scenario.altitude().max(1.0),
        }
    }

    fn to_vector(&self, placement: &Placement) -> Vec<f64> {
        let mut z = vec![0.0; 2 * placement.len() + 1];
        for (m, p) in placement.uav_positions.iter().enumerate() {
            z[2 * m] = (p[0] - self.origin[0]) / self.scale;
            z[2 * m + 1] = (p[1] - self.origin[1]) / self.scale;
        }
        z
    }

    fn to_placement(&self, z: &[f64], m_count: usize) -> Placement {
        Placement {
            uav_positions: (0..m_count)
                .map(|m| {
                    [
                        self.origin[0] + self.scale * z[2 * m],
                        self.origin[1] + self.scale * z[2 * m + 1],
                    ]
                })
                .collect(),
        }
    }
}

fn build_placement_program<'a>(
    scenario: &Scenario,
    alloc: &Allocation,
    reference: &Placement,
    frame: &PlacementFrame,
    trust_radius: Option<f64>,
) -> ConvexProgram<'a> {
    let mc = scenario.num_uavs();
    let kc = scenario.num_users();
    let gamma0 = scenario.radio().gamma0();
    let h2 = scenario.altitude() * scenario.altitude();
    let geo = Geometry::new(reference, scenario);
    let gw = scenario.gateway();
    let eta_idx = 2 * mc;
    let mut prog = ConvexProgram::new(2 * mc + 1);
    prog.objective = vec![(eta_idx, 1.0)];
    let row = |terms: Vec<GeoTerm>, eta: Option<usize>| GeoRow {
        support: (0..2 * mc + usize::from(eta.is_some())).collect(),
        terms,
        origin: frame.origin,
        scale: frame.scale,
        rate_scale: scenario.total_bandwidth(),
        eta,
    };
    let tangent = |uav, anchor, altitude_sq, w: f64, p: f64, s_ref: f64| {
        let (value, slope) = distance_tangent(w, p, s_ref, altitude_sq, gamma0);
        GeoTerm {
            uav,
            anchor,
            altitude_sq,
            kind: GeoKind::Tangent { value, slope, s_ref },
        }
    };
    let active = |w: f64, p: f64| w > 0.0 && p > 0.0;

    for k in 0..kc {
        let user = scenario.user(k);
        let terms = (0..mc)
            .filter(|&m| active(alloc.access_bw[m][k], alloc.access_pw[m][k]))
            .map(|m| {
                tangent(
                    m,
                    Anchor::Ground([user.x, user.y]),
                    h2,
                    alloc.access_bw[m][k],
                    alloc.access_pw[m][k],
                    geo.access_sq[m][k],
                )
            })
            .collect();
        prog.add_constraint(row(terms, Some(eta_idx)));
    }
    for m in 0..mc {
        let mut terms = Vec::new();
        if active(alloc.gateway_bw[m], alloc.gateway_pw[m]) {
            terms.push(tangent(
                m,
                Anchor::Ground([gw.x, gw.y]),
                h2,
                alloc.gateway_bw[m],
                alloc.gateway_pw[m],
                geo.gateway_sq[m],
            ));
        }
        for n in 0..mc {
            if n != m && active(alloc.backhaul_bw[n][m], alloc.backhaul_pw[n][m]) {
                terms.push(tangent(
                    m,
                    Anchor::Uav(n),
                    0.0,
                    alloc.backhaul_bw[n][m],
                    alloc.backhaul_pw[n][m],
                    geo.uav_sq[n][m],
                ));
            }
        }
        for k in 0..kc {
            if active(alloc.access_bw[m][k], alloc.access_pw[m][k]) {
                let user = scenario.user(k);
                terms.push(GeoTerm {
                    uav: m,
                    anchor: Anchor::Ground([user.x, user.y]),
                    altitude_sq: h2,
                    kind: GeoKind::Exact {
                        w: alloc.access_bw[m][k],
                        x: gamma0 * alloc.access_pw[m][k],
                    },
                });
            }
        }
        for n in 0..mc {
            if n != m && active(alloc.backhaul_bw[m][n], alloc.backhaul_pw[m][n]) {
                terms.push(GeoTerm {
                    uav: m,
                    anchor: Anchor::Uav(n),
                    altitude_sq: 0.0,
                    kind: GeoKind::Exact {
                        w: alloc.backhaul_bw[m][n],
                        x: gamma0 * alloc.backhaul_pw[m][n],
                    },
                });
            }
        }
        prog.add_constraint(row(terms, None));
    }
    if let Some(r) = trust_radius {
        let z_ref = frame.to_vector(reference);
        let r = r / frame.scale;
        for m in 0..mc {
            prog.add_constraint(TrustRow {
                support: [2 * m, 2 * m + 1],
                center: [z_ref[2 * m], z_ref[2 * m + 1]],
                radius_sq: r * r,
            });
        }
    }
    prog
}

fn run_placement(
    scenario: &Scenario,
    alloc: &Allocation,
    init_placement: &Placement,
    config: &ScpConfig,
    round: usize,
    observer: &mut Option<Observer<'_>>,
) -> Result<PlacementOutcome> {
    config.validate()?;
    alloc.check_dims(scenario)?;
    let mc = scenario.num_uavs();
    let frame = PlacementFrame::new(scenario);
    let mut current = init_placement.clone();
    let report = evaluate(&current, alloc, scenario)?;
    let mut eta: Option<f64> = check_report(&report, alloc, scenario, report.common_throughput)
        .feasible
        .then_some(report.common_throughput);
    let mut trace = Vec::new();
    let mut status = RunStatus::MaxIters;

    'outer: for iter in 1..=config.max_scp_iters {
        let mut radius = config.trust_radius_m;
        let retries = if config.safeguard { 5 } else { 0 };
        let mut accepted = None;
        for attempt in 0..=retries {
            let prog = build_placement_program(scenario, alloc, &current, &frame, radius);
            let mut z = frame.to_vector(&current);
            let rep = evaluate(&current, alloc, scenario)?;
            let min_user = rep.common_throughput / scenario.total_bandwidth();
            z[2 * mc] = min_user - 1e-2 * min_user.abs().max(1e-12);
            let res = convex::solve(&prog, Some(&z), &config.solver);
            log::debug!(
                "placement iter {iter}.{attempt}: status {:?}, newton {}, eta {:.6e}",
                res.status,
                res.iterations,
                res.objective_value * scenario.total_bandwidth()
            );
            let solved = matches!(res.status, SolveStatus::Optimal | SolveStatus::MaxIter);
            if solved {
                let cand = frame.to_placement(&res.x, mc);
                let cand_report = evaluate(&cand, alloc, scenario)?;
                let cand_eta = cand_report.common_throughput;
                let feasible = check_report(&cand_report, alloc, scenario, cand_eta).feasible;
                let improves = eta.is_none_or(|e| cand_eta >= e - eta_slack(e));
                if feasible && (improves || !config.safeguard) {
                    accepted = Some((cand, cand_eta));
                    break;
                }
            } else if !config.safeguard {
                break;
            }
            radius = radius.map(|r| r * 0.5);
            if radius.is_none() {
                // Without a trust region there is nothing to shrink.
                break;
            }
        }
        let Some((cand, cand_eta)) = accepted else {
            status = if eta.is_some() {
                RunStatus::Converged
            } else {
                RunStatus::Failed
            };
            break 'outer;
        };
        current = cand;
        let entry = TraceEntry {
            round,
            algorithm: Algorithm::Placement,
            iteration: iter,
            eta: cand_eta,
        };
        trace.push(entry);
        if let Some(obs) = observer.as_mut() {
            obs(Iterate {
                entry,
                placement: &current,
                allocation: alloc,
            });
        }
        let done = eta.is_some_and(|e| converged(e, cand_eta, config.rel_tol_eta));
        eta = Some(cand_eta);
        if done {
            status = RunStatus::Converged;
            break;
        }
    }
    Ok(PlacementOutcome {
        placement: current,
        eta: eta.unwrap_or(0.0),
        trace,
        status,
    })
}

/// Placement SCP loop under a fixed allocation.
pub fn optimize_placement(
    scenario: &Scenario,
    alloc: &Allocation,
    init_placement: &Placement,
    config: &ScpConfig,
) -> Result<PlacementOutcome> {
    run_placement(scenario, alloc, init_placement, config, 1, &mut None)
}

// ---------------------------------------------------------------------------
// Complete schemes

fn check_placement(scenario: &Scenario, placement: &Placement) -> Result<()> {
    if placement.len() != scenario.num_uavs() {
        return Err(Error::DimensionMismatch {
            what: "placement",
            expected: scenario.num_uavs(),
            found: placement.len(),
        });
    }
    Ok(())
}

/// Drops links left on the bandwidth floor that carry less than 1 bps,
/// unless that would break feasibility.
fn release_floor_links(scenario: &Scenario, placement: &Placement, alloc: &Allocation) -> Result<Allocation> {
    let floor = 1.5 * EPS_BW_REL * scenario.total_bandwidth();
    let report = evaluate(placement, alloc, scenario)?;
    let mut out = alloc.clone();
    let mc = scenario.num_uavs();
    for m in 0..mc {
        for k in 0..scenario.num_users() {
            if out.access_bw[m][k] <= floor && report.access_rate[m][k] < 1.0 {
                out.access_bw[m][k] = 0.0;
                out.access_pw[m][k] = 0.0;
            }
        }
        for n in 0..mc {
            if n != m && out.backhaul_bw[m][n] <= floor && report.backhaul_rate[m][n] < 1.0 {
                out.backhaul_bw[m][n] = 0.0;
                out.backhaul_pw[m][n] = 0.0;
            }
        }
        if out.gateway_bw[m] <= floor && report.gateway_rate[m] < 1.0 {
            out.gateway_bw[m] = 0.0;
            out.gateway_pw[m] = 0.0;
        }
    }
    let new_report = evaluate(placement, &out, scenario)?;
    let ok = check_report(&new_report, &out, scenario, new_report.common_throughput).feasible;
    Ok(if ok { out } else { alloc.clone() })
}

fn finalize(
    scheme: Scheme,
    scenario: &Scenario,
    placement: Placement,
    allocation: Allocation,
    trace: Vec<TraceEntry>,
    status: RunStatus,
    rounds: usize,
) -> Result<Solution> {
    let allocation = release_floor_links(scenario, &placement, &allocation)?;
    let report = evaluate(&placement, &allocation, scenario)?;
    Ok(Solution {
        scheme,
        eta: report.common_throughput,
        placement,
        allocation,
        report,
        trace,
        status,
        rounds,
    })
}

/// Alternates resource and placement SCP from `init_placement`, starting
/// the first resource run from the equal split.
pub fn optimize_alternating(scenario: &Scenario, init_placement: &Placement, config: &ScpConfig) -> Result<Solution> {
    optimize_alternating_observed(scenario, init_placement, config, &mut |_| {})
}

/// [`optimize_alternating`], reporting every accepted iterate to `observer`.
pub fn optimize_alternating_observed(
    scenario: &Scenario,
    init_placement: &Placement,
    config: &ScpConfig,
    observer: &mut dyn FnMut(Iterate<'_>),
) -> Result<Solution> {
    config.validate()?;
    check_placement(scenario, init_placement)?;
    let mut obs: Option<Observer<'_>> = Some(observer);
    let mut placement = init_placement.clone();
    let mut alloc = Allocation::equal_split(scenario);
    let mut trace = Vec::new();
    let mut previous: Option<f64> = None;
    let mut status = RunStatus::MaxIters;
    let mut rounds = 0;
    for round in 1..=config.max_alt_rounds {
        rounds = round;
        let res = run_resources(scenario, &placement, &alloc, config, round, &mut obs)?;
        trace.extend(res.trace.iter().copied());
        if res.status == RunStatus::Failed {
            alloc = res.allocation;
            status = RunStatus::Failed;
            break;
        }
        alloc = res.allocation;
        let pl = run_placement(scenario, &alloc, &placement, config, round, &mut obs)?;
        trace.extend(pl.trace.iter().copied());
        placement = pl.placement;
        if pl.status == RunStatus::Failed {
            status = RunStatus::Failed;
            break;
        }
        let eta = pl.eta.max(res.eta);
        log::debug!("round {round}: eta {eta:.6e}");
        if previous.is_some_and(|p| converged(p, eta, config.rel_tol_eta)) {
            status = RunStatus::Converged;
            break;
        }
        previous = Some(eta);
    }
    finalize(Scheme::Alternating, scenario, placement, alloc, trace, status, rounds)
}

/// Resource SCP only, at a fixed placement, from the equal split.
pub fn benchmark_resource_only(scenario: &Scenario, placement: &Placement, config: &ScpConfig) -> Result<Solution> {
    benchmark_resource_only_observed(scenario, placement, config, &mut |_| {})
}

pub fn benchmark_resource_only_observed(
    scenario: &Scenario,
    placement: &Placement,
    config: &ScpConfig,
    observer: &mut dyn FnMut(Iterate<'_>),
) -> Result<Solution> {
    check_placement(scenario, placement)?;
    let mut obs: Option<Observer<'_>> = Some(observer);
    let init = Allocation::equal_split(scenario);
    let res = run_resources(scenario, placement, &init, config, 1, &mut obs)?;
    finalize(
        Scheme::ResourceOnly,
        scenario,
        placement.clone(),
        res.allocation,
        res.trace,
        res.status,
        1,
    )
}

/// Equal split, with access power backed off where the split would make a
/// UAV forward more than it receives at `placement`.
///
/// Each offending UAV scales its access-link powers by a common factor so
/// that its outgoing rate is `1 - 1e-3` of its incoming rate; if its
/// backhaul traffic alone already exceeds the incoming rate, backhaul powers
/// are scaled too. Repeats until every UAV conserves flow.
pub fn equal_split_with_backoff(scenario: &Scenario, placement: &Placement) -> Result<Allocation> {
    check_placement(scenario, placement)?;
    let mut alloc = Allocation::equal_split(scenario);
    let mc = scenario.num_uavs();
    let margin = 1e-3;
    for _ in 0..4 * mc + 4 {
        let report = evaluate(placement, &alloc, scenario)?;
        let Some(m) = (0..mc).find(|&m| report.flow_slack[m] < margin * 0.5 * report.flow_in[m]) else {
            return Ok(alloc);
        };
        let backhaul_out: f64 = report.backhaul_rate[m].iter().sum();
        let include_backhaul = backhaul_out >= (1.0 - margin) * report.flow_in[m];
        let base = alloc.clone();
        let target = (1.0 - margin) * report.flow_in[m];
        let outgoing = |theta: f64| -> Result<f64> {
            let mut a = base.clone();
            for p in &mut a.access_pw[m] {
                *p *= theta;
            }
            if include_backhaul {
                for p in &mut a.backhaul_pw[m] {
                    *p *= theta;
                }
            }
            Ok(evaluate(placement, &a, scenario)?.flow_out[m])
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if outgoing(mid)? <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        for p in &mut alloc.access_pw[m] {
            *p *= lo;
        }
        if include_backhaul {
            for p in &mut alloc.backhaul_pw[m] {
                *p *= lo;
            }
        }
    }
    Ok(alloc)
}

/// Placement SCP only, with the equal-split allocation held fixed.
pub fn benchmark_placement_only(scenario: &Scenario, init_placement: &Placement, config: &ScpConfig) -> Result<Solution> {
    benchmark_placement_only_observed(scenario, init_placement, config, &mut |_| {})
}

pub fn benchmark_placement_only_observed(
    scenario: &Scenario,
    init_placement: &Placement,
    config: &ScpConfig,
    observer: &mut dyn FnMut(Iterate<'_>),
) -> Result<Solution> {
    check_placement(scenario, init_placement)?;
    let mut obs: Option<Observer<'_>> = Some(observer);
    let alloc = equal_split_with_backoff(scenario, init_placement)?;
    let res = run_placement(scenario, &alloc, init_placement, config, 1, &mut obs)?;
    finalize(
        Scheme::PlacementOnly,
        scenario,
        res.placement,
        alloc,
        res.trace,
        res.status,
        1,
    )
}

/// Runs `scheme` from `init_placement`.
pub fn run_scheme(scheme: Scheme, scenario: &Scenario, init_placement: &Placement, config: &ScpConfig) -> Result<Solution> {
    match scheme {
        Scheme::Alternating => optimize_alternating(scenario, init_placement, config),
        Scheme::ResourceOnly => benchmark_resource_only(scenario, init_placement, config),
        Scheme::PlacementOnly => benchmark_placement_only(scenario, init_placement, config),
    }
}

/// Which users each UAV serves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Association {
    /// 0-based user indices per UAV.
    pub served: Vec<Vec<usize>>,
    pub counts: Vec<usize>,
}

/// User `k` counts as served by UAV `m` when that link carries more than 1%
/// of the user's throughput.
pub fn association_report(solution: &Solution) -> Association {
    association_from_report(&solution.report)
}

pub fn association_from_report(report: &RateReport) -> Association {
    let mc = report.access_rate.len();
    let served: Vec<Vec<usize>> = (0..mc)
        .map(|m| {
            report
                .user_throughput
                .iter()
                .enumerate()
                .filter(|&(k, &total)| total > 0.0 && report.access_rate[m][k] > 0.01 * total)
                .map(|(k, _)| k)
                .collect()
        })
        .collect();
    let counts = served.iter().map(Vec::len).collect();
    Association { served, counts }
}

