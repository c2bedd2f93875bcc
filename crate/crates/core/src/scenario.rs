//! Problem instances: ground nodes, radio constants, budgets and UAV placements.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math;

/// Speed of light used for the reference channel gain (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// A fixed terminal on the ground (altitude zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundNode {
    pub x: f64,
    pub y: f64,
}

impl GroundNode {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Free-space radio constants shared by every link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConstants {
    carrier_frequency: f64,
    beta0: f64,
    noise_density: f64,
    gamma0: f64,
}

impl RadioConstants {
    /// Builds constants from an explicit reference gain (power gain at 1 m).
    pub fn new(carrier_frequency: f64, beta0: f64, noise_density: f64) -> Result<Self> {
        if !(carrier_frequency > 0.0 && carrier_frequency.is_finite()) {
            return Err(invalid("carrier frequency must be positive and finite"));
        }
        if !(beta0 > 0.0 && beta0.is_finite()) {
            return Err(invalid("reference gain must be positive and finite"));
        }
        if !(noise_density > 0.0 && noise_density.is_finite()) {
            return Err(invalid("noise density must be positive and finite"));
        }
        Ok(Self {
            carrier_frequency,
            beta0,
            noise_density,
            gamma0: beta0 / noise_density,
        })
    }

    /// Carrier frequency in Hz.
    pub fn carrier_frequency(&self) -> f64 {
        self.carrier_frequency
    }

    /// Channel power gain at the 1 m reference distance.
    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    /// Noise power spectral density in W/Hz.
    pub fn noise_density(&self) -> f64 {
        self.noise_density
    }

    /// `beta0 / noise_density`, in Hz per watt times m².
    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }
}

/// Free-space constants for a carrier: `beta0 = (c / (4 pi f_c))^2`.
pub fn build_default_radio(carrier_frequency: f64, noise_density: f64) -> Result<RadioConstants> {
    if !(carrier_frequency > 0.0 && carrier_frequency.is_finite()) {
        return Err(invalid("carrier frequency must be positive and finite"));
    }
    if !(noise_density > 0.0 && noise_density.is_finite()) {
        return Err(invalid("noise density must be positive and finite"));
    }
    let wavelength_ratio = SPEED_OF_LIGHT / (4.0 * core::f64::consts::PI * carrier_frequency);
    RadioConstants::new(
        carrier_frequency,
        wavelength_ratio * wavelength_ratio,
        noise_density,
    )
}

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    math::pow10((dbm - 30.0) / 10.0)
}

/// Converts a power in watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * libm::log10(watts) + 30.0
}

/// Horizontal coordinates of every UAV, in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub uav_positions: Vec<[f64; 2]>,
}

impl Placement {
    pub fn new(uav_positions: Vec<[f64; 2]>) -> Result<Self> {
        if uav_positions
            .iter()
            .any(|p| !(p[0].is_finite() && p[1].is_finite()))
        {
            return Err(invalid("UAV coordinates must be finite"));
        }
        Ok(Self { uav_positions })
    }

    pub fn len(&self) -> usize {
        self.uav_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uav_positions.is_empty()
    }

    pub fn position(&self, m: usize) -> [f64; 2] {
        self.uav_positions[m]
    }

    /// Same placement shifted by a constant vector.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            uav_positions: self
                .uav_positions
                .iter()
                .map(|p| [p[0] + dx, p[1] + dy])
                .collect(),
        }
    }
}

/// How the initial UAV placement is generated.
#[derive(Debug, Clone, PartialEq)]
pub enum PlacementMode {
    /// `M` points at fractions `1/(M+1), ..., M/(M+1)` along a segment.
    EvenLine { start: [f64; 2], end: [f64; 2] },
    /// Points of an `n x n` lattice (`n = ceil(sqrt(M))`) at fractions
    /// `1/(n+1), ..., n/(n+1)` of the rectangle, taken row by row.
    EvenGrid { min: [f64; 2], max: [f64; 2] },
    /// Caller-supplied coordinates; must have one entry per UAV.
    Explicit(Vec<[f64; 2]>),
}

/// A validated problem instance. All quantities are SI (m, Hz, W).
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    num_uavs: usize,
    users: Vec<GroundNode>,
    gateway: GroundNode,
    altitude: f64,
    total_bandwidth: f64,
    uav_power: Vec<f64>,
    gateway_power: f64,
    radio: RadioConstants,
    initial_placement: Option<Placement>,
}

fn check_positive(field: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Invariant {
            field,
            reason: alloc::format!("must be positive and finite, got {value}"),
        })
    }
}

impl Scenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        num_uavs: usize,
        users: Vec<GroundNode>,
        gateway: GroundNode,
        altitude: f64,
        total_bandwidth: f64,
        uav_power: Vec<f64>,
        gateway_power: f64,
        radio: RadioConstants,
    ) -> Result<Self> {
        if num_uavs == 0 {
            return Err(Error::Invariant {
                field: "num_uavs",
                reason: "need at least one UAV (M >= 1)".into(),
            });
        }
        if users.is_empty() {
            return Err(Error::Invariant {
                field: "users",
                reason: "need at least one user (K >= 1)".into(),
            });
        }
        if let Some(k) = users.iter().position(|u| !u.is_finite()) {
            return Err(Error::Invariant {
                field: "users",
                reason: alloc::format!("user {} has non-finite coordinates", k + 1),
            });
        }
        if !gateway.is_finite() {
            return Err(Error::Invariant {
                field: "gateway",
                reason: "non-finite coordinates".into(),
            });
        }
        check_positive("altitude", altitude)?;
        check_positive("total_bandwidth", total_bandwidth)?;
        check_positive("gateway_power", gateway_power)?;
        if uav_power.len() != num_uavs {
            return Err(Error::Invariant {
                field: "uav_power",
                reason: alloc::format!(
                    "expected {num_uavs} per-UAV power budgets, got {}",
                    uav_power.len()
                ),
            });
        }
        for &p in &uav_power {
            check_positive("uav_power", p)?;
        }
        let scenario = Self {
            num_uavs,
            users,
            gateway,
            altitude,
            total_bandwidth,
            uav_power,
            gateway_power,
            radio,
            initial_placement: None,
        };
        for (a, b) in scenario.duplicate_users() {
            log::warn!("users {} and {} share a position", a + 1, b + 1);
        }
        Ok(scenario)
    }

    /// Attaches an initial placement (one position per UAV).
    pub fn with_initial_placement(mut self, placement: Placement) -> Result<Self> {
        if placement.len() != self.num_uavs {
            return Err(Error::DimensionMismatch {
                what: "initial placement",
                expected: self.num_uavs,
                found: placement.len(),
            });
        }
        self.initial_placement = Some(placement);
        Ok(self)
    }

    /// Copy with every UAV and the gateway set to the same power budget.
    pub fn with_common_power(&self, watts: f64) -> Result<Self> {
        check_positive("power", watts)?;
        let mut s = self.clone();
        s.uav_power = alloc::vec![watts; self.num_uavs];
        s.gateway_power = watts;
        Ok(s)
    }

    /// Copy with all ground nodes and the initial placement shifted.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let mut s = self.clone();
        for u in &mut s.users {
            u.x += dx;
            u.y += dy;
        }
        s.gateway.x += dx;
        s.gateway.y += dy;
        s.initial_placement = s.initial_placement.map(|p| p.translated(dx, dy));
        s
    }

    pub fn num_uavs(&self) -> usize {
        self.num_uavs
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn users(&self) -> &[GroundNode] {
        &self.users
    }

    pub fn user(&self, k: usize) -> GroundNode {
        self.users[k]
    }

    pub fn gateway(&self) -> GroundNode {
        self.gateway
    }

    pub fn altitude(&self) -> f64 {
        self.altitude
    }

    pub fn total_bandwidth(&self) -> f64 {
        self.total_bandwidth
    }

    pub fn uav_power(&self) -> &[f64] {
        &self.uav_power
    }

    pub fn gateway_power(&self) -> f64 {
        self.gateway_power
    }

    pub fn radio(&self) -> &RadioConstants {
        &self.radio
    }

    pub fn initial_placement(&self) -> Option<&Placement> {
        self.initial_placement.as_ref()
    }

    /// Number of links: `M*K` access, `M*(M-1)` backhaul, `M` gateway.
    pub fn num_links(&self) -> usize {
        let m = self.num_uavs;
        m * self.num_users() + m * (m - 1) + m
    }

    /// Pairs of users (0-based) sharing a position. Allowed, but worth a warning.
    pub fn duplicate_users(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.users.len() {
            for b in a + 1..self.users.len() {
                if self.users[a] == self.users[b] {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Bounding box of users and gateway: `(min, max)`.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [self.gateway.x, self.gateway.y];
        let mut hi = lo;
        for u in &self.users {
            lo[0] = lo[0].min(u.x);
            lo[1] = lo[1].min(u.y);
            hi[0] = hi[0].max(u.x);
            hi[1] = hi[1].max(u.y);
        }
        (lo, hi)
    }

    /// Placement from the scenario file, or an even grid over the bounding box.
    pub fn start_placement(&self) -> Placement {
        match &self.initial_placement {
            Some(p) => p.clone(),
            None => {
                let (min, max) = self.bounding_box();
                default_placement(self, &PlacementMode::EvenGrid { min, max })
                    .expect("grid placement always has M entries")
            }
        }
    }
}

/// Initial placement `U(0)` for a scenario.
pub fn default_placement(scenario: &Scenario, mode: &PlacementMode) -> Result<Placement> {
    let m = scenario.num_uavs();
    match mode {
        PlacementMode::EvenLine { start, end } => {
            let positions = (1..=m)
                .map(|i| {
                    let f = i as f64 / (m + 1) as f64;
                    [
                        start[0] + f * (end[0] - start[0]),
                        start[1] + f * (end[1] - start[1]),
                    ]
                })
                .collect();
            Placement::new(positions)
        }
        PlacementMode::EvenGrid { min, max } => {
            let mut n = 1;
            while n * n < m {
                n += 1;
            }
            let frac = |i: usize| (i + 1) as f64 / (n + 1) as f64;
            let mut positions = Vec::with_capacity(m);
            'rows: for row in 0..n {
                for col in 0..n {
                    if positions.len() == m {
                        break 'rows;
                    }
                    positions.push([
                        min[0] + frac(col) * (max[0] - min[0]),
                        min[1] + frac(row) * (max[1] - min[1]),
                    ]);
                }
            }
            Placement::new(positions)
        }
        PlacementMode::Explicit(positions) => {
            if positions.len() != m {
                return Err(Error::DimensionMismatch {
                    what: "explicit placement",
                    expected: m,
                    found: positions.len(),
                });
            }
            Placement::new(positions.clone())
        }
    }
}
