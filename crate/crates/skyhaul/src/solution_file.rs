//! JSON solution files.
//!
//! Rates are stored in bps; the `mbps` block under `report` repeats them in
//! Mbps for reading by eye and is ignored when a file is checked.

use serde::{Deserialize, Serialize};
use skyhaul_core::{
    association_report, Allocation, Association, Placement, RateReport, RunStatus, Scenario, Scheme, ScpConfig,
    Solution, TraceEntry,
};

use crate::scenario_file::scenario_hash;

pub const FORMAT: &str = "skyhaul-solution/1";

const MBPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbpsReport {
    pub access_rate: Vec<Vec<f64>>,
    pub gateway_rate: Vec<f64>,
    pub backhaul_rate: Vec<Vec<f64>>,
    pub user_throughput: Vec<f64>,
    pub common_throughput: f64,
    pub flow_slack: Vec<f64>,
}

impl MbpsReport {
    pub fn from_report(r: &RateReport) -> Self {
        let v = |x: &[f64]| x.iter().map(|a| a * MBPS).collect::<Vec<_>>();
        let m = |x: &[Vec<f64>]| x.iter().map(|row| v(row)).collect::<Vec<_>>();
        Self {
            access_rate: m(&r.access_rate),
            gateway_rate: v(&r.gateway_rate),
            backhaul_rate: m(&r.backhaul_rate),
            user_throughput: v(&r.user_throughput),
            common_throughput: r.common_throughput * MBPS,
            flow_slack: v(&r.flow_slack),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    #[serde(flatten)]
    pub bps: RateReport,
    pub mbps: MbpsReport,
}

/// Everything written for one solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDocument {
    pub format: String,
    /// SHA-256 of the canonical scenario text.
    pub scenario_hash: String,
    pub scheme: Scheme,
    pub status: RunStatus,
    pub rounds: usize,
    pub config: ScpConfig,
    /// Common throughput (bps).
    pub eta: f64,
    pub eta_mbps: f64,
    pub placement: Placement,
    pub allocation: Allocation,
    pub report: ReportDocument,
    pub association: Association,
    pub trace: Vec<TraceEntry>,
}

impl SolutionDocument {
    pub fn new(solution: &Solution, scenario: &Scenario, config: &ScpConfig) -> Self {
        Self {
            format: FORMAT.to_string(),
            scenario_hash: scenario_hash(scenario),
            scheme: solution.scheme,
            status: solution.status,
            rounds: solution.rounds,
            config: config.clone(),
            eta: solution.eta,
            eta_mbps: solution.eta * MBPS,
            placement: solution.placement.clone(),
            allocation: solution.allocation.clone(),
            report: ReportDocument {
                bps: solution.report.clone(),
                mbps: MbpsReport::from_report(&solution.report),
            },
            association: association_report(solution),
            trace: solution.trace.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution documents always serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}
