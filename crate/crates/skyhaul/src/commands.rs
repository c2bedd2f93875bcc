//! The `solve`, `sweep` and `check` commands, independent of argument parsing.
//!
//! Each command writes human-readable output to `out`, diagnostics to `err`,
//! and returns the process exit code.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use skyhaul_core::{
    check_feasibility, dbm_to_watts, evaluate, run_scheme, Error as CoreError, RunStatus, Scenario, Scheme,
    ScpConfig, Solution, TOL_FEAS,
};

use crate::scenario_file::{parse_scenario, scenario_hash};
use crate::solution_file::SolutionDocument;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

/// Header of the sweep CSV.
pub const SWEEP_HEADER: [&str; 5] = ["P_dbm", "scheme", "eta_mbps", "rounds", "wall_ms"];

pub const DEFAULT_SWEEP_DBM: [f64; 5] = [20.0, 25.0, 30.0, 35.0, 40.0];

/// Which schemes `solve` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeChoice {
    One(Scheme),
    All,
}

impl SchemeChoice {
    pub fn schemes(self) -> Vec<Scheme> {
        match self {
            SchemeChoice::One(s) => vec![s],
            SchemeChoice::All => Scheme::ALL.to_vec(),
        }
    }
}

fn exit_code_for(err: &CoreError) -> i32 {
    match err {
        CoreError::Infeasible(_) => EXIT_SOLVER,
        _ => EXIT_INPUT,
    }
}

/// Reads and parses a scenario file, reporting problems on `err`.
pub fn load_scenario(path: &Path, err: &mut dyn Write) -> Result<Scenario, i32> {
    let text = fs::read_to_string(path).map_err(|e| {
        let _ = writeln!(err, "error: cannot read {}: {e}", path.display());
        EXIT_INPUT
    })?;
    parse_scenario(&text).map_err(|e| {
        let _ = writeln!(err, "error: {}: {e}", path.display());
        EXIT_INPUT
    })
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string())
}

/// Path of the solution file `solve` writes for `scheme`.
pub fn solution_path(out_dir: &Path, scenario_path: &Path, scheme: Scheme) -> PathBuf {
    out_dir.join(format!("{}.{}.json", file_stem(scenario_path), scheme))
}

fn summary_row(out: &mut dyn Write, sol: &Solution) {
    let slack: Vec<String> = sol
        .report
        .flow_slack
        .iter()
        .map(|s| format!("{:.3}", s * 1e-6))
        .collect();
    let counts: Vec<String> = skyhaul_core::association_report(sol)
        .counts
        .iter()
        .map(|c| c.to_string())
        .collect();
    let _ = writeln!(
        out,
        "{:<16} {:<10} {:>6} {:>12.6} {:>24} {:>10}",
        sol.scheme.as_str(),
        format!("{:?}", sol.status).to_lowercase(),
        sol.rounds,
        sol.eta * 1e-6,
        slack.join("/"),
        counts.join("/"),
    );
}

/// Runs the chosen schemes from the scenario's initial placement and writes
/// one solution file per scheme into `out_dir`.
pub fn cmd_solve(
    scenario_path: &Path,
    choice: SchemeChoice,
    out_dir: &Path,
    config: &ScpConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let scenario = match load_scenario(scenario_path, err) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if let Err(e) = config.validate() {
        let _ = writeln!(err, "error: {e}");
        return EXIT_INPUT;
    }
    if let Err(e) = fs::create_dir_all(out_dir) {
        let _ = writeln!(err, "error: cannot create {}: {e}", out_dir.display());
        return EXIT_INPUT;
    }
    let start = scenario.start_placement();
    let _ = writeln!(
        out,
        "{:<16} {:<10} {:>6} {:>12} {:>24} {:>10}",
        "scheme", "status", "rounds", "eta_mbps", "flow_slack_mbps", "served"
    );
    let mut code = EXIT_OK;
    for scheme in choice.schemes() {
        let sol = match run_scheme(scheme, &scenario, &start, config) {
            Ok(sol) => sol,
            Err(e) => {
                let _ = writeln!(err, "error: {scheme}: {e}");
                code = code.max(exit_code_for(&e));
                continue;
            }
        };
        summary_row(out, &sol);
        let path = solution_path(out_dir, scenario_path, scheme);
        let doc = SolutionDocument::new(&sol, &scenario, config);
        if let Err(e) = fs::write(&path, doc.to_json()) {
            let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
            code = code.max(EXIT_INPUT);
            continue;
        }
        log::info!("wrote {}", path.display());
        if sol.status == RunStatus::Failed {
            let _ = writeln!(
                err,
                "error: {scheme}: solver failed; wrote last accepted iterate to {}",
                path.display()
            );
            code = code.max(EXIT_SOLVER);
        }
    }
    code
}

/// One CSV row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p_dbm: f64,
    pub scheme: Scheme,
    pub eta_mbps: f64,
    pub rounds: usize,
    pub wall_ms: u128,
}

/// Runs every scheme at every power level (all UAVs and the gateway set to
/// the same power). Jobs run on a small thread pool; rows come back sorted
/// by power, then scheme.
pub fn run_sweep(
    scenario: &Scenario,
    powers_dbm: &[f64],
    config: &ScpConfig,
) -> (Vec<SweepRow>, Vec<(f64, Scheme, CoreError)>) {
    let jobs: Vec<(f64, Scheme)> = powers_dbm
        .iter()
        .flat_map(|&p| Scheme::ALL.into_iter().map(move |s| (p, s)))
        .collect();
    let start = scenario.start_placement();
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::with_capacity(jobs.len()));
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(p, scheme)) = jobs.get(i) else {
                    break;
                };
                let t = Instant::now();
                let res = scenario
                    .with_common_power(dbm_to_watts(p))
                    .and_then(|s| run_scheme(scheme, &s, &start, config));
                let wall_ms = t.elapsed().as_millis();
                results.lock().expect("sweep worker panicked").push((i, p, scheme, res, wall_ms));
            });
        }
    });
    let mut results = results.into_inner().expect("sweep worker panicked");
    results.sort_by_key(|r| r.0);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (_, p, scheme, res, wall_ms) in results {
        match res {
            Ok(sol) => rows.push(SweepRow {
                p_dbm: p,
                scheme,
                eta_mbps: sol.eta * 1e-6,
                rounds: sol.rounds,
                wall_ms,
            }),
            Err(e) => failures.push((p, scheme, e)),
        }
    }
    (rows, failures)
}

/// Writes sweep rows as CSV. With `fixed_timing`, `wall_ms` is written as 0
/// so that the file depends only on the inputs.
pub fn write_sweep_csv(rows: &[SweepRow], fixed_timing: bool, sink: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        let wall = if fixed_timing { 0 } else { r.wall_ms };
        w.write_record([
            r.p_dbm.to_string(),
            r.scheme.as_str().to_string(),
            format!("{:.6}", r.eta_mbps),
            r.rounds.to_string(),
            wall.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Power sweep over `powers_dbm`, written to `csv_path` (or `out`).
pub fn cmd_sweep(
    scenario_path: &Path,
    powers_dbm: &[f64],
    config: &ScpConfig,
    csv_path: Option<&Path>,
    fixed_timing: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    if powers_dbm.is_empty() {
        let _ = writeln!(err, "error: the sweep list is empty");
        return EXIT_INPUT;
    }
    if powers_dbm.iter().any(|p| !p.is_finite()) || powers_dbm.windows(2).any(|w| w[0] >= w[1]) {
        let _ = writeln!(err, "error: sweep powers must be finite and strictly increasing");
        return EXIT_INPUT;
    }
    if let Err(e) = config.validate() {
        let _ = writeln!(err, "error: {e}");
        return EXIT_INPUT;
    }
    let scenario = match load_scenario(scenario_path, err) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let (rows, failures) = run_sweep(&scenario, powers_dbm, config);
    let written = match csv_path {
        Some(path) => fs::File::create(path)
            .map_err(csv::Error::from)
            .and_then(|f| write_sweep_csv(&rows, fixed_timing, f)),
        None => write_sweep_csv(&rows, fixed_timing, &mut *out),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: cannot write sweep output: {e}");
        return EXIT_INPUT;
    }
    let mut code = EXIT_OK;
    for (p, scheme, e) in &failures {
        let _ = writeln!(err, "error: P = {p} dBm, {scheme}: {e}");
        code = code.max(exit_code_for(e));
    }
    code
}

/// Re-evaluates a stored solution against its scenario.
///
/// Passes when the scenario hash matches, the allocation satisfies every
/// constraint at the stored throughput, and the stored throughput equals the
/// recomputed common throughput to within the feasibility tolerance.
pub fn cmd_check(solution_path: &Path, scenario_path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let scenario = match load_scenario(scenario_path, err) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let doc = match fs::read_to_string(solution_path)
        .map_err(|e| e.to_string())
        .and_then(|t| SolutionDocument::from_json(&t).map_err(|e| e.to_string()))
    {
        Ok(d) => d,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", solution_path.display());
            return EXIT_INPUT;
        }
    };
    let mut problems = Vec::new();
    if doc.scenario_hash != scenario_hash(&scenario) {
        problems.push("scenario hash mismatch: the solution was computed for a different scenario".to_string());
    }
    let report = match evaluate(&doc.placement, &doc.allocation, &scenario) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "verification failed: {e}");
            return EXIT_VERIFY;
        }
    };
    match check_feasibility(&doc.placement, &doc.allocation, &scenario, doc.eta) {
        Ok(verdict) => {
            for v in verdict.violations {
                problems.push(format!("{} violated by {:.6e}", v.constraint, v.magnitude));
            }
        }
        Err(e) => problems.push(e.to_string()),
    }
    let recomputed = report.common_throughput;
    if (doc.eta - recomputed).abs() > TOL_FEAS * recomputed.abs().max(1.0) {
        problems.push(format!(
            "throughput mismatch: stored eta {:.6e} bps, recomputed {:.6e} bps",
            doc.eta, recomputed
        ));
    }
    if problems.is_empty() {
        let _ = writeln!(
            out,
            "ok: {} solution feasible, eta = {:.6} Mbps",
            doc.scheme,
            recomputed * 1e-6
        );
        EXIT_OK
    } else {
        let _ = writeln!(err, "verification failed:");
        for p in &problems {
            let _ = writeln!(err, "  {p}");
        }
        EXIT_VERIFY
    }
}
