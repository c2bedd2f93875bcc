//! Log-barrier interior-point solver for small smooth convex programs.
//!
//! Programs maximize a linear objective subject to concave constraints
//! `g_i(x) >= 0`, sparse affine rows `a_j^T x <= u_j` and lower bounds on the
//! variables. Each centering step is a damped Newton method whose Hessian
//! uses the exact outer-product term of the barrier and a forward difference
//! of the analytic constraint gradients for the curvature term. If that
//! Hessian is not positive definite (a constraint that is only locally
//! concave), the system is shifted by a multiple of the identity.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::regularized_solve;

/// A constraint `g(x) >= 0` with `g` concave (or at least locally so).
pub trait Constraint {
    /// Variables `g` depends on.
    fn support(&self) -> &[usize];
    /// Returns `g(x)` and writes `dg/dx[support[j]]` into `grad[j]`.
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

/// A [`Constraint`] built from a closure.
pub struct FnConstraint<F> {
    support: Vec<usize>,
    f: F,
}

impl<F> FnConstraint<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    pub fn new(support: Vec<usize>, f: F) -> Self {
        Self { support, f }
    }
}

impl<F> Constraint for FnConstraint<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    fn support(&self) -> &[usize] {
        &self.support
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (self.f)(x, grad)
    }
}

/// Sparse row `sum_j coeffs[j].1 * x[coeffs[j].0] <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineRow {
    pub coeffs: Vec<(usize, f64)>,
    pub upper: f64,
}

impl AffineRow {
    fn dot(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, c)| c * x[j]).sum()
    }
}

/// Maximize `objective^T x` subject to the listed constraints.
pub struct ConvexProgram<'a> {
    pub num_vars: usize,
    pub objective: Vec<(usize, f64)>,
    pub constraints: Vec<Box<dyn Constraint + 'a>>,
    pub affine: Vec<AffineRow>,
    /// Lower bound per variable; `f64::NEG_INFINITY` for free variables.
    pub lower: Vec<f64>,
    /// Starting guess used when no warm start is given; need not be feasible.
    pub initial: Vec<f64>,
}

impl<'a> ConvexProgram<'a> {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: Vec::new(),
            constraints: Vec::new(),
            affine: Vec::new(),
            lower: vec![f64::NEG_INFINITY; num_vars],
            initial: vec![0.0; num_vars],
        }
    }

    pub fn add_constraint(&mut self, c: impl Constraint + 'a) {
        self.constraints.push(Box::new(c));
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Number of logarithmic barrier terms.
    pub fn num_barrier_terms(&self) -> usize {
        self.constraints.len()
            + self.affine.len()
            + self.lower.iter().filter(|l| l.is_finite()).count()
    }

    /// Smallest slack over all constraints and finite bounds (negative when violated).
    pub fn min_slack(&self, x: &[f64]) -> f64 {
        let mut grad = Vec::new();
        let mut worst = f64::INFINITY;
        for c in &self.constraints {
            grad.clear();
            grad.resize(c.support().len(), 0.0);
            worst = worst.min(c.eval(x, &mut grad));
        }
        for row in &self.affine {
            worst = worst.min(row.upper - row.dot(x));
        }
        for (xi, lb) in x.iter().zip(&self.lower) {
            if lb.is_finite() {
                worst = worst.min(xi - lb);
            }
        }
        worst
    }

    /// True when every constraint and bound holds strictly.
    pub fn is_strictly_feasible(&self, x: &[f64]) -> bool {
        x.len() == self.num_vars && x.iter().all(|v| v.is_finite()) && self.min_slack(x) > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub status: SolveStatus,
    /// Largest of the duality-gap bound and the Newton decrement scaled by
    /// `1/t`, relative to `max(1, |objective|)`.
    pub kkt_residual: f64,
    /// Newton steps over phase 1 and phase 2.
    pub iterations: usize,
    /// Objective after each completed centering step.
    pub path: Vec<f64>,
}

/// Barrier parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub t0: f64,
    pub mu: f64,
    /// Relative duality-gap target: stop once `terms / t <= tol_gap * max(1, |obj|)`.
    pub tol_gap: f64,
    /// Centering stops when half the squared Newton decrement falls below this.
    pub newton_tol: f64,
    pub alpha: f64,
    pub beta: f64,
    pub max_newton: usize,
    pub max_outer: usize,
    pub tol_kkt: f64,
    /// Warm starts begin at `max(t0, warm_t_factor * t_fit)`, where `t_fit`
    /// best centers the warm point.
    pub warm_t_factor: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            t0: 1.0,
            mu: 10.0,
            tol_gap: 1e-8,
            newton_tol: 1e-9,
            alpha: 0.3,
            beta: 0.8,
            max_newton: 50,
            max_outer: 80,
            tol_kkt: 1e-6,
            warm_t_factor: 1e-2,
        }
    }
}

/// Solves `program`, starting from `warm_start` when given (phase 1 runs
/// first if the start point is not strictly feasible).
pub fn solve(program: &ConvexProgram<'_>, warm_start: Option<&[f64]>, settings: &SolverSettings) -> SolveResult {
    let (start, warm) = match warm_start {
        Some(w) if w.len() == program.num_vars => (w.to_vec(), true),
        _ => (program.initial.clone(), false),
    };
    let mut phase1_steps = 0;
    let x0 = if program.is_strictly_feasible(&start) {
        start
    } else {
        match phase1_search(program, &start, settings) {
            Ok((x, steps)) => {
                phase1_steps = steps;
                x
            }
            Err((x, steps, status)) => {
                let objective_value = program.objective_value(&x);
                return SolveResult {
                    x,
                    objective_value,
                    status,
                    kkt_residual: f64::INFINITY,
                    iterations: steps,
                    path: Vec::new(),
                };
            }
        }
    };
    let t_init = if warm {
        let fit = Barrier::new(program).fitted_t(&x0);
        (settings.warm_t_factor * fit).max(settings.t0)
    } else {
        settings.t0
    };
    let mut res = run_barrier(program, x0, t_init, settings, None);
    res.iterations += phase1_steps;
    res
}

/// Strictly feasible point for `program`, via the auxiliary-slack problem
/// `min s  s.t.  g_i(x) + s >= 0,  a_j^T x - s <= u_j`.
///
/// `start` is returned unchanged when it is already strictly feasible.
pub fn phase1_feasible_point(
    program: &ConvexProgram<'_>,
    start: &[f64],
    settings: &SolverSettings,
) -> Result<Vec<f64>> {
    if program.is_strictly_feasible(start) {
        return Ok(start.to_vec());
    }
    phase1_search(program, start, settings)
        .map(|(x, _)| x)
        .map_err(|(_, _, status)| match status {
            SolveStatus::Infeasible => Error::Infeasible("phase 1 found no strictly feasible point".into()),
            _ => Error::Infeasible("phase 1 did not converge".into()),
        })
}

struct Shifted<'b> {
    inner: &'b dyn Constraint,
    support: Vec<usize>,
    slack: usize,
}

impl Constraint for Shifted<'_> {
    fn support(&self) -> &[usize] {
        &self.support
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let q = self.support.len() - 1;
        let v = self.inner.eval(x, &mut grad[..q]);
        grad[q] = 1.0;
        v + x[self.slack]
    }
}

fn phase1_search(
    program: &ConvexProgram<'_>,
    start: &[f64],
    settings: &SolverSettings,
) -> core::result::Result<(Vec<f64>, usize), (Vec<f64>, usize, SolveStatus)> {
    let n = program.num_vars;
    let s_idx = n;
    let mut x0 = vec![0.0; n + 1];
    for (dst, src) in x0.iter_mut().zip(start.iter().take(n)) {
        *dst = *src;
    }
    // Bounds are never relaxed: pull the start inside them first.
    for j in 0..n {
        let lb = program.lower[j];
        if lb.is_finite() && !(x0[j] > lb) {
            x0[j] = lb + 1e-3 * lb.abs().max(1e-3);
        }
        if !x0[j].is_finite() {
            x0[j] = if lb.is_finite() { lb + 1.0 } else { 0.0 };
        }
    }
    let mut aux = ConvexProgram::new(n + 1);
    aux.objective = vec![(s_idx, -1.0)];
    for c in &program.constraints {
        let mut support = c.support().to_vec();
        support.push(s_idx);
        aux.constraints.push(Box::new(Shifted {
            inner: c.as_ref(),
            support,
            slack: s_idx,
        }));
    }
    for row in &program.affine {
        let mut coeffs = row.coeffs.clone();
        coeffs.push((s_idx, -1.0));
        aux.affine.push(AffineRow {
            coeffs,
            upper: row.upper,
        });
    }
    for j in 0..n {
        aux.lower[j] = if program.lower[j].is_finite() {
            program.lower[j]
        } else {
            // Free variables get a wide box so the auxiliary problem is bounded.
            x0[j] - 10.0 * x0[j].abs().max(1.0)
        };
    }
    aux.lower[s_idx] = -1.0;
    let mut worst = 0.0f64;
    {
        let mut grad = Vec::new();
        for c in &program.constraints {
            grad.clear();
            grad.resize(c.support().len(), 0.0);
            let v = c.eval(&x0[..n], &mut grad);
            if !v.is_finite() {
                return Err((start.to_vec(), 0, SolveStatus::NumericalFailure));
            }
            worst = worst.max(-v);
        }
        for row in &program.affine {
            worst = worst.max(row.dot(&x0[..n]) - row.upper);
        }
    }
    x0[s_idx] = worst + 0.1 * worst.abs().max(1e-3);
    let stop = |x: &[f64]| x[s_idx] < 0.0;
    let res = run_barrier(&aux, x0, settings.t0, settings, Some(&stop));
    let x: Vec<f64> = res.x[..n].to_vec();
    if res.x[s_idx] < 0.0 && program.is_strictly_feasible(&x) {
        log::debug!("phase 1 done after {} Newton steps", res.iterations);
        Ok((x, res.iterations))
    } else if res.status == SolveStatus::Optimal {
        Err((x, res.iterations, SolveStatus::Infeasible))
    } else {
        Err((x, res.iterations, res.status))
    }
}

/// Cached evaluation of the barrier terms at one point.
struct Barrier<'p, 'a> {
    program: &'p ConvexProgram<'a>,
}

struct Point {
    values: Vec<f64>,
    grads: Vec<Vec<f64>>,
    affine_slack: Vec<f64>,
}

impl<'p, 'a> Barrier<'p, 'a> {
    fn new(program: &'p ConvexProgram<'a>) -> Self {
        Self { program }
    }

    fn point(&self, x: &[f64]) -> Point {
        let mut values = Vec::with_capacity(self.program.constraints.len());
        let mut grads = Vec::with_capacity(self.program.constraints.len());
        for c in &self.program.constraints {
            let mut g = vec![0.0; c.support().len()];
            values.push(c.eval(x, &mut g));
            grads.push(g);
        }
        let affine_slack = self.program.affine.iter().map(|r| r.upper - r.dot(x)).collect();
        Point {
            values,
            grads,
            affine_slack,
        }
    }

    /// Gradient of the log-barrier `psi(x) = -sum log(slacks)`.
    fn barrier_gradient(&self, x: &[f64], pt: &Point) -> Vec<f64> {
        let p = self.program;
        let mut g = vec![0.0; p.num_vars];
        for (i, c) in p.constraints.iter().enumerate() {
            for (j, &v) in c.support().iter().enumerate() {
                g[v] -= pt.grads[i][j] / pt.values[i];
            }
        }
        for (row, &s) in p.affine.iter().zip(&pt.affine_slack) {
            for &(j, c) in &row.coeffs {
                g[j] += c / s;
            }
        }
        for j in 0..p.num_vars {
            if p.lower[j].is_finite() {
                g[j] -= 1.0 / (x[j] - p.lower[j]);
            }
        }
        g
    }

    /// `t` that best centers `x`: least squares fit of `t c = grad psi`.
    fn fitted_t(&self, x: &[f64]) -> f64 {
        let pt = self.point(x);
        let g = self.barrier_gradient(x, &pt);
        let num: f64 = self.program.objective.iter().map(|&(j, c)| c * g[j]).sum();
        let den: f64 = self.program.objective.iter().map(|&(_, c)| c * c).sum();
        if den > 0.0 && num.is_finite() {
            num / den
        } else {
            0.0
        }
    }

    /// Hessian of `psi` (row-major).
    fn barrier_hessian(&self, x: &[f64], pt: &Point) -> Vec<f64> {
        let p = self.program;
        let n = p.num_vars;
        let mut h = vec![0.0; n * n];
        let mut xp = x.to_vec();
        for (i, c) in p.constraints.iter().enumerate() {
            let sup = c.support();
            let q = sup.len();
            let gi = &pt.grads[i];
            let vi = pt.values[i];
            let inv2 = 1.0 / (vi * vi);
            for a in 0..q {
                for b in 0..q {
                    h[sup[a] * n + sup[b]] += gi[a] * gi[b] * inv2;
                }
            }
            // Forward-difference curvature of g_i over its support.
            let mut curv = vec![0.0; q * q];
            let mut gp = vec![0.0; q];
            for b in 0..q {
                let v = sup[b];
                let step = 1e-7 * x[v].abs().max(1e-4);
                xp[v] = x[v] + step;
                c.eval(&xp, &mut gp);
                xp[v] = x[v];
                for a in 0..q {
                    curv[a * q + b] = (gp[a] - gi[a]) / step;
                }
            }
            for a in 0..q {
                for b in 0..q {
                    let sym = 0.5 * (curv[a * q + b] + curv[b * q + a]);
                    h[sup[a] * n + sup[b]] -= sym / vi;
                }
            }
        }
        for (row, &s) in p.affine.iter().zip(&pt.affine_slack) {
            let inv2 = 1.0 / (s * s);
            for &(ja, ca) in &row.coeffs {
                for &(jb, cb) in &row.coeffs {
                    h[ja * n + jb] += ca * cb * inv2;
                }
            }
        }
        for j in 0..n {
            if p.lower[j].is_finite() {
                let d = x[j] - p.lower[j];
                h[j * n + j] += 1.0 / (d * d);
            }
        }
        h
    }

    /// Strict feasibility of `x` given its evaluated point.
    fn feasible(&self, x: &[f64], pt: &Point) -> bool {
        pt.values.iter().all(|&v| v > 0.0 && v.is_finite())
            && pt.affine_slack.iter().all(|&s| s > 0.0)
            && x
                .iter()
                .zip(&self.program.lower)
                .all(|(xi, lb)| xi.is_finite() && (!lb.is_finite() || xi > lb))
    }

    /// `phi_t(x_new) - phi_t(x)` computed from slack ratios to avoid cancellation.
    fn phi_change(&self, t: f64, x: &[f64], old: &Point, x_new: &[f64], new: &Point) -> f64 {
        let p = self.program;
        let mut d = -t * p
            .objective
            .iter()
            .map(|&(j, c)| c * (x_new[j] - x[j]))
            .sum::<f64>();
        for (a, b) in old.values.iter().zip(&new.values) {
            d -= libm::log(b / a);
        }
        for (a, b) in old.affine_slack.iter().zip(&new.affine_slack) {
            d -= libm::log(b / a);
        }
        for j in 0..p.num_vars {
            let lb = p.lower[j];
            if lb.is_finite() {
                d -= libm::log((x_new[j] - lb) / (x[j] - lb));
            }
        }
        d
    }

    /// Largest step in `(0, 1]` keeping affine rows and bounds strict.
    fn max_linear_step(&self, x: &[f64], pt: &Point, dx: &[f64]) -> f64 {
        let p = self.program;
        let mut s: f64 = 1.0;
        for (row, &slack) in p.affine.iter().zip(&pt.affine_slack) {
            let rate = row.dot(dx);
            if rate > 0.0 {
                s = s.min(0.99 * slack / rate);
            }
        }
        for j in 0..p.num_vars {
            let lb = p.lower[j];
            if lb.is_finite() && dx[j] < 0.0 {
                s = s.min(0.99 * (x[j] - lb) / -dx[j]);
            }
        }
        s
    }
}

fn run_barrier(
    program: &ConvexProgram<'_>,
    mut x: Vec<f64>,
    t_init: f64,
    settings: &SolverSettings,
    stop: Option<&dyn Fn(&[f64]) -> bool>,
) -> SolveResult {
    let n = program.num_vars;
    let barrier = Barrier::new(program);
    let terms = program.num_barrier_terms().max(1) as f64;
    let mut t = t_init;
    let mut iterations = 0;
    let mut path = Vec::new();
    let mut pt = barrier.point(&x);
    let mut last_decrement = f64::INFINITY;
    for outer in 0..settings.max_outer {
        // Centering. The duality-gap bound only holds at a centered point.
        let mut centered = false;
        for _ in 0..settings.max_newton {
            let mut grad = barrier.barrier_gradient(&x, &pt);
            for &(j, c) in &program.objective {
                grad[j] -= t * c;
            }
            let hess = barrier.barrier_hessian(&x, &pt);
            let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
            let Some((dx, _shift)) = regularized_solve(n, &hess, &neg) else {
                return finish(program, x, SolveStatus::NumericalFailure, f64::INFINITY, iterations, path);
            };
            let slope: f64 = grad.iter().zip(&dx).map(|(g, d)| g * d).sum();
            if !slope.is_finite() {
                return finish(program, x, SolveStatus::NumericalFailure, f64::INFINITY, iterations, path);
            }
            last_decrement = libm::sqrt(slope.abs());
            if -slope / 2.0 <= settings.newton_tol {
                centered = true;
                break;
            }
            iterations += 1;
            let mut step = barrier.max_linear_step(&x, &pt, &dx);
            let mut accepted = None;
            while step > 1e-16 {
                let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + step * d).collect();
                let cpt = barrier.point(&cand);
                if barrier.feasible(&cand, &cpt) {
                    let change = barrier.phi_change(t, &x, &pt, &cand, &cpt);
                    if change <= settings.alpha * step * slope {
                        accepted = Some((cand, cpt));
                        break;
                    }
                }
                step *= settings.beta;
            }
            match accepted {
                Some((cand, cpt)) => {
                    x = cand;
                    pt = cpt;
                }
                // No progress possible at this precision; treat as centered.
                None => {
                    centered = true;
                    break;
                }
            }
            if let Some(stop) = stop {
                if stop(&x) {
                    path.push(program.objective_value(&x));
                    return finish(program, x, SolveStatus::Optimal, terms / t, iterations, path);
                }
            }
        }
        let obj = program.objective_value(&x);
        path.push(obj);
        log::trace!("barrier outer {outer}: t={t:.3e} objective={obj:.9e} newton={iterations}");
        if let Some(stop) = stop {
            if stop(&x) {
                return finish(program, x, SolveStatus::Optimal, terms / t, iterations, path);
            }
        }
        let gap = terms / t;
        let scale = obj.abs().max(1.0);
        if gap <= settings.tol_gap * scale {
            let kkt = gap.max(last_decrement / t) / scale;
            let status = if !centered {
                SolveStatus::MaxIter
            } else if kkt <= settings.tol_kkt {
                SolveStatus::Optimal
            } else {
                SolveStatus::NumericalFailure
            };
            return finish(program, x, status, kkt, iterations, path);
        }
        t *= settings.mu;
    }
    let kkt = (terms / t).max(last_decrement / t) / program.objective_value(&x).abs().max(1.0);
    finish(program, x, SolveStatus::MaxIter, kkt, iterations, path)
}

fn finish(
    program: &ConvexProgram<'_>,
    x: Vec<f64>,
    status: SolveStatus,
    kkt_residual: f64,
    iterations: usize,
    path: Vec<f64>,
) -> SolveResult {
    SolveResult {
        objective_value: program.objective_value(&x),
        x,
        status,
        kkt_residual,
        iterations,
        path,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;

    fn upper(j: usize, u: f64) -> AffineRow {
        AffineRow {
            coeffs: vec![(j, 1.0)],
            upper: u,
        }
    }

    #[test]
    fn linear_min_of_bounds() {
        let mut p = ConvexProgram::new(1);
        p.objective = vec![(0, 1.0)];
        p.affine = vec![upper(0, 3.0), upper(0, 5.0)];
        p.initial = vec![0.0];
        let r = solve(&p, None, &SolverSettings::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective_value - 3.0).abs() < 1e-7, "{}", r.objective_value);
    }

    #[test]
    fn log_constraint_pushes_to_bound() {
        // max eta  s.t.  log2(1 + x) - eta >= 0,  x <= 1,  x >= 0
        let mut p = ConvexProgram::new(2);
        p.objective = vec![(1, 1.0)];
        p.lower = vec![0.0, f64::NEG_INFINITY];
        p.affine = vec![upper(0, 1.0)];
        p.add_constraint(FnConstraint::new(vec![0, 1], |x: &[f64], g: &mut [f64]| {
            g[0] = 1.0 / ((1.0 + x[0]) * math::LN_2);
            g[1] = -1.0;
            math::log2_1p(x[0]) - x[1]
        }));
        p.initial = vec![0.5, 0.0];
        let r = solve(&p, None, &SolverSettings::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective_value - 1.0).abs() < 1e-7);
        assert!((r.x[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn phase1_keeps_feasible_start() {
        let mut p = ConvexProgram::new(1);
        p.objective = vec![(0, 1.0)];
        p.affine = vec![upper(0, 3.0)];
        let x = phase1_feasible_point(&p, &[1.0], &SolverSettings::default()).unwrap();
        assert_eq!(x, vec![1.0]);
    }

    #[test]
    fn phase1_detects_infeasible() {
        // eta <= 1 and eta >= 2
        let mut p = ConvexProgram::new(1);
        p.objective = vec![(0, 1.0)];
        p.affine = vec![
            upper(0, 1.0),
            AffineRow {
                coeffs: vec![(0, -1.0)],
                upper: -2.0,
            },
        ];
        assert!(matches!(
            phase1_feasible_point(&p, &[0.0], &SolverSettings::default()),
            Err(Error::Infeasible(_))
        ));
        let r = solve(&p, None, &SolverSettings::default());
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn phase1_finds_interior_point() {
        // x0 + x1 <= 1, x >= 0, and x0 * x1 concave-ish region: x1 - (x0 - 0.5)^2 >= 0.1
        let mut p = ConvexProgram::new(2);
        p.objective = vec![(0, 1.0)];
        p.lower = vec![0.0, 0.0];
        p.affine = vec![AffineRow {
            coeffs: vec![(0, 1.0), (1, 1.0)],
            upper: 1.0,
        }];
        p.add_constraint(FnConstraint::new(vec![0, 1], |x: &[f64], g: &mut [f64]| {
            g[0] = -2.0 * (x[0] - 0.5);
            g[1] = 1.0;
            x[1] - (x[0] - 0.5) * (x[0] - 0.5) - 0.1
        }));
        let x = phase1_feasible_point(&p, &[0.9, 0.05], &SolverSettings::default()).unwrap();
        assert!(p.is_strictly_feasible(&x));
    }
}
