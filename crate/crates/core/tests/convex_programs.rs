//! The barrier solver on random programs whose optimum is known in advance.
//!
//! Each program is built backwards: pick the optimum `x*`, then a few balls
//! that all touch `x*` from directions inside one half-space, and set the
//! objective to a positive combination of their outward normals. The balls
//! are concave constraints, the KKT conditions hold at `x*` by construction,
//! so `x*` is the unique maximizer. Extra affine rows and bounds stay
//! inactive.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skyhaul_core::convex::{solve, AffineRow, ConvexProgram, FnConstraint, SolveStatus, SolverSettings};

struct Instance {
    n: usize,
    optimum: Vec<f64>,
    centers: Vec<Vec<f64>>,
    radii: Vec<f64>,
    objective: Vec<f64>,
    rows: Vec<AffineRow>,
    lower: Vec<f64>,
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn random_instance(rng: &mut impl Rng) -> Instance {
    let n = rng.gen_range(2..6);
    let optimum: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let axis = unit((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let active = rng.gen_range(1..=n);
    let mut centers = Vec::new();
    let mut radii = Vec::new();
    let mut objective = vec![0.0; n];
    for _ in 0..active {
        let u = unit(axis.iter().map(|a| a + rng.gen_range(-0.4..0.4)).collect());
        let r = rng.gen_range(0.5..4.0);
        let lambda = rng.gen_range(0.2..2.0);
        centers.push(optimum.iter().zip(&u).map(|(x, ui)| x - r * ui).collect::<Vec<_>>());
        radii.push(r);
        for j in 0..n {
            objective[j] += lambda * 2.0 * r * u[j];
        }
    }
    let rows = (0..3)
        .map(|_| {
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let at_opt: f64 = a.iter().zip(&optimum).map(|(a, x)| a * x).sum();
            AffineRow {
                coeffs: a.into_iter().enumerate().collect(),
                upper: at_opt + rng.gen_range(0.5..3.0),
            }
        })
        .collect();
    let lower = optimum.iter().map(|x| x - 20.0).collect();
    Instance {
        n,
        optimum,
        centers,
        radii,
        objective,
        rows,
        lower,
    }
}

fn program(inst: &Instance) -> ConvexProgram<'_> {
    let mut prog = ConvexProgram::new(inst.n);
    prog.objective = inst.objective.iter().cloned().enumerate().collect();
    for (c, &r) in inst.centers.iter().zip(&inst.radii) {
        let support: Vec<usize> = (0..inst.n).collect();
        prog.add_constraint(FnConstraint::new(support, move |x: &[f64], grad: &mut [f64]| {
            let mut sq = 0.0;
            for j in 0..c.len() {
                let d = x[j] - c[j];
                grad[j] = -2.0 * d;
                sq += d * d;
            }
            r * r - sq
        }));
    }
    prog.affine = inst.rows.clone();
    prog.lower = inst.lower.clone();
    prog
}

fn objective_at(inst: &Instance, x: &[f64]) -> f64 {
    inst.objective.iter().zip(x).map(|(c, x)| c * x).sum()
}

#[test]
fn recovers_constructed_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let settings = SolverSettings::default();
    for trial in 0..50 {
        let inst = random_instance(&mut rng);
        let res = solve(&program(&inst), None, &settings);
        assert_eq!(res.status, SolveStatus::Optimal, "trial {trial}");
        let best = objective_at(&inst, &inst.optimum);
        let scale = best.abs().max(1.0);
        assert!((res.objective_value - best).abs() <= 1e-4 * scale, "trial {trial}: {} vs {best}", res.objective_value);
        let dist = res.x.iter().zip(&inst.optimum).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let size = inst.optimum.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
        assert!(dist <= 1e-4 * size * 10.0, "trial {trial}: |x - x*| = {dist}");
        assert!(res.kkt_residual <= settings.tol_kkt);
    }
}

#[test]
fn barrier_path_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..30 {
        let inst = random_instance(&mut rng);
        let res = solve(&program(&inst), None, &SolverSettings::default());
        assert!(res.path.len() >= 2);
        for pair in res.path.windows(2) {
            let tol = 1e-9 * pair[0].abs().max(1.0);
            assert!(pair[1] >= pair[0] - tol, "path {:?}", res.path);
        }
    }
}

/// Re-solving a slightly changed program from the previous solution should
/// take fewer Newton steps than starting cold.
#[test]
fn warm_start_saves_newton_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let settings = SolverSettings::default();
    let mut warm_steps = Vec::new();
    let mut cold_steps = Vec::new();
    for _ in 0..20 {
        let inst = random_instance(&mut rng);
        let first = solve(&program(&inst), None, &settings);
        // 1% perturbation that keeps the old solution feasible: grow every
        // ball and jitter the objective.
        let next = Instance {
            radii: inst.radii.iter().map(|r| r * 1.01).collect(),
            objective: inst.objective.iter().map(|c| c * (1.0 + rng.gen_range(-0.01..0.01))).collect(),
            optimum: inst.optimum.clone(),
            centers: inst.centers.clone(),
            rows: inst.rows.clone(),
            lower: inst.lower.clone(),
            ..inst
        };
        let prog = program(&next);
        let cold = solve(&prog, None, &settings);
        let warm = solve(&prog, Some(&first.x), &settings);
        assert_eq!(cold.status, SolveStatus::Optimal);
        assert_eq!(warm.status, SolveStatus::Optimal);
        assert!((cold.objective_value - warm.objective_value).abs() <= 1e-6 * cold.objective_value.abs().max(1.0));
        warm_steps.push(warm.iterations);
        cold_steps.push(cold.iterations);
    }
    warm_steps.sort_unstable();
    cold_steps.sort_unstable();
    let (w, c) = (warm_steps[10], cold_steps[10]);
    assert!(w < c, "median Newton steps: warm {w}, cold {c}");
}

#[test]
fn infeasible_program_is_reported() {
    let mut prog = ConvexProgram::new(1);
    prog.objective = vec![(0, 1.0)];
    prog.affine.push(AffineRow {
        coeffs: vec![(0, 1.0)],
        upper: 1.0,
    });
    prog.add_constraint(FnConstraint::new(vec![0], |x: &[f64], g: &mut [f64]| {
        g[0] = 1.0;
        x[0] - 2.0
    }));
    let res = solve(&prog, None, &SolverSettings::default());
    assert_eq!(res.status, SolveStatus::Infeasible);
}

