use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slbvp_core::domain::{disc_domain, ellipse_domain};
use slbvp_core::grid::build_grid;
use slbvp_core::operator::OperatorKind;
use slbvp_core::radial::radial_solve;
use slbvp_core::solver::continuation::{continue_from, initial_state};
use slbvp_core::solver::{
    assemble_jacobian, assemble_residual, continuation_solve, max_norm, solve_at_t,
    uniqueness_deviation, Normalization, Problem, SolveConfig, SolveState,
};

fn unit_disc() -> slbvp_core::domain::DomainSpec {
    disc_domain([0.0, 0.0], 1.0).unwrap()
}

fn problem<'a>(
    grid: &'a slbvp_core::grid::Grid,
    target: &'a slbvp_core::domain::DomainSpec,
    normalization: Normalization,
) -> Problem<'a> {
    Problem {
        grid,
        target,
        kind: OperatorKind::Graph,
        normalization,
        convexity_guard: 1e-8,
    }
}

#[test]
fn t0_identity_quadratic_has_small_residual() {
    let d = unit_disc();
    let g = build_grid(&d, 32, 64).unwrap();
    let u = g.sample(|p| 0.5 * (p[0] * p[0] + p[1] * p[1]));
    let r = assemble_residual(&g, &d, &u, FRAC_PI_2, 0.0).unwrap();
    // Drop the normalization row; u is not mean-zero here.
    assert!(max_norm(&r[..g.len()]) <= 1e-8);
}

#[test]
fn t0_ellipse_to_disc_quadratic_has_small_residual() {
    let (a1, a2) = (1.3, 0.8);
    let src = ellipse_domain([a1, a2]).unwrap();
    let tgt = unit_disc();
    let g = build_grid(&src, 32, 64).unwrap();
    let u = g.sample(|p| p[0] * p[0] / (2.0 * a1) + p[1] * p[1] / (2.0 * a2));
    let c = (1.0 / a1).atan() + (1.0 / a2).atan();
    let r = assemble_residual(&g, &tgt, &u, c, 0.0).unwrap();
    assert!(max_norm(&r[..g.len()]) <= 1e-8);
}

#[test]
fn t1_identity_quadratic_is_not_a_solution() {
    let d = unit_disc();
    let g = build_grid(&d, 32, 64).unwrap();
    let u = g.sample(|p| 0.5 * (p[0] * p[0] + p[1] * p[1]));
    let r = assemble_residual(&g, &d, &u, FRAC_PI_2, 1.0).unwrap();
    let worst = g.interior_nodes().map(|k| r[k].abs()).fold(0.0, f64::max);
    assert!(worst >= 0.1, "{worst}");
    // Oracle: 2·arctan(1/(1+r²)^{3/2})... evaluated on the radial curvatures.
    let k = g.node(g.n_r - 1, 0);
    let rad = g.positions[k][0];
    let v = (1.0 + rad * rad).sqrt();
    let expect = (1.0 / (v * v * v)).atan() + (1.0 / v).atan() - FRAC_PI_2;
    assert!((r[k] - expect).abs() < 1e-9);
}

#[test]
fn c_column_and_boundary_rows() {
    let d = unit_disc();
    let g = build_grid(&d, 8, 16).unwrap();
    let u = g.sample(|p| 0.6 * p[0] * p[0] + 0.4 * p[1] * p[1] + 0.1 * p[0] * p[1]);
    let j = assemble_jacobian(&g, &d, &u, 1.0, 0.7).unwrap().to_dense();
    let n = g.len();
    for k in 0..n {
        let expect = if g.is_boundary(k) { 0.0 } else { -1.0 };
        assert_eq!(j[(k, n)], expect);
    }
    assert_eq!(j[(n, n)], 0.0);
    for &b in &g.boundary_nodes {
        let du = g.derivatives_at(&u, b).du;
        let st = &g.stencils[b];
        for (m, &node) in st.nodes.iter().enumerate() {
            let expect = -(du[0] * st.grad[m][0] + du[1] * st.grad[m][1]);
            assert!((j[(b, node)] - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (src, tgt) in [
        (unit_disc(), ellipse_domain([1.3, 0.8]).unwrap()),
        (ellipse_domain([1.3, 0.8]).unwrap(), unit_disc()),
    ] {
        let g = build_grid(&src, 12, 16).unwrap();
        let a: [f64; 6] = std::array::from_fn(|_| rng.random_range(-0.1..0.1));
        let u = g.sample(|p| {
            let (x, y) = (p[0], p[1]);
            0.7 * x * x + 0.5 * y * y + 0.1 * x * y
                + a[0] * x + a[1] * y + a[2] * x * x * x + a[3] * x * y * y + a[4] * (x * y).sin()
                + a[5] * (x + y).cos()
        });
        for t in [0.0, 0.4, 1.0] {
            let c = 1.1;
            let p = problem(&g, &tgt, Normalization::MeanZero);
            let j = p.jacobian(&u, c, t).unwrap().to_dense();
            let n = g.len();
            let scale = j.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let mut worst = 0.0f64;
            for col in 0..=n {
                let eps = 1e-6;
                let (mut up, mut um) = (u.clone(), u.clone());
                let (mut cp, mut cm) = (c, c);
                if col < n {
                    up[col] += eps;
                    um[col] -= eps;
                } else {
                    cp += eps;
                    cm -= eps;
                }
                let rp = p.residual(&up, cp, t).unwrap();
                let rm = p.residual(&um, cm, t).unwrap();
                for row in 0..=n {
                    let fd = (rp[row] - rm[row]) / (2.0 * eps);
                    worst = worst.max((fd - j[(row, col)]).abs() / scale);
                }
            }
            assert!(worst <= 1e-5, "t = {t}: {worst}");
        }
    }
}

#[test]
fn t0_newton_recovers_identity_quadratic() {
    let d = unit_disc();
    let g = build_grid(&d, 32, 64).unwrap();
    let p = problem(&g, &d, Normalization::MeanZero);
    let u0 = g.sample(|p| 0.45 * (p[0] * p[0] + p[1] * p[1]));
    let st = solve_at_t(&p, 0.0, &SolveState::initial(u0, 1.0, 0.0), &SolveConfig::default());
    assert!(st.converged, "{:?}", st.failure);
    assert!((st.c - FRAC_PI_2).abs() < 1e-6);
    let exact = g.sample(|p| 0.5 * (p[0] * p[0] + p[1] * p[1]));
    assert!(uniqueness_deviation(&st.u, &exact).unwrap() < 1e-8);
    // Accepted steps decrease the residual.
    assert!(st.newton_history.windows(2).all(|w| w[1].residual < w[0].residual));
}

#[test]
fn t0_ellipse_to_disc_constant() {
    let src = ellipse_domain([1.3, 0.8]).unwrap();
    let tgt = unit_disc();
    let g = build_grid(&src, 32, 64).unwrap();
    let p = problem(&g, &tgt, Normalization::MeanZero);
    let u0 = g.sample(|p| 0.4 * p[0] * p[0] + 0.6 * p[1] * p[1]);
    let st = solve_at_t(&p, 0.0, &SolveState::initial(u0, 1.0, 0.0), &SolveConfig::default());
    assert!(st.converged);
    let exact = (1.0f64 / 1.3).atan() + 1.25f64.atan();
    assert!((st.c - exact).abs() < 1e-6, "{} vs {exact}", st.c);
}

#[test]
fn t0_stage_from_exact_guess_is_quick() {
    let d = unit_disc();
    let g = build_grid(&d, 16, 32).unwrap();
    let run = continuation_solve(&d, &d, &g, &SolveConfig::default()).unwrap();
    assert!(run.trace[0].newton_iters <= 6);
}

#[test]
fn disc_to_disc_matches_radial_oracle() {
    let d = unit_disc();
    let g = build_grid(&d, 32, 64).unwrap();
    let run = continuation_solve(&d, &d, &g, &SolveConfig::default()).unwrap();
    let oracle = radial_solve(1.0, 1.0, 2, 1.0, 1e-12).unwrap().c;
    assert!((run.state.c - oracle).abs() <= 1e-3, "{} vs {oracle}", run.state.c);
    // Quadratic convergence on the final stage.
    let h = &run.state.newton_history;
    let n = h.len();
    assert!(n >= 3);
    let (r0, r1, r2) = (h[n - 3].residual, h[n - 2].residual, h[n - 1].residual);
    assert!(r1.ln() / r0.ln() > 1.5 || r2 < 1e-12, "{r0} {r1} {r2}");
}

#[test]
fn disc_to_ellipse_trace_is_bounded_and_continuous() {
    let d = unit_disc();
    let e = ellipse_domain([1.3, 0.8]).unwrap();
    let g = build_grid(&d, 32, 64).unwrap();
    let run = continuation_solve(&d, &e, &g, &SolveConfig::default()).unwrap();
    assert_eq!(run.trace.len(), 11);
    for p in &run.trace {
        assert!(p.c.abs() <= 2.0 * std::f64::consts::PI);
    }
    for w in run.trace.windows(2) {
        assert!((w[1].c - w[0].c).abs() <= 0.5);
    }
    let again = continuation_solve(&d, &e, &g, &SolveConfig::default()).unwrap();
    assert_eq!(run.trace, again.trace);
    assert_eq!(run.state.u, again.state.u);
}

#[test]
fn normalization_choice_only_shifts_u() {
    let d = unit_disc();
    let e = ellipse_domain([1.3, 0.8]).unwrap();
    let g = build_grid(&d, 16, 32).unwrap();
    let a = continuation_solve(&d, &e, &g, &SolveConfig::default()).unwrap();
    let cfg = SolveConfig {
        normalization: Normalization::PoleZero,
        ..SolveConfig::default()
    };
    let b = continuation_solve(&d, &e, &g, &cfg).unwrap();
    assert!(uniqueness_deviation(&a.state.u, &b.state.u).unwrap() <= 1e-8);
    assert!((a.state.c - b.state.c).abs() <= 1e-8);
    assert!(b.state.u[0].abs() < 1e-12);
}

#[test]
fn different_initial_guesses_agree() {
    let d = unit_disc();
    let g = build_grid(&d, 16, 32).unwrap();
    let p = problem(&g, &d, Normalization::MeanZero);
    let cfg = SolveConfig::default();
    let a = continuation_solve(&d, &d, &g, &cfg).unwrap();
    let mut start = initial_state(&p, &d).unwrap();
    start.u.iter_mut().for_each(|x| *x *= 1.2);
    let b = continue_from(&p, start, &cfg).unwrap();
    assert!(uniqueness_deviation(&a.state.u, &b.state.u).unwrap() <= 1e-8);
    assert!((a.state.c - b.state.c).abs() <= 1e-8);
}

#[test]
fn t0_interior_rows_ignore_constant_shift() {
    let d = unit_disc();
    let g = build_grid(&d, 16, 32).unwrap();
    let u = g.sample(|p| 0.5 * p[0] * p[0] + 0.7 * p[1] * p[1] + 0.05 * p[0].powi(3));
    let shifted: Vec<f64> = u.iter().map(|x| x + 0.37).collect();
    let a = assemble_residual(&g, &d, &u, 1.2, 0.0).unwrap();
    let b = assemble_residual(&g, &d, &shifted, 1.2, 0.0).unwrap();
    for k in g.interior_nodes() {
        assert!((a[k] - b[k]).abs() <= 1e-12);
    }
}

#[test]
fn nonconvex_state_is_rejected() {
    let d = unit_disc();
    let g = build_grid(&d, 8, 16).unwrap();
    let u = g.sample(|p| p[0] * p[0] - p[1] * p[1]);
    let err = assemble_residual(&g, &d, &u, 1.0, 0.5).unwrap_err();
    assert!(matches!(err, slbvp_core::Error::ConvexityLost { .. }));
}

#[test]
fn adaptive_schedule_reaches_one() {
    let d = unit_disc();
    let e = ellipse_domain([1.3, 0.8]).unwrap();
    let g = build_grid(&d, 16, 32).unwrap();
    let cfg = SolveConfig {
        mode: slbvp_core::solver::HomotopyMode::Adaptive,
        homotopy_steps: 4,
        ..SolveConfig::default()
    };
    let run = continuation_solve(&d, &e, &g, &cfg).unwrap();
    assert_eq!(run.state.t, 1.0);
    assert!(run.trace.windows(2).all(|w| w[1].t > w[0].t));
}

#[test]
fn starved_newton_reports_failure_with_trace() {
    let d = unit_disc();
    let e = ellipse_domain([2.0, 0.5]).unwrap();
    let g = build_grid(&d, 16, 32).unwrap();
    let cfg = SolveConfig {
        homotopy_steps: 1,
        max_newton_iters: 1,
        ..SolveConfig::default()
    };
    let fail = continuation_solve(&d, &e, &g, &cfg).unwrap_err();
    assert_eq!(fail.kind, slbvp_core::solver::FailureKind::MaxIterations);
    assert_eq!(fail.trace.len(), 1);
    assert_eq!(fail.t_reached, Some(0.0));
}
