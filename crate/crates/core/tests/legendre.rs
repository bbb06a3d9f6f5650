use std::f64::consts::FRAC_PI_2;

use slbvp_core::domain::{disc_domain, ellipse_domain, DomainSpec};
use slbvp_core::grid::build_grid;
use slbvp_core::operator::OperatorKind;
use slbvp_core::legendre::{dual_residual, gradient_roundtrip, legendre_transform, paired_identities};
use slbvp_core::solver::{continuation_solve, uniqueness_deviation, SolveConfig};

#[test]
fn half_square_norm_is_self_conjugate() {
    let d = disc_domain([0.0, 0.0], 1.0).unwrap();
    let g = build_grid(&d, 32, 64).unwrap();
    let u = g.sample(|p| 0.5 * (p[0] * p[0] + p[1] * p[1]));
    let dual = legendre_transform(&g, &u, FRAC_PI_2, 0.0, &g, &d).unwrap();
    for (k, &y) in g.positions.iter().enumerate() {
        let exact = 0.5 * (y[0] * y[0] + y[1] * y[1]);
        assert!((dual.u_star[k] - exact).abs() <= 1e-6);
    }
    assert!((dual.c_dual - FRAC_PI_2).abs() < 1e-15);
    let res = dual_residual(&dual).unwrap();
    assert!(res.max_norm <= 1e-6, "{}", res.max_norm);
    let rt = gradient_roundtrip(&g, &u, &dual).unwrap();
    assert!(rt.max_error <= 1e-6, "{}", rt.max_error);
}

#[test]
fn anisotropic_quadratic_conjugates_to_inverse() {
    let d = disc_domain([0.0, 0.0], 1.0).unwrap();
    let image = ellipse_domain([2.0, 0.5]).unwrap();
    let g = build_grid(&d, 32, 64).unwrap();
    let gd = build_grid(&image, 32, 64).unwrap();
    let u = g.sample(|p| 0.5 * (2.0 * p[0] * p[0] + 0.5 * p[1] * p[1]));
    let c = 2f64.atan() + 0.5f64.atan();
    let dual = legendre_transform(&g, &u, c, 0.0, &gd, &image).unwrap();
    for (k, &y) in gd.positions.iter().enumerate() {
        let exact = 0.5 * (0.5 * y[0] * y[0] + 2.0 * y[1] * y[1]);
        assert!((dual.u_star[k] - exact).abs() <= 1e-6);
    }
    let rt = gradient_roundtrip(&g, &u, &dual).unwrap();
    assert!(rt.max_error <= 1e-6, "{}", rt.max_error);
    assert!(dual_residual(&dual).unwrap().max_norm <= 1e-6);
}

#[test]
fn nonconvex_input_is_rejected() {
    let d = disc_domain([0.0, 0.0], 1.0).unwrap();
    let g = build_grid(&d, 8, 16).unwrap();
    let u = g.sample(|p| p[0] * p[0] - p[1] * p[1]);
    assert!(matches!(
        legendre_transform(&g, &u, 1.0, 1.0, &g, &d),
        Err(slbvp_core::Error::InvalidInput(_))
    ));
}

#[test]
fn computed_disc_solution_dualizes_consistently() {
    let d = disc_domain([0.0, 0.0], 1.0).unwrap();
    let mut roundtrips = Vec::new();
    for (n_r, n_phi) in [(32, 64), (64, 128)] {
        let g = build_grid(&d, n_r, n_phi).unwrap();
        let run = continuation_solve(&d, &d, &g, &SolveConfig::default()).unwrap();
        let st = &run.state;
        let dual = legendre_transform(&g, &st.u, st.c, 1.0, &g, &d).unwrap();
        assert!((dual.c_dual + st.c - FRAC_PI_2 * 2.0).abs() < 1e-15);

        let res = dual_residual(&dual).unwrap().max_norm;
        let bound = 10.0 * (st.residual_norm + 5.0 * g.h * g.h);
        println!("{n_r}: dual residual {res:.3e} bound {bound:.3e}");
        assert!(res <= bound);

        let back = legendre_transform(&g, &dual.u_star, dual.c_dual, 1.0, &g, &d).unwrap();
        let dev = uniqueness_deviation(&back.u_star, &st.u).unwrap();
        println!("{n_r}: double conjugate deviation {dev:.3e}, 5h² = {:.3e}", 5.0 * g.h * g.h);
        assert!(dev <= 5.0 * g.h * g.h);

        let rt = gradient_roundtrip(&g, &st.u, &dual).unwrap();
        println!("{n_r}: roundtrip {:.3e} gaps {}", rt.max_error, rt.coverage_gaps);
        roundtrips.push(rt.max_error);

        let ids = paired_identities(&g, &st.u, &dual).unwrap();
        println!("{n_r}: identities {:?}", ids);
        assert!(ids.hessian_product <= 10.0 * g.h);
        assert!(ids.curvature_sum <= 10.0 * g.h);
    }
    let ratio = roundtrips[0] / roundtrips[1];
    println!("roundtrip ratio {ratio:.2}");
    assert!(ratio >= 3.0);
}

fn direct_dual_matches_conjugate(source: &DomainSpec, target: &DomainSpec) {
    let g = build_grid(source, 32, 64).unwrap();
    let gd = build_grid(target, 32, 64).unwrap();
    let primal = continuation_solve(source, target, &g, &SolveConfig::default()).unwrap().state;
    let conj = legendre_transform(&g, &primal.u, primal.c, 1.0, &gd, target).unwrap();
    let cfg = SolveConfig {
        operator: OperatorKind::LegendreDual,
        ..SolveConfig::default()
    };
    let direct = continuation_solve(target, source, &gd, &cfg).unwrap().state;
    let dev = uniqueness_deviation(&direct.u, &conj.u_star).unwrap();
    let tol = 5.0 * gd.h * gd.h;
    println!("dual c {:.8} vs {:.8}, deviation {dev:.3e} (5h² = {tol:.3e})", direct.c, conj.c_dual);
    assert!(dev <= tol);
    assert!((direct.c - conj.c_dual).abs() <= tol);
}

#[test]
fn direct_dual_solve_disc() {
    let d = disc_domain([0.0, 0.0], 1.0).unwrap();
    direct_dual_matches_conjugate(&d, &d);
}

#[test]
fn direct_dual_solve_ellipse_target() {
    let d = disc_domain([0.0, 0.0], 1.0).unwrap();
    direct_dual_matches_conjugate(&d, &ellipse_domain([1.3, 0.8]).unwrap());
}
