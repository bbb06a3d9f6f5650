use slbvp_core::domain::{disc_domain, ellipse_domain, superellipse_domain, DomainSpec};
use slbvp_core::grid::{build_grid, eval_derivatives};

fn catalog() -> Vec<(&'static str, DomainSpec)> {
    vec![
        ("disc", disc_domain([0.0, 0.0], 1.0).unwrap()),
        ("ellipse", ellipse_domain([1.3, 0.8]).unwrap()),
        ("superellipse", superellipse_domain(1.0, 1.0, 4, 0.25).unwrap()),
    ]
}

#[test]
fn affine_fields_are_differentiated_exactly() {
    for (name, dom) in catalog() {
        for (n_r, n_phi) in [(8, 16), (16, 32), (32, 64), (64, 128)] {
            let g = build_grid(&dom, n_r, n_phi).unwrap();
            let u = g.sample(|p| 3.0 + 2.0 * p[0] - p[1]);
            for k in 0..g.len() {
                // Rounding of the sampled values alone perturbs the output by
                // up to ε·|u|·Σ|w|; below that floor exactness is meaningless.
                let st = &g.stencils[k];
                let wsum: f64 = st
                    .hess
                    .iter()
                    .map(|h| h[0].abs().max(h[1].abs()).max(h[2].abs()))
                    .sum();
                let gsum: f64 = st.grad.iter().map(|g| g[0].abs().max(g[1].abs())).sum();
                let floor = |w: f64| {
                    if n_r == 8 {
                        1e-12
                    } else {
                        1e-12f64.max(4.0 * f64::EPSILON * 5.0 * w)
                    }
                };
                let (tol_g, tol) = (floor(gsum), floor(wsum));
                let d = eval_derivatives(&g, &u, k).unwrap();
                assert!((d.du[0] - 2.0).abs() < tol_g, "{name} node {k}: {:?}", d.du);
                assert!((d.du[1] + 1.0).abs() < tol_g, "{name} node {k}: {:?}", d.du);
                for row in d.d2u {
                    for v in row {
                        assert!(v.abs() < tol, "{name} {n_r}x{n_phi} node {k}: {:?}", d.d2u);
                    }
                }
            }
        }
    }
}

#[test]
fn half_square_norm_has_identity_hessian() {
    for (name, dom) in catalog() {
        let g = build_grid(&dom, 32, 64).unwrap();
        let u = g.sample(|p| 0.5 * (p[0] * p[0] + p[1] * p[1]));
        for k in 0..g.len() {
            let d = eval_derivatives(&g, &u, k).unwrap();
            let p = g.positions[k];
            assert!((d.du[0] - p[0]).abs() < 1e-10 && (d.du[1] - p[1]).abs() < 1e-10);
            assert!((d.d2u[0][0] - 1.0).abs() < 1e-10, "{name} node {k}");
            assert!((d.d2u[1][1] - 1.0).abs() < 1e-10, "{name} node {k}");
            assert!(d.d2u[0][1].abs() < 1e-10, "{name} node {k}");
        }
    }
}

fn max_error(dom: &DomainSpec, n_r: usize, n_phi: usize) -> f64 {
    let g = build_grid(dom, n_r, n_phi).unwrap();
    let u = g.sample(|p| p[0].sin() * p[1].cosh());
    let mut worst = 0.0f64;
    for k in 0..g.len() {
        let d = eval_derivatives(&g, &u, k).unwrap();
        let [x, y] = g.positions[k];
        let exact = [
            x.cos() * y.cosh(),
            x.sin() * y.sinh(),
            -x.sin() * y.cosh(),
            x.cos() * y.sinh(),
            x.sin() * y.cosh(),
        ];
        let got = [d.du[0], d.du[1], d.d2u[0][0], d.d2u[0][1], d.d2u[1][1]];
        for (a, b) in exact.iter().zip(&got) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

#[test]
fn smooth_fields_converge_at_second_order() {
    for (name, dom) in catalog() {
        let e1 = max_error(&dom, 16, 32);
        let e2 = max_error(&dom, 32, 64);
        let e3 = max_error(&dom, 64, 128);
        println!("{name}: {e1:.3e} {e2:.3e} {e3:.3e} ratios {:.2} {:.2}", e1 / e2, e2 / e3);
        assert!(e1 / e2 >= 3.5, "{name}: ratio {}", e1 / e2);
        assert!(e2 / e3 >= 3.5, "{name}: ratio {}", e2 / e3);
    }
}

#[test]
fn boundary_ring_lies_on_the_level_set() {
    for (name, dom) in catalog() {
        let g = build_grid(&dom, 16, 32).unwrap();
        for (&b, n) in g.boundary_nodes.iter().zip(&g.normals) {
            let p = g.positions[b];
            assert!(dom.h(p).abs() <= 1e-10, "{name}: h = {}", dom.h(p));
            let m = dom.inward_normal(p).unwrap();
            assert!((m[0] - n[0]).abs() < 1e-10 && (m[1] - n[1]).abs() < 1e-10);
            // Normal from the tangent of the parametrized boundary.
            let (i, j) = g.index[b];
            assert_eq!(i, g.n_r);
            let phi = j as f64 * g.dphi();
            let r = dom.ray_root(phi).unwrap();
            let t = [
                r.d1 * phi.cos() - r.gamma * phi.sin(),
                r.d1 * phi.sin() + r.gamma * phi.cos(),
            ];
            let len = t[0].hypot(t[1]);
            let from_tangent = [-t[1] / len, t[0] / len];
            assert!((from_tangent[0] - n[0]).abs() < 1e-8 && (from_tangent[1] - n[1]).abs() < 1e-8);
        }
    }
}

#[test]
fn axis_rays_of_the_ellipse_chart() {
    let dom = ellipse_domain([1.3, 0.8]).unwrap();
    let g = build_grid(&dom, 8, 16).unwrap();
    assert!((g.rays[0].gamma - 1.3).abs() < 1e-14);
    assert!((g.rays[4].gamma - 0.8).abs() < 1e-14);
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn diagonal_ray_matches_bisection() {
    let dom = superellipse_domain(1.0, 1.0, 4, 0.25).unwrap();
    let g = build_grid(&dom, 8, 16).unwrap();
    // Diagonal point (r, r) on the boundary has |p| = r√2.
    let r = bisect(|r| 1.0 - 2.0 * r.powi(4) - 0.25 * 2.0 * r * r, 0.0, 1.0);
    assert!((g.rays[2].gamma - r * 2f64.sqrt()).abs() < 1e-12);
}
