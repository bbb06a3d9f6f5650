use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slbvp_core::domain::{disc_domain, superellipse_domain};
use slbvp_core::linalg::sym2_eigenvalues;

fn diagonal_root(h: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[test]
fn superellipse_level_set_sits_between_disc_and_square() {
    let dom = superellipse_domain(1.0, 1.0, 4, 1.0).unwrap();
    let r = diagonal_root(|r| dom.h([r, r]));
    let radius = r * 2f64.sqrt();
    // Diagonal root of 1 − 2r⁴ − 2r² = 0 gives r² = (√3 − 1)/2.
    assert!((r * r - (3f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
    assert!(radius > 0.85 && radius < 1.0);
    assert!((dom.boundary_point(std::f64::consts::FRAC_PI_4).unwrap()[0] - r).abs() < 1e-12);
    assert!(dom.h([1.0, 0.0]) < 0.0 && dom.h([0.5, 0.5]) > 0.0);
}

#[test]
fn superellipse_area_matches_monte_carlo() {
    let dom = superellipse_domain(1.0, 1.0, 4, 0.25).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let samples = 10_000_000u64;
    let mut hits = 0u64;
    for _ in 0..samples {
        let p = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        if dom.h(p) > 0.0 {
            hits += 1;
        }
    }
    let mc = 4.0 * hits as f64 / samples as f64;
    assert!((mc - dom.area).abs() / dom.area < 1e-3, "mc {mc} quad {}", dom.area);
}

#[test]
fn concavity_on_random_interior_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for dom in [
        disc_domain([0.2, -0.1], 1.5).unwrap(),
        superellipse_domain(1.2, 0.8, 4, 0.25).unwrap(),
        superellipse_domain(1.0, 1.0, 8, 0.1).unwrap(),
    ] {
        let mut count = 0;
        while count < 10_000 {
            let p = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            if dom.h(p) <= 0.0 {
                continue;
            }
            count += 1;
            let h = dom.hess_h(p);
            let (_, top) = sym2_eigenvalues(h[0][0], h[0][1], h[1][1]);
            assert!(top <= -dom.theta + 1e-9);
        }
    }
}
