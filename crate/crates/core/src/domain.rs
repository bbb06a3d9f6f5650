//! Uniformly convex planar domains given by smooth concave defining functions.
//!
//! A domain is `{p : h(p) > 0}` with `D²h ≤ −θ I`. Every catalog domain is
//! star-shaped about its center, so its boundary is the graph of the ray-root
//! function `γ(φ)` solving `h(center + γ(φ)(cos φ, sin φ)) = 0`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_on;

pub type Point = [f64; 2];
pub type Sym2 = [[f64; 2]; 2];

fn default_center() -> Point {
    [0.0, 0.0]
}

fn default_ellipse_scale() -> f64 {
    0.5
}

/// Catalog of supported domain shapes, in the form used by config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DomainShape {
    /// `h(p) = (R² − |p − c|²) / (2R)`.
    Disc {
        #[serde(default = "default_center")]
        center: Point,
        radius: f64,
    },
    /// `h(p) = s (1 − Σ (pᵢ − cᵢ)² / aᵢ²)`.
    Ellipse {
        #[serde(default = "default_center")]
        center: Point,
        semi_axes: [f64; 2],
        #[serde(default = "default_ellipse_scale")]
        scale: f64,
    },
    /// `h(p) = [1 − (x/a)^m − (y/b)^m − ε((x/a)² + (y/b)²)] / (1 + ε)`.
    Superellipse {
        #[serde(default = "default_center")]
        center: Point,
        a: f64,
        b: f64,
        m: u32,
        eps: f64,
    },
}

impl DomainShape {
    fn symmetry_center(&self) -> Point {
        match self {
            DomainShape::Disc { center, .. }
            | DomainShape::Ellipse { center, .. }
            | DomainShape::Superellipse { center, .. } => *center,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |x: f64| x.is_finite();
        match self {
            DomainShape::Disc { center, radius } => {
                if !(*radius > 0.0) || !finite(*radius) {
                    return Err(Error::Config(format!("disc radius must be positive, got {radius}")));
                }
                if !center.iter().all(|c| finite(*c)) {
                    return Err(Error::Config("disc center must be finite".into()));
                }
            }
            DomainShape::Ellipse {
                semi_axes, scale, ..
            } => {
                if !semi_axes.iter().all(|a| *a > 0.0 && finite(*a)) {
                    return Err(Error::Config(format!(
                        "ellipse semi-axes must be positive, got {semi_axes:?}"
                    )));
                }
                if !(*scale > 0.0) || !finite(*scale) {
                    return Err(Error::Config(format!("ellipse scale must be positive, got {scale}")));
                }
            }
            DomainShape::Superellipse { a, b, m, eps, .. } => {
                if !(*a > 0.0 && *b > 0.0) {
                    return Err(Error::Config(format!(
                        "superellipse semi-axes must be positive, got ({a}, {b})"
                    )));
                }
                if *m < 4 || m % 2 != 0 {
                    return Err(Error::Config(format!(
                        "superellipse exponent must be even and at least 4, got {m}"
                    )));
                }
                if !(*eps > 0.0 && *eps <= 1.0) {
                    return Err(Error::Config(format!("superellipse eps must lie in (0, 1], got {eps}")));
                }
            }
        }
        Ok(())
    }

    fn value(&self, p: Point) -> f64 {
        match *self {
            DomainShape::Disc { center, radius } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                (radius * radius - dx * dx - dy * dy) / (2.0 * radius)
            }
            DomainShape::Ellipse {
                center,
                semi_axes,
                scale,
            } => {
                let x = (p[0] - center[0]) / semi_axes[0];
                let y = (p[1] - center[1]) / semi_axes[1];
                scale * (1.0 - x * x - y * y)
            }
            DomainShape::Superellipse {
                center,
                a,
                b,
                m,
                eps,
            } => {
                let x = (p[0] - center[0]) / a;
                let y = (p[1] - center[1]) / b;
                let m = m as i32;
                (1.0 - x.powi(m) - y.powi(m) - eps * (x * x + y * y)) / (1.0 + eps)
            }
        }
    }

    fn gradient(&self, p: Point) -> Point {
        match *self {
            DomainShape::Disc { center, radius } => {
                [-(p[0] - center[0]) / radius, -(p[1] - center[1]) / radius]
            }
            DomainShape::Ellipse {
                center,
                semi_axes,
                scale,
            } => [
                -2.0 * scale * (p[0] - center[0]) / (semi_axes[0] * semi_axes[0]),
                -2.0 * scale * (p[1] - center[1]) / (semi_axes[1] * semi_axes[1]),
            ],
            DomainShape::Superellipse {
                center,
                a,
                b,
                m,
                eps,
            } => {
                let x = (p[0] - center[0]) / a;
                let y = (p[1] - center[1]) / b;
                let mf = m as f64;
                let mi = m as i32;
                [
                    (-mf * x.powi(mi - 1) - 2.0 * eps * x) / (a * (1.0 + eps)),
                    (-mf * y.powi(mi - 1) - 2.0 * eps * y) / (b * (1.0 + eps)),
                ]
            }
        }
    }

    fn hessian(&self, p: Point) -> Sym2 {
        match *self {
            DomainShape::Disc { radius, .. } => [[-1.0 / radius, 0.0], [0.0, -1.0 / radius]],
            DomainShape::Ellipse {
                semi_axes, scale, ..
            } => [
                [-2.0 * scale / (semi_axes[0] * semi_axes[0]), 0.0],
                [0.0, -2.0 * scale / (semi_axes[1] * semi_axes[1])],
            ],
            DomainShape::Superellipse {
                center,
                a,
                b,
                m,
                eps,
            } => {
                let x = (p[0] - center[0]) / a;
                let y = (p[1] - center[1]) / b;
                let mf = m as f64;
                let mi = m as i32;
                [
                    [
                        (-mf * (mf - 1.0) * x.powi(mi - 2) - 2.0 * eps) / (a * a * (1.0 + eps)),
                        0.0,
                    ],
                    [
                        0.0,
                        (-mf * (mf - 1.0) * y.powi(mi - 2) - 2.0 * eps) / (b * b * (1.0 + eps)),
                    ],
                ]
            }
        }
    }

    fn concavity_constant(&self) -> f64 {
        match *self {
            DomainShape::Disc { radius, .. } => 1.0 / radius,
            DomainShape::Ellipse {
                semi_axes, scale, ..
            } => 2.0 * scale / semi_axes[0].max(semi_axes[1]).powi(2),
            DomainShape::Superellipse { a, b, eps, .. } => {
                2.0 * eps / ((1.0 + eps) * a.max(b).powi(2))
            }
        }
    }
}

/// Ray root `γ(φ)` and its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayRoot {
    pub gamma: f64,
    pub d1: f64,
    pub d2: f64,
}

/// A uniformly convex domain with its defining function and cached integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub shape: DomainShape,
    /// Uniform concavity constant: `D²h ≤ −θ I`.
    pub theta: f64,
    pub area: f64,
    /// `max |p|` over the closure.
    pub bounding_radius: f64,
    /// Interior point used for the star-shaped parametrization.
    pub center: Point,
    pub centroid: Point,
    /// Second central moments divided by the area.
    pub covariance: Sym2,
}

/// Panels and points per panel for the angular quadrature.
const ANGULAR_PANELS: usize = 4;
const QUAD_POINTS: usize = 64;

impl DomainSpec {
    pub fn new(shape: DomainShape) -> Result<Self> {
        let center = shape.symmetry_center();
        Self::with_center(shape, center)
    }

    /// Builds a domain parametrized about an arbitrary interior point.
    pub fn with_center(shape: DomainShape, center: Point) -> Result<Self> {
        shape.validate()?;
        if !(shape.value(center) > 0.0) {
            return Err(Error::Geometry(format!(
                "parametrization center {center:?} is not inside the domain"
            )));
        }
        let mut spec = DomainSpec {
            theta: shape.concavity_constant(),
            shape,
            area: 0.0,
            bounding_radius: 0.0,
            center,
            centroid: [0.0; 2],
            covariance: [[0.0; 2]; 2],
        };
        spec.compute_integrals()?;
        spec.bounding_radius = spec.compute_bounding_radius()?;
        Ok(spec)
    }

    pub fn h(&self, p: Point) -> f64 {
        self.shape.value(p)
    }

    pub fn grad_h(&self, p: Point) -> Point {
        self.shape.gradient(p)
    }

    pub fn hess_h(&self, p: Point) -> Sym2 {
        self.shape.hessian(p)
    }

    pub fn contains(&self, p: Point) -> bool {
        self.h(p) > 0.0
    }

    /// Unique root of `h(center + γ ω(φ)) = 0` with `γ > 0`, with `γ'` and `γ''`
    /// from implicit differentiation of the root relation.
    pub fn ray_root(&self, phi: f64) -> Result<RayRoot> {
        let c = self.center;
        let w = [phi.cos(), phi.sin()];
        let at = |g: f64| self.h([c[0] + g * w[0], c[1] + g * w[1]]);
        let slope = |g: f64| {
            let d = self.grad_h([c[0] + g * w[0], c[1] + g * w[1]]);
            d[0] * w[0] + d[1] * w[1]
        };

        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut expansions = 0;
        while at(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            expansions += 1;
            if expansions > 200 {
                return Err(Error::Geometry(format!("no boundary crossing along ray φ = {phi}")));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if at(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-10 * hi {
                break;
            }
        }
        // Newton polish inside the bracket.
        let mut g = 0.5 * (lo + hi);
        for _ in 0..20 {
            let d = slope(g);
            if d == 0.0 {
                break;
            }
            let next = g - at(g) / d;
            if !(next > lo - 1e-8 * hi && next < hi + 1e-8 * hi) {
                break;
            }
            let done = (next - g).abs() <= 1e-16 * g.abs();
            g = next;
            if done {
                break;
            }
        }

        let x = [c[0] + g * w[0], c[1] + g * w[1]];
        let dh = self.grad_h(x);
        let d2h = self.hess_h(x);
        let wp = [-w[1], w[0]];
        let dh_w = dh[0] * w[0] + dh[1] * w[1];
        let dh_wp = dh[0] * wp[0] + dh[1] * wp[1];
        if dh_w.abs() < 1e-14 {
            return Err(Error::Geometry(format!("ray φ = {phi} is tangent to the boundary")));
        }
        let d1 = -g * dh_wp / dh_w;
        let tangent = [d1 * w[0] + g * wp[0], d1 * w[1] + g * wp[1]];
        let quad = quad_form(&d2h, tangent, tangent);
        let d2 = -(quad + 2.0 * d1 * dh_wp - g * dh_w) / dh_w;
        Ok(RayRoot { gamma: g, d1, d2 })
    }

    pub fn boundary_point(&self, phi: f64) -> Result<Point> {
        let g = self.ray_root(phi)?.gamma;
        Ok([self.center[0] + g * phi.cos(), self.center[1] + g * phi.sin()])
    }

    /// `Dh(p)/|Dh(p)|` at a boundary point; points into `{h > 0}`.
    pub fn inward_normal(&self, p: Point) -> Result<Point> {
        let hv = self.h(p);
        if hv.abs() > 1e-8 {
            return Err(Error::InvalidInput(format!(
                "point {p:?} is not on the boundary (h = {hv:.3e})"
            )));
        }
        let d = self.grad_h(p);
        let norm = d[0].hypot(d[1]);
        if norm < 1e-10 {
            return Err(Error::DegenerateBoundary(format!(
                "|Dh| = {norm:.3e} at {p:?}"
            )));
        }
        Ok([d[0] / norm, d[1] / norm])
    }

    /// Tensor Gauss–Legendre rule over the star-shaped parametrization:
    /// `∫_Ω f = ∫₀^{2π} ∫₀¹ f(c + sγω) s γ² ds dφ`.
    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> Result<f64> {
        let (s_nodes, s_weights) = gauss_legendre_on(QUAD_POINTS, 0.0, 1.0);
        let mut total = 0.0;
        for panel in 0..ANGULAR_PANELS {
            let lo = TAU * panel as f64 / ANGULAR_PANELS as f64;
            let hi = TAU * (panel + 1) as f64 / ANGULAR_PANELS as f64;
            let (phis, wphis) = gauss_legendre_on(QUAD_POINTS, lo, hi);
            for (phi, wphi) in phis.iter().zip(&wphis) {
                let g = self.ray_root(*phi)?.gamma;
                let (cs, sn) = (phi.cos(), phi.sin());
                for (s, ws) in s_nodes.iter().zip(&s_weights) {
                    let p = [self.center[0] + s * g * cs, self.center[1] + s * g * sn];
                    total += wphi * ws * s * g * g * f(p);
                }
            }
        }
        Ok(total)
    }

    fn compute_integrals(&mut self) -> Result<()> {
        let area = self.integrate(|_| 1.0)?;
        let mx = self.integrate(|p| p[0])? / area;
        let my = self.integrate(|p| p[1])? / area;
        let cxx = self.integrate(|p| (p[0] - mx) * (p[0] - mx))? / area;
        let cxy = self.integrate(|p| (p[0] - mx) * (p[1] - my))? / area;
        let cyy = self.integrate(|p| (p[1] - my) * (p[1] - my))? / area;
        self.area = area;
        self.centroid = [mx, my];
        self.covariance = [[cxx, cxy], [cxy, cyy]];
        Ok(())
    }

    fn compute_bounding_radius(&self) -> Result<f64> {
        let samples = 2048;
        let dist = |phi: f64| -> Result<f64> {
            let p = self.boundary_point(phi)?;
            Ok(p[0].hypot(p[1]))
        };
        let mut best = (0.0, f64::NEG_INFINITY);
        for k in 0..samples {
            let phi = TAU * k as f64 / samples as f64;
            let d = dist(phi)?;
            if d > best.1 {
                best = (phi, d);
            }
        }
        // Golden-section refinement around the best sample.
        let step = TAU / samples as f64;
        let (mut a, mut b) = (best.0 - step, best.0 + step);
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let x1 = b - ratio * (b - a);
            let x2 = a + ratio * (b - a);
            if dist(x1)? > dist(x2)? {
                b = x2;
            } else {
                a = x1;
            }
        }
        Ok(best.1.max(dist(0.5 * (a + b))?))
    }
}

/// Disc of the given center and radius.
pub fn disc_domain(center: Point, radius: f64) -> Result<DomainSpec> {
    DomainSpec::new(DomainShape::Disc { center, radius })
}

/// Origin-centered ellipse with `h = s(1 − Σ pᵢ²/aᵢ²)`, `s = 1/2`.
pub fn ellipse_domain(semi_axes: [f64; 2]) -> Result<DomainSpec> {
    ellipse_domain_scaled(semi_axes, default_ellipse_scale())
}

pub fn ellipse_domain_scaled(semi_axes: [f64; 2], scale: f64) -> Result<DomainSpec> {
    DomainSpec::new(DomainShape::Ellipse {
        center: default_center(),
        semi_axes,
        scale,
    })
}

/// Origin-centered superellipse; `m` even and at least 4, `eps ∈ (0, 1]`.
pub fn superellipse_domain(a: f64, b: f64, m: u32, eps: f64) -> Result<DomainSpec> {
    DomainSpec::new(DomainShape::Superellipse {
        center: default_center(),
        a,
        b,
        m,
        eps,
    })
}

/// Volume ratio `|Ω̃| / |Ω|`.
pub fn theta0(source: &DomainSpec, target: &DomainSpec) -> f64 {
    target.area / source.area
}

pub(crate) fn quad_form(m: &Sym2, a: Point, b: Point) -> f64 {
    a[0] * (m[0][0] * b[0] + m[0][1] * b[1]) + a[1] * (m[1][0] * b[0] + m[1][1] * b[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym2_eigenvalues;
    use std::f64::consts::PI;

    #[test]
    fn unit_disc_basics() {
        let d = disc_domain([0.0, 0.0], 1.0).unwrap();
        assert_eq!(d.theta, 1.0);
        assert!((d.area - PI).abs() < 1e-12);
        for k in 0..16 {
            let phi = TAU * k as f64 / 16.0;
            let p = [phi.cos(), phi.sin()];
            let g = d.grad_h(p);
            assert!((g[0].hypot(g[1]) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn disc_radius_two() {
        let d = disc_domain([0.0, 0.0], 2.0).unwrap();
        assert_eq!(d.h([0.0, 0.0]), 1.0);
        assert_eq!(d.hess_h([0.3, 0.1]), [[-0.5, 0.0], [0.0, -0.5]]);
    }

    #[test]
    fn disc_rejects_nonpositive_radius() {
        assert!(matches!(disc_domain([0.0, 0.0], 0.0), Err(Error::Config(_))));
        assert!(matches!(disc_domain([0.0, 0.0], -1.0), Err(Error::Config(_))));
    }

    #[test]
    fn unit_ellipse_is_unit_disc() {
        let e = ellipse_domain([1.0, 1.0]).unwrap();
        let d = disc_domain([0.0, 0.0], 1.0).unwrap();
        for p in [[0.1, 0.2], [0.9, -0.3], [1.5, 0.0]] {
            assert_eq!(e.h(p), d.h(p));
        }
    }

    #[test]
    fn ellipse_area_and_theta() {
        let e = ellipse_domain([1.3, 0.8]).unwrap();
        assert!((e.area - 1.04 * PI).abs() < 1e-12);
        assert!((e.theta - 1.0 / 1.69).abs() < 1e-12);
        assert!((e.theta - 0.591716).abs() < 1e-6);
    }

    #[test]
    fn superellipse_center_values() {
        let s = superellipse_domain(1.0, 1.0, 4, 1.0).unwrap();
        assert_eq!(s.h([0.0, 0.0]), 0.5);
        assert_eq!(s.grad_h([0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn superellipse_rejects_odd_exponent() {
        assert!(matches!(superellipse_domain(1.0, 1.0, 5, 0.5), Err(Error::Config(_))));
        assert!(matches!(superellipse_domain(1.0, 1.0, 2, 0.5), Err(Error::Config(_))));
    }

    #[test]
    fn theta0_ratios() {
        let d1 = disc_domain([0.0, 0.0], 1.0).unwrap();
        let d2 = disc_domain([0.0, 0.0], 2.0).unwrap();
        let e = ellipse_domain([1.3, 0.8]).unwrap();
        assert!((theta0(&d1, &d1) - 1.0).abs() < 1e-14);
        assert!((theta0(&d1, &d2) - 4.0).abs() < 1e-12);
        assert!((theta0(&d1, &e) - 1.04).abs() < 1e-12);
    }

    #[test]
    fn inward_normals() {
        let d = disc_domain([0.0, 0.0], 1.0).unwrap();
        assert_eq!(d.inward_normal([1.0, 0.0]).unwrap(), [-1.0, 0.0]);
        let n = d.inward_normal([0.0, -1.0]).unwrap();
        assert!(n[0].abs() < 1e-15 && (n[1] - 1.0).abs() < 1e-15);
        let e = ellipse_domain([2.0, 1.0]).unwrap();
        assert_eq!(e.inward_normal([2.0, 0.0]).unwrap(), [-1.0, 0.0]);
        assert!(d.inward_normal([0.5, 0.0]).is_err());
    }

    #[test]
    fn axis_rays_of_ellipse() {
        let e = ellipse_domain([1.3, 0.8]).unwrap();
        assert!((e.ray_root(0.0).unwrap().gamma - 1.3).abs() < 1e-14);
        assert!((e.ray_root(PI / 2.0).unwrap().gamma - 0.8).abs() < 1e-14);
    }

    #[test]
    fn ray_root_derivatives_match_differences() {
        for dom in [
            ellipse_domain([1.3, 0.8]).unwrap(),
            superellipse_domain(1.2, 0.9, 4, 0.25).unwrap(),
        ] {
            for phi in [0.3, 1.1, 2.5, 4.0] {
                let r = dom.ray_root(phi).unwrap();
                let eps = 1e-4;
                let gp = dom.ray_root(phi + eps).unwrap().gamma;
                let gm = dom.ray_root(phi - eps).unwrap().gamma;
                let d1 = (gp - gm) / (2.0 * eps);
                let d2 = (gp - 2.0 * r.gamma + gm) / (eps * eps);
                assert!((d1 - r.d1).abs() < 1e-7, "{d1} vs {}", r.d1);
                assert!((d2 - r.d2).abs() < 1e-5, "{d2} vs {}", r.d2);
            }
        }
    }

    #[test]
    fn boundary_points_are_roots() {
        let s = superellipse_domain(1.0, 1.0, 4, 0.25).unwrap();
        for k in 0..32 {
            let p = s.boundary_point(TAU * k as f64 / 32.0).unwrap();
            assert!(s.h(p).abs() < 1e-12);
        }
    }

    #[test]
    fn concavity_holds_on_samples() {
        let s = superellipse_domain(1.0, 0.7, 6, 0.3).unwrap();
        for i in 0..40 {
            for j in 0..40 {
                let p = [-1.0 + 2.0 * i as f64 / 39.0, -0.7 + 1.4 * j as f64 / 39.0];
                let h = s.hess_h(p);
                let (_, hi) = sym2_eigenvalues(h[0][0], h[0][1], h[1][1]);
                assert!(hi <= -s.theta + 1e-9);
            }
        }
    }

    #[test]
    fn moments_of_ellipse() {
        let e = ellipse_domain([1.3, 0.8]).unwrap();
        assert!(e.centroid[0].abs() < 1e-13 && e.centroid[1].abs() < 1e-13);
        assert!((e.covariance[0][0] - 1.69 / 4.0).abs() < 1e-12);
        assert!((e.covariance[1][1] - 0.64 / 4.0).abs() < 1e-12);
        assert!(e.covariance[0][1].abs() < 1e-13);
    }

    #[test]
    fn bounding_radius_of_ellipse() {
        let e = ellipse_domain([1.3, 0.8]).unwrap();
        assert!((e.bounding_radius - 1.3).abs() < 1e-10);
    }

    #[test]
    fn off_center_parametrization() {
        let d = DomainSpec::with_center(
            DomainShape::Disc {
                center: [0.0, 0.0],
                radius: 1.0,
            },
            [0.3, -0.2],
        )
        .unwrap();
        assert!((d.area - PI).abs() < 1e-10);
        assert!(DomainSpec::with_center(
            DomainShape::Disc {
                center: [0.0, 0.0],
                radius: 1.0
            },
            [2.0, 0.0]
        )
        .is_err());
    }
}
