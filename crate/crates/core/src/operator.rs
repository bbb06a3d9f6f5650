//! Point-wise algebra of the special Lagrangian curvature operator.
//!
//! For a graph `x ↦ (x, u(x))` the principal curvatures are the eigenvalues of
//!
//! ```text
//! a = (1/v) · B · D²u · B,    v = √(1 + |Du|²),   B = (g⁻¹)^{1/2},
//! ```
//!
//! where `g⁻¹ = I − Du Duᵀ / v²` is the inverse induced metric. The operator is
//! `F[a] = Σ arctan κᵢ`, and the continuation family blends it with the Hessian
//! operator `Σ arctan λᵢ(D²u)`:
//!
//! ```text
//! Gᵗ(Du, D²u) = t · F[a(Du, D²u)] + (1 − t) · Σ arctan λᵢ(D²u).
//! ```
//!
//! The Legendre-dual branch replaces `a` by `a* = w · B⁻¹ · D²u* · B⁻¹` with
//! `w = √(1 + |y|²)` and uses `F*(μ) = nπ/2 − F(1/μ)`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_square_symmetric, sorted_eigen, spectral_apply, symmetrize};

/// Which curvature matrix the operator is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// `a = (1/v) B D²u B`, the graph of `u` over the source domain.
    #[default]
    Graph,
    /// `a* = w B⁻¹ D²u* B⁻¹`, the Legendre-dual equation on the target domain.
    LegendreDual,
}

/// Geometric quantities of the graph at one point, derived from `(Du, D²u)`.
#[derive(Debug, Clone)]
pub struct GraphGeometry {
    pub du: DVector<f64>,
    pub d2u: DMatrix<f64>,
    pub v: f64,
    pub g_inv: DMatrix<f64>,
    pub b_upper: DMatrix<f64>,
    pub b_lower: DMatrix<f64>,
    pub a: DMatrix<f64>,
    /// Principal curvatures, ascending.
    pub kappa: DVector<f64>,
    /// Orthonormal eigenvectors of `a`, columns ordered like `kappa`.
    pub frame: DMatrix<f64>,
}

impl GraphGeometry {
    pub fn dim(&self) -> usize {
        self.du.len()
    }

    /// `F[a] = Σ arctan κᵢ`.
    pub fn f_value(&self) -> f64 {
        principal_curvature_f(self.kappa.as_slice())
    }

    /// `∂F/∂a = (I + a²)⁻¹`, expressed through the eigenframe of `a`.
    pub fn f_matrix(&self) -> DMatrix<f64> {
        spectral_apply(&self.kappa, &self.frame, |k| 1.0 / (1.0 + k * k))
    }
}

fn check_point(du: &DVector<f64>, d2u: &DMatrix<f64>) -> Result<()> {
    if du.is_empty() {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    if d2u.nrows() != du.len() {
        return Err(Error::InvalidInput(format!(
            "gradient has length {} but Hessian is {}x{}",
            du.len(),
            d2u.nrows(),
            d2u.ncols()
        )));
    }
    check_square_symmetric(d2u, "Hessian")
}

/// Closed-form `b^{ij} = δᵢⱼ − pᵢpⱼ / (v(1+v))`, the positive square root of `g⁻¹`.
pub fn b_upper_closed_form(du: &DVector<f64>) -> DMatrix<f64> {
    let n = du.len();
    let v = (1.0 + du.norm_squared()).sqrt();
    DMatrix::identity(n, n) - du * du.transpose() / (v * (1.0 + v))
}

/// Closed-form `bᵢⱼ = δᵢⱼ + pᵢpⱼ / (1+v)`, the inverse of `b^{ij}`.
pub fn b_lower_closed_form(du: &DVector<f64>) -> DMatrix<f64> {
    let n = du.len();
    let v = (1.0 + du.norm_squared()).sqrt();
    DMatrix::identity(n, n) + du * du.transpose() / (1.0 + v)
}

/// Builds the graph geometry at a point from its gradient and Hessian.
pub fn graph_geometry(du: &DVector<f64>, d2u: &DMatrix<f64>) -> Result<GraphGeometry> {
    check_point(du, d2u)?;
    let n = du.len();
    let v = (1.0 + du.norm_squared()).sqrt();
    let g_inv = DMatrix::identity(n, n) - du * du.transpose() / (v * v);

    let (g_vals, g_vecs) = sorted_eigen(&g_inv);
    let b_upper = spectral_apply(&g_vals, &g_vecs, f64::sqrt);
    let b_lower = spectral_apply(&g_vals, &g_vecs, |x| 1.0 / x.sqrt());

    let d2u = symmetrize(d2u);
    let a = symmetrize(&(&b_upper * &d2u * &b_upper / v));
    let (kappa, frame) = sorted_eigen(&a);

    Ok(GraphGeometry {
        du: du.clone(),
        d2u,
        v,
        g_inv,
        b_upper,
        b_lower,
        a,
        kappa,
        frame,
    })
}

/// `F(κ) = Σ arctan κᵢ`.
pub fn principal_curvature_f(kappa: &[f64]) -> f64 {
    kappa.iter().map(|k| k.atan()).sum()
}

/// Gradient `1/(1+κᵢ²)` and Hessian diagonal `−2κᵢ/(1+κᵢ²)²` of `F`.
/// `F` is separable, so its Hessian is diagonal.
pub fn f_derivatives(kappa: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let grad = kappa.iter().map(|k| 1.0 / (1.0 + k * k)).collect();
    let hess = kappa
        .iter()
        .map(|k| {
            let q = 1.0 + k * k;
            -2.0 * k / (q * q)
        })
        .collect();
    (grad, hess)
}

/// Dual operator `F*(μ) = nπ/2 − F(1/μ₁, …, 1/μₙ)`; requires every `μᵢ > 0`.
pub fn dual_f(mu: &[f64]) -> Result<f64> {
    if let Some(bad) = mu.iter().find(|m| !(**m > 0.0)) {
        return Err(Error::Singular(format!("dual eigenvalue {bad} is not positive")));
    }
    let n = mu.len() as f64;
    Ok(n * FRAC_PI_2 - mu.iter().map(|m| (1.0 / m).atan()).sum::<f64>())
}

/// `(Σ arctan λᵢ(r), (I + r²)⁻¹)` for a symmetric matrix `r`.
fn hessian_branch(d2u: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let (lambda, q) = sorted_eigen(d2u);
    let value = lambda.iter().map(|l| l.atan()).sum();
    let deriv = spectral_apply(&lambda, &q, |l| 1.0 / (1.0 + l * l));
    (value, deriv)
}

/// Coefficients of the linearized operator at one point.
#[derive(Debug, Clone)]
pub struct Linearization {
    /// `∂Gᵗ/∂rᵢⱼ` (symmetric).
    pub g_matrix: DMatrix<f64>,
    /// `∂Gᵗ/∂pᵢ`.
    pub g_gradient: DVector<f64>,
    /// `Σ Gᵢᵢ` of the matrix above.
    pub trace_g: f64,
    /// `Σ Fᵢᵢ = Σ 1/(1+κᵢ²)` of the curvature operator.
    pub trace_f: f64,
}

/// `Gᵗ(Du, D²u)` for the graph operator.
pub fn homotopy_value(t: f64, du: &DVector<f64>, d2u: &DMatrix<f64>) -> Result<f64> {
    operator_value(OperatorKind::Graph, t, du, d2u)
}

/// Linearization of the graph homotopy operator; `D²u` must be positive definite.
pub fn linearization(t: f64, du: &DVector<f64>, d2u: &DMatrix<f64>) -> Result<Linearization> {
    operator_linearization(OperatorKind::Graph, t, du, d2u).map(|(_, lin)| lin)
}

/// Dual-branch geometry: `a* = w B⁻¹ D²u* B⁻¹` and its eigenvalues.
#[derive(Debug, Clone)]
pub struct DualGeometry {
    pub y: DVector<f64>,
    pub w: f64,
    pub b_lower: DMatrix<f64>,
    pub b_upper: DMatrix<f64>,
    pub a_star: DMatrix<f64>,
    /// Eigenvalues of `a*`, ascending.
    pub mu: DVector<f64>,
    pub frame: DMatrix<f64>,
}

pub fn dual_geometry(y: &DVector<f64>, d2u_star: &DMatrix<f64>) -> Result<DualGeometry> {
    check_point(y, d2u_star)?;
    let w = (1.0 + y.norm_squared()).sqrt();
    let b_lower = b_lower_closed_form(y);
    let b_upper = b_upper_closed_form(y);
    let a_star = symmetrize(&(&b_lower * symmetrize(d2u_star) * &b_lower * w));
    let (mu, frame) = sorted_eigen(&a_star);
    Ok(DualGeometry {
        y: y.clone(),
        w,
        b_lower,
        b_upper,
        a_star,
        mu,
        frame,
    })
}

/// Value of the homotopy operator for either branch. For the dual branch the
/// first argument is the point `y` itself, on which `a*` depends explicitly.
pub fn operator_value(
    kind: OperatorKind,
    t: f64,
    du: &DVector<f64>,
    d2u: &DMatrix<f64>,
) -> Result<f64> {
    check_point(du, d2u)?;
    let curvature = if t == 0.0 {
        0.0
    } else {
        match kind {
            OperatorKind::Graph => graph_geometry(du, d2u)?.f_value(),
            OperatorKind::LegendreDual => dual_f(dual_geometry(du, d2u)?.mu.as_slice())?,
        }
    };
    let (hess, _) = hessian_branch(d2u);
    Ok(t * curvature + (1.0 - t) * hess)
}

/// Value and linearization of the homotopy operator for either branch.
///
/// The curvature part uses `∂F/∂a = (I + a²)⁻¹`, which is exact even when
/// principal curvatures coincide; no eigenvalue divided differences appear at
/// first order.
pub fn operator_linearization(
    kind: OperatorKind,
    t: f64,
    du: &DVector<f64>,
    d2u: &DMatrix<f64>,
) -> Result<(f64, Linearization)> {
    check_point(du, d2u)?;
    let n = du.len();
    let (lambda, _) = sorted_eigen(d2u);
    if !(lambda[0] > 0.0) {
        return Err(Error::Domain(format!(
            "Hessian is not positive definite (min eigenvalue {:.3e})",
            lambda[0]
        )));
    }
    let (hess_value, hess_deriv) = hessian_branch(d2u);

    let (curv_value, curv_matrix, curv_gradient, trace_f) = match kind {
        OperatorKind::Graph => {
            let geo = graph_geometry(du, d2u)?;
            let fm = geo.f_matrix();
            let g_mat = symmetrize(&(&geo.b_upper * &fm * &geo.b_upper / geo.v));
            let grad = graph_gradient_coefficients(&geo, &fm);
            (geo.f_value(), g_mat, grad, fm.trace())
        }
        OperatorKind::LegendreDual => {
            let geo = dual_geometry(du, d2u)?;
            let value = dual_f(geo.mu.as_slice())?;
            let fm = spectral_apply(&geo.mu, &geo.frame, |m| 1.0 / (1.0 + m * m));
            let g_mat = symmetrize(&(&geo.b_lower * &fm * &geo.b_lower * geo.w));
            let grad = dual_gradient_coefficients(&geo, &fm);
            (value, g_mat, grad, fm.trace())
        }
    };

    let g_matrix = curv_matrix * t + hess_deriv * (1.0 - t);
    let g_gradient = curv_gradient * t;
    let trace_g = g_matrix.trace();
    debug_assert_eq!(g_gradient.len(), n);
    Ok((
        t * curv_value + (1.0 - t) * hess_value,
        Linearization {
            g_matrix,
            g_gradient,
            trace_g,
            trace_f,
        },
    ))
}

/// `Gᵢ = −(pᵢ/v²) tr(F a) − (2/v) (B F a p)ᵢ` with `F = ∂F/∂a`.
fn graph_gradient_coefficients(geo: &GraphGeometry, fm: &DMatrix<f64>) -> DVector<f64> {
    let fa = fm * &geo.a;
    let tr = fa.trace();
    let v = geo.v;
    let bfap = &geo.b_upper * &fa * &geo.du;
    -(&geo.du * (tr / (v * v))) - bfap * (2.0 / v)
}

/// `G*ₖ = (yₖ/w²) tr(F* a*) + 2 tr(F* a* B (∂ₖ B⁻¹))`.
fn dual_gradient_coefficients(geo: &DualGeometry, fm: &DMatrix<f64>) -> DVector<f64> {
    let n = geo.y.len();
    let y = &geo.y;
    let w = geo.w;
    let fa = fm * &geo.a_star;
    let tr = fa.trace();
    let fab = &fa * &geo.b_upper;
    let yyt = y * y.transpose();
    DVector::from_fn(n, |k, _| {
        let mut ek = DVector::zeros(n);
        ek[k] = 1.0;
        let d_blower = (&ek * y.transpose() + y * ek.transpose()) / (1.0 + w)
            - &yyt * (y[k] / (w * (1.0 + w) * (1.0 + w)));
        y[k] / (w * w) * tr + 2.0 * (&fab * d_blower).trace()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_entry;
    use std::f64::consts::PI;

    fn v2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }
    fn m2(a: f64, b: f64, c: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, b, b, c])
    }

    #[test]
    fn zero_gradient_gives_hessian() {
        let g = graph_geometry(&v2(0.0, 0.0), &m2(2.0, 0.0, 3.0)).unwrap();
        assert!(max_abs_entry(&(&g.a - m2(2.0, 0.0, 3.0))) < 1e-15);
        assert!((g.kappa[0] - 2.0).abs() < 1e-14 && (g.kappa[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn tilted_identity_hessian() {
        let g = graph_geometry(&v2(1.0, 0.0), &m2(1.0, 0.0, 1.0)).unwrap();
        assert!((g.kappa[0] - 0.353553).abs() < 1e-6);
        assert!((g.kappa[1] - 0.707107).abs() < 1e-6);
        assert!((g.a.determinant() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn square_root_routes_agree() {
        let du = v2(0.3, -1.7);
        let g = graph_geometry(&du, &m2(1.0, 0.2, 2.0)).unwrap();
        assert!(max_abs_entry(&(&g.b_upper - b_upper_closed_form(&du))) < 1e-13);
        assert!(max_abs_entry(&(&g.b_lower - b_lower_closed_form(&du))) < 1e-13);
    }

    #[test]
    fn rejects_asymmetric_hessian() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(
            graph_geometry(&v2(0.0, 0.0), &bad),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn f_values() {
        assert_eq!(principal_curvature_f(&[0.0, 0.0]), 0.0);
        assert!((principal_curvature_f(&[1.0, 1.0]) - PI / 2.0).abs() < 1e-15);
        assert!((principal_curvature_f(&[2.0, 3.0]) - 3.0 * PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn f_derivative_values() {
        let (g, h) = f_derivatives(&[0.0, 0.0]);
        assert_eq!(g, vec![1.0, 1.0]);
        assert_eq!(h, vec![0.0, 0.0]);
        assert_eq!(f_derivatives(&[1.0, 1.0]).0, vec![0.5, 0.5]);
        let (g, _) = f_derivatives(&[2.0, 3.0]);
        assert!((g[0] - 0.2).abs() < 1e-15 && (g[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn homotopy_blend() {
        let du = v2(1.0, 0.0);
        let id = m2(1.0, 0.0, 1.0);
        let g0 = homotopy_value(0.0, &du, &id).unwrap();
        let g1 = homotopy_value(1.0, &du, &id).unwrap();
        let gh = homotopy_value(0.5, &du, &id).unwrap();
        assert!((g0 - PI / 2.0).abs() < 1e-15);
        assert!((g1 - 0.955317).abs() < 1e-6);
        assert!((gh - 1.263057).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_has_no_gradient_coefficients() {
        let lin = linearization(1.0, &v2(0.0, 0.0), &m2(2.0, 0.4, 1.0)).unwrap();
        assert!(lin.g_gradient.norm() == 0.0);
    }

    #[test]
    fn linearization_traces_at_tilted_point() {
        let lin = linearization(1.0, &v2(1.0, 0.0), &m2(1.0, 0.0, 1.0)).unwrap();
        assert!((lin.trace_g - 0.785675).abs() < 1e-6);
        assert!((lin.trace_f - 1.555556).abs() < 1e-6);
        let s1 = 1.0 / (2.0 * 2f64.sqrt());
        let s2 = 1.0 / 2f64.sqrt();
        assert!(s1 * lin.trace_f <= lin.trace_g && lin.trace_g <= s2 * lin.trace_f);
    }

    #[test]
    fn linearization_rejects_nonconvex() {
        let r = linearization(1.0, &v2(0.1, 0.0), &m2(1.0, 0.0, -0.5));
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn dual_symmetry_at_fixed_point() {
        assert!((dual_f(&[1.0, 1.0]).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!(dual_f(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn dual_matrix_inverts_primal() {
        // a*(Du, (D²u)⁻¹) = a(Du, D²u)⁻¹
        let du = v2(0.4, -0.9);
        let h = m2(1.3, 0.25, 0.8);
        let g = graph_geometry(&du, &h).unwrap();
        let d = dual_geometry(&du, &h.clone().try_inverse().unwrap()).unwrap();
        let prod = &g.a * &d.a_star;
        assert!(max_abs_entry(&(prod - DMatrix::identity(2, 2))) < 1e-12);
    }
}
