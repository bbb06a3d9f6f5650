//! Discrete Legendre transform `u*(y) = sup_x (x·y − u(x))` and checks of
//! the dual equation on the target domain.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::domain::{DomainSpec, Point};
use crate::error::{Error, Result};
use crate::grid::{Grid, NodeDerivatives};
use crate::linalg::sym2_eigenvalues;
use crate::operator::{operator_value, OperatorKind};
use crate::solver::DEFAULT_CONVEXITY_GUARD;

#[derive(Debug, Clone)]
pub struct DualField {
    pub grid: Grid,
    pub domain: DomainSpec,
    pub u_star: Vec<f64>,
    /// `nπ/2 − c`.
    pub c_dual: f64,
    pub t: f64,
    /// Maximizer of `x·y − u(x)` for each dual node, after the polish step.
    pub preimages: Vec<Point>,
}

fn convex_derivatives(grid: &Grid, u: &[f64]) -> Result<Vec<NodeDerivatives>> {
    let ders = grid.all_derivatives(u)?;
    for (k, d) in ders.iter().enumerate() {
        let (lo, _) = sym2_eigenvalues(d.d2u[0][0], d.d2u[0][1], d.d2u[1][1]);
        if !(lo >= DEFAULT_CONVEXITY_GUARD) {
            return Err(Error::InvalidInput(format!(
                "field is not convex at node {k} (min Hessian eigenvalue {lo:.3e})"
            )));
        }
    }
    Ok(ders)
}

fn inverse2(m: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

/// Conjugate of `u` (given on `grid`) sampled at the nodes of `grid_dual`.
///
/// The grid maximum is refined by one step of the local quadratic model
/// `u(x) ≈ u_k + Du_k·(x−x_k) + ½(x−x_k)ᵀ D²u_k (x−x_k)` around the maximizing
/// node; ties go to the lowest node index.
pub fn legendre_transform(
    grid: &Grid,
    u: &[f64],
    c: f64,
    t: f64,
    grid_dual: &Grid,
    dual_domain: &DomainSpec,
) -> Result<DualField> {
    let ders = convex_derivatives(grid, u)?;
    let results: Vec<(f64, Point)> = grid_dual
        .positions
        .par_iter()
        .map(|&y| {
            let mut best = 0usize;
            let mut best_val = f64::NEG_INFINITY;
            for (k, x) in grid.positions.iter().enumerate() {
                let val = x[0] * y[0] + x[1] * y[1] - u[k];
                if val > best_val {
                    best_val = val;
                    best = k;
                }
            }
            let d = &ders[best];
            let hinv = inverse2(&d.d2u);
            let e = [y[0] - d.du[0], y[1] - d.du[1]];
            let step = [
                hinv[0][0] * e[0] + hinv[0][1] * e[1],
                hinv[1][0] * e[0] + hinv[1][1] * e[1],
            ];
            let x = grid.positions[best];
            let value = best_val + 0.5 * (e[0] * step[0] + e[1] * step[1]);
            (value, [x[0] + step[0], x[1] + step[1]])
        })
        .collect();
    Ok(DualField {
        grid: grid_dual.clone(),
        domain: dual_domain.clone(),
        u_star: results.iter().map(|r| r.0).collect(),
        c_dual: 2.0 * FRAC_PI_2 - c,
        t,
        preimages: results.iter().map(|r| r.1).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualResidual {
    /// Per dual node; zero on the boundary ring.
    pub values: Vec<f64>,
    pub max_norm: f64,
}

/// `G*ᵗ(y, D²u*) − (nπ/2 − c)` at interior dual nodes.
pub fn dual_residual(dual: &DualField) -> Result<DualResidual> {
    let g = &dual.grid;
    let ders = g.all_derivatives(&dual.u_star)?;
    let values: Vec<f64> = (0..g.len())
        .into_par_iter()
        .map(|k| {
            if g.is_boundary(k) {
                return Ok(0.0);
            }
            let d = &ders[k];
            let (lo, _) = sym2_eigenvalues(d.d2u[0][0], d.d2u[0][1], d.d2u[1][1]);
            if !(lo > 0.0) {
                return Err(Error::Singular(format!(
                    "dual Hessian is not positive definite at node {k} (min eigenvalue {lo:.3e})"
                )));
            }
            let y = DVector::from_column_slice(&g.positions[k]);
            let h = DMatrix::from_row_slice(2, 2, &[d.d2u[0][0], d.d2u[0][1], d.d2u[1][0], d.d2u[1][1]]);
            Ok(operator_value(OperatorKind::LegendreDual, dual.t, &y, &h)? - dual.c_dual)
        })
        .collect::<Result<_>>()?;
    let max_norm = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(DualResidual { values, max_norm })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Roundtrip {
    /// `max |Du*(Du(x)) − x|` over covered interior nodes.
    pub max_error: f64,
    /// Interior nodes whose image falls outside the dual grid.
    pub coverage_gaps: usize,
    pub samples: usize,
}

/// `Du*` and `D²u*` at `y`: each corner of the enclosing dual cell predicts
/// the gradient by a first-order Taylor step, and the predictions (and the
/// corner Hessians) are blended with bilinear weights. Exact for quadratics.
fn interpolated_derivatives(
    dual: &DualField,
    dual_ders: &[NodeDerivatives],
    y: Point,
) -> Result<Option<([f64; 2], [[f64; 2]; 2])>> {
    let Some(cell) = dual.grid.cell_weights(&dual.domain, y)? else {
        return Ok(None);
    };
    let mut g = [0.0; 2];
    let mut h = [[0.0; 2]; 2];
    for (k, w) in cell {
        let d = &dual_ders[k];
        let q = dual.grid.positions[k];
        let e = [y[0] - q[0], y[1] - q[1]];
        for i in 0..2 {
            g[i] += w * (d.du[i] + d.d2u[i][0] * e[0] + d.d2u[i][1] * e[1]);
            for j in 0..2 {
                h[i][j] += w * d.d2u[i][j];
            }
        }
    }
    Ok(Some((g, h)))
}

/// `max |Du*(Du(x)) − x|` with `Du*` interpolated on the dual grid.
pub fn gradient_roundtrip(grid: &Grid, u: &[f64], dual: &DualField) -> Result<Roundtrip> {
    let ders = grid.all_derivatives(u)?;
    let dual_ders = dual.grid.all_derivatives(&dual.u_star)?;
    let mut report = Roundtrip {
        max_error: 0.0,
        coverage_gaps: 0,
        samples: 0,
    };
    for k in grid.interior_nodes() {
        let y = ders[k].du;
        let x = grid.positions[k];
        match interpolated_derivatives(dual, &dual_ders, y)? {
            Some((g, _)) => {
                report.samples += 1;
                report.max_error = report.max_error.max((g[0] - x[0]).hypot(g[1] - x[1]));
            }
            None => report.coverage_gaps += 1,
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedIdentities {
    /// `max ‖D²u*(Du(x)) · D²u(x) − I‖_max`.
    pub hessian_product: f64,
    /// `max |F*(μ) + F(κ) − nπ/2|` with `μ` from `a*` at `y = Du(x)`.
    pub curvature_sum: f64,
    pub samples: usize,
}

/// Checks of the pointwise duality relations at interior primal nodes.
pub fn paired_identities(grid: &Grid, u: &[f64], dual: &DualField) -> Result<PairedIdentities> {
    let ders = grid.all_derivatives(u)?;
    let dual_ders = dual.grid.all_derivatives(&dual.u_star)?;
    let mut out = PairedIdentities {
        hessian_product: 0.0,
        curvature_sum: 0.0,
        samples: 0,
    };
    for k in grid.interior_nodes() {
        let d = &ders[k];
        let Some((_, hs)) = interpolated_derivatives(dual, &dual_ders, d.du)? else {
            continue;
        };
        out.samples += 1;
        for i in 0..2 {
            for j in 0..2 {
                let p: f64 = (0..2).map(|m| hs[i][m] * d.d2u[m][j]).sum();
                let id = if i == j { 1.0 } else { 0.0 };
                out.hessian_product = out.hessian_product.max((p - id).abs());
            }
        }
        let du = DVector::from_column_slice(&d.du);
        let h = DMatrix::from_row_slice(2, 2, &[d.d2u[0][0], d.d2u[0][1], d.d2u[1][0], d.d2u[1][1]]);
        let hstar = DMatrix::from_row_slice(2, 2, &[hs[0][0], hs[0][1], hs[1][0], hs[1][1]]);
        let f = operator_value(OperatorKind::Graph, 1.0, &du, &h)?;
        let fstar = operator_value(OperatorKind::LegendreDual, 1.0, &du, &hstar)?;
        out.curvature_sum = out.curvature_sum.max((f + fstar - 2.0 * FRAC_PI_2).abs());
    }
    Ok(out)
}
