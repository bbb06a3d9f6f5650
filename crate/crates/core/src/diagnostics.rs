//! A-posteriori checks of the a-priori estimates on a converged solution.
//!
//! Every threshold is a function of the grid spacing `h` and fixed
//! tolerances only, so rerunning the diagnostics on the same state gives a
//! bit-identical report. Field scans run in parallel; reductions walk the
//! nodes in index order.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{theta0, DomainSpec};
use crate::error::{Error, Result};
use crate::grid::{Grid, NodeDerivatives};
use crate::linalg::sym2_eigenvalues;
use crate::operator::{graph_geometry, operator_linearization, OperatorKind};
use crate::solver::{uniqueness_deviation, Normalization, Problem, SolveState, DEFAULT_CONVEXITY_GUARD};

const DIM: usize = 2;
/// Slack for checking the curvature sign of the boundary pairing.
pub const SIGN_TOLERANCE: f64 = 1e-8;
/// Residual level above which a stored state no longer solves the problem.
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;
pub const DET_IDENTITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    #[serde(rename = "not applicable (t<1)")]
    NotApplicable,
    #[serde(rename = "not evaluated")]
    NotEvaluated,
    /// Informational quantity without a pass/fail threshold.
    #[serde(rename = "reported")]
    Reported,
}

impl Status {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn failed(self) -> bool {
        self == Status::Fail
    }
}

/// `1e-6 + 10h²`.
pub fn analytic_tolerance(h: f64) -> f64 {
    1e-6 + 10.0 * h * h
}

/// `σ₁ = (1+R̃²)^{−(n+2)/2}` from `det a · v^{n+2} = det D²u` with `v² ≤ 1+R̃²`.
pub fn sigma1(target_radius: f64) -> f64 {
    (1.0 + target_radius * target_radius).powf(-((DIM + 2) as f64) / 2.0)
}

pub fn sigma2() -> f64 {
    1.0
}

/// Upper bound for the smallest principal curvature.
pub fn m1(sigma2: f64, theta0: f64, n: usize) -> f64 {
    let nf = n as f64;
    (((sigma2 * theta0).powf(1.0 / nf).atan() + (nf - 1.0) * FRAC_PI_2) / nf).tan()
}

/// Lower bound for the largest principal curvature.
pub fn m2(sigma1: f64, theta0: f64, n: usize) -> f64 {
    let nf = n as f64;
    ((sigma1 * theta0).powf(1.0 / nf).atan() / nf).tan()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBounds {
    pub status: Status,
    pub theta0: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub m1: f64,
    pub m2: f64,
    pub tol: f64,
    /// `M₁ + tol − min κ` per node; negative entries violate the bound.
    pub upper_margin: Vec<f64>,
    /// `max κ − (M₂ − tol)` per node.
    pub lower_margin: Vec<f64>,
    pub upper_violations: usize,
    pub lower_violations: usize,
    /// `max |det a · v^{n+2} / det D²u − 1|`.
    pub det_identity_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingSign {
    pub status: Status,
    /// `min ⟨β, ν⟩` over the boundary ring, `β` the unit normal of the
    /// target at `Du`.
    pub min_pairing: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obliqueness {
    pub status: Status,
    pub obliqueness_min: f64,
    /// Node where the minimum is attained.
    pub argmin_node: usize,
    /// `max |⟨β,ν⟩ − √((βᵀD²uβ)(νᵀD²u⁻¹ν))|`.
    pub identity_error: f64,
    pub tol: f64,
    /// `⟨β,ν⟩` per boundary node, in boundary ring order.
    pub pairing: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCurvature {
    pub status: Status,
    pub sup_interior: f64,
    pub sup_boundary: f64,
    /// `sup_interior − sup_boundary`.
    pub gap: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianBounds {
    pub status: Status,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Uniqueness {
    pub status: Status,
    pub deviation: Option<f64>,
    pub c_difference: Option<f64>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureRatio {
    pub status: Status,
    /// Range over nodes of `tr(G_r (D²u)²) / Σ F'(κᵢ) κᵢ²`.
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingBound {
    pub status: Status,
    /// `max Σ F'(κᵢ) κᵢ` over nodes.
    pub max_sum: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualCheck {
    pub status: Status,
    pub interior: f64,
    pub boundary: f64,
    pub tol: f64,
    pub c: f64,
    pub t: f64,
    /// `|c| ≤ 2π`.
    pub c_bounded: bool,
}

/// Key names follow the published interface of the report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub h: f64,
    #[serde(rename = "lemma_3_1")]
    pub curvature_bounds: CurvatureBounds,
    #[serde(rename = "lemma_3_3")]
    pub pairing_sign: PairingSign,
    #[serde(rename = "lemma_3_5")]
    pub obliqueness: Obliqueness,
    #[serde(rename = "lemma_4_4")]
    pub mean_curvature: MeanCurvature,
    #[serde(rename = "lemma_4_12")]
    pub hessian_bounds: HessianBounds,
    #[serde(rename = "lemma_5_1")]
    pub uniqueness: Uniqueness,
    #[serde(rename = "eq_2_16_ratio")]
    pub curvature_ratio: CurvatureRatio,
    #[serde(rename = "eq_2_17_bound")]
    pub pairing_bound: PairingBound,
    pub residual: ResidualCheck,
    pub passed: bool,
}

impl DiagnosticsReport {
    fn statuses(&self) -> [(&'static str, Status); 9] {
        [
            ("lemma_3_1", self.curvature_bounds.status),
            ("lemma_3_3", self.pairing_sign.status),
            ("lemma_3_5", self.obliqueness.status),
            ("lemma_4_4", self.mean_curvature.status),
            ("lemma_4_12", self.hessian_bounds.status),
            ("lemma_5_1", self.uniqueness.status),
            ("eq_2_16_ratio", self.curvature_ratio.status),
            ("eq_2_17_bound", self.pairing_bound.status),
            ("residual", self.residual.status),
        ]
    }

    /// Keys of the sections that failed.
    pub fn failures(&self) -> Vec<&'static str> {
        self.statuses()
            .into_iter()
            .filter(|(_, s)| s.failed())
            .map(|(k, _)| k)
            .collect()
    }
}

fn hessian(d: &NodeDerivatives) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[d.d2u[0][0], d.d2u[0][1], d.d2u[1][0], d.d2u[1][1]])
}

/// Per-node quantities shared by several sections.
struct NodeScan {
    kappa: [f64; 2],
    lambda: [f64; 2],
    det_error: f64,
    ratio: f64,
    pairing_sum: f64,
}

fn scan_node(d: &NodeDerivatives) -> Result<NodeScan> {
    let du = DVector::from_column_slice(&d.du);
    let d2u = hessian(d);
    let (l0, l1) = sym2_eigenvalues(d.d2u[0][0], d.d2u[0][1], d.d2u[1][1]);
    if !(l0 > 0.0) {
        return Err(Error::Singular(format!(
            "discrete Hessian is not positive definite (min eigenvalue {l0:.3e})"
        )));
    }
    let geo = graph_geometry(&du, &d2u)?;
    let kappa = [geo.kappa[0], geo.kappa[1]];
    let det_a = geo.a.determinant();
    let det_h = d2u.determinant();
    let det_error = (det_a * geo.v.powi(DIM as i32 + 2) / det_h - 1.0).abs();

    let (_, lin) = operator_linearization(OperatorKind::Graph, 1.0, &du, &d2u)?;
    let numerator = (&lin.g_matrix * &d2u * &d2u).trace();
    let denominator: f64 = kappa.iter().map(|k| k * k / (1.0 + k * k)).sum();
    let pairing_sum = kappa.iter().map(|k| k / (1.0 + k * k)).sum();
    Ok(NodeScan {
        kappa,
        lambda: [l0, l1],
        det_error,
        ratio: numerator / denominator,
        pairing_sum,
    })
}

fn curvature_bounds(
    scans: &[NodeScan],
    state: &SolveState,
    source: &DomainSpec,
    target: &DomainSpec,
    tol: f64,
) -> CurvatureBounds {
    let th = theta0(source, target);
    let s1 = sigma1(target.bounding_radius);
    let s2 = sigma2();
    let (m1v, m2v) = (m1(s2, th, DIM), m2(s1, th, DIM));
    let upper_margin: Vec<f64> = scans.iter().map(|s| m1v + tol - s.kappa[0]).collect();
    let lower_margin: Vec<f64> = scans.iter().map(|s| s.kappa[1] - (m2v - tol)).collect();
    let upper_violations = upper_margin.iter().filter(|m| !(**m >= 0.0)).count();
    let lower_violations = lower_margin.iter().filter(|m| !(**m >= 0.0)).count();
    let det_identity_error = scans.iter().map(|s| s.det_error).fold(0.0, f64::max);
    let status = if state.t < 1.0 {
        Status::NotApplicable
    } else {
        Status::from_bool(
            upper_violations == 0 && lower_violations == 0 && det_identity_error <= DET_IDENTITY_TOLERANCE,
        )
    };
    CurvatureBounds {
        status,
        theta0: th,
        sigma1: s1,
        sigma2: s2,
        m1: m1v,
        m2: m2v,
        tol,
        upper_margin,
        lower_margin,
        upper_violations,
        lower_violations,
        det_identity_error,
    }
}

struct BoundaryScan {
    pairing: f64,
    identity_error: f64,
}

fn boundary_scan(grid: &Grid, ders: &[NodeDerivatives], target: &DomainSpec) -> Result<Vec<(usize, BoundaryScan)>> {
    grid.boundary_nodes
        .par_iter()
        .enumerate()
        .map(|(m, &k)| {
            let d = &ders[k];
            let g = target.grad_h(d.du);
            let gn = g[0].hypot(g[1]);
            if !(gn > 0.0) {
                return Err(Error::DegenerateBoundary(format!(
                    "target defining function has zero gradient at the image of node {k}"
                )));
            }
            let beta = [g[0] / gn, g[1] / gn];
            let nu = grid.normals[m];
            let pairing = beta[0] * nu[0] + beta[1] * nu[1];
            let hm = &d.d2u;
            let det = hm[0][0] * hm[1][1] - hm[0][1] * hm[1][0];
            if !(det.abs() > 0.0) || !det.is_finite() {
                return Err(Error::Singular(format!("discrete Hessian is singular at boundary node {k}")));
            }
            let inv = [[hm[1][1] / det, -hm[0][1] / det], [-hm[1][0] / det, hm[0][0] / det]];
            let quad = |m: &[[f64; 2]; 2], a: [f64; 2]| {
                a[0] * (m[0][0] * a[0] + m[0][1] * a[1]) + a[1] * (m[1][0] * a[0] + m[1][1] * a[1])
            };
            let product = quad(hm, beta) * quad(&inv, nu);
            let identity_error = (pairing - product.max(0.0).sqrt()).abs();
            Ok((k, BoundaryScan { pairing, identity_error }))
        })
        .collect()
}

/// Runs every check on `state`, which must be converged on `grid` for the
/// problem `source → target`. `other`, when given, is a second converged
/// solution of the same problem for the uniqueness comparison.
pub fn diagnose(
    grid: &Grid,
    state: &SolveState,
    source: &DomainSpec,
    target: &DomainSpec,
    other: Option<&SolveState>,
) -> Result<DiagnosticsReport> {
    if !state.converged {
        return Err(Error::InvalidInput("diagnostics need a converged state".into()));
    }
    grid.check_field(&state.u)?;
    let h = grid.h;
    let tol = analytic_tolerance(h);
    let ders = grid.all_derivatives(&state.u)?;
    let scans: Vec<NodeScan> = ders
        .par_iter()
        .enumerate()
        .map(|(k, d)| scan_node(d).map_err(|e| annotate(e, k)))
        .collect::<Result<_>>()?;

    let curvature = curvature_bounds(&scans, state, source, target, tol);

    let boundary = boundary_scan(grid, &ders, target)?;
    let mut min_pairing = f64::INFINITY;
    let mut argmin_node = 0;
    let mut identity_error = 0.0f64;
    for (k, b) in &boundary {
        if b.pairing < min_pairing {
            min_pairing = b.pairing;
            argmin_node = *k;
        }
        identity_error = identity_error.max(b.identity_error);
    }
    let identity_tol = 10.0 * h * h;
    let pairing_sign = PairingSign {
        status: Status::from_bool(min_pairing >= -SIGN_TOLERANCE),
        min_pairing,
        tol: SIGN_TOLERANCE,
    };
    let obliqueness = Obliqueness {
        status: Status::from_bool(min_pairing > 0.0 && identity_error <= identity_tol),
        obliqueness_min: min_pairing,
        argmin_node,
        identity_error,
        tol: identity_tol,
        pairing: boundary.iter().map(|(_, b)| b.pairing).collect(),
    };

    let mut sup_interior = f64::NEG_INFINITY;
    let mut sup_boundary = f64::NEG_INFINITY;
    for (k, s) in scans.iter().enumerate() {
        let hk = s.kappa[0] + s.kappa[1];
        if grid.is_boundary(k) {
            sup_boundary = sup_boundary.max(hk);
        } else {
            sup_interior = sup_interior.max(hk);
        }
    }
    let gap = sup_interior - sup_boundary;
    let mean_curvature = MeanCurvature {
        status: Status::from_bool(gap <= tol),
        sup_interior,
        sup_boundary,
        gap,
        tol,
    };

    let min_eigenvalue = scans.iter().map(|s| s.lambda[0]).fold(f64::INFINITY, f64::min);
    let max_eigenvalue = scans.iter().map(|s| s.lambda[1]).fold(f64::NEG_INFINITY, f64::max);
    let hessian_bounds = HessianBounds {
        status: Status::from_bool(min_eigenvalue > 0.0),
        min_eigenvalue,
        max_eigenvalue,
        ratio: max_eigenvalue / min_eigenvalue,
    };

    let uniqueness_tol = 1e-8;
    let uniqueness = match other {
        None => Uniqueness {
            status: Status::NotEvaluated,
            deviation: None,
            c_difference: None,
            tol: uniqueness_tol,
        },
        Some(b) => {
            let dev = uniqueness_check(state, b)?;
            let dc = (state.c - b.c).abs();
            Uniqueness {
                status: Status::from_bool(dev <= uniqueness_tol && dc <= uniqueness_tol),
                deviation: Some(dev),
                c_difference: Some(dc),
                tol: uniqueness_tol,
            }
        }
    };

    let curvature_ratio = CurvatureRatio {
        status: Status::Reported,
        min: scans.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min),
        max: scans.iter().map(|s| s.ratio).fold(f64::NEG_INFINITY, f64::max),
    };
    let max_sum = scans.iter().map(|s| s.pairing_sum).fold(f64::NEG_INFINITY, f64::max);
    let bound = DIM as f64 * FRAC_PI_2;
    let pairing_bound = PairingBound {
        status: Status::from_bool(max_sum <= bound),
        max_sum,
        bound,
    };

    let residual = residual_check(grid, state, target)?;

    let mut report = DiagnosticsReport {
        h,
        curvature_bounds: curvature,
        pairing_sign,
        obliqueness,
        mean_curvature,
        hessian_bounds,
        uniqueness,
        curvature_ratio,
        pairing_bound,
        residual,
        passed: false,
    };
    report.passed = report.failures().is_empty();
    Ok(report)
}

fn annotate(e: Error, node: usize) -> Error {
    match e {
        Error::Singular(m) => Error::Singular(format!("node {node}: {m}")),
        other => other,
    }
}

fn residual_check(grid: &Grid, state: &SolveState, target: &DomainSpec) -> Result<ResidualCheck> {
    let problem = Problem {
        grid,
        target,
        kind: OperatorKind::Graph,
        normalization: Normalization::MeanZero,
        convexity_guard: DEFAULT_CONVEXITY_GUARD,
    };
    let r = problem.residual(&state.u, state.c, state.t)?;
    let mut interior = 0.0f64;
    let mut boundary = 0.0f64;
    for (k, v) in r[..grid.len()].iter().enumerate() {
        if grid.is_boundary(k) {
            boundary = boundary.max(v.abs());
        } else {
            interior = interior.max(v.abs());
        }
    }
    let c_bounded = state.c.abs() <= 2.0 * PI;
    Ok(ResidualCheck {
        status: Status::from_bool(
            interior <= RESIDUAL_TOLERANCE && boundary <= RESIDUAL_TOLERANCE && c_bounded,
        ),
        interior,
        boundary,
        tol: RESIDUAL_TOLERANCE,
        c: state.c,
        t: state.t,
        c_bounded,
    })
}

/// `max |u_a − u_b − mean(u_a − u_b)|` for two converged states at the same `t`.
pub fn uniqueness_check(a: &SolveState, b: &SolveState) -> Result<f64> {
    if a.u.len() != b.u.len() {
        return Err(Error::InvalidInput(format!(
            "states live on different grids ({} vs {} nodes)",
            a.u.len(),
            b.u.len()
        )));
    }
    if a.t != b.t {
        return Err(Error::InvalidInput(format!(
            "states are at different homotopy parameters ({} vs {})",
            a.t, b.t
        )));
    }
    if !(a.converged && b.converged) {
        return Err(Error::InvalidInput("uniqueness check needs two converged states".into()));
    }
    uniqueness_deviation(&a.u, &b.u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_constants_for_unit_discs() {
        assert!((m1(1.0, 1.0, 2) - (3.0 * PI / 8.0).tan()).abs() < 1e-14);
        assert!((sigma1(1.0) - 0.25).abs() < 1e-15);
        let x: f64 = 0.5;
        let half_angle = ((1.0 + x * x).sqrt() - 1.0) / x;
        assert!((m2(0.25, 1.0, 2) - half_angle).abs() < 1e-14);
        assert!((m1(1.0, 1.0, 2) - 2.414214).abs() < 1e-6);
        assert!((m2(0.25, 1.0, 2) - 0.236068).abs() < 1e-6);
    }

    #[test]
    fn status_strings() {
        assert_eq!(serde_json::to_string(&Status::NotApplicable).unwrap(), "\"not applicable (t<1)\"");
        assert_eq!(serde_json::to_string(&Status::Pass).unwrap(), "\"pass\"");
    }
}
