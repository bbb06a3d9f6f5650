//! Damped Newton continuation for the discrete second boundary value problem
//!
//! ```text
//! Gᵗ(Du, D²u) = c  in Ω,    h̃(Du) = 0  on ∂Ω,
//! ```
//!
//! with the constant `c` as an extra unknown closed by a normalization row.

pub mod assemble;
pub mod continuation;
pub mod linsolve;
pub mod newton;

use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{sorted_eigen, spectral_apply};
use crate::operator::OperatorKind;

pub use assemble::{assemble_jacobian, assemble_residual, Jacobian, Problem};
pub use continuation::{continuation_solve, ContinuationFailure, ContinuationRun, TracePoint};
pub use newton::solve_at_t;

pub const DEFAULT_CONVEXITY_GUARD: f64 = 1e-8;

/// Row that fixes the additive constant in `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Area-weighted mean of `u` over interior nodes vanishes.
    #[default]
    MeanZero,
    /// `u` vanishes at the pole.
    PoleZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomotopyMode {
    /// Fixed steps `1/steps`; any failed stage aborts the run.
    #[default]
    Uniform,
    /// Halve on failure, double after two easy stages.
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub armijo: f64,
    pub min_step_length: f64,
    pub homotopy_steps: usize,
    pub mode: HomotopyMode,
    pub min_t_step: f64,
    pub convexity_guard: f64,
    pub normalization: Normalization,
    pub operator: OperatorKind,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            newton_tol: 1e-10,
            max_newton_iters: 30,
            armijo: 1e-4,
            min_step_length: 2f64.powi(-20),
            homotopy_steps: 10,
            mode: HomotopyMode::Uniform,
            min_t_step: 1.0 / 256.0,
            convexity_guard: DEFAULT_CONVEXITY_GUARD,
            normalization: Normalization::MeanZero,
            operator: OperatorKind::Graph,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.newton_tol) || !positive(self.armijo) || !positive(self.min_step_length) {
            return Err(Error::Config("Newton tolerances must be positive".into()));
        }
        if !positive(self.min_t_step) || !positive(self.convexity_guard) {
            return Err(Error::Config("continuation tolerances must be positive".into()));
        }
        if self.homotopy_steps < 1 {
            return Err(Error::Config("homotopy steps must be at least 1".into()));
        }
        if self.max_newton_iters < 1 {
            return Err(Error::Config("max Newton iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonRecord {
    pub iteration: usize,
    pub residual: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    LineSearchStall,
    MaxIterations,
    ConvexityLost,
    SingularJacobian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveState {
    pub u: Vec<f64>,
    pub c: f64,
    pub t: f64,
    pub residual_norm: f64,
    pub newton_history: Vec<NewtonRecord>,
    pub converged: bool,
    pub failure: Option<FailureKind>,
}

impl SolveState {
    /// Unsolved state holding an initial guess.
    pub fn initial(u: Vec<f64>, c: f64, t: f64) -> Self {
        SolveState {
            u,
            c,
            t,
            residual_norm: f64::INFINITY,
            newton_history: Vec::new(),
            converged: false,
            failure: None,
        }
    }

    pub fn newton_iters(&self) -> usize {
        self.newton_history.len()
    }
}

pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `S` and `m` of the quadratic `½ xᵀ S x + m·x` whose gradient maps the
/// centroid and covariance of `domain` onto those of `image`:
/// `S Σ S = Σ̃` with `S = Σ^{-1/2} (Σ^{1/2} Σ̃ Σ^{1/2})^{1/2} Σ^{-1/2}`.
pub fn moment_matched_quadratic(domain: &DomainSpec, image: &DomainSpec) -> ([[f64; 2]; 2], [f64; 2]) {
    let to_m = |s: &[[f64; 2]; 2]| nalgebra::DMatrix::from_row_slice(2, 2, &[s[0][0], s[0][1], s[1][0], s[1][1]]);
    let sig = to_m(&domain.covariance);
    let sig_t = to_m(&image.covariance);
    let (vals, vecs) = sorted_eigen(&sig);
    let half = spectral_apply(&vals, &vecs, f64::sqrt);
    let inv_half = spectral_apply(&vals, &vecs, |x| 1.0 / x.sqrt());
    let mid = &half * sig_t * &half;
    let (mv, mq) = sorted_eigen(&mid);
    let mid_root = spectral_apply(&mv, &mq, |x| x.max(0.0).sqrt());
    let s = &inv_half * mid_root * &inv_half;
    let s = [[s[(0, 0)], 0.5 * (s[(0, 1)] + s[(1, 0)])], [0.5 * (s[(0, 1)] + s[(1, 0)]), s[(1, 1)]]];
    let mc = domain.centroid;
    let m = [
        image.centroid[0] - (s[0][0] * mc[0] + s[0][1] * mc[1]),
        image.centroid[1] - (s[1][0] * mc[0] + s[1][1] * mc[1]),
    ];
    (s, m)
}

/// Samples `½ xᵀ S x + m·x` on the grid.
pub fn quadratic_field(grid: &Grid, s: [[f64; 2]; 2], m: [f64; 2]) -> Vec<f64> {
    grid.sample(|p| {
        0.5 * (s[0][0] * p[0] * p[0] + 2.0 * s[0][1] * p[0] * p[1] + s[1][1] * p[1] * p[1])
            + m[0] * p[0]
            + m[1] * p[1]
    })
}

/// Initial `c`: weighted mean of `Gᵗ` over interior nodes.
pub fn initial_constant(problem: &Problem<'_>, u: &[f64], t: f64) -> Result<f64> {
    let r = problem.residual(u, 0.0, t)?;
    let g = problem.grid;
    let mut acc = 0.0;
    let mut wsum = 0.0;
    for k in g.interior_nodes() {
        let w = g.interior_weights[k];
        acc += w * r[k];
        wsum += w;
    }
    Ok(acc / wsum)
}

/// `max |u_a − u_b − mean(u_a − u_b)|`.
pub fn uniqueness_deviation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "fields have different lengths ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let mean = a.iter().zip(b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64;
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y - mean).abs())
        .fold(0.0, f64::max))
}
