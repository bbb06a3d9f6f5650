//! Residual and Jacobian of the discretized boundary value problem.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::grid::{Grid, NodeDerivatives, POLE};
use crate::linalg::sym2_eigenvalues;
use crate::operator::{operator_linearization, operator_value, OperatorKind};

use super::Normalization;

/// The discrete problem: unknown `u` on `grid`, gradient image `target`.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub grid: &'a Grid,
    pub target: &'a DomainSpec,
    pub kind: OperatorKind,
    pub normalization: Normalization,
    pub convexity_guard: f64,
}

/// Sparse matrix in triplet form, rows and columns indexed by unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub size: usize,
    pub triplets: Vec<(usize, usize, f64)>,
}

impl Jacobian {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.size, self.size);
        for &(i, j, v) in &self.triplets {
            m[(i, j)] += v;
        }
        m
    }
}

fn hessian(d: &NodeDerivatives) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[d.d2u[0][0], d.d2u[0][1], d.d2u[1][0], d.d2u[1][1]])
}

impl Problem<'_> {
    /// First operator argument: `Du` for the graph operator, the position
    /// `y` for the dual operator (which depends on `y` explicitly rather
    /// than on `Du*`).
    fn first_argument(&self, k: usize, d: &NodeDerivatives) -> DVector<f64> {
        match self.kind {
            OperatorKind::Graph => DVector::from_column_slice(&d.du),
            OperatorKind::LegendreDual => DVector::from_column_slice(&self.grid.positions[k]),
        }
    }

    /// Unknown count: node values plus `c`.
    pub fn size(&self) -> usize {
        self.grid.len() + 1
    }

    fn derivatives(&self, u: &[f64]) -> Result<Vec<NodeDerivatives>> {
        let ders = self.grid.all_derivatives(u)?;
        // Lowest offending node index wins, independent of thread schedule.
        let bad = ders
            .par_iter()
            .enumerate()
            .filter_map(|(k, d)| {
                let (lo, _) = sym2_eigenvalues(d.d2u[0][0], d.d2u[0][1], d.d2u[1][1]);
                (!(lo >= self.convexity_guard)).then_some((k, lo))
            })
            .min_by_key(|(k, _)| *k);
        if let Some((node, min_eig)) = bad {
            return Err(Error::ConvexityLost { node, min_eig });
        }
        Ok(ders)
    }

    fn normalization_value(&self, u: &[f64]) -> f64 {
        match self.normalization {
            Normalization::MeanZero => self
                .grid
                .interior_weights
                .iter()
                .zip(u)
                .map(|(w, x)| w * x)
                .sum(),
            Normalization::PoleZero => u[POLE],
        }
    }

    /// Residuals: `Gᵗ − c` at interior nodes, `h̃(Du)` at boundary nodes, and
    /// the normalization functional last.
    pub fn residual(&self, u: &[f64], c: f64, t: f64) -> Result<Vec<f64>> {
        let ders = self.derivatives(u)?;
        let mut out: Vec<f64> = ders
            .par_iter()
            .enumerate()
            .map(|(k, d)| {
                if self.grid.is_boundary(k) {
                    Ok(self.target.h(d.du))
                } else {
                    let arg = self.first_argument(k, d);
                    Ok(operator_value(self.kind, t, &arg, &hessian(d))? - c)
                }
            })
            .collect::<Result<_>>()?;
        out.push(self.normalization_value(u));
        Ok(out)
    }

    pub fn jacobian(&self, u: &[f64], _c: f64, t: f64) -> Result<Jacobian> {
        let ders = self.derivatives(u)?;
        let n = self.grid.len();
        let rows: Vec<Vec<(usize, usize, f64)>> = ders
            .par_iter()
            .enumerate()
            .map(|(k, d)| {
                let st = &self.grid.stencils[k];
                let mut row = Vec::with_capacity(st.nodes.len() + 1);
                if self.grid.is_boundary(k) {
                    let beta = self.target.grad_h(d.du);
                    for (m, &node) in st.nodes.iter().enumerate() {
                        let g = st.grad[m];
                        row.push((k, node, beta[0] * g[0] + beta[1] * g[1]));
                    }
                } else {
                    let arg = self.first_argument(k, d);
                    let (_, lin) = operator_linearization(self.kind, t, &arg, &hessian(d))?;
                    let gm = &lin.g_matrix;
                    let gg = match self.kind {
                        OperatorKind::Graph => [lin.g_gradient[0], lin.g_gradient[1]],
                        OperatorKind::LegendreDual => [0.0, 0.0],
                    };
                    for (m, &node) in st.nodes.iter().enumerate() {
                        let h = st.hess[m];
                        let g = st.grad[m];
                        let v = gm[(0, 0)] * h[0]
                            + 2.0 * gm[(0, 1)] * h[1]
                            + gm[(1, 1)] * h[2]
                            + gg[0] * g[0]
                            + gg[1] * g[1];
                        row.push((k, node, v));
                    }
                    row.push((k, n, -1.0));
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;
        let mut triplets: Vec<(usize, usize, f64)> = rows.into_iter().flatten().collect();
        match self.normalization {
            Normalization::MeanZero => {
                for (k, &w) in self.grid.interior_weights.iter().enumerate() {
                    if w != 0.0 {
                        triplets.push((n, k, w));
                    }
                }
            }
            Normalization::PoleZero => triplets.push((n, POLE, 1.0)),
        }
        Ok(Jacobian {
            size: n + 1,
            triplets,
        })
    }
}

/// Residual vector of the discrete problem; see [`Problem::residual`].
pub fn assemble_residual(
    grid: &Grid,
    target: &DomainSpec,
    u: &[f64],
    c: f64,
    t: f64,
) -> Result<Vec<f64>> {
    Problem {
        grid,
        target,
        kind: OperatorKind::Graph,
        normalization: Normalization::MeanZero,
        convexity_guard: super::DEFAULT_CONVEXITY_GUARD,
    }
    .residual(u, c, t)
}

/// Jacobian of [`assemble_residual`] with respect to `(u, c)`.
pub fn assemble_jacobian(
    grid: &Grid,
    target: &DomainSpec,
    u: &[f64],
    c: f64,
    t: f64,
) -> Result<Jacobian> {
    Problem {
        grid,
        target,
        kind: OperatorKind::Graph,
        normalization: Normalization::MeanZero,
        convexity_guard: super::DEFAULT_CONVEXITY_GUARD,
    }
    .jacobian(u, c, t)
}
