//! Boundary-fitted polar grids on star-shaped domains.
//!
//! Nodes sit at `center + s·γ(φ)·ω(φ)` for `s = i/n_r`, `φ = 2πj/n_phi`, with
//! one shared pole node at `s = 0`. Derivatives are recovered by linear
//! stencils: chart finite differences pushed to Cartesian components by the
//! chain rule, then given a minimum-norm moment correction so that every
//! stencil differentiates quadratics exactly.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{DomainSpec, Point, RayRoot};
use crate::error::{Error, Result};

/// Linear derivative stencil of one node. Entry 0 is the node itself and its
/// weights are minus the sum of the others.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStencil {
    pub nodes: Vec<usize>,
    /// `(∂x, ∂y)` weights.
    pub grad: Vec<[f64; 2]>,
    /// `(∂xx, ∂xy, ∂yy)` weights.
    pub hess: Vec<[f64; 3]>,
}

/// Value, gradient and Hessian recovered at a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeDerivatives {
    pub value: f64,
    pub du: [f64; 2],
    pub d2u: [[f64; 2]; 2],
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub n_r: usize,
    pub n_phi: usize,
    pub center: Point,
    /// Ray roots at the angular grid lines.
    pub rays: Vec<RayRoot>,
    pub positions: Vec<Point>,
    /// `(i_r, i_phi)` per node; the pole is `(0, 0)`.
    pub index: Vec<(usize, usize)>,
    pub stencils: Vec<NodeStencil>,
    pub boundary_nodes: Vec<usize>,
    /// Inward unit normals, parallel to `boundary_nodes`.
    pub normals: Vec<Point>,
    /// Normalized area weights; zero on the boundary ring.
    pub interior_weights: Vec<f64>,
    /// Largest distance between grid neighbours.
    pub h: f64,
}

pub const POLE: usize = 0;

impl Grid {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        node_index(self.n_phi, i, j)
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.index[node].0 == self.n_r
    }

    pub fn ds(&self) -> f64 {
        1.0 / self.n_r as f64
    }

    pub fn dphi(&self) -> f64 {
        TAU / self.n_phi as f64
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&k| !self.is_boundary(k))
    }

    /// Applies the stencil of `node` to `u`.
    pub fn derivatives_at(&self, u: &[f64], node: usize) -> NodeDerivatives {
        let st = &self.stencils[node];
        let mut du = [0.0; 2];
        let mut h = [0.0; 3];
        let base = u[node];
        for (k, &n) in st.nodes.iter().enumerate().skip(1) {
            let val = u[n] - base;
            du[0] += st.grad[k][0] * val;
            du[1] += st.grad[k][1] * val;
            h[0] += st.hess[k][0] * val;
            h[1] += st.hess[k][1] * val;
            h[2] += st.hess[k][2] * val;
        }
        NodeDerivatives {
            value: u[node],
            du,
            d2u: [[h[0], h[1]], [h[1], h[2]]],
        }
    }

    pub fn all_derivatives(&self, u: &[f64]) -> Result<Vec<NodeDerivatives>> {
        self.check_field(u)?;
        Ok((0..self.len())
            .into_par_iter()
            .map(|k| self.derivatives_at(u, k))
            .collect())
    }

    pub fn check_field(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.len() {
            return Err(Error::InvalidInput(format!(
                "field has {} values, grid has {} nodes",
                u.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Samples a function at every node.
    pub fn sample(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.positions.iter().map(|&p| f(p)).collect()
    }

    /// Chart coordinates `(s, φ)` of a point, with `φ ∈ [0, 2π)`.
    pub fn chart_coordinates(&self, domain: &DomainSpec, p: Point) -> Result<(f64, f64)> {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let r = dx.hypot(dy);
        if r == 0.0 {
            return Ok((0.0, 0.0));
        }
        let phi = dy.atan2(dx).rem_euclid(TAU);
        let g = domain.ray_root(phi)?.gamma;
        Ok((r / g, phi))
    }

    /// Corner nodes and bilinear weights, in chart coordinates, of the cell
    /// containing `p`. Returns `None` outside the closure of the chart.
    pub fn cell_weights(&self, domain: &DomainSpec, p: Point) -> Result<Option<[(usize, f64); 4]>> {
        let (s, phi) = self.chart_coordinates(domain, p)?;
        if s > 1.0 + 1e-12 {
            return Ok(None);
        }
        let fs = (s / self.ds()).min(self.n_r as f64);
        let i0 = (fs.floor() as usize).min(self.n_r - 1);
        let a = fs - i0 as f64;
        let fp = phi / self.dphi();
        let j0 = (fp.floor() as usize) % self.n_phi;
        let b = fp - fp.floor();
        Ok(Some([
            (self.node(i0, j0), (1.0 - a) * (1.0 - b)),
            (self.node(i0, j0 + 1), (1.0 - a) * b),
            (self.node(i0 + 1, j0), a * (1.0 - b)),
            (self.node(i0 + 1, j0 + 1), a * b),
        ]))
    }

    /// Bilinear interpolation in chart coordinates. Returns `None` outside
    /// the closure of the chart.
    pub fn interpolate(
        &self,
        domain: &DomainSpec,
        values: &[f64],
        p: Point,
    ) -> Result<Option<f64>> {
        Ok(self
            .cell_weights(domain, p)?
            .map(|cell| cell.iter().map(|&(k, w)| w * values[k]).sum()))
    }
}

pub fn node_index(n_phi: usize, i: usize, j: usize) -> usize {
    if i == 0 {
        POLE
    } else {
        1 + (i - 1) * n_phi + (j % n_phi)
    }
}

/// Chart-space finite-difference weights: `(u_s, u_φ, u_ss, u_sφ, u_φφ)`.
type ChartWeights = BTreeMap<usize, [f64; 5]>;

fn add(w: &mut ChartWeights, node: usize, slot: usize, value: f64) {
    w.entry(node).or_insert([0.0; 5])[slot] += value;
}

fn chart_stencil(n_r: usize, n_phi: usize, i: usize, j: usize) -> ChartWeights {
    let ds = 1.0 / n_r as f64;
    let dphi = TAU / n_phi as f64;
    let nd = |ii: usize, jj: isize| node_index(n_phi, ii, jj.rem_euclid(n_phi as isize) as usize);
    let j = j as isize;
    let mut w = ChartWeights::new();

    // Angular differences on a given ring.
    let phi_diffs = |w: &mut ChartWeights, ring: usize, scale: f64, slot_first: usize| {
        add(w, nd(ring, j + 1), slot_first, scale / (2.0 * dphi));
        add(w, nd(ring, j - 1), slot_first, -scale / (2.0 * dphi));
    };

    add(&mut w, nd(i, j + 1), 4, 1.0 / (dphi * dphi));
    add(&mut w, nd(i, j), 4, -2.0 / (dphi * dphi));
    add(&mut w, nd(i, j - 1), 4, 1.0 / (dphi * dphi));
    phi_diffs(&mut w, i, 1.0, 1);

    if i < n_r {
        add(&mut w, nd(i + 1, j), 0, 1.0 / (2.0 * ds));
        add(&mut w, nd(i - 1, j), 0, -1.0 / (2.0 * ds));
        add(&mut w, nd(i + 1, j), 2, 1.0 / (ds * ds));
        add(&mut w, nd(i, j), 2, -2.0 / (ds * ds));
        add(&mut w, nd(i - 1, j), 2, 1.0 / (ds * ds));
        phi_diffs(&mut w, i + 1, 1.0 / (2.0 * ds), 3);
        phi_diffs(&mut w, i - 1, -1.0 / (2.0 * ds), 3);
    } else {
        add(&mut w, nd(i, j), 0, 3.0 / (2.0 * ds));
        add(&mut w, nd(i - 1, j), 0, -4.0 / (2.0 * ds));
        add(&mut w, nd(i - 2, j), 0, 1.0 / (2.0 * ds));
        add(&mut w, nd(i, j), 2, 2.0 / (ds * ds));
        add(&mut w, nd(i - 1, j), 2, -5.0 / (ds * ds));
        add(&mut w, nd(i - 2, j), 2, 4.0 / (ds * ds));
        add(&mut w, nd(i - 3, j), 2, -1.0 / (ds * ds));
        phi_diffs(&mut w, i, 3.0 / (2.0 * ds), 3);
        phi_diffs(&mut w, i - 1, -4.0 / (2.0 * ds), 3);
        phi_diffs(&mut w, i - 2, 1.0 / (2.0 * ds), 3);
    }
    w
}

/// Cartesian stencil from chart weights via the chain rule at `(s, φ)`.
fn cartesian_stencil(w: &ChartWeights, s: f64, phi: f64, ray: &RayRoot) -> NodeStencil {
    let (c, sn) = (phi.cos(), phi.sin());
    let om = [c, sn];
    let op = [-sn, c];
    let RayRoot { gamma: g, d1, d2 } = *ray;
    let x_s = [g * om[0], g * om[1]];
    let x_sp = [d1 * om[0] + g * op[0], d1 * om[1] + g * op[1]];
    let x_p = [s * x_sp[0], s * x_sp[1]];
    let x_pp = [
        s * (d2 * om[0] + 2.0 * d1 * op[0] - g * om[0]),
        s * (d2 * om[1] + 2.0 * d1 * op[1] - g * om[1]),
    ];
    // J = [x_s | x_φ]; K = J^{-T}.
    let det = x_s[0] * x_p[1] - x_p[0] * x_s[1];
    let jinv = [[x_p[1] / det, -x_p[0] / det], [-x_s[1] / det, x_s[0] / det]];
    let k = [[jinv[0][0], jinv[1][0]], [jinv[0][1], jinv[1][1]]];

    let mut st = NodeStencil {
        nodes: Vec::with_capacity(w.len()),
        grad: Vec::with_capacity(w.len()),
        hess: Vec::with_capacity(w.len()),
    };
    for (&node, cw) in w {
        let grad = [
            k[0][0] * cw[0] + k[0][1] * cw[1],
            k[1][0] * cw[0] + k[1][1] * cw[1],
        ];
        let dot = |v: [f64; 2]| grad[0] * v[0] + grad[1] * v[1];
        let m = [
            [cw[2], cw[3] - dot(x_sp)],
            [cw[3] - dot(x_sp), cw[4] - dot(x_pp)],
        ];
        let mut hm = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let mut acc = 0.0;
                for p in 0..2 {
                    for q in 0..2 {
                        acc += k[a][p] * m[p][q] * k[b][q];
                    }
                }
                hm[a][b] = acc;
            }
        }
        st.nodes.push(node);
        st.grad.push(grad);
        st.hess.push([hm[0][0], 0.5 * (hm[0][1] + hm[1][0]), hm[1][1]]);
    }
    st
}

/// Monomial degree up to which every stencil is exact.
const EXACT_DEGREE: usize = 3;

fn monomial_exponents() -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    for d in 0..=EXACT_DEGREE as i32 {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

/// Adds the minimum-norm weight correction that makes every functional of
/// the stencil exact on polynomials of degree `EXACT_DEGREE`, then pins the
/// node's own weight so each functional annihilates constants exactly.
fn moment_correct(st: &mut NodeStencil, positions: &[Point], x0: Point) -> Result<()> {
    let ell = st
        .nodes
        .iter()
        .map(|&n| (positions[n][0] - x0[0]).hypot(positions[n][1] - x0[1]))
        .fold(0.0f64, f64::max);
    let exps = monomial_exponents();
    let m = exps.len();
    let nn = st.nodes.len();
    let v = DMatrix::from_fn(nn, m, |r, c| {
        let p = positions[st.nodes[r]];
        let x = (p[0] - x0[0]) / ell;
        let y = (p[1] - x0[1]) / ell;
        x.powi(exps[c].0) * y.powi(exps[c].1)
    });
    let qr = v.clone().qr();
    let q = qr.q();
    let r = qr.r();
    if (0..m).any(|k| r[(k, k)].abs() < 1e-10) {
        return Err(Error::Geometry(format!(
            "stencil at {x0:?} is not unisolvent for cubics"
        )));
    }
    let rt = r.transpose();
    // Exact derivative of each scaled monomial at x0, per functional.
    let exact = |f: usize, c: usize| -> f64 {
        let (a, b) = exps[c];
        let e = 1.0 / ell;
        match (f, a, b) {
            (0, 1, 0) | (1, 0, 1) => e,
            (2, 2, 0) | (4, 0, 2) => 2.0 * e * e,
            (3, 1, 1) => e * e,
            _ => 0.0,
        }
    };
    for f in 0..5 {
        let weight = |st: &NodeStencil, k: usize| match f {
            0 | 1 => st.grad[k][f],
            _ => st.hess[k][f - 2],
        };
        let mut resid = DVector::zeros(m);
        for c in 0..m {
            let moment: f64 = (0..nn).map(|k| v[(k, c)] * weight(st, k)).sum();
            resid[c] = exact(f, c) - moment;
        }
        let z = rt
            .solve_lower_triangular(&resid)
            .ok_or_else(|| Error::Geometry("singular moment system".into()))?;
        let delta = &q * z;
        for k in 0..nn {
            match f {
                0 | 1 => st.grad[k][f] += delta[k],
                _ => st.hess[k][f - 2] += delta[k],
            }
        }
    }
    // The node itself is entry 0.
    for f in 0..5 {
        let mut others = 0.0;
        for k in 1..nn {
            others += match f {
                0 | 1 => st.grad[k][f],
                _ => st.hess[k][f - 2],
            };
        }
        match f {
            0 | 1 => st.grad[0][f] = -others,
            _ => st.hess[0][f - 2] = -others,
        }
    }
    Ok(())
}

/// Angular half-width of the stencil footprint on ring `i`, chosen so the
/// footprint is at least as wide as it is deep.
fn angular_half_width(n_phi: usize, i: usize) -> usize {
    let dphi = TAU / n_phi as f64;
    let need = (1.0 / (i as f64 * dphi)).ceil() as usize;
    need.clamp(2, n_phi / 2)
}

/// Rings near the pole have circumferential spacing far below the radial
/// spacing; there the chart differences carry huge weights, so those nodes
/// use a plain minimum-norm fit over a wide patch instead.
fn uses_patch(n_phi: usize, i: usize) -> bool {
    i == 0 || (i as f64) * TAU / (n_phi as f64) < 0.5
}

/// Extra nodes widening the finite-difference footprint so that the cubic
/// moment system is unisolvent.
fn widen(w: &mut ChartWeights, n_r: usize, n_phi: usize, i: usize, j: usize) {
    let rings: Vec<usize> = if i == 0 {
        vec![0, 1, 2]
    } else if i < n_r {
        vec![i - 1, i, i + 1]
    } else {
        vec![i - 2, i - 1, i]
    };
    let half = if i == 0 {
        n_phi / 2
    } else {
        angular_half_width(n_phi, i) as isize as usize
    };
    let span: Vec<isize> = if 2 * half >= n_phi {
        (0..n_phi as isize).collect()
    } else {
        (-(half as isize)..=half as isize).map(|d| j as isize + d).collect()
    };
    for &ring in &rings {
        for &jj in &span {
            let node = node_index(n_phi, ring, jj.rem_euclid(n_phi as isize) as usize);
            w.entry(node).or_insert([0.0; 5]);
        }
    }
}

/// Reorders so that `node` comes first.
fn self_first(st: &mut NodeStencil, node: usize) {
    if let Some(pos) = st.nodes.iter().position(|&n| n == node) {
        st.nodes.swap(0, pos);
        st.grad.swap(0, pos);
        st.hess.swap(0, pos);
    }
}

/// Builds the grid and its derivative stencils.
pub fn build_grid(domain: &DomainSpec, n_r: usize, n_phi: usize) -> Result<Grid> {
    if n_r < 8 {
        return Err(Error::Config(format!("n_r must be at least 8, got {n_r}")));
    }
    if n_phi < 16 || n_phi % 2 != 0 {
        return Err(Error::Config(format!(
            "n_phi must be even and at least 16, got {n_phi}"
        )));
    }
    if !(domain.h(domain.center) > 0.0) {
        return Err(Error::Geometry("h is not positive at the chart center".into()));
    }
    let center = domain.center;
    let dphi = TAU / n_phi as f64;
    let ds = 1.0 / n_r as f64;
    let rays: Vec<RayRoot> = (0..n_phi)
        .map(|j| domain.ray_root(j as f64 * dphi))
        .collect::<Result<_>>()?;

    let count = 1 + n_r * n_phi;
    let mut positions = vec![center; count];
    let mut index = vec![(0, 0); count];
    for i in 1..=n_r {
        for j in 0..n_phi {
            let phi = j as f64 * dphi;
            let s = i as f64 * ds;
            let k = node_index(n_phi, i, j);
            let g = rays[j].gamma;
            positions[k] = [center[0] + s * g * phi.cos(), center[1] + s * g * phi.sin()];
            index[k] = (i, j);
        }
    }

    let stencils: Vec<NodeStencil> = (0..count)
        .into_par_iter()
        .map(|k| {
            let (i, j) = index[k];
            let mut st = if uses_patch(n_phi, i) {
                let mut w = ChartWeights::new();
                widen(&mut w, n_r, n_phi, i, j);
                let len = w.len();
                NodeStencil {
                    nodes: w.into_keys().collect(),
                    grad: vec![[0.0; 2]; len],
                    hess: vec![[0.0; 3]; len],
                }
            } else {
                let mut w = chart_stencil(n_r, n_phi, i, j);
                widen(&mut w, n_r, n_phi, i, j);
                cartesian_stencil(&w, i as f64 * ds, j as f64 * dphi, &rays[j])
            };
            self_first(&mut st, k);
            moment_correct(&mut st, &positions, positions[k])?;
            Ok(st)
        })
        .collect::<Result<_>>()?;

    let boundary_nodes: Vec<usize> = (0..n_phi).map(|j| node_index(n_phi, n_r, j)).collect();
    let normals = boundary_nodes
        .iter()
        .map(|&k| domain.inward_normal(positions[k]))
        .collect::<Result<Vec<_>>>()?;

    let mut interior_weights = vec![0.0; count];
    let mean_g2 = rays.iter().map(|r| r.gamma * r.gamma).sum::<f64>() / n_phi as f64;
    interior_weights[POLE] = PI * 0.25 * ds * ds * mean_g2;
    for i in 1..n_r {
        for j in 0..n_phi {
            let g = rays[j].gamma;
            interior_weights[node_index(n_phi, i, j)] = i as f64 * ds * g * g * ds * dphi;
        }
    }
    let total: f64 = interior_weights.iter().sum();
    interior_weights.iter_mut().for_each(|w| *w /= total);

    let dist = |a: usize, b: usize| {
        (positions[a][0] - positions[b][0]).hypot(positions[a][1] - positions[b][1])
    };
    let mut h = 0.0f64;
    for i in 1..=n_r {
        for j in 0..n_phi {
            let k = node_index(n_phi, i, j);
            h = h.max(dist(k, node_index(n_phi, i - 1, j)));
            h = h.max(dist(k, node_index(n_phi, i, j + 1)));
        }
    }

    Ok(Grid {
        n_r,
        n_phi,
        center,
        rays,
        positions,
        index,
        stencils,
        boundary_nodes,
        normals,
        interior_weights,
        h,
    })
}

/// Value, gradient and Hessian of `u` at `node`.
pub fn eval_derivatives(grid: &Grid, u: &[f64], node: usize) -> Result<NodeDerivatives> {
    grid.check_field(u)?;
    if node >= grid.len() {
        return Err(Error::Internal(format!(
            "node {node} out of range for grid of {} nodes",
            grid.len()
        )));
    }
    Ok(grid.derivatives_at(u, node))
}
