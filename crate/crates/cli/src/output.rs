//! Output files. Every file is written to a temporary sibling and renamed
//! into place, so a reader sees either the complete file or nothing.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use slbvp_core::grid::{Grid, NodeDerivatives, POLE};
use slbvp_core::operator::{dual_geometry, graph_geometry};

use crate::exit::CliError;

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let what = path.display().to_string();
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(&what, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(&what, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(&what, e))?;
    tmp.persist(path).map_err(|e| CliError::io(&what, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io("serializing JSON", e))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::io("writing CSV", e))?;
    }
    w.into_inner().map_err(|e| CliError::io("writing CSV", e))
}

/// One row of `fields.csv`; field order is the column order.
#[derive(Debug, Clone, Serialize)]
pub struct FieldRow {
    pub i_r: usize,
    pub i_phi: usize,
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub ux: f64,
    pub uy: f64,
    pub uxx: f64,
    pub uxy: f64,
    pub uyy: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub residual: f64,
    pub is_boundary: u8,
}

pub const FIELDS_HEADER: &str = "i_r,i_phi,x,y,u,ux,uy,uxx,uxy,uyy,kappa1,kappa2,residual,is_boundary";

/// `(i_r, i_phi)` of a node; the pole is `(0, 0)`.
pub fn ring_position(grid: &Grid, node: usize) -> (usize, usize) {
    if node == POLE {
        (0, 0)
    } else {
        ((node - 1) / grid.n_phi + 1, (node - 1) % grid.n_phi)
    }
}

/// Which curvature matrix the `kappa` columns come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curvatures {
    Graph,
    /// Eigenvalues of `a*` at the node position.
    Dual,
}

pub fn field_rows(
    grid: &Grid,
    u: &[f64],
    ders: &[NodeDerivatives],
    residual: &[f64],
    curvatures: Curvatures,
) -> Vec<FieldRow> {
    (0..grid.len())
        .map(|k| {
            let d = &ders[k];
            let h = DMatrix::from_row_slice(2, 2, &[d.d2u[0][0], d.d2u[0][1], d.d2u[1][0], d.d2u[1][1]]);
            let kappa = match curvatures {
                Curvatures::Graph => graph_geometry(&DVector::from_column_slice(&d.du), &h)
                    .map(|g| [g.kappa[0], g.kappa[1]]),
                Curvatures::Dual => dual_geometry(&DVector::from_column_slice(&grid.positions[k]), &h)
                    .map(|g| [g.mu[0], g.mu[1]]),
            }
            .unwrap_or([f64::NAN, f64::NAN]);
            let (i_r, i_phi) = ring_position(grid, k);
            let p = grid.positions[k];
            FieldRow {
                i_r,
                i_phi,
                x: p[0],
                y: p[1],
                u: u[k],
                ux: d.du[0],
                uy: d.du[1],
                uxx: d.d2u[0][0],
                uxy: d.d2u[0][1],
                uyy: d.d2u[1][1],
                kappa1: kappa[0],
                kappa2: kappa[1],
                residual: residual[k],
                is_boundary: grid.is_boundary(k) as u8,
            }
        })
        .collect()
}
