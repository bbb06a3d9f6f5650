//! Direct sparse solves of the bordered Newton system.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use super::assemble::Jacobian;
use crate::error::{Error, Result};

/// Solves `J x = b` by sparse LU.
pub fn solve_sparse(j: &Jacobian, b: &[f64]) -> Result<Vec<f64>> {
    let n = j.size;
    if b.len() != n {
        return Err(Error::Internal(format!(
            "right-hand side has {} entries, system has {n}",
            b.len()
        )));
    }
    let triplets: Vec<Triplet<usize, usize, f64>> = j
        .triplets
        .iter()
        .map(|&(r, c, v)| Triplet::new(r, c, v))
        .collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::Internal(format!("sparse assembly failed: {e:?}")))?;
    let lu = a
        .sp_lu()
        .map_err(|e| Error::Singular(format!("sparse LU failed: {e:?}")))?;
    let rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    let x = lu.solve(&rhs);
    let out: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("Newton system solution is not finite".into()));
    }
    Ok(out)
}

/// Solves the bordered Newton system whose last row is the normalization
/// functional. Constants are (up to rounding) in the kernel of every other
/// row, so the last row is swapped for `δu[pin] = 0` and the step is then
/// shifted by a constant to satisfy the original row. A dense last row would
/// otherwise make the fill-reducing ordering useless.
pub fn solve_bordered(j: &Jacobian, b: &[f64], pin: usize) -> Result<Vec<f64>> {
    let last = j.size - 1;
    let (border, rest): (Vec<_>, Vec<_>) = j.triplets.iter().partition(|t| t.0 == last);
    let mut pinned = Jacobian {
        size: j.size,
        triplets: rest,
    };
    pinned.triplets.push((last, pin, 1.0));
    let mut rhs = b.to_vec();
    rhs[last] = 0.0;
    let mut x = solve_sparse(&pinned, &rhs)?;
    let (mut dot, mut wsum) = (0.0, 0.0);
    for &(_, col, w) in &border {
        if col < last {
            dot += w * x[col];
            wsum += w;
        }
    }
    if wsum == 0.0 {
        return Err(Error::Singular("normalization row does not fix the constant".into()));
    }
    let shift = (b[last] - dot) / wsum;
    for v in &mut x[..last] {
        *v += shift;
    }
    Ok(x)
}
