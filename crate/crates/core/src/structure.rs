//! Structure conditions of `F(κ) = Σ arctan κᵢ` and the matrix inequalities
//! used by the a-priori estimates, evaluated numerically.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_square_symmetric, min_eigenvalue, sorted_eigen};
use crate::operator::f_derivatives;

/// Default cap on curvatures when sampling the slab `{min κ ≤ s₁, max κ ≥ s₂}`,
/// which is otherwise unbounded.
pub const DEFAULT_CURVATURE_CAP: f64 = 1e3;

/// Sampling range for the concavity checks, `[0, 10]ⁿ`.
const SAMPLE_RANGE: f64 = 10.0;

/// Measured outcome of [`check_structure_conditions`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureReport {
    pub samples: usize,
    pub dims: Vec<usize>,
    /// Samples with some `∂F/∂κᵢ ≤ 0`.
    pub monotonicity_violations: usize,
    /// Samples whose Hessian of `F` has a positive eigenvalue.
    pub concavity_violations: usize,
    /// Samples where `F̃(μ) = −F(1/μ)` has a positive Hessian eigenvalue.
    pub dual_concavity_violations: usize,
    /// Samples where `F[A]` fails to be concave along a random symmetric direction.
    pub matrix_concavity_violations: usize,
    pub slab: (f64, f64),
    pub cap: f64,
    /// Measured range of `Σ ∂F/∂κᵢ` over the slab.
    pub trace_bracket: (f64, f64),
    /// Measured range of `Σ (∂F/∂κᵢ) κᵢ²` over the slab.
    pub weighted_bracket: (f64, f64),
    /// `Λ₁ = min` and `Λ₂ = max` over both brackets.
    pub lambda1: f64,
    pub lambda2: f64,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        self.monotonicity_violations == 0
            && self.concavity_violations == 0
            && self.dual_concavity_violations == 0
            && self.matrix_concavity_violations == 0
            && self.lambda1 > 0.0
            && self.lambda2.is_finite()
    }
}

/// Randomized check of monotonicity, concavity, dual concavity and the
/// bracket bounds of `F` on the slab `{min κ ≤ s₁, max κ ≥ s₂, κ ≤ cap}`.
pub fn check_structure_conditions(
    samples: usize,
    slab: (f64, f64),
    cap: f64,
    dims: &[usize],
    seed: u64,
) -> Result<StructureReport> {
    let (s1, s2) = slab;
    if !(s1 > 0.0 && s2 > 0.0) {
        return Err(Error::InvalidInput(format!("slab bounds must be positive, got ({s1}, {s2})")));
    }
    if !(cap >= s2) {
        return Err(Error::InvalidInput(format!("cap {cap} is below s2 = {s2}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = StructureReport {
        samples,
        dims: dims.to_vec(),
        monotonicity_violations: 0,
        concavity_violations: 0,
        dual_concavity_violations: 0,
        matrix_concavity_violations: 0,
        slab,
        cap,
        trace_bracket: (f64::INFINITY, f64::NEG_INFINITY),
        weighted_bracket: (f64::INFINITY, f64::NEG_INFINITY),
        lambda1: 0.0,
        lambda2: 0.0,
    };

    for &n in dims {
        for _ in 0..samples {
            let kappa: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..SAMPLE_RANGE)).collect();
            let (grad, hess_diag) = f_derivatives(&kappa);
            if grad.iter().any(|g| !(*g > 0.0)) {
                report.monotonicity_violations += 1;
            }
            let hess = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(hess_diag));
            if sorted_eigen(&hess).0[n - 1] > 0.0 {
                report.concavity_violations += 1;
            }

            // μ in (0, 10]; κ = 1/μ may be large.
            let mu: Vec<f64> = (0..n)
                .map(|_| SAMPLE_RANGE * (1.0 - rng.random::<f64>()))
                .collect();
            if dual_hessian_max_eigenvalue(&mu) > 1e-12 {
                report.dual_concavity_violations += 1;
            }

            let eta = random_symmetric(&mut rng, n, 1.0);
            let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(kappa.clone()));
            let q = random_orthogonal(&mut rng, n);
            let a = &q * a * q.transpose();
            if matrix_second_derivative(&a, &eta) > 1e-12 {
                report.matrix_concavity_violations += 1;
            }

            let slab_point = sample_slab(&mut rng, n, s1, s2, cap);
            let (g, _) = f_derivatives(&slab_point);
            let trace: f64 = g.iter().sum();
            let weighted: f64 = g.iter().zip(&slab_point).map(|(gi, k)| gi * k * k).sum();
            report.trace_bracket.0 = report.trace_bracket.0.min(trace);
            report.trace_bracket.1 = report.trace_bracket.1.max(trace);
            report.weighted_bracket.0 = report.weighted_bracket.0.min(weighted);
            report.weighted_bracket.1 = report.weighted_bracket.1.max(weighted);
        }
    }
    report.lambda1 = report.trace_bracket.0.min(report.weighted_bracket.0);
    report.lambda2 = report.trace_bracket.1.max(report.weighted_bracket.1);
    Ok(report)
}

/// Largest eigenvalue of the (diagonal) Hessian of `μ ↦ −F(1/μ)`, computed by
/// the chain rule through `κ = 1/μ` rather than by simplifying first.
pub fn dual_hessian_max_eigenvalue(mu: &[f64]) -> f64 {
    let kappa: Vec<f64> = mu.iter().map(|m| 1.0 / m).collect();
    let (fp, fpp) = f_derivatives(&kappa);
    mu.iter()
        .enumerate()
        .map(|(i, &m)| -fpp[i] / m.powi(4) - 2.0 * fp[i] / m.powi(3))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Second directional derivative `d²/ds² F[A + sη]` at `s = 0`, via the
/// Daleckii–Krein formula `Σᵢⱼ f'^{[1]}(κᵢ, κⱼ) η̂ᵢⱼ²` where `η̂ = Qᵀ η Q`
/// and `f'^{[1]}` is the divided difference of `f' = 1/(1+κ²)`.
/// Coincident eigenvalues (within 1e−8) use the limit `f''`.
pub fn matrix_second_derivative(a: &DMatrix<f64>, eta: &DMatrix<f64>) -> f64 {
    let (kappa, q) = sorted_eigen(a);
    let eh = q.transpose() * eta * &q;
    let n = kappa.len();
    let fp = |k: f64| 1.0 / (1.0 + k * k);
    let fpp = |k: f64| -2.0 * k / ((1.0 + k * k) * (1.0 + k * k));
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (ki, kj) = (kappa[i], kappa[j]);
            let dd = if (ki - kj).abs() < 1e-8 {
                fpp(0.5 * (ki + kj))
            } else {
                (fp(ki) - fp(kj)) / (ki - kj)
            };
            total += dd * eh[(i, j)] * eh[(i, j)];
        }
    }
    total
}

fn sample_slab(rng: &mut ChaCha8Rng, n: usize, s1: f64, s2: f64, cap: f64) -> Vec<f64> {
    let mut k: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..cap)).collect();
    let lo = rng.random_range(0..n);
    let mut hi = rng.random_range(0..n);
    if n > 1 {
        while hi == lo {
            hi = rng.random_range(0..n);
        }
        k[lo] = rng.random_range(0.0..=s1);
        k[hi] = rng.random_range(s2..=cap);
    } else if s1 >= s2 {
        // One coordinate must satisfy both constraints.
        k[0] = rng.random_range(s2..=s1);
    } else {
        k[0] = s1;
    }
    k
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-scale..scale));
    (&m + m.transpose()) * 0.5
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

/// Result of [`trace_inequality_holds`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceInequality {
    pub holds: bool,
    /// `Tr(ABB) + Tr(ACC) − 2 Tr(ABC)`.
    pub slack: f64,
}

/// Checks `2 Tr(ABC) ≤ Tr(ABB) + Tr(ACC)` for `A ⪰ 0` and symmetric `B`, `C`.
pub fn trace_inequality_holds(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<TraceInequality> {
    check_square_symmetric(a, "A")?;
    check_square_symmetric(b, "B")?;
    check_square_symmetric(c, "C")?;
    if a.nrows() != b.nrows() || a.nrows() != c.nrows() {
        return Err(Error::InvalidInput("matrix sizes differ".into()));
    }
    let lo = min_eigenvalue(a);
    if lo < -1e-10 {
        return Err(Error::InvalidInput(format!(
            "A is not positive semi-definite (min eigenvalue {lo:.3e})"
        )));
    }
    let lhs = 2.0 * (a * b * c).trace();
    let rhs = (a * b * b).trace() + (a * c * c).trace();
    let slack = rhs - lhs;
    Ok(TraceInequality {
        holds: slack >= -1e-10,
        slack,
    })
}

/// `P = (Σ F'ᵢκᵢ)(Σ κⱼ²) − (Σ κᵢ)(Σ F'ⱼκⱼ²)` evaluated in the symmetric form
/// `½ Σᵢⱼ (κᵢ+κⱼ)(κᵢ−κⱼ)² κᵢκⱼ / ((1+κᵢ²)(1+κⱼ²))`, which is manifestly
/// non-negative for `κ ≥ 0`.
pub fn p_nonnegativity(kappa: &[f64]) -> Result<f64> {
    if let Some(k) = kappa.iter().find(|k| !(**k >= 0.0)) {
        return Err(Error::InvalidInput(format!("curvature {k} is negative")));
    }
    let mut p = 0.0;
    for (i, &ki) in kappa.iter().enumerate() {
        for &kj in &kappa[i + 1..] {
            let d = ki - kj;
            p += (ki + kj) * d * d * ki * kj / ((1.0 + ki * ki) * (1.0 + kj * kj));
        }
    }
    // Off-diagonal pairs counted once; the ½ cancels the (i, j)/(j, i) double count.
    Ok(p)
}
