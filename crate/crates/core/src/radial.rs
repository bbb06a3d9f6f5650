//! Reference solutions for concentric discs from the radial ODE.
//!
//! For `u(x) = U(|x|)` with `φ = U'`, the homotopy equation reduces to
//!
//! ```text
//! t·arctan(φ'/w³) + t(n−1)·arctan(φ/(r w)) + (1−t)(arctan φ' + (n−1)·arctan(φ/r)) = c,
//! ```
//!
//! `w = √(1+φ²)`. The ODE is integrated for `ψ = φ/r` in `σ = ln r`, which
//! removes the stiffness at the pole, and `c` is found by shooting on
//! `φ(ρ) = ρ̃`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RK_STEPS: usize = 4000;
const START_FRACTION: f64 = 1e-6;
const SCAN_SAMPLES: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub rho_src: f64,
    pub rho_tgt: f64,
    pub n: usize,
    pub t: f64,
    pub c: f64,
    pub r: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub kappa_rad: Vec<f64>,
    pub kappa_tan: Vec<f64>,
    /// `|φ(ρ) − ρ̃|` at the returned `c`.
    pub endpoint_error: f64,
}

/// Solves `t·arctan(q/w³) + (1−t)·arctan q = target` for `q`.
fn invert_slope(t: f64, w: f64, target: f64) -> Option<f64> {
    if target.abs() >= std::f64::consts::FRAC_PI_2 {
        return None;
    }
    let w3 = w * w * w;
    let f = |q: f64| t * (q / w3).atan() + (1.0 - t) * q.atan() - target;
    let a = target.tan();
    let b = w3 * target.tan();
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    if !(lo.is_finite() && hi.is_finite()) {
        return None;
    }
    if f(lo) >= 0.0 {
        return Some(lo);
    }
    if f(hi) <= 0.0 {
        return Some(hi);
    }
    let mut q = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fq = f(q);
        if fq == 0.0 {
            return Some(q);
        }
        if fq < 0.0 {
            lo = q;
        } else {
            hi = q;
        }
        let df = t / w3 / (1.0 + (q / w3).powi(2)) + (1.0 - t) / (1.0 + q * q);
        let newton = q - fq / df;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - q).abs() <= 1e-16 * q.abs().max(1e-300) || hi - lo <= 4.0 * f64::EPSILON * hi.abs() {
            return Some(next);
        }
        q = next;
    }
    Some(q)
}

struct Rhs {
    n: usize,
    t: f64,
    c: f64,
}

impl Rhs {
    /// `φ'` at radius `r` given `ψ = φ/r`.
    fn slope(&self, r: f64, psi: f64) -> Option<f64> {
        let phi = r * psi;
        let w = (1.0 + phi * phi).sqrt();
        let tangential = self.t * (psi / w).atan() + (1.0 - self.t) * psi.atan();
        let target = self.c - (self.n as f64 - 1.0) * tangential;
        invert_slope(self.t, w, target)
    }

    /// `dψ/dσ = φ' − ψ` with `r = e^σ`.
    fn eval(&self, sigma: f64, psi: f64) -> Option<f64> {
        Some(self.slope(sigma.exp(), psi)? - psi)
    }
}

struct Trajectory {
    sigma: Vec<f64>,
    psi: Vec<f64>,
}

/// RK4 from `r₀ = 10⁻⁶ρ` to `ρ`; `None` when the slope blows up.
fn integrate(rhs: &Rhs, rho: f64, steps: usize, keep: bool) -> Option<Trajectory> {
    let s0 = (START_FRACTION * rho).ln();
    let s1 = rho.ln();
    let ds = (s1 - s0) / steps as f64;
    let mut psi = (rhs.c / rhs.n as f64).tan();
    let mut out = Trajectory {
        sigma: Vec::new(),
        psi: Vec::new(),
    };
    if keep {
        out.sigma.push(s0);
        out.psi.push(psi);
    }
    for k in 0..steps {
        let s = s0 + k as f64 * ds;
        let k1 = rhs.eval(s, psi)?;
        let k2 = rhs.eval(s + 0.5 * ds, psi + 0.5 * ds * k1)?;
        let k3 = rhs.eval(s + 0.5 * ds, psi + 0.5 * ds * k2)?;
        let k4 = rhs.eval(s + ds, psi + ds * k3)?;
        psi += ds * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        if !psi.is_finite() {
            return None;
        }
        if keep {
            out.sigma.push(if k + 1 == steps { s1 } else { s + ds });
            out.psi.push(psi);
        }
    }
    if !keep {
        out.sigma.push(s1);
        out.psi.push(psi);
    }
    Some(out)
}

fn endpoint(n: usize, t: f64, c: f64, rho: f64, steps: usize) -> f64 {
    match integrate(&Rhs { n, t, c }, rho, steps, false) {
        Some(tr) => rho * tr.psi[tr.psi.len() - 1],
        None => f64::INFINITY,
    }
}

/// Shooting solve with the default RK4 resolution.
pub fn radial_solve(rho_src: f64, rho_tgt: f64, n: usize, t: f64, tol: f64) -> Result<RadialProfile> {
    radial_solve_with_steps(rho_src, rho_tgt, n, t, tol, DEFAULT_RK_STEPS)
}

pub fn radial_solve_with_steps(
    rho_src: f64,
    rho_tgt: f64,
    n: usize,
    t: f64,
    tol: f64,
    steps: usize,
) -> Result<RadialProfile> {
    if !(rho_src > 0.0 && rho_src.is_finite()) || !(rho_tgt > 0.0 && rho_tgt.is_finite()) {
        return Err(Error::Config(format!(
            "radii must be positive, got ({rho_src}, {rho_tgt})"
        )));
    }
    if n < 2 {
        return Err(Error::Config(format!("dimension must be at least 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Config(format!("t must lie in [0, 1], got {t}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    if steps < 1 {
        return Err(Error::Config("RK4 needs at least one step".into()));
    }

    let upper = n as f64 * std::f64::consts::FRAC_PI_2;
    let shoot = |c: f64| endpoint(n, t, c, rho_src, steps) - rho_tgt;

    // Bracket scan: endpoint must be nondecreasing in c across the samples.
    let cs: Vec<f64> = (1..=SCAN_SAMPLES)
        .map(|k| upper * k as f64 / (SCAN_SAMPLES + 1) as f64)
        .collect();
    let vals: Vec<f64> = cs.iter().map(|&c| shoot(c)).collect();
    for w in vals.windows(2) {
        if w[1] < w[0] {
            return Err(Error::Oracle(format!(
                "endpoint response is not monotone in c (t = {t}, radii {rho_src}, {rho_tgt})"
            )));
        }
    }
    // φ(ρ) → 0 as c → 0 and blows up as c → nπ/2, so the endpoints bracket.
    let (mut lo, mut hi) = match vals.iter().position(|&v| v >= 0.0) {
        Some(0) => (0.0, cs[0]),
        Some(k) => (cs[k - 1], cs[k]),
        None => (cs[SCAN_SAMPLES - 1], upper),
    };

    let mut c = 0.5 * (lo + hi);
    for _ in 0..200 {
        c = 0.5 * (lo + hi);
        let v = shoot(c);
        if v.abs() <= tol {
            break;
        }
        if v < 0.0 {
            lo = c;
        } else {
            hi = c;
        }
        if hi - lo <= 2.0 * f64::EPSILON * c {
            break;
        }
    }
    let err = shoot(c).abs();
    if !(err <= tol) && !(hi - lo <= 2.0 * f64::EPSILON * c) {
        return Err(Error::Oracle(format!(
            "shooting did not reach tolerance {tol} (error {err:.3e})"
        )));
    }

    let rhs = Rhs { n, t, c };
    let traj = integrate(&rhs, rho_src, steps, true)
        .ok_or_else(|| Error::Oracle("profile integration blew up at the solution".into()))?;
    let mut profile = RadialProfile {
        rho_src,
        rho_tgt,
        n,
        t,
        c,
        r: vec![0.0],
        phi: vec![0.0],
        dphi: vec![(c / n as f64).tan()],
        kappa_rad: vec![(c / n as f64).tan()],
        kappa_tan: vec![(c / n as f64).tan()],
        endpoint_error: err,
    };
    for (&s, &psi) in traj.sigma.iter().zip(&traj.psi) {
        let r = s.exp();
        let phi = r * psi;
        let q = rhs
            .slope(r, psi)
            .ok_or_else(|| Error::Oracle("slope inversion failed on the profile".into()))?;
        let w = (1.0 + phi * phi).sqrt();
        profile.r.push(r);
        profile.phi.push(phi);
        profile.dphi.push(q);
        profile.kappa_rad.push(q / (w * w * w));
        profile.kappa_tan.push(psi / w);
    }
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn slope_inversion_roundtrip() {
        for &(t, w, q) in &[(0.0, 1.3, 0.7), (1.0, 1.3, 2.0), (0.4, 2.0, -0.3), (0.7, 1.0, 5.0)] {
            let w3: f64 = w * w * w;
            let target = t * (q / w3).atan() + (1.0 - t) * q.atan();
            let back = invert_slope(t, w, target).unwrap();
            assert!((back - q).abs() < 1e-12 * q.abs().max(1.0), "{back} vs {q}");
        }
        assert!(invert_slope(1.0, 1.0, FRAC_PI_2).is_none());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(radial_solve(0.0, 1.0, 2, 1.0, 1e-10), Err(Error::Config(_))));
        assert!(matches!(radial_solve(1.0, 1.0, 1, 1.0, 1e-10), Err(Error::Config(_))));
        assert!(matches!(radial_solve(1.0, 1.0, 2, 1.5, 1e-10), Err(Error::Config(_))));
        assert!(matches!(radial_solve(1.0, 1.0, 2, 1.0, 0.0), Err(Error::Config(_))));
    }
}
