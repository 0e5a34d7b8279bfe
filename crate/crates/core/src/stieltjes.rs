//! Real fixed point of the Silverstein equation evaluated at `-λ̃`.
//!
//! For an atomic spectral distribution `D = Σ_j w_j δ_{t_j}` we look for the
//! unique `ψ > 0` with
//!
//! ```text
//! -λ̃ = -ρ/ψ + Σ_j w_j λ₁² t_j / (1 + λ₁² t_j ψ)
//! ```
//!
//! `ψ · residual(ψ)` is strictly decreasing from `ρ` at zero to `-∞`, so the
//! root is unique and bracketed by `[ρ/(λ̃ + λ₁² max t), ρ/λ̃]`.


use crate::error::{bail, Error, Result};
use crate::spectra::SpectrumSpec;

pub const DEFAULT_TOL: f64 = 1e-12;
const MAX_FIXED_POINT_ITERS: usize = 10_000;
const MAX_BISECTION_ITERS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiSolution {
    pub psi: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// `-λ̃ + ρ/ψ - Σ_j w_j λ₁² t_j / (1 + λ₁² t_j ψ)`
pub fn psi_residual(psi: f64, rho: f64, lambda1: f64, lambda_tilde: f64, spectrum: &SpectrumSpec) -> f64 {
    let l1sq = lambda1 * lambda1;
    -lambda_tilde + rho / psi - spectrum.integrate(|t| l1sq * t / (1.0 + l1sq * t * psi))
}

pub fn solve_psi(
    rho: f64,
    lambda1: f64,
    lambda_tilde: f64,
    spectrum: &SpectrumSpec,
    tol: f64,
) -> Result<PsiSolution> {
    if !(rho > 0.0) || !rho.is_finite() {
        bail!(Argument, "rho must be positive and finite (got {})", rho);
    }
    if !(lambda_tilde > 0.0) {
        return Err(Error::Profile {
            name: "<psi>".into(),
            reason: alloc::format!("lambda_tilde must be positive (got {:e})", lambda_tilde),
        });
    }
    if !lambda1.is_finite() || !(tol > 0.0) {
        bail!(Argument, "lambda1 must be finite and tol positive");
    }
    let l1sq = lambda1 * lambda1;
    let residual = |psi: f64| psi_residual(psi, rho, lambda1, lambda_tilde, spectrum);

    // monotone fixed-point iteration from the upper end of the bracket
    let mut psi = rho / lambda_tilde;
    let mut res = residual(psi);
    let mut iterations = 0;
    while res.abs() > tol && iterations < MAX_FIXED_POINT_ITERS {
        let denom = lambda_tilde + spectrum.integrate(|t| l1sq * t / (1.0 + l1sq * t * psi));
        let next = rho / denom;
        iterations += 1;
        if !next.is_finite() || next <= 0.0 {
            break;
        }
        psi = next;
        res = residual(psi);
    }
    if res.abs() <= tol && psi > 0.0 {
        return Ok(PsiSolution { psi, residual: res, iterations });
    }

    // bisection on ψ·residual(ψ), which is decreasing
    let mut lo = rho / (lambda_tilde + l1sq * spectrum.max_atom());
    let mut hi = rho / lambda_tilde;
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        let r = residual(mid);
        iterations += 1;
        if r.abs() <= tol {
            return Ok(PsiSolution { psi: mid, residual: r, iterations });
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            res = r;
            break;
        }
        res = r;
    }
    Err(Error::NoConvergence { iterations, residual: res })
}

/// `ψ / (1 + κψ)`
pub fn effective_resolvent(psi: f64, kappa: f64) -> Result<f64> {
    if !(psi > 0.0) || !(kappa >= 0.0) {
        bail!(Argument, "effective resolvent needs psi > 0 and kappa >= 0 (got {psi}, {kappa})");
    }
    Ok(psi / (1.0 + kappa * psi))
}
