//! Closed-form asymptotic risks for the random-features (RF), neural-tangent
//! (NT) and fully trained (NN) regimes on both data models.
//!
//! Quadratic-target predictions are normalized by `‖f*‖²_{L²} = 2‖B‖²_F`
//! (targets are centered), mixture predictions by `E[y²] = 1`.

use alloc::vec::Vec;
use core::fmt;

use crate::activation::ActivationProfile;
use crate::error::{bail, Result};
use crate::linalg::{eigvals_desc, inner, sym_inv_sqrt, trace, Matrix};
use crate::spectra::{empirical_spectrum, whitened_feature_covariance};
use crate::stieltjes::{solve_psi, DEFAULT_TOL};

const NORMALIZATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Regime {
    Rf,
    Nt,
    Nn,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Rf => "RF",
            Self::Nt => "NT",
            Self::Nn => "NN",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    Qf,
    Mg,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Qf => "qf",
            Self::Mg => "mg",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scalars a prediction was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionInputs {
    pub d: usize,
    pub rho: f64,
    pub scalars: Vec<(&'static str, f64)>,
}

impl PredictionInputs {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.scalars.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskPrediction {
    pub regime: Regime,
    pub model: ModelKind,
    pub value: f64,
    pub normalized: f64,
    pub inputs: PredictionInputs,
}

fn positive_part(x: f64) -> f64 {
    x.max(0.0)
}

fn check_dims(b: &Matrix, gamma: &Matrix) -> Result<usize> {
    let d = b.nrows();
    if d == 0 || b.ncols() != d || gamma.nrows() != d || gamma.ncols() != d {
        bail!(Argument, "B and Gamma must both be {}x{}", d, d);
    }
    Ok(d)
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho >= 0.0) || rho.is_nan() {
        bail!(Argument, "rho must be non-negative (got {})", rho);
    }
    Ok(())
}

fn nonzero_frob(m: &Matrix, what: &str) -> Result<f64> {
    let f = m.norm_squared();
    if !(f > 0.0) {
        bail!(Argument, "{} must be non-zero", what);
    }
    Ok(f)
}

/// RF risk for a general activation on the quadratic target.
pub fn rf_qf_risk(b: &Matrix, gamma: &Matrix, rho: f64, profile: &ActivationProfile) -> Result<RiskPrediction> {
    profile.require_usable()?;
    let d = check_dims(b, gamma)?;
    if !(rho > 0.0) {
        bail!(Argument, "rho must be positive (got {})", rho);
    }
    let tr = trace(gamma);
    if (tr - 1.0).abs() > NORMALIZATION_TOL {
        bail!(Assumption, "RF weights require Tr(Gamma) = 1 (got {})", tr);
    }
    let b_sq = nonzero_frob(b, "B")?;
    let df = d as f64;
    let spectrum = empirical_spectrum(&(gamma * df))?;
    let sol = solve_psi(rho, profile.lambda1, profile.lambda_tilde, &spectrum, DEFAULT_TOL)?;
    let gb = inner(gamma, b);
    let gg = gamma.norm_squared();
    let l2sq = profile.lambda2 * profile.lambda2;
    let gain = sol.psi * l2sq * df * gb * gb / (b_sq * (2.0 + sol.psi * l2sq * df * gg));
    let normalized = 1.0 - gain;
    Ok(RiskPrediction {
        regime: Regime::Rf,
        model: ModelKind::Qf,
        value: 2.0 * b_sq * normalized,
        normalized,
        inputs: PredictionInputs {
            d,
            rho,
            scalars: alloc::vec![("psi", sol.psi), ("gamma_b", gb), ("d_gamma_frob_sq", df * gg)],
        },
    })
}

/// RF risk for `σ(x) = x² - 1`.
pub fn rf_qf_risk_quadratic(b: &Matrix, gamma: &Matrix, rho: f64) -> Result<RiskPrediction> {
    let d = check_dims(b, gamma)?;
    check_rho(rho)?;
    let b_sq = nonzero_frob(b, "B")?;
    let df = d as f64;
    let gb = inner(b, gamma);
    let gg = gamma.norm_squared();
    let normalized = 1.0 - rho * df * gb * gb / (b_sq * (1.0 + rho * df * gg));
    Ok(RiskPrediction {
        regime: Regime::Rf,
        model: ModelKind::Qf,
        value: 2.0 * b_sq * normalized,
        normalized,
        inputs: PredictionInputs { d, rho, scalars: alloc::vec![("gamma_b", gb), ("d_gamma_frob_sq", df * gg)] },
    })
}

/// Normalized RF risk in the `ρ → ∞` limit: `1 - <Γ,B>² / (‖Γ‖²‖B‖²)`.
pub fn rf_qf_risk_rho_infinity(b: &Matrix, gamma: &Matrix) -> Result<f64> {
    check_dims(b, gamma)?;
    let b_sq = nonzero_frob(b, "B")?;
    let g_sq = nonzero_frob(gamma, "Gamma")?;
    let gb = inner(gamma, b);
    Ok(1.0 - gb * gb / (g_sq * b_sq))
}

/// `Tr(B)² / (d ‖B‖²_F)`
pub fn trace_ratio(m: &Matrix) -> Result<f64> {
    let d = m.nrows() as f64;
    let f = nonzero_frob(m, "matrix")?;
    let t = trace(m);
    Ok(t * t / (d * f))
}

/// Expected NT risk with isotropic weights `w_i ~ N(0, I/d)`.
pub fn nt_qf_risk(b: &Matrix, rho: f64, d: usize) -> Result<RiskPrediction> {
    check_rho(rho)?;
    if b.nrows() != d || b.ncols() != d {
        bail!(Argument, "B must be {}x{}", d, d);
    }
    let tau = trace_ratio(b)?;
    let gap = positive_part(1.0 - rho);
    let normalized = gap * gap * (1.0 - tau) + gap * tau;
    Ok(RiskPrediction {
        regime: Regime::Nt,
        model: ModelKind::Qf,
        value: 2.0 * b.norm_squared() * normalized,
        normalized,
        inputs: PredictionInputs { d, rho, scalars: alloc::vec![("tau", tau)] },
    })
}

/// Minimal NN risk `2 Σ_{i>N} λ_i(B)²` for `B ⪰ 0`.
pub fn nn_qf_risk(eigenvalues: &[f64], n: usize) -> Result<RiskPrediction> {
    if eigenvalues.is_empty() {
        bail!(Argument, "need at least one eigenvalue");
    }
    let mut eig: Vec<f64> = eigenvalues.to_vec();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    let scale = eig.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    if let Some(&min) = eig.last() {
        if min < -1e-10 * scale {
            bail!(Assumption, "B must be positive semidefinite (eigenvalue {:e})", min);
        }
    }
    let total: f64 = eig.iter().map(|v| v * v).sum();
    if !(total > 0.0) {
        bail!(Argument, "B must be non-zero");
    }
    let tail = eig.iter().skip(n).fold(0.0, |acc, v| acc + v * v);
    let d = eig.len();
    Ok(RiskPrediction {
        regime: Regime::Nn,
        model: ModelKind::Qf,
        value: 2.0 * tail,
        normalized: tail / total,
        inputs: PredictionInputs { d, rho: n as f64 / d as f64, scalars: alloc::vec![("n", n as f64)] },
    })
}

/// `(ζ₁, ζ₂) = (d Tr(ΣΓΣΓ)/2, d Tr(ΔΓ)²/4)`
pub fn mixture_zetas(sigma: &Matrix, delta: &Matrix, gamma: &Matrix) -> (f64, f64) {
    let d = sigma.nrows() as f64;
    let sg = sigma * gamma;
    let zeta1 = d * (&sg * &sg).trace() / 2.0;
    let dg = (delta * gamma).trace();
    (zeta1, d * dg * dg / 4.0)
}

/// RF risk on the Gaussian mixture for a general activation.
pub fn rf_mg_risk(
    sigma: &Matrix,
    delta: &Matrix,
    gamma: &Matrix,
    rho: f64,
    profile: &ActivationProfile,
) -> Result<RiskPrediction> {
    profile.require_usable()?;
    let d = check_dims(sigma, gamma)?;
    check_dims(delta, gamma)?;
    if !(rho > 0.0) {
        bail!(Argument, "rho must be positive (got {})", rho);
    }
    let tr = inner(gamma, sigma);
    if (tr - 1.0).abs() > NORMALIZATION_TOL {
        bail!(Assumption, "RF weights require Tr(Gamma Sigma) = 1 (got {})", tr);
    }
    let df = d as f64;
    let spectrum = empirical_spectrum(&(whitened_feature_covariance(gamma, sigma)? * df))?;
    let sol = solve_psi(rho, profile.lambda1, profile.lambda_tilde, &spectrum, DEFAULT_TOL)?;
    let (zeta1, zeta2) = mixture_zetas(sigma, delta, gamma);
    let s = profile.lambda2 * profile.lambda2 * sol.psi;
    let value = (1.0 + zeta1 * s) / (1.0 + (zeta1 + zeta2) * s);
    Ok(RiskPrediction {
        regime: Regime::Rf,
        model: ModelKind::Mg,
        value,
        normalized: value,
        inputs: PredictionInputs {
            d,
            rho,
            scalars: alloc::vec![("psi", sol.psi), ("zeta1", zeta1), ("zeta2", zeta2)],
        },
    })
}

/// `ζ₁ / (ζ₁ + ζ₂)`, the RF mixture risk as `ρ → ∞`.
pub fn rf_mg_risk_rho_infinity(sigma: &Matrix, delta: &Matrix, gamma: &Matrix) -> Result<f64> {
    check_dims(sigma, gamma)?;
    check_dims(delta, gamma)?;
    let (z1, z2) = mixture_zetas(sigma, delta, gamma);
    if !(z1 + z2 > 0.0) {
        bail!(Argument, "degenerate Gamma");
    }
    Ok(z1 / (z1 + z2))
}

/// `κ(ρ, Δ)` of the isotropic NT mixture risk.
pub fn nt_mg_kappa(delta: &Matrix, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if delta.norm_squared() == 0.0 {
        return Ok(1.0 - positive_part(1.0 - rho));
    }
    let tau = trace_ratio(delta)?;
    let gap = positive_part(1.0 - rho);
    Ok(1.0 - gap * gap * (1.0 - tau) - gap * tau)
}

/// NT mixture risk with `Σ = I` and isotropic weights.
pub fn nt_mg_risk_isotropic(delta: &Matrix, rho: f64, d: usize) -> Result<RiskPrediction> {
    if delta.nrows() != d || delta.ncols() != d {
        bail!(Argument, "Delta must be {}x{}", d, d);
    }
    let kappa = nt_mg_kappa(delta, rho)?;
    let value = 2.0 / (2.0 + kappa * delta.norm_squared());
    Ok(RiskPrediction {
        regime: Regime::Nt,
        model: ModelKind::Mg,
        value,
        normalized: value,
        inputs: PredictionInputs { d, rho, scalars: alloc::vec![("kappa", kappa)] },
    })
}

/// Minimal NN mixture risk `2 / (2 + Σ_{i ≤ N∧d} s_i(Δ̃)²)`.
pub fn nn_mg_risk(sigma: &Matrix, delta: &Matrix, n: usize) -> Result<RiskPrediction> {
    let d = check_dims(sigma, delta)?;
    let inv_root = sym_inv_sqrt(sigma)?;
    let dt = &inv_root * delta * &inv_root;
    let mut sv: Vec<f64> = eigvals_desc(&dt)?.iter().map(|v| v.abs()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    let captured: f64 = sv.iter().take(n.min(d)).map(|s| s * s).sum();
    let value = 2.0 / (2.0 + captured);
    Ok(RiskPrediction {
        regime: Regime::Nn,
        model: ModelKind::Mg,
        value,
        normalized: value,
        inputs: PredictionInputs { d, rho: n as f64 / d as f64, scalars: alloc::vec![("captured", captured)] },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::{Activation, DEFAULT_QUAD_ORDER};
    use crate::linalg::Vector;
    use alloc::vec;

    fn diag(v: &[f64]) -> Matrix {
        Matrix::from_diagonal(&Vector::from_vec(v.to_vec()))
    }

    #[test]
    fn rf_no_better_than_trivial_for_traceless() {
        let p = Activation::Quadratic.profile(DEFAULT_QUAD_ORDER).unwrap();
        let b = diag(&[1.0, -1.0, 2.0, -2.0]);
        let g = Matrix::identity(4, 4) / 4.0;
        let r = rf_qf_risk(&b, &g, 1.5, &p).unwrap();
        assert!((r.normalized - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rf_quadratic_small_example() {
        let b = Matrix::identity(2, 2);
        let g = Matrix::identity(2, 2) / 2.0;
        let r = rf_qf_risk_quadratic(&b, &g, 1.0).unwrap();
        assert!((r.normalized - 0.5).abs() < 1e-15);
        let p = Activation::Quadratic.profile(DEFAULT_QUAD_ORDER).unwrap();
        let general = rf_qf_risk(&b, &g, 1.0, &p).unwrap();
        assert!((general.normalized - 0.5).abs() < 1e-10);
    }

    #[test]
    fn rf_limit_and_alignment() {
        let b = diag(&[3.0, 1.0, 0.5]);
        let g = Matrix::identity(3, 3) / 3.0;
        let far = rf_qf_risk_quadratic(&b, &g, 1e9).unwrap().normalized;
        let lim = rf_qf_risk_rho_infinity(&b, &g).unwrap();
        assert!((far - lim).abs() < 1e-8);
        let aligned = &b / trace(&b);
        assert!(rf_qf_risk_rho_infinity(&b, &aligned).unwrap().abs() < 1e-15);
    }

    #[test]
    fn rf_rejects_linear_and_unnormalized() {
        let lin = crate::activation::activation_profile("linear", |x| x, &[], 40).unwrap();
        let b = Matrix::identity(2, 2);
        let g = Matrix::identity(2, 2) / 2.0;
        assert!(rf_qf_risk(&b, &g, 1.0, &lin).is_err());
        let p = Activation::Quadratic.profile(40).unwrap();
        assert!(rf_qf_risk(&b, &Matrix::identity(2, 2), 1.0, &p).is_err());
    }

    #[test]
    fn nt_values() {
        let b = Matrix::identity(5, 5);
        assert_eq!(nt_qf_risk(&b, 1.0, 5).unwrap().normalized, 0.0);
        assert_eq!(nt_qf_risk(&b, 3.0, 5).unwrap().normalized, 0.0);
        assert!((nt_qf_risk(&b, 0.5, 5).unwrap().normalized - 0.5).abs() < 1e-15);
        let traceless = diag(&[1.0, -1.0]);
        assert!((nt_qf_risk(&traceless, 0.5, 2).unwrap().normalized - 0.25).abs() < 1e-15);
    }

    #[test]
    fn nn_values() {
        assert_eq!(nn_qf_risk(&[3.0, 2.0, 1.0], 1).unwrap().value, 10.0);
        assert_eq!(nn_qf_risk(&[3.0, 2.0, 1.0], 2).unwrap().value, 2.0);
        assert_eq!(nn_qf_risk(&[3.0, 2.0, 1.0], 3).unwrap().value, 0.0);
        assert_eq!(nn_qf_risk(&[1.0, 3.0, 2.0], 5).unwrap().value, 0.0);
        assert!(nn_qf_risk(&[3.0, -1.0], 1).is_err());
    }

    #[test]
    fn mg_rf_values() {
        let p = Activation::Quadratic.profile(DEFAULT_QUAD_ORDER).unwrap();
        let d = 6;
        let sigma = Matrix::identity(d, d);
        let g = Matrix::identity(d, d) / d as f64;
        let zero = Matrix::zeros(d, d);
        assert!((rf_mg_risk(&sigma, &zero, &g, 1.0, &p).unwrap().value - 1.0).abs() < 1e-15);
        let delta = diag(&[0.3, 0.2, 0.1, 0.3, 0.2, 0.1]);
        let rho = 0.7;
        let got = rf_mg_risk(&sigma, &delta, &g, rho, &p).unwrap().value;
        let tr = trace(&delta);
        let want = (1.0 + rho) / (1.0 + rho + rho * tr * tr / (2.0 * d as f64));
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        let (z1, z2) = mixture_zetas(&sigma, &delta, &g);
        assert!((rf_mg_risk_rho_infinity(&sigma, &delta, &g).unwrap() - z1 / (z1 + z2)).abs() < 1e-15);
    }

    #[test]
    fn mg_nt_values() {
        let delta = diag(&[0.2, 0.1, 0.3]);
        let f = delta.norm_squared();
        let r = nt_mg_risk_isotropic(&delta, 1.2, 3).unwrap().value;
        assert!((r - 1.0 / (1.0 + f / 2.0)).abs() < 1e-15);
        assert_eq!(nt_mg_risk_isotropic(&delta, 0.0, 3).unwrap().value, 1.0);
        let traceless = diag(&[0.2, -0.2]);
        assert!((nt_mg_kappa(&traceless, 0.5).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn mg_nn_values() {
        let sigma = Matrix::identity(2, 2);
        let delta = diag(&[0.2, 0.1]);
        let r = nn_mg_risk(&sigma, &delta, 1).unwrap().value;
        assert!((r - 2.0 / 2.04).abs() < 1e-15);
        let full = nn_mg_risk(&sigma, &delta, 4).unwrap().value;
        assert!((full - 1.0 / (1.0 + delta.norm_squared() / 2.0)).abs() < 1e-15);
        assert_eq!(nn_mg_risk(&sigma, &Matrix::zeros(2, 2), 1).unwrap().value, 1.0);
        assert!(nn_mg_risk(&Matrix::zeros(2, 2), &delta, 1).is_err());
        let _ = vec![0];
    }
}
