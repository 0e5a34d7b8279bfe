//! Data-model parameters, feature covariances and their spectra.

#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::Exp1;

use crate::error::{bail, Error, Result};
use crate::linalg::{
    asymmetry, cholesky, eigvals_desc, gaussian_matrix, is_finite, op_norm_sym, sym_inv_sqrt,
    sym_sqrt, trace, Matrix, Vector,
};
use crate::rng::{self, streams};

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

fn check_square_symmetric(m: &Matrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        bail!(Argument, "{} must be a non-empty square matrix (got {}x{})", what, m.nrows(), m.ncols());
    }
    if !is_finite(m) {
        bail!(Argument, "{} has non-finite entries", what);
    }
    if asymmetry(m) > SYMMETRY_TOL * m.amax().max(1.0) {
        bail!(Argument, "{} is not symmetric", what);
    }
    Ok(())
}

/// Quadratic target `f*(x) = b0 + <x, B x>` over `x ~ N(0, I_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetQf {
    pub b: Matrix,
    pub b0: f64,
}

impl TargetQf {
    pub fn new(b: Matrix, b0: f64) -> Result<Self> {
        check_square_symmetric(&b, "B")?;
        if !b0.is_finite() {
            bail!(Argument, "b0 must be finite");
        }
        Ok(Self { b, b0 })
    }

    /// Target with `b0 = -Tr(B)`, so that `E f* = 0`.
    pub fn centered(b: Matrix) -> Result<Self> {
        let b0 = -trace(&b);
        Self::new(b, b0)
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    /// `E f* = Tr(B) + b0`.
    pub fn mean(&self) -> f64 {
        trace(&self.b) + self.b0
    }

    /// `E[f*²] = 2‖B‖²_F + (Tr B + b0)²`.
    pub fn second_moment(&self) -> f64 {
        2.0 * self.b.norm_squared() + self.mean().powi(2)
    }

    /// `‖f* - E f*‖²_{L²} = 2‖B‖²_F`, the risk of the best constant.
    pub fn centered_norm_sq(&self) -> f64 {
        2.0 * self.b.norm_squared()
    }

    pub fn eigenvalues_desc(&self) -> Result<Vector> {
        eigvals_desc(&self.b)
    }

    /// Fails unless `B ⪰ -1e-10·scale`.
    pub fn require_psd(&self) -> Result<()> {
        let vals = self.eigenvalues_desc()?;
        let scale = vals.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        let min = vals.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        if min < -PSD_TOL * scale {
            bail!(Assumption, "B must be positive semidefinite (min eigenvalue {:e})", min);
        }
        Ok(())
    }
}

/// Bounds checked when a mixture is constructed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureBounds {
    /// `‖Δ‖_op ≤ c_bound / √d`
    pub c_bound: f64,
    /// Allowed eigenvalue range of `Σ`.
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl Default for MixtureBounds {
    fn default() -> Self {
        Self { c_bound: 2.0, sigma_min: 1e-3, sigma_max: 1e3 }
    }
}

/// Two centered Gaussians with covariances `Σ ∓ Δ` and labels `±1`.
#[derive(Debug, Clone)]
pub struct MixtureMg {
    pub sigma: Matrix,
    pub delta: Matrix,
    pub c_bound: f64,
    /// Lower Cholesky factor of `Σ - Δ` (label +1).
    pub chol_plus: Matrix,
    /// Lower Cholesky factor of `Σ + Δ` (label -1).
    pub chol_minus: Matrix,
    pub sigma_sqrt: Matrix,
    pub sigma_inv_sqrt: Matrix,
    /// `Σ^{-1/2} Δ Σ^{-1/2}`
    pub delta_tilde: Matrix,
}

impl MixtureMg {
    pub fn new(sigma: Matrix, delta: Matrix, bounds: MixtureBounds) -> Result<Self> {
        check_square_symmetric(&sigma, "Sigma")?;
        check_square_symmetric(&delta, "Delta")?;
        let d = sigma.nrows();
        if delta.nrows() != d {
            bail!(Argument, "Sigma is {}x{} but Delta is {}x{}", d, d, delta.nrows(), delta.ncols());
        }
        let sig_vals = eigvals_desc(&sigma)?;
        if sig_vals[d - 1] < bounds.sigma_min || sig_vals[0] > bounds.sigma_max {
            bail!(
                Construction,
                "Sigma eigenvalues [{:e}, {:e}] outside [{:e}, {:e}]",
                sig_vals[d - 1],
                sig_vals[0],
                bounds.sigma_min,
                bounds.sigma_max
            );
        }
        let delta_op = op_norm_sym(&delta)?;
        let cap = bounds.c_bound / (d as f64).sqrt();
        if delta_op > cap * (1.0 + 1e-12) {
            bail!(Construction, "‖Delta‖_op = {:e} exceeds c_bound/√d = {:e}", delta_op, cap);
        }
        let chol_plus = cholesky(&(&sigma - &delta))
            .map_err(|_| Error::Construction("Sigma - Delta is not positive definite".into()))?
            .l();
        let chol_minus = cholesky(&(&sigma + &delta))
            .map_err(|_| Error::Construction("Sigma + Delta is not positive definite".into()))?
            .l();
        let sigma_sqrt = sym_sqrt(&sigma)?;
        let sigma_inv_sqrt = sym_inv_sqrt(&sigma)?;
        let delta_tilde = crate::linalg::symmetrize(&(&sigma_inv_sqrt * &delta * &sigma_inv_sqrt));
        Ok(Self {
            sigma,
            delta,
            c_bound: bounds.c_bound,
            chol_plus,
            chol_minus,
            sigma_sqrt,
            sigma_inv_sqrt,
            delta_tilde,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    /// Class covariances `(Σ - Δ, Σ + Δ)`.
    pub fn class_covariances(&self) -> (Matrix, Matrix) {
        (&self.sigma - &self.delta, &self.sigma + &self.delta)
    }
}

/// The two data models.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Measure {
    Qf(TargetQf),
    Mg(MixtureMg),
}

impl Measure {
    pub fn dim(&self) -> usize {
        match self {
            Self::Qf(t) => t.dim(),
            Self::Mg(m) => m.dim(),
        }
    }

    /// `E[y²]`
    pub fn label_second_moment(&self) -> f64 {
        match self {
            Self::Qf(t) => t.second_moment(),
            Self::Mg(_) => 1.0,
        }
    }
}

impl From<TargetQf> for Measure {
    fn from(t: TargetQf) -> Self {
        Self::Qf(t)
    }
}

impl From<MixtureMg> for Measure {
    fn from(m: MixtureMg) -> Self {
        Self::Mg(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    /// Diagonal with iid Exp(1) entries.
    Exp1Diag,
    Identity,
    /// `rank` leading diagonal entries equal to `scale`, the rest zero.
    Spiked { rank: usize, scale: f64 },
    Custom(Matrix),
}

/// Builds a centered quadratic target (`b0 = -Tr B`).
pub fn make_qf_target(d: usize, spec: &TargetSpec, seed: u64) -> Result<TargetQf> {
    if d == 0 {
        bail!(Argument, "dimension must be at least 1");
    }
    let b = match spec {
        TargetSpec::Exp1Diag => {
            let mut rng = rng::stream(seed, streams::TARGET);
            let diag: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            Matrix::from_diagonal(&Vector::from_vec(diag))
        }
        TargetSpec::Identity => Matrix::identity(d, d),
        TargetSpec::Spiked { rank, scale } => {
            if *rank > d {
                bail!(Argument, "spike rank {} exceeds dimension {}", rank, d);
            }
            Matrix::from_fn(d, d, |i, j| if i == j && i < *rank { *scale } else { 0.0 })
        }
        TargetSpec::Custom(m) => {
            if m.nrows() != d {
                bail!(Argument, "custom B is {}x{}, expected {}x{}", m.nrows(), m.ncols(), d, d);
            }
            m.clone()
        }
    };
    TargetQf::centered(b)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeltaSpec {
    /// Diagonal entries drawn iid uniformly from `{2, 1.5, 1} / √d`.
    Uniform3Diag,
    Custom(Matrix),
}

/// Covariance difference `Δ` described by `spec`.
pub fn make_delta(d: usize, spec: &DeltaSpec, seed: u64) -> Result<Matrix> {
    if d == 0 {
        bail!(Argument, "dimension must be at least 1");
    }
    Ok(match spec {
        DeltaSpec::Uniform3Diag => {
            let mut rng = rng::stream(seed, streams::MIXTURE);
            let levels = [2.0, 1.5, 1.0];
            let root = (d as f64).sqrt();
            let diag: Vec<f64> = (0..d).map(|_| levels[rng.random_range(0..3usize)] / root).collect();
            Matrix::from_diagonal(&Vector::from_vec(diag))
        }
        DeltaSpec::Custom(m) => {
            if m.nrows() != d {
                bail!(Argument, "custom Delta is {}x{}, expected {}x{}", m.nrows(), m.ncols(), d, d);
            }
            m.clone()
        }
    })
}

/// Mixture with `Σ = I_d` and `Δ` from `spec`.
pub fn make_mg_instance(d: usize, spec: &DeltaSpec, seed: u64) -> Result<MixtureMg> {
    let delta = make_delta(d, spec, seed)?;
    MixtureMg::new(Matrix::identity(d, d), delta, MixtureBounds::default())
}

#[derive(Debug, Clone, PartialEq)]
pub enum GammaKind {
    Isotropic,
    /// Proportional to the given PSD matrix (`B` or `Δ`).
    Aligned(Matrix),
    Custom(Matrix),
}

#[derive(Debug, Clone, Copy)]
pub enum Normalization<'a> {
    /// `Tr(Γ) = 1`
    Qf,
    /// `Tr(ΓΣ) = 1`
    Mg(&'a Matrix),
}

/// Feature covariance rescaled to its normalization.
pub fn make_gamma(d: usize, kind: &GammaKind, normalize_for: Normalization<'_>) -> Result<Matrix> {
    if d == 0 {
        bail!(Argument, "dimension must be at least 1");
    }
    let raw = match kind {
        GammaKind::Isotropic => Matrix::identity(d, d) / d as f64,
        GammaKind::Aligned(target) | GammaKind::Custom(target) => {
            check_square_symmetric(target, "Gamma alignment target")?;
            if target.nrows() != d {
                bail!(Argument, "Gamma target is {}x{}, expected {}x{}", target.nrows(), target.ncols(), d, d);
            }
            let tr = trace(target);
            if !(tr > 0.0) {
                bail!(Argument, "trace of the Gamma target must be positive (got {:e})", tr);
            }
            target / tr
        }
    };
    let scale = match normalize_for {
        Normalization::Qf => trace(&raw),
        Normalization::Mg(sigma) => {
            if sigma.nrows() != d {
                bail!(Argument, "Sigma dimension mismatch");
            }
            raw.dot(sigma)
        }
    };
    if !(scale > 0.0) {
        bail!(Argument, "Gamma normalization is not positive ({:e})", scale);
    }
    Ok(raw / scale)
}

/// A finite atomic probability distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SpectrumSpec {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            bail!(Argument, "spectrum needs matching non-empty atom and weight lists");
        }
        if atoms.iter().any(|a| !a.is_finite() || *a < 0.0) {
            bail!(Argument, "spectrum atoms must be finite and non-negative");
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            bail!(Argument, "spectrum weights must be positive");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            bail!(Argument, "spectrum weights sum to {} instead of 1", total);
        }
        Ok(Self { atoms, weights })
    }

    pub fn point(atom: f64) -> Result<Self> {
        Self::new(alloc::vec![atom], alloc::vec![1.0])
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    pub fn max_atom(&self) -> f64 {
        self.atoms.iter().fold(0.0, |m: f64, &a| m.max(a))
    }

    /// `Σ_j w_j g(t_j)`
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(&a, &w)| w * g(a)).sum()
    }
}

/// Eigenvalues of `m`, each with weight `1/d`, equal atoms merged.
pub fn empirical_spectrum(m: &Matrix) -> Result<SpectrumSpec> {
    check_square_symmetric(m, "spectrum matrix")?;
    let d = m.nrows();
    let mut vals: Vec<f64> = eigvals_desc(m)?.iter().copied().collect();
    let scale = vals.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    if vals.iter().any(|&v| v < -PSD_TOL * scale) {
        bail!(Assumption, "spectrum matrix is not positive semidefinite");
    }
    vals.reverse();
    let unit = 1.0 / d as f64;
    let mut atoms: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for v in vals {
        let v = v.max(0.0);
        match atoms.last() {
            Some(&last) if (v - last).abs() <= 1e-12 * last.abs().max(1.0) => {
                *weights.last_mut().expect("weights track atoms") += unit;
            }
            _ => {
                atoms.push(v);
                weights.push(unit);
            }
        }
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    SpectrumSpec::new(atoms, weights)
}

/// First-layer weights `W = [w_1, …, w_N]` with `w_i ~ N(0, Γ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEnsemble {
    pub w: Matrix,
    pub gamma: Matrix,
}

impl FeatureEnsemble {
    pub fn n_features(&self) -> usize {
        self.w.ncols()
    }
}

pub fn sample_features(gamma: &Matrix, n: usize, seed: u64) -> Result<FeatureEnsemble> {
    check_square_symmetric(gamma, "Gamma")?;
    let root = sym_sqrt(gamma)?;
    let mut rng = rng::stream(seed, streams::FEATURES);
    let g = gaussian_matrix(&mut rng, gamma.nrows(), n);
    Ok(FeatureEnsemble { w: root * g, gamma: gamma.clone() })
}

/// `Γ^{1/2} Σ Γ^{1/2}`, the matrix whose rescaled spectrum drives the
/// mixture random-features prediction.
pub fn whitened_feature_covariance(gamma: &Matrix, sigma: &Matrix) -> Result<Matrix> {
    let root = sym_sqrt(gamma)?;
    Ok(crate::linalg::symmetrize(&(&root * sigma * &root)))
}
