//! Exact finite-size risks at fixed `(d, N, W)`.
//!
//! Every predictor handled here is (or reduces to) a quadratic form
//! `f̂(x) = <Γ, x xᵀ> + c`, whose population risk has a closed form under
//! both data models.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

use crate::activation::ActivationProfile;
use crate::datagen::Sampler;
use crate::error::{bail, Result};
use crate::linalg::{
    asymmetry, complement_projector, eigh_desc, inner, op_norm_sym, spd_solve, symmetrize, trace, Matrix,
    Vector,
};
use crate::rng::streams;
use crate::spectra::{Measure, MixtureMg};

const SYMMETRY_TOL: f64 = 1e-12;

/// `f̂(x) = <Γ, x xᵀ> + c`
#[derive(Debug, Clone, PartialEq)]
pub struct QuadModel {
    pub gamma: Matrix,
    pub c: f64,
}

impl QuadModel {
    pub fn new(gamma: Matrix, c: f64) -> Result<Self> {
        if gamma.nrows() != gamma.ncols() {
            bail!(Argument, "Gamma must be square (got {}x{})", gamma.nrows(), gamma.ncols());
        }
        if asymmetry(&gamma) > SYMMETRY_TOL * gamma.amax().max(1.0) {
            bail!(Argument, "Gamma is not symmetric");
        }
        Ok(Self { gamma: symmetrize(&gamma), c })
    }

    pub fn zero(d: usize) -> Self {
        Self { gamma: Matrix::zeros(d, d), c: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn predict(&self, x: &Vector) -> f64 {
        (&self.gamma * x).dot(x) + self.c
    }
}

fn check_model_dim(m: &QuadModel, measure: &Measure) -> Result<()> {
    if m.dim() != measure.dim() {
        bail!(Argument, "model dimension {} does not match data dimension {}", m.dim(), measure.dim());
    }
    Ok(())
}

struct MgScalars {
    s: f64,
    p: f64,
    t_sigma: f64,
    t_delta: f64,
}

fn mg_scalars(gamma: &Matrix, mix: &MixtureMg) -> MgScalars {
    let gs = gamma * &mix.sigma;
    let gd = gamma * &mix.delta;
    MgScalars {
        s: inner(gamma, &mix.sigma),
        p: inner(gamma, &mix.delta),
        t_sigma: (&gs * &gs).trace(),
        t_delta: (&gd * &gd).trace(),
    }
}

/// Population risk `E[(y - f̂(x))²]`.
pub fn quad_population_risk(m: &QuadModel, measure: &Measure) -> Result<f64> {
    check_model_dim(m, measure)?;
    Ok(match measure {
        Measure::Qf(t) => {
            let diff = &t.b - &m.gamma;
            let shift = trace(&diff) - (m.c - t.b0);
            2.0 * diff.norm_squared() + shift * shift
        }
        Measure::Mg(mix) => {
            let k = mg_scalars(&m.gamma, mix);
            let c = m.c;
            1.0 + 2.0 * k.p + c * c + 2.0 * c * k.s + k.s * k.s + k.p * k.p + 2.0 * k.t_sigma + 2.0 * k.t_delta
        }
    })
}

/// Gradient of [`quad_population_risk`] with respect to `(Γ, c)`.
pub fn quad_population_gradient(m: &QuadModel, measure: &Measure) -> Result<(Matrix, f64)> {
    check_model_dim(m, measure)?;
    let d = m.dim();
    Ok(match measure {
        Measure::Qf(t) => {
            let diff = &m.gamma - &t.b;
            let dc = 2.0 * (trace(&diff) + m.c - t.b0);
            (diff * 4.0 + Matrix::identity(d, d) * dc, dc)
        }
        Measure::Mg(mix) => {
            let k = mg_scalars(&m.gamma, mix);
            let sgs = &mix.sigma * &m.gamma * &mix.sigma;
            let dgd = &mix.delta * &m.gamma * &mix.delta;
            let g = &mix.delta * (2.0 + 2.0 * k.p) + &mix.sigma * (2.0 * m.c + 2.0 * k.s) + sgs * 4.0 + dgd * 4.0;
            (symmetrize(&g), 2.0 * m.c + 2.0 * k.s)
        }
    })
}

/// Second moments of random features: `U = E[σσᵀ]`, `V = E[yσ]`,
/// `baseline = E[y²]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMoments {
    pub u: Matrix,
    pub v: Vector,
    pub baseline: f64,
    /// Entrywise standard errors for Monte Carlo estimates.
    pub u_se: Option<Matrix>,
    pub v_se: Option<Vector>,
    pub baseline_se: Option<f64>,
}

impl KernelMoments {
    pub fn n_features(&self) -> usize {
        self.v.len()
    }
}

fn quadratic_gram(w: &Matrix, cov: Option<&Matrix>) -> (Matrix, Vector) {
    let g = match cov {
        Some(s) => w.transpose() * s * w,
        None => w.transpose() * w,
    };
    let g = symmetrize(&g);
    let norms = g.diagonal();
    (g, norms)
}

fn add_quadratic_kernel(u: &mut Matrix, g: &Matrix, norms: &Vector, weight: f64) {
    let n = g.nrows();
    for j in 0..n {
        for i in 0..n {
            let gij = g[(i, j)];
            u[(i, j)] += weight * (2.0 * gij * gij + (norms[i] - 1.0) * (norms[j] - 1.0));
        }
    }
}

/// Closed-form moments for `σ(u) = u² - 1` and weights `W` (`d × N`).
pub fn rf_kernel_moments_quadratic(w: &Matrix, measure: &Measure) -> Result<KernelMoments> {
    let d = measure.dim();
    if w.nrows() != d || w.ncols() == 0 {
        bail!(Argument, "W must be {}xN with N ≥ 1 (got {}x{})", d, w.nrows(), w.ncols());
    }
    let n = w.ncols();
    let mut u = Matrix::zeros(n, n);
    let (v, baseline) = match measure {
        Measure::Qf(t) => {
            let (g, norms) = quadratic_gram(w, None);
            add_quadratic_kernel(&mut u, &g, &norms, 1.0);
            let bw = &t.b * w;
            let mean = t.mean();
            let v = Vector::from_fn(n, |i, _| 2.0 * w.column(i).dot(&bw.column(i)) + mean * (norms[i] - 1.0));
            (v, t.second_moment())
        }
        Measure::Mg(mix) => {
            let (plus, minus) = mix.class_covariances();
            let (gp, np) = quadratic_gram(w, Some(&plus));
            let (gm, nm) = quadratic_gram(w, Some(&minus));
            add_quadratic_kernel(&mut u, &gp, &np, 0.5);
            add_quadratic_kernel(&mut u, &gm, &nm, 0.5);
            let dw = &mix.delta * w;
            let v = Vector::from_fn(n, |i, _| -w.column(i).dot(&dw.column(i)));
            (v, 1.0)
        }
    };
    Ok(KernelMoments { u: symmetrize(&u), v, baseline, u_se: None, v_se: None, baseline_se: None })
}

/// Default conditioning ridge `1e-10 · Tr(U) / N`.
pub fn default_ridge(u: &Matrix) -> f64 {
    1e-10 * trace(u).abs() / u.nrows().max(1) as f64
}

/// Least-squares second-layer coefficients `(U + ridge I)⁻¹ V`.
pub fn rf_coefficients(moments: &KernelMoments, ridge: Option<f64>) -> Result<Vector> {
    let ridge = match ridge {
        Some(r) if r >= 0.0 && r.is_finite() => r,
        Some(r) => bail!(Argument, "ridge must be non-negative (got {})", r),
        None => default_ridge(&moments.u),
    };
    spd_solve(&moments.u, &moments.v, ridge)
}

/// `baseline - Vᵀ (U + ridge I)⁻¹ V`
pub fn rf_exact_risk(moments: &KernelMoments, ridge: Option<f64>) -> Result<f64> {
    let a = rf_coefficients(moments, ridge)?;
    Ok(moments.baseline - moments.v.dot(&a))
}

/// The random-features predictor `Σ aᵢ σ(<wᵢ, x>)` with `σ(u) = u² - 1`
/// as a quadratic model.
pub fn rf_quadmodel(w: &Matrix, a: &Vector) -> Result<QuadModel> {
    if w.ncols() != a.len() {
        bail!(Argument, "W has {} columns but {} coefficients were given", w.ncols(), a.len());
    }
    let scaled = Matrix::from_fn(w.nrows(), w.ncols(), |i, j| w[(i, j)] * a[j]);
    QuadModel::new(symmetrize(&(scaled * w.transpose())), -a.sum())
}

/// Monte Carlo moments for an arbitrary activation.
pub fn rf_mc_moments(
    w: &Matrix,
    sigma: impl Fn(f64) -> f64,
    measure: &Measure,
    n: usize,
    seed: u64,
) -> Result<KernelMoments> {
    if n < 1000 {
        bail!(Argument, "Monte Carlo moments need n ≥ 1000 (got {})", n);
    }
    let d = measure.dim();
    if w.nrows() != d || w.ncols() == 0 {
        bail!(Argument, "W must be {}xN with N ≥ 1", d);
    }
    let nf = w.ncols();
    let wt = w.transpose();
    let mut sampler = Sampler::with_stream(measure, seed, streams::MONTE_CARLO);
    let mut x = Vector::zeros(d);
    let mut proj = Vector::zeros(nf);
    let mut feat = Vector::zeros(nf);
    let mut u1 = Matrix::zeros(nf, nf);
    let mut u2 = Matrix::zeros(nf, nf);
    let mut v1 = Vector::zeros(nf);
    let mut v2 = Vector::zeros(nf);
    let (mut b1, mut b2) = (0.0, 0.0);
    for _ in 0..n {
        let y = sampler.draw(&mut x);
        wt.mul_to(&x, &mut proj);
        for i in 0..nf {
            feat[i] = sigma(proj[i]);
        }
        for j in 0..nf {
            let fj = feat[j];
            for i in 0..=j {
                let p = feat[i] * fj;
                u1[(i, j)] += p;
                u2[(i, j)] += p * p;
            }
            let q = y * fj;
            v1[j] += q;
            v2[j] += q * q;
        }
        b1 += y * y;
        b2 += y * y * y * y;
    }
    let nf64 = n as f64;
    let se = |s1: f64, s2: f64| {
        let mean = s1 / nf64;
        let var = ((s2 / nf64 - mean * mean) * nf64 / (nf64 - 1.0)).max(0.0);
        (mean, (var / nf64).sqrt())
    };
    let mut u = Matrix::zeros(nf, nf);
    let mut u_se = Matrix::zeros(nf, nf);
    for j in 0..nf {
        for i in 0..=j {
            let (m, s) = se(u1[(i, j)], u2[(i, j)]);
            u[(i, j)] = m;
            u[(j, i)] = m;
            u_se[(i, j)] = s;
            u_se[(j, i)] = s;
        }
    }
    let mut v = Vector::zeros(nf);
    let mut v_se = Vector::zeros(nf);
    for i in 0..nf {
        let (m, s) = se(v1[i], v2[i]);
        v[i] = m;
        v_se[i] = s;
    }
    let (baseline, baseline_se) = se(b1, b2);
    Ok(KernelMoments { u, v, baseline, u_se: Some(u_se), v_se: Some(v_se), baseline_se: Some(baseline_se) })
}

/// The structured approximation `U₀` of the random-features kernel.
pub fn kernel_approximation(w: &Matrix, gamma: &Matrix, profile: &ActivationProfile, measure: &Measure) -> Result<Matrix> {
    let d = measure.dim();
    if w.nrows() != d || gamma.nrows() != d || gamma.ncols() != d {
        bail!(Argument, "W and Gamma must have {} rows", d);
    }
    let df = d as f64;
    let l2sq = profile.lambda2 * profile.lambda2;
    let (g, norms, kappa) = match measure {
        Measure::Qf(_) => {
            let (g, norms) = quadratic_gram(w, None);
            let kappa = df * l2sq * gamma.norm_squared() / 2.0;
            (g, norms, kappa)
        }
        Measure::Mg(mix) => {
            let (g, norms) = quadratic_gram(w, Some(&mix.sigma));
            let sg = &mix.sigma * gamma;
            let dg = inner(&mix.delta, gamma);
            let kappa = df * l2sq * ((&sg * &sg).trace() / 2.0 + dg * dg / 4.0);
            (g, norms, kappa)
        }
    };
    let n = w.ncols();
    let mu = norms.map(|v| profile.lambda2 * (v - 1.0) / 2.0);
    let l1sq = profile.lambda1 * profile.lambda1;
    let mut u0 = Matrix::from_fn(n, n, |i, j| l1sq * g[(i, j)] + kappa / df + mu[i] * mu[j]);
    for i in 0..n {
        u0[(i, i)] += profile.lambda_tilde;
    }
    Ok(u0)
}

/// `‖U - U₀‖_op`
pub fn kernel_approx_error(
    w: &Matrix,
    gamma: &Matrix,
    profile: &ActivationProfile,
    measure: &Measure,
    u: &Matrix,
) -> Result<f64> {
    let u0 = kernel_approximation(w, gamma, profile, measure)?;
    if u.shape() != u0.shape() {
        bail!(Argument, "U is {}x{} but W has {} columns", u.nrows(), u.ncols(), w.ncols());
    }
    op_norm_sym(&symmetrize(&(u - u0)))
}

/// Asymptotic mixture moment `-λ₂ Tr(ΔΓ) / 2`, shared by every feature.
pub fn mg_v_asymptotic(gamma: &Matrix, delta: &Matrix, lambda2: f64) -> f64 {
    -lambda2 * inner(delta, gamma) / 2.0
}

/// NT risk `2‖P⊥ B P⊥‖²_F`, with `P⊥` projecting off `col(W)`.
pub fn nt_exact_risk_qf(w: &Matrix, b: &Matrix) -> Result<f64> {
    let d = b.nrows();
    if w.nrows() != d {
        bail!(Argument, "W must have {} rows (got {})", d, w.nrows());
    }
    if w.ncols() >= d {
        return Ok(0.0);
    }
    let p = complement_projector(w)?;
    Ok(2.0 * (&p * b * &p).norm_squared())
}

/// NT mixture risk `2 / (2 + ‖Δ̃‖² - ‖P⊥ Δ̃ P⊥‖²)`, with `P⊥` projecting off
/// `col(Σ^{1/2} W)`.
pub fn nt_exact_risk_mg(w: &Matrix, mix: &MixtureMg) -> Result<f64> {
    let d = mix.dim();
    if w.nrows() != d {
        bail!(Argument, "W must have {} rows (got {})", d, w.nrows());
    }
    let total = mix.delta_tilde.norm_squared();
    if w.ncols() >= d {
        return Ok(2.0 / (2.0 + total));
    }
    let p = complement_projector(&(&mix.sigma_sqrt * w))?;
    let rest = (&p * &mix.delta_tilde * &p).norm_squared();
    Ok(2.0 / (2.0 + total - rest))
}

/// Best quadratic model with `rank(Γ) ≤ N`, and its exact risk.
pub fn nn_opt_quadmodel(measure: &Measure, n: usize) -> Result<(QuadModel, f64)> {
    let d = measure.dim();
    let r = n.min(d);
    let model = match measure {
        Measure::Qf(t) => {
            t.require_psd()?;
            let gamma = truncate(&t.b, r, false)?;
            let c = t.b0 + trace(&(&t.b - &gamma));
            QuadModel { gamma, c }
        }
        Measure::Mg(mix) => {
            let shape = truncate(&mix.delta_tilde, r, true)?;
            let g0 = symmetrize(&(&mix.sigma_inv_sqrt * shape * &mix.sigma_inv_sqrt));
            let k = mg_scalars(&g0, mix);
            let denom = k.p * k.p + 2.0 * k.t_sigma + 2.0 * k.t_delta;
            if denom > 0.0 {
                let a = -k.p / denom;
                QuadModel { gamma: g0 * a, c: -a * k.s }
            } else {
                QuadModel::zero(d)
            }
        }
    };
    let risk = quad_population_risk(&model, measure)?;
    Ok((model, risk))
}

/// Rank-`r` truncation of a symmetric matrix, keeping the largest
/// eigenvalues (or the largest in magnitude). Ties keep eigen order.
fn truncate(m: &Matrix, r: usize, by_magnitude: bool) -> Result<Matrix> {
    let d = m.nrows();
    let (vals, vecs) = eigh_desc(m)?;
    let mut order: Vec<usize> = (0..d).collect();
    if by_magnitude {
        order.sort_by(|&i, &j| vals[j].abs().partial_cmp(&vals[i].abs()).unwrap_or(core::cmp::Ordering::Equal));
    }
    let mut out = Matrix::zeros(d, d);
    for &i in order.iter().take(r) {
        let u = vecs.column(i);
        out += (u * u.transpose()) * vals[i];
    }
    Ok(symmetrize(&out))
}

/// Monte Carlo estimate of the Bayes risk `1 - E[η(x)²]` and its standard
/// error.
pub fn bayes_risk_mg(mix: &MixtureMg, n: usize, seed: u64) -> Result<(f64, f64)> {
    if n < 2 {
        bail!(Argument, "Bayes risk needs at least two samples");
    }
    let d = mix.dim();
    let logdet = |l: &Matrix| 2.0 * (0..d).map(|i| l[(i, i)].ln()).sum::<f64>();
    let half_logdet_gap = 0.5 * (logdet(&mix.chol_minus) - logdet(&mix.chol_plus));
    let measure = Measure::Mg(mix.clone());
    let mut sampler = Sampler::with_stream(&measure, seed, streams::BAYES);
    let mut x = Vector::zeros(d);
    let mut z = alloc::vec![0.0; d];
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        sampler.draw(&mut x);
        let qp = lower_solve_norm_sq(&mix.chol_plus, &x, &mut z);
        let qm = lower_solve_norm_sq(&mix.chol_minus, &x, &mut z);
        // log p₊(x) - log p₋(x)
        let llr = 0.5 * (qm - qp) + half_logdet_gap;
        let eta = (0.5 * llr).tanh();
        let loss = 1.0 - eta * eta;
        s1 += loss;
        s2 += loss * loss;
    }
    let nf = n as f64;
    let mean = s1 / nf;
    let var = ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    Ok((mean, (var / nf).sqrt()))
}

/// `‖L⁻¹ x‖²` for lower-triangular `L`.
fn lower_solve_norm_sq(l: &Matrix, x: &Vector, z: &mut [f64]) -> f64 {
    let d = x.len();
    let mut acc = 0.0;
    for i in 0..d {
        let mut s = x[i];
        for k in 0..i {
            s -= l[(i, k)] * z[k];
        }
        z[i] = s / l[(i, i)];
        acc += z[i] * z[i];
    }
    acc
}
