//! One-pass SGD, gradient flow and landscape probes for the quadratic
//! network `f̂(x) = Σᵢ aᵢ <wᵢ, x>² + c` and its tangent model.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

use crate::datagen::Sampler;
use crate::error::{bail, Error, Result};
use crate::linalg::{eigh_desc, gaussian_matrix, is_finite, op_norm_sym, random_orthogonal, symmetrize, trace, Matrix, Vector};
use crate::oracle::{nn_opt_quadmodel, quad_population_gradient, quad_population_risk, QuadModel};
use crate::rng::{self, streams};
use crate::spectra::{Measure, TargetQf};

/// Risk growth factor treated as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Ratio between [`hessian_quadratic_form`] and the four-term display
/// `4Tr(WZᵀ)² + 4‖WZᵀ‖² + 4Tr(WZᵀWZᵀ) + 4<WWᵀ - B, ZZᵀ>`.
pub const HESSIAN_DISPLAY_SCALE: f64 = 2.0;

const CRITICAL_TOL: f64 = 1e-8;

/// Fully trained network. `a = None` fixes the second layer to ones.
#[derive(Debug, Clone, PartialEq)]
pub struct NnState {
    pub w: Matrix,
    pub c: f64,
    pub a: Option<Vector>,
}

impl NnState {
    pub fn new(w: Matrix, c: f64) -> Self {
        Self { w, c, a: None }
    }

    pub fn with_second_layer(w: Matrix, a: Vector, c: f64) -> Result<Self> {
        if a.len() != w.ncols() {
            bail!(Argument, "second layer has {} entries for {} neurons", a.len(), w.ncols());
        }
        Ok(Self { w, c, a: Some(a) })
    }

    /// `W` with iid `N(0, 1/d)` entries and `c = 0`.
    pub fn random(d: usize, n: usize, seed: u64) -> Self {
        let mut rng = rng::stream(seed, streams::INIT);
        let w = gaussian_matrix(&mut rng, d, n) / (d as f64).sqrt();
        Self::new(w, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn n_neurons(&self) -> usize {
        self.w.ncols()
    }

    /// `W diag(a) Wᵀ`
    pub fn gamma(&self) -> Matrix {
        match &self.a {
            None => symmetrize(&(&self.w * self.w.transpose())),
            Some(a) => {
                let scaled = Matrix::from_fn(self.w.nrows(), self.w.ncols(), |i, j| self.w[(i, j)] * a[j]);
                symmetrize(&(scaled * self.w.transpose()))
            }
        }
    }

    pub fn quadmodel(&self) -> QuadModel {
        QuadModel { gamma: self.gamma(), c: self.c }
    }

    pub fn is_finite(&self) -> bool {
        is_finite(&self.w) && self.c.is_finite() && self.a.as_ref().is_none_or(|a| a.iter().all(|v| v.is_finite()))
    }
}

/// Tangent model around frozen weights: `Γ = W Aᵀ + A Wᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NtState {
    pub w_frozen: Matrix,
    pub a: Matrix,
    pub c: f64,
}

impl NtState {
    pub fn new(w_frozen: Matrix, a: Matrix, c: f64) -> Result<Self> {
        if w_frozen.shape() != a.shape() {
            bail!(Argument, "W and A must have the same shape");
        }
        Ok(Self { w_frozen, a, c })
    }

    pub fn zero(w_frozen: Matrix) -> Self {
        let a = Matrix::zeros(w_frozen.nrows(), w_frozen.ncols());
        Self { w_frozen, a, c: 0.0 }
    }

    pub fn gamma(&self) -> Matrix {
        let m = &self.w_frozen * self.a.transpose();
        &m + m.transpose()
    }

    pub fn quadmodel(&self) -> QuadModel {
        QuadModel { gamma: self.gamma(), c: self.c }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnGradient {
    pub w: Matrix,
    pub c: f64,
    pub a: Option<Vector>,
}

fn check_state_dim(d: usize, measure: &Measure) -> Result<()> {
    if d != measure.dim() {
        bail!(Argument, "state dimension {} does not match data dimension {}", d, measure.dim());
    }
    Ok(())
}

/// Population gradient with respect to `(W, c)` (and `a` when trained).
pub fn nn_population_gradient(s: &NnState, measure: &Measure) -> Result<NnGradient> {
    check_state_dim(s.dim(), measure)?;
    let (g, dc) = quad_population_gradient(&s.quadmodel(), measure)?;
    let gw = &g * &s.w;
    let (w, a) = match &s.a {
        None => (gw * 2.0, None),
        Some(a) => {
            let n = s.n_neurons();
            let w = Matrix::from_fn(s.dim(), n, |i, j| 2.0 * gw[(i, j)] * a[j]);
            let da = Vector::from_fn(n, |j, _| s.w.column(j).dot(&gw.column(j)));
            (w, Some(da))
        }
    };
    Ok(NnGradient { w, c: dc, a })
}

/// Gradient of `(y - f̂(x))²` at a single sample.
pub fn nn_sample_gradient(s: &NnState, x: &Vector, y: f64) -> NnGradient {
    let p = s.w.transpose() * x;
    let ones;
    let a = match &s.a {
        Some(a) => a,
        None => {
            ones = Vector::from_element(p.len(), 1.0);
            &ones
        }
    };
    let f = p.iter().zip(a.iter()).map(|(p, a)| a * p * p).sum::<f64>() + s.c;
    let r = y - f;
    let q = p.component_mul(a);
    let w = x * q.transpose() * (-4.0 * r);
    let da = s.a.as_ref().map(|_| p.map(|v| -2.0 * r * v * v));
    NnGradient { w, c: -2.0 * r, a: da }
}

/// Population gradient with respect to `(A, c)`.
pub fn nt_population_gradient(s: &NtState, measure: &Measure) -> Result<(Matrix, f64)> {
    check_state_dim(s.w_frozen.nrows(), measure)?;
    let (g, dc) = quad_population_gradient(&s.quadmodel(), measure)?;
    Ok((g * &s.w_frozen * 2.0, dc))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub step_size: f64,
    pub n_steps: usize,
    pub batch: usize,
    pub log_every: usize,
    pub seed: u64,
    /// Per-step geometric step-size decay; `1` keeps the step constant.
    pub decay: f64,
    /// Upper bound on `step_size · scale`, where `scale` is `‖B‖_op` or
    /// `‖Σ‖_op` (at least one).
    pub stability_cap: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self { step_size: 0.01, n_steps: 1000, batch: 100, log_every: 100, seed: 0, decay: 1.0, stability_cap: 10.0 }
    }
}

impl SgdConfig {
    pub fn validate(&self, measure: &Measure) -> Result<()> {
        if !(self.step_size >= 0.0) || !self.step_size.is_finite() {
            bail!(Argument, "step_size must be finite and non-negative (got {})", self.step_size);
        }
        if self.batch == 0 || self.log_every == 0 {
            bail!(Argument, "batch and log_every must be at least 1");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            bail!(Argument, "decay must lie in (0, 1] (got {})", self.decay);
        }
        let scale = match measure {
            Measure::Qf(t) => op_norm_sym(&t.b)?,
            Measure::Mg(m) => op_norm_sym(&m.sigma)?,
        }
        .max(1.0);
        if self.step_size * scale > self.stability_cap {
            bail!(
                Argument,
                "step_size {} times data scale {} exceeds the stability cap {}",
                self.step_size,
                scale,
                self.stability_cap
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub samples: usize,
    /// Step index times step size (continuous time for flows).
    pub time: f64,
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SgdTrace {
    pub rows: Vec<TraceRow>,
}

impl SgdTrace {
    pub fn final_risk(&self) -> Option<f64> {
        self.rows.last().map(|r| r.risk)
    }

    pub fn initial_risk(&self) -> Option<f64> {
        self.rows.first().map(|r| r.risk)
    }
}

struct Logger {
    trace: SgdTrace,
    threshold: f64,
    initial: f64,
}

impl Logger {
    fn new(initial: f64) -> Self {
        let mut trace = SgdTrace::default();
        trace.rows.push(TraceRow { step: 0, samples: 0, time: 0.0, risk: initial });
        Self { trace, threshold: DIVERGENCE_FACTOR * initial.max(1e-12), initial }
    }

    fn log(&mut self, step: usize, samples: usize, time: f64, risk: f64) -> Result<()> {
        if !risk.is_finite() || risk > self.threshold {
            return Err(Error::Divergence { step, risk, initial: self.initial });
        }
        self.trace.rows.push(TraceRow { step, samples, time, risk });
        Ok(())
    }

    fn should_log(step: usize, every: usize, last: usize) -> bool {
        step.is_multiple_of(every) || step == last
    }
}

/// One-pass minibatch SGD on `(W, c)` (and `a` when present).
pub fn nn_sgd_run(s0: &NnState, measure: &Measure, cfg: &SgdConfig) -> Result<(SgdTrace, NnState)> {
    check_state_dim(s0.dim(), measure)?;
    cfg.validate(measure)?;
    if let Measure::Qf(t) = measure {
        if s0.a.is_none() {
            t.require_psd()?;
        }
    }
    let (d, n) = (s0.dim(), s0.n_neurons());
    let mut s = s0.clone();
    let mut sampler = Sampler::new(measure, cfg.seed);
    let mut log = Logger::new(quad_population_risk(&s.quadmodel(), measure)?);
    let mut x = Vector::zeros(d);
    let mut p = Vector::zeros(n);
    let mut q = Vector::zeros(n);
    let mut gw = Matrix::zeros(d, n);
    let mut ga = Vector::zeros(n);
    let inv_batch = 1.0 / cfg.batch as f64;
    let mut eps = cfg.step_size;
    let mut time = 0.0;
    for step in 1..=cfg.n_steps {
        gw.fill(0.0);
        ga.fill(0.0);
        let mut gc = 0.0;
        for _ in 0..cfg.batch {
            let y = sampler.draw(&mut x);
            s.w.tr_mul_to(&x, &mut p);
            let mut f = s.c;
            for j in 0..n {
                let aj = s.a.as_ref().map_or(1.0, |a| a[j]);
                f += aj * p[j] * p[j];
                q[j] = aj * p[j];
            }
            let r = y - f;
            gw.ger(-4.0 * r, &x, &q, 1.0);
            if s.a.is_some() {
                for j in 0..n {
                    ga[j] -= 2.0 * r * p[j] * p[j];
                }
            }
            gc -= 2.0 * r;
        }
        s.w.zip_apply(&gw, |w, g| *w -= eps * inv_batch * g);
        if let Some(a) = s.a.as_mut() {
            a.axpy(-eps * inv_batch, &ga, 1.0);
        }
        s.c -= eps * inv_batch * gc;
        time += eps;
        eps *= cfg.decay;
        if Logger::should_log(step, cfg.log_every, cfg.n_steps) {
            let risk = quad_population_risk(&s.quadmodel(), measure)?;
            log.log(step, step * cfg.batch, time, risk)?;
        }
    }
    Ok((log.trace, s))
}

/// One-pass minibatch SGD on the tangent model; `W` stays frozen.
pub fn nt_sgd_run(s0: &NtState, measure: &Measure, cfg: &SgdConfig) -> Result<(SgdTrace, NtState)> {
    let (d, n) = s0.w_frozen.shape();
    check_state_dim(d, measure)?;
    cfg.validate(measure)?;
    let mut s = s0.clone();
    let mut sampler = Sampler::new(measure, cfg.seed);
    let mut log = Logger::new(quad_population_risk(&s.quadmodel(), measure)?);
    let mut x = Vector::zeros(d);
    let mut p = Vector::zeros(n);
    let mut pa = Vector::zeros(n);
    let mut ga = Matrix::zeros(d, n);
    let inv_batch = 1.0 / cfg.batch as f64;
    let mut eps = cfg.step_size;
    let mut time = 0.0;
    for step in 1..=cfg.n_steps {
        ga.fill(0.0);
        let mut gc = 0.0;
        for _ in 0..cfg.batch {
            let y = sampler.draw(&mut x);
            s.w_frozen.tr_mul_to(&x, &mut p);
            s.a.tr_mul_to(&x, &mut pa);
            let f = 2.0 * p.dot(&pa) + s.c;
            let r = y - f;
            ga.ger(-4.0 * r, &x, &p, 1.0);
            gc -= 2.0 * r;
        }
        s.a.zip_apply(&ga, |a, g| *a -= eps * inv_batch * g);
        s.c -= eps * inv_batch * gc;
        time += eps;
        eps *= cfg.decay;
        if Logger::should_log(step, cfg.log_every, cfg.n_steps) {
            let risk = quad_population_risk(&s.quadmodel(), measure)?;
            log.log(step, step * cfg.batch, time, risk)?;
        }
    }
    Ok((log.trace, s))
}

/// Explicit Euler integration of the population gradient flow up to
/// time `horizon`.
pub fn gradient_flow_run(
    s0: &NnState,
    measure: &Measure,
    dt: f64,
    horizon: f64,
    log_every: usize,
) -> Result<(SgdTrace, NnState)> {
    check_state_dim(s0.dim(), measure)?;
    if !(dt > 0.0) || !(horizon >= 0.0) || !horizon.is_finite() || log_every == 0 {
        bail!(Argument, "gradient flow needs dt > 0, a finite horizon and log_every ≥ 1");
    }
    let n_steps = (horizon / dt).ceil() as usize;
    let mut s = s0.clone();
    let mut log = Logger::new(quad_population_risk(&s.quadmodel(), measure)?);
    for step in 1..=n_steps {
        let g = nn_population_gradient(&s, measure)?;
        s.w.zip_apply(&g.w, |w, g| *w -= dt * g);
        s.c -= dt * g.c;
        if let (Some(a), Some(ga)) = (s.a.as_mut(), g.a.as_ref()) {
            a.axpy(-dt, ga, 1.0);
        }
        if Logger::should_log(step, log_every, n_steps) {
            let risk = quad_population_risk(&s.quadmodel(), measure)?;
            log.log(step, 0, step as f64 * dt, risk)?;
        }
    }
    Ok((log.trace, s))
}

fn require_diagonal_psd(t: &TargetQf) -> Result<()> {
    let d = t.dim();
    let scale = t.b.amax().max(1.0);
    for j in 0..d {
        for i in 0..d {
            if i != j && t.b[(i, j)].abs() > 1e-12 * scale {
                bail!(Assumption, "critical points are constructed for diagonal B only");
            }
        }
        if t.b[(j, j)] < 0.0 {
            bail!(Assumption, "B must be positive semidefinite");
        }
    }
    Ok(())
}

/// Critical point whose `WWᵀ` keeps the diagonal entries of `B` indexed by
/// `subset`, with a seeded rotation of the neurons.
pub fn critical_points_qf(t: &TargetQf, n: usize, subset: &[usize], seed: u64) -> Result<NnState> {
    require_diagonal_psd(t)?;
    let d = t.dim();
    if subset.len() > n.min(d) {
        bail!(Argument, "subset of size {} exceeds min(N, d) = {}", subset.len(), n.min(d));
    }
    let mut seen = alloc::vec![false; d];
    for &i in subset {
        if i >= d || seen[i] {
            bail!(Argument, "subset indices must be distinct and below {}", d);
        }
        seen[i] = true;
    }
    let mut w = Matrix::zeros(d, n);
    for (slot, &i) in subset.iter().enumerate() {
        w[(i, slot)] = t.b[(i, i)].sqrt();
    }
    let mut rng = rng::stream(seed, streams::ORTHOGONAL);
    let w = w * random_orthogonal(&mut rng, n);
    let gamma = symmetrize(&(&w * w.transpose()));
    let c = t.b0 + trace(&(&t.b - gamma));
    Ok(NnState::new(w, c))
}

/// All index sets of `{0, …, d-1}` with at most `k` elements, by size then
/// lexicographically.
pub fn subsets_up_to(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for size in 0..=k.min(d) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(idx.clone());
            // advance to the next combination
            let mut pos = size;
            let mut advanced = false;
            while pos > 0 {
                pos -= 1;
                if idx[pos] < d - size + pos {
                    idx[pos] += 1;
                    for q in pos + 1..size {
                        idx[q] = idx[q - 1] + 1;
                    }
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
        }
    }
    out
}

fn gradient_scale(t: &TargetQf) -> f64 {
    t.b.norm_squared().max(1.0)
}

/// Frobenius norm of the full population gradient on the quadratic target.
pub fn qf_gradient_norm(s: &NnState, t: &TargetQf) -> Result<f64> {
    let g = nn_population_gradient(s, &Measure::Qf(t.clone()))?;
    Ok((g.w.norm_squared() + g.c * g.c).sqrt())
}

/// Second derivative of `L(W, c)` along `(Z, 0)`.
pub fn hessian_quadratic_form(s: &NnState, t: &TargetQf, z: &Matrix) -> Result<f64> {
    if s.a.is_some() {
        bail!(Argument, "the landscape is defined with the second layer fixed to ones");
    }
    if z.shape() != s.w.shape() {
        bail!(Argument, "direction must have the shape of W");
    }
    let grad = qf_gradient_norm(s, t)?;
    if grad > CRITICAL_TOL * gradient_scale(t) {
        bail!(Precondition, "state is not critical (gradient norm {:e})", grad);
    }
    Ok(hessian_form_unchecked(s, t, z))
}

fn hessian_form_unchecked(s: &NnState, t: &TargetQf, z: &Matrix) -> f64 {
    let gamma = s.gamma();
    let wz = &s.w * z.transpose();
    let dmat = &wz + wz.transpose();
    let zz = z * z.transpose();
    let m = trace(&(&t.b - &gamma)) + t.b0 - s.c;
    let tr_d = trace(&dmat);
    let cross: f64 = (&gamma - &t.b).dot(&zz);
    4.0 * dmat.norm_squared() + 8.0 * cross + 2.0 * tr_d * tr_d - 4.0 * m * trace(&zz)
}

/// `(δ^eig, δ^sep)`: smallest positive eigenvalue and smallest gap between
/// distinct eigenvalues (infinite when undefined).
pub fn eigen_gaps(b: &Matrix) -> Result<(f64, f64)> {
    let vals = eigh_desc(b)?.0;
    let scale = vals.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let tol = 1e-10 * scale;
    let delta_eig = vals.iter().filter(|&&v| v > tol).fold(f64::INFINITY, |a, &v| a.min(v));
    let mut delta_sep = f64::INFINITY;
    for k in 1..vals.len() {
        let gap = vals[k - 1] - vals[k];
        if gap > tol {
            delta_sep = delta_sep.min(gap);
        }
    }
    Ok((delta_eig, delta_sep))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaddleCase {
    /// A positive direction of `B` is missed while a neuron is unused.
    MissedDirection,
    /// A smaller eigenvalue is kept in place of a larger one.
    WrongEigenvalue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleCertificate {
    /// Unit-norm escape direction.
    pub z: Matrix,
    pub value: f64,
    pub case: SaddleCase,
}

/// Escape direction with negative curvature at a non-global critical point.
pub fn strict_saddle_certificate(s: &NnState, t: &TargetQf) -> Result<SaddleCertificate> {
    let scale = gradient_scale(t);
    let grad = qf_gradient_norm(s, t)?;
    if grad > CRITICAL_TOL * scale {
        bail!(Precondition, "state is not critical (gradient norm {:e})", grad);
    }
    let measure = Measure::Qf(t.clone());
    let risk = quad_population_risk(&s.quadmodel(), &measure)?;
    let (_, best) = nn_opt_quadmodel(&measure, s.n_neurons())?;
    if risk <= best + 1e-10 * scale {
        return Err(Error::Domain("critical point is a global minimizer".into()));
    }

    let (d, n) = s.w.shape();
    let gamma = s.gamma();
    let (g_vals, g_vecs) = eigh_desc(&gamma)?;
    let g_scale = g_vals.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let tol = 1e-10 * g_scale;
    let rank = g_vals.iter().filter(|&&v| v > tol).count();
    // projector onto the complement of range(WWᵀ)
    let mut perp = Matrix::identity(d, d);
    for k in 0..rank {
        let u = g_vecs.column(k);
        perp -= u * u.transpose();
    }
    let (m_vals, m_vecs) = eigh_desc(&symmetrize(&(&perp * &t.b * &perp)))?;
    let u: Vector = m_vecs.column(0).into_owned();
    let mu = m_vals[0];

    let mut candidates: Vec<(Matrix, SaddleCase)> = Vec::new();
    if rank < n && mu > tol {
        let wtw = symmetrize(&(s.w.transpose() * &s.w));
        let (_, vecs) = eigh_desc(&wtw)?;
        let v = vecs.column(n - 1).into_owned();
        candidates.push((&u * v.transpose(), SaddleCase::MissedDirection));
    }
    if rank > 0 {
        let lambda_j = g_vals[rank - 1];
        let e_j = g_vecs.column(rank - 1);
        if mu > lambda_j + tol {
            let v = s.w.transpose() * e_j / lambda_j.sqrt();
            candidates.push((&u * v.transpose(), SaddleCase::WrongEigenvalue));
        }
    }
    let mut best_cert: Option<SaddleCertificate> = None;
    for (z, case) in candidates {
        let norm = z.norm();
        if !(norm > 0.0) {
            continue;
        }
        let z = z / norm;
        let value = hessian_quadratic_form(s, t, &z)?;
        if best_cert.as_ref().is_none_or(|b| value < b.value) {
            best_cert = Some(SaddleCertificate { z, value, case });
        }
    }
    match best_cert {
        Some(c) if c.value < 0.0 => Ok(c),
        _ => Err(Error::Domain("no negative-curvature direction found".into())),
    }
}
