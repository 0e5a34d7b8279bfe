//! Probabilists' Hermite polynomials and Hermite data of activation functions.

#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::quadrature::GaussianRule;

/// Highest Hermite degree accepted by [`hermite_eval`].
pub const MAX_HERMITE_DEGREE: usize = 64;

/// Default number of quadrature nodes.
pub const DEFAULT_QUAD_ORDER: usize = 200;

/// Residual variance below which an activation is treated as linear.
pub const LINEAR_TOLERANCE: f64 = 1e-10;

/// `He_k(x)` via `He_{k+1} = x He_k - k He_{k-1}`, normalized so that
/// `E[He_j He_k] = k! δ_jk` under the standard Gaussian.
pub fn hermite_eval(k: usize, x: f64) -> Result<f64> {
    if k > MAX_HERMITE_DEGREE {
        bail!(Argument, "Hermite degree {} exceeds cap {}", k, MAX_HERMITE_DEGREE);
    }
    let (mut prev, mut cur) = (1.0, x);
    if k == 0 {
        return Ok(prev);
    }
    for j in 1..k {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Named activations that can appear in configuration files.
#[derive(Debug, Clone, PartialEq)]
pub enum Activation {
    /// `x² - 1`
    Quadratic,
    Relu,
    Tanh,
    /// Piecewise-linear interpolation of a table, extended linearly past
    /// the end points.
    Table { xs: Vec<f64>, ys: Vec<f64> },
}

impl Activation {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "quadratic" => Ok(Self::Quadratic),
            "relu" => Ok(Self::Relu),
            "tanh" => Ok(Self::Tanh),
            other => Err(Error::Argument(alloc::format!("unknown activation `{other}`"))),
        }
    }

    pub fn table(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            bail!(Argument, "activation table needs at least two (x, y) pairs of equal length");
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            bail!(Argument, "activation table abscissae must be strictly increasing");
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            bail!(Argument, "activation table contains non-finite values");
        }
        Ok(Self::Table { xs, ys })
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Quadratic => "quadratic",
            Self::Relu => "relu",
            Self::Tanh => "tanh",
            Self::Table { .. } => "custom-table",
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Quadratic => x * x - 1.0,
            Self::Relu => x.max(0.0),
            Self::Tanh => x.tanh(),
            Self::Table { xs, ys } => {
                let n = xs.len();
                let seg = if x <= xs[0] {
                    0
                } else if x >= xs[n - 1] {
                    n - 2
                } else {
                    xs.partition_point(|&t| t <= x) - 1
                };
                let t = (x - xs[seg]) / (xs[seg + 1] - xs[seg]);
                ys[seg] + t * (ys[seg + 1] - ys[seg])
            }
        }
    }

    /// Points where the activation is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Relu => alloc::vec![0.0],
            Self::Table { xs, .. } => xs.clone(),
            _ => Vec::new(),
        }
    }

    pub fn profile(&self, quad_order: usize) -> Result<ActivationProfile> {
        activation_profile(self.name(), |x| self.eval(x), &self.breakpoints(), quad_order)
    }
}

/// Hermite data of an activation after centering (`σ - λ₀`).
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationProfile {
    pub name: String,
    /// Mean `E[σ(G)]` that was subtracted.
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// `E[(σ(G) - λ₀)²] - λ₁²`
    pub lambda_tilde: f64,
    /// `E[(σ(G) - λ₀)²]`
    pub second_moment: f64,
    pub quad_order: usize,
    /// False when the residual variance vanishes (linear activation).
    pub usable: bool,
}

impl ActivationProfile {
    pub fn require_usable(&self) -> Result<()> {
        if self.usable && self.lambda_tilde > 0.0 {
            Ok(())
        } else {
            Err(Error::Profile {
                name: self.name.clone(),
                reason: alloc::format!(
                    "residual variance {:e} is not positive (activation is linear)",
                    self.lambda_tilde
                ),
            })
        }
    }
}

/// Hermite coefficients of `sigma` by Gaussian quadrature.
///
/// Smooth activations use a Gauss–Hermite rule with `quad_order` nodes.
/// When `breakpoints` is non-empty the real line is split there and each
/// piece is integrated with composite Gauss–Legendre, which keeps kinks
/// such as ReLU's at machine precision.
pub fn activation_profile(
    name: &str,
    sigma: impl Fn(f64) -> f64,
    breakpoints: &[f64],
    quad_order: usize,
) -> Result<ActivationProfile> {
    if quad_order < 20 {
        bail!(Argument, "quad_order must be at least 20 (got {})", quad_order);
    }
    let rule = if breakpoints.is_empty() {
        GaussianRule::hermite(quad_order)?
    } else {
        GaussianRule::piecewise(breakpoints, (quad_order / 10).max(8))?
    };
    let mut sums = [0.0_f64; 4];
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let s = sigma(x);
        sums[0] += w * s;
        sums[1] += w * s * x;
        sums[2] += w * s * (x * x - 1.0);
        sums[3] += w * s * s;
    }
    if sums.iter().any(|v| !v.is_finite()) {
        bail!(Numeric, "non-finite quadrature sum for activation `{}`", name);
    }
    let [lambda0, lambda1, lambda2, raw_second] = sums;
    let second_moment = (raw_second - lambda0 * lambda0).max(0.0);
    let lambda_tilde = (second_moment - lambda1 * lambda1).max(0.0);
    let usable = lambda_tilde >= LINEAR_TOLERANCE * second_moment.max(1.0);
    Ok(ActivationProfile {
        name: name.to_string(),
        lambda0,
        lambda1,
        lambda2,
        lambda_tilde,
        second_moment,
        quad_order,
        usable,
    })
}
