#![allow(dead_code)]

use lazygap_core::linalg::{gaussian_matrix, Matrix, Vector};
use lazygap_core::rng;
use lazygap_core::spectra::{MixtureBounds, MixtureMg, TargetQf};
use rand::Rng;

pub fn diag(v: &[f64]) -> Matrix {
    Matrix::from_diagonal(&Vector::from_vec(v.to_vec()))
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Random symmetric `d × d` matrix with `N(0, scale²)` entries.
pub fn random_symmetric(d: usize, scale: f64, seed: u64) -> Matrix {
    let mut r = rng::stream(seed, 99);
    let g = gaussian_matrix(&mut r, d, d);
    (&g + g.transpose()) * (scale / 2.0)
}

/// Random target with general `b0`.
pub fn random_target(d: usize, seed: u64) -> TargetQf {
    let mut r = rng::stream(seed, 98);
    let b0: f64 = r.random_range(-1.0..1.0);
    TargetQf::new(random_symmetric(d, 0.5, seed), b0).unwrap()
}

/// Random mixture with non-identity `Σ` and small `Δ`.
pub fn random_mixture(d: usize, seed: u64) -> MixtureMg {
    let mut r = rng::stream(seed, 97);
    let g = gaussian_matrix(&mut r, d, d) / (d as f64).sqrt();
    let sigma = Matrix::identity(d, d) + &g * g.transpose() * 0.5;
    let delta = random_symmetric(d, 0.3 / (d as f64).sqrt(), seed + 1);
    MixtureMg::new(sigma, delta, MixtureBounds { c_bound: 10.0, ..Default::default() }).unwrap()
}
