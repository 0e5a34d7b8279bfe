mod common;

use common::{diag, rel_err};
use lazygap_core::activation::{Activation, DEFAULT_QUAD_ORDER};
use lazygap_core::linalg::{trace, Matrix};
use lazygap_core::spectra::*;
use lazygap_core::theory::*;
use lazygap_core::Error;

#[test]
fn general_pipeline_reproduces_quadratic_closed_form() {
    let p = Activation::Quadratic.profile(DEFAULT_QUAD_ORDER).unwrap();
    for d in [100, 450] {
        let t = make_qf_target(d, &TargetSpec::Exp1Diag, 1).unwrap();
        let gammas = [
            make_gamma(d, &GammaKind::Isotropic, Normalization::Qf).unwrap(),
            make_gamma(d, &GammaKind::Aligned(t.b.clone()), Normalization::Qf).unwrap(),
        ];
        for g in &gammas {
            for rho in [0.1, 0.5, 1.0, 2.0, 10.0] {
                let general = rf_qf_risk(&t.b, g, rho, &p).unwrap().normalized;
                let closed = rf_qf_risk_quadratic(&t.b, g, rho).unwrap().normalized;
                assert!(rel_err(general, closed) <= 1e-8, "d={d} rho={rho}: {general} vs {closed}");
            }
        }
    }
}

#[test]
fn rf_examples() {
    let g = Matrix::identity(2, 2) / 2.0;
    let r = rf_qf_risk_quadratic(&Matrix::identity(2, 2), &g, 1.0).unwrap();
    assert!((r.normalized - 0.5).abs() < 1e-15);
    let d = 10;
    let r = rf_qf_risk_quadratic(&Matrix::identity(d, d), &(Matrix::identity(d, d) / d as f64), 1.0).unwrap();
    assert!((r.normalized - 0.5).abs() < 1e-15);
    let traceless = diag(&[1.0, -1.0, 0.5, -0.5]);
    let p = Activation::Relu.profile(DEFAULT_QUAD_ORDER).unwrap();
    let r = rf_qf_risk(&traceless, &(Matrix::identity(4, 4) / 4.0), 2.0, &p).unwrap();
    assert!((r.normalized - 1.0).abs() < 1e-14);
}

#[test]
fn rf_infinite_width_limit() {
    let t = make_qf_target(30, &TargetSpec::Exp1Diag, 2).unwrap();
    let g = make_gamma(30, &GammaKind::Isotropic, Normalization::Qf).unwrap();
    let lim = rf_qf_risk_rho_infinity(&t.b, &g).unwrap();
    let far = rf_qf_risk_quadratic(&t.b, &g, 1e10).unwrap().normalized;
    assert!((far - lim).abs() < 1e-8);
    let aligned = make_gamma(30, &GammaKind::Aligned(t.b.clone()), Normalization::Qf).unwrap();
    assert!(rf_qf_risk_rho_infinity(&t.b, &aligned).unwrap().abs() < 1e-14);
}

#[test]
fn linear_activation_is_rejected() {
    let p = lazygap_core::activation::activation_profile("identity", |x| x, &[], 40).unwrap();
    let g = Matrix::identity(3, 3) / 3.0;
    assert!(matches!(rf_qf_risk(&Matrix::identity(3, 3), &g, 1.0, &p), Err(Error::Profile { .. })));
}

#[test]
fn nt_examples_and_monotonicity() {
    let d = 50;
    let b = Matrix::identity(d, d);
    assert!((nt_qf_risk(&b, 0.5, d).unwrap().normalized - 0.5).abs() < 1e-15);
    let spiked = make_qf_target(d, &TargetSpec::Spiked { rank: 25, scale: 1.0 }, 0).unwrap();
    let tau = trace_ratio(&spiked.b).unwrap();
    assert!((tau - 0.5).abs() < 1e-15);
    let traceless = diag(&[1.0, -1.0]);
    assert!((nt_qf_risk(&traceless, 0.5, 2).unwrap().normalized - 0.25).abs() < 1e-15);
    let t = make_qf_target(d, &TargetSpec::Exp1Diag, 4).unwrap();
    let mut prev = f64::INFINITY;
    for k in 0..=40 {
        let rho = k as f64 * 0.05;
        let r = nt_qf_risk(&t.b, rho, d).unwrap().normalized;
        assert!(r <= prev + 1e-15);
        if rho >= 1.0 {
            assert_eq!(r, 0.0);
        }
        prev = r;
    }
}

#[test]
fn nn_examples() {
    assert_eq!(nn_qf_risk(&[3.0, 2.0, 1.0], 1).unwrap().value, 10.0);
    assert_eq!(nn_qf_risk(&[3.0, 2.0, 1.0], 2).unwrap().value, 2.0);
    assert_eq!(nn_qf_risk(&[3.0, 2.0, 1.0], 3).unwrap().value, 0.0);
    assert!(matches!(nn_qf_risk(&[1.0, -0.5], 1), Err(Error::Assumption(_))));
}

#[test]
fn regime_ordering_below_one() {
    let d = 200;
    let t = make_qf_target(d, &TargetSpec::Exp1Diag, 5).unwrap();
    let g = make_gamma(d, &GammaKind::Isotropic, Normalization::Qf).unwrap();
    let eig = t.eigenvalues_desc().unwrap();
    for k in 1..20 {
        let rho = k as f64 / 20.0;
        let n = (rho * d as f64).round() as usize;
        let nn = nn_qf_risk(eig.as_slice(), n).unwrap().normalized;
        let nt = nt_qf_risk(&t.b, rho, d).unwrap().normalized;
        let rf = rf_qf_risk_quadratic(&t.b, &g, rho).unwrap().normalized;
        assert!(nn < nt && nt < rf, "rho={rho}: {nn} {nt} {rf}");
    }
}

#[test]
fn mixture_examples() {
    let p = Activation::Quadratic.profile(DEFAULT_QUAD_ORDER).unwrap();
    let d = 40;
    let sigma = Matrix::identity(d, d);
    let g = Matrix::identity(d, d) / d as f64;
    let zero = Matrix::zeros(d, d);
    assert!((rf_mg_risk(&sigma, &zero, &g, 0.7, &p).unwrap().value - 1.0).abs() < 1e-14);
    let delta = make_delta(d, &DeltaSpec::Uniform3Diag, 1).unwrap();
    let tr = trace(&delta);
    for rho in [0.2, 1.0, 4.0] {
        let got = rf_mg_risk(&sigma, &delta, &g, rho, &p).unwrap().value;
        let want = (1.0 + rho) / (1.0 + rho + rho * tr * tr / (2.0 * d as f64));
        assert!(rel_err(got, want) < 1e-10);
    }
    let far = rf_mg_risk(&sigma, &delta, &g, 1e9, &p).unwrap().value;
    assert!((far - rf_mg_risk_rho_infinity(&sigma, &delta, &g).unwrap()).abs() < 1e-8);

    let f = delta.norm_squared();
    for rho in [1.0, 2.5] {
        let r = nt_mg_risk_isotropic(&delta, rho, d).unwrap().value;
        assert!((r - 1.0 / (1.0 + f / 2.0)).abs() < 1e-15);
    }
    assert_eq!(nt_mg_risk_isotropic(&delta, 0.0, d).unwrap().value, 1.0);
    assert!((nt_mg_kappa(&diag(&[0.3, -0.3]), 0.5).unwrap() - 0.75).abs() < 1e-15);

    let full = nn_mg_risk(&sigma, &delta, d).unwrap().value;
    assert!((full - 1.0 / (1.0 + f / 2.0)).abs() < 1e-14);
    assert_eq!(nn_mg_risk(&sigma, &zero, 3).unwrap().value, 1.0);
    let r = nn_mg_risk(&Matrix::identity(2, 2), &diag(&[0.2, 0.1]), 1).unwrap().value;
    assert!((r - 0.980_392_156_862_745).abs() < 1e-12);
}

#[test]
fn mixture_risks_bounded_and_monotone_in_signal() {
    let p = Activation::Quadratic.profile(DEFAULT_QUAD_ORDER).unwrap();
    let d = 60;
    let sigma = Matrix::identity(d, d);
    let g = Matrix::identity(d, d) / d as f64;
    let shape = make_delta(d, &DeltaSpec::Uniform3Diag, 2).unwrap() * 0.5;
    for rho in [0.3, 0.8, 1.5] {
        let n = (rho * d as f64) as usize;
        let mut prev = [f64::INFINITY; 3];
        for k in 0..=4 {
            let delta = &shape * (k as f64 / 4.0);
            let risks = [
                rf_mg_risk(&sigma, &delta, &g, rho, &p).unwrap().value,
                nt_mg_risk_isotropic(&delta, rho, d).unwrap().value,
                nn_mg_risk(&sigma, &delta, n).unwrap().value,
            ];
            for (r, q) in risks.iter().zip(prev.iter_mut()) {
                assert!(*r > 0.0 && *r <= 1.0);
                assert!(*r <= *q + 1e-15);
                *q = *r;
            }
        }
    }
}
