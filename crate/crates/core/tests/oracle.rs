mod common;

use common::{diag, random_mixture, random_symmetric, random_target, rel_err};
use lazygap_core::activation::{Activation, DEFAULT_QUAD_ORDER};
use lazygap_core::datagen::Sampler;
use lazygap_core::linalg::{gaussian_matrix, random_orthogonal, Matrix, Vector};
use lazygap_core::oracle::*;
use lazygap_core::rng;
use lazygap_core::spectra::*;
use lazygap_core::theory::nn_mg_risk;
use lazygap_core::Error;
use rand::Rng;

fn mc_risk(model: &QuadModel, measure: &Measure, n: usize, seed: u64) -> (f64, f64) {
    let mut s = Sampler::new(measure, seed);
    let mut x = Vector::zeros(measure.dim());
    let (mut a, mut b) = (0.0, 0.0);
    for _ in 0..n {
        let y = s.draw(&mut x);
        let e = (y - model.predict(&x)).powi(2);
        a += e;
        b += e * e;
    }
    let mean = a / n as f64;
    (mean, ((b / n as f64 - mean * mean) / n as f64).sqrt())
}

fn random_model(d: usize, seed: u64) -> QuadModel {
    let mut r = rng::stream(seed, 50);
    QuadModel::new(random_symmetric(d, 0.4, seed + 7), r.random_range(-1.0..1.0)).unwrap()
}

#[test]
fn population_risk_examples() {
    let t = make_qf_target(4, &TargetSpec::Exp1Diag, 1).unwrap();
    let qf = Measure::Qf(t.clone());
    let perfect = QuadModel::new(t.b.clone(), t.b0).unwrap();
    assert!(quad_population_risk(&perfect, &qf).unwrap().abs() < 1e-12);
    let constant = QuadModel::new(Matrix::zeros(4, 4), t.b0).unwrap();
    let tr = t.b.trace();
    assert!(rel_err(quad_population_risk(&constant, &qf).unwrap(), 2.0 * t.b.norm_squared() + tr * tr) < 1e-14);
    let mg = Measure::Mg(random_mixture(4, 2));
    assert_eq!(quad_population_risk(&QuadModel::zero(4), &mg).unwrap(), 1.0);
    assert!(quad_population_risk(&QuadModel::zero(3), &qf).is_err());
}

#[test]
fn population_risk_matches_monte_carlo() {
    let n = 1_000_000;
    for k in 0..10u64 {
        let d = 3 + (k as usize % 3);
        let measures = [Measure::Qf(random_target(d, k)), Measure::Mg(random_mixture(d, k))];
        for (j, m) in measures.iter().enumerate() {
            let model = random_model(d, 10 * k + j as u64);
            let exact = quad_population_risk(&model, m).unwrap();
            let (mc, se) = mc_risk(&model, m, n, 1000 + k);
            assert!((exact - mc).abs() <= 3.0 * se, "instance {k}/{j}: {exact} vs {mc} ± {se}");
        }
    }
}

#[test]
fn moments_one_dimensional() {
    let t = TargetQf::centered(Matrix::identity(1, 1)).unwrap();
    let w = Matrix::identity(1, 1);
    let m = rf_kernel_moments_quadratic(&w, &Measure::Qf(t)).unwrap();
    assert_eq!(m.u[(0, 0)], 2.0);
    assert_eq!(m.v[0], 2.0);
    assert!(rf_exact_risk(&m, Some(0.0)).unwrap().abs() < 1e-15);
}

#[test]
fn moments_without_signal() {
    let mix = make_mg_instance(5, &DeltaSpec::Custom(Matrix::zeros(5, 5)), 0).unwrap();
    let mut r = rng::stream(1, 0);
    let w = gaussian_matrix(&mut r, 5, 3);
    let m = rf_kernel_moments_quadratic(&w, &Measure::Mg(mix)).unwrap();
    assert!(m.v.iter().all(|&v| v == 0.0));
    assert_eq!(rf_exact_risk(&m, None).unwrap(), 1.0);
}

#[test]
fn moments_match_monte_carlo() {
    let (d, n) = (30, 20);
    let t = random_target(d, 3);
    let measure = Measure::Qf(t);
    let mut r = rng::stream(4, 0);
    let w = gaussian_matrix(&mut r, d, n) / (d as f64).sqrt();
    let exact = rf_kernel_moments_quadratic(&w, &measure).unwrap();
    let mc = rf_mc_moments(&w, |u| u * u - 1.0, &measure, 1_000_000, 5).unwrap();
    let (use_, vse) = (mc.u_se.unwrap(), mc.v_se.unwrap());
    for j in 0..n {
        for i in 0..n {
            assert!((exact.u[(i, j)] - mc.u[(i, j)]).abs() <= 4.0 * use_[(i, j)], "U[{i},{j}]");
        }
        assert!((exact.v[j] - mc.v[j]).abs() <= 4.0 * vse[j], "V[{j}]");
    }
    assert!((exact.baseline - mc.baseline).abs() <= 4.0 * mc.baseline_se.unwrap());
}

#[test]
fn mixture_moments_match_monte_carlo() {
    let (d, n) = (8, 5);
    let mix = random_mixture(d, 6);
    let measure = Measure::Mg(mix);
    let mut r = rng::stream(7, 0);
    let w = gaussian_matrix(&mut r, d, n) / (d as f64).sqrt();
    let exact = rf_kernel_moments_quadratic(&w, &measure).unwrap();
    let mc = rf_mc_moments(&w, |u| u * u - 1.0, &measure, 400_000, 8).unwrap();
    let (use_, vse) = (mc.u_se.unwrap(), mc.v_se.unwrap());
    for j in 0..n {
        for i in 0..n {
            assert!((exact.u[(i, j)] - mc.u[(i, j)]).abs() <= 4.0 * use_[(i, j)]);
        }
        assert!((exact.v[j] - mc.v[j]).abs() <= 4.0 * vse[j]);
    }
}

#[test]
fn monte_carlo_moment_properties() {
    let d = 6;
    let mix = make_mg_instance(d, &DeltaSpec::Custom(Matrix::zeros(d, d)), 0).unwrap();
    let measure = Measure::Mg(mix);
    let mut r = rng::stream(9, 0);
    let w = gaussian_matrix(&mut r, d, 4) / (d as f64).sqrt();
    let relu_centered = |u: f64| u.max(0.0) - 0.398_942_280_401_432_7;
    let a = rf_mc_moments(&w, relu_centered, &measure, 100_000, 1).unwrap();
    let va = a.v_se.clone().unwrap();
    for i in 0..4 {
        assert!(a.v[i].abs() <= 4.0 * va[i]);
    }
    let b = rf_mc_moments(&w, relu_centered, &measure, 200_000, 2).unwrap();
    let ratio = b.u_se.unwrap()[(0, 1)] / a.u_se.unwrap()[(0, 1)];
    assert!((ratio - 1.0 / 2f64.sqrt()).abs() < 0.05, "{ratio}");
    assert!(matches!(rf_mc_moments(&w, |u| u, &measure, 999, 0), Err(Error::Argument(_))));
    assert_eq!(
        rf_mc_moments(&w, |u| u * u, &measure, 2000, 3).unwrap(),
        rf_mc_moments(&w, |u| u * u, &measure, 2000, 3).unwrap()
    );
}

/// Minimizes `quad_population_risk` over second-layer coefficients by
/// recovering the quadratic form through polarization.
fn least_squares_rf(w: &Matrix, measure: &Measure) -> f64 {
    let n = w.ncols();
    let risk = |a: &Vector| quad_population_risk(&rf_quadmodel(w, a).unwrap(), measure).unwrap();
    let e = |i: usize, s: f64| {
        let mut v = Vector::zeros(n);
        v[i] = s;
        v
    };
    let l0 = risk(&Vector::zeros(n));
    let mut h = Matrix::zeros(n, n);
    let mut g = Vector::zeros(n);
    for i in 0..n {
        let (lp, lm) = (risk(&e(i, 1.0)), risk(&e(i, -1.0)));
        h[(i, i)] = (lp + lm) / 2.0 - l0;
        g[i] = (lm - lp) / 4.0;
    }
    for i in 0..n {
        for j in 0..i {
            let lij = risk(&(e(i, 1.0) + e(j, 1.0)));
            let v = (lij - risk(&e(i, 1.0)) - risk(&e(j, 1.0)) + l0) / 2.0;
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    let a = h.clone().lu().solve(&g).unwrap();
    l0 - g.dot(&a)
}

#[test]
fn exact_rf_risk_matches_least_squares_oracle() {
    for k in 0..4u64 {
        let d = 6;
        let n = 4 + 3 * k as usize;
        let mut r = rng::stream(k, 1);
        let w = gaussian_matrix(&mut r, d, n) / (d as f64).sqrt();
        for measure in [Measure::Qf(random_target(d, k)), Measure::Mg(random_mixture(d, k))] {
            let moments = rf_kernel_moments_quadratic(&w, &measure).unwrap();
            let exact = rf_exact_risk(&moments, None).unwrap();
            let ls = least_squares_rf(&w, &measure);
            assert!(rel_err(exact, ls) <= 1e-6, "{exact} vs {ls}");
            assert!(exact >= -1e-8 && exact <= moments.baseline + 1e-8);
        }
    }
}

#[test]
fn features_orthogonal_to_target_do_nothing() {
    let b = diag(&[2.0, 1.0, 0.0, 0.0]);
    let t = TargetQf::centered(b.clone()).unwrap();
    let w = Matrix::from_column_slice(4, 2, &[0.0, 0.0, 1.0, 0.3, 0.0, 0.0, -0.2, 1.1]);
    let m = rf_kernel_moments_quadratic(&w, &Measure::Qf(t)).unwrap();
    assert!(m.v.iter().all(|&v| v == 0.0));
    assert_eq!(rf_exact_risk(&m, None).unwrap(), 2.0 * b.norm_squared());
}

#[test]
fn adding_neurons_never_hurts() {
    let d = 8;
    let qf = Measure::Qf(random_target(d, 11));
    let mix = random_mixture(d, 12);
    let mg = Measure::Mg(mix.clone());
    for path in 0..20u64 {
        let mut r = rng::stream(path, 2);
        let w = gaussian_matrix(&mut r, d, 12) / (d as f64).sqrt();
        let (mut rf_q, mut rf_m, mut nt_q, mut nt_m) = (f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY);
        for n in 1..=12 {
            let wn = w.columns(0, n).into_owned();
            let a = rf_exact_risk(&rf_kernel_moments_quadratic(&wn, &qf).unwrap(), None).unwrap();
            let b = rf_exact_risk(&rf_kernel_moments_quadratic(&wn, &mg).unwrap(), None).unwrap();
            let Measure::Qf(t) = &qf else { unreachable!() };
            let c = nt_exact_risk_qf(&wn, &t.b).unwrap();
            let e = nt_exact_risk_mg(&wn, &mix).unwrap();
            assert!(a <= rf_q + 1e-8 && b <= rf_m + 1e-8 && c <= nt_q + 1e-10 && e <= nt_m + 1e-10);
            (rf_q, rf_m, nt_q, nt_m) = (a, b, c, e);
        }
    }
}

#[test]
fn kernel_approximation_cases() {
    let p = Activation::Quadratic.profile(DEFAULT_QUAD_ORDER).unwrap();
    let d = 50;
    let g = make_gamma(d, &GammaKind::Isotropic, Normalization::Qf).unwrap();
    let measure = Measure::Qf(make_qf_target(d, &TargetSpec::Exp1Diag, 0).unwrap());
    let f = sample_features(&g, 1, 3).unwrap();
    let u = rf_kernel_moments_quadratic(&f.w, &measure).unwrap().u;
    let norm = f.w.norm_squared();
    let kappa = 2.0;
    let mu = p.lambda2 * (norm - 1.0) / 2.0;
    let direct = (u[(0, 0)] - (p.lambda_tilde + kappa / d as f64 + mu * mu)).abs();
    let err = kernel_approx_error(&f.w, &g, &p, &measure, &u).unwrap();
    assert!((err - direct).abs() < 1e-12);

    let f = sample_features(&g, 3, 4).unwrap();
    let u0 = kernel_approximation(&f.w, &g, &p, &measure).unwrap();
    let mu: Vec<f64> = f.w.column_iter().map(|c| c.norm_squared() - 1.0).collect();
    assert!((u0[(0, 1)] - mu[0] * mu[1] - kappa / d as f64).abs() < 1e-12);
}

#[test]
fn mixture_moment_asymptotics() {
    let d = 300;
    let mix = make_mg_instance(d, &DeltaSpec::Uniform3Diag, 1).unwrap();
    let g = make_gamma(d, &GammaKind::Isotropic, Normalization::Mg(&mix.sigma)).unwrap();
    let f = sample_features(&g, 50, 2).unwrap();
    let exact = rf_kernel_moments_quadratic(&f.w, &Measure::Mg(mix.clone())).unwrap();
    let asymptotic = mg_v_asymptotic(&g, &mix.delta, 2.0);
    let mean = exact.v.mean();
    assert!((mean - asymptotic).abs() < 0.1 * asymptotic.abs());
}

#[test]
fn nt_qf_oracle() {
    let b = diag(&[3.0, 2.0, 1.0]);
    let w = Matrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    assert!((nt_exact_risk_qf(&w, &b).unwrap() - 2.0).abs() < 1e-14);
    let mut r = rng::stream(3, 0);
    let wide = gaussian_matrix(&mut r, 3, 3);
    assert_eq!(nt_exact_risk_qf(&wide, &b).unwrap(), 0.0);
    let d = 12;
    let bb = random_symmetric(d, 1.0, 5);
    let w = gaussian_matrix(&mut r, d, 5);
    let q = random_orthogonal(&mut r, 5);
    assert!(rel_err(nt_exact_risk_qf(&(&w * q), &bb).unwrap(), nt_exact_risk_qf(&w, &bb).unwrap()) < 1e-10);
    let mut deficient = w.clone();
    let c0 = deficient.column(0).into_owned();
    deficient.set_column(1, &c0);
    assert!(nt_exact_risk_qf(&deficient, &bb).is_err());
}

#[test]
fn nt_mg_oracle() {
    let d = 6;
    let mix = random_mixture(d, 3);
    let mut r = rng::stream(2, 0);
    let w = gaussian_matrix(&mut r, d, d);
    let full = 2.0 / (2.0 + mix.delta_tilde.norm_squared());
    assert!(rel_err(nt_exact_risk_mg(&w, &mix).unwrap(), full) < 1e-14);
    let none = make_mg_instance(d, &DeltaSpec::Custom(Matrix::zeros(d, d)), 0).unwrap();
    assert_eq!(nt_exact_risk_mg(&w.columns(0, 2).into_owned(), &none).unwrap(), 1.0);
}

#[test]
fn nn_opt_qf() {
    let t = TargetQf::centered(diag(&[3.0, 2.0, 1.0])).unwrap();
    let m = Measure::Qf(t);
    assert!((nn_opt_quadmodel(&m, 2).unwrap().1 - 2.0).abs() < 1e-12);
    assert!(nn_opt_quadmodel(&m, 3).unwrap().1.abs() < 1e-12);
    assert!(nn_opt_quadmodel(&m, 5).unwrap().1.abs() < 1e-12);
    let spiked = Measure::Qf(make_qf_target(10, &TargetSpec::Spiked { rank: 4, scale: 2.0 }, 0).unwrap());
    let mut prev = f64::INFINITY;
    for n in 0..=10 {
        let r = nn_opt_quadmodel(&spiked, n).unwrap().1;
        assert!(r <= prev + 1e-12);
        if n >= 4 {
            assert!(r.abs() < 1e-12);
        }
        prev = r;
    }
    let indefinite = Measure::Qf(TargetQf::centered(diag(&[1.0, -1.0])).unwrap());
    assert!(matches!(nn_opt_quadmodel(&indefinite, 1), Err(Error::Assumption(_))));
}

#[test]
fn nn_opt_mg_beats_random_search() {
    let d = 10;
    let mix = random_mixture(d, 8);
    let measure = Measure::Mg(mix);
    for rank in [1, 3, 6] {
        let (_, best) = nn_opt_quadmodel(&measure, rank).unwrap();
        let mut r = rng::stream(rank as u64, 3);
        for trial in 0..100 {
            let u = gaussian_matrix(&mut r, d, rank);
            let scale: f64 = r.random_range(-0.3..0.3) / d as f64;
            let gamma = &u * u.transpose() * scale;
            let c: f64 = r.random_range(-1.0..1.0);
            let risk = quad_population_risk(&QuadModel::new(gamma, c).unwrap(), &measure).unwrap();
            assert!(best <= risk, "rank {rank} trial {trial}: {best} > {risk}");
        }
    }
}

#[test]
fn bayes_risk_cases() {
    let d = 3;
    let none = make_mg_instance(d, &DeltaSpec::Custom(Matrix::zeros(d, d)), 0).unwrap();
    let (r, se) = bayes_risk_mg(&none, 1000, 0).unwrap();
    assert_eq!((r, se), (1.0, 0.0));

    let one = MixtureMg::new(Matrix::identity(1, 1), Matrix::identity(1, 1) * 0.5, MixtureBounds::default()).unwrap();
    let (r, se) = bayes_risk_mg(&one, 200_000, 1).unwrap();
    let dens = |x: f64, v: f64| (-x * x / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
    let steps = 400_000;
    let h = 40.0 / steps as f64;
    let mut integral = 0.0;
    for k in 0..=steps {
        let x = -20.0 + k as f64 * h;
        let (p, q) = (dens(x, 0.5), dens(x, 1.5));
        let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
        integral += w * h * 0.5 * (p - q).powi(2) / (p + q);
    }
    assert!((r - (1.0 - integral)).abs() <= 3.0 * se, "{r} vs {}", 1.0 - integral);

    let mix = make_mg_instance(20, &DeltaSpec::Uniform3Diag, 2).unwrap();
    let (b, se) = bayes_risk_mg(&mix, 50_000, 3).unwrap();
    let nn = nn_mg_risk(&mix.sigma, &mix.delta, 20).unwrap().value;
    assert!(b <= nn + 3.0 * se);
}
