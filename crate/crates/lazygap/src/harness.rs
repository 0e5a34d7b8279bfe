//! Experiment orchestration: ρ-sweeps, SGD evolution curves, landscape
//! reports and theory tables.

use std::collections::BTreeMap;

use lazygap_core::activation::{Activation, ActivationProfile, DEFAULT_QUAD_ORDER};
use lazygap_core::dynamics::{
    critical_points_qf, eigen_gaps, hessian_quadratic_form, nn_sgd_run, nt_sgd_run, qf_gradient_norm,
    strict_saddle_certificate, subsets_up_to, NnState, NtState, SaddleCase, SgdConfig, SgdTrace,
    HESSIAN_DISPLAY_SCALE,
};
use lazygap_core::linalg::gaussian_matrix;
use lazygap_core::oracle::{
    bayes_risk_mg, nn_opt_quadmodel, nt_exact_risk_mg, nt_exact_risk_qf, quad_population_risk,
    rf_exact_risk, rf_kernel_moments_quadratic, rf_mc_moments,
};
use lazygap_core::rng::{self, derive_seed};
use lazygap_core::spectra::{make_gamma, sample_features, GammaKind, Measure, Normalization};
use lazygap_core::theory::{
    nn_mg_risk, nn_qf_risk, nt_mg_risk_isotropic, nt_qf_risk, rf_mg_risk, rf_qf_risk, RiskPrediction,
};
use lazygap_core::{Error, Matrix, Vector};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{ExperimentConfig, ExperimentKind, GammaChoice, ModelChoice};
use crate::error::{HarnessError, Result};
use crate::record::{sort_records, Companion, DiagnosticRow, LandscapeRow, RiskRecord, RunOutput, Source};

const SALT_RF: u64 = 11;
const SALT_RF_ALIGNED: u64 = 12;
const SALT_NT: u64 = 13;
const SALT_MC: u64 = 14;
const SALT_DIRECTIONS: u64 = 15;

/// Resolved inputs shared by every cell of a run.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub measure: Measure,
    pub activation: Activation,
    pub profile: ActivationProfile,
    pub hash: String,
    /// Risk of the best constant predictor, used for `risk_normalized`.
    pub trivial_risk: f64,
}

impl Context {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let measure = cfg.measure()?;
        let activation = Activation::from_name(&cfg.activation)?;
        let profile = activation.profile(DEFAULT_QUAD_ORDER)?;
        let trivial_risk = match &measure {
            Measure::Qf(t) => 2.0 * t.b.norm_squared(),
            Measure::Mg(_) => 1.0,
        };
        Ok(Self { cfg: cfg.clone(), measure, activation, profile, hash: cfg.config_hash(), trivial_risk })
    }

    pub fn d(&self) -> usize {
        self.cfg.d
    }

    pub(crate) fn normalized(&self, risk: f64) -> f64 {
        if self.trivial_risk > 0.0 {
            risk / self.trivial_risk
        } else {
            risk
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &self,
        regime: &str,
        source: Source,
        n: usize,
        seed: Option<u64>,
        steps: Option<usize>,
        samples: Option<u64>,
        risk: f64,
    ) -> RiskRecord {
        RiskRecord {
            experiment: self.cfg.kind().as_str().into(),
            model: self.cfg.model.as_str().into(),
            regime: regime.into(),
            source,
            d: self.d(),
            n,
            rho: n as f64 / self.d() as f64,
            seed,
            steps,
            samples,
            risk,
            risk_normalized: self.normalized(risk),
            config_hash: self.hash.clone(),
        }
    }

    fn gamma(&self, choice: GammaChoice) -> Result<Matrix> {
        let d = self.d();
        Ok(match (&self.measure, choice) {
            (Measure::Qf(_), GammaChoice::Isotropic) => make_gamma(d, &GammaKind::Isotropic, Normalization::Qf)?,
            (Measure::Qf(t), GammaChoice::Aligned) => {
                make_gamma(d, &GammaKind::Aligned(t.b.clone()), Normalization::Qf)?
            }
            (Measure::Mg(m), GammaChoice::Isotropic) => {
                make_gamma(d, &GammaKind::Isotropic, Normalization::Mg(&m.sigma))?
            }
            (Measure::Mg(m), GammaChoice::Aligned) => {
                make_gamma(d, &GammaKind::Aligned(m.delta.clone()), Normalization::Mg(&m.sigma))?
            }
        })
    }

    pub(crate) fn prediction(&self, regime: &str, n: usize) -> Result<RiskPrediction> {
        let d = self.d();
        let rho = n as f64 / d as f64;
        let p = match (&self.measure, regime) {
            (Measure::Qf(t), "RF") => rf_qf_risk(&t.b, &self.gamma(GammaChoice::Isotropic)?, rho, &self.profile)?,
            (Measure::Qf(t), "RF_aligned") => {
                rf_qf_risk(&t.b, &self.gamma(GammaChoice::Aligned)?, rho, &self.profile)?
            }
            (Measure::Qf(t), "NT") => nt_qf_risk(&t.b, rho, d)?,
            (Measure::Qf(t), "NN") => nn_qf_risk(t.eigenvalues_desc()?.as_slice(), n)?,
            (Measure::Mg(m), "RF") => {
                rf_mg_risk(&m.sigma, &m.delta, &self.gamma(GammaChoice::Isotropic)?, rho, &self.profile)?
            }
            (Measure::Mg(m), "RF_aligned") => {
                rf_mg_risk(&m.sigma, &m.delta, &self.gamma(GammaChoice::Aligned)?, rho, &self.profile)?
            }
            (Measure::Mg(m), "NT") => nt_mg_risk_isotropic(&m.delta, rho, d)?,
            (Measure::Mg(m), "NN") => nn_mg_risk(&m.sigma, &m.delta, n)?,
            _ => return Err(Error::Argument(format!("no prediction for regime `{regime}`")).into()),
        };
        Ok(p)
    }

    pub(crate) fn sgd_config(&self, step_size: f64, n_steps: usize, log_every: usize, seed: u64) -> SgdConfig {
        let s = &self.cfg.sgd;
        SgdConfig {
            step_size,
            n_steps,
            batch: s.batch,
            log_every,
            seed,
            decay: s.decay,
            stability_cap: s.stability_cap,
        }
    }

    fn rf_regimes(&self) -> Vec<(&'static str, GammaChoice, u64)> {
        self.cfg
            .gamma
            .iter()
            .map(|g| match g {
                GammaChoice::Isotropic => ("RF", *g, SALT_RF),
                GammaChoice::Aligned => ("RF_aligned", *g, SALT_RF_ALIGNED),
            })
            .collect()
    }

    fn theory_record(&self, regime: &str, n: usize) -> Result<RiskRecord> {
        let p = self.prediction(regime, n)?;
        let mut r = self.record(regime, Source::Theory, n, None, None, None, p.value);
        r.risk_normalized = p.normalized;
        Ok(r)
    }

    /// RF, NT and NN predictions for every grid point.
    pub fn theory_rows(&self) -> Result<Vec<RiskRecord>> {
        let mut regimes: Vec<&str> = self.rf_regimes().iter().map(|r| r.0).collect();
        regimes.extend(["NT", "NN"]);
        let mut rows = Vec::new();
        for n in self.cfg.neurons() {
            for regime in &regimes {
                rows.push(self.theory_record(regime, n)?);
            }
        }
        Ok(rows)
    }

    pub(crate) fn rf_oracle(&self, gamma: &Matrix, n: usize, seed: u64, salt: u64) -> Result<f64> {
        let w = sample_features(gamma, n, derive_seed(seed, salt))?.w;
        let moments = match self.activation {
            Activation::Quadratic => rf_kernel_moments_quadratic(&w, &self.measure)?,
            _ => {
                let act = &self.activation;
                let mc_seed = derive_seed(derive_seed(seed, salt), SALT_MC);
                rf_mc_moments(&w, |x| act.eval(x), &self.measure, self.cfg.mc_samples, mc_seed)?
            }
        };
        Ok(rf_exact_risk(&moments, None)?)
    }

    /// Isotropic `N(0, I/d)` weights for the NT parameterization.
    pub fn nt_weights(&self, n: usize, seed: u64) -> Result<Matrix> {
        let d = self.d();
        Ok(sample_features(&(Matrix::identity(d, d) / d as f64), n, derive_seed(seed, SALT_NT))?.w)
    }

    pub(crate) fn nt_oracle(&self, w: &Matrix) -> Result<f64> {
        Ok(match &self.measure {
            Measure::Qf(t) => nt_exact_risk_qf(w, &t.b)?,
            Measure::Mg(m) => nt_exact_risk_mg(w, m)?,
        })
    }

    fn nn_oracle(&self, n: usize) -> Result<f64> {
        Ok(nn_opt_quadmodel(&self.measure, n)?.1)
    }
}

fn metadata(ctx: &Context, rows: usize, extra: serde_json::Value) -> serde_json::Value {
    json!({
        "experiment": ctx.cfg.kind().as_str(),
        "model": ctx.cfg.model.as_str(),
        "config_hash": ctx.hash,
        "config": ctx.cfg,
        "rows": rows,
        "version": env!("CARGO_PKG_VERSION"),
        "details": extra,
    })
}

/// Runs whatever experiment `cfg` declares.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    match cfg.kind() {
        ExperimentKind::Sweep => run_sweep(cfg),
        ExperimentKind::SgdEvolution => run_sgd_evolution(cfg),
        ExperimentKind::Landscape => run_landscape(cfg),
        ExperimentKind::TheoryTable => run_theory_table(cfg),
        ExperimentKind::Accept => crate::accept::run_as_output(cfg),
    }
}

pub fn run_theory_table(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let ctx = Context::new(cfg)?;
    let mut records = ctx.theory_rows()?;
    sort_records(&mut records);
    let metadata = metadata(&ctx, records.len(), json!({}));
    Ok(RunOutput { records, companion: Companion::None, metadata })
}

enum Cell {
    Rf { regime: &'static str, salt: u64, n: usize, seed: u64 },
    Nt { n: usize, seed: u64 },
    Nn { n: usize },
}

/// Theory and oracle rows over the ρ grid; mixture sweeps add a Bayes row.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let ctx = Context::new(cfg)?;
    let mut records = ctx.theory_rows()?;
    let theory: Vec<RiskRecord> = records.clone();

    let gammas: BTreeMap<&str, Matrix> =
        ctx.rf_regimes().iter().map(|(r, g, _)| Ok((*r, ctx.gamma(*g)?))).collect::<Result<_>>()?;
    let mut cells = Vec::new();
    for n in cfg.neurons() {
        for &seed in &cfg.seeds {
            for (regime, _, salt) in ctx.rf_regimes() {
                cells.push(Cell::Rf { regime, salt, n, seed });
            }
            cells.push(Cell::Nt { n, seed });
        }
        cells.push(Cell::Nn { n });
    }
    let oracle: Vec<RiskRecord> = cells
        .par_iter()
        .map(|cell| {
            Ok(match *cell {
                Cell::Rf { regime, salt, n, seed } => {
                    let risk = ctx.rf_oracle(&gammas[regime], n, seed, salt)?;
                    ctx.record(regime, Source::Oracle, n, Some(seed), None, None, risk)
                }
                Cell::Nt { n, seed } => {
                    let risk = ctx.nt_oracle(&ctx.nt_weights(n, seed)?)?;
                    ctx.record("NT", Source::Oracle, n, Some(seed), None, None, risk)
                }
                Cell::Nn { n } => ctx.record("NN", Source::Oracle, n, None, None, None, ctx.nn_oracle(n)?),
            })
        })
        .collect::<Result<_>>()?;
    records.extend(oracle.iter().cloned());

    let mut details = json!({});
    if let Measure::Mg(m) = &ctx.measure {
        let (bayes, se) = bayes_risk_mg(m, cfg.bayes_samples, cfg.instance_seed)?;
        for n in cfg.neurons() {
            records.push(ctx.record("Bayes", Source::Oracle, n, None, None, None, bayes));
        }
        details = json!({ "bayes_risk": bayes, "bayes_se": se });
    }
    sort_records(&mut records);

    let diagnostics = diagnostics(&ctx, &theory, &oracle);
    let metadata = metadata(&ctx, records.len(), details);
    Ok(RunOutput { records, companion: Companion::Diagnostics(diagnostics), metadata })
}

fn diagnostics(ctx: &Context, theory: &[RiskRecord], oracle: &[RiskRecord]) -> Vec<DiagnosticRow> {
    let mut out = Vec::new();
    for t in theory {
        let matched: Vec<f64> = oracle
            .iter()
            .filter(|o| o.regime == t.regime && o.n == t.n)
            .map(|o| o.risk_normalized)
            .collect();
        if matched.is_empty() {
            continue;
        }
        let mean = matched.iter().sum::<f64>() / matched.len() as f64;
        out.push(DiagnosticRow {
            experiment: ctx.cfg.kind().as_str().into(),
            model: ctx.cfg.model.as_str().into(),
            regime: t.regime.clone(),
            d: t.d,
            n: t.n,
            rho: t.rho,
            theory: t.risk_normalized,
            oracle: mean,
            abs_diff: (mean - t.risk_normalized).abs(),
        });
    }
    out.sort_by(|a, b| a.regime.cmp(&b.regime).then(a.rho.total_cmp(&b.rho)));
    out
}

/// Starting point for the fully trained network.
pub fn nn_initial_state(ctx: &Context, n: usize, seed: u64) -> Result<NnState> {
    let s = NnState::random(ctx.d(), n, seed);
    Ok(match ctx.cfg.model {
        ModelChoice::Qf => s,
        ModelChoice::Mg => {
            let a = Vector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
            NnState::with_second_layer(s.w, a, 0.0)?
        }
    })
}

/// Final risk of a short NN run for every step size in the grid; `None`
/// marks a diverged or inadmissible step.
pub fn pilot_step_sizes(ctx: &Context, n: usize) -> Result<Vec<(f64, Option<f64>)>> {
    let s = &ctx.cfg.sgd;
    let seed = ctx.cfg.seeds[0];
    let s0 = nn_initial_state(ctx, n, seed)?;
    s.step_grid
        .par_iter()
        .map(|&eps| {
            let cfg = ctx.sgd_config(eps, s.pilot_steps, s.pilot_steps, derive_seed(seed, 1));
            match nn_sgd_run(&s0, &ctx.measure, &cfg) {
                Ok((trace, _)) => Ok((eps, trace.final_risk())),
                Err(Error::Divergence { .. }) | Err(Error::Argument(_)) => Ok((eps, None)),
                Err(e) => Err(e.into()),
            }
        })
        .collect()
}

/// Lowest final pilot risk; ties go to the smaller step.
pub fn choose_step_size(pilot: &[(f64, Option<f64>)]) -> Option<f64> {
    pilot
        .iter()
        .filter_map(|&(eps, r)| r.filter(|r| r.is_finite()).map(|r| (eps, r)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)))
        .map(|(eps, _)| eps)
}

fn trace_rows(ctx: &Context, regime: &str, n: usize, seed: u64, trace: &SgdTrace) -> Vec<RiskRecord> {
    trace
        .rows
        .iter()
        .map(|r| ctx.record(regime, Source::Sgd, n, Some(seed), Some(r.step), Some(r.samples as u64), r.risk))
        .collect()
}

fn run_or_flag(
    ctx: &Context,
    regime: &str,
    n: usize,
    seed: u64,
    result: lazygap_core::Result<SgdTrace>,
    diverged: &mut Vec<serde_json::Value>,
) -> Result<Vec<RiskRecord>> {
    match result {
        Ok(trace) => Ok(trace_rows(ctx, regime, n, seed, &trace)),
        Err(Error::Divergence { step, risk, initial }) => {
            diverged.push(json!({ "regime": regime, "seed": seed, "step": step, "initial_risk": initial }));
            let samples = (step * ctx.cfg.sgd.batch) as u64;
            let risk = if risk.is_finite() { risk } else { f64::INFINITY };
            Ok(vec![ctx.record(regime, Source::Sgd, n, Some(seed), Some(step), Some(samples), risk)])
        }
        Err(e) => Err(e.into()),
    }
}

/// NN and NT SGD traces against samples consumed, with matching theory
/// and oracle rows.
pub fn run_sgd_evolution(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let ctx = Context::new(cfg)?;
    let n = cfg.sgd_neurons();
    let (eps, pilot) = match cfg.sgd.step_size {
        Some(eps) => (eps, Vec::new()),
        None => {
            let pilot = pilot_step_sizes(&ctx, n)?;
            let eps = choose_step_size(&pilot)
                .ok_or_else(|| Error::Numeric("every pilot step size diverged".into()))?;
            (eps, pilot)
        }
    };

    let per_seed: Vec<(Vec<RiskRecord>, Vec<serde_json::Value>)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let s0 = nn_initial_state(&ctx, n, seed)?;
            let run_cfg = ctx.sgd_config(eps, cfg.sgd.n_steps, cfg.sgd.log_every, seed);
            let mut diverged = Vec::new();
            let nn = nn_sgd_run(&s0, &ctx.measure, &run_cfg).map(|(t, _)| t);
            let mut rows = run_or_flag(&ctx, "NN", n, seed, nn, &mut diverged)?;
            let nt0 = NtState::zero(s0.w.clone());
            let nt = nt_sgd_run(&nt0, &ctx.measure, &run_cfg).map(|(t, _)| t);
            rows.extend(run_or_flag(&ctx, "NT", n, seed, nt, &mut diverged)?);
            let nt_opt = ctx.nt_oracle(&s0.w)?;
            rows.push(ctx.record("NT", Source::Oracle, n, Some(seed), None, None, nt_opt));
            Ok((rows, diverged))
        })
        .collect::<Result<_>>()?;

    let mut records = vec![ctx.theory_record("NN", n)?, ctx.theory_record("NT", n)?];
    records.push(ctx.record("NN", Source::Oracle, n, None, None, None, ctx.nn_oracle(n)?));
    let mut diverged = Vec::new();
    for (rows, div) in per_seed {
        records.extend(rows);
        diverged.extend(div);
    }
    sort_records(&mut records);
    let pilot_json: Vec<_> = pilot.iter().map(|(e, r)| json!({ "step_size": e, "final_risk": r })).collect();
    let metadata = metadata(
        &ctx,
        records.len(),
        json!({ "n_neurons": n, "step_size": eps, "pilot": pilot_json, "diverged": diverged }),
    );
    Ok(RunOutput { records, companion: Companion::None, metadata })
}

/// Summary of a landscape enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeReport {
    pub rows: Vec<LandscapeRow>,
    pub delta_eig: f64,
    pub delta_sep: f64,
    pub bound: f64,
    pub global_min_form: f64,
    pub max_gradient_norm: f64,
    pub gradient_scale: f64,
}

impl LandscapeReport {
    pub fn all_certified(&self) -> bool {
        self.rows.iter().all(|r| r.certified)
    }
}

/// Enumerates every critical point `W₀ = [U_S Λ_S^{1/2}, 0] Q` with
/// `|S| ≤ min(N, d)` and certifies the non-global ones.
pub fn landscape_report(ctx: &Context) -> Result<LandscapeReport> {
    let t = match &ctx.measure {
        Measure::Qf(t) => t,
        Measure::Mg(_) => return Err(HarnessError::config("model", "landscape reports need the qf model")),
    };
    let d = ctx.d();
    let n = ctx.cfg.landscape.n_neurons;
    let (delta_eig, delta_sep) = eigen_gaps(&t.b)?;
    let bound = -4.0 * delta_eig.min(delta_sep) * HESSIAN_DISPLAY_SCALE + 1e-8;
    let gradient_scale = t.b.norm_squared().max(1.0);
    let subsets = subsets_up_to(d, n.min(d));
    let evaluated: Vec<(LandscapeRow, Option<NnState>)> = subsets
        .par_iter()
        .enumerate()
        .map(|(idx, s)| {
            let p = critical_points_qf(t, n, s, derive_seed(ctx.cfg.instance_seed, idx as u64))?;
            let gradient_norm = qf_gradient_norm(&p, t)?;
            let risk = quad_population_risk(&p.quadmodel(), &ctx.measure)?;
            let subset = s.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("-");
            let (global, certificate, case) = match strict_saddle_certificate(&p, t) {
                Ok(c) => {
                    let case = match c.case {
                        SaddleCase::MissedDirection => "missed_direction",
                        SaddleCase::WrongEigenvalue => "wrong_eigenvalue",
                    };
                    (false, Some(c.value), Some(case.to_string()))
                }
                Err(Error::Domain(_)) => (true, None, None),
                Err(e) => return Err(e.into()),
            };
            let certified = global || certificate.is_some_and(|v| v <= bound);
            let row = LandscapeRow { subset, size: s.len(), gradient_norm, risk, global, certificate, case, bound, certified };
            Ok((row, global.then_some(p)))
        })
        .collect::<Result<_>>()?;

    let mut r = rng::stream(derive_seed(ctx.cfg.instance_seed, SALT_DIRECTIONS), 0);
    let mut global_min_form = f64::INFINITY;
    for p in evaluated.iter().filter_map(|(_, p)| p.as_ref()) {
        for _ in 0..ctx.cfg.landscape.directions {
            let z = gaussian_matrix(&mut r, d, n);
            global_min_form = global_min_form.min(hessian_quadratic_form(p, t, &z)?);
        }
    }
    let rows: Vec<LandscapeRow> = evaluated.into_iter().map(|(row, _)| row).collect();
    let max_gradient_norm = rows.iter().map(|r| r.gradient_norm).fold(0.0, f64::max);
    Ok(LandscapeReport { rows, delta_eig, delta_sep, bound, global_min_form, max_gradient_norm, gradient_scale })
}

pub fn run_landscape(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let ctx = Context::new(cfg)?;
    let report = landscape_report(&ctx)?;
    let n = cfg.landscape.n_neurons;
    let mut records: Vec<RiskRecord> =
        report.rows.iter().map(|r| ctx.record("NN", Source::Oracle, n, None, None, None, r.risk)).collect();
    records.push(ctx.theory_record("NN", n)?);
    sort_records(&mut records);
    let metadata = metadata(
        &ctx,
        records.len(),
        json!({
            "critical_points": report.rows.len(),
            "all_certified": report.all_certified(),
            "delta_eig": report.delta_eig,
            "delta_sep": report.delta_sep,
            "certificate_bound": report.bound,
            "hessian_scale": HESSIAN_DISPLAY_SCALE,
            "global_min_form": report.global_min_form,
            "max_gradient_norm": report.max_gradient_norm,
        }),
    );
    Ok(RunOutput { records, companion: Companion::Landscape(report.rows), metadata })
}
