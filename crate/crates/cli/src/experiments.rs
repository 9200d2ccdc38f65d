//! The experiments behind each subcommand. Every function computes its
//! report, writes its files into the output directory and returns the report.

use std::collections::BTreeMap;

use anyhow::Result;
use momlab_core::analysis::{
    descent_decomposition, descent_monte_carlo, fit_scaling_exponent, paired_differences, run_ensemble,
    weak_distance, Bootstrap, CellSummary, Experiment, Method, MomentumInit, Pairing, SampleMatrix, ScalingFit,
    TestFunction, WarmupEstimate, WarmupMoments, WarmupOracle, WeakDistance,
};
use momlab_core::landscape::ManifoldSpec;
use momlab_core::optim::{convert_standard_to_ema, Schedule};
use momlab_core::sde::{PhiMode, SdeKind, SdeSpec, TimeSchedule};
use serde::Serialize;

use crate::config::{ConfigError, MethodName, RunConfig};
use crate::output::{num, OutputDir};
use crate::svg::{line_plot, Series};

pub type Divergences = BTreeMap<String, usize>;

const SUMMARY_HEADER: [&str; 6] = ["step", "method", "h_name", "mean", "ci_lo", "ci_hi"];

fn bootstrap(cfg: &RunConfig) -> Bootstrap {
    Bootstrap {
        resamples: cfg.record.bootstrap_resamples,
        ..Bootstrap::default()
    }
}

fn summary_rows(method: &str, cells: &[CellSummary]) -> Vec<Vec<String>> {
    cells
        .iter()
        .map(|c| {
            vec![
                c.step.to_string(),
                method.to_string(),
                c.h.clone(),
                num(c.mean),
                num(c.ci_lo),
                num(c.ci_hi),
            ]
        })
        .collect()
}

fn x0(cfg: &RunConfig) -> Result<Vec<f64>, ConfigError> {
    cfg.init
        .as_ref()
        .map(|i| i.x0.clone())
        .ok_or_else(|| ConfigError("[init] block with x0 is required".into()))
}

fn m0(cfg: &RunConfig) -> MomentumInit {
    match cfg.init.as_ref().and_then(|i| i.m0.clone()) {
        Some(m0) => MomentumInit::Fixed { m0 },
        None => MomentumInit::Zero,
    }
}

fn method_label(m: MethodName) -> &'static str {
    match m {
        MethodName::Sgd => "sgd",
        MethodName::Sgdm => "sgdm",
        MethodName::SgdmStandard => "sgdm_standard",
        MethodName::GradientFlow => "gradient_flow",
        MethodName::Sde => "sde",
        MethodName::UnderdampedSde => "underdamped_sde",
    }
}

/// Writes every seed's recorded states as little-endian `f64`: header
/// `MOMLAB01`, then `n_seeds`, `n_records`, `dim` as `u64`, then the states
/// seed by seed, NaN after a divergence.
fn dump_trajectories(exp: &Experiment, n_seeds: usize, out: &mut OutputDir, name: &str) -> Result<()> {
    use rayon::prelude::*;
    let steps = exp.record_steps();
    let d = exp.x0.len();
    let rows: Vec<Vec<f64>> = (0..n_seeds)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![f64::NAN; steps.len() * d];
            let (recorded, states, _) = exp.trajectory(i)?;
            for (s, x) in states.iter().enumerate() {
                debug_assert_eq!(recorded[s], steps[s]);
                row[s * d..(s + 1) * d].copy_from_slice(x);
            }
            Ok(row)
        })
        .collect::<momlab_core::Result<_>>()?;
    let mut bytes = b"MOMLAB01".to_vec();
    for v in [n_seeds, steps.len(), d] {
        bytes.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for row in rows {
        for v in row {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_bytes(name, &bytes)
}

#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub methods: Vec<String>,
    pub steps: usize,
    pub summaries: BTreeMap<String, Vec<CellSummary>>,
    pub divergences: Divergences,
}

pub fn simulate(cfg: &RunConfig, out: &mut OutputDir, dump: bool) -> Result<SimulateReport> {
    let sim = cfg.simulate.as_ref().expect("validated");
    let schedule = cfg.ema_schedule()?;
    let k = cfg.steps()?;
    let x0 = x0(cfg)?;
    let d = x0.len();
    let sigma = cfg.oracle.sigma;
    let hs = cfg.test_functions(d);
    let bs = bootstrap(cfg);
    let mut report = SimulateReport {
        methods: Vec::new(),
        steps: k,
        summaries: BTreeMap::new(),
        divergences: Divergences::new(),
    };
    let mut ensemble_rows = Vec::new();
    for &m in &sim.methods {
        let label = method_label(m);
        // continuous methods run `substeps` integration steps per optimizer step
        let (method, substeps) = match m {
            MethodName::Sgd => (
                Method::Sgd {
                    oracle: cfg.oracle(sigma)?,
                    schedule: schedule.clone(),
                },
                1,
            ),
            MethodName::Sgdm => (
                Method::Sgdm {
                    oracle: cfg.oracle(sigma)?,
                    schedule: schedule.clone(),
                },
                1,
            ),
            MethodName::SgdmStandard => (
                Method::SgdmStandard {
                    oracle: cfg.oracle(sigma)?,
                    schedule: cfg.standard()?,
                },
                1,
            ),
            MethodName::GradientFlow | MethodName::Sde | MethodName::UnderdampedSde => {
                let eta0 = schedule.eta(0);
                if !(eta0 > 0.0) {
                    return Err(ConfigError("schedule.eta: continuous methods need eta > 0".into()).into());
                }
                let lambda = TimeSchedule::learning_rate(&schedule, eta0);
                let kind = match m {
                    MethodName::GradientFlow => SdeKind::GradientFlow,
                    MethodName::Sde => SdeKind::FirstOrder { lambda },
                    _ => SdeKind::Underdamped {
                        lambda,
                        gamma: TimeSchedule::momentum_rate(&schedule, eta0),
                    },
                };
                let spec = SdeSpec {
                    kind,
                    landscape: cfg.landscape.clone().expect("validated"),
                    noise: cfg.oracle.noise.clone(),
                    noise_scale: sigma * eta0.sqrt(),
                    dt: eta0 / sim.sde_substeps as f64,
                    horizon: k as f64 * eta0,
                };
                (Method::Sde { spec }, sim.sde_substeps)
            }
        };
        let exp = Experiment {
            method,
            x0: x0.clone(),
            m0: m0(cfg),
            steps: k,
            stride: substeps,
            seed: cfg.seed,
        };
        exp.validate()?;

        let (steps, states, diverged) = exp.trajectory(0)?;
        let mut header = vec!["step".to_string()];
        header.extend((0..d).map(|i| format!("x{i}")));
        let rows: Vec<Vec<String>> = steps
            .iter()
            .zip(&states)
            .map(|(s, x)| {
                let mut r = vec![(s / substeps).to_string()];
                r.extend(x.iter().map(|v| num(*v)));
                r
            })
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        out.write_csv(&format!("trajectory_{label}.csv"), &header, &rows)?;

        if cfg.n_seeds == 1 {
            report.divergences.insert(label.into(), diverged as usize);
            if diverged {
                return Err(momlab_core::Error::AllDiverged {
                    n_seeds: 1,
                    context: format!("{label} trajectory"),
                }
                .into());
            }
        } else {
            let exp = Experiment {
                stride: cfg.record.stride * substeps,
                ..exp
            };
            let mut samples = run_ensemble(&exp, &hs, cfg.n_seeds)?;
            for s in samples.steps.iter_mut() {
                *s /= substeps;
            }
            report.divergences.insert(label.into(), samples.divergence_count());
            if cfg.record.summaries {
                let cells = samples.summarize(&bs)?;
                ensemble_rows.extend(summary_rows(label, &cells));
                report.summaries.insert(label.into(), cells);
            }
            if dump {
                dump_trajectories(&exp, cfg.n_seeds, out, &format!("trajectories_{label}.bin"))?;
            }
        }
        report.methods.push(label.into());
    }
    if cfg.n_seeds > 1 && cfg.record.summaries {
        out.write_csv("ensemble.csv", &SUMMARY_HEADER, &ensemble_rows)?;
    }
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct WarmupReport {
    pub estimates: Vec<WarmupEstimate>,
    pub closed_form: Vec<WarmupMoments>,
}

pub fn warmup(cfg: &RunConfig, out: &mut OutputDir) -> Result<WarmupReport> {
    let w = cfg.warmup.as_ref().expect("validated");
    let oracle = WarmupOracle {
        c: w.c.clone(),
        eta: w.eta,
        beta: w.beta,
        sigma: w.sigma,
        z0: w.z0.clone(),
    };
    let estimates = oracle.estimate(&w.ks, cfg.n_seeds, cfg.seed)?;
    let closed_form: Vec<WarmupMoments> = w.ks.iter().map(|&k| oracle.moments(k)).collect();
    let mut rows = Vec::new();
    for (e, m) in estimates.iter().zip(&closed_form) {
        let mut push = |name: String, emp: f64, exact: f64| {
            rows.push(vec![e.k.to_string(), name, num(emp), num(exact)]);
        };
        for j in 0..w.c.len() {
            push(format!("mean_z[{j}]"), e.mean_z[j], m.mean_z[j]);
            push(format!("mean_x[{j}]"), e.mean_x[j], m.mean_x[j]);
        }
        push("var_z".into(), e.var_z, m.var_z);
        push("var_x".into(), e.var_x, m.var_x);
        push("step_var_sgd".into(), e.step_var_sgd, m.step_var_sgd);
        push("step_var_sgdm".into(), e.step_var_sgdm, m.step_var_sgdm);
        push(
            "step_var_ratio".into(),
            e.step_var_sgdm / e.step_var_sgd,
            m.step_var_sgdm / m.step_var_sgd,
        );
    }
    out.write_csv("warmup.csv", &["k", "statistic", "empirical", "closed_form"], &rows)?;
    Ok(WarmupReport { estimates, closed_form })
}

#[derive(Debug, Serialize)]
pub struct WeakRow {
    pub alpha: f64,
    pub eta: f64,
    pub beta: f64,
    pub sigma: f64,
    pub steps: usize,
    pub distance: WeakDistance,
    pub diverged_sgd: usize,
    pub diverged_sgdm: usize,
}

#[derive(Debug, Serialize)]
pub struct WeakFit {
    pub alpha: f64,
    pub fit: Option<ScalingFit>,
}

#[derive(Debug, Serialize)]
pub struct WeakApproxReport {
    pub rows: Vec<WeakRow>,
    pub fits: Vec<WeakFit>,
    pub divergences: Divergences,
}

/// SGDM with `1 − β = λη^α` against SGD with the same (averaged) learning
/// rate, sharing gradient noise seed by seed.
pub fn weak_approx(cfg: &RunConfig, out: &mut OutputDir) -> Result<WeakApproxReport> {
    let w = cfg.weak_approx.as_ref().expect("validated");
    let x0 = x0(cfg)?;
    let hs = cfg.test_functions(x0.len());
    let bs = bootstrap(cfg);
    let mut report = WeakApproxReport {
        rows: Vec::new(),
        fits: Vec::new(),
        divergences: Divergences::new(),
    };
    let mut summary = Vec::new();
    for &alpha in &w.alphas {
        for &eta in &w.etas {
            let steps = (w.horizon / eta).round() as usize;
            let beta = 1.0 - w.lambda * eta.powf(alpha);
            let sigma = cfg.oracle.sigma * eta.powf(w.sigma_power);
            let oracle = cfg.oracle(sigma)?;
            let sgdm_schedule = Schedule::constant(eta, beta, steps)?;
            let sgd_schedule = momlab_core::coupling::AveragedSchedule::new(&sgdm_schedule).as_sgd_schedule();
            let exp = |method| Experiment {
                method,
                x0: x0.clone(),
                m0: m0(cfg),
                steps,
                stride: cfg.record.stride,
                seed: cfg.seed,
            };
            let a = run_ensemble(
                &exp(Method::Sgdm {
                    oracle: oracle.clone(),
                    schedule: sgdm_schedule,
                }),
                &hs,
                cfg.n_seeds,
            )?;
            let b = run_ensemble(
                &exp(Method::Sgd {
                    oracle,
                    schedule: sgd_schedule,
                }),
                &hs,
                cfg.n_seeds,
            )?;
            let distance = weak_distance(&a, &b, &bs, Pairing::Paired)?;
            if cfg.record.summaries {
                for (m, s) in [("sgdm", &a), ("sgd", &b)] {
                    let label = format!("{m}_alpha{alpha}_eta{eta}");
                    summary.extend(summary_rows(&label, &s.summarize(&bs)?));
                }
            }
            let tag = format!("alpha{alpha}_eta{eta}");
            report.divergences.insert(format!("sgdm_{tag}"), a.divergence_count());
            report.divergences.insert(format!("sgd_{tag}"), b.divergence_count());
            report.rows.push(WeakRow {
                alpha,
                eta,
                beta,
                sigma,
                steps,
                diverged_sgd: b.divergence_count(),
                diverged_sgdm: a.divergence_count(),
                distance,
            });
        }
        let pairs: Vec<(f64, f64)> = report
            .rows
            .iter()
            .filter(|r| r.alpha == alpha)
            .map(|r| (r.eta, r.distance.d))
            .collect();
        let fit = if pairs.len() < 3 {
            log::warn!("alpha = {alpha}: {} learning rate(s), slope omitted", pairs.len());
            None
        } else {
            match fit_scaling_exponent(&pairs) {
                Ok(f) => Some(f),
                Err(e) => {
                    log::warn!("alpha = {alpha}: slope omitted ({e})");
                    None
                }
            }
        };
        report.fits.push(WeakFit { alpha, fit });
    }

    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.alpha),
                num(r.eta),
                num(r.beta),
                r.steps.to_string(),
                num(r.distance.d),
                num(r.distance.ci_lo),
                num(r.distance.ci_hi),
                r.distance.argmax_step.to_string(),
                r.distance.argmax_h.clone(),
                r.diverged_sgd.to_string(),
                r.diverged_sgdm.to_string(),
            ]
        })
        .collect();
    out.write_csv(
        "weak_approx.csv",
        &[
            "alpha",
            "eta",
            "beta",
            "steps",
            "D",
            "ci_lo",
            "ci_hi",
            "argmax_step",
            "argmax_h",
            "diverged_sgd",
            "diverged_sgdm",
        ],
        &rows,
    )?;
    let slope_rows: Vec<Vec<String>> = report
        .fits
        .iter()
        .filter_map(|f| {
            f.fit
                .as_ref()
                .map(|fit| vec![num(f.alpha), num(fit.slope), num(fit.stderr), fit.used.to_string()])
        })
        .collect();
    out.write_csv("weak_approx_slopes.csv", &["alpha", "slope", "stderr", "n_points"], &slope_rows)?;
    if cfg.record.summaries {
        out.write_csv("ensemble.csv", &SUMMARY_HEADER, &summary)?;
    }
    let series: Vec<Series> = w
        .alphas
        .iter()
        .map(|&alpha| Series {
            name: format!("alpha = {alpha}"),
            points: report
                .rows
                .iter()
                .filter(|r| r.alpha == alpha)
                .map(|r| (r.eta, r.distance.d))
                .collect(),
        })
        .collect();
    let svg = line_plot("SGDM vs SGD weak distance", "eta", "D(eta)", &series, true, true);
    out.write_bytes("weak_approx.svg", svg.as_bytes())?;
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct SvagRow {
    pub ell: f64,
    pub steps: usize,
    pub sgd: Vec<CellSummary>,
    pub sgdm: Vec<CellSummary>,
    /// Final-step `Ê h(SGDM) − Ê h(SGD)` with paired intervals.
    pub gap: Vec<CellSummary>,
}

#[derive(Debug, Serialize)]
pub struct SvagReport {
    pub rows: Vec<SvagRow>,
    pub divergences: Divergences,
}

fn final_cells(cells: Vec<CellSummary>, last: usize) -> Vec<CellSummary> {
    cells.into_iter().filter(|c| c.step == last).collect()
}

/// For each `ℓ`: SGD and SGDM with learning rate `η/ℓ` for `Kℓ` steps under
/// SVAG(`ℓ`).
pub fn svag_sweep(cfg: &RunConfig, out: &mut OutputDir) -> Result<SvagReport> {
    let s = cfg.svag.as_ref().expect("validated");
    let x0 = x0(cfg)?;
    let hs = cfg.test_functions(x0.len());
    let bs = bootstrap(cfg);
    let mut report = SvagReport {
        rows: Vec::new(),
        divergences: Divergences::new(),
    };
    for &ell in &s.ells {
        let steps = (s.steps as f64 * ell).round() as usize;
        let oracle = cfg.oracle(cfg.oracle.sigma)?.with_svag(ell)?;
        let lr = s.eta / ell;
        let exp = |method| Experiment {
            method,
            x0: x0.clone(),
            m0: m0(cfg),
            steps,
            stride: steps,
            seed: cfg.seed,
        };
        let a = run_ensemble(
            &exp(Method::Sgdm {
                oracle: oracle.clone(),
                schedule: Schedule::constant(lr, s.beta, steps)?,
            }),
            &hs,
            cfg.n_seeds,
        )?;
        let b = run_ensemble(
            &exp(Method::Sgd {
                oracle,
                schedule: Schedule::constant(lr, 0.0, steps)?,
            }),
            &hs,
            cfg.n_seeds,
        )?;
        report.divergences.insert(format!("sgdm_ell{ell}"), a.divergence_count());
        report.divergences.insert(format!("sgd_ell{ell}"), b.divergence_count());
        report.rows.push(SvagRow {
            ell,
            steps,
            sgd: final_cells(b.summarize(&bs)?, steps),
            sgdm: final_cells(a.summarize(&bs)?, steps),
            gap: final_cells(paired_differences(&a, &b, &bs)?, steps),
        });
    }
    let mut rows = Vec::new();
    let mut gaps = Vec::new();
    for r in &report.rows {
        for (m, cells) in [("sgd", &r.sgd), ("sgdm", &r.sgdm)] {
            for c in cells {
                rows.push(vec![
                    num(r.ell),
                    m.to_string(),
                    r.steps.to_string(),
                    c.h.clone(),
                    num(c.mean),
                    num(c.ci_lo),
                    num(c.ci_hi),
                ]);
            }
        }
        for c in &r.gap {
            gaps.push(vec![num(r.ell), c.h.clone(), num(c.mean), num(c.ci_lo), num(c.ci_hi)]);
        }
    }
    out.write_csv(
        "svag_sweep.csv",
        &["ell", "method", "steps", "h_name", "mean", "ci_lo", "ci_hi"],
        &rows,
    )?;
    out.write_csv("svag_gap.csv", &["ell", "h_name", "sgdm_minus_sgd", "ci_lo", "ci_hi"], &gaps)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SlowRow {
    /// `None` for the slow SDE, which does not depend on `η`.
    pub eta: Option<f64>,
    pub method: String,
    pub k: usize,
    pub cell: CellSummary,
}

#[derive(Debug, Serialize)]
pub struct SlowSdeReport {
    pub rows: Vec<SlowRow>,
    pub max_projection_distance: f64,
    pub divergences: Divergences,
}

impl SlowSdeReport {
    pub fn get(&self, eta: Option<f64>, method: &str, h: &str) -> Option<&CellSummary> {
        self.rows
            .iter()
            .find(|r| r.eta == eta && r.method == method && r.cell.h == h)
            .map(|r| &r.cell)
    }
}

/// SGDM (`1 − β = λη^α`) and SGD at `k = ⌊t/η²⌋` against the slow SDE on
/// the sphere at time `t`.
pub fn slow_sde(cfg: &RunConfig, out: &mut OutputDir) -> Result<SlowSdeReport> {
    let s = cfg.slow_sde.as_ref().expect("validated");
    let landscape = cfg.landscape.clone().expect("validated");
    let manifold = ManifoldSpec::new(landscape.clone())?;
    let x0 = x0(cfg)?;
    let hs = cfg.record.test_functions.clone().unwrap_or_else(|| {
        vec![
            TestFunction::Coordinate { index: 0 },
            TestFunction::Polynomial {
                index: 0,
                coeffs: vec![0.0, 0.0, 1.0],
            },
        ]
    });
    let bs = bootstrap(cfg);
    let sigma = cfg.oracle.sigma;
    let mut report = SlowSdeReport {
        rows: Vec::new(),
        max_projection_distance: 0.0,
        divergences: Divergences::new(),
    };
    let push = |report: &mut SlowSdeReport, eta: Option<f64>, m: &str, samples: &SampleMatrix| -> Result<()> {
        let last = *samples.steps.last().unwrap();
        for cell in final_cells(samples.summarize(&bs)?, last) {
            report.rows.push(SlowRow {
                eta,
                method: m.to_string(),
                k: last,
                cell,
            });
        }
        Ok(())
    };
    for &eta in &s.etas {
        let k = (s.t / (eta * eta) + 1e-9).floor() as usize;
        let oracle = cfg.oracle(sigma)?;
        let exp = |method| Experiment {
            method,
            x0: x0.clone(),
            m0: m0(cfg),
            steps: k,
            stride: k,
            seed: cfg.seed,
        };
        let sgdm = run_ensemble(
            &exp(Method::Sgdm {
                oracle: oracle.clone(),
                schedule: Schedule::scaled(eta, s.alpha, s.lambda, k)?,
            }),
            &hs,
            cfg.n_seeds,
        )?;
        let sgd = run_ensemble(
            &exp(Method::Sgd {
                oracle,
                schedule: Schedule::constant(eta, 0.0, k)?,
            }),
            &hs,
            cfg.n_seeds,
        )?;
        report.divergences.insert(format!("sgdm_eta{eta}"), sgdm.divergence_count());
        report.divergences.insert(format!("sgd_eta{eta}"), sgd.divergence_count());
        push(&mut report, Some(eta), "sgdm", &sgdm)?;
        push(&mut report, Some(eta), "sgd", &sgd)?;
    }
    let spec = SdeSpec {
        kind: SdeKind::Slow {
            manifold,
            lambda: TimeSchedule::constant(1.0),
            projection: PhiMode::Analytic,
        },
        landscape,
        noise: cfg.oracle.noise.clone(),
        noise_scale: sigma,
        dt: s.dt,
        horizon: s.t,
    };
    let n_steps = spec.steps();
    let exp = Experiment {
        method: Method::Sde { spec },
        x0: x0.clone(),
        m0: MomentumInit::Zero,
        steps: n_steps,
        stride: n_steps,
        seed: cfg.seed,
    };
    let sde = run_ensemble(&exp, &hs, cfg.n_seeds)?;
    report.divergences.insert("slow_sde".into(), sde.divergence_count());
    push(&mut report, None, "slow_sde", &sde)?;

    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.eta.map(num).unwrap_or_default(),
                r.method.clone(),
                r.k.to_string(),
                r.cell.h.clone(),
                num(r.cell.mean),
                num(r.cell.ci_lo),
                num(r.cell.ci_hi),
            ]
        })
        .collect();
    out.write_csv(
        "slow_sde.csv",
        &["eta", "method", "k", "h_name", "mean", "ci_lo", "ci_hi"],
        &rows,
    )?;
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct DescentRow {
    pub point: Vec<f64>,
    pub terms: momlab_core::analysis::DescentTerms,
    pub monte_carlo: momlab_core::analysis::MonteCarloMean,
}

pub fn descent(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<DescentRow>> {
    let dc = cfg.descent.as_ref().expect("validated");
    let landscape = cfg.landscape.clone().expect("validated");
    let oracle = cfg.oracle(cfg.oracle.sigma)?;
    let mut report = Vec::new();
    for x in &dc.points {
        let terms = descent_decomposition(&landscape, x, dc.eta, cfg.oracle.sigma, &cfg.oracle.noise)?;
        let monte_carlo = descent_monte_carlo(&oracle, x, dc.eta, dc.samples, cfg.seed)?;
        report.push(DescentRow {
            point: x.clone(),
            terms,
            monte_carlo,
        });
    }
    let d = landscape.dim();
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    for h in [
        "descent_force",
        "noise_induced",
        "curvature_induced",
        "total",
        "mc_mean",
        "mc_stderr",
    ] {
        header.push(h.into());
    }
    let rows: Vec<Vec<String>> = report
        .iter()
        .map(|r| {
            let mut row: Vec<String> = r.point.iter().map(|v| num(*v)).collect();
            row.extend(
                [
                    r.terms.descent_force,
                    r.terms.noise_induced,
                    r.terms.curvature_induced,
                    r.terms.total,
                    r.monte_carlo.mean,
                    r.monte_carlo.stderr,
                ]
                .map(num),
            );
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_csv("descent.csv", &header, &rows)?;
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct ConvertReport {
    pub eta: Vec<f64>,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
}

pub fn convert(cfg: &RunConfig, out: &mut OutputDir) -> Result<ConvertReport> {
    let std = cfg.standard()?;
    let k = cfg
        .standard_schedule
        .as_ref()
        .and_then(|s| s.steps)
        .unwrap_or(std.horizon());
    let conv = convert_standard_to_ema(&std, k)?;
    let report = ConvertReport {
        eta: conv.schedule.etas().to_vec(),
        beta: conv.schedule.betas().to_vec(),
        alpha: conv.alpha.clone(),
    };
    let rows: Vec<Vec<String>> = (0..k)
        .map(|i| {
            vec![
                i.to_string(),
                num(std.gamma(i)),
                num(std.mu(i)),
                num(std.tau(i)),
                num(report.eta[i]),
                num(report.beta[i]),
                num(report.alpha[i]),
            ]
        })
        .collect();
    out.write_csv("convert.csv", &["k", "gamma", "mu", "tau", "eta", "beta", "alpha"], &rows)?;

    #[derive(Serialize)]
    struct Fragment<'a> {
        schedule: Arrays<'a>,
    }
    #[derive(Serialize)]
    struct Arrays<'a> {
        eta_k: &'a [f64],
        beta_k: &'a [f64],
    }
    let fragment = toml::to_string(&Fragment {
        schedule: Arrays {
            eta_k: &report.eta,
            beta_k: &report.beta,
        },
    })?;
    out.write_bytes("converted_schedule.toml", fragment.as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: std::path::PathBuf,
    pub threads: usize,
    pub dump_trajectories: bool,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum Report {
    Simulate(SimulateReport),
    Warmup(WarmupReport),
    WeakApprox(WeakApproxReport),
    Svag(SvagReport),
    SlowSde(SlowSdeReport),
    Descent(Vec<DescentRow>),
    Convert(ConvertReport),
}

impl Report {
    fn divergences(&self) -> Divergences {
        match self {
            Report::Simulate(r) => r.divergences.clone(),
            Report::WeakApprox(r) => r.divergences.clone(),
            Report::Svag(r) => r.divergences.clone(),
            Report::SlowSde(r) => r.divergences.clone(),
            _ => Divergences::new(),
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: Report,
    pub files: Vec<String>,
}

/// Runs the configured experiment on a dedicated pool of `opts.threads`
/// workers and writes `summary.json` and `manifest.json` next to its outputs.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome> {
    use crate::config::ExperimentKind as K;
    let start = std::time::Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.max(1))
        .build()?;
    let mut out = OutputDir::create(&opts.out)?;
    let report = pool.install(|| -> Result<Report> {
        Ok(match cfg.experiment {
            K::Simulate => Report::Simulate(simulate(cfg, &mut out, opts.dump_trajectories)?),
            K::Warmup => Report::Warmup(warmup(cfg, &mut out)?),
            K::WeakApprox => Report::WeakApprox(weak_approx(cfg, &mut out)?),
            K::SvagSweep => Report::Svag(svag_sweep(cfg, &mut out)?),
            K::SlowSde => Report::SlowSde(slow_sde(cfg, &mut out)?),
            K::Descent => Report::Descent(descent(cfg, &mut out)?),
            K::Convert => Report::Convert(convert(cfg, &mut out)?),
        })
    })?;
    let hash = cfg.hash();
    let divergences = report.divergences();

    #[derive(Serialize)]
    struct Summary<'a> {
        experiment: &'a str,
        config_hash: &'a str,
        seed: u64,
        n_seeds: usize,
        divergence_counts: &'a Divergences,
        results: &'a Report,
    }
    out.write_json(
        "summary.json",
        &Summary {
            experiment: cfg.experiment.name(),
            config_hash: &hash,
            seed: cfg.seed,
            n_seeds: cfg.n_seeds,
            divergence_counts: &divergences,
            results: &report,
        },
    )?;

    #[derive(Serialize)]
    struct Manifest<'a> {
        experiment: &'a str,
        config_hash: &'a str,
        tool_version: &'a str,
        seed: u64,
        n_seeds: usize,
        threads: usize,
        wall_time_seconds: f64,
        divergence_counts: &'a Divergences,
        outputs: Vec<String>,
    }
    let mut outputs = out.files().to_vec();
    outputs.push("manifest.json".into());
    out.write_json(
        "manifest.json",
        &Manifest {
            experiment: cfg.experiment.name(),
            config_hash: &hash,
            tool_version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            n_seeds: cfg.n_seeds,
            threads: opts.threads,
            wall_time_seconds: start.elapsed().as_secs_f64(),
            divergence_counts: &divergences,
            outputs,
        },
    )?;
    Ok(RunOutcome {
        report,
        files: out.files().to_vec(),
    })
}
