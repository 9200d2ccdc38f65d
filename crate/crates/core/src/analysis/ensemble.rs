//! Seed ensembles: one trajectory per seed index, test functions recorded on
//! a fixed step grid, and bootstrap summaries over seeds.
//!
//! Seed `i` draws all of its noise from `NoiseKey::new(seed, i, step)`, so
//! methods run under the same seed share their gradient noise step by step.
//! Rows are collected in seed order, which makes every statistic independent
//! of how the work was scheduled.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bootstrap::{cover, Bootstrap};
use super::testfn::TestFunction;
use crate::error::{check_dim, Error, Result};
use crate::ngos::Oracle;
use crate::optim::{sgd_step, sgdm_standard_step, sgdm_step, Schedule, StandardSchedule, TrajectoryState};
use crate::rng::{Domain, NoiseKey};
use crate::sde::{integrate_observed, SdeSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Sgd { oracle: Oracle, schedule: Schedule },
    Sgdm { oracle: Oracle, schedule: Schedule },
    SgdmStandard { oracle: Oracle, schedule: StandardSchedule },
    Sde { spec: SdeSpec },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Sgd { .. } => "sgd",
            Method::Sgdm { .. } => "sgdm",
            Method::SgdmStandard { .. } => "sgdm_standard",
            Method::Sde { .. } => "sde",
        }
    }

    fn dim(&self) -> usize {
        match self {
            Method::Sgd { oracle, .. } | Method::Sgdm { oracle, .. } | Method::SgdmStandard { oracle, .. } => {
                oracle.dim()
            }
            Method::Sde { spec } => spec.landscape.dim(),
        }
    }
}

/// Initial momentum of momentum methods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentumInit {
    #[default]
    Zero,
    Fixed { m0: Vec<f64> },
    /// `m₀ ~ N(mean, std²I)`, drawn per seed.
    Gaussian { mean: Vec<f64>, std: f64 },
}

impl MomentumInit {
    fn draw(&self, dim: usize, key: NoiseKey) -> Vec<f64> {
        match self {
            MomentumInit::Zero => vec![0.0; dim],
            MomentumInit::Fixed { m0 } => m0.clone(),
            MomentumInit::Gaussian { mean, std } => {
                let mut z = vec![0.0; dim];
                key.fill_normal(Domain::Init, 0, &mut z);
                mean.iter().zip(z).map(|(m, v)| m + std * v).collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub method: Method,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub m0: MomentumInit,
    /// Optimizer steps; ignored for SDE methods, which run to their horizon.
    pub steps: usize,
    /// Record every `stride` steps (the final step is always recorded).
    pub stride: usize,
    pub seed: u64,
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        let d = self.method.dim();
        check_dim(d, self.x0.len())?;
        match &self.method {
            Method::Sgd { oracle, .. } | Method::Sgdm { oracle, .. } | Method::SgdmStandard { oracle, .. } => {
                oracle.validate()?
            }
            Method::Sde { spec } => spec.validate()?,
        }
        match &self.m0 {
            MomentumInit::Zero => {}
            MomentumInit::Fixed { m0 } => check_dim(d, m0.len())?,
            MomentumInit::Gaussian { mean, std } => {
                check_dim(d, mean.len())?;
                if !(std.is_finite() && *std >= 0.0) {
                    return Err(Error::Input("momentum std must be >= 0".into()));
                }
            }
        }
        if self.stride == 0 {
            return Err(Error::Input("stride must be positive".into()));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        match &self.method {
            Method::Sde { spec } => spec.steps(),
            _ => self.steps,
        }
    }

    /// `0, stride, 2·stride, …` plus the final step.
    pub fn record_steps(&self) -> Vec<usize> {
        let k = self.total_steps();
        let mut steps: Vec<usize> = (0..=k).step_by(self.stride).collect();
        if *steps.last().unwrap() != k {
            steps.push(k);
        }
        steps
    }

    pub fn key(&self, seed_index: usize) -> NoiseKey {
        NoiseKey::new(self.seed, seed_index as u64, 0)
    }

    fn records(&self, k: usize, total: usize) -> bool {
        k % self.stride == 0 || k == total
    }

    /// Runs seed `seed_index`, calling `visit(step, x)` at every recorded
    /// step. Returns whether the trajectory diverged.
    pub fn visit(&self, seed_index: usize, mut visit: impl FnMut(usize, &[f64])) -> Result<bool> {
        let key = self.key(seed_index);
        let total = self.total_steps();
        if let Method::Sde { spec } = &self.method {
            let out = integrate_observed(spec, &self.x0, key, |n, _, x| {
                if self.records(n, total) {
                    visit(n, x)
                }
            })?;
            return Ok(out.diverged);
        }
        let d = self.x0.len();
        let mut state = match &self.method {
            Method::Sgd { .. } => TrajectoryState::sgd(self.x0.clone()),
            _ => TrajectoryState::sgdm(self.x0.clone(), self.m0.draw(d, key))?,
        };
        visit(0, &state.x);
        let oracle = match &self.method {
            Method::Sgd { oracle, .. } | Method::Sgdm { oracle, .. } | Method::SgdmStandard { oracle, .. } => oracle,
            Method::Sde { .. } => unreachable!(),
        };
        let mut sampler = oracle.sampler();
        for k in 0..total {
            let step_key = key.at_step(k as u64);
            match &self.method {
                Method::Sgd { schedule, .. } => sgd_step(&mut state, schedule, &mut sampler, step_key),
                Method::Sgdm { schedule, .. } => sgdm_step(&mut state, schedule, &mut sampler, step_key),
                Method::SgdmStandard { schedule, .. } => {
                    sgdm_standard_step(&mut state, schedule, &mut sampler, step_key)
                }
                Method::Sde { .. } => unreachable!(),
            };
            if state.diverged {
                return Ok(true);
            }
            if self.records(k + 1, total) {
                visit(k + 1, &state.x);
            }
        }
        Ok(false)
    }

    /// States at the recorded steps for one seed.
    pub fn trajectory(&self, seed_index: usize) -> Result<(Vec<usize>, Vec<Vec<f64>>, bool)> {
        self.validate()?;
        let mut steps = Vec::new();
        let mut states = Vec::new();
        let diverged = self.visit(seed_index, |k, x| {
            steps.push(k);
            states.push(x.to_vec());
        })?;
        Ok((steps, states, diverged))
    }
}

/// Test-function values of every seed: `values[(i·steps + s)·h + j]` is
/// `h_j(x)` of seed `i` at `steps[s]`. Cells after a divergence are NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleMatrix {
    pub method: String,
    pub steps: Vec<usize>,
    pub h_names: Vec<String>,
    pub n_seeds: usize,
    pub values: Vec<f64>,
    pub diverged: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub step: usize,
    pub h: String,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
}

pub fn run_ensemble(exp: &Experiment, hs: &[TestFunction], n_seeds: usize) -> Result<SampleMatrix> {
    if n_seeds < 2 {
        return Err(Error::Input(format!("n_seeds = {n_seeds}, need at least 2")));
    }
    if hs.is_empty() {
        return Err(Error::Input("at least one test function is required".into()));
    }
    exp.validate()?;
    for h in hs {
        h.validate(exp.x0.len())?;
    }
    let steps = exp.record_steps();
    let index: std::collections::HashMap<usize, usize> = steps.iter().enumerate().map(|(s, &k)| (k, s)).collect();
    let width = steps.len() * hs.len();
    let rows: Vec<(Vec<f64>, bool)> = (0..n_seeds)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![f64::NAN; width];
            let diverged = exp.visit(i, |k, x| {
                let s = index[&k];
                for (j, h) in hs.iter().enumerate() {
                    row[s * hs.len() + j] = h.eval(x);
                }
            })?;
            Ok((row, diverged))
        })
        .collect::<Result<_>>()?;
    let diverged: Vec<bool> = rows.iter().map(|r| r.1).collect();
    if diverged.iter().all(|&d| d) {
        return Err(Error::AllDiverged {
            n_seeds,
            context: format!("{} from x0 = {:?}", exp.method.name(), exp.x0),
        });
    }
    let mut values = Vec::with_capacity(n_seeds * width);
    for (row, _) in rows {
        values.extend(row);
    }
    Ok(SampleMatrix {
        method: exp.method.name().into(),
        steps,
        h_names: hs.iter().map(TestFunction::name).collect(),
        n_seeds,
        values,
        diverged,
    })
}

impl SampleMatrix {
    pub fn width(&self) -> usize {
        self.steps.len() * self.h_names.len()
    }

    pub fn divergence_count(&self) -> usize {
        self.diverged.iter().filter(|&&d| d).count()
    }

    pub fn row(&self, seed: usize) -> &[f64] {
        let w = self.width();
        &self.values[seed * w..(seed + 1) * w]
    }

    fn valid_seeds(&self) -> Vec<usize> {
        (0..self.n_seeds).filter(|&i| !self.diverged[i]).collect()
    }

    fn gather(&self, seeds: &[usize]) -> Vec<f64> {
        let mut v = Vec::with_capacity(seeds.len() * self.width());
        for &i in seeds {
            v.extend_from_slice(self.row(i));
        }
        v
    }

    /// Means over non-diverged seeds, summed in seed order.
    pub fn means(&self) -> Vec<f64> {
        let seeds = self.valid_seeds();
        let mut sum = vec![0.0; self.width()];
        for &i in &seeds {
            for (s, v) in sum.iter_mut().zip(self.row(i)) {
                *s += v;
            }
        }
        sum.iter().map(|s| s / seeds.len() as f64).collect()
    }

    /// Unbiased variances over non-diverged seeds.
    pub fn variances(&self) -> Vec<f64> {
        let seeds = self.valid_seeds();
        let means = self.means();
        let mut acc = vec![0.0; self.width()];
        for &i in &seeds {
            for ((a, v), m) in acc.iter_mut().zip(self.row(i)).zip(&means) {
                *a += (v - m) * (v - m);
            }
        }
        acc.iter().map(|a| a / (seeds.len() as f64 - 1.0)).collect()
    }

    /// Mean of `h` at the last recorded step.
    pub fn final_mean(&self, h: &str) -> Option<f64> {
        let j = self.h_names.iter().position(|n| n == h)?;
        let s = self.steps.len() - 1;
        Some(self.means()[s * self.h_names.len() + j])
    }

    /// Per-cell means with percentile bootstrap intervals.
    pub fn summarize(&self, bs: &Bootstrap) -> Result<Vec<CellSummary>> {
        bs.validate()?;
        let seeds = self.valid_seeds();
        let n = seeds.len();
        let w = self.width();
        let values = self.gather(&seeds);
        let counts = bs.counts(n, 0);
        let resampled = bs.resampled_means(&counts, &values, n, w);
        let means = self.means();
        let hn = self.h_names.len();
        Ok((0..w)
            .map(|c| {
                let mut col: Vec<f64> = (0..bs.resamples).map(|b| resampled[b * w + c]).collect();
                let (lo, hi) = cover(means[c], bs.interval(&mut col));
                CellSummary {
                    step: self.steps[c / hn],
                    h: self.h_names[c % hn].clone(),
                    mean: means[c],
                    ci_lo: lo,
                    ci_hi: hi,
                    n,
                }
            })
            .collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Same count matrix for both ensembles; valid when seeds share noise.
    Paired,
    /// Independent count matrices.
    Unpaired,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakDistance {
    /// `max_{k,h} |Ê h(a_k) − Ê h(b_k)|`
    pub d: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub argmax_step: usize,
    pub argmax_h: String,
    pub n: usize,
}

pub fn weak_distance(a: &SampleMatrix, b: &SampleMatrix, bs: &Bootstrap, pairing: Pairing) -> Result<WeakDistance> {
    bs.validate()?;
    if a.steps != b.steps || a.h_names != b.h_names {
        return Err(Error::Input("weak distance needs matching step grids and test functions".into()));
    }
    let w = a.width();
    let hn = a.h_names.len();
    let (d, arg) = {
        let (ma, mb) = (a.means(), b.means());
        let mut best = (0.0, 0);
        for c in 0..w {
            let diff = (ma[c] - mb[c]).abs();
            if diff > best.0 {
                best = (diff, c);
            }
        }
        best
    };
    let max_abs = |diffs: &[f64], r: usize| -> f64 { diffs[r * w..(r + 1) * w].iter().fold(0.0, |m, v| m.max(v.abs())) };
    let (mut stats, n) = match pairing {
        Pairing::Paired => {
            if a.n_seeds != b.n_seeds {
                return Err(Error::Input("paired distance needs equal seed counts".into()));
            }
            let seeds: Vec<usize> = (0..a.n_seeds).filter(|&i| !a.diverged[i] && !b.diverged[i]).collect();
            if seeds.is_empty() {
                return Err(Error::AllDiverged {
                    n_seeds: a.n_seeds,
                    context: "no seed survived in both ensembles".into(),
                });
            }
            let n = seeds.len();
            let diff: Vec<f64> = a.gather(&seeds).iter().zip(b.gather(&seeds)).map(|(x, y)| x - y).collect();
            let counts = bs.counts(n, 0);
            let r = bs.resampled_means(&counts, &diff, n, w);
            ((0..bs.resamples).map(|i| max_abs(&r, i)).collect::<Vec<f64>>(), n)
        }
        Pairing::Unpaired => {
            let sa = a.valid_seeds();
            let sb = b.valid_seeds();
            let ra = bs.resampled_means(&bs.counts(sa.len(), 1), &a.gather(&sa), sa.len(), w);
            let rb = bs.resampled_means(&bs.counts(sb.len(), 2), &b.gather(&sb), sb.len(), w);
            let diff: Vec<f64> = ra.iter().zip(&rb).map(|(x, y)| x - y).collect();
            ((0..bs.resamples).map(|i| max_abs(&diff, i)).collect::<Vec<f64>>(), sa.len().min(sb.len()))
        }
    };
    let (ci_lo, ci_hi) = cover(d, bs.interval(&mut stats));
    Ok(WeakDistance {
        d,
        ci_lo,
        ci_hi,
        argmax_step: a.steps[arg / hn],
        argmax_h: a.h_names[arg % hn].clone(),
        n,
    })
}

/// Per-cell `Ê h(a) − Ê h(b)` over seeds that survived in both ensembles,
/// with paired percentile intervals.
pub fn paired_differences(a: &SampleMatrix, b: &SampleMatrix, bs: &Bootstrap) -> Result<Vec<CellSummary>> {
    bs.validate()?;
    if a.steps != b.steps || a.h_names != b.h_names || a.n_seeds != b.n_seeds {
        return Err(Error::Input("paired differences need matching ensembles".into()));
    }
    let seeds: Vec<usize> = (0..a.n_seeds).filter(|&i| !a.diverged[i] && !b.diverged[i]).collect();
    if seeds.is_empty() {
        return Err(Error::AllDiverged {
            n_seeds: a.n_seeds,
            context: "no seed survived in both ensembles".into(),
        });
    }
    let n = seeds.len();
    let w = a.width();
    let hn = a.h_names.len();
    let diff: Vec<f64> = a.gather(&seeds).iter().zip(b.gather(&seeds)).map(|(x, y)| x - y).collect();
    let mut mean = vec![0.0; w];
    for row in diff.chunks(w) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let r = bs.resampled_means(&bs.counts(n, 0), &diff, n, w);
    Ok((0..w)
        .map(|c| {
            let mut col: Vec<f64> = (0..bs.resamples).map(|i| r[i * w + c]).collect();
            let (lo, hi) = cover(mean[c], bs.interval(&mut col));
            CellSummary {
                step: a.steps[c / hn],
                h: a.h_names[c % hn].clone(),
                mean: mean[c],
                ci_lo: lo,
                ci_hi: hi,
                n,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::Landscape;
    use crate::linalg::Mat;
    use crate::ngos::NoiseModel;

    fn quad_oracle(sigma: f64) -> Oracle {
        let l = Landscape::quadratic(Mat::diag(&[1.0, 4.0]), vec![0.0, 0.0]).unwrap();
        Oracle::new(l, NoiseModel::IsotropicGaussian, sigma).unwrap()
    }

    fn exp(method: Method) -> Experiment {
        Experiment {
            method,
            x0: vec![1.0, 1.0],
            m0: MomentumInit::Zero,
            steps: 20,
            stride: 3,
            seed: 11,
        }
    }

    #[test]
    fn record_grid_includes_final_step() {
        let e = exp(Method::Sgd {
            oracle: quad_oracle(1.0),
            schedule: Schedule::constant(0.1, 0.0, 20).unwrap(),
        });
        assert_eq!(e.record_steps(), vec![0, 3, 6, 9, 12, 15, 18, 20]);
    }

    #[test]
    fn noiseless_ensemble_has_zero_variance() {
        let e = exp(Method::Sgdm {
            oracle: quad_oracle(0.0),
            schedule: Schedule::constant(0.1, 0.9, 20).unwrap(),
        });
        let s = run_ensemble(&e, &TestFunction::default_set(2), 5).unwrap();
        assert!(s.variances().iter().all(|&v| v < 1e-28));
    }

    #[test]
    fn zero_momentum_matches_sgd_and_distance_vanishes() {
        let hs = TestFunction::default_set(2);
        let a = run_ensemble(
            &exp(Method::Sgd {
                oracle: quad_oracle(1.0),
                schedule: Schedule::constant(0.1, 0.0, 20).unwrap(),
            }),
            &hs,
            8,
        )
        .unwrap();
        let b = run_ensemble(
            &exp(Method::Sgdm {
                oracle: quad_oracle(1.0),
                schedule: Schedule::constant(0.1, 0.0, 20).unwrap(),
            }),
            &hs,
            8,
        )
        .unwrap();
        assert_eq!(a.values, b.values);
        let bs = Bootstrap {
            resamples: 100,
            ..Bootstrap::default()
        };
        let d = weak_distance(&a, &b, &bs, Pairing::Paired).unwrap();
        assert_eq!((d.d, d.ci_lo, d.ci_hi), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rejects_tiny_ensembles_and_mismatched_grids() {
        let e = exp(Method::Sgd {
            oracle: quad_oracle(1.0),
            schedule: Schedule::constant(0.1, 0.0, 20).unwrap(),
        });
        let hs = TestFunction::default_set(2);
        assert!(matches!(run_ensemble(&e, &hs, 1), Err(Error::Input(_))));
        let a = run_ensemble(&e, &hs, 4).unwrap();
        let b = run_ensemble(&Experiment { stride: 4, ..e }, &hs, 4).unwrap();
        assert!(matches!(
            weak_distance(&a, &b, &Bootstrap::default(), Pairing::Paired),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn all_diverged_is_an_error() {
        let e = exp(Method::Sgd {
            oracle: quad_oracle(0.0),
            schedule: Schedule::constant(3.0, 0.0, 200).unwrap(),
        });
        let e = Experiment { steps: 200, ..e };
        assert!(matches!(
            run_ensemble(&e, &TestFunction::default_set(2), 3),
            Err(Error::AllDiverged { n_seeds: 3, .. })
        ));
    }
}
