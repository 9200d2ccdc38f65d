//! Discrete optimizers: SGD, SGDM in the `(η, β)` parameterization, and the
//! standard `(γ, μ, τ)` parameterization, with the schedule conversion
//! between the two.
//!
//! SGDM here is
//!
//! ```text
//! m_{k+1} = β_k m_k + (1 − β_k) g_k
//! x_{k+1} = x_k − η_k m_{k+1}
//! ```
//!
//! and the standard form is `m̄' = μ m̄ + (1 − τ) ḡ`, `x̄' = x̄ − γ m̄'`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::norm;
use crate::ngos::{Oracle, Sampler};
use crate::rng::NoiseKey;

/// Trajectories with `‖x‖` above this are flagged diverged and frozen.
pub const DIVERGENCE_RADIUS: f64 = 1e6;

/// Constants certifying that a schedule is scaled by `eta` with index `alpha`:
/// `η_k/eta < eta_max` and `lambda_min ≤ (1 − β_k)/eta^alpha ≤ lambda_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleScaling {
    pub eta: f64,
    pub alpha: f64,
    pub eta_max: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// Per-step `(η_k, β_k)` for `k < horizon`, extended by repeating the last
/// entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    eta: Vec<f64>,
    beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scaling: Option<ScheduleScaling>,
}

impl Schedule {
    pub fn from_arrays(eta: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if eta.is_empty() || eta.len() != beta.len() {
            return Err(Error::Input(format!(
                "schedule arrays must be non-empty and equal length (eta: {}, beta: {})",
                eta.len(),
                beta.len()
            )));
        }
        for (k, (&e, &b)) in eta.iter().zip(&beta).enumerate() {
            if !(e.is_finite() && e >= 0.0) {
                return Err(Error::Input(format!("eta[{k}] = {e} must be >= 0")));
            }
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Input(format!("beta[{k}] = {b} must lie in [0, 1)")));
            }
        }
        Ok(Self {
            eta,
            beta,
            scaling: None,
        })
    }

    pub fn constant(eta: f64, beta: f64, horizon: usize) -> Result<Self> {
        Self::from_arrays(vec![eta; horizon.max(1)], vec![beta; horizon.max(1)])
    }

    /// Constant schedule with `η_k = eta` and `1 − β_k = lambda·eta^alpha`.
    pub fn scaled(eta: f64, alpha: f64, lambda: f64, horizon: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Input(format!("alpha = {alpha} must lie in [0, 1]")));
        }
        if !(eta > 0.0 && lambda > 0.0) {
            return Err(Error::Input("scaled schedule needs eta > 0 and lambda > 0".into()));
        }
        let beta = 1.0 - lambda * eta.powf(alpha);
        let mut s = Self::constant(eta, beta, horizon)?;
        s.scaling = Some(ScheduleScaling {
            eta,
            alpha,
            eta_max: 2.0,
            lambda_min: lambda,
            lambda_max: lambda,
        });
        Ok(s)
    }

    pub fn with_scaling(mut self, scaling: ScheduleScaling) -> Self {
        self.scaling = Some(scaling);
        self
    }

    pub fn scaling(&self) -> Option<&ScheduleScaling> {
        self.scaling.as_ref()
    }

    pub fn horizon(&self) -> usize {
        self.eta.len()
    }

    #[inline]
    pub fn eta(&self, k: usize) -> f64 {
        self.eta[k.min(self.eta.len() - 1)]
    }

    #[inline]
    pub fn beta(&self, k: usize) -> f64 {
        self.beta[k.min(self.beta.len() - 1)]
    }

    pub fn etas(&self) -> &[f64] {
        &self.eta
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    pub fn is_constant(&self) -> bool {
        self.eta.iter().all(|&e| e == self.eta[0]) && self.beta.iter().all(|&b| b == self.beta[0])
    }

    /// Checks the scaling constants against every step. Violations are
    /// errors; `lambda_max >= 1` only produces a warning.
    pub fn check_scaling(&self) -> Result<Vec<String>> {
        let Some(s) = &self.scaling else {
            return Ok(Vec::new());
        };
        let mut warnings = Vec::new();
        if s.lambda_max >= 1.0 {
            warnings.push(format!(
                "lambda_max = {} is not below 1; recorded but not enforced",
                s.lambda_max
            ));
        }
        if !(0.0 < s.lambda_min && s.lambda_min <= s.lambda_max) {
            return Err(Error::Input("scaling needs 0 < lambda_min <= lambda_max".into()));
        }
        let scale = s.eta.powf(s.alpha);
        let tol = 1e-12;
        for k in 0..self.horizon() {
            let r = self.eta[k] / s.eta;
            if !(0.0..s.eta_max).contains(&r) {
                return Err(Error::Input(format!(
                    "step {k}: eta_k/eta = {r} outside [0, {})",
                    s.eta_max
                )));
            }
            let l = (1.0 - self.beta[k]) / scale;
            if l < s.lambda_min * (1.0 - tol) || l > s.lambda_max * (1.0 + tol) {
                return Err(Error::Input(format!(
                    "step {k}: (1 - beta_k)/eta^alpha = {l} outside [{}, {}]",
                    s.lambda_min, s.lambda_max
                )));
            }
        }
        Ok(warnings)
    }
}

/// Per-step `(γ_k, μ_k, τ_k)` of the standard formulation, extended by
/// repeating the last entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardSchedule {
    gamma: Vec<f64>,
    mu: Vec<f64>,
    tau: Vec<f64>,
}

impl StandardSchedule {
    pub fn from_arrays(gamma: Vec<f64>, mu: Vec<f64>, tau: Vec<f64>) -> Result<Self> {
        let n = gamma.len();
        if n == 0 || mu.len() != n || tau.len() != n {
            return Err(Error::Input(
                "standard schedule arrays must be non-empty and equal length".into(),
            ));
        }
        for k in 0..n {
            if !(gamma[k].is_finite() && gamma[k] >= 0.0) {
                return Err(Error::Input(format!("gamma[{k}] = {} must be >= 0", gamma[k])));
            }
            if !(mu[k].is_finite() && mu[k] >= 0.0) {
                return Err(Error::Input(format!("mu[{k}] = {} must be >= 0", mu[k])));
            }
            if !(0.0..1.0).contains(&tau[k]) {
                return Err(Error::Input(format!("tau[{k}] = {} must lie in [0, 1)", tau[k])));
            }
        }
        Ok(Self { gamma, mu, tau })
    }

    pub fn constant(gamma: f64, mu: f64, tau: f64, horizon: usize) -> Result<Self> {
        let n = horizon.max(1);
        Self::from_arrays(vec![gamma; n], vec![mu; n], vec![tau; n])
    }

    pub fn horizon(&self) -> usize {
        self.gamma.len()
    }

    #[inline]
    fn idx(&self, k: usize) -> usize {
        k.min(self.gamma.len() - 1)
    }

    pub fn gamma(&self, k: usize) -> f64 {
        self.gamma[self.idx(k)]
    }

    pub fn mu(&self, k: usize) -> f64 {
        self.mu[self.idx(k)]
    }

    pub fn tau(&self, k: usize) -> f64 {
        self.tau[self.idx(k)]
    }
}

/// Result of mapping a standard schedule onto the `(η, β)` parameterization.
#[derive(Clone, Debug, PartialEq)]
pub struct Conversion {
    pub schedule: Schedule,
    /// `α_0..=α_K`; the momenta satisfy `m_k = α_k·m̄_k`.
    pub alpha: Vec<f64>,
}

/// `α_{k+1} = α_k / (α_k(1 − τ_k) + μ_k)`, `β_k = μ_k α_{k+1}/α_k`,
/// `η_k = γ_k/α_{k+1}`, starting from `α_0 = 1`.
pub fn convert_standard_to_ema(std: &StandardSchedule, horizon: usize) -> Result<Conversion> {
    let horizon = horizon.max(1);
    let mut alpha = Vec::with_capacity(horizon + 1);
    alpha.push(1.0);
    let mut eta = Vec::with_capacity(horizon);
    let mut beta = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let a = alpha[k];
        let (g, mu, tau) = (std.gamma(k), std.mu(k), std.tau(k));
        let denom = a * (1.0 - tau) + mu;
        assert!(denom > 0.0, "alpha recursion denominator must be positive");
        let next = a / denom;
        debug_assert!(next <= 1.0 / (1.0 - tau) * (1.0 + 1e-12));
        beta.push(next / a * mu);
        eta.push(g / next);
        alpha.push(next);
    }
    Ok(Conversion {
        schedule: Schedule::from_arrays(eta, beta)?,
        alpha,
    })
}

/// Constant `(η, β)` schedule reproducing the heavy-ball update
/// `x_{k+1} = x_k − γ g_k + β(x_k − x_{k−1})`: `η = γ/(1 − β)`.
pub fn intro_form_conversion(gamma: f64, beta: f64, horizon: usize) -> Result<Schedule> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta = {beta} must lie in (0, 1)")));
    }
    Schedule::constant(gamma / (1.0 - beta), beta, horizon)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState {
    pub x: Vec<f64>,
    /// Empty for plain SGD.
    pub m: Vec<f64>,
    pub k: usize,
    pub diverged: bool,
}

impl TrajectoryState {
    pub fn sgd(x0: Vec<f64>) -> Self {
        Self {
            x: x0,
            m: Vec::new(),
            k: 0,
            diverged: false,
        }
    }

    pub fn sgdm(x0: Vec<f64>, m0: Vec<f64>) -> Result<Self> {
        check_dim(x0.len(), m0.len())?;
        Ok(Self {
            x: x0,
            m: m0,
            k: 0,
            diverged: false,
        })
    }

    fn guard(&mut self) {
        self.k += 1;
        // NaN fails the comparison as well
        if !(norm(&self.x) <= DIVERGENCE_RADIUS) {
            self.diverged = true;
        }
    }
}

/// `x ← x − η_k g`. Returns the gradient used, or `None` if the trajectory
/// was already frozen.
pub fn sgd_step<'s>(
    state: &mut TrajectoryState,
    schedule: &Schedule,
    sampler: &'s mut Sampler<'_>,
    key: NoiseKey,
) -> Option<&'s [f64]> {
    if state.diverged {
        return None;
    }
    let eta = schedule.eta(state.k);
    let g = sampler.sample(&state.x, key);
    for (xi, gi) in state.x.iter_mut().zip(g) {
        *xi -= eta * gi;
    }
    state.guard();
    Some(g)
}

pub fn sgdm_step<'s>(
    state: &mut TrajectoryState,
    schedule: &Schedule,
    sampler: &'s mut Sampler<'_>,
    key: NoiseKey,
) -> Option<&'s [f64]> {
    if state.diverged {
        return None;
    }
    let (eta, beta) = (schedule.eta(state.k), schedule.beta(state.k));
    let g = sampler.sample(&state.x, key);
    for ((xi, mi), gi) in state.x.iter_mut().zip(state.m.iter_mut()).zip(g) {
        *mi = beta * *mi + (1.0 - beta) * gi;
        *xi -= eta * *mi;
    }
    state.guard();
    Some(g)
}

pub fn sgdm_standard_step<'s>(
    state: &mut TrajectoryState,
    schedule: &StandardSchedule,
    sampler: &'s mut Sampler<'_>,
    key: NoiseKey,
) -> Option<&'s [f64]> {
    if state.diverged {
        return None;
    }
    let k = state.k;
    let (gamma, mu, tau) = (schedule.gamma(k), schedule.mu(k), schedule.tau(k));
    let g = sampler.sample(&state.x, key);
    for ((xi, mi), gi) in state.x.iter_mut().zip(state.m.iter_mut()).zip(g) {
        *mi = mu * *mi + (1.0 - tau) * gi;
        *xi -= gamma * *mi;
    }
    state.guard();
    Some(g)
}

/// Closed form of the momentum after `grads.len()` steps:
/// `β_{0:k−1}m₀ + Σ_s β_{s+1:k−1}(1 − β_s)g_s`.
pub fn unroll_momentum(schedule: &Schedule, m0: &[f64], grads: &[Vec<f64>]) -> Vec<f64> {
    let k = grads.len();
    let tail_product = |from: usize| -> f64 { (from..k).map(|t| schedule.beta(t)).product() };
    let mut m: Vec<f64> = m0.iter().map(|v| v * tail_product(0)).collect();
    for (s, g) in grads.iter().enumerate() {
        let c = tail_product(s + 1) * (1.0 - schedule.beta(s));
        for (mi, gi) in m.iter_mut().zip(g) {
            *mi += c * gi;
        }
    }
    m
}

/// Which update rule a logged run uses.
#[derive(Clone, Debug, PartialEq)]
pub enum Rule<'a> {
    Sgd(&'a Schedule),
    Sgdm(&'a Schedule),
    Standard(&'a StandardSchedule),
}

/// Full record of one trajectory: `states[k]` is the state before step `k`
/// and `grads[k]` the gradient sampled there.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryLog {
    pub xs: Vec<Vec<f64>>,
    pub ms: Vec<Vec<f64>>,
    pub grads: Vec<Vec<f64>>,
    pub diverged: bool,
}

/// Runs `steps` updates from `state`, drawing step `k` with
/// `base_key.at_step(k)`, and logs everything.
pub fn run_logged(
    rule: Rule<'_>,
    oracle: &Oracle,
    mut state: TrajectoryState,
    base_key: NoiseKey,
    steps: usize,
) -> TrajectoryLog {
    let mut sampler = oracle.sampler();
    let mut log = TrajectoryLog {
        xs: vec![state.x.clone()],
        ms: vec![state.m.clone()],
        grads: Vec::with_capacity(steps),
        diverged: false,
    };
    for _ in 0..steps {
        let key = base_key.at_step(state.k as u64);
        let g = match rule {
            Rule::Sgd(s) => sgd_step(&mut state, s, &mut sampler, key),
            Rule::Sgdm(s) => sgdm_step(&mut state, s, &mut sampler, key),
            Rule::Standard(s) => sgdm_standard_step(&mut state, s, &mut sampler, key),
        };
        match g {
            Some(g) => log.grads.push(g.to_vec()),
            None => break,
        }
        log.xs.push(state.x.clone());
        log.ms.push(state.m.clone());
    }
    log.diverged = state.diverged;
    log
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::Landscape;
    use crate::linalg::Mat;
    use crate::ngos::NoiseModel;

    fn quad1() -> Oracle {
        Oracle::noiseless(Landscape::quadratic(Mat::identity(1), vec![0.0]).unwrap())
    }

    fn key() -> NoiseKey {
        NoiseKey::new(1, 0, 0)
    }

    #[test]
    fn sgd_examples() {
        let o = quad1();
        let mut s = o.sampler();
        let sched = Schedule::constant(0.1, 0.0, 1).unwrap();
        let mut st = TrajectoryState::sgd(vec![2.0]);
        sgd_step(&mut st, &sched, &mut s, key());
        assert!((st.x[0] - 1.8).abs() < 1e-15);
        assert_eq!(st.k, 1);

        let zero = Schedule::constant(0.0, 0.0, 1).unwrap();
        let mut st = TrajectoryState::sgd(vec![2.0]);
        sgd_step(&mut st, &zero, &mut s, key());
        assert_eq!(st.x, vec![2.0]);
    }

    #[test]
    fn sgd_constant_gradient_ten_steps() {
        let o = Oracle::noiseless(Landscape::constant_gradient(vec![1.0]).unwrap());
        let log = run_logged(
            Rule::Sgd(&Schedule::constant(0.1, 0.0, 10).unwrap()),
            &o,
            TrajectoryState::sgd(vec![0.0]),
            key(),
            10,
        );
        assert!((log.xs[10][0] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn sgdm_examples() {
        let o = Oracle::noiseless(Landscape::constant_gradient(vec![1.0]).unwrap());
        let mut s = o.sampler();
        let sched = Schedule::constant(0.1, 0.9, 1).unwrap();
        let mut st = TrajectoryState::sgdm(vec![0.5], vec![1.0]).unwrap();
        sgdm_step(&mut st, &sched, &mut s, key());
        assert!((st.m[0] - 1.0).abs() < 1e-15);
        assert!((st.x[0] - 0.4).abs() < 1e-15);

        // hand-iterated: m1 = 0.5, x1 = 0.95, m2 = 0.725, x2 = 0.8775
        let o = quad1();
        let mut s = o.sampler();
        let sched = Schedule::constant(0.1, 0.5, 2).unwrap();
        let mut st = TrajectoryState::sgdm(vec![1.0], vec![0.0]).unwrap();
        sgdm_step(&mut st, &sched, &mut s, key());
        assert!((st.m[0] - 0.5).abs() < 1e-15 && (st.x[0] - 0.95).abs() < 1e-15);
        sgdm_step(&mut st, &sched, &mut s, key());
        assert!((st.m[0] - 0.725).abs() < 1e-15 && (st.x[0] - 0.8775).abs() < 1e-15);
    }

    #[test]
    fn zero_momentum_collapses_to_sgd_bitwise() {
        let l = Landscape::sphere(2, 1.0).unwrap();
        let o = Oracle::new(l, NoiseModel::IsotropicGaussian, 0.8).unwrap();
        let sched = Schedule::constant(0.05, 0.0, 50).unwrap();
        let a = run_logged(Rule::Sgd(&sched), &o, TrajectoryState::sgd(vec![1.2, 0.3]), key(), 50);
        let b = run_logged(
            Rule::Sgdm(&sched),
            &o,
            TrajectoryState::sgdm(vec![1.2, 0.3], vec![0.0, 0.0]).unwrap(),
            key(),
            50,
        );
        assert_eq!(a.xs, b.xs);
        // with β = 0 the momentum is the last sampled gradient
        for k in 1..=50 {
            assert_eq!(b.ms[k], b.grads[k - 1]);
        }
    }

    #[test]
    fn standard_step_special_cases() {
        let l = Landscape::quadratic(Mat::diag(&[1.0, 2.0]), vec![0.5, 0.0]).unwrap();
        let o = Oracle::new(l, NoiseModel::IsotropicGaussian, 0.3).unwrap();
        let x0 = vec![1.0, -1.0];
        let z = vec![0.0, 0.0];

        // τ = μ = 0 is SGD with lr γ
        let std = StandardSchedule::constant(0.07, 0.0, 0.0, 30).unwrap();
        let sgd = Schedule::constant(0.07, 0.0, 30).unwrap();
        let a = run_logged(Rule::Standard(&std), &o, TrajectoryState::sgdm(x0.clone(), z.clone()).unwrap(), key(), 30);
        let b = run_logged(Rule::Sgd(&sgd), &o, TrajectoryState::sgd(x0.clone()), key(), 30);
        assert_eq!(a.xs, b.xs);

        // τ = μ = β, γ = η is the (η, β) form
        let std = StandardSchedule::constant(0.07, 0.8, 0.8, 30).unwrap();
        let ema = Schedule::constant(0.07, 0.8, 30).unwrap();
        let a = run_logged(Rule::Standard(&std), &o, TrajectoryState::sgdm(x0.clone(), z.clone()).unwrap(), key(), 30);
        let b = run_logged(Rule::Sgdm(&ema), &o, TrajectoryState::sgdm(x0, z).unwrap(), key(), 30);
        assert_eq!(a.xs, b.xs);
        assert_eq!(a.ms, b.ms);
    }

    #[test]
    fn conversion_fixed_point_when_tau_equals_mu() {
        let std = StandardSchedule::constant(0.03, 0.9, 0.9, 20).unwrap();
        let c = convert_standard_to_ema(&std, 20).unwrap();
        assert!(c.alpha.iter().all(|&a| (a - 1.0).abs() < 1e-15));
        for k in 0..20 {
            assert!((c.schedule.beta(k) - 0.9).abs() < 1e-15);
            assert!((c.schedule.eta(k) - 0.03).abs() < 1e-15);
        }
    }

    #[test]
    fn conversion_of_intro_form() {
        // τ = 0, μ = 0.9: α_{k+1} = α_k/(α_k + 0.9)
        let std = StandardSchedule::constant(0.01, 0.9, 0.0, 5).unwrap();
        let c = convert_standard_to_ema(&std, 5).unwrap();
        let mut a = 1.0_f64;
        for k in 0..5 {
            let next = a / (a + 0.9);
            assert!((c.alpha[k + 1] - next).abs() < 1e-15);
            assert!((c.schedule.beta(k) - 0.9 * next / a).abs() < 1e-15);
            assert!((c.schedule.eta(k) - 0.01 / next).abs() < 1e-13);
            assert!(next <= 1.0);
            a = next;
        }
        // α_k → 0.1 = 1 − μ, so η_k → γ/(1 − β)
        let long = convert_standard_to_ema(&std, 400).unwrap();
        assert!((long.alpha[400] - 0.1).abs() < 1e-12);
        assert!((long.schedule.eta(399) - 0.1).abs() < 1e-10);
    }

    #[test]
    fn intro_form_examples() {
        let s = intro_form_conversion(0.01, 0.9, 3).unwrap();
        assert!((s.eta(0) - 0.1).abs() < 1e-15);
        assert_eq!(s.beta(2), 0.9);
        let s = intro_form_conversion(0.2, 0.9, 1).unwrap();
        assert!((s.eta(0) - 2.0).abs() < 1e-14);
        let s = intro_form_conversion(0.5, 1e-12, 1).unwrap();
        assert!((s.eta(0) - 0.5).abs() < 1e-11);
        assert!(matches!(intro_form_conversion(0.1, 0.0, 1), Err(Error::Domain(_))));
        assert!(matches!(intro_form_conversion(0.1, 1.0, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn schedule_extension_repeats_last_entry() {
        let s = Schedule::from_arrays(vec![0.1, 0.2], vec![0.5, 0.6]).unwrap();
        assert_eq!((s.eta(5), s.beta(5)), (0.2, 0.6));
        assert!(Schedule::from_arrays(vec![0.1], vec![1.0]).is_err());
        assert!(Schedule::from_arrays(vec![-0.1], vec![0.5]).is_err());
        assert!(StandardSchedule::constant(0.1, 0.9, 1.0, 1).is_err());
    }

    #[test]
    fn scaling_check() {
        let s = Schedule::scaled(0.01, 0.5, 0.9, 10).unwrap();
        assert!(s.check_scaling().unwrap().is_empty());
        assert!((1.0 - s.beta(0) - 0.09).abs() < 1e-15);
        let warn = Schedule::scaled(0.01, 0.5, 1.5, 10).unwrap();
        assert_eq!(warn.check_scaling().unwrap().len(), 1);
        let bad = Schedule::constant(0.01, 0.5, 3).unwrap().with_scaling(ScheduleScaling {
            eta: 0.01,
            alpha: 0.0,
            eta_max: 2.0,
            lambda_min: 0.1,
            lambda_max: 0.2,
        });
        assert!(bad.check_scaling().is_err());
    }

    #[test]
    fn divergence_freezes_the_trajectory() {
        let o = Oracle::noiseless(Landscape::quadratic(Mat::identity(1), vec![0.0]).unwrap());
        let sched = Schedule::constant(5.0, 0.0, 100).unwrap();
        let log = run_logged(Rule::Sgd(&sched), &o, TrajectoryState::sgd(vec![1.0]), key(), 100);
        assert!(log.diverged);
        // |1 − 5|^k passes 1e6 at k = 10
        assert_eq!(log.xs.len(), 11);
        let mut st = TrajectoryState::sgd(vec![1.0]);
        st.diverged = true;
        let mut s = o.sampler();
        assert!(sgd_step(&mut st, &sched, &mut s, key()).is_none());
        assert_eq!(st.x, vec![1.0]);
    }

    #[test]
    fn noiseless_identity_quadratic_contracts_geometrically() {
        let o = quad1();
        for eta in [0.1, 0.5, 1.5] {
            let sched = Schedule::constant(eta, 0.0, 60).unwrap();
            let log = run_logged(Rule::Sgd(&sched), &o, TrajectoryState::sgd(vec![3.0]), key(), 60);
            for (k, x) in log.xs.iter().enumerate() {
                let expected = 3.0 * (1.0 - eta).powi(k as i32);
                assert!((x[0] - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
            }
        }
    }
}
