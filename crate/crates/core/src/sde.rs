//! Continuous-time limits and their Euler–Maruyama integration.
//!
//! * gradient flow `dX = −∇L(X)dt`
//! * first-order SDE `dX = −λ_t∇L dt + λ_t s Σ^{1/2} dW`
//! * underdamped pair (momentum decay on the learning-rate scale)
//!   `dX = (λ/γ)dM − λ∇L dt + λ s Σ^{1/2}dW`,
//!   `dM = −γM dt + γ∇L dt − γ s Σ^{1/2}dW`
//! * slow SDE on a minimizer manifold
//!   `dX = λ ∂Φ(X) s Σ^{1/2}dW + (λ²/2) ∂²Φ(X)[s²Σ]dt`
//!
//! `s` is the diffusion scale (`σ√η` for the first-order limit, `σ` for the
//! slow one). Brownian increments come from the counter-based stream keyed
//! by the integration step.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::landscape::{Landscape, ManifoldSpec};
use crate::linalg::{dist, norm, Mat};
use crate::ngos::NoiseModel;
use crate::optim::{Schedule, DIVERGENCE_RADIUS};
use crate::rng::{Domain, NoiseKey};

/// Finite-difference step for `∂Φ`.
pub const JACOBIAN_STEP: f64 = 1e-5;
/// Finite-difference step for `∂²Φ`.
pub const SECOND_STEP: f64 = 1e-4;
/// Numeric `Φ` stops once `‖∇L‖` drops below this.
pub const PHI_GRAD_TOL: f64 = 1e-10;

/// Piecewise-constant function of time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeSchedule {
    Constant { value: f64 },
    /// `values[i]` holds on `[i·duration, (i+1)·duration)`, the last value
    /// beyond.
    Piecewise { duration: f64, values: Vec<f64> },
}

impl TimeSchedule {
    pub fn constant(value: f64) -> Self {
        TimeSchedule::Constant { value }
    }

    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        match self {
            TimeSchedule::Constant { value } => *value,
            TimeSchedule::Piecewise { duration, values } => {
                let i = (t / duration).floor().max(0.0) as usize;
                values[i.min(values.len() - 1)]
            }
        }
    }

    /// `λ_t = η_{⌊t/η⌋}/η`, the rescaled learning rate on the `t = kη` clock.
    pub fn learning_rate(schedule: &Schedule, eta: f64) -> Self {
        Self::from_steps(schedule.etas().iter().map(|e| e / eta).collect(), eta)
    }

    /// Same rescaling on the `t = kη²` clock of the slow SDE.
    pub fn slow_learning_rate(schedule: &Schedule, eta: f64) -> Self {
        Self::from_steps(schedule.etas().iter().map(|e| e / eta).collect(), eta * eta)
    }

    /// `γ_t = (1 − β_{⌊t/η⌋})/η`.
    pub fn momentum_rate(schedule: &Schedule, eta: f64) -> Self {
        Self::from_steps(schedule.betas().iter().map(|b| (1.0 - b) / eta).collect(), eta)
    }

    fn from_steps(values: Vec<f64>, duration: f64) -> Self {
        if values.iter().all(|&v| v == values[0]) {
            TimeSchedule::Constant { value: values[0] }
        } else {
            TimeSchedule::Piecewise { duration, values }
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            TimeSchedule::Constant { value } => value.is_finite() && *value >= 0.0,
            TimeSchedule::Piecewise { duration, values } => {
                *duration > 0.0 && !values.is_empty() && values.iter().all(|v| v.is_finite() && *v >= 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Input(format!("{name}: invalid time schedule")))
        }
    }
}

/// How `Φ` and `∂Φ` are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PhiMode {
    #[default]
    Analytic,
    Numeric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SdeKind {
    GradientFlow,
    FirstOrder { lambda: TimeSchedule },
    Underdamped { lambda: TimeSchedule, gamma: TimeSchedule },
    Slow {
        manifold: ManifoldSpec,
        lambda: TimeSchedule,
        #[serde(default)]
        projection: PhiMode,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdeSpec {
    pub kind: SdeKind,
    pub landscape: Landscape,
    pub noise: NoiseModel,
    /// Multiplies `Σ^{1/2}`.
    pub noise_scale: f64,
    pub dt: f64,
    pub horizon: f64,
}

impl SdeSpec {
    pub fn validate(&self) -> Result<()> {
        self.landscape.validate()?;
        self.noise.validate(self.landscape.dim())?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Input(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.horizon >= self.dt) {
            return Err(Error::Input(format!(
                "horizon {} must be at least dt {}",
                self.horizon, self.dt
            )));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return Err(Error::Input("noise_scale must be >= 0".into()));
        }
        match &self.kind {
            SdeKind::GradientFlow => {}
            SdeKind::FirstOrder { lambda } => lambda.validate("lambda")?,
            SdeKind::Underdamped { lambda, gamma } => {
                lambda.validate("lambda")?;
                gamma.validate("gamma")?;
            }
            SdeKind::Slow { manifold, lambda, .. } => {
                lambda.validate("lambda")?;
                if manifold.landscape() != &self.landscape {
                    return Err(Error::Input("slow SDE manifold must come from the landscape".into()));
                }
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// Recorded path. `states[i]` is the state at `times[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SdePath {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub key: NoiseKey,
    pub diverged: bool,
    /// Largest per-step distance moved by re-projection (slow SDE only).
    pub max_projection_distance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdeOutcome {
    pub diverged: bool,
    pub max_projection_distance: f64,
}

pub fn integrate(spec: &SdeSpec, x0: &[f64], key: NoiseKey) -> Result<SdePath> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let outcome = integrate_observed(spec, x0, key, |_, t, x| {
        times.push(t);
        states.push(x.to_vec());
    })?;
    Ok(SdePath {
        times,
        states,
        key,
        diverged: outcome.diverged,
        max_projection_distance: outcome.max_projection_distance,
    })
}

/// Integrates and hands every state `(step, t, x)` to `observe`, including
/// the initial one. Brownian increment `n` is drawn from `key.at_step(n)`.
pub fn integrate_observed(
    spec: &SdeSpec,
    x0: &[f64],
    key: NoiseKey,
    mut observe: impl FnMut(usize, f64, &[f64]),
) -> Result<SdeOutcome> {
    spec.validate()?;
    check_dim(spec.landscape.dim(), x0.len())?;
    let d = x0.len();
    let p = spec.noise.noise_dim(d);
    let n_steps = spec.steps();
    let dt = spec.dt;
    let sqrt_dt = dt.sqrt();
    let s = spec.noise_scale;

    let mut x = x0.to_vec();
    let mut grad = vec![0.0; d];
    let mut xi = vec![0.0; p];
    let mut dw = vec![0.0; d];
    let mut outcome = SdeOutcome {
        diverged: false,
        max_projection_distance: 0.0,
    };

    let mut slow = match &spec.kind {
        SdeKind::Slow { manifold, projection, .. } => {
            let start = phi(manifold, &x, *projection)?;
            outcome.max_projection_distance = dist(&start, &x);
            x = start;
            Some(SlowWorkspace::new(manifold, &spec.noise, *projection, d))
        }
        _ => None,
    };
    let mut momentum = vec![0.0; d];

    observe(0, 0.0, &x);
    for n in 0..n_steps {
        let t = n as f64 * dt;
        let noisy = s != 0.0 && !matches!(spec.kind, SdeKind::GradientFlow);
        if noisy {
            key.at_step(n as u64).fill_normal(Domain::Brownian, 0, &mut xi);
            spec.noise.apply_sqrt_into(&x, &xi, &mut dw);
            for v in dw.iter_mut() {
                *v *= s * sqrt_dt;
            }
        }
        match &spec.kind {
            SdeKind::GradientFlow => {
                spec.landscape.gradient_into(&x, &mut grad);
                for (xi, gi) in x.iter_mut().zip(&grad) {
                    *xi -= dt * gi;
                }
            }
            SdeKind::FirstOrder { lambda } => {
                let lam = lambda.at(t);
                spec.landscape.gradient_into(&x, &mut grad);
                let c = lam * dt;
                for (xi, gi) in x.iter_mut().zip(&grad) {
                    *xi -= c * gi;
                }
                if noisy {
                    for (xi, wi) in x.iter_mut().zip(&dw) {
                        *xi += lam * wi;
                    }
                }
            }
            SdeKind::Underdamped { lambda, gamma } => {
                let (lam, gam) = (lambda.at(t), gamma.at(t));
                spec.landscape.gradient_into(&x, &mut grad);
                for i in 0..d {
                    let w = if noisy { dw[i] } else { 0.0 };
                    let dm = -gam * momentum[i] * dt + gam * grad[i] * dt - gam * w;
                    x[i] += lam / gam * dm - lam * grad[i] * dt + lam * w;
                    momentum[i] += dm;
                }
            }
            SdeKind::Slow { lambda, .. } => {
                let ws = slow.as_mut().expect("slow workspace");
                let lam = lambda.at(t);
                let moved = ws.step(&mut x, if noisy { Some(&dw) } else { None }, lam, s, dt)?;
                outcome.max_projection_distance = outcome.max_projection_distance.max(moved);
            }
        }
        if !(norm(&x) <= DIVERGENCE_RADIUS) {
            outcome.diverged = true;
            break;
        }
        observe(n + 1, (n + 1) as f64 * dt, &x);
    }
    Ok(outcome)
}

struct SlowWorkspace<'a> {
    manifold: &'a ManifoldSpec,
    noise: &'a NoiseModel,
    mode: PhiMode,
    trial: Vec<f64>,
}

impl<'a> SlowWorkspace<'a> {
    fn new(manifold: &'a ManifoldSpec, noise: &'a NoiseModel, mode: PhiMode, d: usize) -> Self {
        Self {
            manifold,
            noise,
            mode,
            trial: vec![0.0; d],
        }
    }

    /// One Euler–Maruyama step followed by re-projection onto the manifold.
    /// Returns the distance moved by the projection.
    fn step(&mut self, x: &mut Vec<f64>, dw: Option<&[f64]>, lam: f64, s: f64, dt: f64) -> Result<f64> {
        let jac = phi_jacobian(self.manifold, x, self.mode)?;
        let factor = self.noise.sqrt_cov(x).scaled(s);
        let curvature = phi_second_factored(self.manifold, x, &factor)?;
        self.trial.copy_from_slice(x);
        if let Some(dw) = dw {
            let tangent = jac.mul_vec(dw);
            for (t, v) in self.trial.iter_mut().zip(&tangent) {
                *t += lam * v;
            }
        }
        let c = 0.5 * lam * lam * dt;
        for (t, v) in self.trial.iter_mut().zip(&curvature) {
            *t += c * v;
        }
        let projected = phi(self.manifold, &self.trial, self.mode)?;
        let moved = dist(&projected, &self.trial);
        *x = projected;
        Ok(moved)
    }
}

/// Gradient-flow projection `Φ(x) = lim_{t→∞} φ(x, t)`.
pub fn phi(manifold: &ManifoldSpec, x: &[f64], mode: PhiMode) -> Result<Vec<f64>> {
    match mode {
        PhiMode::Analytic => manifold.phi_analytic(x),
        PhiMode::Numeric => phi_numeric(manifold, x),
    }
}

/// Integrates `ẋ = −∇L(x)` with step-doubling RK4 until `‖∇L‖ < 1e-10`.
/// Steps are halved whenever the full/half-step discrepancy exceeds the
/// local tolerance.
pub fn phi_numeric(manifold: &ManifoldSpec, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(manifold.dim(), x.len())?;
    if !manifold.in_attraction_region(x) {
        return Err(Error::Domain(
            "point is outside the attraction region of the manifold".into(),
        ));
    }
    const LOCAL_TOL: f64 = 1e-13;
    const MAX_ITERS: usize = 1_000_000;
    let l = manifold.landscape();
    let mut x = x.to_vec();
    let mut h = 0.1_f64;
    for _ in 0..MAX_ITERS {
        if norm(&l.gradient(&x)) < PHI_GRAD_TOL {
            return Ok(x);
        }
        let full = rk4(l, &x, h);
        let half = rk4(l, &rk4(l, &x, 0.5 * h), 0.5 * h);
        let err = dist(&full, &half);
        if err <= LOCAL_TOL * (1.0 + norm(&x)) {
            x = half;
            if err < 0.1 * LOCAL_TOL {
                h = (2.0 * h).min(1.0);
            }
        } else {
            h *= 0.5;
            if h < 1e-14 {
                break;
            }
        }
    }
    Err(Error::Domain("gradient flow did not converge".into()))
}

fn rk4(l: &Landscape, x: &[f64], h: f64) -> Vec<f64> {
    let f = |p: &[f64]| -> Vec<f64> { l.gradient(p).into_iter().map(|g| -g).collect() };
    let shifted = |base: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(b, v)| b + c * v).collect()
    };
    let k1 = f(x);
    let k2 = f(&shifted(x, &k1, 0.5 * h));
    let k3 = f(&shifted(x, &k2, 0.5 * h));
    let k4 = f(&shifted(x, &k3, h));
    (0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// `∂Φ(x)`. Analytic mode uses `(r/‖x‖)(I − x̂x̂ᵀ)`, which on the sphere is the
/// tangent projector `I − xxᵀ/r²`; numeric mode central-differences `Φ`.
pub fn phi_jacobian(manifold: &ManifoldSpec, x: &[f64], mode: PhiMode) -> Result<Mat> {
    check_dim(manifold.dim(), x.len())?;
    let d = x.len();
    match mode {
        PhiMode::Analytic => {
            let n = norm(x);
            if !manifold.in_attraction_region(x) {
                return Err(Error::Domain("point is outside the attraction region".into()));
            }
            let s = manifold.radius() / n;
            let mut j = Mat::zeros(d, d);
            for a in 0..d {
                for b in 0..d {
                    let delta = if a == b { 1.0 } else { 0.0 };
                    j[(a, b)] = s * (delta - x[a] * x[b] / (n * n));
                }
            }
            Ok(j)
        }
        PhiMode::Numeric => {
            let h = JACOBIAN_STEP;
            let mut j = Mat::zeros(d, d);
            let mut p = x.to_vec();
            for b in 0..d {
                p[b] = x[b] + h;
                let plus = manifold.phi_analytic(&p)?;
                p[b] = x[b] - h;
                let minus = manifold.phi_analytic(&p)?;
                p[b] = x[b];
                for a in 0..d {
                    j[(a, b)] = (plus[a] - minus[a]) / (2.0 * h);
                }
            }
            Ok(j)
        }
    }
}

/// `∂²Φ(x)[S] = Σ_ij S_ij ∂²_ij Φ(x)` by second-order central differences.
pub fn phi_second(manifold: &ManifoldSpec, x: &[f64], s: &Mat) -> Result<Vec<f64>> {
    phi_second_with_step(manifold, x, s, SECOND_STEP)
}

pub fn phi_second_with_step(manifold: &ManifoldSpec, x: &[f64], s: &Mat, h: f64) -> Result<Vec<f64>> {
    check_dim(manifold.dim(), x.len())?;
    let d = x.len();
    if s.rows() != d || s.cols() != d {
        return Err(Error::Dimension {
            expected: d,
            got: s.rows(),
        });
    }
    let phi_at = |offsets: &[(usize, f64)]| -> Result<Vec<f64>> {
        let mut p = x.to_vec();
        for &(i, v) in offsets {
            p[i] += v;
        }
        manifold.phi_analytic(&p)
    };
    let center = phi_at(&[])?;
    let mut out = vec![0.0; d];
    for i in 0..d {
        for j in i..d {
            let weight = if i == j { s[(i, i)] } else { s[(i, j)] + s[(j, i)] };
            if weight == 0.0 {
                continue;
            }
            let second: Vec<f64> = if i == j {
                let plus = phi_at(&[(i, h)])?;
                let minus = phi_at(&[(i, -h)])?;
                (0..d).map(|a| (plus[a] - 2.0 * center[a] + minus[a]) / (h * h)).collect()
            } else {
                let pp = phi_at(&[(i, h), (j, h)])?;
                let pm = phi_at(&[(i, h), (j, -h)])?;
                let mp = phi_at(&[(i, -h), (j, h)])?;
                let mm = phi_at(&[(i, -h), (j, -h)])?;
                (0..d).map(|a| (pp[a] - pm[a] - mp[a] + mm[a]) / (4.0 * h * h)).collect()
            };
            for (o, v) in out.iter_mut().zip(second) {
                *o += weight * v;
            }
        }
    }
    Ok(out)
}

/// `∂²Φ(x)[BBᵀ] = Σ_k D²Φ(x)[b_k, b_k]` over the columns `b_k` of `B`,
/// each a central second difference along `b_k`. Needs `2p + 1` evaluations
/// of `Φ` instead of `O(d²)`.
pub fn phi_second_factored(manifold: &ManifoldSpec, x: &[f64], factor: &Mat) -> Result<Vec<f64>> {
    check_dim(manifold.dim(), x.len())?;
    let d = x.len();
    let center = manifold.phi_analytic(x)?;
    let mut out = vec![0.0; d];
    let mut p = vec![0.0; d];
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    for k in 0..factor.cols() {
        let b = factor.column(k);
        let bn = norm(&b);
        if bn == 0.0 {
            continue;
        }
        // spatial step SECOND_STEP along the unit direction
        let t = SECOND_STEP / bn;
        for a in 0..d {
            p[a] = x[a] + t * b[a];
        }
        manifold.phi_analytic_into(&p, &mut plus)?;
        for a in 0..d {
            p[a] = x[a] - t * b[a];
        }
        manifold.phi_analytic_into(&p, &mut minus)?;
        for a in 0..d {
            out[a] += (plus[a] - 2.0 * center[a] + minus[a]) / (t * t);
        }
    }
    Ok(out)
}

/// Slow SDE on `manifold` with isotropic unit noise scaled by `noise`.
pub fn integrate_slow_sde(
    manifold: &ManifoldSpec,
    noise: &NoiseModel,
    lambda: TimeSchedule,
    x0: &[f64],
    key: NoiseKey,
    horizon: f64,
    dt: f64,
) -> Result<SdePath> {
    let spec = SdeSpec {
        kind: SdeKind::Slow {
            manifold: manifold.clone(),
            lambda,
            projection: PhiMode::Analytic,
        },
        landscape: manifold.landscape().clone(),
        noise: noise.clone(),
        noise_scale: 1.0,
        dt,
        horizon,
    };
    integrate(&spec, x0, key)
}
