//! Averaged learning rate and the coupled trajectory that links SGDM to SGD.
//!
//! With `β_{s:t} = Π_{r=s}^t β_r`, the averaged rate is
//! `η̄_k = (1 − β_k) Σ_{s≥k} η_s β_{k+1:s}` over the schedule extended by its
//! last entry, and the coupled point is `y_k = x_k − η̄_kβ_k/(1 − β_k)·m_k`.
//! Along any SGDM run `y_{k+1} = y_k − η̄_k g_k` holds exactly.

use crate::error::{Error, Result};
use crate::linalg::{dist, norm};
use crate::optim::{Schedule, TrajectoryLog, TrajectoryState};

/// `η̄_k` precomputed over the schedule horizon. Past the horizon the schedule
/// is constant, so `η̄_k = η_k` there.
#[derive(Clone, Debug, PartialEq)]
pub struct AveragedSchedule {
    eta_bar: Vec<f64>,
}

impl AveragedSchedule {
    /// Backward recurrence
    /// `η̄_k = (1 − β_k)(η_k + β_{k+1}·η̄_{k+1}/(1 − β_{k+1}))`,
    /// seeded with the closed-form geometric tail `η̄_{K−1} = η_{K−1}`.
    pub fn new(schedule: &Schedule) -> Self {
        let n = schedule.horizon();
        let mut eta_bar = vec![0.0; n];
        eta_bar[n - 1] = schedule.eta(n - 1);
        for k in (0..n - 1).rev() {
            let b_next = schedule.beta(k + 1);
            let carried = b_next * eta_bar[k + 1] / (1.0 - b_next);
            eta_bar[k] = (1.0 - schedule.beta(k)) * (schedule.eta(k) + carried);
        }
        Self { eta_bar }
    }

    #[inline]
    pub fn at(&self, k: usize) -> f64 {
        self.eta_bar[k.min(self.eta_bar.len() - 1)]
    }

    pub fn values(&self) -> &[f64] {
        &self.eta_bar
    }

    /// SGD comparator schedule with learning rates `η̄_k`.
    pub fn as_sgd_schedule(&self) -> Schedule {
        Schedule::from_arrays(self.eta_bar.clone(), vec![0.0; self.eta_bar.len()])
            .expect("averaged rates are finite and nonnegative")
    }

    /// Coefficient `η̄_kβ_k/(1 − β_k)` of the momentum shift at step `k`.
    #[inline]
    pub fn shift(&self, schedule: &Schedule, k: usize) -> f64 {
        let b = schedule.beta(k);
        self.at(k) * b / (1.0 - b)
    }

    /// Checks `η̄_k ≤ sup η/(1 − sup β)` and, when scaling constants are
    /// attached, `η̄_k ≤ λ_max·η_max/λ_min·η`.
    pub fn within_bounds(&self, schedule: &Schedule) -> bool {
        let sup_eta = schedule.etas().iter().fold(0.0_f64, |m, &v| m.max(v));
        let sup_beta = schedule.betas().iter().fold(0.0_f64, |m, &v| m.max(v));
        let slack = 1.0 + 1e-12;
        let geometric = sup_eta / (1.0 - sup_beta) * slack;
        let scaled = schedule
            .scaling()
            .map(|s| s.lambda_max * s.eta_max / s.lambda_min * s.eta * slack)
            .unwrap_or(f64::INFINITY);
        self.eta_bar.iter().all(|&v| v <= geometric && v <= scaled)
    }
}

pub fn averaged_lr(schedule: &Schedule, k: usize) -> f64 {
    AveragedSchedule::new(schedule).at(k)
}

pub fn coupled_point(state: &TrajectoryState, schedule: &Schedule, avg: &AveragedSchedule) -> Vec<f64> {
    coupled_from(&state.x, &state.m, avg.shift(schedule, state.k))
}

fn coupled_from(x: &[f64], m: &[f64], c: f64) -> Vec<f64> {
    x.iter().zip(m).map(|(xi, mi)| xi - c * mi).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingResidual {
    /// `max_k ‖y_{k+1} − (y_k − η̄_k g_k)‖`
    pub max_residual: f64,
    /// `max_k ‖y_k‖`, for relative tolerances.
    pub max_norm: f64,
}

impl CouplingResidual {
    pub fn relative(&self) -> f64 {
        self.max_residual / (1.0 + self.max_norm)
    }
}

fn check_log(log: &TrajectoryLog) -> Result<()> {
    if log.grads.is_empty() || log.xs.len() != log.grads.len() + 1 || log.ms.len() != log.xs.len() {
        return Err(Error::Input(
            "coupling needs a logged SGDM run with one gradient per step".into(),
        ));
    }
    if log.ms.iter().any(|m| m.len() != log.xs[0].len()) {
        return Err(Error::Input("coupling needs momentum in every logged state".into()));
    }
    Ok(())
}

/// Coupled points `y_0..=y_K` of a logged SGDM run.
pub fn coupled_path(log: &TrajectoryLog, schedule: &Schedule, avg: &AveragedSchedule) -> Result<Vec<Vec<f64>>> {
    check_log(log)?;
    Ok(log
        .xs
        .iter()
        .zip(&log.ms)
        .enumerate()
        .map(|(k, (x, m))| coupled_from(x, m, avg.shift(schedule, k)))
        .collect())
}

pub fn coupled_recursion_residual(
    log: &TrajectoryLog,
    schedule: &Schedule,
    avg: &AveragedSchedule,
) -> Result<CouplingResidual> {
    let ys = coupled_path(log, schedule, avg)?;
    let mut out = CouplingResidual {
        max_residual: 0.0,
        max_norm: ys.iter().map(|y| norm(y)).fold(0.0, f64::max),
    };
    for (k, g) in log.grads.iter().enumerate() {
        let step = avg.at(k);
        let predicted: Vec<f64> = ys[k].iter().zip(g).map(|(y, gi)| y - step * gi).collect();
        out.max_residual = out.max_residual.max(dist(&ys[k + 1], &predicted));
    }
    Ok(out)
}

/// `y_k = x₀ − β₀η̄₀/(1 − β₀)·m₀ − Σ_{s<k} η̄_s g_s` for every `k`, from the
/// logged gradients alone.
pub fn coupled_telescoped(
    x0: &[f64],
    m0: &[f64],
    grads: &[Vec<f64>],
    schedule: &Schedule,
    avg: &AveragedSchedule,
) -> Vec<Vec<f64>> {
    let mut y = coupled_from(x0, m0, avg.shift(schedule, 0));
    let mut out = Vec::with_capacity(grads.len() + 1);
    out.push(y.clone());
    for (s, g) in grads.iter().enumerate() {
        let step = avg.at(s);
        for (yi, gi) in y.iter_mut().zip(g) {
            *yi -= step * gi;
        }
        out.push(y.clone());
    }
    out
}
