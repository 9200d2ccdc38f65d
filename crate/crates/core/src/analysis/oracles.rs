//! Closed-form references: the constant-gradient warm-up, the exact descent
//! decomposition on quadratics, and the momentum telescoping term.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::landscape::Landscape;
use crate::linalg::{dot, norm_sq};
use crate::ngos::{NoiseModel, Oracle};
use crate::optim::{sgd_step, sgdm_step, Schedule, TrajectoryLog, TrajectoryState};
use crate::rng::{Domain, NoiseKey};

/// SGD and SGDM on `L(x) = c·x` with isotropic noise, where SGDM starts from
/// its stationary momentum `m₀ ~ N(c, (1−β)/(1+β)·σ²I)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarmupOracle {
    pub c: Vec<f64>,
    pub eta: f64,
    pub beta: f64,
    pub sigma: f64,
    pub z0: Vec<f64>,
}

/// Per-coordinate variances; means are vectors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WarmupMoments {
    pub k: usize,
    pub mean_z: Vec<f64>,
    pub var_z: f64,
    pub mean_x: Vec<f64>,
    pub var_x: f64,
    pub step_var_sgd: f64,
    pub step_var_sgdm: f64,
}

impl WarmupOracle {
    pub fn validate(&self) -> Result<()> {
        check_dim(self.c.len(), self.z0.len())?;
        if self.c.is_empty() {
            return Err(Error::Input("warm-up needs a non-empty gradient".into()));
        }
        if !(self.beta >= 0.0 && self.beta < 1.0) || !(self.eta > 0.0) || !(self.sigma >= 0.0) {
            return Err(Error::Input("warm-up needs eta > 0, sigma >= 0 and beta in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn momentum_std(&self) -> f64 {
        ((1.0 - self.beta) / (1.0 + self.beta)).sqrt() * self.sigma
    }

    pub fn moments(&self, k: usize) -> WarmupMoments {
        let (eta, beta, s2) = (self.eta, self.beta, self.sigma * self.sigma);
        let kf = k as f64;
        let mean: Vec<f64> = self.z0.iter().zip(&self.c).map(|(z, c)| z - kf * eta * c).collect();
        let var_z = kf * eta * eta * s2;
        let gap = 2.0 * beta * eta * eta * s2 * (1.0 - beta.powi(k as i32)) / (1.0 - beta * beta);
        WarmupMoments {
            k,
            mean_z: mean.clone(),
            var_z,
            mean_x: mean,
            var_x: var_z - gap,
            step_var_sgd: eta * eta * s2,
            step_var_sgdm: (1.0 - beta) / (1.0 + beta) * eta * eta * s2,
        }
    }

    pub fn oracle(&self) -> Result<Oracle> {
        Oracle::new(
            Landscape::constant_gradient(self.c.clone())?,
            NoiseModel::IsotropicGaussian,
            self.sigma,
        )
    }

    /// Monte-Carlo counterpart of [`WarmupOracle::moments`] at each `k`,
    /// with SGD and SGDM sharing their gradient noise. Step variances are
    /// those of `x_{k+1} − x_k`. Variances are pooled over coordinates.
    pub fn estimate(&self, ks: &[usize], n_seeds: usize, seed: u64) -> Result<Vec<WarmupEstimate>> {
        self.validate()?;
        if n_seeds < 2 {
            return Err(Error::Input("warm-up estimate needs at least 2 seeds".into()));
        }
        let oracle = self.oracle()?;
        let d = self.c.len();
        let horizon = ks.iter().max().copied().unwrap_or(0) + 1;
        let schedule_sgd = Schedule::constant(self.eta, 0.0, 1)?;
        let schedule = Schedule::constant(self.eta, self.beta, 1)?;
        // per seed: for each k, z_k, z_{k+1}, x_k, x_{k+1}
        let rows: Vec<Vec<f64>> = (0..n_seeds)
            .into_par_iter()
            .map(|i| {
                let key = NoiseKey::new(seed, i as u64, 0);
                let mut m0 = vec![0.0; d];
                key.fill_normal(Domain::Init, 0, &mut m0);
                let sd = self.momentum_std();
                let m0 = m0.iter().zip(&self.c).map(|(v, c)| c + sd * v).collect();
                let mut z = TrajectoryState::sgd(self.z0.clone());
                let mut x = TrajectoryState::sgdm(self.z0.clone(), m0)?;
                let mut sampler = oracle.sampler();
                let mut zs = vec![z.x.clone()];
                let mut xs = vec![x.x.clone()];
                for k in 0..horizon {
                    let kk = key.at_step(k as u64);
                    sgd_step(&mut z, &schedule_sgd, &mut sampler, kk);
                    sgdm_step(&mut x, &schedule, &mut sampler, kk);
                    zs.push(z.x.clone());
                    xs.push(x.x.clone());
                }
                let mut row = Vec::with_capacity(ks.len() * 4 * d);
                for &k in ks {
                    row.extend_from_slice(&zs[k]);
                    row.extend_from_slice(&zs[k + 1]);
                    row.extend_from_slice(&xs[k]);
                    row.extend_from_slice(&xs[k + 1]);
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;

        let n = n_seeds as f64;
        let stats = |offset: &dyn Fn(usize) -> Vec<f64>| -> (Vec<f64>, f64) {
            let vals: Vec<Vec<f64>> = (0..n_seeds).map(offset).collect();
            let mean: Vec<f64> = (0..d).map(|j| vals.iter().map(|v| v[j]).sum::<f64>() / n).collect();
            let var = (0..d)
                .map(|j| vals.iter().map(|v| (v[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0))
                .sum::<f64>()
                / d as f64;
            (mean, var)
        };
        Ok(ks
            .iter()
            .enumerate()
            .map(|(q, &k)| {
                let base = q * 4 * d;
                let col = |i: usize, part: usize| rows[i][base + part * d..base + (part + 1) * d].to_vec();
                let diff = |i: usize, a: usize| -> Vec<f64> {
                    col(i, a + 1).iter().zip(col(i, a)).map(|(u, v)| u - v).collect()
                };
                let (mean_z, var_z) = stats(&|i| col(i, 0));
                let (mean_x, var_x) = stats(&|i| col(i, 2));
                let (_, step_var_sgd) = stats(&|i| diff(i, 0));
                let (_, step_var_sgdm) = stats(&|i| diff(i, 2));
                WarmupEstimate {
                    k,
                    n: n_seeds,
                    mean_z,
                    var_z,
                    mean_x,
                    var_x,
                    step_var_sgd,
                    step_var_sgdm,
                }
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WarmupEstimate {
    pub k: usize,
    pub n: usize,
    pub mean_z: Vec<f64>,
    pub var_z: f64,
    pub mean_x: Vec<f64>,
    pub var_x: f64,
    pub step_var_sgd: f64,
    pub step_var_sgdm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DescentTerms {
    /// `−η‖∇L‖²`
    pub descent_force: f64,
    /// `½(ση)² tr(AΣ)`
    pub noise_induced: f64,
    /// `½η² ∇LᵀA∇L`
    pub curvature_induced: f64,
    pub total: f64,
}

/// Exact `E[L(x − ηg)] − L(x)` for one SGD step on a quadratic.
pub fn descent_decomposition(
    landscape: &Landscape,
    x: &[f64],
    eta: f64,
    sigma: f64,
    noise: &NoiseModel,
) -> Result<DescentTerms> {
    let a = match landscape {
        Landscape::Quadratic { a, .. } => a,
        _ => {
            return Err(Error::Unsupported(
                "the descent decomposition is exact only for quadratic landscapes".into(),
            ))
        }
    };
    check_dim(landscape.dim(), x.len())?;
    noise.validate(x.len())?;
    let g = landscape.gradient(x);
    let descent_force = -eta * norm_sq(&g);
    let noise_induced = 0.5 * (sigma * eta).powi(2) * a.matmul(&noise.covariance(x)).trace();
    let curvature_induced = 0.5 * eta * eta * dot(&g, &a.mul_vec(&g));
    Ok(DescentTerms {
        descent_force,
        noise_induced,
        curvature_induced,
        total: descent_force + noise_induced + curvature_induced,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonteCarloMean {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Monte-Carlo `E[L(x − ηg)] − L(x)` over `n_draws` independent oracle
/// draws; draw `i` uses trajectory index `i` under `seed`.
pub fn descent_monte_carlo(oracle: &Oracle, x: &[f64], eta: f64, n_draws: usize, seed: u64) -> Result<MonteCarloMean> {
    oracle.validate()?;
    check_dim(oracle.dim(), x.len())?;
    if n_draws < 2 {
        return Err(Error::Input("need at least 2 draws".into()));
    }
    const CHUNK: usize = 4096;
    let l0 = oracle.landscape.value(x);
    let partials: Vec<(usize, f64, f64)> = (0..n_draws.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut sampler = oracle.sampler();
            let mut y = vec![0.0; x.len()];
            let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_draws) {
                let g = sampler.sample(x, NoiseKey::new(seed, i as u64, 0));
                for ((yi, xi), gi) in y.iter_mut().zip(x).zip(g) {
                    *yi = xi - eta * gi;
                }
                let v = oracle.landscape.value(&y) - l0;
                n += 1;
                let delta = v - mean;
                mean += delta / n as f64;
                m2 += delta * (v - mean);
            }
            (n, mean, m2)
        })
        .collect();
    let (n, mean, m2) = partials.into_iter().fold((0usize, 0.0, 0.0), |(na, ma, sa), (nb, mb, sb)| {
        let n = na + nb;
        let delta = mb - ma;
        let mean = ma + delta * nb as f64 / n as f64;
        (n, mean, sa + sb + delta * delta * na as f64 * nb as f64 / n as f64)
    });
    Ok(MonteCarloMean {
        mean,
        stderr: (m2 / (n as f64 - 1.0) / n as f64).sqrt(),
        n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TelescopingProbe {
    /// `S_k = ∇L(x_k)ᵀm_k − (η/2)m_kᵀ∇²L(x_k)m_k` along the run.
    pub s: Vec<f64>,
    /// `Σ_k (S_{k+1} − S_k)`
    pub telescoped_sum: f64,
    pub max_abs: f64,
}

pub fn telescoping_probe(log: &TrajectoryLog, landscape: &Landscape, eta: f64) -> Result<TelescopingProbe> {
    if log.ms.iter().any(|m| m.len() != landscape.dim()) {
        return Err(Error::Input("telescoping probe needs a logged SGDM run".into()));
    }
    let s: Vec<f64> = log
        .xs
        .iter()
        .zip(&log.ms)
        .map(|(x, m)| dot(&landscape.gradient(x), m) - 0.5 * eta * dot(m, &landscape.hessian_vector(x, m)))
        .collect();
    let telescoped_sum = s.windows(2).map(|w| w[1] - w[0]).sum();
    let max_abs = s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(TelescopingProbe {
        s,
        telescoped_sum,
        max_abs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;

    #[test]
    fn warmup_examples() {
        let w = WarmupOracle {
            c: vec![1.0],
            eta: 0.1,
            beta: 0.9,
            sigma: 1.0,
            z0: vec![0.0],
        };
        let m = w.moments(10);
        assert!((m.mean_z[0] + 1.0).abs() < 1e-15);
        assert!((m.var_z - 0.1).abs() < 1e-15);
        assert!((m.step_var_sgdm / m.step_var_sgd - 1.0 / 19.0).abs() < 1e-15);
        let far = w.moments(10_000);
        assert!((far.var_z - far.var_x - 2.0 * 0.9 * 0.01 / 0.19).abs() < 1e-12);
    }

    #[test]
    fn descent_examples() {
        let l = Landscape::quadratic(Mat::identity(1), vec![0.0]).unwrap();
        let t = descent_decomposition(&l, &[1.0], 0.1, 1.0, &NoiseModel::IsotropicGaussian).unwrap();
        assert!((t.descent_force + 0.1).abs() < 1e-15);
        assert!((t.noise_induced - 0.005).abs() < 1e-15);
        assert!((t.curvature_induced - 0.005).abs() < 1e-15);
        assert!((t.total + 0.09).abs() < 1e-15);

        let t = descent_decomposition(&l, &[1.0], 0.1, 0.0, &NoiseModel::IsotropicGaussian).unwrap();
        assert_eq!(t.noise_induced, 0.0);
        let t = descent_decomposition(&l, &[0.0], 0.1, 1.0, &NoiseModel::IsotropicGaussian).unwrap();
        assert_eq!((t.descent_force, t.curvature_induced), (0.0, 0.0));
        assert!(t.total > 0.0);

        let s = Landscape::sphere(2, 1.0).unwrap();
        assert!(matches!(
            descent_decomposition(&s, &[1.0, 0.0], 0.1, 1.0, &NoiseModel::IsotropicGaussian),
            Err(Error::Unsupported(_))
        ));
    }
}
