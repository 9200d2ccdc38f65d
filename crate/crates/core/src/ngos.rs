//! Noisy gradient oracles with a scale parameter, and the SVAG transform.
//!
//! An oracle returns `g = ∇L(x) + σ·v` where `v = Σ^{1/2}(x)·ξ` with `ξ`
//! standard normal. The covariance `Σ(x)` never depends on `σ`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::landscape::Landscape;
use crate::linalg::{norm_sq, Mat};
use crate::rng::{Domain, NoiseKey, NoiseRecord};

/// `‖x‖` beyond which the state-scaled covariance stops growing.
pub const STATE_SCALE_CLAMP: f64 = 1e3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    /// `Σ = I`
    IsotropicGaussian,
    /// `Σ = SSᵀ` for a fixed factor `S` (d rows, any number of columns).
    FixedCovGaussian { sigma_half: Mat },
    /// `Σ(x) = BBᵀ·(1 + gain·min(‖x‖, 10³)²)`; `base` is the factor `B`.
    StateScaledGaussian { base: Mat, radial_gain: f64 },
}

impl NoiseModel {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            NoiseModel::IsotropicGaussian => Ok(()),
            NoiseModel::FixedCovGaussian { sigma_half: f } | NoiseModel::StateScaledGaussian { base: f, .. } => {
                if f.rows() != dim || f.cols() == 0 {
                    return Err(Error::Input(format!(
                        "noise factor is {}x{} but the landscape has dimension {dim}",
                        f.rows(),
                        f.cols()
                    )));
                }
                if let NoiseModel::StateScaledGaussian { radial_gain, .. } = self {
                    if !(radial_gain.is_finite() && *radial_gain >= 0.0) {
                        return Err(Error::Input("radial_gain must be a nonnegative number".into()));
                    }
                }
                Ok(())
            }
        }
    }

    /// Length of the standard-normal vector `ξ`.
    pub fn noise_dim(&self, dim: usize) -> usize {
        match self {
            NoiseModel::IsotropicGaussian => dim,
            NoiseModel::FixedCovGaussian { sigma_half: f } | NoiseModel::StateScaledGaussian { base: f, .. } => f.cols(),
        }
    }

    fn state_factor(radial_gain: f64, x: &[f64]) -> f64 {
        let r2 = norm_sq(x).min(STATE_SCALE_CLAMP * STATE_SCALE_CLAMP);
        (1.0 + radial_gain * r2).sqrt()
    }

    /// `out = Σ^{1/2}(x)·xi`
    #[inline]
    pub fn apply_sqrt_into(&self, x: &[f64], xi: &[f64], out: &mut [f64]) {
        match self {
            NoiseModel::IsotropicGaussian => out.copy_from_slice(xi),
            NoiseModel::FixedCovGaussian { sigma_half } => sigma_half.mul_vec_into(xi, out),
            NoiseModel::StateScaledGaussian { base, radial_gain } => {
                base.mul_vec_into(xi, out);
                let s = Self::state_factor(*radial_gain, x);
                for o in out.iter_mut() {
                    *o *= s;
                }
            }
        }
    }

    pub fn sqrt_cov(&self, x: &[f64]) -> Mat {
        match self {
            NoiseModel::IsotropicGaussian => Mat::identity(x.len()),
            NoiseModel::FixedCovGaussian { sigma_half } => sigma_half.clone(),
            NoiseModel::StateScaledGaussian { base, radial_gain } => {
                base.scaled(Self::state_factor(*radial_gain, x))
            }
        }
    }

    pub fn covariance(&self, x: &[f64]) -> Mat {
        let s = self.sqrt_cov(x);
        s.matmul(&s.transpose())
    }
}

/// SVAG mixing weights `r₁, r₂` with `r₁ + r₂ = 1` and `r₁² + r₂² = ℓ`.
pub fn svag_coefficients(ell: f64) -> Result<(f64, f64)> {
    if !(ell >= 1.0) || !ell.is_finite() {
        return Err(Error::Domain(format!("SVAG requires ell >= 1, got {ell}")));
    }
    let s = (2.0 * ell - 1.0).sqrt();
    Ok((0.5 * (1.0 - s), 0.5 * (1.0 + s)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Oracle {
    pub landscape: Landscape,
    pub noise: NoiseModel,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svag_ell: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientSample {
    pub g: Vec<f64>,
    pub record: NoiseRecord,
}

impl Oracle {
    pub fn new(landscape: Landscape, noise: NoiseModel, sigma: f64) -> Result<Self> {
        let o = Self {
            landscape,
            noise,
            sigma,
            svag_ell: None,
        };
        o.validate()?;
        Ok(o)
    }

    pub fn noiseless(landscape: Landscape) -> Self {
        Self {
            landscape,
            noise: NoiseModel::IsotropicGaussian,
            sigma: 0.0,
            svag_ell: None,
        }
    }

    pub fn with_svag(mut self, ell: f64) -> Result<Self> {
        svag_coefficients(ell)?;
        self.svag_ell = Some(ell);
        Ok(self)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.landscape.validate()?;
        self.noise.validate(self.landscape.dim())?;
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::Input(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if let Some(ell) = self.svag_ell {
            svag_coefficients(ell)?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.landscape.dim()
    }

    /// Effective oracle: SVAG-transformed when `svag_ell` is set.
    pub fn sample(&self, x: &[f64], key: NoiseKey) -> Result<GradientSample> {
        check_dim(self.dim(), x.len())?;
        let mut s = self.sampler();
        let g = s.sample(x, key).to_vec();
        Ok(GradientSample {
            g,
            record: record(key, 0),
        })
    }

    /// One draw of the untransformed oracle.
    pub fn base_sample(&self, x: &[f64], key: NoiseKey, draw: u32) -> Result<GradientSample> {
        check_dim(self.dim(), x.len())?;
        let mut s = self.sampler();
        let g = s.base(x, key, draw).to_vec();
        Ok(GradientSample {
            g,
            record: record(key, draw),
        })
    }

    pub fn svag_sample(&self, x: &[f64], key: NoiseKey) -> Result<GradientSample> {
        let ell = self
            .svag_ell
            .ok_or_else(|| Error::Input("svag_sample needs an oracle with svag_ell set".into()))?;
        check_dim(self.dim(), x.len())?;
        let mut s = self.sampler();
        let g = s.svag(ell, x, key).to_vec();
        Ok(GradientSample {
            g,
            record: record(key, 0),
        })
    }

    pub fn sampler(&self) -> Sampler<'_> {
        let d = self.dim();
        let p = self.noise.noise_dim(d);
        Sampler {
            oracle: self,
            g: vec![0.0; d],
            v: vec![0.0; d],
            xi: vec![0.0; p],
            xi2: vec![0.0; p],
        }
    }
}

fn record(key: NoiseKey, draw: u32) -> NoiseRecord {
    NoiseRecord {
        seed: key.seed,
        trajectory: key.trajectory,
        step: key.step,
        draw,
    }
}

/// Allocation-free sampling with reusable buffers.
pub struct Sampler<'a> {
    oracle: &'a Oracle,
    g: Vec<f64>,
    v: Vec<f64>,
    xi: Vec<f64>,
    xi2: Vec<f64>,
}

impl Sampler<'_> {
    pub fn oracle(&self) -> &Oracle {
        self.oracle
    }

    pub fn sample(&mut self, x: &[f64], key: NoiseKey) -> &[f64] {
        match self.oracle.svag_ell {
            Some(ell) if ell != 1.0 => self.svag(ell, x, key),
            _ => self.base(x, key, 0),
        }
    }

    pub fn base(&mut self, x: &[f64], key: NoiseKey, draw: u32) -> &[f64] {
        let o = self.oracle;
        o.landscape.gradient_into(x, &mut self.g);
        if o.sigma != 0.0 {
            key.fill_normal(Domain::Gradient, draw, &mut self.xi);
            o.noise.apply_sqrt_into(x, &self.xi, &mut self.v);
            for (gi, vi) in self.g.iter_mut().zip(&self.v) {
                *gi += o.sigma * vi;
            }
        }
        &self.g
    }

    /// `r₁g₁ + r₂g₂` with `g₂` on draw 0 and `g₁` on draw 1, so that `ℓ = 1`
    /// reproduces the base oracle. Evaluated as `∇L + σΣ^{1/2}(r₁ξ₁ + r₂ξ₂)`,
    /// which uses `r₁ + r₂ = 1` exactly.
    pub fn svag(&mut self, ell: f64, x: &[f64], key: NoiseKey) -> &[f64] {
        if ell == 1.0 {
            return self.base(x, key, 0);
        }
        let (r1, r2) = svag_coefficients(ell).expect("validated ell");
        let o = self.oracle;
        o.landscape.gradient_into(x, &mut self.g);
        if o.sigma != 0.0 {
            key.fill_normal(Domain::Gradient, 0, &mut self.xi2);
            key.fill_normal(Domain::Gradient, 1, &mut self.xi);
            for (a, b) in self.xi.iter_mut().zip(&self.xi2) {
                *a = r1 * *a + r2 * b;
            }
            o.noise.apply_sqrt_into(x, &self.xi, &mut self.v);
            for (gi, vi) in self.g.iter_mut().zip(&self.v) {
                *gi += o.sigma * vi;
            }
        }
        &self.g
    }
}
