//! Analytic loss landscapes with exact gradients and Hessian-vector products.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm, norm_sq, Mat};

/// Points closer to the origin than this are outside the sphere's attraction
/// region; the radial projection is undefined at 0.
pub const ORIGIN_EPS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Landscape {
    /// `L(x) = ½ xᵀAx − bᵀx`
    Quadratic { a: Mat, b: Vec<f64> },
    /// `L(x) = c·x`
    ConstantGradient { c: Vec<f64> },
    /// `L(x) = ¼(‖x‖² − r²)²`; minimizers form the sphere of radius `r`.
    SphereQuartic { dim: usize, target_radius: f64 },
}

impl Landscape {
    pub fn quadratic(a: Mat, b: Vec<f64>) -> Result<Self> {
        let l = Landscape::Quadratic { a, b };
        l.validate()?;
        Ok(l)
    }

    pub fn constant_gradient(c: Vec<f64>) -> Result<Self> {
        let l = Landscape::ConstantGradient { c };
        l.validate()?;
        Ok(l)
    }

    pub fn sphere(dim: usize, target_radius: f64) -> Result<Self> {
        let l = Landscape::SphereQuartic { dim, target_radius };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Landscape::Quadratic { a, b } => {
                if b.is_empty() {
                    return Err(Error::Input("quadratic: dimension must be positive".into()));
                }
                if a.rows() != b.len() || a.cols() != b.len() {
                    return Err(Error::Input(format!(
                        "quadratic: A is {}x{} but b has length {}",
                        a.rows(),
                        a.cols(),
                        b.len()
                    )));
                }
                if !a.is_psd() {
                    return Err(Error::Input(
                        "quadratic: A must be symmetric positive semidefinite".into(),
                    ));
                }
            }
            Landscape::ConstantGradient { c } => {
                if c.is_empty() {
                    return Err(Error::Input("constant_gradient: c must be non-empty".into()));
                }
            }
            Landscape::SphereQuartic { dim, target_radius } => {
                if *dim == 0 {
                    return Err(Error::Input("sphere_quartic: dim must be positive".into()));
                }
                if !(target_radius.is_finite() && *target_radius > 0.0) {
                    return Err(Error::Input(
                        "sphere_quartic: target_radius must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Landscape::Quadratic { b, .. } => b.len(),
            Landscape::ConstantGradient { c } => c.len(),
            Landscape::SphereQuartic { dim, .. } => *dim,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Landscape::Quadratic { a, b } => {
                let mut ax = vec![0.0; x.len()];
                a.mul_vec_into(x, &mut ax);
                0.5 * dot(x, &ax) - dot(b, x)
            }
            Landscape::ConstantGradient { c } => dot(c, x),
            Landscape::SphereQuartic { target_radius, .. } => {
                let s = norm_sq(x) - target_radius * target_radius;
                0.25 * s * s
            }
        }
    }

    /// Writes `∇L(x)` into `out`. Dimensions are the caller's responsibility.
    #[inline]
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Landscape::Quadratic { a, b } => {
                a.mul_vec_into(x, out);
                for (o, bi) in out.iter_mut().zip(b) {
                    *o -= bi;
                }
            }
            Landscape::ConstantGradient { c } => out.copy_from_slice(c),
            Landscape::SphereQuartic { target_radius, .. } => {
                let s = norm_sq(x) - target_radius * target_radius;
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = s * xi;
                }
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.gradient_into(x, &mut g);
        g
    }

    /// `∇²L(x)·u`
    pub fn hessian_vector(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        match self {
            Landscape::Quadratic { a, .. } => a.mul_vec(u),
            Landscape::ConstantGradient { c } => vec![0.0; c.len()],
            Landscape::SphereQuartic { target_radius, .. } => {
                let s = norm_sq(x) - target_radius * target_radius;
                let xu = dot(x, u);
                x.iter().zip(u).map(|(xi, ui)| s * ui + 2.0 * xi * xu).collect()
            }
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Mat {
        let d = self.dim();
        let mut h = Mat::zeros(d, d);
        let mut e = vec![0.0; d];
        for j in 0..d {
            e[j] = 1.0;
            let col = self.hessian_vector(x, &e);
            for (i, v) in col.into_iter().enumerate() {
                h[(i, j)] = v;
            }
            e[j] = 0.0;
        }
        h
    }

    /// Value and gradient with a dimension check.
    pub fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.dim(), x.len())?;
        Ok((self.value(x), self.gradient(x)))
    }
}

/// The minimizer manifold of a [`Landscape::SphereQuartic`] together with its
/// gradient-flow projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    landscape: Landscape,
    radius: f64,
}

impl ManifoldSpec {
    pub fn new(landscape: Landscape) -> Result<Self> {
        landscape.validate()?;
        match landscape {
            Landscape::SphereQuartic { target_radius, .. } => Ok(Self {
                radius: target_radius,
                landscape,
            }),
            _ => Err(Error::Unsupported(
                "minimizer manifolds are only available for sphere_quartic".into(),
            )),
        }
    }

    pub fn sphere(dim: usize, radius: f64) -> Result<Self> {
        Self::new(Landscape::sphere(dim, radius)?)
    }

    pub fn landscape(&self) -> &Landscape {
        &self.landscape
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.landscape.dim()
    }

    pub fn in_attraction_region(&self, x: &[f64]) -> bool {
        norm(x) > ORIGIN_EPS
    }

    pub fn distance_to_manifold(&self, x: &[f64]) -> f64 {
        (norm(x) - self.radius).abs()
    }

    /// Closed-form limit of the gradient flow: `r·x/‖x‖`.
    pub fn phi_analytic_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = norm(x);
        if !(n > ORIGIN_EPS) {
            return Err(Error::Domain(format!(
                "‖x‖ = {n:e} is outside the attraction region (needs > {ORIGIN_EPS:e})"
            )));
        }
        let s = self.radius / n;
        for (o, xi) in out.iter_mut().zip(x) {
            *o = s * xi;
        }
        Ok(())
    }

    pub fn phi_analytic(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut out = vec![0.0; x.len()];
        self.phi_analytic_into(x, &mut out)?;
        Ok(out)
    }
}
