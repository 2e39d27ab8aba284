//! Parameterised vector fields `du/dt = F(lambda, u)` with analytic Jacobians.

mod luo_rudy;
mod normal_form;
pub mod rates;

pub use luo_rudy::{LuoRudy, ParameterSet, PotassiumReversal, StateVector};
pub use normal_form::{hopf_normal_form_model, HopfNormalForm};
pub use rates::{rate_functions, RateFunctionTable};

use crate::error::Result;
use crate::linalg::DenseMatrix;

/// A one-parameter family of vector fields.
///
/// Implementations must be pure: identical inputs give bitwise identical
/// outputs, and `jac_u` / `jac_lambda` are the exact derivatives of `rhs`.
pub trait ModelSystem: Send + Sync {
    fn dim(&self) -> usize;

    /// Short names of the state components, used as CSV column headers.
    fn component_names(&self) -> &[&'static str];

    fn rhs(&self, lambda: f64, u: &[f64]) -> Result<Vec<f64>>;

    fn jac_u(&self, lambda: f64, u: &[f64]) -> Result<DenseMatrix>;

    fn jac_lambda(&self, lambda: f64, u: &[f64]) -> Result<Vec<f64>>;

    /// Box used by the least-squares search for a first equilibrium.
    fn default_search_box(&self) -> Option<Vec<(f64, f64)>> {
        None
    }
}

/// Central finite-difference Jacobian in `u`, step `rel_step * max(1, |u_j|)`.
/// Test and diagnostics helper; the solvers use the analytic Jacobians.
pub fn finite_difference_jac_u<M: ModelSystem + ?Sized>(
    model: &M,
    lambda: f64,
    u: &[f64],
    rel_step: f64,
) -> Result<DenseMatrix> {
    let n = model.dim();
    let mut jac = DenseMatrix::zeros(n, n);
    let mut up = u.to_vec();
    let mut um = u.to_vec();
    for j in 0..n {
        let h = rel_step * u[j].abs().max(1.0);
        up[j] = u[j] + h;
        um[j] = u[j] - h;
        let fp = model.rhs(lambda, &up)?;
        let fm = model.rhs(lambda, &um)?;
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
        up[j] = u[j];
        um[j] = u[j];
    }
    Ok(jac)
}

/// Central finite difference of `rhs` in `lambda`.
pub fn finite_difference_jac_lambda<M: ModelSystem + ?Sized>(
    model: &M,
    lambda: f64,
    u: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    let fp = model.rhs(lambda + step, u)?;
    let fm = model.rhs(lambda - step, u)?;
    Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * step)).collect())
}

impl<M: ModelSystem + ?Sized> ModelSystem for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn component_names(&self) -> &[&'static str] {
        (**self).component_names()
    }
    fn rhs(&self, lambda: f64, u: &[f64]) -> Result<Vec<f64>> {
        (**self).rhs(lambda, u)
    }
    fn jac_u(&self, lambda: f64, u: &[f64]) -> Result<DenseMatrix> {
        (**self).jac_u(lambda, u)
    }
    fn jac_lambda(&self, lambda: f64, u: &[f64]) -> Result<Vec<f64>> {
        (**self).jac_lambda(lambda, u)
    }
    fn default_search_box(&self) -> Option<Vec<(f64, f64)>> {
        (**self).default_search_box()
    }
}

impl<M: ModelSystem + ?Sized> ModelSystem for Box<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn component_names(&self) -> &[&'static str] {
        (**self).component_names()
    }
    fn rhs(&self, lambda: f64, u: &[f64]) -> Result<Vec<f64>> {
        (**self).rhs(lambda, u)
    }
    fn jac_u(&self, lambda: f64, u: &[f64]) -> Result<DenseMatrix> {
        (**self).jac_u(lambda, u)
    }
    fn jac_lambda(&self, lambda: f64, u: &[f64]) -> Result<Vec<f64>> {
        (**self).jac_lambda(lambda, u)
    }
    fn default_search_box(&self) -> Option<Vec<(f64, f64)>> {
        (**self).default_search_box()
    }
}
