//! Planar Hopf normal form, used as a model with closed-form equilibria,
//! Hopf point and periodic orbits.
//!
//! ```text
//! x' = lambda x - omega y - x (x^2 + y^2)
//! y' = omega x + lambda y - y (x^2 + y^2)
//! ```
//!
//! The origin loses stability at `lambda = 0` with eigenvalues
//! `lambda +- i omega`; for `lambda > 0` the circle of radius `sqrt(lambda)`
//! is a stable cycle of period `2 pi / omega`.

use super::ModelSystem;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

const NAMES: [&str; 2] = ["x", "y"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfNormalForm {
    pub omega: f64,
}

impl HopfNormalForm {
    pub fn new(omega: f64) -> Result<Self> {
        if !omega.is_finite() || omega == 0.0 {
            return Err(Error::invalid(format!("omega = {omega} must be finite and nonzero")));
        }
        Ok(Self { omega })
    }

    fn check(&self, lambda: f64, u: &[f64]) -> Result<()> {
        if u.len() != 2 {
            return Err(Error::invalid(format!("expected 2 state components, got {}", u.len())));
        }
        if !lambda.is_finite() || u.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("non-finite input to the normal form"));
        }
        Ok(())
    }
}

/// The normal form with unit frequency.
pub fn hopf_normal_form_model() -> HopfNormalForm {
    HopfNormalForm { omega: 1.0 }
}

impl ModelSystem for HopfNormalForm {
    fn dim(&self) -> usize {
        2
    }

    fn component_names(&self) -> &[&'static str] {
        &NAMES
    }

    fn rhs(&self, lambda: f64, u: &[f64]) -> Result<Vec<f64>> {
        self.check(lambda, u)?;
        let (x, y) = (u[0], u[1]);
        let r2 = x * x + y * y;
        Ok(vec![
            lambda * x - self.omega * y - x * r2,
            self.omega * x + lambda * y - y * r2,
        ])
    }

    fn jac_u(&self, lambda: f64, u: &[f64]) -> Result<DenseMatrix> {
        self.check(lambda, u)?;
        let (x, y) = (u[0], u[1]);
        let r2 = x * x + y * y;
        DenseMatrix::from_row_major(
            2,
            2,
            vec![
                lambda - r2 - 2.0 * x * x,
                -self.omega - 2.0 * x * y,
                self.omega - 2.0 * x * y,
                lambda - r2 - 2.0 * y * y,
            ],
        )
    }

    fn jac_lambda(&self, lambda: f64, u: &[f64]) -> Result<Vec<f64>> {
        self.check(lambda, u)?;
        Ok(vec![u[0], u[1]])
    }

    fn default_search_box(&self) -> Option<Vec<(f64, f64)>> {
        Some(vec![(-1.0, 1.0), (-1.0, 1.0)])
    }
}
