//! Equilibria, Hopf points and branches of limit cycles of one-parameter ODE
//! systems `u' = F(lambda, u)`, with the Luo-Rudy I ventricular cell model as
//! the main instance.
//!
//! The pipeline is: continue equilibria and bracket sign changes of the
//! Hopf test function ([`equilibrium`]), refine a Hopf point on the extended
//! system ([`hopf`]), then continue the emerging cycles as solutions of a
//! periodic boundary-value problem discretised with quadratic finite
//! elements in time ([`cycle`], [`fem`]).

pub mod convergence;
pub mod cycle;
pub mod equilibrium;
pub mod error;
pub mod fem;
pub mod format;
pub mod hopf;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod quadrature;

pub use cycle::{CycleSettings, CycleSolution, NewtonControl};
pub use equilibrium::{EquilibriumBranch, EquilibriumPoint, NewtonSettings};
pub use error::{Error, Result};
pub use fem::{Mesh, PeriodicGridFunction};
pub use hopf::{HopfPoint, KPolicy};
pub use model::{HopfNormalForm, LuoRudy, ModelSystem, ParameterSet, PotassiumReversal};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
