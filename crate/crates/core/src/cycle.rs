//! Periodic orbits by finite elements in time.
//!
//! A cycle of period `T` is written on the unit interval, `du/dt = T F(lambda, u)`,
//! and discretised with periodic P2 elements. The Galerkin equations
//!
//! ```text
//! int u_i psi_l' dt + T int F_i(lambda, u) psi_l dt = 0      (every test function, component)
//! int <u, d(phase_ref)/dt> dt                       = 0      (phase)
//! int <u - u*, u**> dt + (T - T*) T** + (lambda - lambda*) lambda** = ds   (arclength)
//! ```
//!
//! are solved by Newton's method. Unknowns are ordered node-major (all
//! components of node 0, then node 1, ...), then `T`, then `lambda`.
//!
//! The first step leaves the Hopf point along `phi(t) = sin(2 pi t) g_r + cos(2 pi t) g_i`
//! with `u* = u0`, `u** = phi`, `T** = lambda** = 0`, and `phi` as phase
//! reference. Later steps use divided differences of the last two cycles as
//! the starred-star data and the last cycle as both `u*` and phase reference.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::fem::{basis_eval, LocalNode, Mesh, PeriodicGridFunction, QuadratureCache};
use crate::format::fmt_sig;
use crate::hopf::HopfPoint;
use crate::linalg::{lu_solve, norm_inf, DenseMatrix};
use crate::model::ModelSystem;
use crate::quadrature::{gauss3_integrate, gauss3_integrate_vec};

pub const DEFAULT_TOL: f64 = 1e-9;
/// Absolute cap on the accepted residual, whatever the period.
pub const DEFAULT_ABS_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 20;

/// Newton stopping rule: accept when `||r||_inf <= tol * max(1, |T|)` and
/// `||r||_inf <= abs_tol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonControl {
    pub tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonControl {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            abs_tol: DEFAULT_ABS_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl NewtonControl {
    pub fn accepts(&self, residual: f64, period: f64) -> bool {
        residual <= self.tol * period.abs().max(1.0) && residual <= self.abs_tol
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::invalid(format!("tol = {} must be positive", self.tol)));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::invalid(format!("abs_tol = {} must be positive", self.abs_tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be positive"));
        }
        Ok(())
    }
}
pub const DEFAULT_MAX_HALVINGS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleSettings {
    pub n_elements: usize,
    /// Nominal arclength step.
    pub ds: f64,
    /// Number of cycles to compute, the first step included.
    pub steps: usize,
    pub newton: NewtonControl,
    /// Retries with a halved step before a step is declared failed.
    pub max_halvings: usize,
}

impl Default for CycleSettings {
    fn default() -> Self {
        Self {
            n_elements: 20,
            ds: 1.0,
            steps: 500,
            newton: NewtonControl::default(),
            max_halvings: DEFAULT_MAX_HALVINGS,
        }
    }
}

impl CycleSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_elements < 2 {
            return Err(Error::invalid(format!("n_elements = {} must be at least 2", self.n_elements)));
        }
        if !self.ds.is_finite() || self.ds == 0.0 {
            return Err(Error::invalid(format!("ds = {} must be finite and nonzero", self.ds)));
        }
        self.newton.validate()
    }
}

/// A point `(lambda, T, u)` of the discrete problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleIterate {
    pub lambda: f64,
    pub period: f64,
    pub states: PeriodicGridFunction,
}

/// Reference data for the phase and arclength equations.
#[derive(Debug, Clone, PartialEq)]
pub struct StarredData {
    pub lambda_star: f64,
    pub period_star: f64,
    pub states_star: PeriodicGridFunction,
    pub lambda_dir: f64,
    pub period_dir: f64,
    pub states_dir: PeriodicGridFunction,
    pub phase_ref: PeriodicGridFunction,
    pub ds: f64,
}

impl StarredData {
    /// Data of the first step off a Hopf point.
    pub fn hopf_start(hopf: &HopfPoint, mesh: Mesh, ds: f64) -> Self {
        let phi = phase_seed_phi(hopf, mesh);
        Self {
            lambda_star: hopf.lambda,
            period_star: hopf.period(),
            states_star: PeriodicGridFunction::constant(mesh, &hopf.u),
            lambda_dir: 0.0,
            period_dir: 0.0,
            states_dir: phi.clone(),
            phase_ref: phi,
            ds,
        }
    }

    /// Secant data from two consecutive cycles `previous -> current` that
    /// were `ds_used` apart; the next cycle is sought `ds` further on.
    pub fn secant(previous: &CycleIterate, current: &CycleIterate, ds_used: f64, ds: f64) -> Self {
        Self {
            lambda_star: current.lambda,
            period_star: current.period,
            states_star: current.states.clone(),
            lambda_dir: (current.lambda - previous.lambda) / ds_used,
            period_dir: (current.period - previous.period) / ds_used,
            states_dir: current.states.divided_difference(&previous.states, ds_used),
            phase_ref: current.states.clone(),
            ds,
        }
    }

    /// Replaces the arclength equation by `lambda = lambda_fixed`.
    pub fn fixed_lambda(lambda_fixed: f64, phase_ref: PeriodicGridFunction) -> Self {
        let zeros = PeriodicGridFunction::zeros(phase_ref.mesh(), phase_ref.dim());
        Self {
            lambda_star: lambda_fixed,
            period_star: 0.0,
            states_star: zeros.clone(),
            lambda_dir: 1.0,
            period_dir: 0.0,
            states_dir: zeros,
            phase_ref,
            ds: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleResidual {
    /// Weak-form residual, node-major like the states.
    pub weak: Vec<f64>,
    pub phase: f64,
    pub arclength: f64,
}

impl CycleResidual {
    pub fn norm_inf(&self) -> f64 {
        norm_inf(&self.weak).max(self.phase.abs()).max(self.arclength.abs())
    }

    fn to_vec(&self) -> Vec<f64> {
        let mut r = self.weak.clone();
        r.push(self.phase);
        r.push(self.arclength);
        r
    }
}

#[derive(Debug, Clone)]
pub struct CycleSolution {
    pub lambda: f64,
    pub period: f64,
    pub states: PeriodicGridFunction,
    pub residual_norm: f64,
    /// Continuation step index, 0 for the first cycle off the Hopf point.
    pub step: usize,
    pub newton_iterations: usize,
    /// Residual norm before each Newton iteration and at the accepted point.
    pub history: Vec<f64>,
    /// Reference data the cycle was solved against.
    pub anchor: StarredData,
}

impl CycleSolution {
    pub fn iterate(&self) -> CycleIterate {
        CycleIterate {
            lambda: self.lambda,
            period: self.period,
            states: self.states.clone(),
        }
    }
}

/// Square system of the Newton step: `matrix * delta = rhs`.
#[derive(Debug, Clone)]
pub struct BorderedNewtonSystem {
    pub matrix: DenseMatrix,
    pub rhs: Vec<f64>,
}

/// Samples `phi(t) = sin(2 pi t) g_r + cos(2 pi t) g_i` at the mesh nodes.
pub fn phase_seed_phi(hopf: &HopfPoint, mesh: Mesh) -> PeriodicGridFunction {
    PeriodicGridFunction::from_fn(mesh, hopf.dim(), |t| {
        let (s, c) = (2.0 * PI * t).sin_cos();
        hopf.g_r.iter().zip(&hopf.g_i).map(|(r, i)| s * r + c * i).collect()
    })
    .expect("sampler returns state-sized vectors")
}

fn element_error(element: usize, e: Error) -> Error {
    match e {
        Error::Domain(message) => Error::ElementDomain { element, message },
        other => other,
    }
}

fn check_shapes<M: ModelSystem + ?Sized>(model: &M, states: &PeriodicGridFunction, anchor: &StarredData) -> Result<()> {
    let n = model.dim();
    let mesh = states.mesh();
    for g in [states, &anchor.states_star, &anchor.states_dir, &anchor.phase_ref] {
        if g.dim() != n || g.mesh() != mesh {
            return Err(Error::invalid("grid functions must share the mesh and the model dimension"));
        }
    }
    Ok(())
}

/// Residual of the weak equations only.
pub fn assemble_weak_residual<M: ModelSystem + ?Sized>(
    model: &M,
    lambda: f64,
    period: f64,
    states: &PeriodicGridFunction,
) -> Result<Vec<f64>> {
    let n = model.dim();
    let cache = QuadratureCache::new(states.mesh());
    let mut r = vec![0.0; states.values().len()];
    for k in 0..states.mesh().n_elements() {
        let nodes = cache.nodes(k);
        let uq = states.at_gauss_points(&cache, k);
        for q in 0..3 {
            let f = model.rhs(lambda, &uq[q]).map_err(|e| element_error(k, e))?;
            let w = cache.weights[q];
            for (l, &jl) in nodes.iter().enumerate() {
                for c in 0..n {
                    r[jl * n + c] += w * (uq[q][c] * cache.dpsi[l][q] + period * f[c] * cache.psi[l][q]);
                }
            }
        }
    }
    Ok(r)
}

/// Residual of all three equation groups at `(lambda, T, states)`.
pub fn assemble_cycle_residual<M: ModelSystem + ?Sized>(
    model: &M,
    lambda: f64,
    period: f64,
    states: &PeriodicGridFunction,
    anchor: &StarredData,
) -> Result<CycleResidual> {
    check_shapes(model, states, anchor)?;
    let cache = QuadratureCache::new(states.mesh());
    let weak = assemble_weak_residual(model, lambda, period, states)?;
    let phase = states.derivative_pairing(&anchor.phase_ref, &cache);
    let arclength = states.l2_inner(&anchor.states_dir, &cache) - anchor.states_star.l2_inner(&anchor.states_dir, &cache)
        + (period - anchor.period_star) * anchor.period_dir
        + (lambda - anchor.lambda_star) * anchor.lambda_dir
        - anchor.ds;
    Ok(CycleResidual { weak, phase, arclength })
}

/// Jacobian and negative residual of the discrete system at `iterate`.
///
/// Rows per test function and component: advection block `int psi_i psi_l'`
/// plus `T int (D_u F psi_i) psi_l`, `T`-column `int F psi_l`, `lambda`-column
/// `T int D_lambda F psi_l`. Then the phase row and the arclength row.
pub fn assemble_bordered_system<M: ModelSystem + ?Sized>(
    model: &M,
    anchor: &StarredData,
    iterate: &CycleIterate,
) -> Result<(BorderedNewtonSystem, CycleResidual)> {
    let states = &iterate.states;
    check_shapes(model, states, anchor)?;
    let (lambda, period) = (iterate.lambda, iterate.period);
    let n = model.dim();
    let mesh = states.mesh();
    let cache = QuadratureCache::new(mesh);
    let nu = n * mesh.n_unknown_nodes();
    let (col_t, col_l) = (nu, nu + 1);
    let (row_phase, row_arc) = (nu, nu + 1);
    let mut a = DenseMatrix::zeros(nu + 2, nu + 2);
    let mut weak = vec![0.0; nu];
    let mut phase = 0.0;
    let mut arclength = 0.0;

    for k in 0..mesh.n_elements() {
        let nodes = cache.nodes(k);
        let uq = states.at_gauss_points(&cache, k);
        let ref_dq = anchor.phase_ref.derivative_at_gauss_points(&cache, k);
        let dir_q = anchor.states_dir.at_gauss_points(&cache, k);
        let star_q = anchor.states_star.at_gauss_points(&cache, k);
        for q in 0..3 {
            let u = &uq[q];
            let f = model.rhs(lambda, u).map_err(|e| element_error(k, e))?;
            let jac = model.jac_u(lambda, u).map_err(|e| element_error(k, e))?;
            let fl = model.jac_lambda(lambda, u).map_err(|e| element_error(k, e))?;
            let w = cache.weights[q];
            for c in 0..n {
                phase += w * u[c] * ref_dq[q][c];
                arclength += w * (u[c] - star_q[q][c]) * dir_q[q][c];
            }
            for (l, &jl) in nodes.iter().enumerate() {
                let (psi_l, dpsi_l) = (cache.psi[l][q], cache.dpsi[l][q]);
                for c in 0..n {
                    let row = jl * n + c;
                    weak[row] += w * (u[c] * dpsi_l + period * f[c] * psi_l);
                    a[(row, col_t)] += w * f[c] * psi_l;
                    a[(row, col_l)] += w * period * fl[c] * psi_l;
                    for (i, &ji) in nodes.iter().enumerate() {
                        let psi_i = cache.psi[i][q];
                        let tw = w * period * psi_i * psi_l;
                        let arow = a.row_mut(row);
                        for (d, entry) in arow[ji * n..(ji + 1) * n].iter_mut().enumerate() {
                            *entry += tw * jac[(c, d)];
                        }
                        arow[ji * n + c] += w * psi_i * dpsi_l;
                    }
                }
                let psi_w = w * psi_l;
                for c in 0..n {
                    a[(row_phase, jl * n + c)] += psi_w * ref_dq[q][c];
                    a[(row_arc, jl * n + c)] += psi_w * dir_q[q][c];
                }
            }
        }
    }
    a[(row_arc, col_t)] = anchor.period_dir;
    a[(row_arc, col_l)] = anchor.lambda_dir;
    arclength += (period - anchor.period_star) * anchor.period_dir + (lambda - anchor.lambda_star) * anchor.lambda_dir
        - anchor.ds;

    let residual = CycleResidual { weak, phase, arclength };
    let rhs = residual.to_vec().iter().map(|v| -v).collect();
    Ok((BorderedNewtonSystem { matrix: a, rhs }, residual))
}

/// One Newton iteration: returns the next iterate and the residual norm at
/// the current one.
///
/// The linearised equations are solved for the correction `delta` with
/// `A delta = -r(x)`; since the discrete equations are affine in the next
/// iterate, `x + delta` is exactly the solution of the affine system
/// `A x_next = A x - r(x)`.
pub fn newton_iterate<M: ModelSystem + ?Sized>(
    model: &M,
    anchor: &StarredData,
    iterate: &CycleIterate,
) -> Result<(CycleIterate, f64)> {
    let (system, residual) = assemble_bordered_system(model, anchor, iterate)?;
    let delta = lu_solve(&system.matrix, &system.rhs)?;
    Ok((apply_correction(iterate, &delta), residual.norm_inf()))
}

/// Residual norms at `initial` and after each of `iterations` Newton steps,
/// with no stopping test. Used to measure the convergence order.
pub fn newton_residual_history<M: ModelSystem + ?Sized>(
    model: &M,
    anchor: &StarredData,
    initial: CycleIterate,
    iterations: usize,
) -> Result<Vec<f64>> {
    let mut x = initial;
    let mut history = Vec::with_capacity(iterations + 1);
    for _ in 0..iterations {
        let (next, res) = newton_iterate(model, anchor, &x)?;
        history.push(res);
        x = next;
    }
    history.push(assemble_cycle_residual(model, x.lambda, x.period, &x.states, anchor)?.norm_inf());
    Ok(history)
}

fn apply_correction(iterate: &CycleIterate, delta: &[f64]) -> CycleIterate {
    let nu = iterate.states.values().len();
    let mut states = iterate.states.clone();
    for (x, d) in states.values_mut().iter_mut().zip(&delta[..nu]) {
        *x += d;
    }
    CycleIterate {
        lambda: iterate.lambda + delta[nu + 1],
        period: iterate.period + delta[nu],
        states,
    }
}

/// Newton's method until `control` accepts the residual.
pub fn solve_cycle<M: ModelSystem + ?Sized>(
    model: &M,
    anchor: &StarredData,
    initial: CycleIterate,
    control: &NewtonControl,
) -> Result<(CycleIterate, Vec<f64>)> {
    let max_iter = control.max_iter;
    let mut x = initial;
    let mut history = Vec::new();
    for it in 0..=max_iter {
        if !(x.period > 0.0) || !x.period.is_finite() || !x.lambda.is_finite() {
            return Err(Error::NewtonNoConvergence {
                iterations: it,
                residual: f64::NAN,
                history,
            });
        }
        let (system, residual) = assemble_bordered_system(model, anchor, &x)?;
        let res = residual.norm_inf();
        history.push(res);
        if control.accepts(res, x.period) {
            return Ok((x, history));
        }
        if it == max_iter || !res.is_finite() {
            break;
        }
        let delta = lu_solve(&system.matrix, &system.rhs)?;
        x = apply_correction(&x, &delta);
    }
    Err(Error::NewtonNoConvergence {
        iterations: max_iter,
        residual: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

fn accept(x: CycleIterate, history: Vec<f64>, step: usize, anchor: StarredData) -> CycleSolution {
    CycleSolution {
        lambda: x.lambda,
        period: x.period,
        states: x.states,
        residual_norm: *history.last().expect("history has the accepted residual"),
        step,
        newton_iterations: history.len() - 1,
        history,
        anchor,
    }
}

/// The first cycle off a Hopf point with arclength step `ds`.
pub fn first_cycle_step<M: ModelSystem + ?Sized>(
    model: &M,
    hopf: &HopfPoint,
    ds: f64,
    settings: &CycleSettings,
) -> Result<CycleSolution> {
    if hopf.dim() != model.dim() {
        return Err(Error::invalid("Hopf point dimension does not match the model"));
    }
    let mesh = Mesh::new(settings.n_elements)?;
    let anchor = StarredData::hopf_start(hopf, mesh, ds);
    let initial = CycleIterate {
        lambda: hopf.lambda,
        period: hopf.period(),
        states: anchor.states_star.axpy(ds, &anchor.states_dir),
    };
    let (x, history) = solve_cycle(model, &anchor, initial, &settings.newton)?;
    Ok(accept(x, history, 0, anchor))
}

/// The two most recent cycles and the step that separated them.
#[derive(Debug, Clone)]
pub struct ContinuationState {
    pub previous: CycleIterate,
    pub current: CycleIterate,
    /// Arclength step between `previous` and `current`.
    pub ds_last: f64,
    /// Step to attempt next.
    pub ds_next: f64,
    /// Index of `current`.
    pub step: usize,
}

impl ContinuationState {
    /// State after the first cycle; the Hopf point plays the previous cycle.
    pub fn after_first_step(hopf: &HopfPoint, first: &CycleSolution, ds: f64) -> Self {
        Self {
            previous: CycleIterate {
                lambda: hopf.lambda,
                period: hopf.period(),
                states: PeriodicGridFunction::constant(first.states.mesh(), &hopf.u),
            },
            current: first.iterate(),
            ds_last: ds,
            ds_next: ds,
            step: first.step,
        }
    }
}

/// One continuation step at `state.ds_next`, started from the current cycle.
/// Does not retry and does not modify `state`.
pub fn continuation_step<M: ModelSystem + ?Sized>(
    model: &M,
    state: &ContinuationState,
    settings: &CycleSettings,
) -> Result<CycleSolution> {
    let anchor = StarredData::secant(&state.previous, &state.current, state.ds_last, state.ds_next);
    let (x, history) = solve_cycle(model, &anchor, state.current.clone(), &settings.newton)?;
    Ok(accept(x, history, state.step + 1, anchor))
}

#[derive(Debug, Clone)]
pub struct CycleRun {
    pub cycles: Vec<CycleSolution>,
    /// Set when the run stopped before `settings.steps` cycles.
    pub failure: Option<Error>,
}

fn is_retryable(e: &Error) -> bool {
    matches!(
        e,
        Error::NewtonNoConvergence { .. }
            | Error::NewtonDivergence { .. }
            | Error::SingularMatrix { .. }
            | Error::ElementDomain { .. }
            | Error::Domain(_)
    )
}

/// Runs `attempt(ds)` with `ds`, `ds / 2`, ... until it succeeds or the
/// halvings are exhausted. Returns the solution and the step that worked.
fn with_halving<T, F>(ds: f64, max_halvings: usize, mut attempt: F) -> Result<(T, f64)>
where
    F: FnMut(f64) -> Result<T>,
{
    let mut ds = ds;
    let mut halvings = 0;
    loop {
        match attempt(ds) {
            Ok(v) => return Ok((v, ds)),
            Err(e) if halvings < max_halvings && is_retryable(&e) => {
                ds *= 0.5;
                halvings += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// First step followed by continuation steps until `settings.steps` cycles
/// are computed or a step fails after all retries. A failed step halves the
/// arclength step and retries; after a success the step grows back by a
/// factor of two per step up to the nominal value. `on_cycle` sees every
/// accepted cycle.
pub fn run_cycle_continuation_with<M, F>(
    model: &M,
    hopf: &HopfPoint,
    settings: &CycleSettings,
    mut on_cycle: F,
) -> Result<CycleRun>
where
    M: ModelSystem + ?Sized,
    F: FnMut(&CycleSolution),
{
    settings.validate()?;
    let mut cycles = Vec::new();
    if settings.steps == 0 {
        return Ok(CycleRun { cycles, failure: None });
    }
    let (first, ds) = match with_halving(settings.ds, settings.max_halvings, |ds| {
        first_cycle_step(model, hopf, ds, settings)
    }) {
        Ok(v) => v,
        Err(e) => {
            return Ok(CycleRun {
                cycles,
                failure: Some(Error::CycleStep { step: 0, source: Box::new(e) }),
            })
        }
    };
    on_cycle(&first);
    let mut state = ContinuationState::after_first_step(hopf, &first, ds);
    state.ds_next = grow(ds, settings.ds);
    cycles.push(first);

    let mut failure = None;
    while cycles.len() < settings.steps {
        let attempt = with_halving(state.ds_next, settings.max_halvings, |ds| {
            let trial = ContinuationState { ds_next: ds, ..state.clone() };
            continuation_step(model, &trial, settings)
        });
        match attempt {
            Ok((sol, ds)) => {
                on_cycle(&sol);
                state = ContinuationState {
                    previous: std::mem::replace(&mut state.current, sol.iterate()),
                    current: sol.iterate(),
                    ds_last: ds,
                    ds_next: grow(ds, settings.ds),
                    step: sol.step,
                };
                cycles.push(sol);
            }
            Err(e) => {
                failure = Some(Error::CycleStep {
                    step: state.step + 1,
                    source: Box::new(e),
                });
                break;
            }
        }
    }
    Ok(CycleRun { cycles, failure })
}

fn grow(ds: f64, nominal: f64) -> f64 {
    if ds.abs() >= nominal.abs() {
        nominal
    } else {
        2.0 * ds
    }
}

pub fn run_cycle_continuation<M: ModelSystem + ?Sized>(
    model: &M,
    hopf: &HopfPoint,
    settings: &CycleSettings,
) -> Result<CycleRun> {
    run_cycle_continuation_with(model, hopf, settings, |_| {})
}

/// Cycle at a prescribed `lambda`: the arclength equation is replaced by
/// `lambda = lambda_fixed`, the phase is pinned to `phase_ref`.
pub fn solve_cycle_at_fixed_lambda<M: ModelSystem + ?Sized>(
    model: &M,
    lambda_fixed: f64,
    initial: CycleIterate,
    phase_ref: PeriodicGridFunction,
    control: &NewtonControl,
) -> Result<CycleSolution> {
    let anchor = StarredData::fixed_lambda(lambda_fixed, phase_ref);
    let (x, history) = solve_cycle(model, &anchor, initial, control)?;
    Ok(accept(x, history, 0, anchor))
}

/// Re-evaluates the three equation groups at an accepted cycle by direct
/// interpolation and per-element Gauss integration, without the assembly
/// routines used by the solver.
pub fn recheck_cycle<M: ModelSystem + ?Sized>(model: &M, cycle: &CycleSolution) -> Result<CycleResidual> {
    let states = &cycle.states;
    let anchor = &cycle.anchor;
    check_shapes(model, states, anchor)?;
    let n = model.dim();
    let mesh = states.mesh();
    let h = mesh.element_length();
    let mut weak = vec![0.0; states.values().len()];
    let mut phase = 0.0;
    let mut arc = 0.0;
    for k in 0..mesh.n_elements() {
        let (lo, hi) = (k as f64 * h, (k + 1) as f64 * h);
        let local = |t: f64| ((t - lo) / h).clamp(0.0, 1.0);
        for l in LocalNode::ALL {
            let jl = mesh.global_index(k, l);
            let contrib = gauss3_integrate_vec(
                |t| -> Result<Vec<f64>> {
                    let (psi, dpsi_ref) = basis_eval(l, local(t));
                    let u = states.eval_local(k, local(t));
                    let f = model.rhs(cycle.lambda, &u).map_err(|e| element_error(k, e))?;
                    Ok((0..n).map(|c| u[c] * dpsi_ref / h + cycle.period * f[c] * psi).collect())
                },
                lo,
                hi,
                n,
            )?;
            for (c, v) in contrib.into_iter().enumerate() {
                weak[jl * n + c] += v;
            }
        }
        phase += gauss3_integrate(
            |t| {
                let u = states.eval_local(k, local(t));
                let d = derivative_local(&anchor.phase_ref, k, local(t));
                u.iter().zip(&d).map(|(a, b)| a * b).sum()
            },
            lo,
            hi,
        );
        arc += gauss3_integrate(
            |t| {
                let u = states.eval_local(k, local(t));
                let s = anchor.states_star.eval_local(k, local(t));
                let d = anchor.states_dir.eval_local(k, local(t));
                (0..n).map(|c| (u[c] - s[c]) * d[c]).sum()
            },
            lo,
            hi,
        );
    }
    arc += (cycle.period - anchor.period_star) * anchor.period_dir + (cycle.lambda - anchor.lambda_star) * anchor.lambda_dir
        - anchor.ds;
    Ok(CycleResidual {
        weak,
        phase,
        arclength: arc,
    })
}

fn derivative_local(g: &PeriodicGridFunction, element: usize, s: f64) -> Vec<f64> {
    let h = g.mesh().element_length();
    let mut out = vec![0.0; g.dim()];
    for l in LocalNode::ALL {
        let (_, d) = basis_eval(l, s);
        for (o, x) in out.iter_mut().zip(g.node(g.mesh().global_index(element, l))) {
            *o += d / h * x;
        }
    }
    out
}

/// One CSV holding every cycle: a `cycle` record with the scalar data,
/// followed by one `node` record per geometric node.
pub fn write_cycle_branch_csv<W: Write>(out: &mut W, cycles: &[CycleSolution], names: &[&str]) -> std::io::Result<()> {
    writeln!(out, "# cycle records: cycle,step,lambda,T,residual")?;
    write!(out, "# node records: node,step,node,t")?;
    for name in names {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    for c in cycles {
        writeln!(
            out,
            "cycle,{},{},{},{}",
            c.step,
            fmt_sig(c.lambda),
            fmt_sig(c.period),
            fmt_sig(c.residual_norm)
        )?;
        let mesh = c.states.mesh();
        for j in 0..mesh.n_geometric_nodes() {
            write!(out, "node,{},{j},{}", c.step, fmt_sig(mesh.node_abscissa(j)))?;
            for x in c.states.node(j % mesh.n_unknown_nodes()) {
                write!(out, ",{}", fmt_sig(*x))?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Per-cycle summary: step, lambda, T, and nodal min/max of the first two
/// components.
pub fn write_cycle_summary_csv<W: Write>(out: &mut W, cycles: &[CycleSolution], names: &[&str]) -> std::io::Result<()> {
    write!(out, "step,lambda,T")?;
    for name in names.iter().take(2) {
        write!(out, ",min_{name},max_{name}")?;
    }
    writeln!(out)?;
    for c in cycles {
        write!(out, "{},{},{}", c.step, fmt_sig(c.lambda), fmt_sig(c.period))?;
        for comp in 0..c.states.dim().min(2) {
            let v = c.states.component(comp);
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            write!(out, ",{},{}", fmt_sig(lo), fmt_sig(hi))?;
        }
        writeln!(out)?;
    }
    Ok(())
}
