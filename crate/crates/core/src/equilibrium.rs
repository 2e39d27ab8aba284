//! Equilibria of `F(lambda, u) = 0`: Newton solves, a least-squares search
//! for a first point, secant pseudo-arclength continuation, and detection of
//! Hopf candidates through the eigenvalues of `D_u F`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::format::fmt_sig;
use crate::linalg::{dot, eigenvalues_qr, lu_solve, norm_inf, DenseMatrix};
use crate::model::ModelSystem;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 25;
/// Residual threshold for accepting a least-squares start.
pub const SEARCH_THRESHOLD: f64 = 1e-8;
pub const MAX_BISECTIONS: usize = 50;
/// Eigenvalues with `|im|` at or below this count as real for the test function.
pub const IMAG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Result of a Newton solve: the root plus its convergence record.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// `||F||_inf` before each iteration and at the returned point.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumPoint {
    pub lambda: f64,
    pub u: Vec<f64>,
    /// Largest real part over eigenvalues with nonzero imaginary part; NaN
    /// when there is no complex pair or the eigenvalues were not computed.
    pub test_fn: f64,
}

impl EquilibriumPoint {
    pub fn new(lambda: f64, u: Vec<f64>) -> Self {
        Self {
            lambda,
            u,
            test_fn: f64::NAN,
        }
    }

    /// `(u, lambda)` as one vector.
    fn extended(&self) -> Vec<f64> {
        let mut x = self.u.clone();
        x.push(self.lambda);
        x
    }

    fn from_extended(mut x: Vec<f64>) -> Self {
        let lambda = x.pop().expect("extended vector is nonempty");
        Self::new(lambda, x)
    }
}

#[derive(Debug, Clone)]
pub struct StepFailure {
    pub step: usize,
    pub error: Error,
}

#[derive(Debug, Clone)]
pub struct EquilibriumBranch {
    pub points: Vec<EquilibriumPoint>,
    pub ds: f64,
    /// +1 when lambda increased over the first pair, -1 otherwise.
    pub direction: f64,
    pub failure: Option<StepFailure>,
}

fn check_dims<M: ModelSystem + ?Sized>(model: &M, u: &[f64]) -> Result<()> {
    if u.len() != model.dim() {
        return Err(Error::invalid(format!(
            "state has {} components, model expects {}",
            u.len(),
            model.dim()
        )));
    }
    Ok(())
}

/// Shared Newton driver. `step` returns the residual at `x` and the Newton
/// correction; the loop handles stopping and divergence.
fn newton_loop<S>(mut x: Vec<f64>, settings: NewtonSettings, mut step: S) -> Result<NewtonReport>
where
    S: FnMut(&[f64]) -> Result<(f64, Option<Vec<f64>>)>,
{
    let mut history = Vec::new();
    let mut growth = 0;
    for it in 0..=settings.max_iter {
        let wants_step = it < settings.max_iter;
        let (res, delta) = step(&x)?;
        history.push(res);
        if res <= settings.tol {
            return Ok(NewtonReport {
                u: x,
                iterations: it,
                residual: res,
                history,
            });
        }
        if history.len() >= 2 && res > history[history.len() - 2] {
            growth += 1;
            if growth >= 3 {
                return Err(Error::NewtonDivergence { history });
            }
        } else {
            growth = 0;
        }
        if !wants_step {
            break;
        }
        let delta = delta.expect("step provides a correction while iterating");
        for (xi, di) in x.iter_mut().zip(delta) {
            *xi += di;
        }
    }
    Err(Error::NewtonNoConvergence {
        iterations: settings.max_iter,
        residual: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

/// Newton's method on `F(lambda, .) = 0` at fixed `lambda`.
pub fn newton_equilibrium<M: ModelSystem + ?Sized>(
    model: &M,
    lambda: f64,
    guess: &[f64],
    settings: NewtonSettings,
) -> Result<NewtonReport> {
    check_dims(model, guess)?;
    newton_loop(guess.to_vec(), settings, |u| {
        let f = model.rhs(lambda, u)?;
        let res = norm_inf(&f);
        if res <= settings.tol {
            return Ok((res, None));
        }
        let jac = model.jac_u(lambda, u)?;
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        Ok((res, Some(lu_solve(&jac, &rhs)?)))
    })
}

/// Newton on `F = 0` augmented with one linear row `<a, (u, lambda)> = b`.
fn newton_bordered<M: ModelSystem + ?Sized>(
    model: &M,
    x0: Vec<f64>,
    row: &[f64],
    rhs_value: f64,
    settings: NewtonSettings,
) -> Result<NewtonReport> {
    let n = model.dim();
    newton_loop(x0, settings, |x| {
        let (u, lambda) = (&x[..n], x[n]);
        let mut r = model.rhs(lambda, u)?;
        r.push(dot(row, x) - rhs_value);
        let res = norm_inf(&r);
        if res <= settings.tol {
            return Ok((res, None));
        }
        let ju = model.jac_u(lambda, u)?;
        let jl = model.jac_lambda(lambda, u)?;
        let mut a = DenseMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = ju[(i, j)];
            }
            a[(i, n)] = jl[i];
        }
        a.row_mut(n).copy_from_slice(row);
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        Ok((res, Some(lu_solve(&a, &neg)?)))
    })
}

/// Lattice of cell centres: `per_axis` cells along every coordinate.
fn lattice(bounds: &[(f64, f64)], per_axis: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
    let total = per_axis.pow(bounds.len() as u32);
    (0..total).map(move |mut idx| {
        bounds
            .iter()
            .map(|&(lo, hi)| {
                let cell = idx % per_axis;
                idx /= per_axis;
                lo + (hi - lo) * (cell as f64 + 0.5) / per_axis as f64
            })
            .collect()
    })
}

fn clamp_into(u: &mut [f64], bounds: &[(f64, f64)]) {
    for (x, &(lo, hi)) in u.iter_mut().zip(bounds) {
        *x = x.clamp(lo, hi);
    }
}

/// Levenberg-Marquardt minimisation of the row-equilibrated residual inside
/// `bounds` from one start. Columns are scaled by the box widths and rows by
/// the Jacobian row norms at the start, so that equations of very different
/// magnitude weigh alike. Stops once the unscaled residual meets `threshold`.
fn damped_gauss_newton<M: ModelSystem + ?Sized>(
    model: &M,
    lambda: f64,
    mut u: Vec<f64>,
    bounds: &[(f64, f64)],
    threshold: f64,
) -> Option<(Vec<f64>, f64)> {
    let n = model.dim();
    let width: Vec<f64> = bounds.iter().map(|(lo, hi)| hi - lo).collect();
    let jac0 = model.jac_u(lambda, &u).ok()?;
    let row_scale: Vec<f64> = (0..n)
        .map(|r| {
            let norm = (0..n).map(|c| (jac0[(r, c)] * width[c]).abs()).fold(0.0, f64::max);
            if norm > 0.0 {
                1.0 / norm
            } else {
                1.0
            }
        })
        .collect();
    let scaled = |f: &[f64]| -> Vec<f64> { f.iter().zip(&row_scale).map(|(a, b)| a * b).collect() };

    let mut f = model.rhs(lambda, &u).ok()?;
    let mut fs = scaled(&f);
    let mut cost = dot(&fs, &fs);
    let mut mu = 1e-3;
    for _ in 0..500 {
        if norm_inf(&f) <= threshold {
            break;
        }
        let mut jac = model.jac_u(lambda, &u).ok()?;
        for r in 0..n {
            for c in 0..n {
                jac[(r, c)] *= row_scale[r] * width[c];
            }
        }
        let jt = jac.transpose();
        let jtj = jt.mul(&jac);
        let neg_grad: Vec<f64> = jt.mul_vec(&fs).iter().map(|v| -v).collect();
        let mut accepted = false;
        while mu < 1e14 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += mu * jtj[(i, i)].max(1e-12);
            }
            if let Ok(delta) = lu_solve(&a, &neg_grad) {
                let mut trial: Vec<f64> = (0..n).map(|i| u[i] + width[i] * delta[i]).collect();
                clamp_into(&mut trial, bounds);
                if let Ok(ft) = model.rhs(lambda, &trial) {
                    let fts = scaled(&ft);
                    let ct = dot(&fts, &fts);
                    if ct < cost {
                        u = trial;
                        f = ft;
                        fs = fts;
                        cost = ct;
                        mu = (mu * 0.3).max(1e-14);
                        accepted = true;
                        break;
                    }
                }
            }
            mu *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    Some((u, norm_inf(&f)))
}

/// Finds a point with `||F(lambda, u)||_inf <= 1e-8` inside `bounds` by
/// damped Gauss-Newton from a deterministic lattice of starts.
pub fn find_initial_equilibrium<M: ModelSystem + ?Sized>(
    model: &M,
    lambda: f64,
    bounds: &[(f64, f64)],
) -> Result<Vec<f64>> {
    if bounds.len() != model.dim() {
        return Err(Error::invalid(format!(
            "search box has {} intervals, model has {} components",
            bounds.len(),
            model.dim()
        )));
    }
    if let Some(&(lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::invalid(format!("bad search interval [{lo}, {hi}]")));
    }
    // about 256 starts whatever the dimension
    let per_axis = ((256f64).powf(1.0 / bounds.len() as f64).floor() as usize).max(1);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in lattice(bounds, per_axis) {
        let Some((u, res)) = damped_gauss_newton(model, lambda, start, bounds, SEARCH_THRESHOLD) else {
            continue;
        };
        if res <= SEARCH_THRESHOLD {
            return Ok(u);
        }
        if best.as_ref().is_none_or(|(_, r)| res < *r) {
            best = Some((u, res));
        }
    }
    let (best, best_residual) = best.unwrap_or((Vec::new(), f64::INFINITY));
    Err(Error::SearchFailed {
        threshold: SEARCH_THRESHOLD,
        best_residual,
        best,
    })
}

/// Unit tangent of the equilibrium curve at a regular point, oriented so
/// that its lambda component has the sign of `direction` (ties: decreasing).
pub fn equilibrium_tangent<M: ModelSystem + ?Sized>(
    model: &M,
    point: &EquilibriumPoint,
    direction: f64,
) -> Result<Vec<f64>> {
    let n = model.dim();
    let ju = model.jac_u(point.lambda, &point.u)?;
    let jl = model.jac_lambda(point.lambda, &point.u)?;
    let mut du = lu_solve(&ju, &jl)?;
    for v in du.iter_mut() {
        *v = -*v;
    }
    du.push(1.0);
    let norm = dot(&du, &du).sqrt();
    let sign = if direction > 0.0 { 1.0 } else { -1.0 };
    debug_assert_eq!(du.len(), n + 1);
    Ok(du.into_iter().map(|v| sign * v / norm).collect())
}

/// Second point for continuation: the tangent predictor `start + ds t`
/// corrected on the hyperplane orthogonal to the tangent.
pub fn second_point<M: ModelSystem + ?Sized>(
    model: &M,
    start: &EquilibriumPoint,
    ds: f64,
    direction: f64,
    settings: NewtonSettings,
) -> Result<EquilibriumPoint> {
    let t = equilibrium_tangent(model, start, direction)?;
    let x0 = start.extended();
    let pred: Vec<f64> = x0.iter().zip(&t).map(|(x, ti)| x + ds.abs() * ti).collect();
    let b = dot(&t, &pred);
    let report = newton_bordered(model, pred, &t, b, settings)?;
    Ok(EquilibriumPoint::from_extended(report.u))
}

/// Secant pseudo-arclength continuation. Each new point solves `F = 0` with
/// `<x - x_n, (x_n - x_{n-1}) / ds> = ds` where `x = (u, lambda)`; the branch
/// runs in the direction of the pair `(start, second)`. Only `|ds|` matters.
pub fn continue_equilibria<M: ModelSystem + ?Sized>(
    model: &M,
    start: EquilibriumPoint,
    second: EquilibriumPoint,
    ds: f64,
    steps: usize,
    settings: NewtonSettings,
) -> Result<EquilibriumBranch> {
    check_dims(model, &start.u)?;
    check_dims(model, &second.u)?;
    if ds == 0.0 || !ds.is_finite() {
        return Err(Error::invalid(format!("arclength step ds = {ds} must be finite and nonzero")));
    }
    let direction = if second.lambda >= start.lambda { 1.0 } else { -1.0 };
    let mut points = vec![start, second];
    let mut failure = None;
    for step in 0..steps {
        let prev = points[points.len() - 2].extended();
        let cur = points[points.len() - 1].extended();
        let secant: Vec<f64> = cur.iter().zip(&prev).map(|(c, p)| (c - p) / ds).collect();
        // <x, secant> = <cur, secant> + ds
        let b = dot(&cur, &secant) + ds;
        let pred: Vec<f64> = cur.iter().zip(&prev).map(|(c, p)| 2.0 * c - p).collect();
        match newton_bordered(model, pred, &secant, b, settings) {
            Ok(report) => points.push(EquilibriumPoint::from_extended(report.u)),
            Err(error) => {
                failure = Some(StepFailure { step, error });
                break;
            }
        }
    }
    Ok(EquilibriumBranch {
        points,
        ds,
        direction,
        failure,
    })
}

/// Residual of the secant arclength relation between `points[i..i+3]`.
pub fn arclength_defect(points: &[EquilibriumPoint], ds: f64) -> f64 {
    let (p0, p1, p2) = (points[0].extended(), points[1].extended(), points[2].extended());
    let mut acc = 0.0;
    for k in 0..p0.len() {
        acc += (p2[k] - p1[k]) * (p1[k] - p0[k]) / ds;
    }
    acc - ds
}

/// Largest real part among the complex eigenvalues of `D_u F`.
pub fn hopf_test_function<M: ModelSystem + ?Sized>(model: &M, lambda: f64, u: &[f64]) -> Result<Option<f64>> {
    let ev = eigenvalues_qr(&model.jac_u(lambda, u)?)?;
    Ok(ev.max_complex_real_part(IMAG_TOL))
}

#[derive(Debug, Clone)]
pub struct HopfScan {
    /// Consecutive index pairs `(i, i + 1)` where the test function changes sign.
    pub brackets: Vec<(usize, usize)>,
    /// Points whose eigenvalues could not be computed.
    pub skipped: Vec<StepFailure>,
}

/// Fills in `test_fn` on every branch point and reports sign changes.
pub fn scan_branch_for_hopf<M: ModelSystem + ?Sized>(model: &M, branch: &mut EquilibriumBranch) -> Result<HopfScan> {
    if branch.points.len() < 2 {
        return Err(Error::invalid("a branch scan needs at least two points"));
    }
    let mut skipped = Vec::new();
    for (i, p) in branch.points.iter_mut().enumerate() {
        p.test_fn = match hopf_test_function(model, p.lambda, &p.u) {
            Ok(v) => v.unwrap_or(f64::NAN),
            Err(error) => {
                skipped.push(StepFailure { step: i, error });
                f64::NAN
            }
        };
    }
    let brackets = branch
        .points
        .windows(2)
        .enumerate()
        .filter(|(_, w)| {
            let (a, b) = (w[0].test_fn, w[1].test_fn);
            a.is_finite() && b.is_finite() && ((a < 0.0 && b >= 0.0) || (a >= 0.0 && b < 0.0))
        })
        .map(|(i, _)| (i, i + 1))
        .collect();
    Ok(HopfScan { brackets, skipped })
}

/// Bisection on the test function between two bracketing equilibria; each
/// trial point is the secant prediction corrected on the hyperplane
/// orthogonal to the secant. Returns the point where the bracket collapsed.
pub fn refine_hopf_bracket<M: ModelSystem + ?Sized>(
    model: &M,
    a: &EquilibriumPoint,
    b: &EquilibriumPoint,
    settings: NewtonSettings,
) -> Result<EquilibriumPoint> {
    let xa = a.extended();
    let xb = b.extended();
    let secant: Vec<f64> = xb.iter().zip(&xa).map(|(p, q)| p - q).collect();
    let len = dot(&secant, &secant).sqrt();
    let test = |x: &EquilibriumPoint| -> Result<f64> {
        hopf_test_function(model, x.lambda, &x.u)?
            .ok_or_else(|| Error::NotHopf(format!("no complex eigenvalue pair at lambda = {}", x.lambda)))
    };
    let fa = test(a)?;
    let fb = test(b)?;
    if (fa < 0.0) == (fb < 0.0) {
        return Err(Error::NotHopf(format!(
            "test function does not change sign across the bracket ({fa:e}, {fb:e})"
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut f_lo = fa;
    let mut best = if fa.abs() <= fb.abs() { a.clone() } else { b.clone() };
    for _ in 0..MAX_BISECTIONS {
        let theta = 0.5 * (lo + hi);
        let pred: Vec<f64> = xa.iter().zip(&secant).map(|(x, s)| x + theta * s).collect();
        let rhs = dot(&secant, &pred);
        let report = newton_bordered(model, pred, &secant, rhs, settings)?;
        let mut p = EquilibriumPoint::from_extended(report.u);
        let f = test(&p)?;
        p.test_fn = f;
        best = p;
        if (f < 0.0) == (f_lo < 0.0) {
            lo = theta;
            f_lo = f;
        } else {
            hi = theta;
        }
        if (hi - lo) * len <= 1e-12 * (1.0 + len) || f == 0.0 {
            break;
        }
    }
    Ok(best)
}

/// CSV with columns `step,lambda,<components>,testfn`.
pub fn write_branch_csv<W: Write>(out: &mut W, branch: &EquilibriumBranch, names: &[&str]) -> std::io::Result<()> {
    write!(out, "step,lambda")?;
    for name in names {
        write!(out, ",{name}")?;
    }
    writeln!(out, ",testfn")?;
    for (i, p) in branch.points.iter().enumerate() {
        write!(out, "{i},{}", fmt_sig(p.lambda))?;
        for x in &p.u {
            write!(out, ",{}", fmt_sig(*x))?;
        }
        writeln!(out, ",{}", if p.test_fn.is_nan() { "nan".to_string() } else { fmt_sig(p.test_fn) })?;
    }
    Ok(())
}
