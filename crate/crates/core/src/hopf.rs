//! Hopf points as solutions of the extended system
//!
//! ```text
//! F(lambda, u)            = 0
//! D_u F g_r + beta g_i    = 0
//! D_u F g_i - beta g_r    = 0
//! g_r[k] - 1              = 0
//! g_i[k]                  = 0
//! ```
//!
//! in the unknowns `(lambda, beta, u, g_r, g_i)`, so that `g_r + i g_i` is an
//! eigenvector of `D_u F` for the eigenvalue `i beta`.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues_qr, complex_eigenvector, lu_solve, norm_inf, Complex, DenseMatrix};
use crate::model::ModelSystem;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 30;
/// Relative step for the finite differences of `D_u F` in `u` and `lambda`.
pub const SECOND_DERIVATIVE_STEP: f64 = 1e-6;
/// A pair `mu +- i nu` counts as near the imaginary axis when `|mu| <= AXIS_RATIO |nu|`.
pub const AXIS_RATIO: f64 = 0.25;

/// How the normalisation index `k` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KPolicy {
    /// Component of largest modulus of the complex eigenvector.
    #[default]
    LargestModulus,
    /// Fixed 1-based index.
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfPoint {
    pub lambda: f64,
    pub beta: f64,
    pub u: Vec<f64>,
    pub g_r: Vec<f64>,
    pub g_i: Vec<f64>,
    /// 1-based normalisation index.
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfReport {
    pub point: HopfPoint,
    pub iterations: usize,
    pub history: Vec<f64>,
}

impl HopfPoint {
    pub fn dim(&self) -> usize {
        self.u.len()
    }

    /// Period of the emerging cycle, `2 pi / beta`.
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.beta
    }

    fn pack(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(3 * self.dim() + 2);
        x.push(self.lambda);
        x.push(self.beta);
        x.extend(&self.u);
        x.extend(&self.g_r);
        x.extend(&self.g_i);
        x
    }

    fn unpack(x: &[f64], k: usize) -> Self {
        let n = (x.len() - 2) / 3;
        Self {
            lambda: x[0],
            beta: x[1],
            u: x[2..2 + n].to_vec(),
            g_r: x[2 + n..2 + 2 * n].to_vec(),
            g_i: x[2 + 2 * n..2 + 3 * n].to_vec(),
            k,
        }
    }

    /// Key-value text block; floats are written with round-trip precision.
    pub fn write_key_value<W: Write>(&self, out: &mut W, residual: Option<f64>) -> std::io::Result<()> {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
        writeln!(out, "lambda = {:e}", self.lambda)?;
        writeln!(out, "beta = {:e}", self.beta)?;
        writeln!(out, "period = {:e}", self.period())?;
        writeln!(out, "k = {}", self.k)?;
        writeln!(out, "u = {}", join(&self.u))?;
        writeln!(out, "g_r = {}", join(&self.g_r))?;
        writeln!(out, "g_i = {}", join(&self.g_i))?;
        if let Some(r) = residual {
            writeln!(out, "residual = {r:e}")?;
        }
        Ok(())
    }

    /// Parses the block written by [`HopfPoint::write_key_value`]. Lines
    /// starting with `#` and blank lines are ignored; `period` and
    /// `residual` are informational.
    pub fn read_key_value<R: BufRead>(input: R) -> Result<Self> {
        let mut lambda = None;
        let mut beta = None;
        let mut k = None;
        let mut u = None;
        let mut g_r = None;
        let mut g_i = None;
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let scalar = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {key}: {e}", lineno + 1)))
            };
            let vector = |v: &str| -> Result<Vec<f64>> { v.split_whitespace().map(scalar).collect() };
            match key {
                "lambda" => lambda = Some(scalar(value)?),
                "beta" => beta = Some(scalar(value)?),
                "k" => {
                    k = Some(
                        value
                            .parse::<usize>()
                            .map_err(|e| Error::Parse(format!("line {}: k: {e}", lineno + 1)))?,
                    )
                }
                "u" => u = Some(vector(value)?),
                "g_r" => g_r = Some(vector(value)?),
                "g_i" => g_i = Some(vector(value)?),
                "period" | "residual" => {
                    scalar(value)?;
                }
                other => return Err(Error::Parse(format!("line {}: unknown key `{other}`", lineno + 1))),
            }
        }
        let missing = |name: &str| Error::Parse(format!("missing key `{name}`"));
        let point = HopfPoint {
            lambda: lambda.ok_or_else(|| missing("lambda"))?,
            beta: beta.ok_or_else(|| missing("beta"))?,
            k: k.ok_or_else(|| missing("k"))?,
            u: u.ok_or_else(|| missing("u"))?,
            g_r: g_r.ok_or_else(|| missing("g_r"))?,
            g_i: g_i.ok_or_else(|| missing("g_i"))?,
        };
        let n = point.u.len();
        if n == 0 || point.g_r.len() != n || point.g_i.len() != n {
            return Err(Error::Parse("u, g_r and g_i must have the same nonzero length".into()));
        }
        if point.k == 0 || point.k > n {
            return Err(Error::Parse(format!("k = {} outside 1..={n}", point.k)));
        }
        if !(point.beta > 0.0) {
            return Err(Error::Parse(format!("beta = {} must be positive", point.beta)));
        }
        Ok(point)
    }
}

/// Residual of the extended system, ordered as the equations in the module
/// documentation.
pub fn hopf_residual<M: ModelSystem + ?Sized>(model: &M, p: &HopfPoint) -> Result<Vec<f64>> {
    let n = model.dim();
    if p.u.len() != n || p.g_r.len() != n || p.g_i.len() != n {
        return Err(Error::invalid("Hopf point dimensions do not match the model"));
    }
    if p.k == 0 || p.k > n {
        return Err(Error::invalid(format!("normalisation index k = {} outside 1..={n}", p.k)));
    }
    let jac = model.jac_u(p.lambda, &p.u)?;
    let jr = jac.mul_vec(&p.g_r);
    let ji = jac.mul_vec(&p.g_i);
    let mut r = model.rhs(p.lambda, &p.u)?;
    r.extend(jr.iter().zip(&p.g_i).map(|(a, b)| a + p.beta * b));
    r.extend(ji.iter().zip(&p.g_r).map(|(a, b)| a - p.beta * b));
    r.push(p.g_r[p.k - 1] - 1.0);
    r.push(p.g_i[p.k - 1]);
    Ok(r)
}

/// Builds an iterate for [`refine_hopf`] from an equilibrium near a Hopf
/// point: picks the complex pair closest to the imaginary axis, computes its
/// eigenvector, and scales it so that `g[k] = 1`.
pub fn hopf_initial_guess<M: ModelSystem + ?Sized>(
    model: &M,
    lambda: f64,
    u: &[f64],
    k_policy: KPolicy,
) -> Result<HopfPoint> {
    let n = model.dim();
    if u.len() != n {
        return Err(Error::invalid(format!("state has {} components, model expects {n}", u.len())));
    }
    let jac = model.jac_u(lambda, u)?;
    let ev = eigenvalues_qr(&jac)?;
    let mu = ev
        .iter()
        .filter(|z| z.im > 0.0)
        .min_by(|a, b| a.re.abs().total_cmp(&b.re.abs()))
        .copied()
        .ok_or_else(|| Error::NotHopf(format!("D_u F has no complex eigenvalues at lambda = {lambda}")))?;
    if mu.re.abs() > AXIS_RATIO * mu.im {
        return Err(Error::NotHopf(format!(
            "closest complex pair {:e} +- {:e}i is not near the imaginary axis",
            mu.re, mu.im
        )));
    }
    let (re, im) = complex_eigenvector(&jac, mu)?;
    let k = match k_policy {
        KPolicy::LargestModulus => {
            (0..n)
                .max_by(|&a, &b| re[a].hypot(im[a]).total_cmp(&re[b].hypot(im[b])))
                .expect("nonempty state")
                + 1
        }
        KPolicy::Fixed(k) if (1..=n).contains(&k) => k,
        KPolicy::Fixed(k) => {
            return Err(Error::invalid(format!("normalisation index k = {k} outside 1..={n}")));
        }
    };
    let pivot = Complex::new(re[k - 1], im[k - 1]);
    if pivot.norm() == 0.0 {
        return Err(Error::HopfSingular { k });
    }
    let mut g_r = Vec::with_capacity(n);
    let mut g_i = Vec::with_capacity(n);
    for j in 0..n {
        let z = Complex::new(re[j], im[j]).div(pivot);
        g_r.push(z.re);
        g_i.push(z.im);
    }
    // exact by construction
    g_r[k - 1] = 1.0;
    g_i[k - 1] = 0.0;
    Ok(HopfPoint {
        lambda,
        beta: mu.im,
        u: u.to_vec(),
        g_r,
        g_i,
        k,
    })
}

/// `(D_u F(lambda, u + h e_j) - D_u F(lambda, u - h e_j)) g / 2h` as columns.
fn directional_second_derivative<M: ModelSystem + ?Sized>(
    model: &M,
    lambda: f64,
    u: &[f64],
    g: &[f64],
) -> Result<DenseMatrix> {
    let n = u.len();
    let mut out = DenseMatrix::zeros(n, n);
    let mut up = u.to_vec();
    let mut um = u.to_vec();
    for j in 0..n {
        let h = SECOND_DERIVATIVE_STEP * u[j].abs().max(1.0);
        up[j] = u[j] + h;
        um[j] = u[j] - h;
        let fp = model.jac_u(lambda, &up)?.mul_vec(g);
        let fm = model.jac_u(lambda, &um)?.mul_vec(g);
        for i in 0..n {
            out[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
        up[j] = u[j];
        um[j] = u[j];
    }
    Ok(out)
}

fn lambda_derivative_of_product<M: ModelSystem + ?Sized>(
    model: &M,
    lambda: f64,
    u: &[f64],
    g: &[f64],
) -> Result<Vec<f64>> {
    let h = SECOND_DERIVATIVE_STEP * lambda.abs().max(1.0);
    let fp = model.jac_u(lambda + h, u)?.mul_vec(g);
    let fm = model.jac_u(lambda - h, u)?.mul_vec(g);
    Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
}

/// Jacobian of the extended system in the unknowns `(lambda, beta, u, g_r, g_i)`.
fn extended_jacobian<M: ModelSystem + ?Sized>(model: &M, p: &HopfPoint) -> Result<DenseMatrix> {
    let n = model.dim();
    let m = 3 * n + 2;
    let jac = model.jac_u(p.lambda, &p.u)?;
    let jl = model.jac_lambda(p.lambda, &p.u)?;
    let d2r = directional_second_derivative(model, p.lambda, &p.u, &p.g_r)?;
    let d2i = directional_second_derivative(model, p.lambda, &p.u, &p.g_i)?;
    let dlr = lambda_derivative_of_product(model, p.lambda, &p.u, &p.g_r)?;
    let dli = lambda_derivative_of_product(model, p.lambda, &p.u, &p.g_i)?;
    let (cu, cr, ci) = (2, 2 + n, 2 + 2 * n);
    let mut a = DenseMatrix::zeros(m, m);
    for i in 0..n {
        // F
        a[(i, 0)] = jl[i];
        // D_u F g_r + beta g_i
        let r = n + i;
        a[(r, 0)] = dlr[i];
        a[(r, 1)] = p.g_i[i];
        a[(r, ci + i)] = p.beta;
        // D_u F g_i - beta g_r
        let s = 2 * n + i;
        a[(s, 0)] = dli[i];
        a[(s, 1)] = -p.g_r[i];
        a[(s, cr + i)] = -p.beta;
        for j in 0..n {
            a[(i, cu + j)] = jac[(i, j)];
            a[(r, cu + j)] = d2r[(i, j)];
            a[(r, cr + j)] = jac[(i, j)];
            a[(s, cu + j)] = d2i[(i, j)];
            a[(s, ci + j)] = jac[(i, j)];
        }
    }
    a[(3 * n, cr + p.k - 1)] = 1.0;
    a[(3 * n + 1, ci + p.k - 1)] = 1.0;
    Ok(a)
}

/// Newton's method on the extended system. `beta` is kept positive by
/// flipping the sign of `(beta, g_i)` whenever a step crosses zero.
pub fn refine_hopf<M: ModelSystem + ?Sized>(
    model: &M,
    iterate: &HopfPoint,
    tol: f64,
    max_iter: usize,
) -> Result<HopfReport> {
    let mut p = iterate.clone();
    let mut history = Vec::new();
    for it in 0..=max_iter {
        let r = hopf_residual(model, &p)?;
        let res = norm_inf(&r);
        history.push(res);
        if res <= tol {
            return Ok(HopfReport {
                point: p,
                iterations: it,
                history,
            });
        }
        if it == max_iter || !res.is_finite() {
            break;
        }
        let a = extended_jacobian(model, &p)?;
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = match lu_solve(&a, &neg) {
            Ok(d) => d,
            Err(Error::SingularMatrix { .. }) => return Err(Error::HopfSingular { k: p.k }),
            Err(e) => return Err(e),
        };
        let x: Vec<f64> = p.pack().iter().zip(&delta).map(|(x, d)| x + d).collect();
        p = HopfPoint::unpack(&x, p.k);
        if p.beta < 0.0 {
            p.beta = -p.beta;
            for v in p.g_i.iter_mut() {
                *v = -*v;
            }
        }
    }
    Err(Error::NewtonNoConvergence {
        iterations: max_iter,
        residual: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}
