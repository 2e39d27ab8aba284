use super::{DenseMatrix, LuFactorization};
use crate::error::{Error, Result};

/// Complex number as a (re, im) pair; only what the eigen code needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn norm(self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn div(self, other: Complex) -> Complex {
        let d = other.re * other.re + other.im * other.im;
        Complex::new(
            (self.re * other.re + self.im * other.im) / d,
            (self.im * other.re - self.re * other.im) / d,
        )
    }
}

/// All eigenvalues of a real matrix. Complex pairs are stored adjacently,
/// positive imaginary part first.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexEigenvalueList(pub Vec<Complex>);

impl ComplexEigenvalueList {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Complex> {
        self.0.iter()
    }

    /// Largest real part among eigenvalues whose imaginary part is nonzero
    /// relative to `imag_tol`; `None` when all eigenvalues are real.
    pub fn max_complex_real_part(&self, imag_tol: f64) -> Option<f64> {
        self.0
            .iter()
            .filter(|z| z.im.abs() > imag_tol)
            .map(|z| z.re)
            .fold(None, |acc, re| Some(acc.map_or(re, |m: f64| m.max(re))))
    }

    /// Eigenvalues sorted by (re, im), handy for comparisons in tests.
    pub fn sorted(&self) -> Vec<Complex> {
        let mut v = self.0.clone();
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }
}

const DEFLATION_TOL: f64 = 1e-12;

/// Eigenvalues by balancing, Householder reduction to upper Hessenberg form,
/// and Francis double-shift QR iteration.
pub fn eigenvalues_qr(a: &DenseMatrix) -> Result<ComplexEigenvalueList> {
    if !a.is_square() {
        return Err(Error::invalid("eigenvalues need a square matrix"));
    }
    let mut h = a.clone();
    balance(&mut h);
    hessenberg(&mut h);
    hqr(&mut h)
}

/// Scales rows and columns by powers of two so that row and column norms are
/// comparable. A similarity transform, so eigenvalues are unchanged.
fn balance(a: &mut DenseMatrix) {
    const RADIX: f64 = 2.0;
    let n = a.rows();
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[(i, j)] *= g;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
    }
}

/// In-place Householder reduction to upper Hessenberg form.
fn hessenberg(a: &mut DenseMatrix) {
    let n = a.rows();
    if n < 3 {
        return;
    }
    let mut v = vec![0.0; n];
    for k in 0..n - 2 {
        let alpha_norm: f64 = (k + 1..n).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
        if alpha_norm == 0.0 {
            continue;
        }
        let alpha = if a[(k + 1, k)] > 0.0 { -alpha_norm } else { alpha_norm };
        for i in 0..n {
            v[i] = if i > k { a[(i, k)] } else { 0.0 };
        }
        v[k + 1] -= alpha;
        let vnorm2: f64 = v[k + 1..].iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // A <- (I - 2vv'/v'v) A (I - 2vv'/v'v)
        for j in 0..n {
            let s: f64 = (k + 1..n).map(|i| v[i] * a[(i, j)]).sum::<f64>() * 2.0 / vnorm2;
            for i in k + 1..n {
                a[(i, j)] -= s * v[i];
            }
        }
        for i in 0..n {
            let s: f64 = (k + 1..n).map(|j| a[(i, j)] * v[j]).sum::<f64>() * 2.0 / vnorm2;
            for j in k + 1..n {
                a[(i, j)] -= s * v[j];
            }
        }
        a[(k + 1, k)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (EISPACK `hqr`
/// structure). Works 1-based internally to keep the index arithmetic legible.
fn hqr(h: &mut DenseMatrix) -> Result<ComplexEigenvalueList> {
    let n = h.rows();
    let a = |h: &DenseMatrix, i: usize, j: usize| h[(i - 1, j - 1)];
    macro_rules! at {
        ($i:expr, $j:expr) => {
            h[($i - 1, $j - 1)]
        };
    }
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];

    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a(h, i, j).abs();
        }
    }
    let max_total_its = 100 * n;
    let mut total_its = 0;
    let mut nn = n;
    let mut t = 0.0;
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = at!(l - 1, l - 1).abs() + at!(l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if at!(l, l - 1).abs() <= DEFLATION_TOL * s {
                    at!(l, l - 1) = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = at!(nn, nn);
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = at!(nn - 1, nn - 1);
            let mut w = at!(nn, nn - 1) * at!(nn - 1, nn);
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + z.copysign(p);
                    wr[nn - 1] = x + z;
                    wr[nn] = if z != 0.0 { x - w / z } else { x + z };
                    wi[nn - 1] = 0.0;
                    wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = z;
                    wi[nn] = -z;
                }
                nn -= 2;
                break;
            }
            if total_its >= max_total_its {
                return Err(Error::EigenNoConvergence {
                    block_start: l - 1,
                    block_end: nn - 1,
                });
            }
            if its == 10 || its == 20 {
                // exceptional shift
                t += x;
                for i in 1..=nn {
                    at!(i, i) -= x;
                }
                let s = at!(nn, nn - 1).abs() + at!(nn - 1, nn - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            total_its += 1;

            let (mut p, mut q, mut r);
            let mut m = nn - 2;
            loop {
                let z = at!(m, m);
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / at!(m + 1, m) + at!(m, m + 1);
                q = at!(m + 1, m + 1) - z - rr - ss;
                r = at!(m + 2, m + 1);
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = at!(m, m - 1).abs() * (q.abs() + r.abs());
                let v = p.abs() * (at!(m - 1, m - 1).abs() + z.abs() + at!(m + 1, m + 1).abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                at!(i, i - 2) = 0.0;
                if i != m + 2 {
                    at!(i, i - 3) = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = at!(k, k - 1);
                    q = at!(k + 1, k - 1);
                    r = if k != nn - 1 { at!(k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            at!(k, k - 1) = -at!(k, k - 1);
                        }
                    } else {
                        at!(k, k - 1) = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut pp = at!(k, j) + q * at!(k + 1, j);
                        if k != nn - 1 {
                            pp += r * at!(k + 2, j);
                            at!(k + 2, j) -= pp * z;
                        }
                        at!(k + 1, j) -= pp * y;
                        at!(k, j) -= pp * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        let mut pp = x * at!(i, k) + y * at!(i, k + 1);
                        if k != nn - 1 {
                            pp += z * at!(i, k + 2);
                            at!(i, k + 2) -= pp * r;
                        }
                        at!(i, k + 1) -= pp * q;
                        at!(i, k) -= pp;
                    }
                }
                k += 1;
            }
            if l >= nn - 1 {
                break;
            }
        }
    }

    let mut out = Vec::with_capacity(n);
    let mut i = 1;
    while i <= n {
        if wi[i] != 0.0 && i < n {
            let (re, im) = (wr[i], wi[i].abs());
            out.push(Complex::new(re, im));
            out.push(Complex::new(re, -im));
            i += 2;
        } else {
            out.push(Complex::new(wr[i], 0.0));
            i += 1;
        }
    }
    Ok(ComplexEigenvalueList(out))
}

/// Eigenvector of `a` for the (complex) eigenvalue `mu` by inverse iteration
/// on the real 2n-dimensional embedding of `a - mu I`. Returns `(re, im)`
/// parts, normalised to unit Euclidean length.
pub fn complex_eigenvector(a: &DenseMatrix, mu: Complex) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.rows();
    let scale = a.max_abs().max(1.0);
    let mut shift = mu;
    let factor = loop {
        let mut m = DenseMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = a[(i, j)];
                m[(n + i, n + j)] = a[(i, j)];
            }
            m[(i, i)] -= shift.re;
            m[(n + i, n + i)] -= shift.re;
            m[(i, n + i)] = shift.im;
            m[(n + i, i)] = -shift.im;
        }
        match LuFactorization::new(&m) {
            Ok(f) => break f,
            Err(Error::SingularMatrix { .. }) if shift.re == mu.re => {
                // exact eigenvalue hit; nudge the shift off the spectrum
                shift.re += 1e-10 * scale;
            }
            Err(e) => return Err(e),
        }
    };
    let mut x: Vec<f64> = (0..2 * n).map(|i| 1.0 + 0.1 * i as f64).collect();
    for _ in 0..3 {
        let y = factor.solve(&x);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = y.into_iter().map(|v| v / norm).collect();
    }
    let im = x.split_off(n);
    Ok((x, im))
}
