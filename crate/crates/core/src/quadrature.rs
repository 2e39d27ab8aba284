//! Three-point Gauss-Legendre quadrature.

/// Abscissae on the reference interval [0, 1].
pub const GAUSS3_POINTS: [f64; 3] = [
    0.5 - 0.387_298_334_620_741_7, // (1 - sqrt(3/5)) / 2
    0.5,
    0.5 + 0.387_298_334_620_741_7,
];

/// Weights on [0, 1]; they sum to one.
pub const GAUSS3_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// Integrates `f` over `[t_lo, t_hi]` with the 3-point rule (exact for
/// polynomials of degree five).
pub fn gauss3_integrate<F: FnMut(f64) -> f64>(mut f: F, t_lo: f64, t_hi: f64) -> f64 {
    let len = t_hi - t_lo;
    GAUSS3_POINTS
        .iter()
        .zip(GAUSS3_WEIGHTS.iter())
        .map(|(&s, &w)| w * f(t_lo + s * len))
        .sum::<f64>()
        * len
}

/// Vector-valued variant; accumulates `w * f(t)` into a buffer of length `dim`.
pub fn gauss3_integrate_vec<F, E>(mut f: F, t_lo: f64, t_hi: f64, dim: usize) -> Result<Vec<f64>, E>
where
    F: FnMut(f64) -> Result<Vec<f64>, E>,
{
    let len = t_hi - t_lo;
    let mut acc = vec![0.0; dim];
    for (&s, &w) in GAUSS3_POINTS.iter().zip(GAUSS3_WEIGHTS.iter()) {
        let v = f(t_lo + s * len)?;
        for (a, x) in acc.iter_mut().zip(v) {
            *a += w * len * x;
        }
    }
    Ok(acc)
}
