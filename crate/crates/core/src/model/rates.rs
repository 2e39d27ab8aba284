//! Luo-Rudy I (1991) gating kinetics and voltage-dependent factors.
//!
//! Every function returns its value together with its derivative in `V`
//! (mV). Rate constants are in 1/ms. Expressions with a removable
//! singularity (`alpha_m` at V = -47.13 and `X_i` at V = -77) switch to
//! their series expansion when the vanishing denominator drops below
//! [`SINGULAR_GUARD`]; derivatives use a wider series window because the
//! closed form loses digits to cancellation long before the denominator
//! vanishes.

use super::luo_rudy::ParameterSet;

/// Denominator magnitude below which a removable singularity is evaluated
/// by its series expansion.
pub const SINGULAR_GUARD: f64 = 1e-7;

const DERIVATIVE_SERIES_WINDOW: f64 = 1e-2;

/// Abscissae (mV) of the removable singularities in the rate expressions.
pub const SINGULAR_ABSCISSAE: [f64; 2] = [-47.13, -77.0];

/// Voltage below which the h and j gates use their hyperpolarised branch.
pub const HJ_BRANCH_VOLTAGE: f64 = -40.0;

/// Voltage at or below which `X_i` is clamped to one.
pub const XI_CLAMP_VOLTAGE: f64 = -100.0;

/// Gating-variable order in the state vector: h, j, m, d, f, X.
pub const GATE_NAMES: [&str; 6] = ["h", "j", "m", "d", "f", "X"];

/// Values of all rate functions and voltage-dependent factors at one `V`,
/// with their first derivatives in `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFunctionTable {
    pub v: f64,
    /// Opening rates of h, j, m, d, f, X.
    pub alpha: [f64; 6],
    pub beta: [f64; 6],
    pub dalpha: [f64; 6],
    pub dbeta: [f64; 6],
    /// Time-independent inactivation factor of the delayed rectifier.
    pub xi: f64,
    pub dxi: f64,
    pub k1_inf: f64,
    pub dk1_inf: f64,
    pub kp: f64,
    pub dkp: f64,
    pub e_na: f64,
    pub e_k: f64,
    pub e_k1: f64,
    pub e_kp: f64,
    pub g_k: f64,
    pub g_k1: f64,
}

impl RateFunctionTable {
    /// Steady-state open probability `alpha / (alpha + beta)` of a gate.
    pub fn steady_state(&self, gate: usize) -> f64 {
        self.alpha[gate] / (self.alpha[gate] + self.beta[gate])
    }
}

/// `a * exp(b * (v + c))`
#[inline]
fn exp_term(a: f64, b: f64, c: f64, v: f64) -> (f64, f64) {
    let val = a * (b * (v + c)).exp();
    (val, b * val)
}

/// `a * exp(b * (v + c)) / (1 + exp(d * (v + e)))`
#[inline]
fn sigmoid_ratio(a: f64, b: f64, c: f64, d: f64, e: f64, v: f64) -> (f64, f64) {
    let ee = (d * (v + e)).exp();
    let val = a * (b * (v + c)).exp() / (1.0 + ee);
    // ee / (1 + ee) written as a logistic so it stays finite when ee overflows
    let frac = 1.0 / (1.0 + (-d * (v + e)).exp());
    (val, val * (b - d * frac))
}

/// `y / (1 - exp(-y))` and its derivative.
fn bernoulli_like(y: f64) -> (f64, f64) {
    let den = -(-y).exp_m1();
    let val = if den.abs() < SINGULAR_GUARD {
        1.0 + 0.5 * y
    } else {
        y / den
    };
    let der = if y.abs() < DERIVATIVE_SERIES_WINDOW {
        0.5 + y / 6.0 - y * y * y / 180.0
    } else {
        let e = (-y).exp();
        (den - y * e) / (den * den)
    };
    (val, der)
}

/// `(exp(y) - 1) / y` and its derivative.
fn expm1_ratio(y: f64) -> (f64, f64) {
    let val = if y.abs() < SINGULAR_GUARD {
        1.0 + 0.5 * y
    } else {
        y.exp_m1() / y
    };
    let der = if y.abs() < DERIVATIVE_SERIES_WINDOW {
        0.5 + y / 3.0 + y * y / 8.0 + y * y * y / 30.0 + y.powi(4) / 144.0
    } else {
        (y * y.exp() - y.exp_m1()) / (y * y)
    };
    (val, der)
}

fn h_rates(v: f64) -> ((f64, f64), (f64, f64)) {
    if v < HJ_BRANCH_VOLTAGE {
        let a = exp_term(0.135, -1.0 / 6.8, 80.0, v);
        let b1 = exp_term(3.56, 0.079, 0.0, v);
        let b2 = exp_term(3.1e5, 0.35, 0.0, v);
        (a, (b1.0 + b2.0, b1.1 + b2.1))
    } else {
        let b = sigmoid_ratio(1.0 / 0.13, 0.0, 0.0, -1.0 / 11.1, 10.66, v);
        ((0.0, 0.0), b)
    }
}

fn j_rates(v: f64) -> ((f64, f64), (f64, f64)) {
    if v < HJ_BRANCH_VOLTAGE {
        let p1 = exp_term(-1.2714e5, 0.2444, 0.0, v);
        let p2 = exp_term(-3.474e-5, -0.04391, 0.0, v);
        let (pa, dpa) = (p1.0 + p2.0, p1.1 + p2.1);
        let lin = v + 37.78;
        let ee = (0.311 * (v + 79.23)).exp();
        let c = 1.0 / (1.0 + ee);
        let dc = -0.311 * c / (1.0 + (-0.311 * (v + 79.23)).exp());
        let a = pa * lin * c;
        let da = dpa * lin * c + pa * c + pa * lin * dc;
        let b = sigmoid_ratio(0.1212, -0.01052, 0.0, -0.1378, 40.14, v);
        ((a, da), b)
    } else {
        let b = sigmoid_ratio(0.3, -2.535e-7, 0.0, -0.1, 32.0, v);
        ((0.0, 0.0), b)
    }
}

fn m_rates(v: f64) -> ((f64, f64), (f64, f64)) {
    // 0.32 (V + 47.13) / (1 - exp(-0.1 (V + 47.13))) = 3.2 * B(0.1 (V + 47.13))
    let (bv, bd) = bernoulli_like(0.1 * (v + 47.13));
    let a = (3.2 * bv, 0.32 * bd);
    let b = exp_term(0.08, -1.0 / 11.0, 0.0, v);
    (a, b)
}

fn d_rates(v: f64) -> ((f64, f64), (f64, f64)) {
    (
        sigmoid_ratio(0.095, -0.01, -5.0, -0.072, -5.0, v),
        sigmoid_ratio(0.07, -0.017, 44.0, 0.05, 44.0, v),
    )
}

fn f_rates(v: f64) -> ((f64, f64), (f64, f64)) {
    (
        sigmoid_ratio(0.012, -0.008, 28.0, 0.15, 28.0, v),
        sigmoid_ratio(0.0065, -0.02, 30.0, -0.2, 30.0, v),
    )
}

fn x_rates(v: f64) -> ((f64, f64), (f64, f64)) {
    (
        sigmoid_ratio(0.0005, 0.083, 50.0, 0.057, 50.0, v),
        sigmoid_ratio(0.0013, -0.06, 20.0, -0.04, 20.0, v),
    )
}

/// `X_i = 2.837 (exp(0.04 (V+77)) - 1) / ((V+77) exp(0.04 (V+35)))`, one for V <= -100.
fn xi_factor(v: f64) -> (f64, f64) {
    if v <= XI_CLAMP_VOLTAGE {
        return (1.0, 0.0);
    }
    let (q, dq) = expm1_ratio(0.04 * (v + 77.0));
    let decay = (-0.04 * (v + 35.0)).exp();
    let c = 2.837 * 0.04;
    (c * q * decay, c * 0.04 * decay * (dq - q))
}

fn k1_inf(v: f64, e_k1: f64) -> (f64, f64) {
    let a = sigmoid_ratio(1.02, 0.0, 0.0, 0.2385, -e_k1 - 59.215, v);
    let b1 = sigmoid_ratio(0.49124, 0.08032, -e_k1 + 5.476, -0.5143, -e_k1 + 4.753, v);
    let b2 = sigmoid_ratio(1.0, 0.06175, -e_k1 - 594.31, -0.5143, -e_k1 + 4.753, v);
    let (b, db) = (b1.0 + b2.0, b1.1 + b2.1);
    let s = a.0 + b;
    (a.0 / s, (a.1 * b - a.0 * db) / (s * s))
}

fn kp_factor(v: f64) -> (f64, f64) {
    sigmoid_ratio(1.0, 0.0, 0.0, -1.0 / 5.98, -7.488, v)
}

/// Evaluates every rate function and voltage-dependent factor at `v`.
pub fn rate_functions(params: &ParameterSet, v: f64) -> RateFunctionTable {
    let gates = [h_rates(v), j_rates(v), m_rates(v), d_rates(v), f_rates(v), x_rates(v)];
    let mut alpha = [0.0; 6];
    let mut beta = [0.0; 6];
    let mut dalpha = [0.0; 6];
    let mut dbeta = [0.0; 6];
    for (i, ((a, da), (b, db))) in gates.into_iter().enumerate() {
        alpha[i] = a;
        dalpha[i] = da;
        beta[i] = b;
        dbeta[i] = db;
    }
    let e_k1 = params.e_k1();
    let (xi, dxi) = xi_factor(v);
    let (k1, dk1) = k1_inf(v, e_k1);
    let (kp, dkp) = kp_factor(v);
    RateFunctionTable {
        v,
        alpha,
        beta,
        dalpha,
        dbeta,
        xi,
        dxi,
        k1_inf: k1,
        dk1_inf: dk1,
        kp,
        dkp,
        e_na: params.e_na(),
        e_k: params.e_k(),
        e_k1,
        e_kp: e_k1,
        g_k: params.g_k(),
        g_k1: params.g_k1(),
    }
}
