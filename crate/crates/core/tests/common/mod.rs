#![allow(dead_code)]

use std::f64::consts::PI;

use femcycle::convergence::convergence_slope;
use femcycle::cycle::{newton_residual_history, CycleIterate, CycleSolution, StarredData};
use femcycle::equilibrium::{newton_equilibrium, NewtonSettings};
use femcycle::fem::{Mesh, PeriodicGridFunction};
use femcycle::hopf::{hopf_initial_guess, refine_hopf, HopfPoint, KPolicy};
use femcycle::model::{LuoRudy, ModelSystem};

pub const HOPF_LAMBDA: f64 = -1.0140472901;
pub const HOPF_BETA: f64 = 0.0162886062;
pub const HOPF_U: [f64; 8] = [
    -24.3132508542,
    0.0034641214,
    0.0,
    0.0,
    0.9176777444,
    0.5025242162,
    0.4920204612,
    0.5071561613,
];
pub const HOPF_G_R: [f64; 8] = [
    1.0,
    0.0000468233,
    0.0,
    0.0,
    0.0093195354,
    0.0198748652,
    -0.0072420216,
    0.0001706577,
];
pub const HOPF_G_I: [f64; 8] = [
    0.0,
    0.0000029062,
    0.0,
    0.0,
    -0.0000171311,
    -0.0118192370,
    0.0136415789,
    -0.0017802907,
];
/// Published spectrum at the Hopf point (real, imaginary).
pub const HOPF_EIGENVALUES: [(f64, f64); 8] = [
    (0.0, 0.0162886062),
    (0.0, -0.0162886062),
    (-8.8611865338, 0.0),
    (-0.1026761869, 0.0),
    (-0.0647560667, 0.0),
    (-0.0024565181, 0.0),
    (-1.7398266947, 0.0),
    (-0.2049715178, 0.0),
];

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Column `j` of the state Jacobian by Richardson-extrapolated central
/// differences with step `h`.
pub fn richardson_column<M: ModelSystem + ?Sized>(model: &M, lambda: f64, u: &[f64], j: usize, h: f64) -> Vec<f64> {
    let central = |h: f64| {
        let mut up = u.to_vec();
        let mut um = u.to_vec();
        up[j] += h;
        um[j] -= h;
        let fp = model.rhs(lambda, &up).unwrap();
        let fm = model.rhs(lambda, &um).unwrap();
        fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>()
    };
    let coarse = central(h);
    let fine = central(0.5 * h);
    fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect()
}

pub fn normal_form_hopf() -> HopfPoint {
    HopfPoint {
        lambda: 0.0,
        beta: 1.0,
        u: vec![0.0, 0.0],
        g_r: vec![1.0, 0.0],
        g_i: vec![0.0, -1.0],
        k: 1,
    }
}

pub fn exact_cycle(mesh: Mesh, lambda: f64) -> PeriodicGridFunction {
    let r = lambda.sqrt();
    PeriodicGridFunction::from_fn(mesh, 2, |t| vec![r * (2.0 * PI * t).cos(), r * (2.0 * PI * t).sin()]).unwrap()
}

pub fn luo_rudy_hopf() -> HopfPoint {
    let model = LuoRudy::default();
    let eq = newton_equilibrium(&model, HOPF_LAMBDA, &HOPF_U, NewtonSettings::default()).unwrap();
    let guess = hopf_initial_guess(&model, HOPF_LAMBDA, &eq.u, KPolicy::default()).unwrap();
    refine_hopf(&model, &guess, 1e-10, 30).unwrap().point
}

/// Smooth relative perturbation of every nodal value and of the period.
pub fn perturbed(c: &CycleSolution, size: f64) -> CycleIterate {
    let mut states = c.states.clone();
    let dim = states.dim();
    let mesh = states.mesh();
    for (i, x) in states.values_mut().iter_mut().enumerate() {
        let t = mesh.node_abscissa(i / dim);
        let shape = (2.0 * PI * t).sin() + 0.5 * (4.0 * PI * t + (i % dim) as f64).cos();
        *x *= 1.0 + size * shape;
    }
    CycleIterate {
        lambda: c.lambda,
        period: c.period * (1.0 + size),
        states,
    }
}

pub fn newton_slope<M: ModelSystem>(model: &M, c: &CycleSolution) -> (f64, Vec<f64>) {
    let anchor = StarredData::fixed_lambda(c.lambda, c.states.clone());
    let history = newton_residual_history(model, &anchor, perturbed(c, 0.1), 10).unwrap();
    (convergence_slope(&history, 1e-12).unwrap(), history)
}
