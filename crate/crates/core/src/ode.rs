//! Fixed-step classical Runge-Kutta integration and period measurement,
//! used to cross-check equilibria and cycles in the time domain.

use std::io::Write;

use crate::error::{Error, Result};
use crate::format::fmt_sig;
use crate::model::ModelSystem;

pub const DEFAULT_DT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub dt: f64,
    /// Keep every `stride`-th sample (the final state is always kept).
    pub stride: usize,
    /// Estimate the local error of every step by step doubling (three times
    /// the cost).
    pub estimate_error: bool,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            stride: 1,
            estimate_error: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorStats {
    pub steps: usize,
    /// Largest Richardson estimate `|y_h - y_{h/2}|_inf / 15` over all steps.
    pub max_step_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has the initial sample")
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[c]).collect()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, names: &[&str]) -> std::io::Result<()> {
        write!(out, "t")?;
        for name in names {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            write!(out, "{}", fmt_sig(*t))?;
            for x in s {
                write!(out, ",{}", fmt_sig(*x))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn rk4_step<M: ModelSystem + ?Sized>(model: &M, lambda: f64, u: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = u.len();
    let stage = |k: &[f64], a: f64| -> Vec<f64> { (0..n).map(|i| u[i] + a * h * k[i]).collect() };
    let k1 = model.rhs(lambda, u)?;
    let k2 = model.rhs(lambda, &stage(&k1, 0.5))?;
    let k3 = model.rhs(lambda, &stage(&k2, 0.5))?;
    let k4 = model.rhs(lambda, &stage(&k3, 1.0))?;
    let next: Vec<f64> = (0..n)
        .map(|i| u[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if next.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("state became non-finite"));
    }
    Ok(next)
}

/// Classical RK4 from `u0` over `[0, t_end]` with step `dt`, every step
/// sampled and its local error estimated.
pub fn integrate<M: ModelSystem + ?Sized>(
    model: &M,
    lambda: f64,
    u0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    integrate_with(
        model,
        lambda,
        u0,
        t_end,
        IntegrateOptions {
            dt,
            stride: 1,
            estimate_error: true,
        },
    )
}

/// As [`integrate`] with sampling stride and error estimation configurable.
/// The last step is shortened so that the final sample sits at `t_end`.
pub fn integrate_with<M: ModelSystem + ?Sized>(
    model: &M,
    lambda: f64,
    u0: &[f64],
    t_end: f64,
    opts: IntegrateOptions,
) -> Result<Trajectory> {
    if !(opts.dt > 0.0) || !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::invalid(format!("need dt > 0 and t_end > 0, got dt = {}, t_end = {t_end}", opts.dt)));
    }
    if u0.len() != model.dim() {
        return Err(Error::invalid(format!("state has {} components, model expects {}", u0.len(), model.dim())));
    }
    let stride = opts.stride.max(1);
    let steps = (t_end / opts.dt).ceil() as usize;
    let mut times = vec![0.0];
    let mut states = vec![u0.to_vec()];
    let mut u = u0.to_vec();
    let mut max_err: Option<f64> = None;
    for s in 0..steps {
        let t = s as f64 * opts.dt;
        let h = if s + 1 == steps { t_end - t } else { opts.dt };
        let fail = |e: Error, u: &[f64]| Error::Integration {
            t,
            last_good: u.to_vec(),
            message: e.to_string(),
        };
        let next = rk4_step(model, lambda, &u, h).map_err(|e| fail(e, &u))?;
        if opts.estimate_error {
            let half = rk4_step(model, lambda, &u, 0.5 * h).map_err(|e| fail(e, &u))?;
            let fine = rk4_step(model, lambda, &half, 0.5 * h).map_err(|e| fail(e, &u))?;
            let est = next.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / 15.0;
            max_err = Some(max_err.map_or(est, |m| m.max(est)));
        }
        u = next;
        if (s + 1) % stride == 0 || s + 1 == steps {
            times.push(if s + 1 == steps { t_end } else { t + h });
            states.push(u.clone());
        }
    }
    Ok(Trajectory {
        times,
        states,
        stats: IntegratorStats {
            steps,
            max_step_error: max_err,
        },
    })
}

/// Mean spacing of successive maxima of one component after `transient_cut`.
/// Peaks are refined by the parabola through the three samples around them;
/// only maxima in the upper half of the observed range count. `None` when
/// fewer than two maxima are found or the signal is flat.
pub fn measure_period(traj: &Trajectory, component: usize, transient_cut: f64) -> Option<f64> {
    let start = traj.times.iter().position(|&t| t >= transient_cut)?;
    let t = &traj.times[start..];
    let y: Vec<f64> = traj.states[start..].iter().map(|s| s[component]).collect();
    if y.len() < 3 {
        return None;
    }
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 1e-9 * hi.abs().max(1.0)) {
        return None;
    }
    let mid = 0.5 * (lo + hi);
    let mut peaks = Vec::new();
    for i in 1..y.len() - 1 {
        if y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] > mid {
            peaks.push(parabola_vertex((t[i - 1], y[i - 1]), (t[i], y[i]), (t[i + 1], y[i + 1])));
        }
    }
    if peaks.len() < 2 {
        return None;
    }
    Some((peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64)
}

/// Outcome of following a computed cycle in the time domain.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillationProbe {
    /// Peak-to-peak range of the probed component over each period-long window.
    pub amplitudes: Vec<f64>,
    /// Period measured over the second half of the run.
    pub period: Option<f64>,
    pub stable: bool,
}

/// Integrates from `start` for `periods` multiples of `period` and calls the
/// oscillation stable when it persists with a peak-to-peak range that drifts
/// by no more than `drift_tol` (relative) between the first and last window.
pub fn probe_oscillation<M: ModelSystem + ?Sized>(
    model: &M,
    lambda: f64,
    start: &[f64],
    period: f64,
    periods: usize,
    component: usize,
    drift_tol: f64,
) -> Result<OscillationProbe> {
    if periods < 4 || !(period > 0.0) {
        return Err(Error::invalid("probe needs a positive period and at least 4 periods"));
    }
    let opts = IntegrateOptions {
        dt: DEFAULT_DT,
        stride: 10,
        estimate_error: false,
    };
    let traj = integrate_with(model, lambda, start, periods as f64 * period, opts)?;
    let mut amplitudes = vec![(f64::INFINITY, f64::NEG_INFINITY); periods];
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let k = ((t / period) as usize).min(periods - 1);
        let (lo, hi) = &mut amplitudes[k];
        *lo = lo.min(s[component]);
        *hi = hi.max(s[component]);
    }
    let amplitudes: Vec<f64> = amplitudes.into_iter().map(|(lo, hi)| hi - lo).collect();
    let measured = measure_period(&traj, component, 0.5 * periods as f64 * period);
    let first = amplitudes[0];
    let last = amplitudes[periods - 1];
    let stable = measured.is_some() && first > 0.0 && (last - first).abs() <= drift_tol * first;
    Ok(OscillationProbe {
        amplitudes,
        period: measured,
        stable,
    })
}

fn parabola_vertex((x0, y0): (f64, f64), (x1, y1): (f64, f64), (x2, y2): (f64, f64)) -> f64 {
    let d0 = (y1 - y0) / (x1 - x0);
    let d1 = (y2 - y1) / (x2 - x1);
    let curv = (d1 - d0) / (x2 - x0);
    if curv == 0.0 {
        return x1;
    }
    // vertex of y0 + d0 (x - x0) + curv (x - x0)(x - x1)
    0.5 * (x0 + x1) - d0 / (2.0 * curv)
}
