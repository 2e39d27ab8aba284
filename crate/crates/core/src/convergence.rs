//! Convergence-order diagnostics for Newton residual histories.

/// Least-squares slope of `ln r[m+1]` against `ln r[m]` over the last three
/// steps of `history` before it first drops to `floor` or below.
///
/// A slope near 2 indicates quadratic convergence. `None` when fewer than
/// four residuals lie above the floor.
pub fn convergence_slope(history: &[f64], floor: f64) -> Option<f64> {
    let usable: Vec<f64> = history
        .iter()
        .take_while(|&&r| r > floor && r.is_finite())
        .map(|r| r.ln())
        .collect();
    if usable.len() < 4 {
        return None;
    }
    let tail = &usable[usable.len() - 4..];
    let xs = &tail[..3];
    let ys = &tail[1..];
    let mx = xs.iter().sum::<f64>() / 3.0;
    let my = ys.iter().sum::<f64>() / 3.0;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}
