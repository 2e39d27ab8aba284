//! Fixtures shared by the benchmarks.

use femcycle::cycle::{run_cycle_continuation, CycleSettings, CycleSolution};
use femcycle::equilibrium::{newton_equilibrium, NewtonSettings};
use femcycle::hopf::{hopf_initial_guess, refine_hopf, HopfPoint, KPolicy};
use femcycle::model::LuoRudy;

/// Equilibrium close to the Luo-Rudy Hopf point.
pub const LR_SEED_LAMBDA: f64 = -1.0140472901;
pub const LR_SEED_U: [f64; 8] = [
    -24.3132508542,
    0.0034641214,
    0.0,
    0.0,
    0.9176777444,
    0.5025242162,
    0.4920204612,
    0.5071561613,
];

pub fn luo_rudy_hopf(model: &LuoRudy) -> HopfPoint {
    let eq = newton_equilibrium(model, LR_SEED_LAMBDA, &LR_SEED_U, NewtonSettings::default()).unwrap();
    let guess = hopf_initial_guess(model, LR_SEED_LAMBDA, &eq.u, KPolicy::default()).unwrap();
    refine_hopf(model, &guess, 1e-10, 30).unwrap().point
}

/// The last of `steps` cycles continued from the Hopf point.
pub fn luo_rudy_cycle(model: &LuoRudy, steps: usize, n_elements: usize) -> CycleSolution {
    let settings = CycleSettings {
        n_elements,
        steps,
        ..CycleSettings::default()
    };
    let run = run_cycle_continuation(model, &luo_rudy_hopf(model), &settings).unwrap();
    run.cycles.into_iter().last().unwrap()
}
