use std::collections::BTreeSet;
use std::io::Write;

use femcycle::cycle::{run_cycle_continuation_with, write_cycle_branch_csv, write_cycle_summary_csv, CycleSolution};
use femcycle::equilibrium::{
    continue_equilibria, find_initial_equilibrium, newton_equilibrium, refine_hopf_bracket, scan_branch_for_hopf,
    second_point, write_branch_csv, EquilibriumBranch, EquilibriumPoint,
};
use femcycle::format::fmt_sig;
use femcycle::hopf::{hopf_initial_guess, hopf_residual, refine_hopf, HopfPoint};
use femcycle::linalg::norm_inf;
use femcycle::model::ModelSystem;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{read_input, OutputDir};

pub const BRANCH_FILE: &str = "equilibria.csv";
pub const BRACKET_FILE: &str = "hopf_brackets.txt";
pub const HOPF_FILE: &str = "hopf_point.txt";
pub const CYCLES_FILE: &str = "cycles.csv";
pub const SUMMARY_FILE: &str = "cycle_summary.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn run_equilibria(config: &RunConfig) -> Result<(), CliError> {
    let model = config.model.build()?;
    let eq = &config.equilibria;
    let guess = match (&eq.u_start, model.default_search_box()) {
        (Some(u), _) => u.clone(),
        (None, Some(bounds)) => find_initial_equilibrium(&model, eq.lambda_start, &bounds)
            .map_err(CliError::numerical("equilibria: search for a first point"))?,
        (None, None) => vec![0.0; model.dim()],
    };
    let first = newton_equilibrium(&model, eq.lambda_start, &guess, eq.newton)
        .map_err(CliError::numerical("equilibria: first point"))?;
    let start = EquilibriumPoint::new(eq.lambda_start, first.u);
    let direction = if eq.lambda_target > eq.lambda_start { 1.0 } else { -1.0 };
    let second =
        second_point(&model, &start, eq.ds, direction, eq.newton).map_err(CliError::numerical("equilibria: second point"))?;
    let mut branch = continue_equilibria(&model, start, second, eq.ds, eq.steps, eq.newton)
        .map_err(CliError::numerical("equilibria: continuation"))?;
    let scan = scan_branch_for_hopf(&model, &mut branch).map_err(CliError::numerical("equilibria: eigenvalue scan"))?;

    let mut report = Vec::new();
    for (n, &(i, j)) in scan.brackets.iter().enumerate() {
        let (a, b) = (&branch.points[i], &branch.points[j]);
        let refined = match refine_hopf_bracket(&model, a, b, eq.newton) {
            Ok(p) => format!("lambda ~ {}", fmt_sig(p.lambda)),
            Err(e) => format!("bisection failed: {e}"),
        };
        report.push(format!(
            "bracket {}: points {i}-{j}, lambda {} .. {}, test function {} .. {}, {refined}",
            n + 1,
            fmt_sig(a.lambda),
            fmt_sig(b.lambda),
            fmt_sig(a.test_fn),
            fmt_sig(b.test_fn)
        ));
    }

    let mut out = OutputDir::create(config, "equilibria")?;
    let names = model.component_names();
    out.write(BRANCH_FILE, |w| write_branch_csv(w, &branch, names))?;
    out.write(BRACKET_FILE, |w| {
        writeln!(w, "points = {}", branch.points.len())?;
        writeln!(w, "brackets = {}", scan.brackets.len())?;
        for line in &report {
            writeln!(w, "{line}")?;
        }
        for s in &scan.skipped {
            writeln!(w, "skipped point {}: {}", s.step, s.error)?;
        }
        Ok(())
    })?;
    println!("{} equilibria, {} Hopf bracket(s)", branch.points.len(), scan.brackets.len());
    for line in &report {
        println!("  {line}");
    }
    match branch.failure {
        Some(f) => Err(CliError::numerical(format!("equilibria: continuation stopped at step {}", f.step))(f.error)),
        None => Ok(()),
    }
}

/// Reads a branch CSV written by the equilibria stage.
fn read_branch(text: &str, dim: usize, ds: f64) -> Result<EquilibriumBranch, CliError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    let bad = |line: usize, msg: &str| CliError::Config(format!("branch file line {}: {msg}", line + 1));
    match lines.next() {
        Some((i, header)) => {
            if !header.starts_with("step,lambda,") || header.split(',').count() != dim + 3 {
                return Err(bad(i, &format!("expected a header with step, lambda, {dim} components, testfn")));
            }
        }
        None => return Err(CliError::Config("branch file is empty".into())),
    }
    let mut points = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 3 {
            return Err(bad(i, "wrong number of fields"));
        }
        let values = fields[1..=dim + 1]
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(i, &e.to_string()))?;
        points.push(EquilibriumPoint::new(values[0], values[1..].to_vec()));
    }
    if points.len() < 2 {
        return Err(CliError::Config("branch file needs at least two points".into()));
    }
    let direction = if points[1].lambda >= points[0].lambda { 1.0 } else { -1.0 };
    Ok(EquilibriumBranch {
        points,
        ds,
        direction,
        failure: None,
    })
}

pub fn run_hopf(config: &RunConfig) -> Result<(), CliError> {
    let model = config.model.build()?;
    let h = &config.hopf;
    let (lambda, u) = match &h.seed {
        Some(seed) => seed.clone(),
        None => {
            let path = h.branch_file.clone().unwrap_or_else(|| config.out_dir.join(BRANCH_FILE));
            let mut branch = read_branch(&read_input(&path)?, model.dim(), config.equilibria.ds)?;
            let scan = scan_branch_for_hopf(&model, &mut branch).map_err(CliError::numerical("hopf: eigenvalue scan"))?;
            let Some(&(i, j)) = scan.brackets.get(h.bracket - 1) else {
                return Err(CliError::numerical("hopf")(femcycle::Error::NotHopf(format!(
                    "{} has {} bracket(s), bracket {} requested",
                    path.display(),
                    scan.brackets.len(),
                    h.bracket
                ))));
            };
            let p = refine_hopf_bracket(&model, &branch.points[i], &branch.points[j], config.equilibria.newton)
                .map_err(CliError::numerical(format!("hopf: bisection of bracket {}", h.bracket)))?;
            (p.lambda, p.u)
        }
    };
    let guess = hopf_initial_guess(&model, lambda, &u, h.k).map_err(CliError::numerical("hopf: initial guess"))?;
    let report = refine_hopf(&model, &guess, h.tol, h.max_iter).map_err(CliError::numerical("hopf: Newton"))?;
    let point = report.point;
    let residual = norm_inf(&hopf_residual(&model, &point).map_err(CliError::numerical("hopf: residual"))?);

    let mut out = OutputDir::create(config, "hopf")?;
    out.write(HOPF_FILE, |w| point.write_key_value(w, Some(residual)))?;
    println!(
        "Hopf point: lambda {}, beta {}, period {}, residual {residual:.2e} after {} Newton step(s)",
        fmt_sig(point.lambda),
        fmt_sig(point.beta),
        fmt_sig(point.period()),
        report.iterations
    );
    Ok(())
}

/// Indices of the cycles written to projection files.
fn export_selection(cycles: &[CycleSolution], every: usize, lambdas: &[f64]) -> Vec<usize> {
    let mut picked = BTreeSet::new();
    if cycles.is_empty() {
        return Vec::new();
    }
    if every > 0 {
        picked.extend((0..cycles.len()).step_by(every));
        picked.insert(cycles.len() - 1);
    }
    for &target in lambdas {
        for (i, w) in cycles.windows(2).enumerate() {
            let (a, b) = (w[0].lambda - target, w[1].lambda - target);
            if a * b <= 0.0 {
                picked.insert(if a.abs() <= b.abs() { i } else { i + 1 });
            }
        }
    }
    picked.into_iter().collect()
}

fn variable(name: &str, names: &[&str], c: &CycleSolution, t: f64, u: &[f64]) -> f64 {
    match name {
        "t" => t,
        "lambda" => c.lambda,
        _ => u[names.iter().position(|n| *n == name).expect("validated projection variable")],
    }
}

fn write_projection<W: Write>(
    w: &mut W,
    cycles: &[&CycleSolution],
    (x, y): (&str, &str),
    names: &[&str],
    samples: usize,
) -> std::io::Result<()> {
    writeln!(w, "# columns: {x} {y}; one block per cycle, blocks separated by two blank lines")?;
    for (b, c) in cycles.iter().enumerate() {
        if b > 0 {
            writeln!(w)?;
            writeln!(w)?;
        }
        writeln!(w, "# step {} lambda {} T {}", c.step, fmt_sig(c.lambda), fmt_sig(c.period))?;
        let n = c.states.mesh().n_elements();
        let mut emit = |element: usize, s: f64| -> std::io::Result<()> {
            let t = (element as f64 + s) / n as f64;
            let u = c.states.eval_local(element, s);
            let (a, b) = (variable(x, names, c, t, &u), variable(y, names, c, t, &u));
            writeln!(w, "{} {}", fmt_sig(a), fmt_sig(b))
        };
        for element in 0..n {
            for q in 0..samples {
                emit(element, q as f64 / samples as f64)?;
            }
        }
        emit(n - 1, 1.0)?;
    }
    Ok(())
}

pub fn run_cycles(config: &RunConfig) -> Result<(), CliError> {
    let model = config.model.build()?;
    let cy = &config.cycles;
    let path = cy.hopf_file.clone().unwrap_or_else(|| config.out_dir.join(HOPF_FILE));
    let hopf = HopfPoint::read_key_value(read_input(&path)?.as_bytes())
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if hopf.dim() != model.dim() {
        return Err(CliError::Config(format!(
            "{}: Hopf point has {} components, the model has {}",
            path.display(),
            hopf.dim(),
            model.dim()
        )));
    }

    let total = cy.settings.steps;
    let run = run_cycle_continuation_with(&model, &hopf, &cy.settings, |c| {
        if c.step % 50 == 0 || c.step + 1 == total {
            eprintln!("cycle {}: lambda {}, T {}", c.step, fmt_sig(c.lambda), fmt_sig(c.period));
        }
    })
    .map_err(CliError::numerical("cycles"))?;

    let mut out = OutputDir::create(config, "cycles")?;
    let names = model.component_names();
    out.write(CYCLES_FILE, |w| write_cycle_branch_csv(w, &run.cycles, names))?;
    out.write(SUMMARY_FILE, |w| write_cycle_summary_csv(w, &run.cycles, names))?;

    if !cy.projections.is_empty() {
        let picked = export_selection(&run.cycles, cy.export_every, &cy.export_lambdas);
        let chosen: Vec<&CycleSolution> = picked.iter().map(|&i| &run.cycles[i]).collect();
        let mut files = Vec::new();
        for (x, y) in &cy.projections {
            let name = format!("projection_{x}_{y}.dat");
            out.write(&name, |w| write_projection(w, &chosen, (x, y), names, cy.samples_per_element))?;
            files.push(name);
        }
        out.write(MANIFEST_FILE, |w| {
            writeln!(w, "cycles = {}", run.cycles.len())?;
            writeln!(w, "exported = {}", chosen.len())?;
            for c in &chosen {
                writeln!(w, "step {} lambda {} T {}", c.step, fmt_sig(c.lambda), fmt_sig(c.period))?;
            }
            for f in &files {
                writeln!(w, "file {f}")?;
            }
            Ok(())
        })?;
    }

    println!("{} cycle(s), {} file(s) in {}", run.cycles.len(), out.written().len(), config.out_dir.display());
    match run.failure {
        Some(e) => Err(CliError::numerical("cycles")(e)),
        None => Ok(()),
    }
}
