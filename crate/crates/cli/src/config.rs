//! Run configuration: flat `key = value` lines grouped under `[section]`
//! headers, `#` comments. Defaults depend on the model, so `[model]` is
//! read first; every other key overrides a default and unknown keys are
//! rejected.
//!
//! ```text
//! [model]
//! kind = luo-rudy            # or hopf-normal-form
//!
//! [parameters]
//! g_si = 0.09                # ParameterSet fields, or omega for the normal form
//!
//! [equilibria]
//! lambda_start = 0
//! lambda_target = -3
//! ds = 0.5
//! steps = 150
//!
//! [cycles]
//! n_elements = 20
//! projections = lambda:V, V:Ca_i
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use femcycle::cycle::CycleSettings;
use femcycle::equilibrium::NewtonSettings;
use femcycle::hopf::KPolicy;
use femcycle::model::{HopfNormalForm, LuoRudy, ModelSystem, ParameterSet, PotassiumReversal};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelChoice {
    LuoRudy(ParameterSet),
    NormalForm { omega: f64 },
}

impl ModelChoice {
    pub fn build(&self) -> Result<Box<dyn ModelSystem>, CliError> {
        let model: Box<dyn ModelSystem> = match self {
            ModelChoice::LuoRudy(p) => Box::new(LuoRudy::new(p.clone()).map_err(CliError::config)?),
            ModelChoice::NormalForm { omega } => Box::new(HopfNormalForm::new(*omega).map_err(CliError::config)?),
        };
        Ok(model)
    }

    fn kind(&self) -> &'static str {
        match self {
            ModelChoice::LuoRudy(_) => "luo-rudy",
            ModelChoice::NormalForm { .. } => "hopf-normal-form",
        }
    }

    fn component_names(&self) -> &'static [&'static str] {
        match self {
            ModelChoice::LuoRudy(_) => &["V", "Ca_i", "h", "j", "m", "d", "f", "X"],
            ModelChoice::NormalForm { .. } => &["x", "y"],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriaConfig {
    pub lambda_start: f64,
    /// Only the side of `lambda_start` matters: the branch leaves toward it.
    pub lambda_target: f64,
    pub ds: f64,
    pub steps: usize,
    pub newton: NewtonSettings,
    /// Newton start for the first point; a least-squares search over the
    /// model's box is used when absent.
    pub u_start: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfConfig {
    /// 1-based index into the bracket list of the equilibria stage.
    pub bracket: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub k: KPolicy,
    /// Explicit `(lambda, u)` seed replacing the branch file.
    pub seed: Option<(f64, Vec<f64>)>,
    pub branch_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CyclesConfig {
    pub settings: CycleSettings,
    pub hopf_file: Option<PathBuf>,
    /// Export every n-th step (plus the last) to projection files; 0 disables.
    pub export_every: usize,
    /// Also export the cycles closest to each crossing of these lambdas.
    pub export_lambdas: Vec<f64>,
    pub projections: Vec<(String, String)>,
    pub samples_per_element: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelChoice,
    pub equilibria: EquilibriaConfig,
    pub hopf: HopfConfig,
    pub cycles: CyclesConfig,
    pub out_dir: PathBuf,
}

const SECTIONS: [&str; 6] = ["model", "parameters", "equilibria", "hopf", "cycles", "output"];

struct Entry {
    value: String,
    line: usize,
}

type Sections = BTreeMap<String, BTreeMap<String, Entry>>;

fn split_sections(text: &str) -> Result<Sections, CliError> {
    let mut sections: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| CliError::Config(format!("line {line}: unterminated section header")))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(CliError::Config(format!("line {line}: unknown section [{name}]")));
            }
            sections.entry(name.to_string()).or_default();
            current = Some(name.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {line}: expected key = value")))?;
        let section = current
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("line {line}: key outside any section")))?;
        let key = key.trim().to_string();
        let entries = sections.get_mut(section).expect("section registered");
        if entries.contains_key(&key) {
            return Err(CliError::Config(format!("line {line}: duplicate key `{key}` in [{section}]")));
        }
        entries.insert(
            key,
            Entry {
                value: value.trim().to_string(),
                line,
            },
        );
    }
    Ok(sections)
}

/// Removes and parses keys of one section; whatever is left is unknown.
struct SectionReader {
    name: &'static str,
    entries: BTreeMap<String, Entry>,
}

impl SectionReader {
    fn new(sections: &mut Sections, name: &'static str) -> Self {
        Self {
            name,
            entries: sections.remove(name).unwrap_or_default(),
        }
    }

    fn take<T>(&mut self, key: &str, parse: impl FnOnce(&str) -> Result<T, String>) -> Result<Option<T>, CliError> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(e) => parse(&e.value)
                .map(Some)
                .map_err(|msg| CliError::Config(format!("line {}: [{}] {key}: {msg}", e.line, self.name))),
        }
    }

    fn float(&mut self, key: &str, slot: &mut f64) -> Result<(), CliError> {
        if let Some(v) = self.take(key, parse_float)? {
            *slot = v;
        }
        Ok(())
    }

    fn positive(&mut self, key: &str, slot: &mut f64) -> Result<(), CliError> {
        if let Some(v) = self.take(key, |s| {
            let v = parse_float(s)?;
            if v > 0.0 {
                Ok(v)
            } else {
                Err(format!("{v} must be positive"))
            }
        })? {
            *slot = v;
        }
        Ok(())
    }

    fn count(&mut self, key: &str, slot: &mut usize) -> Result<(), CliError> {
        if let Some(v) = self.take(key, |s| s.parse::<usize>().map_err(|e| format!("{e}")))? {
            *slot = v;
        }
        Ok(())
    }

    fn finish(self) -> Result<(), CliError> {
        match self.entries.into_iter().min_by_key(|(_, e)| e.line) {
            None => Ok(()),
            Some((key, e)) => Err(CliError::Config(format!(
                "line {}: unknown key `{key}` in [{}]",
                e.line, self.name
            ))),
        }
    }
}

fn parse_float(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("`{s}`: {e}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>, String> {
    s.split([',', ' ', '\t']).filter(|t| !t.is_empty()).map(parse_float).collect()
}

fn parse_k(s: &str) -> Result<KPolicy, String> {
    if s == "auto" {
        return Ok(KPolicy::LargestModulus);
    }
    match s.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(KPolicy::Fixed(k)),
        _ => Err(format!("`{s}` is neither `auto` nor a 1-based index")),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut sections = split_sections(text)?;

        let mut model_sec = SectionReader::new(&mut sections, "model");
        let kind = model_sec.take("kind", |s| Ok(s.to_string()))?.unwrap_or_else(|| "luo-rudy".into());
        model_sec.finish()?;

        let mut params = SectionReader::new(&mut sections, "parameters");
        let model = match kind.as_str() {
            "luo-rudy" => {
                let mut p = ParameterSet::default();
                for (key, slot) in [
                    ("i_st", &mut p.i_st),
                    ("c_m", &mut p.c_m),
                    ("g_na", &mut p.g_na),
                    ("g_si", &mut p.g_si),
                    ("g_kp", &mut p.g_kp),
                    ("g_b", &mut p.g_b),
                    ("na_o", &mut p.na_o),
                    ("na_i", &mut p.na_i),
                    ("k_o", &mut p.k_o),
                    ("k_i", &mut p.k_i),
                    ("pr_nak", &mut p.pr_nak),
                    ("e_b", &mut p.e_b),
                    ("temperature", &mut p.temperature),
                ] {
                    params.float(key, slot)?;
                }
                if let Some(r) = params.take("potassium_reversal", |s| match s {
                    "swapped" => Ok(PotassiumReversal::Swapped),
                    "standard" => Ok(PotassiumReversal::Standard),
                    other => Err(format!("`{other}` is not `swapped` or `standard`")),
                })? {
                    p.potassium_reversal = r;
                }
                p.validate().map_err(CliError::config)?;
                ModelChoice::LuoRudy(p)
            }
            "hopf-normal-form" => {
                let mut omega = 1.0;
                params.float("omega", &mut omega)?;
                HopfNormalForm::new(omega).map_err(CliError::config)?;
                ModelChoice::NormalForm { omega }
            }
            other => {
                return Err(CliError::Config(format!(
                    "[model] kind: `{other}` is not `luo-rudy` or `hopf-normal-form`"
                )))
            }
        };
        params.finish()?;
        let luo_rudy = matches!(model, ModelChoice::LuoRudy(_));
        let dim = model.component_names().len();

        let mut eq = if luo_rudy {
            EquilibriaConfig {
                lambda_start: 0.0,
                lambda_target: -3.0,
                ds: 0.5,
                steps: 150,
                newton: NewtonSettings::default(),
                u_start: None,
            }
        } else {
            EquilibriaConfig {
                lambda_start: -1.0,
                lambda_target: 1.0,
                ds: 0.05,
                steps: 40,
                newton: NewtonSettings::default(),
                u_start: None,
            }
        };
        let mut s = SectionReader::new(&mut sections, "equilibria");
        s.float("lambda_start", &mut eq.lambda_start)?;
        s.float("lambda_target", &mut eq.lambda_target)?;
        s.positive("ds", &mut eq.ds)?;
        s.count("steps", &mut eq.steps)?;
        s.positive("tol", &mut eq.newton.tol)?;
        s.count("max_iter", &mut eq.newton.max_iter)?;
        eq.u_start = s.take("u_start", parse_floats)?;
        s.finish()?;
        if eq.steps == 0 || eq.newton.max_iter == 0 {
            return Err(CliError::Config("[equilibria] steps and max_iter must be positive".into()));
        }
        if eq.u_start.as_ref().is_some_and(|u| u.len() != dim) {
            return Err(CliError::Config(format!("[equilibria] u_start needs {dim} values")));
        }

        let mut hopf = HopfConfig {
            bracket: 1,
            tol: femcycle::hopf::DEFAULT_TOL,
            max_iter: femcycle::hopf::DEFAULT_MAX_ITER,
            k: KPolicy::LargestModulus,
            seed: None,
            branch_file: None,
        };
        let mut s = SectionReader::new(&mut sections, "hopf");
        s.count("bracket", &mut hopf.bracket)?;
        s.positive("tol", &mut hopf.tol)?;
        s.count("max_iter", &mut hopf.max_iter)?;
        if let Some(k) = s.take("k", parse_k)? {
            hopf.k = k;
        }
        let seed_lambda = s.take("seed_lambda", parse_float)?;
        let seed_u = s.take("seed_u", parse_floats)?;
        hopf.branch_file = s.take("branch_file", |v| Ok(PathBuf::from(v)))?;
        s.finish()?;
        hopf.seed = match (seed_lambda, seed_u) {
            (None, None) => None,
            (Some(l), Some(u)) if u.len() == dim => Some((l, u)),
            (Some(_), Some(_)) => return Err(CliError::Config(format!("[hopf] seed_u needs {dim} values"))),
            _ => return Err(CliError::Config("[hopf] seed_lambda and seed_u go together".into())),
        };
        if hopf.bracket == 0 || hopf.max_iter == 0 {
            return Err(CliError::Config("[hopf] bracket and max_iter must be positive".into()));
        }
        if let KPolicy::Fixed(k) = hopf.k {
            if k > dim {
                return Err(CliError::Config(format!("[hopf] k = {k} exceeds the dimension {dim}")));
            }
        }

        let mut cy = if luo_rudy {
            CyclesConfig {
                settings: CycleSettings::default(),
                hopf_file: None,
                export_every: 50,
                export_lambdas: vec![-1.2],
                projections: vec![("lambda".into(), "V".into()), ("V".into(), "Ca_i".into())],
                samples_per_element: 4,
            }
        } else {
            CyclesConfig {
                settings: CycleSettings {
                    ds: 0.05,
                    steps: 40,
                    ..CycleSettings::default()
                },
                hopf_file: None,
                export_every: 10,
                export_lambdas: Vec::new(),
                projections: vec![("x".into(), "y".into())],
                samples_per_element: 4,
            }
        };
        let mut s = SectionReader::new(&mut sections, "cycles");
        s.count("n_elements", &mut cy.settings.n_elements)?;
        s.positive("ds", &mut cy.settings.ds)?;
        s.count("steps", &mut cy.settings.steps)?;
        s.positive("tol", &mut cy.settings.newton.tol)?;
        s.positive("abs_tol", &mut cy.settings.newton.abs_tol)?;
        s.count("max_iter", &mut cy.settings.newton.max_iter)?;
        s.count("max_halvings", &mut cy.settings.max_halvings)?;
        s.count("export_every", &mut cy.export_every)?;
        s.count("samples_per_element", &mut cy.samples_per_element)?;
        if let Some(l) = s.take("export_lambdas", parse_floats)? {
            cy.export_lambdas = l;
        }
        let names = model.component_names();
        if let Some(p) = s.take("projections", |v| parse_projections(v, names))? {
            cy.projections = p;
        }
        cy.hopf_file = s.take("hopf_file", |v| Ok(PathBuf::from(v)))?;
        s.finish()?;
        cy.settings.validate().map_err(CliError::config)?;
        if cy.samples_per_element == 0 {
            return Err(CliError::Config("[cycles] samples_per_element must be positive".into()));
        }

        let mut s = SectionReader::new(&mut sections, "output");
        let out_dir = s
            .take("dir", |v| Ok(PathBuf::from(v)))?
            .unwrap_or_else(|| PathBuf::from("femcycle-out"));
        s.finish()?;

        Ok(Self {
            model,
            equilibria: eq,
            hopf,
            cycles: cy,
            out_dir,
        })
    }

    /// Every resolved setting except the output directory, one per line in
    /// a fixed order. Its hash identifies a run in the output headers.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let floats = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "model.kind={}", self.model.kind());
        match &self.model {
            ModelChoice::LuoRudy(p) => {
                let _ = writeln!(s, "parameters={p:?}");
            }
            ModelChoice::NormalForm { omega } => {
                let _ = writeln!(s, "parameters.omega={omega:e}");
            }
        }
        let e = &self.equilibria;
        let _ = writeln!(
            s,
            "equilibria={:e} {:e} {:e} {} {:e} {} [{}]",
            e.lambda_start,
            e.lambda_target,
            e.ds,
            e.steps,
            e.newton.tol,
            e.newton.max_iter,
            e.u_start.as_deref().map(floats).unwrap_or_default()
        );
        let h = &self.hopf;
        let _ = writeln!(
            s,
            "hopf={} {:e} {} {:?} {:?} {:?}",
            h.bracket, h.tol, h.max_iter, h.k, h.seed, h.branch_file
        );
        let c = &self.cycles;
        let _ = writeln!(
            s,
            "cycles={:?} {:?} {} [{}] {:?} {}",
            c.settings,
            c.hopf_file,
            c.export_every,
            floats(&c.export_lambdas),
            c.projections,
            c.samples_per_element
        );
        s
    }
}

fn parse_projections(value: &str, names: &[&str]) -> Result<Vec<(String, String)>, String> {
    let known = |v: &str| v == "t" || v == "lambda" || names.contains(&v);
    value
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (a, b) = p
                .split_once(':')
                .ok_or_else(|| format!("projection `{p}` is not of the form x:y"))?;
            let (a, b) = (a.trim(), b.trim());
            for v in [a, b] {
                if !known(v) {
                    return Err(format!("unknown variable `{v}` (use t, lambda or {})", names.join(", ")));
                }
            }
            Ok((a.to_string(), b.to_string()))
        })
        .collect()
}
