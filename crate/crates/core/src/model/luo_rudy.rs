//! Luo-Rudy I ventricular action potential model with the stimulus current
//! as the continuation parameter.
//!
//! State order: `V` (mV), `[Ca]_i` (mM), then the gates h, j, m, d, f, X.
//! Currents are in uA/cm^2, time in ms.
//!
//! ```text
//! dV/dt     = -(lambda + I_Na + I_si + I_K + I_K1 + I_Kp + I_b) / C_m
//! d[Ca]/dt  = -1e-4 I_si + 0.07 (1e-4 - [Ca]_i)
//! dy/dt     = alpha_y(V) - (alpha_y(V) + beta_y(V)) y     for y in h, j, m, d, f, X
//! ```

use super::rates::{rate_functions, RateFunctionTable};
use super::ModelSystem;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Gas constant, mJ / (mol K).
pub const GAS_CONSTANT: f64 = 8314.0;
/// Faraday constant, C / mol.
pub const FARADAY: f64 = 96485.0;

/// Slow inward current reversal: `E_si = C1 - C2 ln [Ca]_i`.
pub const C1: f64 = 7.7;
pub const C2: f64 = 13.0287;
/// Calcium balance: `d[Ca]/dt = -C3 I_si + C4 (C5 - [Ca]_i)`.
pub const C3: f64 = 1e-4;
pub const C4: f64 = 0.07;
pub const C5: f64 = 1e-4;

const DIM: usize = 8;
const NAMES: [&str; DIM] = ["V", "Ca_i", "h", "j", "m", "d", "f", "X"];

/// Concentration arrangement inside the time-dependent potassium reversal
/// potential `E_K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PotassiumReversal {
    /// `(RT/F) ln(([K]o + PR [K]i) / ([Na]o + PR [Na]i))`.
    ///
    /// This is the arrangement under which the published Hopf point
    /// (lambda = -1.0140472901, V = -24.3132508542 mV) is an equilibrium and
    /// under which its Jacobian spectrum is reproduced. It is the default.
    #[default]
    Swapped,
    /// `(RT/F) ln(([K]o + PR [Na]o) / ([K]i + PR [Na]i))`, the textbook form.
    Standard,
}

/// The fixed model parameters (everything except the stimulus, which is
/// the continuation parameter).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    /// Stimulus current uA/cm^2; informational, `lambda` replaces it in `rhs`.
    pub i_st: f64,
    /// Membrane capacitance uF/cm^2.
    pub c_m: f64,
    pub g_na: f64,
    pub g_si: f64,
    pub g_kp: f64,
    pub g_b: f64,
    pub na_o: f64,
    pub na_i: f64,
    pub k_o: f64,
    pub k_i: f64,
    pub pr_nak: f64,
    /// Background current reversal potential, mV.
    pub e_b: f64,
    /// Temperature, K.
    pub temperature: f64,
    pub potassium_reversal: PotassiumReversal,
}

impl Default for ParameterSet {
    fn default() -> Self {
        Self {
            i_st: 0.0,
            c_m: 1.0,
            g_na: 23.0,
            g_si: 0.09,
            g_kp: 0.0183,
            g_b: 0.03921,
            na_o: 140.0,
            na_i: 18.0,
            k_o: 5.4,
            k_i: 145.0,
            pr_nak: 0.01833,
            e_b: -59.87,
            temperature: 310.0,
            potassium_reversal: PotassiumReversal::Swapped,
        }
    }
}

impl ParameterSet {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("i_st", self.i_st),
            ("c_m", self.c_m),
            ("g_na", self.g_na),
            ("g_si", self.g_si),
            ("g_kp", self.g_kp),
            ("g_b", self.g_b),
            ("na_o", self.na_o),
            ("na_i", self.na_i),
            ("k_o", self.k_o),
            ("k_i", self.k_i),
            ("pr_nak", self.pr_nak),
            ("e_b", self.e_b),
            ("temperature", self.temperature),
        ];
        if let Some((name, v)) = all.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!("parameter {name} = {v} is not finite")));
        }
        let positive = [
            ("c_m", self.c_m),
            ("temperature", self.temperature),
            ("na_o", self.na_o),
            ("na_i", self.na_i),
            ("k_o", self.k_o),
            ("k_i", self.k_i),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| *v <= 0.0) {
            return Err(Error::invalid(format!("parameter {name} = {v} must be positive")));
        }
        Ok(())
    }

    /// RT/F in mV.
    pub fn rt_over_f(&self) -> f64 {
        GAS_CONSTANT * self.temperature / FARADAY
    }

    pub fn e_na(&self) -> f64 {
        self.rt_over_f() * (self.na_o / self.na_i).ln()
    }

    pub fn e_k(&self) -> f64 {
        let ratio = match self.potassium_reversal {
            PotassiumReversal::Swapped => {
                (self.k_o + self.pr_nak * self.k_i) / (self.na_o + self.pr_nak * self.na_i)
            }
            PotassiumReversal::Standard => {
                (self.k_o + self.pr_nak * self.na_o) / (self.k_i + self.pr_nak * self.na_i)
            }
        };
        self.rt_over_f() * ratio.ln()
    }

    pub fn e_k1(&self) -> f64 {
        self.rt_over_f() * (self.k_o / self.k_i).ln()
    }

    pub fn g_k(&self) -> f64 {
        0.282 * (self.k_o / 5.4).sqrt()
    }

    pub fn g_k1(&self) -> f64 {
        0.6047 * (self.k_o / 5.4).sqrt()
    }
}

/// Named view of the 8-component Luo-Rudy state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(pub [f64; DIM]);

impl StateVector {
    pub fn new(v: f64, ca_i: f64, h: f64, j: f64, m: f64, d: f64, f: f64, x: f64) -> Self {
        Self([v, ca_i, h, j, m, d, f, x])
    }

    pub fn from_slice(u: &[f64]) -> Result<Self> {
        let arr: [f64; DIM] = u
            .try_into()
            .map_err(|_| Error::invalid(format!("expected {DIM} state components, got {}", u.len())))?;
        Ok(Self(arr))
    }

    /// Component by 1-based index, matching u_1..u_8.
    pub fn component(&self, i: usize) -> f64 {
        assert!((1..=DIM).contains(&i), "component index {i} out of 1..=8");
        self.0[i - 1]
    }

    pub fn v(&self) -> f64 {
        self.0[0]
    }
    pub fn ca_i(&self) -> f64 {
        self.0[1]
    }
    pub fn h(&self) -> f64 {
        self.0[2]
    }
    pub fn j(&self) -> f64 {
        self.0[3]
    }
    pub fn m(&self) -> f64 {
        self.0[4]
    }
    pub fn d(&self) -> f64 {
        self.0[5]
    }
    pub fn f(&self) -> f64 {
        self.0[6]
    }
    pub fn x(&self) -> f64 {
        self.0[7]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for StateVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone)]
#[derive(Default)]
pub struct LuoRudy {
    params: ParameterSet,
}


impl LuoRudy {
    pub fn new(params: ParameterSet) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn rates(&self, v: f64) -> RateFunctionTable {
        rate_functions(&self.params, v)
    }

    fn check(&self, lambda: f64, u: &[f64]) -> Result<()> {
        if u.len() != DIM {
            return Err(Error::invalid(format!("expected {DIM} state components, got {}", u.len())));
        }
        if !lambda.is_finite() {
            return Err(Error::domain(format!("lambda = {lambda} is not finite")));
        }
        if let Some(i) = u.iter().position(|x| !x.is_finite()) {
            return Err(Error::domain(format!(
                "{} (component {}) = {} is not finite",
                NAMES[i],
                i + 1,
                u[i]
            )));
        }
        if u[1] <= 0.0 {
            return Err(Error::domain(format!(
                "Ca_i (component 2) = {} must be positive",
                u[1]
            )));
        }
        Ok(())
    }
}

impl ModelSystem for LuoRudy {
    fn dim(&self) -> usize {
        DIM
    }

    fn component_names(&self) -> &[&'static str] {
        &NAMES
    }

    fn rhs(&self, lambda: f64, u: &[f64]) -> Result<Vec<f64>> {
        self.check(lambda, u)?;
        let p = &self.params;
        let [v, ca, h, j, m, d, f, x] = <[f64; DIM]>::try_from(u).unwrap();
        let r = self.rates(v);

        let i_na = p.g_na * m * m * m * h * j * (v - r.e_na);
        let i_si = p.g_si * d * f * (v - C1 + C2 * ca.ln());
        let i_k = r.g_k * r.xi * (v - r.e_k) * x;
        let i_k1 = r.g_k1 * r.k1_inf * (v - r.e_k1);
        let i_kp = p.g_kp * r.kp * (v - r.e_kp);
        let i_b = p.g_b * (v - p.e_b);

        let mut out = Vec::with_capacity(DIM);
        out.push(-(lambda + i_na + i_si + i_k + i_k1 + i_kp + i_b) / p.c_m);
        out.push(-C3 * i_si + C4 * (C5 - ca));
        for (g, &y) in u[2..].iter().enumerate() {
            out.push(r.alpha[g] - (r.alpha[g] + r.beta[g]) * y);
        }
        Ok(out)
    }

    fn jac_u(&self, lambda: f64, u: &[f64]) -> Result<DenseMatrix> {
        self.check(lambda, u)?;
        let p = &self.params;
        let [v, ca, h, j, m, d, f, x] = <[f64; DIM]>::try_from(u).unwrap();
        let r = self.rates(v);
        let mut jac = DenseMatrix::zeros(DIM, DIM);

        let drive_na = v - r.e_na;
        let drive_si = v - C1 + C2 * ca.ln();
        let drive_k = v - r.e_k;
        let m3 = m * m * m;

        // partial derivatives of the total ionic current
        let di_dv = p.g_na * m3 * h * j
            + p.g_si * d * f
            + r.g_k * x * (r.dxi * drive_k + r.xi)
            + r.g_k1 * (r.dk1_inf * (v - r.e_k1) + r.k1_inf)
            + p.g_kp * (r.dkp * (v - r.e_kp) + r.kp)
            + p.g_b;
        let dsi_dca = p.g_si * d * f * C2 / ca;
        let di = [
            di_dv,
            dsi_dca,
            p.g_na * m3 * j * drive_na,
            p.g_na * m3 * h * drive_na,
            3.0 * p.g_na * m * m * h * j * drive_na,
            p.g_si * f * drive_si,
            p.g_si * d * drive_si,
            r.g_k * r.xi * drive_k,
        ];
        for (k, val) in di.iter().enumerate() {
            jac[(0, k)] = -val / p.c_m;
        }

        jac[(1, 0)] = -C3 * p.g_si * d * f;
        jac[(1, 1)] = -C3 * dsi_dca - C4;
        jac[(1, 5)] = -C3 * p.g_si * f * drive_si;
        jac[(1, 6)] = -C3 * p.g_si * d * drive_si;

        for g in 0..6 {
            let y = u[2 + g];
            jac[(2 + g, 0)] = r.dalpha[g] - (r.dalpha[g] + r.dbeta[g]) * y;
            jac[(2 + g, 2 + g)] = -(r.alpha[g] + r.beta[g]);
        }
        Ok(jac)
    }

    fn jac_lambda(&self, lambda: f64, u: &[f64]) -> Result<Vec<f64>> {
        self.check(lambda, u)?;
        let mut out = vec![0.0; DIM];
        out[0] = -1.0 / self.params.c_m;
        Ok(out)
    }

    fn default_search_box(&self) -> Option<Vec<(f64, f64)>> {
        let mut b = vec![(-90.0, -20.0), (1e-6, 0.02)];
        b.extend(std::iter::repeat_n((0.0, 1.0), 6));
        Some(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{finite_difference_jac_lambda, finite_difference_jac_u};

    pub(crate) const HOPF_LAMBDA: f64 = -1.0140472901;
    pub(crate) const HOPF_U: [f64; 8] = [
        -24.3132508542,
        0.0034641214,
        0.0,
        0.0,
        0.9176777444,
        0.5025242162,
        0.4920204612,
        0.5071561613,
    ];

    #[test]
    fn published_hopf_state_is_an_equilibrium() {
        let f = LuoRudy::default().rhs(HOPF_LAMBDA, &HOPF_U).unwrap();
        let norm = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(norm <= 1e-5, "|F| = {norm:e}, F = {f:?}");
    }

    #[test]
    fn textbook_reversal_misses_published_equilibrium() {
        let params = ParameterSet {
            potassium_reversal: PotassiumReversal::Standard,
            ..ParameterSet::default()
        };
        let f = LuoRudy::new(params).unwrap().rhs(HOPF_LAMBDA, &HOPF_U).unwrap();
        assert!(f[0].abs() > 1e-2);
    }

    #[test]
    fn gating_rows_vanish_at_steady_state() {
        let model = LuoRudy::default();
        for v in [-85.0, -60.0, -30.0, 10.0] {
            let r = model.rates(v);
            let mut u = [v, 2e-4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
            for g in 0..6 {
                u[2 + g] = r.steady_state(g);
            }
            let f = model.rhs(0.3, &u).unwrap();
            for g in 0..6 {
                assert!(f[2 + g].abs() <= 1e-15, "gate {g} at {v}: {}", f[2 + g]);
            }
        }
    }

    #[test]
    fn gating_rows_structure() {
        let model = LuoRudy::default();
        let u = [-50.0, 1e-4, 0.6, 0.7, 0.1, 0.02, 0.9, 0.05];
        let jac = model.jac_u(-0.5, &u).unwrap();
        let r = model.rates(u[0]);
        for l in 2..8 {
            for k in 0..8 {
                if k != 0 && k != l {
                    assert_eq!(jac[(l, k)], 0.0);
                }
            }
            let g = l - 2;
            assert_eq!(jac[(l, l)], -(r.alpha[g] + r.beta[g]));
        }
        let f = model.rhs(-0.5, &u).unwrap();
        for g in 0..6 {
            assert_eq!(f[2 + g], r.alpha[g] - (r.alpha[g] + r.beta[g]) * u[2 + g]);
        }
    }

    #[test]
    fn jacobians_match_finite_differences_at_hopf_point() {
        let model = LuoRudy::default();
        let jac = model.jac_u(HOPF_LAMBDA, &HOPF_U).unwrap();
        let fd = finite_difference_jac_u(&model, HOPF_LAMBDA, &HOPF_U, 1e-6).unwrap();
        let err = jac
            .as_slice()
            .iter()
            .zip(fd.as_slice())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-5, "max |J - J_fd| = {err:e}");

        let jl = model.jac_lambda(HOPF_LAMBDA, &HOPF_U).unwrap();
        let fdl = finite_difference_jac_lambda(&model, HOPF_LAMBDA, &HOPF_U, 1e-6).unwrap();
        for (a, b) in jl.iter().zip(&fdl) {
            assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn jac_lambda_is_inverse_capacitance() {
        let model = LuoRudy::default();
        assert_eq!(model.jac_lambda(0.0, &HOPF_U).unwrap(), vec![-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let model = LuoRudy::new(ParameterSet {
            c_m: 2.0,
            ..ParameterSet::default()
        })
        .unwrap();
        assert_eq!(model.jac_lambda(0.0, &HOPF_U).unwrap()[0], -0.5);
    }

    #[test]
    fn domain_errors_name_the_component() {
        let model = LuoRudy::default();
        let mut u = HOPF_U;
        u[1] = 0.0;
        let msg = model.rhs(0.0, &u).unwrap_err().to_string();
        assert!(msg.contains("Ca_i") && msg.contains("component 2"), "{msg}");
        u[1] = 1e-4;
        u[4] = f64::NAN;
        let msg = model.jac_u(0.0, &u).unwrap_err().to_string();
        assert!(msg.contains("component 5"), "{msg}");
    }

    #[test]
    fn rhs_is_deterministic() {
        let model = LuoRudy::default();
        let a = model.rhs(-1.1, &HOPF_U).unwrap();
        let b = model.rhs(-1.1, &HOPF_U).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn default_conductances() {
        let p = ParameterSet::default();
        assert!((p.g_k() - 0.282).abs() < 1e-15);
        assert!((p.g_k1() - 0.6047).abs() < 1e-15);
        let bad = ParameterSet {
            c_m: 0.0,
            ..ParameterSet::default()
        };
        assert!(LuoRudy::new(bad).is_err());
    }
}
