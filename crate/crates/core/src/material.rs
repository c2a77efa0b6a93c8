// SPDX-License-Identifier: Apache-2.0

//! Material and geometry parameters to effective domain-wall mode parameters.
//!
//! Everything here is SI. The physical constants are used only in this module
//! and in thermal occupations; the dynamical core works in any consistent
//! frequency unit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light, m/s.
pub const C_LIGHT: f64 = 299_792_458.0;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// How a frequency number entered by the user maps to an angular frequency.
///
/// `Angular` takes numbers as ω in rad/s. `Ordinary` takes them as ν in Hz,
/// so the angular frequency is 2πν. The dynamics are identical in both (all
/// rates scale together); only quantities involving ħω/k_BT differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyConvention {
    Angular,
    #[default]
    Ordinary,
}

impl FrequencyConvention {
    pub fn factor(self) -> f64 {
        match self {
            FrequencyConvention::Angular => 1.0,
            FrequencyConvention::Ordinary => 2.0 * std::f64::consts::PI,
        }
    }

    /// Angular frequency in rad/s for a number entered under this convention.
    pub fn to_angular(self, x: f64) -> f64 {
        x * self.factor()
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "angular" | "rad" => Ok(FrequencyConvention::Angular),
            "ordinary" | "hz" => Ok(FrequencyConvention::Ordinary),
            other => Err(Error::Config(format!(
                "unknown frequency convention `{other}` (angular|ordinary)"
            ))),
        }
    }
}

/// Bose occupation 1/(exp(ħω/k_BT) − 1) of a mode with frequency `omega`
/// (interpreted under `conv`) at temperature `t` in kelvin.
pub fn bose_occupation(omega: f64, t: f64, conv: FrequencyConvention) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let x = HBAR * conv.to_angular(omega) / (K_B * t);
    1.0 / x.exp_m1()
}

/// Material and geometry inputs. Per-wall quantities are vectors indexed by wall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    /// Pinning strength per wall, J.
    pub k_pin: Vec<f64>,
    /// Out-of-plane anisotropy, J.
    pub k_perp: f64,
    /// In-plane anisotropy, J.
    pub k_par: f64,
    /// Exchange constant, J m².
    pub j_ex: f64,
    /// Unit-cell dimension, m.
    pub l: f64,
    /// Wall width, m. Derived as sqrt(J/K_par) when absent.
    #[serde(default)]
    pub lambda_dw: Option<f64>,
    /// Faraday rotation, rad/m.
    pub phi_f: f64,
    /// Relative permittivity.
    pub eps: f64,
    /// Mass density, kg/m³.
    pub rho: f64,
    /// Scattering cross-section per wall, m².
    pub a_perp: Vec<f64>,
    /// Cavity volume, m³.
    pub v_c: f64,
    /// Effective wall volume per wall, m³.
    pub v_j: Vec<f64>,
    /// Gilbert damping.
    pub alpha_g: f64,
    /// Cavity frequency, rad/s.
    pub omega_a: f64,
}

/// Effective oscillator parameters of one wall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwMode {
    pub omega: f64,
    pub kappa: f64,
    /// Magneto-optic coupling. Negative for positive φ_F.
    pub g: f64,
    pub x_zpf: f64,
    pub s_eff: f64,
    pub m_eff: f64,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            field,
            format!("must be finite and > 0, got {v}"),
        ))
    }
}

impl MaterialSpec {
    pub fn n_walls(&self) -> usize {
        self.k_pin.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.k_pin.len();
        if n == 0 {
            return Err(Error::param("k_pin", "at least one wall required"));
        }
        if self.a_perp.len() != n || self.v_j.len() != n {
            return Err(Error::param(
                "a_perp/v_j",
                format!("expected {n} entries to match k_pin"),
            ));
        }
        for (j, &k) in self.k_pin.iter().enumerate() {
            positive(&format!("k_pin[{j}]"), k)?;
        }
        for (j, &a) in self.a_perp.iter().enumerate() {
            positive(&format!("a_perp[{j}]"), a)?;
        }
        for (j, &v) in self.v_j.iter().enumerate() {
            positive(&format!("v_j[{j}]"), v)?;
        }
        positive("k_perp", self.k_perp)?;
        positive("k_par", self.k_par)?;
        positive("j_ex", self.j_ex)?;
        positive("l", self.l)?;
        if let Some(w) = self.lambda_dw {
            positive("lambda_dw", w)?;
        }
        positive("phi_f", self.phi_f)?;
        positive("eps", self.eps)?;
        positive("rho", self.rho)?;
        positive("v_c", self.v_c)?;
        positive("omega_a", self.omega_a)?;
        if !(self.alpha_g > 0.0 && self.alpha_g < 1.0) {
            return Err(Error::param(
                "alpha_g",
                format!("must lie in (0, 1), got {}", self.alpha_g),
            ));
        }
        Ok(())
    }

    /// Wall width, explicit or sqrt(J/K_par).
    pub fn wall_width(&self) -> f64 {
        self.lambda_dw
            .unwrap_or_else(|| (self.j_ex / self.k_par).sqrt())
    }
}

/// Derives the oscillator parameters of wall `j`.
pub fn derive_dw_mode(spec: &MaterialSpec, j: usize) -> Result<DwMode> {
    spec.validate()?;
    if j >= spec.n_walls() {
        return Err(Error::param(
            "j",
            format!("wall index {j} out of range (n = {})", spec.n_walls()),
        ));
    }
    let lam = spec.wall_width();
    let k_pin = spec.k_pin[j];
    let omega = (2.0 * k_pin * spec.k_perp * spec.l / (HBAR * HBAR * lam)).sqrt();
    // A vanishing pinning leaves no quantizable oscillator.
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::param("k_pin", "pinning too weak: omega_j is zero"));
    }
    let kappa = spec.alpha_g * omega / (k_pin * spec.l / (2.0 * spec.k_perp * lam)).sqrt();
    let m_eff = spec.rho * spec.v_j[j];
    let x_zpf = (HBAR / (2.0 * m_eff * omega)).sqrt();
    let s_eff = x_zpf * spec.a_perp[j] / spec.v_c;
    let root_eps = spec.eps.sqrt();
    let g = -C_LIGHT * spec.phi_f * root_eps * s_eff / 2.0;

    // Same coupling from the permittivity modulation amplitude f.
    let f = 2.0 * C_LIGHT * spec.phi_f * root_eps / spec.omega_a;
    let g_alt = f * s_eff * spec.omega_a / 4.0;
    let rel = (g.abs() - g_alt.abs()).abs() / g_alt.abs();
    if rel > 1e-12 {
        return Err(Error::Numerical(format!(
            "coupling forms disagree: {g:e} vs {g_alt:e}"
        )));
    }
    Ok(DwMode {
        omega,
        kappa,
        g,
        x_zpf,
        s_eff,
        m_eff,
    })
}

/// Pinning potential at displacement `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinningPotential {
    /// −K sech²(x/λ).
    pub exact: f64,
    /// Quadratic form K x²/(4λ²).
    pub parabolic: f64,
    /// Offset-free second-order Taylor term K x²/λ², curvature-matched to `exact`.
    pub taylor: f64,
}

pub fn pinning_potential(x: f64, k_pin: f64, lambda_dw: f64) -> Result<PinningPotential> {
    positive("lambda_dw", lambda_dw)?;
    let u = x / lambda_dw;
    let sech = if u.abs() > 350.0 { 0.0 } else { 1.0 / u.cosh() };
    Ok(PinningPotential {
        exact: -k_pin * sech * sech,
        parabolic: k_pin * u * u / 4.0,
        taylor: k_pin * u * u,
    })
}
