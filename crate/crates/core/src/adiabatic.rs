// SPDX-License-Identifier: Apache-2.0

//! Adiabatic elimination of the cavity.
//!
//! For a cavity much faster than the walls the fluctuation δa follows the wall
//! operators. Substituting it back leaves the walls coupled through
//!
//! ```text
//! G_jk = 2 Δ̃ |α|² g_j g_k / ((i ω_eff_k + Δκ_k)² + Δ̃²),   Δκ_k = κ_a − κ_eff_k
//! ḃ_j = −(κ_j + i ω_j) b_j − i Σ_k (G*_jk b_k + G_jk b_k†) + noise
//! ```
//!
//! with shifts ω_eff = ω + Re G_jj, κ_eff = κ + Im G_jj solved self-consistently.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::entanglement::{partial_transpose_min, symplectic_spectrum};
use crate::error::{Error, Result};
use crate::linearized::{build_noise, classify_stability, solve_lyapunov_raw};
use crate::steadystate::{SteadyStateRoot, SystemParams};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

type CMat = Vec<Vec<Complex64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveModel {
    pub omega_eff: Vec<f64>,
    pub kappa_eff: Vec<f64>,
    pub g_plus: Vec<Complex64>,
    pub g_minus: Vec<Complex64>,
    pub g_jk: CMat,
    pub nu_plus: CMat,
    pub nu_minus: CMat,
    pub mu: CMat,
    pub delta_tilde: f64,
    pub n_bar: f64,
    pub converged: bool,
    pub iterations: usize,
    /// False when some κ_j exceeds κ_a; the couplings are still computed.
    pub assumption_ok: bool,
}

impl EffectiveModel {
    /// Δ̃ |α|² g_i g_j / (Δ̃² + κ_a²), the dispersive pair coupling.
    pub fn dispersive_coupling(&self, p: &SystemParams) -> Vec<Vec<f64>> {
        let n = p.n_modes();
        let d = self.delta_tilde;
        let den = d * d + p.kappa_a * p.kappa_a;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| d * self.n_bar * p.g[i] * p.g[j] / den)
                    .collect()
            })
            .collect()
    }
}

fn g_matrix(root: &SteadyStateRoot, p: &SystemParams, w: &[f64], k: &[f64]) -> CMat {
    let n = p.n_modes();
    let d = root.delta_tilde;
    let n_a = root.alpha.norm_sqr();
    (0..n)
        .map(|j| {
            (0..n)
                .map(|l| {
                    let z = Complex64::new(p.kappa_a - k[l], w[l]);
                    2.0 * d * n_a * p.g[j] * p.g[l] / (z * z + d * d)
                })
                .collect()
        })
        .collect()
}

/// Couplings at `root` for the given shifted frequencies and dampings.
pub fn effective_couplings(
    root: &SteadyStateRoot,
    p: &SystemParams,
    omega_eff: &[f64],
    kappa_eff: &[f64],
) -> Result<EffectiveModel> {
    let n = p.n_modes();
    if omega_eff.len() != n || kappa_eff.len() != n {
        return Err(Error::param("shifts", format!("expected {n} entries")));
    }
    let assumption_ok = p.kappa.iter().all(|&k| p.kappa_a >= k);
    if !assumption_ok {
        log::warn!("kappa_a < kappa_j: adiabatic elimination outside its assumed regime");
    }
    let d = root.delta_tilde;
    let al = root.alpha;
    let g_jk = g_matrix(root, p, omega_eff, kappa_eff);
    let mut g_minus = Vec::with_capacity(n);
    let mut g_plus = Vec::with_capacity(n);
    for j in 0..n {
        let dk = p.kappa_a - kappa_eff[j];
        g_minus.push(-I * al * p.g[j] / Complex64::new(dk, omega_eff[j] - d));
        g_plus.push(-I * al * p.g[j] / Complex64::new(dk, -(omega_eff[j] + d)));
    }
    let build = |f: &dyn Fn(usize, usize) -> Complex64| -> CMat {
        (0..n).map(|j| (0..n).map(|l| f(j, l)).collect()).collect()
    };
    let nu_minus = build(&|j, l| g_jk[j][l] - d * g_minus[j].conj() * g_minus[l]);
    let nu_plus = build(&|j, l| g_jk[j][l].conj() - d * g_plus[j].conj() * g_plus[l]);
    let mu = build(&|j, l| g_jk[j][l] - d * g_plus[j].conj() * g_minus[l]);
    Ok(EffectiveModel {
        omega_eff: omega_eff.to_vec(),
        kappa_eff: kappa_eff.to_vec(),
        g_plus,
        g_minus,
        g_jk,
        nu_plus,
        nu_minus,
        mu,
        delta_tilde: d,
        n_bar: root.alpha.norm_sqr(),
        converged: true,
        iterations: 0,
        assumption_ok,
    })
}

/// Self-consistent optical-spring shifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shifts {
    pub omega_eff: Vec<f64>,
    pub kappa_eff: Vec<f64>,
    pub iterations: usize,
    /// Largest relative change in the final pass.
    pub residual: f64,
}

/// Fixed-point iteration of ω_eff = ω + Re G_jj, κ_eff = κ + Im G_jj.
///
/// Switches to half steps once the change stops shrinking.
pub fn solve_shifts(
    root: &SteadyStateRoot,
    p: &SystemParams,
    tol: f64,
    max_iter: usize,
) -> Result<Shifts> {
    let n = p.n_modes();
    let mut w = p.omega.clone();
    let mut k = p.kappa.clone();
    let mut step = 1.0;
    let mut last = f64::INFINITY;
    for it in 1..=max_iter {
        let g = g_matrix(root, p, &w, &k);
        let mut change: f64 = 0.0;
        let mut wn = w.clone();
        let mut kn = k.clone();
        for j in 0..n {
            let tw = p.omega[j] + g[j][j].re;
            let tk = p.kappa[j] + g[j][j].im;
            wn[j] = w[j] + step * (tw - w[j]);
            kn[j] = k[j] + step * (tk - k[j]);
            change = change
                .max((tw - w[j]).abs() / p.omega[j])
                .max((tk - k[j]).abs() / p.kappa[j]);
        }
        if change > last && step == 1.0 {
            step = 0.5;
        }
        last = change;
        w = wn;
        k = kn;
        if change < tol {
            return Ok(Shifts {
                omega_eff: w,
                kappa_eff: k,
                iterations: it,
                residual: change,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        last_change: last,
    })
}

/// Shifts plus couplings at the converged point.
pub fn effective_model(root: &SteadyStateRoot, p: &SystemParams) -> Result<EffectiveModel> {
    let s = solve_shifts(root, p, 1e-12, 100)?;
    let mut em = effective_couplings(root, p, &s.omega_eff, &s.kappa_eff)?;
    em.iterations = s.iterations;
    em.converged = true;
    Ok(em)
}

/// Which reduced equations of motion to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ReducedForm {
    /// Direct substitution of the eliminated cavity: bare ω, κ on the
    /// diagonal, couplings G* (beam splitter) and G (squeezing).
    #[default]
    Substitution,
    /// Shifted ω_eff, κ_eff with ν⁺ beam-splitter and μ squeezing terms.
    Hamiltonian,
    /// Bare ω, κ with the dispersive coupling Σ G_ij (b_i + b_i†)(b_j + b_j†).
    Dispersive,
}

/// (P, Q) of ḃ = P b + Q b†.
pub fn reduced_pq(
    em: &EffectiveModel,
    p: &SystemParams,
    form: ReducedForm,
    squeezing: bool,
) -> (CMat, CMat) {
    let n = p.n_modes();
    let zero = Complex64::new(0.0, 0.0);
    let mut pm = vec![vec![zero; n]; n];
    let mut qm = vec![vec![zero; n]; n];
    match form {
        ReducedForm::Substitution => {
            for j in 0..n {
                for l in 0..n {
                    pm[j][l] = -I * em.g_jk[j][l].conj();
                    qm[j][l] = -I * em.g_jk[j][l];
                }
                pm[j][j] += -Complex64::new(p.kappa[j], p.omega[j]);
            }
        }
        ReducedForm::Hamiltonian => {
            for j in 0..n {
                for l in 0..n {
                    if j == l {
                        pm[j][j] = -Complex64::new(em.kappa_eff[j], em.omega_eff[j]);
                        qm[j][j] = -I * em.g_jk[j][j];
                    } else {
                        pm[j][l] = -I * em.nu_plus[j][l];
                        qm[j][l] = -I * em.mu[j][l];
                    }
                }
            }
        }
        ReducedForm::Dispersive => {
            let gd = em.dispersive_coupling(p);
            for j in 0..n {
                for l in 0..n {
                    let c = Complex64::new(0.0, -(gd[j][l] + gd[l][j]));
                    pm[j][l] = c;
                    qm[j][l] = c;
                }
                pm[j][j] += -Complex64::new(p.kappa[j], p.omega[j]);
            }
        }
    }
    if !squeezing {
        for row in qm.iter_mut() {
            for q in row.iter_mut() {
                *q = zero;
            }
        }
    }
    (pm, qm)
}

/// Real quadrature drift of ḃ = P b + Q b†.
pub fn pq_to_real(pm: &CMat, qm: &CMat) -> DMatrix<f64> {
    let n = pm.len();
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for k in 0..n {
            let s = pm[j][k] + qm[j][k];
            let d = pm[j][k] - qm[j][k];
            a[(2 * j, 2 * k)] = s.re;
            a[(2 * j, 2 * k + 1)] = -d.im;
            a[(2 * j + 1, 2 * k)] = s.im;
            a[(2 * j + 1, 2 * k + 1)] = d.re;
        }
    }
    a
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedResult {
    pub e_12: f64,
    /// Smallest Williamson value of `v4`. The reduced equations drop the
    /// noise correlations of the eliminated cavity, so this can dip below 1/2.
    pub symplectic_min: f64,
    pub v4: DMatrix<f64>,
    pub a4: DMatrix<f64>,
    pub max_re: f64,
}

/// Two-wall steady state of the reduced model with the walls' thermal noise.
pub fn reduced_dw_model(
    em: &EffectiveModel,
    p: &SystemParams,
    form: ReducedForm,
    squeezing: bool,
) -> Result<ReducedResult> {
    p.require_two()?;
    if !em.converged {
        return Err(Error::NonConvergence {
            iterations: em.iterations,
            last_change: f64::NAN,
        });
    }
    let (pm, qm) = reduced_pq(em, p, form, squeezing);
    let a4 = pq_to_real(&pm, &qm);
    let rep = classify_stability(&a4, None);
    if !rep.stable {
        return Err(Error::Unstable { max_re: rep.max_re });
    }
    let noise = build_noise(p);
    let mut d = noise.d.view((2, 2), (4, 4)).into_owned();
    // Damping added by the cavity comes with the cavity's own noise.
    let n_a = noise.n_th[0];
    for j in 0..2 {
        let extra = -pm[j][j].re - p.kappa[j];
        if extra > 0.0 {
            for q in 0..2 {
                d[(2 * j + q, 2 * j + q)] += extra * (2.0 * n_a + 1.0);
            }
        }
    }
    let v4 = solve_lyapunov_raw(&a4, &d)?;
    let symplectic_min = symplectic_spectrum(&v4)?[0];
    let e_12 = (-(2.0 * partial_transpose_min(&v4)?).ln()).max(0.0);
    Ok(ReducedResult {
        e_12,
        symplectic_min,
        v4,
        a4,
        max_re: rep.max_re,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steadystate::{roots_from_reduced, ReducedCoords};

    fn lone_root() -> (SteadyStateRoot, SystemParams) {
        let p = SystemParams::two_walls(1e9, 1e9, 1e6, 2e6, 1e6);
        let rr = roots_from_reduced(ReducedCoords::from_geff(0.1, -40e9, &p), &p).unwrap();
        (rr.roots[0].clone(), rr.params)
    }

    #[test]
    fn no_coupling_is_bare() {
        let (root, mut p) = lone_root();
        p.g = vec![0.0, 0.0];
        let s = solve_shifts(&root, &p, 1e-12, 100).unwrap();
        assert_eq!(s.iterations, 1);
        assert_eq!(s.omega_eff, p.omega);
        let em = effective_couplings(&root, &p, &s.omega_eff, &s.kappa_eff).unwrap();
        assert!(em.mu.iter().flatten().all(|z| z.norm() == 0.0));
        let r = reduced_dw_model(&em, &p, ReducedForm::Substitution, true).unwrap();
        assert_eq!(r.e_12, 0.0);
    }

    fn at(g_eff: f64, delta: f64) -> (SteadyStateRoot, SystemParams) {
        let p = SystemParams::two_walls(1e9, 1e9, 1e6, 2e6, 1e6);
        let rr = roots_from_reduced(ReducedCoords::from_geff(g_eff, delta, &p), &p).unwrap();
        (rr.roots[0].clone(), rr.params)
    }

    #[test]
    fn large_detuning_asymptote() {
        // |α g| fixed; ν − μ closes like 2ω/|Δ̃|.
        let rel = |d: f64| {
            let (root, p) = at(0.1, d);
            let em = effective_couplings(&root, &p, &p.omega, &p.kappa).unwrap();
            let lim = 2.0 * root.alpha.norm_sqr() * p.g[0] * p.g[1] / d;
            let g = (em.g_jk[0][1] - lim).norm() / lim.abs();
            let nm = (em.nu_plus[0][1] - em.mu[0][1]).norm() / em.mu[0][1].norm();
            (g, nm)
        };
        let (g3, nm3) = rel(-1e12);
        assert!((nm3 / 2e-3 - 1.0).abs() < 0.05, "{nm3}");
        assert!(g3 < 1e-5, "{g3}");
        let (g7, nm7) = rel(-1e16);
        assert!(g7 < 1e-6 && nm7 < 1e-6, "{g7} {nm7}");
    }

    #[test]
    fn coupling_follows_detuning_sign() {
        let (root, p) = at(0.1, -40e9);
        let em = effective_model(&root, &p).unwrap();
        assert!(em.g_jk[0][1].re < 0.0 && em.g_jk[0][1].norm().is_finite());
    }

    #[test]
    fn weak_coupling_shift_is_small() {
        let (root, p) = at(0.01, -40e9);
        let s = solve_shifts(&root, &p, 1e-12, 100).unwrap();
        assert!(s.iterations < 10, "{}", s.iterations);
        for j in 0..2 {
            assert!((s.omega_eff[j] - p.omega[j]).abs() / p.omega[j] < 1e-4);
        }
    }

    #[test]
    fn shift_is_twice_the_dispersive_diagonal() {
        let (root, p) = at(0.1, -100e9);
        let em = effective_model(&root, &p).unwrap();
        let gd = em.dispersive_coupling(&p);
        for j in 0..2 {
            let ratio = (em.omega_eff[j] - p.omega[j]) / gd[j][j];
            assert!((ratio - 2.0).abs() < 1e-3, "{ratio}");
        }
    }

    #[test]
    fn beam_splitter_only_is_separable() {
        let (root, p) = lone_root();
        let em = effective_model(&root, &p).unwrap();
        for form in [
            ReducedForm::Substitution,
            ReducedForm::Hamiltonian,
            ReducedForm::Dispersive,
        ] {
            let r = reduced_dw_model(&em, &p, form, false).unwrap();
            assert!(r.e_12 < 1e-12, "{form:?} {}", r.e_12);
        }
    }

    #[test]
    fn real_drift_matches_complex_equations() {
        let (root, p) = lone_root();
        let em = effective_model(&root, &p).unwrap();
        let (pm, qm) = reduced_pq(&em, &p, ReducedForm::Hamiltonian, true);
        let a = pq_to_real(&pm, &qm);
        // Column c of A is the response to a unit quadrature kick.
        let s2 = std::f64::consts::SQRT_2;
        for c in 0..4 {
            let mut b = [Complex64::new(0.0, 0.0); 2];
            b[c / 2] = if c % 2 == 0 {
                Complex64::new(1.0 / s2, 0.0)
            } else {
                Complex64::new(0.0, 1.0 / s2)
            };
            for j in 0..2 {
                let mut db = Complex64::new(0.0, 0.0);
                for k in 0..2 {
                    db += pm[j][k] * b[k] + qm[j][k] * b[k].conj();
                }
                let scale = a.abs().max();
                assert!((s2 * db.re - a[(2 * j, c)]).abs() < 1e-12 * scale);
                assert!((s2 * db.im - a[(2 * j + 1, c)]).abs() < 1e-12 * scale);
            }
        }
    }
}
