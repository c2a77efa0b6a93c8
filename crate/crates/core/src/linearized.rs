// SPDX-License-Identifier: Apache-2.0

//! Linearized quadrature dynamics around a mean-field root.
//!
//! Quadratures are ordered (x_a, y_a, x_1, y_1, …) with x = (δo + δo†)/√2,
//! y = −i(δo − δo†)/√2, so the vacuum has variance 1/2.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::bose_occupation;
use crate::steadystate::{SteadyStateRoot, SystemParams};

/// Real drift matrix A of the fluctuations, dimension 2 + 2N.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftMatrix {
    pub a: DMatrix<f64>,
    pub root_index: usize,
}

/// Diffusion D and input coupling D0.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMatrix {
    pub d: DMatrix<f64>,
    pub d0: DMatrix<f64>,
    /// Thermal occupation per mode, cavity first.
    pub n_th: Vec<f64>,
}

/// Symmetric steady-state covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    pub v: DMatrix<f64>,
    /// Low-order part: the refined solution is `v + correction`, with
    /// |correction| at the rounding level of `v`.
    pub correction: DMatrix<f64>,
    /// ‖AV + VAᵀ + D‖_max / ‖D‖_max of the refined solution, evaluated in
    /// double-double arithmetic.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub eigenvalues: Vec<Complex64>,
    pub max_re: f64,
    pub stable: bool,
    /// tol − max_re; positive when stable.
    pub margin: f64,
    pub tol: f64,
}

/// Row-major nested vectors, for JSON output.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Max absolute row sum.
pub(crate) fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Drift matrix at `root`. `p` must carry the drive that produced the root.
pub fn build_drift(root: &SteadyStateRoot, p: &SystemParams) -> Result<DriftMatrix> {
    if !root.is_real {
        return Err(Error::NonRealRoot(root.k));
    }
    let n = p.n_modes();
    if root.beta.len() != n {
        return Err(Error::param(
            "beta",
            format!("expected {n} wall amplitudes"),
        ));
    }
    let dim = 2 + 2 * n;
    let mut a = DMatrix::zeros(dim, dim);
    let mut dt = p.delta_a;
    for j in 0..n {
        dt -= p.g[j] * (root.beta[j] + root.beta[j].conj()).re;
    }
    let s2 = std::f64::consts::SQRT_2;
    let xa = s2 * root.alpha.re;
    let ya = s2 * root.alpha.im;
    a[(0, 0)] = -p.kappa_a;
    a[(1, 1)] = -p.kappa_a;
    a[(0, 1)] = -dt;
    a[(1, 0)] = dt;
    for j in 0..n {
        let i = 2 + 2 * j;
        let gt = s2 * p.g[j];
        a[(i, i)] = -p.kappa[j];
        a[(i + 1, i + 1)] = -p.kappa[j];
        a[(i, i + 1)] = p.omega[j];
        a[(i + 1, i)] = -p.omega[j];
        a[(0, i)] = gt * ya;
        a[(1, i)] = -gt * xa;
        a[(i + 1, 0)] = -gt * xa;
        a[(i + 1, 1)] = -gt * ya;
    }
    Ok(DriftMatrix {
        a,
        root_index: root.k,
    })
}

/// Central-difference Jacobian of the mean-field vector field at `root`, in
/// quadrature coordinates. The field is quadratic, so this is exact up to
/// rounding.
pub fn numerical_jacobian(p: &SystemParams, root: &SteadyStateRoot) -> DMatrix<f64> {
    let n = p.n_modes();
    let dim = 2 + 2 * n;
    let mut s0 = vec![root.alpha];
    s0.extend(root.beta.iter().copied());
    let h = 1e-3 * (1.0 + root.alpha.norm());
    let s2 = std::f64::consts::SQRT_2;
    let mut jac = DMatrix::zeros(dim, dim);
    let mut fp = vec![Complex64::default(); n + 1];
    let mut fm = fp.clone();
    for c in 0..dim {
        let mode = c / 2;
        let dz = if c % 2 == 0 {
            Complex64::new(h / s2, 0.0)
        } else {
            Complex64::new(0.0, h / s2)
        };
        let mut sp = s0.clone();
        let mut sm = s0.clone();
        sp[mode] += dz;
        sm[mode] -= dz;
        crate::steadystate::mean_field_rhs(p, &sp, &mut fp);
        crate::steadystate::mean_field_rhs(p, &sm, &mut fm);
        for m in 0..=n {
            let df = (fp[m] - fm[m]) / (2.0 * h);
            jac[(2 * m, c)] = s2 * df.re;
            jac[(2 * m + 1, c)] = s2 * df.im;
        }
    }
    jac
}

/// Thermal occupations, cavity first.
pub fn thermal_occupations(p: &SystemParams) -> Vec<f64> {
    let mut n = vec![p.n_a_th.unwrap_or(0.0)];
    n.extend(
        p.omega
            .iter()
            .map(|&w| bose_occupation(w, p.temperature, p.convention)),
    );
    n
}

pub fn build_noise(p: &SystemParams) -> NoiseMatrix {
    let n_th = thermal_occupations(p);
    let mut rates = vec![p.kappa_a];
    rates.extend(p.kappa.iter().copied());
    let dim = 2 * rates.len();
    let mut d = DMatrix::zeros(dim, dim);
    let mut d0 = DMatrix::zeros(dim, dim);
    for (m, (&k, &nt)) in rates.iter().zip(&n_th).enumerate() {
        for q in 0..2 {
            d[(2 * m + q, 2 * m + q)] = k * (2.0 * nt + 1.0);
            d0[(2 * m + q, 2 * m + q)] = (2.0 * k).sqrt();
        }
    }
    NoiseMatrix { d, d0, n_th }
}

pub fn default_tolerance(a: &DMatrix<f64>) -> f64 {
    1e-9 * inf_norm(a)
}

/// Eigenvalue-based stability; `tol = None` uses 1e-9·‖A‖.
pub fn classify_stability(a: &DMatrix<f64>, tol: Option<f64>) -> StabilityReport {
    let tol = tol.unwrap_or_else(|| default_tolerance(a));
    let eigenvalues: Vec<Complex64> = a.clone().complex_eigenvalues().iter().copied().collect();
    let max_re = eigenvalues
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    StabilityReport {
        stable: max_re <= tol,
        margin: tol - max_re,
        max_re,
        eigenvalues,
        tol,
    }
}

fn lyapunov_residual(a: &DMatrix<f64>, v: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    a * v + v * a.transpose() + d
}

/// Relative residual ‖AV + VAᵀ + D‖_max / ‖D‖_max.
pub fn relative_residual(a: &DMatrix<f64>, v: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let dn = max_abs(d);
    let r = max_abs(&lyapunov_residual(a, v, d));
    if dn == 0.0 {
        r
    } else {
        r / dn
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Double-double accumulator.
#[derive(Clone, Copy, Default)]
struct Dd(f64, f64);

impl Dd {
    fn add(self, x: f64) -> Dd {
        let (s, e) = two_sum(self.0, x);
        Dd(s, self.1 + e)
    }

    /// Adds a·(h + l); a·h exactly, a·l to first order.
    fn add_prod(self, a: f64, h: f64, l: f64) -> Dd {
        let p = a * h;
        let pe = a.mul_add(h, -p);
        let (s, e) = two_sum(self.0, p);
        Dd(s, self.1 + e + pe + a * l)
    }

    fn value(self) -> f64 {
        self.0 + self.1
    }
}

/// AV + VAᵀ + D with V = vh + vl, each entry accumulated in double-double.
fn residual_dd(
    a: &DMatrix<f64>,
    vh: &DMatrix<f64>,
    vl: &DMatrix<f64>,
    d: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let mut acc = Dd::default().add(d[(i, j)]);
        for l in 0..n {
            acc = acc.add_prod(a[(i, l)], vh[(l, j)], vl[(l, j)]);
            acc = acc.add_prod(a[(j, l)], vh[(i, l)], vl[(i, l)]);
        }
        acc.value()
    })
}

/// Solves AV + VAᵀ = −D for stable A as a dense n²-dimensional linear system.
///
/// Iterative refinement runs on a two-word representation of V with
/// residuals in double-double, so the refined solution meets a 1e-10
/// relative residual even when ‖A‖‖V‖/‖D‖ is large enough that a single f64
/// matrix cannot.
pub fn solve_lyapunov_refined(a: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<CovarianceMatrix> {
    let n = a.nrows();
    let report = classify_stability(a, None);
    if !report.stable {
        return Err(Error::Unstable {
            max_re: report.max_re,
        });
    }
    let scale = inf_norm(a).max(f64::MIN_POSITIVE);
    // λ_i + λ_j ≈ 0 makes the Kronecker operator singular.
    let mut gap = f64::INFINITY;
    for x in &report.eigenvalues {
        for y in &report.eigenvalues {
            gap = gap.min((x + y).norm());
        }
    }
    if gap <= 1e-13 * scale {
        return Err(Error::Conditioning(format!(
            "eigenvalue pair sums to {gap:e} (scale {scale:e})"
        )));
    }
    // Power of two, so the scaled problem is the same problem exactly.
    let p2 = 2f64.powi(scale.log2().round() as i32);
    let an = a / p2;
    let dn = d / p2;
    let m = n * n;
    let mut k = DMatrix::zeros(m, m);
    // Column-major vec: vec(AV) = (I ⊗ A) vec V, vec(VAᵀ) = (A ⊗ I) vec V.
    for c in 0..n {
        for i in 0..n {
            for l in 0..n {
                k[(c * n + i, c * n + l)] += an[(i, l)];
                k[(c * n + i, l * n + i)] += an[(c, l)];
            }
        }
    }
    let lu = k.lu();
    let rhs = DMatrix::from_iterator(m, 1, dn.iter().map(|x| -x));
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Conditioning("singular Kronecker system".into()))?;
    let sym = |v: &DMatrix<f64>| (v + v.transpose()) * 0.5;
    let mut vh = sym(&DMatrix::from_column_slice(n, n, x.as_slice()));
    let mut vl = DMatrix::zeros(n, n);
    let dmax = max_abs(&dn).max(f64::MIN_POSITIVE);
    let mut res = f64::INFINITY;
    for _ in 0..6 {
        let r = residual_dd(&an, &vh, &vl, &dn);
        res = max_abs(&r) / dmax;
        if res <= 1e-14 {
            break;
        }
        let rv = DMatrix::from_column_slice(m, 1, r.as_slice());
        let Some(dx) = lu.solve(&rv) else { break };
        let dv = sym(&DMatrix::from_column_slice(n, n, dx.as_slice()));
        for idx in 0..m {
            let (s, e) = two_sum(vh[idx], vl[idx] - dv[idx]);
            vh[idx] = s;
            vl[idx] = e;
        }
    }
    if !vh.iter().chain(vl.iter()).all(|z| z.is_finite()) {
        return Err(Error::Conditioning("non-finite covariance".into()));
    }
    if res > 1e-10 {
        return Err(Error::Conditioning(format!(
            "Lyapunov residual {res:e} exceeds 1e-10"
        )));
    }
    Ok(CovarianceMatrix {
        v: vh,
        correction: vl,
        residual: res,
    })
}

/// [`solve_lyapunov_refined`], rounded to one f64 matrix.
pub fn solve_lyapunov_raw(a: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    solve_lyapunov_refined(a, d).map(|c| c.v)
}

pub fn solve_lyapunov(a: &DriftMatrix, noise: &NoiseMatrix) -> Result<CovarianceMatrix> {
    solve_lyapunov_refined(&a.a, &noise.d)
}

/// Residual of a two-word solution, in double-double.
pub fn refined_residual(a: &DMatrix<f64>, cov: &CovarianceMatrix, d: &DMatrix<f64>) -> f64 {
    let dn = max_abs(d);
    let r = max_abs(&residual_dd(a, &cov.v, &cov.correction, d));
    if dn == 0.0 {
        r
    } else {
        r / dn
    }
}

/// Integrates dV/dt = AV + VAᵀ + D from V = 0 by RK4 until stationary.
///
/// Test oracle. Stops when the remaining distance to the fixed point, bounded
/// by ‖dV/dt‖/(2|max Re λ|), falls below `tol`·‖V‖.
pub fn integrate_lyapunov(
    a: &DMatrix<f64>,
    d: &DMatrix<f64>,
    horizon: f64,
    tol: f64,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let report = classify_stability(a, Some(0.0));
    let decay = -report.max_re;
    let norm = inf_norm(a).max(f64::MIN_POSITIVE);
    let h = 0.5 / norm;
    let at = a.transpose();
    let f = |v: &DMatrix<f64>| a * v + v * &at + d;
    let mut v = DMatrix::zeros(n, n);
    let mut t = 0.0;
    let mut step = 0usize;
    loop {
        let k1 = f(&v);
        let vn = max_abs(&v);
        if !vn.is_finite() || (decay <= 0.0 && vn > 1e12 * (1.0 + max_abs(d) / norm)) {
            return Err(Error::OracleTimeout("covariance diverges".into()));
        }
        if step % 32 == 0 && decay > 0.0 && vn > 0.0 && max_abs(&k1) / (2.0 * decay) <= tol * vn {
            return Ok((&v + v.transpose()) * 0.5);
        }
        if t >= horizon {
            return Err(Error::OracleTimeout(format!(
                "covariance still evolving at t = {t:e}"
            )));
        }
        let k2 = f(&(&v + &k1 * (h / 2.0)));
        let k3 = f(&(&v + &k2 * (h / 2.0)));
        let k4 = f(&(&v + &k3 * h));
        v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        t += h;
        step += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steadystate::{bifurcation_amplitude, roots_from_reduced, ReducedCoords};

    #[test]
    fn scalar_balance() {
        let kap = 3.0;
        let nt = 0.7;
        let a = DMatrix::identity(6, 6) * -kap;
        let d = DMatrix::identity(6, 6) * (2.0 * kap * (nt + 0.5));
        let v = solve_lyapunov_raw(&a, &d).unwrap();
        assert!((v - DMatrix::identity(6, 6) * (nt + 0.5)).abs().max() < 1e-13);
        let w = integrate_lyapunov(&a, &d, 100.0, 1e-12).unwrap();
        assert!((w[(0, 0)] - (nt + 0.5)).abs() < 1e-10);
    }

    #[test]
    fn unstable_rejected() {
        let a = DMatrix::identity(2, 2);
        let d = DMatrix::identity(2, 2);
        assert!(matches!(
            solve_lyapunov_raw(&a, &d),
            Err(Error::Unstable { .. })
        ));
        assert!(matches!(
            integrate_lyapunov(&a, &d, 1e3, 1e-10),
            Err(Error::OracleTimeout(_))
        ));
    }

    #[test]
    fn decoupled_blocks() {
        let mut p = SystemParams::two_walls(1e9, 1.2e9, 0.0, 2e6, 1e6).with_drive(-1e9, 1e8);
        p.g = vec![0.0, 0.0];
        p.temperature = 0.05;
        let roots = crate::steadystate::solve_mean_field(&p).unwrap();
        let dm = build_drift(&roots[0], &p).unwrap();
        assert_eq!(dm.a[(3, 2)], -1e9);
        assert_eq!(dm.a[(2, 3)], 1e9);
        assert_eq!(dm.a[(0, 2)], 0.0);
        let nm = build_noise(&p);
        let v = solve_lyapunov(&dm, &nm).unwrap().v;
        for m in 0..3 {
            assert!((v[(2 * m, 2 * m)] - nm.n_th[m] - 0.5).abs() < 1e-9);
        }
        assert!(v[(0, 2)].abs() < 1e-12);
    }

    #[test]
    fn zero_temperature_noise() {
        let p = SystemParams::two_walls(1e9, 1e9, 1e6, 2e6, 1e6);
        let nm = build_noise(&p);
        let diag: Vec<f64> = (0..6).map(|i| nm.d[(i, i)]).collect();
        assert_eq!(diag, vec![2e6, 2e6, 1e6, 1e6, 1e6, 1e6]);
        let n_half = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            6,
            (0..6).map(|i| nm.n_th[i / 2] + 0.5),
        ));
        let back = &nm.d0 * n_half * &nm.d0;
        assert!((back - &nm.d).abs().max() < 1e-6);
    }

    #[test]
    fn jacobian_matches_finite_difference() {
        let p = SystemParams::two_walls(1e9, 1e9, 1e6, 2e6, 1e6);
        let rc = ReducedCoords::from_geff(0.3, -1e9, &p);
        let rr = roots_from_reduced(rc, &p).unwrap();
        let root = &rr.roots[0];
        let q = &rr.params;
        let dm = build_drift(root, q).unwrap();
        let num = numerical_jacobian(q, root);
        let scale = max_abs(&dm.a);
        assert!((&dm.a - &num).abs().max() / scale < 1e-6);
        let _ = bifurcation_amplitude(-1e9, &p).unwrap();
    }

    #[test]
    fn refinement_beats_single_word_floor() {
        use crate::steadystate::{roots_from_reduced, ReducedCoords};
        let p = SystemParams::representative(1.0);
        let rr = roots_from_reduced(ReducedCoords::from_geff(0.5, -2e9, &p), &p).unwrap();
        let q = &rr.params;
        let dm = build_drift(rr.root(0).unwrap(), q).unwrap();
        let nm = build_noise(q);
        let cov = solve_lyapunov(&dm, &nm).unwrap();
        assert!(cov.residual < 1e-10);
        assert!((refined_residual(&dm.a, &cov, &nm.d) - cov.residual).abs() < 1e-12);
        // the rounded matrix alone sits at the f64 floor
        assert!(max_abs(&cov.correction) <= 1e-15 * max_abs(&cov.v));
    }
}
