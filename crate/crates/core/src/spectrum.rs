// SPDX-License-Identifier: Apache-2.0

//! Output noise spectra and non-Hermitian eigenvalue branches.
//!
//! With u_out = u_in + D0 u (input-output) and u̇ = A u + D0 u_in the output
//! quadratures are T(ω) u_in(ω) with T(ω) = −[I + D0 (A + iωI)⁻¹ D0]. The
//! spectral matrix is S(ω) = T(ω) χ T(−ω)ᵀ.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linearized::{classify_stability, inf_norm, thermal_occupations};
use crate::steadystate::{SteadyStateRoot, SystemParams};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// T(ω) = −[I + D0 (A + iωI)⁻¹ D0].
pub fn transfer_matrix(
    a: &DMatrix<f64>,
    d0: &DMatrix<f64>,
    omega: f64,
) -> Result<DMatrix<Complex64>> {
    let n = a.nrows();
    let mut m = complexify(a);
    for i in 0..n {
        m[(i, i)] += I * omega;
    }
    let lu = m.lu();
    let d0c = complexify(d0);
    let x = lu.solve(&d0c).ok_or(Error::Singular(omega))?;
    if !x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Singular(omega));
    }
    Ok(-(DMatrix::identity(n, n) + &d0c * x))
}

/// Input-noise spectral matrix: per mode [[n + 1/2, i/2], [−i/2, n + 1/2]].
pub fn input_spectral_matrix(p: &SystemParams) -> DMatrix<Complex64> {
    let n_th = thermal_occupations(p);
    let dim = 2 * n_th.len();
    let mut chi = DMatrix::zeros(dim, dim);
    for (m, &n) in n_th.iter().enumerate() {
        let (x, y) = (2 * m, 2 * m + 1);
        chi[(x, x)] = Complex64::new(n + 0.5, 0.0);
        chi[(y, y)] = Complex64::new(n + 0.5, 0.0);
        chi[(x, y)] = Complex64::new(0.0, 0.5);
        chi[(y, x)] = Complex64::new(0.0, -0.5);
    }
    chi
}

/// Which cavity quadratures enter S.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    X,
    P,
    #[default]
    Total,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumGrid {
    pub omega: Vec<f64>,
    pub s: Vec<f64>,
    pub root_index: usize,
}

/// Cavity output spectrum on `grid`. `A` must be stable.
pub fn output_spectrum(
    a: &DMatrix<f64>,
    d0: &DMatrix<f64>,
    chi: &DMatrix<Complex64>,
    grid: &[f64],
    quad: Quadrature,
    root_index: usize,
) -> Result<SpectrumGrid> {
    let rep = classify_stability(a, None);
    if !rep.stable {
        return Err(Error::Unstable { max_re: rep.max_re });
    }
    output_spectrum_unchecked(a, d0, chi, grid, quad, root_index)
}

/// As [`output_spectrum`] without the stability precondition.
pub fn output_spectrum_unchecked(
    a: &DMatrix<f64>,
    d0: &DMatrix<f64>,
    chi: &DMatrix<Complex64>,
    grid: &[f64],
    quad: Quadrature,
    root_index: usize,
) -> Result<SpectrumGrid> {
    let mut s = Vec::with_capacity(grid.len());
    for &w in grid {
        let tp = transfer_matrix(a, d0, w)?;
        let tm = transfer_matrix(a, d0, -w)?;
        let sm = &tp * chi * tm.transpose();
        let val = match quad {
            Quadrature::X => sm[(0, 0)],
            Quadrature::P => sm[(1, 1)],
            Quadrature::Total => sm[(0, 0)] + sm[(1, 1)],
        };
        if val.im.abs() > 1e-10 * val.re.abs().max(1.0) {
            return Err(Error::Numerical(format!(
                "spectrum has imaginary part {:e} at omega = {w:e}",
                val.im
            )));
        }
        s.push(val.re);
    }
    Ok(SpectrumGrid {
        omega: grid.to_vec(),
        s,
        root_index,
    })
}

/// Local maxima of S as (ω, S), interior points only.
pub fn find_peaks(grid: &SpectrumGrid) -> Vec<(f64, f64)> {
    let s = &grid.s;
    (1..s.len().saturating_sub(1))
        .filter(|&i| s[i] > s[i - 1] && s[i] >= s[i + 1])
        .map(|i| (grid.omega[i], s[i]))
        .collect()
}

/// λ_H = i·eig(A), sorted by real then imaginary part.
pub fn mode_eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    let mut ev: Vec<Complex64> = a
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| I * z)
        .collect();
    ev.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    ev
}

/// Unit right eigenvector of A for eigenvalue `lam_a` of A, by inverse iteration.
pub fn eigenvector(a: &DMatrix<f64>, lam_a: Complex64) -> Option<Vec<Complex64>> {
    let n = a.nrows();
    let scale = inf_norm(a).max(f64::MIN_POSITIVE);
    let mut m = complexify(a);
    let shift = lam_a + Complex64::new(1e-10 * scale, 1e-10 * scale);
    for i in 0..n {
        m[(i, i)] -= shift;
    }
    let lu = m.lu();
    let mut v = DMatrix::from_fn(n, 1, |i, _| {
        Complex64::new(1.0 + 0.1 * i as f64, 0.3 - 0.05 * i as f64)
    });
    for _ in 0..3 {
        v = lu.solve(&v)?;
        let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(nrm.is_finite() && nrm > 0.0) {
            return None;
        }
        v /= Complex64::new(nrm, 0.0);
    }
    Some(v.iter().copied().collect())
}

/// Fraction of an eigenvector's weight on the cavity quadratures.
pub fn cavity_weight(v: &[Complex64]) -> f64 {
    let tot: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    (v[0].norm_sqr() + v[1].norm_sqr()) / tot
}

/// Closed-form bright-mode eigenvalues for equal dampings, with deviations from
/// the numeric eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrightEigenvalues {
    /// −iκ ± sqrt(Δ̃²_± + (−1)^j Θ²) with Θ² = sqrt(Δ̃⁴_− − 8G²n̄Δ̃ω_1),
    /// Δ̃²_± = (Δ̃² ± κ²)/2.
    pub printed: [Complex64; 4],
    /// −iκ ± sqrt((Δ̃² + ω_1²)/2 ± sqrt(((Δ̃² − ω_1²)/2)² − 8Δ̃ω_1 n̄ g²)).
    pub corrected: [Complex64; 4],
    /// Distance from each value to the nearest numeric eigenvalue.
    pub deviation_printed: [f64; 4],
    pub deviation_corrected: [f64; 4],
}

fn nearest(z: Complex64, set: &[Complex64]) -> f64 {
    set.iter()
        .map(|w| (z - w).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Requires κ_a = κ_1 = κ_2 and equal couplings; `g_amp` is the reduced G.
pub fn analytic_bright_eigenvalues(
    root: &SteadyStateRoot,
    p: &SystemParams,
    g_amp: f64,
) -> Result<BrightEigenvalues> {
    p.require_two()?;
    let k = p.kappa_a;
    let same = |x: f64| (x - k).abs() <= 1e-12 * k;
    if !(same(p.kappa[0]) && same(p.kappa[1])) {
        return Err(Error::Domain(
            "closed form needs kappa_a = kappa_1 = kappa_2".into(),
        ));
    }
    if (p.omega[0] - p.omega[1]).abs() > 1e-12 * p.omega[0]
        || (p.g[0] - p.g[1]).abs() > 1e-12 * p.g[0].abs()
    {
        return Err(Error::Domain("closed form needs identical walls".into()));
    }
    let d = root.delta_tilde;
    let n = root.n_bar;
    let w = p.omega[0];
    let g = p.g[0];
    let lk = -I * k;
    let c = |x: f64| Complex64::new(x, 0.0);

    let dp = (d * d + k * k) / 2.0;
    let dm = (d * d - k * k) / 2.0;
    let theta2 = c(dm * dm - 8.0 * g_amp * g_amp * n * d * w).sqrt();
    let mut printed = [Complex64::default(); 4];
    for (i, (sgn, j)) in [(1.0, 0), (-1.0, 0), (1.0, 1), (-1.0, 1)]
        .iter()
        .enumerate()
    {
        let inner = c(dp) + if *j == 0 { theta2 } else { -theta2 };
        printed[i] = lk + *sgn * inner.sqrt();
    }
    let s = (d * d + w * w) / 2.0;
    let h = (d * d - w * w) / 2.0;
    let disc = c(h * h - 8.0 * d * w * n * g * g).sqrt();
    let mut corrected = [Complex64::default(); 4];
    for (i, (sgn, j)) in [(1.0, 0), (-1.0, 0), (1.0, 1), (-1.0, 1)]
        .iter()
        .enumerate()
    {
        let inner = c(s) + if *j == 0 { disc } else { -disc };
        corrected[i] = lk + *sgn * inner.sqrt();
    }
    let a = crate::linearized::build_drift(root, p)?;
    let num = mode_eigenvalues(&a.a);
    let deviation_printed = printed.map(|z| nearest(z, &num));
    let deviation_corrected = corrected.map(|z| nearest(z, &num));
    Ok(BrightEigenvalues {
        printed,
        corrected,
        deviation_printed,
        deviation_corrected,
    })
}

/// Eigenvalue branches along a detuning axis, continuity-matched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenBranches {
    pub delta_axis: Vec<f64>,
    /// `lambda[n][b]`: branch b at axis point n.
    pub lambda: Vec<Vec<Complex64>>,
    /// Cavity weight of each branch's eigenvector, when computed.
    pub cavity_weight: Vec<Vec<f64>>,
}

/// Greedy minimal-distance matching of eigenvalue sets along an axis.
///
/// `drifts[n]` is the drift matrix at `delta_axis[n]`. When two candidate
/// distances tie within 1e-9 of the spacing scale, eigenvector overlap picks
/// the assignment.
pub fn track_branches(delta_axis: &[f64], drifts: &[DMatrix<f64>]) -> EigenBranches {
    let mut lambda: Vec<Vec<Complex64>> = Vec::with_capacity(drifts.len());
    let mut weights: Vec<Vec<f64>> = Vec::with_capacity(drifts.len());
    let mut prev_vecs: Vec<Option<Vec<Complex64>>> = Vec::new();
    for a in drifts {
        let ev = mode_eigenvalues(a);
        // λ_A = −i λ_H
        let vecs: Vec<Option<Vec<Complex64>>> =
            ev.iter().map(|&l| eigenvector(a, -I * l)).collect();
        let m = ev.len();
        let Some(prev) = lambda.last() else {
            weights.push(
                vecs.iter()
                    .map(|v| v.as_deref().map_or(f64::NAN, cavity_weight))
                    .collect(),
            );
            lambda.push(ev);
            prev_vecs = vecs;
            continue;
        };
        let scale = prev
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut cands: Vec<(f64, f64, usize, usize)> = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let dist = (prev[i] - ev[j]).norm();
                let overlap = match (&prev_vecs[i], &vecs[j]) {
                    (Some(u), Some(v)) => u
                        .iter()
                        .zip(v)
                        .map(|(x, y)| x.conj() * y)
                        .sum::<Complex64>()
                        .norm(),
                    _ => 0.0,
                };
                cands.push((dist, overlap, i, j));
            }
        }
        let tie = 1e-9 * scale;
        cands.sort_by(|x, y| {
            if (x.0 - y.0).abs() <= tie {
                y.1.total_cmp(&x.1)
            } else {
                x.0.total_cmp(&y.0)
            }
        });
        let mut new = vec![Complex64::default(); m];
        let mut new_vecs = vec![None; m];
        let mut done_i = vec![false; m];
        let mut done_j = vec![false; m];
        for &(_, _, i, j) in &cands {
            if done_i[i] || done_j[j] {
                continue;
            }
            new[i] = ev[j];
            new_vecs[i] = vecs[j].clone();
            done_i[i] = true;
            done_j[j] = true;
        }
        weights.push(
            new_vecs
                .iter()
                .map(|v| v.as_deref().map_or(f64::NAN, cavity_weight))
                .collect(),
        );
        lambda.push(new);
        prev_vecs = new_vecs;
    }
    EigenBranches {
        delta_axis: delta_axis.to_vec(),
        lambda,
        cavity_weight: weights,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalPoint {
    /// Estimated detuning of the coalescence.
    pub delta: f64,
    /// Grid index nearest to it.
    pub index: usize,
    pub pair: (usize, usize),
    pub gap: f64,
    /// Fitted exponent of gap ~ |Δ̃ − Δ̃_EP|^p.
    pub exponent: f64,
    pub order: usize,
}

/// Points per side used in the exponent fit.
pub const EP_FIT_WINDOW: usize = 10;

fn linfit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Candidate exponent fit around grid index `n` of a gap sequence.
///
/// The coalescence point is estimated where straight-line fits of gap² on
/// either side meet; the exponent is the slope of ln gap against
/// ln |Δ̃ − Δ̃_EP| over both sides jointly.
pub fn fit_gap_exponent(axis: &[f64], gap: &[f64], n: usize, window: usize) -> Option<(f64, f64)> {
    if n < window || n + window >= axis.len() {
        return None;
    }
    let left: Vec<usize> = (n - window..n).collect();
    let right: Vec<usize> = (n + 1..=n + window).collect();
    let lx: Vec<f64> = left.iter().map(|&i| axis[i]).collect();
    let ly: Vec<f64> = left.iter().map(|&i| gap[i] * gap[i]).collect();
    let rx: Vec<f64> = right.iter().map(|&i| axis[i]).collect();
    let ry: Vec<f64> = right.iter().map(|&i| gap[i] * gap[i]).collect();
    let (sl, il) = linfit(&lx, &ly);
    let (sr, ir) = linfit(&rx, &ry);
    let mut x0 = if (sl - sr).abs() > 0.0 {
        (ir - il) / (sl - sr)
    } else {
        axis[n]
    };
    let lo = axis[n - 1].min(axis[n + 1]);
    let hi = axis[n - 1].max(axis[n + 1]);
    if !(x0 >= lo && x0 <= hi) {
        x0 = axis[n];
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in left.iter().chain(&right) {
        let dx = (axis[*i] - x0).abs();
        if dx > 0.0 && gap[*i] > 0.0 {
            xs.push(dx.ln());
            ys.push(gap[*i].ln());
        }
    }
    if xs.len() < window {
        return None;
    }
    Some((linfit(&xs, &ys).0, x0))
}

/// Second-order exceptional points along tracked branches.
///
/// Candidates are local minima below `tol` of the gap between two branches
/// with positive real part (the negative-frequency mirrors are skipped). A
/// candidate counts when its fitted gap exponent is within 0.1 of 1/2.
pub fn detect_exceptional_points(
    branches: &EigenBranches,
    tol: f64,
) -> Result<Vec<ExceptionalPoint>> {
    let axis = &branches.delta_axis;
    let npts = axis.len();
    let w = EP_FIT_WINDOW;
    if npts < 2 * w + 3 {
        return Err(Error::Resolution(format!(
            "{npts} points; exponent fit needs at least {}",
            2 * w + 3
        )));
    }
    let nb = branches.lambda.first().map_or(0, |v| v.len());
    let mut out = Vec::new();
    for i in 0..nb {
        for j in i + 1..nb {
            let gap: Vec<f64> = branches
                .lambda
                .iter()
                .map(|l| (l[i] - l[j]).norm())
                .collect();
            for n in 1..npts - 1 {
                if !(gap[n] < tol && gap[n] <= gap[n - 1] && gap[n] <= gap[n + 1]) {
                    continue;
                }
                let l = &branches.lambda[n];
                if !(l[i].re > 0.0 && l[j].re > 0.0) {
                    continue;
                }
                let Some((exponent, x0)) = fit_gap_exponent(axis, &gap, n, w) else {
                    continue;
                };
                if (exponent - 0.5).abs() <= 0.1 {
                    out.push(ExceptionalPoint {
                        delta: x0,
                        index: n,
                        pair: (i, j),
                        gap: gap[n],
                        exponent,
                        order: 2,
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linearized::{build_drift, build_noise};
    use crate::steadystate::solve_mean_field;

    fn decoupled(delta: f64) -> (DMatrix<f64>, SystemParams) {
        let mut p = SystemParams::two_walls(1.0, 1.5, 0.0, 0.2, 0.05).with_drive(delta, 0.3);
        p.g = vec![0.0, 0.0];
        let r = solve_mean_field(&p).unwrap();
        (build_drift(&r[0], &p).unwrap().a, p)
    }

    #[test]
    fn unimodular_reflection() {
        let (a, p) = decoupled(0.0);
        let nm = build_noise(&p);
        for w in [-3.0, -0.1, 0.0, 0.4, 2.0] {
            let t = transfer_matrix(&a, &nm.d0, w).unwrap();
            let expect = -(I * w + p.kappa_a) / (I * w - p.kappa_a);
            assert!((t[(0, 0)] - expect).norm() < 1e-12);
            assert!((t[(0, 0)].norm() - 1.0).abs() < 1e-12);
        }
        let far = transfer_matrix(&a, &nm.d0, 1e12).unwrap();
        assert!((far + DMatrix::identity(6, 6))
            .iter()
            .all(|z| z.norm() < 1e-9));
    }

    #[test]
    fn flat_vacuum_spectrum() {
        let (a, p) = decoupled(0.3);
        let nm = build_noise(&p);
        let chi = input_spectral_matrix(&p);
        assert!((chi.adjoint() - &chi).iter().all(|z| z.norm() == 0.0));
        let grid: Vec<f64> = (0..50).map(|i| -2.0 + 0.08 * i as f64).collect();
        let s = output_spectrum(&a, &nm.d0, &chi, &grid, Quadrature::Total, 0).unwrap();
        assert!(s.s.iter().all(|x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn hot_wall_blocks() {
        let mut p = SystemParams::two_walls(1.0, 1.0, 0.0, 0.2, 0.05);
        p.n_a_th = Some(10.0);
        let chi = input_spectral_matrix(&p);
        assert_eq!(chi[(0, 0)].re, 10.5);
        assert_eq!(chi[(0, 1)], Complex64::new(0.0, 0.5));
        assert_eq!(chi[(1, 0)], Complex64::new(0.0, -0.5));
    }

    #[test]
    fn decoupled_eigenvalues() {
        let (a, p) = decoupled(-0.7);
        let ev = mode_eigenvalues(&a);
        for target in [
            Complex64::new(0.7, -p.kappa_a),
            Complex64::new(-0.7, -p.kappa_a),
            Complex64::new(1.0, -0.05),
            Complex64::new(-1.5, -0.05),
        ] {
            assert!(nearest(target, &ev) < 1e-12, "{target}");
        }
    }

    #[test]
    fn equal_damping_closed_form() {
        use crate::steadystate::{bifurcation_amplitude, roots_from_reduced, ReducedCoords};
        let p = SystemParams::two_walls(1.0, 1.0, 0.01, 0.01, 0.01);
        let d = -5.0;
        let g = 0.5 * bifurcation_amplitude(d, &p).unwrap();
        let rr = roots_from_reduced(ReducedCoords::new(g, d), &p).unwrap();
        let (root, q) = (rr.root(0).unwrap().clone(), rr.params.clone());
        let a = build_drift(&root, &q).unwrap().a;
        let ev = mode_eigenvalues(&a);
        // antisymmetric wall combination decouples from the cavity
        assert!(nearest(Complex64::new(1.0, -0.01), &ev) < 1e-10);
        assert!(nearest(Complex64::new(-1.0, -0.01), &ev) < 1e-10);
        let b = analytic_bright_eigenvalues(&root, &q, g).unwrap();
        for dev in b.deviation_corrected {
            assert!(dev < 1e-9, "{dev}");
        }
        assert!(b.deviation_printed.iter().any(|&x| x > 1e-3));
    }

    #[test]
    fn too_coarse_for_fit() {
        let b = EigenBranches {
            delta_axis: vec![0.0; 5],
            lambda: vec![vec![Complex64::default(); 6]; 5],
            cavity_weight: vec![],
        };
        assert!(matches!(
            detect_exceptional_points(&b, 1.0),
            Err(Error::Resolution(_))
        ));
    }
}
