// SPDX-License-Identifier: Apache-2.0

//! Bipartite Gaussian measures on the steady-state covariance.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linearized::{build_drift, build_noise, classify_stability, solve_lyapunov};
use crate::steadystate::{
    roots_from_reduced, solve_mean_field, ReducedCoords, SteadyStateRoot, SystemParams,
};

/// Mode pairs in reporting order: (1|2), (a|1), (a|2). Mode 0 is the cavity.
pub const PAIRS: [(usize, usize); 3] = [(1, 2), (0, 1), (0, 2)];
pub const PAIR_NAMES: [&str; 3] = ["12", "a1", "a2"];

/// 4×4 principal submatrix of modes `i` and `j`, order preserved.
pub fn reduce_modes(v: &DMatrix<f64>, pair: (usize, usize)) -> Result<DMatrix<f64>> {
    let (i, j) = pair;
    if i == j {
        return Err(Error::param("pair", "modes must differ"));
    }
    let modes = v.nrows() / 2;
    if i >= modes || j >= modes {
        return Err(Error::param(
            "pair",
            format!("mode index out of range (n = {modes})"),
        ));
    }
    let idx = [2 * i, 2 * i + 1, 2 * j, 2 * j + 1];
    Ok(DMatrix::from_fn(4, 4, |r, c| v[(idx[r], idx[c])]))
}

fn det2(m: &DMatrix<f64>, r: usize, c: usize) -> f64 {
    m[(r, c)] * m[(r + 1, c + 1)] - m[(r, c + 1)] * m[(r + 1, c)]
}

fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut om = DMatrix::zeros(n, n);
    for m in 0..n / 2 {
        om[(2 * m, 2 * m + 1)] = 1.0;
        om[(2 * m + 1, 2 * m)] = -1.0;
    }
    om
}

/// Williamson values of `v`, ascending: the moduli of the eigenvalues of iΩV.
pub fn symplectic_spectrum(v: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = v.nrows();
    if n % 2 != 0 || v.ncols() != n {
        return Err(Error::param("V", "must be square with even dimension"));
    }
    let scale = v
        .iter()
        .fold(0.0f64, |a, x| a.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    if (v - v.transpose()).abs().max() > 1e-12 * scale {
        return Err(Error::param("V", "must be symmetric"));
    }
    let om = symplectic_form(n);
    let eig = v.clone().symmetric_eigen();
    let mut nus: Vec<f64> = if eig.eigenvalues.min() > 0.0 {
        // V^{1/2} Ω V^{1/2} is antisymmetric with eigenvalues ±iν.
        let sq = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
            * eig.eigenvectors.transpose();
        let k = &sq * &om * &sq;
        let kk = -(&k * &k);
        let kk = (&kk + kk.transpose()) * 0.5;
        kk.symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|&x| x.max(0.0).sqrt())
            .collect()
    } else {
        (&om * v)
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .collect()
    };
    nus.sort_by(f64::total_cmp);
    Ok(nus.into_iter().step_by(2).collect())
}

/// Σ̃ = det A + det B − 2 det C and det V of a two-mode covariance with
/// single-mode blocks A, B and cross block C.
pub fn seralian_invariants(v4: &DMatrix<f64>) -> (f64, f64) {
    let da = det2(v4, 0, 0);
    let db = det2(v4, 2, 2);
    let dc = det2(v4, 0, 2);
    (da + db - 2.0 * dc, v4.determinant())
}

/// ν̃_−² = (Σ̃ − sqrt(Σ̃² − 4 det V))/2 evaluated from the invariants.
///
/// Loses half the digits when the two partial-transpose eigenvalues are close;
/// [`partial_transpose_min`] is the accurate path.
pub fn partial_transpose_min_invariants(v4: &DMatrix<f64>) -> Result<f64> {
    if v4.nrows() != 4 || v4.ncols() != 4 {
        return Err(Error::param("V4", "must be 4x4"));
    }
    let (sigma, det) = seralian_invariants(v4);
    let disc = sigma * sigma - 4.0 * det;
    if disc < -1e-10 * sigma * sigma {
        return Err(Error::Numerical(format!(
            "negative discriminant {disc:e} for partial-transpose spectrum"
        )));
    }
    let root = disc.max(0.0).sqrt();
    // (Σ − √disc)/2 rewritten to avoid cancellation.
    let nu2 = if sigma > 0.0 {
        2.0 * det / (sigma + root)
    } else {
        (sigma - root) / 2.0
    };
    if !(nu2 > 0.0) {
        return Err(Error::Numerical(format!(
            "partial transpose eigenvalue² = {nu2:e}"
        )));
    }
    Ok(nu2.sqrt())
}

/// Smaller symplectic eigenvalue of the partial transpose of a two-mode covariance.
///
/// Same quantity as [`partial_transpose_min_invariants`], computed as the
/// Williamson spectrum of the matrix with the second momentum flipped.
pub fn partial_transpose_min(v4: &DMatrix<f64>) -> Result<f64> {
    if v4.nrows() != 4 || v4.ncols() != 4 {
        return Err(Error::param("V4", "must be 4x4"));
    }
    let mut pt = v4.clone();
    for i in 0..4 {
        if i != 3 {
            pt[(i, 3)] = -pt[(i, 3)];
            pt[(3, i)] = -pt[(3, i)];
        }
    }
    let (sigma, det) = seralian_invariants(v4);
    if sigma * sigma - 4.0 * det < -1e-10 * sigma * sigma {
        return Err(Error::Numerical(
            "negative discriminant for partial-transpose spectrum".into(),
        ));
    }
    Ok(symplectic_spectrum(&pt)?[0])
}

/// Logarithmic negativity max{0, −ln(2ν̃_−)}.
pub fn log_negativity(v4: &DMatrix<f64>) -> Result<f64> {
    let nus = symplectic_spectrum(v4)?;
    if nus[0] < 0.5 - 1e-9 {
        return Err(Error::Unphysical(nus[0]));
    }
    let nu = partial_transpose_min(v4)?;
    Ok((-(2.0 * nu).ln()).max(0.0))
}

/// Smallest ordinary eigenvalue.
pub fn min_variance(v4: &DMatrix<f64>) -> f64 {
    let s = (v4 + v4.transpose()) * 0.5;
    s.symmetric_eigen().eigenvalues.min()
}

/// Measures for one root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootMeasures {
    pub k: usize,
    pub n_bar: f64,
    pub max_re: f64,
    pub stable: bool,
    /// Log negativity per pair in `PAIRS` order.
    pub e: Option<[f64; 3]>,
    /// Smallest ordinary eigenvalue per pair.
    pub nu_min: Option<[f64; 3]>,
    /// Smaller partial-transpose symplectic eigenvalue per pair.
    pub nu_pt: Option<[f64; 3]>,
    pub symplectic_min: Option<f64>,
    pub residual: Option<f64>,
    /// Why a stable root carries no measures.
    pub error: Option<String>,
}

/// Per-pair aggregates over the stable roots of one point.
///
/// Without a usable stable root the aggregates are NaN and `best_root` is
/// `None`; check `has_stable`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglementResult {
    pub e_12: f64,
    pub e_a1: f64,
    pub e_a2: f64,
    pub nu_min_12: f64,
    pub nu_min_a1: f64,
    pub nu_min_a2: f64,
    /// Root attaining each maximum of E, `PAIRS` order.
    pub best_root: [Option<usize>; 3],
    pub stable_roots: Vec<usize>,
    pub n_real_roots: usize,
    pub roots: Vec<RootMeasures>,
}

impl EntanglementResult {
    pub fn has_stable(&self) -> bool {
        !self.stable_roots.is_empty()
    }

    pub fn e(&self) -> [f64; 3] {
        [self.e_12, self.e_a1, self.e_a2]
    }

    pub fn nu_min(&self) -> [f64; 3] {
        [self.nu_min_12, self.nu_min_a1, self.nu_min_a2]
    }

    pub fn root(&self, k: usize) -> Option<&RootMeasures> {
        self.roots.iter().find(|r| r.k == k)
    }

    /// Sorted stable root indices, e.g. "0,1".
    pub fn phase_label(&self) -> String {
        let mut s = self.stable_roots.clone();
        s.sort_unstable();
        s.iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Stability, covariance and pair measures of one root.
pub fn measure_root(root: &SteadyStateRoot, q: &SystemParams) -> Result<RootMeasures> {
    q.require_two()?;
    let dm = build_drift(root, q)?;
    let rep = classify_stability(&dm.a, None);
    let mut out = RootMeasures {
        k: root.k,
        n_bar: root.n_bar,
        max_re: rep.max_re,
        stable: rep.stable,
        e: None,
        nu_min: None,
        nu_pt: None,
        symplectic_min: None,
        residual: None,
        error: None,
    };
    if !rep.stable {
        return Ok(out);
    }
    let noise = build_noise(q);
    let cov = match solve_lyapunov(&dm, &noise) {
        Ok(c) => c,
        Err(e) => {
            out.error = Some(e.to_string());
            return Ok(out);
        }
    };
    out.residual = Some(cov.residual);
    let smin = symplectic_spectrum(&cov.v)?[0];
    out.symplectic_min = Some(smin);
    if smin < 0.5 - 1e-9 {
        out.error = Some(Error::Unphysical(smin).to_string());
        return Ok(out);
    }
    let mut e = [0.0; 3];
    let mut nu = [0.0; 3];
    let mut pt = [0.0; 3];
    for (i, &pair) in PAIRS.iter().enumerate() {
        let v4 = reduce_modes(&cov.v, pair)?;
        match log_negativity(&v4).and_then(|ln| Ok((ln, partial_transpose_min(&v4)?))) {
            Ok((ln, p)) => {
                e[i] = ln;
                pt[i] = p;
            }
            Err(err) => {
                out.error = Some(err.to_string());
                return Ok(out);
            }
        }
        nu[i] = min_variance(&v4);
    }
    out.e = Some(e);
    out.nu_min = Some(nu);
    out.nu_pt = Some(pt);
    Ok(out)
}

/// Aggregates per-root measures into per-pair extremes.
pub fn aggregate(roots: Vec<RootMeasures>, n_real_roots: usize) -> EntanglementResult {
    let mut best = [f64::NAN; 3];
    let mut best_root = [None; 3];
    let mut nu = [f64::NAN; 3];
    let mut stable_roots = Vec::new();
    for r in &roots {
        let (Some(e), Some(v)) = (r.e, r.nu_min) else {
            continue;
        };
        stable_roots.push(r.k);
        for i in 0..3 {
            if best_root[i].is_none() || e[i] > best[i] {
                best[i] = e[i];
                best_root[i] = Some(r.k);
            }
            if nu[i].is_nan() || v[i] < nu[i] {
                nu[i] = v[i];
            }
        }
    }
    EntanglementResult {
        e_12: best[0],
        e_a1: best[1],
        e_a2: best[2],
        nu_min_12: nu[0],
        nu_min_a1: nu[1],
        nu_min_a2: nu[2],
        best_root,
        stable_roots,
        n_real_roots,
        roots,
    }
}

/// Full pipeline at reduced coordinates: roots, stability, covariance, measures.
pub fn analyze_point(rc: ReducedCoords, p: &SystemParams) -> Result<EntanglementResult> {
    p.require_two()?;
    let rr = roots_from_reduced(rc, p)?;
    let mut roots = Vec::new();
    for r in rr.real_roots() {
        roots.push(measure_root(r, &rr.params)?);
    }
    let n = roots.len();
    Ok(aggregate(roots, n))
}

/// Same pipeline for the physical drive (Δ_a, ξ) carried by `p`.
pub fn analyze_params(p: &SystemParams) -> Result<EntanglementResult> {
    p.require_two()?;
    let roots = solve_mean_field(p)?;
    let mut out = Vec::new();
    for r in &roots {
        out.push(measure_root(r, p)?);
    }
    let n = out.len();
    Ok(aggregate(out, n))
}
