// SPDX-License-Identifier: Apache-2.0

//! Grid and line scans: phase diagrams, bifurcation cuts, thermal scans.
//!
//! Every cell is a pure function of its parameters. Cells are evaluated on a
//! rayon pool and collected in axis order, so output does not depend on the
//! schedule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entanglement::{analyze_point, EntanglementResult};
use crate::error::{Error, Result};
use crate::linearized::{build_drift, build_noise, classify_stability};
use crate::spectrum::{
    input_spectral_matrix, mode_eigenvalues, output_spectrum_unchecked, track_branches,
    EigenBranches, Quadrature,
};
use crate::steadystate::{
    bifurcation_amplitude, roots_from_reduced, three_root_region, ReducedCoords, SystemParams,
};

/// Sampling of one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    /// Log spacing in |x|; both ends must share a sign.
    #[serde(default)]
    pub log: bool,
}

impl Axis {
    pub fn linear(lo: f64, hi: f64, n: usize) -> Self {
        Axis {
            lo,
            hi,
            n,
            log: false,
        }
    }

    pub fn log(lo: f64, hi: f64, n: usize) -> Self {
        Axis {
            lo,
            hi,
            n,
            log: true,
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config(format!("{name}: need at least one point")));
        }
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return Err(Error::Config(format!("{name}: bounds must be finite")));
        }
        if self.log && !(self.lo * self.hi > 0.0) {
            return Err(Error::Config(format!(
                "{name}: log axis bounds must be nonzero and share a sign"
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let m = (self.n - 1) as f64;
        if self.log {
            let s = self.lo.signum();
            let (a, b) = (self.lo.abs().ln(), self.hi.abs().ln());
            (0..self.n)
                .map(|i| s * (a + (b - a) * i as f64 / m).exp())
                .collect()
        } else {
            (0..self.n)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / m)
                .collect()
        }
    }
}

/// Runs `f` over `items` on a pool of `threads` workers (all cores when None),
/// preserving order.
pub fn parallel_collect<T: Sync, R: Send>(
    items: &[T],
    threads: Option<usize>,
    f: impl Fn(&T) -> R + Sync + Send,
) -> Vec<R> {
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
        {
            Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
            Err(_) => items.iter().map(&f).collect(),
        },
        None => items.par_iter().map(&f).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub delta_tilde: f64,
    pub g_eff: f64,
    pub three_root_region: bool,
    pub n_real_roots: usize,
    pub n_stable_roots: usize,
    /// Sorted stable root indices; "none" without a stable root.
    pub phase_label: String,
    /// (E_12, E_a1, E_a2), NaN without a stable root.
    pub e: [f64; 3],
    pub nu_min: [f64; 3],
    pub best_root: [Option<usize>; 3],
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub delta_axis: Vec<f64>,
    pub geff_axis: Vec<f64>,
    /// Row-major with Δ̃ fastest: cell (i_g, i_d) at i_g·n_delta + i_d.
    pub cells: Vec<PhaseCell>,
}

impl PhaseDiagram {
    pub fn cell(&self, i_geff: usize, i_delta: usize) -> &PhaseCell {
        &self.cells[i_geff * self.delta_axis.len() + i_delta]
    }
}

fn cell_from(rc: ReducedCoords, p: &SystemParams) -> PhaseCell {
    let g_eff = rc.g_eff(p);
    let inside = three_root_region(rc, p);
    match analyze_point(rc, p) {
        Ok(r) => {
            let label = if r.has_stable() {
                r.phase_label()
            } else {
                "none".into()
            };
            PhaseCell {
                delta_tilde: rc.delta_tilde,
                g_eff,
                three_root_region: inside,
                n_real_roots: r.n_real_roots,
                n_stable_roots: r.stable_roots.len(),
                phase_label: label,
                e: r.e(),
                nu_min: r.nu_min(),
                best_root: r.best_root,
                error: r.roots.iter().find_map(|m| m.error.clone()),
            }
        }
        Err(e) => PhaseCell {
            delta_tilde: rc.delta_tilde,
            g_eff,
            three_root_region: inside,
            n_real_roots: 0,
            n_stable_roots: 0,
            phase_label: "error".into(),
            e: [f64::NAN; 3],
            nu_min: [f64::NAN; 3],
            best_root: [None; 3],
            error: Some(e.to_string()),
        },
    }
}

/// Full pipeline on a (Δ̃, G_eff) grid. Δ̃ values are absolute, not in units of ω_1.
pub fn phase_diagram(
    p: &SystemParams,
    delta: Axis,
    geff: Axis,
    threads: Option<usize>,
) -> Result<PhaseDiagram> {
    p.validate()?;
    p.require_two()?;
    delta.validate("delta")?;
    geff.validate("geff")?;
    if delta.n < 16 || geff.n < 16 {
        return Err(Error::Config(
            "phase diagram needs at least 16 points per axis".into(),
        ));
    }
    let da = delta.values();
    let ga = geff.values();
    let coords: Vec<ReducedCoords> = ga
        .iter()
        .flat_map(|&g| da.iter().map(move |&d| (g, d)))
        .map(|(g, d)| ReducedCoords::from_geff(g, d, p))
        .collect();
    let cells = parallel_collect(&coords, threads, |&rc| cell_from(rc, p));
    Ok(PhaseDiagram {
        delta_axis: da,
        geff_axis: ga,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutPoint {
    pub delta_tilde: f64,
    /// G*(Δ̃) on the bifurcation line.
    pub g_star: f64,
    /// Amplitude actually evaluated, G*(1 − offset).
    pub g_amp: f64,
    pub result: EntanglementResult,
}

/// Offset below the bifurcation line used by default. On the line itself two
/// roots collide and the drift matrix is marginal.
pub const CUT_OFFSET: f64 = 1e-6;

/// Measures along G = G*(Δ̃)(1 − offset), Δ̃ < 0.
pub fn bifurcation_cut(
    p: &SystemParams,
    delta: Axis,
    offset: f64,
    threads: Option<usize>,
) -> Result<Vec<CutPoint>> {
    p.validate()?;
    p.require_two()?;
    delta.validate("delta")?;
    if !(delta.lo < 0.0 && delta.hi < 0.0) {
        return Err(Error::Config("bifurcation cut needs delta < 0".into()));
    }
    let axis = delta.values();
    let pts = parallel_collect(&axis, threads, |&d| -> Result<CutPoint> {
        let at = || format!("delta_tilde = {d:e}");
        let gs = bifurcation_amplitude(d, p).map_err(|e| e.at(at()))?;
        let g = gs * (1.0 - offset);
        let result = analyze_point(ReducedCoords::new(g, d), p).map_err(|e| e.at(at()))?;
        Ok(CutPoint {
            delta_tilde: d,
            g_star: gs,
            g_amp: g,
            result,
        })
    });
    pts.into_iter().collect()
}

/// What stays fixed when the wall frequencies are rescaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleHold {
    /// G = G*(Δ̃)(1 − offset) recomputed at the scaled frequencies.
    #[default]
    Line,
    /// G_eff of the unscaled working point.
    Geff,
    /// Drive |ξ| of the unscaled working point.
    Xi,
}

/// Where a thermal or scaling scan sits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkingPoint {
    /// Δ̃ in units of ω_1.
    pub delta_over_omega: f64,
    /// G = G*(Δ̃)(1 − offset).
    pub offset: f64,
    #[serde(default)]
    pub hold: ScaleHold,
}

impl Default for WorkingPoint {
    fn default() -> Self {
        WorkingPoint {
            delta_over_omega: -40.0,
            offset: CUT_OFFSET,
            hold: ScaleHold::Line,
        }
    }
}

impl WorkingPoint {
    /// Reduced coordinates of the working point for `p`.
    pub fn coords(&self, p: &SystemParams) -> Result<ReducedCoords> {
        let d = self.delta_over_omega * p.omega[0];
        Ok(ReducedCoords::new(
            bifurcation_amplitude(d, p)? * (1.0 - self.offset),
            d,
        ))
    }
}

/// E_12 maximized over stable roots; 0 without a stable root.
pub fn e12_point(p: &SystemParams, rc: ReducedCoords) -> Result<f64> {
    let r = analyze_point(rc, p)?;
    Ok(if r.has_stable() { r.e_12 } else { 0.0 })
}

/// E_12 at the working point of `p`.
pub fn e12_at(p: &SystemParams, wp: WorkingPoint) -> Result<f64> {
    e12_point(p, wp.coords(p)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanKind {
    Temperature,
    /// κ_a/κ_1 with κ_1 fixed.
    KappaRatio,
    /// All wall frequencies scaled, Δ̃/ω_1 fixed; see [`ScaleHold`].
    OmegaScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalScan {
    pub kind: ScanKind,
    pub axis: Vec<f64>,
    pub e_12: Vec<f64>,
    /// Cutoff temperature per axis point, for the non-temperature scans.
    pub t_c: Vec<Option<f64>>,
    /// E_12 rose again after its maximum on a temperature scan.
    pub monotone_violation: bool,
}

/// Parameters at axis value `x` of a scan.
pub fn scan_params(p: &SystemParams, kind: ScanKind, x: f64) -> SystemParams {
    let mut q = p.clone();
    match kind {
        ScanKind::Temperature => q.temperature = x,
        ScanKind::KappaRatio => q.kappa_a = x * p.kappa[0],
        ScanKind::OmegaScale => {
            for w in q.omega.iter_mut() {
                *w *= x;
            }
        }
    }
    q
}

/// Parameters and reduced coordinates at axis value `x`.
pub fn scan_point(
    p: &SystemParams,
    wp: WorkingPoint,
    kind: ScanKind,
    x: f64,
) -> Result<(SystemParams, ReducedCoords)> {
    let q = scan_params(p, kind, x);
    if kind != ScanKind::OmegaScale {
        let rc = wp.coords(&q)?;
        return Ok((q, rc));
    }
    let rc = match wp.hold {
        ScaleHold::Line => wp.coords(&q)?,
        ScaleHold::Geff => {
            let base = wp.coords(p)?;
            ReducedCoords::from_geff(base.g_eff(p), wp.delta_over_omega * q.omega[0], &q)
        }
        ScaleHold::Xi => {
            let base = wp.coords(p)?;
            let xi = base.g_amp * p.kappa_a.hypot(base.delta_tilde);
            let d = wp.delta_over_omega * q.omega[0];
            ReducedCoords::new(xi / q.kappa_a.hypot(d), d)
        }
    };
    Ok((q, rc))
}

/// Settings for a cutoff-temperature search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSearch {
    /// E_12 below this counts as extinct.
    pub threshold: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    /// Relative bracket width at which bisection stops.
    pub rel_tol: f64,
}

impl Default for CutoffSearch {
    fn default() -> Self {
        CutoffSearch {
            threshold: 1e-4,
            t_lo: 1e-5,
            t_hi: 100.0,
            rel_tol: 1e-3,
        }
    }
}

/// Temperature at which E_12 at the working point falls below the threshold,
/// by bisection in ln T.
pub fn find_cutoff_temperature(
    p: &SystemParams,
    wp: WorkingPoint,
    search: CutoffSearch,
) -> Result<f64> {
    find_cutoff_at(p, wp.coords(p)?, search)
}

/// [`find_cutoff_temperature`] at explicit reduced coordinates.
pub fn find_cutoff_at(p: &SystemParams, rc: ReducedCoords, search: CutoffSearch) -> Result<f64> {
    let (mut lo, mut hi) = (search.t_lo, search.t_hi);
    if !(lo > 0.0 && hi > lo && search.threshold > 0.0) {
        return Err(Error::Config(
            "cutoff search needs 0 < t_lo < t_hi and threshold > 0".into(),
        ));
    }
    let alive = |t: f64| -> Result<bool> {
        Ok(e12_point(&p.clone().with_temperature(t), rc)? > search.threshold)
    };
    if !alive(lo)? || alive(hi)? {
        return Err(Error::Bracket { lo, hi });
    }
    while hi / lo > 1.0 + search.rel_tol {
        let mid = (lo * hi).sqrt();
        if alive(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// E_12 along one axis; the κ-ratio and ω-scale scans also bisect T_c per point.
pub fn thermal_scan(
    p: &SystemParams,
    wp: WorkingPoint,
    kind: ScanKind,
    axis: &[f64],
    search: Option<CutoffSearch>,
    threads: Option<usize>,
) -> Result<ThermalScan> {
    p.validate()?;
    p.require_two()?;
    let rows = parallel_collect(axis, threads, |&x| -> Result<(f64, Option<f64>)> {
        let at = || format!("{kind:?} = {x:e}");
        let (q, rc) = scan_point(p, wp, kind, x).map_err(|e| e.at(at()))?;
        let e = e12_point(&q, rc).map_err(|e| e.at(at()))?;
        let tc = match (kind, search) {
            (ScanKind::Temperature, _) | (_, None) => None,
            (_, Some(s)) => {
                let mut s = s;
                if kind == ScanKind::OmegaScale {
                    s.t_lo *= x;
                    s.t_hi *= x;
                }
                find_cutoff_at(&q, rc, s).ok()
            }
        };
        Ok((e, tc))
    });
    let rows: Vec<(f64, Option<f64>)> = rows.into_iter().collect::<Result<_>>()?;
    let e_12: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mut monotone_violation = false;
    if kind == ScanKind::Temperature && !e_12.is_empty() {
        let imax = (0..e_12.len()).fold(0, |b, i| if e_12[i] > e_12[b] { i } else { b });
        let noise = 1e-9 * e_12[imax].abs().max(1e-12);
        monotone_violation = e_12[imax..].windows(2).any(|w| w[1] > w[0] + noise);
    }
    Ok(ThermalScan {
        kind,
        axis: axis.to_vec(),
        e_12,
        t_c: rows.iter().map(|r| r.1).collect(),
        monotone_violation,
    })
}

/// How the drive is chosen along a spectrum sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DrivePath {
    /// G = G*(Δ̃)(1 − offset).
    Bifurcation { offset: f64 },
    /// Fixed G_eff.
    Geff { g_eff: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub delta_tilde: f64,
    pub omega: f64,
    /// NaN when root k is absent or unstable at this detuning.
    pub s: f64,
    pub lambda: Vec<num_complex::Complex64>,
}

/// Root `k` along a detuning axis: drift matrices where the root exists.
pub fn drifts_along(
    p: &SystemParams,
    k: usize,
    axis: &[f64],
    path: DrivePath,
) -> Result<Vec<Option<(SystemParams, nalgebra::DMatrix<f64>)>>> {
    axis.iter()
        .map(|&d| {
            let one = || -> Result<_> {
                let g = match path {
                    DrivePath::Bifurcation { offset } => {
                        bifurcation_amplitude(d, p)? * (1.0 - offset)
                    }
                    DrivePath::Geff { g_eff } => ReducedCoords::from_geff(g_eff, d, p).g_amp,
                };
                let rr = roots_from_reduced(ReducedCoords::new(g, d), p)?;
                Ok(match rr.root(k) {
                    Some(r) => Some((rr.params.clone(), build_drift(r, &rr.params)?.a)),
                    None => None,
                })
            };
            one().map_err(|e| e.at(format!("delta_tilde = {d:e}")))
        })
        .collect()
}

/// Eigenvalue branches of root `k` along an axis on which it exists everywhere.
pub fn eigen_sweep(
    p: &SystemParams,
    k: usize,
    axis: &[f64],
    path: DrivePath,
) -> Result<EigenBranches> {
    let drifts = drifts_along(p, k, axis, path)?;
    let mut mats = Vec::with_capacity(drifts.len());
    for (i, d) in drifts.into_iter().enumerate() {
        match d {
            Some((_, a)) => mats.push(a),
            None => {
                return Err(Error::UndefinedRoot {
                    k,
                    reason: format!("absent at delta = {:e}", axis[i]),
                })
            }
        }
    }
    Ok(track_branches(axis, &mats))
}

/// Output spectrum map of root `k`: one row per (Δ̃, ω).
pub fn spectrum_map(
    p: &SystemParams,
    k: usize,
    delta_axis: &[f64],
    omega_axis: &[f64],
    path: DrivePath,
    allow_unstable: bool,
    threads: Option<usize>,
) -> Result<Vec<SpectrumRow>> {
    p.validate()?;
    p.require_two()?;
    let drifts = drifts_along(p, k, delta_axis, path)?;
    let items: Vec<(f64, Option<(SystemParams, nalgebra::DMatrix<f64>)>)> =
        delta_axis.iter().copied().zip(drifts).collect();
    let blocks = parallel_collect(&items, threads, |(d, entry)| -> Result<Vec<SpectrumRow>> {
        let Some((q, a)) = entry else {
            return Ok(omega_axis
                .iter()
                .map(|&w| SpectrumRow {
                    delta_tilde: *d,
                    omega: w,
                    s: f64::NAN,
                    lambda: vec![],
                })
                .collect());
        };
        let lam = mode_eigenvalues(a);
        let stable = classify_stability(a, None).stable;
        let s = if stable || allow_unstable {
            let nm = build_noise(q);
            let chi = input_spectral_matrix(q);
            output_spectrum_unchecked(a, &nm.d0, &chi, omega_axis, Quadrature::Total, k)
                .map_err(|e| e.at(format!("delta_tilde = {d:e}")))?
                .s
        } else {
            vec![f64::NAN; omega_axis.len()]
        };
        Ok(omega_axis
            .iter()
            .zip(s)
            .map(|(&w, s)| SpectrumRow {
                delta_tilde: *d,
                omega: w,
                s,
                lambda: lam.clone(),
            })
            .collect())
    });
    let mut out = Vec::new();
    for b in blocks {
        out.extend(b?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_values() {
        assert_eq!(Axis::linear(0.0, 1.0, 3).values(), vec![0.0, 0.5, 1.0]);
        let l = Axis::log(-50.0, -0.1, 4).values();
        assert!((l[0] + 50.0).abs() < 1e-12 && (l[3] + 0.1).abs() < 1e-12);
        assert!(Axis::log(-1.0, 1.0, 3).validate("x").is_err());
    }

    #[test]
    fn geff_zero_row_is_unentangled() {
        let p = SystemParams::two_walls(1e9, 1e9, 1e6, 2e6, 1e6);
        let pd = phase_diagram(
            &p,
            Axis::linear(-3e9, 1e9, 16),
            Axis::linear(0.0, 0.0, 16),
            Some(2),
        )
        .unwrap();
        for c in &pd.cells {
            assert_eq!(c.n_real_roots, 1);
            assert!(
                c.e.iter().all(|&e| e.abs() < 1e-12),
                "{:?} {}",
                c.e,
                c.delta_tilde
            );
        }
    }

    #[test]
    fn rejects_small_grid() {
        let p = SystemParams::two_walls(1e9, 1e9, 1e6, 2e6, 1e6);
        assert!(phase_diagram(
            &p,
            Axis::linear(-1.0, 1.0, 8),
            Axis::linear(0.0, 1.0, 16),
            None
        )
        .is_err());
    }

    #[test]
    fn kappa_ratio_symmetry() {
        // κ_a/10 and 10κ_j give the same E_12 on the bifurcation line.
        let p = SystemParams::representative(1.0);
        let wp = WorkingPoint::default();
        let mut a = p.clone();
        a.kappa_a /= 10.0;
        let mut b = p.clone();
        b.kappa = b.kappa.iter().map(|k| k * 10.0).collect();
        let ea = e12_at(&a, wp).unwrap();
        let eb = e12_at(&b, wp).unwrap();
        assert!(ea > 0.1);
        assert!((ea - eb).abs() / ea < 1e-6, "{ea} {eb}");
    }

    #[test]
    fn no_coupling_has_no_cutoff() {
        let mut p = SystemParams::two_walls(1e9, 1e9, 1e6, 2e6, 1e6);
        p.g = vec![0.0, 0.0];
        // Ω = 0 leaves no bifurcation line at all.
        assert!(
            find_cutoff_temperature(&p, WorkingPoint::default(), CutoffSearch::default()).is_err()
        );
    }
}
