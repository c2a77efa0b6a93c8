// SPDX-License-Identifier: Apache-2.0

//! Command-line front end.
//!
//! A run is described by a [`RunConfig`], assembled from an optional config
//! file (JSON, or TOML by extension) and command-line flags, flags winning.
//! Every run writes its data file and a `manifest.json` to the output
//! directory. A manifest is itself a valid config file, so
//! `dwcav <cmd> --config out/manifest.json --out other` repeats a run.
//!
//! Frequencies in axes and in CSV columns are in units of ω_1.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::adiabatic::{effective_model, reduced_dw_model, ReducedForm};
use crate::entanglement::measure_root;
use crate::error::{Error, Result};
use crate::linearized::{
    build_drift, build_noise, classify_stability, matrix_rows, solve_lyapunov,
};
use crate::material::{derive_dw_mode, FrequencyConvention, MaterialSpec};
use crate::steadystate::{roots_from_reduced, ReducedCoords, SystemParams};
use crate::sweep::{
    bifurcation_cut, find_cutoff_temperature, phase_diagram, spectrum_map, thermal_scan, Axis,
    CutoffSearch, DrivePath, ScaleHold, ScanKind, WorkingPoint, CUT_OFFSET,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DWCAV_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// One pipeline and its grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    Point {
        /// Δ̃/ω_1.
        delta: f64,
        g_eff: f64,
        #[serde(default)]
        dump_matrices: bool,
        #[serde(default)]
        adiabatic: bool,
    },
    Phase {
        /// Δ̃/ω_1.
        delta: Axis,
        geff: Axis,
    },
    Cut {
        /// Δ̃/ω_1.
        delta: Axis,
        offset: f64,
    },
    Spectrum {
        root: usize,
        /// Δ̃/ω_1.
        delta: Axis,
        /// ω/ω_1.
        omega: Axis,
        path: DrivePath,
        #[serde(default)]
        allow_unstable: bool,
    },
    Thermal {
        kind: ScanKind,
        axis: Axis,
        point: WorkingPoint,
        search: CutoffSearch,
        /// Also bisect T_c at the unscaled working point.
        #[serde(default)]
        cutoff: bool,
    },
    Material,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Point { .. } => "point",
            Command::Phase { .. } => "phase",
            Command::Cut { .. } => "cut",
            Command::Spectrum { .. } => "spectrum",
            Command::Thermal { .. } => "thermal",
            Command::Material => "material",
        }
    }
}

/// A fully resolved run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    /// System parameters; the built-in representative set when absent.
    #[serde(default)]
    pub params: Option<SystemParams>,
    #[serde(default)]
    pub material: Option<MaterialSpec>,
    #[serde(default = "default_out")]
    pub output: PathBuf,
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_out() -> PathBuf {
    PathBuf::from(".")
}

/// Config file contents. Every field is optional; a manifest also parses.
#[derive(Debug, Clone, Default, Deserialize)]
struct FileConfig {
    #[serde(default)]
    command: Option<Command>,
    #[serde(default)]
    params: Option<SystemParams>,
    #[serde(default)]
    material: Option<MaterialSpec>,
    #[serde(default)]
    format: Option<Format>,
    #[serde(default)]
    threads: Option<usize>,
    /// Present when the file is a manifest.
    #[serde(default)]
    config: Option<Box<RunConfig>>,
}

/// Written next to every data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: RunConfig,
    pub outputs: Vec<String>,
    pub status: String,
    pub exit_code: i32,
    #[serde(default)]
    pub error: Option<String>,
    /// Grid point or cell where a numerical error arose.
    #[serde(default)]
    pub error_location: Option<String>,
    #[serde(default)]
    pub summary: Option<Value>,
    pub wall_time_s: f64,
}

#[derive(Debug, Parser)]
#[command(
    name = "dwcav",
    version,
    about = "Domain-wall modes in a driven chiral cavity"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Roots, stability and entanglement at one (Δ̃, G_eff) point, as JSON.
    Point(PointArgs),
    /// Phase diagram over a (Δ̃, G_eff) grid.
    Phase(PhaseArgs),
    /// Entanglement along the bifurcation line G = G*(Δ̃).
    Cut(CutArgs),
    /// Output noise spectrum and drift eigenvalues of one root along Δ̃.
    Spectrum(SpectrumArgs),
    /// E_12 against temperature, κ_a/κ_1 or a frequency scale, with cutoff temperatures.
    Thermal(ThermalArgs),
    /// Oscillator parameters derived from a material spec, as JSON.
    Material(CommonArgs),
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct CommonArgs {
    /// Config file, JSON or TOML (by extension). A run manifest is accepted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    pub out: PathBuf,
    /// Data file format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// How frequencies enter thermal factors: `ordinary` (ħ·2πf) or `angular` (ħω).
    #[arg(long, value_parser = parse_convention)]
    pub freq_convention: Option<FrequencyConvention>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    pub threads: Option<usize>,
    /// ω_2/ω_1 for the built-in parameter set.
    #[arg(long)]
    pub omega_ratio: Option<f64>,
    /// Bath temperature, K.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Cavity loss rate κ_a.
    #[arg(long)]
    pub kappa_a: Option<f64>,
    /// Wall damping rate κ_j, both walls.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Coupling g_j, both walls.
    #[arg(long)]
    pub g: Option<f64>,
}

fn parse_convention(s: &str) -> std::result::Result<FrequencyConvention, String> {
    FrequencyConvention::parse(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct AxisArgs {
    /// Lower Δ̃/ω_1.
    #[arg(long)]
    pub delta_lo: Option<f64>,
    /// Upper Δ̃/ω_1.
    #[arg(long)]
    pub delta_hi: Option<f64>,
    /// Number of Δ̃ points.
    #[arg(long)]
    pub n_delta: Option<usize>,
    /// Log spacing in |Δ̃|.
    #[arg(long)]
    pub log_delta: Option<bool>,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct PointArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Δ̃/ω_1.
    #[arg(long)]
    pub delta: Option<f64>,
    /// G_eff = G|g_1|/ω_1.
    #[arg(long)]
    pub geff: Option<f64>,
    /// Include drift, noise and covariance matrices per root.
    #[arg(long)]
    pub dump_matrices: bool,
    /// Include the cavity-eliminated effective model per root.
    #[arg(long)]
    pub adiabatic: bool,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct PhaseArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub delta: AxisArgs,
    /// Lower G_eff.
    #[arg(long)]
    pub geff_lo: Option<f64>,
    /// Upper G_eff.
    #[arg(long)]
    pub geff_hi: Option<f64>,
    /// Number of G_eff points.
    #[arg(long)]
    pub n_geff: Option<usize>,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct CutArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub delta: AxisArgs,
    /// Relative distance below the line, G = G*(1 − offset).
    #[arg(long)]
    pub offset: Option<f64>,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub delta: AxisArgs,
    /// Root index k.
    #[arg(long)]
    pub root: Option<usize>,
    /// Lower ω/ω_1.
    #[arg(long)]
    pub omega_lo: Option<f64>,
    /// Upper ω/ω_1.
    #[arg(long)]
    pub omega_hi: Option<f64>,
    /// Number of ω points.
    #[arg(long)]
    pub n_omega: Option<usize>,
    /// Fixed G_eff; the bifurcation line when absent.
    #[arg(long)]
    pub geff: Option<f64>,
    /// Relative distance below the line on the bifurcation path.
    #[arg(long)]
    pub offset: Option<f64>,
    /// Compute spectra of unstable roots too.
    #[arg(long)]
    pub allow_unstable: bool,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct ThermalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Scan axis.
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// Lower axis value (K, ratio or scale factor).
    #[arg(long)]
    pub lo: Option<f64>,
    /// Upper axis value.
    #[arg(long)]
    pub hi: Option<f64>,
    /// Number of axis points.
    #[arg(long)]
    pub n: Option<usize>,
    /// Log axis spacing.
    #[arg(long)]
    pub log: Option<bool>,
    /// Working-point Δ̃/ω_1.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Relative distance below the bifurcation line.
    #[arg(long)]
    pub offset: Option<f64>,
    /// What stays fixed on an omega-scale scan.
    #[arg(long, value_enum)]
    pub hold: Option<HoldArg>,
    /// E_12 below this counts as extinct.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Lower end of the T_c bracket, K.
    #[arg(long)]
    pub t_lo: Option<f64>,
    /// Upper end of the T_c bracket, K.
    #[arg(long)]
    pub t_hi: Option<f64>,
    /// Bisect T_c at the working point and per axis point.
    #[arg(long)]
    pub cutoff: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Temperature,
    KappaRatio,
    OmegaScale,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum HoldArg {
    Line,
    Geff,
    Xi,
}

fn load_file(path: &Path) -> Result<FileConfig> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let is_toml = path.extension().is_some_and(|x| x == "toml");
    let fc: FileConfig = if is_toml {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
    };
    Ok(match fc.config {
        Some(rc) => {
            let rc = *rc;
            FileConfig {
                command: Some(rc.command),
                params: rc.params,
                material: rc.material,
                format: rc.format,
                threads: rc.threads,
                config: None,
            }
        }
        None => fc,
    })
}

fn axis_from(a: &AxisArgs, base: Option<Axis>, default: Axis) -> Axis {
    let b = base.unwrap_or(default);
    Axis {
        lo: a.delta_lo.unwrap_or(b.lo),
        hi: a.delta_hi.unwrap_or(b.hi),
        n: a.n_delta.unwrap_or(b.n),
        log: a.log_delta.unwrap_or(b.log),
    }
}

/// Builds the run from parsed flags and the optional config file.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let common = match &cli.command {
        Sub::Point(a) => &a.common,
        Sub::Phase(a) => &a.common,
        Sub::Cut(a) => &a.common,
        Sub::Spectrum(a) => &a.common,
        Sub::Thermal(a) => &a.common,
        Sub::Material(a) => a,
    };
    let file = match &common.config {
        Some(p) => load_file(p)?,
        None => FileConfig::default(),
    };
    let from_file = file.command.clone();
    let mismatch = |want: &str| -> Result<()> {
        match &from_file {
            Some(c) if c.name() != want => Err(Error::Config(format!(
                "config describes a `{}` run, not `{want}`",
                c.name()
            ))),
            _ => Ok(()),
        }
    };

    let command = match &cli.command {
        Sub::Point(a) => {
            mismatch("point")?;
            let (d0, g0, dm0, ad0) = match from_file {
                Some(Command::Point {
                    delta,
                    g_eff,
                    dump_matrices,
                    adiabatic,
                }) => (delta, g_eff, dump_matrices, adiabatic),
                _ => (-1.0, 0.3, false, false),
            };
            Command::Point {
                delta: a.delta.unwrap_or(d0),
                g_eff: a.geff.unwrap_or(g0),
                dump_matrices: a.dump_matrices || dm0,
                adiabatic: a.adiabatic || ad0,
            }
        }
        Sub::Phase(a) => {
            mismatch("phase")?;
            let (bd, bg) = match from_file {
                Some(Command::Phase { delta, geff }) => (Some(delta), Some(geff)),
                _ => (None, None),
            };
            let g = bg.unwrap_or(Axis::linear(0.0, 1.0, 200));
            Command::Phase {
                delta: axis_from(&a.delta, bd, Axis::linear(-3.0, 1.0, 200)),
                geff: Axis {
                    lo: a.geff_lo.unwrap_or(g.lo),
                    hi: a.geff_hi.unwrap_or(g.hi),
                    n: a.n_geff.unwrap_or(g.n),
                    log: g.log,
                },
            }
        }
        Sub::Cut(a) => {
            mismatch("cut")?;
            let (bd, bo) = match from_file {
                Some(Command::Cut { delta, offset }) => (Some(delta), offset),
                _ => (None, CUT_OFFSET),
            };
            Command::Cut {
                delta: axis_from(&a.delta, bd, Axis::linear(-50.0, -0.1, 400)),
                offset: a.offset.unwrap_or(bo),
            }
        }
        Sub::Spectrum(a) => {
            mismatch("spectrum")?;
            let (br, bd, bw, bp, bu) = match from_file {
                Some(Command::Spectrum {
                    root,
                    delta,
                    omega,
                    path,
                    allow_unstable,
                }) => (root, Some(delta), omega, path, allow_unstable),
                _ => (
                    1,
                    None,
                    Axis::linear(0.0, 3.0, 301),
                    DrivePath::Bifurcation { offset: CUT_OFFSET },
                    false,
                ),
            };
            let path = match (a.geff, a.offset, bp) {
                (Some(g), _, _) => DrivePath::Geff { g_eff: g },
                (None, Some(o), _) => DrivePath::Bifurcation { offset: o },
                (None, None, p) => p,
            };
            Command::Spectrum {
                root: a.root.unwrap_or(br),
                delta: axis_from(&a.delta, bd, Axis::log(-50.0, -0.1, 200)),
                omega: Axis {
                    lo: a.omega_lo.unwrap_or(bw.lo),
                    hi: a.omega_hi.unwrap_or(bw.hi),
                    n: a.n_omega.unwrap_or(bw.n),
                    log: bw.log,
                },
                path,
                allow_unstable: a.allow_unstable || bu,
            }
        }
        Sub::Thermal(a) => {
            mismatch("thermal")?;
            let kind = a.kind.map(|k| match k {
                KindArg::Temperature => ScanKind::Temperature,
                KindArg::KappaRatio => ScanKind::KappaRatio,
                KindArg::OmegaScale => ScanKind::OmegaScale,
            });
            let (bk, ba, bp, bs, bc) = match from_file {
                Some(Command::Thermal {
                    kind,
                    axis,
                    point,
                    search,
                    cutoff,
                }) => (kind, Some(axis), point, search, cutoff),
                _ => (
                    ScanKind::Temperature,
                    None,
                    WorkingPoint::default(),
                    CutoffSearch::default(),
                    false,
                ),
            };
            let kind = kind.unwrap_or(bk);
            let da = match kind {
                ScanKind::Temperature => Axis::log(1e-3, 0.1, 41),
                ScanKind::KappaRatio => Axis::log(0.01, 10.0, 31),
                ScanKind::OmegaScale => Axis::log(1.0, 100.0, 3),
            };
            let b = ba.unwrap_or(da);
            let hold = a.hold.map(|h| match h {
                HoldArg::Line => ScaleHold::Line,
                HoldArg::Geff => ScaleHold::Geff,
                HoldArg::Xi => ScaleHold::Xi,
            });
            Command::Thermal {
                kind,
                axis: Axis {
                    lo: a.lo.unwrap_or(b.lo),
                    hi: a.hi.unwrap_or(b.hi),
                    n: a.n.unwrap_or(b.n),
                    log: a.log.unwrap_or(b.log),
                },
                point: WorkingPoint {
                    delta_over_omega: a.delta.unwrap_or(bp.delta_over_omega),
                    offset: a.offset.unwrap_or(bp.offset),
                    hold: hold.unwrap_or(bp.hold),
                },
                search: CutoffSearch {
                    threshold: a.threshold.unwrap_or(bs.threshold),
                    t_lo: a.t_lo.unwrap_or(bs.t_lo),
                    t_hi: a.t_hi.unwrap_or(bs.t_hi),
                    rel_tol: bs.rel_tol,
                },
                cutoff: a.cutoff || bc,
            }
        }
        Sub::Material(_) => {
            mismatch("material")?;
            Command::Material
        }
    };

    let material = file.material;
    let params = if matches!(command, Command::Material) {
        None
    } else {
        let mut p = file
            .params
            .unwrap_or_else(|| SystemParams::representative(common.omega_ratio.unwrap_or(1.0)));
        if let Some(r) = common.omega_ratio {
            if p.omega.len() >= 2 {
                p.omega[1] = r * p.omega[0];
            }
        }
        if let Some(t) = common.temperature {
            p.temperature = t;
        }
        if let Some(k) = common.kappa_a {
            p.kappa_a = k;
        }
        if let Some(k) = common.kappa {
            p.kappa.iter_mut().for_each(|x| *x = k);
        }
        if let Some(g) = common.g {
            p.g.iter_mut().for_each(|x| *x = g);
        }
        if let Some(c) = common.freq_convention {
            p.convention = c;
        }
        Some(p)
    };
    Ok(RunConfig {
        command,
        params,
        material,
        output: common.out.clone(),
        format: common.format.or(file.format),
        threads: common.threads.or(file.threads),
    })
}

/// Result of one pipeline: data files (name, contents) and a summary.
struct Produced {
    files: Vec<(String, String)>,
    summary: Option<Value>,
}

fn validate(cfg: &RunConfig) -> Result<()> {
    if let Some(0) = cfg.threads {
        return Err(Error::Config("threads must be >= 1".into()));
    }
    if let Some(p) = &cfg.params {
        p.validate()?;
        p.require_two()?;
        if p.g[0] == 0.0 && !matches!(cfg.command, Command::Point { .. }) {
            return Err(Error::param("g[0]", "G_eff axes need g_1 != 0"));
        }
    }
    match &cfg.command {
        Command::Point { delta, g_eff, .. } => {
            if !(delta.is_finite() && g_eff.is_finite() && *g_eff >= 0.0) {
                return Err(Error::Config(
                    "point needs finite delta and g_eff >= 0".into(),
                ));
            }
        }
        Command::Phase { delta, geff } => {
            delta.validate("delta")?;
            geff.validate("geff")?;
            if delta.n < 16 || geff.n < 16 {
                return Err(Error::Config(
                    "phase needs at least 16 points per axis".into(),
                ));
            }
        }
        Command::Cut { delta, offset } => {
            delta.validate("delta")?;
            if !(delta.lo < 0.0 && delta.hi < 0.0) {
                return Err(Error::Config("cut needs delta < 0".into()));
            }
            if !(0.0..1.0).contains(offset) {
                return Err(Error::Config("offset must lie in [0, 1)".into()));
            }
        }
        Command::Spectrum {
            root, delta, omega, ..
        } => {
            delta.validate("delta")?;
            omega.validate("omega")?;
            if *root > 2 {
                return Err(Error::Config("root must be 0, 1 or 2".into()));
            }
        }
        Command::Thermal { axis, search, .. } => {
            axis.validate("axis")?;
            if !(search.threshold > 0.0 && search.t_lo > 0.0 && search.t_hi > search.t_lo) {
                return Err(Error::Config(
                    "need threshold > 0 and 0 < t_lo < t_hi".into(),
                ));
            }
        }
        Command::Material => match &cfg.material {
            Some(m) => m.validate()?,
            None => {
                return Err(Error::Config(
                    "material needs a `material` section in --config".into(),
                ))
            }
        },
    }
    Ok(())
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt_root(k: Option<usize>) -> String {
    k.map(|k| k.to_string()).unwrap_or_default()
}

fn scaled(a: Axis, w: f64) -> Axis {
    Axis {
        lo: a.lo * w,
        hi: a.hi * w,
        ..a
    }
}

fn complex_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

/// Point report as JSON.
fn run_point(
    p: &SystemParams,
    delta: f64,
    g_eff: f64,
    dump: bool,
    adiabatic: bool,
) -> Result<Value> {
    let w1 = p.omega[0];
    let rc = ReducedCoords::from_geff(g_eff, delta * w1, p);
    let rr = roots_from_reduced(rc, p)?;
    let q = &rr.params;
    let ent = crate::entanglement::analyze_point(rc, p)?;
    let mut roots = Vec::new();
    for r in &rr.roots {
        let mut o = json!({
            "k": r.k,
            "is_real": r.is_real,
            "n_bar": r.n_bar,
            "alpha": complex_json(r.alpha),
            "beta": r.beta.iter().map(|&b| complex_json(b)).collect::<Vec<_>>(),
            "delta_tilde": r.delta_tilde,
        });
        if r.is_real {
            let dm = build_drift(r, q)?;
            let rep = classify_stability(&dm.a, None);
            o["stability"] = json!({
                "stable": rep.stable,
                "max_re": rep.max_re,
                "margin": rep.margin,
                "eigenvalues": rep.eigenvalues.iter().map(|&z| complex_json(z)).collect::<Vec<_>>(),
            });
            o["measures"] = serde_json::to_value(measure_root(r, q)?)
                .map_err(|e| Error::Numerical(e.to_string()))?;
            if dump {
                let nm = build_noise(q);
                let mut m = json!({ "drift": matrix_rows(&dm.a), "noise": matrix_rows(&nm.d) });
                if rep.stable {
                    if let Ok(cov) = solve_lyapunov(&dm, &nm) {
                        m["covariance"] = json!(matrix_rows(&cov.v));
                    }
                }
                o["matrices"] = m;
            }
            if adiabatic {
                o["adiabatic"] = match effective_model(r, q) {
                    Ok(em) => {
                        let mut forms = serde_json::Map::new();
                        for (name, f) in [
                            ("substitution", ReducedForm::Substitution),
                            ("hamiltonian", ReducedForm::Hamiltonian),
                            ("dispersive", ReducedForm::Dispersive),
                        ] {
                            let v = match reduced_dw_model(&em, q, f, true) {
                                Ok(rm) => json!({
                                    "e_12": rm.e_12,
                                    "symplectic_min": rm.symplectic_min,
                                    "max_re": rm.max_re,
                                }),
                                Err(e) => json!({ "error": e.to_string() }),
                            };
                            forms.insert(name.into(), v);
                        }
                        json!({ "model": em, "reduced": forms })
                    }
                    Err(e) => json!({ "error": e.to_string() }),
                };
            }
        }
        roots.push(o);
    }
    Ok(json!({
        "delta_tilde": rc.delta_tilde,
        "delta_over_omega": delta,
        "g_eff": g_eff,
        "g_amp": rc.g_amp,
        "delta_a": rr.delta_a,
        "xi": rr.xi,
        "three_root_region": crate::steadystate::three_root_region(rc, p),
        "roots": roots,
        "entanglement": ent,
    }))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Numerical(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn execute(cfg: &RunConfig) -> Result<Produced> {
    let fmt = cfg.format.unwrap_or_default();
    let threads = cfg.threads;
    let one = |name: &str, csv: String, json: Result<String>| -> Result<Vec<(String, String)>> {
        Ok(match fmt {
            Format::Csv => vec![(format!("{name}.csv"), csv)],
            Format::Json => vec![(format!("{name}.json"), json?)],
        })
    };
    match &cfg.command {
        Command::Material => {
            let spec = cfg.material.as_ref().expect("validated");
            let modes = (0..spec.k_pin.len())
                .map(|j| derive_dw_mode(spec, j).map_err(|e| e.at(format!("wall {j}"))))
                .collect::<Result<Vec<_>>>()?;
            Ok(Produced {
                files: vec![("material.json".into(), to_json(&json!({ "modes": modes }))?)],
                summary: None,
            })
        }
        Command::Point {
            delta,
            g_eff,
            dump_matrices,
            adiabatic,
        } => {
            let p = cfg.params.as_ref().expect("resolved");
            let v = run_point(p, *delta, *g_eff, *dump_matrices, *adiabatic)
                .map_err(|e| e.at(format!("delta/omega_1 = {delta}, g_eff = {g_eff}")))?;
            Ok(Produced {
                files: vec![("point.json".into(), to_json(&v)?)],
                summary: Some(v["entanglement"].clone()),
            })
        }
        Command::Phase { delta, geff } => {
            let p = cfg.params.as_ref().expect("resolved");
            let w1 = p.omega[0];
            let pd = phase_diagram(p, scaled(*delta, w1), *geff, threads)?;
            let mut csv = String::from(
                "delta_tilde,g_eff,three_root_region,n_real_roots,n_stable_roots,phase,e_12,e_a1,e_a2,\
                 nu_min_12,nu_min_a1,nu_min_a2,best_root_12,best_root_a1,best_root_a2,error\n",
            );
            let mut n_err = 0;
            for c in &pd.cells {
                n_err += c.error.is_some() as usize;
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},\"{}\",{},{},{},{},{},{},{},{},{},\"{}\"",
                    num(c.delta_tilde / w1),
                    num(c.g_eff),
                    c.three_root_region as u8,
                    c.n_real_roots,
                    c.n_stable_roots,
                    c.phase_label,
                    num(c.e[0]),
                    num(c.e[1]),
                    num(c.e[2]),
                    num(c.nu_min[0]),
                    num(c.nu_min[1]),
                    num(c.nu_min[2]),
                    opt_root(c.best_root[0]),
                    opt_root(c.best_root[1]),
                    opt_root(c.best_root[2]),
                    c.error.clone().unwrap_or_default().replace('"', "'"),
                );
            }
            Ok(Produced {
                files: one("phase", csv, to_json(&pd))?,
                summary: Some(json!({ "cells": pd.cells.len(), "cells_with_errors": n_err })),
            })
        }
        Command::Cut { delta, offset } => {
            let p = cfg.params.as_ref().expect("resolved");
            let w1 = p.omega[0];
            let pts = bifurcation_cut(p, scaled(*delta, w1), *offset, threads)?;
            let mut csv = String::from(
                "delta_tilde,g_star,g_amp,e_12,e_a1,e_a2,nu_min_12,nu_min_a1,nu_min_a2,stable_roots",
            );
            for k in 0..3 {
                let _ = write!(
                    csv,
                    ",e_12_k{k},e_a1_k{k},e_a2_k{k},nu_min_12_k{k},nu_min_a1_k{k},nu_min_a2_k{k}"
                );
            }
            csv.push('\n');
            for c in &pts {
                let r = &c.result;
                let _ = write!(
                    csv,
                    "{},{},{},{},{},{},{},{},{},\"{}\"",
                    num(c.delta_tilde / w1),
                    num(c.g_star),
                    num(c.g_amp),
                    num(r.e_12),
                    num(r.e_a1),
                    num(r.e_a2),
                    num(r.nu_min_12),
                    num(r.nu_min_a1),
                    num(r.nu_min_a2),
                    r.phase_label()
                );
                for k in 0..3 {
                    let m = r.root(k);
                    let e = m.and_then(|m| m.e).unwrap_or([f64::NAN; 3]);
                    let n = m.and_then(|m| m.nu_min).unwrap_or([f64::NAN; 3]);
                    let _ = write!(
                        csv,
                        ",{},{},{},{},{},{}",
                        num(e[0]),
                        num(e[1]),
                        num(e[2]),
                        num(n[0]),
                        num(n[1]),
                        num(n[2])
                    );
                }
                csv.push('\n');
            }
            Ok(Produced {
                files: one("cut", csv, to_json(&pts))?,
                summary: None,
            })
        }
        Command::Spectrum {
            root,
            delta,
            omega,
            path,
            allow_unstable,
        } => {
            let p = cfg.params.as_ref().expect("resolved");
            let w1 = p.omega[0];
            let da = scaled(*delta, w1).values();
            let wa = scaled(*omega, w1).values();
            let rows = spectrum_map(p, *root, &da, &wa, *path, *allow_unstable, threads)?;
            let mut csv = String::from("delta_tilde,omega,S");
            for i in 1..=6 {
                let _ = write!(csv, ",re_lambda_{i}");
            }
            for i in 1..=6 {
                let _ = write!(csv, ",im_lambda_{i}");
            }
            csv.push('\n');
            for r in &rows {
                let _ = write!(
                    csv,
                    "{},{},{}",
                    num(r.delta_tilde / w1),
                    num(r.omega / w1),
                    num(r.s)
                );
                for i in 0..6 {
                    let _ = write!(
                        csv,
                        ",{}",
                        num(r.lambda.get(i).map_or(f64::NAN, |z| z.re / w1))
                    );
                }
                for i in 0..6 {
                    let _ = write!(
                        csv,
                        ",{}",
                        num(r.lambda.get(i).map_or(f64::NAN, |z| z.im / w1))
                    );
                }
                csv.push('\n');
            }
            Ok(Produced {
                files: one("spectrum", csv, to_json(&rows))?,
                summary: Some(json!({ "root": root })),
            })
        }
        Command::Thermal {
            kind,
            axis,
            point,
            search,
            cutoff,
        } => {
            let p = cfg.params.as_ref().expect("resolved");
            let xs = axis.values();
            let scan = thermal_scan(p, *point, *kind, &xs, cutoff.then_some(*search), threads)?;
            let col = match kind {
                ScanKind::Temperature => "temperature",
                ScanKind::KappaRatio => "kappa_ratio",
                ScanKind::OmegaScale => "omega_scale",
            };
            let mut csv = format!("{col},e_12,t_c\n");
            for i in 0..xs.len() {
                let _ = writeln!(
                    csv,
                    "{},{},{}",
                    num(xs[i]),
                    num(scan.e_12[i]),
                    scan.t_c[i].map(num).unwrap_or_else(|| "NaN".into())
                );
            }
            let mut summary = json!({ "monotone_violation": scan.monotone_violation });
            if *cutoff {
                summary["t_c"] = match find_cutoff_temperature(p, *point, *search) {
                    Ok(t) => json!(t),
                    Err(e) => json!({ "error": e.to_string() }),
                };
            }
            Ok(Produced {
                files: one("thermal", csv, to_json(&scan))?,
                summary: Some(summary),
            })
        }
    }
}

/// Runs a resolved config: writes data files and `manifest.json` to
/// `cfg.output`. Returns 0 on success, 1 on config errors, 2 on numerical
/// errors.
pub fn run(cfg: &RunConfig) -> i32 {
    let t0 = Instant::now();
    let result = validate(cfg).and_then(|_| execute(cfg));
    let mut manifest = Manifest {
        version: crate::VERSION.to_string(),
        config: cfg.clone(),
        outputs: vec![],
        status: "ok".into(),
        exit_code: 0,
        error: None,
        error_location: None,
        summary: None,
        wall_time_s: 0.0,
    };
    if let Err(e) = fs::create_dir_all(&cfg.output) {
        eprintln!("error: cannot create {}: {e}", cfg.output.display());
        return 1;
    }
    match result {
        Ok(prod) => {
            for (name, body) in &prod.files {
                if let Err(e) = fs::write(cfg.output.join(name), body) {
                    eprintln!("error: cannot write {name}: {e}");
                    return 1;
                }
                manifest.outputs.push(name.clone());
            }
            manifest.summary = prod.summary;
        }
        Err(e) => {
            let code = if e.is_config() { 1 } else { 2 };
            eprintln!("error: {e}");
            manifest.status = if code == 1 {
                "config-error"
            } else {
                "numerical-error"
            }
            .into();
            manifest.exit_code = code;
            manifest.error_location = e.location().map(str::to_string);
            manifest.error = Some(e.to_string());
        }
    }
    manifest.wall_time_s = t0.elapsed().as_secs_f64();
    match to_json(&manifest) {
        Ok(s) => {
            if let Err(e) = fs::write(cfg.output.join("manifest.json"), s) {
                eprintln!("error: cannot write manifest: {e}");
                return 1;
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    }
    manifest.exit_code
}

/// Parses `args` and runs. Errors from argument parsing exit through clap.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match resolve(&cli) {
        Ok(cfg) => run(&cfg),
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn every_flag_is_documented() {
        let cmd = Cli::command();
        for sub in cmd.get_subcommands() {
            assert!(sub.get_about().is_some(), "{}", sub.get_name());
            for arg in sub.get_arguments() {
                let id = arg.get_id().as_str();
                if id == "help" || id == "version" {
                    continue;
                }
                assert!(arg.get_help().is_some(), "{} --{id}", sub.get_name());
            }
        }
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_defaults() {
        let cli = Cli::try_parse_from([
            "dwcav",
            "point",
            "--delta",
            "-2",
            "--kappa-a",
            "3e6",
            "--out",
            "/tmp/x",
        ])
        .unwrap();
        let cfg = resolve(&cli).unwrap();
        assert_eq!(cfg.params.as_ref().unwrap().kappa_a, 3e6);
        match cfg.command {
            Command::Point { delta, g_eff, .. } => assert_eq!((delta, g_eff), (-2.0, 0.3)),
            _ => panic!(),
        }
    }

    #[test]
    fn config_round_trips() {
        let cli =
            Cli::try_parse_from(["dwcav", "cut", "--n-delta", "20", "--out", "/tmp/x"]).unwrap();
        let cfg = resolve(&cli).unwrap();
        let s = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
    }
}
