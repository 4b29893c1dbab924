//! Batch driver: runs the sweeps of a [`RunConfig`] and writes CSV tables.
//!
//! Forces in every table are dimensionless: F·a² in 1D and F·a³ (per unit
//! length) in 2D, with a the gap in grid cells. Rows are emitted in the
//! canonical sweep order a, d, resolution, σ·a, τ, method.

pub mod config;
pub mod tables;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};

pub use config::{parse_config, GeometryChoice, Method, Oracle, RunConfig, SweepPoint};
use tables::{ForceRow, FAILURE_MARKER};

use crate::error::{Error, Result};
use crate::fdtd::{FdtdParams, ResponseSet};
use crate::force::{integrate_force_naive, thermal_force, ForceParts};
use crate::model::{rasterize, Axis, Polarization, TemperatureSpec};
use crate::reference::{force_freq_grid, force_matsubara_grid, half_line_rule, lifshitz_1d, matsubara_sum, GridOracle, ReferenceOptions};
use crate::stress::{combine, execute_runs, plan_runs, AssembleOptions, RunSpec, StressTrace};
use crate::weights::{thermal_time_weight, SynthesisOptions, WeightKind, WeightSpectrum};

/// Command-line switches shared by every subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CliOptions {
    pub jobs: usize,
    pub timestamp: bool,
    pub debug_dumps: bool,
}

impl Default for CliOptions {
    fn default() -> Self {
        Self { jobs: 1, timestamp: true, debug_dumps: false }
    }
}

fn header(cmd: &str, opts: &CliOptions) -> Option<String> {
    opts.timestamp
        .then(|| format!("casimir-td {cmd} generated {}", Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)))
}

/// a^(dim+1): converts grid-unit forces to the reported dimensionless values.
pub fn force_scale(dim: usize, a_cells: usize) -> f64 {
    (a_cells as f64).powi(dim as i32 + 1)
}

pub fn temperature(tau: f64, a_cells: usize) -> Result<TemperatureSpec> {
    if tau == 0.0 {
        Ok(TemperatureSpec::zero(a_cells as f64))
    } else {
        TemperatureSpec::new(tau, a_cells as f64)
    }
}

pub fn fdtd_params(cfg: &RunConfig, point: &SweepPoint) -> FdtdParams {
    FdtdParams::new(point.sigma(), cfg.numerics.dt, cfg.numerics.max_steps, cfg.tail_tol())
}

pub fn synthesis_options(cfg: &RunConfig) -> SynthesisOptions {
    SynthesisOptions { oversample: cfg.numerics.oversample }
}

pub fn reference_options(cfg: &RunConfig, jobs: usize) -> ReferenceOptions {
    ReferenceOptions {
        quad_nodes: cfg.numerics.quad_nodes,
        n_max: cfg.numerics.matsubara_n_max,
        tail_tol: cfg.numerics.matsubara_tol,
        jobs,
    }
}

fn d_label(cfg: &RunConfig, point: &SweepPoint) -> String {
    match (cfg.geometry.kind, point.d_cells()) {
        (GeometryChoice::Plates1d, _) => String::new(),
        (_, Some(d)) => d.to_string(),
        (_, None) => "inf".into(),
    }
}

fn stem(cfg: &RunConfig, point: &SweepPoint, pol: Polarization) -> String {
    let d = d_label(cfg, point);
    let d = if d.is_empty() { String::new() } else { format!("_d{d}") };
    format!(
        "{}_a{}{d}_r{}_sa{}_{}",
        cfg.geometry.kind.name(),
        point.a_cells(),
        point.resolution,
        point.sigma_a,
        pol.name().to_ascii_lowercase()
    )
}

fn write_csv(path: &Path, comment: Option<&str>, schema: &tables::Schema, rows: &[Vec<String>]) -> Result<()> {
    tables::write_table(BufWriter::new(File::create(path)?), comment, schema, rows)
}

fn write_dumps(dir: &Path, stem: &str, runs: &[RunSpec], responses: &[ResponseSet], trace: &StressTrace) -> Result<()> {
    let gamma: Vec<Vec<String>> = (0..trace.len())
        .map(|k| {
            let e = trace.gamma_e.get(k).copied().unwrap_or(0.0);
            let h = trace.gamma_h.get(k).copied().unwrap_or(0.0);
            vec![k.to_string(), tables::num(e), tables::num(h)]
        })
        .collect();
    write_csv(&dir.join(format!("gamma_{stem}.csv")), None, &tables::GAMMA_DUMP, &gamma)?;
    let mut raw = Vec::new();
    let mut legend = Vec::new();
    for (run, resp) in runs.iter().zip(responses) {
        for (probe, series) in resp.probes.iter().zip(&resp.series) {
            let id = legend.len();
            legend.push(vec![
                id.to_string(),
                run.pos.x2.to_string(),
                run.pos.y2.to_string(),
                run.source.name().to_string(),
                probe.component.name().to_string(),
            ]);
            raw.extend(series.iter().enumerate().map(|(k, v)| vec![k.to_string(), id.to_string(), tables::num(*v)]));
        }
    }
    write_csv(&dir.join(format!("raw_{stem}.csv")), None, &tables::RAW_DUMP, &raw)?;
    write_csv(&dir.join(format!("probes_{stem}.csv")), None, &tables::PROBE_LEGEND, &legend)
}

/// Stress traces (x force on the measured body) for every simulated
/// polarization of a sweep point, in [`RunConfig::polarizations`] order.
pub fn timedomain_traces(cfg: &RunConfig, point: &SweepPoint, jobs: usize, dumps: Option<&Path>) -> Result<Vec<StressTrace>> {
    let mask = rasterize(&point.geometry);
    let opts = AssembleOptions { jobs, mirror_y: cfg.numerics.mirror && cfg.dim() == 2 };
    let params = fdtd_params(cfg, point);
    let mut out = Vec::new();
    for pol in cfg.polarizations() {
        let surface = point.geometry.stress_surface(pol)?;
        surface.check_against(&mask)?;
        let runs = plan_runs(&mask, &surface, Axis::X, &opts)?;
        let responses = execute_runs(&mask, &runs, &params, jobs)?;
        let trace = combine(&mask, &surface, Axis::X, params.dt, &runs, &responses, &opts)?;
        if let Some(dir) = dumps {
            write_dumps(dir, &stem(cfg, point, pol), &runs, &responses, &trace)?;
        }
        out.push(trace);
    }
    Ok(out)
}

/// Grid-reference parts in grid units, indexed `[polarization][tau]`.
pub fn reference_forces(cfg: &RunConfig, point: &SweepPoint, jobs: usize) -> Result<Vec<Vec<ForceParts>>> {
    let mask = rasterize(&point.geometry);
    let ropts = reference_options(cfg, jobs);
    cfg.polarizations()
        .into_iter()
        .map(|pol| {
            let surface = point.geometry.stress_surface(pol)?;
            let oracle = GridOracle::new(&mask, &surface, Axis::X, point.sigma())?;
            cfg.physics
                .tau
                .iter()
                .map(|&tau| force_matsubara_grid(&oracle, &temperature(tau, point.a_cells())?, &ropts))
                .collect()
        })
        .collect()
}

fn rel_err(value: f64, oracle: Option<f64>) -> Option<f64> {
    oracle.map(|o| ((value - o) / o).abs())
}

/// Force rows for one sweep point, ordered by τ then method.
pub fn compute_point(cfg: &RunConfig, point: &SweepPoint, opts: &CliOptions, dumps: Option<&Path>) -> Result<Vec<ForceRow>> {
    let methods = &cfg.outputs.methods;
    let pols = cfg.polarizations();
    let a = point.a_cells();
    let scale = force_scale(cfg.dim(), a);
    let sigma = point.sigma();
    let need_td = methods.contains(&Method::TimeDomain) || methods.contains(&Method::NaiveControl);
    let need_ref = methods.contains(&Method::Reference) || cfg.outputs.oracle == Oracle::Reference;
    let need_lif = methods.contains(&Method::Lifshitz) || cfg.outputs.oracle == Oracle::Lifshitz;
    let traces = if need_td { timedomain_traces(cfg, point, opts.jobs, dumps)? } else { Vec::new() };
    let refs = if need_ref { reference_forces(cfg, point, opts.jobs)? } else { Vec::new() };
    let synth = synthesis_options(cfg);
    let pol_index = |p: Polarization| pols.iter().position(|&q| q == p);
    let te_tm = |per_pol: &[f64]| -> (Option<f64>, Option<f64>) {
        if cfg.dim() == 1 {
            return (None, None);
        }
        (pol_index(Polarization::Te).map(|k| per_pol[k]), pol_index(Polarization::Tm).map(|k| per_pol[k]))
    };
    let base = |method: String, tau: f64| ForceRow {
        method,
        kind: cfg.geometry.kind.name().into(),
        a,
        d: d_label(cfg, point),
        tau: Some(tau),
        sigma,
        resolution: point.resolution,
        f_total: None,
        f_n0: None,
        f_npos: None,
        f_te: None,
        f_tm: None,
        oracle_rel_err: None,
    };
    let sum_parts = |ps: &[ForceParts]| ps.iter().fold(ForceParts::default(), |acc, p| acc.add(*p)).scaled(scale);
    let mut rows = Vec::new();
    for (kt, &tau) in cfg.physics.tau.iter().enumerate() {
        let temp = temperature(tau, a)?;
        let lif = if need_lif { Some(lifshitz_1d(a as f64, tau)?.parts()) } else { None };
        let reference: Vec<ForceParts> = refs.iter().map(|r| r[kt]).collect();
        let oracle = match cfg.outputs.oracle {
            Oracle::None => None,
            Oracle::Lifshitz => lif.map(|p| p.total * scale),
            Oracle::Reference => Some(sum_parts(&reference).total),
        };
        let parts_row = |method: Method, per_pol: &[ForceParts], own_oracle: bool| -> ForceRow {
            let t = sum_parts(per_pol);
            let totals: Vec<f64> = per_pol.iter().map(|p| p.total * scale).collect();
            let (f_te, f_tm) = te_tm(&totals);
            ForceRow {
                f_total: Some(t.total),
                f_n0: Some(t.n0),
                f_npos: Some(t.npos),
                f_te,
                f_tm,
                oracle_rel_err: if own_oracle { None } else { rel_err(t.total, oracle) },
                ..base(method.name().into(), tau)
            }
        };
        for &m in methods {
            match m {
                Method::TimeDomain => {
                    let ps = traces.iter().map(|t| thermal_force(t, sigma, &temp, synth)).collect::<Result<Vec<_>>>()?;
                    rows.push(parts_row(m, &ps, false));
                }
                Method::Reference => {
                    rows.push(parts_row(m, &reference, cfg.outputs.oracle == Oracle::Reference));
                }
                Method::Lifshitz => {
                    let p = lif.expect("computed when requested");
                    rows.push(parts_row(m, &[p], cfg.outputs.oracle == Oracle::Lifshitz));
                }
                Method::NaiveControl if tau > 0.0 => {
                    for &z in &cfg.outputs.naive_zero_bin {
                        let per: Vec<f64> = traces
                            .iter()
                            .map(|t| Ok(integrate_force_naive(t, sigma, &temp, z, synth)? * scale))
                            .collect::<Result<_>>()?;
                        let total: f64 = per.iter().sum();
                        let (f_te, f_tm) = te_tm(&per);
                        rows.push(ForceRow {
                            f_total: Some(total),
                            f_te,
                            f_tm,
                            oracle_rel_err: rel_err(total, oracle),
                            ..base(format!("{}[z={z}]", m.name()), tau)
                        });
                    }
                }
                Method::NaiveControl => {}
            }
        }
    }
    Ok(rows)
}

fn failure_row(cfg: &RunConfig, point: &SweepPoint) -> ForceRow {
    ForceRow {
        method: FAILURE_MARKER.into(),
        kind: cfg.geometry.kind.name().into(),
        a: point.a_cells(),
        d: d_label(cfg, point),
        tau: None,
        sigma: point.sigma(),
        resolution: point.resolution,
        f_total: None,
        f_n0: None,
        f_npos: None,
        f_te: None,
        f_tm: None,
        oracle_rel_err: None,
    }
}

fn prepare_dir(cfg: &RunConfig) -> Result<&Path> {
    let dir = cfg.outputs.dir.as_path();
    fs::create_dir_all(dir)?;
    Ok(dir)
}

/// Runs every sweep point and writes `forces.csv`. On the first failed point
/// the rows computed so far are written followed by a failure marker row, and
/// the error is returned.
pub fn cmd_run(cfg: &RunConfig, opts: &CliOptions) -> Result<PathBuf> {
    let dir = prepare_dir(cfg)?;
    let dumps = if opts.debug_dumps {
        let d = dir.join("dumps");
        fs::create_dir_all(&d)?;
        Some(d)
    } else {
        None
    };
    let mut rows = Vec::new();
    let mut failure = None;
    for p in cfg.points()? {
        match compute_point(cfg, &p, opts, dumps.as_deref()) {
            Ok(r) => rows.extend(r),
            Err(e) => {
                rows.push(failure_row(cfg, &p));
                failure = Some(e);
                break;
            }
        }
    }
    let path = dir.join("forces.csv");
    let comment = header("run", opts);
    tables::write_forces(BufWriter::new(File::create(&path)?), comment.as_deref(), &rows)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(path),
    }
}

/// Writes `weights_spectrum.csv` (g(ξ) on the synthesis grid, starting with
/// the ξ = 0 limit when it is finite) and `weights_time.csv` (g(t) with its
/// zero-mode constant) for every (a, resolution, σ·a, τ).
pub fn cmd_weights(cfg: &RunConfig, opts: &CliOptions) -> Result<Vec<PathBuf>> {
    let dir = prepare_dir(cfg)?;
    let n = cfg.numerics.weight_steps;
    let dt = cfg.numerics.dt;
    let mut seen = Vec::new();
    let mut spec_rows = Vec::new();
    let mut time_rows = Vec::new();
    for p in cfg.points()? {
        let key = (p.a, p.resolution, p.sigma_a.to_bits());
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let sigma = p.sigma();
        for &tau in &cfg.physics.tau {
            let temp = temperature(tau, p.a_cells())?;
            let spec = WeightSpectrum::for_run(WeightKind::PoleSubtracted, sigma, temp, dt, n, cfg.numerics.oversample)?;
            let g = thermal_time_weight(sigma, temp, dt, n, synthesis_options(cfg))?;
            let lead = |v: Vec<String>| {
                let mut row = vec![p.a_cells().to_string(), p.resolution.to_string(), tables::num(sigma), tables::num(tau)];
                row.extend(v);
                row.push(tables::num(g.zero_mode_constant));
                row
            };
            if tau > 0.0 {
                let z = spec.zero_limit;
                spec_rows.push(lead(vec![tables::num(0.0), tables::num(z.re), tables::num(z.im)]));
            }
            for (x, v) in spec.xi.iter().zip(&spec.values) {
                spec_rows.push(lead(vec![tables::num(*x), tables::num(v.re), tables::num(v.im)]));
            }
            for (k, v) in g.values.iter().enumerate() {
                time_rows.push(lead(vec![tables::num(g.time(k)), tables::num(*v)]));
            }
        }
    }
    let comment = header("weights", opts);
    let ps = dir.join("weights_spectrum.csv");
    let pt = dir.join("weights_time.csv");
    write_csv(&ps, comment.as_deref(), &tables::WEIGHT_SPECTRUM, &spec_rows)?;
    write_csv(&pt, comment.as_deref(), &tables::WEIGHT_TIME, &time_rows)?;
    Ok(vec![ps, pt])
}

/// Writes `reference_terms.csv`: for τ > 0 the Matsubara terms
/// (n, ξ_n, f(ξ_n), partial sum), for τ = 0 the quadrature nodes of the
/// frequency integral with running sums. f and the sums are multiplied by
/// a^(dim+1) like the force tables.
pub fn cmd_reference(cfg: &RunConfig, opts: &CliOptions) -> Result<PathBuf> {
    let dir = prepare_dir(cfg)?;
    let ropts = reference_options(cfg, opts.jobs);
    let mut rows = Vec::new();
    for p in cfg.points()? {
        let mask = rasterize(&p.geometry);
        let a = p.a_cells();
        let scale = force_scale(cfg.dim(), a);
        for pol in cfg.polarizations() {
            let surface = p.geometry.stress_surface(pol)?;
            let oracle = GridOracle::new(&mask, &surface, Axis::X, p.sigma())?;
            for &tau in &cfg.physics.tau {
                let temp = temperature(tau, a)?;
                let mut push = |rule: &str, n: usize, xi: f64, f: f64, partial: f64| {
                    rows.push(vec![
                        cfg.geometry.kind.name().to_string(),
                        a.to_string(),
                        d_label(cfg, &p),
                        p.resolution.to_string(),
                        tables::num(p.sigma()),
                        tables::num(tau),
                        pol.name().to_string(),
                        rule.to_string(),
                        n.to_string(),
                        tables::num(xi),
                        tables::num(f * scale),
                        tables::num(partial * scale),
                    ]);
                };
                if tau == 0.0 {
                    let rule = half_line_rule(ropts.quad_nodes, 1.0 / temp.length)?;
                    let etas: Vec<f64> = rule.iter().map(|r| r.0).collect();
                    let vals = force_freq_grid(&oracle, &etas, ropts.jobs)?;
                    let mut acc = 0.0;
                    for (k, ((eta, w), f)) in rule.iter().zip(vals).enumerate() {
                        acc += w * f;
                        push("quadrature", k, *eta, f, acc);
                    }
                } else {
                    let mut samples = Vec::new();
                    let s = matsubara_sum(
                        |xi| {
                            let f = oracle.eval(xi)?;
                            samples.push((xi, f));
                            Ok(f)
                        },
                        temp.omega_t(),
                        ropts.n_max,
                        ropts.tail_tol,
                    )?;
                    let h = std::f64::consts::PI * s.omega_t;
                    let mut acc = 0.0;
                    for (n, (xi, f)) in samples.into_iter().enumerate() {
                        acc += if n == 0 { 0.5 * h * f } else { h * f };
                        push("matsubara", n, xi, f, acc);
                    }
                }
            }
        }
    }
    let path = dir.join("reference_terms.csv");
    write_csv(&path, header("reference", opts).as_deref(), &tables::REFERENCE_TERMS, &rows)?;
    Ok(path)
}

/// Process exit code for an error: 1 for bad input, 2 for failed computations.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        1
    } else {
        2
    }
}
