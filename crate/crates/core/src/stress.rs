//! Surface-integrated stress response Γ(t) assembled from impulsive runs.
//!
//! For a face with outward normal n along axis j and line element w, the
//! contribution to force component i is n_j·w·T_ij with
//! T_ij = E_iE_j − ½δ_ij|E|² + H_iH_j − ½δ_ij|H|², each quadratic replaced by
//! the same-point response series. E-sourced terms go to Γ_E, H-sourced terms
//! to Γ_H. Accumulation runs over points sorted by position, so the result
//! does not depend on the order of the surface list.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fdtd::{integrate_with_tail, run_dipole_response, DipoleSource, FdtdParams, Probe, ResponseSet};
use crate::model::{Axis, Component, PecMask, Polarization, Pos, StressSurface};

#[derive(Debug, Clone, PartialEq)]
pub struct StressTrace {
    pub dt: f64,
    pub gamma_e: Vec<f64>,
    pub gamma_h: Vec<f64>,
    /// Tail-corrected ∫Γ_E dt and ∫Γ_H dt.
    pub dc_e: f64,
    pub dc_h: f64,
    pub polarization: Polarization,
    pub direction: Axis,
    /// Number of simulations that produced the trace.
    pub runs: usize,
}

impl StressTrace {
    pub fn len(&self) -> usize {
        self.gamma_e.len().max(self.gamma_h.len())
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Γ = Γ_E + Γ_H sample k (zero past the end of either series).
    pub fn total(&self, k: usize) -> f64 {
        self.gamma_e.get(k).copied().unwrap_or(0.0) + self.gamma_h.get(k).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AssembleOptions {
    /// Worker threads (0 or 1 = run on the calling thread).
    pub jobs: usize,
    /// Exploit a mirror symmetry of the geometry across the horizontal line
    /// through the surface centre (verified against the mask).
    pub mirror_y: bool,
}

/// One simulation: source component at a point, recording every component of
/// the same field type there.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub pos: Pos,
    pub source: Component,
    pub record: Vec<Component>,
}

fn same_type(pol: Polarization, electric: bool) -> Vec<Component> {
    pol.components().iter().copied().filter(|c| c.is_electric() == electric).collect()
}

/// In-plane components of the field type that carries them in `pol`.
fn in_plane(pol: Polarization) -> Vec<Component> {
    pol.components().iter().copied().filter(|c| c.axis().is_some()).collect()
}

fn component_along(cs: &[Component], axis: Axis) -> Option<Component> {
    cs.iter().copied().find(|c| c.axis() == Some(axis))
}

/// Sources needed at one point for force component `dir`.
fn sources_for(pol: Polarization, faces: &[crate::model::Face], dir: Axis) -> Result<Vec<Component>> {
    let mut out: Vec<Component> = Vec::new();
    for f in faces {
        if f.normal.axis == dir {
            for &c in pol.components() {
                if !out.contains(&c) {
                    out.push(c);
                }
            }
        } else {
            let ip = in_plane(pol);
            let a = component_along(&ip, dir);
            let b = component_along(&ip, f.normal.axis);
            match (a, b) {
                (Some(a), Some(b)) => {
                    for c in [a, b] {
                        if !out.contains(&c) {
                            out.push(c);
                        }
                    }
                }
                _ => return Err(Error::Parameter("off-diagonal stress needs in-plane components".into())),
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Ordered list of simulations for a surface, in canonical point order.
pub fn plan_runs(mask: &PecMask, surface: &StressSurface, dir: Axis, opts: &AssembleOptions) -> Result<Vec<RunSpec>> {
    let pol = surface.polarization;
    let points = canonical_points(surface);
    let mirror = mirror_line(mask, surface, opts)?;
    let mut runs = Vec::new();
    for p in &points {
        if let Some(yc2) = mirror {
            if 2 * p.pos.y2 > yc2 {
                continue;
            }
        }
        // the mirror partner's faces need the same sources (normals flip in y only)
        for src in sources_for(pol, &p.faces, dir)? {
            runs.push(RunSpec { pos: p.pos, source: src, record: same_type(pol, src.is_electric()) });
        }
    }
    Ok(runs)
}

fn canonical_points(surface: &StressSurface) -> Vec<crate::model::SurfacePoint> {
    let mut pts = surface.points.clone();
    pts.sort_by_key(|p| p.pos);
    pts
}

/// Doubled-doubled y coordinate of the mirror line (2·y2 of the line), if
/// mirror reduction is requested and valid.
fn mirror_line(mask: &PecMask, surface: &StressSurface, opts: &AssembleOptions) -> Result<Option<i64>> {
    if !opts.mirror_y {
        return Ok(None);
    }
    if mask.dim() != 2 {
        return Err(Error::Parameter("mirror reduction needs a 2D grid".into()));
    }
    let ymin = surface.points.iter().map(|p| p.pos.y2).min().unwrap_or(0);
    let ymax = surface.points.iter().map(|p| p.pos.y2).max().unwrap_or(0);
    let line = ymin + ymax;
    if line != 2 * mask.ny as i64 {
        return Err(Error::Parameter("surface is not centred on the domain mid-line".into()));
    }
    if mask.mirrored(Axis::Y) != *mask {
        return Err(Error::Parameter("geometry is not mirror-symmetric in y".into()));
    }
    Ok(Some(line))
}

/// Runs every simulation in `runs` (in parallel when `jobs > 1`), returning
/// results in input order.
pub fn execute_runs(mask: &PecMask, runs: &[RunSpec], params: &FdtdParams, jobs: usize) -> Result<Vec<ResponseSet>> {
    let one = |r: &RunSpec| -> Result<ResponseSet> {
        let probes: Vec<Probe> = r.record.iter().map(|&c| Probe { pos: r.pos, component: c }).collect();
        run_dipole_response(mask, DipoleSource::new(r.pos, r.source), &probes, params)
    };
    let results: Vec<Result<ResponseSet>> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
        pool.install(|| runs.par_iter().map(one).collect())
    } else {
        runs.iter().map(one).collect()
    };
    results.into_iter().collect()
}

/// Builds Γ_E, Γ_H for force component `dir` on the body enclosed by `surface`.
pub fn assemble_stress_trace(
    mask: &PecMask,
    surface: &StressSurface,
    dir: Axis,
    params: &FdtdParams,
    opts: &AssembleOptions,
) -> Result<StressTrace> {
    surface.check_against(mask)?;
    let runs = plan_runs(mask, surface, dir, opts)?;
    let responses = execute_runs(mask, &runs, params, opts.jobs)?;
    combine(mask, surface, dir, params.dt, &runs, &responses, opts)
}

struct Accum {
    series: Vec<f64>,
    dc: f64,
}

impl Accum {
    fn add(&mut self, coef: f64, s: &[f64], dc: f64) {
        if self.series.len() < s.len() {
            self.series.resize(s.len(), 0.0);
        }
        for (a, v) in self.series.iter_mut().zip(s) {
            *a += coef * v;
        }
        self.dc += coef * dc;
    }
}

/// Combines per-run responses into a trace (exposed for tests and dumps).
pub fn combine(
    mask: &PecMask,
    surface: &StressSurface,
    dir: Axis,
    dt: f64,
    runs: &[RunSpec],
    responses: &[ResponseSet],
    opts: &AssembleOptions,
) -> Result<StressTrace> {
    let pol = surface.polarization;
    let mirror = mirror_line(mask, surface, opts)?;
    // (pos, source, record) → (series, tail-corrected integral)
    let mut table: BTreeMap<(Pos, Component, Component), (&[f64], f64)> = BTreeMap::new();
    for (r, resp) in runs.iter().zip(responses) {
        for (p, s) in resp.probes.iter().zip(&resp.series) {
            table.insert((r.pos, r.source, p.component), (s.as_slice(), integrate_with_tail(s, dt)));
        }
    }
    let mut acc_e = Accum { series: Vec::new(), dc: 0.0 };
    let mut acc_h = Accum { series: Vec::new(), dc: 0.0 };
    for p in canonical_points(surface) {
        // mirrored points reuse their partner's responses; cross terms flip sign
        let (key_pos, cross_sign) = match mirror {
            Some(line) if 2 * p.pos.y2 > line => (Pos::new(p.pos.x2, line - p.pos.y2), -1.0),
            _ => (p.pos, 1.0),
        };
        let get = |src: Component, rec: Component| -> Result<(&[f64], f64)> {
            table.get(&(key_pos, src, rec)).copied().ok_or_else(|| {
                Error::Parameter(format!("missing response {}→{}", src.name(), rec.name()))
            })
        };
        for f in &p.faces {
            let sw = f.normal.sign as f64 * f.weight;
            if f.normal.axis == dir {
                for &c in pol.components() {
                    let coef = if c.axis() == Some(dir) { 0.5 } else { -0.5 };
                    let (s, dc) = get(c, c)?;
                    let acc = if c.is_electric() { &mut acc_e } else { &mut acc_h };
                    acc.add(sw * coef, s, dc);
                }
            } else {
                let ip = in_plane(pol);
                let a = component_along(&ip, dir).expect("checked in plan");
                let b = component_along(&ip, f.normal.axis).expect("checked in plan");
                let (s1, d1) = get(a, b)?;
                let (s2, d2) = get(b, a)?;
                let acc = if a.is_electric() { &mut acc_e } else { &mut acc_h };
                acc.add(0.5 * sw * cross_sign, s1, d1);
                acc.add(0.5 * sw * cross_sign, s2, d2);
            }
        }
    }
    Ok(StressTrace {
        dt,
        gamma_e: acc_e.series,
        gamma_h: acc_h.series,
        dc_e: acc_e.dc,
        dc_h: acc_h.dc,
        polarization: pol,
        direction: dir,
        runs: runs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_parallel_plates_1d, build_piston_2d, rasterize};

    #[test]
    fn one_d_uses_four_runs() {
        let g = build_parallel_plates_1d(8, 2, 8).unwrap();
        let m = rasterize(&g);
        let s = g.stress_surface(Polarization::OneD).unwrap();
        let runs = plan_runs(&m, &s, Axis::X, &AssembleOptions::default()).unwrap();
        assert_eq!(runs.len(), 4);
    }

    #[test]
    fn piston_run_count() {
        let g = build_piston_2d(8, 4, Some(16), 4).unwrap();
        let m = rasterize(&g);
        let s = g.stress_surface(Polarization::Tm).unwrap();
        let runs = plan_runs(&m, &s, Axis::X, &AssembleOptions::default()).unwrap();
        let xf = s.points.iter().filter(|p| p.faces.iter().any(|f| f.normal.axis == Axis::X)).count();
        let yonly = s.points.len() - xf;
        assert_eq!(runs.len(), 3 * xf + 2 * yonly);
        let half = plan_runs(&m, &s, Axis::X, &AssembleOptions { jobs: 1, mirror_y: true }).unwrap();
        assert!(half.len() < runs.len() / 2 + 8);
    }
}
