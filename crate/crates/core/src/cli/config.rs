//! Flat `section.key = value` configuration.
//!
//! Lines are `section.key = value`; `#` starts a comment; list values are
//! comma separated. Sections: `geometry`, `physics`, `numerics`, `outputs`.
//! Every key is listed in [`KEYS`]; anything else is an error.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::model::{build_parallel_plates_1d, build_piston_2d, courant_dt, Geometry, PistonBody, Polarization};

/// Every accepted key.
pub const KEYS: &[&str] = &[
    "geometry.kind",
    "geometry.a",
    "geometry.s",
    "geometry.d",
    "geometry.wall",
    "geometry.pad",
    "geometry.absorber",
    "geometry.absorber_alpha",
    "geometry.surface_offset",
    "geometry.body",
    "physics.tau",
    "physics.sigma_a",
    "physics.polarizations",
    "numerics.resolution",
    "numerics.dt",
    "numerics.max_steps",
    "numerics.tail_tol",
    "numerics.oversample",
    "numerics.weight_steps",
    "numerics.mirror",
    "numerics.quad_nodes",
    "numerics.matsubara_n_max",
    "numerics.matsubara_tol",
    "outputs.dir",
    "outputs.methods",
    "outputs.oracle",
    "outputs.naive_zero_bin",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryChoice {
    Plates1d,
    Piston2d,
}

impl GeometryChoice {
    pub fn name(self) -> &'static str {
        match self {
            GeometryChoice::Plates1d => "plates_1d",
            GeometryChoice::Piston2d => "piston_2d",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    TimeDomain,
    Reference,
    Lifshitz,
    NaiveControl,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::TimeDomain => "timedomain",
            Method::Reference => "reference",
            Method::Lifshitz => "lifshitz",
            Method::NaiveControl => "naive_control",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Oracle {
    None,
    Reference,
    Lifshitz,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub kind: GeometryChoice,
    /// Gap sweep (cells at resolution 1).
    pub a: Vec<usize>,
    /// Block side (piston).
    pub s: usize,
    /// Sidewall separations (piston); `None` = no sidewalls.
    pub d: Vec<Option<usize>>,
    pub wall: usize,
    /// `None` = the default (a in 1D, 16 in 2D).
    pub pad: Option<usize>,
    pub absorber: usize,
    /// `None` = the default (0 in 1D, 0.1 in 2D).
    pub absorber_alpha: Option<f64>,
    pub surface_offset: Option<usize>,
    pub body: PistonBody,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsConfig {
    pub tau: Vec<f64>,
    pub sigma_a: Vec<f64>,
    pub polarizations: Vec<Polarization>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericsConfig {
    /// Grid refinement factors; every length is multiplied by r.
    pub resolution: Vec<usize>,
    pub dt: f64,
    pub max_steps: usize,
    /// `None` = the default (1e-6 in 1D, 1e-8 in 2D).
    pub tail_tol: Option<f64>,
    pub oversample: usize,
    pub weight_steps: usize,
    pub mirror: bool,
    pub quad_nodes: usize,
    pub matsubara_n_max: usize,
    pub matsubara_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputsConfig {
    pub dir: PathBuf,
    pub methods: Vec<Method>,
    pub oracle: Oracle,
    pub naive_zero_bin: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub physics: PhysicsConfig,
    pub numerics: NumericsConfig,
    pub outputs: OutputsConfig,
}

/// One geometry point of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// Base gap (resolution 1).
    pub a: usize,
    pub d: Option<usize>,
    pub resolution: usize,
    pub sigma_a: f64,
    pub geometry: Geometry,
}

impl SweepPoint {
    /// Gap in grid cells.
    pub fn a_cells(&self) -> usize {
        self.a * self.resolution
    }
    pub fn d_cells(&self) -> Option<usize> {
        self.d.map(|d| d * self.resolution)
    }
    /// Contour conductivity in grid units.
    pub fn sigma(&self) -> f64 {
        self.sigma_a / self.a_cells() as f64
    }
}

impl RunConfig {
    pub fn dim(&self) -> usize {
        match self.geometry.kind {
            GeometryChoice::Plates1d => 1,
            GeometryChoice::Piston2d => 2,
        }
    }

    pub fn tail_tol(&self) -> f64 {
        self.numerics.tail_tol.unwrap_or(if self.dim() == 1 { 1e-6 } else { 1e-8 })
    }

    pub fn absorber_alpha(&self) -> f64 {
        self.geometry.absorber_alpha.unwrap_or(if self.dim() == 1 { 0.0 } else { 0.1 })
    }

    /// Polarizations actually simulated.
    pub fn polarizations(&self) -> Vec<Polarization> {
        if self.dim() == 1 {
            vec![Polarization::OneD]
        } else {
            self.physics.polarizations.clone()
        }
    }

    /// Builds one geometry.
    pub fn build_geometry(&self, a: usize, d: Option<usize>, r: usize) -> Result<Geometry> {
        let g = &self.geometry;
        let geom = match g.kind {
            GeometryChoice::Plates1d => {
                let pad = g.pad.unwrap_or(a);
                build_parallel_plates_1d(a * r, g.wall * r, pad * r)?
            }
            GeometryChoice::Piston2d => {
                let pad = g.pad.unwrap_or(16);
                build_piston_2d(g.s * r, a * r, d.map(|d| d * r), pad * r)?
            }
        };
        let mut geom = geom.with_absorber(g.absorber * r)?.with_absorber_alpha(self.absorber_alpha())?;
        if g.kind == GeometryChoice::Piston2d && g.body != PistonBody::Right {
            geom = geom.with_body(g.body)?;
        }
        if let Some(off) = g.surface_offset {
            geom = geom.with_surface_offset(off * r)?;
        }
        Ok(geom)
    }

    /// Geometry sweep in canonical order: a, d, resolution, σ·a.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let ds: Vec<Option<usize>> = match self.geometry.kind {
            GeometryChoice::Plates1d => vec![None],
            GeometryChoice::Piston2d => self.geometry.d.clone(),
        };
        let mut out = Vec::new();
        for &a in &self.geometry.a {
            for &d in &ds {
                for &r in &self.numerics.resolution {
                    let geometry = self.build_geometry(a, d, r)?;
                    for &sigma_a in &self.physics.sigma_a {
                        out.push(SweepPoint { a, d, resolution: r, sigma_a, geometry: geometry.clone() });
                    }
                }
            }
        }
        Ok(out)
    }

    fn validate(&self) -> Result<()> {
        let v = |m: String| Err(Error::ConfigValidation(m));
        let dim = self.dim();
        if self.geometry.a.is_empty() {
            return v("geometry.a must not be empty".into());
        }
        if self.physics.tau.is_empty() {
            return v("physics.tau must not be empty".into());
        }
        if self.physics.sigma_a.is_empty() {
            return v("physics.sigma_a must not be empty".into());
        }
        if self.numerics.resolution.is_empty() || self.numerics.resolution.contains(&0) {
            return v("numerics.resolution must be a non-empty list of positive integers".into());
        }
        if self.outputs.methods.is_empty() {
            return v("outputs.methods must not be empty".into());
        }
        for &t in &self.physics.tau {
            if !(t >= 0.0) || !t.is_finite() {
                return v(format!("tau must be finite and >= 0, got {t}"));
            }
        }
        for &s in &self.physics.sigma_a {
            if !(s >= 0.0) || !s.is_finite() {
                return v(format!("sigma_a must be finite and >= 0, got {s}"));
            }
        }
        let hot = self.physics.tau.iter().any(|&t| t > 0.0);
        if hot && self.physics.sigma_a.iter().any(|&s| s == 0.0) {
            return Err(Error::ZeroModeRequiresSigma);
        }
        let td = self.outputs.methods.contains(&Method::TimeDomain) || self.outputs.methods.contains(&Method::NaiveControl);
        if td && self.physics.sigma_a.iter().any(|&s| s == 0.0) {
            return v("time-domain runs require sigma_a > 0 for the fields to decay".into());
        }
        courant_dt(self.numerics.dt, dim)?;
        if self.numerics.max_steps < 16 {
            return v("numerics.max_steps must be at least 16".into());
        }
        let tol = self.tail_tol();
        if !(tol > 0.0 && tol < 1.0) {
            return v(format!("numerics.tail_tol must lie in (0, 1), got {tol}"));
        }
        if self.numerics.oversample == 0 {
            return v("numerics.oversample must be positive".into());
        }
        if self.numerics.weight_steps < 2 {
            return v("numerics.weight_steps must be at least 2".into());
        }
        if self.numerics.quad_nodes == 0 || self.numerics.matsubara_n_max == 0 {
            return v("numerics.quad_nodes and numerics.matsubara_n_max must be positive".into());
        }
        if !(self.numerics.matsubara_tol > 0.0) {
            return v("numerics.matsubara_tol must be positive".into());
        }
        match self.geometry.kind {
            GeometryChoice::Plates1d => {
                if !self.physics.polarizations.is_empty() {
                    return v("physics.polarizations only applies to 2D geometries".into());
                }
                if self.geometry.d != [None] || self.geometry.body != PistonBody::Right {
                    return v("geometry.d and geometry.body only apply to pistons".into());
                }
            }
            GeometryChoice::Piston2d => {
                if self.physics.polarizations.is_empty() {
                    return v("physics.polarizations must not be empty".into());
                }
                if self.geometry.d.is_empty() {
                    return v("geometry.d must not be empty".into());
                }
                if self.outputs.methods.contains(&Method::Lifshitz) || self.outputs.oracle == Oracle::Lifshitz {
                    return v("the lifshitz formula only applies to 1D plates".into());
                }
            }
        }
        if self.outputs.methods.contains(&Method::NaiveControl) && !self.physics.tau.iter().any(|&t| t > 0.0) {
            return v("naive_control needs at least one tau > 0".into());
        }
        self.points()?;
        Ok(())
    }
}

fn syntax(line: usize, msg: impl Into<String>) -> Error {
    Error::ConfigSyntax { line, msg: msg.into() }
}

fn list(value: &str) -> Vec<&str> {
    value.split(',').map(str::trim).collect()
}

fn parse_usize(line: usize, s: &str) -> Result<usize> {
    s.parse().map_err(|_| syntax(line, format!("expected a non-negative integer, got `{s}`")))
}

fn parse_f64(line: usize, s: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| syntax(line, format!("expected a number, got `{s}`")))?;
    if !v.is_finite() {
        return Err(syntax(line, format!("expected a finite number, got `{s}`")));
    }
    Ok(v)
}

/// Number, or a multiple/fraction of pi: `pi`, `2pi`, `0.5*pi`, `pi/2`.
pub fn parse_tau(line: usize, s: &str) -> Result<f64> {
    let t = s.replace(' ', "").to_ascii_lowercase();
    let Some(k) = t.find("pi") else {
        return parse_f64(line, s);
    };
    let (pre, post) = (&t[..k], &t[k + 2..]);
    let pre = pre.strip_suffix('*').unwrap_or(pre);
    let coef = if pre.is_empty() { 1.0 } else { parse_f64(line, pre)? };
    let div = match post.strip_prefix('/') {
        Some(q) => parse_f64(line, q)?,
        None if post.is_empty() => 1.0,
        None => return Err(syntax(line, format!("cannot parse `{s}`"))),
    };
    if div == 0.0 {
        return Err(syntax(line, "division by zero"));
    }
    Ok(coef * PI / div)
}

fn parse_bool(line: usize, s: &str) -> Result<bool> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(syntax(line, format!("expected true or false, got `{s}`"))),
    }
}

fn each<T>(line: usize, v: &str, f: impl Fn(usize, &str) -> Result<T>) -> Result<Vec<T>> {
    list(v).into_iter().map(|x| f(line, x)).collect()
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(syntax(line, "expected `section.key = value`"));
        };
        let (key, value) = (key.trim(), value.trim());
        if !key.contains('.') {
            return Err(syntax(line, format!("key `{key}` has no section")));
        }
        let Some(&known) = KEYS.iter().find(|&&k| k == key) else {
            return Err(Error::UnknownKey { line, key: key.to_string() });
        };
        if value.is_empty() {
            return Err(syntax(line, format!("empty value for `{key}`")));
        }
        if let Some((first, _)) = entries.insert(known, (line, value)) {
            return Err(syntax(line, format!("duplicate key `{key}` (first set on line {first})")));
        }
    }
    let get = |k: &str| entries.get(k).copied();

    let kind = match get("geometry.kind") {
        None => return Err(Error::ConfigValidation("geometry.kind is required".into())),
        Some((_, "plates_1d")) => GeometryChoice::Plates1d,
        Some((_, "piston_2d")) => GeometryChoice::Piston2d,
        Some((l, v)) => return Err(syntax(l, format!("geometry.kind must be plates_1d or piston_2d, got `{v}`"))),
    };
    let a = match get("geometry.a") {
        Some((l, v)) => each(l, v, parse_usize)?,
        None => return Err(Error::ConfigValidation("geometry.a is required".into())),
    };
    let usize_or = |k: &str, d: usize| -> Result<usize> { get(k).map(|(l, v)| parse_usize(l, v)).unwrap_or(Ok(d)) };
    let f64_or = |k: &str, d: f64| -> Result<f64> { get(k).map(|(l, v)| parse_f64(l, v)).unwrap_or(Ok(d)) };
    let s = match (kind, get("geometry.s")) {
        (_, Some((l, v))) if kind == GeometryChoice::Plates1d => {
            return Err(syntax(l, format!("geometry.s only applies to pistons (got `{v}`)")))
        }
        (_, Some((l, v))) => parse_usize(l, v)?,
        (GeometryChoice::Piston2d, None) => return Err(Error::ConfigValidation("geometry.s is required for pistons".into())),
        (GeometryChoice::Plates1d, None) => 0,
    };
    let d = match get("geometry.d") {
        Some((l, v)) => each(l, v, |l, x| match x {
            "inf" | "none" => Ok(None),
            _ => parse_usize(l, x).map(Some),
        })?,
        None => vec![None],
    };
    let body = match get("geometry.body") {
        None | Some((_, "right")) => PistonBody::Right,
        Some((_, "left")) => PistonBody::Left,
        Some((l, v)) => return Err(syntax(l, format!("geometry.body must be left or right, got `{v}`"))),
    };
    let geometry = GeometryConfig {
        kind,
        a,
        s,
        d,
        wall: usize_or("geometry.wall", 2)?,
        pad: get("geometry.pad").map(|(l, v)| parse_usize(l, v)).transpose()?,
        absorber: usize_or("geometry.absorber", 16)?,
        absorber_alpha: get("geometry.absorber_alpha").map(|(l, v)| parse_f64(l, v)).transpose()?,
        surface_offset: get("geometry.surface_offset").map(|(l, v)| parse_usize(l, v)).transpose()?,
        body,
    };

    let tau = match get("physics.tau") {
        Some((l, v)) => each(l, v, parse_tau)?,
        None => return Err(Error::ConfigValidation("physics.tau is required".into())),
    };
    let sigma_a = match get("physics.sigma_a") {
        Some((l, v)) => each(l, v, parse_f64)?,
        None => vec![1.0],
    };
    let polarizations = match get("physics.polarizations") {
        Some((l, v)) => each(l, v, |l, x| match x {
            "te" | "TE" => Ok(Polarization::Te),
            "tm" | "TM" => Ok(Polarization::Tm),
            _ => Err(syntax(l, format!("polarization must be te or tm, got `{x}`"))),
        })?,
        None if kind == GeometryChoice::Piston2d => vec![Polarization::Te, Polarization::Tm],
        None => Vec::new(),
    };
    let physics = PhysicsConfig { tau, sigma_a, polarizations };

    let numerics = NumericsConfig {
        resolution: match get("numerics.resolution") {
            Some((l, v)) => each(l, v, parse_usize)?,
            None => vec![1],
        },
        dt: f64_or("numerics.dt", 0.5)?,
        max_steps: usize_or("numerics.max_steps", 4_000_000)?,
        tail_tol: get("numerics.tail_tol").map(|(l, v)| parse_f64(l, v)).transpose()?,
        oversample: usize_or("numerics.oversample", 8)?,
        weight_steps: usize_or("numerics.weight_steps", 4096)?,
        mirror: get("numerics.mirror").map(|(l, v)| parse_bool(l, v)).transpose()?.unwrap_or(true),
        quad_nodes: usize_or("numerics.quad_nodes", 64)?,
        matsubara_n_max: usize_or("numerics.matsubara_n_max", 10_000)?,
        matsubara_tol: f64_or("numerics.matsubara_tol", 1e-10)?,
    };

    let methods = match get("outputs.methods") {
        Some((l, v)) => {
            let mut m = each(l, v, |l, x| match x {
                "timedomain" => Ok(Method::TimeDomain),
                "reference" => Ok(Method::Reference),
                "lifshitz" => Ok(Method::Lifshitz),
                "naive_control" => Ok(Method::NaiveControl),
                _ => Err(syntax(l, format!("unknown method `{x}`"))),
            })?;
            m.sort();
            m.dedup();
            m
        }
        None => vec![Method::TimeDomain],
    };
    let oracle = match get("outputs.oracle") {
        None | Some((_, "none")) => Oracle::None,
        Some((_, "reference")) => Oracle::Reference,
        Some((_, "lifshitz")) => Oracle::Lifshitz,
        Some((l, v)) => return Err(syntax(l, format!("outputs.oracle must be none, reference or lifshitz, got `{v}`"))),
    };
    let outputs = OutputsConfig {
        dir: PathBuf::from(get("outputs.dir").map(|(_, v)| v).unwrap_or(".")),
        methods,
        oracle,
        naive_zero_bin: match get("outputs.naive_zero_bin") {
            Some((l, v)) => each(l, v, parse_f64)?,
            None => vec![0.0],
        },
    };

    let cfg = RunConfig { geometry, physics, numerics, outputs };
    cfg.validate()?;
    Ok(cfg)
}
