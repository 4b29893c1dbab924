//! Geometry, rasterization and run parameters.
//!
//! Staggering convention (Yee), positions in doubled integer coordinates so
//! that half-integer grid locations are exact:
//!
//! | component | 2D location (x, y)   | parity (x2, y2) |
//! |-----------|----------------------|-----------------|
//! | E_z       | node (i, j)          | (even, even)    |
//! | H_x       | (i, j+½)             | (even, odd)     |
//! | H_y       | (i+½, j)             | (odd, even)     |
//! | H_z       | cell centre (i+½, j+½) | (odd, odd)    |
//! | E_x       | (i+½, j)             | (odd, even)     |
//! | E_y       | (i, j+½)             | (even, odd)     |
//!
//! In 1D only x matters: E_y sits on nodes and H_z on cell centres.
//! Every component is stored in an array indexed by the integer part of its
//! location, i.e. `(x2 / 2, y2 / 2)`.
//!
//! Masking: a tangential-E sample is masked when it touches any conductor
//! cell; an H sample is masked when every cell it touches is conductor.
//! Cells outside the grid count as conductor.

use crate::error::{Error, Result};

/// Contour parameters: artificial conductivity and spectrum grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSpec {
    pub sigma: f64,
    pub xi_max: f64,
    pub n_xi: usize,
}

impl ContourSpec {
    pub fn new(sigma: f64, xi_max: f64, n_xi: usize) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::Parameter(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        if !(xi_max > 0.0) || !xi_max.is_finite() {
            return Err(Error::Parameter(format!("xi_max must be positive, got {xi_max}")));
        }
        if n_xi < 2 {
            return Err(Error::Parameter("n_xi must be at least 2".into()));
        }
        Ok(Self { sigma, xi_max, n_xi })
    }

    /// Checks the cutoff against the Nyquist frequency of a time grid.
    pub fn check_nyquist(&self, dt: f64) -> Result<()> {
        let nyq = std::f64::consts::PI / dt;
        if self.xi_max > nyq * (1.0 + 1e-12) {
            return Err(Error::Parameter(format!(
                "spectrum cutoff {} above Nyquist {}",
                self.xi_max, nyq
            )));
        }
        Ok(())
    }

    /// Rejects the combination of a positive temperature with σ = 0.
    pub fn check_temperature(&self, temp: &TemperatureSpec) -> Result<()> {
        if temp.tau > 0.0 && self.sigma <= 0.0 {
            return Err(Error::ZeroModeRequiresSigma);
        }
        Ok(())
    }
}

/// Dimensionless temperature τ = T·a together with the length scale a.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureSpec {
    pub tau: f64,
    pub length: f64,
}

impl TemperatureSpec {
    pub fn new(tau: f64, length: f64) -> Result<Self> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::Parameter(format!("tau must be finite and >= 0, got {tau}")));
        }
        if !(length > 0.0) {
            return Err(Error::Parameter(format!("length scale must be positive, got {length}")));
        }
        Ok(Self { tau, length })
    }

    pub fn zero(length: f64) -> Self {
        Self { tau: 0.0, length }
    }

    /// T in grid units.
    pub fn temperature(&self) -> f64 {
        self.tau / self.length
    }

    /// ω_T = 2T.
    pub fn omega_t(&self) -> f64 {
        2.0 * self.tau / self.length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Normal {
    pub axis: Axis,
    /// +1 or -1
    pub sign: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    Ex,
    Ey,
    Ez,
    Hx,
    Hy,
    Hz,
}

impl Component {
    pub fn is_electric(self) -> bool {
        matches!(self, Component::Ex | Component::Ey | Component::Ez)
    }

    /// In-plane axis of the component, `None` for z.
    pub fn axis(self) -> Option<Axis> {
        match self {
            Component::Ex | Component::Hx => Some(Axis::X),
            Component::Ey | Component::Hy => Some(Axis::Y),
            Component::Ez | Component::Hz => None,
        }
    }

    /// Parity of the doubled coordinates where the component lives (2D).
    pub fn parity(self) -> (i64, i64) {
        match self {
            Component::Ez => (0, 0),
            Component::Hx | Component::Ey => (0, 1),
            Component::Hy | Component::Ex => (1, 0),
            Component::Hz => (1, 1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Ex => "Ex",
            Component::Ey => "Ey",
            Component::Ez => "Ez",
            Component::Hx => "Hx",
            Component::Hy => "Hy",
            Component::Hz => "Hz",
        }
    }
}

/// Field decomposition. `OneD` is the 1D (E_y, H_z) system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarization {
    OneD,
    Tm,
    Te,
}

impl Polarization {
    pub fn components(self) -> &'static [Component] {
        match self {
            Polarization::OneD => &[Component::Ey, Component::Hz],
            Polarization::Tm => &[Component::Ez, Component::Hx, Component::Hy],
            Polarization::Te => &[Component::Hz, Component::Ex, Component::Ey],
        }
    }

    pub fn has(self, c: Component) -> bool {
        self.components().contains(&c)
    }

    pub fn name(self) -> &'static str {
        match self {
            Polarization::OneD => "1d",
            Polarization::Tm => "TM",
            Polarization::Te => "TE",
        }
    }
}

/// Location in doubled grid coordinates (`x2 = 2x`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pos {
    pub x2: i64,
    pub y2: i64,
}

impl Pos {
    pub fn new(x2: i64, y2: i64) -> Self {
        Self { x2, y2 }
    }
    pub fn node(i: i64, j: i64) -> Self {
        Self { x2: 2 * i, y2: 2 * j }
    }
}

/// Axis-aligned block of conductor cells, half-open `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl Rect {
    pub fn new(x0: usize, x1: usize, y0: usize, y1: usize) -> Self {
        Self { x0, x1, y0, y1 }
    }
    pub fn contains(&self, i: usize, j: usize) -> bool {
        i >= self.x0 && i < self.x1 && j >= self.y0 && j < self.y1
    }
    fn overlaps(&self, o: &Rect) -> bool {
        self.x0 < o.x1 && o.x0 < self.x1 && self.y0 < o.y1 && o.y0 < self.y1
    }
    pub fn area(&self) -> usize {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Which piston block the stress surface encloses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PistonBody {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryKind {
    ParallelPlates1d { a: usize, wall: usize, pad: usize },
    Piston2d { s: usize, a: usize, d: Option<usize>, pad: usize, body: PistonBody },
    CustomRectangles2d,
}

/// A rasterizable geometry plus the body whose force is measured.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub kind: GeometryKind,
    /// Cells along x.
    pub nx: usize,
    /// Cells along y (0 in 1D).
    pub ny: usize,
    /// All conductor blocks, including the outer walls.
    pub conductors: Vec<Rect>,
    /// Index into `conductors` of the body enclosed by the stress surface.
    pub body: usize,
    /// Absorber thickness along x (cells), placed just inside the outer walls.
    pub absorber_x: usize,
    /// Absorber thickness along y.
    pub absorber_y: usize,
    /// Requested surface offset from the body (cells).
    pub surface_offset: usize,
    /// Reported force unit length (a).
    pub length_scale: f64,
    /// Frequency shift α of the absorber stretch 1 + σ_a/(α − iω).
    pub absorber_alpha: f64,
}

/// Design reflection coefficient of the absorber profile.
const ABSORBER_REFLECTION: f64 = 1e-8;
/// Polynomial grading order of the absorber profile.
const ABSORBER_ORDER: i32 = 3;

impl Geometry {
    pub fn dim(&self) -> usize {
        if self.ny == 0 {
            1
        } else {
            2
        }
    }

    pub fn body_rect(&self) -> Rect {
        self.conductors[self.body]
    }

    /// Sidewall separation for pistons (`None` if open or not a piston).
    pub fn piston_d(&self) -> Option<usize> {
        match self.kind {
            GeometryKind::Piston2d { d, .. } => d,
            _ => None,
        }
    }

    pub fn gap(&self) -> Option<usize> {
        match self.kind {
            GeometryKind::ParallelPlates1d { a, .. } | GeometryKind::Piston2d { a, .. } => Some(a),
            GeometryKind::CustomRectangles2d => None,
        }
    }

    pub fn with_absorber(mut self, cells: usize) -> Result<Self> {
        match self.kind.clone() {
            GeometryKind::ParallelPlates1d { a, wall, pad } => {
                let alpha = self.absorber_alpha;
                self = build_layout_1d(a, wall, pad, cells)?;
                self.absorber_alpha = alpha;
            }
            GeometryKind::Piston2d { s, a, d, pad, body } => {
                let alpha = self.absorber_alpha;
                self = build_layout_piston(s, a, d, pad, cells, body, self.surface_offset)?;
                self.absorber_alpha = alpha;
            }
            GeometryKind::CustomRectangles2d => {
                return Err(Error::Geometry(
                    "absorber layers are only supported for the built-in layouts".into(),
                ));
            }
        }
        Ok(self)
    }

    pub fn with_body(mut self, which: PistonBody) -> Result<Self> {
        match self.kind.clone() {
            GeometryKind::Piston2d { s, a, d, pad, .. } => {
                let alpha = self.absorber_alpha;
                self = build_layout_piston(s, a, d, pad, self.absorber_x, which, self.surface_offset)?;
                self.absorber_alpha = alpha;
                Ok(self)
            }
            _ => Err(Error::Geometry("body selection only applies to pistons".into())),
        }
    }

    pub fn with_absorber_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::Geometry(format!("absorber frequency shift must be finite and >= 0, got {alpha}")));
        }
        self.absorber_alpha = alpha;
        Ok(self)
    }

    pub fn with_surface_offset(mut self, offset: usize) -> Result<Self> {
        if offset < 1 {
            return Err(Error::Geometry("surface offset must be at least 1 cell".into()));
        }
        self.surface_offset = offset;
        Ok(self)
    }

    /// Absorber conductivity σ_a at continuous coordinate `x` along `axis`.
    pub fn absorber_profile(&self, axis: Axis, x: f64) -> f64 {
        let (n, w) = match axis {
            Axis::X => (self.nx, self.absorber_x),
            Axis::Y => (self.ny, self.absorber_y),
        };
        if w == 0 || x < 0.0 || x > n as f64 {
            return 0.0;
        }
        let wf = w as f64;
        let inner_lo = 1.0 + wf;
        let inner_hi = n as f64 - 1.0 - wf;
        let depth = if x < inner_lo {
            inner_lo - x
        } else if x > inner_hi {
            x - inner_hi
        } else {
            return 0.0;
        };
        let depth = depth.min(wf);
        let smax = (ABSORBER_ORDER as f64 + 1.0) * (1.0 / ABSORBER_REFLECTION).ln() / (2.0 * wf);
        smax * (depth / wf).powi(ABSORBER_ORDER)
    }

    /// Reflection of the geometry across the domain's mid-line along `axis`.
    pub fn mirrored(&self, axis: Axis) -> Geometry {
        let mut g = self.clone();
        for r in g.conductors.iter_mut() {
            match axis {
                Axis::X => {
                    let (x0, x1) = (self.nx - r.x1, self.nx - r.x0);
                    r.x0 = x0;
                    r.x1 = x1;
                }
                Axis::Y => {
                    let (y0, y1) = (self.ny - r.y1, self.ny - r.y0);
                    r.y0 = y0;
                    r.y1 = y1;
                }
            }
        }
        g
    }

    /// Conductor occupancy of cell (i, j); out-of-range cells are conductor.
    pub fn occupied(&self, i: i64, j: i64) -> bool {
        let ny = self.ny.max(1) as i64;
        if i < 0 || j < 0 || i >= self.nx as i64 || j >= ny {
            return true;
        }
        self.conductors.iter().any(|r| r.contains(i as usize, j as usize))
    }

    /// Stress surface around the body for the given polarization.
    pub fn stress_surface(&self, pol: Polarization) -> Result<StressSurface> {
        match (self.dim(), pol) {
            (1, Polarization::OneD) => self.surface_1d(),
            (2, Polarization::Tm) | (2, Polarization::Te) => self.surface_2d(pol),
            _ => Err(Error::Parameter(format!(
                "polarization {} not available in {}D",
                pol.name(),
                self.dim()
            ))),
        }
    }

    fn surface_1d(&self) -> Result<StressSurface> {
        let (a, r) = match self.kind {
            GeometryKind::ParallelPlates1d { a, .. } => (a, self.body_rect()),
            _ => return Err(Error::Geometry("1D surface requires parallel plates".into())),
        };
        let h = a.div_ceil(2) as i64;
        let gap = r.x0 as i64 - h;
        let mirror = r.x1 as i64 + h;
        Ok(StressSurface {
            polarization: Polarization::OneD,
            points: vec![
                SurfacePoint {
                    pos: Pos::node(gap, 0),
                    faces: vec![Face { normal: Normal { axis: Axis::X, sign: -1 }, weight: 1.0 }],
                },
                SurfacePoint {
                    pos: Pos::node(mirror, 0),
                    faces: vec![Face { normal: Normal { axis: Axis::X, sign: 1 }, weight: 1.0 }],
                },
            ],
        })
    }

    /// Offsets (TM node lines, in cells) of the x- and y-faces of the surface.
    /// A face is pulled closer to the body when the clearance to the next
    /// conductor is too small to keep both polarizations' lines apart from it.
    fn surface_offsets(&self) -> (i64, i64) {
        let b = self.body_rect();
        let off = self.surface_offset as i64;
        let clear = |axis: Axis| -> i64 {
            // smallest vacuum run from the body to the next conductor along axis
            let mut best = i64::MAX;
            let (lo, hi, span_lo, span_hi) = match axis {
                Axis::X => (b.x0 as i64, b.x1 as i64, b.y0 as i64, b.y1 as i64),
                Axis::Y => (b.y0 as i64, b.y1 as i64, b.x0 as i64, b.x1 as i64),
            };
            let limit = match axis {
                Axis::X => self.nx as i64,
                Axis::Y => self.ny as i64,
            };
            for t in span_lo..span_hi {
                for (start, step) in [(lo - 1, -1i64), (hi, 1i64)] {
                    let mut k = start;
                    let mut run = 0;
                    while k >= 0 && k < limit {
                        let occ = match axis {
                            Axis::X => self.occupied(k, t),
                            Axis::Y => self.occupied(t, k),
                        };
                        if occ {
                            break;
                        }
                        run += 1;
                        k += step;
                    }
                    best = best.min(run);
                }
            }
            best
        };
        let ox = off.min(clear(Axis::X) - 1).max(1);
        let oy = off.min(clear(Axis::Y) - 1).max(1);
        (ox, oy)
    }

    fn surface_2d(&self, pol: Polarization) -> Result<StressSurface> {
        let b = self.body_rect();
        let (ox, oy) = self.surface_offsets();
        // TM lines on nodes, TE lines on cell centres half a cell further out
        let shift = if pol == Polarization::Te { 1 } else { 0 };
        let x0 = 2 * (b.x0 as i64 - ox) - shift;
        let x1 = 2 * (b.x1 as i64 + ox) + shift;
        let y0 = 2 * (b.y0 as i64 - oy) - shift;
        let y1 = 2 * (b.y1 as i64 + oy) + shift;
        let mut points: Vec<SurfacePoint> = Vec::new();
        let push = |pos: Pos, normal: Normal, weight: f64, points: &mut Vec<SurfacePoint>| {
            if let Some(p) = points.iter_mut().find(|p| p.pos == pos) {
                p.faces.push(Face { normal, weight });
            } else {
                points.push(SurfacePoint { pos, faces: vec![Face { normal, weight }] });
            }
        };
        // counter-clockwise: bottom (→), right (↑), top (←), left (↓)
        let faces: [(Pos, Pos, Normal); 4] = [
            (Pos::new(x0, y0), Pos::new(x1, y0), Normal { axis: Axis::Y, sign: -1 }),
            (Pos::new(x1, y0), Pos::new(x1, y1), Normal { axis: Axis::X, sign: 1 }),
            (Pos::new(x1, y1), Pos::new(x0, y1), Normal { axis: Axis::Y, sign: 1 }),
            (Pos::new(x0, y1), Pos::new(x0, y0), Normal { axis: Axis::X, sign: -1 }),
        ];
        for (from, to, normal) in faces {
            let dx = (to.x2 - from.x2).signum() * 2;
            let dy = (to.y2 - from.y2).signum() * 2;
            let n = ((to.x2 - from.x2).abs() + (to.y2 - from.y2).abs()) / 2;
            for k in 0..=n {
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                push(Pos::new(from.x2 + k * dx, from.y2 + k * dy), normal, w, &mut points);
            }
        }
        for p in &points {
            if touches_conductor(p.pos, 2, |i, j| self.occupied(i, j)) {
                return Err(Error::Geometry("stress surface intersects a conductor".into()));
            }
        }
        Ok(StressSurface { polarization: pol, points })
    }
}

fn check_gap(a: usize) -> Result<()> {
    if a < 4 {
        return Err(Error::Geometry(format!("gap under-resolved: a = {a} < 4 cells")));
    }
    Ok(())
}

/// `[wall | absorber | pad | plate | gap a | plate | pad | absorber | wall]`.
/// The outermost cell on each side is the PEC boundary; the plates have
/// thickness `wall`.
pub fn build_parallel_plates_1d(a: usize, wall: usize, pad: usize) -> Result<Geometry> {
    build_layout_1d(a, wall, pad, 0)
}

fn build_layout_1d(a: usize, wall: usize, pad: usize, absorber: usize) -> Result<Geometry> {
    check_gap(a)?;
    if wall < 2 {
        return Err(Error::Geometry(format!("plate thickness {wall} < 2 cells")));
    }
    if pad < 4 {
        return Err(Error::Geometry(format!("pad {pad} < 4 cells")));
    }
    if pad < a.div_ceil(2) {
        return Err(Error::Geometry(format!(
            "pad {pad} too small for the outer stress point (needs >= {})",
            a.div_ceil(2)
        )));
    }
    let nx = 2 + 2 * absorber + 2 * pad + 2 * wall + a;
    let l0 = 1 + absorber + pad;
    let r0 = l0 + wall + a;
    let conductors = vec![
        Rect::new(0, 1, 0, 1),
        Rect::new(nx - 1, nx, 0, 1),
        Rect::new(l0, l0 + wall, 0, 1),
        Rect::new(r0, r0 + wall, 0, 1),
    ];
    Ok(Geometry {
        kind: GeometryKind::ParallelPlates1d { a, wall, pad },
        nx,
        ny: 0,
        conductors,
        body: 3,
        absorber_x: absorber,
        absorber_y: 0,
        surface_offset: 2,
        length_scale: a as f64,
        absorber_alpha: 0.0,
    })
}

/// Two `s × s` blocks with gap `a` along x between PEC sidewalls separated by
/// `d` along y (`None` = no sidewalls). The stress surface encloses the right
/// block by default.
pub fn build_piston_2d(s: usize, a: usize, d: Option<usize>, pad: usize) -> Result<Geometry> {
    build_layout_piston(s, a, d, pad, 0, PistonBody::Right, 2)
}

fn build_layout_piston(
    s: usize,
    a: usize,
    d: Option<usize>,
    pad: usize,
    absorber: usize,
    body: PistonBody,
    offset: usize,
) -> Result<Geometry> {
    check_gap(a)?;
    if s < 8 {
        return Err(Error::Geometry(format!("block side {s} < 8 cells")));
    }
    if pad < 4 {
        return Err(Error::Geometry(format!("pad {pad} < 4 cells")));
    }
    let nx = 2 + 2 * absorber + 2 * pad + 2 * s + a;
    let bx0 = 1 + absorber + pad;
    let bx1 = bx0 + s + a;
    let (ny, by0, absorber_y) = match d {
        Some(d) => {
            if d < s + 4 {
                return Err(Error::Geometry(format!(
                    "insufficient sidewall clearance: d = {d} < s + 4 = {}",
                    s + 4
                )));
            }
            if (d - s) % 2 != 0 {
                return Err(Error::Geometry(format!(
                    "d - s = {} must be even so the blocks are centred",
                    d - s
                )));
            }
            (d + 2, 1 + (d - s) / 2, 0)
        }
        None => (2 + 2 * absorber + 2 * pad + s, 1 + absorber + pad, absorber),
    };
    let conductors = vec![
        Rect::new(0, nx, 0, 1),
        Rect::new(0, nx, ny - 1, ny),
        Rect::new(0, 1, 1, ny - 1),
        Rect::new(nx - 1, nx, 1, ny - 1),
        Rect::new(bx0, bx0 + s, by0, by0 + s),
        Rect::new(bx1, bx1 + s, by0, by0 + s),
    ];
    Ok(Geometry {
        kind: GeometryKind::Piston2d { s, a, d, pad, body },
        nx,
        ny,
        conductors,
        body: if body == PistonBody::Left { 4 } else { 5 },
        absorber_x: absorber,
        absorber_y,
        surface_offset: offset,
        length_scale: a as f64,
        absorber_alpha: 0.0,
    })
}

/// Arbitrary 2D rectangles inside a PEC box of `nx × ny` cells.
pub fn build_custom_rectangles_2d(
    nx: usize,
    ny: usize,
    rects: &[Rect],
    body: usize,
    length_scale: f64,
) -> Result<Geometry> {
    if nx < 4 || ny < 4 {
        return Err(Error::Geometry("domain must be at least 4x4 cells".into()));
    }
    if body >= rects.len() {
        return Err(Error::Geometry("body index out of range".into()));
    }
    for (k, r) in rects.iter().enumerate() {
        if r.x0 >= r.x1 || r.y0 >= r.y1 || r.x0 < 1 || r.y0 < 1 || r.x1 > nx - 1 || r.y1 > ny - 1 {
            return Err(Error::Geometry(format!("rectangle {k} is empty or outside the domain")));
        }
        for o in &rects[..k] {
            if r.overlaps(o) {
                return Err(Error::Geometry(format!("rectangle {k} overlaps another block")));
            }
        }
    }
    let mut conductors = vec![
        Rect::new(0, nx, 0, 1),
        Rect::new(0, nx, ny - 1, ny),
        Rect::new(0, 1, 1, ny - 1),
        Rect::new(nx - 1, nx, 1, ny - 1),
    ];
    conductors.extend_from_slice(rects);
    Ok(Geometry {
        kind: GeometryKind::CustomRectangles2d,
        nx,
        ny,
        conductors,
        body: 4 + body,
        absorber_x: 0,
        absorber_y: 0,
        surface_offset: 2,
        length_scale,
        absorber_alpha: 0.0,
    })
}

/// Rasterized conductor occupancy plus per-component staggered masks.
#[derive(Debug, Clone, PartialEq)]
pub struct PecMask {
    pub nx: usize,
    pub ny: usize,
    /// Cell occupancy, index `i * ny + j` (1D: `i`).
    pub occupancy: Vec<bool>,
    /// Sample masks per component, index `i * (ny + 1) + j` (1D: `i`);
    /// `true` = forced to zero.
    masks: Vec<(Component, Vec<bool>)>,
    pub absorber: AbsorberProfile,
}

/// Absorber conductivity σ_a sampled at integer (`*_node[i]` = σ_a(i)) and
/// half-integer (`*_half[i]` = σ_a(i + ½)) coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AbsorberProfile {
    pub x_node: Vec<f64>,
    pub x_half: Vec<f64>,
    pub y_node: Vec<f64>,
    pub y_half: Vec<f64>,
    /// Frequency shift α of the stretch.
    pub alpha: f64,
}

impl AbsorberProfile {
    fn from_geometry(g: &Geometry) -> Self {
        let sample = |axis: Axis, n: usize, off: f64| -> Vec<f64> {
            (0..=n).map(|i| g.absorber_profile(axis, i as f64 + off)).collect()
        };
        Self {
            x_node: sample(Axis::X, g.nx, 0.0),
            x_half: sample(Axis::X, g.nx, 0.5),
            y_node: if g.ny > 0 { sample(Axis::Y, g.ny, 0.0) } else { Vec::new() },
            y_half: if g.ny > 0 { sample(Axis::Y, g.ny, 0.5) } else { Vec::new() },
            alpha: g.absorber_alpha,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.x_node.iter().chain(&self.x_half).chain(&self.y_node).chain(&self.y_half).all(|&v| v == 0.0)
    }
}

impl PecMask {
    pub fn dim(&self) -> usize {
        if self.ny == 0 {
            1
        } else {
            2
        }
    }

    /// Number of stored samples per component array.
    pub fn samples(&self) -> usize {
        if self.ny == 0 {
            self.nx + 1
        } else {
            (self.nx + 1) * (self.ny + 1)
        }
    }

    pub fn cell(&self, i: i64, j: i64) -> bool {
        if self.ny == 0 {
            return j != 0 || i < 0 || i >= self.nx as i64 || self.occupancy[i as usize];
        }
        if i < 0 || j < 0 || i >= self.nx as i64 || j >= self.ny as i64 {
            return true;
        }
        self.occupancy[i as usize * self.ny + j as usize]
    }

    pub fn occupied_cells(&self) -> usize {
        self.occupancy.iter().filter(|&&b| b).count()
    }

    pub fn mask(&self, c: Component) -> &[bool] {
        &self
            .masks
            .iter()
            .find(|(k, _)| *k == c)
            .expect("component not available in this dimension")
            .1
    }

    /// Whether the sample at a doubled-coordinate position is masked.
    /// Positions not matching the component's parity or outside the grid
    /// count as masked.
    pub fn is_masked(&self, c: Component, p: Pos) -> bool {
        match self.index(c, p) {
            Some(k) => self.mask(c)[k],
            None => true,
        }
    }

    /// Array index of a component sample, if it lies on the grid.
    pub fn index(&self, c: Component, p: Pos) -> Option<usize> {
        if self.ny == 0 {
            let par = if c == Component::Ey { 0 } else { 1 };
            if p.y2 != 0 || p.x2.rem_euclid(2) != par || p.x2 < 0 {
                return None;
            }
            let i = (p.x2 / 2) as usize;
            return if i <= self.nx { Some(i) } else { None };
        }
        let (px, py) = c.parity();
        if p.x2.rem_euclid(2) != px || p.y2.rem_euclid(2) != py || p.x2 < 0 || p.y2 < 0 {
            return None;
        }
        let (i, j) = ((p.x2 / 2) as usize, (p.y2 / 2) as usize);
        if i > self.nx || j > self.ny {
            return None;
        }
        Some(i * (self.ny + 1) + j)
    }

    /// Reflection of the mask across the domain mid-line along `axis`.
    pub fn mirrored(&self, axis: Axis) -> PecMask {
        let (nx, ny) = (self.nx, self.ny);
        let mut occ = self.occupancy.clone();
        if ny == 0 {
            occ.reverse();
        } else {
            for i in 0..nx {
                for j in 0..ny {
                    let (si, sj) = match axis {
                        Axis::X => (nx - 1 - i, j),
                        Axis::Y => (i, ny - 1 - j),
                    };
                    occ[i * ny + j] = self.occupancy[si * ny + sj];
                }
            }
        }
        let flip = |v: &Vec<f64>, half: bool| -> Vec<f64> {
            let n = v.len();
            (0..n)
                .map(|i| {
                    let src = if half { (n - 2).wrapping_sub(i) } else { n - 1 - i };
                    if src < n { v[src] } else { 0.0 }
                })
                .collect()
        };
        let ab = &self.absorber;
        let absorber = match axis {
            _ if self.absorber.is_empty() => self.absorber.clone(),
            Axis::X => AbsorberProfile {
                x_node: flip(&ab.x_node, false),
                x_half: flip(&ab.x_half, true),
                ..ab.clone()
            },
            Axis::Y => AbsorberProfile {
                y_node: flip(&ab.y_node, false),
                y_half: flip(&ab.y_half, true),
                ..ab.clone()
            },
        };
        let mut out = PecMask { nx, ny, occupancy: occ, masks: Vec::new(), absorber };
        out.masks = self
            .masks
            .iter()
            .map(|(c, m)| {
                let mut mm = vec![true; m.len()];
                for (k, slot) in mm.iter_mut().enumerate() {
                    let p = out.position(*c, k);
                    let q = match axis {
                        Axis::X => Pos::new(2 * nx as i64 - p.x2, p.y2),
                        Axis::Y => Pos::new(p.x2, 2 * ny as i64 - p.y2),
                    };
                    *slot = match self.index(*c, q) {
                        Some(src) => m[src],
                        None => true,
                    };
                }
                (*c, mm)
            })
            .collect();
        out
    }

    /// Position of array slot `k` of component `c`.
    pub fn position(&self, c: Component, k: usize) -> Pos {
        if self.ny == 0 {
            let par = if c == Component::Ey { 0 } else { 1 };
            return Pos::new(2 * k as i64 + par, 0);
        }
        let (px, py) = c.parity();
        let (i, j) = (k / (self.ny + 1), k % (self.ny + 1));
        Pos::new(2 * i as i64 + px, 2 * j as i64 + py)
    }
}

/// Rasterizes a geometry onto the staggered grid.
pub fn rasterize(g: &Geometry) -> PecMask {
    let (nx, ny) = (g.nx, g.ny);
    if ny == 0 {
        let occupancy: Vec<bool> = (0..nx).map(|i| g.occupied(i as i64, 0)).collect();
        let cell = |i: i64| i < 0 || i >= nx as i64 || occupancy[i as usize];
        let ey: Vec<bool> = (0..=nx as i64).map(|i| cell(i - 1) || cell(i)).collect();
        let hz: Vec<bool> = (0..=nx as i64).map(cell).collect();
        return PecMask {
            nx,
            ny,
            occupancy,
            masks: vec![(Component::Ey, ey), (Component::Hz, hz)],
            absorber: AbsorberProfile::from_geometry(g),
        };
    }
    let mut occupancy = vec![false; nx * ny];
    for i in 0..nx {
        for j in 0..ny {
            occupancy[i * ny + j] = g.occupied(i as i64, j as i64);
        }
    }
    let cell = |i: i64, j: i64| -> bool {
        i < 0 || j < 0 || i >= nx as i64 || j >= ny as i64 || occupancy[i as usize * ny + j as usize]
    };
    let n = (nx + 1) * (ny + 1);
    let mut masks = Vec::new();
    for c in [
        Component::Ez,
        Component::Hx,
        Component::Hy,
        Component::Hz,
        Component::Ex,
        Component::Ey,
    ] {
        let mut m = vec![true; n];
        for i in 0..=nx as i64 {
            for j in 0..=ny as i64 {
                let k = i as usize * (ny + 1) + j as usize;
                m[k] = match c {
                    Component::Ez => {
                        cell(i - 1, j - 1) || cell(i, j - 1) || cell(i - 1, j) || cell(i, j)
                    }
                    Component::Ex => i >= nx as i64 || cell(i, j - 1) || cell(i, j),
                    Component::Ey => j >= ny as i64 || cell(i - 1, j) || cell(i, j),
                    Component::Hx => j >= ny as i64 || (cell(i - 1, j) && cell(i, j)),
                    Component::Hy => i >= nx as i64 || (cell(i, j - 1) && cell(i, j)),
                    Component::Hz => cell(i, j),
                };
            }
        }
        masks.push((c, m));
    }
    PecMask { nx, ny, occupancy, masks, absorber: AbsorberProfile::from_geometry(g) }
}

/// One face contribution of a surface point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub normal: Normal,
    /// Line element (cells); trapezoid weights, ½ at face ends.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePoint {
    pub pos: Pos,
    /// Corners carry two faces.
    pub faces: Vec<Face>,
}

/// Closed surface around one body. Points are ordered counter-clockwise
/// starting from the bottom-left corner (1D: gap point, then outer point).
#[derive(Debug, Clone, PartialEq)]
pub struct StressSurface {
    pub polarization: Polarization,
    pub points: Vec<SurfacePoint>,
}

impl StressSurface {
    /// Checks that every probe stencil sample needed by the polarization is
    /// in vacuum or on a conductor surface, never inside a conductor.
    pub fn check_against(&self, mask: &PecMask) -> Result<()> {
        for p in &self.points {
            if touches_conductor(p.pos, mask.dim(), |i, j| mask.cell(i, j)) {
                return Err(Error::Geometry(format!(
                    "surface point ({}, {}) touches a conductor",
                    p.pos.x2 as f64 / 2.0,
                    p.pos.y2 as f64 / 2.0
                )));
            }
        }
        Ok(())
    }
}

/// Whether any cell whose closure contains `p` is conductor.
fn touches_conductor(p: Pos, dim: usize, cell: impl Fn(i64, i64) -> bool) -> bool {
    let cx = p.x2.div_euclid(2);
    let cy = p.y2.div_euclid(2);
    let xs: &[i64] = if p.x2.rem_euclid(2) == 0 { &[cx - 1, cx] } else { &[cx] };
    if dim == 1 {
        return xs.iter().any(|&i| cell(i, 0));
    }
    let ys: &[i64] = if p.y2.rem_euclid(2) == 0 { &[cy - 1, cy] } else { &[cy] };
    xs.iter().any(|&i| ys.iter().any(|&j| cell(i, j)))
}

/// Time-step from a Courant factor S: dt = S·Δx.
pub fn courant_dt(s: f64, dim: usize) -> Result<f64> {
    let limit = if dim == 1 { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
    if !(s > 0.0) || s > limit * (1.0 + 1e-12) {
        return Err(Error::Courant { dt: s, limit });
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plates_layout() {
        let g = build_parallel_plates_1d(10, 2, 5).unwrap();
        assert_eq!(g.nx, 2 + 10 + 4 + 10);
        assert_eq!(g.dim(), 1);
        let (l, r) = (g.conductors[2], g.conductors[3]);
        assert_eq!(r.x0 - l.x1, 10);
        assert_eq!(g.body_rect(), r);
        let m = rasterize(&g);
        assert_eq!(m.occupied_cells(), 2 + 2 * 2);
        // E_y is masked on both faces of a plate, H_z only inside it.
        assert!(m.is_masked(Component::Ey, Pos::new(2 * l.x1 as i64, 0)));
        assert!(!m.is_masked(Component::Ey, Pos::new(2 * l.x1 as i64 + 2, 0)));
        assert!(!m.is_masked(Component::Hz, Pos::new(2 * l.x1 as i64 + 1, 0)));
        assert!(m.is_masked(Component::Hz, Pos::new(2 * l.x0 as i64 + 1, 0)));
    }

    #[test]
    fn builder_preconditions() {
        assert!(build_parallel_plates_1d(3, 2, 8).is_err());
        assert!(build_parallel_plates_1d(10, 1, 8).is_err());
        assert!(build_parallel_plates_1d(10, 2, 3).is_err());
        assert!(build_parallel_plates_1d(20, 2, 9).is_err());
        assert!(build_piston_2d(7, 8, None, 8).is_err());
        assert!(build_piston_2d(8, 8, Some(11), 8).is_err());
        assert!(build_piston_2d(8, 8, Some(13), 8).is_err());
        assert!(build_piston_2d(8, 8, Some(12), 8).is_ok());
        let g = build_piston_2d(8, 8, None, 8).unwrap();
        assert!(g.clone().with_absorber_alpha(-1.0).is_err());
        assert!(g.clone().with_surface_offset(0).is_err());
        assert!(build_parallel_plates_1d(8, 2, 8).unwrap().with_body(PistonBody::Left).is_err());
        let r = [Rect::new(2, 5, 2, 5), Rect::new(4, 6, 4, 6)];
        assert!(build_custom_rectangles_2d(10, 10, &r, 0, 1.0).is_err());
        assert!(build_custom_rectangles_2d(10, 10, &r[..1], 1, 1.0).is_err());
        assert!(build_custom_rectangles_2d(10, 10, &[Rect::new(0, 3, 2, 4)], 0, 1.0).is_err());
    }

    #[test]
    fn piston_layout_and_body() {
        let g = build_piston_2d(8, 8, Some(16), 6).unwrap().with_absorber(4).unwrap();
        assert_eq!(g.ny, 18);
        // Closed sidewalls: no absorber along y.
        assert_eq!(g.absorber_y, 0);
        let (lb, rb) = (g.conductors[4], g.conductors[5]);
        assert_eq!(rb.x0 - lb.x1, 8);
        assert_eq!(lb.y0 - 1, g.ny - 1 - lb.y1);
        assert_eq!(g.body_rect(), rb);
        let left = g.clone().with_body(PistonBody::Left).unwrap();
        assert_eq!(left.body_rect(), lb);
        assert_eq!(left.absorber_x, 4);
        let open = build_piston_2d(8, 8, None, 6).unwrap().with_absorber(4).unwrap();
        assert_eq!(open.absorber_y, 4);
        assert_eq!(open.piston_d(), None);
    }

    #[test]
    fn absorber_profile_grading() {
        let g = build_parallel_plates_1d(8, 2, 8).unwrap().with_absorber(6).unwrap();
        assert_eq!(g.absorber_profile(Axis::X, 10.0), 0.0);
        let a = g.absorber_profile(Axis::X, 6.0);
        let b = g.absorber_profile(Axis::X, 3.0);
        assert!(0.0 < a && a < b);
        let n = g.nx as f64;
        assert!((g.absorber_profile(Axis::X, n - 3.0) - b).abs() < 1e-12);
        assert!(rasterize(&build_parallel_plates_1d(8, 2, 8).unwrap()).absorber.is_empty());
    }

    #[test]
    fn surfaces_avoid_conductors() {
        let g = build_piston_2d(8, 8, Some(12), 8).unwrap();
        let m = rasterize(&g);
        for pol in [Polarization::Te, Polarization::Tm] {
            let s = g.stress_surface(pol).unwrap();
            s.check_against(&m).unwrap();
            let w: f64 = s.points.iter().flat_map(|p| &p.faces).map(|f| f.weight).sum();
            assert!(w > 4.0 * 8.0);
        }
        assert!(g.stress_surface(Polarization::OneD).is_err());
        let p = build_parallel_plates_1d(8, 2, 8).unwrap();
        let s = p.stress_surface(Polarization::OneD).unwrap();
        assert_eq!(s.points.len(), 2);
        s.check_against(&rasterize(&p)).unwrap();
    }

    #[test]
    fn temperature_and_courant() {
        let t = TemperatureSpec::new(std::f64::consts::PI, 40.0).unwrap();
        assert!((t.omega_t() - 2.0 * t.temperature()).abs() < 1e-15);
        assert!(TemperatureSpec::new(-1.0, 40.0).is_err());
        assert!(TemperatureSpec::new(1.0, 0.0).is_err());
        assert!(courant_dt(1.0, 1).is_ok());
        assert!(courant_dt(0.75, 2).is_err());
        let c = ContourSpec::new(0.0, 1.0, 8).unwrap();
        assert!(matches!(c.check_temperature(&t), Err(Error::ZeroModeRequiresSigma)));
        assert!(c.check_nyquist(4.0).is_err());
    }

    proptest! {
        #[test]
        fn mask_mirror_is_involution(s in 8usize..12, a in 4usize..10, extra in 0usize..4, pad in 4usize..8) {
            let d = s + 4 + 2 * extra;
            let g = build_piston_2d(s, a, Some(d), pad).unwrap();
            let m = rasterize(&g);
            for axis in [Axis::X, Axis::Y] {
                prop_assert_eq!(&m.mirrored(axis).mirrored(axis), &m);
                prop_assert_eq!(rasterize(&g.mirrored(axis)).occupancy, m.mirrored(axis).occupancy);
            }
            // Centred blocks: the layout is symmetric about y.
            prop_assert_eq!(&m.mirrored(Axis::Y), &m);
        }

        #[test]
        fn index_position_round_trip(nx in 4usize..12, ny in 4usize..12) {
            let g = build_custom_rectangles_2d(nx, ny, &[Rect::new(1, 3, 1, 3)], 0, 1.0).unwrap();
            let m = rasterize(&g);
            for c in [Component::Ex, Component::Ey, Component::Ez, Component::Hx, Component::Hy, Component::Hz] {
                for k in 0..m.samples() {
                    prop_assert_eq!(m.index(c, m.position(c, k)), Some(k));
                }
                // Wrong parity never maps to a sample.
                let p = m.position(c, 0);
                prop_assert_eq!(m.index(c, Pos::new(p.x2 + 1, p.y2)), None);
            }
        }

        #[test]
        fn tangential_e_vanishes_on_conductor_faces(a in 4usize..20, wall in 2usize..5) {
            let g = build_parallel_plates_1d(a, wall, a.div_ceil(2).max(4)).unwrap();
            let m = rasterize(&g);
            for r in &g.conductors {
                for i in r.x0..=r.x1 {
                    prop_assert!(m.is_masked(Component::Ey, Pos::new(2 * i as i64, 0)));
                }
            }
        }
    }
}
