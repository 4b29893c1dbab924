//! Damped leapfrog Maxwell solver on the staggered grid (1D, 2D TM, 2D TE).
//!
//! Update order per step n: H^{n-½} → H^{n+½}, then E^n → E^{n+1}. A damped
//! field X obeys ∂X/∂t = curl − σX − J, discretised semi-implicitly:
//! X ← [(1 − σdt/2)X + dt(curl − J)]/(1 + σdt/2). Electric kicks enter the E
//! update of step 0 and magnetic kicks the H update of step 0, so every
//! recorded sample k sits at lag (k + ½)·dt after its kick.
//!
//! The absorber is a stretched-coordinate layer: each derivative ∂_u inside
//! it is replaced by ∂_u + ψ_u with ψ_u ← b·ψ_u + c·∂_u, b = e^{−(σ_a+α)dt},
//! c = σ_a/(σ_a + α)·(b − 1), i.e. the stretch 1 + σ_a/(α − iω).

use crate::error::{Error, Result};
use crate::model::{Component, PecMask, Polarization, Pos};

/// Where the artificial conductivity acts for magnetically sourced runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Damping {
    /// E-sourced runs damp E, H-sourced runs damp H.
    Dual,
    /// Only E is ever damped.
    ElectricOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdtdParams {
    pub sigma: f64,
    pub dt: f64,
    pub max_steps: usize,
    pub tail_tol: f64,
    pub damping: Damping,
}

impl FdtdParams {
    pub fn new(sigma: f64, dt: f64, max_steps: usize, tail_tol: f64) -> Self {
        Self { sigma, dt, max_steps, tail_tol, damping: Damping::Dual }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let limit = if dim == 1 { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
        if !(self.dt > 0.0) || self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::Courant { dt: self.dt, limit });
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::Parameter(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.tail_tol > 0.0) {
            return Err(Error::Parameter("tail_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Unit impulse current at step 0 (amplitude × 1/dt).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleSource {
    pub pos: Pos,
    pub component: Component,
    pub amplitude: f64,
}

impl DipoleSource {
    pub fn new(pos: Pos, component: Component) -> Self {
        Self { pos, component, amplitude: 1.0 }
    }
    pub fn is_electric(&self) -> bool {
        self.component.is_electric()
    }
}

/// A field component read at an arbitrary staggered position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Probe {
    pub pos: Pos,
    pub component: Component,
}

/// Weighted samples representing a component at a position: the native
/// sample, or the average of the 2 (or 4) nearest native samples.
pub fn stencil(mask: &PecMask, c: Component, p: Pos) -> Result<Vec<(usize, f64)>> {
    let (px, py) = if mask.dim() == 1 {
        (if c == Component::Ey { 0 } else { 1 }, 0)
    } else {
        c.parity()
    };
    let xs: Vec<i64> = if p.x2.rem_euclid(2) == px { vec![p.x2] } else { vec![p.x2 - 1, p.x2 + 1] };
    let ys: Vec<i64> = if p.y2.rem_euclid(2) == py { vec![p.y2] } else { vec![p.y2 - 1, p.y2 + 1] };
    let w = 1.0 / (xs.len() * ys.len()) as f64;
    let mut out = Vec::new();
    for &x in &xs {
        for &y in &ys {
            let k = mask.index(c, Pos::new(x, y)).ok_or_else(|| {
                Error::Geometry(format!(
                    "{} stencil at ({}, {}) leaves the grid",
                    c.name(),
                    p.x2 as f64 / 2.0,
                    p.y2 as f64 / 2.0
                ))
            })?;
            out.push((k, w));
        }
    }
    Ok(out)
}

fn polarization_of(mask: &PecMask, c: Component) -> Result<Polarization> {
    let pol = if mask.dim() == 1 {
        Polarization::OneD
    } else if Polarization::Tm.has(c) {
        Polarization::Tm
    } else {
        Polarization::Te
    };
    if !pol.has(c) {
        return Err(Error::Parameter(format!("component {} not available in 1D", c.name())));
    }
    Ok(pol)
}

/// Field arrays of one polarization, in `Polarization::components` order.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub polarization: Polarization,
    pub step: usize,
    pub fields: Vec<Vec<f64>>,
}

impl FieldState {
    pub fn field(&self, c: Component) -> &[f64] {
        let k = self.polarization.components().iter().position(|&x| x == c).expect("component");
        &self.fields[k]
    }
    pub fn field_mut(&mut self, c: Component) -> &mut [f64] {
        let k = self.polarization.components().iter().position(|&x| x == c).expect("component");
        &mut self.fields[k]
    }
}

struct Coef {
    ca: f64,
    cb: f64,
}

impl Coef {
    fn new(sigma: f64, dt: f64) -> Self {
        let d = 1.0 + 0.5 * sigma * dt;
        Self { ca: (1.0 - 0.5 * sigma * dt) / d, cb: dt / d }
    }
}

/// Absorber recursion coefficients (b, b − 1) at node / half positions.
struct Pml {
    b: Vec<f64>,
    a: Vec<f64>,
}

impl Pml {
    fn new(profile: &[f64], alpha: f64, dt: f64) -> Self {
        let b: Vec<f64> = profile.iter().map(|&s| (-(s + alpha) * dt).exp()).collect();
        let a = profile
            .iter()
            .zip(&b)
            .map(|(&s, &b)| if s > 0.0 { s / (s + alpha) * (b - 1.0) } else { 0.0 })
            .collect();
        Self { b, a }
    }
}

fn active(profiles: &[&[f64]]) -> Vec<usize> {
    let n = profiles.iter().map(|p| p.len()).max().unwrap_or(0);
    (0..n).filter(|&i| profiles.iter().any(|p| p.get(i).copied().unwrap_or(0.0) > 0.0)).collect()
}

/// A running simulation of one polarization.
pub struct Simulation<'m> {
    mask: &'m PecMask,
    pub state: FieldState,
    dt: f64,
    e: Coef,
    h: Coef,
    m: Vec<Vec<f64>>,
    px_node: Pml,
    px_half: Pml,
    py_node: Pml,
    py_half: Pml,
    x_active: Vec<usize>,
    y_active: Vec<usize>,
    psi: Vec<Vec<f64>>,
}

impl<'m> Simulation<'m> {
    /// `damp_e` / `damp_h` select which field type carries σ.
    pub fn new(mask: &'m PecMask, pol: Polarization, dt: f64, sigma: f64, damp_e: bool, damp_h: bool) -> Result<Self> {
        let ok = match pol {
            Polarization::OneD => mask.dim() == 1,
            _ => mask.dim() == 2,
        };
        if !ok {
            return Err(Error::Parameter(format!("polarization {} does not match grid", pol.name())));
        }
        let n = mask.samples();
        let m = pol
            .components()
            .iter()
            .map(|&c| mask.mask(c).iter().map(|&b| if b { 0.0 } else { 1.0 }).collect())
            .collect();
        let ab = &mask.absorber;
        let x_active = active(&[&ab.x_node, &ab.x_half]);
        let y_active = active(&[&ab.y_node, &ab.y_half]);
        let n_psi = if x_active.is_empty() && y_active.is_empty() { 0 } else { n };
        Ok(Self {
            mask,
            state: FieldState { polarization: pol, step: 0, fields: vec![vec![0.0; n]; pol.components().len()] },
            dt,
            e: Coef::new(if damp_e { sigma } else { 0.0 }, dt),
            h: Coef::new(if damp_h { sigma } else { 0.0 }, dt),
            m,
            px_node: Pml::new(&ab.x_node, ab.alpha, dt),
            px_half: Pml::new(&ab.x_half, ab.alpha, dt),
            py_node: Pml::new(&ab.y_node, ab.alpha, dt),
            py_half: Pml::new(&ab.y_half, ab.alpha, dt),
            x_active,
            y_active,
            psi: vec![vec![0.0; n_psi]; 4],
        })
    }

    /// Advances one step; `kick` = (component, [(index, current)]) applied
    /// in this step's update of that component.
    pub fn step(&mut self, kick: Option<(Component, &[(usize, f64)])>) {
        match self.state.polarization {
            Polarization::OneD => self.step_1d(kick),
            Polarization::Tm => self.step_tm(kick),
            Polarization::Te => self.step_te(kick),
        }
        self.state.step += 1;
        #[cfg(debug_assertions)]
        if self.state.step % 100 == 0 {
            self.assert_masked();
        }
    }

    #[cfg(debug_assertions)]
    fn assert_masked(&self) {
        for (f, m) in self.state.fields.iter().zip(&self.m) {
            for (v, mm) in f.iter().zip(m) {
                debug_assert!(*mm != 0.0 || *v == 0.0, "masked sample became nonzero");
                debug_assert!(v.is_finite(), "non-finite field sample");
            }
        }
    }

    fn apply_kick(field: &mut [f64], m: &[f64], cb: f64, kick: &[(usize, f64)]) {
        for &(k, j) in kick {
            field[k] -= m[k] * cb * j;
        }
    }

    fn step_1d(&mut self, kick: Option<(Component, &[(usize, f64)])>) {
        let nx = self.mask.nx;
        let (ey, hz) = split2(&mut self.state.fields);
        let (mey, mhz) = (&self.m[0], &self.m[1]);
        // H_z(i+½) ← −∂_x E_y
        let (ca, cb) = (self.h.ca, self.h.cb);
        for i in 0..nx {
            hz[i] = mhz[i] * (ca * hz[i] - cb * (ey[i + 1] - ey[i]));
        }
        if !self.psi[0].is_empty() {
            let psi = &mut self.psi[0];
            for &i in &self.x_active {
                if i >= nx {
                    continue;
                }
                let d = ey[i + 1] - ey[i];
                psi[i] = self.px_half.b[i] * psi[i] + self.px_half.a[i] * d;
                hz[i] -= mhz[i] * cb * psi[i];
            }
        }
        if let Some((Component::Hz, k)) = kick {
            Self::apply_kick(hz, mhz, cb, k);
        }
        // E_y(i) ← −∂_x H_z
        let (ca, cb) = (self.e.ca, self.e.cb);
        for i in 1..nx {
            ey[i] = mey[i] * (ca * ey[i] - cb * (hz[i] - hz[i - 1]));
        }
        if !self.psi[1].is_empty() {
            let psi = &mut self.psi[1];
            for &i in &self.x_active {
                if i == 0 || i >= nx {
                    continue;
                }
                let d = hz[i] - hz[i - 1];
                psi[i] = self.px_node.b[i] * psi[i] + self.px_node.a[i] * d;
                ey[i] -= mey[i] * cb * psi[i];
            }
        }
        if let Some((Component::Ey, k)) = kick {
            Self::apply_kick(ey, mey, cb, k);
        }
    }

    fn step_tm(&mut self, kick: Option<(Component, &[(usize, f64)])>) {
        let (nx, ny) = (self.mask.nx, self.mask.ny);
        let s = ny + 1;
        let (ez, hx, hy) = split3(&mut self.state.fields);
        let (mez, mhx, mhy) = (&self.m[0], &self.m[1], &self.m[2]);
        let has_psi = !self.psi[0].is_empty();
        // H_x(i, j+½) ← −∂_y E_z ;  H_y(i+½, j) ← +∂_x E_z
        let (ca, cb) = (self.h.ca, self.h.cb);
        for i in 0..=nx {
            let r = i * s;
            for j in 0..ny {
                let k = r + j;
                hx[k] = mhx[k] * (ca * hx[k] - cb * (ez[k + 1] - ez[k]));
            }
        }
        for i in 0..nx {
            let r = i * s;
            for j in 0..=ny {
                let k = r + j;
                hy[k] = mhy[k] * (ca * hy[k] + cb * (ez[k + s] - ez[k]));
            }
        }
        if has_psi {
            let [p0, p1, _, _] = &mut self.psi[..] else { unreachable!() };
            for i in 0..=nx {
                let r = i * s;
                for &j in &self.y_active {
                    if j >= ny {
                        continue;
                    }
                    let k = r + j;
                    p0[k] = self.py_half.b[j] * p0[k] + self.py_half.a[j] * (ez[k + 1] - ez[k]);
                    hx[k] -= mhx[k] * cb * p0[k];
                }
            }
            for &i in &self.x_active {
                if i >= nx {
                    continue;
                }
                let r = i * s;
                for j in 0..=ny {
                    let k = r + j;
                    p1[k] = self.px_half.b[i] * p1[k] + self.px_half.a[i] * (ez[k + s] - ez[k]);
                    hy[k] += mhy[k] * cb * p1[k];
                }
            }
        }
        match kick {
            Some((Component::Hx, kk)) => Self::apply_kick(hx, mhx, cb, kk),
            Some((Component::Hy, kk)) => Self::apply_kick(hy, mhy, cb, kk),
            _ => {}
        }
        // E_z(i, j) ← ∂_x H_y − ∂_y H_x
        let (ca, cb) = (self.e.ca, self.e.cb);
        for i in 1..nx {
            let r = i * s;
            for j in 1..ny {
                let k = r + j;
                let curl = (hy[k] - hy[k - s]) - (hx[k] - hx[k - 1]);
                ez[k] = mez[k] * (ca * ez[k] + cb * curl);
            }
        }
        if has_psi {
            let [_, _, p2, p3] = &mut self.psi[..] else { unreachable!() };
            for &i in &self.x_active {
                if i == 0 || i >= nx {
                    continue;
                }
                let r = i * s;
                for j in 1..ny {
                    let k = r + j;
                    p2[k] = self.px_node.b[i] * p2[k] + self.px_node.a[i] * (hy[k] - hy[k - s]);
                    ez[k] += mez[k] * cb * p2[k];
                }
            }
            for i in 1..nx {
                let r = i * s;
                for &j in &self.y_active {
                    if j == 0 || j >= ny {
                        continue;
                    }
                    let k = r + j;
                    p3[k] = self.py_node.b[j] * p3[k] + self.py_node.a[j] * (hx[k] - hx[k - 1]);
                    ez[k] -= mez[k] * cb * p3[k];
                }
            }
        }
        if let Some((Component::Ez, kk)) = kick {
            Self::apply_kick(ez, mez, cb, kk);
        }
    }

    fn step_te(&mut self, kick: Option<(Component, &[(usize, f64)])>) {
        let (nx, ny) = (self.mask.nx, self.mask.ny);
        let s = ny + 1;
        let (hz, ex, ey) = split3(&mut self.state.fields);
        let (mhz, mex, mey) = (&self.m[0], &self.m[1], &self.m[2]);
        let has_psi = !self.psi[0].is_empty();
        // H_z(i+½, j+½) ← −(∂_x E_y − ∂_y E_x)
        let (ca, cb) = (self.h.ca, self.h.cb);
        for i in 0..nx {
            let r = i * s;
            for j in 0..ny {
                let k = r + j;
                let curl = (ey[k + s] - ey[k]) - (ex[k + 1] - ex[k]);
                hz[k] = mhz[k] * (ca * hz[k] - cb * curl);
            }
        }
        if has_psi {
            let [p0, p1, _, _] = &mut self.psi[..] else { unreachable!() };
            for &i in &self.x_active {
                if i >= nx {
                    continue;
                }
                let r = i * s;
                for j in 0..ny {
                    let k = r + j;
                    p0[k] = self.px_half.b[i] * p0[k] + self.px_half.a[i] * (ey[k + s] - ey[k]);
                    hz[k] -= mhz[k] * cb * p0[k];
                }
            }
            for i in 0..nx {
                let r = i * s;
                for &j in &self.y_active {
                    if j >= ny {
                        continue;
                    }
                    let k = r + j;
                    p1[k] = self.py_half.b[j] * p1[k] + self.py_half.a[j] * (ex[k + 1] - ex[k]);
                    hz[k] += mhz[k] * cb * p1[k];
                }
            }
        }
        if let Some((Component::Hz, kk)) = kick {
            Self::apply_kick(hz, mhz, cb, kk);
        }
        // E_x(i+½, j) ← ∂_y H_z ;  E_y(i, j+½) ← −∂_x H_z
        let (ca, cb) = (self.e.ca, self.e.cb);
        for i in 0..nx {
            let r = i * s;
            for j in 1..ny {
                let k = r + j;
                ex[k] = mex[k] * (ca * ex[k] + cb * (hz[k] - hz[k - 1]));
            }
        }
        for i in 1..nx {
            let r = i * s;
            for j in 0..ny {
                let k = r + j;
                ey[k] = mey[k] * (ca * ey[k] - cb * (hz[k] - hz[k - s]));
            }
        }
        if has_psi {
            let [_, _, p2, p3] = &mut self.psi[..] else { unreachable!() };
            for i in 0..nx {
                let r = i * s;
                for &j in &self.y_active {
                    if j == 0 || j >= ny {
                        continue;
                    }
                    let k = r + j;
                    p2[k] = self.py_node.b[j] * p2[k] + self.py_node.a[j] * (hz[k] - hz[k - 1]);
                    ex[k] += mex[k] * cb * p2[k];
                }
            }
            for &i in &self.x_active {
                if i == 0 || i >= nx {
                    continue;
                }
                let r = i * s;
                for j in 0..ny {
                    let k = r + j;
                    p3[k] = self.px_node.b[i] * p3[k] + self.px_node.a[i] * (hz[k] - hz[k - s]);
                    ey[k] -= mey[k] * cb * p3[k];
                }
            }
        }
        match kick {
            Some((Component::Ex, kk)) => Self::apply_kick(ex, mex, cb, kk),
            Some((Component::Ey, kk)) => Self::apply_kick(ey, mey, cb, kk),
            _ => {}
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Reads a probe stencil from the current state.
    pub fn read(&self, c: Component, st: &[(usize, f64)]) -> f64 {
        let f = self.state.field(c);
        st.iter().map(|&(k, w)| w * f[k]).sum()
    }
}

fn split2(v: &mut [Vec<f64>]) -> (&mut [f64], &mut [f64]) {
    let (a, b) = v.split_at_mut(1);
    (&mut a[0], &mut b[0])
}

fn split3(v: &mut [Vec<f64>]) -> (&mut [f64], &mut [f64], &mut [f64]) {
    let (a, rest) = v.split_at_mut(1);
    let (b, c) = rest.split_at_mut(1);
    (&mut a[0], &mut b[0], &mut c[0])
}

/// Recorded responses of one impulsive run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSet {
    pub dt: f64,
    pub source: DipoleSource,
    pub probes: Vec<Probe>,
    /// One series per probe, all the same length; sample k at lag (k+½)·dt.
    pub series: Vec<Vec<f64>>,
}

impl ResponseSet {
    pub fn len(&self) -> usize {
        self.series.first().map_or(0, |s| s.len())
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn get(&self, p: &Probe) -> Option<&[f64]> {
        self.probes.iter().position(|q| q == p).map(|k| self.series[k].as_slice())
    }
}

/// Steps between decay checks.
const CHECK_EVERY: usize = 256;

/// max |r| over the trailing 5% of every series relative to the global max.
pub fn tail_ratio(series: &[Vec<f64>]) -> f64 {
    let n = series.first().map_or(0, |s| s.len());
    if n == 0 {
        return 0.0;
    }
    let w = (n / 20).max(1);
    let gmax = series.iter().flat_map(|s| s.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    if gmax == 0.0 {
        return 0.0;
    }
    let tmax = series.iter().flat_map(|s| s[n - w..].iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    tmax / gmax
}

/// Impulse response at the probes; stops once the trailing window has decayed
/// below `tail_tol` (after a minimum of a few domain transit times).
pub fn run_dipole_response(
    mask: &PecMask,
    source: DipoleSource,
    probes: &[Probe],
    params: &FdtdParams,
) -> Result<ResponseSet> {
    params.validate(mask.dim())?;
    let pol = polarization_of(mask, source.component)?;
    for p in probes {
        if !pol.has(p.component) {
            return Err(Error::Parameter(format!("probe component {} not in {}", p.component.name(), pol.name())));
        }
    }
    let src_st = stencil(mask, source.component, source.pos)?;
    if src_st.iter().all(|&(k, _)| mask.mask(source.component)[k]) {
        return Err(Error::Geometry("source lies inside a conductor".into()));
    }
    let kick: Vec<(usize, f64)> = src_st.iter().map(|&(k, w)| (k, source.amplitude * w / params.dt)).collect();
    let probe_st: Vec<Vec<(usize, f64)>> =
        probes.iter().map(|p| stencil(mask, p.component, p.pos)).collect::<Result<_>>()?;
    let electric = source.is_electric();
    let (damp_e, damp_h) = match (electric, params.damping) {
        (true, _) | (false, Damping::ElectricOnly) => (true, false),
        (false, Damping::Dual) => (false, true),
    };
    let mut sim = Simulation::new(mask, pol, params.dt, params.sigma, damp_e, damp_h)?;
    let transit = 4 * (mask.nx + mask.ny);
    let min_steps = ((transit as f64 / params.dt).ceil() as usize).min(params.max_steps);
    let mut series: Vec<Vec<f64>> = vec![Vec::new(); probes.len()];
    let mut n = 0;
    loop {
        let k = if n == 0 { Some((source.component, kick.as_slice())) } else { None };
        sim.step(k);
        for (s, (p, st)) in series.iter_mut().zip(probes.iter().zip(&probe_st)) {
            s.push(sim.read(p.component, st));
        }
        n += 1;
        let check = n >= min_steps && (n % CHECK_EVERY == 0 || n == params.max_steps);
        if check {
            let r = tail_ratio(&series);
            if r <= params.tail_tol {
                break;
            }
            if n >= params.max_steps {
                return Err(Error::NonDecayingRun { steps: n, ratio: r, tol: params.tail_tol });
            }
        }
        if n >= params.max_steps && !check {
            let r = tail_ratio(&series);
            if r <= params.tail_tol {
                break;
            }
            return Err(Error::NonDecayingRun { steps: n, ratio: r, tol: params.tail_tol });
        }
    }
    Ok(ResponseSet { dt: params.dt, source, probes: probes.to_vec(), series })
}

/// Same-point response of a component to its own impulse.
pub fn self_response(mask: &PecMask, pos: Pos, component: Component, params: &FdtdParams) -> Result<Vec<f64>> {
    let probe = Probe { pos, component };
    let r = run_dipole_response(mask, DipoleSource::new(pos, component), &[probe], params)?;
    Ok(r.series.into_iter().next().unwrap_or_default())
}

/// Time integral Σ dt·r_k plus a tail estimate. The trailing 40% of the
/// series is split into two halves; if both show the same monotone decay
/// law, the remainder ∫_{t_end}^∞ is added: r_end/γ for a consistent
/// exponential rate γ, else r_end·t_end/(p − 1) for a consistent power law
/// t^{-p} with p > 1.05. Oscillating or irregular tails get no correction.
pub fn integrate_with_tail(series: &[f64], dt: f64) -> f64 {
    let n = series.len();
    let body: f64 = series.iter().sum::<f64>() * dt;
    if n < 100 {
        return body;
    }
    let w = (n / 100).max(1);
    let window = |lo: usize| -> (f64, f64) {
        let m = series[lo..lo + w].iter().sum::<f64>() / w as f64;
        (m, (lo as f64 + 0.5 * w as f64) * dt)
    };
    let (r0, t0) = window((3 * n) / 5 - w);
    let (r1, t1) = window((4 * n) / 5 - w);
    let (r2, t2) = window(n - w);
    let same_sign = r0 != 0.0 && r0.signum() == r1.signum() && r1.signum() == r2.signum();
    if !same_sign || r2.abs() >= r1.abs() || r1.abs() >= r0.abs() {
        return body;
    }
    let t_end = n as f64 * dt;
    let g01 = (r0 / r1).ln() / (t1 - t0);
    let g12 = (r1 / r2).ln() / (t2 - t1);
    if g12.is_finite() && g12 > 0.0 && (g01 - g12).abs() <= 0.05 * g12 {
        let r_end = r2 * (-g12 * (t_end - t2)).exp();
        return body + r_end / g12;
    }
    let p01 = -(r1 / r0).ln() / (t1 / t0).ln();
    let p12 = -(r2 / r1).ln() / (t2 / t1).ln();
    if !(p12 > 1.05) || !p12.is_finite() || (p01 - p12).abs() > 0.1 * p12 {
        return body;
    }
    let r_end = r2 * (t2 / t_end).powf(p12);
    body + r_end * t_end / (p12 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_parallel_plates_1d, rasterize};

    #[test]
    fn zero_fields_stay_zero() {
        let g = build_parallel_plates_1d(8, 2, 8).unwrap();
        let m = rasterize(&g);
        let mut sim = Simulation::new(&m, Polarization::OneD, 0.5, 0.1, true, false).unwrap();
        for _ in 0..50 {
            sim.step(None);
        }
        assert!(sim.state.fields.iter().all(|f| f.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn uniform_field_decays_by_recurrence() {
        // uniform E with no curl: only the damping recurrence acts
        let g = build_parallel_plates_1d(8, 2, 8).unwrap();
        let m = rasterize(&g);
        let (sigma, dt) = (0.2, 0.5);
        let mut sim = Simulation::new(&m, Polarization::OneD, dt, sigma, true, false).unwrap();
        let i = 15;
        sim.state.field_mut(Component::Ey)[i] = 1.0;
        sim.state.field_mut(Component::Ey)[i + 1] = 1.0;
        sim.state.field_mut(Component::Ey)[i - 1] = 1.0;
        sim.step(None);
        // E(i) sees no curl in the first step (H was zero and stays zero at i±½)
        let f = (1.0 - 0.5 * sigma * dt) / (1.0 + 0.5 * sigma * dt);
        let got = sim.state.field(Component::Ey)[i];
        assert!((got - f).abs() < 1e-15, "{got} vs {f}");
    }

    #[test]
    fn tail_integral_recovers_power_law() {
        let dt = 0.5;
        let p: f64 = 1.5;
        let t0: f64 = 10.0;
        let series: Vec<f64> = (0..4000).map(|k| ((k as f64 + 0.5) * dt + t0).powf(-p)).collect();
        let exact = t0.powf(1.0 - p) / (p - 1.0);
        let plain: f64 = series.iter().sum::<f64>() * dt;
        let est = integrate_with_tail(&series, dt);
        assert!((est - exact).abs() < 0.1 * (plain - exact).abs());
    }

    fn piston_mask() -> PecMask {
        rasterize(&crate::model::build_piston_2d(8, 4, Some(12), 4).unwrap())
    }

    fn node(i: i64, j: i64) -> Pos {
        Pos::new(2 * i, 2 * j)
    }

    #[test]
    fn response_is_linear_and_deterministic() {
        let m = piston_mask();
        let params = FdtdParams::new(0.1, 0.5, 4000, 1e-3);
        let probes = [Probe { pos: node(3, 3), component: Component::Ez }];
        let mut src = DipoleSource::new(node(15, 6), Component::Ez);
        let a = run_dipole_response(&m, src, &probes, &params).unwrap();
        let b = run_dipole_response(&m, src, &probes, &params).unwrap();
        assert_eq!(a, b);
        src.amplitude = -2.5;
        let c = run_dipole_response(&m, src, &probes, &params).unwrap();
        let peak = a.series[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.series[0].iter().zip(&c.series[0]) {
            assert!((y + 2.5 * x).abs() <= 1e-12 * peak);
        }
    }

    #[test]
    fn signals_respect_the_light_cone() {
        let m = piston_mask();
        let params = FdtdParams::new(0.1, 0.5, 4000, 1e-3);
        let far = node(3, 3);
        let r = run_dipole_response(&m, DipoleSource::new(node(15, 6), Component::Ez), &[Probe { pos: far, component: Component::Ez }], &params)
            .unwrap();
        // The stencil reaches one cell per step in each direction.
        let cells = 12 + 3;
        assert!(r.series[0][..cells - 1].iter().all(|&v| v == 0.0));
        assert!(r.series[0].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn damped_response_decays() {
        let m = piston_mask();
        let params = FdtdParams::new(0.2, 0.5, 20_000, 1e-6);
        let s = self_response(&m, node(15, 6), Component::Ez, &params).unwrap();
        let n = s.len();
        let peak = s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let tail = s[n - n / 10..].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(tail < 1e-5 * peak);
        assert!(matches!(
            self_response(&m, node(15, 6), Component::Ez, &FdtdParams::new(0.0, 0.5, 300, 1e-9)),
            Err(Error::NonDecayingRun { .. })
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = piston_mask();
        let p = FdtdParams::new(0.1, 0.8, 100, 1e-3);
        assert!(matches!(self_response(&m, node(15, 6), Component::Ez, &p), Err(Error::Courant { .. })));
        let p = FdtdParams::new(0.1, 0.5, 100, 1e-3);
        assert!(self_response(&m, node(5, 6), Component::Ez, &p).is_err());
    }
}
