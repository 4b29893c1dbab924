//! Independent imaginary-frequency oracles.
//!
//! The grid oracle solves the same staggered-grid problem the time-domain
//! solver discretizes, but directly at imaginary frequency ω = iη, where the
//! operator is real symmetric positive definite. The force integrand is
//! f(η) = (1/π)·Σ_faces n_j·w·⟨T_ij⟩(iη), with each field correlation obtained
//! from one scalar solve (E_z for TM, H_z for TE, E_y in 1D). Forces follow
//! from ∫₀^∞ f dη (T = 0) or from the Matsubara sum πω_T·Σ' f(nπω_T).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::force::{ForceParams, ForceParts, ForceResult};
use crate::model::{Axis, Component, PecMask, Polarization, Pos, StressSurface, TemperatureSpec};

/// Base frequency ξ₀ of the f(0⁺) extrapolation (grid units).
pub const ZERO_LIMIT_XI: f64 = 1e-4;

/// Terms of a Matsubara sum.
#[derive(Debug, Clone, PartialEq)]
pub struct MatsubaraSeries {
    pub omega_t: f64,
    /// πω_T·f(0⁺)/2.
    pub n0: f64,
    /// πω_T·Σ_{n≥1} f(ξ_n).
    pub npos: f64,
    pub total: f64,
    pub n_terms: usize,
    /// Magnitude of the last included term.
    pub tail_estimate: f64,
}

/// πω_T·[f(0⁺)/2 + Σ_{n≥1} f(nπω_T)]. `f` is called with 0.0 for the n = 0
/// term and must return the one-sided limit there. Summation stops once a
/// term falls below `tail_tol` times the running sum.
pub fn matsubara_sum(mut f: impl FnMut(f64) -> Result<f64>, omega_t: f64, n_max: usize, tail_tol: f64) -> Result<MatsubaraSeries> {
    if !(omega_t > 0.0) || !omega_t.is_finite() {
        return Err(Error::Parameter(format!("omega_T must be positive, got {omega_t}")));
    }
    let h = PI * omega_t;
    let n0 = h * 0.5 * f(0.0)?;
    let mut npos = 0.0;
    for n in 1..=n_max {
        let term = h * f(n as f64 * h)?;
        npos += term;
        let scale = (n0 + npos).abs();
        if term.abs() <= tail_tol * scale || (term == 0.0 && scale == 0.0) {
            return Ok(MatsubaraSeries { omega_t, n0, npos, total: n0 + npos, n_terms: n + 1, tail_estimate: term.abs() });
        }
    }
    Err(Error::MatsubaraNotConverged { n_max })
}

/// Imaginary-frequency integrand of two perfect-mirror plates at separation a
/// in 1D: f(ξ) = −(ξ/π)/(e^{2ξa} − 1), with f(0⁺) = −1/(2πa).
pub fn lifshitz_integrand_1d(xi: f64, a: f64) -> f64 {
    if xi == 0.0 {
        return -1.0 / (2.0 * PI * a);
    }
    -(xi / PI) / (2.0 * xi * a).exp_m1()
}

/// Lifshitz force between perfect mirrors in 1D (grid units; multiply by a²
/// for the dimensionless value). T = 0 gives −π/(24a²).
pub fn lifshitz_1d(a: f64, tau: f64) -> Result<ForceResult> {
    if !(a > 0.0) {
        return Err(Error::Parameter(format!("separation must be positive, got {a}")));
    }
    let temp = TemperatureSpec::new(tau, a)?;
    let params = ForceParams { a, d: None, tau, sigma: 0.0, resolution: 1.0, dt: 0.0 };
    if tau == 0.0 {
        let f = -PI / (24.0 * a * a);
        return Ok(ForceResult::from_parts(ForceParts { total: f, n0: 0.0, npos: f }, params));
    }
    let s = matsubara_sum(|xi| Ok(lifshitz_integrand_1d(xi, a)), temp.omega_t(), 1_000_000, 1e-17)?;
    Ok(ForceResult::from_parts(ForceParts { total: s.total, n0: s.n0, npos: s.npos }, params))
}

/// Boundary condition of the scalar problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarKind {
    /// Unknowns on nodes, zero on conductors (TM E_z, 1D E_y).
    Dirichlet,
    /// Unknowns on cell centres, no flux through conductor faces (TE H_z).
    Neumann,
}

fn scalar_kind(pol: Polarization) -> ScalarKind {
    match pol {
        Polarization::Te => ScalarKind::Neumann,
        _ => ScalarKind::Dirichlet,
    }
}

fn scalar_component(pol: Polarization) -> Component {
    match pol {
        Polarization::OneD => Component::Ey,
        Polarization::Tm => Component::Ez,
        Polarization::Te => Component::Hz,
    }
}

/// Complex-frequency stretch factor of the absorber continued to ω = iη, for
/// the damped contour with conductivity `sigma`.
fn stretch(sigma_a: f64, alpha: f64, eta: f64, sigma: f64) -> f64 {
    if sigma_a == 0.0 {
        return 1.0;
    }
    let kappa = 0.5 * ((sigma * sigma + 4.0 * eta * eta).sqrt() - sigma);
    1.0 + sigma_a / (alpha + kappa)
}

/// Unknown numbering for one scalar problem.
#[derive(Debug, Clone)]
struct Unknowns {
    kind: ScalarKind,
    /// array slot → unknown index
    map: Vec<Option<usize>>,
    count: usize,
}

impl Unknowns {
    fn new(mask: &PecMask, pol: Polarization) -> Self {
        let c = scalar_component(pol);
        let mut map = vec![None; mask.samples()];
        let mut count = 0;
        for (k, &m) in mask.mask(c).iter().enumerate() {
            if !m {
                map[k] = Some(count);
                count += 1;
            }
        }
        Self { kind: scalar_kind(pol), map, count }
    }
}

/// Symmetric positive definite operator of the scalar problem at η > 0.
fn assemble(mask: &PecMask, u: &Unknowns, eta: f64, sigma: f64) -> Result<CscMatrix<f64>> {
    let ab = &mask.absorber;
    let s_at = |v: &[f64], i: usize| stretch(v.get(i).copied().unwrap_or(0.0), ab.alpha, eta, sigma);
    let mut diag = vec![0.0; u.count];
    let mut off: Vec<(usize, usize, f64)> = Vec::new();
    // coupling c between slots k and l; a masked end is a zero (Dirichlet) or
    // a closed face (Neumann, no coupling)
    let mut edge = |k: usize, l: usize, c: f64| match (u.map[k], u.map[l]) {
        (Some(a), Some(b)) => {
            diag[a] += c;
            diag[b] += c;
            off.push((a, b, -c));
        }
        (Some(a), None) if u.kind == ScalarKind::Dirichlet => diag[a] += c,
        (None, Some(b)) if u.kind == ScalarKind::Dirichlet => diag[b] += c,
        _ => {}
    };
    let ny = mask.ny;
    let idx = |i: usize, j: usize| i * (ny + 1) + j;
    if mask.dim() == 1 {
        for i in 0..mask.nx {
            edge(i, i + 1, 1.0 / s_at(&ab.x_half, i));
        }
    } else if u.kind == ScalarKind::Dirichlet {
        for i in 0..=mask.nx {
            for j in 0..=ny {
                if i < mask.nx {
                    edge(idx(i, j), idx(i + 1, j), s_at(&ab.y_node, j) / s_at(&ab.x_half, i));
                }
                if j < ny {
                    edge(idx(i, j), idx(i, j + 1), s_at(&ab.x_node, i) / s_at(&ab.y_half, j));
                }
            }
        }
    } else {
        let ex = mask.mask(Component::Ex);
        let ey = mask.mask(Component::Ey);
        for i in 0..mask.nx {
            for j in 0..ny {
                if i + 1 < mask.nx && !ey[idx(i + 1, j)] {
                    edge(idx(i, j), idx(i + 1, j), s_at(&ab.y_half, j) / s_at(&ab.x_node, i + 1));
                }
                if j + 1 < ny && !ex[idx(i, j + 1)] {
                    edge(idx(i, j), idx(i, j + 1), s_at(&ab.x_half, i) / s_at(&ab.y_node, j + 1));
                }
            }
        }
    }
    for (k, slot) in u.map.iter().enumerate() {
        let Some(a) = *slot else { continue };
        let mass = if mask.dim() == 1 {
            s_at(&ab.x_node, k)
        } else {
            let (i, j) = (k / (ny + 1), k % (ny + 1));
            match u.kind {
                ScalarKind::Dirichlet => s_at(&ab.x_node, i) * s_at(&ab.y_node, j),
                ScalarKind::Neumann => s_at(&ab.x_half, i) * s_at(&ab.y_half, j),
            }
        };
        diag[a] += eta * eta * mass;
    }
    let mut coo = CooMatrix::new(u.count, u.count);
    for (a, &d) in diag.iter().enumerate() {
        coo.push(a, a, d);
    }
    for (a, b, v) in off {
        coo.push(a, b, v);
        coo.push(b, a, v);
    }
    Ok(CscMatrix::from(&coo))
}

fn factor(m: &CscMatrix<f64>) -> Result<CscCholesky<f64>> {
    CscCholesky::factor(m).map_err(|e| Error::Solver(format!("Cholesky factorization failed: {e:?}")))
}

/// Scalar Green's function at imaginary frequency `xi` for a unit point source
/// at `source` (a native sample of the scalar component of `pol`). Returns the
/// full component array (zero on masked samples). `sigma` sets the absorber
/// continuation.
pub fn green_solve_imagfreq(mask: &PecMask, pol: Polarization, xi: f64, source: Pos, sigma: f64) -> Result<Vec<f64>> {
    if !(xi > 0.0) {
        return Err(Error::Parameter(format!("imaginary frequency must be positive, got {xi}")));
    }
    let c = scalar_component(pol);
    let k = mask
        .index(c, source)
        .ok_or_else(|| Error::Geometry(format!("source is not a {} sample", c.name())))?;
    let u = Unknowns::new(mask, pol);
    let Some(row) = u.map[k] else {
        return Err(Error::Geometry("source sits on a conductor".into()));
    };
    let chol = factor(&assemble(mask, &u, xi, sigma)?)?;
    let mut b = DMatrix::zeros(u.count, 1);
    b[(row, 0)] = 1.0;
    let x = chol.solve(&b);
    Ok(u.map.iter().map(|m| m.map_or(0.0, |r| x[(r, 0)])).collect())
}

/// Green's function of −d²/dx² + ξ² on [0, L] with Dirichlet ends, discretized
/// with spacing `h` (L/h nodes), for a unit source at `x_src`; returns the
/// value at `x_obs`. Both points must lie on the grid.
pub fn green_interval_1d(length: f64, h: f64, xi: f64, x_src: f64, x_obs: f64) -> Result<f64> {
    let n = (length / h).round() as usize;
    if n < 2 || ((n as f64) * h - length).abs() > 1e-9 * length {
        return Err(Error::Parameter("interval length must be a multiple of h".into()));
    }
    let node = |x: f64| -> Result<usize> {
        let k = (x / h).round();
        if (k * h - x).abs() > 1e-9 * length || k <= 0.0 || k >= n as f64 {
            return Err(Error::Parameter(format!("point {x} is not an interior grid node")));
        }
        Ok(k as usize - 1)
    };
    let (s, o) = (node(x_src)?, node(x_obs)?);
    let m = n - 1;
    let mut coo = CooMatrix::new(m, m);
    for i in 0..m {
        coo.push(i, i, 2.0 / (h * h) + xi * xi);
        if i + 1 < m {
            coo.push(i, i + 1, -1.0 / (h * h));
            coo.push(i + 1, i, -1.0 / (h * h));
        }
    }
    let chol = factor(&CscMatrix::from(&coo))?;
    let mut b = DMatrix::zeros(m, 1);
    b[(s, 0)] = 1.0 / h;
    Ok(chol.solve(&b)[(o, 0)])
}

/// One contribution c·bᵀA⁻¹b' (times −η² when `scalar`).
#[derive(Debug, Clone, Copy)]
struct Term {
    coef: f64,
    a: usize,
    b: usize,
    scalar: bool,
}

/// Force integrand on a stress surface, evaluated by direct solves.
#[derive(Debug, Clone)]
pub struct GridOracle<'m> {
    mask: &'m PecMask,
    unknowns: Unknowns,
    /// Functionals as sparse vectors over unknowns.
    functionals: Vec<Vec<(usize, f64)>>,
    terms: Vec<Term>,
    sigma: f64,
}

impl<'m> GridOracle<'m> {
    /// `sigma` is the contour conductivity used to continue the absorber.
    pub fn new(mask: &'m PecMask, surface: &StressSurface, dir: Axis, sigma: f64) -> Result<Self> {
        surface.check_against(mask)?;
        let pol = surface.polarization;
        let unknowns = Unknowns::new(mask, pol);
        let sc = scalar_component(pol);
        let mut index: BTreeMap<(Pos, Component), usize> = BTreeMap::new();
        let mut functionals: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut get = |p: Pos, c: Component| -> Result<usize> {
            if let Some(&k) = index.get(&(p, c)) {
                return Ok(k);
            }
            let v = functional(mask, &unknowns, pol, c, p)?;
            functionals.push(v);
            index.insert((p, c), functionals.len() - 1);
            Ok(functionals.len() - 1)
        };
        let mut terms = Vec::new();
        let mut points = surface.points.clone();
        points.sort_by_key(|p| p.pos);
        for p in &points {
            for f in &p.faces {
                let sw = f.normal.sign as f64 * f.weight / PI;
                if f.normal.axis == dir {
                    for &c in pol.components() {
                        let coef = if c.axis() == Some(dir) { 0.5 } else { -0.5 };
                        let k = get(p.pos, c)?;
                        terms.push(Term { coef: sw * coef, a: k, b: k, scalar: c == sc });
                    }
                } else {
                    let comp = |ax: Axis| pol.components().iter().copied().find(|c| c.axis() == Some(ax));
                    let (Some(ca), Some(cb)) = (comp(dir), comp(f.normal.axis)) else {
                        return Err(Error::Parameter("off-diagonal stress needs in-plane components".into()));
                    };
                    let (ka, kb) = (get(p.pos, ca)?, get(p.pos, cb)?);
                    terms.push(Term { coef: -sw, a: ka, b: kb, scalar: false });
                }
            }
        }
        Ok(Self { mask, unknowns, functionals, terms, sigma })
    }

    /// f(η) for η > 0.
    pub fn integrand(&self, eta: f64) -> Result<f64> {
        if !(eta > 0.0) {
            return Err(Error::Parameter(format!("imaginary frequency must be positive, got {eta}")));
        }
        let chol = factor(&assemble(self.mask, &self.unknowns, eta, self.sigma)?)?;
        let n = self.unknowns.count;
        let mut rhs = DMatrix::zeros(n, self.functionals.len());
        for (j, v) in self.functionals.iter().enumerate() {
            for &(r, w) in v {
                rhs[(r, j)] += w;
            }
        }
        let x = chol.solve(&rhs);
        let dot = |a: usize, b: usize| -> f64 { self.functionals[a].iter().map(|&(r, w)| w * x[(r, b)]).sum() };
        Ok(self
            .terms
            .iter()
            .map(|t| {
                let v = dot(t.a, t.b);
                t.coef * if t.scalar { -eta * eta * v } else { v }
            })
            .sum())
    }

    /// f(0⁺) by Richardson extrapolation from η = ξ₀ and ξ₀/2.
    pub fn integrand_zero(&self) -> Result<f64> {
        Ok(2.0 * self.integrand(0.5 * ZERO_LIMIT_XI)? - self.integrand(ZERO_LIMIT_XI)?)
    }

    /// f(0⁺) for η = 0, f(η) otherwise.
    pub fn eval(&self, eta: f64) -> Result<f64> {
        if eta == 0.0 {
            self.integrand_zero()
        } else {
            self.integrand(eta)
        }
    }
}

/// Sparse functional (over unknowns) representing component `c` at `p`:
/// stencil weights for the scalar component, forward differences of the
/// scalar for the in-plane components.
fn functional(mask: &PecMask, u: &Unknowns, pol: Polarization, c: Component, p: Pos) -> Result<Vec<(usize, f64)>> {
    let st = crate::fdtd::stencil(mask, c, p)?;
    let cmask = mask.mask(c);
    let mut out: BTreeMap<usize, f64> = BTreeMap::new();
    let mut add = |slot: Option<usize>, w: f64| {
        if let Some(r) = slot.and_then(|s| u.map.get(s).copied().flatten()) {
            *out.entry(r).or_insert(0.0) += w;
        }
    };
    let sc = scalar_component(pol);
    for (k, w) in st {
        if cmask[k] {
            continue;
        }
        if c == sc {
            add(Some(k), w);
            continue;
        }
        let q = mask.position(c, k);
        // neighbours of the sample along the difference direction, as scalar slots
        let (lo, hi) = match (mask.dim(), c) {
            (1, _) => (Pos::new(q.x2 - 1, 0), Pos::new(q.x2 + 1, 0)),
            (_, Component::Hx) | (_, Component::Ex) => (Pos::new(q.x2, q.y2 - 1), Pos::new(q.x2, q.y2 + 1)),
            _ => (Pos::new(q.x2 - 1, q.y2), Pos::new(q.x2 + 1, q.y2)),
        };
        add(mask.index(sc, hi), w);
        add(mask.index(sc, lo), -w);
    }
    Ok(out.into_iter().filter(|&(_, w)| w != 0.0).collect())
}

/// Options for the grid reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceOptions {
    /// Gauss–Legendre nodes for the T = 0 frequency integral.
    pub quad_nodes: usize,
    pub n_max: usize,
    pub tail_tol: f64,
    pub jobs: usize,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self { quad_nodes: 64, n_max: 10_000, tail_tol: 1e-10, jobs: 1 }
    }
}

fn map_jobs<T: Send>(jobs: usize, xs: &[f64], f: impl Fn(f64) -> Result<T> + Sync) -> Result<Vec<T>> {
    if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
        pool.install(|| xs.par_iter().map(|&x| f(x)).collect())
    } else {
        xs.iter().map(|&x| f(x)).collect()
    }
}

/// Mapped Gauss–Legendre nodes and weights for ∫₀^∞ dη with η = c·t/(1 − t).
pub fn half_line_rule(n: usize, scale: f64) -> Result<Vec<(f64, f64)>> {
    let deg = NonZeroUsize::new(n).ok_or_else(|| Error::Parameter("quadrature needs at least one node".into()))?;
    let rule = GaussLegendre::new(deg);
    Ok(rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| {
            let t = 0.5 * (x + 1.0);
            let eta = scale * t / (1.0 - t);
            let jac = scale / ((1.0 - t) * (1.0 - t));
            (eta, 0.5 * w * jac)
        })
        .collect())
}

/// ∫₀^∞ f(η) dη on the grid (T = 0).
pub fn force_zero_temperature(oracle: &GridOracle, length: f64, opts: &ReferenceOptions) -> Result<f64> {
    let rule = half_line_rule(opts.quad_nodes, 1.0 / length)?;
    let etas: Vec<f64> = rule.iter().map(|r| r.0).collect();
    let vals = map_jobs(opts.jobs, &etas, |e| oracle.integrand(e))?;
    Ok(rule.iter().zip(vals).map(|((_, w), v)| w * v).sum())
}

/// Grid reference force for one surface at temperature `temp` (T = 0 uses the
/// frequency integral, T > 0 the Matsubara sum). Returns n = 0 and n > 0 parts.
pub fn force_matsubara_grid(oracle: &GridOracle, temp: &TemperatureSpec, opts: &ReferenceOptions) -> Result<ForceParts> {
    if temp.tau == 0.0 {
        let f = force_zero_temperature(oracle, temp.length, opts)?;
        return Ok(ForceParts { total: f, n0: 0.0, npos: f });
    }
    let s = matsubara_sum(|eta| oracle.eval(eta), temp.omega_t(), opts.n_max, opts.tail_tol)?;
    Ok(ForceParts { total: s.total, n0: s.n0, npos: s.npos })
}

/// Integrand values on a list of frequencies (η = 0 means f(0⁺)).
pub fn force_freq_grid(oracle: &GridOracle, etas: &[f64], jobs: usize) -> Result<Vec<f64>> {
    map_jobs(jobs, etas, |e| oracle.eval(e))
}

/// Force per unit length of a z-invariant 3D geometry from its 2D integrand:
/// F = πω_T·Σ' ∫ dk_z/(2π) f(√(ξ_n² + k_z²)) (T = 0: ∫dξ instead of the sum).
/// `f2d` must be the TE + TM integrand.
pub fn kz_integrate(f2d: impl Fn(f64) -> Result<f64> + Sync, temp: &TemperatureSpec, opts: &ReferenceOptions) -> Result<f64> {
    let rule = half_line_rule(opts.quad_nodes, 1.0 / temp.length)?;
    // ∫_{-∞}^{∞} dk/(2π) g(k) = (1/π)∫₀^∞ g(k) dk
    let kz = |xi: f64| -> Result<f64> {
        let mut s = 0.0;
        for &(k, w) in &rule {
            s += w * f2d((xi * xi + k * k).sqrt())?;
        }
        Ok(s / PI)
    };
    if temp.tau == 0.0 {
        let etas: Vec<f64> = rule.iter().map(|r| r.0).collect();
        let vals = map_jobs(opts.jobs, &etas, kz)?;
        return Ok(rule.iter().zip(vals).map(|((_, w), v)| w * v).sum());
    }
    Ok(matsubara_sum(|xi| kz(xi), temp.omega_t(), opts.n_max, opts.tail_tol)?.total)
}
