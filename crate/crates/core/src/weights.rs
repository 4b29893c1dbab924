//! Contour weights g(ξ) and their time-domain synthesis g(t).
//!
//! Conventions: a response r(t) with transform r̃(ξ) = ∫ r(t) e^{iξt} dt
//! contributes (1/π)·Im ∫₀^∞ g(ξ) r̃(ξ) dξ = Σ_t dt·g(t)·r(t), so
//! g(t) = (1/π)·Im ∫₀^{ξmax} g(ξ)·e^{iξt} dξ. The 1/π lives in g(t).

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::{ContourSpec, TemperatureSpec};

/// Fraction of the band covered by the raised-cosine taper.
pub const TAPER_FRACTION: f64 = 0.1;
/// Below this |z| the series for coth z − 1/z is used.
const SERIES_THRESHOLD: f64 = 1e-3;

/// ω(ξ) = ξ·√(1 + iσ/ξ).
pub fn omega_contour(xi: f64, sigma: f64) -> Result<C64> {
    if !(xi > 0.0) {
        return Err(Error::Parameter(format!("contour requires xi > 0, got {xi}")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::Parameter(format!("sigma must be >= 0, got {sigma}")));
    }
    Ok(omega(xi, sigma))
}

fn omega(xi: f64, sigma: f64) -> C64 {
    xi * (C64::new(1.0, sigma / xi)).sqrt()
}

/// g[ω(ξ)] = −iξ·√(1+iσ/ξ)·(1 + iσ/2ξ).
pub fn weight_t0(xi: f64, sigma: f64) -> C64 {
    let s = C64::new(1.0, sigma / xi).sqrt();
    C64::new(0.0, -xi) * s * C64::new(1.0, sigma / (2.0 * xi))
}

/// coth z for Re z ≥ 0, stable for large |z|.
pub fn coth(z: C64) -> C64 {
    let z = if z.re < 0.0 { -z } else { z };
    let e = (-2.0 * z).exp();
    (1.0 + e) / (1.0 - e)
}

/// coth z − 1/z, by series near the origin.
pub fn coth_minus_inv(z: C64) -> C64 {
    if z.norm() < SERIES_THRESHOLD {
        let z2 = z * z;
        z * (1.0 / 3.0 - z2 / 45.0 + 2.0 * z2 * z2 / 945.0)
    } else {
        let sign = if z.re < 0.0 { -1.0 } else { 1.0 };
        sign * coth(z) - 1.0 / z
    }
}

/// Naive thermal weight g[ω(ξ)]·coth(ω/ω_T); keeps the n=0 pole.
pub fn weight_naive(xi: f64, sigma: f64, omega_t: f64) -> Result<C64> {
    if !(omega_t > 0.0) {
        return Err(Error::Parameter("naive weight needs omega_T > 0 (use weight_t0)".into()));
    }
    let w = omega(xi, sigma);
    Ok(weight_t0(xi, sigma) * coth(w / omega_t))
}

/// Pole-subtracted weight g[ω(ξ)]·(coth(ω/ω_T) − ω_T/ω).
pub fn weight_pole_subtracted(xi: f64, sigma: f64, omega_t: f64) -> C64 {
    if omega_t <= 0.0 {
        return weight_t0(xi, sigma);
    }
    // coth z − 1/z with z = ω/ω_T equals coth(ω/ω_T) − ω_T/ω
    weight_t0(xi, sigma) * coth_minus_inv(omega(xi, sigma) / omega_t)
}

/// ξ → 0⁺ limit of the pole-subtracted weight: iσ²/(6ω_T).
pub fn pole_subtracted_limit(sigma: f64, omega_t: f64) -> C64 {
    C64::new(0.0, sigma * sigma / (6.0 * omega_t))
}

/// Coefficient A of the ξ^{-1/2} singularity of weight_t0 at small ξ:
/// weight_t0 ≈ A·ξ^{-1/2}, A = (σ^{3/2}/2)·e^{iπ/4}.
pub fn t0_singular_coefficient(sigma: f64) -> C64 {
    0.5 * sigma.powf(1.5) * C64::from_polar(1.0, PI / 4.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Electric,
    Magnetic,
}

/// Which weight to tabulate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind {
    /// T = 0 weight g[ω(ξ)].
    ZeroTemperature,
    /// g_{n>0}(ξ); falls back to ZeroTemperature when τ = 0.
    PoleSubtracted,
    /// g·coth with an arbitrary value i·zero_bin at the ξ = 0 bin (a real
    /// value there would drop out of the sine synthesis).
    Naive { zero_bin: f64 },
}

/// Sampled complex weight on positive frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpectrum {
    pub xi: Vec<f64>,
    pub values: Vec<C64>,
    pub variant: Variant,
    pub contour: ContourSpec,
    pub temperature: TemperatureSpec,
    /// Value used at ξ = 0 for the first trapezoid panel.
    pub zero_limit: C64,
    /// Coefficient A of an A·ξ^{-1/2}·e^{-ξ/σ} part that synthesis treats
    /// analytically; `values` always hold the full weight.
    pub singular: Option<C64>,
}

impl WeightSpectrum {
    /// Tabulates `kind` on ξ_k = k·Δξ, k = 1..=n.
    pub fn build(
        kind: WeightKind,
        contour: ContourSpec,
        temperature: TemperatureSpec,
        dxi: f64,
        n: usize,
    ) -> Result<Self> {
        if !(dxi > 0.0) || n < 2 {
            return Err(Error::Parameter("spectrum grid needs dxi > 0 and n >= 2".into()));
        }
        contour.check_temperature(&temperature)?;
        let sigma = contour.sigma;
        let wt = temperature.omega_t();
        let xi: Vec<f64> = (1..=n).map(|k| k as f64 * dxi).collect();
        let (values, zero_limit, singular): (Vec<C64>, C64, Option<C64>) = match kind {
            WeightKind::PoleSubtracted if wt > 0.0 => (
                xi.iter().map(|&x| weight_pole_subtracted(x, sigma, wt)).collect(),
                pole_subtracted_limit(sigma, wt),
                None,
            ),
            WeightKind::ZeroTemperature | WeightKind::PoleSubtracted => {
                let vals = xi.iter().map(|&x| weight_t0(x, sigma)).collect();
                if sigma > 0.0 {
                    (vals, C64::new(0.0, 0.0), Some(t0_singular_coefficient(sigma)))
                } else {
                    (vals, C64::new(0.0, 0.0), None)
                }
            }
            WeightKind::Naive { zero_bin } => {
                let vals = xi
                    .iter()
                    .map(|&x| weight_naive(x, sigma, wt))
                    .collect::<Result<Vec<_>>>()?;
                (vals, C64::new(0.0, zero_bin), None)
            }
        };
        let spec = ContourSpec::new(sigma, xi[n - 1], n)?;
        Ok(Self {
            xi,
            values,
            variant: Variant::Electric,
            contour: spec,
            temperature,
            zero_limit,
            singular,
        })
    }

    /// Grid matched to a run of `n_steps` steps: Δξ = 2π/(M·N·dt), ξmax = π/dt.
    pub fn for_run(
        kind: WeightKind,
        sigma: f64,
        temperature: TemperatureSpec,
        dt: f64,
        n_steps: usize,
        oversample: usize,
    ) -> Result<Self> {
        let m = oversample.max(1);
        let len = m * n_steps.max(2);
        let dxi = 2.0 * PI / (len as f64 * dt);
        let contour = ContourSpec::new(sigma, PI / dt, len / 2)?;
        Self::build(kind, contour, temperature, dxi, len / 2)
    }
}

/// Divides by (1 + iσ/ξ): the weight for an H response computed in a medium
/// whose conductivity sits on E only.
pub fn magnetic_variant(spectrum: &WeightSpectrum) -> WeightSpectrum {
    let sigma = spectrum.contour.sigma;
    let mut out = spectrum.clone();
    out.variant = Variant::Magnetic;
    if sigma == 0.0 {
        return out;
    }
    for (v, &x) in out.values.iter_mut().zip(&spectrum.xi) {
        *v /= C64::new(1.0, sigma / x);
    }
    // both the pole-subtracted limit and the ξ^{-1/2} singularity vanish
    out.zero_limit = C64::new(0.0, 0.0);
    out.singular = None;
    out
}

/// Real time-domain weight g(t_k) at t_k = (k + ½)·dt.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunction {
    pub dt: f64,
    pub values: Vec<f64>,
    /// σ·T, applied to the time integral of the trace.
    pub zero_mode_constant: f64,
    pub variant: Variant,
}

impl WeightFunction {
    pub fn time(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dt
    }
}

/// Raised-cosine taper: 1 below (1−f)·ξmax, falling to 0 at ξmax.
pub fn taper(xi: f64, xi_max: f64) -> f64 {
    let start = (1.0 - TAPER_FRACTION) * xi_max;
    if xi <= start {
        1.0
    } else if xi >= xi_max {
        0.0
    } else {
        0.5 * (1.0 + (PI * (xi - start) / (xi_max - start)).cos())
    }
}

/// g(t_k) = (1/π)·Im ∫₀^{ξmax} taper·g(ξ)·e^{iξt_k} dξ by the trapezoid rule
/// over [0, ξ₁, …, ξ_n]; an A·ξ^{-1/2}·e^{-ξ/σ} part is subtracted before
/// quadrature and added back in closed form.
pub fn synthesize_time_weight(spectrum: &WeightSpectrum, dt: f64, n_steps: usize) -> Result<WeightFunction> {
    let xi = &spectrum.xi;
    let n = xi.len();
    if n < 2 || !(dt > 0.0) {
        return Err(Error::Parameter("synthesis needs at least two samples and dt > 0".into()));
    }
    if !(xi[0] > 0.0) || xi.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Parameter("xi samples must be positive and strictly ascending".into()));
    }
    let xi_max = xi[n - 1];
    if xi_max > PI / dt * (1.0 + 1e-12) {
        return Err(Error::Parameter(format!(
            "spectrum cutoff {xi_max} above Nyquist {}",
            PI / dt
        )));
    }
    if spectrum.values.len() != n || spectrum.values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Parameter("spectrum values must be finite and match xi".into()));
    }
    let sigma = spectrum.contour.sigma;
    let sing = spectrum.singular.filter(|_| sigma > 0.0);
    // regular remainder times taper, at [0, ξ₁..ξ_n]
    let mut grid = Vec::with_capacity(n + 1);
    let mut vals = Vec::with_capacity(n + 1);
    grid.push(0.0);
    vals.push(spectrum.zero_limit * taper(0.0, xi_max));
    for (k, &x) in xi.iter().enumerate() {
        let mut v = spectrum.values[k];
        if let Some(a) = sing {
            v -= a * x.powf(-0.5) * (-x / sigma).exp();
        }
        grid.push(x);
        vals.push(v * taper(x, xi_max));
    }
    // trapezoid weights
    let m = grid.len();
    let mut w = vec![0.0; m];
    for k in 0..m - 1 {
        let h = grid[k + 1] - grid[k];
        w[k] += 0.5 * h;
        w[k + 1] += 0.5 * h;
    }
    let dxi = xi[0];
    let uniform = xi.iter().enumerate().all(|(k, &x)| ((k + 1) as f64 * dxi - x).abs() <= 1e-9 * x);
    let l_exact = 2.0 * PI / (dxi * dt);
    let l = l_exact.round();
    let use_fft = uniform && (l - l_exact).abs() < 1e-6 * l_exact && l as usize >= n_steps && l as usize > n;
    let mut out = vec![0.0; n_steps];
    if use_fft {
        let l = l as usize;
        let mut buf = vec![C64::new(0.0, 0.0); l];
        for k in 0..m {
            buf[k] = w[k] * vals[k] * C64::from_polar(1.0, grid[k] * 0.5 * dt);
        }
        let mut planner = FftPlanner::new();
        planner.plan_fft_inverse(l).process(&mut buf);
        for (k, o) in out.iter_mut().enumerate() {
            *o = buf[k].im / PI;
        }
    } else {
        for (j, o) in out.iter_mut().enumerate() {
            let t = (j as f64 + 0.5) * dt;
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..m {
                acc += w[k] * vals[k] * C64::from_polar(1.0, grid[k] * t);
            }
            *o = acc.im / PI;
        }
    }
    if let Some(a) = sing {
        let sp = PI.sqrt();
        for (j, o) in out.iter_mut().enumerate() {
            let t = (j as f64 + 0.5) * dt;
            let z = C64::new(1.0 / sigma, -t).sqrt();
            *o += (a * sp / z).im / PI;
        }
    }
    Ok(WeightFunction { dt, values: out, zero_mode_constant: 0.0, variant: spectrum.variant })
}

/// Sets the zero-mode constant σ·T.
pub fn augment_zero_mode(g: &WeightFunction, contour: &ContourSpec, temp: &TemperatureSpec) -> Result<WeightFunction> {
    contour.check_temperature(temp)?;
    let mut out = g.clone();
    out.zero_mode_constant = contour.sigma * temp.temperature();
    Ok(out)
}

/// Options for building run-matched weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    /// Spectrum grid refinement M (Δξ = 2π/(M·N·dt)).
    pub oversample: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self { oversample: 8 }
    }
}

/// Pole-subtracted (or T=0) time weight with its zero-mode constant, sized for
/// a trace of `n_steps` samples.
pub fn thermal_time_weight(
    sigma: f64,
    temp: TemperatureSpec,
    dt: f64,
    n_steps: usize,
    opts: SynthesisOptions,
) -> Result<WeightFunction> {
    let spec = WeightSpectrum::for_run(WeightKind::PoleSubtracted, sigma, temp, dt, n_steps, opts.oversample)?;
    let g = synthesize_time_weight(&spec, dt, n_steps)?;
    augment_zero_mode(&g, &spec.contour, &temp)
}
