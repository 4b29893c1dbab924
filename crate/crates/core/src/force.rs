//! Forces from weighted stress traces.
//!
//! F = Σ_k dt·[g_E(t_k)·Γ_E(t_k) + g_H(t_k)·Γ_H(t_k)] + σT·(∫Γ_E + ∫Γ_H).
//! The first sum is the n>0 (or T=0) part, the second the n=0 part.
//! Sign convention: F is the force on the enclosed body along +i; for the
//! built-in layouts (right-hand body) F < 0 is attraction.

use crate::error::{Error, Result};
use crate::model::{ContourSpec, Polarization, TemperatureSpec};
use crate::stress::StressTrace;
use crate::weights::{
    augment_zero_mode, synthesize_time_weight, thermal_time_weight, SynthesisOptions, WeightFunction, WeightKind,
    WeightSpectrum,
};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ForceParts {
    pub total: f64,
    pub n0: f64,
    pub npos: f64,
}

impl ForceParts {
    pub fn new(n0: f64, npos: f64) -> Self {
        Self { total: n0 + npos, n0, npos }
    }
    pub fn scaled(self, f: f64) -> Self {
        Self { total: self.total * f, n0: self.n0 * f, npos: self.npos * f }
    }
    pub fn add(self, o: ForceParts) -> Self {
        ForceParts::new(self.n0 + o.n0, self.npos + o.npos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ForceParams {
    pub a: f64,
    pub d: Option<f64>,
    pub tau: f64,
    pub sigma: f64,
    pub resolution: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceResult {
    pub total: f64,
    pub n0: f64,
    pub npos: f64,
    pub te: Option<ForceParts>,
    pub tm: Option<ForceParts>,
    pub params: ForceParams,
}

impl ForceResult {
    pub fn from_parts(p: ForceParts, params: ForceParams) -> Self {
        Self { total: p.total, n0: p.n0, npos: p.npos, te: None, tm: None, params }
    }

    pub fn parts(&self) -> ForceParts {
        ForceParts { total: self.total, n0: self.n0, npos: self.npos }
    }

    /// Sum of per-polarization results.
    pub fn combine_polarizations(te: ForceParts, tm: ForceParts, params: ForceParams) -> Self {
        let t = te.add(tm);
        Self { total: t.total, n0: t.n0, npos: t.npos, te: Some(te), tm: Some(tm), params }
    }

    /// Rescales every force value (e.g. to F·a² or F·a³).
    pub fn scaled(&self, f: f64) -> Self {
        let p = self.parts().scaled(f);
        Self {
            total: p.total,
            n0: p.n0,
            npos: p.npos,
            te: self.te.map(|x| x.scaled(f)),
            tm: self.tm.map(|x| x.scaled(f)),
            params: self.params,
        }
    }
}

/// Weighted integration of a trace.
pub fn integrate_force(trace: &StressTrace, ge: &WeightFunction, gh: &WeightFunction) -> Result<ForceParts> {
    for g in [ge, gh] {
        if (g.dt - trace.dt).abs() > 1e-12 * trace.dt {
            return Err(Error::DtMismatch { trace: trace.dt, weight: g.dt });
        }
    }
    let ne = trace.gamma_e.len();
    let nh = trace.gamma_h.len();
    if ge.values.len() < ne || gh.values.len() < nh {
        return Err(Error::WindowMismatch { trace: ne.max(nh), weight: ge.values.len().min(gh.values.len()) });
    }
    let dt = trace.dt;
    let se: f64 = trace.gamma_e.iter().zip(&ge.values).map(|(g, w)| g * w).sum();
    let sh: f64 = trace.gamma_h.iter().zip(&gh.values).map(|(g, w)| g * w).sum();
    let npos = dt * (se + sh);
    let n0 = ge.zero_mode_constant * trace.dc_e + gh.zero_mode_constant * trace.dc_h;
    Ok(ForceParts::new(n0, npos))
}

/// n=0 part alone: σT·∫Γ dt.
pub fn zero_mode_force(trace: &StressTrace, sigma: f64, temp: &TemperatureSpec) -> Result<f64> {
    if temp.tau > 0.0 && sigma <= 0.0 {
        return Err(Error::ZeroModeRequiresSigma);
    }
    Ok(sigma * temp.temperature() * (trace.dc_e + trace.dc_h))
}

/// Force at temperature `temp` with the pole-subtracted weight and zero mode
/// (both field types share the weight under dual damping).
pub fn thermal_force(trace: &StressTrace, sigma: f64, temp: &TemperatureSpec, opts: SynthesisOptions) -> Result<ForceParts> {
    let n = trace.len().max(2);
    let g = thermal_time_weight(sigma, *temp, trace.dt, n, opts)?;
    integrate_force(trace, &g, &g)
}

/// Negative control: coth weight without pole subtraction and with an
/// arbitrary value in the ξ = 0 bin; no zero-mode term.
pub fn integrate_force_naive(
    trace: &StressTrace,
    sigma: f64,
    temp: &TemperatureSpec,
    zero_bin_value: f64,
    opts: SynthesisOptions,
) -> Result<f64> {
    if !(temp.tau > 0.0) {
        return Err(Error::Parameter("naive control needs tau > 0".into()));
    }
    let n = trace.len().max(2);
    let spec = WeightSpectrum::for_run(
        WeightKind::Naive { zero_bin: zero_bin_value },
        sigma,
        *temp,
        trace.dt,
        n,
        opts.oversample,
    )?;
    let g = synthesize_time_weight(&spec, trace.dt, n)?;
    let g = WeightFunction { zero_mode_constant: 0.0, ..g };
    Ok(integrate_force(trace, &g, &g)?.total)
}

/// Convenience: force for a set of per-polarization traces.
pub fn force_from_traces(
    traces: &[StressTrace],
    sigma: f64,
    temp: &TemperatureSpec,
    opts: SynthesisOptions,
    params: ForceParams,
) -> Result<ForceResult> {
    let contour = ContourSpec::new(sigma, 1.0, 2)?;
    contour.check_temperature(temp)?;
    let mut te = None;
    let mut tm = None;
    let mut total = ForceParts::default();
    for t in traces {
        let p = thermal_force(t, sigma, temp, opts)?;
        total = total.add(p);
        match t.polarization {
            Polarization::Te => te = Some(p),
            Polarization::Tm => tm = Some(p),
            Polarization::OneD => {}
        }
    }
    Ok(ForceResult { total: total.total, n0: total.n0, npos: total.npos, te, tm, params })
}

/// Zero-mode weight for callers that build their own g(t).
pub fn with_zero_mode(g: &WeightFunction, sigma: f64, temp: &TemperatureSpec) -> Result<WeightFunction> {
    let c = ContourSpec::new(sigma, 1.0, 2)?;
    augment_zero_mode(g, &c, temp)
}
