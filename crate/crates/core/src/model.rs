//! System parameters, derived combinations and scenario classification.

use crate::error::{invalid, Result};
use alloc::format;

/// Whether the chemical equations carry a time derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChemicalMode {
    /// `τ = 0`: the chemicals solve Helmholtz problems at every instant.
    Elliptic,
    /// `τ = 1`: the chemicals evolve by reaction-diffusion.
    Parabolic,
}

impl ChemicalMode {
    pub fn from_tau(tau: u8) -> Result<Self> {
        match tau {
            0 => Ok(Self::Elliptic),
            1 => Ok(Self::Parabolic),
            other => Err(invalid("tau", format!("must be 0 or 1, got {other}"))),
        }
    }

    pub fn tau(self) -> u8 {
        match self {
            Self::Elliptic => 0,
            Self::Parabolic => 1,
        }
    }
}

/// The seven system parameters.
///
/// `chi` is the attractive taxis rate (towards `v`), `xi` the repulsive one
/// (away from `w`); `alpha`/`gamma` are production and `beta`/`delta` decay
/// rates of `v`/`w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub chi: f64,
    pub xi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub mode: ChemicalMode,
}

/// `ζ = ξγ − χα` and `σ = χ(β − δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    pub zeta: f64,
    pub sigma: f64,
}

impl ModelParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        chi: f64,
        xi: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
        delta: f64,
        mode: ChemicalMode,
    ) -> Result<Self> {
        let p = Self {
            chi,
            xi,
            alpha,
            beta,
            gamma,
            delta,
            mode,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("chi", self.chi), ("xi", self.xi)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(invalid(name, format!("must be finite and >= 0, got {value}")));
            }
        }
        for (name, value) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {value}")));
            }
        }
        Ok(())
    }

    pub fn derive(&self) -> DerivedParams {
        derive(self)
    }
}

pub fn derive(params: &ModelParams) -> DerivedParams {
    DerivedParams {
        zeta: params.xi * params.gamma - params.chi * params.alpha,
        sigma: params.chi * (params.beta - params.delta),
    }
}

/// Experiment-level knobs that select which a-priori estimates apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    /// Spatial dimension of the domain.
    pub n: u8,
    /// Total initial mass `u₀(Ω̄)`.
    pub m: f64,
    /// Stand-in for the non-constructive constant bounding `ζ` from below in
    /// the elliptic planar case. An experiment knob, not a certified value.
    pub c_s2: f64,
    /// Sobolev exponent used for the `W^{1,r}` diagnostics of `v`, `w`.
    pub r: f64,
    /// Integrability exponent of `u₀` when it has a density; 2 otherwise.
    pub u_exponent: f64,
}

impl ScenarioConfig {
    pub const DEFAULT_C_S2: f64 = 1.0;

    pub fn new(n: u8, m: f64, c_s2: f64, r: f64, u_exponent: f64) -> Result<Self> {
        let cfg = Self {
            n,
            m,
            c_s2,
            r,
            u_exponent,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.n) {
            return Err(invalid("n", format!("dimension must be 1, 2 or 3, got {}", self.n)));
        }
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(invalid("m", format!("mass must be positive, got {}", self.m)));
        }
        if !(self.c_s2.is_finite() && self.c_s2 > 0.0) {
            return Err(invalid("c_s2", format!("must be positive, got {}", self.c_s2)));
        }
        if !(self.r > 1.2 && self.r < 2.0) {
            return Err(invalid("r", format!("must lie in (6/5, 2), got {}", self.r)));
        }
        if !(self.u_exponent > 1.0 && self.u_exponent <= 2.0) {
            return Err(invalid(
                "u_exponent",
                format!("must lie in (1, 2], got {}", self.u_exponent),
            ));
        }
        Ok(())
    }
}

/// Which existence scenario a configuration falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Parabolic-parabolic, planar, `ζ ≥ 0`.
    S1,
    /// Parabolic-elliptic, planar, `ζ ≥ −c_s2/m`.
    S2,
    /// Parabolic-elliptic, three-dimensional, `ζ ≥ 0`, `u₀` with a density in `L^q̂`, `q̂ ∈ (1, 2)`.
    S3,
    Unclassified,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Self::S1 => "S1",
            Self::S2 => "S2",
            Self::S3 => "S3",
            Self::Unclassified => "Unclassified",
        }
    }
}

/// Classifies a configuration. `has_density` states whether `u₀` is given by
/// a density (no atoms) so that its integrability exponent is meaningful.
pub fn classify_scenario(params: &ModelParams, cfg: &ScenarioConfig, has_density: bool) -> Scenario {
    let zeta = derive(params).zeta;
    match (params.mode, cfg.n) {
        (ChemicalMode::Parabolic, 2) if zeta >= 0.0 => Scenario::S1,
        (ChemicalMode::Elliptic, 2) if zeta >= -cfg.c_s2 / cfg.m => Scenario::S2,
        (ChemicalMode::Elliptic, 3)
            if zeta >= 0.0 && has_density && cfg.u_exponent > 1.0 && cfg.u_exponent < 2.0 =>
        {
            Scenario::S3
        }
        _ => Scenario::Unclassified,
    }
}
