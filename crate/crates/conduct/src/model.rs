//! Structural market model: linear inverse demand with a rotation
//! instrument, linear marginal cost, and the conduct-parameter supply
//! relation.
//!
//! Inverse demand:   P = α₀ − (α₁ + α₂·zr)·Q + α₃·y + ε_d
//! Marginal cost:    MC = γ₀ + γ₁·Q + γ₂·w + γ₃·r + ε_c
//! Supply relation:  P = γ₀ + θ·α₂·zr·Q + (θ·α₁ + γ₁)·Q + γ₂·w + γ₃·r + ε_c
//!
//! Solving demand against supply gives the closed-form equilibrium
//! quantity; everything here is a pure function of parameters and a draw.

use crate::error::{Error, Result};

/// Denominators with absolute value at or below this are treated as
/// economically meaningless rather than allowed to blow up silently.
pub const DENOMINATOR_GUARD: f64 = 1e-12;

/// All structural coefficients plus the common error scale.
///
/// `theta` is the conduct parameter: 0 is perfect competition, 1/N is
/// Cournot with N firms, 1 is perfect collusion. `sigma` is the standard
/// deviation shared by both structural error terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralParams {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub theta: f64,
    pub sigma: f64,
}

impl StructuralParams {
    /// Reference parameterization used by the experiment presets:
    /// α₀ = 10, every other slope/shifter coefficient 1, θ = 0.5.
    pub fn baseline(sigma: f64) -> Self {
        Self {
            alpha0: 10.0,
            alpha1: 1.0,
            alpha2: 1.0,
            alpha3: 1.0,
            gamma0: 1.0,
            gamma1: 1.0,
            gamma2: 1.0,
            gamma3: 1.0,
            theta: 0.5,
            sigma,
        }
    }

    /// Same parameters with the demand shifter coefficient forced to zero.
    pub fn without_demand_shifter(&self) -> Self {
        Self { alpha3: 0.0, ..*self }
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        Self { sigma, ..*self }
    }

    /// Generation-side validity: θ ∈ [0,1], σ ≥ 0, all fields finite.
    /// Estimated values are never run through this check.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.alpha0,
            self.alpha1,
            self.alpha2,
            self.alpha3,
            self.gamma0,
            self.gamma1,
            self.gamma2,
            self.gamma3,
            self.theta,
            self.sigma,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite structural parameter".into()));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidConfig(format!(
                "conduct parameter theta = {} outside [0, 1]",
                self.theta
            )));
        }
        if self.sigma < 0.0 {
            return Err(Error::InvalidConfig(format!("sigma = {} negative", self.sigma)));
        }
        Ok(())
    }

    /// Demand slope at a given rotation-instrument value: α₁ + α₂·zr.
    pub fn demand_slope(&self, zr: f64) -> f64 {
        self.alpha1 + self.alpha2 * zr
    }

    /// Denominator of the closed-form equilibrium quantity.
    pub fn equilibrium_denominator(&self, zr: f64) -> f64 {
        (1.0 + self.theta) * self.demand_slope(zr) + self.gamma1
    }
}

/// One market's exogenous variables, instruments, and error realizations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExogenousDraw {
    /// Demand shifter.
    pub y: f64,
    /// Demand rotation instrument.
    pub zr: f64,
    /// Cost shifters.
    pub w: f64,
    pub r: f64,
    /// Auxiliary instruments (noisy copies of the cost shifters).
    pub h: f64,
    pub k: f64,
    /// Structural errors.
    pub eps_d: f64,
    pub eps_c: f64,
}

impl ExogenousDraw {
    pub fn is_finite(&self) -> bool {
        [self.y, self.zr, self.w, self.r, self.h, self.k, self.eps_d, self.eps_c]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// A market in equilibrium: the draw plus the clearing quantity and price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketObservation {
    pub draw: ExogenousDraw,
    pub q: f64,
    pub p: f64,
}

/// Closed-form equilibrium quantity:
/// (α₀ + α₃·y − γ₀ − γ₂·w − γ₃·r + ε_d − ε_c) / ((1+θ)(α₁+α₂·zr) + γ₁).
pub fn equilibrium_quantity(params: &StructuralParams, draw: &ExogenousDraw) -> Result<f64> {
    let denominator = params.equilibrium_denominator(draw.zr);
    if denominator.abs() <= DENOMINATOR_GUARD {
        return Err(Error::DegenerateDenominator { denominator });
    }
    let numerator = params.alpha0 + params.alpha3 * draw.y
        - params.gamma0
        - params.gamma2 * draw.w
        - params.gamma3 * draw.r
        + draw.eps_d
        - draw.eps_c;
    Ok(numerator / denominator)
}

/// Inverse demand evaluated at a quantity.
pub fn demand_price(params: &StructuralParams, q: f64, draw: &ExogenousDraw) -> f64 {
    params.alpha0 - params.demand_slope(draw.zr) * q + params.alpha3 * draw.y + draw.eps_d
}

/// Supply relation evaluated at a quantity. At θ = 0 this reduces to
/// marginal cost.
pub fn supply_price(params: &StructuralParams, q: f64, draw: &ExogenousDraw) -> f64 {
    params.gamma0
        + params.theta * params.alpha2 * draw.zr * q
        + (params.theta * params.alpha1 + params.gamma1) * q
        + params.gamma2 * draw.w
        + params.gamma3 * draw.r
        + draw.eps_c
}
