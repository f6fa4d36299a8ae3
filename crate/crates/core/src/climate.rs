//! Climate risk evolution and event sampling.
//!
//! Three independent hazards (extreme heat, heavy precipitation, drought) each
//! carry an annual occurrence probability. Without mitigation the
//! probabilities rise linearly from their base values; cumulative mitigation
//! spending `U` divides the accumulated growth by `1 + λ·U`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Year index at which the no-mitigation and 1.5 °C targets are pinned (2100).
pub const CALIBRATION_YEAR: f64 = 80.0;

/// Annual mitigation budget (trillions USD/yr) that should reach the 1.5 °C
/// risk triple by the calibration year.
pub const DEFAULT_MITIGATION_BUDGET: f64 = 2.3;

/// Fraction of the unmitigated risk growth that remains under the 1.5 °C
/// target when fitting elasticities.
pub const DEFAULT_TARGET_GROWTH_FRACTION: f64 = 0.7;

pub const BASE_RISKS: ClimateRisks = ClimateRisks::new(0.28, 0.13, 0.17);
pub const NO_MITIGATION_RISKS_AT_80: ClimateRisks = ClimateRisks::new(0.94, 0.27, 0.41);

/// Per-hazard annual probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClimateRisks {
    pub heat: f64,
    pub precip: f64,
    pub drought: f64,
}

impl ClimateRisks {
    pub const fn new(heat: f64, precip: f64, drought: f64) -> Self {
        Self {
            heat,
            precip,
            drought,
        }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.heat, self.precip, self.drought]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn clamped(self) -> Self {
        Self::from_array(self.to_array().map(|p| p.clamp(0.0, 1.0)))
    }

    pub fn is_valid(&self) -> bool {
        self.to_array()
            .iter()
            .all(|p| p.is_finite() && (0.0..=1.0).contains(p))
    }
}

/// Parameters of the risk law `P_t = μ·t / (1 + λ·U) + P_0`, per hazard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClimateParams {
    pub base: ClimateRisks,
    /// Probability increase per year with no mitigation.
    pub growth_rate: [f64; 3],
    /// Inverse trillions of USD.
    pub elasticity: [f64; 3],
}

impl Default for ClimateParams {
    fn default() -> Self {
        Self::calibrated(
            BASE_RISKS,
            NO_MITIGATION_RISKS_AT_80,
            DEFAULT_MITIGATION_BUDGET,
            DEFAULT_TARGET_GROWTH_FRACTION,
        )
        .expect("default calibration is feasible")
    }
}

impl ClimateParams {
    /// Builds parameters from the base triple, the unmitigated triple at
    /// year 80, and a 1.5 °C target expressed as the fraction of the
    /// unmitigated growth still present at year 80.
    pub fn calibrated(
        base: ClimateRisks,
        no_mitigation_at_80: ClimateRisks,
        annual_budget: f64,
        target_growth_fraction: f64,
    ) -> Result<Self> {
        let growth_rate = derive_growth_rates(base, no_mitigation_at_80)?;
        let target = target_from_fraction(base, growth_rate, target_growth_fraction);
        let mut params = Self {
            base,
            growth_rate,
            elasticity: [0.0; 3],
        };
        params.elasticity = calibrate_elasticity(annual_budget, target, &params)?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.base.is_valid() {
            return Err(Error::config(
                "climate.base",
                "base risks must lie in [0, 1]",
            ));
        }
        if self.growth_rate.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::config(
                "climate.growth_rate",
                "growth rates must be >= 0",
            ));
        }
        if self.elasticity.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::config(
                "climate.elasticity",
                "elasticities must be >= 0",
            ));
        }
        Ok(())
    }
}

/// The 1.5 °C target triple `base + fraction·μ·80`.
pub fn target_from_fraction(
    base: ClimateRisks,
    growth_rate: [f64; 3],
    fraction: f64,
) -> ClimateRisks {
    let b = base.to_array();
    ClimateRisks::from_array(std::array::from_fn(|e| {
        b[e] + fraction * growth_rate[e] * CALIBRATION_YEAR
    }))
}

/// Outcome of one period's hazard draws.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventOutcome {
    pub heat: bool,
    pub precip: bool,
    pub drought: bool,
}

impl EventOutcome {
    pub fn count(&self) -> u32 {
        self.heat as u32 + self.precip as u32 + self.drought as u32
    }

    pub fn to_array(self) -> [bool; 3] {
        [self.heat, self.precip, self.drought]
    }
}

/// Linear growth rates that carry `base` to `target_at_80` with no mitigation.
pub fn derive_growth_rates(base: ClimateRisks, target_at_80: ClimateRisks) -> Result<[f64; 3]> {
    let b = base.to_array();
    let t = target_at_80.to_array();
    let mut out = [0.0; 3];
    for e in 0..3 {
        let rise = t[e] - b[e];
        if !rise.is_finite() || rise < 0.0 {
            return Err(Error::InvalidCalibration(format!(
                "hazard {e}: target {} below base {}",
                t[e], b[e]
            )));
        }
        out[e] = rise / CALIBRATION_YEAR;
    }
    Ok(out)
}

/// Risk triple at year `t` given cumulative mitigation spending, clamped to `[0, 1]`.
pub fn risk_at(t: f64, cumulative_mitigation: f64, params: &ClimateParams) -> ClimateRisks {
    let base = params.base.to_array();
    ClimateRisks::from_array(std::array::from_fn(|e| {
        let p = params.growth_rate[e] * t / (1.0 + params.elasticity[e] * cumulative_mitigation)
            + base[e];
        p.clamp(0.0, 1.0)
    }))
}

/// Probability of at least one event in a year.
pub fn overall_risk(risks: ClimateRisks) -> f64 {
    1.0 - risks.to_array().iter().map(|p| 1.0 - p).product::<f64>()
}

/// Event `e` occurs iff `uniforms[e] < risk_e`.
pub fn sample_events(risks: ClimateRisks, uniforms: [f64; 3]) -> EventOutcome {
    let p = risks.to_array();
    EventOutcome {
        heat: uniforms[0] < p[0],
        precip: uniforms[1] < p[1],
        drought: uniforms[2] < p[2],
    }
}

/// Elasticities such that spending `annual_budget` every year for 80 years
/// brings each hazard exactly to `target_at_80`.
///
/// Closed form: `λ_e = (μ_e·80 / (target_e − base_e) − 1) / (80·budget)`.
pub fn calibrate_elasticity(
    annual_budget: f64,
    target_at_80: ClimateRisks,
    params: &ClimateParams,
) -> Result<[f64; 3]> {
    if !(annual_budget.is_finite() && annual_budget > 0.0) {
        return Err(Error::InvalidCalibration(format!(
            "annual budget must be positive, got {annual_budget}"
        )));
    }
    let spend_at_80 = CALIBRATION_YEAR * annual_budget;
    let base = params.base.to_array();
    let target = target_at_80.to_array();
    let mut out = [0.0; 3];
    for e in 0..3 {
        let unmitigated_rise = params.growth_rate[e] * CALIBRATION_YEAR;
        let target_rise = target[e] - base[e];
        if unmitigated_rise == 0.0 && target_rise == 0.0 {
            continue;
        }
        // Feasible targets sit in (base, base + μ·80].
        if !(target_rise > 0.0 && target_rise <= unmitigated_rise) {
            return Err(Error::InvalidCalibration(format!(
                "hazard {e}: target {} outside ({}, {}]",
                target[e],
                base[e],
                base[e] + unmitigated_rise
            )));
        }
        out[e] = (unmitigated_rise / target_rise - 1.0) / spend_at_80;
    }
    Ok(out)
}

/// Pre-drawn per-period uniform triples for hazard sampling.
///
/// The stream depends only on its seed, so two episodes built from the same
/// seed see identical draws even when their risks differ.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    seed: u64,
    uniforms: Vec<[f64; 3]>,
}

impl EventStream {
    pub fn new(seed: u64, horizon: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let uniforms = (0..horizon)
            .map(|_| {
                [
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                ]
            })
            .collect();
        Self { seed, uniforms }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniforms for the step that starts from state index `t`.
    pub fn at(&self, t: u32) -> [f64; 3] {
        self.uniforms[t as usize]
    }

    pub fn len(&self) -> usize {
        self.uniforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uniforms.is_empty()
    }
}
