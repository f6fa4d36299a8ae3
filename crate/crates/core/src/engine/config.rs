//! Scenario configuration: a TOML document with one table per concern.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::climate::{
    calibrate_elasticity, derive_growth_rates, ClimateParams, ClimateRisks, BASE_RISKS,
    DEFAULT_MITIGATION_BUDGET, DEFAULT_TARGET_GROWTH_FRACTION, NO_MITIGATION_RISKS_AT_80,
};
use crate::error::{Error, Result};
use crate::learner::LearnerConfig;
use crate::market::{CompanyState, GaussianDamage, InvestorState, MarketParams, MarketState};
use crate::policies::{ScriptedCompanyPolicy, ScriptedInvestorPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub companies: CompanyConfig,
    pub investors: InvestorConfig,
    pub economy: EconomyConfig,
    pub climate: ClimateConfig,
    pub features: FeatureConfig,
    pub seeds: SeedConfig,
    pub learner: LearnerConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "default".into(),
            companies: CompanyConfig::default(),
            investors: InvestorConfig::default(),
            economy: EconomyConfig::default(),
            climate: ClimateConfig::default(),
            features: FeatureConfig::default(),
            seeds: SeedConfig::default(),
            learner: LearnerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompanyConfig {
    pub count: usize,
    /// Starting capital per company, trillions USD.
    pub capital: f64,
    /// Fraction of capital lost per event before any resilience spending.
    pub initial_vulnerability: f64,
    pub resilience_efficiency: f64,
    /// Scripted policy per company; a single entry applies to all.
    pub policy: Vec<ScriptedCompanyPolicy>,
}

impl Default for CompanyConfig {
    fn default() -> Self {
        Self {
            count: 5,
            capital: 10.0,
            initial_vulnerability: 0.05,
            resilience_efficiency: 5.0,
            policy: vec![ScriptedCompanyPolicy::Defector],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvestorConfig {
    pub count: usize,
    /// Starting cash per investor, trillions USD.
    pub capital: f64,
    /// ESG-consciousness `α` per investor; a single entry applies to all.
    pub esg_preference: Vec<f64>,
    pub policy: Vec<ScriptedInvestorPolicy>,
}

impl Default for InvestorConfig {
    fn default() -> Self {
        Self {
            count: 3,
            capital: 16.0,
            esg_preference: vec![0.0],
            policy: vec![ScriptedInvestorPolicy::ProfitDriven],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EconomyConfig {
    pub growth: f64,
    pub greenwash_coef: f64,
    pub horizon: u32,
}

impl Default for EconomyConfig {
    fn default() -> Self {
        Self {
            growth: 0.10,
            greenwash_coef: 2.0,
            horizon: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClimateConfig {
    /// Heat, precipitation and drought probabilities at t = 0.
    pub base: [f64; 3],
    /// Probabilities at year 80 with no mitigation.
    pub no_mitigation_at_80: [f64; 3],
    /// Annual mitigation spend that reaches the 1.5 °C target by year 80.
    pub mitigation_budget: f64,
    /// Target expressed as the share of unmitigated growth left at year 80.
    pub target_growth_fraction: f64,
    /// Explicit target triple; overrides `target_growth_fraction`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_at_80: Option<[f64; 3]>,
}

impl Default for ClimateConfig {
    fn default() -> Self {
        Self {
            base: BASE_RISKS.to_array(),
            no_mitigation_at_80: NO_MITIGATION_RISKS_AT_80.to_array(),
            mitigation_budget: DEFAULT_MITIGATION_BUDGET,
            target_growth_fraction: DEFAULT_TARGET_GROWTH_FRACTION,
            target_at_80: None,
        }
    }
}

impl ClimateConfig {
    pub fn params(&self) -> Result<ClimateParams> {
        let base = ClimateRisks::from_array(self.base);
        let unmitigated = ClimateRisks::from_array(self.no_mitigation_at_80);
        if !base.is_valid() {
            return Err(Error::config("climate.base", "risks must lie in [0, 1]"));
        }
        if !unmitigated.is_valid() {
            return Err(Error::config(
                "climate.no_mitigation_at_80",
                "risks must lie in [0, 1]",
            ));
        }
        if !(self.mitigation_budget > 0.0 && self.mitigation_budget.is_finite()) {
            return Err(Error::config(
                "climate.mitigation_budget",
                "must be positive",
            ));
        }
        let params = match self.target_at_80 {
            Some(target) => {
                let growth_rate = derive_growth_rates(base, unmitigated)?;
                let mut p = ClimateParams {
                    base,
                    growth_rate,
                    elasticity: [0.0; 3],
                };
                p.elasticity = calibrate_elasticity(
                    self.mitigation_budget,
                    ClimateRisks::from_array(target),
                    &p,
                )?;
                p
            }
            None => {
                if !(0.0..=1.0).contains(&self.target_growth_fraction) {
                    return Err(Error::config(
                        "climate.target_growth_fraction",
                        "must lie in [0, 1]",
                    ));
                }
                ClimateParams::calibrated(
                    base,
                    unmitigated,
                    self.mitigation_budget,
                    self.target_growth_fraction,
                )?
            }
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// ESG scores are published; without it every score is 0.
    pub disclosure: bool,
    pub greenwash: bool,
    pub resilience: bool,
    /// Append risks and last events to observations.
    pub more_info: bool,
    /// Actions are resubmitted only every this many periods; 0 or 1 disables.
    pub lock_in_years: u32,
    pub strict_bankruptcy: bool,
    pub gaussian_damage: bool,
    /// Damage standard deviation as a multiple of the initial vulnerability.
    pub damage_sigma_fraction: f64,
    /// Force half the companies to mitigate 0.5–1% early in the episode.
    pub real_data_seeding: bool,
    pub real_data_periods: u32,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            disclosure: true,
            greenwash: false,
            resilience: false,
            more_info: false,
            lock_in_years: 0,
            strict_bankruptcy: false,
            gaussian_damage: false,
            damage_sigma_fraction: 0.5,
            real_data_seeding: false,
            real_data_periods: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    pub climate_seed: u64,
    pub policy_seed: u64,
    /// Learners and env resets reuse `climate_seed` for every episode.
    pub fixed_climate_seed: bool,
    /// Episodes in a `batch` run; seeds count up from the pair above.
    pub batch_size: usize,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            climate_seed: 0,
            policy_seed: 0,
            fixed_climate_seed: true,
            batch_size: 3,
        }
    }
}

fn broadcast<T: Clone>(values: &[T], n: usize, path: &str) -> Result<Vec<T>> {
    match values.len() {
        1 => Ok(vec![values[0].clone(); n]),
        len if len == n => Ok(values.to_vec()),
        0 if n == 0 => Ok(Vec::new()),
        len => Err(Error::config(
            path,
            format!("expected 1 or {n} entries, got {len}"),
        )),
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    /// Applies `dotted.key=value`, where the value is parsed as TOML and
    /// falls back to a bare string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment.split_once('=').ok_or_else(|| {
            Error::ConfigParse(format!("override `{assignment}` is not key=value"))
        })?;
        let key = key.trim();
        let raw = raw.trim();
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));

        let mut root = toml::Table::try_from(&*self).expect("config serializes to TOML");
        let mut table = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        let (last, parents) = parts.split_last().expect("split yields one part");
        for p in parents {
            table = table
                .get_mut(*p)
                .and_then(|v| v.as_table_mut())
                .ok_or_else(|| Error::config(key, format!("unknown section `{p}`")))?;
        }
        // Optional keys are absent when unset, so only sections are checked here.
        table.insert((*last).to_string(), value);
        let updated: Self = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::ConfigParse(format!("override `{key}`: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.companies;
        if c.count == 0 {
            return Err(Error::config(
                "companies.count",
                "need at least one company",
            ));
        }
        if !(c.capital > 0.0 && c.capital.is_finite()) {
            return Err(Error::config("companies.capital", "must be positive"));
        }
        if !(0.0..=1.0).contains(&c.initial_vulnerability) {
            return Err(Error::config(
                "companies.initial_vulnerability",
                "must lie in [0, 1]",
            ));
        }
        if !(c.resilience_efficiency > 0.0 && c.resilience_efficiency.is_finite()) {
            return Err(Error::config(
                "companies.resilience_efficiency",
                "must be positive",
            ));
        }
        broadcast(&c.policy, c.count, "companies.policy")?;

        let i = &self.investors;
        if !(i.capital >= 0.0 && i.capital.is_finite()) {
            return Err(Error::config("investors.capital", "must be non-negative"));
        }
        let alphas = broadcast(&i.esg_preference, i.count, "investors.esg_preference")?;
        if alphas.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::config(
                "investors.esg_preference",
                "must be finite and >= 0",
            ));
        }
        broadcast(&i.policy, i.count, "investors.policy")?;

        let e = &self.economy;
        if !(e.growth > -1.0 && e.growth.is_finite()) {
            return Err(Error::config("economy.growth", "must be finite and > -1"));
        }
        if !(e.greenwash_coef >= 0.0 && e.greenwash_coef.is_finite()) {
            return Err(Error::config(
                "economy.greenwash_coef",
                "must be finite and >= 0",
            ));
        }
        if self.features.greenwash && e.greenwash_coef <= 1.0 {
            return Err(Error::config(
                "economy.greenwash_coef",
                "must exceed 1 when greenwashing is enabled",
            ));
        }

        self.climate.params()?;

        let f = &self.features;
        if !(f.damage_sigma_fraction >= 0.0 && f.damage_sigma_fraction.is_finite()) {
            return Err(Error::config(
                "features.damage_sigma_fraction",
                "must be >= 0",
            ));
        }
        if self.seeds.batch_size == 0 {
            return Err(Error::config("seeds.batch_size", "must be at least 1"));
        }
        self.learner.validate()
    }

    pub fn company_policies(&self) -> Vec<ScriptedCompanyPolicy> {
        broadcast(
            &self.companies.policy,
            self.companies.count,
            "companies.policy",
        )
        .expect("validated config")
    }

    pub fn investor_policies(&self) -> Vec<ScriptedInvestorPolicy> {
        broadcast(
            &self.investors.policy,
            self.investors.count,
            "investors.policy",
        )
        .expect("validated config")
    }

    pub fn esg_preferences(&self) -> Vec<f64> {
        broadcast(
            &self.investors.esg_preference,
            self.investors.count,
            "investors.esg_preference",
        )
        .expect("validated config")
    }

    pub fn market_params(&self) -> Result<MarketParams> {
        let f = &self.features;
        Ok(MarketParams {
            climate: self.climate.params()?,
            growth: self.economy.growth,
            greenwash_coef: self.economy.greenwash_coef,
            disclosure: f.disclosure,
            greenwash_enabled: f.greenwash,
            resilience_enabled: f.resilience,
            strict_bankruptcy: f.strict_bankruptcy,
            gaussian_damage: f.gaussian_damage.then_some(GaussianDamage {
                sigma_fraction: f.damage_sigma_fraction,
            }),
            more_info: f.more_info,
            horizon: self.economy.horizon,
        })
    }

    pub fn initial_state(&self, climate: &ClimateParams) -> MarketState {
        let c = &self.companies;
        let companies = (0..c.count)
            .map(|_| CompanyState::new(c.capital, c.initial_vulnerability, c.resilience_efficiency))
            .collect();
        let investors = self
            .esg_preferences()
            .into_iter()
            .map(|alpha| InvestorState::new(c.count, self.investors.capital, alpha))
            .collect();
        MarketState::new(companies, investors, climate)
    }

    pub fn initial_wealth(&self) -> f64 {
        self.companies.count as f64 * self.companies.capital
            + self.investors.count as f64 * self.investors.capital
    }
}
