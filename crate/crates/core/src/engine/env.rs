//! Flat-array environment with create/step/reset/close semantics, the
//! surface that foreign-language trainers drive.

use crate::climate::EventOutcome;
use crate::engine::config::ScenarioConfig;
use crate::engine::record::PeriodRow;
use crate::engine::runner::{Episode, SeedPair};
use crate::error::{Error, Result};
use crate::market::{observation_len, CompanyAction, InvestorAction};

/// Result of one flat step.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatStep {
    pub observation: Vec<f64>,
    /// Company rewards followed by investor rewards.
    pub rewards: Vec<f64>,
    pub done: bool,
    pub events: EventOutcome,
    /// The period row as the native runner would record it.
    pub row: PeriodRow,
}

#[derive(Debug)]
pub struct FlatEnv {
    config: ScenarioConfig,
    episode: Option<Episode>,
}

impl FlatEnv {
    /// Parses and validates a TOML config document.
    pub fn create(document: &str) -> Result<Self> {
        Self::from_config(ScenarioConfig::from_toml_str(document)?)
    }

    pub fn from_config(config: ScenarioConfig) -> Result<Self> {
        let seeds = SeedPair::new(config.seeds.climate_seed, config.seeds.policy_seed);
        let episode = Episode::new(&config, seeds)?;
        Ok(Self {
            config,
            episode: Some(episode),
        })
    }

    fn episode(&self) -> Result<&Episode> {
        self.episode.as_ref().ok_or(Error::Closed)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn num_companies(&self) -> usize {
        self.config.companies.count
    }

    pub fn num_investors(&self) -> usize {
        self.config.investors.count
    }

    pub fn observation_len(&self) -> usize {
        observation_len(
            self.num_companies(),
            self.num_investors(),
            self.config.features.more_info,
        )
    }

    pub fn observe(&self) -> Result<Vec<f64>> {
        Ok(self.episode()?.observe())
    }

    /// `company` holds `(u_m, u_g, u_r)` per company; `investor` holds one
    /// entry per (investor, company), where values ≥ 0.5 mean invest.
    pub fn step(&mut self, company: &[f64], investor: &[f64]) -> Result<FlatStep> {
        let m = self.num_companies();
        let n = self.num_investors();
        let episode = self.episode.as_mut().ok_or(Error::Closed)?;
        if company.len() != 3 * m {
            return Err(Error::Shape {
                what: "flat company actions",
                expected: 3 * m,
                got: company.len(),
            });
        }
        if investor.len() != m * n {
            return Err(Error::Shape {
                what: "flat investor actions",
                expected: m * n,
                got: investor.len(),
            });
        }
        if let Some(x) = investor.iter().find(|x| !x.is_finite()) {
            return Err(Error::Parameter(format!("non-finite investor action {x}")));
        }
        let companies = company
            .chunks_exact(3)
            .map(|c| CompanyAction::new(c[0], c[1], c[2]))
            .collect::<Result<Vec<_>>>()?;
        let investors: Vec<InvestorAction> = if m == 0 {
            Vec::new()
        } else {
            investor
                .chunks_exact(m)
                .map(|a| InvestorAction {
                    flags: a.iter().map(|x| *x >= 0.5).collect(),
                })
                .collect()
        };

        let outcome = episode.step(&companies, &investors)?;
        let mut rewards = outcome.company_rewards.clone();
        rewards.extend_from_slice(&outcome.investor_rewards);
        Ok(FlatStep {
            observation: episode.observe(),
            rewards,
            done: episode.is_done(),
            events: outcome.events,
            row: PeriodRow::from_step(episode.state(), &outcome),
        })
    }

    /// Starts a new episode. With a fixed climate seed the configured event
    /// stream is reused and `seeds.climate` is ignored.
    pub fn reset(&mut self, seeds: SeedPair) -> Result<Vec<f64>> {
        self.episode()?;
        let climate = if self.config.seeds.fixed_climate_seed {
            self.config.seeds.climate_seed
        } else {
            seeds.climate
        };
        let episode = Episode::new(&self.config, SeedPair::new(climate, seeds.policy))?;
        let obs = episode.observe();
        self.episode = Some(episode);
        Ok(obs)
    }

    /// Releases the episode; later calls fail with [`Error::Closed`].
    pub fn close(&mut self) {
        self.episode = None;
    }

    pub fn is_closed(&self) -> bool {
        self.episode.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observation_lengths() {
        let env = FlatEnv::create("").unwrap();
        assert_eq!(env.observation_len(), 3 * 5 + 6 * 3);
        assert_eq!(env.observe().unwrap().len(), env.observation_len());
        let env = FlatEnv::create("[features]\nmore_info = true\n").unwrap();
        assert_eq!(env.observation_len(), 3 * 5 + 6 * 3 + 6);
        assert_eq!(env.observe().unwrap().len(), env.observation_len());
    }

    #[test]
    fn malformed_document_names_key() {
        let err = FlatEnv::create("[companies]\ncapitl = 3\n").unwrap_err();
        assert!(err.to_string().contains("capitl"), "{err}");
    }

    #[test]
    fn shape_and_lifecycle_errors() {
        let mut env = FlatEnv::create("[economy]\nhorizon = 1\n").unwrap();
        assert!(matches!(env.step(&[], &[]), Err(Error::Shape { .. })));
        let s = env.step(&[0.0; 15], &[1.0; 15]).unwrap();
        assert!(s.done);
        assert_eq!(s.rewards.len(), 8);
        assert!(matches!(
            env.step(&[0.0; 15], &[1.0; 15]),
            Err(Error::EpisodeComplete { .. })
        ));
        env.close();
        assert!(matches!(env.reset(SeedPair::new(0, 0)), Err(Error::Closed)));
        assert!(matches!(env.observe(), Err(Error::Closed)));
    }
}
