//! Episode orchestration: seeding, lock-in, real-data seeding, damage noise
//! and the sequential and parallel runners.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::climate::EventStream;
use crate::engine::config::ScenarioConfig;
use crate::engine::record::{BatchResult, EpisodeRecord, EpisodeSummary, PeriodRow};
use crate::error::{Error, Result};
use crate::market::{
    observe, CompanyAction, InvestorAction, MarketParams, MarketState, StepNoise, StepOutcome,
};
use crate::policies::{
    company_action, investor_action, ScriptedCompanyPolicy, ScriptedInvestorPolicy,
};

/// Mitigation range forced on seeded companies.
pub const REAL_DATA_MITIGATION: (f64, f64) = (0.005, 0.01);

const POLICY_STREAM: u64 = 0;
const AUX_STREAM: u64 = 1;

/// Climate-event seed and policy/noise seed for one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedPair {
    pub climate: u64,
    pub policy: u64,
}

impl SeedPair {
    pub fn new(climate: u64, policy: u64) -> Self {
        Self { climate, policy }
    }

    /// `count` pairs counting up from the config's seeds.
    pub fn sequence(config: &ScenarioConfig, count: usize) -> Vec<Self> {
        (0..count as u64)
            .map(|i| Self::new(config.seeds.climate_seed + i, config.seeds.policy_seed + i))
            .collect()
    }
}

/// RNG that drives stochastic policies for an episode.
pub fn policy_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(POLICY_STREAM);
    rng
}

fn aux_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(AUX_STREAM);
    rng
}

/// One episode in progress, wrapping the market with the scenario's
/// episode-level mechanics.
#[derive(Debug, Clone)]
pub struct Episode {
    params: MarketParams,
    state: MarketState,
    seeds: SeedPair,
    events: EventStream,
    aux: ChaCha8Rng,
    shocks: Vec<[f64; 3]>,
    seeded_mitigation: Vec<Option<f64>>,
    seeding_periods: u32,
    lock_in: u32,
    locked: Option<(Vec<CompanyAction>, Vec<InvestorAction>)>,
    events_total: u32,
}

impl Episode {
    pub fn new(config: &ScenarioConfig, seeds: SeedPair) -> Result<Self> {
        config.validate()?;
        let params = config.market_params()?;
        let state = config.initial_state(&params.climate);
        let m = state.num_companies();
        let mut aux = aux_rng(seeds.policy);
        let seeded_mitigation = if config.features.real_data_seeding {
            let (lo, hi) = REAL_DATA_MITIGATION;
            (0..m)
                .map(|i| (i < m.div_ceil(2)).then(|| aux.random_range(lo..=hi)))
                .collect()
        } else {
            vec![None; m]
        };
        Ok(Self {
            events: EventStream::new(seeds.climate, params.horizon),
            params,
            state,
            seeds,
            aux,
            shocks: vec![[0.0; 3]; m],
            seeded_mitigation,
            seeding_periods: config.features.real_data_periods,
            lock_in: config.features.lock_in_years,
            locked: None,
            events_total: 0,
        })
    }

    pub fn state(&self) -> &MarketState {
        &self.state
    }

    pub fn params(&self) -> &MarketParams {
        &self.params
    }

    pub fn seeds(&self) -> SeedPair {
        self.seeds
    }

    pub fn is_done(&self) -> bool {
        self.state.is_done(&self.params)
    }

    pub fn observe(&self) -> Vec<f64> {
        observe(&self.state, &self.params)
    }

    pub fn summary(&self) -> EpisodeSummary {
        EpisodeSummary::from_state(
            &self.state,
            self.events_total,
            (self.seeds.climate, self.seeds.policy),
        )
    }

    /// Advances one period with the submitted actions.
    ///
    /// Under lock-in, submissions between decision periods are replaced by
    /// the last decision. Seeded companies have their mitigation overridden.
    pub fn step(
        &mut self,
        companies: &[CompanyAction],
        investors: &[InvestorAction],
    ) -> Result<StepOutcome> {
        let t = self.state.t;
        if self.is_done() {
            return Err(Error::EpisodeComplete { t });
        }
        let m = self.state.num_companies();
        if companies.len() != m {
            return Err(Error::Shape {
                what: "company actions",
                expected: m,
                got: companies.len(),
            });
        }

        let (mut companies, investors) = match &self.locked {
            Some((c, i)) if self.lock_in > 1 && !t.is_multiple_of(self.lock_in) => {
                (c.clone(), i.clone())
            }
            _ => {
                if self.lock_in > 1 {
                    self.locked = Some((companies.to_vec(), investors.to_vec()));
                }
                (companies.to_vec(), investors.to_vec())
            }
        };
        if t < self.seeding_periods {
            for (a, u) in companies.iter_mut().zip(&self.seeded_mitigation) {
                if let Some(u) = u {
                    a.mitigation = *u;
                }
            }
        }

        let gaussian = self.params.gaussian_damage.is_some();
        if gaussian {
            for s in &mut self.shocks {
                *s = std::array::from_fn(|_| self.aux.sample(StandardNormal));
            }
        }
        let noise = StepNoise {
            uniforms: self.events.at(t),
            damage_shocks: if gaussian { &self.shocks } else { &[] },
        };
        let outcome = self
            .state
            .step(&self.params, &companies, &investors, noise)?;
        self.events_total += outcome.events.count();
        Ok(outcome)
    }
}

/// Joint action buffers for one period.
#[derive(Debug, Clone, PartialEq)]
pub struct JointAction {
    pub companies: Vec<CompanyAction>,
    pub investors: Vec<InvestorAction>,
}

impl JointAction {
    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            companies: vec![CompanyAction::ZERO; m],
            investors: vec![InvestorAction::none(m); n],
        }
    }
}

/// Something that picks every agent's action from the current state.
pub trait ActionSource: Sync {
    fn act(
        &self,
        state: &MarketState,
        params: &MarketParams,
        rng: &mut ChaCha8Rng,
        out: &mut JointAction,
    );
}

/// Scripted policy per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedAssignment {
    pub companies: Vec<ScriptedCompanyPolicy>,
    pub investors: Vec<ScriptedInvestorPolicy>,
}

impl ScriptedAssignment {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        Self {
            companies: config.company_policies(),
            investors: config.investor_policies(),
        }
    }
}

impl ActionSource for ScriptedAssignment {
    fn act(
        &self,
        state: &MarketState,
        _params: &MarketParams,
        _rng: &mut ChaCha8Rng,
        out: &mut JointAction,
    ) {
        let active: Vec<bool> = state.companies.iter().map(|c| c.is_active()).collect();
        let scores: Vec<f64> = state.companies.iter().map(|c| c.esg_score).collect();
        for ((a, p), c) in out
            .companies
            .iter_mut()
            .zip(&self.companies)
            .zip(&state.companies)
        {
            *a = company_action(p, c.bankrupt);
        }
        for (a, p) in out.investors.iter_mut().zip(&self.investors) {
            *a = investor_action(*p, &scores, &active);
        }
    }
}

/// Runs one full episode.
pub fn run_episode(
    config: &ScenarioConfig,
    source: &dyn ActionSource,
    seeds: SeedPair,
) -> Result<EpisodeRecord> {
    let mut episode = Episode::new(config, seeds)?;
    let mut rng = policy_rng(seeds.policy);
    let m = episode.state().num_companies();
    let n = episode.state().num_investors();
    let mut joint = JointAction::zeros(m, n);
    let mut rows = Vec::with_capacity(config.economy.horizon as usize);
    while !episode.is_done() {
        source.act(episode.state(), episode.params(), &mut rng, &mut joint);
        let outcome = episode.step(&joint.companies, &joint.investors)?;
        rows.push(PeriodRow::from_step(episode.state(), &outcome));
    }
    Ok(EpisodeRecord {
        rows,
        summary: episode.summary(),
    })
}

/// Runs independent episodes in parallel; output order follows `seeds`.
pub fn run_batch_records(
    config: &ScenarioConfig,
    source: &dyn ActionSource,
    seeds: &[SeedPair],
) -> Result<Vec<EpisodeRecord>> {
    if seeds.is_empty() {
        return Err(Error::Parameter(
            "batch needs at least one seed pair".into(),
        ));
    }
    config.validate()?;
    seeds
        .par_iter()
        .map(|s| run_episode(config, source, *s))
        .collect()
}

pub fn run_batch(
    config: &ScenarioConfig,
    source: &dyn ActionSource,
    seeds: &[SeedPair],
) -> Result<BatchResult> {
    let records = run_batch_records(config, source, seeds)?;
    Ok(BatchResult::from_summaries(
        records.into_iter().map(|r| r.summary).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::presets::scenario_preset;

    fn scripted(config: &ScenarioConfig) -> ScriptedAssignment {
        ScriptedAssignment::from_config(config)
    }

    #[test]
    fn horizon_zero_summary_is_initial_state() {
        let mut c = ScenarioConfig::default();
        c.economy.horizon = 0;
        let r = run_episode(&c, &scripted(&c), SeedPair::new(0, 0)).unwrap();
        assert!(r.rows.is_empty());
        assert_eq!(r.summary.final_wealth, 98.0);
        assert!((r.summary.final_risk - 0.48).abs() < 1e-3);
    }

    #[test]
    fn status_quo_risk_rises() {
        let c = scenario_preset("status_quo").unwrap();
        let r = run_episode(&c, &scripted(&c), SeedPair::new(1, 1)).unwrap();
        assert_eq!(r.rows.len(), 100);
        assert!(
            (0.97..=1.0).contains(&r.summary.final_risk),
            "{}",
            r.summary.final_risk
        );
        assert_eq!(r.rows[79].year(), 2100);
    }

    #[test]
    fn summary_recomputes_from_rows() {
        let c = scenario_preset("mandate").unwrap();
        let r = run_episode(&c, &scripted(&c), SeedPair::new(3, 4)).unwrap();
        let (p, w) = r.recomputed_outcomes().unwrap();
        assert_eq!(p, r.summary.final_risk);
        assert_eq!(w, r.summary.final_wealth);
        let events: u32 = r.rows.iter().map(|row| row.events.count()).sum();
        assert_eq!(events, r.summary.events_total);
    }

    #[test]
    fn lock_in_replays_decisions() {
        struct Alternating;
        impl ActionSource for Alternating {
            fn act(
                &self,
                s: &MarketState,
                _: &MarketParams,
                _: &mut ChaCha8Rng,
                out: &mut JointAction,
            ) {
                let u = if s.t.is_multiple_of(2) { 0.005 } else { 0.0 };
                for a in &mut out.companies {
                    a.mitigation = u;
                }
            }
        }
        let c = scenario_preset("lockin").unwrap();
        let r = run_episode(&c, &Alternating, SeedPair::new(0, 0)).unwrap();
        for (t, row) in r.rows.iter().enumerate() {
            let decision = t - t % 5;
            let expected = if decision % 2 == 0 { 0.005 } else { 0.0 };
            assert_eq!(row.companies[0].action.mitigation, expected, "period {t}");
        }
    }

    #[test]
    fn real_data_seeding_overrides_half() {
        let c = scenario_preset("realdata_seed").unwrap();
        let r = run_episode(&c, &scripted(&c), SeedPair::new(0, 7)).unwrap();
        let first = &r.rows[0];
        let seeded: Vec<f64> = first
            .companies
            .iter()
            .map(|c| c.action.mitigation)
            .collect();
        for u in &seeded[..3] {
            assert!((0.005..=0.01).contains(u));
        }
        assert_eq!(&seeded[3..], &[0.0, 0.0]);
        for row in &r.rows[..10] {
            assert_eq!(row.companies[0].action.mitigation, seeded[0]);
        }
        assert_eq!(r.rows[10].companies[0].action.mitigation, 0.0);
    }

    #[test]
    fn gaussian_damage_is_seeded() {
        let c = scenario_preset("uncertain_damage").unwrap();
        let a = run_episode(&c, &scripted(&c), SeedPair::new(0, 1)).unwrap();
        let b = run_episode(&c, &scripted(&c), SeedPair::new(0, 1)).unwrap();
        let d = run_episode(&c, &scripted(&c), SeedPair::new(0, 2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.rows.iter().map(|r| r.events).collect::<Vec<_>>(),
            d.rows.iter().map(|r| r.events).collect::<Vec<_>>()
        );
        assert_ne!(a.summary.final_wealth, d.summary.final_wealth);
    }

    #[test]
    fn batch_matches_sequential() {
        let c = scenario_preset("conscious_1").unwrap();
        let seeds = SeedPair::sequence(&c, 4);
        let batch = run_batch(&c, &scripted(&c), &seeds).unwrap();
        for (s, got) in seeds.iter().zip(&batch.episodes) {
            assert_eq!(&run_episode(&c, &scripted(&c), *s).unwrap().summary, got);
        }
        assert!(run_batch(&c, &scripted(&c), &[]).is_err());
    }

    #[test]
    fn stepping_finished_episode_fails() {
        let mut c = ScenarioConfig::default();
        c.economy.horizon = 1;
        let mut e = Episode::new(&c, SeedPair::new(0, 0)).unwrap();
        let j = JointAction::zeros(5, 3);
        e.step(&j.companies, &j.investors).unwrap();
        assert!(matches!(
            e.step(&j.companies, &j.investors),
            Err(Error::EpisodeComplete { t: 1 })
        ));
    }
}
