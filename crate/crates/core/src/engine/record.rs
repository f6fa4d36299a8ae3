//! Episode trajectories, summaries and batch aggregates.

use serde::{Deserialize, Serialize};

use crate::climate::{overall_risk, ClimateRisks, EventOutcome};
use crate::market::{CompanyAction, MarketState, StepOutcome};

/// First calendar year of the simulation, labelled `t = 0`.
pub const START_YEAR: u32 = 2020;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanyRow {
    pub capital: f64,
    pub esg_score: f64,
    pub vulnerability: f64,
    pub action: CompanyAction,
    pub reward: f64,
    pub bankrupt: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvestorRow {
    pub holdings: Vec<f64>,
    pub cash: f64,
    pub reward: f64,
}

/// State at the end of period `t` together with what happened during it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRow {
    pub t: u32,
    pub risks: ClimateRisks,
    pub events: EventOutcome,
    /// Mitigation booked this period, trillions USD.
    pub mitigation_spend: f64,
    pub companies: Vec<CompanyRow>,
    pub investors: Vec<InvestorRow>,
}

impl PeriodRow {
    pub fn from_step(state: &MarketState, outcome: &StepOutcome) -> Self {
        Self {
            t: state.t,
            risks: state.climate,
            events: outcome.events,
            mitigation_spend: outcome.mitigation_spend,
            companies: state
                .companies
                .iter()
                .enumerate()
                .map(|(i, c)| CompanyRow {
                    capital: c.capital,
                    esg_score: c.esg_score,
                    vulnerability: c.vulnerability,
                    action: outcome.actions[i],
                    reward: outcome.company_rewards[i],
                    bankrupt: c.bankrupt,
                })
                .collect(),
            investors: state
                .investors
                .iter()
                .zip(&outcome.investor_rewards)
                .map(|(inv, r)| InvestorRow {
                    holdings: inv.holdings.clone(),
                    cash: inv.cash,
                    reward: *r,
                })
                .collect(),
        }
    }

    pub fn year(&self) -> u32 {
        START_YEAR + self.t
    }

    pub fn overall_risk(&self) -> f64 {
        overall_risk(self.risks)
    }

    /// `Σ K^C + Σ cash`, summed in the same order as the market state.
    pub fn total_wealth(&self) -> f64 {
        self.companies.iter().map(|c| c.capital).sum::<f64>()
            + self.investors.iter().map(|i| i.cash).sum::<f64>()
    }
}

/// Ending social outcomes of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    /// Overall climate risk after the last period.
    #[serde(rename = "P100")]
    pub final_risk: f64,
    /// Total market wealth after the last period.
    #[serde(rename = "W100")]
    pub final_wealth: f64,
    pub events_total: u32,
    pub bankruptcies: u32,
    /// Cumulative mitigation spend `U_m`.
    pub mitigation_total: f64,
    pub periods: u32,
    pub climate_seed: u64,
    pub policy_seed: u64,
}

impl EpisodeSummary {
    pub fn from_state(state: &MarketState, events_total: u32, seeds: (u64, u64)) -> Self {
        Self {
            final_risk: overall_risk(state.climate),
            final_wealth: state.total_wealth(),
            events_total,
            bankruptcies: state.companies.iter().filter(|c| c.bankrupt).count() as u32,
            mitigation_total: state.cumulative_mitigation,
            periods: state.t,
            climate_seed: seeds.0,
            policy_seed: seeds.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub rows: Vec<PeriodRow>,
    pub summary: EpisodeSummary,
}

impl EpisodeRecord {
    /// Ending risk and wealth recomputed from the last row, if any.
    pub fn recomputed_outcomes(&self) -> Option<(f64, f64)> {
        self.rows
            .last()
            .map(|r| (r.overall_risk(), r.total_wealth()))
    }

    pub fn num_companies(&self) -> usize {
        self.rows.first().map_or(0, |r| r.companies.len())
    }

    pub fn num_investors(&self) -> usize {
        self.rows.first().map_or(0, |r| r.investors.len())
    }

    /// Undiscounted sum of a company's per-period rewards.
    pub fn company_return(&self, i: usize) -> f64 {
        self.rows.iter().map(|r| r.companies[i].reward).sum()
    }
}

/// Mean or standard error of each summary metric.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    #[serde(rename = "P100")]
    pub final_risk: f64,
    #[serde(rename = "W100")]
    pub final_wealth: f64,
    pub events_total: f64,
    pub bankruptcies: f64,
    pub mitigation_total: f64,
}

impl SummaryStats {
    fn of(s: &EpisodeSummary) -> [f64; 5] {
        [
            s.final_risk,
            s.final_wealth,
            f64::from(s.events_total),
            f64::from(s.bankruptcies),
            s.mitigation_total,
        ]
    }

    fn from_array(a: [f64; 5]) -> Self {
        Self {
            final_risk: a[0],
            final_wealth: a[1],
            events_total: a[2],
            bankruptcies: a[3],
            mitigation_total: a[4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub episodes: Vec<EpisodeSummary>,
    pub mean: SummaryStats,
    pub stderr: SummaryStats,
}

impl BatchResult {
    /// Aggregates in episode order. Standard errors use the sample deviation
    /// and are zero for a single episode.
    pub fn from_summaries(episodes: Vec<EpisodeSummary>) -> Self {
        let n = episodes.len() as f64;
        let rows: Vec<[f64; 5]> = episodes.iter().map(SummaryStats::of).collect();
        let mean: [f64; 5] = std::array::from_fn(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n);
        let stderr: [f64; 5] = std::array::from_fn(|k| {
            if rows.len() < 2 {
                return 0.0;
            }
            let ss: f64 = rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum();
            (ss / (n - 1.0)).sqrt() / n.sqrt()
        });
        Self {
            episodes,
            mean: SummaryStats::from_array(mean),
            stderr: SummaryStats::from_array(stderr),
        }
    }
}

/// Mean and standard error of a sample; the error is zero below two points.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(w: f64) -> EpisodeSummary {
        EpisodeSummary {
            final_risk: 0.5,
            final_wealth: w,
            events_total: 2,
            bankruptcies: 0,
            mitigation_total: 0.0,
            periods: 100,
            climate_seed: 0,
            policy_seed: 0,
        }
    }

    #[test]
    fn batch_aggregates() {
        let b = BatchResult::from_summaries(vec![summary(1.0), summary(2.0), summary(3.0)]);
        assert_eq!(b.mean.final_wealth, 2.0);
        assert!((b.stderr.final_wealth - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(b.stderr.final_risk, 0.0);

        let one = BatchResult::from_summaries(vec![summary(5.0)]);
        assert_eq!(one.mean.final_wealth, 5.0);
        assert_eq!(one.stderr.final_wealth, 0.0);
    }

    #[test]
    fn summary_keys() {
        let v = serde_json::to_value(summary(1.0)).unwrap();
        for k in ["P100", "W100", "events_total", "bankruptcies"] {
            assert!(v.get(k).is_some(), "missing {k}");
        }
    }

    #[test]
    fn mean_stderr_examples() {
        assert_eq!(mean_stderr(&[4.0]), (4.0, 0.0));
        let (m, s) = mean_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
    }
}
