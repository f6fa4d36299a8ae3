//! Company and investor state and the one-period market transition.
//!
//! A period runs: mask actions, redistribute investor capital, book spending,
//! update climate risk, update vulnerability and ESG scores, draw events,
//! compute margins, settle capital and holdings, retire bankrupt firms, and pay
//! rewards. All monetary quantities are in trillions of USD.

use serde::{Deserialize, Serialize};

use crate::climate::{risk_at, sample_events, ClimateParams, ClimateRisks, EventOutcome};
use crate::error::{Error, Result};
use crate::policies::mask_actions;

/// Margin below which a period counts toward strict bankruptcy.
pub const STRICT_MARGIN_THRESHOLD: f64 = -0.10;
/// Consecutive distressed periods that trigger strict bankruptcy.
pub const STRICT_CONSECUTIVE_PERIODS: usize = 3;

/// Fractions of interim capital spent on mitigation, greenwashing and resilience.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CompanyAction {
    pub mitigation: f64,
    pub greenwash: f64,
    pub resilience: f64,
}

impl CompanyAction {
    pub const ZERO: Self = Self {
        mitigation: 0.0,
        greenwash: 0.0,
        resilience: 0.0,
    };

    /// Each component must lie in `[0, 1]`; their sum is only checked when applied.
    pub fn new(mitigation: f64, greenwash: f64, resilience: f64) -> Result<Self> {
        let a = Self {
            mitigation,
            greenwash,
            resilience,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mitigation", self.mitigation),
            ("greenwash", self.greenwash),
            ("resilience", self.resilience),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Parameter(format!(
                    "{name} fraction {v} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.mitigation + self.greenwash + self.resilience
    }

    pub fn is_overspend(&self) -> bool {
        self.total() > 1.0
    }
}

/// Which companies an investor funds this period; capital splits equally.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvestorAction {
    pub flags: Vec<bool>,
}

impl InvestorAction {
    pub fn all(m: usize) -> Self {
        Self {
            flags: vec![true; m],
        }
    }

    pub fn none(m: usize) -> Self {
        Self {
            flags: vec![false; m],
        }
    }

    pub fn selected(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanyState {
    pub capital: f64,
    pub esg_score: f64,
    /// Fraction of capital lost per climate event.
    pub vulnerability: f64,
    pub cumulative_resilience: f64,
    pub initial_vulnerability: f64,
    pub resilience_efficiency: f64,
    pub bankrupt: bool,
    /// Most recent margins, oldest first, at most three.
    pub margin_history: Vec<f64>,
}

impl CompanyState {
    pub fn new(capital: f64, initial_vulnerability: f64, resilience_efficiency: f64) -> Self {
        Self {
            capital,
            esg_score: 0.0,
            vulnerability: initial_vulnerability,
            cumulative_resilience: 0.0,
            initial_vulnerability,
            resilience_efficiency,
            bankrupt: false,
            margin_history: Vec::with_capacity(STRICT_CONSECUTIVE_PERIODS),
        }
    }

    pub fn is_active(&self) -> bool {
        !self.bankrupt
    }

    fn record_margin(&mut self, margin: f64) {
        if self.margin_history.len() == STRICT_CONSECUTIVE_PERIODS {
            self.margin_history.remove(0);
        }
        self.margin_history.push(margin);
    }

    fn retire(&mut self) {
        self.bankrupt = true;
        self.capital = 0.0;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvestorState {
    pub holdings: Vec<f64>,
    pub cash: f64,
    pub esg_preference: f64,
}

impl InvestorState {
    pub fn new(companies: usize, cash: f64, esg_preference: f64) -> Self {
        Self {
            holdings: vec![0.0; companies],
            cash,
            esg_preference,
        }
    }

    pub fn total_capital(&self) -> f64 {
        self.holdings.iter().sum::<f64>() + self.cash
    }
}

/// Per-company vulnerability draws around the current vulnerability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianDamage {
    /// Standard deviation as a multiple of the company's initial vulnerability.
    pub sigma_fraction: f64,
}

/// Rules of the market that do not change during an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketParams {
    pub climate: ClimateParams,
    /// Baseline economic growth rate per period.
    pub growth: f64,
    /// ESG credit per unit of greenwashing spend.
    pub greenwash_coef: f64,
    pub disclosure: bool,
    pub greenwash_enabled: bool,
    pub resilience_enabled: bool,
    pub strict_bankruptcy: bool,
    pub gaussian_damage: Option<GaussianDamage>,
    pub more_info: bool,
    pub horizon: u32,
}

impl Default for MarketParams {
    fn default() -> Self {
        Self {
            climate: ClimateParams::default(),
            growth: 0.10,
            greenwash_coef: 2.0,
            disclosure: true,
            greenwash_enabled: false,
            resilience_enabled: false,
            strict_bankruptcy: false,
            gaussian_damage: None,
            more_info: false,
            horizon: 100,
        }
    }
}

/// Exogenous randomness consumed by one step.
#[derive(Debug, Clone, Copy)]
pub struct StepNoise<'a> {
    pub uniforms: [f64; 3],
    /// Standard-normal shocks per company and hazard; only read under Gaussian damage.
    pub damage_shocks: &'a [[f64; 3]],
}

impl StepNoise<'_> {
    pub fn events_only(uniforms: [f64; 3]) -> StepNoise<'static> {
        StepNoise {
            uniforms,
            damage_shocks: &[],
        }
    }
}

/// Who funded whom this period, with the amounts committed.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub flags: Vec<Vec<bool>>,
    /// `K^I_j` at the start of the period.
    pub investor_capital: Vec<f64>,
    /// `‖a_j‖₁` after masking.
    pub selected: Vec<usize>,
}

impl Allocation {
    /// Amount investor `j` commits to each flagged company.
    pub fn share(&self, j: usize) -> f64 {
        match self.selected[j] {
            0 => 0.0,
            n => self.investor_capital[j] / n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Redistribution {
    pub interim: Vec<f64>,
    pub cash: Vec<f64>,
    pub allocation: Allocation,
}

/// Investors withdraw last period's holdings and re-split their capital.
///
/// Expects flags already masked against bankrupt companies.
pub fn redistribute(state: &MarketState, flags: &[Vec<bool>]) -> Redistribution {
    let m = state.companies.len();
    let mut interim: Vec<f64> = state.companies.iter().map(|c| c.capital).collect();
    let mut cash = Vec::with_capacity(state.investors.len());
    let mut investor_capital = Vec::with_capacity(state.investors.len());
    let mut selected = Vec::with_capacity(state.investors.len());

    for (inv, a) in state.investors.iter().zip(flags) {
        let capital = inv.total_capital();
        let n = a.iter().filter(|f| **f).count();
        let share = if n == 0 { 0.0 } else { capital / n as f64 };
        for i in 0..m {
            interim[i] -= inv.holdings[i];
            if a[i] {
                interim[i] += share;
            }
        }
        cash.push(if n == 0 { capital } else { 0.0 });
        investor_capital.push(capital);
        selected.push(n);
    }

    Redistribution {
        interim,
        cash,
        allocation: Allocation {
            flags: flags.to_vec(),
            investor_capital,
            selected,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spending {
    /// Contribution to cumulative mitigation `U_m`.
    pub mitigation: f64,
    /// Updated cumulative resilience spend `U_r`.
    pub cumulative_resilience: f64,
    pub overspend: bool,
}

/// Books mitigation and resilience spending out of interim capital.
///
/// An overspending company books nothing; the caller retires it.
pub fn apply_spending(interim: f64, action: &CompanyAction, prior: &CompanyState) -> Spending {
    if action.is_overspend() {
        return Spending {
            mitigation: 0.0,
            cumulative_resilience: prior.cumulative_resilience,
            overspend: true,
        };
    }
    Spending {
        mitigation: action.mitigation * interim,
        cumulative_resilience: prior.cumulative_resilience + action.resilience * interim,
        overspend: false,
    }
}

/// `L = L₀·exp(−η·(U_r + u_r·K_interim) / K_interim)`, using the prior `U_r`.
pub fn update_vulnerability(company: &CompanyState, resilience: f64, interim: f64) -> Result<f64> {
    if interim.is_nan() || interim <= 0.0 {
        return Err(Error::Invariant(format!(
            "active company with non-positive interim capital {interim}"
        )));
    }
    let ratio = (company.cumulative_resilience + resilience * interim) / interim;
    Ok(company.initial_vulnerability * (-company.resilience_efficiency * ratio).exp())
}

/// Disclosed ESG score: mitigation plus `β`-weighted greenwashing, or 0 without disclosure.
pub fn compute_esg(action: &CompanyAction, greenwash_coef: f64, disclosure: bool) -> f64 {
    if disclosure {
        action.mitigation + greenwash_coef * action.greenwash
    } else {
        0.0
    }
}

/// `ρ = (1 − u_m − u_g − u_r)(1 + γ)(1 − X·L) − 1`. Not floored at −1.
pub fn profit_margin(
    action: &CompanyAction,
    growth: f64,
    event_count: u32,
    vulnerability: f64,
) -> f64 {
    margin_with_loss(action, growth, event_count as f64 * vulnerability)
}

/// Margin with an explicit loss fraction in place of `X·L`.
pub fn margin_with_loss(action: &CompanyAction, growth: f64, loss_fraction: f64) -> f64 {
    (1.0 - action.total()) * (1.0 + growth) * (1.0 - loss_fraction) - 1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settlement {
    pub capital: Vec<f64>,
    pub holdings: Vec<Vec<f64>>,
    pub cash: Vec<f64>,
    /// Companies retired at settlement (non-positive capital or written off).
    pub bankrupt: Vec<bool>,
}

/// Scales interim capital and holdings by `1 + ρ`.
///
/// Companies with non-positive resulting capital, or flagged in `write_off`,
/// end at zero capital and every holding in them is written off.
pub fn settle(
    interim: &[f64],
    margins: &[f64],
    allocation: &Allocation,
    write_off: &[bool],
) -> Settlement {
    let mut bankrupt = vec![false; interim.len()];
    let capital: Vec<f64> = interim
        .iter()
        .zip(margins)
        .enumerate()
        .map(|(i, (k, rho))| {
            let next = (1.0 + rho) * k;
            if write_off[i] || next <= 0.0 {
                bankrupt[i] = true;
                0.0
            } else {
                next
            }
        })
        .collect();

    let mut holdings = Vec::with_capacity(allocation.flags.len());
    let mut cash = Vec::with_capacity(allocation.flags.len());
    for (j, flags) in allocation.flags.iter().enumerate() {
        let share = allocation.share(j);
        holdings.push(
            flags
                .iter()
                .enumerate()
                .map(|(i, &f)| {
                    if f && !bankrupt[i] {
                        (1.0 + margins[i]) * share
                    } else {
                        0.0
                    }
                })
                .collect(),
        );
        cash.push(if allocation.selected[j] == 0 {
            allocation.investor_capital[j]
        } else {
            0.0
        });
    }

    Settlement {
        capital,
        holdings,
        cash,
        bankrupt,
    }
}

/// Absolute profit over the period.
pub fn company_reward(capital_next: f64, capital_interim: f64) -> f64 {
    capital_next - capital_interim
}

/// Portfolio return plus `α` times the capital-weighted ESG score of the portfolio.
///
/// Cash carries an ESG score of zero. An investor with no starting capital is inert.
pub fn investor_reward(
    capital_before: f64,
    holdings_after: &[f64],
    cash_after: f64,
    esg_scores: &[f64],
    esg_preference: f64,
) -> f64 {
    if capital_before <= 0.0 {
        return 0.0;
    }
    let capital_after = holdings_after.iter().sum::<f64>() + cash_after;
    let financial = (capital_after - capital_before) / capital_before;
    if esg_preference == 0.0 || capital_after <= 0.0 {
        return financial;
    }
    let weighted: f64 = holdings_after
        .iter()
        .zip(esg_scores)
        .map(|(h, q)| h * q)
        .sum();
    financial + esg_preference * weighted / capital_after
}

/// True once the last three margins are each below −10%.
pub fn check_strict_bankruptcy(margin_history: &[f64]) -> bool {
    margin_history.len() >= STRICT_CONSECUTIVE_PERIODS
        && margin_history[margin_history.len() - STRICT_CONSECUTIVE_PERIODS..]
            .iter()
            .all(|m| *m < STRICT_MARGIN_THRESHOLD)
}

/// Everything a step produced besides the new state.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub company_rewards: Vec<f64>,
    pub investor_rewards: Vec<f64>,
    pub events: EventOutcome,
    pub interim: Vec<f64>,
    pub margins: Vec<f64>,
    /// Company actions after masking and disabled-channel zeroing.
    pub actions: Vec<CompanyAction>,
    pub investor_flags: Vec<Vec<bool>>,
    pub wealth_before: f64,
    /// `Σ interim + Σ cash` right after redistribution.
    pub wealth_redistributed: f64,
    pub mitigation_spend: f64,
    pub newly_bankrupt: Vec<usize>,
}

/// Full system state at the start of a period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    /// Completed periods.
    pub t: u32,
    pub climate: ClimateRisks,
    pub cumulative_mitigation: f64,
    pub companies: Vec<CompanyState>,
    pub investors: Vec<InvestorState>,
    pub last_events: EventOutcome,
}

impl MarketState {
    pub fn new(
        companies: Vec<CompanyState>,
        investors: Vec<InvestorState>,
        climate: &ClimateParams,
    ) -> Self {
        Self {
            t: 0,
            climate: risk_at(0.0, 0.0, climate),
            cumulative_mitigation: 0.0,
            companies,
            investors,
            last_events: EventOutcome::default(),
        }
    }

    pub fn num_companies(&self) -> usize {
        self.companies.len()
    }

    pub fn num_investors(&self) -> usize {
        self.investors.len()
    }

    pub fn bankrupt_flags(&self) -> Vec<bool> {
        self.companies.iter().map(|c| c.bankrupt).collect()
    }

    /// `Σ K^C + Σ cash`. Holdings are claims on company capital and are not
    /// counted twice.
    pub fn total_wealth(&self) -> f64 {
        self.companies.iter().map(|c| c.capital).sum::<f64>()
            + self.investors.iter().map(|i| i.cash).sum::<f64>()
    }

    pub fn is_done(&self, params: &MarketParams) -> bool {
        self.t >= params.horizon
    }

    /// Advances one period in place.
    pub fn step(
        &mut self,
        params: &MarketParams,
        company_actions: &[CompanyAction],
        investor_actions: &[InvestorAction],
        noise: StepNoise<'_>,
    ) -> Result<StepOutcome> {
        let m = self.companies.len();
        let n = self.investors.len();
        if self.t >= params.horizon {
            return Err(Error::EpisodeComplete { t: self.t });
        }
        check_len("company actions", m, company_actions.len())?;
        check_len("investor actions", n, investor_actions.len())?;
        for a in investor_actions {
            check_len("investor flags", m, a.flags.len())?;
        }
        for a in company_actions {
            a.validate()?;
        }
        if params.gaussian_damage.is_some() {
            check_len("damage shocks", m, noise.damage_shocks.len())?;
        }

        let was_bankrupt = self.bankrupt_flags();
        let (mut actions, investor_masked) =
            mask_actions(company_actions, investor_actions, &was_bankrupt);
        for a in &mut actions {
            if !params.greenwash_enabled {
                a.greenwash = 0.0;
            }
            if !params.resilience_enabled {
                a.resilience = 0.0;
            }
        }
        let flags: Vec<Vec<bool>> = investor_masked.into_iter().map(|a| a.flags).collect();

        let wealth_before = self.total_wealth();
        let redist = redistribute(self, &flags);
        let wealth_redistributed =
            redist.interim.iter().sum::<f64>() + redist.cash.iter().sum::<f64>();

        // Spending. Overspenders are retired before anything is booked.
        let mut write_off = vec![false; m];
        let mut mitigation_spend = 0.0;
        for i in 0..m {
            if was_bankrupt[i] {
                continue;
            }
            let interim = redist.interim[i];
            let s = apply_spending(interim, &actions[i], &self.companies[i]);
            if s.overspend {
                write_off[i] = true;
                continue;
            }
            mitigation_spend += s.mitigation;
            let c = &mut self.companies[i];
            c.vulnerability = update_vulnerability(c, actions[i].resilience, interim)?;
            c.cumulative_resilience = s.cumulative_resilience;
            c.esg_score = compute_esg(&actions[i], params.greenwash_coef, params.disclosure);
        }
        // Vulnerability and ESG depend only on the company's own spend, so
        // booking them alongside spending matches updating them after risks.
        self.cumulative_mitigation += mitigation_spend;
        let risks = risk_at(
            f64::from(self.t + 1),
            self.cumulative_mitigation,
            &params.climate,
        );

        let events = sample_events(risks, noise.uniforms);
        let hit = events.to_array();
        let count = events.count();

        let mut margins = vec![0.0; m];
        for i in 0..m {
            if was_bankrupt[i] {
                continue;
            }
            if write_off[i] {
                margins[i] = -1.0;
                continue;
            }
            let c = &self.companies[i];
            margins[i] = match params.gaussian_damage {
                None => profit_margin(&actions[i], params.growth, count, c.vulnerability),
                Some(g) => {
                    let sigma = g.sigma_fraction * c.initial_vulnerability;
                    let loss: f64 = (0..3)
                        .filter(|e| hit[*e])
                        .map(|e| {
                            (c.vulnerability + sigma * noise.damage_shocks[i][e]).clamp(0.0, 1.0)
                        })
                        .sum();
                    margin_with_loss(&actions[i], params.growth, loss)
                }
            };
        }

        if params.strict_bankruptcy {
            for i in 0..m {
                if was_bankrupt[i] || write_off[i] {
                    continue;
                }
                self.companies[i].record_margin(margins[i]);
                if check_strict_bankruptcy(&self.companies[i].margin_history) {
                    write_off[i] = true;
                }
            }
        }

        let settlement = settle(&redist.interim, &margins, &redist.allocation, &write_off);

        let mut newly_bankrupt = Vec::new();
        let mut company_rewards = vec![0.0; m];
        for i in 0..m {
            if was_bankrupt[i] {
                continue;
            }
            company_rewards[i] = company_reward(settlement.capital[i], redist.interim[i]);
            let c = &mut self.companies[i];
            if settlement.bankrupt[i] {
                c.retire();
                newly_bankrupt.push(i);
            } else {
                c.capital = settlement.capital[i];
            }
        }

        let esg: Vec<f64> = self.companies.iter().map(|c| c.esg_score).collect();
        let mut investor_rewards = Vec::with_capacity(n);
        for (j, inv) in self.investors.iter_mut().enumerate() {
            investor_rewards.push(investor_reward(
                redist.allocation.investor_capital[j],
                &settlement.holdings[j],
                settlement.cash[j],
                &esg,
                inv.esg_preference,
            ));
            inv.holdings.clone_from(&settlement.holdings[j]);
            inv.cash = settlement.cash[j];
        }

        self.t += 1;
        self.climate = risks;
        self.last_events = events;

        Ok(StepOutcome {
            company_rewards,
            investor_rewards,
            events,
            interim: redist.interim,
            margins,
            actions,
            investor_flags: flags,
            wealth_before,
            wealth_redistributed,
            mitigation_spend,
            newly_bankrupt,
        })
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape {
            what,
            expected,
            got,
        })
    }
}

/// Length of the shared observation vector.
pub fn observation_len(companies: usize, investors: usize, more_info: bool) -> usize {
    3 * companies + (companies + 1) * investors + if more_info { 6 } else { 0 }
}

/// Shared observation: `(K, Q, L)` per company, `(H_1..H_M, C)` per investor,
/// then risks and last events when `more_info` is set.
///
/// Bankrupt companies' rows are zero; `Q` is zero without disclosure.
pub fn observe(state: &MarketState, params: &MarketParams) -> Vec<f64> {
    let mut obs = Vec::with_capacity(observation_len(
        state.num_companies(),
        state.num_investors(),
        params.more_info,
    ));
    for c in &state.companies {
        if c.bankrupt {
            obs.extend_from_slice(&[0.0; 3]);
        } else {
            let q = if params.disclosure { c.esg_score } else { 0.0 };
            obs.extend_from_slice(&[c.capital, q, c.vulnerability]);
        }
    }
    for inv in &state.investors {
        obs.extend_from_slice(&inv.holdings);
        obs.push(inv.cash);
    }
    if params.more_info {
        obs.extend_from_slice(&state.climate.to_array());
        obs.extend(
            state
                .last_events
                .to_array()
                .map(|e| if e { 1.0 } else { 0.0 }),
        );
    }
    obs
}
