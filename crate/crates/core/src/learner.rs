//! Independent score-function learners, one parameter set per agent.
//!
//! Companies pick from a joint grid over their enabled spending channels
//! with a stateless softmax policy. Investors flip one Bernoulli coin per
//! company whose logit is `bias + weight · Q / esg_scale`, where `Q` is the
//! company's last published ESG score, so an investor can learn to follow
//! disclosure. Updates are REINFORCE on discounted returns-to-go with a
//! per-period moving-average baseline.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::config::ScenarioConfig;
use crate::engine::record::{BatchResult, EpisodeSummary};
use crate::engine::runner::{
    policy_rng, run_batch, run_episode, ActionSource, Episode, JointAction, SeedPair,
};
use crate::error::{Error, Result};
use crate::market::{CompanyAction, InvestorAction, MarketParams, MarketState};
use crate::policies::{
    company_action, investor_action, ScriptedCompanyPolicy, ScriptedInvestorPolicy,
};

/// Hyperparameters of the reference deep IPPO setup, kept for documentation
/// and for external trainers. The desk-scale learner does not use them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IppoReference {
    pub hidden_layers: Vec<usize>,
    pub activation: String,
    pub n_steps: usize,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub clip_range: f64,
    pub episodes_per_update: usize,
}

impl Default for IppoReference {
    fn default() -> Self {
        Self {
            hidden_layers: vec![256, 128],
            activation: "tanh".into(),
            n_steps: 500,
            learning_rate: 3e-5,
            entropy_coef: 0.01,
            clip_range: 0.2,
            episodes_per_update: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub iterations: usize,
    pub episodes_per_iteration: usize,
    pub learning_rate: f64,
    /// Discount applied to returns-to-go.
    pub discount: f64,
    /// Weight on the old value in the moving-average baseline.
    pub baseline_decay: f64,
    /// Scale each agent's advantages to unit standard deviation per batch.
    pub normalize_advantages: bool,
    /// Trailing iterations averaged in the report.
    pub window: usize,
    /// Grid spacing and maximum for each enabled spending fraction.
    pub grid_step: f64,
    pub grid_max: f64,
    /// ESG score that maps to one unit of investor input.
    pub esg_scale: f64,
    /// Agents that keep their scripted policy instead of learning.
    pub frozen_companies: Vec<usize>,
    pub frozen_investors: Vec<usize>,
    pub ippo_reference: IppoReference,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            iterations: 300,
            episodes_per_iteration: 8,
            learning_rate: 2.0,
            discount: 0.9,
            baseline_decay: 0.9,
            normalize_advantages: true,
            window: 20,
            grid_step: 0.001,
            grid_max: 0.01,
            esg_scale: 0.01,
            frozen_companies: Vec::new(),
            frozen_investors: Vec::new(),
            ippo_reference: IppoReference::default(),
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, msg: &str| Err(Error::config(format!("learner.{path}"), msg));
        if self.episodes_per_iteration == 0 {
            return bad("episodes_per_iteration", "must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return bad("discount", "must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return bad("baseline_decay", "must lie in [0, 1)");
        }
        if self.window == 0 {
            return bad("window", "must be at least 1");
        }
        if !(self.grid_step > 0.0 && self.grid_max >= 0.0 && self.grid_max <= 1.0 / 3.0) {
            return bad("grid_step", "need step > 0 and 0 <= max <= 1/3");
        }
        if !(self.esg_scale > 0.0 && self.esg_scale.is_finite()) {
            return bad("esg_scale", "must be positive");
        }
        Ok(())
    }

    /// Grid levels per channel: `0, step, 2·step, …` up to `grid_max`.
    pub fn levels(&self) -> Vec<f64> {
        let n = (self.grid_max / self.grid_step + 1e-9).floor() as usize;
        (0..=n).map(|k| k as f64 * self.grid_step).collect()
    }
}

/// Joint action grid over the enabled channels; disabled channels stay 0.
pub fn action_grid(levels: &[f64], greenwash: bool, resilience: bool) -> Vec<CompanyAction> {
    let zero = [0.0];
    let g = if greenwash { levels } else { &zero[..] };
    let r = if resilience { levels } else { &zero[..] };
    let mut grid = Vec::with_capacity(levels.len() * g.len() * r.len());
    for &mitigation in levels {
        for &greenwash in g {
            for &resilience in r {
                grid.push(CompanyAction {
                    mitigation,
                    greenwash,
                    resilience,
                });
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanyPolicy {
    pub grid: Vec<CompanyAction>,
    pub logits: Vec<f64>,
}

impl CompanyPolicy {
    pub fn uniform(grid: Vec<CompanyAction>) -> Self {
        let logits = vec![0.0; grid.len()];
        Self { grid, logits }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        softmax(&self.logits)
    }

    /// Highest logit, lowest index on ties.
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (k, l) in self.logits.iter().enumerate() {
            if *l > self.logits[best] {
                best = k;
            }
        }
        best
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let p = self.probabilities();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, pk) in p.iter().enumerate() {
            acc += pk;
            if u < acc {
                return k;
            }
        }
        p.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvestorPolicy {
    pub bias: Vec<f64>,
    pub weight: Vec<f64>,
}

impl InvestorPolicy {
    pub fn uniform(m: usize) -> Self {
        Self {
            bias: vec![0.0; m],
            weight: vec![0.0; m],
        }
    }

    pub fn logit(&self, i: usize, feature: f64) -> f64 {
        self.bias[i] + self.weight[i] * feature
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CompanyAgent {
    Learned(CompanyPolicy),
    Frozen(ScriptedCompanyPolicy),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InvestorAgent {
    Learned(InvestorPolicy),
    Frozen(ScriptedInvestorPolicy),
}

/// Parameters of every agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub companies: Vec<CompanyAgent>,
    pub investors: Vec<InvestorAgent>,
    pub esg_scale: f64,
}

impl PolicyParams {
    /// Uniform policies for learners; scripted config policies for frozen agents.
    pub fn initial(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let l = &config.learner;
        let m = config.companies.count;
        for &i in &l.frozen_companies {
            if i >= m {
                return Err(Error::config(
                    "learner.frozen_companies",
                    format!("no company {i}"),
                ));
            }
        }
        for &j in &l.frozen_investors {
            if j >= config.investors.count {
                return Err(Error::config(
                    "learner.frozen_investors",
                    format!("no investor {j}"),
                ));
            }
        }
        let grid = action_grid(
            &l.levels(),
            config.features.greenwash,
            config.features.resilience,
        );
        let companies = config
            .company_policies()
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                if l.frozen_companies.contains(&i) {
                    CompanyAgent::Frozen(p)
                } else {
                    CompanyAgent::Learned(CompanyPolicy::uniform(grid.clone()))
                }
            })
            .collect();
        let investors = config
            .investor_policies()
            .into_iter()
            .enumerate()
            .map(|(j, p)| {
                if l.frozen_investors.contains(&j) {
                    InvestorAgent::Frozen(p)
                } else {
                    InvestorAgent::Learned(InvestorPolicy::uniform(m))
                }
            })
            .collect();
        Ok(Self {
            companies,
            investors,
            esg_scale: l.esg_scale,
        })
    }

    fn features(&self, state: &MarketState, params: &MarketParams) -> Vec<f64> {
        state
            .companies
            .iter()
            .map(|c| {
                if c.bankrupt || !params.disclosure {
                    0.0
                } else {
                    c.esg_score / self.esg_scale
                }
            })
            .collect()
    }

    fn all_finite(&self) -> std::result::Result<(), String> {
        for (i, c) in self.companies.iter().enumerate() {
            if let CompanyAgent::Learned(p) = c {
                if p.logits.iter().any(|x| !x.is_finite()) {
                    return Err(format!("company {i}"));
                }
            }
        }
        for (j, inv) in self.investors.iter().enumerate() {
            if let InvestorAgent::Learned(p) = inv {
                if p.bias.iter().chain(&p.weight).any(|x| !x.is_finite()) {
                    return Err(format!("investor {j}"));
                }
            }
        }
        Ok(())
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / z).collect()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn scripted_scores(state: &MarketState) -> (Vec<f64>, Vec<bool>) {
    (
        state.companies.iter().map(|c| c.esg_score).collect(),
        state.companies.iter().map(|c| c.is_active()).collect(),
    )
}

/// Greedy rollout policy: modal grid action, invest when the logit is ≥ 0.
pub struct GreedyPolicy<'a>(pub &'a PolicyParams);

impl ActionSource for GreedyPolicy<'_> {
    fn act(
        &self,
        state: &MarketState,
        params: &MarketParams,
        _rng: &mut ChaCha8Rng,
        out: &mut JointAction,
    ) {
        let p = self.0;
        let x = p.features(state, params);
        let (scores, active) = scripted_scores(state);
        for (i, agent) in p.companies.iter().enumerate() {
            let bankrupt = state.companies[i].bankrupt;
            out.companies[i] = match agent {
                CompanyAgent::Learned(c) if !bankrupt => c.grid[c.mode()],
                CompanyAgent::Learned(_) => CompanyAction::ZERO,
                CompanyAgent::Frozen(s) => company_action(s, bankrupt),
            };
        }
        for (j, agent) in p.investors.iter().enumerate() {
            out.investors[j] = match agent {
                InvestorAgent::Learned(inv) => InvestorAction {
                    flags: (0..x.len()).map(|i| inv.logit(i, x[i]) >= 0.0).collect(),
                },
                InvestorAgent::Frozen(s) => investor_action(*s, &scores, &active),
            };
        }
    }
}

/// Greedy evaluation over the given seeds.
pub fn evaluate(
    params: &PolicyParams,
    config: &ScenarioConfig,
    seeds: &[SeedPair],
) -> Result<BatchResult> {
    run_batch(config, &GreedyPolicy(params), seeds)
}

/// One sampled episode with everything the gradient needs.
#[derive(Debug, Clone)]
pub struct Rollout {
    /// `[t][i]` grid index; unused for frozen companies.
    pub company_choices: Vec<Vec<usize>>,
    /// `[t][j][i]` sampled flags, before masking.
    pub investor_flags: Vec<Vec<Vec<bool>>>,
    /// `[t][i]` investor input features.
    pub features: Vec<Vec<f64>>,
    pub company_rewards: Vec<Vec<f64>>,
    pub investor_rewards: Vec<Vec<f64>>,
    pub summary: EpisodeSummary,
}

pub fn sample_rollout(
    params: &PolicyParams,
    config: &ScenarioConfig,
    seeds: SeedPair,
) -> Result<Rollout> {
    let mut episode = Episode::new(config, seeds)?;
    let mut rng = policy_rng(seeds.policy);
    let m = params.companies.len();
    let n = params.investors.len();
    let horizon = config.economy.horizon as usize;
    let mut r = Rollout {
        company_choices: Vec::with_capacity(horizon),
        investor_flags: Vec::with_capacity(horizon),
        features: Vec::with_capacity(horizon),
        company_rewards: Vec::with_capacity(horizon),
        investor_rewards: Vec::with_capacity(horizon),
        summary: episode.summary(),
    };
    let mut joint = JointAction::zeros(m, n);
    while !episode.is_done() {
        let state = episode.state();
        let x = params.features(state, episode.params());
        let (scores, active) = scripted_scores(state);
        let mut choices = vec![0; m];
        for (i, agent) in params.companies.iter().enumerate() {
            joint.companies[i] = match agent {
                CompanyAgent::Learned(c) => {
                    choices[i] = c.sample(&mut rng);
                    c.grid[choices[i]]
                }
                CompanyAgent::Frozen(s) => company_action(s, state.companies[i].bankrupt),
            };
        }
        let mut flags = vec![Vec::new(); n];
        for (j, agent) in params.investors.iter().enumerate() {
            joint.investors[j] = match agent {
                InvestorAgent::Learned(inv) => {
                    flags[j] = (0..m)
                        .map(|i| rng.random::<f64>() < sigmoid(inv.logit(i, x[i])))
                        .collect();
                    InvestorAction {
                        flags: flags[j].clone(),
                    }
                }
                InvestorAgent::Frozen(s) => investor_action(*s, &scores, &active),
            };
        }
        let out = episode.step(&joint.companies, &joint.investors)?;
        r.company_choices.push(choices);
        r.investor_flags.push(flags);
        r.features.push(x);
        r.company_rewards.push(out.company_rewards);
        r.investor_rewards.push(out.investor_rewards);
    }
    r.summary = episode.summary();
    Ok(r)
}

/// Gradient buffers shaped like the learned parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub companies: Vec<Vec<f64>>,
    pub investors: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradient {
    fn zeros_like(params: &PolicyParams) -> Self {
        Self {
            companies: params
                .companies
                .iter()
                .map(|c| match c {
                    CompanyAgent::Learned(p) => vec![0.0; p.logits.len()],
                    CompanyAgent::Frozen(_) => Vec::new(),
                })
                .collect(),
            investors: params
                .investors
                .iter()
                .map(|inv| match inv {
                    InvestorAgent::Learned(p) => {
                        (vec![0.0; p.bias.len()], vec![0.0; p.weight.len()])
                    }
                    InvestorAgent::Frozen(_) => (Vec::new(), Vec::new()),
                })
                .collect(),
        }
    }

    /// All components in a fixed order: company logits, then investor
    /// biases and weights.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.companies.iter().flatten().copied().collect();
        for (b, w) in &self.investors {
            v.extend_from_slice(b);
            v.extend_from_slice(w);
        }
        v
    }
}

/// How advantages are formed from returns-to-go.
#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    /// Subtract the batch mean at each period.
    BatchMean,
    /// Subtract a given per-agent, per-period baseline (companies then investors).
    Fixed(Vec<Vec<f64>>),
}

fn returns_to_go(rewards: &[f64], discount: f64) -> Vec<f64> {
    let mut g = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + discount * acc;
        g[t] = acc;
    }
    g
}

/// Per-agent returns-to-go `[agent][episode][t]`, companies then investors.
fn agent_returns(rollouts: &[Rollout], m: usize, n: usize, discount: f64) -> Vec<Vec<Vec<f64>>> {
    let company = (0..m).map(|i| {
        rollouts
            .iter()
            .map(|r| {
                let rw: Vec<f64> = r.company_rewards.iter().map(|row| row[i]).collect();
                returns_to_go(&rw, discount)
            })
            .collect()
    });
    let investor = (0..n).map(|j| {
        rollouts
            .iter()
            .map(|r| {
                let rw: Vec<f64> = r.investor_rewards.iter().map(|row| row[j]).collect();
                returns_to_go(&rw, discount)
            })
            .collect()
    });
    company.chain(investor).collect()
}

fn batch_mean_baseline(returns: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    returns
        .iter()
        .map(|eps| {
            let t_len = eps.first().map_or(0, |e| e.len());
            (0..t_len)
                .map(|t| eps.iter().map(|e| e[t]).sum::<f64>() / eps.len() as f64)
                .collect()
        })
        .collect()
}

/// Score-function gradient of each agent's expected discounted return with
/// respect to its own parameters.
pub fn score_function_gradient(
    params: &PolicyParams,
    rollouts: &[Rollout],
    discount: f64,
    baseline: &Baseline,
    normalize: bool,
) -> Gradient {
    let m = params.companies.len();
    let n = params.investors.len();
    let returns = agent_returns(rollouts, m, n, discount);
    let base = match baseline {
        Baseline::BatchMean => batch_mean_baseline(&returns),
        Baseline::Fixed(b) => b.clone(),
    };
    let advantages: Vec<Vec<Vec<f64>>> = returns
        .iter()
        .zip(&base)
        .map(|(eps, b)| {
            let mut adv: Vec<Vec<f64>> = eps
                .iter()
                .map(|g| g.iter().zip(b).map(|(g, b)| g - b).collect())
                .collect();
            if normalize {
                let all: Vec<f64> = adv.iter().flatten().copied().collect();
                let k = all.len() as f64;
                let mean = all.iter().sum::<f64>() / k;
                let sd = (all.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / k).sqrt();
                if sd > 1e-12 {
                    for a in adv.iter_mut().flatten() {
                        *a /= sd;
                    }
                }
            }
            adv
        })
        .collect();

    let mut grad = Gradient::zeros_like(params);
    let samples: f64 = rollouts
        .iter()
        .map(|r| r.company_rewards.len())
        .sum::<usize>() as f64;
    if samples == 0.0 {
        return grad;
    }
    for (e, r) in rollouts.iter().enumerate() {
        for t in 0..r.company_rewards.len() {
            for (i, agent) in params.companies.iter().enumerate() {
                let CompanyAgent::Learned(c) = agent else {
                    continue;
                };
                let a = advantages[i][e][t] / samples;
                let p = c.probabilities();
                let g = &mut grad.companies[i];
                for (k, pk) in p.iter().enumerate() {
                    g[k] -= a * pk;
                }
                g[r.company_choices[t][i]] += a;
            }
            for (j, agent) in params.investors.iter().enumerate() {
                let InvestorAgent::Learned(inv) = agent else {
                    continue;
                };
                let a = advantages[m + j][e][t] / samples;
                let (gb, gw) = &mut grad.investors[j];
                for i in 0..inv.bias.len() {
                    let x = r.features[t][i];
                    let f = if r.investor_flags[t][j][i] { 1.0 } else { 0.0 };
                    let d = a * (f - sigmoid(inv.logit(i, x)));
                    gb[i] += d;
                    gw[i] += d * x;
                }
            }
        }
    }
    grad
}

/// Ascends each learned agent along its own gradient component.
pub fn apply_gradient(params: &mut PolicyParams, grad: &Gradient, learning_rate: f64) {
    for (agent, g) in params.companies.iter_mut().zip(&grad.companies) {
        if let CompanyAgent::Learned(c) = agent {
            for (l, d) in c.logits.iter_mut().zip(g) {
                *l += learning_rate * d;
            }
        }
    }
    for (agent, (gb, gw)) in params.investors.iter_mut().zip(&grad.investors) {
        if let InvestorAgent::Learned(inv) = agent {
            for (b, d) in inv.bias.iter_mut().zip(gb) {
                *b += learning_rate * d;
            }
            for (w, d) in inv.weight.iter_mut().zip(gw) {
                *w += learning_rate * d;
            }
        }
    }
}

/// Seeds of the `index`-th training episode.
pub fn training_seeds(config: &ScenarioConfig, index: u64) -> SeedPair {
    let s = &config.seeds;
    let climate = if s.fixed_climate_seed {
        s.climate_seed
    } else {
        s.climate_seed.wrapping_add(index)
    };
    SeedPair::new(climate, s.policy_seed.wrapping_add(index))
}

/// Samples `count` rollouts in parallel starting at episode `first`.
pub fn sample_rollouts(
    params: &PolicyParams,
    config: &ScenarioConfig,
    first: u64,
    count: usize,
) -> Result<Vec<Rollout>> {
    (0..count as u64)
        .into_par_iter()
        .map(|e| sample_rollout(params, config, training_seeds(config, first + e)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub iterations: usize,
    pub window: usize,
    /// Per-iteration means over the sampled episodes.
    pub mitigation: Vec<f64>,
    pub final_risk: Vec<f64>,
    pub final_wealth: Vec<f64>,
    /// `[iteration][agent]` mean undiscounted return, companies then investors.
    pub agent_returns: Vec<Vec<f64>>,
    pub window_mitigation: f64,
    pub window_final_risk: f64,
    pub window_final_wealth: f64,
}

fn trailing_mean(xs: &[f64], window: usize) -> f64 {
    let w = &xs[xs.len().saturating_sub(window)..];
    if w.is_empty() {
        return f64::NAN;
    }
    w.iter().sum::<f64>() / w.len() as f64
}

/// Trains every non-frozen agent on its own reward.
pub fn train_independent(config: &ScenarioConfig) -> Result<(PolicyParams, TrainReport)> {
    let mut params = PolicyParams::initial(config)?;
    let report = train_from(config, &mut params, |_, _| {})?;
    Ok((params, report))
}

/// Training loop starting from `params`; `on_iteration` sees the parameters
/// after each update.
pub fn train_from(
    config: &ScenarioConfig,
    params: &mut PolicyParams,
    mut on_iteration: impl FnMut(usize, &PolicyParams),
) -> Result<TrainReport> {
    config.validate()?;
    let l = &config.learner;
    let e = l.episodes_per_iteration;
    let mut baseline: Option<Vec<Vec<f64>>> = None;
    let mut report = TrainReport {
        iterations: l.iterations,
        window: l.window.min(l.iterations),
        mitigation: Vec::with_capacity(l.iterations),
        final_risk: Vec::with_capacity(l.iterations),
        final_wealth: Vec::with_capacity(l.iterations),
        agent_returns: Vec::with_capacity(l.iterations),
        window_mitigation: f64::NAN,
        window_final_risk: f64::NAN,
        window_final_wealth: f64::NAN,
    };
    let m = params.companies.len();
    let n = params.investors.len();

    for it in 0..l.iterations {
        let rollouts = sample_rollouts(params, config, (it * e) as u64, e)?;

        let returns = agent_returns(&rollouts, m, n, l.discount);
        let batch = batch_mean_baseline(&returns);
        let current = baseline.take().unwrap_or_else(|| batch.clone());
        let grad = score_function_gradient(
            params,
            &rollouts,
            l.discount,
            &Baseline::Fixed(current.clone()),
            l.normalize_advantages,
        );
        baseline = Some(
            current
                .iter()
                .zip(&batch)
                .map(|(old, new)| {
                    old.iter()
                        .zip(new)
                        .map(|(o, b)| l.baseline_decay * o + (1.0 - l.baseline_decay) * b)
                        .collect()
                })
                .collect(),
        );
        apply_gradient(params, &grad, l.learning_rate);
        if let Err(agent) = params.all_finite() {
            return Err(Error::Divergence {
                iteration: it,
                agent,
            });
        }

        let k = rollouts.len() as f64;
        report.mitigation.push(
            rollouts
                .iter()
                .map(|r| r.summary.mitigation_total)
                .sum::<f64>()
                / k,
        );
        report
            .final_risk
            .push(rollouts.iter().map(|r| r.summary.final_risk).sum::<f64>() / k);
        report
            .final_wealth
            .push(rollouts.iter().map(|r| r.summary.final_wealth).sum::<f64>() / k);
        report.agent_returns.push(
            (0..m + n)
                .map(|a| {
                    rollouts
                        .iter()
                        .map(|r| {
                            if a < m {
                                r.company_rewards.iter().map(|row| row[a]).sum::<f64>()
                            } else {
                                r.investor_rewards.iter().map(|row| row[a - m]).sum::<f64>()
                            }
                        })
                        .sum::<f64>()
                        / k
                })
                .collect(),
        );
        on_iteration(it, params);
    }

    report.window_mitigation = trailing_mean(&report.mitigation, report.window);
    report.window_final_risk = trailing_mean(&report.final_risk, report.window);
    report.window_final_wealth = trailing_mean(&report.final_wealth, report.window);
    Ok(report)
}

/// Exact expected undiscounted return of every agent (companies then
/// investors) by enumerating all joint learned actions. Only for one-period
/// configs small enough to enumerate.
pub fn exact_expected_returns(params: &PolicyParams, config: &ScenarioConfig) -> Result<Vec<f64>> {
    if config.economy.horizon != 1 {
        return Err(Error::Parameter("exact expectation needs horizon 1".into()));
    }
    let seeds = training_seeds(config, 0);
    let probe = Episode::new(config, seeds)?;
    let state = probe.state();
    let x = params.features(state, probe.params());
    let (scores, active) = scripted_scores(state);
    let m = params.companies.len();
    let n = params.investors.len();

    // Each learned choice is an axis with (value, probability) entries.
    enum Axis {
        Company(usize, Vec<(usize, f64)>),
        Flag(usize, usize, [f64; 2]),
    }
    let mut axes = Vec::new();
    for (i, agent) in params.companies.iter().enumerate() {
        if let CompanyAgent::Learned(c) = agent {
            axes.push(Axis::Company(
                i,
                c.probabilities().into_iter().enumerate().collect(),
            ));
        }
    }
    for (j, agent) in params.investors.iter().enumerate() {
        if let InvestorAgent::Learned(inv) = agent {
            for (i, xi) in x.iter().enumerate() {
                let p = sigmoid(inv.logit(i, *xi));
                axes.push(Axis::Flag(j, i, [1.0 - p, p]));
            }
        }
    }
    let sizes: Vec<usize> = axes
        .iter()
        .map(|a| match a {
            Axis::Company(_, v) => v.len(),
            Axis::Flag(..) => 2,
        })
        .collect();
    let total: usize = sizes.iter().product();
    if total > 2_000_000 {
        return Err(Error::Parameter(format!(
            "{total} joint actions is too many to enumerate"
        )));
    }

    let mut base = JointAction::zeros(m, n);
    for (i, agent) in params.companies.iter().enumerate() {
        if let CompanyAgent::Frozen(s) = agent {
            base.companies[i] = company_action(s, state.companies[i].bankrupt);
        }
    }
    for (j, agent) in params.investors.iter().enumerate() {
        if let InvestorAgent::Frozen(s) = agent {
            base.investors[j] = investor_action(*s, &scores, &active);
        }
    }

    let partial = (0..total)
        .into_par_iter()
        .map(|mut code| {
            let mut joint = base.clone();
            let mut prob = 1.0;
            for (axis, size) in axes.iter().zip(&sizes) {
                let k = code % size;
                code /= size;
                match axis {
                    Axis::Company(i, v) => {
                        let CompanyAgent::Learned(c) = &params.companies[*i] else {
                            unreachable!()
                        };
                        joint.companies[*i] = c.grid[v[k].0];
                        prob *= v[k].1;
                    }
                    Axis::Flag(j, i, p) => {
                        joint.investors[*j].flags[*i] = k == 1;
                        prob *= p[k];
                    }
                }
            }
            let mut episode = probe.clone();
            let out = episode.step(&joint.companies, &joint.investors)?;
            let rewards: Vec<f64> = out
                .company_rewards
                .iter()
                .chain(&out.investor_rewards)
                .map(|r| prob * r)
                .collect();
            Ok(rewards)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut expected = vec![0.0; m + n];
    for r in partial {
        for (e, v) in expected.iter_mut().zip(r) {
            *e += v;
        }
    }
    Ok(expected)
}

/// Central finite differences of each agent's exact expected return with
/// respect to its own parameters, in [`Gradient::flatten`] order.
pub fn finite_difference_gradient(
    params: &PolicyParams,
    config: &ScenarioConfig,
    h: f64,
) -> Result<Vec<f64>> {
    let m = params.companies.len();
    let mut out = Vec::new();
    let eval = |p: &PolicyParams, agent: usize| -> Result<f64> {
        Ok(exact_expected_returns(p, config)?[agent])
    };
    for i in 0..m {
        if let CompanyAgent::Learned(c) = &params.companies[i] {
            for k in 0..c.logits.len() {
                let mut hi = params.clone();
                let mut lo = params.clone();
                if let CompanyAgent::Learned(c) = &mut hi.companies[i] {
                    c.logits[k] += h;
                }
                if let CompanyAgent::Learned(c) = &mut lo.companies[i] {
                    c.logits[k] -= h;
                }
                out.push((eval(&hi, i)? - eval(&lo, i)?) / (2.0 * h));
            }
        }
    }
    for j in 0..params.investors.len() {
        if let InvestorAgent::Learned(inv) = &params.investors[j] {
            for field in 0..2 {
                for i in 0..inv.bias.len() {
                    let bump = |p: &mut PolicyParams, d: f64| {
                        if let InvestorAgent::Learned(v) = &mut p.investors[j] {
                            if field == 0 {
                                v.bias[i] += d;
                            } else {
                                v.weight[i] += d;
                            }
                        }
                    };
                    let mut hi = params.clone();
                    let mut lo = params.clone();
                    bump(&mut hi, h);
                    bump(&mut lo, -h);
                    out.push((eval(&hi, m + j)? - eval(&lo, m + j)?) / (2.0 * h));
                }
            }
        }
    }
    Ok(out)
}

/// Exhaustive search over the grid for one company, with every other agent
/// playing its scripted policy. Returns the best grid index, its action and
/// its episode return; the lowest index wins ties.
pub fn grid_oracle(config: &ScenarioConfig, company: usize) -> Result<(usize, CompanyAction, f64)> {
    let base = PolicyParams::initial(config)?;
    let grid = action_grid(
        &config.learner.levels(),
        config.features.greenwash,
        config.features.resilience,
    );
    let seeds = training_seeds(config, 0);
    let values = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let mut p = base.clone();
            for (i, agent) in p.companies.iter_mut().enumerate() {
                let scripted = config.company_policies()[i];
                *agent = if i == company {
                    let mut c = CompanyPolicy::uniform(grid.clone());
                    c.logits[k] = 1.0;
                    CompanyAgent::Learned(c)
                } else {
                    CompanyAgent::Frozen(scripted)
                };
            }
            for (j, agent) in p.investors.iter_mut().enumerate() {
                *agent = InvestorAgent::Frozen(config.investor_policies()[j]);
            }
            let rec = run_episode(config, &GreedyPolicy(&p), seeds)?;
            Ok(rec.company_return(company))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    Ok((best, grid[best], values[best]))
}
