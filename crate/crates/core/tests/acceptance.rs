//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use investesg::climate::{overall_risk, risk_at, sample_events, ClimateParams, ClimateRisks};
use investesg::engine::{
    run_batch_records, run_episode, scenario_preset, ScenarioConfig, ScriptedAssignment, SeedPair,
};
use investesg::learner::{
    finite_difference_gradient, sample_rollouts, score_function_gradient, train_independent,
    Baseline, PolicyParams,
};
use investesg::market::{
    CompanyAction, CompanyState, InvestorAction, InvestorState, MarketParams, MarketState,
    StepNoise,
};
use investesg::policies::{ScriptedCompanyPolicy, ScriptedInvestorPolicy};
use investesg::schelling::{
    cooperation_dominates, is_social_dilemma, schelling_curve, SchellingSpec,
};

const CALIBRATION_TOL: f64 = 1e-12;
const OVERALL_RISK_TOL: f64 = 1e-4;
const CONSERVATION_REL_TOL: f64 = 1e-9;
const CONSERVATION_STEPS: usize = 1000;
const CONSERVATION_BUDGET: Duration = Duration::from_secs(1);
const WEALTH_REL_TOL: f64 = 1e-9;
const WEALTH_BUDGET: Duration = Duration::from_millis(10);
const SCHELLING_BUDGET: Duration = Duration::from_secs(1);
const EVENT_DRAWS: usize = 100_000;
const EVENT_SIGMAS: f64 = 3.0;
const BATCH_EPISODES: usize = 8;
const LEARNER_SEEDS: [u64; 3] = [0, 1, 2];
const LEARNER_MIN_WINS: usize = 2;
const GRADIENT_ROLLOUTS: usize = 1_000_000;
const GRADIENT_REL_TOL: f64 = 0.05;
const FD_STEP: f64 = 1e-4;

type Check = std::result::Result<(bool, String), investesg::Error>;
type Criterion = (&'static str, fn() -> Check);

fn calibration_endpoints() -> Check {
    let p = ClimateParams::default();
    let r80 = risk_at(80.0, 0.0, &p).to_array();
    let want = [0.94, 0.27, 0.41];
    let max_err = r80
        .iter()
        .zip(want)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let o80 = overall_risk(risk_at(80.0, 0.0, &p));
    let o0 = overall_risk(risk_at(0.0, 0.0, &p));
    let ok = max_err <= CALIBRATION_TOL
        && (o80 - 0.9742).abs() <= OVERALL_RISK_TOL
        && (o0 - 0.48).abs() <= OVERALL_RISK_TOL;
    Ok((
        ok,
        format!("risk_at(80) max err {max_err:.1e}, overall(80) {o80:.4}, overall(0) {o0:.4}"),
    ))
}

fn random_state(rng: &mut ChaCha8Rng, params: &MarketParams) -> MarketState {
    let m = rng.random_range(1..=25);
    let n = rng.random_range(1..=25);
    let companies = (0..m)
        .map(|_| CompanyState::new(rng.random_range(0.1..50.0), rng.random_range(0.0..0.5), 5.0))
        .collect();
    let investors = (0..n)
        .map(|_| InvestorState::new(m, rng.random_range(0.0..50.0), rng.random_range(0.0..10.0)))
        .collect();
    MarketState::new(companies, investors, &params.climate)
}

fn random_actions(
    rng: &mut ChaCha8Rng,
    m: usize,
    n: usize,
) -> (Vec<CompanyAction>, Vec<InvestorAction>) {
    let companies = (0..m)
        .map(|_| {
            let budget: f64 = rng.random_range(0.0..1.0);
            let w: [f64; 3] = [rng.random(), rng.random(), rng.random()];
            let s = w.iter().sum::<f64>().max(1e-12);
            CompanyAction {
                mitigation: budget * w[0] / s,
                greenwash: budget * w[1] / s,
                resilience: budget * w[2] / s,
            }
        })
        .collect();
    let investors = (0..n)
        .map(|_| InvestorAction {
            flags: (0..m).map(|_| rng.random_bool(0.5)).collect(),
        })
        .collect();
    (companies, investors)
}

/// Each trial builds a random market, plays a few random warm-up steps so
/// holdings and bankruptcies are non-trivial, then checks one step.
fn conservation() -> Check {
    let params = MarketParams {
        greenwash_enabled: true,
        resilience_enabled: true,
        ..MarketParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..CONSERVATION_STEPS {
        let mut state = random_state(&mut rng, &params);
        let (m, n) = (state.num_companies(), state.num_investors());
        for _ in 0..rng.random_range(0..4) {
            let (c, i) = random_actions(&mut rng, m, n);
            let u = [rng.random(), rng.random(), rng.random()];
            state.step(&params, &c, &i, StepNoise::events_only(u))?;
        }
        let before = state.total_wealth();
        let (c, i) = random_actions(&mut rng, m, n);
        let u = [rng.random(), rng.random(), rng.random()];
        let out = state.step(&params, &c, &i, StepNoise::events_only(u))?;
        let cash: f64 = state.investors.iter().map(|v| v.cash).sum();
        let after = out.interim.iter().sum::<f64>() + cash;
        worst = worst.max((after - before).abs() / before.abs().max(1.0));
    }
    let elapsed = start.elapsed();
    Ok((
        worst <= CONSERVATION_REL_TOL && elapsed < CONSERVATION_BUDGET,
        format!("{CONSERVATION_STEPS} steps, worst rel err {worst:.1e}, {elapsed:.0?}"),
    ))
}

fn analytic_wealth() -> Check {
    let mut c = ScenarioConfig::default();
    c.companies.initial_vulnerability = 0.0;
    c.companies.policy = vec![ScriptedCompanyPolicy::Defector];
    c.investors.policy = vec![ScriptedInvestorPolicy::ProfitDriven];
    let assignment = ScriptedAssignment::from_config(&c);
    let start = Instant::now();
    let rec = run_episode(&c, &assignment, SeedPair::new(0, 0))?;
    let elapsed = start.elapsed();
    let want = 98.0 * 1.1f64.powi(100);
    let rel = (rec.summary.final_wealth - want).abs() / want;
    Ok((
        rel <= WEALTH_REL_TOL && elapsed < WEALTH_BUDGET,
        format!(
            "W100 {:.6} vs {want:.6}, rel err {rel:.1e}, {elapsed:.1?}",
            rec.summary.final_wealth
        ),
    ))
}

fn schelling_detail(curve: &investesg::schelling::SchellingCurve) -> String {
    (0..curve.k.len())
        .map(|i| {
            format!(
                "k{}: c {:.1} d {:.1} avg {:.1}",
                curve.k[i],
                curve.cooperate_mean[i],
                curve.defect_mean[i],
                curve.average_when_defect[i]
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn timed_curve(
    config: &ScenarioConfig,
    spec: &SchellingSpec,
) -> std::result::Result<(investesg::schelling::SchellingCurve, Duration), investesg::Error> {
    let start = Instant::now();
    let curve = schelling_curve(config, spec)?;
    Ok((curve, start.elapsed()))
}

fn schelling_profit_driven() -> Check {
    let spec = SchellingSpec::new(
        ScriptedCompanyPolicy::Cooperator,
        ScriptedCompanyPolicy::Defector,
        ScriptedInvestorPolicy::ProfitDriven,
    );
    let (curve, elapsed) = timed_curve(&ScenarioConfig::default(), &spec)?;
    let report = is_social_dilemma(&curve);
    Ok((
        report.is_dilemma && elapsed < SCHELLING_BUDGET,
        format!(
            "dilemma={} cooperation_wins_at={:?} average_drops_at={:?} {elapsed:.0?} [{}]",
            report.is_dilemma,
            report.cooperation_wins_at,
            report.average_drops_at,
            schelling_detail(&curve)
        ),
    ))
}

fn schelling_conscious() -> Check {
    let spec = SchellingSpec::new(
        ScriptedCompanyPolicy::Cooperator,
        ScriptedCompanyPolicy::Defector,
        ScriptedInvestorPolicy::InfinitelyConscious,
    );
    let (curve, elapsed) = timed_curve(&ScenarioConfig::default(), &spec)?;
    Ok((
        cooperation_dominates(&curve),
        format!("{elapsed:.0?} [{}]", schelling_detail(&curve)),
    ))
}

fn schelling_greenwash() -> Check {
    let mut c = ScenarioConfig::default();
    c.features.greenwash = true;
    c.economy.greenwash_coef = 2.0;
    let spec = SchellingSpec::new(
        ScriptedCompanyPolicy::Cooperator,
        ScriptedCompanyPolicy::Greenwasher,
        ScriptedInvestorPolicy::InfinitelyConscious,
    );
    let (curve, elapsed) = timed_curve(&c, &spec)?;
    let report = is_social_dilemma(&curve);
    Ok((
        report.is_dilemma,
        format!(
            "dilemma={} {elapsed:.0?} [{}]",
            report.is_dilemma,
            schelling_detail(&curve)
        ),
    ))
}

fn mitigation_efficacy() -> Check {
    let run = |policy| -> std::result::Result<f64, investesg::Error> {
        let mut c = ScenarioConfig::default();
        c.companies.policy = vec![policy];
        Ok(run_episode(
            &c,
            &ScriptedAssignment::from_config(&c),
            SeedPair::new(0, 0),
        )?
        .summary
        .final_risk)
    };
    let coop = run(ScriptedCompanyPolicy::Cooperator)?;
    let defect = run(ScriptedCompanyPolicy::Defector)?;
    Ok((
        coop < defect,
        format!("P100 cooperators {coop:.4} vs defectors {defect:.4}"),
    ))
}

fn event_statistics() -> Check {
    let risks = ClimateRisks::new(0.28, 0.13, 0.17);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let total: u64 = (0..EVENT_DRAWS)
        .map(|_| sample_events(risks, [rng.random(), rng.random(), rng.random()]).count() as u64)
        .sum();
    let mean = total as f64 / EVENT_DRAWS as f64;
    let var: f64 = risks.to_array().iter().map(|p| p * (1.0 - p)).sum();
    let sigma = (var / EVENT_DRAWS as f64).sqrt();
    let z = (mean - 0.58) / sigma;
    Ok((
        z.abs() <= EVENT_SIGMAS,
        format!("mean {mean:.5}, sigma {sigma:.5}, z {z:+.2}"),
    ))
}

fn batch_determinism() -> Check {
    let c = ScenarioConfig::default();
    let a = ScriptedAssignment::from_config(&c);
    let mut c_free = c.clone();
    c_free.seeds.fixed_climate_seed = false;
    let seeds = SeedPair::sequence(&c_free, BATCH_EPISODES);
    let batch = run_batch_records(&c, &a, &seeds)?;
    let mut mismatches = 0;
    for (s, b) in seeds.iter().zip(&batch) {
        let seq = run_episode(&c, &a, *s)?;
        let same_bits = seq.rows == b.rows
            && seq.summary.final_risk.to_bits() == b.summary.final_risk.to_bits()
            && seq.summary.final_wealth.to_bits() == b.summary.final_wealth.to_bits()
            && seq.summary == b.summary;
        if !same_bits {
            mismatches += 1;
        }
    }
    Ok((
        mismatches == 0 && batch.len() == BATCH_EPISODES,
        format!("{BATCH_EPISODES} episodes, {mismatches} mismatches"),
    ))
}

fn learner_direction() -> Check {
    let mut wins = 0;
    let mut detail = Vec::new();
    for seed in LEARNER_SEEDS {
        let train = |name: &str| -> std::result::Result<f64, investesg::Error> {
            let mut c = scenario_preset(name)?;
            c.seeds.policy_seed = seed;
            Ok(train_independent(&c)?.1.window_mitigation)
        };
        let conscious = train("conscious_10")?;
        let mandate = train("mandate")?;
        if conscious > mandate {
            wins += 1;
        }
        detail.push(format!(
            "seed {seed}: conscious_10 {conscious:.2} vs mandate {mandate:.2}"
        ));
    }
    Ok((
        wins >= LEARNER_MIN_WINS,
        format!("{wins}/{} [{}]", LEARNER_SEEDS.len(), detail.join("; ")),
    ))
}

fn gradient_check() -> Check {
    let mut c = ScenarioConfig::default();
    c.companies.count = 2;
    c.companies.policy = vec![ScriptedCompanyPolicy::Cooperator];
    c.investors.count = 1;
    c.economy.horizon = 1;
    c.learner.frozen_companies = vec![1];
    let params = PolicyParams::initial(&c)?;
    let rollouts = sample_rollouts(&params, &c, 0, GRADIENT_ROLLOUTS)?;
    let sf = score_function_gradient(
        &params,
        &rollouts,
        c.learner.discount,
        &Baseline::BatchMean,
        false,
    )
    .flatten();
    let fd = finite_difference_gradient(&params, &c, FD_STEP)?;
    let diff: f64 = sf
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = fd.iter().map(|b| b * b).sum::<f64>().sqrt();
    let rel = diff / norm;
    Ok((
        sf.len() == fd.len() && norm > 0.0 && rel <= GRADIENT_REL_TOL,
        format!("{} components, |fd| {norm:.4e}, rel err {rel:.4}", fd.len()),
    ))
}

fn main() -> ExitCode {
    let checks: [Criterion; 11] = [
        ("calibration_endpoints", calibration_endpoints),
        ("conservation_suite", conservation),
        ("analytic_wealth", analytic_wealth),
        ("schelling_profit_driven_dilemma", schelling_profit_driven),
        ("schelling_conscious_cooperation", schelling_conscious),
        ("schelling_greenwash_reversal", schelling_greenwash),
        ("mitigation_efficacy", mitigation_efficacy),
        ("event_statistics", event_statistics),
        ("batch_determinism", batch_determinism),
        ("learner_direction", learner_direction),
        ("learner_gradient_check", gradient_check),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
    println!(
        "{} of {} criteria passed",
        checks.len() - failed,
        checks.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
