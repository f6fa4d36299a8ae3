//! Schelling diagrams: episode payoff of a focal company that cooperates or
//! defects, against the number of other cooperating companies.
//!
//! Company 0 is the focal agent; companies `1..=k` cooperate and the rest
//! defect. Both focal roles replay the same event stream for each seed.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::config::ScenarioConfig;
use crate::engine::output::write_json;
use crate::engine::record::mean_stderr;
use crate::engine::runner::{run_episode, ScriptedAssignment, SeedPair};
use crate::error::{Error, Result};
use crate::policies::{ScriptedCompanyPolicy, ScriptedInvestorPolicy};

/// Default seeds for diagram runs.
pub const DEFAULT_SEEDS: [u64; 3] = [0, 1, 2];

#[derive(Debug, Clone, PartialEq)]
pub struct SchellingSpec {
    pub cooperator: ScriptedCompanyPolicy,
    pub defector: ScriptedCompanyPolicy,
    /// One entry per investor, or a single entry for all.
    pub investors: Vec<ScriptedInvestorPolicy>,
    /// Each seed drives both the event stream and the policy stream.
    pub seeds: Vec<u64>,
}

impl SchellingSpec {
    pub fn new(
        cooperator: ScriptedCompanyPolicy,
        defector: ScriptedCompanyPolicy,
        investor: ScriptedInvestorPolicy,
    ) -> Self {
        Self {
            cooperator,
            defector,
            investors: vec![investor],
            seeds: DEFAULT_SEEDS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchellingCurve {
    pub k: Vec<usize>,
    pub cooperate_mean: Vec<f64>,
    pub cooperate_stderr: Vec<f64>,
    pub defect_mean: Vec<f64>,
    pub defect_stderr: Vec<f64>,
    /// Mean payoff over all companies in the runs where the focal company defects.
    pub average_when_defect: Vec<f64>,
    pub seeds: Vec<u64>,
    pub horizon: u32,
}

/// Per-seed payoffs for one `k`: focal cooperate, focal defect, and the
/// all-company average when the focal company defects.
#[derive(Debug, Clone, PartialEq)]
pub struct SchellingPoint {
    pub cooperate: Vec<f64>,
    pub defect: Vec<f64>,
    pub average_when_defect: Vec<f64>,
}

fn check(config: &ScenarioConfig, spec: &SchellingSpec) -> Result<()> {
    config.validate()?;
    if spec.seeds.is_empty() {
        return Err(Error::Parameter(
            "Schelling run needs at least one seed".into(),
        ));
    }
    let n = config.investors.count;
    if !(spec.investors.len() == 1 || spec.investors.len() == n) {
        return Err(Error::Shape {
            what: "Schelling investor policies",
            expected: n,
            got: spec.investors.len(),
        });
    }
    Ok(())
}

fn assignment(
    config: &ScenarioConfig,
    spec: &SchellingSpec,
    k: usize,
    focal_cooperates: bool,
) -> ScriptedAssignment {
    let m = config.companies.count;
    let companies = (0..m)
        .map(|i| match i {
            0 if focal_cooperates => spec.cooperator,
            0 => spec.defector,
            i if i <= k => spec.cooperator,
            _ => spec.defector,
        })
        .collect();
    let n = config.investors.count;
    let investors = if spec.investors.len() == 1 {
        vec![spec.investors[0]; n]
    } else {
        spec.investors.clone()
    };
    ScriptedAssignment {
        companies,
        investors,
    }
}

/// Runs both focal roles for every seed at one `k`.
pub fn schelling_point(
    config: &ScenarioConfig,
    spec: &SchellingSpec,
    k: usize,
) -> Result<SchellingPoint> {
    check(config, spec)?;
    let m = config.companies.count;
    if k >= m {
        return Err(Error::Parameter(format!(
            "k = {k} other cooperators is out of range for {m} companies"
        )));
    }
    let cells: Vec<(bool, u64)> = [true, false]
        .iter()
        .flat_map(|c| spec.seeds.iter().map(move |s| (*c, *s)))
        .collect();
    let results = cells
        .par_iter()
        .map(|(coop, seed)| {
            let rec = run_episode(
                config,
                &assignment(config, spec, k, *coop),
                SeedPair::new(*seed, *seed),
            )?;
            let all: f64 = (0..m).map(|i| rec.company_return(i)).sum();
            Ok((rec.company_return(0), all / m as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let s = spec.seeds.len();
    Ok(SchellingPoint {
        cooperate: results[..s].iter().map(|r| r.0).collect(),
        defect: results[s..].iter().map(|r| r.0).collect(),
        average_when_defect: results[s..].iter().map(|r| r.1).collect(),
    })
}

pub fn schelling_curve(config: &ScenarioConfig, spec: &SchellingSpec) -> Result<SchellingCurve> {
    check(config, spec)?;
    let m = config.companies.count;
    let points = (0..m)
        .into_par_iter()
        .map(|k| schelling_point(config, spec, k))
        .collect::<Result<Vec<_>>>()?;
    let mut curve = SchellingCurve {
        k: (0..m).collect(),
        cooperate_mean: Vec::with_capacity(m),
        cooperate_stderr: Vec::with_capacity(m),
        defect_mean: Vec::with_capacity(m),
        defect_stderr: Vec::with_capacity(m),
        average_when_defect: Vec::with_capacity(m),
        seeds: spec.seeds.clone(),
        horizon: config.economy.horizon,
    };
    for p in &points {
        let (cm, cs) = mean_stderr(&p.cooperate);
        let (dm, ds) = mean_stderr(&p.defect);
        curve.cooperate_mean.push(cm);
        curve.cooperate_stderr.push(cs);
        curve.defect_mean.push(dm);
        curve.defect_stderr.push(ds);
        curve
            .average_when_defect
            .push(mean_stderr(&p.average_when_defect).0);
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DilemmaReport {
    pub is_dilemma: bool,
    pub defect_dominates: bool,
    pub average_increasing: bool,
    /// `k` values where cooperating paid at least as much as defecting.
    pub cooperation_wins_at: Vec<usize>,
    /// `k` values where the average failed to rise from `k − 1`.
    pub average_drops_at: Vec<usize>,
}

/// A dilemma needs defection to pay more at every `k` while the average
/// payoff strictly rises with cooperation.
pub fn is_social_dilemma(curve: &SchellingCurve) -> DilemmaReport {
    let cooperation_wins_at: Vec<usize> = curve
        .k
        .iter()
        .zip(curve.defect_mean.iter().zip(&curve.cooperate_mean))
        .filter(|(_, (d, c))| d.partial_cmp(c) != Some(std::cmp::Ordering::Greater))
        .map(|(k, _)| *k)
        .collect();
    let average_drops_at: Vec<usize> = curve
        .average_when_defect
        .windows(2)
        .zip(&curve.k[1..])
        .filter(|(w, _)| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
        .map(|(_, k)| *k)
        .collect();
    let defect_dominates = cooperation_wins_at.is_empty();
    let average_increasing = average_drops_at.is_empty();
    DilemmaReport {
        is_dilemma: defect_dominates && average_increasing,
        defect_dominates,
        average_increasing,
        cooperation_wins_at,
        average_drops_at,
    }
}

/// True when cooperating pays strictly more than defecting at every `k`.
pub fn cooperation_dominates(curve: &SchellingCurve) -> bool {
    curve
        .cooperate_mean
        .iter()
        .zip(&curve.defect_mean)
        .all(|(c, d)| c > d)
}

pub const TABLE_HEADER: [&str; 6] = [
    "k",
    "coop_mean",
    "coop_stderr",
    "defect_mean",
    "defect_stderr",
    "avg_defect_mean",
];

pub fn write_schelling_table(curve: &SchellingCurve, path: &Path) -> Result<()> {
    let to_io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(to_io)?;
    w.write_record(TABLE_HEADER).map_err(to_io)?;
    for i in 0..curve.k.len() {
        w.write_record([
            curve.k[i].to_string(),
            curve.cooperate_mean[i].to_string(),
            curve.cooperate_stderr[i].to_string(),
            curve.defect_mean[i].to_string(),
            curve.defect_stderr[i].to_string(),
            curve.average_when_defect[i].to_string(),
        ])
        .map_err(to_io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `schelling.csv` plus the full curve as `schelling.json`.
pub fn write_schelling_outputs(curve: &SchellingCurve, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_schelling_table(curve, &dir.join("schelling.csv"))?;
    write_json(curve, &dir.join("schelling.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(coop: &[f64], defect: &[f64], avg: &[f64]) -> SchellingCurve {
        SchellingCurve {
            k: (0..coop.len()).collect(),
            cooperate_mean: coop.to_vec(),
            cooperate_stderr: vec![0.0; coop.len()],
            defect_mean: defect.to_vec(),
            defect_stderr: vec![0.0; coop.len()],
            average_when_defect: avg.to_vec(),
            seeds: vec![0],
            horizon: 100,
        }
    }

    #[test]
    fn dilemma_classification() {
        let dilemma = curve(&[1.0, 2.0, 3.0], &[1.5, 2.5, 3.5], &[1.0, 2.0, 3.0]);
        assert!(is_social_dilemma(&dilemma).is_dilemma);

        let resolved = curve(&[2.0, 3.0, 4.0], &[1.5, 2.5, 3.5], &[1.0, 2.0, 3.0]);
        let r = is_social_dilemma(&resolved);
        assert!(!r.is_dilemma);
        assert_eq!(r.cooperation_wins_at, vec![0, 1, 2]);
        assert!(cooperation_dominates(&resolved));

        let flat = curve(&[1.0; 3], &[1.0; 3], &[1.0; 3]);
        let r = is_social_dilemma(&flat);
        assert!(!r.is_dilemma && !r.defect_dominates && !r.average_increasing);
    }

    #[test]
    fn single_company_gives_single_point() {
        let mut c = ScenarioConfig::default();
        c.companies.count = 1;
        let spec = SchellingSpec::new(
            ScriptedCompanyPolicy::Cooperator,
            ScriptedCompanyPolicy::Defector,
            ScriptedInvestorPolicy::ProfitDriven,
        );
        let curve = schelling_curve(&c, &spec).unwrap();
        assert_eq!(curve.k, vec![0]);
        assert!(schelling_point(&c, &spec, 1).is_err());
    }

    #[test]
    fn pairs_share_events_and_reproduce() {
        let mut c = ScenarioConfig::default();
        c.economy.horizon = 30;
        let spec = SchellingSpec::new(
            ScriptedCompanyPolicy::Cooperator,
            ScriptedCompanyPolicy::Defector,
            ScriptedInvestorPolicy::ProfitDriven,
        );
        let a = schelling_curve(&c, &spec).unwrap();
        let b = schelling_curve(&c, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cooperate_mean.len(), 5);
    }
}
