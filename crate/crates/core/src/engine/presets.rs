//! Named scenarios for the reference experiments.

use crate::engine::config::ScenarioConfig;
use crate::error::{Error, Result};

pub const PRESET_NAMES: &[&str] = &[
    "status_quo",
    "mandate",
    "conscious_0.5",
    "conscious_1",
    "conscious_10",
    "heterogeneous",
    "greenwash_beta2",
    "greenwash_beta10",
    "greenwash_beta20",
    "more_info",
    "no_investor_info",
    "resilience",
    "lockin",
    "uncertain_damage",
    "strict_bankruptcy",
    "realdata_seed",
    "scale_10x10",
    "scale_25x25",
];

fn mandate() -> ScenarioConfig {
    let mut c = ScenarioConfig::default();
    c.features.disclosure = true;
    c.investors.esg_preference = vec![0.0];
    c
}

fn conscious(alpha: f64) -> ScenarioConfig {
    let mut c = mandate();
    c.investors.esg_preference = vec![alpha];
    c
}

pub fn scenario_preset(name: &str) -> Result<ScenarioConfig> {
    let mut c = match name {
        "status_quo" => {
            let mut c = mandate();
            c.features.disclosure = false;
            c
        }
        "mandate" => mandate(),
        "conscious_0.5" => conscious(0.5),
        "conscious_1" => conscious(1.0),
        "conscious_10" => conscious(10.0),
        "heterogeneous" => {
            let mut c = mandate();
            c.investors.esg_preference = vec![0.0, 10.0, 10.0];
            c
        }
        "greenwash_beta2" | "greenwash_beta10" | "greenwash_beta20" => {
            let mut c = conscious(1.0);
            c.features.greenwash = true;
            c.economy.greenwash_coef = name["greenwash_beta".len()..].parse().expect("static name");
            c
        }
        "more_info" => {
            let mut c = mandate();
            c.features.more_info = true;
            c
        }
        "no_investor_info" => {
            let mut c = mandate();
            c.investors.count = 0;
            c.features.more_info = true;
            c
        }
        "resilience" => {
            let mut c = conscious(1.0);
            c.features.resilience = true;
            c
        }
        "lockin" => {
            let mut c = mandate();
            c.features.lock_in_years = 5;
            c
        }
        "uncertain_damage" => {
            let mut c = mandate();
            c.features.gaussian_damage = true;
            c
        }
        "strict_bankruptcy" => {
            let mut c = mandate();
            c.features.strict_bankruptcy = true;
            c
        }
        "realdata_seed" => {
            let mut c = mandate();
            c.features.real_data_seeding = true;
            c
        }
        "scale_10x10" | "scale_25x25" => {
            let mut c = mandate();
            let n = if name == "scale_10x10" { 10 } else { 25 };
            c.companies.count = n;
            c.investors.count = n;
            c
        }
        _ => {
            return Err(Error::UnknownPreset {
                name: name.to_string(),
                valid: PRESET_NAMES.iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    c.name = name.to_string();
    c.validate()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_preset_builds() {
        for name in PRESET_NAMES {
            let c = scenario_preset(name).unwrap();
            assert_eq!(c.name, *name);
        }
    }

    #[test]
    fn unknown_preset_lists_valid_names() {
        match scenario_preset("business_as_usual") {
            Err(Error::UnknownPreset { valid, .. }) => assert_eq!(valid.len(), PRESET_NAMES.len()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn examples() {
        let sq = scenario_preset("status_quo").unwrap();
        assert!(!sq.features.disclosure);
        assert!(sq.esg_preferences().iter().all(|a| *a == 0.0));

        let c10 = scenario_preset("conscious_10").unwrap();
        assert!(c10.features.disclosure);
        assert_eq!(c10.esg_preferences(), vec![10.0; 3]);

        let big = scenario_preset("scale_25x25").unwrap();
        assert_eq!((big.companies.count, big.investors.count), (25, 25));
    }
}
