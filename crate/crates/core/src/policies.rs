//! Scripted company and investor policies plus action masking.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::market::{CompanyAction, InvestorAction};

/// Fixed-fraction company behaviour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScriptedCompanyPolicy {
    Cooperator,
    Defector,
    ResilienceDefector,
    Greenwasher,
    Custom(CompanyAction),
}

impl ScriptedCompanyPolicy {
    pub fn action(&self) -> CompanyAction {
        match self {
            Self::Cooperator => CompanyAction {
                mitigation: 0.005,
                ..CompanyAction::ZERO
            },
            Self::Defector => CompanyAction::ZERO,
            Self::ResilienceDefector => CompanyAction {
                resilience: 0.005,
                ..CompanyAction::ZERO
            },
            Self::Greenwasher => CompanyAction {
                greenwash: 0.003,
                ..CompanyAction::ZERO
            },
            Self::Custom(a) => *a,
        }
    }
}

/// Action of a scripted company; bankrupt companies act with zeros.
pub fn company_action(policy: &ScriptedCompanyPolicy, bankrupt: bool) -> CompanyAction {
    if bankrupt {
        CompanyAction::ZERO
    } else {
        policy.action()
    }
}

impl fmt::Display for ScriptedCompanyPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Cooperator => f.write_str("cooperator"),
            Self::Defector => f.write_str("defector"),
            Self::ResilienceDefector => f.write_str("resilience_defector"),
            Self::Greenwasher => f.write_str("greenwasher"),
            Self::Custom(a) => write!(
                f,
                "custom:{},{},{}",
                a.mitigation, a.greenwash, a.resilience
            ),
        }
    }
}

impl FromStr for ScriptedCompanyPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cooperator" => Ok(Self::Cooperator),
            "defector" => Ok(Self::Defector),
            "resilience_defector" => Ok(Self::ResilienceDefector),
            "greenwasher" => Ok(Self::Greenwasher),
            _ => {
                let Some(rest) = s.strip_prefix("custom:") else {
                    return Err(Error::Parameter(format!(
                        "unknown company policy `{s}` (expected cooperator, defector, \
                         resilience_defector, greenwasher or custom:um,ug,ur)"
                    )));
                };
                let parts: Vec<f64> = rest
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::Parameter(format!("custom policy `{s}`: {e}")))?;
                let [m, g, r] = parts[..] else {
                    return Err(Error::Parameter(format!(
                        "custom policy `{s}` needs three fractions"
                    )));
                };
                Ok(Self::Custom(CompanyAction::new(m, g, r)?))
            }
        }
    }
}

/// Investor behaviour in scripted runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScriptedInvestorPolicy {
    /// Invests in every active company.
    ProfitDriven,
    /// Invests only in active companies with the highest ESG score.
    InfinitelyConscious,
}

impl fmt::Display for ScriptedInvestorPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ProfitDriven => "profit_driven",
            Self::InfinitelyConscious => "infinitely_conscious",
        })
    }
}

impl FromStr for ScriptedInvestorPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "profit_driven" => Ok(Self::ProfitDriven),
            "infinitely_conscious" => Ok(Self::InfinitelyConscious),
            _ => Err(Error::Parameter(format!(
                "unknown investor policy `{s}` (expected profit_driven or infinitely_conscious)"
            ))),
        }
    }
}

macro_rules! serde_via_str {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

serde_via_str!(ScriptedCompanyPolicy);
serde_via_str!(ScriptedInvestorPolicy);

/// Flags chosen by a scripted investor from last period's ESG scores.
///
/// With every company bankrupt the investor holds cash.
pub fn investor_action(
    policy: ScriptedInvestorPolicy,
    esg_scores: &[f64],
    active: &[bool],
) -> InvestorAction {
    let flags = match policy {
        ScriptedInvestorPolicy::ProfitDriven => active.to_vec(),
        ScriptedInvestorPolicy::InfinitelyConscious => {
            let best = esg_scores
                .iter()
                .zip(active)
                .filter(|(_, a)| **a)
                .map(|(q, _)| *q)
                .fold(f64::NEG_INFINITY, f64::max);
            esg_scores
                .iter()
                .zip(active)
                .map(|(q, a)| *a && *q == best)
                .collect()
        }
    };
    InvestorAction { flags }
}

/// Zeroes bankrupt companies' actions and every investor flag pointing at them.
pub fn mask_actions(
    company_actions: &[CompanyAction],
    investor_actions: &[InvestorAction],
    bankrupt: &[bool],
) -> (Vec<CompanyAction>, Vec<InvestorAction>) {
    let companies = company_actions
        .iter()
        .zip(bankrupt)
        .map(|(a, b)| if *b { CompanyAction::ZERO } else { *a })
        .collect();
    let investors = investor_actions
        .iter()
        .map(|a| InvestorAction {
            flags: a
                .flags
                .iter()
                .zip(bankrupt)
                .map(|(f, b)| *f && !*b)
                .collect(),
        })
        .collect();
    (companies, investors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kind_fractions() {
        use ScriptedCompanyPolicy::*;
        assert_eq!(
            Cooperator.action(),
            CompanyAction::new(0.005, 0.0, 0.0).unwrap()
        );
        assert_eq!(Defector.action(), CompanyAction::ZERO);
        assert_eq!(
            ResilienceDefector.action(),
            CompanyAction::new(0.0, 0.0, 0.005).unwrap()
        );
        assert_eq!(
            Greenwasher.action(),
            CompanyAction::new(0.0, 0.003, 0.0).unwrap()
        );
        assert_eq!(company_action(&Cooperator, true), CompanyAction::ZERO);
    }

    #[test]
    fn names_round_trip() {
        for name in [
            "cooperator",
            "defector",
            "resilience_defector",
            "greenwasher",
            "custom:0.002,0.001,0",
        ] {
            let p: ScriptedCompanyPolicy = name.parse().unwrap();
            assert_eq!(p.to_string().parse::<ScriptedCompanyPolicy>().unwrap(), p);
        }
        assert!("custom:0.1,0.2".parse::<ScriptedCompanyPolicy>().is_err());
        assert!("custom:2,0,0".parse::<ScriptedCompanyPolicy>().is_err());
        assert!("saint".parse::<ScriptedCompanyPolicy>().is_err());
        assert!("hedge_fund".parse::<ScriptedInvestorPolicy>().is_err());
    }

    #[test]
    fn investor_examples() {
        use ScriptedInvestorPolicy::*;
        let active = [true; 5];
        assert_eq!(
            investor_action(ProfitDriven, &[0.0; 5], &active).flags,
            vec![true; 5]
        );
        assert_eq!(
            investor_action(InfinitelyConscious, &[0.005, 0.0, 0.0, 0.0, 0.0], &active).flags,
            vec![true, false, false, false, false]
        );
        assert_eq!(
            investor_action(InfinitelyConscious, &[0.0; 5], &active).flags,
            vec![true; 5]
        );
        assert_eq!(
            investor_action(InfinitelyConscious, &[0.005, 0.0], &[false, false]).flags,
            vec![false, false]
        );
        // A bankrupt leader does not attract capital.
        assert_eq!(
            investor_action(
                InfinitelyConscious,
                &[0.005, 0.001, 0.0],
                &[false, true, true]
            )
            .flags,
            vec![false, true, false]
        );
    }

    #[test]
    fn masking_examples() {
        let acts = [CompanyAction::new(0.5, 0.0, 0.0).unwrap(); 3];
        let invs = [InvestorAction::all(3)];
        let (c, i) = mask_actions(&acts, &invs, &[false; 3]);
        assert_eq!(c, acts.to_vec());
        assert_eq!(i, invs.to_vec());

        let (c, i) = mask_actions(&acts, &invs, &[false, false, true]);
        assert_eq!(i[0].flags, vec![true, true, false]);
        assert_eq!(c[2], CompanyAction::ZERO);
    }

    proptest! {
        #[test]
        fn conscious_choice_is_scale_invariant(
            scores in prop::collection::vec(0.0f64..0.02, 1..10),
            scale in 0.01f64..100.0,
        ) {
            let active = vec![true; scores.len()];
            let scaled: Vec<f64> = scores.iter().map(|q| q * scale).collect();
            let a = investor_action(ScriptedInvestorPolicy::InfinitelyConscious, &scores, &active);
            let b = investor_action(ScriptedInvestorPolicy::InfinitelyConscious, &scaled, &active);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn masked_flags_avoid_bankrupt(
            flags in prop::collection::vec(prop::collection::vec(any::<bool>(), 6), 0..5),
            bankrupt in prop::collection::vec(any::<bool>(), 6),
        ) {
            let invs: Vec<InvestorAction> = flags.into_iter().map(|flags| InvestorAction { flags }).collect();
            let (_, masked) = mask_actions(&[CompanyAction::ZERO; 6], &invs, &bankrupt);
            for a in masked {
                for (f, b) in a.flags.iter().zip(&bankrupt) {
                    prop_assert!(!(*f && *b));
                }
            }
        }
    }
}
