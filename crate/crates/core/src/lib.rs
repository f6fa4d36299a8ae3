//! InvestESG: a climate-investment market where companies choose how much to
//! spend on mitigation, greenwashing and resilience, and investors choose
//! which companies to fund, under a shared and worsening climate risk.
//!
//! The crate is layered bottom-up: [`climate`] holds the risk law and event
//! draws, [`market`] the one-period transition, [`policies`] scripted agents,
//! [`engine`] scenarios and runners, [`schelling`] payoff diagrams and
//! [`learner`] a small independent policy-gradient trainer.

pub mod climate;
pub mod engine;
pub mod error;
pub mod learner;
pub mod market;
pub mod policies;
pub mod schelling;

pub use error::{Error, Result};
