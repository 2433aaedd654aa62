//! Engine for a grounded well-being conversational agent.
//!
//! An utterance is routed by a binary mode classifier (medical vs social),
//! assigned a topic by a temperature-calibrated classifier, and either
//! answered directly from topic-restricted sentence retrieval or confirmed
//! with the user first. Medical answers are grounded onto an avatar body map.
//! When a stage has nothing to say, the next one takes over: MedicalQA, then
//! SocialBot, then a chit-chat fallback.

pub mod bundle;
pub mod calibrate;
pub mod chatfallback;
pub mod corpus;
pub mod dialog;
pub mod error;
pub mod fixtures;
pub mod ground;
pub mod retrieve;
pub mod textmodel;
pub mod tokenize;

pub use error::{Error, Result};
