//! Train delay prediction, journey analytics and a slot-based assistant.

pub mod analytics;
pub mod bench;
pub mod dialog;
pub mod domain;
pub mod mlcore;
pub mod predictor;
pub mod synthdata;

