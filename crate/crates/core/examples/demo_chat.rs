//! Trains the demo network and replays a short conversation.
//!
//! ```text
//! cargo run --release -p trainbot-core --example demo_chat
//! ```

use std::sync::Arc;

use chrono::NaiveDate;
use trainbot_core::dialog::{Assistant, AssistantConfig, DialogContext, FixedClock};
use trainbot_core::predictor::{train_registry, TrainingOptions};
use trainbot_core::synthdata::{generate_scenario, split_dataset, Scenario};

fn main() {
    let data = generate_scenario(Scenario::Demo, 42).expect("demo scenario");
    let split = split_dataset(&data.observations, [0.6, 0.2, 0.2], 42).expect("split");
    let registry = train_registry(&data.catalog, &data.observations, &split, &TrainingOptions::default())
        .expect("training");
    let today = NaiveDate::from_ymd_opt(2018, 9, 21).unwrap();
    let assistant = Assistant::new(data.catalog, registry, data.observations, AssistantConfig::default())
        .with_clock(Arc::new(FixedClock(today)));

    let mut context = DialogContext::new("demo");
    for turn in [
        "Is train 12307 on time?",
        "How about for Varanasi?",
        "No, I meant for Allahabad.",
        "What is the average train delay?",
        "Where does it first get delayed?",
        "What is the bottleneck?",
        "Which trains are similar?",
        "Is train 13050 on time?",
    ] {
        let (response, next) = assistant.step(&context, turn);
        context = next;
        println!("User:  {turn}");
        for line in response.text.lines() {
            println!("Agent: {line}");
        }
        println!();
    }
}
