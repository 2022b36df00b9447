use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SynthError;
use crate::domain::{DatasetSplit, DelayObservation, JourneyKey};
use crate::mlcore::mix_seed;

/// Assigns whole journeys to train/validation/test.
///
/// Journey keys are sorted, shuffled with a seeded RNG and cut at
/// `round(ratio * n)`; the test split takes the remainder.
pub fn split_dataset(
    observations: &[DelayObservation],
    ratios: [f64; 3],
    seed: u64,
) -> Result<DatasetSplit, SynthError> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| !(*r >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(SynthError::BadRatios(ratios));
    }
    let mut keys: Vec<JourneyKey> = observations
        .iter()
        .map(DelayObservation::journey)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    keys.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x5350_4c54)));

    let n = keys.len();
    let n_train = ((ratios[0] * n as f64).round() as usize).min(n);
    let n_val = ((ratios[1] * n as f64).round() as usize).min(n - n_train);
    let test = keys.split_off(n_train + n_val);
    let validation = keys.split_off(n_train);
    Ok(DatasetSplit {
        train: keys.into_iter().collect(),
        validation: validation.into_iter().collect(),
        test: test.into_iter().collect(),
        ratios,
    })
}
