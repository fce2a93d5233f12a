//! Seeded, per-(case, rater) presentation order with opaque aliases.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crb_core::model::Arm;

pub fn permutation_seed(blinding_seed: u64, case_id: &str, rater_id: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(blinding_seed.to_le_bytes());
    h.update((case_id.len() as u64).to_le_bytes());
    h.update(case_id.as_bytes());
    h.update(rater_id.as_bytes());
    h.finalize().into()
}

/// "Report A", "Report B", ...
pub fn alias(index: usize) -> String {
    format!("Report {}", (b'A' + index as u8) as char)
}

/// Arms shuffled for this (case, rater) and labelled in presentation order.
pub fn assign_aliases(arms: &[Arm], blinding_seed: u64, case_id: &str, rater_id: &str) -> Vec<(String, Arm)> {
    let mut rng = ChaCha8Rng::from_seed(permutation_seed(blinding_seed, case_id, rater_id));
    let mut order = arms.to_vec();
    order.shuffle(&mut rng);
    order.into_iter().enumerate().map(|(i, a)| (alias(i), a)).collect()
}
