//! Shared helpers for integration tests.
#![allow(dead_code)]

use etree::{ChunkOrder, EncodedDataset, SlotMap};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn random_codes(n: usize, m: usize, k: usize, seed: u64) -> EncodedDataset {
    let mut rng = StdRng::seed_from_u64(seed);
    let codes: Vec<u8> = (0..n * m).map(|_| rng.random_range(0..k) as u8).collect();
    EncodedDataset::from_parts(m, k, codes, (0..n as u32).collect()).unwrap()
}

/// Codes drawn from `centers` random center codes; `flip_prob` perturbs each
/// chunk independently to control duplication.
pub fn clustered_codes(
    n: usize,
    m: usize,
    k: usize,
    centers: usize,
    flip_prob: f64,
    seed: u64,
) -> EncodedDataset {
    let mut rng = StdRng::seed_from_u64(seed);
    let center_codes: Vec<u8> = (0..centers * m)
        .map(|_| rng.random_range(0..k) as u8)
        .collect();
    let mut codes = Vec::with_capacity(n * m);
    for _ in 0..n {
        let c = rng.random_range(0..centers);
        for j in 0..m {
            let chunk = if rng.random_bool(flip_prob) {
                rng.random_range(0..k) as u8
            } else {
                center_codes[c * m + j]
            };
            codes.push(chunk);
        }
    }
    EncodedDataset::from_parts(m, k, codes, (0..n as u32).collect()).unwrap()
}

pub fn random_table(m: usize, k: usize, seed: u64) -> etree::DistanceTable {
    let mut rng = StdRng::seed_from_u64(seed);
    let entries: Vec<f32> = (0..m * k).map(|_| rng.random::<f32>()).collect();
    etree::DistanceTable::from_entries(m, k, entries).unwrap()
}

pub fn identity_slots(ds: &EncodedDataset) -> SlotMap {
    ds.slot_map()
}

pub fn original(m: usize) -> ChunkOrder {
    ChunkOrder::original(m)
}
