//! Seeded generator for labelled transaction corpora with a planted
//! topology contrast between phishing and normal targets.
//!
//! Phishing targets trade with a handful (2-5) of hub addresses, each of
//! which has 20-60 further counterparties. Normal targets trade with 8-25
//! counterparties that themselves have at most a couple of other partners.
//! Every target owns a disjoint neighborhood, so pattern graphs stay small.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use super::{LabeledTarget, TxRecord};
use crate::error::{Error, Result};

pub const PHISHING: usize = 1;
pub const NORMAL: usize = 0;

/// 2020-01-01T00:00:00Z.
const EPOCH_START: i64 = 1_577_836_800;
const YEAR_SECONDS: i64 = 365 * 86_400;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub records: Vec<TxRecord>,
    pub targets: Vec<LabeledTarget>,
}

struct Generator {
    rng: ChaCha8Rng,
    amounts: LogNormal<f64>,
    used: HashSet<String>,
    records: Vec<TxRecord>,
}

impl Generator {
    fn address(&mut self) -> String {
        loop {
            let hi: u32 = self.rng.random();
            let lo: u128 = self.rng.random();
            let addr = format!("0x{hi:08x}{lo:032x}");
            if self.used.insert(addr.clone()) {
                return addr;
            }
        }
    }

    /// `count` transfers between `a` and `b` in random directions.
    fn trade(&mut self, a: &str, b: &str, count: usize) {
        for _ in 0..count {
            let amount = (self.amounts.sample(&mut self.rng) * 1e6).round() / 1e6;
            let timestamp = EPOCH_START + self.rng.random_range(0..YEAR_SECONDS);
            let (from, to) = if self.rng.random_bool(0.5) { (a, b) } else { (b, a) };
            self.records.push(TxRecord::new(from, to, amount, timestamp));
        }
    }

    fn phishing_target(&mut self) -> String {
        let target = self.address();
        let hubs = self.rng.random_range(2..=5);
        for _ in 0..hubs {
            let hub = self.address();
            let n = self.rng.random_range(1..=3);
            self.trade(&target, &hub, n);
            let fan_out = self.rng.random_range(20..=60);
            for _ in 0..fan_out {
                let leaf = self.address();
                let n = self.rng.random_range(1..=2);
                self.trade(&hub, &leaf, n);
            }
        }
        target
    }

    fn normal_target(&mut self) -> String {
        let target = self.address();
        let partners = self.rng.random_range(8..=25);
        for _ in 0..partners {
            let partner = self.address();
            let n = self.rng.random_range(1..=3);
            self.trade(&target, &partner, n);
            let extra = match self.rng.random_range(0..10) {
                0..=4 => 0,
                5..=7 => 1,
                _ => 2,
            };
            for _ in 0..extra {
                let leaf = self.address();
                self.trade(&partner, &leaf, 1);
            }
        }
        target
    }
}

/// Generates `n_phishing` phishing and `n_normal` normal targets with their
/// transaction records. Output is a pure function of the arguments.
pub fn synth_tx_corpus(seed: u64, n_phishing: usize, n_normal: usize) -> Result<SynthCorpus> {
    if n_phishing == 0 || n_normal == 0 {
        return Err(Error::Validation(
            "synthetic corpus needs at least one target per class".into(),
        ));
    }
    let mut gen = Generator {
        rng: ChaCha8Rng::seed_from_u64(seed),
        amounts: LogNormal::new(0.0, 1.5).expect("valid log-normal parameters"),
        used: HashSet::new(),
        records: Vec::new(),
    };
    let mut targets = Vec::with_capacity(n_phishing + n_normal);
    // Alternate classes so any prefix of the target list is balanced.
    let (mut p, mut q) = (0, 0);
    while p < n_phishing || q < n_normal {
        if p < n_phishing {
            let address = gen.phishing_target();
            targets.push(LabeledTarget {
                address,
                label: PHISHING,
            });
            p += 1;
        }
        if q < n_normal {
            let address = gen.normal_target();
            targets.push(LabeledTarget { address, label: NORMAL });
            q += 1;
        }
    }
    Ok(SynthCorpus {
        records: gen.records,
        targets,
    })
}
