//! Planted-block synthetic histograms.
//!
//! Features are partitioned into blocks. Each class has a profile of block
//! masses; a histogram draws its block masses around its class profile and
//! spreads each block's mass over the block's bins at random. Moving mass
//! inside a block says nothing about the class, so a good ground metric is
//! cheap within blocks and expensive across them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::dataset::{LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::transport::Histogram;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub d: usize,
    /// Explicit partition of `0..d`; when absent, `n_blocks` contiguous
    /// blocks of near-equal size.
    pub blocks: Option<Vec<Vec<usize>>>,
    pub n_blocks: usize,
    pub n_classes: usize,
    /// Training points per class.
    pub n_per_class: usize,
    pub n_test_per_class: usize,
    /// How far class block profiles are from uniform, in `[0, 1]`.
    pub cross_signal: f64,
    /// Share of each histogram that is random, in `[0, 1]`.
    pub within_noise: f64,
    /// Dirichlet concentration of block masses around the class profile.
    pub block_concentration: f64,
    /// Dirichlet parameter of the spread inside a block; small is sparse.
    pub within_alpha: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            d: 16,
            blocks: None,
            n_blocks: 4,
            n_classes: 2,
            n_per_class: 30,
            n_test_per_class: 40,
            cross_signal: 0.5,
            within_noise: 0.8,
            block_concentration: 20.0,
            within_alpha: 0.3,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn block_partition(&self) -> Result<Vec<Vec<usize>>> {
        let blocks = match &self.blocks {
            Some(b) => b.clone(),
            None => {
                if self.n_blocks == 0 || self.n_blocks > self.d {
                    return Err(Error::Config(format!("n_blocks must be in 1..={}", self.d)));
                }
                (0..self.n_blocks)
                    .map(|b| (b * self.d / self.n_blocks..(b + 1) * self.d / self.n_blocks).collect())
                    .collect()
            }
        };
        let mut seen = vec![false; self.d];
        for &f in blocks.iter().flatten() {
            if f >= self.d || seen[f] {
                return Err(Error::Config(format!("blocks do not partition 0..{}", self.d)));
            }
            seen[f] = true;
        }
        if seen.iter().any(|s| !s) || blocks.iter().any(Vec::is_empty) {
            return Err(Error::Config(format!("blocks do not partition 0..{}", self.d)));
        }
        Ok(blocks)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Config("d must be at least 2".into()));
        }
        if self.n_classes < 2 || self.n_per_class == 0 {
            return Err(Error::Config("need at least two classes with one training point each".into()));
        }
        for (name, v) in [("cross_signal", self.cross_signal), ("within_noise", self.within_noise)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(self.block_concentration > 0.0 && self.within_alpha > 0.0) {
            return Err(Error::Config("block_concentration and within_alpha must be positive".into()));
        }
        self.block_partition().map(|_| ())
    }
}

fn dirichlet(rng: &mut ChaCha8Rng, alpha: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
        .collect();
    let s: f64 = x.iter().sum();
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    } else {
        // Every draw underflowed; fall back to a random vertex.
        let k = rng.random_range(0..x.len());
        x.iter_mut().enumerate().for_each(|(i, v)| *v = if i == k { 1.0 } else { 0.0 });
    }
    x
}

fn mix(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
}

/// Generates training points (class by class) followed by test points.
pub fn synth_generate(cfg: &SynthConfig) -> Result<LabeledDataset> {
    cfg.validate()?;
    let blocks = cfg.block_partition()?;
    let nb = blocks.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let uniform_blocks = vec![1.0 / nb as f64; nb];
    let profiles: Vec<Vec<f64>> = (0..cfg.n_classes)
        .map(|_| mix(&uniform_blocks, &dirichlet(&mut rng, &vec![1.0; nb]), cfg.cross_signal))
        .collect();

    let draw = |class: usize, rng: &mut ChaCha8Rng| -> Result<Histogram> {
        let profile = &profiles[class];
        let alpha: Vec<f64> = profile.iter().map(|p| (cfg.block_concentration * p).max(1e-3)).collect();
        let masses = mix(profile, &dirichlet(rng, &alpha), cfg.within_noise);
        let mut h = vec![0.0; cfg.d];
        for (block, &m) in blocks.iter().zip(&masses) {
            let flat = vec![1.0 / block.len() as f64; block.len()];
            let spread = mix(&flat, &dirichlet(rng, &vec![cfg.within_alpha; block.len()]), cfg.within_noise);
            for (&f, &s) in block.iter().zip(&spread) {
                h[f] = m * s;
            }
        }
        Histogram::new(h)
    };

    let mut histograms = Vec::new();
    let mut labels = Vec::new();
    let mut split = Vec::new();
    for (part, count) in [(Split::Train, cfg.n_per_class), (Split::Test, cfg.n_test_per_class)] {
        for class in 0..cfg.n_classes {
            for _ in 0..count {
                histograms.push(draw(class, &mut rng)?);
                labels.push(class as i64);
                split.push(part);
            }
        }
    }
    LabeledDataset::new(histograms, labels, split)
}
