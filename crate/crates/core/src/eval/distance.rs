use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::MetricMatrix;
use crate::transport::{emd, Histogram};

/// Bin-wise distances used as baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    L1,
    L2,
    Hellinger,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::L1, Baseline::L2, Baseline::Hellinger];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::L1 => "l1",
            Baseline::L2 => "l2",
            Baseline::Hellinger => "hellinger",
        }
    }
}

impl std::str::FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l1" => Ok(Baseline::L1),
            "l2" => Ok(Baseline::L2),
            "hellinger" => Ok(Baseline::Hellinger),
            _ => Err(Error::InvalidParameter(format!("unknown baseline distance {s:?}"))),
        }
    }
}

/// `l1`, `l2`, or `||sqrt(r) - sqrt(c)||_2`.
pub fn baseline_distance(kind: Baseline, r: &Histogram, c: &Histogram) -> f64 {
    let pairs = r.values().iter().zip(c.values());
    match kind {
        Baseline::L1 => pairs.map(|(a, b)| (a - b).abs()).sum(),
        Baseline::L2 => pairs.map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        Baseline::Hellinger => pairs
            .map(|(a, b)| {
                let t = a.sqrt() - b.sqrt();
                t * t
            })
            .sum::<f64>()
            .sqrt(),
    }
}

/// Anything that compares two histograms.
pub trait HistogramDistance: Sync {
    fn distance(&self, r: &Histogram, c: &Histogram) -> Result<f64>;
}

impl HistogramDistance for Baseline {
    fn distance(&self, r: &Histogram, c: &Histogram) -> Result<f64> {
        if r.dim() != c.dim() {
            return Err(Error::DimensionMismatch { expected: r.dim(), found: c.dim() });
        }
        Ok(baseline_distance(*self, r, c))
    }
}

/// Transportation distance under a fixed ground metric.
#[derive(Debug, Clone)]
pub struct EmdDistance(pub MetricMatrix);

impl HistogramDistance for EmdDistance {
    fn distance(&self, r: &Histogram, c: &Histogram) -> Result<f64> {
        emd(&self.0, r, c)
    }
}
