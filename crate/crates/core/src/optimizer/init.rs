use serde::{Deserialize, Serialize};

use crate::criterion::{NeighborCount, TrainingSet};
use crate::error::{Error, Result};
use crate::metric::{regularized_projection, uniform_metric, MetricMatrix, ProjectionOptions};
use crate::tables::{aggregate_xi, TableKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Uniform,
    Independence,
    Typical,
}

impl std::str::FromStr for InitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" | "ones" => Ok(InitKind::Uniform),
            "independence" | "indep" => Ok(InitKind::Independence),
            "typical" => Ok(InitKind::Typical),
            _ => Err(Error::InvalidParameter(format!("unknown initial point kind {s:?}"))),
        }
    }
}

impl std::fmt::Display for InitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InitKind::Uniform => "uniform",
            InitKind::Independence => "independence",
            InitKind::Typical => "typical",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitParams {
    pub kind: InitKind,
    /// Neighborhood used to aggregate the tables.
    pub k: NeighborCount,
    pub lambda: f64,
    /// Weight of the table-based point when blending with the uniform metric.
    pub mix: f64,
    /// Projection tolerance relative to the largest entry of `(lambda/2) Xi`.
    pub projection_tol: f64,
}

impl Default for InitParams {
    fn default() -> Self {
        InitParams {
            kind: InitKind::Typical,
            k: NeighborCount::All,
            lambda: 1.0,
            mix: 1.0,
            projection_tol: 1e-9,
        }
    }
}

fn unit(m: MetricMatrix) -> Option<MetricMatrix> {
    let n = m.frobenius_norm();
    (n > 0.0).then(|| m.scaled(1.0 / n).expect("positive scale"))
}

/// A unit-norm starting metric.
///
/// Table kinds minimize `||M + (lambda/2) Xi||` over the metric cone, where
/// `Xi` aggregates weighted tables; when `mix < 1` the unit-normalized result
/// is blended with the unit-normalized uniform metric.
pub fn initial_point(train: &TrainingSet, params: &InitParams) -> Result<MetricMatrix> {
    if !(0.0..=1.0).contains(&params.mix) {
        return Err(Error::InvalidParameter(format!("mix {} not in [0, 1]", params.mix)));
    }
    let d = train.dim();
    let ones = unit(uniform_metric(d)?).expect("nonzero uniform metric");
    let table = match params.kind {
        InitKind::Uniform => return Ok(ones),
        InitKind::Independence => TableKind::Independence,
        InitKind::Typical => TableKind::Typical,
    };
    if !(params.lambda > 0.0 && params.lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {}", params.lambda)));
    }
    let xi = aggregate_xi(train, params.k, table)?;
    if xi.iter().all(|&v| v == 0.0) {
        log::warn!("aggregated table is zero; using the uniform metric");
        return Ok(ones);
    }
    // Xi can be tiny, and the result is rescaled to unit norm afterwards, so
    // the tolerance is taken relative to the size of the target.
    let scale = xi.iter().fold(0.0f64, |m, v| m.max(v.abs())) * 0.5 * params.lambda;
    let opts = ProjectionOptions::with_tol(params.projection_tol * scale);
    let m = match unit(regularized_projection(&xi, params.lambda, &opts)?) {
        Some(m) => m,
        None => {
            log::warn!("projected table is zero; using the uniform metric");
            return Ok(ones);
        }
    };
    if params.mix < 1.0 {
        let blended = m.mix(&ones, params.mix)?;
        return Ok(unit(blended).unwrap_or(ones));
    }
    Ok(m)
}
