//! Ground metric learning for transportation distances.
//!
//! Transportation (earth mover's) distances compare histograms through a
//! *ground metric* between their bins. This crate learns that metric from
//! labeled histograms: it minimizes a neighborhood criterion, written as a
//! difference of two polyhedral convex functions, over the cone of metric
//! matrices intersected with the Frobenius unit ball.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`transport`] | exact network simplex for the transportation LP, brute-force oracle |
//! | [`metric`] | metric cone, triangle fixing projection, unit-ball projection |
//! | [`tables`] | independence and typical tables, linearized criteria |
//! | [`criterion`] | training sets, neighbor sums and their subgradients |
//! | [`optimizer`] | projected subgradient descent and initial points |
//! | [`eval`] | baselines, kNN evaluation, synthetic data, experiment runner |
//!
//! ```
//! use gml_core::{emd, uniform_metric, Histogram};
//!
//! let r = Histogram::new(vec![0.5, 0.3, 0.2]).unwrap();
//! let c = Histogram::new(vec![0.2, 0.3, 0.5]).unwrap();
//! let m = uniform_metric(3).unwrap();
//! let d = emd(&m, &r, &c).unwrap();
//! assert!((d - 0.3).abs() < 1e-12);
//! ```

// `!(x > 0.0)` rejects NaN on purpose; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod criterion;
mod error;
pub mod eval;
pub mod io;
pub mod metric;
pub mod optimizer;
pub mod tables;
pub mod transport;

pub use criterion::{
    eval_criterion, eval_neighbor_sum, normalize_weights, NeighborCount, Sign, SubgradEval,
    TrainingSet, WarmStarts,
};
pub use error::{Error, Result};
pub use metric::{
    is_metric, project_feasible, regularized_projection, triangle_fix, uniform_metric,
    MetricMatrix, ProjectionOptions, UpperTriVector,
};
pub use optimizer::{
    gml_descent, initial_point, DescentResult, DescentTrace, GmlParams, InitKind, InitParams,
};
pub use tables::{aggregate_xi, entropy, independence_table, typical_table, TableKind};
pub use transport::{brute_force_transport, emd, solve_transport, Basis, Histogram, SolveResult, TransportPlan};
