//! Projected subgradient descent on `C_k` and starting points for it.
//!
//! `C_k = S+_k + S-_k` is a difference of convex functions. Each outer round
//! replaces the concave part `S+_k` by its linearization at the current
//! point; inner rounds then run projected subgradient steps on the convex
//! surrogate, with step sizes `t0 / sqrt(t)` for one global step counter.

mod init;

use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::criterion::{eval_neighbor_sum, NeighborCount, Sign, TrainingSet, WarmStarts};
use crate::error::{Error, Result};
use crate::io::fmt_num;
use crate::metric::{is_metric, triangle_fix_report, MetricMatrix, ProjectionOptions, METRIC_TOLERANCE};

pub use init::{initial_point, InitKind, InitParams};

/// Parameters of [`gml_descent`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmlParams {
    pub k: NeighborCount,
    pub t0: f64,
    pub p_max: usize,
    pub q_max: usize,
    /// Round `p` takes at least `ceil(min_inner_base * min_inner_decay^p)` steps.
    pub min_inner_base: f64,
    pub min_inner_decay: f64,
    /// Relative improvement required over `window` inner steps.
    pub progress_eps: f64,
    pub window: usize,
    /// Window, in rounds, for the same test on outer values.
    pub outer_window: usize,
    pub warm_start: bool,
    /// Also evaluate the true `C_k` at every inner point (costs one more
    /// neighbor sum per step).
    pub track_objective: bool,
    pub projection_tol: f64,
    pub projection_max_sweeps: Option<usize>,
}

impl Default for GmlParams {
    fn default() -> Self {
        GmlParams {
            k: NeighborCount::Finite(3),
            t0: 0.1,
            p_max: 8,
            q_max: 200,
            min_inner_base: 50.0,
            min_inner_decay: 0.8,
            progress_eps: 0.0075,
            window: 6,
            outer_window: 2,
            warm_start: true,
            track_objective: false,
            projection_tol: 1e-7,
            projection_max_sweeps: None,
        }
    }
}

impl GmlParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return bad("t0 must be positive");
        }
        if self.p_max == 0 || self.q_max == 0 {
            return bad("p_max and q_max must be at least 1");
        }
        if !(self.progress_eps > 0.0 && self.progress_eps < 1.0) {
            return bad("progress_eps must lie in (0, 1)");
        }
        if self.window == 0 || self.outer_window == 0 {
            return bad("progress windows must be at least 1");
        }
        if !(self.min_inner_base >= 0.0 && self.min_inner_decay > 0.0) {
            return bad("min_inner_base must be >= 0 and min_inner_decay > 0");
        }
        if !(self.projection_tol > 0.0) {
            return bad("projection_tol must be positive");
        }
        Ok(())
    }

    pub fn min_inner(&self, p: usize) -> usize {
        // The small offset keeps ceil(32.000000000000004) at 32.
        (self.min_inner_base * self.min_inner_decay.powi(p as i32) - 1e-9).ceil().max(0.0) as usize
    }

    pub fn projection(&self) -> ProjectionOptions {
        ProjectionOptions { tol: self.projection_tol, max_sweeps: self.projection_max_sweeps }
    }
}

/// One inner evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub p: usize,
    pub q: usize,
    /// Global step counter at this evaluation.
    pub t: usize,
    pub z_in: f64,
    pub z_out: f64,
    /// Norm of the step taken from this point, zero when the round ended here.
    pub step_norm: f64,
    /// Constraint violation left by the projection that produced this point.
    pub projection_residual: f64,
    /// `C_k` at this point, when tracked.
    pub objective: Option<f64>,
}

/// Objective at the start of an outer round.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub p: usize,
    pub t: usize,
    /// `C_k` at the round's starting point.
    pub value: f64,
    /// Smallest value seen so far, including this round.
    pub best_so_far: f64,
}

#[derive(Debug, Clone)]
pub struct DescentTrace {
    pub steps: Vec<StepRecord>,
    pub outer: Vec<OuterRecord>,
    pub best_value: f64,
    pub best_metric: MetricMatrix,
    pub last_metric: MetricMatrix,
}

impl DescentTrace {
    pub const CSV_HEADER: &'static str = "p,q,t,z_in,z_out,step_norm";

    /// One row per inner step. The comment line notes the outer stopping rule.
    pub fn write_csv<W: Write>(&self, mut w: W, params: &GmlParams) -> Result<()> {
        writeln!(
            w,
            "# outer rounds stop when z_out improves by less than {} (relative) over {} rounds",
            fmt_num(params.progress_eps),
            params.outer_window
        )?;
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for s in &self.steps {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.p,
                s.q,
                s.t,
                fmt_num(s.z_in),
                fmt_num(s.z_out),
                fmt_num(s.step_norm)
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DescentResult {
    /// Outer iterate with the smallest `C_k`.
    pub metric: MetricMatrix,
    pub value: f64,
    pub trace: DescentTrace,
}

fn stalled(values: &[f64], window: usize, eps: f64) -> bool {
    let n = values.len();
    if n <= window {
        return false;
    }
    let (old, new) = (values[n - 1 - window], values[n - 1]);
    old - new < eps * old.abs()
}

struct State {
    trace: DescentTrace,
}

impl State {
    fn fail(self, source: Error) -> Error {
        Error::DescentFailed {
            steps: self.trace.steps.len(),
            trace: Box::new(self.trace),
            source: Box::new(source),
        }
    }
}

/// Minimizes `C_k` over metric matrices in the Frobenius unit ball, from a
/// feasible `m0`. Weights are used as given; normalize them beforehand if
/// desired.
pub fn gml_descent(train: &TrainingSet, m0: &MetricMatrix, params: &GmlParams) -> Result<DescentResult> {
    params.validate()?;
    let d = train.dim();
    if m0.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: m0.dim() });
    }
    if !is_metric(m0.as_array(), METRIC_TOLERANCE).0 || m0.frobenius_norm() > 1.0 + 1e-9 {
        return Err(Error::InvalidMetric("starting point is not in the feasible set".into()));
    }
    let proj = params.projection();
    let k = params.k;

    let mut st = State {
        trace: DescentTrace {
            steps: Vec::new(),
            outer: Vec::new(),
            best_value: f64::INFINITY,
            best_metric: m0.clone(),
            last_metric: m0.clone(),
        },
    };
    let mut warm_plus = WarmStarts::default();
    let mut warm_minus = WarmStarts::default();
    let mut m_out = m0.clone();
    let mut residual_out = 0.0;
    let mut outer_values = Vec::new();
    let mut t = 1;

    for p in 1.. {
        let plus_warm = params.warm_start.then_some(&warm_plus);
        let plus = match eval_neighbor_sum(train, &m_out, Sign::Similar, k, plus_warm) {
            Ok(e) => e,
            Err(e) => return Err(st.fail(e)),
        };
        let minus_warm = params.warm_start.then_some(&warm_minus);
        let mut minus = match eval_neighbor_sum(train, &m_out, Sign::Dissimilar, k, minus_warm) {
            Ok(e) => e,
            Err(e) => return Err(st.fail(e)),
        };
        let z_out = plus.value + minus.value;
        outer_values.push(z_out);
        if z_out < st.trace.best_value {
            st.trace.best_value = z_out;
            st.trace.best_metric = m_out.clone();
        }
        st.trace.outer.push(OuterRecord { p, t, value: z_out, best_so_far: st.trace.best_value });
        if params.warm_start {
            warm_plus = plus.plans;
        }
        if p > params.p_max || stalled(&outer_values, params.outer_window, params.progress_eps) {
            break;
        }

        let grad_plus = plus.subgrad;
        let m_out_vec = m_out.upper();
        let min_inner = params.min_inner(p);
        let mut m_in = m_out.clone();
        let mut residual = residual_out;
        let mut z_hist = Vec::new();
        for q in 0.. {
            if q > 0 {
                let warm = params.warm_start.then_some(&warm_minus);
                minus = match eval_neighbor_sum(train, &m_in, Sign::Dissimilar, k, warm) {
                    Ok(e) => e,
                    Err(e) => return Err(st.fail(e)),
                };
            }
            let m_vec = m_in.upper();
            let linear: f64 = grad_plus
                .values()
                .iter()
                .zip(m_vec.values().iter().zip(m_out_vec.values()))
                .map(|(g, (a, b))| g * (a - b))
                .sum();
            let z_in = minus.value + plus.value + linear;
            let objective = if params.track_objective {
                match eval_neighbor_sum(train, &m_in, Sign::Similar, k, None) {
                    Ok(e) => Some(e.value + minus.value),
                    Err(e) => return Err(st.fail(e)),
                }
            } else {
                None
            };
            z_hist.push(z_in);
            let done = q == params.q_max
                || (q >= min_inner && stalled(&z_hist, params.window, params.progress_eps));

            let mut step_norm = 0.0;
            if !done {
                let scale = params.t0 / (t as f64).sqrt();
                let mut next = m_vec;
                for ((x, gp), gm) in
                    next.values_mut().iter_mut().zip(grad_plus.values()).zip(minus.subgrad.values())
                {
                    *x -= scale * (gp + gm);
                }
                let target: Array2<f64> = next.to_symmetric();
                match triangle_fix_report(&target, &proj) {
                    Ok(rep) => {
                        let m_next = rep.metric.into_unit_ball();
                        step_norm = (m_next.as_array() - m_in.as_array())
                            .iter()
                            .map(|v| v * v)
                            .sum::<f64>()
                            .sqrt();
                        st.trace.steps.push(StepRecord {
                            p,
                            q,
                            t,
                            z_in,
                            z_out,
                            step_norm,
                            projection_residual: residual,
                            objective,
                        });
                        residual = rep.residual;
                        m_in = m_next;
                    }
                    Err(e) => return Err(st.fail(e)),
                }
                if params.warm_start {
                    warm_minus = std::mem::take(&mut minus.plans);
                }
                t += 1;
                continue;
            }
            if params.warm_start {
                warm_minus = std::mem::take(&mut minus.plans);
            }
            st.trace.steps.push(StepRecord {
                p,
                q,
                t,
                z_in,
                z_out,
                step_norm,
                projection_residual: residual,
                objective,
            });
            break;
        }
        st.trace.last_metric = m_in.clone();
        m_out = m_in;
        residual_out = residual;
    }

    let trace = st.trace;
    Ok(DescentResult { metric: trace.best_metric.clone(), value: trace.best_value, trace })
}
