//! The three benchmark problems and the comparison harness.
//!
//! Each experiment pairs the composite-average formulation, solved by
//! Condat–Vũ, with the comixture formulation, solved by Douglas–Rachford
//! (image problems) or forward–backward (group lasso). Errors are
//! reported in dB relative to each method's own limit point, estimated by
//! running ten times longer than the plotted budget.

mod builders;
pub mod image;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

pub use builders::*;

use crate::comixture::{Comixture, ComixtureError};
use crate::linops::{ImageDims, LinopError};
use crate::prox::{ProxError, ProxFunction};
use crate::solvers::{self, Observer, Record, SolveError, SolveOptions, SolveRun};

/// Plotted budget times this factor gives the reference run length.
pub const REFERENCE_FACTOR: usize = 10;

pub const CSV_HEADER: &str = "n,method,err_db,residual";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("image side must be a power of two and at least 32, got {0}")]
    InvalidSide(usize),
    #[error("group layout needs 45 (p - 1) + 50 = N, got N = {n}, M = {m}, p = {p}")]
    InconsistentGeometry { n: usize, m: usize, p: usize },
    #[error("invalid ground-truth image: {0}")]
    InvalidImage(String),
    #[error("{method} does not apply to {experiment}: {reason}")]
    MethodMismatch {
        method: Method,
        experiment: String,
        reason: &'static str,
    },
    #[error("iteration budget must be at least 1")]
    InvalidIterations,
    #[error(transparent)]
    Prox(#[from] ProxError),
    #[error(transparent)]
    Comixture(#[from] ComixtureError),
    #[error(transparent)]
    Linop(#[from] LinopError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Differentiable part `f` with a `beta`-Lipschitz gradient.
#[derive(Clone)]
pub struct Smooth {
    pub gradient: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Image { dims: ImageDims },
    Groups { n: usize, m: usize, p: usize },
}

pub struct ExperimentInstance {
    pub name: String,
    pub f: Arc<dyn ProxFunction>,
    pub smooth: Option<Smooth>,
    pub comixture: Comixture,
    pub ground_truth: Vec<f64>,
    pub observations: BTreeMap<String, Vec<f64>>,
    pub seed: u64,
    pub scale: Scale,
}

impl fmt::Debug for ExperimentInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExperimentInstance")
            .field("name", &self.name)
            .field("f", &self.f.label())
            .field("terms", &self.comixture.len())
            .field("seed", &self.seed)
            .field("scale", &self.scale)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    CondatVu,
    DouglasRachford,
    ForwardBackward,
}

impl Method {
    pub const ALL: [Method; 3] = [
        Method::CondatVu,
        Method::DouglasRachford,
        Method::ForwardBackward,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::CondatVu => "condat_vu",
            Method::DouglasRachford => "douglas_rachford",
            Method::ForwardBackward => "forward_backward",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

impl ExperimentInstance {
    pub fn dims(&self) -> Option<ImageDims> {
        match self.scale {
            Scale::Image { dims } => Some(dims),
            Scale::Groups { .. } => None,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.comixture.ambient_dim()
    }

    /// Composite-average method first, comixture method second.
    pub fn default_methods(&self) -> (Method, Method) {
        if self.smooth.is_some() {
            (Method::CondatVu, Method::ForwardBackward)
        } else {
            (Method::CondatVu, Method::DouglasRachford)
        }
    }

    /// `(tau, sigma) = (1 / b, 1 / (1.1 b))` with `b = sqrt(sum ||L_k||^2)`.
    pub fn condat_vu_steps(&self) -> (f64, f64) {
        let b = self.comixture.squared_norm_sum().sqrt();
        (1.0 / b, 1.0 / (1.1 * b))
    }

    /// Runs `method` from zero initial vectors. For Condat–Vũ the step
    /// sizes in `opts` are replaced by [`Self::condat_vu_steps`].
    pub fn solve(
        &self,
        method: Method,
        opts: &SolveOptions,
        observer: Option<Observer<'_>>,
    ) -> Result<SolveRun, ExperimentError> {
        let zero = vec![0.0; self.ambient_dim()];
        let run = match method {
            Method::CondatVu => {
                let (tau, sigma) = self.condat_vu_steps();
                let opts = opts.clone().steps(tau, sigma);
                solvers::condat_vu_observed(
                    self.f.as_ref(),
                    self.comixture.terms(),
                    &zero,
                    None,
                    &opts,
                    observer,
                )?
            }
            Method::DouglasRachford => solvers::douglas_rachford_observed(
                self.f.as_ref(),
                &self.comixture,
                &zero,
                opts,
                observer,
            )?,
            Method::ForwardBackward => {
                let smooth = self.smooth.as_ref().ok_or(ExperimentError::MethodMismatch {
                    method,
                    experiment: self.name.clone(),
                    reason: "f has no gradient",
                })?;
                solvers::forward_backward_observed(
                    smooth.gradient.as_ref(),
                    smooth.beta,
                    &self.comixture,
                    &zero,
                    opts,
                    observer,
                )?
            }
        };
        Ok(run)
    }
}

/// One method's part of a comparison. `run.history` holds the rows for
/// `n <= iters`, with `error_db` measured against `reference`.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: Method,
    pub run: SolveRun,
    pub reference: Vec<f64>,
    pub reference_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub experiment: String,
    pub runs: Vec<MethodRun>,
}

impl Comparison {
    /// Rows of every run in order, under [`CSV_HEADER`].
    pub fn csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for mr in &self.runs {
            for r in &mr.run.history {
                let err = r.error_db.expect("comparison rows carry error_db");
                out.push_str(&format!(
                    "{},{},{:.6},{:.6e}\n",
                    r.n,
                    mr.method.name(),
                    err,
                    r.residual
                ));
            }
        }
        out
    }
}

/// Runs `method` for `REFERENCE_FACTOR * iters` iterations, takes the last
/// iterate as the limit `x_inf`, and reports the first `iters` iterations
/// against it. One long run serves both purposes because the solvers are
/// deterministic, so its prefix equals a run of length `iters`.
pub fn run_method(
    inst: &ExperimentInstance,
    method: Method,
    iters: usize,
    record_every: usize,
) -> Result<MethodRun, ExperimentError> {
    if iters == 0 {
        return Err(ExperimentError::InvalidIterations);
    }
    let every = record_every.max(1);
    let mut kept: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut keep = |n: usize, x: &[f64]| {
        if n <= iters && (n % every == 0 || n == iters) {
            kept.push((n, x.to_vec()));
        }
    };
    let opts = SolveOptions::new(REFERENCE_FACTOR * iters);
    let full = inst.solve(method, &opts, Some(&mut keep))?;
    if full.iterations_used <= iters && kept.last().map(|k| k.0) != Some(full.iterations_used) {
        kept.push((full.iterations_used, full.final_iterate.clone()));
    }

    let reference = full.final_iterate;
    let x0 = kept[0].1.clone();
    let mut history = Vec::with_capacity(kept.len());
    for (n, x) in &kept {
        history.push(Record {
            n: *n,
            residual: full.history[*n].residual,
            error_db: Some(solvers::error_db(x, &x0, &reference)?),
        });
    }
    let (last_n, last_x) = kept.pop().expect("n = 0 is always kept");
    Ok(MethodRun {
        method,
        run: SolveRun {
            final_iterate: last_x,
            history,
            iterations_used: last_n,
            converged: full.converged && full.iterations_used <= iters,
        },
        reference,
        reference_iterations: full.iterations_used,
    })
}

pub fn run_comparison(
    inst: &ExperimentInstance,
    method_a: Method,
    method_b: Method,
    iters: usize,
    record_every: usize,
) -> Result<Comparison, ExperimentError> {
    let runs = vec![
        run_method(inst, method_a, iters, record_every)?,
        run_method(inst, method_b, iters, record_every)?,
    ];
    Ok(Comparison {
        experiment: inst.name.clone(),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("admm".parse::<Method>().is_err());
    }

    #[test]
    fn forward_backward_needs_smooth_part() {
        let inst = build_exp1(32, 0).unwrap();
        assert!(matches!(
            run_method(&inst, Method::ForwardBackward, 5, 1),
            Err(ExperimentError::MethodMismatch { .. })
        ));
    }

    #[test]
    fn comparison_rows_start_at_zero_db() {
        let inst = build_exp3(95, 60, 2, 3).unwrap();
        let cmp = run_comparison(&inst, Method::CondatVu, Method::ForwardBackward, 20, 1).unwrap();
        for mr in &cmp.runs {
            assert_eq!(mr.run.history[0].n, 0);
            assert_eq!(mr.run.history[0].error_db, Some(0.0));
            assert!(mr.run.history.len() <= 21);
            let ns: Vec<usize> = mr.run.history.iter().map(|r| r.n).collect();
            assert!(ns.windows(2).all(|w| w[0] < w[1]));
        }
        let csv = cmp.csv();
        assert!(csv.starts_with("n,method,err_db,residual\n0,condat_vu,0.000000,"));
        assert!(csv.contains("\n0,forward_backward,0.000000,"));
    }

    #[test]
    fn record_every_thins_rows_but_keeps_last() {
        let inst = build_exp3(95, 60, 2, 3).unwrap();
        let mr = run_method(&inst, Method::ForwardBackward, 10, 4).unwrap();
        let ns: Vec<usize> = mr.run.history.iter().map(|r| r.n).collect();
        assert_eq!(ns, vec![0, 4, 8, 10]);
    }

    #[test]
    fn condat_vu_steps_satisfy_condition() {
        let inst = build_exp1(32, 0).unwrap();
        let (tau, sigma) = inst.condat_vu_steps();
        let product =
            solvers::check_step_condition(inst.comixture.terms(), tau, sigma).unwrap();
        assert!((product - 1.0 / 1.1).abs() < 1e-12);
    }
}
