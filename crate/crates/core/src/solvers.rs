//! Proximal splitting solvers.
//!
//! * [`douglas_rachford`] and [`forward_backward`] minimize `f + h` where
//!   `h` is a [`Comixture`], using its explicit prox.
//! * [`condat_vu`] minimizes the composite average
//!   `f + sum_k alpha_k g_k(L_k x)` with one dual variable per term.
//!
//! Every solver records `(n, residual, error_db)` for the iterate `x_n`
//! and stops once the residual falls below
//! `stop_residual * (||x_0|| + 1)`, where `x_0` is the first primal
//! iterate. The final iterate is the last recorded `x_n`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::comixture::{Comixture, Term};
use crate::linops::{operator_norm_estimate, POWER_ITERATION_TOL};
use crate::prox::ProxFunction;
use crate::vector;

/// Floor applied to [`error_db`] when the iterate equals the reference.
pub const ERROR_DB_FLOOR: f64 = -300.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("relaxation parameter lambda_{n} = {value} is outside (0, 2)")]
    InvalidRelaxation { n: usize, value: f64 },
    #[error("record_every must be at least 1")]
    InvalidRecordEvery,
    #[error("stop_residual must be nonnegative and finite, got {0}")]
    InvalidStopResidual(f64),
    #[error("step sizes must be positive, got tau = {tau}, sigma = {sigma}")]
    InvalidStepSizes { tau: f64, sigma: f64 },
    #[error("tau * sigma * sum ||L_k||^2 = {product} is not below 1")]
    StepCondition { product: f64 },
    #[error("Lipschitz constant beta = {beta} is outside (0, 2)")]
    InvalidLipschitz { beta: f64 },
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("normalized error is undefined when x_0 equals the reference")]
    UndefinedNormalization,
}

/// Relaxation schedule `lambda_n`.
#[derive(Clone)]
pub enum Relaxation {
    Constant(f64),
    Schedule(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl Relaxation {
    fn at(&self, n: usize) -> Result<f64, SolveError> {
        let value = match self {
            Relaxation::Constant(v) => *v,
            Relaxation::Schedule(f) => f(n),
        };
        if value > 0.0 && value < 2.0 {
            Ok(value)
        } else {
            Err(SolveError::InvalidRelaxation { n, value })
        }
    }
}

impl fmt::Debug for Relaxation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relaxation::Constant(v) => write!(f, "Constant({v})"),
            Relaxation::Schedule(_) => f.write_str("Schedule(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iters: usize,
    pub relaxation: Relaxation,
    pub tau: f64,
    pub sigma: f64,
    /// Relative to `||x_0|| + 1`.
    pub stop_residual: f64,
    pub record_every: usize,
    pub reference: Option<Vec<f64>>,
}

impl SolveOptions {
    pub fn new(max_iters: usize) -> Self {
        Self {
            max_iters,
            relaxation: Relaxation::Constant(1.0),
            tau: 1.0,
            sigma: 1.0,
            stop_residual: 1e-9,
            record_every: 1,
            reference: None,
        }
    }

    pub fn relaxation(mut self, relaxation: Relaxation) -> Self {
        self.relaxation = relaxation;
        self
    }

    pub fn steps(mut self, tau: f64, sigma: f64) -> Self {
        self.tau = tau;
        self.sigma = sigma;
        self
    }

    pub fn stop_residual(mut self, tol: f64) -> Self {
        self.stop_residual = tol;
        self
    }

    pub fn record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn reference(mut self, reference: Vec<f64>) -> Self {
        self.reference = Some(reference);
        self
    }

    fn validate(&self, dim: usize) -> Result<(), SolveError> {
        if self.record_every == 0 {
            return Err(SolveError::InvalidRecordEvery);
        }
        if !(self.stop_residual >= 0.0 && self.stop_residual.is_finite()) {
            return Err(SolveError::InvalidStopResidual(self.stop_residual));
        }
        if let Some(r) = &self.reference {
            check_dim("reference", dim, r.len())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub n: usize,
    pub residual: f64,
    pub error_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveRun {
    pub final_iterate: Vec<f64>,
    pub history: Vec<Record>,
    pub iterations_used: usize,
    pub converged: bool,
}

/// `20 log10(||x_n - x_inf|| / ||x_0 - x_inf||)`, floored at
/// [`ERROR_DB_FLOOR`].
pub fn error_db(x_n: &[f64], x0: &[f64], x_inf: &[f64]) -> Result<f64, SolveError> {
    let denom = vector::distance(x0, x_inf);
    if denom == 0.0 {
        return Err(SolveError::UndefinedNormalization);
    }
    let num = vector::distance(x_n, x_inf);
    if num == 0.0 {
        return Ok(ERROR_DB_FLOOR);
    }
    Ok((20.0 * (num / denom).log10()).max(ERROR_DB_FLOOR))
}

/// Callback receiving every recorded `(n, x_n)`.
pub type Observer<'a> = &'a mut dyn FnMut(usize, &[f64]);

struct Recorder<'a, 'o> {
    opts: &'a SolveOptions,
    threshold: f64,
    x0: Option<Vec<f64>>,
    history: Vec<Record>,
    observer: Option<Observer<'o>>,
}

impl<'a, 'o> Recorder<'a, 'o> {
    fn new(opts: &'a SolveOptions, observer: Option<Observer<'o>>) -> Self {
        Self {
            opts,
            threshold: 0.0,
            x0: None,
            history: Vec::new(),
            observer,
        }
    }

    /// Records step `n` and reports whether the loop should stop.
    fn step(&mut self, n: usize, x: &[f64], residual: f64) -> Result<bool, SolveError> {
        if n == 0 {
            self.threshold = self.opts.stop_residual * (vector::norm(x) + 1.0);
            self.x0 = Some(x.to_vec());
        }
        let stop = residual <= self.threshold || n >= self.opts.max_iters;
        if n % self.opts.record_every == 0 || stop {
            let error_db = match &self.opts.reference {
                Some(reference) => Some(error_db(
                    x,
                    self.x0.as_deref().expect("x0 recorded at n = 0"),
                    reference,
                )?),
                None => None,
            };
            self.history.push(Record {
                n,
                residual,
                error_db,
            });
            if let Some(obs) = self.observer.as_mut() {
                obs(n, x);
            }
        }
        Ok(stop)
    }

    fn finish(self, x: Vec<f64>, n: usize, residual: f64) -> SolveRun {
        SolveRun {
            final_iterate: x,
            history: self.history,
            iterations_used: n,
            converged: residual <= self.threshold,
        }
    }
}

/// Douglas–Rachford on `f + h` with `h` a comixture:
///
/// ```text
/// x_n = prox_h(y_n)
/// z_n = prox_f(2 x_n - y_n)
/// y_{n+1} = y_n + lambda_n (z_n - x_n)
/// ```
///
/// Residual `||z_n - x_n||`.
pub fn douglas_rachford(
    f: &dyn ProxFunction,
    c: &Comixture,
    y0: &[f64],
    opts: &SolveOptions,
) -> Result<SolveRun, SolveError> {
    douglas_rachford_observed(f, c, y0, opts, None)
}

pub fn douglas_rachford_observed(
    f: &dyn ProxFunction,
    c: &Comixture,
    y0: &[f64],
    opts: &SolveOptions,
    observer: Option<Observer<'_>>,
) -> Result<SolveRun, SolveError> {
    check_dim("y0", c.ambient_dim(), y0.len())?;
    opts.validate(y0.len())?;
    let mut rec = Recorder::new(opts, observer);
    let mut y = y0.to_vec();
    let mut n = 0;
    loop {
        let x = c.prox_unchecked(&y);
        let reflected: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 2.0 * a - b).collect();
        let z = f.prox(&reflected, 1.0);
        let residual = vector::distance(&z, &x);
        if rec.step(n, &x, residual)? {
            return Ok(rec.finish(x, n, residual));
        }
        let lambda = opts.relaxation.at(n)?;
        for ((yi, zi), xi) in y.iter_mut().zip(&z).zip(&x) {
            *yi += lambda * (zi - xi);
        }
        n += 1;
    }
}

/// Forward–backward on `f + h` with `f` smooth:
/// `x_{n+1} = prox_h(x_n - grad_f(x_n))`, unit gradient step.
///
/// Residual `||x_{n+1} - x_n||`, the fixed-point residual at `x_n`.
pub fn forward_backward(
    grad_f: &dyn Fn(&[f64]) -> Vec<f64>,
    beta: f64,
    c: &Comixture,
    x0: &[f64],
    opts: &SolveOptions,
) -> Result<SolveRun, SolveError> {
    forward_backward_observed(grad_f, beta, c, x0, opts, None)
}

pub fn forward_backward_observed(
    grad_f: &dyn Fn(&[f64]) -> Vec<f64>,
    beta: f64,
    c: &Comixture,
    x0: &[f64],
    opts: &SolveOptions,
    observer: Option<Observer<'_>>,
) -> Result<SolveRun, SolveError> {
    if !(beta > 0.0 && beta < 2.0) {
        return Err(SolveError::InvalidLipschitz { beta });
    }
    check_dim("x0", c.ambient_dim(), x0.len())?;
    opts.validate(x0.len())?;
    let mut rec = Recorder::new(opts, observer);
    let mut x = x0.to_vec();
    let mut n = 0;
    loop {
        let g = grad_f(&x);
        let y = vector::sub(&x, &g);
        let next = c.prox_unchecked(&y);
        let residual = vector::distance(&next, &x);
        if rec.step(n, &x, residual)? {
            return Ok(rec.finish(x, n, residual));
        }
        x = next;
        n += 1;
    }
}

/// Checks `tau * sigma * sum_k ||L_k||^2 < 1` and returns the product.
pub fn check_step_condition(terms: &[Term], tau: f64, sigma: f64) -> Result<f64, SolveError> {
    if !(tau > 0.0 && sigma > 0.0 && tau.is_finite() && sigma.is_finite()) {
        return Err(SolveError::InvalidStepSizes { tau, sigma });
    }
    let norms: f64 = terms
        .iter()
        .map(|t| {
            t.op
                .norm_bound()
                .unwrap_or_else(|| operator_norm_estimate(&t.op, POWER_ITERATION_TOL))
                .powi(2)
        })
        .sum();
    let product = tau * sigma * norms;
    if product < 1.0 {
        Ok(product)
    } else {
        Err(SolveError::StepCondition { product })
    }
}

/// Condat–Vũ primal–dual iteration for `f + sum_k alpha_k g_k(L_k x)`:
///
/// ```text
/// y_n = x_n - tau sum_k L_k^* v_k
/// x_{n+1} = prox_{tau f}(y_n)
/// z_n = 2 x_{n+1} - x_n
/// w_k = v_k + sigma L_k z_n
/// v_k <- w_k - sigma prox_{alpha_k g_k / sigma}(w_k / sigma)
/// ```
///
/// Residual `||x_{n+1} - x_n|| + sum_k ||v_k' - v_k||`. `duals0` defaults
/// to zero vectors when `None`.
pub fn condat_vu(
    f: &dyn ProxFunction,
    terms: &[Term],
    x0: &[f64],
    duals0: Option<Vec<Vec<f64>>>,
    opts: &SolveOptions,
) -> Result<SolveRun, SolveError> {
    condat_vu_observed(f, terms, x0, duals0, opts, None)
}

pub fn condat_vu_observed(
    f: &dyn ProxFunction,
    terms: &[Term],
    x0: &[f64],
    duals0: Option<Vec<Vec<f64>>>,
    opts: &SolveOptions,
    observer: Option<Observer<'_>>,
) -> Result<SolveRun, SolveError> {
    let (tau, sigma) = (opts.tau, opts.sigma);
    check_step_condition(terms, tau, sigma)?;
    for t in terms {
        check_dim("x0", t.op.in_dim(), x0.len())?;
    }
    opts.validate(x0.len())?;
    let mut duals = match duals0 {
        Some(d) => {
            check_dim("duals", terms.len(), d.len())?;
            for (t, v) in terms.iter().zip(&d) {
                check_dim("dual vector", t.op.out_dim(), v.len())?;
            }
            d
        }
        None => terms.iter().map(|t| vec![0.0; t.op.out_dim()]).collect(),
    };

    let mut rec = Recorder::new(opts, observer);
    let mut x = x0.to_vec();
    let mut n = 0;
    loop {
        let mut y = x.clone();
        for (t, v) in terms.iter().zip(&duals) {
            t.op.adjoint_add(v, -tau, &mut y);
        }
        let next = f.prox(&y, tau);
        let z: Vec<f64> = next.iter().zip(&x).map(|(a, b)| 2.0 * a - b).collect();
        let mut residual = vector::distance(&next, &x);
        let mut new_duals = Vec::with_capacity(duals.len());
        for (t, v) in terms.iter().zip(&duals) {
            let mut w = t.op.forward(&z);
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi = vi + sigma * *wi;
            }
            let scaled = vector::scale(&w, 1.0 / sigma);
            let p = t.func.prox(&scaled, t.weight / sigma);
            let v_new: Vec<f64> = w.iter().zip(&p).map(|(wi, pi)| wi - sigma * pi).collect();
            residual += vector::distance(&v_new, v);
            new_duals.push(v_new);
        }
        if rec.step(n, &x, residual)? {
            return Ok(rec.finish(x, n, residual));
        }
        x = next;
        duals = new_duals;
        n += 1;
    }
}

fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<(), SolveError> {
    if expected == got {
        Ok(())
    } else {
        Err(SolveError::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
