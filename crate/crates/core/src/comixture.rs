//! Proximal comixtures of linear operators and convex functions.
//!
//! Given weights `alpha_k > 0` summing to one, operators `L_k` with
//! `||L_k|| <= 1` and functions `g_k`, the comixture `h` has the explicit
//! proximity operator
//!
//! ```text
//! prox_h = Id - sum_k alpha_k L_k^* (Id - prox_{g_k}) L_k
//! ```
//!
//! and shares its minimizers with the averaged envelope
//! `sum_k alpha_k (g_k □ Q)(L_k x)`. The value of `h` itself is never
//! computed; [`Comixture::envelope_value`] is the reported surrogate.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::linops::{operator_norm_estimate, LinearMap, LinopError, POWER_ITERATION_TOL};
use crate::prox::{moreau_envelope_value, ProxFunction};
use crate::vector;

/// Slack on the weight sum.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Slack on `||L_k|| <= 1`.
pub const NORM_BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComixtureError {
    #[error("a comixture needs at least one term")]
    Empty,
    #[error("weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },
    #[error("weight of term {index} is {weight}, expected a value in (0, 1]")]
    InvalidWeight { index: usize, weight: f64 },
    #[error("operator of term {index} has norm bound {bound} > 1")]
    NormBound { index: usize, bound: f64 },
    #[error("operator of term {index} acts on dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("edge ({i}, {j}) appears more than once")]
    DuplicateEdge { i: usize, j: usize },
    #[error("function of term {index} ({label}) has no value")]
    ValueUnavailable { index: usize, label: String },
    #[error(transparent)]
    Input(#[from] LinopError),
}

/// One `(alpha_k, L_k, g_k)` triple.
#[derive(Clone)]
pub struct Term {
    pub weight: f64,
    pub op: LinearMap,
    pub func: Arc<dyn ProxFunction>,
}

impl Term {
    pub fn new(weight: f64, op: LinearMap, func: impl ProxFunction + 'static) -> Self {
        Self {
            weight,
            op,
            func: Arc::new(func),
        }
    }

    pub fn shared(weight: f64, op: LinearMap, func: Arc<dyn ProxFunction>) -> Self {
        Self { weight, op, func }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Term")
            .field("weight", &self.weight)
            .field("op", &self.op.label())
            .field("func", &self.func.label())
            .finish()
    }
}

/// A validated term list.
#[derive(Debug, Clone)]
pub struct Comixture {
    terms: Vec<Term>,
    ambient_dim: usize,
}

impl Comixture {
    /// Validates the term list: positive weights summing to one, operators
    /// on a common space with norm at most one. Operators without a norm
    /// bound are certified by power iteration.
    pub fn new(terms: Vec<Term>) -> Result<Self, ComixtureError> {
        let ambient_dim = terms.first().ok_or(ComixtureError::Empty)?.op.in_dim();
        for (index, t) in terms.iter().enumerate() {
            if t.op.in_dim() != ambient_dim {
                return Err(ComixtureError::DimensionMismatch {
                    index,
                    expected: ambient_dim,
                    got: t.op.in_dim(),
                });
            }
            if !(t.weight > 0.0 && t.weight <= 1.0) {
                return Err(ComixtureError::InvalidWeight {
                    index,
                    weight: t.weight,
                });
            }
        }
        let sum: f64 = terms.iter().map(|t| t.weight).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(ComixtureError::WeightSum { sum });
        }
        for (index, t) in terms.iter().enumerate() {
            let bound = t
                .op
                .norm_bound()
                .unwrap_or_else(|| operator_norm_estimate(&t.op, POWER_ITERATION_TOL));
            if bound > 1.0 + NORM_BOUND_TOL {
                return Err(ComixtureError::NormBound { index, bound });
            }
        }
        Ok(Self { terms, ambient_dim })
    }

    /// Builds the comixture indexed by the edges of an undirected graph.
    /// Edge weights must sum to one; `(i, j)` and `(j, i)` are the same edge.
    pub fn from_graph(
        edges: &[(usize, usize, f64)],
        fn_factory: impl Fn(usize, usize) -> Arc<dyn ProxFunction>,
        op_factory: impl Fn(usize, usize) -> LinearMap,
    ) -> Result<Self, ComixtureError> {
        let mut seen = BTreeSet::new();
        let mut terms = Vec::with_capacity(edges.len());
        for &(i, j, w) in edges {
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(ComixtureError::DuplicateEdge { i, j });
            }
            terms.push(Term::shared(w, op_factory(i, j), fn_factory(i, j)));
        }
        Self::new(terms)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `x - sum_k alpha_k L_k^*(L_k x - prox_{g_k}(L_k x))`.
    pub fn prox(&self, x: &[f64]) -> Result<Vec<f64>, ComixtureError> {
        self.check(x)?;
        Ok(self.prox_unchecked(x))
    }

    pub(crate) fn prox_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        // accumulate in term order so results are reproducible bit for bit
        for t in &self.terms {
            let lx = t.op.forward(x);
            let p = t.func.prox(&lx, 1.0);
            let residual = vector::sub(&lx, &p);
            t.op.adjoint_add(&residual, -t.weight, &mut out);
        }
        out
    }

    /// `sum_k alpha_k (g_k □ Q)(L_k x)`; minimized exactly where the
    /// comixture is.
    pub fn envelope_value(&self, x: &[f64]) -> Result<f64, ComixtureError> {
        self.check(x)?;
        let mut total = 0.0;
        for (index, t) in self.terms.iter().enumerate() {
            let lx = t.op.forward(x);
            let v = moreau_envelope_value(t.func.as_ref(), &lx).map_err(|_| {
                ComixtureError::ValueUnavailable {
                    index,
                    label: t.func.label(),
                }
            })?;
            total += t.weight * v;
        }
        Ok(total)
    }

    /// Gradient of [`Comixture::envelope_value`]: `x - prox(x)`.
    pub fn envelope_gradient(&self, x: &[f64]) -> Result<Vec<f64>, ComixtureError> {
        let p = self.prox(x)?;
        Ok(vector::sub(x, &p))
    }

    /// Sum of squared operator norm bounds, `sum_k ||L_k||^2`.
    pub fn squared_norm_sum(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.op
                    .norm_bound()
                    .unwrap_or_else(|| operator_norm_estimate(&t.op, POWER_ITERATION_TOL))
                    .powi(2)
            })
            .sum()
    }

    fn check(&self, x: &[f64]) -> Result<(), ComixtureError> {
        if x.len() == self.ambient_dim {
            Ok(())
        } else {
            Err(LinopError::DimensionMismatch {
                expected: self.ambient_dim,
                got: x.len(),
            }
            .into())
        }
    }
}
