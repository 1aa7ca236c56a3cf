//! Convex functions with exact proximity operators.
//!
//! `prox(x, gamma)` always means `argmin_z gamma*g(z) + ||x - z||^2 / 2`.
//! Huber-type penalties are the Moreau envelopes of simpler functions, and
//! their proxes are computed from those simpler proxes through
//! [`prox_of_envelope`].

mod least_squares;
mod oracle;
mod sets;

use thiserror::Error;

use crate::linops::LinopError;
use crate::vector;

pub use least_squares::LeastSquares;
pub use oracle::{numeric_prox_oracle, ORACLE_MAX_DIM};
pub use sets::{
    phase_of, project_ball, project_fourier_data, project_hyperplane, project_phase, Ball, BoxSet,
    ConvexSet, FourierDataSet, Hyperplane, PhaseSet, Singleton, DEFAULT_MEMBERSHIP_TOL,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProxError {
    #[error("empty interval: lo = {lo} must be below hi = {hi}")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("parameter {name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("function value is not available for {0}")]
    ValueUnavailable(String),
    #[error("frequency ({row}, {col}) has no mirrored partner in the frozen set")]
    AsymmetricFrequencySet { row: usize, col: usize },
    #[error("frozen values at ({row}, {col}) are not conjugate symmetric")]
    AsymmetricFrequencyValues { row: usize, col: usize },
    #[error("phase at ({row}, {col}) is not conjugate antisymmetric")]
    AsymmetricPhase { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("oracle search region must be bounded and nonempty in 1 to 3 dimensions")]
    UnboundedRegion,
    #[error("oracle found no point with a finite value in the search region")]
    NoFeasiblePoint,
    #[error(transparent)]
    Linop(#[from] LinopError),
}

/// A proper lower semicontinuous convex function with an exact prox.
pub trait ProxFunction: Send + Sync {
    /// `argmin_z gamma*g(z) + ||x - z||^2 / 2`, for `gamma > 0`.
    fn prox(&self, x: &[f64], gamma: f64) -> Vec<f64>;

    /// Function value, `+inf` outside the domain. `None` when the function
    /// cannot be evaluated.
    fn value(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    fn label(&self) -> String;

    /// Indicators ignore `gamma` in their prox.
    fn is_indicator(&self) -> bool {
        false
    }
}

/// The zero function; its prox is the identity.
#[derive(Debug, Clone, Copy, Default)]
pub struct Zero;

impl ProxFunction for Zero {
    fn prox(&self, x: &[f64], _gamma: f64) -> Vec<f64> {
        x.to_vec()
    }

    fn value(&self, _x: &[f64]) -> Option<f64> {
        Some(0.0)
    }

    fn label(&self) -> String {
        "0".into()
    }
}

/// Indicator function of a closed convex set.
#[derive(Debug, Clone)]
pub struct Indicator<S>(pub S);

impl<S: ConvexSet> ProxFunction for Indicator<S> {
    fn prox(&self, x: &[f64], _gamma: f64) -> Vec<f64> {
        self.0.project(x)
    }

    fn value(&self, x: &[f64]) -> Option<f64> {
        Some(if self.0.contains(x) { 0.0 } else { f64::INFINITY })
    }

    fn label(&self) -> String {
        format!("iota[{}]", self.0.label())
    }

    fn is_indicator(&self) -> bool {
        true
    }
}

/// Distance function `d_C`.
#[derive(Debug, Clone)]
pub struct DistanceTo<S>(pub S);

impl<S: ConvexSet> ProxFunction for DistanceTo<S> {
    fn prox(&self, x: &[f64], gamma: f64) -> Vec<f64> {
        prox_distance(x, &self.0, gamma)
    }

    fn value(&self, x: &[f64]) -> Option<f64> {
        Some(self.0.distance(x))
    }

    fn label(&self) -> String {
        format!("d[{}]", self.0.label())
    }
}

/// `h_rho(||x - center||)`.
#[derive(Debug, Clone)]
pub struct HuberOfNorm {
    center: Vec<f64>,
    rho: f64,
}

impl HuberOfNorm {
    pub fn new(center: Vec<f64>, rho: f64) -> Result<Self, ProxError> {
        positive("rho", rho)?;
        Ok(Self { center, rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }
}

impl ProxFunction for HuberOfNorm {
    fn prox(&self, x: &[f64], gamma: f64) -> Vec<f64> {
        prox_huber_of_norm(x, &self.center, self.rho, gamma)
    }

    fn value(&self, x: &[f64]) -> Option<f64> {
        Some(huber(vector::distance(x, &self.center), self.rho))
    }

    fn label(&self) -> String {
        format!("huber[{}](||. - z||)", self.rho)
    }
}

/// `h_rho(d_C(x))`.
#[derive(Debug, Clone)]
pub struct HuberOfDistance<S> {
    set: S,
    rho: f64,
}

impl<S: ConvexSet> HuberOfDistance<S> {
    pub fn new(set: S, rho: f64) -> Result<Self, ProxError> {
        positive("rho", rho)?;
        Ok(Self { set, rho })
    }

    pub fn set(&self) -> &S {
        &self.set
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

impl<S: ConvexSet> ProxFunction for HuberOfDistance<S> {
    fn prox(&self, x: &[f64], gamma: f64) -> Vec<f64> {
        prox_huber_of_distance(x, &self.set, self.rho, gamma)
    }

    fn value(&self, x: &[f64]) -> Option<f64> {
        Some(huber(self.set.distance(x), self.rho))
    }

    fn label(&self) -> String {
        format!("huber[{}](d[{}])", self.rho, self.set.label())
    }
}

/// `weight * ||x||_1`.
#[derive(Debug, Clone, Copy)]
pub struct L1 {
    pub weight: f64,
}

impl ProxFunction for L1 {
    fn prox(&self, x: &[f64], gamma: f64) -> Vec<f64> {
        prox_l1(x, self.weight * gamma)
    }

    fn value(&self, x: &[f64]) -> Option<f64> {
        Some(self.weight * vector::norm1(x))
    }

    fn label(&self) -> String {
        format!("{}*||.||_1", self.weight)
    }
}

/// `weight * ||x||_2`.
#[derive(Debug, Clone, Copy)]
pub struct EuclideanNorm {
    pub weight: f64,
}

impl ProxFunction for EuclideanNorm {
    fn prox(&self, x: &[f64], gamma: f64) -> Vec<f64> {
        prox_euclidean_norm(x, self.weight * gamma)
    }

    fn value(&self, x: &[f64]) -> Option<f64> {
        Some(self.weight * vector::norm(x))
    }

    fn label(&self) -> String {
        format!("{}*||.||", self.weight)
    }
}

/// `|x_i - x_j|` on `R^n`, the pairwise penalty of graph regularizers.
#[derive(Debug, Clone, Copy)]
pub struct PairwiseDifference {
    i: usize,
    j: usize,
}

impl PairwiseDifference {
    pub fn new(dim: usize, i: usize, j: usize) -> Result<Self, ProxError> {
        if i >= dim || j >= dim || i == j {
            return Err(ProxError::DimensionMismatch {
                expected: dim,
                got: i.max(j),
            });
        }
        Ok(Self { i, j })
    }
}

impl ProxFunction for PairwiseDifference {
    // g = phi(<a, .>) with a = e_i - e_j, ||a||^2 = 2:
    // prox = x + a (prox_{2 gamma phi}(<a, x>) - <a, x>) / 2
    fn prox(&self, x: &[f64], gamma: f64) -> Vec<f64> {
        let d = x[self.i] - x[self.j];
        let shrunk = d.signum() * (d.abs() - 2.0 * gamma).max(0.0);
        let step = (shrunk - d) / 2.0;
        let mut out = x.to_vec();
        out[self.i] += step;
        out[self.j] -= step;
        out
    }

    fn value(&self, x: &[f64]) -> Option<f64> {
        Some((x[self.i] - x[self.j]).abs())
    }

    fn label(&self) -> String {
        format!("|x{} - x{}|", self.i, self.j)
    }
}

/// Huber function `h_rho`.
pub fn huber(t: f64, rho: f64) -> f64 {
    let a = t.abs();
    if a > rho {
        rho * a - rho * rho / 2.0
    } else {
        a * a / 2.0
    }
}

/// Coordinatewise clamp to `[lo, hi]`.
pub fn prox_box(x: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>, ProxError> {
    Ok(BoxSet::new(lo, hi)?.project(x))
}

/// Prox of `gamma * d_C`.
pub fn prox_distance<S: ConvexSet + ?Sized>(x: &[f64], set: &S, gamma: f64) -> Vec<f64> {
    let p = set.project(x);
    let d = vector::distance(x, &p);
    if d <= gamma {
        return p;
    }
    let t = gamma / d;
    x.iter().zip(&p).map(|(xi, pi)| xi + t * (pi - xi)).collect()
}

/// Prox of `gamma * (f □ Q)` given the prox of `f` at arbitrary scale:
/// `x + gamma/(1+gamma) * (prox_{(1+gamma) f}(x) - x)`.
pub fn prox_of_envelope(
    x: &[f64],
    gamma: f64,
    prox_f: impl FnOnce(&[f64], f64) -> Vec<f64>,
) -> Vec<f64> {
    let q = prox_f(x, 1.0 + gamma);
    let t = gamma / (1.0 + gamma);
    x.iter().zip(&q).map(|(xi, qi)| xi + t * (qi - xi)).collect()
}

/// Prox of `gamma * h_rho(||. - center||)`, using `h_rho(||.||) = (rho||.||) □ Q`.
pub fn prox_huber_of_norm(x: &[f64], center: &[f64], rho: f64, gamma: f64) -> Vec<f64> {
    prox_of_envelope(x, gamma, |v, s| {
        let shrunk = prox_euclidean_norm(&vector::sub(v, center), s * rho);
        vector::add(&shrunk, center)
    })
}

/// Prox of `gamma * h_rho(d_C(.))`, using `h_rho ∘ d_C = (rho d_C) □ Q`.
pub fn prox_huber_of_distance<S: ConvexSet + ?Sized>(
    x: &[f64],
    set: &S,
    rho: f64,
    gamma: f64,
) -> Vec<f64> {
    prox_of_envelope(x, gamma, |v, s| prox_distance(v, set, s * rho))
}

/// Soft thresholding at `gamma`.
pub fn prox_l1(x: &[f64], gamma: f64) -> Vec<f64> {
    x.iter()
        .map(|&v| v.signum() * (v.abs() - gamma).max(0.0))
        .collect()
}

/// Block soft thresholding at `gamma`.
pub fn prox_euclidean_norm(x: &[f64], gamma: f64) -> Vec<f64> {
    let n = vector::norm(x);
    if n <= gamma {
        return vec![0.0; x.len()];
    }
    vector::scale(x, 1.0 - gamma / n)
}

/// `g(p) + ||x - p||^2 / 2` with `p = prox_g(x)`.
pub fn moreau_envelope_value<G: ProxFunction + ?Sized>(g: &G, x: &[f64]) -> Result<f64, ProxError> {
    let p = g.prox(x, 1.0);
    let v = g
        .value(&p)
        .ok_or_else(|| ProxError::ValueUnavailable(g.label()))?;
    Ok(v + 0.5 * vector::distance(x, &p).powi(2))
}

fn positive(name: &'static str, value: f64) -> Result<(), ProxError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ProxError::NonPositiveParameter { name, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        vector::max_abs_diff(a, b) <= tol
    }

    fn random(rng: &mut ChaCha8Rng, n: usize, s: f64) -> Vec<f64> {
        (0..n).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * s).collect()
    }

    #[test]
    fn box_examples() {
        assert_eq!(
            prox_box(&[-5.0, 100.0, 300.0], 0.0, 255.0).unwrap(),
            vec![0.0, 100.0, 255.0]
        );
        assert_eq!(prox_box(&[3.0, 4.0], 0.0, 255.0).unwrap(), vec![3.0, 4.0]);
        assert!(matches!(
            prox_box(&[1.0], 2.0, 1.0),
            Err(ProxError::EmptyInterval { .. })
        ));
    }

    #[test]
    fn distance_examples() {
        let zero = Singleton { point: vec![0.0] };
        assert_eq!(prox_distance(&[3.0], &zero, 1.0), vec![2.0]);
        let ball = Ball::centered(2, 1.0).unwrap();
        assert_eq!(prox_distance(&[0.5, 0.0], &ball, 0.3), vec![0.5, 0.0]);
    }

    #[test]
    fn huber_of_norm_examples() {
        let c = [0.0, 0.0];
        assert_eq!(prox_huber_of_norm(&c, &c, 1.0, 1.0), vec![0.0, 0.0]);
        assert!(close(&prox_huber_of_norm(&[2.0, 0.0], &c, 1.0, 1.0), &[1.0, 0.0], 1e-15));
        assert!(close(&prox_huber_of_norm(&[0.4, 0.0], &c, 1.0, 1.0), &[0.2, 0.0], 1e-15));
        // linear regime: shrink by gamma*rho
        assert!(close(&prox_huber_of_norm(&[5.0, 0.0], &c, 1.0, 1.0), &[4.0, 0.0], 1e-15));
    }

    #[test]
    fn huber_of_distance_examples() {
        let ball = Ball::centered(2, 1.0).unwrap();
        assert!(close(&prox_huber_of_distance(&[0.3, 0.1], &ball, 1.0, 1.0), &[0.3, 0.1], 0.0));
        assert!(close(&prox_huber_of_distance(&[4.0, 0.0], &ball, 1.0, 1.0), &[3.0, 0.0], 1e-15));
        // d <= rho with gamma = 1 gives the midpoint of x and its projection
        let x = [1.5, 0.0];
        assert!(close(&prox_huber_of_distance(&x, &ball, 1.0, 1.0), &[1.25, 0.0], 1e-15));
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(prox_l1(&[0.0, 0.0], 1.0), vec![0.0, 0.0]);
        assert_eq!(prox_l1(&[2.0, -0.5], 1.0), vec![1.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x = random(&mut rng, 6, 3.0);
            assert!(vector::norm1(&prox_l1(&x, 0.7)) <= vector::norm1(&x));
        }
    }

    #[test]
    fn block_threshold_examples() {
        assert_eq!(prox_euclidean_norm(&[0.3, 0.4], 1.0), vec![0.0, 0.0]);
        assert!(close(&prox_euclidean_norm(&[3.0, 4.0], 1.0), &[2.4, 3.2], 1e-15));
        let p = prox_euclidean_norm(&[1.0, -2.0, 2.0], 0.5);
        // parallel to x
        assert!(close(&vector::scale(&p, 3.0 / vector::norm(&p)), &[1.0, -2.0, 2.0], 1e-12));
    }

    #[test]
    fn envelope_values() {
        let origin = Indicator(Singleton { point: vec![0.0, 0.0] });
        let x = [1.0, 2.0];
        assert!((moreau_envelope_value(&origin, &x).unwrap() - 2.5).abs() < 1e-15);

        let norm = EuclideanNorm { weight: 1.0 };
        assert!((moreau_envelope_value(&norm, &[2.0, 0.0]).unwrap() - 1.5).abs() < 1e-15);
        assert!((huber(2.0, 1.0) - 1.5).abs() < 1e-15);

        let l1 = L1 { weight: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let x = random(&mut rng, 3, 4.0);
            assert!(moreau_envelope_value(&l1, &x).unwrap() <= l1.value(&x).unwrap() + 1e-12);
        }
    }

    #[test]
    fn value_unavailable_is_reported() {
        struct Opaque;
        impl ProxFunction for Opaque {
            fn prox(&self, x: &[f64], _: f64) -> Vec<f64> {
                x.to_vec()
            }
            fn label(&self) -> String {
                "opaque".into()
            }
        }
        assert!(matches!(
            moreau_envelope_value(&Opaque, &[1.0]),
            Err(ProxError::ValueUnavailable(_))
        ));
    }

    #[test]
    fn invalid_parameters() {
        assert!(HuberOfNorm::new(vec![0.0], 0.0).is_err());
        assert!(HuberOfDistance::new(Ball::centered(1, 1.0).unwrap(), -1.0).is_err());
    }

    #[test]
    fn moreau_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let linf_ball = BoxSet::new(-1.0, 1.0).unwrap();
        let unit_ball = Ball::centered(4, 1.0).unwrap();
        for _ in 0..100 {
            let x = random(&mut rng, 4, 5.0);
            let gamma = 0.1 + rng.random::<f64>() * 3.0;
            let xs = vector::scale(&x, 1.0 / gamma);

            let lhs = vector::add(&prox_l1(&x, gamma), &vector::scale(&linf_ball.project(&xs), gamma));
            assert!(close(&lhs, &x, 1e-12));

            let lhs = vector::add(
                &prox_euclidean_norm(&x, gamma),
                &vector::scale(&unit_ball.project(&xs), gamma),
            );
            assert!(close(&lhs, &x, 1e-12));
        }
    }

    fn catalog() -> Vec<Box<dyn ProxFunction>> {
        vec![
            Box::new(Indicator(BoxSet::new(-1.0, 2.0).unwrap())),
            Box::new(Indicator(Hyperplane { eta: 1.5 })),
            Box::new(Indicator(Ball::new(vec![0.5, -1.0, 0.0], 1.3).unwrap())),
            Box::new(DistanceTo(Ball::new(vec![0.5, -1.0, 0.0], 1.3).unwrap())),
            Box::new(HuberOfNorm::new(vec![1.0, 0.0, -1.0], 0.8).unwrap()),
            Box::new(HuberOfDistance::new(Hyperplane { eta: -2.0 }, 0.6).unwrap()),
            Box::new(L1 { weight: 8f64.sqrt() }),
            Box::new(EuclideanNorm { weight: 0.9 }),
            Box::new(PairwiseDifference::new(3, 0, 2).unwrap()),
        ]
    }

    #[test]
    fn every_prox_is_firmly_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for g in catalog() {
            for _ in 0..100 {
                let x = random(&mut rng, 3, 4.0);
                let y = random(&mut rng, 3, 4.0);
                let gamma = 0.2 + 2.0 * rng.random::<f64>();
                let d = vector::sub(&g.prox(&x, gamma), &g.prox(&y, gamma));
                let lhs = vector::dot(&d, &vector::sub(&x, &y));
                assert!(lhs + 1e-9 >= vector::dot(&d, &d), "{}", g.label());
            }
        }
    }

    #[test]
    fn prox_minimizes_the_prox_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for g in catalog() {
            if g.is_indicator() {
                continue;
            }
            for _ in 0..10 {
                let x = random(&mut rng, 3, 4.0);
                let gamma = 0.2 + 2.0 * rng.random::<f64>();
                let p = g.prox(&x, gamma);
                let obj = |z: &[f64]| {
                    gamma * g.value(z).unwrap() + 0.5 * vector::distance(&x, z).powi(2)
                };
                let best = obj(&p);
                for _ in 0..100 {
                    let q = vector::add(&p, &random(&mut rng, 3, 0.5));
                    assert!(best <= obj(&q) + 1e-12, "{}", g.label());
                }
            }
        }
    }

    #[test]
    fn envelope_gradient_is_identity_minus_prox() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let delta = 1e-5;
        for g in catalog() {
            for _ in 0..10 {
                let x = random(&mut rng, 3, 4.0);
                let e = {
                    let v = random(&mut rng, 3, 1.0);
                    vector::scale(&v, 1.0 / vector::norm(&v))
                };
                let plus = moreau_envelope_value(g.as_ref(), &vector::add(&x, &vector::scale(&e, delta))).unwrap();
                let minus = moreau_envelope_value(g.as_ref(), &vector::sub(&x, &vector::scale(&e, delta))).unwrap();
                let fd = (plus - minus) / (2.0 * delta);
                let grad = vector::dot(&vector::sub(&x, &g.prox(&x, 1.0)), &e);
                assert!((fd - grad).abs() <= 1e-4, "{}: {fd} vs {grad}", g.label());
            }
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn l1_prox_is_residual_of_box_projection(
                x in prop::collection::vec(-10.0f64..10.0, 1..6),
                w in 0.01f64..3.0,
                gamma in 0.1f64..4.0,
            ) {
                let p = L1 { weight: w }.prox(&x, gamma);
                let clip: Vec<f64> = x.iter().map(|v| v.clamp(-gamma * w, gamma * w)).collect();
                prop_assert!(close(&p, &vector::sub(&x, &clip), 1e-12));
            }

            #[test]
            fn projections_are_idempotent_and_firm(
                x in prop::collection::vec(-5.0f64..5.0, 3),
                y in prop::collection::vec(-5.0f64..5.0, 3),
                r in 0.1f64..3.0,
            ) {
                let sets: Vec<Box<dyn ProxFunction>> = vec![
                    Box::new(Indicator(Ball::centered(3, r).unwrap())),
                    Box::new(Indicator(BoxSet::new(-r, r / 2.0).unwrap())),
                    Box::new(Indicator(Hyperplane { eta: r })),
                ];
                for s in &sets {
                    let (px, py) = (s.prox(&x, 1.0), s.prox(&y, 1.0));
                    prop_assert!(close(&s.prox(&px, 1.0), &px, 1e-12));
                    let d = vector::sub(&px, &py);
                    prop_assert!(vector::dot(&d, &d) <= vector::dot(&d, &vector::sub(&x, &y)) + 1e-12);
                }
            }
        }
    }
}
