//! Self-checks of the prox catalog, the operators and the comixture
//! against brute-force oracles and known identities.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::comixture::{Comixture, Term};
use crate::experiments::{build_exp1, build_exp2};
use crate::linops::{
    dft2, idft2, operator_norm_estimate, DenseMatrix, ImageDims, LinearMap, Spectrum2D,
    POWER_ITERATION_TOL,
};
use crate::prox::{
    numeric_prox_oracle, Ball, BoxSet, DistanceTo, EuclideanNorm, FourierDataSet, Hyperplane,
    HuberOfDistance, HuberOfNorm, Indicator, LeastSquares, PairwiseDifference, PhaseSet,
    ProxFunction, Singleton, Zero, L1,
};
use crate::vector;

/// Largest allowed distance between a closed-form prox and the oracle.
pub const ORACLE_TOL: f64 = 1e-5;
/// Inputs are drawn from `[-SAMPLE_RADIUS, SAMPLE_RADIUS]^d`.
pub const SAMPLE_RADIUS: f64 = 3.0;
/// The oracle searches `[-SEARCH_RADIUS, SEARCH_RADIUS]^d`.
pub const SEARCH_RADIUS: f64 = 10.0;
pub const GAMMA_RANGE: (f64, f64) = (0.25, 2.0);
/// Slope of the exact penalties that stand in for indicators in the
/// oracle. It exceeds every Lagrange multiplier the sampled inputs produce
/// (at most about `2 * SAMPLE_RADIUS * sqrt(2) / GAMMA_RANGE.0`).
const EXACT_PENALTY: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    fn within(name: impl Into<String>, err: f64, tol: f64) -> Self {
        Self::new(name, err <= tol, format!("max error {err:.3e} (tol {tol:.0e})"))
    }
}

pub type Objective = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One closed-form prox and the function the oracle minimizes for it.
#[derive(Clone)]
pub struct ProxCase {
    pub name: String,
    pub dim: usize,
    pub func: Arc<dyn ProxFunction>,
    /// Replaces `func.value` in the oracle. Indicators in more than one
    /// dimension use exact penalties `M * violation`, written out here
    /// independently of the projections under test.
    pub objective: Option<Objective>,
}

impl ProxCase {
    fn new(name: &str, dim: usize, func: impl ProxFunction + 'static) -> Self {
        Self {
            name: name.into(),
            dim,
            func: Arc::new(func),
            objective: None,
        }
    }

    fn with_objective(mut self, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.objective = Some(Arc::new(f));
        self
    }

    fn eval(&self, z: &[f64]) -> f64 {
        match &self.objective {
            Some(f) => f(z),
            None => self.func.value(z).unwrap_or(f64::NAN),
        }
    }
}

/// Two-pixel images: `dft(a, b) = ((a + b), (a - b)) / sqrt(2)`.
fn pixel_pair() -> ImageDims {
    ImageDims::new(1, 2)
}

pub fn prox_catalog() -> Vec<ProxCase> {
    let fourier = FourierDataSet::new(pixel_pair(), vec![((0, 0), Complex64::new(0.7, 0.0))])
        .expect("self-mirrored frequency");
    let phase = PhaseSet::new(pixel_pair(), &[0.0, std::f64::consts::PI]).expect("real phasors");
    let mean = 0.7 * SQRT_2;
    let a = DenseMatrix::from_row_major(2, 2, vec![1.0, 0.4, -0.3, 0.8]);

    vec![
        ProxCase::new("prox_zero", 1, Zero),
        ProxCase::new("prox_l1", 1, L1 { weight: 1.0 }),
        ProxCase::new("prox_l1 (weighted, 2-D)", 2, L1 { weight: 1.5 }),
        ProxCase::new("prox_euclidean_norm", 2, EuclideanNorm { weight: 0.8 }),
        ProxCase::new("prox_box", 1, Indicator(BoxSet::new(-1.0, 2.0).unwrap())),
        ProxCase::new("prox_box (2-D)", 2, Indicator(BoxSet::new(-0.5, 0.5).unwrap()))
            .with_objective(|z| {
                EXACT_PENALTY * z.iter().map(|v| (v.abs() - 0.5).max(0.0)).sum::<f64>()
            }),
        ProxCase::new("project_ball", 2, Indicator(Ball::new(vec![1.0, -0.5], 1.2).unwrap()))
            .with_objective(|z| {
                let r = ((z[0] - 1.0).powi(2) + (z[1] + 0.5).powi(2)).sqrt();
                EXACT_PENALTY * (r - 1.2).max(0.0)
            }),
        ProxCase::new("project_hyperplane", 2, Indicator(Hyperplane { eta: 1.0 }))
            .with_objective(|z| EXACT_PENALTY * (z[0] + z[1] - 1.0).abs()),
        ProxCase::new("project_fourier_data", 2, Indicator(fourier.clone()))
            .with_objective(move |z| EXACT_PENALTY * (z[0] + z[1] - mean).abs()),
        // spectrum (a + b, a - b) / sqrt(2) with phases (0, pi)
        ProxCase::new("project_phase", 2, Indicator(phase.clone())).with_objective(|z| {
            EXACT_PENALTY * ((-(z[0] + z[1])).max(0.0) + (z[0] - z[1]).max(0.0))
        }),
        ProxCase::new("prox_distance (box)", 1, DistanceTo(BoxSet::new(0.0, 1.0).unwrap())),
        ProxCase::new("prox_distance (ball)", 2, DistanceTo(Ball::centered(2, 1.0).unwrap())),
        ProxCase::new("prox_distance (point)", 2, DistanceTo(Singleton { point: vec![0.5, 1.0] })),
        ProxCase::new("prox_distance (fourier data)", 2, DistanceTo(fourier)),
        ProxCase::new("prox_huber_of_norm", 2, HuberOfNorm::new(vec![1.0, -1.0], 0.7).unwrap()),
        ProxCase::new("prox_huber_of_norm (1-D)", 1, HuberOfNorm::new(vec![0.3], 1.5).unwrap()),
        ProxCase::new(
            "prox_huber_of_distance (ball)",
            2,
            HuberOfDistance::new(Ball::centered(2, 0.5).unwrap(), 0.9).unwrap(),
        ),
        ProxCase::new(
            "prox_huber_of_distance (hyperplane)",
            2,
            HuberOfDistance::new(Hyperplane { eta: -0.5 }, 0.6).unwrap(),
        ),
        ProxCase::new(
            "prox_huber_of_distance (phase)",
            2,
            HuberOfDistance::new(phase, 1.1).unwrap(),
        ),
        ProxCase::new("prox_pairwise_difference", 2, PairwiseDifference::new(2, 0, 1).unwrap()),
        ProxCase::new("prox_least_squares", 2, LeastSquares::new(a, vec![0.5, -1.0])),
    ]
}

/// Compares `case.func.prox` with the oracle on `instances` random inputs.
pub fn check_prox_case(case: &ProxCase, instances: usize, rng: &mut ChaCha8Rng) -> CheckResult {
    let name = format!("{} vs oracle", case.name);
    let bounds = vec![(-SEARCH_RADIUS, SEARCH_RADIUS); case.dim];
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let x: Vec<f64> = (0..case.dim)
            .map(|_| rng.random_range(-SAMPLE_RADIUS..SAMPLE_RADIUS))
            .collect();
        let gamma = rng.random_range(GAMMA_RANGE.0..GAMMA_RANGE.1);
        let closed = case.func.prox(&x, gamma);
        let oracle = match numeric_prox_oracle(|z| case.eval(z), &x, gamma, &bounds) {
            Ok(p) => p,
            Err(e) => return CheckResult::new(name, false, format!("oracle failed: {e}")),
        };
        let err = vector::distance(&closed, &oracle);
        if !(err <= worst) {
            worst = if err.is_nan() { f64::INFINITY } else { err };
        }
    }
    CheckResult::within(name, worst, ORACLE_TOL)
}

pub fn prox_oracle_checks(catalog: &[ProxCase], instances: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    catalog
        .iter()
        .map(|case| check_prox_case(case, instances, &mut rng))
        .collect()
}

fn random(rng: &mut ChaCha8Rng, n: usize, s: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-s..s)).collect()
}

/// `<Ax, y> = <x, A^* y>` on random pairs, relative to `||Ax|| ||y||`.
pub fn adjoint_check(op: &LinearMap, pairs: usize, rng: &mut ChaCha8Rng) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let x = random(rng, op.in_dim(), 1.0);
        let y = random(rng, op.out_dim(), 1.0);
        let ax = op.apply(&x).expect("sized input");
        let aty = op.adjoint_apply(&y).expect("sized input");
        let scale = vector::norm(&ax) * vector::norm(&y) + vector::norm(&x) * vector::norm(&aty);
        let gap = (vector::dot(&ax, &y) - vector::dot(&x, &aty)).abs() / scale.max(f64::MIN_POSITIVE);
        worst = worst.max(gap);
    }
    CheckResult::within(format!("adjoint identity: {}", op.label()), worst, 1e-12)
}

/// Firm nonexpansiveness `<Tx - Ty, x - y> >= ||Tx - Ty||^2` on random
/// pairs drawn at the scale `s`.
pub fn firm_nonexpansiveness_gap(
    c: &Comixture,
    pairs: usize,
    s: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let n = c.ambient_dim();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let x = random(rng, n, s);
        let y = random(rng, n, s);
        let tx = c.prox(&x).expect("sized input");
        let ty = c.prox(&y).expect("sized input");
        let d = vector::sub(&tx, &ty);
        let lhs = vector::dot(&d, &vector::sub(&x, &y));
        let rhs = vector::dot(&d, &d);
        // violation relative to ||x - y||^2
        worst = worst.max((rhs - lhs) / vector::distance(&x, &y).powi(2));
    }
    worst
}

/// `sum_{j,k} x[j,k] e^{-2 pi i (rj/R + ck/C)} / sqrt(RC)`, computed
/// term by term.
pub fn direct_dft(dims: ImageDims, image: &[f64]) -> Vec<Complex64> {
    let (rows, cols) = (dims.rows, dims.cols);
    let norm = 1.0 / (dims.len() as f64).sqrt();
    let mut out = vec![Complex64::new(0.0, 0.0); dims.len()];
    for u in 0..rows {
        for v in 0..cols {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..rows {
                for c in 0..cols {
                    let t = -2.0
                        * std::f64::consts::PI
                        * ((u * r) as f64 / rows as f64 + (v * c) as f64 / cols as f64);
                    acc += Complex64::from_polar(image[dims.index(r, c)], t);
                }
            }
            out[dims.index(u, v)] = acc * norm;
        }
    }
    out
}

pub fn structural_checks(seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let dims = ImageDims::new(16, 12);
    let mut dense = DenseMatrix::from_fn(7, 5, |i, j| ((i * 5 + j) as f64).sin());
    dense.scale_in_place(0.5);
    let ops = vec![
        LinearMap::convolution(3, 11, dims).unwrap(),
        LinearMap::convolution(7, 5, dims).unwrap(),
        LinearMap::finite_difference(dims).unwrap(),
        LinearMap::coordinate_selector(45, 50, 2255).unwrap(),
        LinearMap::dense(dense),
    ];
    for op in &ops {
        out.push(adjoint_check(op, 20, &mut rng));
    }

    let mut worst: f64 = 0.0;
    for op in &ops {
        let est = operator_norm_estimate(op, POWER_ITERATION_TOL);
        if let Some(bound) = op.norm_bound() {
            worst = worst.max(est - bound);
        }
    }
    out.push(CheckResult::new(
        "operator norms within declared bounds",
        worst <= 1e-9,
        format!("largest excess {worst:.3e}"),
    ));

    // DFT against the direct sum, round trip and Parseval
    let small = ImageDims::new(8, 8);
    let img = random(&mut rng, small.len(), 1.0);
    let fast = dft2(small, &img).unwrap();
    let slow = direct_dft(small, &img);
    let err = fast
        .coeffs()
        .iter()
        .zip(&slow)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    out.push(CheckResult::within("dft vs direct sum", err, 1e-9));
    let big = ImageDims::square(64);
    let img = random(&mut rng, big.len(), 100.0);
    let spec = dft2(big, &img).unwrap();
    let back = idft2(&spec).unwrap();
    out.push(CheckResult::within(
        "dft round trip",
        vector::max_abs_diff(&img, &back),
        1e-9,
    ));
    let parseval = (spec.frobenius_norm() - vector::norm(&img)).abs() / vector::norm(&img);
    out.push(CheckResult::within("dft parseval", parseval, 1e-12));
    let asym = Spectrum2D::new(small, {
        let mut c = vec![Complex64::new(0.0, 0.0); small.len()];
        c[1] = Complex64::new(1.0, 0.0);
        c
    });
    out.push(CheckResult::new(
        "inverse dft rejects asymmetric spectra",
        idft2(&asym).is_err(),
        "",
    ));

    out.extend(comixture_checks(&mut rng));
    out.extend(envelope_checks(&mut rng));
    out
}

fn comixture_checks(rng: &mut ChaCha8Rng) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let n = 3;

    let g = HuberOfNorm::new(vec![1.0, 0.0, -2.0], 0.8).unwrap();
    let c = Comixture::new(vec![Term::new(1.0, LinearMap::identity(n), g.clone())]).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = random(rng, n, 5.0);
        worst = worst.max(vector::max_abs_diff(&c.prox(&x).unwrap(), &g.prox(&x, 1.0)));
    }
    out.push(CheckResult::within("comixture: single identity term", worst, 1e-12));

    let funcs: Vec<Arc<dyn ProxFunction>> = vec![
        Arc::new(L1 { weight: 0.9 }),
        Arc::new(Indicator(BoxSet::new(-1.0, 0.5).unwrap())),
        Arc::new(DistanceTo(Ball::centered(n, 1.0).unwrap())),
    ];
    let weights = [0.2, 0.5, 0.3];
    let terms = funcs
        .iter()
        .zip(weights)
        .map(|(f, w)| Term::shared(w, LinearMap::identity(n), f.clone()))
        .collect();
    let c = Comixture::new(terms).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = random(rng, n, 5.0);
        let mut avg = vec![0.0; n];
        for (f, w) in funcs.iter().zip(weights) {
            vector::axpy(w, &f.prox(&x, 1.0), &mut avg);
        }
        worst = worst.max(vector::max_abs_diff(&c.prox(&x).unwrap(), &avg));
    }
    out.push(CheckResult::within("comixture: proximal average", worst, 1e-12));

    let half = LinearMap::scaled(&LinearMap::identity(n), 0.5);
    let origin = Indicator(Singleton {
        point: vec![0.0; n],
    });
    let c = Comixture::new(vec![Term::new(1.0, half, origin)]).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = random(rng, n, 5.0);
        worst = worst.max(vector::max_abs_diff(&c.prox(&x).unwrap(), &vector::scale(&x, 0.75)));
    }
    out.push(CheckResult::within("comixture: scaled identity gives 3x/4", worst, 1e-12));

    for (name, inst) in [
        ("exp1", build_exp1(32, 0).expect("valid side")),
        ("exp2", build_exp2(32, 0).expect("valid side")),
    ] {
        let gap = firm_nonexpansiveness_gap(&inst.comixture, 20, 255.0, rng);
        out.push(CheckResult::new(
            format!("firm nonexpansiveness: {name} comixture"),
            gap <= 1e-9,
            format!("largest violation {gap:.3e}"),
        ));
    }
    out
}

fn envelope_checks(rng: &mut ChaCha8Rng) -> Vec<CheckResult> {
    let mut out = Vec::new();

    // x = prox_{g}(x) + prox_{g*}(x): l1 against the unit box, the norm
    // against the unit ball
    let mut worst: f64 = 0.0;
    let l1 = L1 { weight: 1.0 };
    let linf_ball = Indicator(BoxSet::new(-1.0, 1.0).unwrap());
    let norm = EuclideanNorm { weight: 1.0 };
    let ball = Indicator(Ball::centered(4, 1.0).unwrap());
    for _ in 0..100 {
        let x = random(rng, 4, 4.0);
        let s1 = vector::add(&l1.prox(&x, 1.0), &linf_ball.prox(&x, 1.0));
        let s2 = vector::add(&norm.prox(&x, 1.0), &ball.prox(&x, 1.0));
        worst = worst
            .max(vector::max_abs_diff(&s1, &x))
            .max(vector::max_abs_diff(&s2, &x));
    }
    out.push(CheckResult::within("moreau decomposition", worst, 1e-12));

    let n = 5;
    let c = Comixture::new(vec![
        Term::new(0.5, LinearMap::identity(n), HuberOfNorm::new(vec![1.0; n], 0.6).unwrap()),
        Term::new(0.25, LinearMap::identity(n), DistanceTo(Hyperplane { eta: 2.0 })),
        Term::new(0.25, LinearMap::identity(n), L1 { weight: 0.5 }),
    ])
    .unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = random(rng, n, 3.0);
        let g = c.envelope_gradient(&x).unwrap();
        for i in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (c.envelope_value(&xp).unwrap() - c.envelope_value(&xm).unwrap()) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / (1.0 + g[i].abs()));
        }
    }
    out.push(CheckResult::within("envelope gradient vs finite differences", worst, 1e-6));

    let sets: Vec<Arc<dyn ProxFunction>> = vec![
        Arc::new(Indicator(Ball::centered(n, 1.0).unwrap())),
        Arc::new(Indicator(Hyperplane { eta: 3.0 })),
    ];
    let c = Comixture::new(
        sets.iter()
            .map(|s| Term::shared(0.5, LinearMap::identity(n), s.clone()))
            .collect(),
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = random(rng, n, 3.0);
        let d_ball = (vector::norm(&x) - 1.0).max(0.0);
        let d_plane = (x.iter().sum::<f64>() - 3.0).abs() / (n as f64).sqrt();
        let want = 0.25 * (d_ball * d_ball + d_plane * d_plane);
        worst = worst.max((c.envelope_value(&x).unwrap() - want).abs());
    }
    out.push(CheckResult::within(
        "feasibility envelope is half the weighted squared distances",
        worst,
        1e-12,
    ));
    out
}

/// Oracle checks on `catalog` followed by the structural checks.
pub fn run_validation(catalog: &[ProxCase], instances: usize, seed: u64) -> Vec<CheckResult> {
    let mut out = prox_oracle_checks(catalog, instances, seed);
    out.extend(structural_checks(seed));
    out
}
