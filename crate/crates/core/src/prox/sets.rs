//! Closed convex sets with exact projections.

use rustfft::num_complex::Complex64;

use super::ProxError;
use crate::linops::{Dft2, ImageDims};
use crate::vector;

/// Default absolute membership slack, scaled by `1 + ||x||`.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-9;

/// A nonempty closed convex set.
pub trait ConvexSet: Send + Sync {
    fn project(&self, x: &[f64]) -> Vec<f64>;

    fn label(&self) -> String;

    fn membership_tol(&self) -> f64 {
        DEFAULT_MEMBERSHIP_TOL
    }

    fn distance(&self, x: &[f64]) -> f64 {
        vector::distance(x, &self.project(x))
    }

    fn contains(&self, x: &[f64]) -> bool {
        self.distance(x) <= self.membership_tol() * (1.0 + vector::norm(x))
    }
}

/// The box `[lo, hi]^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSet {
    lo: f64,
    hi: f64,
}

impl BoxSet {
    pub fn new(lo: f64, hi: f64) -> Result<Self, ProxError> {
        if lo < hi {
            Ok(Self { lo, hi })
        } else {
            Err(ProxError::EmptyInterval { lo, hi })
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

impl ConvexSet for BoxSet {
    fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v.clamp(self.lo, self.hi)).collect()
    }

    fn label(&self) -> String {
        format!("[{}, {}]^n", self.lo, self.hi)
    }
}

/// The hyperplane `{x : <x, 1> = eta}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperplane {
    pub eta: f64,
}

impl ConvexSet for Hyperplane {
    fn project(&self, x: &[f64]) -> Vec<f64> {
        project_hyperplane(x, self.eta)
    }

    fn label(&self) -> String {
        format!("<x,1> = {}", self.eta)
    }
}

/// Closed Euclidean ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    center: Vec<f64>,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self, ProxError> {
        if radius > 0.0 && radius.is_finite() {
            Ok(Self { center, radius })
        } else {
            Err(ProxError::NonPositiveParameter {
                name: "radius",
                value: radius,
            })
        }
    }

    pub fn centered(dim: usize, radius: f64) -> Result<Self, ProxError> {
        Self::new(vec![0.0; dim], radius)
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl ConvexSet for Ball {
    fn project(&self, x: &[f64]) -> Vec<f64> {
        project_ball(x, &self.center, self.radius)
    }

    fn distance(&self, x: &[f64]) -> f64 {
        (vector::distance(x, &self.center) - self.radius).max(0.0)
    }

    fn label(&self) -> String {
        format!("ball(r={})", self.radius)
    }
}

/// A single point.
#[derive(Debug, Clone, PartialEq)]
pub struct Singleton {
    pub point: Vec<f64>,
}

impl ConvexSet for Singleton {
    fn project(&self, _x: &[f64]) -> Vec<f64> {
        self.point.clone()
    }

    fn label(&self) -> String {
        "singleton".into()
    }
}

/// Real images whose spectrum takes prescribed values on a frequency set
/// closed under `k -> -k`.
#[derive(Debug, Clone)]
pub struct FourierDataSet {
    dft: Dft2,
    frozen: Vec<(usize, Complex64)>,
}

impl FourierDataSet {
    /// `frozen` lists `((row, col), value)` pairs. The index set must be
    /// closed under the mirror map and values must be conjugate symmetric.
    pub fn new(dims: ImageDims, frozen: Vec<((usize, usize), Complex64)>) -> Result<Self, ProxError> {
        let mut table: Vec<Option<Complex64>> = vec![None; dims.len()];
        for &((r, c), v) in &frozen {
            if r >= dims.rows || c >= dims.cols {
                return Err(ProxError::AsymmetricFrequencySet { row: r, col: c });
            }
            table[dims.index(r, c)] = Some(v);
        }
        let scale = frozen.iter().map(|(_, v)| v.norm()).fold(1.0, f64::max);
        for &((r, c), v) in &frozen {
            let (mr, mc) = dims.mirror(r, c);
            match table[dims.index(mr, mc)] {
                None => return Err(ProxError::AsymmetricFrequencySet { row: r, col: c }),
                Some(w) if (v - w.conj()).norm() > 1e-9 * scale => {
                    return Err(ProxError::AsymmetricFrequencyValues { row: r, col: c })
                }
                Some(_) => {}
            }
        }
        let mut frozen: Vec<(usize, Complex64)> = frozen
            .into_iter()
            .map(|((r, c), v)| (dims.index(r, c), v))
            .collect();
        frozen.sort_by_key(|(i, _)| *i);
        frozen.dedup_by_key(|(i, _)| *i);
        Ok(Self {
            dft: Dft2::new(dims),
            frozen,
        })
    }

    /// Freezes the spectrum of `reference` on `indices` and on their mirror
    /// images.
    pub fn from_reference(
        dims: ImageDims,
        reference: &[f64],
        indices: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, ProxError> {
        let dft = Dft2::new(dims);
        let spec = dft.forward(reference)?;
        let mut set = std::collections::BTreeSet::new();
        for (r, c) in indices {
            if r >= dims.rows || c >= dims.cols {
                return Err(ProxError::AsymmetricFrequencySet { row: r, col: c });
            }
            set.insert((r, c));
            set.insert(dims.mirror(r, c));
        }
        let mut frozen = Vec::with_capacity(set.len());
        for &(r, c) in &set {
            let (mr, mc) = dims.mirror(r, c);
            // symmetrize away rounding in the forward transform
            let v = (spec.get(r, c) + spec.get(mr, mc).conj()) * 0.5;
            frozen.push(((r, c), v));
        }
        Self::new(dims, frozen)
    }

    pub fn dims(&self) -> ImageDims {
        self.dft.dims()
    }

    pub fn frozen_count(&self) -> usize {
        self.frozen.len()
    }

    /// `sum_{k in R} |x^(k) - target(k)|^2`, the squared distance by Parseval.
    pub fn spectral_defect(&self, x: &[f64]) -> f64 {
        let spec = self.dft.forward(x).expect("dimension checked by caller");
        self.frozen
            .iter()
            .map(|&(i, v)| (spec.coeffs()[i] - v).norm_sqr())
            .sum()
    }
}

impl ConvexSet for FourierDataSet {
    fn project(&self, x: &[f64]) -> Vec<f64> {
        project_fourier_data(x, self)
    }

    fn distance(&self, x: &[f64]) -> f64 {
        self.spectral_defect(x).sqrt()
    }

    fn label(&self) -> String {
        format!("fourier data ({} frozen)", self.frozen.len())
    }
}

/// Real images whose spectrum has a prescribed phase: each coefficient lies
/// on the closed ray `{t e^{i theta(k)} : t >= 0}`.
#[derive(Debug, Clone)]
pub struct PhaseSet {
    dft: Dft2,
    phasors: Vec<Complex64>,
}

impl PhaseSet {
    /// `theta` is row-major and must be conjugate antisymmetric modulo 2π.
    pub fn new(dims: ImageDims, theta: &[f64]) -> Result<Self, ProxError> {
        if theta.len() != dims.len() {
            return Err(ProxError::DimensionMismatch {
                expected: dims.len(),
                got: theta.len(),
            });
        }
        let phasors: Vec<Complex64> = theta.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
        for r in 0..dims.rows {
            for c in 0..dims.cols {
                let (mr, mc) = dims.mirror(r, c);
                let defect = (phasors[dims.index(r, c)] - phasors[dims.index(mr, mc)].conj()).norm();
                if defect > 1e-9 {
                    return Err(ProxError::AsymmetricPhase { row: r, col: c });
                }
            }
        }
        Ok(Self {
            dft: Dft2::new(dims),
            phasors,
        })
    }

    /// Phase of the spectrum of a real image, symmetrized exactly.
    pub fn from_image(dims: ImageDims, image: &[f64]) -> Result<Self, ProxError> {
        Self::new(dims, &phase_of(dims, image)?)
    }

    pub fn dims(&self) -> ImageDims {
        self.dft.dims()
    }
}

/// Phase `angle(x^(k))` of a real image with exact antisymmetry: mirrored
/// pairs share one computed angle and self-mirrored coefficients get 0 or π.
pub fn phase_of(dims: ImageDims, image: &[f64]) -> Result<Vec<f64>, ProxError> {
    let spec = Dft2::new(dims).forward(image)?;
    let mut theta = vec![0.0; dims.len()];
    for r in 0..dims.rows {
        for c in 0..dims.cols {
            let k = dims.index(r, c);
            let (mr, mc) = dims.mirror(r, c);
            let m = dims.index(mr, mc);
            if m == k {
                theta[k] = if spec.coeffs()[k].re < 0.0 {
                    std::f64::consts::PI
                } else {
                    0.0
                };
            } else if k < m {
                let z = (spec.coeffs()[k] + spec.coeffs()[m].conj()) * 0.5;
                theta[k] = z.arg();
                theta[m] = -theta[k];
            }
        }
    }
    Ok(theta)
}

impl ConvexSet for PhaseSet {
    fn project(&self, x: &[f64]) -> Vec<f64> {
        project_phase(x, self)
    }

    fn label(&self) -> String {
        "fourier phase".into()
    }
}

/// `x + ((eta - <x, 1>) / n) 1`.
pub fn project_hyperplane(x: &[f64], eta: f64) -> Vec<f64> {
    let n = x.len() as f64;
    let shift = (eta - x.iter().sum::<f64>()) / n;
    x.iter().map(|v| v + shift).collect()
}

/// Projection onto the closed ball of the given center and radius.
pub fn project_ball(x: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    let d = vector::distance(x, center);
    if d <= radius {
        return x.to_vec();
    }
    let s = radius / d;
    center
        .iter()
        .zip(x)
        .map(|(c, v)| c + s * (v - c))
        .collect()
}

/// Overwrites the frozen spectral coefficients of `x`.
pub fn project_fourier_data(x: &[f64], set: &FourierDataSet) -> Vec<f64> {
    let mut spec = set.dft.forward(x).expect("image size matches the set");
    let coeffs = spec.coeffs_mut();
    for &(i, v) in &set.frozen {
        coeffs[i] = v;
    }
    set.dft.inverse_real_part(coeffs.to_vec())
}

/// Projects every spectral coefficient onto its phase ray.
pub fn project_phase(x: &[f64], set: &PhaseSet) -> Vec<f64> {
    let spec = set.dft.forward(x).expect("image size matches the set");
    let projected: Vec<Complex64> = spec
        .coeffs()
        .iter()
        .zip(&set.phasors)
        .map(|(z, u)| *u * (u.conj() * z).re.max(0.0))
        .collect();
    set.dft.inverse_real_part(projected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, n: usize, s: f64) -> Vec<f64> {
        (0..n).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * s).collect()
    }

    #[test]
    fn hyperplane_examples() {
        assert_eq!(project_hyperplane(&[1.0, 2.0, 3.0], 6.0), vec![1.0, 2.0, 3.0]);
        assert_eq!(project_hyperplane(&[1.0, 2.0, 3.0], 0.0), vec![-1.0, 0.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x = random(&mut rng, 9, 50.0);
            let p = project_hyperplane(&x, 3.5);
            assert!((p.iter().sum::<f64>() - 3.5).abs() < 1e-9);
        }
    }

    #[test]
    fn ball_examples() {
        assert_eq!(project_ball(&[0.3, 0.2], &[0.0, 0.0], 1.0), vec![0.3, 0.2]);
        assert_eq!(project_ball(&[3.0, 0.0], &[0.0, 0.0], 1.0), vec![1.0, 0.0]);
        let ball = Ball::new(vec![1.0, -2.0, 0.5], 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let p = ball.project(&random(&mut rng, 3, 5.0));
            assert!(vector::max_abs_diff(&p, &ball.project(&p)) < 1e-9);
        }
        assert!(Ball::centered(2, 0.0).is_err());
    }

    #[test]
    fn box_rejects_empty_interval() {
        assert!(BoxSet::new(1.0, 1.0).is_err());
        let b = BoxSet::new(0.0, 255.0).unwrap();
        assert_eq!(b.project(&[-5.0, 100.0, 300.0]), vec![0.0, 100.0, 255.0]);
    }

    #[test]
    fn fourier_data_projection() {
        let dims = ImageDims::square(8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let reference: Vec<f64> = random(&mut rng, dims.len(), 100.0);
        let low = (0..2).flat_map(|r| (0..2).map(move |c| (r, c)));
        let set = FourierDataSet::from_reference(dims, &reference, low).unwrap();
        // {0,1}^2 plus mirrors
        assert_eq!(set.frozen_count(), 7);

        assert!(vector::max_abs_diff(&set.project(&reference), &reference) < 1e-9);

        let x = random(&mut rng, dims.len(), 100.0);
        let p = set.project(&x);
        assert!(vector::max_abs_diff(&set.project(&p), &p) < 1e-9);
        let d2 = vector::distance(&x, &p).powi(2);
        assert!((d2 - set.spectral_defect(&x)).abs() <= 1e-9 * (1.0 + d2));

        let all = (0..8).flat_map(|r| (0..8).map(move |c| (r, c)));
        let full = FourierDataSet::from_reference(dims, &reference, all).unwrap();
        assert!(vector::max_abs_diff(&full.project(&x), &reference) < 1e-9);
    }

    #[test]
    fn asymmetric_frequency_set_is_rejected() {
        let dims = ImageDims::square(4);
        let one = Complex64::new(1.0, 0.0);
        assert!(matches!(
            FourierDataSet::new(dims, vec![((0, 1), one)]),
            Err(ProxError::AsymmetricFrequencySet { .. })
        ));
        let i = Complex64::new(0.0, 1.0);
        assert!(matches!(
            FourierDataSet::new(dims, vec![((0, 1), i), ((0, 3), i)]),
            Err(ProxError::AsymmetricFrequencyValues { .. })
        ));
        assert!(FourierDataSet::new(dims, vec![((0, 1), i), ((0, 3), -i)]).is_ok());
    }

    #[test]
    fn phase_projection() {
        let dims = ImageDims::square(8);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let image: Vec<f64> = (0..dims.len()).map(|_| rng.random::<f64>() * 255.0).collect();
        let set = PhaseSet::from_image(dims, &image).unwrap();
        // image already has its own phase
        assert!(vector::max_abs_diff(&set.project(&image), &image) < 1e-9);
        for _ in 0..100 {
            let x = random(&mut rng, dims.len(), 100.0);
            let p = set.project(&x);
            assert!(vector::max_abs_diff(&set.project(&p), &p) < 1e-9);
        }
    }

    #[test]
    fn phase_projection_single_coefficient() {
        // 1x1 image: its DFT is itself, theta = 0 so negatives map to 0
        let set = PhaseSet::new(ImageDims::new(1, 1), &[0.0]).unwrap();
        assert!(set.project(&[-1.0])[0].abs() < 1e-15);
        assert_eq!(set.project(&[2.0]), vec![2.0]);
    }

    #[test]
    fn asymmetric_phase_is_rejected() {
        let dims = ImageDims::new(1, 4);
        assert!(PhaseSet::new(dims, &[0.0, 0.3, 0.0, 0.3]).is_err());
        assert!(PhaseSet::new(dims, &[0.0, 0.3, std::f64::consts::PI, -0.3]).is_ok());
    }
}
