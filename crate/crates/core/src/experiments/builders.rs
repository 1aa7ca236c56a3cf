use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{image, ExperimentError, ExperimentInstance, Scale, Smooth};
use crate::comixture::{Comixture, Term};
use crate::linops::{
    operator_norm_estimate, DenseMatrix, ImageDims, LinearMap, POWER_ITERATION_TOL,
};
use crate::prox::{
    phase_of, Ball, BoxSet, DistanceTo, EuclideanNorm, FourierDataSet, Hyperplane, HuberOfDistance,
    HuberOfNorm, Indicator, LeastSquares, PhaseSet, L1,
};
use crate::vector;

/// Blurred-image-to-noise ratios of the two exp1 observations, in dB.
pub const EXP1_BSNR_DB: [f64; 2] = [30.1, 34.6];
pub const EXP1_KERNELS: [(usize, usize); 2] = [(3, 11), (7, 5)];
pub const EXP1_WEIGHTS: [f64; 4] = [3.0 / 8.0, 3.0 / 8.0, 1.0 / 8.0, 1.0 / 8.0];
/// Huber parameter at side 256.
pub const EXP1_RHO: f64 = 300.0;

/// Huber parameters at side 512.
pub const EXP2_RHO: [f64; 4] = [3000.0, 3000.0, 3000.0, 5000.0];
pub const EXP2_SATURATION: f64 = 130.0;
pub const EXP2_BLUR: (usize, usize) = (5, 5);
pub const EXP2_NOISE_STD: f64 = 8.0;
pub const EXP2_LOCAL_NOISE_STD: f64 = 80.0;
/// Factors that make the gradient-norm and proximity bounds inexact.
pub const EXP2_GRADIENT_SLACK: f64 = 1.05;
pub const EXP2_PROXIMITY_SLACK: f64 = 0.95;

pub const EXP3_GROUP_SIZE: usize = 50;
pub const EXP3_GROUP_STRIDE: usize = 45;
/// `A` is divided by this factor times its estimated norm, so that
/// `||A|| <= 1` survives the power-iteration error.
pub const EXP3_NORM_MARGIN: f64 = 1.01;

const IMAGE_RANGE: (f64, f64) = (0.0, 255.0);

pub fn check_side(side: usize) -> Result<(), ExperimentError> {
    if side >= 32 && side.is_power_of_two() {
        Ok(())
    } else {
        Err(ExperimentError::InvalidSide(side))
    }
}

/// `ChaCha8` generator for one noise source of an instance.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
    (0..n)
        .map(|_| std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

fn variance(x: &[f64]) -> f64 {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / x.len() as f64
}

/// Noise standard deviation giving `10 log10(var(signal) / std^2) = bsnr_db`.
pub fn noise_std_for_bsnr(signal: &[f64], bsnr_db: f64) -> f64 {
    (variance(signal) / 10f64.powf(bsnr_db / 10.0)).sqrt()
}

fn square_dims(dims: ImageDims) -> Result<usize, ExperimentError> {
    if dims.rows != dims.cols {
        return Err(ExperimentError::InvalidImage(format!(
            "ground truth must be square, got {}x{}",
            dims.rows, dims.cols
        )));
    }
    check_side(dims.rows)?;
    Ok(dims.rows)
}

fn box_constraint() -> Arc<Indicator<BoxSet>> {
    Arc::new(Indicator(
        BoxSet::new(IMAGE_RANGE.0, IMAGE_RANGE.1).expect("valid range"),
    ))
}

fn check_range(image: &[f64]) -> Result<(), ExperimentError> {
    if image.iter().all(|v| (IMAGE_RANGE.0..=IMAGE_RANGE.1).contains(v)) {
        Ok(())
    } else {
        Err(ExperimentError::InvalidImage(
            "ground truth pixels must lie in [0, 255]".into(),
        ))
    }
}

/// Deblurring with a partial Fourier observation, on the built-in phantom.
pub fn build_exp1(side: usize, seed: u64) -> Result<ExperimentInstance, ExperimentError> {
    check_side(side)?;
    build_exp1_from_image(ImageDims::square(side), image::phantom(side), seed)
}

pub fn build_exp1_from_image(
    dims: ImageDims,
    truth: Vec<f64>,
    seed: u64,
) -> Result<ExperimentInstance, ExperimentError> {
    let side = square_dims(dims)?;
    check_range(&truth)?;
    let n = dims.len();

    let band = side / 16;
    let freqs = (0..band).flat_map(|r| (0..band).map(move |c| (r, c)));
    let fourier = FourierDataSet::from_reference(dims, &truth, freqs)?;

    let rho = EXP1_RHO * (side * side) as f64 / (256.0 * 256.0);
    let mut observations = BTreeMap::new();
    let mut terms = Vec::with_capacity(4);
    for (k, (&(kr, kc), &bsnr)) in EXP1_KERNELS.iter().zip(&EXP1_BSNR_DB).enumerate() {
        let blur = LinearMap::convolution(kr.min(side), kc.min(side), dims)?;
        let clean = blur.apply(&truth)?;
        let std = noise_std_for_bsnr(&clean, bsnr);
        let noise = gaussian(&mut stream(seed, k as u64), n, std);
        let z = vector::add(&clean, &noise);
        observations.insert(format!("z{}", k + 1), z.clone());
        terms.push(Term::new(EXP1_WEIGHTS[k], blur, HuberOfNorm::new(z, rho)?));
    }
    terms.push(Term::new(
        EXP1_WEIGHTS[2],
        LinearMap::identity(n),
        DistanceTo(fourier),
    ));
    terms.push(Term::new(
        EXP1_WEIGHTS[3],
        LinearMap::finite_difference(dims)?,
        L1 {
            weight: 8f64.sqrt(),
        },
    ));

    Ok(ExperimentInstance {
        name: "exp1".into(),
        f: box_constraint(),
        smooth: None,
        comixture: Comixture::new(terms)?,
        ground_truth: truth,
        observations,
        seed,
        scale: Scale::Image { dims },
    })
}

/// Reconstruction from Fourier phase with inexact auxiliary constraints,
/// on the built-in phantom.
pub fn build_exp2(side: usize, seed: u64) -> Result<ExperimentInstance, ExperimentError> {
    check_side(side)?;
    build_exp2_from_image(ImageDims::square(side), image::phantom(side), seed)
}

/// Degraded reference image for exp2: blur, noise, saturation, then strong
/// noise on a rectangle in the upper-right part of the image.
fn exp2_reference(dims: ImageDims, truth: &[f64], seed: u64) -> Result<Vec<f64>, ExperimentError> {
    let side = dims.rows;
    let blur = LinearMap::convolution(EXP2_BLUR.0, EXP2_BLUR.1, dims)?;
    let noise = gaussian(&mut stream(seed, 0), dims.len(), EXP2_NOISE_STD);
    let mut z: Vec<f64> = blur
        .apply(truth)?
        .iter()
        .zip(&noise)
        .map(|(b, w)| (b + w).min(EXP2_SATURATION))
        .collect();
    let mut rng = stream(seed, 1);
    let (r0, r1) = (side * 5 / 16, side * 7 / 16);
    let (c0, c1) = (side / 2, side * 3 / 4);
    for r in r0..r1 {
        let local = gaussian(&mut rng, c1 - c0, EXP2_LOCAL_NOISE_STD);
        for (c, w) in (c0..c1).zip(local) {
            z[dims.index(r, c)] += w;
        }
    }
    Ok(z)
}

pub fn build_exp2_from_image(
    dims: ImageDims,
    truth: Vec<f64>,
    seed: u64,
) -> Result<ExperimentInstance, ExperimentError> {
    let side = square_dims(dims)?;
    check_range(&truth)?;
    let n = dims.len();

    let theta = phase_of(dims, &truth)?;
    let eta: f64 = truth.iter().sum();
    let d = LinearMap::finite_difference(dims)?;
    let grad_bound = EXP2_GRADIENT_SLACK * vector::norm(&d.apply(&truth)?);
    let z = exp2_reference(dims, &truth, seed)?;
    let xi = EXP2_PROXIMITY_SLACK * vector::distance(&truth, &z);

    let scale = (side * side) as f64 / (512.0 * 512.0);
    let rho = EXP2_RHO.map(|r| r * scale);
    let terms = vec![
        Term::new(
            0.25,
            LinearMap::identity(n),
            HuberOfDistance::new(PhaseSet::new(dims, &theta)?, rho[0])?,
        ),
        Term::new(
            0.25,
            LinearMap::identity(n),
            HuberOfDistance::new(Hyperplane { eta }, rho[1])?,
        ),
        Term::new(
            0.25,
            d,
            HuberOfDistance::new(Ball::centered(2 * n, grad_bound)?, rho[2])?,
        ),
        Term::new(
            0.25,
            LinearMap::identity(n),
            HuberOfDistance::new(Ball::new(z.clone(), xi)?, rho[3])?,
        ),
    ];

    let mut observations = BTreeMap::new();
    observations.insert("theta".to_string(), theta);
    observations.insert("z".to_string(), z);
    observations.insert("eta".to_string(), vec![eta]);
    observations.insert("rho".to_string(), vec![grad_bound]);
    observations.insert("xi".to_string(), vec![xi]);

    Ok(ExperimentInstance {
        name: "exp2".into(),
        f: box_constraint(),
        smooth: None,
        comixture: Comixture::new(terms)?,
        ground_truth: truth,
        observations,
        seed,
        scale: Scale::Image { dims },
    })
}

/// Ground truth `(-1)^j exp(-(j - 1) / 50)`, `j = 1..=n`.
pub fn exp3_ground_truth(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * (-((j - 1) as f64) / 50.0).exp()
        })
        .collect()
}

/// Overlapping group lasso with `p` groups of 50 coordinates at stride 45.
pub fn build_exp3(n: usize, m: usize, p: usize, seed: u64) -> Result<ExperimentInstance, ExperimentError> {
    if p == 0 || m == 0 || EXP3_GROUP_STRIDE * (p - 1) + EXP3_GROUP_SIZE != n {
        return Err(ExperimentError::InconsistentGeometry { n, m, p });
    }
    let truth = exp3_ground_truth(n);

    let mut rng = stream(seed, 0);
    let mut a = DenseMatrix::from_row_major(m, n, gaussian(&mut rng, m * n, 1.0));
    let estimate = operator_norm_estimate(&LinearMap::dense(a.clone()), POWER_ITERATION_TOL);
    a.scale_in_place(1.0 / (EXP3_NORM_MARGIN * estimate));
    let beta = (1.0 / EXP3_NORM_MARGIN).powi(2);

    let w = gaussian(&mut stream(seed, 1), m, 1.0);
    let z = vector::add(&a.matvec(&truth), &w);
    let ls = Arc::new(LeastSquares::new(a, z.clone()));

    let terms = (0..p)
        .map(|k| {
            Ok(Term::new(
                1.0 / p as f64,
                LinearMap::coordinate_selector(EXP3_GROUP_STRIDE * k, EXP3_GROUP_SIZE, n)?,
                EuclideanNorm { weight: 1.0 },
            ))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;

    let grad_ls = ls.clone();
    let mut observations = BTreeMap::new();
    observations.insert("z".to_string(), z);
    Ok(ExperimentInstance {
        name: "exp3".into(),
        f: ls,
        smooth: Some(Smooth {
            gradient: Arc::new(move |x: &[f64]| grad_ls.gradient(x)),
            beta,
        }),
        comixture: Comixture::new(terms)?,
        ground_truth: truth,
        observations,
        seed,
        scale: Scale::Groups { n, m, p },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::project_fourier_data;

    #[test]
    fn side_validation() {
        for bad in [0, 16, 63, 96] {
            assert!(matches!(build_exp1(bad, 0), Err(ExperimentError::InvalidSide(_))));
            assert!(matches!(build_exp2(bad, 0), Err(ExperimentError::InvalidSide(_))));
        }
    }

    #[test]
    fn exp1_structure() {
        let inst = build_exp1(32, 3).unwrap();
        let weights: Vec<f64> = inst.comixture.terms().iter().map(|t| t.weight).collect();
        assert_eq!(weights, EXP1_WEIGHTS.to_vec());
        let labels: Vec<&str> = inst.comixture.terms().iter().map(|t| t.op.label()).collect();
        assert_eq!(labels, vec!["blur3x11", "blur7x5", "Id", "D/sqrt8"]);
        // the ground truth lies in E
        let x = &inst.ground_truth;
        let e = inst.comixture.terms()[2].func.value(x).unwrap();
        assert!(e < 1e-9 * vector::norm(x));
    }

    #[test]
    fn exp1_noise_matches_bsnr() {
        let inst = build_exp1(64, 11).unwrap();
        for (k, bsnr) in EXP1_BSNR_DB.iter().enumerate() {
            let op = &inst.comixture.terms()[k].op;
            let clean = op.apply(&inst.ground_truth).unwrap();
            let z = &inst.observations[&format!("z{}", k + 1)];
            let noise = vector::sub(z, &clean);
            let measured = 10.0 * (variance(&clean) / variance(&noise)).log10();
            assert!((measured - bsnr).abs() < 0.3, "{measured} vs {bsnr}");
        }
    }

    #[test]
    fn exp1_frozen_set_is_accepted_by_projection() {
        let dims = ImageDims::square(32);
        let truth = image::phantom(32);
        let freqs = (0..2).flat_map(|r| (0..2).map(move |c| (r, c)));
        let set = FourierDataSet::from_reference(dims, &truth, freqs).unwrap();
        let p = project_fourier_data(&vec![0.0; dims.len()], &set);
        assert!(set.spectral_defect(&p) < 1e-9);
    }

    #[test]
    fn exp2_structure_and_inexact_bounds() {
        let inst = build_exp2(32, 5).unwrap();
        let terms = inst.comixture.terms();
        assert!(terms.iter().all(|t| t.weight == 0.25));
        let labels: Vec<&str> = terms.iter().map(|t| t.op.label()).collect();
        assert_eq!(labels, vec!["Id", "Id", "D/sqrt8", "Id"]);
        let z = &inst.observations["z"];
        assert!(z.iter().take(32 * 10).all(|&v| v <= EXP2_SATURATION));
        // the truth violates the proximity bound and satisfies the others
        let x = &inst.ground_truth;
        assert!(terms[3].func.value(x).unwrap() > 0.0);
        assert!(terms[0].func.value(x).unwrap() < 1e-9);
        assert!(terms[1].func.value(x).unwrap() < 1e-6);
        assert_eq!(terms[2].func.value(&terms[2].op.apply(x).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn exp3_geometry_and_scaling() {
        assert!(matches!(
            build_exp3(100, 80, 2, 0),
            Err(ExperimentError::InconsistentGeometry { .. })
        ));
        let inst = build_exp3(2255, 40, 50, 1).unwrap();
        assert_eq!(inst.comixture.len(), 50);
        let second = &inst.comixture.terms()[1].op;
        let e: Vec<f64> = (0..2255).map(|i| i as f64).collect();
        let g = second.apply(&e).unwrap();
        // one-based indices 46..=95
        assert_eq!(g.first(), Some(&45.0));
        assert_eq!(g.last(), Some(&94.0));
        let truth = exp3_ground_truth(3);
        assert_eq!(truth[0], -1.0);
        assert!((truth[1] - (-1.0f64 / 50.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn exp3_matrix_norm_at_most_one() {
        let inst = build_exp3(95, 60, 2, 9).unwrap();
        let smooth = inst.smooth.as_ref().unwrap();
        assert!(smooth.beta <= 1.0);
        // A^T A x = grad(x) - grad(0)
        let offset = (smooth.gradient)(&vec![0.0; 95]);
        let gram = |x: &[f64]| vector::sub(&(smooth.gradient)(x), &offset);
        let mut x: Vec<f64> = (0..95).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let mut lambda = 0.0;
        for _ in 0..2000 {
            let y = gram(&x);
            lambda = vector::norm(&y) / vector::norm(&x);
            x = vector::scale(&y, 1.0 / vector::norm(&y));
        }
        assert!(lambda <= 1.0 + 1e-9, "||A||^2 = {lambda}");
    }

    #[test]
    fn rebuild_is_bit_exact() {
        let a = build_exp2(32, 77).unwrap();
        let b = build_exp2(32, 77).unwrap();
        assert_eq!(a.observations, b.observations);
        let a = build_exp3(95, 30, 2, 4).unwrap();
        let b = build_exp3(95, 30, 2, 4).unwrap();
        assert_eq!(a.observations, b.observations);
        let c = build_exp3(95, 30, 2, 5).unwrap();
        assert_ne!(a.observations, c.observations);
    }
}
