//! Brute-force prox evaluation for validating closed forms.

use super::ProxError;

/// Largest dimension the grid search accepts.
pub const ORACLE_MAX_DIM: usize = 3;

/// Width at which a golden-section bracket is considered converged.
const BRACKET_TOL: f64 = 1e-13;
const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Minimizes `g(z) + ||x - z||^2 / (2 gamma)` over the box `bounds`. A
/// coarse grid search finds a finite incumbent; nested golden-section
/// searches over the whole box then refine it, one coordinate per level.
/// Partial minimization preserves convexity, so every level is unimodal
/// and kinks in `g` do not trap the search. Intended for dimensions 1 to
/// 3; `g` may return `+inf`, though refinement is only reliable in more
/// than one dimension when `g` is finite on the box.
pub fn numeric_prox_oracle(
    g: impl Fn(&[f64]) -> f64,
    x: &[f64],
    gamma: f64,
    bounds: &[(f64, f64)],
) -> Result<Vec<f64>, ProxError> {
    let dim = x.len();
    if dim == 0 || dim > ORACLE_MAX_DIM || bounds.len() != dim {
        return Err(ProxError::UnboundedRegion);
    }
    if bounds
        .iter()
        .any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi))
    {
        return Err(ProxError::UnboundedRegion);
    }
    if !(gamma > 0.0) {
        return Err(ProxError::NonPositiveParameter {
            name: "gamma",
            value: gamma,
        });
    }

    let objective = |z: &[f64]| {
        let q: f64 = z.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        g(z) + q / (2.0 * gamma)
    };

    let points = match dim {
        1 => 2001,
        2 => 201,
        _ => 41,
    };
    let lo: Vec<f64> = bounds.iter().map(|b| b.0).collect();
    let cell: Vec<f64> = bounds
        .iter()
        .map(|(l, h)| (h - l) / (points - 1) as f64)
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    scan_grid(&lo, &cell, points, &objective, &mut best);
    let (grid_value, incumbent) = best.ok_or(ProxError::NoFeasiblePoint)?;

    let mut z = incumbent.clone();
    let refined = refine(&objective, bounds, &incumbent, &mut z, 0);
    if refined <= grid_value {
        Ok(z)
    } else {
        Ok(incumbent)
    }
}

/// Minimizes over coordinates `level..` with the earlier ones fixed in
/// `z`, leaving the minimizer in `z` and returning the minimum.
fn refine(
    objective: &impl Fn(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    incumbent: &[f64],
    z: &mut Vec<f64>,
    level: usize,
) -> f64 {
    if level == z.len() {
        return objective(z);
    }
    let eval = |t: f64, z: &mut Vec<f64>| {
        z[level] = t;
        refine(objective, bounds, incumbent, z, level + 1)
    };
    let (mut a, mut b) = bounds[level];
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c, z);
    let mut fd = eval(d, z);
    while b - a > BRACKET_TOL {
        // with both probes outside the domain, the incumbent shows which
        // side it lies on
        let left = if fc.is_infinite() && fd.is_infinite() {
            incumbent[level] < 0.5 * (c + d)
        } else {
            fc <= fd
        };
        if left {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c, z);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d, z);
        }
    }
    eval(0.5 * (a + b), z)
}

fn scan_grid(
    lo: &[f64],
    cell: &[f64],
    points: usize,
    objective: &impl Fn(&[f64]) -> f64,
    best: &mut Option<(f64, Vec<f64>)>,
) {
    let dim = lo.len();
    let total = points.pow(dim as u32);
    let mut z = vec![0.0; dim];
    for flat in 0..total {
        let mut rest = flat;
        for d in 0..dim {
            z[d] = lo[d] + (rest % points) as f64 * cell[d];
            rest /= points;
        }
        let v = objective(&z);
        if v.is_finite() && best.as_ref().is_none_or(|(b, _)| v < *b) {
            *best = Some((v, z.clone()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_indicator() {
        let g = |z: &[f64]| if (0.0..=1.0).contains(&z[0]) { 0.0 } else { f64::INFINITY };
        let p = numeric_prox_oracle(g, &[2.0], 1.0, &[(-5.0, 5.0)]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn absolute_value() {
        let p = numeric_prox_oracle(|z| z[0].abs(), &[2.0], 1.0, &[(-5.0, 5.0)]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn two_dimensional_norm() {
        let g = |z: &[f64]| (z[0] * z[0] + z[1] * z[1]).sqrt();
        let p = numeric_prox_oracle(g, &[3.0, 4.0], 1.0, &[(-6.0, 6.0), (-6.0, 6.0)]).unwrap();
        assert!((p[0] - 2.4).abs() < 1e-6 && (p[1] - 3.2).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_regions() {
        let g = |_: &[f64]| 0.0;
        assert_eq!(
            numeric_prox_oracle(g, &[0.0], 1.0, &[(f64::NEG_INFINITY, 1.0)]),
            Err(ProxError::UnboundedRegion)
        );
        assert_eq!(
            numeric_prox_oracle(g, &[0.0; 4], 1.0, &[(0.0, 1.0); 4]),
            Err(ProxError::UnboundedRegion)
        );
        let never = |_: &[f64]| f64::INFINITY;
        assert_eq!(
            numeric_prox_oracle(never, &[0.0], 1.0, &[(0.0, 1.0)]),
            Err(ProxError::NoFeasiblePoint)
        );
    }
}
