//! Pluggable association measures: a scalar score of how well one vectorial
//! series predicts another. Three built-ins are provided; anything with the
//! same shape can be swapped in at the dispatch point.

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::{hstack, orthonormal_basis, residualize, DEFAULT_BASIS_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoKind {
    /// Pearson correlation between two 1-dimensional series.
    Pearson1d,
    /// Fraction of variance explained by ordinary least squares.
    LinregR2,
    /// Fraction of variance explained by ridge regression.
    RidgeR2,
}

/// Configuration of an association measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoMeasure {
    pub kind: RhoKind,
    /// Penalty on non-intercept coefficients; only used by `RidgeR2`.
    pub ridge_lambda: f64,
    /// Whether regression-based measures fit an intercept.
    pub add_intercept: bool,
}

impl RhoMeasure {
    pub fn pearson() -> Self {
        RhoMeasure {
            kind: RhoKind::Pearson1d,
            ridge_lambda: 0.0,
            add_intercept: true,
        }
    }

    pub fn linreg() -> Self {
        RhoMeasure {
            kind: RhoKind::LinregR2,
            ridge_lambda: 0.0,
            add_intercept: true,
        }
    }

    pub fn ridge(lambda: f64) -> Self {
        RhoMeasure {
            kind: RhoKind::RidgeR2,
            ridge_lambda: lambda,
            add_intercept: true,
        }
    }
}

impl Default for RhoMeasure {
    fn default() -> Self {
        RhoMeasure::pearson()
    }
}

fn column_is_constant(xs: &[f64]) -> bool {
    let m = crate::stats::mean(xs);
    let spread = xs.iter().map(|&x| (x - m).abs()).fold(0.0_f64, f64::max);
    let scale = xs.iter().map(|&x| x.abs()).fold(0.0_f64, f64::max).max(m.abs());
    spread == 0.0 || spread <= 1e-14 * scale
}

/// Sample Pearson correlation of two equal-length series.
///
/// Exactly symmetric in its arguments. A numerically constant input is a
/// `DegenerateSeries` error; the caller decides the policy.
pub fn rho_pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "pearson: lengths {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::DimensionMismatch(
            "pearson: need at least two timepoints".to_string(),
        ));
    }
    if column_is_constant(x) || column_is_constant(y) {
        return Err(Error::DegenerateSeries(
            "pearson correlation of a constant series".to_string(),
        ));
    }
    let mx = crate::stats::mean(x);
    let my = crate::stats::mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Fraction of variance of `y` explained by a linear fit on `x`.
///
/// `lambda = 0` is ordinary least squares, solved by projecting onto an
/// orthonormal basis of the design so rank-deficient designs are handled.
/// `lambda > 0` penalizes non-intercept coefficients (no standardization of
/// the predictor columns is performed). The total sum of squares is always
/// measured around the column means of `y`, so the score can be negative for
/// a fit worse than the mean.
pub fn rho_r2(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda: f64,
    add_intercept: bool,
) -> Result<f64> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "r2: x has {} rows, y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::Config(format!(
            "ridge lambda must be a finite nonnegative real (got {lambda})"
        )));
    }
    let t = x.nrows();
    let p = x.ncols();

    let sst = total_centered_ss(y);
    let y_scale = y.amax();
    if sst <= 1e-28 * (y_scale * y_scale).max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateSeries(
            "r2 target has no variance around its column means".to_string(),
        ));
    }

    let design = if add_intercept {
        hstack(&DMatrix::from_element(t, 1, 1.0), x)
    } else {
        x.clone()
    };

    let sse = if lambda == 0.0 {
        let needed = p + usize::from(add_intercept);
        if t <= needed {
            return Err(Error::IllConditioned(format!(
                "least squares needs more timepoints than predictors (T={t}, predictors={needed})"
            )));
        }
        let basis = orthonormal_basis(&design, DEFAULT_BASIS_TOL);
        let resid = residualize(y, &basis)?;
        resid.norm_squared()
    } else {
        // Normal equations with the penalty on non-intercept coefficients.
        let k = design.ncols();
        let mut gram = design.transpose() * &design;
        for j in 0..k {
            let penalized = !(add_intercept && j == 0);
            if penalized {
                gram[(j, j)] += lambda;
            }
        }
        let rhs = design.transpose() * y;
        let chol = Cholesky::new(gram).ok_or_else(|| {
            Error::IllConditioned("ridge normal equations are not positive definite".to_string())
        })?;
        let coeffs = chol.solve(&rhs);
        (y - &design * coeffs).norm_squared()
    };

    Ok(1.0 - sse / sst)
}

fn total_centered_ss(y: &DMatrix<f64>) -> f64 {
    let t = y.nrows() as f64;
    let mut total = 0.0;
    for j in 0..y.ncols() {
        let col = y.column(j);
        let m: f64 = col.iter().sum::<f64>() / t;
        total += col.iter().map(|&v| (v - m) * (v - m)).sum::<f64>();
    }
    total
}

/// Dispatches to the configured measure. `Pearson1d` requires both inputs to
/// be single-column.
pub fn apply_rho(measure: &RhoMeasure, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    match measure.kind {
        RhoKind::Pearson1d => {
            if x.ncols() != 1 || y.ncols() != 1 {
                return Err(Error::Config(format!(
                    "pearson1d needs 1-dimensional series (got p={}, q={})",
                    x.ncols(),
                    y.ncols()
                )));
            }
            let xs: Vec<f64> = x.column(0).iter().copied().collect();
            let ys: Vec<f64> = y.column(0).iter().copied().collect();
            rho_pearson(&xs, &ys)
        }
        RhoKind::LinregR2 => rho_r2(x, y, 0.0, measure.add_intercept),
        RhoKind::RidgeR2 => rho_r2(x, y, measure.ridge_lambda, measure.add_intercept),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, t: usize, k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(t, k, |_, _| rng.gen::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn pearson_exact_values() {
        let same = rho_pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((same - 1.0).abs() < 1e-14);
        let flipped = rho_pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert!((flipped + 1.0).abs() < 1e-14);
        // cov = 1, var_x = var_y = 2
        let half = rho_pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((half - 0.5).abs() < 1e-14);
    }

    #[test]
    fn pearson_rejects_constant_input() {
        let err = rho_pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateSeries(_)));
    }

    #[test]
    fn pearson_symmetric_and_scale_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x: Vec<f64> = (0..40).map(|_| rng.gen::<f64>()).collect();
        let y: Vec<f64> = (0..40).map(|_| rng.gen::<f64>()).collect();
        let r = rho_pearson(&x, &y).unwrap();
        assert_eq!(r, rho_pearson(&y, &x).unwrap());
        let scaled: Vec<f64> = x.iter().map(|&v| -2.5 * v + 7.0).collect();
        assert!((rho_pearson(&scaled, &y).unwrap() + r).abs() < 1e-12);
    }

    #[test]
    fn r2_perfect_fit_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_matrix(&mut rng, 30, 2);
        let coefs = DMatrix::from_row_slice(2, 1, &[1.5, -0.5]);
        let y = &x * coefs;
        let r2 = rho_r2(&x, &y, 0.0, true).unwrap();
        assert!((r2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn r2_orthogonal_target_is_zero() {
        // y orthogonal to x and to the constant column: nothing to explain.
        let t = 8;
        let x = DMatrix::from_fn(t, 1, |i, _| if i < 4 { 1.0 } else { 0.0 });
        let y = DMatrix::from_fn(t, 1, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
        let r2 = rho_r2(&x, &y, 0.0, true).unwrap();
        assert!(r2.abs() < 1e-9);
    }

    #[test]
    fn r2_matches_independent_normal_equations() {
        // Brute-force oracle: solve (D^T D) b = D^T y by Gauss-Jordan.
        fn oracle_r2(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
            let t = x.nrows();
            let d = hstack(&DMatrix::from_element(t, 1, 1.0), x);
            let k = d.ncols();
            let mut aug = hstack(&(d.transpose() * &d), &(d.transpose() * y));
            for col in 0..k {
                let pivot = (col..k)
                    .max_by(|&a, &b| aug[(a, col)].abs().total_cmp(&aug[(b, col)].abs()))
                    .unwrap();
                aug.swap_rows(col, pivot);
                let pv = aug[(col, col)];
                for j in 0..aug.ncols() {
                    aug[(col, j)] /= pv;
                }
                for row in 0..k {
                    if row != col {
                        let f = aug[(row, col)];
                        for j in 0..aug.ncols() {
                            aug[(row, j)] -= f * aug[(col, j)];
                        }
                    }
                }
            }
            let beta = aug.columns(k, y.ncols()).into_owned();
            let sse = (y - &d * beta).norm_squared();
            let m: f64 = y.column(0).iter().sum::<f64>() / t as f64;
            let sst: f64 = y.column(0).iter().map(|&v| (v - m) * (v - m)).sum();
            1.0 - sse / sst
        }

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random_matrix(&mut rng, 50, 3);
        let beta = DMatrix::from_row_slice(3, 1, &[0.8, -1.2, 0.3]);
        let noise = random_matrix(&mut rng, 50, 1) * 0.3;
        let y = &x * beta + noise;
        let ours = rho_r2(&x, &y, 0.0, true).unwrap();
        let reference = oracle_r2(&x, &y);
        assert!((ours - reference).abs() < 1e-8, "{ours} vs {reference}");
    }

    #[test]
    fn ridge_zero_lambda_agrees_with_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = random_matrix(&mut rng, 40, 3);
        let y = random_matrix(&mut rng, 40, 2);
        let ols = apply_rho(&RhoMeasure::linreg(), &x, &y).unwrap();
        let ridge0 = apply_rho(&RhoMeasure::ridge(0.0), &x, &y).unwrap();
        assert!((ols - ridge0).abs() < 1e-9);
    }

    #[test]
    fn ridge_score_nonincreasing_in_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let x = random_matrix(&mut rng, 30, 4);
        let y = random_matrix(&mut rng, 30, 1);
        let lambdas = [0.0, 0.01, 0.1, 1.0, 10.0, 100.0];
        let scores: Vec<f64> = lambdas
            .iter()
            .map(|&l| rho_r2(&x, &y, l, true).unwrap())
            .collect();
        for w in scores.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{scores:?}");
        }
    }

    #[test]
    fn ols_underdetermined_is_ill_conditioned() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let x = random_matrix(&mut rng, 4, 5);
        let y = random_matrix(&mut rng, 4, 1);
        assert!(matches!(
            rho_r2(&x, &y, 0.0, true),
            Err(Error::IllConditioned(_))
        ));
    }

    #[test]
    fn pearson_dispatch_requires_one_dim() {
        let x = DMatrix::<f64>::zeros(10, 2);
        let y = DMatrix::<f64>::zeros(10, 1);
        assert!(matches!(
            apply_rho(&RhoMeasure::pearson(), &x, &y),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn r2_invariant_under_column_recombination() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let x = random_matrix(&mut rng, 40, 3);
        let y = random_matrix(&mut rng, 40, 1);
        // Invertible 3x3 mix.
        let mix = DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 2.0, 0.0, 0.0, 1.0, -1.0, 3.0, 0.0, 1.0],
        );
        let r_base = rho_r2(&x, &y, 0.0, true).unwrap();
        let r_mixed = rho_r2(&(&x * mix), &y, 0.0, true).unwrap();
        assert!((r_base - r_mixed).abs() < 1e-8);
    }
}
