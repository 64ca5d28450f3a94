mod common;

use common::{golden_max, nelder_mead_max, normal, rng};
use rand::Rng;
use survmi_core::glm::{expit, logistic_objective, logistic_score, poisson_loglik, poisson_score};
use survmi_core::nalgebra::{DMatrix, DVector};
use survmi_core::{logistic_fit, poisson_fit, posterior_draw, GlmOptions, PriorSpec, Substream};

fn design_with_intercept<R: Rng>(r: &mut R, n: usize, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, k, |_, j| if j == 0 { 1.0 } else { normal(r) })
}

fn bernoulli_response<R: Rng>(r: &mut R, x: &DMatrix<f64>, coef: &[f64]) -> Vec<bool> {
    (0..x.nrows())
        .map(|i| {
            let lp: f64 = (0..x.ncols()).map(|j| x[(i, j)] * coef[j]).sum();
            r.random::<f64>() < expit(lp)
        })
        .collect()
}

#[test]
fn separated_data_with_prior_matches_grid_oracle() {
    let xs = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
    let x = DMatrix::from_column_slice(6, 1, &xs);
    let y: Vec<bool> = xs.iter().map(|&v| v > 0.0).collect();
    let prior = PriorSpec::weakly_informative();
    let fit = logistic_fit(&x, &y, &prior, &GlmOptions::default()).unwrap();
    assert!(fit.converged);
    assert!(fit.coef[0].is_finite());

    let obj = |b: f64| logistic_objective(&x, &y, &prior, &DVector::from_element(1, b));
    // Coarse grid locates the bracket; golden section refines inside it.
    let grid_best = (0..=5000).map(|i| i as f64 * 0.01).max_by(|a, b| obj(*a).total_cmp(&obj(*b))).unwrap();
    let oracle = golden_max(obj, grid_best - 0.02, grid_best + 0.02, 1e-10);
    assert!((fit.coef[0] - oracle).abs() < 1e-5, "{} vs {oracle}", fit.coef[0]);
}

#[test]
fn unpenalized_fit_matches_nelder_mead() {
    let x = DMatrix::from_row_slice(
        8,
        2,
        &[1.0, 0.3, -0.5, 1.2, 0.8, -0.4, 1.5, 0.9, -1.1, 0.2, 0.1, -1.3, 2.0, 0.4, -0.2, -0.8],
    );
    let y = [true, false, true, true, false, false, false, true];
    let none = PriorSpec::none();
    let fit = logistic_fit(&x, &y, &none, &GlmOptions::default()).unwrap();
    assert!(fit.converged);
    let oracle = nelder_mead_max(|b| logistic_objective(&x, &y, &none, &DVector::from_column_slice(b)), &[0.0, 0.0], 0.5);
    for (j, o) in oracle.iter().enumerate() {
        assert!((fit.coef[j] - o).abs() < 1e-5, "coef {j}: {} vs {o}", fit.coef[j]);
    }
}

/// Fisher scoring for the Poisson log-link model written out for two
/// parameters.
fn poisson_irls(x: &DMatrix<f64>, y: &[u32], offset: &[f64]) -> [f64; 2] {
    let mut b = [(y.iter().sum::<u32>() as f64 / offset.iter().map(|o| o.exp()).sum::<f64>()).ln(), 0.0];
    for _ in 0..100 {
        let (mut a11, mut a12, mut a22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..x.nrows() {
            let (x0, x1) = (x[(i, 0)], x[(i, 1)]);
            let mu = (offset[i] + b[0] * x0 + b[1] * x1).exp();
            let z = (y[i] as f64 - mu) / mu;
            a11 += mu * x0 * x0;
            a12 += mu * x0 * x1;
            a22 += mu * x1 * x1;
            r1 += mu * x0 * z;
            r2 += mu * x1 * z;
        }
        let det = a11 * a22 - a12 * a12;
        let d0 = (a22 * r1 - a12 * r2) / det;
        let d1 = (a11 * r2 - a12 * r1) / det;
        b = [b[0] + d0, b[1] + d1];
        if d0.abs().max(d1.abs()) < 1e-14 {
            break;
        }
    }
    b
}

#[test]
fn poisson_fit_matches_hand_irls() {
    let z = [0.5, -1.2, 0.3, 2.1, -0.4, 1.0, -2.0, 0.0, 0.7, 1.5, -0.9, 0.2];
    let y = [1, 0, 1, 3, 0, 2, 0, 1, 1, 2, 0, 1];
    let v = [1.2, 0.5, 2.0, 1.1, 0.3, 1.8, 0.9, 1.4, 2.5, 0.8, 1.0, 1.6];
    let offset: Vec<f64> = v.iter().map(|t: &f64| t.ln()).collect();
    let x = DMatrix::from_fn(12, 2, |i, j| if j == 0 { 1.0 } else { z[i] });
    let fit = poisson_fit(&x, &y, &offset, &GlmOptions::default()).unwrap();
    let oracle = poisson_irls(&x, &y, &offset);
    assert!(fit.converged);
    for (j, o) in oracle.iter().enumerate() {
        assert!((fit.coef[j] - o).abs() < 1e-6, "coef {j}");
    }
}

#[test]
fn scores_match_finite_differences() {
    let mut r = rng(31);
    let h = 1e-6;
    let prior = PriorSpec::weakly_informative();
    let x = design_with_intercept(&mut r, 40, 3);
    let yb = bernoulli_response(&mut r, &x, &[0.2, 1.0, -0.5]);
    let yc: Vec<u32> = (0..40).map(|_| r.random_range(0..4)).collect();
    let offset: Vec<f64> = (0..40).map(|_| r.random_range(-1.0..1.0)).collect();
    for _ in 0..20 {
        let b = DVector::from_fn(3, |_, _| r.random_range(-1.5..1.5));
        let gl = logistic_score(&x, &yb, &prior, &b);
        let gp = poisson_score(&x, &yc, &offset, &b);
        for j in 0..3 {
            let mut up = b.clone();
            up[j] += h;
            let mut dn = b.clone();
            dn[j] -= h;
            let fd_l = (logistic_objective(&x, &yb, &prior, &up) - logistic_objective(&x, &yb, &prior, &dn)) / (2.0 * h);
            let fd_p = (poisson_loglik(&x, &yc, &offset, &up) - poisson_loglik(&x, &yc, &offset, &dn)) / (2.0 * h);
            assert!((gl[j] - fd_l).abs() < 1e-6 * gl[j].abs().max(1.0));
            assert!((gp[j] - fd_p).abs() < 1e-6 * gp[j].abs().max(1.0));
        }
    }
}

#[test]
fn intercept_calibration_identities() {
    let mut r = rng(41);
    let x = design_with_intercept(&mut r, 300, 3);
    let y = bernoulli_response(&mut r, &x, &[-0.3, 0.8, 0.4]);
    let fit = logistic_fit(&x, &y, &PriorSpec::none(), &GlmOptions::default()).unwrap();
    let fitted: f64 = (0..300).map(|i| expit((x.row(i) * &fit.coef)[0])).sum();
    let observed = y.iter().filter(|&&v| v).count() as f64;
    assert!((fitted - observed).abs() < 1e-8);

    let offset: Vec<f64> = (0..300).map(|_| r.random_range(-0.5..1.5)).collect();
    let counts: Vec<u32> = (0..300).map(|i| ((offset[i] + 0.3 * x[(i, 1)]).exp() * r.random::<f64>() * 2.0) as u32).collect();
    let fit = poisson_fit(&x, &counts, &offset, &GlmOptions::default()).unwrap();
    let expected: f64 = (0..300).map(|i| (offset[i] + (x.row(i) * &fit.coef)[0]).exp()).sum();
    assert!((expected - counts.iter().sum::<u32>() as f64).abs() < 1e-8);
}

#[test]
fn poisson_rate_identity_with_log_time_offset() {
    let y = [0, 2, 1, 0, 3];
    let v: [f64; 5] = [1.5, 2.0, 0.7, 3.1, 2.2];
    let offset: Vec<f64> = v.iter().map(|t| t.ln()).collect();
    let fit = poisson_fit(&DMatrix::from_element(5, 1, 1.0), &y, &offset, &GlmOptions::default()).unwrap();
    let rate = 6.0 / v.iter().sum::<f64>();
    assert!((fit.coef[0].exp() - rate).abs() < 1e-10);
}

#[test]
fn posterior_draws_have_the_laplace_moments() {
    let mut r = rng(51);
    let x = design_with_intercept(&mut r, 200, 2);
    let y = bernoulli_response(&mut r, &x, &[0.5, -1.0]);
    let fit = logistic_fit(&x, &y, &PriorSpec::weakly_informative(), &GlmOptions::default()).unwrap();
    let mut draw_rng = Substream::new(9).rng();
    let n = 10_000;
    let draws: Vec<DVector<f64>> = (0..n).map(|_| posterior_draw(&fit, &mut draw_rng).unwrap()).collect();
    for j in 0..2 {
        let sd = fit.covariance[(j, j)].sqrt();
        let mean = draws.iter().map(|d| d[j]).sum::<f64>() / n as f64;
        assert!((mean - fit.coef[j]).abs() < 4.0 * sd / (n as f64).sqrt());
        let var = draws.iter().map(|d| (d[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // Sample variance of normal draws has relative SE sqrt(2 / n).
        assert!((var / sd.powi(2) - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
    }
}

#[test]
fn cauchy_prior_keeps_coefficients_finite_under_separation() {
    let mut r = rng(61);
    for _ in 0..10 {
        let x = design_with_intercept(&mut r, 20, 3);
        let y: Vec<bool> = (0..20).map(|i| x[(i, 1)] + 0.3 * x[(i, 2)] > 0.0).collect();
        let fit = logistic_fit(&x, &y, &PriorSpec::weakly_informative(), &GlmOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.coef.iter().all(|c| c.is_finite()));
        assert!(fit.covariance.iter().all(|c| c.is_finite()));
    }
}
