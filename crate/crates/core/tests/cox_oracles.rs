mod common;

use common::{golden_max, random_survival, rng};
use rand::Rng;
use survmi_core::nalgebra::DVector;
use survmi_core::{cox_fit, cox_loglik, cox_score_hessian, CoxOptions, Dataset, Status, Subject, TiePolicy};

/// Breslow log partial likelihood by direct summation over the risk sets.
fn direct_loglik(ds: &Dataset, beta: &[f64]) -> f64 {
    let eta = |s: &Subject| s.baseline.iter().zip(beta).map(|(z, b)| z * b).sum::<f64>();
    let mut ll = 0.0;
    for i in ds.subjects().iter().filter(|s| s.status.is_event()) {
        let denom: f64 = ds
            .subjects()
            .iter()
            .filter(|j| j.follow_time >= i.follow_time)
            .map(|j| j.weight * eta(j).exp())
            .sum();
        ll += i.weight * (eta(i) - denom.ln());
    }
    ll
}

fn ll(ds: &Dataset, beta: &[f64]) -> f64 {
    cox_loglik(ds, &DVector::from_column_slice(beta), TiePolicy::Breslow).unwrap()
}

#[test]
fn loglik_matches_direct_sum_on_four_subjects() {
    let ds = Dataset::from_subjects(vec![
        Subject::new(1.0, Status::Event, true, vec![0.3, -1.0], vec![]),
        Subject::new(2.0, Status::Event, true, vec![-0.7, 0.5], vec![]),
        Subject::new(2.0, Status::Censored, true, vec![1.1, 0.2], vec![]),
        Subject::new(3.5, Status::Event, true, vec![0.0, 2.0], vec![]),
    ])
    .unwrap();
    for beta in [[0.0, 0.0], [0.4, -0.2], [-1.3, 0.9], [2.0, 1.0]] {
        assert!((ll(&ds, &beta) - direct_loglik(&ds, &beta)).abs() < 1e-12, "beta {beta:?}");
    }
}

#[test]
fn loglik_matches_direct_sum_with_ties_and_weights() {
    let mut r = rng(11);
    for _ in 0..20 {
        let ds = random_survival(&mut r, 25, 2, true, true);
        let beta = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let (a, b) = (ll(&ds, &beta), direct_loglik(&ds, &beta));
        assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn gradient_and_hessian_match_finite_differences() {
    let mut r = rng(7);
    let h = 1e-5;
    for instance in 0..20 {
        let ds = random_survival(&mut r, 30, 3, instance % 2 == 0, instance % 3 == 0);
        let beta: Vec<f64> = (0..3).map(|_| r.random_range(-0.8..0.8)).collect();
        let (grad, hess) = cox_score_hessian(&ds, &DVector::from_vec(beta.clone()), TiePolicy::Breslow).unwrap();
        for j in 0..3 {
            let shifted = |d: f64| {
                let mut b = beta.clone();
                b[j] += d;
                b
            };
            let fd = (ll(&ds, &shifted(h)) - ll(&ds, &shifted(-h))) / (2.0 * h);
            assert!((grad[j] - fd).abs() <= 1e-6 * grad[j].abs().max(1.0), "instance {instance} grad {j}");
            let g = |d: f64| cox_score_hessian(&ds, &DVector::from_vec(shifted(d)), TiePolicy::Breslow).unwrap().0;
            let fd_col = (g(h) - g(-h)) / (2.0 * h);
            for k in 0..3 {
                assert!((hess[(k, j)] - fd_col[k]).abs() <= 1e-6 * hess[(k, j)].abs().max(1.0), "instance {instance} hess");
            }
        }
    }
}

#[test]
fn fit_matches_golden_section_on_six_subjects() {
    let mut r = rng(3);
    let mut checked = 0;
    while checked < 10 {
        let rows = (0..6)
            .map(|i| {
                let z = r.random_range(-1.5..1.5);
                let t = r.random_range(0.1..5.0);
                Subject::new(t, Status::from_event(i % 2 == 0 || r.random::<bool>()), true, vec![z], vec![])
            })
            .collect();
        let ds = Dataset::from_subjects(rows).unwrap();
        let fit = cox_fit(&ds, &CoxOptions::default()).unwrap();
        if !fit.converged {
            // Monotone likelihood: no finite maximizer to compare against.
            assert!(fit.monotone_likelihood);
            continue;
        }
        let oracle = golden_max(|b| ll(&ds, &[b]), -30.0, 30.0, 1e-10);
        assert!((fit.beta[0] - oracle).abs() < 1e-5, "{} vs {oracle}", fit.beta[0]);
        checked += 1;
    }
}

#[test]
fn fitted_score_vanishes_and_covariance_inverts_information() {
    let ds = random_survival(&mut rng(21), 200, 2, true, false);
    let fit = cox_fit(&ds, &CoxOptions::default()).unwrap();
    assert!(fit.converged);
    let (g, h) = cox_score_hessian(&ds, &fit.beta, TiePolicy::Breslow).unwrap();
    assert!(g.amax() < 1e-6);
    let prod = &fit.covariance * (-h);
    assert!((prod - survmi_core::nalgebra::DMatrix::identity(2, 2)).amax() < 1e-9);
}

#[test]
fn integer_weights_equal_duplication() {
    let mut r = rng(5);
    let base = random_survival(&mut r, 40, 2, true, false);
    let counts: Vec<usize> = (0..base.len()).map(|_| r.random_range(1..4)).collect();
    let weighted = base
        .with_subjects(base.subjects().iter().zip(&counts).map(|(s, &k)| s.clone().with_weight(k as f64)).collect())
        .unwrap();
    let dup: Vec<usize> = counts.iter().enumerate().flat_map(|(i, &k)| std::iter::repeat_n(i, k)).collect();
    let duplicated = base.select(&dup);
    let a = cox_fit(&weighted, &CoxOptions::default()).unwrap();
    let b = cox_fit(&duplicated, &CoxOptions::default()).unwrap();
    assert!((&a.beta - &b.beta).amax() < 1e-10);
    assert!((&a.covariance - &b.covariance).amax() < 1e-10);
    assert!((a.loglik - b.loglik).abs() < 1e-9 * b.loglik.abs());
}

#[test]
fn covariate_shift_and_scale() {
    let ds = random_survival(&mut rng(8), 120, 1, false, false);
    let fit = cox_fit(&ds, &CoxOptions::default()).unwrap();
    let moved = ds
        .with_subjects(
            ds.subjects()
                .iter()
                .map(|s| {
                    let mut s = s.clone();
                    s.baseline[0] = 3.0 * s.baseline[0] + 10.0;
                    s
                })
                .collect(),
        )
        .unwrap();
    let refit = cox_fit(&moved, &CoxOptions::default()).unwrap();
    assert!((refit.beta[0] * 3.0 - fit.beta[0]).abs() < 1e-8);
    assert!((refit.std_errors()[0] * 3.0 - fit.std_errors()[0]).abs() < 1e-8);
}

#[test]
fn row_order_does_not_matter() {
    let ds = random_survival(&mut rng(9), 60, 2, true, true);
    let rev: Vec<usize> = (0..ds.len()).rev().collect();
    let a = cox_fit(&ds, &CoxOptions::default()).unwrap();
    let b = cox_fit(&ds.select(&rev), &CoxOptions::default()).unwrap();
    assert!((&a.beta - &b.beta).amax() < 1e-12);
}
