use std::collections::BTreeMap;

use proptest::prelude::*;
use survmi_core::nalgebra::{DMatrix, DVector};
use survmi_core::{
    cox_fit, cox_loglik, read_csv, rubin_combine, split_weighted, validate, write_csv, CoxOptions, CsvSchema, Dataset,
    DfRule, Rule, Status, Subject, TiePolicy,
};

fn status() -> impl Strategy<Value = Status> {
    prop_oneof![Just(Status::Event), Just(Status::Censored), Just(Status::Missing)]
}

prop_compose! {
    fn subject()(
        t in 0.01f64..100.0,
        st in status(),
        q in any::<bool>(),
        z in prop::collection::vec(-5.0f64..5.0, 2),
        x in prop::collection::vec(-5.0f64..5.0, 1),
    ) -> Subject {
        // Missing indicators only arise after a positive screen.
        Subject::new(t, st, q || st.is_missing(), z, x)
    }
}

fn dataset(max: usize) -> impl Strategy<Value = Dataset> {
    prop::collection::vec(subject(), 1..max).prop_map(|rows| Dataset::from_subjects(rows).unwrap())
}

fn schema() -> CsvSchema {
    CsvSchema::new("time", "status", "screen").baseline(["z1", "z2"]).screen_covariates(["x1"])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(ds in dataset(40)) {
        let mut buf = Vec::new();
        write_csv(&ds, &schema(), &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &schema()).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn generated_datasets_validate(ds in dataset(40)) {
        prop_assert!(validate(&ds).is_empty());
    }

    #[test]
    fn validation_flags_each_broken_row(ds in dataset(30), row in any::<prop::sample::Index>()) {
        let i = row.index(ds.len());
        let mut rows = ds.clone().into_subjects();
        rows[i].follow_time = -rows[i].follow_time;
        let broken = ds.with_subjects(rows).unwrap();
        let v = validate(&broken);
        prop_assert_eq!(v.len(), 1);
        prop_assert_eq!(v[0].row, i);
        prop_assert_eq!(v[0].rule, Rule::NonPositiveTime);
    }

    #[test]
    fn split_conserves_mass(ds in dataset(40), seed in any::<u64>()) {
        let probs: BTreeMap<usize, f64> = ds
            .missing_indices()
            .into_iter()
            .enumerate()
            .map(|(k, i)| (i, ((seed.wrapping_mul(k as u64 + 7) % 1001) as f64) / 1000.0))
            .collect();
        let split = split_weighted(&ds, &probs).unwrap();
        prop_assert!(!split.dataset().has_missing());
        prop_assert!((split.total_weight() - ds.len() as f64).abs() < 1e-9);
        prop_assert!(split.dataset().subjects().iter().all(|s| s.weight > 0.0));
    }

    #[test]
    fn rubin_permutation_invariance(
        est in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 2..12),
        var in prop::collection::vec(0.1f64..2.0, 12),
        rot in 0usize..12,
    ) {
        let m = est.len();
        let e: Vec<DVector<f64>> = est.iter().map(|v| DVector::from_column_slice(v)).collect();
        let c: Vec<DMatrix<f64>> = (0..m).map(|i| DMatrix::from_diagonal_element(2, 2, var[i])).collect();
        let a = rubin_combine(&e, &c, DfRule::Linear).unwrap();
        let k = rot % m;
        let (mut e2, mut c2) = (e.clone(), c.clone());
        e2.rotate_left(k);
        c2.rotate_left(k);
        let b = rubin_combine(&e2, &c2, DfRule::Linear).unwrap();
        prop_assert!((&a.beta_bar - &b.beta_bar).amax() < 1e-12);
        prop_assert!((&a.total_var - &b.total_var).amax() < 1e-12);
        let mf = m as f64;
        prop_assert_eq!(&a.total_var, &(&a.within_var + &a.between_var * (1.0 + 1.0 / mf)));
    }

    #[test]
    fn cox_loglik_ignores_row_order(ds in dataset(30), b0 in -1.0f64..1.0, b1 in -1.0f64..1.0) {
        let rows: Vec<Subject> = ds.subjects().iter().map(|s| {
            let mut s = s.clone();
            if s.status.is_missing() { s.status = Status::Censored; }
            s
        }).collect();
        prop_assume!(rows.iter().any(|s| s.status.is_event()));
        let ds = ds.with_subjects(rows).unwrap();
        let rev: Vec<usize> = (0..ds.len()).rev().collect();
        let beta = DVector::from_vec(vec![b0, b1]);
        let a = cox_loglik(&ds, &beta, TiePolicy::Breslow).unwrap();
        let b = cox_loglik(&ds.select(&rev), &beta, TiePolicy::Breslow).unwrap();
        prop_assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn constant_weights_leave_cox_estimate_unchanged(ds in dataset(40), w in 0.05f64..1.0) {
        let rows: Vec<Subject> = ds.subjects().iter().map(|s| {
            let mut s = s.clone();
            if s.status.is_missing() { s.status = Status::Event; }
            s
        }).collect();
        let ds = ds.with_subjects(rows).unwrap();
        let plain = cox_fit(&ds, &CoxOptions::default());
        let scaled = cox_fit(
            &ds.with_subjects(ds.subjects().iter().map(|s| s.clone().with_weight(w)).collect()).unwrap(),
            &CoxOptions::default(),
        );
        if let (Ok(a), Ok(b)) = (plain, scaled) {
            if a.converged && b.converged {
                prop_assert!((&a.beta - &b.beta).amax() < 1e-6 * a.beta.amax().max(1.0));
            }
        }
    }
}
