#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use survmi_core::{Dataset, Status, Subject};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Random right-censored data with `p` baseline covariates. With `ties`,
/// times are rounded so that tied event and censoring times occur.
pub fn random_survival<R: Rng>(rng: &mut R, n: usize, p: usize, ties: bool, weighted: bool) -> Dataset {
    let rows = (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..p).map(|_| normal(rng)).collect();
            let lp: f64 = z.iter().map(|v| 0.5 * v).sum();
            let u = 1.0 - rng.random::<f64>();
            let mut t = 0.01 - u.ln() / lp.exp();
            if ties {
                t = (t * 4.0).ceil() / 4.0;
            }
            let status = Status::from_event(rng.random::<f64>() < 0.7);
            let w = if weighted { 0.2 + 0.8 * rng.random::<f64>() } else { 1.0 };
            Subject::new(t, status, true, z, vec![]).with_weight(w)
        })
        .collect();
    Dataset::from_subjects(rows).unwrap()
}

/// Maximizer of a unimodal function on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Nelder–Mead maximization, restarted until the simplex stops moving.
pub fn nelder_mead_max(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64) -> Vec<f64> {
    let n = x0.len();
    let neg = |x: &[f64]| -f(x);
    let mut best = x0.to_vec();
    for _ in 0..20 {
        let mut simplex: Vec<Vec<f64>> = vec![best.clone()];
        for i in 0..n {
            let mut v = best.clone();
            v[i] += step;
            simplex.push(v);
        }
        let mut vals: Vec<f64> = simplex.iter().map(|v| neg(v)).collect();
        for _ in 0..20_000 {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            vals = order.iter().map(|&i| vals[i]).collect();
            if (vals[n] - vals[0]).abs() < 1e-15 {
                break;
            }
            let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64).collect();
            let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (simplex[n][k] - centroid[k])).collect() };
            let xr = along(-1.0);
            let fr = neg(&xr);
            if fr < vals[0] {
                let xe = along(-2.0);
                let fe = neg(&xe);
                if fe < fr {
                    simplex[n] = xe;
                    vals[n] = fe;
                } else {
                    simplex[n] = xr;
                    vals[n] = fr;
                }
            } else if fr < vals[n - 1] {
                simplex[n] = xr;
                vals[n] = fr;
            } else {
                let xc = along(0.5);
                let fc = neg(&xc);
                if fc < vals[n] {
                    simplex[n] = xc;
                    vals[n] = fc;
                } else {
                    for i in 1..=n {
                        simplex[i] = (0..n).map(|k| 0.5 * (simplex[0][k] + simplex[i][k])).collect();
                        vals[i] = neg(&simplex[i]);
                    }
                }
            }
        }
        let moved = simplex[0].iter().zip(&best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        best = simplex[0].clone();
        if moved < 1e-10 {
            break;
        }
    }
    best
}
