//! Reference-distribution helpers for Wald and t-based inference.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// Beyond this many degrees of freedom the t and normal quantiles agree to
/// well under 1e-6 and the normal is used directly.
const NORMAL_DF: f64 = 1e7;
/// Above this the numerical t inverse loses accuracy and an asymptotic
/// expansion in `1/df` is used instead (error below 1e-12).
const EXPANSION_DF: f64 = 1e4;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// Quantile of Student's t; `df = +inf` gives the normal quantile.
pub fn t_quantile(p: f64, df: f64) -> f64 {
    if !df.is_finite() || df > NORMAL_DF {
        return normal_quantile(p);
    }
    if df > EXPANSION_DF {
        let z = normal_quantile(p);
        let z2 = z * z;
        let g1 = z * (z2 + 1.0) / 4.0;
        let g2 = z * ((5.0 * z2 + 16.0) * z2 + 3.0) / 96.0;
        let g3 = z * (((3.0 * z2 + 19.0) * z2 + 17.0) * z2 - 15.0) / 384.0;
        return z + g1 / df + g2 / (df * df) + g3 / (df * df * df);
    }
    StudentsT::new(0.0, 1.0, df).expect("positive df").inverse_cdf(p)
}

/// Two-sided p-value of `stat` against t(df); `df = +inf` uses the normal.
pub fn two_sided_p(stat: f64, df: f64) -> f64 {
    if stat.is_nan() {
        return f64::NAN;
    }
    let upper = if !df.is_finite() || df > NORMAL_DF {
        std_normal().sf(stat.abs())
    } else {
        StudentsT::new(0.0, 1.0, df).expect("positive df").sf(stat.abs())
    };
    (2.0 * upper).min(1.0)
}

/// Multiplier for a two-sided interval at confidence `level`.
pub fn critical_value(level: f64, df: f64) -> f64 {
    t_quantile(0.5 * (1.0 + level), df)
}
