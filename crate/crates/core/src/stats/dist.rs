use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    #[default]
    TwoSided,
    /// H1: estimate > 0.
    Greater,
}

/// p-value of a t statistic with `df` degrees of freedom.
pub fn t_pvalue(t: f64, df: f64, side: Sidedness) -> f64 {
    if t.is_nan() || !(df > 0.0) {
        return f64::NAN;
    }
    if t.is_infinite() {
        return match (side, t > 0.0) {
            (Sidedness::TwoSided, _) | (Sidedness::Greater, true) => 0.0,
            (Sidedness::Greater, false) => 1.0,
        };
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    let p = match side {
        Sidedness::TwoSided => 2.0 * dist.sf(t.abs()),
        Sidedness::Greater => dist.sf(t),
    };
    p.clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test of `sample` against Uniform(0, 1).
/// Returns `(D, p)` with the asymptotic Kolmogorov distribution and the
/// Stephens small-sample correction.
pub fn ks_uniform(sample: &[f64]) -> (f64, f64) {
    let mut v: Vec<f64> = sample.iter().copied().filter(|x| !x.is_nan()).collect();
    let n = v.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    v.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / nf - x).max(x - i as f64 / nf)
        })
        .fold(0.0, f64::max);
    let sqrt_n = nf.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    (d, kolmogorov_sf(lambda))
}

/// `P(K > λ)` for the Kolmogorov distribution.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
