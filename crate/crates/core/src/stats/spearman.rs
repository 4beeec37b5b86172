use crate::error::{Error, Result};
use crate::isc::pearson_corr;
use crate::scalar::Scalar;

use super::dist::{t_pvalue, Sidedness};

/// 1-based ranks; ties share the average of the ranks they span.
pub fn average_ranks<T: Scalar>(x: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].partial_cmp(&x[j]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![T::zero(); x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = T::from_count(start + 1 + end) / T::lit(2.0);
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman correlation with a t-approximation p-value (df = n - 2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpearmanResult<T> {
    pub rho: T,
    pub p: T,
    /// `sqrt((1 - rho²)/(n - 2))`, the scale of the t statistic.
    pub se: T,
    pub df: T,
}

pub fn spearman_rho<T: Scalar>(x: &[T], y: &[T]) -> Result<SpearmanResult<T>> {
    spearman_rho_sided(x, y, Sidedness::TwoSided)
}

pub fn spearman_rho_sided<T: Scalar>(x: &[T], y: &[T], side: Sidedness) -> Result<SpearmanResult<T>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 4 {
        return Err(Error::TooShort {
            needed: 4,
            got: x.len(),
        });
    }
    let rho = pearson_corr(&average_ranks(x), &average_ranks(y))?
        .ok_or_else(|| Error::ConstantInput("spearman input has no variation".into()))?;
    let df = x.len() - 2;
    let dff = T::from_count(df);
    let se = ((T::one() - rho * rho).max(T::zero()) / dff).sqrt();
    let t = if se > T::zero() {
        (rho / se).to_f64_lossy()
    } else {
        rho.signum().to_f64_lossy() * f64::INFINITY
    };
    Ok(SpearmanResult {
        rho,
        p: T::lit(t_pvalue(t, df as f64, side)),
        se,
        df: dff,
    })
}
