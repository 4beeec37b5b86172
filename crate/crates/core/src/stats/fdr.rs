use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Benjamini-Hochberg step-up adjusted p-values, in input order.
pub fn bh_fdr<T: Scalar>(p: &[T]) -> Result<Vec<T>> {
    if let Some(&bad) = p.iter().find(|&&x| !(x >= T::zero() && x <= T::one())) {
        return Err(Error::InvalidProbability(bad.to_f64_lossy()));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p[i].partial_cmp(&p[j]).expect("validated").then(i.cmp(&j)));

    let mf = T::from_count(m);
    let mut adjusted = vec![T::zero(); m];
    let mut running = T::one();
    for (rank0, &i) in order.iter().enumerate().rev() {
        let q = p[i] * mf / T::from_count(rank0 + 1);
        running = running.min(q);
        adjusted[i] = running;
    }
    Ok(adjusted)
}
