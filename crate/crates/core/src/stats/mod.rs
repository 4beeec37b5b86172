//! Inferential engine: standardized OLS, Spearman, Benjamini-Hochberg,
//! crossed random-intercept mixed models on role-doubled dyadic data, and
//! planned contrasts over estimated marginal means.

pub mod contrast;
pub mod design;
pub mod dist;
pub mod fdr;
pub mod lmm;
pub mod ols;
pub mod optim;
pub mod spearman;
pub mod sweep;

use serde::Serialize;

use crate::linalg::Matrix;
use crate::scalar::Scalar;

use self::design::INTERCEPT;
use self::dist::{t_pvalue, Sidedness};

/// Fixed-effect estimates with their covariance and inferential df.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefTable<T> {
    pub names: Vec<String>,
    pub beta: Vec<T>,
    pub cov_beta: Matrix<T>,
    pub df: T,
}

impl<T: Scalar> CoefTable<T> {
    pub fn se(&self, j: usize) -> T {
        self.cov_beta[(j, j)].max(T::zero()).sqrt()
    }

    /// Estimate, SE and p for the linear combination `l·β`.
    pub fn combination(&self, l: &[T], side: Sidedness) -> (T, T, T) {
        let est = crate::linalg::dot(l, &self.beta);
        let se = self.cov_beta.quad_form(l).max(T::zero()).sqrt();
        let t = (est / se).to_f64_lossy();
        let p = t_pvalue(t, self.df.to_f64_lossy(), side);
        (est, se, T::lit(p))
    }

    /// t tests for every non-intercept column.
    pub fn term_results(&self, n: usize, side: Sidedness) -> Vec<TermResult<T>> {
        (0..self.names.len())
            .filter(|&j| self.names[j] != INTERCEPT)
            .map(|j| {
                let mut l = vec![T::zero(); self.names.len()];
                l[j] = T::one();
                let (b, se, p) = self.combination(&l, side);
                TermResult {
                    term: self.names[j].clone(),
                    b,
                    se,
                    df: self.df,
                    p,
                    n,
                }
            })
            .collect()
    }
}

/// One estimate from a single region's model before FDR.
#[derive(Debug, Clone, PartialEq)]
pub struct TermResult<T> {
    pub term: String,
    pub b: T,
    pub se: T,
    pub df: T,
    pub p: T,
    pub n: usize,
}

/// Per-region inferential result for a named model and term or contrast.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionStats<T> {
    pub region: String,
    pub model: String,
    pub term: String,
    #[serde(rename = "B")]
    pub b: T,
    #[serde(rename = "SE")]
    pub se: T,
    pub df: T,
    pub p_raw: T,
    pub p_fdr: T,
    pub n: usize,
}
