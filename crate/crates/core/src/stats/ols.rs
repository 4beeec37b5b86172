use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky};
use crate::scalar::Scalar;

use super::design::{Design, DesignSpec, Frame};
use super::dist::Sidedness;
use super::{CoefTable, TermResult};

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit<T> {
    pub coef: CoefTable<T>,
    pub sigma2: T,
    pub rss: T,
    pub n: usize,
}

impl<T: Scalar> OlsFit<T> {
    /// Least squares with `σ̂²(XᵀX)⁻¹` covariance and `n - k` df.
    pub fn fit(design: &Design<T>, y: &[T]) -> Result<Self> {
        let (n, k) = (design.n(), design.k());
        if y.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: y.len(),
            });
        }
        if n < k + 2 {
            return Err(Error::TooFewRows {
                needed: k + 2,
                k,
                got: n,
            });
        }
        let xtx = design.x.gram();
        let chol = Cholesky::new(&xtx).map_err(|_| Error::RankDeficient(design.names.clone()))?;
        let beta = chol.solve(&design.x.tr_matvec(y));
        let fitted = design.x.matvec(&beta);
        let resid: Vec<T> = y.iter().zip(&fitted).map(|(&a, &b)| a - b).collect();
        let rss = dot(&resid, &resid);
        let df = n - k;
        let sigma2 = rss / T::from_count(df);
        let inv = chol.inverse();
        let mut cov = inv;
        for i in 0..k {
            for j in 0..k {
                cov[(i, j)] = cov[(i, j)] * sigma2;
            }
        }
        Ok(Self {
            coef: CoefTable {
                names: design.names.clone(),
                beta,
                cov_beta: cov,
                df: T::from_count(df),
            },
            sigma2,
            rss,
            n,
        })
    }

    /// Per-column t tests, intercept excluded.
    pub fn term_results(&self, side: Sidedness) -> Vec<TermResult<T>> {
        self.coef.term_results(self.n, side)
    }
}

/// Fit `spec` on `frame` and return one result per non-intercept column.
pub fn ols_fit<T: Scalar>(frame: &Frame<T>, spec: &DesignSpec) -> Result<Vec<TermResult<T>>> {
    let design = spec.design(frame)?;
    let y = spec.response(frame)?;
    Ok(OlsFit::fit(&design, &y)?.term_results(Sidedness::TwoSided))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isc::pearson_corr;

    #[test]
    fn perfect_fit() {
        let mut f = Frame::<f64>::new(5);
        let v = vec![1.0, 4.0, 2.0, 8.0, 5.0];
        f.push_numeric("y", v.clone()).unwrap();
        f.push_numeric("x", v).unwrap();
        let spec = DesignSpec::new("y", &["x"]);
        let fit = OlsFit::fit(&spec.design(&f).unwrap(), &spec.response(&f).unwrap()).unwrap();
        assert!((fit.coef.beta[1] - 1.0).abs() < 1e-12);
        assert!(fit.rss.abs() < 1e-20);
    }

    #[test]
    fn orthogonal_predictor_gives_zero() {
        let mut f = Frame::<f64>::new(4);
        f.push_numeric("y", vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        f.push_numeric("x", vec![1.0, 1.0, -1.0, -1.0]).unwrap();
        let r = ols_fit(&f, &DesignSpec::new("y", &["x"])).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0].b.abs() < 1e-12);
    }

    #[test]
    fn standardized_slope_equals_pearson() {
        let x = vec![0.3, 1.2, -0.4, 2.2, 0.9, -1.1, 0.0];
        let y = vec![1.0, 2.5, 0.1, 2.9, 1.1, -0.2, 0.8];
        let mut f = Frame::<f64>::new(7);
        f.push_numeric("y", y.clone()).unwrap();
        f.push_numeric("x", x.clone()).unwrap();
        let r = ols_fit(&f, &DesignSpec::new("y", &["x"])).unwrap();
        let rho = pearson_corr(&x, &y).unwrap().unwrap();
        assert!((r[0].b - rho).abs() < 1e-12);
        assert_eq!(r[0].df, 5.0);
    }

    #[test]
    fn too_few_rows() {
        let mut f = Frame::<f64>::new(3);
        f.push_numeric("y", vec![1.0, 2.0, 4.0]).unwrap();
        f.push_numeric("x", vec![1.0, 3.0, 2.0]).unwrap();
        assert!(matches!(
            ols_fit(&f, &DesignSpec::new("y", &["x"])),
            Err(Error::TooFewRows { .. })
        ));
    }
}
