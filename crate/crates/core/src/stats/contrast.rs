//! Planned contrasts over estimated marginal means of one factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::design::Design;
use super::dist::Sidedness;
use super::{CoefTable, TermResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    pub name: String,
    /// `(level, weight)` pairs; unlisted levels get weight 0.
    pub weights: Vec<(String, f64)>,
}

impl Contrast {
    pub fn new(name: impl Into<String>, weights: &[(&str, f64)]) -> Self {
        Self {
            name: name.into(),
            weights: weights.iter().map(|&(l, w)| (l.to_string(), w)).collect(),
        }
    }

    /// `+1` on `hi`, `-1` on `lo`.
    pub fn difference(hi: &str, lo: &str) -> Self {
        Self::new(format!("{hi}-{lo}"), &[(hi, 1.0), (lo, -1.0)])
    }

    pub fn is_balanced(&self) -> bool {
        self.weights.iter().map(|(_, w)| w).sum::<f64>().abs() < 1e-12
    }
}

/// The three centrality-category comparisons.
pub fn category_contrasts() -> Vec<Contrast> {
    vec![
        Contrast::difference("HH", "LL"),
        Contrast::difference("HH", "LH"),
        Contrast::difference("LH", "LL"),
    ]
}

/// One EMM design row per level of `factor`: intercept 1, the level's dummy
/// set, every other column at its mean.
pub fn emm_rows<T: Scalar>(design: &Design<T>, factor: &str) -> Result<Vec<(String, Vec<T>)>> {
    let block = design.factor(factor).ok_or_else(|| Error::MissingLevel {
        factor: factor.to_string(),
        level: "(any)".to_string(),
    })?;
    let mut base = design.column_means.clone();
    base[0] = T::one();
    for c in block.level_columns.iter().flatten() {
        base[*c] = T::zero();
    }
    Ok(block
        .levels
        .iter()
        .zip(&block.level_columns)
        .map(|(level, col)| {
            let mut row = base.clone();
            if let Some(c) = col {
                row[*c] = T::one();
            }
            (level.clone(), row)
        })
        .collect())
}

/// Coefficient combination `L` induced by a contrast over the EMMs.
pub fn contrast_vector<T: Scalar>(design: &Design<T>, factor: &str, contrast: &Contrast) -> Result<Vec<T>> {
    if !contrast.is_balanced() {
        return Err(Error::UnbalancedContrast(contrast.name.clone()));
    }
    let rows = emm_rows(design, factor)?;
    let mut l = vec![T::zero(); design.k()];
    for (level, w) in &contrast.weights {
        let (_, row) = rows
            .iter()
            .find(|(name, _)| name == level)
            .ok_or_else(|| Error::MissingLevel {
                factor: factor.to_string(),
                level: level.clone(),
            })?;
        for (lj, &rj) in l.iter_mut().zip(row) {
            *lj = *lj + T::lit(*w) * rj;
        }
    }
    Ok(l)
}

/// Estimated marginal mean of each level with its standard error.
pub fn emms<T: Scalar>(coef: &CoefTable<T>, design: &Design<T>, factor: &str) -> Result<Vec<(String, T, T)>> {
    Ok(emm_rows(design, factor)?
        .into_iter()
        .map(|(level, row)| {
            let (est, se, _) = coef.combination(&row, Sidedness::TwoSided);
            (level, est, se)
        })
        .collect())
}

/// t test of each contrast with the coefficient table's df.
pub fn planned_contrasts<T: Scalar>(
    coef: &CoefTable<T>,
    design: &Design<T>,
    factor: &str,
    contrasts: &[Contrast],
    side: Sidedness,
    n: usize,
) -> Result<Vec<TermResult<T>>> {
    contrasts
        .iter()
        .map(|c| {
            let l = contrast_vector(design, factor, c)?;
            let (b, se, p) = coef.combination(&l, side);
            Ok(TermResult {
                term: c.name.clone(),
                b,
                se,
                df: coef.df,
                p,
                n,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::design::{DesignSpec, Frame};
    use crate::stats::ols::OlsFit;

    fn fit(y: Vec<f64>, covariate: Option<Vec<f64>>) -> (OlsFit<f64>, Design<f64>) {
        let n = y.len();
        let mut f = Frame::new(n);
        f.push_numeric("y", y).unwrap();
        f.push_factor(
            "cat",
            vec!["LL".into(), "LH".into(), "HH".into()],
            (0..n).map(|i| i % 3).collect(),
        )
        .unwrap();
        let mut spec = DesignSpec::new("y", &["cat"]).standardized(false);
        if let Some(c) = covariate {
            f.push_numeric("c", c).unwrap();
            spec = spec.with_covariates(&["c"]);
        }
        let d = spec.design(&f).unwrap();
        let y = spec.response(&f).unwrap();
        (OlsFit::fit(&d, &y).unwrap(), d)
    }

    #[test]
    fn equal_cell_means_give_zero_contrasts() {
        let y = vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 0.5, 0.5, 0.5, 1.5, 1.5, 1.5];
        let (f, d) = fit(y, None);
        let r = planned_contrasts(&f.coef, &d, "cat", &category_contrasts(), Sidedness::TwoSided, 12).unwrap();
        for t in r {
            assert!(t.b.abs() < 1e-12);
        }
    }

    #[test]
    fn category_only_contrast_is_cell_mean_difference() {
        let y = vec![1.0, 2.0, 4.0, 1.5, 2.5, 5.0, 0.5, 1.5, 3.0, 1.0, 2.0, 4.0];
        let (f, d) = fit(y.clone(), None);
        let cell = |c: usize| {
            let v: Vec<f64> = y
                .iter()
                .enumerate()
                .filter(|(i, _)| i % 3 == c)
                .map(|(_, &v)| v)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let r = planned_contrasts(&f.coef, &d, "cat", &category_contrasts(), Sidedness::TwoSided, 12).unwrap();
        assert!((r[0].b - (cell(2) - cell(0))).abs() < 1e-12);
        assert!((r[1].b - (cell(2) - cell(1))).abs() < 1e-12);
        assert!((r[2].b - (cell(1) - cell(0))).abs() < 1e-12);
    }

    #[test]
    fn contrasts_are_linear() {
        let y = vec![0.3, 1.2, 2.0, 0.1, 1.0, 2.4, 0.0, 0.9, 1.8, 0.4, 1.1, 2.2];
        let c = vec![0.5, -1.0, 0.2, 1.4, -0.3, 0.8, -0.6, 0.1, 0.9, -1.2, 0.0, 0.3];
        let (f, d) = fit(y, Some(c));
        let r = planned_contrasts(&f.coef, &d, "cat", &category_contrasts(), Sidedness::TwoSided, 12).unwrap();
        assert!((r[0].b - (r[1].b + r[2].b)).abs() < 1e-12);
    }

    #[test]
    fn missing_level_and_unbalanced() {
        let y = vec![0.3, 1.2, 2.0, 0.1, 1.0, 2.4];
        let (f, d) = fit(y, None);
        let bad = Contrast::difference("HH", "XX");
        assert_eq!(
            planned_contrasts(&f.coef, &d, "cat", &[bad], Sidedness::TwoSided, 6),
            Err(Error::MissingLevel {
                factor: "cat".into(),
                level: "XX".into()
            })
        );
        let unbalanced = Contrast::new("HH", &[("HH", 1.0)]);
        assert_eq!(
            planned_contrasts(&f.coef, &d, "cat", &[unbalanced], Sidedness::TwoSided, 6),
            Err(Error::UnbalancedContrast("HH".into()))
        );
    }
}
