//! Named columns and their expansion into a fixed-effects design matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dependent_columns, Matrix};
use crate::scalar::{zscore, Scalar};

pub const INTERCEPT: &str = "(intercept)";

#[derive(Debug, Clone, PartialEq)]
pub enum Column<T> {
    Numeric(Vec<T>),
    /// Codes index `levels`; `levels[0]` is the reference level.
    Factor {
        levels: Vec<String>,
        codes: Vec<usize>,
    },
}

impl<T> Column<T> {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Factor { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Column store with equal-length named columns, kept in insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Frame<T> {
    n_rows: usize,
    columns: Vec<(String, Column<T>)>,
}

impl<T: Scalar> Frame<T> {
    pub fn new(n_rows: usize) -> Self {
        Self {
            n_rows,
            columns: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    pub fn push(&mut self, name: impl Into<String>, column: Column<T>) -> Result<&mut Self> {
        let name = name.into();
        if column.len() != self.n_rows {
            return Err(Error::LengthMismatch {
                left: self.n_rows,
                right: column.len(),
            });
        }
        if let Column::Factor { levels, codes } = &column {
            if let Some(&bad) = codes.iter().find(|&&c| c >= levels.len()) {
                return Err(Error::InvalidSpec(format!("factor `{name}` code {bad} has no level")));
            }
        }
        match self.columns.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = column,
            None => self.columns.push((name, column)),
        }
        Ok(self)
    }

    pub fn push_numeric(&mut self, name: impl Into<String>, values: Vec<T>) -> Result<&mut Self> {
        self.push(name, Column::Numeric(values))
    }

    pub fn push_factor(
        &mut self,
        name: impl Into<String>,
        levels: Vec<String>,
        codes: Vec<usize>,
    ) -> Result<&mut Self> {
        self.push(name, Column::Factor { levels, codes })
    }

    pub fn get(&self, name: &str) -> Result<&Column<T>> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn numeric(&self, name: &str) -> Result<&[T]> {
        match self.get(name)? {
            Column::Numeric(v) => Ok(v),
            Column::Factor { .. } => Err(Error::InvalidSpec(format!("column `{name}` is a factor"))),
        }
    }

    /// Keep the listed rows, in order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let columns = self
            .columns
            .iter()
            .map(|(n, c)| {
                let c = match c {
                    Column::Numeric(v) => Column::Numeric(rows.iter().map(|&i| v[i]).collect()),
                    Column::Factor { levels, codes } => Column::Factor {
                        levels: levels.clone(),
                        codes: rows.iter().map(|&i| codes[i]).collect(),
                    },
                };
                (n.clone(), c)
            })
            .collect();
        Self {
            n_rows: rows.len(),
            columns,
        }
    }

    /// Each row repeated `times` times consecutively.
    pub fn repeat_rows(&self, times: usize) -> Self {
        let rows: Vec<usize> = (0..self.n_rows)
            .flat_map(|i| std::iter::repeat(i).take(times))
            .collect();
        self.subset(&rows)
    }
}

/// Model specification: a response plus ordered fixed terms and covariates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub response: String,
    pub fixed_terms: Vec<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default = "yes")]
    pub standardize: bool,
}

fn yes() -> bool {
    true
}

impl DesignSpec {
    pub fn new(response: impl Into<String>, fixed_terms: &[&str]) -> Self {
        Self {
            response: response.into(),
            fixed_terms: fixed_terms.iter().map(|s| s.to_string()).collect(),
            covariates: Vec::new(),
            standardize: true,
        }
    }

    pub fn with_covariates(mut self, covariates: &[&str]) -> Self {
        self.covariates = covariates.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn standardized(mut self, standardize: bool) -> Self {
        self.standardize = standardize;
        self
    }

    /// Fixed terms followed by covariates.
    pub fn terms(&self) -> impl Iterator<Item = &String> {
        self.fixed_terms.iter().chain(&self.covariates)
    }

    /// Expand the terms of `frame` into a design matrix with an intercept.
    pub fn design<T: Scalar>(&self, frame: &Frame<T>) -> Result<Design<T>> {
        let mut seen = std::collections::BTreeSet::new();
        for t in self.terms() {
            if !seen.insert(t.as_str()) || *t == self.response {
                return Err(Error::DuplicateTerm(t.clone()));
            }
        }
        let n = frame.n_rows();
        let mut columns: Vec<Vec<T>> = vec![vec![T::one(); n]];
        let mut names = vec![INTERCEPT.to_string()];
        let mut term_of = vec![INTERCEPT.to_string()];
        let mut factors = Vec::new();

        for term in self.terms() {
            match frame.get(term)? {
                Column::Numeric(v) => {
                    let v = if self.standardize {
                        zscore(v).ok_or_else(|| Error::RankDeficient(vec![term.clone()]))?
                    } else {
                        v.clone()
                    };
                    columns.push(v);
                    names.push(term.clone());
                    term_of.push(term.clone());
                }
                Column::Factor { levels, codes } => {
                    let mut level_columns = vec![None];
                    for (li, level) in levels.iter().enumerate().skip(1) {
                        level_columns.push(Some(columns.len()));
                        columns.push(
                            codes
                                .iter()
                                .map(|&c| if c == li { T::one() } else { T::zero() })
                                .collect(),
                        );
                        names.push(format!("{term}[{level}]"));
                        term_of.push(term.clone());
                    }
                    factors.push(FactorBlock {
                        name: term.clone(),
                        levels: levels.clone(),
                        level_columns,
                    });
                }
            }
        }

        let x = Matrix::from_columns(&columns);
        let dependent = dependent_columns(&x, T::lit(1e-9));
        if !dependent.is_empty() {
            return Err(Error::RankDeficient(
                dependent.into_iter().map(|j| names[j].clone()).collect(),
            ));
        }
        let column_means = columns
            .iter()
            .map(|c| c.iter().copied().sum::<T>() / T::from_count(n.max(1)))
            .collect();
        Ok(Design {
            x,
            names,
            term_of,
            factors,
            column_means,
            standardize_response: self.standardize,
        })
    }

    /// Copy of `frame` with every numeric term z-scored.
    pub fn standardized_terms<T: Scalar>(&self, frame: &Frame<T>) -> Result<Frame<T>> {
        let mut out = frame.clone();
        for term in self.terms() {
            if let Column::Numeric(v) = frame.get(term)? {
                let z = zscore(v).ok_or_else(|| Error::RankDeficient(vec![term.clone()]))?;
                out.push_numeric(term.clone(), z)?;
            }
        }
        Ok(out)
    }

    /// Response vector from `frame`, z-scored when the spec standardizes.
    pub fn response<T: Scalar>(&self, frame: &Frame<T>) -> Result<Vec<T>> {
        prepare_response(&self.response, frame.numeric(&self.response)?, self.standardize)
    }
}

pub fn prepare_response<T: Scalar>(name: &str, y: &[T], standardize: bool) -> Result<Vec<T>> {
    let constant = y.windows(2).all(|w| w[0] == w[1]);
    if constant {
        return Err(Error::DegenerateResponse(name.to_string()));
    }
    if standardize {
        zscore(y).ok_or_else(|| Error::DegenerateResponse(name.to_string()))
    } else {
        Ok(y.to_vec())
    }
}

/// Columns belonging to one categorical term.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorBlock {
    pub name: String,
    pub levels: Vec<String>,
    /// Design column per level; `None` for the reference level.
    pub level_columns: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design<T> {
    pub x: Matrix<T>,
    pub names: Vec<String>,
    /// Source term of each column.
    pub term_of: Vec<String>,
    pub factors: Vec<FactorBlock>,
    pub column_means: Vec<T>,
    pub standardize_response: bool,
}

impl<T: Scalar> Design<T> {
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn k(&self) -> usize {
        self.x.cols()
    }

    pub fn factor(&self, name: &str) -> Option<&FactorBlock> {
        self.factors.iter().find(|f| f.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}
