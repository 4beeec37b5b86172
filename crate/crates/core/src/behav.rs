//! Dyadic similarity of ratings and demographics.
//!
//! Continuous similarities are `1 - d / max(d)` where the maximum runs over
//! the in-scope dyads of the subject list passed in, so values depend on the
//! analysed sample.

use std::collections::{BTreeMap, BTreeSet};

use crate::dyad::{all_dyads, Dyad};
use crate::error::{Error, Result};
use crate::isc::{scope_mask, Scope};
use crate::scalar::Scalar;

pub const RATING_MIN: i64 = 1;
pub const RATING_MAX: i64 = 5;

/// Complete 1-5 rating vectors, one per subject, over a fixed item order.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    subjects: Vec<String>,
    items: Vec<String>,
    values: Vec<Vec<u8>>,
}

impl RatingMatrix {
    pub fn new(subjects: Vec<String>, items: Vec<String>, values: Vec<Vec<i64>>) -> Result<Self> {
        if subjects.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: subjects.len(),
                right: values.len(),
            });
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(values.len());
        for (s, row) in subjects.iter().zip(values) {
            if !seen.insert(s.as_str()) {
                return Err(Error::InvalidSpec(format!("subject `{s}` rated twice")));
            }
            if row.len() != items.len() {
                return Err(Error::LengthMismatch {
                    left: items.len(),
                    right: row.len(),
                });
            }
            out.push(validate_row(s, &row)?);
        }
        Ok(Self {
            subjects,
            items,
            values: out,
        })
    }

    /// Build from long-form `(subject, item, rating)` entries. Subjects
    /// missing any item are dropped and returned separately; items are
    /// ordered by first appearance.
    pub fn from_long<I>(entries: I) -> Result<(Self, Vec<String>)>
    where
        I: IntoIterator<Item = (String, String, Option<i64>)>,
    {
        let mut items: Vec<String> = Vec::new();
        let mut item_index: BTreeMap<String, usize> = BTreeMap::new();
        let mut subjects: Vec<String> = Vec::new();
        let mut by_subject: BTreeMap<String, BTreeMap<usize, Option<i64>>> = BTreeMap::new();
        for (s, item, v) in entries {
            let next = item_index.len();
            let j = *item_index.entry(item.clone()).or_insert_with(|| {
                items.push(item);
                next
            });
            if !by_subject.contains_key(&s) {
                subjects.push(s.clone());
            }
            let row = by_subject.entry(s.clone()).or_default();
            if row.insert(j, v).is_some() {
                return Err(Error::InvalidSpec(format!(
                    "subject `{s}` rated item `{}` twice",
                    items[j]
                )));
            }
        }
        let mut kept = Vec::new();
        let mut values = Vec::new();
        let mut dropped = Vec::new();
        for s in subjects {
            let row = &by_subject[&s];
            let full: Option<Vec<i64>> = (0..items.len()).map(|j| row.get(&j).copied().flatten()).collect();
            match full {
                Some(v) => {
                    kept.push(s);
                    values.push(v);
                }
                None => dropped.push(s),
            }
        }
        if !dropped.is_empty() {
            log::warn!("{} subject(s) with incomplete ratings excluded", dropped.len());
        }
        Ok((Self::new(kept, items, values)?, dropped))
    }

    pub fn subjects(&self) -> &[String] {
        &self.subjects
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn row(&self, subject: &str) -> Option<&[u8]> {
        self.subjects
            .iter()
            .position(|s| s == subject)
            .map(|i| self.values[i].as_slice())
    }
}

fn validate_row(subject: &str, row: &[i64]) -> Result<Vec<u8>> {
    row.iter()
        .enumerate()
        .map(|(item, &v)| {
            if (RATING_MIN..=RATING_MAX).contains(&v) {
                Ok(v as u8)
            } else {
                Err(Error::RatingOutOfRange {
                    subject: subject.to_string(),
                    item,
                    value: v,
                })
            }
        })
        .collect()
}

/// One value per dyad of `subjects` (lexicographic [`all_dyads`] order);
/// `None` for dyads out of scope or with missing inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityColumn<T> {
    pub name: String,
    pub subjects: Vec<String>,
    pub dyads: Vec<Dyad>,
    pub values: Vec<Option<T>>,
}

impl<T: Scalar> SimilarityColumn<T> {
    pub fn value(&self, dyad: Dyad) -> Option<T> {
        self.dyads.binary_search(&dyad).ok().and_then(|i| self.values[i])
    }
}

/// `1 - d / max(d)` over the available distances; all-zero distances give 1
/// everywhere.
fn normalize_distances<T: Scalar>(name: &str, d: &[Option<T>]) -> Vec<Option<T>> {
    let max = d.iter().flatten().copied().fold(T::zero(), T::max);
    if max <= T::zero() {
        if d.iter().any(Option::is_some) {
            log::warn!("{name}: every distance is zero; similarity set to 1");
        }
        return d.iter().map(|v| v.map(|_| T::one())).collect();
    }
    d.iter().map(|v| v.map(|x| T::one() - x / max)).collect()
}

fn scoped<T: Scalar, F>(
    name: &str,
    subjects: &[String],
    scope: Scope,
    communities: Option<&[String]>,
    mut distance: F,
) -> Result<SimilarityColumn<T>>
where
    F: FnMut(usize, usize) -> Option<T>,
{
    let dyads = all_dyads(subjects.len());
    let mask = scope_mask(&dyads, scope, communities)?;
    let d: Vec<Option<T>> = dyads
        .iter()
        .zip(&mask)
        .map(|(dy, &keep)| if keep { distance(dy.a(), dy.b()) } else { None })
        .collect();
    Ok(SimilarityColumn {
        name: name.to_string(),
        subjects: subjects.to_vec(),
        dyads,
        values: normalize_distances(name, &d),
    })
}

fn indicator<T: Scalar, F>(
    name: &str,
    subjects: &[String],
    scope: Scope,
    communities: Option<&[String]>,
    mut same: F,
) -> Result<SimilarityColumn<T>>
where
    F: FnMut(usize, usize) -> Option<bool>,
{
    let dyads = all_dyads(subjects.len());
    let mask = scope_mask(&dyads, scope, communities)?;
    let values = dyads
        .iter()
        .zip(&mask)
        .map(|(dy, &keep)| {
            if keep {
                same(dy.a(), dy.b()).map(|b| if b { T::one() } else { T::zero() })
            } else {
                None
            }
        })
        .collect();
    Ok(SimilarityColumn {
        name: name.to_string(),
        subjects: subjects.to_vec(),
        dyads,
        values,
    })
}

/// Euclidean rating distance normalized by its maximum over the in-scope
/// dyads of `subjects`. Subjects absent from the matrix get missing dyads.
pub fn rating_similarity<T: Scalar>(
    name: &str,
    matrix: &RatingMatrix,
    subjects: &[String],
    scope: Scope,
    communities: Option<&[String]>,
) -> Result<SimilarityColumn<T>> {
    let rows: Vec<Option<&[u8]>> = subjects.iter().map(|s| matrix.row(s)).collect();
    if rows.iter().flatten().count() < 2 {
        return Err(Error::TooFewSubjects {
            needed: 2,
            got: rows.iter().flatten().count(),
        });
    }
    scoped(name, subjects, scope, communities, |a, b| {
        let (ra, rb) = (rows[a]?, rows[b]?);
        let ss: i64 = ra
            .iter()
            .zip(rb)
            .map(|(&x, &y)| {
                let d = i64::from(x) - i64::from(y);
                d * d
            })
            .sum();
        Some(T::from_count(ss as usize).sqrt())
    })
}

/// Mean similarity of each subject over its non-missing dyads.
pub fn subject_mean_similarity<T: Scalar>(col: &SimilarityColumn<T>) -> Vec<Option<T>> {
    let n = col.subjects.len();
    let mut sum = vec![T::zero(); n];
    let mut cnt = vec![0usize; n];
    for (d, v) in col.dyads.iter().zip(&col.values) {
        if let Some(v) = v {
            for s in [d.a(), d.b()] {
                sum[s] = sum[s] + *v;
                cnt[s] += 1;
            }
        }
    }
    sum.into_iter()
        .zip(cnt)
        .enumerate()
        .map(|(s, (x, c))| {
            if c == 0 {
                log::warn!("{}: subject `{}` has no partners", col.name, col.subjects[s]);
                None
            } else {
                Some(x / T::from_count(c))
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Attributes {
    pub age: Option<f64>,
    pub gender: Option<String>,
    pub home_country: Option<String>,
    pub ethnicities: Option<BTreeSet<String>>,
}

impl Attributes {
    /// Parse a semicolon-separated ethnicity set; blank means missing.
    pub fn parse_ethnicities(s: &str) -> Option<BTreeSet<String>> {
        let set: BTreeSet<String> = s
            .split(';')
            .map(str::trim)
            .filter(|e| !e.is_empty())
            .map(str::to_string)
            .collect();
        (!set.is_empty()).then_some(set)
    }
}

pub const DEMOGRAPHIC_COLUMNS: [&str; 4] = ["age_sim", "same_gender", "shared_ethnicity", "same_home_country"];

/// `age_sim`, `same_gender`, `shared_ethnicity`, `same_home_country`, in that
/// order. `attributes` is aligned with `subjects`; a missing attribute makes
/// every dyad of that subject missing in the affected column.
pub fn demographic_similarity<T: Scalar>(
    subjects: &[String],
    attributes: &[Attributes],
    scope: Scope,
    communities: Option<&[String]>,
) -> Result<Vec<SimilarityColumn<T>>> {
    if subjects.len() != attributes.len() {
        return Err(Error::LengthMismatch {
            left: subjects.len(),
            right: attributes.len(),
        });
    }
    for (s, a) in subjects.iter().zip(attributes) {
        if a.age.is_none() || a.gender.is_none() || a.home_country.is_none() || a.ethnicities.is_none() {
            log::warn!("subject `{s}` has missing demographic attributes");
        }
    }
    let at = |i: usize| &attributes[i];
    Ok(vec![
        scoped(DEMOGRAPHIC_COLUMNS[0], subjects, scope, communities, |a, b| {
            Some(T::lit((at(a).age? - at(b).age?).abs()))
        })?,
        indicator(DEMOGRAPHIC_COLUMNS[1], subjects, scope, communities, |a, b| {
            Some(at(a).gender.as_ref()? == at(b).gender.as_ref()?)
        })?,
        indicator(DEMOGRAPHIC_COLUMNS[2], subjects, scope, communities, |a, b| {
            let (x, y) = (at(a).ethnicities.as_ref()?, at(b).ethnicities.as_ref()?);
            Some(!x.is_disjoint(y))
        })?,
        indicator(DEMOGRAPHIC_COLUMNS[3], subjects, scope, communities, |a, b| {
            Some(at(a).home_country.as_ref()? == at(b).home_country.as_ref()?)
        })?,
    ])
}
