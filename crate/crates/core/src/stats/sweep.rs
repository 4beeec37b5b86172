//! One model per region over a shared design, then BH within each term or
//! contrast family.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::dyad::Dyad;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::contrast::{planned_contrasts, Contrast};
use super::design::{prepare_response, Design, DesignSpec, Frame};
use super::dist::Sidedness;
use super::fdr::bh_fdr;
use super::lmm::{double_response, CrossedLmm, LmmOptions};
use super::ols::OlsFit;
use super::spearman::spearman_rho_sided;
use super::{RegionStats, TermResult};

pub const SPEARMAN_TERM: &str = "spearman_rho";

#[derive(Debug, Clone, PartialEq)]
pub enum LmmReport {
    /// t tests of every non-intercept column.
    Terms,
    Contrasts {
        factor: String,
        contrasts: Vec<Contrast>,
    },
}

/// Shared design rows; the response comes from each region.
#[derive(Debug, Clone)]
pub enum SweepModel<'a, T> {
    Ols {
        frame: &'a Frame<T>,
        spec: &'a DesignSpec,
    },
    Spearman {
        x: &'a [T],
    },
    Lmm {
        dyads: &'a [Dyad],
        n_subjects: usize,
        frame: &'a Frame<T>,
        spec: &'a DesignSpec,
        report: LmmReport,
        options: LmmOptions,
    },
}

impl<'a, T: Scalar> SweepModel<'a, T> {
    fn n_rows(&self) -> usize {
        match self {
            SweepModel::Ols { frame, .. } | SweepModel::Lmm { frame, .. } => frame.n_rows(),
            SweepModel::Spearman { x } => x.len(),
        }
    }

    fn response_name(&self) -> &str {
        match self {
            SweepModel::Ols { spec, .. } | SweepModel::Lmm { spec, .. } => &spec.response,
            SweepModel::Spearman { .. } => "response",
        }
    }
}

/// Response values of one region, aligned with the shared design rows;
/// `None` drops the row for this region only.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionResponse<T> {
    pub region: String,
    pub values: Vec<Option<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome<T> {
    /// Sorted by region label, then by term order within a region.
    pub rows: Vec<RegionStats<T>>,
    pub failures: Vec<(String, Error)>,
}

enum Prepared<T> {
    Ols(Design<T>),
    Spearman,
    Lmm(CrossedLmm<T>),
}

fn prepare<T: Scalar>(model: &SweepModel<'_, T>, rows: Option<&[usize]>) -> Result<Prepared<T>> {
    Ok(match model {
        SweepModel::Ols { frame, spec } => {
            let design = match rows {
                None => spec.design(frame)?,
                Some(r) => spec.design(&frame.subset(r))?,
            };
            Prepared::Ols(design)
        }
        SweepModel::Spearman { .. } => Prepared::Spearman,
        SweepModel::Lmm {
            dyads,
            n_subjects,
            frame,
            spec,
            ..
        } => {
            let lmm = match rows {
                None => CrossedLmm::for_dyads(dyads, frame, *n_subjects, spec)?,
                Some(r) => {
                    let kept: Vec<Dyad> = r.iter().map(|&i| dyads[i]).collect();
                    CrossedLmm::for_dyads(&kept, &frame.subset(r), *n_subjects, spec)?
                }
            };
            Prepared::Lmm(lmm)
        }
    })
}

fn fit_region<T: Scalar>(
    model: &SweepModel<'_, T>,
    prepared: &Prepared<T>,
    rows: &[usize],
    y: &[T],
    side: Sidedness,
) -> Result<Vec<TermResult<T>>> {
    let name = model.response_name();
    match (model, prepared) {
        (SweepModel::Ols { spec, .. }, Prepared::Ols(design)) => {
            let y = prepare_response(name, y, spec.standardize)?;
            Ok(OlsFit::fit(design, &y)?.term_results(side))
        }
        (SweepModel::Spearman { x }, Prepared::Spearman) => {
            let xs: Vec<T> = rows.iter().map(|&i| x[i]).collect();
            let s = spearman_rho_sided(&xs, y, side)?;
            Ok(vec![TermResult {
                term: SPEARMAN_TERM.to_string(),
                b: s.rho,
                se: s.se,
                df: s.df,
                p: s.p,
                n: rows.len(),
            }])
        }
        (
            SweepModel::Lmm {
                spec, report, options, ..
            },
            Prepared::Lmm(lmm),
        ) => {
            let y = prepare_response(name, y, spec.standardize)?;
            let fit = lmm.fit(&double_response(&y), options)?;
            let n = lmm.n_unique();
            match report {
                LmmReport::Terms => Ok(fit.coef.term_results(n, side)),
                LmmReport::Contrasts { factor, contrasts } => {
                    planned_contrasts(&fit.coef, lmm.design(), factor, contrasts, side, n)
                }
            }
        }
        _ => unreachable!("prepared model matches its kind"),
    }
}

/// Fit every region independently (in parallel on the current rayon pool),
/// then adjust p values across regions within each term. Regions whose fit
/// fails are logged and left out of their families.
pub fn region_sweep<T: Scalar>(
    model_name: &str,
    model: &SweepModel<'_, T>,
    responses: &[RegionResponse<T>],
    side: Sidedness,
) -> Result<SweepOutcome<T>> {
    let n = model.n_rows();
    if let Some(r) = responses.iter().find(|r| r.values.len() != n) {
        return Err(Error::LengthMismatch {
            left: n,
            right: r.values.len(),
        });
    }
    let all_rows: Vec<usize> = (0..n).collect();
    let shared = prepare(model, None);

    let fitted: Vec<(String, Result<Vec<TermResult<T>>>)> = responses
        .par_iter()
        .map(|resp| {
            let rows: Vec<usize> = (0..n).filter(|&i| resp.values[i].is_some()).collect();
            let y: Vec<T> = rows.iter().map(|&i| resp.values[i].unwrap()).collect();
            let result = if rows.len() == n {
                match &shared {
                    Ok(p) => fit_region(model, p, &all_rows, &y, side),
                    Err(e) => Err(e.clone()),
                }
            } else {
                prepare(model, Some(&rows)).and_then(|p| fit_region(model, &p, &rows, &y, side))
            };
            (resp.region.clone(), result)
        })
        .collect();

    let mut failures = Vec::new();
    let mut ok: Vec<(String, Vec<TermResult<T>>)> = Vec::new();
    for (region, r) in fitted {
        match r {
            Ok(terms) => ok.push((region, terms)),
            Err(e) => {
                log::warn!("{model_name}: region `{region}` excluded: {e}");
                failures.push((region, e));
            }
        }
    }

    let mut families: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    for (ri, (_, terms)) in ok.iter().enumerate() {
        for (ti, t) in terms.iter().enumerate() {
            families.entry(t.term.clone()).or_default().push((ri, ti));
        }
    }
    let mut adjusted: BTreeMap<(usize, usize), T> = BTreeMap::new();
    for members in families.values() {
        let p: Vec<T> = members.iter().map(|&(ri, ti)| ok[ri].1[ti].p).collect();
        for (&key, q) in members.iter().zip(bh_fdr(&p)?) {
            adjusted.insert(key, q);
        }
    }

    let mut rows = Vec::new();
    for (ri, (region, terms)) in ok.iter().enumerate() {
        for (ti, t) in terms.iter().enumerate() {
            rows.push(RegionStats {
                region: region.clone(),
                model: model_name.to_string(),
                term: t.term.clone(),
                b: t.b,
                se: t.se,
                df: t.df,
                p_raw: t.p,
                p_fdr: adjusted[&(ri, ti)],
                n: t.n,
            });
        }
    }
    // stable: keeps term order within a region
    rows.sort_by(|a, b| a.region.cmp(&b.region));
    failures.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(SweepOutcome { rows, failures })
}

/// Family size per term among successful regions.
pub fn family_sizes<T>(rows: &[RegionStats<T>]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for r in rows {
        *out.entry(r.term.clone()).or_insert(0) += 1;
    }
    out
}
