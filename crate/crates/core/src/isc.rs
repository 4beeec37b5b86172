//! Inter-subject correlation: run alignment, per-region dyadic Pearson
//! tables, the Fisher z transform, within-region standardization and
//! subject-level means.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyad::Dyad;
use crate::error::{Error, Result};
use crate::scalar::{mean_and_sample_var, Scalar};

/// Run label.
pub type RunId = u32;

/// Default clamp applied before `atanh`.
pub const FISHER_EPS: f64 = 1e-7;

/// Fraction of dyads a region may lose to constant series before the run
/// aborts with a data-quality error.
pub const MAX_MISSING_FRACTION: f64 = 0.10;

/// Where each usable run sits inside a subject's concatenated series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunLayout {
    offsets: BTreeMap<RunId, Range<usize>>,
}

impl RunLayout {
    /// `usable` runs laid out back to back in run order, with lengths from
    /// the panel-wide `run_lengths`.
    pub fn new(usable: &BTreeSet<RunId>, run_lengths: &BTreeMap<RunId, usize>) -> Result<Self> {
        let mut offsets = BTreeMap::new();
        let mut at = 0;
        for &run in usable {
            let len = *run_lengths
                .get(&run)
                .ok_or_else(|| Error::InvalidPanel(format!("usable run {run} has no declared length")))?;
            offsets.insert(run, at..at + len);
            at += len;
        }
        Ok(Self { offsets })
    }

    pub fn usable_runs(&self) -> BTreeSet<RunId> {
        self.offsets.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.offsets.values().last().map_or(0, |r| r.end)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-time-point run labels.
    pub fn run_index(&self) -> Vec<RunId> {
        self.offsets
            .iter()
            .flat_map(|(&run, r)| std::iter::repeat(run).take(r.len()))
            .collect()
    }
}

/// One subject's region x time data over its usable runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectSeries<T> {
    pub layout: RunLayout,
    /// `data[region]` is the concatenated usable series for that region.
    pub data: Vec<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel<T> {
    subjects: Vec<String>,
    regions: Vec<String>,
    run_lengths: BTreeMap<RunId, usize>,
    series: Vec<SubjectSeries<T>>,
}

impl<T: Scalar> TimeSeriesPanel<T> {
    pub fn new(
        regions: Vec<String>,
        run_lengths: BTreeMap<RunId, usize>,
        subjects: Vec<(String, SubjectSeries<T>)>,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (name, s) in &subjects {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidPanel(format!("duplicate subject `{name}`")));
            }
            if s.data.len() != regions.len() {
                return Err(Error::InvalidPanel(format!(
                    "subject `{name}` has {} regions, panel has {}",
                    s.data.len(),
                    regions.len()
                )));
            }
            for (run, range) in &s.layout.offsets {
                if run_lengths.get(run) != Some(&range.len()) {
                    return Err(Error::InvalidPanel(format!(
                        "subject `{name}` run {run} length disagrees with panel"
                    )));
                }
            }
            let t = s.layout.len();
            if let Some((r, bad)) = s.data.iter().enumerate().find(|(_, v)| v.len() != t) {
                return Err(Error::InvalidPanel(format!(
                    "subject `{name}` region {} has {} time points, expected {t}",
                    regions[r],
                    bad.len()
                )));
            }
        }
        let (names, series) = subjects.into_iter().unzip();
        Ok(Self {
            subjects: names,
            regions,
            run_lengths,
            series,
        })
    }

    pub fn subjects(&self) -> &[String] {
        &self.subjects
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn run_lengths(&self) -> &BTreeMap<RunId, usize> {
        &self.run_lengths
    }

    pub fn series(&self, subject: usize) -> &SubjectSeries<T> {
        &self.series[subject]
    }

    pub fn layouts(&self) -> Vec<RunLayout> {
        self.series.iter().map(|s| s.layout.clone()).collect()
    }

    pub fn index_of(&self, subject: &str) -> Option<usize> {
        self.subjects.iter().position(|s| s == subject)
    }

    /// Keep only `keep` subjects, in the given order.
    pub fn select(&self, keep: &[String]) -> Result<Self> {
        let mut subjects = Vec::with_capacity(keep.len());
        for s in keep {
            let i = self.index_of(s).ok_or_else(|| Error::UnknownSubject(s.clone()))?;
            subjects.push((s.clone(), self.series[i].clone()));
        }
        Self::new(self.regions.clone(), self.run_lengths.clone(), subjects)
    }
}

/// What to do with dyads whose usable-run sets are not nested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartialRunPolicy {
    #[default]
    Exclude,
    Intersect,
}

/// Index ranges into each member's series that line up run for run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadAlignment {
    pub runs: Vec<RunId>,
    pub a: Vec<Range<usize>>,
    pub b: Vec<Range<usize>>,
    /// Both members use their whole series.
    pub full: bool,
}

/// Align two subjects on shared runs. When one usable set contains the
/// other, the dyad uses the smaller set. Non-nested sets follow `policy`.
/// Returns `None` for an excluded dyad.
pub fn plan_alignment(a: &RunLayout, b: &RunLayout, policy: PartialRunPolicy) -> Option<DyadAlignment> {
    let (ra, rb) = (a.usable_runs(), b.usable_runs());
    let nested = ra.is_subset(&rb) || rb.is_subset(&ra);
    if !nested && policy == PartialRunPolicy::Exclude {
        return None;
    }
    let runs: Vec<RunId> = ra.intersection(&rb).copied().collect();
    if runs.is_empty() {
        return None;
    }
    let full = ra == rb;
    Some(DyadAlignment {
        a: runs.iter().map(|r| a.offsets[r].clone()).collect(),
        b: runs.iter().map(|r| b.offsets[r].clone()).collect(),
        runs,
        full,
    })
}

fn gather<T: Copy>(series: &[T], ranges: &[Range<usize>]) -> Vec<T> {
    ranges.iter().flat_map(|r| series[r.clone()].iter().copied()).collect()
}

/// Both subjects' series for `region`, restricted to their shared runs.
/// `Ok(None)` means the dyad is excluded.
pub fn align_dyad<T: Scalar>(
    panel: &TimeSeriesPanel<T>,
    a: usize,
    b: usize,
    region: usize,
    policy: PartialRunPolicy,
) -> Result<Option<(Vec<T>, Vec<T>)>> {
    if a == b {
        return Err(Error::InvalidSpec("cannot align a subject with itself".into()));
    }
    let (sa, sb) = (&panel.series[a], &panel.series[b]);
    Ok(plan_alignment(&sa.layout, &sb.layout, policy)
        .map(|al| (gather(&sa.data[region], &al.a), gather(&sb.data[region], &al.b))))
}

/// Pearson correlation. `Ok(None)` when either input is constant.
pub fn pearson_corr<T: Scalar>(x: &[T], y: &[T]) -> Result<Option<T>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::TooShort {
            needed: 3,
            got: x.len(),
        });
    }
    let n = T::from_count(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&xi, &yi) in x.iter().zip(y) {
        let (dx, dy) = (xi - mx, yi - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if !(sxx > T::zero()) || !(syy > T::zero()) {
        return Ok(None);
    }
    let r = sxy / (sxx * syy).sqrt();
    Ok(Some(r.max(-T::one()).min(T::one())))
}

/// Centered and unit-norm copy, so the Pearson correlation of two such
/// vectors is their dot product. `None` for constant input.
fn unit_centered<T: Scalar>(x: &[T]) -> Option<Vec<T>> {
    let n = T::from_count(x.len());
    let m = x.iter().copied().sum::<T>() / n;
    let ss: T = x.iter().map(|&v| (v - m) * (v - m)).sum();
    if !(ss > T::zero()) {
        return None;
    }
    let norm = ss.sqrt();
    Some(x.iter().map(|&v| (v - m) / norm).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    RawR,
    FisherZ,
    FisherZStandardized,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::RawR => "raw-r",
            Stage::FisherZ => "fisher-z",
            Stage::FisherZStandardized => "fisher-z-standardized",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "raw-r" | "raw" | "r" => Some(Stage::RawR),
            "fisher-z" | "z" => Some(Stage::FisherZ),
            "fisher-z-standardized" | "zz" | "standardized" => Some(Stage::FisherZStandardized),
            _ => None,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Region x dyad matrix of similarity values; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct IscTable<T> {
    pub subjects: Vec<String>,
    pub regions: Vec<String>,
    pub dyads: Vec<Dyad>,
    /// `values[region][dyad]`
    pub values: Vec<Vec<Option<T>>>,
    pub stage: Stage,
}

impl<T: Scalar> IscTable<T> {
    fn require_stage(&self, ok: &[Stage]) -> Result<()> {
        if ok.contains(&self.stage) {
            Ok(())
        } else {
            Err(Error::WrongStage {
                expected: ok.iter().map(|s| s.label()).collect::<Vec<_>>().join(" or "),
                found: self.stage.label().to_string(),
            })
        }
    }

    pub fn region_index(&self, region: &str) -> Option<usize> {
        self.regions.iter().position(|r| r == region)
    }

    pub fn dyad_index(&self, dyad: Dyad) -> Option<usize> {
        self.dyads.iter().position(|&d| d == dyad)
    }

    pub fn value(&self, region: usize, dyad: Dyad) -> Option<T> {
        self.dyad_index(dyad).and_then(|j| self.values[region][j])
    }

    /// Drop the listed dyads (e.g. an explicit exclusion list).
    pub fn without_dyads(&self, drop: &BTreeSet<Dyad>) -> Self {
        let keep: Vec<usize> = (0..self.dyads.len())
            .filter(|&j| !drop.contains(&self.dyads[j]))
            .collect();
        Self {
            subjects: self.subjects.clone(),
            regions: self.regions.clone(),
            dyads: keep.iter().map(|&j| self.dyads[j]).collect(),
            values: self
                .values
                .iter()
                .map(|row| keep.iter().map(|&j| row[j]).collect())
                .collect(),
            stage: self.stage,
        }
    }
}

/// Per-region correlations for all `plans` given each subject's series for
/// that region. Cells of excluded dyads and constant series are `None`.
fn region_row<T: Scalar>(series: &[&[T]], plans: &[(Dyad, Option<DyadAlignment>)]) -> Vec<Option<T>> {
    let units: Vec<Option<Vec<T>>> = series.iter().map(|s| unit_centered(s)).collect();
    plans
        .iter()
        .map(|(d, plan)| {
            let plan = plan.as_ref()?;
            if plan.full {
                let (ua, ub) = (units[d.a()].as_ref()?, units[d.b()].as_ref()?);
                let r = crate::linalg::dot(ua, ub);
                Some(r.max(-T::one()).min(T::one()))
            } else {
                let xa = gather(series[d.a()], &plan.a);
                let xb = gather(series[d.b()], &plan.b);
                pearson_corr(&xa, &xb).ok().flatten()
            }
        })
        .collect()
}

fn check_quality<T>(region: &str, row: &[Option<T>], plans: &[(Dyad, Option<DyadAlignment>)]) -> Result<()> {
    let eligible = plans.iter().filter(|(_, p)| p.is_some()).count();
    let missing = row
        .iter()
        .zip(plans)
        .filter(|(v, (_, p))| v.is_none() && p.is_some())
        .count();
    if missing > 0 {
        log::warn!("region `{region}`: {missing} of {eligible} dyads missing (constant series)");
    }
    if eligible > 0 && (missing as f64) > MAX_MISSING_FRACTION * eligible as f64 {
        return Err(Error::DataQuality {
            region: region.to_string(),
            missing,
            total: eligible,
        });
    }
    Ok(())
}

/// Alignment plan for every dyad given subject run layouts.
pub fn plan_dyads(
    layouts: &[RunLayout],
    dyads: &[Dyad],
    policy: PartialRunPolicy,
) -> Vec<(Dyad, Option<DyadAlignment>)> {
    dyads
        .iter()
        .map(|&d| (d, plan_alignment(&layouts[d.a()], &layouts[d.b()], policy)))
        .collect()
}

/// Raw Pearson ISC table for `dyads` (indices into the panel's subjects).
pub fn isc_table<T: Scalar>(
    panel: &TimeSeriesPanel<T>,
    dyads: &[Dyad],
    policy: PartialRunPolicy,
) -> Result<IscTable<T>> {
    let plans = plan_dyads(&panel.layouts(), dyads, policy);
    let excluded = plans.iter().filter(|(_, p)| p.is_none()).count();
    if excluded > 0 {
        log::info!("{excluded} dyads excluded by run alignment");
    }
    let values = (0..panel.regions.len())
        .into_par_iter()
        .map(|r| {
            let series: Vec<&[T]> = panel.series.iter().map(|s| s.data[r].as_slice()).collect();
            let row = region_row(&series, &plans);
            check_quality(&panel.regions[r], &row, &plans)?;
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IscTable {
        subjects: panel.subjects.clone(),
        regions: panel.regions.clone(),
        dyads: dyads.to_vec(),
        values,
        stage: Stage::RawR,
    })
}

/// Like [`isc_table`] but pulls one region at a time from `region_data`,
/// which returns every subject's series for the requested region. Keeps
/// memory at one region when the full panel would not fit.
pub fn isc_table_streaming<T, F>(
    subjects: &[String],
    regions: &[String],
    layouts: &[RunLayout],
    dyads: &[Dyad],
    policy: PartialRunPolicy,
    region_data: F,
) -> Result<IscTable<T>>
where
    T: Scalar,
    F: Fn(usize) -> Vec<Vec<T>> + Sync,
{
    let plans = plan_dyads(layouts, dyads, policy);
    let values = (0..regions.len())
        .into_par_iter()
        .map(|r| {
            let data = region_data(r);
            let series: Vec<&[T]> = data.iter().map(Vec::as_slice).collect();
            let row = region_row(&series, &plans);
            check_quality(&regions[r], &row, &plans)?;
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IscTable {
        subjects: subjects.to_vec(),
        regions: regions.to_vec(),
        dyads: dyads.to_vec(),
        values,
        stage: Stage::RawR,
    })
}

/// `atanh` of a correlation clamped to `±(1 - eps)`.
#[inline]
pub fn fisher_z_value<T: Scalar>(r: T, eps: T) -> T {
    let bound = T::one() - eps;
    r.max(-bound).min(bound).atanh()
}

pub fn fisher_z<T: Scalar>(table: &IscTable<T>, eps: T) -> Result<IscTable<T>> {
    table.require_stage(&[Stage::RawR])?;
    let mut out = table.clone();
    for row in &mut out.values {
        for v in row.iter_mut() {
            *v = v.map(|r| fisher_z_value(r, eps));
        }
    }
    out.stage = Stage::FisherZ;
    Ok(out)
}

/// Z-score each region row over its non-missing cells (sample SD).
pub fn standardize_within_region<T: Scalar>(table: &IscTable<T>) -> Result<IscTable<T>> {
    table.require_stage(&[Stage::FisherZ])?;
    let mut out = table.clone();
    for (r, row) in out.values.iter_mut().enumerate() {
        let present: Vec<T> = row.iter().flatten().copied().collect();
        let (m, var) =
            mean_and_sample_var(&present).ok_or_else(|| Error::ZeroVarianceRegion(table.regions[r].clone()))?;
        let sd = var.sqrt();
        if !(sd > T::zero()) {
            return Err(Error::ZeroVarianceRegion(table.regions[r].clone()));
        }
        for v in row.iter_mut() {
            *v = v.map(|x| (x - m) / sd);
        }
    }
    out.stage = Stage::FisherZStandardized;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    #[default]
    All,
    IntraCommunityOnly,
}

/// Which dyads are in scope. `communities` is aligned with the subject list
/// and is required for [`Scope::IntraCommunityOnly`].
pub fn scope_mask(dyads: &[Dyad], scope: Scope, communities: Option<&[String]>) -> Result<Vec<bool>> {
    match scope {
        Scope::All => Ok(vec![true; dyads.len()]),
        Scope::IntraCommunityOnly => {
            let c =
                communities.ok_or_else(|| Error::InvalidSpec("intra-community scope needs community labels".into()))?;
            dyads
                .iter()
                .map(|d| {
                    let (a, b) = (c.get(d.a()), c.get(d.b()));
                    match (a, b) {
                        (Some(a), Some(b)) => Ok(a == b),
                        _ => Err(Error::InvalidSpec("community labels shorter than subject list".into())),
                    }
                })
                .collect()
        }
    }
}

/// Subject x region means, `values[region][subject]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectMeans<T> {
    pub subjects: Vec<String>,
    pub regions: Vec<String>,
    pub values: Vec<Vec<Option<T>>>,
}

/// Mean transformed ISC of each subject with each eligible partner, per
/// region.
pub fn subject_mean_isc<T: Scalar>(
    table: &IscTable<T>,
    scope: Scope,
    communities: Option<&[String]>,
) -> Result<SubjectMeans<T>> {
    table.require_stage(&[Stage::FisherZ, Stage::FisherZStandardized])?;
    let mask = scope_mask(&table.dyads, scope, communities)?;
    let n = table.subjects.len();
    let values: Vec<Vec<Option<T>>> = table
        .values
        .iter()
        .map(|row| {
            let mut sum = vec![T::zero(); n];
            let mut cnt = vec![0usize; n];
            for ((d, v), &keep) in table.dyads.iter().zip(row).zip(&mask) {
                if let (Some(v), true) = (v, keep) {
                    for s in [d.a(), d.b()] {
                        sum[s] = sum[s] + *v;
                        cnt[s] += 1;
                    }
                }
            }
            sum.into_iter()
                .zip(cnt)
                .map(|(s, c)| (c > 0).then(|| s / T::from_count(c)))
                .collect()
        })
        .collect();
    if let Some(row) = values.first() {
        for (s, v) in row.iter().enumerate() {
            if v.is_none() {
                log::warn!("subject `{}` has no eligible dyads", table.subjects[s]);
            }
        }
    }
    Ok(SubjectMeans {
        subjects: table.subjects.clone(),
        regions: table.regions.clone(),
        values,
    })
}
