//! The named analyses: analysis sample, subject-level and dyad-level ISC
//! models, behavioral models.

use std::collections::{BTreeMap, BTreeSet};

use annak_core::behav::{
    demographic_similarity, rating_similarity, subject_mean_similarity, Attributes, RatingMatrix, SimilarityColumn,
};
use annak_core::graphnet::{
    attach_ties, category_counts, dyad_centrality_table, in_degree_centrality, CentralityProfile, DyadCategory,
    DyadCentrality, Group, SocialGraph,
};
use annak_core::isc::{
    fisher_z, isc_table, standardize_within_region, subject_mean_isc, IscTable, Scope, Stage, SubjectMeans, FISHER_EPS,
};
use annak_core::stats::contrast::category_contrasts;
use annak_core::stats::design::{DesignSpec, Frame};
use annak_core::stats::lmm::LmmOptions;
use annak_core::stats::sweep::{region_sweep, LmmReport, RegionResponse, SweepModel, SweepOutcome};
use annak_core::stats::RegionStats;
use annak_core::{Dyad, Error};
use serde::Serialize;

use crate::config::{AnalysisConfig, CovariateSet};
use crate::error::{PipelineError, Result};
use crate::io::{self, Exclusions};

pub const CATEGORY: &str = "category";
pub const CATEGORY_LEVELS: [&str; 3] = ["LL", "LH", "HH"];
pub const HIGH: &str = "high";
pub const LOG_MIN_IN_DEGREE: &str = "log_min_in_degree";
pub const PREFERENCE_COLUMNS: [&str; 2] = ["enjoyment_sim", "interest_sim"];

/// Everything an analysis reads, already parsed.
#[derive(Debug, Clone)]
pub struct Study {
    pub graph: SocialGraph,
    /// Raw Pearson ISC.
    pub isc: IscTable<f64>,
    /// Enjoyment and interest ratings.
    pub ratings: Option<(RatingMatrix, RatingMatrix)>,
    pub attributes: Option<BTreeMap<String, Attributes>>,
    pub exclusions: Exclusions,
}

impl Study {
    /// Read every input named by a resolved config; ISC is computed from the
    /// time series when no precomputed table is given.
    pub fn load(config: &AnalysisConfig) -> Result<Self> {
        config.require_network()?;
        let inputs = &config.inputs;
        let graph = io::read_graph(inputs.edges.as_ref().unwrap(), inputs.communities.as_ref().unwrap())?;
        let isc = Self::load_isc(config)?;
        let ratings = inputs.ratings.as_deref().map(io::read_ratings).transpose()?;
        let attributes = inputs.attributes.as_deref().map(io::read_attributes).transpose()?;
        let exclusions = match &inputs.exclusions {
            Some(p) => io::read_exclusions(p)?,
            None => Exclusions::default(),
        };
        Ok(Self {
            graph,
            isc,
            ratings,
            attributes,
            exclusions,
        })
    }

    pub fn load_isc(config: &AnalysisConfig) -> Result<IscTable<f64>> {
        config.require_neural()?;
        if let Some(p) = &config.inputs.isc {
            let t = io::read_isc(p)?;
            if t.stage != Stage::RawR {
                return Err(PipelineError::Config(format!(
                    "{}: expected a raw-r ISC table, found {}",
                    p.display(),
                    t.stage
                )));
            }
            return Ok(t);
        }
        let panel = io::read_panel(config.inputs.timeseries.as_ref().unwrap())?;
        let dyads = annak_core::all_dyads(panel.subjects().len());
        Ok(isc_table(&panel, &dyads, config.partial_run_policy)?)
    }
}

/// The analysed subjects and dyads after exclusions, split and scope.
#[derive(Debug, Clone)]
pub struct Sample {
    pub profile: CentralityProfile,
    pub communities: Vec<String>,
    /// Raw ISC over `profile.subjects`; dyads missing in every region are
    /// dropped.
    pub table: IscTable<f64>,
    /// Aligned with `table.dyads`.
    pub dyads: Vec<DyadCentrality>,
    pub dropped_subjects: Vec<String>,
    pub split_excluded: Vec<String>,
    pub dyads_without_isc: usize,
}

impl Sample {
    pub fn build(study: &Study, config: &AnalysisConfig) -> Result<Self> {
        let in_degree = in_degree_centrality(&study.graph);
        let mut dropped_subjects = Vec::new();
        let candidates: Vec<String> = study
            .isc
            .subjects
            .iter()
            .filter(|s| {
                if study.exclusions.subjects.contains(*s) {
                    return false;
                }
                if study.graph.index_of(s).is_none() {
                    log::warn!("subject `{s}` has ISC data but is not in the network; dropped");
                    dropped_subjects.push((*s).clone());
                    return false;
                }
                true
            })
            .cloned()
            .collect();
        let (profile, split_excluded) = CentralityProfile::build(&in_degree, &candidates, config.split)?;
        if !split_excluded.is_empty() {
            log::info!("{} subject(s) at the median dropped by the split", split_excluded.len());
        }
        let communities: Vec<String> = profile
            .subjects
            .iter()
            .map(|s| study.graph.community_of(s).expect("in graph").to_string())
            .collect();

        let old_index: BTreeMap<&str, usize> = study
            .isc
            .subjects
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let new_of_old: BTreeMap<usize, usize> = profile
            .subjects
            .iter()
            .enumerate()
            .map(|(i, s)| (old_index[s.as_str()], i))
            .collect();
        let scope = config.scope();
        let mut keep: Vec<(usize, Dyad)> = Vec::new();
        for (j, d) in study.isc.dyads.iter().enumerate() {
            let (Some(&a), Some(&b)) = (new_of_old.get(&d.a()), new_of_old.get(&d.b())) else {
                continue;
            };
            if study
                .exclusions
                .excludes_dyad(&profile.subjects[a], &profile.subjects[b])
            {
                continue;
            }
            if scope == Scope::IntraCommunityOnly && communities[a] != communities[b] {
                continue;
            }
            keep.push((j, Dyad::new(a, b)));
        }
        let before = keep.len();
        if !study.isc.values.is_empty() {
            keep.retain(|&(j, _)| study.isc.values.iter().any(|row| row[j].is_some()));
        }
        let dyads_without_isc = before - keep.len();
        if dyads_without_isc > 0 {
            log::info!("{dyads_without_isc} dyad(s) without any ISC value dropped");
        }
        keep.sort_by_key(|&(_, d)| d);

        let table = IscTable {
            subjects: profile.subjects.clone(),
            regions: study.isc.regions.clone(),
            dyads: keep.iter().map(|&(_, d)| d).collect(),
            values: study
                .isc
                .values
                .iter()
                .map(|row| keep.iter().map(|&(j, _)| row[j]).collect())
                .collect(),
            stage: Stage::RawR,
        };
        let mut all_rows = dyad_centrality_table(&profile, &profile.subjects)?;
        attach_ties(&mut all_rows, &study.graph, &profile.subjects)?;
        let by_dyad: BTreeMap<Dyad, DyadCentrality> = all_rows.into_iter().map(|r| (r.dyad, r)).collect();
        let dyads = table.dyads.iter().map(|d| by_dyad[d].clone()).collect();
        Ok(Self {
            profile,
            communities,
            table,
            dyads,
            dropped_subjects,
            split_excluded,
            dyads_without_isc,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.profile.len()
    }

    pub fn staged(&self, stage: Stage) -> Result<IscTable<f64>> {
        Ok(match stage {
            Stage::RawR => self.table.clone(),
            Stage::FisherZ => fisher_z(&self.table, FISHER_EPS)?,
            Stage::FisherZStandardized => standardize_within_region(&fisher_z(&self.table, FISHER_EPS)?)?,
        })
    }

    fn dyad_set(&self) -> BTreeSet<Dyad> {
        self.table.dyads.iter().copied().collect()
    }

    /// Similarity column restricted to the analysed dyads.
    fn restrict(&self, mut col: SimilarityColumn<f64>) -> SimilarityColumn<f64> {
        let keep = self.dyad_set();
        for (d, v) in col.dyads.iter().zip(col.values.iter_mut()) {
            if !keep.contains(d) {
                *v = None;
            }
        }
        col
    }

    fn attributes(&self, study: &Study) -> Result<Vec<Attributes>> {
        let attrs = study
            .attributes
            .as_ref()
            .ok_or_else(|| PipelineError::Config("demographic covariates need an attributes file".into()))?;
        Ok(self
            .profile
            .subjects
            .iter()
            .map(|s| {
                attrs.get(s).cloned().unwrap_or_else(|| {
                    log::warn!("subject `{s}` has no attributes row");
                    Attributes::default()
                })
            })
            .collect())
    }

    fn demographics(&self, study: &Study, scope: Scope) -> Result<Vec<SimilarityColumn<f64>>> {
        let attrs = self.attributes(study)?;
        Ok(
            demographic_similarity(&self.profile.subjects, &attrs, scope, Some(&self.communities))?
                .into_iter()
                .map(|c| self.restrict(c))
                .collect(),
        )
    }

    fn preferences(&self, study: &Study, scope: Scope) -> Result<Vec<SimilarityColumn<f64>>> {
        let (enjoyment, interest) = study
            .ratings
            .as_ref()
            .ok_or_else(|| PipelineError::Config("preference similarity needs a ratings file".into()))?;
        let mut out = Vec::new();
        for (name, m) in PREFERENCE_COLUMNS.iter().zip([enjoyment, interest]) {
            let col = rating_similarity(name, m, &self.profile.subjects, scope, Some(&self.communities))?;
            out.push(self.restrict(col));
        }
        Ok(out)
    }

    /// Per-dyad covariate columns aligned with `table.dyads`.
    fn dyad_covariates(
        &self,
        study: &Study,
        set: CovariateSet,
        scope: Scope,
    ) -> Result<Vec<(String, Vec<Option<f64>>)>> {
        let aligned =
            |c: &SimilarityColumn<f64>| -> Vec<Option<f64>> { self.table.dyads.iter().map(|&d| c.value(d)).collect() };
        let mut out = Vec::new();
        match set {
            CovariateSet::None => {}
            CovariateSet::Demographics | CovariateSet::DemographicsSocialDistance => {
                for c in self.demographics(study, scope)? {
                    out.push((c.name.clone(), aligned(&c)));
                }
                if set == CovariateSet::DemographicsSocialDistance {
                    out.push((
                        "social_distance".to_string(),
                        self.dyads.iter().map(|r| r.social_distance.map(f64::from)).collect(),
                    ));
                }
            }
            CovariateSet::Friendship => {
                out.push((
                    "friendship".to_string(),
                    self.dyads
                        .iter()
                        .map(|r| Some(f64::from(u8::from(r.friendship))))
                        .collect(),
                ));
            }
            CovariateSet::Preferences => {
                for c in self.preferences(study, scope)? {
                    out.push((c.name.clone(), aligned(&c)));
                }
            }
        }
        Ok(out)
    }

    /// Per-subject covariates: means over each subject's analysed dyads.
    fn subject_covariates(
        &self,
        study: &Study,
        set: CovariateSet,
        scope: Scope,
    ) -> Result<Vec<(String, Vec<Option<f64>>)>> {
        let mut out = Vec::new();
        match set {
            CovariateSet::None => {}
            CovariateSet::Demographics | CovariateSet::DemographicsSocialDistance => {
                for c in self.demographics(study, scope)? {
                    out.push((format!("mean_{}", c.name), subject_mean_similarity(&c)));
                }
                if set == CovariateSet::DemographicsSocialDistance {
                    let col = SimilarityColumn {
                        name: "social_distance".to_string(),
                        subjects: self.profile.subjects.clone(),
                        dyads: self.table.dyads.clone(),
                        values: self.dyads.iter().map(|r| r.social_distance.map(f64::from)).collect(),
                    };
                    out.push(("mean_social_distance".to_string(), subject_mean_similarity(&col)));
                }
            }
            CovariateSet::Friendship => {}
            CovariateSet::Preferences => {
                for c in self.preferences(study, scope)? {
                    out.push((format!("mean_{}", c.name), subject_mean_similarity(&c)));
                }
            }
        }
        Ok(out)
    }

    fn category_codes(&self) -> Vec<usize> {
        self.dyads
            .iter()
            .map(|r| match r.category {
                DyadCategory::LowLow => 0,
                DyadCategory::LowHigh => 1,
                DyadCategory::HighHigh => 2,
            })
            .collect()
    }
}

/// Rows where every column is present.
fn complete_rows(n: usize, columns: &[(String, Vec<Option<f64>>)]) -> Vec<usize> {
    (0..n)
        .filter(|&i| columns.iter().all(|(_, v)| v[i].is_some()))
        .collect()
}

fn push_columns(frame: &mut Frame<f64>, rows: &[usize], columns: &[(String, Vec<Option<f64>>)]) -> Result<()> {
    for (name, v) in columns {
        frame.push_numeric(name.clone(), rows.iter().map(|&i| v[i].unwrap()).collect())?;
    }
    Ok(())
}

fn responses(regions: &[String], values: &[Vec<Option<f64>>], rows: &[usize]) -> Vec<RegionResponse<f64>> {
    regions
        .iter()
        .zip(values)
        .map(|(region, row)| RegionResponse {
            region: region.clone(),
            values: rows.iter().map(|&i| row[i]).collect(),
        })
        .collect()
}

/// Significance counts for one model term across regions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilySummary {
    pub model: String,
    pub term: String,
    pub regions: usize,
    pub alpha: f64,
    pub significant: Vec<String>,
    pub failures: Vec<FailedFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedFit {
    pub region: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSummary {
    pub subjects: usize,
    pub high: usize,
    pub low: usize,
    pub median_in_degree: f64,
    pub dyads: usize,
    pub category_counts: BTreeMap<String, usize>,
    pub excluded_subjects: Vec<String>,
    pub excluded_dyads: usize,
    pub dropped_subjects: Vec<String>,
    pub split_excluded: Vec<String>,
    pub dyads_without_isc: usize,
    pub scope: Scope,
}

impl SampleSummary {
    pub fn of(sample: &Sample, study: &Study, config: &AnalysisConfig) -> Self {
        let (hh, lh, ll) = category_counts(&sample.dyads);
        Self {
            subjects: sample.n_subjects(),
            high: sample.profile.count(Group::High),
            low: sample.profile.count(Group::Low),
            median_in_degree: sample.profile.median,
            dyads: sample.table.dyads.len(),
            category_counts: [("HH", hh), ("LH", lh), ("LL", ll)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            excluded_subjects: study.exclusions.subjects.iter().cloned().collect(),
            excluded_dyads: study.exclusions.dyads.len(),
            dropped_subjects: sample.dropped_subjects.clone(),
            split_excluded: sample.split_excluded.clone(),
            dyads_without_isc: sample.dyads_without_isc,
            scope: config.scope(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub analysis: String,
    pub stage: Stage,
    pub sample: SampleSummary,
    pub families: Vec<FamilySummary>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<RegionStats<f64>>,
    pub summary: RunSummary,
}

fn summarize(outcomes: &[SweepOutcome<f64>], alpha: f64) -> Vec<FamilySummary> {
    let mut out = Vec::new();
    for o in outcomes {
        let mut families: BTreeMap<(String, String), FamilySummary> = BTreeMap::new();
        let mut order = Vec::new();
        for r in &o.rows {
            let key = (r.model.clone(), r.term.clone());
            let f = families.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                FamilySummary {
                    model: r.model.clone(),
                    term: r.term.clone(),
                    regions: 0,
                    alpha,
                    significant: Vec::new(),
                    failures: Vec::new(),
                }
            });
            f.regions += 1;
            if r.p_fdr < alpha {
                f.significant.push(r.region.clone());
            }
        }
        let failures: Vec<FailedFit> = o
            .failures
            .iter()
            .map(|(region, e)| FailedFit {
                region: region.clone(),
                error: e.to_string(),
            })
            .collect();
        for key in order {
            let mut f = families.remove(&key).unwrap();
            f.failures = failures.clone();
            out.push(f);
        }
    }
    out
}

fn all_failed(outcome: &SweepOutcome<f64>) -> Option<&Error> {
    (outcome.rows.is_empty())
        .then(|| outcome.failures.first().map(|(_, e)| e))
        .flatten()
}

pub fn subject_means(sample: &Sample, config: &AnalysisConfig) -> Result<SubjectMeans<f64>> {
    let table = sample.staged(config.subject_stage)?;
    Ok(subject_mean_isc(&table, config.scope(), Some(&sample.communities))?)
}

/// Mean ISC per subject regressed on the binary group (standardized OLS)
/// and Spearman correlation with raw in-degree, per region, per covariate
/// set.
pub fn run_subject_level(study: &Study, config: &AnalysisConfig) -> Result<RunOutput> {
    let sample = Sample::build(study, config)?;
    let means = subject_means(&sample, config)?;
    let n = sample.n_subjects();
    let high: Vec<Option<f64>> = sample
        .profile
        .group
        .iter()
        .map(|&g| Some(if g == Group::High { 1.0 } else { 0.0 }))
        .collect();

    let mut outcomes = Vec::new();
    for &set in &config.covariates {
        if set == CovariateSet::Friendship {
            log::warn!("friendship is a dyad-level covariate; no subject-level model");
            continue;
        }
        let mut columns = vec![(HIGH.to_string(), high.clone())];
        columns.extend(sample.subject_covariates(study, set, config.scope())?);
        let rows = complete_rows(n, &columns);
        if rows.len() < n {
            log::warn!("group{}: {} subject(s) lack covariates", set.suffix(), n - rows.len());
        }
        let mut frame = Frame::new(rows.len());
        push_columns(&mut frame, &rows, &columns)?;
        let names: Vec<&str> = columns[1..].iter().map(|(c, _)| c.as_str()).collect();
        let spec = DesignSpec::new("mean_isc", &[HIGH]).with_covariates(&names);
        let model = SweepModel::Ols {
            frame: &frame,
            spec: &spec,
        };
        let name = format!("group{}", set.suffix());
        outcomes.push(region_sweep(
            &name,
            &model,
            &responses(&means.regions, &means.values, &rows),
            config.sidedness,
        )?);

        if set == CovariateSet::None {
            let x: Vec<f64> = sample.profile.in_degree.iter().map(|&k| k as f64).collect();
            let model = SweepModel::Spearman { x: &x };
            let all: Vec<usize> = (0..n).collect();
            outcomes.push(region_sweep(
                "spearman",
                &model,
                &responses(&means.regions, &means.values, &all),
                config.sidedness,
            )?);
        }
    }
    finish(
        "subject-level",
        config.subject_stage,
        &sample,
        study,
        config,
        outcomes,
        config.fdr_alpha.subject,
    )
}

fn finish(
    analysis: &str,
    stage: Stage,
    sample: &Sample,
    study: &Study,
    config: &AnalysisConfig,
    outcomes: Vec<SweepOutcome<f64>>,
    alpha: f64,
) -> Result<RunOutput> {
    let families = summarize(&outcomes, alpha);
    let rows = outcomes.into_iter().flat_map(|o| o.rows).collect();
    Ok(RunOutput {
        rows,
        summary: RunSummary {
            analysis: analysis.to_string(),
            stage,
            sample: SampleSummary::of(sample, study, config),
            families,
        },
    })
}

fn lmm_options(config: &AnalysisConfig) -> LmmOptions {
    LmmOptions {
        equal_variances: config.equal_variances,
        ..Default::default()
    }
}

/// Crossed random-intercept models per region: the three planned category
/// contrasts, the log minimum in-degree model, both under each covariate
/// set, and ISC on preference similarity with and without the category.
pub fn run_dyad_level(study: &Study, config: &AnalysisConfig) -> Result<RunOutput> {
    let sample = Sample::build(study, config)?;
    let table = sample.staged(config.dyad_stage)?;
    let m = table.dyads.len();
    let n_subjects = sample.n_subjects();
    let codes = sample.category_codes();
    let log_min: Vec<Option<f64>> = sample.dyads.iter().map(|r| Some(r.log_min_in_degree())).collect();
    let options = lmm_options(config);
    let levels: Vec<String> = CATEGORY_LEVELS.iter().map(|s| s.to_string()).collect();

    let mut outcomes = Vec::new();
    let mut fit = |name: String,
                   rows: &[usize],
                   columns: &[(String, Vec<Option<f64>>)],
                   with_category: bool,
                   fixed: &[&str],
                   report: LmmReport|
     -> Result<()> {
        let mut frame = Frame::new(rows.len());
        if with_category {
            frame.push_factor(CATEGORY, levels.clone(), rows.iter().map(|&i| codes[i]).collect())?;
        }
        push_columns(&mut frame, rows, columns)?;
        let covs: Vec<&str> = columns
            .iter()
            .map(|(c, _)| c.as_str())
            .filter(|c| !fixed.contains(c))
            .collect();
        let spec = DesignSpec::new("isc", fixed).with_covariates(&covs);
        let dyads: Vec<Dyad> = rows.iter().map(|&i| table.dyads[i]).collect();
        let model = SweepModel::Lmm {
            dyads: &dyads,
            n_subjects,
            frame: &frame,
            spec: &spec,
            report,
            options,
        };
        outcomes.push(region_sweep(
            &name,
            &model,
            &responses(&table.regions, &table.values, rows),
            config.sidedness,
        )?);
        Ok(())
    };

    for &set in &config.covariates {
        let covs = sample.dyad_covariates(study, set, config.scope())?;
        let rows = complete_rows(m, &covs);
        if rows.len() < m {
            log::warn!("covariates{}: {} dyad(s) lack covariates", set.suffix(), m - rows.len());
        }
        fit(
            format!("{CATEGORY}{}", set.suffix()),
            &rows,
            &covs,
            true,
            &[CATEGORY],
            LmmReport::Contrasts {
                factor: CATEGORY.to_string(),
                contrasts: category_contrasts(),
            },
        )?;
        let mut with_log = vec![(LOG_MIN_IN_DEGREE.to_string(), log_min.clone())];
        with_log.extend(covs.iter().cloned());
        fit(
            format!("{LOG_MIN_IN_DEGREE}{}", set.suffix()),
            &rows,
            &with_log,
            false,
            &[LOG_MIN_IN_DEGREE],
            LmmReport::Terms,
        )?;

        if set == CovariateSet::Preferences {
            for (name, values) in &covs {
                let one = vec![(name.clone(), values.clone())];
                let rows = complete_rows(m, &one);
                fit(name.clone(), &rows, &one, false, &[name.as_str()], LmmReport::Terms)?;
                fit(
                    format!("{name}+{CATEGORY}"),
                    &rows,
                    &one,
                    true,
                    &[name.as_str(), CATEGORY],
                    LmmReport::Terms,
                )?;
            }
        }
    }
    finish(
        "dyad-level",
        config.dyad_stage,
        &sample,
        study,
        config,
        outcomes,
        config.fdr_alpha.dyad,
    )
}

/// Preference similarity as the outcome: subject-level OLS of mean
/// similarity on the group, dyad-level crossed model with the category
/// contrasts. Rows carry the rating (`enjoyment`, `interest`) in the region
/// column.
pub fn run_behavioral(study: &Study, config: &AnalysisConfig) -> Result<RunOutput> {
    let sample = Sample::build(study, config)?;
    let scope = config.scope();
    let prefs = sample.preferences(study, scope)?;
    let names: Vec<String> = prefs
        .iter()
        .map(|c| c.name.trim_end_matches("_sim").to_string())
        .collect();

    let n = sample.n_subjects();
    let means: Vec<Vec<Option<f64>>> = prefs.iter().map(subject_mean_similarity).collect();
    let rows: Vec<usize> = (0..n).collect();
    let mut frame = Frame::new(n);
    frame.push_numeric(
        HIGH,
        sample
            .profile
            .group
            .iter()
            .map(|&g| if g == Group::High { 1.0 } else { 0.0 })
            .collect(),
    )?;
    let spec = DesignSpec::new("mean_similarity", &[HIGH]);
    let subject = region_sweep(
        "subject-group",
        &SweepModel::Ols {
            frame: &frame,
            spec: &spec,
        },
        &responses(&names, &means, &rows),
        config.sidedness,
    )?;

    let m = sample.table.dyads.len();
    let mut dframe = Frame::new(m);
    dframe.push_factor(
        CATEGORY,
        CATEGORY_LEVELS.iter().map(|s| s.to_string()).collect(),
        sample.category_codes(),
    )?;
    let dspec = DesignSpec::new("similarity", &[CATEGORY]);
    let values: Vec<Vec<Option<f64>>> = prefs
        .iter()
        .map(|c| sample.table.dyads.iter().map(|&d| c.value(d)).collect())
        .collect();
    let dyad = region_sweep(
        "dyad-category",
        &SweepModel::Lmm {
            dyads: &sample.table.dyads,
            n_subjects: n,
            frame: &dframe,
            spec: &dspec,
            report: LmmReport::Contrasts {
                factor: CATEGORY.to_string(),
                contrasts: category_contrasts(),
            },
            options: lmm_options(config),
        },
        &responses(&names, &values, &(0..m).collect::<Vec<_>>()),
        config.sidedness,
    )?;

    for o in [&subject, &dyad] {
        if let Some(e) = all_failed(o) {
            return Err(e.clone().into());
        }
    }
    finish(
        "behavior",
        Stage::RawR,
        &sample,
        study,
        config,
        vec![subject, dyad],
        config.fdr_alpha.behavior,
    )
}
