//! File-in, file-out wrappers used by the CLI.

use std::path::Path;

use annak_core::graphnet::{category_counts, degree_summary, in_degree_centrality, CentralityProfile, DegreeSummary};
use annak_core::isc::{plan_dyads, Stage};
use serde::Serialize;

use crate::analysis::{run_behavioral, run_dyad_level, run_subject_level, subject_means, RunOutput, Sample, Study};
use crate::config::AnalysisConfig;
use crate::error::{PipelineError, Result};
use crate::io::{self, Exclusions};

fn prepare_output(config: &AnalysisConfig) -> Result<&Path> {
    let dir = config.output_dir.as_path();
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    config.write_resolved(dir)?;
    Ok(dir)
}

fn write_run(out: &RunOutput, dir: &Path, stem: &str) -> Result<()> {
    io::write_results(&out.rows, &dir.join(format!("{stem}.csv")))?;
    io::write_json(&out.summary, &dir.join(format!("{stem}_summary.json")))
}

#[derive(Debug, Serialize)]
struct NetworkSummary {
    nodes: usize,
    edges: usize,
    duplicate_edges_dropped: usize,
    communities: Vec<String>,
    all_nodes: Option<DegreeSummary>,
    sample: Option<DegreeSummary>,
    median: f64,
    high: usize,
    low: usize,
    split_excluded: Vec<String>,
    category_counts: [usize; 3],
}

/// In-degree, median split and dyad table over the network (minus excluded
/// subjects, restricted to subjects with neural data when given).
pub fn network(config: &AnalysisConfig) -> Result<()> {
    config.require_network()?;
    let dir = prepare_output(config)?;
    let inputs = &config.inputs;
    let graph = io::read_graph(inputs.edges.as_ref().unwrap(), inputs.communities.as_ref().unwrap())?;
    let exclusions = match &inputs.exclusions {
        Some(p) => io::read_exclusions(p)?,
        None => Exclusions::default(),
    };
    let degrees = in_degree_centrality(&graph);
    let mut sample: Vec<String> = if inputs.isc.is_some() || inputs.timeseries.is_some() {
        Study::load_isc(config)?.subjects
    } else {
        graph.nodes().to_vec()
    };
    sample.retain(|s| !exclusions.subjects.contains(s) && graph.index_of(s).is_some());

    let (profile, split_excluded) = CentralityProfile::build(&degrees, &sample, config.split)?;
    let communities: Vec<String> = profile
        .subjects
        .iter()
        .map(|s| graph.community_of(s).unwrap().to_string())
        .collect();
    let mut rows = annak_core::graphnet::dyad_centrality_table(&profile, &profile.subjects)?;
    annak_core::graphnet::attach_ties(&mut rows, &graph, &profile.subjects)?;
    rows.retain(|r| !exclusions.excludes_dyad(&profile.subjects[r.dyad.a()], &profile.subjects[r.dyad.b()]));

    io::write_centrality(&profile, &communities, &dir.join("centrality.csv"))?;
    io::write_dyads(&rows, &profile.subjects, &dir.join("dyads.csv"))?;
    let (hh, lh, ll) = category_counts(&rows);
    let all: Vec<usize> = graph.nodes().iter().map(|s| degrees[s]).collect();
    let summary = NetworkSummary {
        nodes: graph.nodes().len(),
        edges: graph.edges().len(),
        duplicate_edges_dropped: graph.duplicates_dropped(),
        communities: graph.communities().into_iter().map(str::to_string).collect(),
        all_nodes: degree_summary(&all),
        sample: degree_summary(&profile.in_degree),
        median: profile.median,
        high: profile.count(annak_core::graphnet::Group::High),
        low: profile.count(annak_core::graphnet::Group::Low),
        split_excluded,
        category_counts: [hh, lh, ll],
    };
    io::write_json(&summary, &dir.join("network_summary.json"))
}

#[derive(Debug, Serialize)]
struct IscSummary {
    subjects: usize,
    regions: usize,
    dyads: usize,
    excluded_by_run_alignment: usize,
    missing_per_region: Vec<(String, usize)>,
}

/// Raw ISC for every dyad of the panel.
pub fn isc(config: &AnalysisConfig) -> Result<()> {
    let dir = prepare_output(config)?;
    let path = config
        .inputs
        .timeseries
        .as_ref()
        .ok_or_else(|| PipelineError::Config("isc needs a timeseries manifest".into()))?;
    let panel = io::read_panel(path)?;
    let dyads = annak_core::all_dyads(panel.subjects().len());
    let excluded = plan_dyads(&panel.layouts(), &dyads, config.partial_run_policy)
        .iter()
        .filter(|(_, p)| p.is_none())
        .count();
    let table = annak_core::isc::isc_table(&panel, &dyads, config.partial_run_policy)?;
    io::write_isc(&table, &dir.join("isc.csv"))?;
    let summary = IscSummary {
        subjects: table.subjects.len(),
        regions: table.regions.len(),
        dyads: table.dyads.len(),
        excluded_by_run_alignment: excluded,
        missing_per_region: table
            .regions
            .iter()
            .zip(&table.values)
            .map(|(r, row)| (r.clone(), row.iter().filter(|v| v.is_none()).count()))
            .collect(),
    };
    io::write_json(&summary, &dir.join("isc_summary.json"))
}

pub fn subject_level_with(study: &Study, config: &AnalysisConfig) -> Result<()> {
    let dir = prepare_output(config)?;
    let out = run_subject_level(study, config)?;
    let sample = Sample::build(study, config)?;
    let means = subject_means(&sample, config)?;
    let columns: Vec<(String, Vec<Option<f64>>)> = means
        .regions
        .iter()
        .zip(&means.values)
        .map(|(r, v)| (r.clone(), v.clone()))
        .collect();
    io::write_subject_table(&means.subjects, &columns, &dir.join("subject_means.csv"))?;
    write_run(&out, dir, "subject_level")
}

pub fn dyad_level_with(study: &Study, config: &AnalysisConfig) -> Result<()> {
    let dir = prepare_output(config)?;
    let out = run_dyad_level(study, config)?;
    write_run(&out, dir, "dyad_level")
}

pub fn behavior_with(study: &Study, config: &AnalysisConfig) -> Result<()> {
    let dir = prepare_output(config)?;
    let out = run_behavioral(study, config)?;
    write_run(&out, dir, "behavior")
}

pub fn subject_level(config: &AnalysisConfig) -> Result<()> {
    subject_level_with(&Study::load(config)?, config)
}

pub fn dyad_level(config: &AnalysisConfig) -> Result<()> {
    dyad_level_with(&Study::load(config)?, config)
}

/// Behavioral models need no neural data; an ISC source is still read when
/// given so the sample matches the neural analyses.
pub fn behavior(config: &AnalysisConfig) -> Result<()> {
    let study = if config.inputs.isc.is_some() || config.inputs.timeseries.is_some() {
        Study::load(config)?
    } else {
        behavior_study(config)?
    };
    behavior_with(&study, config)
}

fn behavior_study(config: &AnalysisConfig) -> Result<Study> {
    config.require_network()?;
    let inputs = &config.inputs;
    let graph = io::read_graph(inputs.edges.as_ref().unwrap(), inputs.communities.as_ref().unwrap())?;
    let ratings = inputs
        .ratings
        .as_deref()
        .map(io::read_ratings)
        .transpose()?
        .ok_or_else(|| PipelineError::Config("behav needs a ratings file".into()))?;
    // sample: network members with complete ratings in both matrices
    let subjects: Vec<String> = graph
        .nodes()
        .iter()
        .filter(|s| ratings.0.row(s).is_some() && ratings.1.row(s).is_some())
        .cloned()
        .collect();
    let n = subjects.len();
    let isc = annak_core::isc::IscTable {
        subjects,
        regions: Vec::new(),
        dyads: annak_core::all_dyads(n),
        values: Vec::new(),
        stage: Stage::RawR,
    };
    let exclusions = match &inputs.exclusions {
        Some(p) => io::read_exclusions(p)?,
        None => Exclusions::default(),
    };
    Ok(Study {
        graph,
        isc,
        ratings: Some(ratings),
        attributes: None,
        exclusions,
    })
}
