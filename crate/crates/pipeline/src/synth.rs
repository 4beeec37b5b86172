//! Synthetic studies with planted structure, in memory or written to disk.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use annak_core::all_dyads;
use annak_core::behav::{Attributes, RatingMatrix};
use annak_core::graphnet::{in_degree_centrality, SocialGraph};
use annak_core::isc::{isc_table_streaming, IscTable, PartialRunPolicy};
use annak_core::synth::{
    alpha_from_in_degree, generate_attributes, generate_network, generate_ratings, generate_region,
    generate_timeseries, reference_degree_profile, region_names, subject_names, GeneratorKind, PlantSpec, RatingSpec,
    TruthManifest,
};
use serde::{Deserialize, Serialize};

use crate::analysis::Study;
use crate::config::{AnalysisConfig, CovariateSet};
use crate::error::{PipelineError, Result};
use crate::io::{self, Exclusions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthOptions {
    pub subjects: usize,
    pub regions: usize,
    pub planted: usize,
    pub runs: u32,
    pub timepoints_per_run: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Normativity weight of every subject in unplanted regions.
    pub null_alpha: f64,
    pub communities: usize,
    pub generator: GeneratorKind,
    /// Replace the rank-based α with this constant everywhere.
    pub constant_alpha: Option<f64>,
    pub rating_items: usize,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            subjects: 60,
            regions: 20,
            planted: 5,
            runs: 1,
            timepoints_per_run: 5000,
            alpha_min: 0.3,
            alpha_max: 0.8,
            null_alpha: 0.3,
            communities: 2,
            generator: GeneratorKind::SharedSignal,
            constant_alpha: None,
            rating_items: 14,
            seed: 1,
        }
    }
}

/// Evenly spread planted region indices.
pub fn planted_indices(regions: usize, planted: usize) -> Vec<usize> {
    let planted = planted.min(regions);
    (0..planted).map(|i| i * regions / planted).collect()
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub options: SynthOptions,
    pub graph: SocialGraph,
    pub in_degree: Vec<usize>,
    pub spec: PlantSpec,
    pub enjoyment: RatingMatrix,
    pub interest: RatingMatrix,
    pub attributes: BTreeMap<String, Attributes>,
}

impl Synthetic {
    pub fn build(options: &SynthOptions) -> Result<Self> {
        let n = options.subjects;
        let profile = reference_degree_profile(n, options.seed);
        let graph = generate_network(&profile, options.communities, options.seed)?;
        let degrees = in_degree_centrality(&graph);
        let subjects = subject_names(n);
        let in_degree: Vec<usize> = subjects.iter().map(|s| degrees[s]).collect();
        let alpha = match options.constant_alpha {
            Some(a) => vec![a; n],
            None => alpha_from_in_degree(&in_degree, options.alpha_min, options.alpha_max),
        };
        let mut spec = PlantSpec::new(
            subjects.clone(),
            region_names(options.regions),
            planted_indices(options.regions, options.planted).into_iter().collect(),
            options.runs,
            options.timepoints_per_run,
            alpha.clone(),
            options.constant_alpha.unwrap_or(options.null_alpha),
            options.seed,
        );
        spec.generator = options.generator;
        spec.validate()?;
        let rating = |seed: u64| RatingSpec {
            items: options.rating_items,
            seed,
            ..Default::default()
        };
        let enjoyment = generate_ratings(&subjects, &alpha, &rating(options.seed))?;
        let interest = generate_ratings(&subjects, &alpha, &rating(options.seed.wrapping_add(1)))?;
        let attributes = subjects
            .iter()
            .cloned()
            .zip(generate_attributes(n, options.seed))
            .collect();
        Ok(Self {
            options: options.clone(),
            graph,
            in_degree,
            spec,
            enjoyment,
            interest,
            attributes,
        })
    }

    /// Raw ISC, generating one region at a time.
    pub fn isc(&self, policy: PartialRunPolicy) -> Result<IscTable<f64>> {
        let layouts = self.spec.layouts()?;
        let dyads = all_dyads(self.spec.subjects.len());
        Ok(isc_table_streaming(
            &self.spec.subjects,
            &self.spec.regions,
            &layouts,
            &dyads,
            policy,
            |r| generate_region(&self.spec, r).expect("validated spec"),
        )?)
    }

    pub fn study(&self, policy: PartialRunPolicy) -> Result<Study> {
        Ok(Study {
            graph: self.graph.clone(),
            isc: self.isc(policy)?,
            ratings: Some((self.enjoyment.clone(), self.interest.clone())),
            attributes: Some(self.attributes.clone()),
            exclusions: Exclusions::default(),
        })
    }

    pub fn truth(&self) -> TruthManifest {
        TruthManifest::new(&self.spec, &self.in_degree)
    }

    pub fn planted_regions(&self) -> Vec<String> {
        self.truth().planted_regions
    }

    /// Write the dataset plus `truth.json` and a ready-to-run `config.json`.
    pub fn write(&self, dir: &Path) -> Result<AnalysisConfig> {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        let dir = dir.canonicalize().map_err(|e| PipelineError::io(dir, e))?;
        let path = |name: &str| -> PathBuf { dir.join(name) };
        io::write_graph(&self.graph, &path("edges.csv"), &path("communities.csv"))?;
        let panel = generate_timeseries::<f64>(&self.spec)?;
        let manifest = io::write_panel(&panel, &path("timeseries"))?;
        io::write_ratings(&self.enjoyment, &self.interest, &path("ratings.csv"))?;
        io::write_attributes(&self.attributes, &path("attributes.csv"))?;
        io::write_json(&self.truth(), &path("truth.json"))?;
        io::write_json(&self.options, &path("synth.json"))?;
        let mut config = AnalysisConfig {
            seed: self.options.seed,
            output_dir: path("results"),
            covariates: vec![CovariateSet::None],
            ..Default::default()
        };
        config.inputs.edges = Some(path("edges.csv"));
        config.inputs.communities = Some(path("communities.csv"));
        config.inputs.timeseries = Some(manifest);
        config.inputs.ratings = Some(path("ratings.csv"));
        config.inputs.attributes = Some(path("attributes.csv"));
        io::write_json(&config, &path("config.json"))?;
        Ok(config)
    }
}
