use std::fs;
use std::path::{Path, PathBuf};

use annak_core::graphnet::SplitMode;
use annak_core::isc::{PartialRunPolicy, Scope, Stage};
use annak_core::stats::dist::Sidedness;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

pub const RESOLVED_CONFIG: &str = "resolved_config.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovariateSet {
    None,
    Demographics,
    DemographicsSocialDistance,
    Friendship,
    Preferences,
}

impl CovariateSet {
    pub fn label(self) -> &'static str {
        match self {
            CovariateSet::None => "none",
            CovariateSet::Demographics => "demographics",
            CovariateSet::DemographicsSocialDistance => "demographics-social-distance",
            CovariateSet::Friendship => "friendship",
            CovariateSet::Preferences => "preferences",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "none" => CovariateSet::None,
            "demographics" => CovariateSet::Demographics,
            "demographics-social-distance" | "demographics+social-distance" | "demographics+social_distance" => {
                CovariateSet::DemographicsSocialDistance
            }
            "friendship" => CovariateSet::Friendship,
            "preferences" => CovariateSet::Preferences,
            _ => return None,
        })
    }

    pub fn needs_social_distance(self) -> bool {
        self == CovariateSet::DemographicsSocialDistance
    }

    pub fn needs_attributes(self) -> bool {
        matches!(
            self,
            CovariateSet::Demographics | CovariateSet::DemographicsSocialDistance
        )
    }

    pub fn needs_ratings(self) -> bool {
        self == CovariateSet::Preferences
    }

    /// Suffix appended to model names, empty for `None`.
    pub fn suffix(self) -> String {
        match self {
            CovariateSet::None => String::new(),
            other => format!("+{}", other.label()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputPaths {
    /// `nominator,nominee`
    pub edges: Option<PathBuf>,
    /// `subject,community`
    pub communities: Option<PathBuf>,
    /// `subject,path`; each path holds `run,<region>...` rows.
    pub timeseries: Option<PathBuf>,
    /// Precomputed raw ISC table, `region,subject_a,subject_b,stage,value`.
    pub isc: Option<PathBuf>,
    /// `subject,item,enjoyment,interest`
    pub ratings: Option<PathBuf>,
    /// `subject,age,gender,home_country,ethnicities`
    pub attributes: Option<PathBuf>,
    /// `subject_a,subject_b`; an empty `subject_b` drops the whole subject.
    pub exclusions: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FdrAlpha {
    pub subject: f64,
    pub dyad: f64,
    pub behavior: f64,
}

impl Default for FdrAlpha {
    fn default() -> Self {
        Self {
            subject: 0.05,
            dyad: 0.001,
            behavior: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub inputs: InputPaths,
    /// `None` until resolved: `All`, or `IntraCommunityOnly` when a covariate
    /// set needs social distance.
    pub scope: Option<Scope>,
    pub split: SplitMode,
    pub partial_run_policy: PartialRunPolicy,
    pub subject_stage: Stage,
    pub dyad_stage: Stage,
    pub covariates: Vec<CovariateSet>,
    pub fdr_alpha: FdrAlpha,
    pub sidedness: Sidedness,
    /// Constrain the two subject variance components to be equal.
    pub equal_variances: bool,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            inputs: InputPaths::default(),
            scope: None,
            split: SplitMode::MedianSplit,
            partial_run_policy: PartialRunPolicy::Exclude,
            subject_stage: Stage::FisherZ,
            dyad_stage: Stage::FisherZStandardized,
            covariates: vec![CovariateSet::None],
            fdr_alpha: FdrAlpha::default(),
            sidedness: Sidedness::TwoSided,
            equal_variances: false,
            output_dir: PathBuf::from("out"),
            seed: 0,
            threads: None,
        }
    }
}

fn config_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

impl AnalysisConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
    }

    pub fn scope(&self) -> Scope {
        self.scope.unwrap_or_default()
    }

    /// Check consistency and fill in defaults. Runs before any data is read.
    pub fn resolve(mut self) -> Result<Self> {
        for (name, a) in [
            ("subject", self.fdr_alpha.subject),
            ("dyad", self.fdr_alpha.dyad),
            ("behavior", self.fdr_alpha.behavior),
        ] {
            if !(a > 0.0 && a < 1.0) {
                return Err(config_err(format!("fdr alpha for {name} must lie in (0, 1), got {a}")));
            }
        }
        if self.subject_stage == Stage::RawR {
            return Err(config_err("subject-level means need a Fisher z stage"));
        }
        if self.covariates.is_empty() {
            self.covariates.push(CovariateSet::None);
        }
        self.covariates.sort();
        self.covariates.dedup();

        let needs_distance = self.covariates.iter().any(|c| c.needs_social_distance());
        self.scope =
            match (self.scope, needs_distance) {
                (Some(Scope::All), true) => return Err(config_err(
                    "social-distance covariates are defined within communities only; use --scope intra-community-only",
                )),
                (Some(s), _) => Some(s),
                (None, true) => Some(Scope::IntraCommunityOnly),
                (None, false) => Some(Scope::All),
            };
        if self.threads == Some(0) {
            return Err(config_err("threads must be positive"));
        }

        let inputs = &self.inputs;
        for (name, path) in [
            ("edges", &inputs.edges),
            ("communities", &inputs.communities),
            ("timeseries", &inputs.timeseries),
            ("isc", &inputs.isc),
            ("ratings", &inputs.ratings),
            ("attributes", &inputs.attributes),
            ("exclusions", &inputs.exclusions),
        ] {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(config_err(format!("{name} file {} does not exist", p.display())));
                }
            }
        }
        if self.covariates.iter().any(|c| c.needs_attributes()) && inputs.attributes.is_none() {
            return Err(config_err("demographic covariates need an attributes file"));
        }
        if self.covariates.iter().any(|c| c.needs_ratings()) && inputs.ratings.is_none() {
            return Err(config_err("preference covariates need a ratings file"));
        }
        Ok(self)
    }

    /// Inputs needed by a network-dependent analysis.
    pub fn require_network(&self) -> Result<()> {
        if self.inputs.edges.is_none() || self.inputs.communities.is_none() {
            return Err(config_err("edges and communities files are required"));
        }
        Ok(())
    }

    pub fn require_neural(&self) -> Result<()> {
        match (&self.inputs.timeseries, &self.inputs.isc) {
            (None, None) => Err(config_err("a timeseries manifest or an ISC table is required")),
            (Some(_), Some(_)) => Err(config_err(
                "give either a timeseries manifest or an ISC table, not both",
            )),
            _ => Ok(()),
        }
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        let path = dir.join(RESOLVED_CONFIG);
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        fs::write(&path, text + "\n").map_err(|e| PipelineError::io(path, e))
    }
}
