//! Synthetic networks, ratings and regional time series with a planted
//! centrality-to-normativity structure, plus the analytic ISC expectation.
//!
//! Shared-signal model, region `g`:
//! `x_i(t) = α_i s_g(t) + sqrt(1 - α_i²) ε_i(t)`, so `E r_ij = α_i α_j`.
//!
//! Nearest-neighbour model: `K` independent basis signals with Gaussian-bump
//! loadings `w_k(p)` on a latent position `p_i = α_i` (normalized so
//! `Σ w_k² = 1`) and coupling `c`:
//! `x_i = c Σ_k w_k(p_i) b_k + sqrt(1 - c²) ε_i`, so
//! `E r_ij = c² Σ_k w_k(p_i) w_k(p_j)`.
//!
//! Every region draws from its own ChaCha stream keyed by the seed and the
//! region index, so any single region can be regenerated on its own.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::behav::{Attributes, RatingMatrix};
use crate::dyad::Dyad;
use crate::error::{Error, Result};
use crate::graphnet::SocialGraph;
use crate::isc::{RunId, RunLayout, SubjectSeries, TimeSeriesPanel};
use crate::scalar::Scalar;
use crate::stats::spearman::average_ranks;

const NETWORK_STREAM: u64 = u64::MAX;
const RATING_STREAM: u64 = u64::MAX - 1;
const SHUFFLE_STREAM: u64 = u64::MAX - 2;
const ATTRIBUTE_STREAM: u64 = u64::MAX - 3;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn subject_names(n: usize) -> Vec<String> {
    let width = n.to_string().len().max(2);
    (1..=n).map(|i| format!("sub{i:0width$}")).collect()
}

pub fn region_names(n: usize) -> Vec<String> {
    let width = n.to_string().len().max(3);
    (1..=n).map(|i| format!("roi{i:0width$}")).collect()
}

/// Counts of subjects at in-degree 0, 1, 2, ... for a right-skewed 63-person
/// sample: median 2, maximum 9, 23 subjects above the median.
pub const REFERENCE_DEGREE_COUNTS: [usize; 10] = [10, 16, 14, 8, 6, 4, 2, 1, 1, 1];

/// In-degree sequence of length `n` following [`REFERENCE_DEGREE_COUNTS`] by
/// quantile, shuffled over subjects with `seed`.
pub fn reference_degree_profile(n: usize, seed: u64) -> Vec<usize> {
    let template: Vec<usize> = REFERENCE_DEGREE_COUNTS
        .iter()
        .enumerate()
        .flat_map(|(k, &c)| std::iter::repeat(k).take(c))
        .collect();
    let m = template.len();
    let mut out: Vec<usize> = (0..n).map(|i| template[i * m / n.max(1)]).collect();
    out.shuffle(&mut rng_for(seed, SHUFFLE_STREAM));
    out
}

/// Directed graph whose in-degrees equal `in_degrees`. Subjects are dealt
/// round-robin into `n_communities` communities and nominators are drawn
/// uniformly from the nominee's community.
pub fn generate_network(in_degrees: &[usize], n_communities: usize, seed: u64) -> Result<SocialGraph> {
    let n = in_degrees.len();
    if n < 4 {
        return Err(Error::TooFewSubjects { needed: 4, got: n });
    }
    if n_communities == 0 {
        return Err(Error::InvalidSpec("need at least one community".into()));
    }
    let names = subject_names(n);
    let community: Vec<usize> = (0..n).map(|i| i % n_communities).collect();
    let members: Vec<Vec<usize>> = (0..n_communities)
        .map(|c| (0..n).filter(|&i| community[i] == c).collect())
        .collect();
    let mut rng = rng_for(seed, NETWORK_STREAM);
    let mut edges = Vec::new();
    for (j, &k) in in_degrees.iter().enumerate() {
        let pool: Vec<usize> = members[community[j]].iter().copied().filter(|&i| i != j).collect();
        if k > pool.len() {
            return Err(Error::InfeasibleDegrees(format!(
                "{} needs {k} nominators but has {} possible",
                names[j],
                pool.len()
            )));
        }
        let mut chosen: Vec<usize> = sample(&mut rng, pool.len(), k).into_iter().map(|p| pool[p]).collect();
        chosen.sort_unstable();
        edges.extend(chosen.into_iter().map(|i| (names[i].clone(), names[j].clone())));
    }
    let membership = names
        .iter()
        .cloned()
        .zip(community.iter().map(|c| format!("c{}", c + 1)));
    SocialGraph::new(membership, edges)
}

/// `α_min + (α_max - α_min) · rank / (n - 1)` with 0-based average ranks of
/// the in-degrees.
pub fn alpha_from_in_degree(in_degrees: &[usize], alpha_min: f64, alpha_max: f64) -> Vec<f64> {
    let n = in_degrees.len();
    if n < 2 {
        return vec![alpha_max; n];
    }
    let k: Vec<f64> = in_degrees.iter().map(|&d| d as f64).collect();
    average_ranks(&k)
        .into_iter()
        .map(|r| alpha_min + (alpha_max - alpha_min) * (r - 1.0) / (n - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum GeneratorKind {
    SharedSignal,
    NearestNeighbor { basis: usize, width: f64, coupling: f64 },
}

impl Default for GeneratorKind {
    fn default() -> Self {
        GeneratorKind::SharedSignal
    }
}

impl GeneratorKind {
    pub fn nearest_neighbor() -> Self {
        GeneratorKind::NearestNeighbor {
            basis: 6,
            width: 0.08,
            coupling: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub subjects: Vec<String>,
    pub regions: Vec<String>,
    /// Indices into `regions`.
    pub planted_regions: BTreeSet<usize>,
    pub run_lengths: BTreeMap<RunId, usize>,
    /// Per-subject normativity weight, aligned with `subjects`.
    pub alpha: Vec<f64>,
    pub null_alpha: f64,
    pub seed: u64,
    #[serde(default)]
    pub generator: GeneratorKind,
    /// Usable runs per subject index where not all runs are usable.
    #[serde(default)]
    pub partial_runs: BTreeMap<usize, BTreeSet<RunId>>,
}

impl PlantSpec {
    /// Equal-length runs `1..=runs`, nothing partial.
    pub fn new(
        subjects: Vec<String>,
        regions: Vec<String>,
        planted_regions: BTreeSet<usize>,
        runs: u32,
        timepoints_per_run: usize,
        alpha: Vec<f64>,
        null_alpha: f64,
        seed: u64,
    ) -> Self {
        Self {
            subjects,
            regions,
            planted_regions,
            run_lengths: (1..=runs).map(|r| (r, timepoints_per_run)).collect(),
            alpha,
            null_alpha,
            seed,
            generator: GeneratorKind::SharedSignal,
            partial_runs: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.len() != self.subjects.len() {
            return Err(Error::LengthMismatch {
                left: self.subjects.len(),
                right: self.alpha.len(),
            });
        }
        let unit = |a: f64| (0.0..=1.0).contains(&a);
        if !self.alpha.iter().all(|&a| unit(a)) || !unit(self.null_alpha) {
            return Err(Error::InvalidSpec("alpha outside [0, 1]".into()));
        }
        if let Some(&g) = self.planted_regions.iter().find(|&&g| g >= self.regions.len()) {
            return Err(Error::InvalidSpec(format!("planted region {g} out of range")));
        }
        if let GeneratorKind::NearestNeighbor { basis, width, coupling } = self.generator {
            if basis == 0 || width <= 0.0 || !unit(coupling) {
                return Err(Error::InvalidSpec("nearest-neighbour parameters".into()));
            }
        }
        for (&s, runs) in &self.partial_runs {
            if s >= self.subjects.len() || runs.iter().any(|r| !self.run_lengths.contains_key(r)) {
                return Err(Error::InvalidSpec("partial-run entry out of range".into()));
            }
        }
        Ok(())
    }

    pub fn total_timepoints(&self) -> usize {
        self.run_lengths.values().sum()
    }

    pub fn layout(&self, subject: usize) -> Result<RunLayout> {
        let all: BTreeSet<RunId> = self.run_lengths.keys().copied().collect();
        RunLayout::new(self.partial_runs.get(&subject).unwrap_or(&all), &self.run_lengths)
    }

    pub fn layouts(&self) -> Result<Vec<RunLayout>> {
        (0..self.subjects.len()).map(|s| self.layout(s)).collect()
    }

    fn alpha_in(&self, region: usize, subject: usize) -> f64 {
        if self.planted_regions.contains(&region) {
            self.alpha[subject]
        } else {
            self.null_alpha
        }
    }
}

fn bump_weights(p: f64, basis: usize, width: f64) -> Vec<f64> {
    let centers = (0..basis).map(|k| if basis == 1 { 0.5 } else { k as f64 / (basis - 1) as f64 });
    let w: Vec<f64> = centers
        .map(|c| (-(p - c).powi(2) / (2.0 * width * width)).exp())
        .collect();
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    w.into_iter().map(|x| x / norm).collect()
}

/// Expected correlation of two subjects' series in `region`.
pub fn expected_isc_oracle(spec: &PlantSpec, region: usize, dyad: Dyad) -> f64 {
    let (ai, aj) = (spec.alpha_in(region, dyad.a()), spec.alpha_in(region, dyad.b()));
    match spec.generator {
        GeneratorKind::SharedSignal => ai * aj,
        GeneratorKind::NearestNeighbor { basis, width, coupling } => {
            if !spec.planted_regions.contains(&region) {
                return ai * aj;
            }
            let (wi, wj) = (bump_weights(ai, basis, width), bump_weights(aj, basis, width));
            coupling * coupling * wi.iter().zip(&wj).map(|(a, b)| a * b).sum::<f64>()
        }
    }
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Every subject's usable series for one region.
pub fn generate_region<T: Scalar>(spec: &PlantSpec, region: usize) -> Result<Vec<Vec<T>>> {
    let layouts = spec.layouts()?;
    let t = spec.total_timepoints();
    let mut rng = rng_for(spec.seed, region as u64);
    let planted = spec.planted_regions.contains(&region);
    let (shared, loading): (Vec<Vec<f64>>, Box<dyn Fn(usize) -> (Vec<f64>, f64) + '_>) = match spec.generator {
        GeneratorKind::NearestNeighbor { basis, width, coupling } if planted => {
            let b = (0..basis).map(|_| normals(&mut rng, t)).collect();
            let alpha = spec.alpha.clone();
            (
                b,
                Box::new(move |i| {
                    let w = bump_weights(alpha[i], basis, width);
                    (w.into_iter().map(|x| x * coupling).collect(), coupling)
                }),
            )
        }
        _ => {
            let s = vec![normals(&mut rng, t)];
            (
                s,
                Box::new(move |i| {
                    let a = spec.alpha_in(region, i);
                    (vec![a], a)
                }),
            )
        }
    };

    let all_runs: Vec<RunId> = spec.run_lengths.keys().copied().collect();
    let mut out = Vec::with_capacity(spec.subjects.len());
    for (i, layout) in layouts.iter().enumerate() {
        let (w, total) = loading(i);
        let noise_scale = (1.0 - total * total).max(0.0).sqrt();
        let eps = normals(&mut rng, t);
        let full: Vec<f64> = (0..t)
            .map(|k| {
                let signal: f64 = w.iter().zip(&shared).map(|(wk, sk)| wk * sk[k]).sum();
                signal + noise_scale * eps[k]
            })
            .collect();
        let usable = layout.usable_runs();
        let mut series = Vec::with_capacity(layout.len());
        let mut offset = 0;
        for run in &all_runs {
            let len = spec.run_lengths[run];
            if usable.contains(run) {
                series.extend(full[offset..offset + len].iter().map(|&v| T::lit(v)));
            }
            offset += len;
        }
        out.push(series);
    }
    Ok(out)
}

/// Whole panel in memory.
pub fn generate_timeseries<T: Scalar>(spec: &PlantSpec) -> Result<TimeSeriesPanel<T>> {
    spec.validate()?;
    let layouts = spec.layouts()?;
    let regions: Vec<Vec<Vec<T>>> = (0..spec.regions.len())
        .map(|g| generate_region(spec, g))
        .collect::<Result<_>>()?;
    let mut per_subject: Vec<Vec<Vec<T>>> = vec![Vec::with_capacity(regions.len()); spec.subjects.len()];
    for region in regions {
        for (s, series) in region.into_iter().enumerate() {
            per_subject[s].push(series);
        }
    }
    let subjects = spec
        .subjects
        .iter()
        .cloned()
        .zip(layouts)
        .zip(per_subject)
        .map(|((name, layout), data)| (name, SubjectSeries { layout, data }))
        .collect();
    TimeSeriesPanel::new(spec.regions.clone(), spec.run_lengths.clone(), subjects)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingSpec {
    pub items: usize,
    /// Latent-to-scale stretch; ratings are `round(3 + scale · z)` clipped to
    /// 1..=5.
    pub scale: f64,
    pub seed: u64,
}

impl Default for RatingSpec {
    fn default() -> Self {
        Self {
            items: 14,
            scale: 1.2,
            seed: 0,
        }
    }
}

/// Rating vectors mixing a shared item profile (weight `α_i`) with
/// idiosyncratic noise.
pub fn generate_ratings(subjects: &[String], alpha: &[f64], spec: &RatingSpec) -> Result<RatingMatrix> {
    if subjects.len() != alpha.len() {
        return Err(Error::LengthMismatch {
            left: subjects.len(),
            right: alpha.len(),
        });
    }
    let mut rng = rng_for(spec.seed, RATING_STREAM);
    let profile = normals(&mut rng, spec.items);
    let values = alpha
        .iter()
        .map(|&a| {
            let noise = (1.0 - a * a).max(0.0).sqrt();
            profile
                .iter()
                .map(|&p| {
                    let e: f64 = rng.sample(StandardNormal);
                    let z = a * p + noise * e;
                    (3.0 + spec.scale * z).round().clamp(1.0, 5.0) as i64
                })
                .collect()
        })
        .collect();
    let items = (1..=spec.items).map(|i| format!("item{i:02}")).collect();
    RatingMatrix::new(subjects.to_vec(), items, values)
}

const GENDERS: [&str; 2] = ["female", "male"];
const COUNTRIES: [&str; 4] = ["US", "CN", "IN", "KR"];
const ETHNICITIES: [&str; 6] = [
    "Asian",
    "Black",
    "Hispanic",
    "NativeAmerican",
    "PacificIslander",
    "White",
];

/// Independent demographic attributes: ages 18 to 24, one or two
/// ethnicities, no relation to centrality.
pub fn generate_attributes(n: usize, seed: u64) -> Vec<Attributes> {
    let mut rng = rng_for(seed, ATTRIBUTE_STREAM);
    (0..n)
        .map(|_| {
            let k = if rng.gen_bool(0.2) { 2 } else { 1 };
            let ethnicities = sample(&mut rng, ETHNICITIES.len(), k)
                .into_iter()
                .map(|i| ETHNICITIES[i].to_string())
                .collect();
            Attributes {
                age: Some(f64::from(rng.gen_range(18u32..=24))),
                gender: Some(GENDERS[rng.gen_range(0..GENDERS.len())].to_string()),
                home_country: Some(COUNTRIES[rng.gen_range(0..COUNTRIES.len())].to_string()),
                ethnicities: Some(ethnicities),
            }
        })
        .collect()
}

/// Ground truth written next to generated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthManifest {
    pub seed: u64,
    pub alpha: BTreeMap<String, f64>,
    pub in_degree: BTreeMap<String, usize>,
    pub planted_regions: Vec<String>,
    pub null_alpha: f64,
    pub generator: GeneratorKind,
}

impl TruthManifest {
    pub fn new(spec: &PlantSpec, in_degrees: &[usize]) -> Self {
        Self {
            seed: spec.seed,
            alpha: spec.subjects.iter().cloned().zip(spec.alpha.iter().copied()).collect(),
            in_degree: spec.subjects.iter().cloned().zip(in_degrees.iter().copied()).collect(),
            planted_regions: spec.planted_regions.iter().map(|&g| spec.regions[g].clone()).collect(),
            null_alpha: spec.null_alpha,
            generator: spec.generator,
        }
    }
}
