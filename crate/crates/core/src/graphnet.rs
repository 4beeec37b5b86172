//! Directed friendship-nomination network, in-degree centrality and the
//! subject- and dyad-level centrality variables derived from it.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dyad::{all_dyads, Dyad};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Nomination network. Edges are deduplicated and sorted; every endpoint is a
/// known node and every node carries exactly one community label.
#[derive(Debug, Clone)]
pub struct SocialGraph {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    community: Vec<String>,
    edges: Vec<(usize, usize)>,
    duplicates_dropped: usize,
}

impl SocialGraph {
    /// Build from `(subject, community)` membership rows and
    /// `(nominator, nominee)` edges.
    pub fn new<M, E, S1, S2, S3, S4>(membership: M, edges: E) -> Result<Self>
    where
        M: IntoIterator<Item = (S1, S2)>,
        E: IntoIterator<Item = (S3, S4)>,
        S1: Into<String>,
        S2: Into<String>,
        S3: AsRef<str>,
        S4: AsRef<str>,
    {
        let mut nodes = Vec::new();
        let mut community = Vec::new();
        let mut index = HashMap::new();
        for (s, c) in membership {
            let s = s.into();
            if index.contains_key(&s) {
                return Err(Error::DuplicateCommunity(s));
            }
            index.insert(s.clone(), nodes.len());
            nodes.push(s);
            community.push(c.into());
        }

        let mut set = BTreeSet::new();
        let mut raw = 0usize;
        for (from, to) in edges {
            let (from, to) = (from.as_ref(), to.as_ref());
            let lookup = |s: &str| {
                index.get(s).copied().ok_or_else(|| Error::UnknownEdgeEndpoint {
                    nominator: from.to_string(),
                    nominee: to.to_string(),
                    missing: s.to_string(),
                })
            };
            let (i, j) = (lookup(from)?, lookup(to)?);
            if i == j {
                return Err(Error::SelfEdge(from.to_string()));
            }
            raw += 1;
            set.insert((i, j));
        }
        let duplicates_dropped = raw - set.len();
        if duplicates_dropped > 0 {
            log::info!("dropped {duplicates_dropped} duplicate nominations");
        }
        Ok(Self {
            nodes,
            index,
            community,
            edges: set.into_iter().collect(),
            duplicates_dropped,
        })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn index_of(&self, subject: &str) -> Option<usize> {
        self.index.get(subject).copied()
    }

    fn require(&self, subject: &str) -> Result<usize> {
        self.index_of(subject)
            .ok_or_else(|| Error::UnknownSubject(subject.to_string()))
    }

    pub fn community(&self, node: usize) -> &str {
        &self.community[node]
    }

    pub fn community_of(&self, subject: &str) -> Option<&str> {
        self.index_of(subject).map(|i| self.community(i))
    }

    pub fn communities(&self) -> BTreeSet<&str> {
        self.community.iter().map(String::as_str).collect()
    }

    /// Deduplicated `(nominator, nominee)` index pairs.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates_dropped
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.binary_search(&(from, to)).is_ok()
    }

    /// Undirected adjacency lists: a tie exists if either member nominated
    /// the other.
    fn undirected_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![BTreeSet::new(); self.nodes.len()];
        for &(i, j) in &self.edges {
            adj[i].insert(j);
            adj[j].insert(i);
        }
        adj.into_iter().map(|s| s.into_iter().collect()).collect()
    }
}

/// Number of distinct nominators per node; nodes never nominated map to 0.
pub fn in_degree_centrality(graph: &SocialGraph) -> BTreeMap<String, usize> {
    let mut counts = vec![0usize; graph.nodes.len()];
    for &(_, to) in &graph.edges {
        counts[to] += 1;
    }
    graph.nodes.iter().cloned().zip(counts).collect()
}

/// 1 iff either member nominated the other.
pub fn friendship_indicator(graph: &SocialGraph, a: &str, b: &str) -> Result<u8> {
    let (i, j) = (graph.require(a)?, graph.require(b)?);
    Ok(u8::from(graph.has_edge(i, j) || graph.has_edge(j, i)))
}

/// Geodesic distances between every pair of members of `community` in the
/// undirected tie graph, keyed by graph node indices. Pairs in different
/// components get one more than the largest finite distance in the
/// community (or 1 when the community has no ties at all).
pub fn social_distance(graph: &SocialGraph, community: &str) -> BTreeMap<Dyad, u32> {
    let members: Vec<usize> = (0..graph.nodes.len())
        .filter(|&i| graph.community(i) == community)
        .collect();
    let in_comm: BTreeSet<usize> = members.iter().copied().collect();
    let adj = graph.undirected_adjacency();

    let mut finite = BTreeMap::new();
    for &src in &members {
        let mut dist: HashMap<usize, u32> = HashMap::new();
        dist.insert(src, 0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            for &v in &adj[u] {
                if in_comm.contains(&v) && !dist.contains_key(&v) {
                    dist.insert(v, du + 1);
                    queue.push_back(v);
                }
            }
        }
        for (&v, &d) in &dist {
            if v > src {
                finite.insert(Dyad::new(src, v), d);
            }
        }
    }

    let max_finite = finite.values().copied().max().unwrap_or(0);
    let disconnected = max_finite + 1;
    let mut out = BTreeMap::new();
    for (x, &a) in members.iter().enumerate() {
        for &b in &members[x + 1..] {
            let d = Dyad::new(a, b);
            out.insert(d, finite.get(&d).copied().unwrap_or(disconnected));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    Low,
    High,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Low => "low",
            Group::High => "high",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// High iff in-degree > median; ties at the median go Low.
    #[default]
    MedianSplit,
    /// Subjects at the median are dropped; High above, Low below.
    EqualGroups,
}

/// Median of integer counts (mean of the two middle values for even n).
pub fn median_of(values: &[usize]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub median: f64,
    pub group: BTreeMap<String, Group>,
    /// Subjects dropped by [`SplitMode::EqualGroups`].
    pub excluded: BTreeSet<String>,
}

impl Split {
    pub fn count(&self, g: Group) -> usize {
        self.group.values().filter(|&&x| x == g).count()
    }
}

/// Binarize in-degree around the median of the supplied sample.
pub fn median_split(in_degree: &BTreeMap<String, usize>, mode: SplitMode) -> Result<Split> {
    if in_degree.len() < 2 {
        return Err(Error::TooFewSubjects {
            needed: 2,
            got: in_degree.len(),
        });
    }
    let values: Vec<usize> = in_degree.values().copied().collect();
    let median = median_of(&values).expect("non-empty");
    let mut group = BTreeMap::new();
    let mut excluded = BTreeSet::new();
    for (s, &k) in in_degree {
        let k = k as f64;
        if k > median {
            group.insert(s.clone(), Group::High);
        } else if mode == SplitMode::EqualGroups && k == median {
            excluded.insert(s.clone());
        } else {
            group.insert(s.clone(), Group::Low);
        }
    }
    let split = Split {
        median,
        group,
        excluded,
    };
    if split.count(Group::High) == 0 || split.count(Group::Low) == 0 {
        return Err(Error::DegenerateSplit);
    }
    Ok(split)
}

/// In-degree and group for an ordered analysis sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralityProfile {
    pub subjects: Vec<String>,
    pub in_degree: Vec<usize>,
    pub group: Vec<Group>,
    pub median: f64,
}

impl CentralityProfile {
    /// Restrict `in_degree` to `sample`, split around the sample median and
    /// return the profile plus subjects excluded by the split mode. The
    /// profile keeps the order of `sample`.
    pub fn build(
        in_degree: &BTreeMap<String, usize>,
        sample: &[String],
        mode: SplitMode,
    ) -> Result<(Self, Vec<String>)> {
        let mut restricted = BTreeMap::new();
        for s in sample {
            let k = in_degree
                .get(s)
                .copied()
                .ok_or_else(|| Error::UnknownSubject(s.clone()))?;
            restricted.insert(s.clone(), k);
        }
        let split = median_split(&restricted, mode)?;
        let mut profile = Self {
            subjects: Vec::new(),
            in_degree: Vec::new(),
            group: Vec::new(),
            median: split.median,
        };
        let mut excluded = Vec::new();
        for s in sample {
            match split.group.get(s) {
                Some(&g) => {
                    profile.subjects.push(s.clone());
                    profile.in_degree.push(restricted[s]);
                    profile.group.push(g);
                }
                None => excluded.push(s.clone()),
            }
        }
        Ok((profile, excluded))
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn index_of(&self, subject: &str) -> Option<usize> {
        self.subjects.iter().position(|s| s == subject)
    }

    /// `ln(1 + in_degree)`.
    pub fn log_in_degree<T: Scalar>(&self, i: usize) -> T {
        T::from_count(self.in_degree[i]).ln_1p()
    }

    pub fn count(&self, g: Group) -> usize {
        self.group.iter().filter(|&&x| x == g).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DyadCategory {
    LowLow,
    LowHigh,
    HighHigh,
}

impl DyadCategory {
    pub const ALL: [DyadCategory; 3] = [DyadCategory::LowLow, DyadCategory::LowHigh, DyadCategory::HighHigh];

    pub fn of(a: Group, b: Group) -> Self {
        match (a, b) {
            (Group::High, Group::High) => DyadCategory::HighHigh,
            (Group::Low, Group::Low) => DyadCategory::LowLow,
            _ => DyadCategory::LowHigh,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DyadCategory::LowLow => "LL",
            DyadCategory::LowHigh => "LH",
            DyadCategory::HighHigh => "HH",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "LL" | "low-low" | "LowLow" => Some(DyadCategory::LowLow),
            "LH" | "HL" | "low-high" | "LowHigh" => Some(DyadCategory::LowHigh),
            "HH" | "high-high" | "HighHigh" => Some(DyadCategory::HighHigh),
            _ => None,
        }
    }
}

impl fmt::Display for DyadCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Dyad-level centrality row. `dyad` indexes the subject list the table was
/// built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadCentrality {
    pub dyad: Dyad,
    pub category: DyadCategory,
    pub min_in_degree: usize,
    pub friendship: bool,
    /// Only defined for same-community dyads.
    pub social_distance: Option<u32>,
}

impl DyadCentrality {
    pub fn log_min_in_degree<T: Scalar>(&self) -> T {
        T::from_count(self.min_in_degree).ln_1p()
    }
}

/// One row per unordered pair of `subjects`, which must all be in `profile`.
pub fn dyad_centrality_table(profile: &CentralityProfile, subjects: &[String]) -> Result<Vec<DyadCentrality>> {
    let idx: Vec<usize> = subjects
        .iter()
        .map(|s| profile.index_of(s).ok_or_else(|| Error::UnknownSubject(s.clone())))
        .collect::<Result<_>>()?;
    Ok(all_dyads(subjects.len())
        .into_iter()
        .map(|d| {
            let (pa, pb) = (idx[d.a()], idx[d.b()]);
            DyadCentrality {
                dyad: d,
                category: DyadCategory::of(profile.group[pa], profile.group[pb]),
                min_in_degree: profile.in_degree[pa].min(profile.in_degree[pb]),
                friendship: false,
                social_distance: None,
            }
        })
        .collect())
}

/// Fill in friendship and (intra-community) social distance for rows built
/// over `subjects`.
pub fn attach_ties(rows: &mut [DyadCentrality], graph: &SocialGraph, subjects: &[String]) -> Result<()> {
    let gidx: Vec<usize> = subjects.iter().map(|s| graph.require(s)).collect::<Result<_>>()?;
    let mut distances: BTreeMap<&str, BTreeMap<Dyad, u32>> = BTreeMap::new();
    for c in graph.communities() {
        distances.insert(c, social_distance(graph, c));
    }
    for row in rows.iter_mut() {
        let (ga, gb) = (gidx[row.dyad.a()], gidx[row.dyad.b()]);
        row.friendship = graph.has_edge(ga, gb) || graph.has_edge(gb, ga);
        let (ca, cb) = (graph.community(ga), graph.community(gb));
        row.social_distance = if ca == cb {
            distances[ca].get(&Dyad::new(ga, gb)).copied()
        } else {
            None
        };
    }
    Ok(())
}

/// Category counts `(HH, LH, LL)`.
pub fn category_counts(rows: &[DyadCentrality]) -> (usize, usize, usize) {
    rows.iter().fold((0, 0, 0), |(hh, lh, ll), r| match r.category {
        DyadCategory::HighHigh => (hh + 1, lh, ll),
        DyadCategory::LowHigh => (hh, lh + 1, ll),
        DyadCategory::LowLow => (hh, lh, ll + 1),
    })
}

/// Histogram-style summary of an in-degree distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeSummary {
    pub n: usize,
    pub median: f64,
    pub mean: f64,
    pub max: usize,
    pub histogram: BTreeMap<usize, usize>,
}

pub fn degree_summary(degrees: &[usize]) -> Option<DegreeSummary> {
    let median = median_of(degrees)?;
    let mut histogram = BTreeMap::new();
    for &k in degrees {
        *histogram.entry(k).or_insert(0) += 1;
    }
    Some(DegreeSummary {
        n: degrees.len(),
        median,
        mean: degrees.iter().sum::<usize>() as f64 / degrees.len() as f64,
        max: degrees.iter().copied().max().unwrap_or(0),
        histogram,
    })
}
