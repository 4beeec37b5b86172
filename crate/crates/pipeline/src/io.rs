//! Tidy CSV and JSON readers/writers.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use annak_core::behav::{Attributes, RatingMatrix};
use annak_core::graphnet::{CentralityProfile, DyadCentrality, SocialGraph};
use annak_core::isc::{IscTable, RunId, RunLayout, Stage, SubjectSeries, TimeSeriesPanel};
use annak_core::stats::RegionStats;
use annak_core::Dyad;
use serde::Serialize;

use crate::error::{PipelineError, Result};

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| PipelineError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| PipelineError::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> PipelineError + '_ {
    move |e| PipelineError::parse(path, e)
}

fn headers(path: &Path, rdr: &mut csv::Reader<File>, expected: &[&str]) -> Result<csv::StringRecord> {
    let h = rdr.headers().map_err(csv_err(path))?.clone();
    for col in expected {
        if !h.iter().any(|c| c == *col) {
            return Err(PipelineError::parse(path, format!("missing column `{col}`")));
        }
    }
    Ok(h)
}

fn column(h: &csv::StringRecord, name: &str) -> usize {
    h.iter().position(|c| c == name).expect("checked by headers()")
}

/// Rows of named string columns.
fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut rdr = reader(path)?;
    let h = headers(path, &mut rdr, names)?;
    let idx: Vec<usize> = names.iter().map(|n| column(&h, n)).collect();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        out.push(idx.iter().map(|&i| rec.get(i).unwrap_or("").to_string()).collect());
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(path: &Path, what: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| PipelineError::parse(path, format!("bad {what} `{s}`")))
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        "NA".to_string()
    } else {
        format!("{x}")
    }
}

pub fn read_graph(edges: &Path, communities: &Path) -> Result<SocialGraph> {
    let membership: Vec<(String, String)> = read_columns(communities, &["subject", "community"])?
        .into_iter()
        .map(|r| (r[0].clone(), r[1].clone()))
        .collect();
    let ties: Vec<(String, String)> = read_columns(edges, &["nominator", "nominee"])?
        .into_iter()
        .map(|r| (r[0].clone(), r[1].clone()))
        .collect();
    Ok(SocialGraph::new(membership, ties)?)
}

pub fn write_graph(graph: &SocialGraph, edges: &Path, communities: &Path) -> Result<()> {
    let mut w = writer(communities)?;
    w.write_record(["subject", "community"]).map_err(csv_err(communities))?;
    for (i, s) in graph.nodes().iter().enumerate() {
        w.write_record([s.as_str(), graph.community(i)])
            .map_err(csv_err(communities))?;
    }
    w.flush().map_err(|e| PipelineError::io(communities, e))?;

    let mut w = writer(edges)?;
    w.write_record(["nominator", "nominee"]).map_err(csv_err(edges))?;
    for &(a, b) in graph.edges() {
        w.write_record([&graph.nodes()[a], &graph.nodes()[b]])
            .map_err(csv_err(edges))?;
    }
    w.flush().map_err(|e| PipelineError::io(edges, e))
}

/// Manifest `subject,path` (paths relative to the manifest); each subject
/// file has a `run` column and one column per region, one row per usable
/// time point. Runs a subject lacks are unusable for that subject.
pub fn read_panel(manifest: &Path) -> Result<TimeSeriesPanel<f64>> {
    let base = manifest.parent().unwrap_or(Path::new("."));
    let entries = read_columns(manifest, &["subject", "path"])?;
    if entries.is_empty() {
        return Err(PipelineError::parse(manifest, "no subjects"));
    }
    let mut regions: Option<Vec<String>> = None;
    let mut run_lengths: BTreeMap<RunId, usize> = BTreeMap::new();
    let mut loaded: Vec<(String, BTreeMap<RunId, usize>, Vec<Vec<f64>>)> = Vec::new();
    for entry in entries {
        let path: PathBuf = base.join(&entry[1]);
        let mut rdr = reader(&path)?;
        let h = headers(&path, &mut rdr, &["run"])?;
        let run_col = column(&h, "run");
        let names: Vec<String> = h
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != run_col)
            .map(|(_, c)| c.to_string())
            .collect();
        match &regions {
            None => regions = Some(names.clone()),
            Some(r) if *r != names => {
                return Err(PipelineError::parse(
                    &path,
                    "region columns differ from the first subject",
                ));
            }
            _ => {}
        }
        let mut data = vec![Vec::new(); names.len()];
        let mut lengths: BTreeMap<RunId, usize> = BTreeMap::new();
        let mut last: Option<RunId> = None;
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err(&path))?;
            let run: RunId = parse_num(&path, "run", &rec[run_col])?;
            if last.is_some_and(|l| run < l) {
                return Err(PipelineError::parse(&path, "rows must be ordered by run"));
            }
            last = Some(run);
            *lengths.entry(run).or_default() += 1;
            let mut r = 0;
            for (i, v) in rec.iter().enumerate() {
                if i != run_col {
                    data[r].push(parse_num(&path, "value", v)?);
                    r += 1;
                }
            }
        }
        for (&run, &len) in &lengths {
            match run_lengths.get(&run) {
                Some(&l) if l != len => {
                    return Err(PipelineError::parse(
                        &path,
                        format!("run {run} has {len} time points, other subjects have {l}"),
                    ))
                }
                _ => {
                    run_lengths.insert(run, len);
                }
            }
        }
        loaded.push((entry[0].clone(), lengths, data));
    }
    let mut subjects = Vec::with_capacity(loaded.len());
    for (s, lengths, data) in loaded {
        let usable: BTreeSet<RunId> = lengths.keys().copied().collect();
        let layout = RunLayout::new(&usable, &run_lengths)?;
        subjects.push((s, SubjectSeries { layout, data }));
    }
    Ok(TimeSeriesPanel::new(
        regions.unwrap_or_default(),
        run_lengths,
        subjects,
    )?)
}

/// Write one subject file per subject plus `manifest.csv` into `dir`.
pub fn write_panel(panel: &TimeSeriesPanel<f64>, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    let manifest = dir.join("manifest.csv");
    let mut m = writer(&manifest)?;
    m.write_record(["subject", "path"]).map_err(csv_err(&manifest))?;
    for (i, s) in panel.subjects().iter().enumerate() {
        let file = format!("{s}.csv");
        m.write_record([s.as_str(), &file]).map_err(csv_err(&manifest))?;
        write_series(panel, i, &dir.join(&file))?;
    }
    m.flush().map_err(|e| PipelineError::io(&manifest, e))?;
    Ok(manifest)
}

fn write_series(panel: &TimeSeriesPanel<f64>, subject: usize, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let series = panel.series(subject);
    let mut head = vec!["run".to_string()];
    head.extend(panel.regions().iter().cloned());
    w.write_record(&head).map_err(csv_err(path))?;
    for (t, run) in series.layout.run_index().into_iter().enumerate() {
        let mut rec = vec![run.to_string()];
        rec.extend(series.data.iter().map(|r| fmt(r[t])));
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| PipelineError::io(path, e))
}

/// Long ISC table: `region,subject_a,subject_b,stage,value` with `NA` for
/// missing values.
pub fn write_isc(table: &IscTable<f64>, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["region", "subject_a", "subject_b", "stage", "value"])
        .map_err(csv_err(path))?;
    let stage = table.stage.label();
    for (region, row) in table.regions.iter().zip(&table.values) {
        for (d, v) in table.dyads.iter().zip(row) {
            let value = v.map_or_else(|| "NA".to_string(), fmt);
            w.write_record([
                region.as_str(),
                &table.subjects[d.a()],
                &table.subjects[d.b()],
                stage,
                &value,
            ])
            .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(|e| PipelineError::io(path, e))
}

pub fn read_isc(path: &Path) -> Result<IscTable<f64>> {
    let rows = read_columns(path, &["region", "subject_a", "subject_b", "stage", "value"])?;
    let mut subjects: BTreeSet<String> = BTreeSet::new();
    let mut regions: Vec<String> = Vec::new();
    let mut stage: Option<Stage> = None;
    for r in &rows {
        subjects.insert(r[1].clone());
        subjects.insert(r[2].clone());
        if regions.last() != Some(&r[0]) && !regions.contains(&r[0]) {
            regions.push(r[0].clone());
        }
        let s = Stage::parse(&r[3]).ok_or_else(|| PipelineError::parse(path, format!("unknown stage `{}`", r[3])))?;
        if stage.is_some_and(|x| x != s) {
            return Err(PipelineError::parse(path, "mixed stages"));
        }
        stage = Some(s);
    }
    let subjects: Vec<String> = subjects.into_iter().collect();
    let index: BTreeMap<&str, usize> = subjects.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let region_index: BTreeMap<&str, usize> = regions.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut cells: BTreeMap<Dyad, Vec<Option<f64>>> = BTreeMap::new();
    for r in &rows {
        let (a, b) = (index[r[1].as_str()], index[r[2].as_str()]);
        if a == b {
            return Err(PipelineError::parse(path, format!("self pair `{}`", r[1])));
        }
        let v = if r[4] == "NA" || r[4].is_empty() {
            None
        } else {
            Some(parse_num(path, "value", &r[4])?)
        };
        let slot = &mut cells
            .entry(Dyad::new(a, b))
            .or_insert_with(|| vec![None; regions.len()])[region_index[r[0].as_str()]];
        *slot = v;
    }
    let dyads: Vec<Dyad> = cells.keys().copied().collect();
    let values = (0..regions.len())
        .map(|g| dyads.iter().map(|d| cells[d][g]).collect())
        .collect();
    Ok(IscTable {
        subjects,
        regions,
        dyads,
        values,
        stage: stage.unwrap_or(Stage::RawR),
    })
}

/// Enjoyment and interest matrices from `subject,item,enjoyment,interest`.
/// Blank cells are missing; subjects with any missing rating are dropped
/// from that matrix.
pub fn read_ratings(path: &Path) -> Result<(RatingMatrix, RatingMatrix)> {
    let rows = read_columns(path, &["subject", "item", "enjoyment", "interest"])?;
    let cell = |s: &str| -> Result<Option<i64>> {
        if s.is_empty() || s == "NA" {
            Ok(None)
        } else {
            parse_num(path, "rating", s).map(Some)
        }
    };
    let mut enjoyment = Vec::new();
    let mut interest = Vec::new();
    for r in &rows {
        enjoyment.push((r[0].clone(), r[1].clone(), cell(&r[2])?));
        interest.push((r[0].clone(), r[1].clone(), cell(&r[3])?));
    }
    let (e, _) = RatingMatrix::from_long(enjoyment)?;
    let (i, _) = RatingMatrix::from_long(interest)?;
    Ok((e, i))
}

pub fn write_ratings(enjoyment: &RatingMatrix, interest: &RatingMatrix, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["subject", "item", "enjoyment", "interest"])
        .map_err(csv_err(path))?;
    for s in enjoyment.subjects() {
        let (e, i) = (enjoyment.row(s), interest.row(s));
        for (j, item) in enjoyment.items().iter().enumerate() {
            let show = |r: Option<&[u8]>| r.map_or(String::new(), |r| r[j].to_string());
            w.write_record([s.as_str(), item, &show(e), &show(i)])
                .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(|e| PipelineError::io(path, e))
}

pub fn read_attributes(path: &Path) -> Result<BTreeMap<String, Attributes>> {
    let rows = read_columns(path, &["subject", "age", "gender", "home_country", "ethnicities"])?;
    let text = |s: &str| (!s.is_empty() && s != "NA").then(|| s.to_string());
    let mut out = BTreeMap::new();
    for r in rows {
        let age = match text(&r[1]) {
            Some(a) => Some(parse_num(path, "age", &a)?),
            None => None,
        };
        let attrs = Attributes {
            age,
            gender: text(&r[2]),
            home_country: text(&r[3]),
            ethnicities: Attributes::parse_ethnicities(&r[4]),
        };
        if out.insert(r[0].clone(), attrs).is_some() {
            return Err(PipelineError::parse(path, format!("subject `{}` listed twice", r[0])));
        }
    }
    Ok(out)
}

pub fn write_attributes(attrs: &BTreeMap<String, Attributes>, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["subject", "age", "gender", "home_country", "ethnicities"])
        .map_err(csv_err(path))?;
    for (s, a) in attrs {
        let eth = a
            .ethnicities
            .as_ref()
            .map(|e| e.iter().cloned().collect::<Vec<_>>().join(";"))
            .unwrap_or_default();
        w.write_record([
            s.as_str(),
            &a.age.map(fmt).unwrap_or_default(),
            a.gender.as_deref().unwrap_or(""),
            a.home_country.as_deref().unwrap_or(""),
            &eth,
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| PipelineError::io(path, e))
}

/// Subjects and dyads removed before any analysis.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Exclusions {
    pub subjects: BTreeSet<String>,
    /// Stored with the lexicographically smaller label first.
    pub dyads: BTreeSet<(String, String)>,
}

impl Exclusions {
    pub fn dyad_key(a: &str, b: &str) -> (String, String) {
        if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    }

    pub fn excludes_dyad(&self, a: &str, b: &str) -> bool {
        self.dyads.contains(&Self::dyad_key(a, b))
    }
}

pub fn read_exclusions(path: &Path) -> Result<Exclusions> {
    let rows = read_columns(path, &["subject_a", "subject_b"])?;
    let mut ex = Exclusions::default();
    for r in rows {
        if r[0].is_empty() {
            return Err(PipelineError::parse(path, "empty subject_a"));
        }
        if r[1].is_empty() {
            ex.subjects.insert(r[0].clone());
        } else if r[0] == r[1] {
            return Err(PipelineError::parse(path, format!("self pair `{}`", r[0])));
        } else {
            ex.dyads.insert(Exclusions::dyad_key(&r[0], &r[1]));
        }
    }
    Ok(ex)
}

pub fn write_exclusions(ex: &Exclusions, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["subject_a", "subject_b"]).map_err(csv_err(path))?;
    for s in &ex.subjects {
        w.write_record([s.as_str(), ""]).map_err(csv_err(path))?;
    }
    for (a, b) in &ex.dyads {
        w.write_record([a, b]).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| PipelineError::io(path, e))
}

pub fn write_centrality(profile: &CentralityProfile, communities: &[String], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["subject", "community", "in_degree", "group", "log_in_degree"])
        .map_err(csv_err(path))?;
    for i in 0..profile.len() {
        w.write_record([
            profile.subjects[i].as_str(),
            &communities[i],
            &profile.in_degree[i].to_string(),
            &profile.group[i].to_string(),
            &fmt(profile.log_in_degree(i)),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| PipelineError::io(path, e))
}

pub fn write_dyads(rows: &[DyadCentrality], subjects: &[String], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "subject_a",
        "subject_b",
        "category",
        "min_in_degree",
        "log_min_in_degree",
        "friendship",
        "social_distance",
    ])
    .map_err(csv_err(path))?;
    for r in rows {
        w.write_record([
            subjects[r.dyad.a()].as_str(),
            &subjects[r.dyad.b()],
            r.category.label(),
            &r.min_in_degree.to_string(),
            &fmt(r.log_min_in_degree()),
            if r.friendship { "1" } else { "0" },
            &r.social_distance.map(|d| d.to_string()).unwrap_or_else(|| "NA".into()),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| PipelineError::io(path, e))
}

pub const RESULT_COLUMNS: [&str; 9] = ["region", "model", "term", "B", "SE", "df", "p_raw", "p_fdr", "n"];

fn results_into<W: Write>(rows: &[RegionStats<f64>], w: W) -> csv::Result<W> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.region.as_str(),
            &r.model,
            &r.term,
            &fmt(r.b),
            &fmt(r.se),
            &fmt(r.df),
            &fmt(r.p_raw),
            &fmt(r.p_fdr),
            &r.n.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

/// Results table as CSV bytes.
pub fn results_csv(rows: &[RegionStats<f64>]) -> Vec<u8> {
    results_into(rows, Vec::new()).expect("in-memory write")
}

pub fn write_results(rows: &[RegionStats<f64>], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| PipelineError::io(path, e))?;
    let mut w = results_into(rows, BufWriter::new(file)).map_err(csv_err(path))?;
    w.flush().map_err(|e| PipelineError::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<RegionStats<f64>>> {
    let rows = read_columns(path, &RESULT_COLUMNS)?;
    let num = |s: &str| -> Result<f64> {
        if s == "NA" {
            Ok(f64::NAN)
        } else {
            parse_num(path, "number", s)
        }
    };
    rows.into_iter()
        .map(|r| {
            Ok(RegionStats {
                region: r[0].clone(),
                model: r[1].clone(),
                term: r[2].clone(),
                b: num(&r[3])?,
                se: num(&r[4])?,
                df: num(&r[5])?,
                p_raw: num(&r[6])?,
                p_fdr: num(&r[7])?,
                n: parse_num(path, "n", &r[8])?,
            })
        })
        .collect()
}

/// Per-subject table with one column per named series.
pub fn write_subject_table(subjects: &[String], columns: &[(String, Vec<Option<f64>>)], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let mut head = vec!["subject".to_string()];
    head.extend(columns.iter().map(|(n, _)| n.clone()));
    w.write_record(&head).map_err(csv_err(path))?;
    for (i, s) in subjects.iter().enumerate() {
        let mut rec = vec![s.clone()];
        rec.extend(columns.iter().map(|(_, v)| v[i].map_or_else(|| "NA".to_string(), fmt)));
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| PipelineError::io(path, e))
}

pub fn write_json<S: Serialize>(value: &S, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| PipelineError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| PipelineError::parse(path, e))?;
    w.write_all(b"\n").map_err(|e| PipelineError::io(path, e))?;
    w.flush().map_err(|e| PipelineError::io(path, e))
}
