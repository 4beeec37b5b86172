//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs with its own harness so lines come out in order. A FAIL line does not
//! abort the run; set `ACCEPTANCE_STRICT=1` to turn any FAIL into a nonzero
//! exit. `ACCEPTANCE_ONLY=4,7` runs a subset.

#[path = "../../core/tests/common/mod.rs"]
#[allow(dead_code)]
mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{Duration, Instant};

use annak_core::behav::{demographic_similarity, rating_similarity, Attributes, RatingMatrix};
use annak_core::graphnet::{category_counts, dyad_centrality_table, CentralityProfile, DyadCategory, SplitMode};
use annak_core::isc::{PartialRunPolicy, Scope};
use annak_core::stats::design::{DesignSpec, Frame};
use annak_core::stats::dist::ks_uniform;
use annak_core::stats::fdr::bh_fdr;
use annak_core::stats::lmm::{lmm_fit_crossed, LmmOptions};
use annak_core::stats::ols::ols_fit;
use annak_core::stats::spearman::average_ranks;
use annak_core::stats::RegionStats;
use annak_core::synth::expected_isc_oracle;
use annak_core::{all_dyads, Dyad};
use annak_pipeline::analysis::{run_dyad_level, run_subject_level, HIGH};
use annak_pipeline::commands::{behavior_with, dyad_level_with, subject_level_with};
use annak_pipeline::{AnalysisConfig, CovariateSet, SynthOptions, Synthetic};
use common::{bh_bruteforce, normal_equations, random_dyad_data, rank_by_counting, DenseModel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

struct Suite {
    only: Option<BTreeSet<usize>>,
    results: Vec<(usize, &'static str, bool)>,
}

impl Suite {
    fn run(&mut self, id: usize, name: &'static str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) {
        if self.only.as_ref().is_some_and(|o| !o.contains(&id)) {
            return;
        }
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        let in_time = limit.map_or(true, |l| elapsed <= l);
        let passed = out.passed && in_time;
        let budget = match limit {
            Some(l) => format!("{:.1}s / {}s", elapsed.as_secs_f64(), l.as_secs()),
            None => format!("{:.1}s", elapsed.as_secs_f64()),
        };
        println!(
            "{} {id:>2} {name}: {} [{budget}{}]",
            if passed { "PASS" } else { "FAIL" },
            out.detail,
            if in_time { "" } else { ", over time" }
        );
        self.results.push((id, name, passed));
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn default_config() -> AnalysisConfig {
    AnalysisConfig::default().resolve().unwrap()
}

fn flagged<'a>(rows: &'a [RegionStats<f64>], model: &str, term: &str, alpha: f64) -> BTreeSet<&'a str> {
    rows.iter()
        .filter(|r| r.model == model && r.term == term && r.p_fdr < alpha)
        .map(|r| r.region.as_str())
        .collect()
}

fn estimate(rows: &[RegionStats<f64>], region: &str, model: &str, term: &str) -> f64 {
    rows.iter()
        .find(|r| r.region == region && r.model == model && r.term == term)
        .map_or(f64::NAN, |r| r.b)
}

fn dyad_bookkeeping() -> Outcome {
    let subjects: Vec<String> = (0..63).map(|i| format!("p{i:02}")).collect();
    let degrees: BTreeMap<String, usize> = subjects
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), if i < 23 { 7 } else { 2 }))
        .collect();
    let (profile, _) = CentralityProfile::build(&degrees, &subjects, SplitMode::MedianSplit).unwrap();
    let mut rows = dyad_centrality_table(&profile, &subjects).unwrap();
    let full = category_counts(&rows);
    let pos = rows.iter().position(|r| r.category == DyadCategory::LowLow).unwrap();
    rows.remove(pos);
    let after = category_counts(&rows);
    let ok = full == (253, 920, 780) && after == (253, 920, 779) && rows.len() == 1952;
    outcome(
        ok,
        format!(
            "HH/LH/LL {full:?}, after one LL exclusion {after:?}, total {}",
            rows.len()
        ),
    )
}

fn lmm_oracles() -> Outcome {
    let spec = |cov: bool| {
        let s = DesignSpec::new("y", &["category"]).standardized(false);
        if cov {
            s.with_covariates(&["x"])
        } else {
            s
        }
    };
    let mut worst_beta: f64 = 0.0;
    let mut worst_tau: f64 = 0.0;
    let datasets = 20u64;
    for seed in 0..datasets {
        let n = 6 + (seed as usize % 7);
        let cov = seed % 2 == 0;
        let d = random_dyad_data(1000 + seed, n, 0.6, 0.6);
        let fit = lmm_fit_crossed(&d.dyads, &d.frame, n, &spec(cov), &LmmOptions::default()).unwrap();
        let dense = DenseModel::from_data(&d, cov);
        let (beta, _, _) = dense.gls(fit.theta);
        for (a, b) in fit.coef.beta.iter().zip(beta.iter()) {
            worst_beta = worst_beta.max((a - b).abs() / b.abs().max(1e-300));
        }
        let theta = dense.grid_search(4.0, false);
        let (_, s2, _) = dense.gls(theta);
        for k in 0..2 {
            worst_tau = worst_tau.max((fit.tau2[k] - theta[k] * theta[k] * s2).abs());
        }
    }
    outcome(
        worst_beta <= 1e-6 && worst_tau <= 1e-4,
        format!("{datasets} datasets, 6-12 subjects: max beta rel err {worst_beta:.1e}, max variance component err {worst_tau:.1e}"),
    )
}

fn ols_spearman_bh_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_ols: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(8..40);
        let p = rng.gen_range(1..4);
        let mut frame = Frame::new(n);
        let mut x = DMatrix::from_element(n, p + 1, 1.0);
        let mut names = Vec::new();
        for j in 0..p {
            let col: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            for i in 0..n {
                x[(i, j + 1)] = col[i];
            }
            names.push(format!("x{j}"));
            frame.push_numeric(names[j].clone(), col).unwrap();
        }
        let y: Vec<f64> = (0..n)
            .map(|i| x[(i, 1)] * 0.5 + rng.sample::<f64, _>(StandardNormal))
            .collect();
        frame.push_numeric("y", y.clone()).unwrap();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let fit = ols_fit(&frame, &DesignSpec::new("y", &refs).standardized(false)).unwrap();
        let beta = normal_equations(&x, &DVector::from_vec(y));
        for (t, b) in fit.iter().zip(beta.iter().skip(1)) {
            worst_ols = worst_ols.max((t.b - b).abs() / b.abs().max(1.0));
        }
    }
    let mut ranks_exact = true;
    for _ in 0..200 {
        let n = rng.gen_range(1..30);
        let x: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..6))).collect();
        ranks_exact &= average_ranks(&x) == rank_by_counting(&x);
    }
    let mut bh_exact = 0;
    for _ in 0..1000 {
        let m = rng.gen_range(1..60);
        let p: Vec<f64> = (0..m)
            .map(|_| {
                if rng.gen_bool(0.15) {
                    f64::from(rng.gen_range(0..4)) / 8.0
                } else {
                    rng.gen::<f64>().powi(3)
                }
            })
            .collect();
        bh_exact += usize::from(bh_fdr(&p).unwrap() == bh_bruteforce(&p));
    }
    outcome(
        worst_ols <= 1e-10 && ranks_exact && bh_exact == 1000,
        format!("OLS max rel err {worst_ols:.1e}; tied ranks exact: {ranks_exact}; BH exact on {bh_exact}/1000"),
    )
}

fn planted_recovery() -> Outcome {
    let config = default_config();
    let seeds = 50u64;
    let (mut success, mut subj_ok, mut dyad_ok, mut relaxed_ok) = (0, 0, 0, 0);
    let mut order_violations = Vec::new();
    let mut null_subject = 0;
    let mut null_dyad = 0;
    for seed in 0..seeds {
        let s = Synthetic::build(&SynthOptions {
            seed,
            ..Default::default()
        })
        .unwrap();
        let study = s.study(PartialRunPolicy::Exclude).unwrap();
        let planted: BTreeSet<String> = s.planted_regions().into_iter().collect();
        let subject = run_subject_level(&study, &config).unwrap();
        let dyad = run_dyad_level(&study, &config).unwrap();

        let by_subject = flagged(&subject.rows, "group", HIGH, 0.05);
        let by_dyad = flagged(&dyad.rows, "category", "HH-LL", 0.001);
        let by_dyad_relaxed = flagged(&dyad.rows, "category", "HH-LL", 0.05);
        let judge = |set: &BTreeSet<&str>| {
            let hits = set.iter().filter(|r| planted.contains(**r)).count();
            (hits >= 4, set.len() - hits)
        };
        let (sh, sn) = judge(&by_subject);
        let (dh, dn) = judge(&by_dyad);
        let (rh, rn) = judge(&by_dyad_relaxed);
        null_subject += sn;
        null_dyad += dn;
        for region in &by_dyad {
            let hh_lh = estimate(&dyad.rows, region, "category", "HH-LH");
            let lh_ll = estimate(&dyad.rows, region, "category", "LH-LL");
            if !(hh_lh > 0.0 && lh_ll > 0.0) {
                let kind = if planted.contains(*region) { "planted" } else { "null" };
                order_violations.push(format!(
                    "seed {seed} {region} ({kind}): HH-LH {hh_lh:.3}, LH-LL {lh_ll:.3}"
                ));
            }
        }
        let s_pass = sh && sn == 0;
        let d_pass = dh && dn == 0;
        subj_ok += usize::from(s_pass);
        dyad_ok += usize::from(d_pass);
        relaxed_ok += usize::from(rh && rn == 0);
        success += usize::from(s_pass && d_pass);
    }
    let rate = success as f64 / seeds as f64;
    outcome(
        rate >= 0.9 && order_violations.is_empty(),
        format!(
            "{success}/{seeds} seeds pass both levels (subject {subj_ok}, dyad q<0.001 {dyad_ok}, dyad q<0.05 {relaxed_ok}); \
             null regions flagged in total: subject {null_subject}, dyad {null_dyad}; ordering violations {} {:?}",
            order_violations.len(),
            order_violations
        ),
    )
}

fn null_calibration() -> Outcome {
    let config = default_config();
    let seeds = 200u64;
    let mut pooled = Vec::new();
    let mut seeds_with_discovery = 0;
    for seed in 0..seeds {
        let s = Synthetic::build(&SynthOptions {
            constant_alpha: Some(0.5),
            timepoints_per_run: 1000,
            seed: 10_000 + seed,
            ..Default::default()
        })
        .unwrap();
        let study = s.study(PartialRunPolicy::Exclude).unwrap();
        let out = run_subject_level(&study, &config).unwrap();
        let group: Vec<&RegionStats<f64>> = out.rows.iter().filter(|r| r.model == "group").collect();
        pooled.extend(group.iter().map(|r| r.p_raw));
        seeds_with_discovery += usize::from(group.iter().any(|r| r.p_fdr < config.fdr_alpha.subject));
    }
    let (d, p) = ks_uniform(&pooled);
    let fdr = seeds_with_discovery as f64 / seeds as f64;
    let se = (0.05f64 * 0.95 / seeds as f64).sqrt();
    outcome(
        p > 0.01 && fdr <= config.fdr_alpha.subject,
        format!(
            "{} pooled raw p: KS D {d:.4}, p {p:.3}; realized FDR {fdr:.3} (nominal 0.05, Monte-Carlo SE {se:.3})",
            pooled.len()
        ),
    )
}

fn isc_accuracy() -> Outcome {
    let t = 10_000usize;
    let s = Synthetic::build(&SynthOptions {
        subjects: 40,
        regions: 1,
        planted: 1,
        timepoints_per_run: t,
        seed: 6,
        ..Default::default()
    })
    .unwrap();
    let table = s.isc(PartialRunPolicy::Exclude).unwrap();
    let bound = 4.0 / (t as f64).sqrt();
    let mut within = 0;
    let mut worst: f64 = 0.0;
    for (d, v) in table.dyads.iter().zip(&table.values[0]) {
        let err = (v.unwrap() - expected_isc_oracle(&s.spec, 0, *d)).abs();
        worst = worst.max(err);
        within += usize::from(err <= bound);
    }
    let frac = within as f64 / table.dyads.len() as f64;
    outcome(
        frac >= 0.95,
        format!(
            "{within}/{} dyads within {bound:.3} (worst {worst:.4})",
            table.dyads.len()
        ),
    )
}

/// Fixed-effect columns implied by a dyad-level model name.
fn expected_k(model: &str) -> usize {
    let mut parts = model.split('+');
    let base = match parts.next().unwrap() {
        "category" => 3,
        "log_min_in_degree" | "enjoyment_sim" | "interest_sim" => 2,
        other => panic!("unknown model {other}"),
    };
    base + parts
        .map(|p| match p {
            "demographics" => 4,
            "demographics-social-distance" => 5,
            "friendship" => 1,
            "preferences" => 2,
            "category" => 2,
            other => panic!("unknown suffix {other}"),
        })
        .sum::<usize>()
}

fn df_contract() -> Outcome {
    let s = Synthetic::build(&SynthOptions {
        subjects: 24,
        regions: 3,
        planted: 1,
        timepoints_per_run: 600,
        seed: 7,
        ..Default::default()
    })
    .unwrap();
    let study = s.study(PartialRunPolicy::Exclude).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let base = s.write(tmp.path()).unwrap();
    let mut checked = 0;
    let mut bad = Vec::new();
    let runs = [
        (
            vec![
                CovariateSet::None,
                CovariateSet::Demographics,
                CovariateSet::Friendship,
                CovariateSet::Preferences,
            ],
            None,
        ),
        (vec![CovariateSet::DemographicsSocialDistance], None),
        (vec![CovariateSet::None], Some(Scope::IntraCommunityOnly)),
    ];
    for (covariates, scope) in runs {
        let config = AnalysisConfig {
            covariates,
            scope,
            ..base.clone()
        }
        .resolve()
        .unwrap();
        let intra = config.scope() == Scope::IntraCommunityOnly;
        let subjects = &study.isc.subjects;
        let expected_n = all_dyads(subjects.len())
            .iter()
            .filter(|d| {
                !intra || study.graph.community_of(&subjects[d.a()]) == study.graph.community_of(&subjects[d.b()])
            })
            .count();
        let out = run_dyad_level(&study, &config).unwrap();
        for r in &out.rows {
            checked += 1;
            let k = expected_k(&r.model);
            if r.df != (r.n - k) as f64 || r.n != expected_n {
                bad.push(format!("{} {} {}: df {} n {}", r.region, r.model, r.term, r.df, r.n));
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("{checked} rows checked, {} mismatches {:?}", bad.len(), bad.first()),
    )
}

fn read_outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let options = SynthOptions {
        subjects: 30,
        regions: 6,
        planted: 2,
        timepoints_per_run: 1000,
        seed: 8,
        ..Default::default()
    };
    let base = Synthetic::build(&options)
        .unwrap()
        .write(&tmp.path().join("data"))
        .unwrap();
    let config = AnalysisConfig {
        covariates: vec![
            CovariateSet::None,
            CovariateSet::Demographics,
            CovariateSet::Preferences,
        ],
        output_dir: out.clone(),
        ..base
    }
    .resolve()
    .unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let files = pool.install(|| {
            let study = Synthetic::build(&options)
                .unwrap()
                .study(PartialRunPolicy::Exclude)
                .unwrap();
            subject_level_with(&study, &config).unwrap();
            dyad_level_with(&study, &config).unwrap();
            behavior_with(&study, &config).unwrap();
            read_outputs(&out)
        });
        std::fs::remove_dir_all(&out).unwrap();
        files
    };
    let reference = run(1);
    let mut same = Vec::new();
    for threads in [4, 8, 1] {
        same.push(run(threads) == reference);
    }
    let bytes: usize = reference.values().map(Vec::len).sum();
    outcome(
        same.iter().all(|&s| s),
        format!(
            "{} files, {bytes} bytes; identical at 4/8 threads and on a second 1-thread run: {same:?}",
            reference.len()
        ),
    )
}

fn similarity_formulas() -> Outcome {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..100 {
        let n = rng.gen_range(2..12);
        let items = rng.gen_range(1..8);
        let subjects: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let mut rows: Vec<Vec<i64>> = (0..n)
            .map(|_| (0..items).map(|_| rng.gen_range(1..=5)).collect())
            .collect();
        if trial % 3 == 0 {
            rows[n - 1] = rows[0].clone();
        }
        let m = RatingMatrix::new(
            subjects.clone(),
            (0..items).map(|i| format!("v{i}")).collect(),
            rows.clone(),
        )
        .unwrap();
        let col = rating_similarity::<f64>("enjoyment", &m, &subjects, Scope::All, None).unwrap();
        let any_distance = rows.iter().any(|r| r != &rows[0]);
        let mut min: f64 = 1.0;
        for (d, v) in col.dyads.iter().zip(&col.values) {
            let v = v.unwrap();
            min = min.min(v);
            let identical = rows[d.a()] == rows[d.b()];
            if !(0.0..=1.0).contains(&v) || (identical != (v == 1.0) && any_distance) {
                failures.push(format!("trial {trial} dyad {d:?}: {v}"));
            }
        }
        if any_distance && min != 0.0 {
            failures.push(format!("trial {trial}: min {min}"));
        }
    }

    let attrs = |age: f64, gender: &str, country: &str, eth: &[&str]| Attributes {
        age: Some(age),
        gender: Some(gender.into()),
        home_country: Some(country.into()),
        ethnicities: Some(eth.iter().map(|s| s.to_string()).collect()),
    };
    let people = [
        attrs(18.0, "female", "US", &["Asian", "White"]),
        attrs(18.0, "male", "US", &["White"]),
        attrs(21.0, "female", "KR", &["Asian"]),
        attrs(19.0, "male", "CN", &["Black"]),
    ];
    let subjects: Vec<String> = (0..4).map(|i| format!("s{i}")).collect();
    let cols = demographic_similarity::<f64>(&subjects, &people, Scope::All, None).unwrap();
    // dyads in order (0,1) (0,2) (0,3) (1,2) (1,3) (2,3); max age difference 3
    let expected: [[f64; 6]; 4] = [
        [1.0, 0.0, 2.0 / 3.0, 0.0, 2.0 / 3.0, 1.0 / 3.0],
        [0.0, 1.0, 0.0, 0.0, 1.0, 0.0],
        [1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    ];
    let order = all_dyads(4);
    for (col, want) in cols.iter().zip(&expected) {
        for (d, w) in order.iter().zip(want) {
            let got = col.value(*d).unwrap();
            if (got - w).abs() > 1e-15 {
                failures.push(format!("{} {d:?}: {got} vs {w}", col.name));
            }
        }
    }
    let names: Vec<&str> = cols.iter().map(|c| c.name.as_str()).collect();
    outcome(
        failures.is_empty(),
        format!(
            "100 rating panels and a 4-subject demographic fixture ({}): {} failures {:?}",
            names.join(", "),
            failures.len(),
            failures.first()
        ),
    )
}

fn full_scale() -> Outcome {
    let start = Instant::now();
    let mut s = Synthetic::build(&SynthOptions {
        subjects: 63,
        regions: 214,
        planted: 10,
        runs: 4,
        timepoints_per_run: 11_250,
        communities: 2,
        seed: 10,
        ..Default::default()
    })
    .unwrap();
    // two subjects with three usable runs that do not nest
    s.spec.partial_runs.insert(5, [1, 2, 3].into());
    s.spec.partial_runs.insert(40, [1, 2, 4].into());
    let study = s.study(PartialRunPolicy::Exclude).unwrap();
    let isc_time = start.elapsed().as_secs_f64();
    let dyads = study.isc.dyads.len();
    let config = AnalysisConfig::default().resolve().unwrap();
    let subject = run_subject_level(&study, &config).unwrap();
    let dyad = run_dyad_level(&study, &config).unwrap();
    let category_rows = dyad.rows.iter().filter(|r| r.model == "category").count();
    let group_rows = subject.rows.iter().filter(|r| r.model == "group").count();
    let doubled = dyad.rows.iter().find(|r| r.model == "category").map_or(0, |r| 2 * r.n);
    let failures = dyad.summary.families.iter().map(|f| f.failures.len()).sum::<usize>();
    let dropped = study.isc.values.iter().all(|row| {
        let i = study.isc.dyads.iter().position(|&d| d == Dyad::new(5, 40)).unwrap();
        row[i].is_none()
    });
    outcome(
        dyads == 1953 && dropped && doubled == 3904 && category_rows == 3 * 214 && group_rows == 214 && failures == 0,
        format!(
            "63 subjects x 214 regions x 45000 points, {dyads} dyads; ISC in {isc_time:.0}s; \
             {group_rows} subject rows, {category_rows} contrast rows on {doubled} doubled rows, {failures} failed fits"
        ),
    )
}

fn main() {
    // ACCEPTANCE_ONLY=4,7 runs a subset
    let only = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut suite = Suite {
        only,
        results: Vec::new(),
    };
    suite.run(1, "dyad bookkeeping", secs(1), dyad_bookkeeping);
    suite.run(2, "LMM oracle equivalence", secs(30), lmm_oracles);
    suite.run(3, "OLS/Spearman/BH oracles", secs(10), ols_spearman_bh_oracles);
    suite.run(4, "planted recovery", secs(300), planted_recovery);
    suite.run(5, "null calibration", secs(300), null_calibration);
    suite.run(6, "Monte-Carlo ISC accuracy", secs(60), isc_accuracy);
    suite.run(7, "df contract", None, df_contract);
    suite.run(8, "determinism", secs(120), determinism);
    suite.run(9, "similarity formulas", None, similarity_formulas);
    suite.run(10, "performance envelope", secs(600), full_scale);

    let passed = suite.results.iter().filter(|r| r.2).count();
    println!("acceptance: {passed}/{} criteria pass", suite.results.len());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed < suite.results.len() {
        std::process::exit(1);
    }
}
