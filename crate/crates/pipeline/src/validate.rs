//! Self-check suite: independent oracles, planted recovery, bookkeeping and
//! determinism, summarized as a machine-readable report.

use std::collections::BTreeMap;

use annak_core::graphnet::{category_counts, dyad_centrality_table, CentralityProfile, DyadCategory, SplitMode};
use annak_core::isc::PartialRunPolicy;
use annak_core::stats::design::{DesignSpec, Frame};
use annak_core::stats::fdr::bh_fdr;
use annak_core::stats::lmm::{lmm_fit_crossed, LmmOptions};
use annak_core::synth::expected_isc_oracle;
use annak_core::{all_dyads, Dyad};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{run_dyad_level, run_subject_level, HIGH};
use crate::config::AnalysisConfig;
use crate::error::{PipelineError, Result};
use crate::io::results_csv;
use crate::synth::{SynthOptions, Synthetic};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub seed: u64,
    pub checks: Vec<Check>,
}

fn check(name: &str, result: Result<String, String>) -> Check {
    match result {
        Ok(detail) => Check {
            name: name.to_string(),
            passed: true,
            detail,
        },
        Err(detail) => Check {
            name: name.to_string(),
            passed: false,
            detail,
        },
    }
}

/// Group sizes 23/40 give 253/920/780 dyads; dropping one low-low dyad
/// gives 779 and 1,952 in total.
pub fn dyad_bookkeeping() -> Result<String, String> {
    let subjects: Vec<String> = (0..63).map(|i| format!("s{i:02}")).collect();
    let degrees: BTreeMap<String, usize> = subjects
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), if i < 23 { 5 } else { 1 }))
        .collect();
    let (profile, _) =
        CentralityProfile::build(&degrees, &subjects, SplitMode::MedianSplit).map_err(|e| e.to_string())?;
    let mut rows = dyad_centrality_table(&profile, &subjects).map_err(|e| e.to_string())?;
    let full = category_counts(&rows);
    if full != (253, 920, 780) {
        return Err(format!("counts {full:?}"));
    }
    let drop = rows
        .iter()
        .position(|r| r.category == DyadCategory::LowLow)
        .ok_or("no low-low dyad")?;
    rows.remove(drop);
    let after = category_counts(&rows);
    if after != (253, 920, 779) || rows.len() != 1952 {
        return Err(format!("after exclusion {after:?}, total {}", rows.len()));
    }
    Ok("253/920/780; 253/920/779 and 1952 after one exclusion".into())
}

/// Random crossed dyadic data: `(dyads, category codes, response)`.
fn dyadic_dataset(seed: u64, n: usize) -> (Vec<Dyad>, Vec<usize>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let high: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.8..0.8)).collect();
    let dyads = all_dyads(n);
    let codes: Vec<usize> = dyads
        .iter()
        .map(|d| usize::from(high[d.a()]) + usize::from(high[d.b()]))
        .collect();
    let y = dyads
        .iter()
        .zip(&codes)
        .map(|(d, &c)| 0.3 * c as f64 + u[d.a()] + u[d.b()] + rng.gen_range(-1.0..1.0))
        .collect();
    (dyads, codes, y)
}

/// Dense GLS on the doubled rows at relative scales `theta`:
/// `(β̂, profiled REML deviance)`.
fn dense_gls(dyads: &[Dyad], codes: &[usize], y: &[f64], theta: [f64; 2]) -> Option<(DVector<f64>, f64)> {
    let rows = 2 * dyads.len();
    let mut x = DMatrix::zeros(rows, 3);
    let mut yy = DVector::zeros(rows);
    let mut s1 = Vec::with_capacity(rows);
    let mut s2 = Vec::with_capacity(rows);
    for (i, d) in dyads.iter().enumerate() {
        for (r, (a, b)) in [(2 * i, (d.a(), d.b())), (2 * i + 1, (d.b(), d.a()))] {
            x[(r, 0)] = 1.0;
            x[(r, 1)] = f64::from(codes[i] == 1);
            x[(r, 2)] = f64::from(codes[i] == 2);
            yy[r] = y[i];
            s1.push(a);
            s2.push(b);
        }
    }
    let h = DMatrix::from_fn(rows, rows, |i, j| {
        f64::from(i == j)
            + theta[0] * theta[0] * f64::from(s1[i] == s1[j])
            + theta[1] * theta[1] * f64::from(s2[i] == s2[j])
    });
    let chol = h.cholesky()?;
    let xthx = x.transpose() * chol.solve(&x);
    let xchol = xthx.cholesky()?;
    let beta = xchol.solve(&(x.transpose() * chol.solve(&yy)));
    let r = &yy - &x * &beta;
    let dof = (rows - 3) as f64;
    let sigma2 = r.dot(&chol.solve(&r)) / dof;
    let logdet = |l: &DMatrix<f64>| 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let dev = logdet(&chol.l()) + logdet(&xchol.l()) + dof * (1.0 + (2.0 * std::f64::consts::PI * sigma2).ln());
    Some((beta, dev))
}

/// Crossed LMM against dense GLS at the fitted scales (fixed effects and
/// REML deviance), and against random probes of the criterion.
pub fn lmm_oracle(seed: u64) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for k in 0..6u64 {
        let n = 6 + (k as usize % 7);
        let (dyads, codes, y) = dyadic_dataset(seed.wrapping_add(k), n);
        let mut frame = Frame::new(dyads.len());
        frame.push_numeric("y", y.clone()).map_err(|e| e.to_string())?;
        frame
            .push_factor("category", vec!["LL".into(), "LH".into(), "HH".into()], codes.clone())
            .map_err(|e| e.to_string())?;
        let spec = DesignSpec::new("y", &["category"]).standardized(false);
        let fit = lmm_fit_crossed(&dyads, &frame, n, &spec, &LmmOptions::default()).map_err(|e| e.to_string())?;
        let (beta, dev) = dense_gls(&dyads, &codes, &y, fit.theta).ok_or("dense oracle failed")?;
        for (a, b) in fit.coef.beta.iter().zip(beta.iter()) {
            let rel = (a - b).abs() / b.abs().max(1.0);
            worst = worst.max(rel);
            if rel > 1e-6 {
                return Err(format!("dataset {k}: beta {a} vs dense {b}"));
            }
        }
        if (fit.reml_deviance - dev).abs() > 1e-6 {
            return Err(format!("dataset {k}: deviance {} vs dense {dev}", fit.reml_deviance));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ k);
        for _ in 0..20 {
            let theta = [rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0)];
            let (_, d) = dense_gls(&dyads, &codes, &y, theta).ok_or("dense oracle failed")?;
            if d < fit.reml_deviance - 1e-8 {
                return Err(format!("dataset {k}: probe {theta:?} beats the optimum"));
            }
        }
    }
    Ok(format!("6 datasets, worst relative beta error {worst:.1e}"))
}

/// `q_i = min(1, min over p_j >= p_i of m p_j / #{p <= p_j})`.
fn bh_bruteforce(p: &[f64]) -> Vec<f64> {
    let m = p.len() as f64;
    p.iter()
        .map(|&pi| {
            p.iter()
                .filter(|&&pj| pj >= pi)
                .map(|&pj| pj * m / p.iter().filter(|&&pl| pl <= pj).count() as f64)
                .fold(1.0f64, f64::min)
        })
        .collect()
}

pub fn bh_oracle(seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..1000 {
        let m = rng.gen_range(1..50);
        let p: Vec<f64> = (0..m)
            .map(|_| {
                if rng.gen_bool(0.2) {
                    f64::from(rng.gen_range(0..5)) / 4.0
                } else {
                    rng.gen::<f64>().powi(2)
                }
            })
            .collect();
        if bh_fdr(&p).map_err(|e| e.to_string())? != bh_bruteforce(&p) {
            return Err(format!("vector {i} differs"));
        }
    }
    Ok("1000 vectors identical".into())
}

/// Sample ISC within `4/√T` of `α_i α_j` for at least 95% of dyads.
pub fn isc_accuracy(seed: u64) -> Result<String, String> {
    let opts = SynthOptions {
        subjects: 12,
        regions: 1,
        planted: 1,
        timepoints_per_run: 10_000,
        communities: 1,
        seed,
        ..Default::default()
    };
    let s = Synthetic::build(&opts).map_err(|e| e.to_string())?;
    let t = s.isc(PartialRunPolicy::Exclude).map_err(|e| e.to_string())?;
    let bound = 4.0 / (10_000f64).sqrt();
    let within = t
        .dyads
        .iter()
        .zip(&t.values[0])
        .filter(|(d, v)| v.is_some_and(|r| (r - expected_isc_oracle(&s.spec, 0, **d)).abs() <= bound))
        .count();
    let frac = within as f64 / t.dyads.len() as f64;
    if frac >= 0.95 {
        Ok(format!("{within}/{} dyads within {bound}", t.dyads.len()))
    } else {
        Err(format!("only {within}/{} dyads within {bound}", t.dyads.len()))
    }
}

/// Planted regions flagged by both pipelines, with ordered contrasts.
pub fn planted_recovery(seed: u64) -> Result<String, String> {
    let opts = SynthOptions {
        subjects: 40,
        regions: 8,
        planted: 2,
        timepoints_per_run: 3000,
        seed,
        ..Default::default()
    };
    let s = Synthetic::build(&opts).map_err(|e| e.to_string())?;
    let study = s.study(PartialRunPolicy::Exclude).map_err(|e| e.to_string())?;
    let config = AnalysisConfig::default().resolve().map_err(|e| e.to_string())?;
    let subject = run_subject_level(&study, &config).map_err(|e| e.to_string())?;
    let dyad = run_dyad_level(&study, &config).map_err(|e| e.to_string())?;
    let planted = s.planted_regions();

    let flagged = |rows: &[annak_core::stats::RegionStats<f64>], model: &str, term: &str, alpha: f64| -> Vec<String> {
        rows.iter()
            .filter(|r| r.model == model && r.term == term && r.p_fdr < alpha)
            .map(|r| r.region.clone())
            .collect()
    };
    let est = |region: &str, term: &str| {
        dyad.rows
            .iter()
            .find(|r| r.region == region && r.model == "category" && r.term == term)
            .map(|r| r.b)
    };
    let by_subject = flagged(&subject.rows, "group", HIGH, config.fdr_alpha.subject);
    let by_dyad = flagged(&dyad.rows, "category", "HH-LL", config.fdr_alpha.dyad);
    for region in &planted {
        if !by_subject.contains(region) || !by_dyad.contains(region) {
            return Err(format!(
                "planted {region} missed (subject {by_subject:?}, dyad {by_dyad:?})"
            ));
        }
        match (est(region, "HH-LH"), est(region, "LH-LL")) {
            (Some(a), Some(b)) if a > 0.0 && b > 0.0 => {}
            other => return Err(format!("{region}: contrasts not ordered {other:?}")),
        }
    }
    let nulls = |flags: &[String]| flags.iter().filter(|r| !planted.contains(r)).count();
    Ok(format!(
        "{} planted found by both; null regions flagged: subject {}, dyad {}",
        planted.len(),
        nulls(&by_subject),
        nulls(&by_dyad)
    ))
}

/// Subject- and dyad-level results byte-identical across pool sizes.
pub fn determinism(seed: u64) -> Result<String, String> {
    let opts = SynthOptions {
        subjects: 24,
        regions: 4,
        planted: 1,
        timepoints_per_run: 400,
        seed,
        ..Default::default()
    };
    let s = Synthetic::build(&opts).map_err(|e| e.to_string())?;
    let config = AnalysisConfig::default().resolve().map_err(|e| e.to_string())?;
    let run = |threads: usize| -> Result<Vec<u8>, String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        pool.install(|| {
            let study = s.study(PartialRunPolicy::Exclude).map_err(|e| e.to_string())?;
            let mut bytes = results_csv(&run_subject_level(&study, &config).map_err(|e| e.to_string())?.rows);
            bytes.extend(results_csv(
                &run_dyad_level(&study, &config).map_err(|e| e.to_string())?.rows,
            ));
            Ok(bytes)
        })
    };
    let reference = run(1)?;
    for threads in [4, 8] {
        if run(threads)? != reference {
            return Err(format!("output with {threads} threads differs from 1 thread"));
        }
    }
    Ok(format!("{} bytes identical for 1/4/8 threads", reference.len()))
}

pub fn run_validation(seed: u64) -> ValidationReport {
    let checks = vec![
        check("dyad-bookkeeping", dyad_bookkeeping()),
        check("lmm-dense-gls-oracle", lmm_oracle(seed)),
        check("bh-bruteforce-oracle", bh_oracle(seed)),
        check("isc-monte-carlo", isc_accuracy(seed)),
        check("planted-recovery", planted_recovery(seed)),
        check("determinism", determinism(seed)),
    ];
    ValidationReport {
        passed: checks.iter().all(|c| c.passed),
        seed,
        checks,
    }
}

/// Run the suite, write `validation.json`, and fail when any check fails.
pub fn validate(config: &AnalysisConfig) -> Result<ValidationReport> {
    let report = run_validation(config.seed);
    let dir = config.output_dir.as_path();
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    crate::io::write_json(&report, &dir.join("validation.json"))?;
    if report.passed {
        Ok(report)
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        Err(PipelineError::Validation(failed.join(", ")))
    }
}
