use std::collections::{BTreeMap, BTreeSet};

use annak_core::behav::{demographic_similarity, rating_similarity, Attributes, RatingMatrix, SimilarityColumn};
use annak_core::dyad::{all_dyads, Dyad};
use annak_core::graphnet::{
    category_counts, dyad_centrality_table, in_degree_centrality, median_split, social_distance, CentralityProfile,
    DyadCentrality, Group, SocialGraph, SplitMode,
};
use annak_core::isc::pearson_corr;
use annak_core::isc::{
    fisher_z, fisher_z_value, isc_table, standardize_within_region, subject_mean_isc, PartialRunPolicy, RunLayout,
    Scope, Stage, SubjectSeries, TimeSeriesPanel, FISHER_EPS,
};
use annak_core::stats::contrast::{category_contrasts, contrast_vector, planned_contrasts, Contrast};
use annak_core::stats::design::{DesignSpec, Frame};
use annak_core::stats::dist::Sidedness;
use annak_core::stats::fdr::bh_fdr;
use annak_core::stats::ols::{ols_fit, OlsFit};
use annak_core::stats::spearman::spearman_rho;
use proptest::prelude::*;

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i}")).collect()
}

fn graph_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize)>, Vec<usize>)> {
    (3usize..10).prop_flat_map(|n| {
        (
            Just(n),
            proptest::collection::vec((0..n, 0..n), 0..25),
            proptest::collection::vec(0usize..2, n),
        )
    })
}

fn build_graph(n: usize, edges: &[(usize, usize)], comm: &[usize]) -> SocialGraph {
    let nm = names(n);
    let membership: Vec<(String, String)> = nm.iter().cloned().zip(comm.iter().map(|c| format!("c{c}"))).collect();
    let e: Vec<(String, String)> = edges
        .iter()
        .filter(|(a, b)| a != b)
        .map(|&(a, b)| (nm[a].clone(), nm[b].clone()))
        .collect();
    SocialGraph::new(membership, e).unwrap()
}

/// Floyd-Warshall over the undirected, community-restricted tie graph.
fn floyd(n: usize, edges: &[(usize, usize)], comm: &[usize], c: usize) -> Vec<Vec<Option<u32>>> {
    let mut d = vec![vec![None; n]; n];
    for i in 0..n {
        d[i][i] = Some(0);
    }
    for &(a, b) in edges {
        if a != b && comm[a] == c && comm[b] == c {
            d[a][b] = Some(1);
            d[b][a] = Some(1);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(x), Some(y)) = (d[i][k], d[k][j]) {
                    if d[i][j].map_or(true, |z| x + y < z) {
                        d[i][j] = Some(x + y);
                    }
                }
            }
        }
    }
    d
}

fn panel(data: Vec<Vec<Vec<f64>>>) -> TimeSeriesPanel<f64> {
    let t = data[0][0].len();
    let lengths: BTreeMap<u32, usize> = [(1, t)].into();
    let layout = RunLayout::new(&[1].into(), &lengths).unwrap();
    let regions = (0..data[0].len()).map(|r| format!("r{r}")).collect();
    let subjects = data
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            (
                format!("s{i}"),
                SubjectSeries {
                    layout: layout.clone(),
                    data: d,
                },
            )
        })
        .collect();
    TimeSeriesPanel::new(regions, lengths, subjects).unwrap()
}

fn panel_strategy() -> impl Strategy<Value = Vec<Vec<Vec<f64>>>> {
    (3usize..7, 1usize..3, 5usize..20).prop_flat_map(|(n, r, t)| {
        proptest::collection::vec(
            proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, t), r),
            n,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn in_degrees_sum_to_edges((n, edges, comm) in graph_strategy()) {
        let g = build_graph(n, &edges, &comm);
        let total: usize = in_degree_centrality(&g).values().sum();
        prop_assert_eq!(total, g.edges().len());
    }

    #[test]
    fn social_distance_matches_floyd((n, edges, comm) in graph_strategy()) {
        let g = build_graph(n, &edges, &comm);
        for c in 0..2usize {
            let label = format!("c{c}");
            let members: Vec<usize> = (0..n).filter(|&i| comm[i] == c).collect();
            let got = social_distance(&g, &label);
            let fw = floyd(n, &edges, &comm, c);
            let max_finite = members
                .iter()
                .flat_map(|&i| members.iter().map(move |&j| (i, j)))
                .filter_map(|(i, j)| if i < j { fw[i][j] } else { None })
                .max()
                .unwrap_or(0);
            for (x, &i) in members.iter().enumerate() {
                for &j in &members[x + 1..] {
                    let want = fw[i][j].unwrap_or(max_finite + 1);
                    prop_assert_eq!(got[&Dyad::new(i, j)], want);
                }
            }
            // metric on connected pairs
            for &i in &members {
                for &j in &members {
                    for &k in &members {
                        if let (Some(a), Some(b), Some(cc)) = (fw[i][j], fw[j][k], fw[i][k]) {
                            prop_assert!(cc <= a + b);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn split_partitions(degrees in proptest::collection::vec(0usize..8, 2..20)) {
        let m: BTreeMap<String, usize> = names(degrees.len()).into_iter().zip(degrees.iter().copied()).collect();
        if let Ok(s) = median_split(&m, SplitMode::MedianSplit) {
            prop_assert_eq!(s.group.len(), degrees.len());
            for (k, g) in &s.group {
                prop_assert_eq!(*g == Group::High, m[k] as f64 > s.median);
            }
        }
        if let Ok(s) = median_split(&m, SplitMode::EqualGroups) {
            prop_assert_eq!(s.group.len() + s.excluded.len(), degrees.len());
            prop_assert!(s.group.keys().all(|k| !s.excluded.contains(k)));
        }
    }

    #[test]
    fn dyad_categories_permutation_invariant(degrees in proptest::collection::vec(0usize..8, 4..16), seed in 0u64..1000) {
        let subjects = names(degrees.len());
        let m: BTreeMap<String, usize> = subjects.iter().cloned().zip(degrees.iter().copied()).collect();
        let Ok((profile, _)) = CentralityProfile::build(&m, &subjects, SplitMode::MedianSplit) else { return Ok(()) };
        let rows = dyad_centrality_table(&profile, &subjects).unwrap();
        let mut perm = subjects.clone();
        let len = perm.len();
        perm.rotate_left((seed as usize) % len);
        perm.swap(0, len - 1);
        let rows2 = dyad_centrality_table(&profile, &perm).unwrap();
        prop_assert_eq!(category_counts(&rows), category_counts(&rows2));
        let (hh, lh, ll) = category_counts(&rows);
        let (nh, nl) = (profile.count(Group::High), profile.count(Group::Low));
        prop_assert_eq!((hh, lh, ll), (nh * (nh - 1) / 2, nh * nl, nl * (nl - 1) / 2));
    }

    #[test]
    fn log_min_in_degree_monotone(a in 0usize..50, b in 0usize..50, da in 0usize..5, db in 0usize..5) {
        let row = |x: usize, y: usize| DyadCentrality {
            dyad: Dyad::new(0, 1),
            category: annak_core::graphnet::DyadCategory::LowLow,
            min_in_degree: x.min(y),
            friendship: false,
            social_distance: None,
        };
        let lo: f64 = row(a, b).log_min_in_degree();
        let hi: f64 = row(a + da, b + db).log_min_in_degree();
        prop_assert!(hi >= lo);
        prop_assert!(lo >= 0.0);
    }

    #[test]
    fn isc_affine_invariance(data in panel_strategy(), scale in 0.1f64..10.0, shift in -5.0f64..5.0, who in 0usize..3) {
        let n = data.len();
        let dyads = all_dyads(n);
        let base = isc_table(&panel(data.clone()), &dyads, PartialRunPolicy::Exclude);
        let mut moved = data;
        let who = who % n;
        for series in moved[who].iter_mut() {
            for v in series.iter_mut() {
                *v = *v * scale + shift;
            }
        }
        let after = isc_table(&panel(moved), &dyads, PartialRunPolicy::Exclude);
        if let (Ok(a), Ok(b)) = (base, after) {
            for (ra, rb) in a.values.iter().zip(&b.values) {
                for (x, y) in ra.iter().zip(rb) {
                    match (x, y) {
                        (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                        (None, None) => {}
                        _ => prop_assert!(false, "missingness changed"),
                    }
                }
            }
        }
    }

    #[test]
    fn isc_symmetric_and_bounded(data in panel_strategy()) {
        let p = panel(data.clone());
        let Ok(t) = isc_table(&p, &all_dyads(data.len()), PartialRunPolicy::Exclude) else { return Ok(()) };
        for (r, row) in t.values.iter().enumerate() {
            for (d, v) in t.dyads.iter().zip(row) {
                if let Some(v) = v {
                    prop_assert!((-1.0..=1.0).contains(v));
                    let swapped = pearson_corr(&data[d.b()][r], &data[d.a()][r]).unwrap().unwrap();
                    prop_assert!((swapped - v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fisher_inverts_tanh(z in -5.0f64..5.0) {
        prop_assert!((fisher_z_value(z.tanh(), FISHER_EPS) - z).abs() < 1e-9);
    }

    #[test]
    fn standardization_idempotent_and_order_preserving(row in proptest::collection::vec(proptest::option::weighted(0.9, -3.0f64..3.0), 3..30)) {
        let n_ok = row.iter().flatten().count();
        let distinct: BTreeSet<u64> = row.iter().flatten().map(|v| v.to_bits()).collect();
        prop_assume!(n_ok >= 2 && distinct.len() >= 2);
        let t = annak_core::isc::IscTable {
            subjects: vec![],
            regions: vec!["r".into()],
            dyads: vec![],
            values: vec![row.clone()],
            stage: Stage::FisherZ,
        };
        let s = standardize_within_region(&t).unwrap();
        let mut again = s.clone();
        again.stage = Stage::FisherZ;
        let s2 = standardize_within_region(&again).unwrap();
        for (a, b) in s.values[0].iter().zip(&s2.values[0]) {
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-10),
                (None, None) => {}
                _ => prop_assert!(false),
            }
        }
        for (i, j) in (0..row.len()).flat_map(|i| (0..row.len()).map(move |j| (i, j))) {
            if let (Some(a), Some(b), Some(sa), Some(sb)) = (row[i], row[j], s.values[0][i], s.values[0][j]) {
                prop_assert_eq!(a < b, sa < sb);
            }
        }
    }

    #[test]
    fn subject_means_match_bruteforce(n in 3usize..7, vals in proptest::collection::vec(proptest::option::weighted(0.85, -1.0f64..1.0), 15)) {
        let dyads = all_dyads(n);
        let row: Vec<Option<f64>> = vals.into_iter().take(dyads.len()).collect();
        prop_assume!(row.len() == dyads.len());
        let t = annak_core::isc::IscTable {
            subjects: names(n),
            regions: vec!["r".into()],
            dyads: dyads.clone(),
            values: vec![row.clone()],
            stage: Stage::FisherZ,
        };
        let means = subject_mean_isc(&t, Scope::All, None).unwrap();
        let mut weighted = 0.0;
        let mut weight = 0usize;
        for s in 0..n {
            let mine: Vec<f64> = dyads.iter().zip(&row).filter(|(d, _)| d.contains(s)).filter_map(|(_, v)| *v).collect();
            match means.values[0][s] {
                Some(m) => {
                    prop_assert!((m - mine.iter().sum::<f64>() / mine.len() as f64).abs() < 1e-12);
                    weighted += m * mine.len() as f64;
                    weight += mine.len();
                }
                None => prop_assert!(mine.is_empty()),
            }
        }
        let present: Vec<f64> = row.iter().flatten().copied().collect();
        if !present.is_empty() {
            // every dyad counted once per member
            prop_assert_eq!(weight, 2 * present.len());
            prop_assert!((weighted / weight as f64 - present.iter().sum::<f64>() / present.len() as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn single_predictor_b_is_pearson(x in proptest::collection::vec(-5.0f64..5.0, 6..30), noise in proptest::collection::vec(-1.0f64..1.0, 30)) {
        let y: Vec<f64> = x.iter().zip(&noise).map(|(a, e)| 0.5 * a + e).collect();
        let r = pearson_corr(&x, &y).unwrap();
        prop_assume!(r.is_some());
        let mut f = Frame::new(x.len());
        f.push_numeric("y", y).unwrap();
        f.push_numeric("x", x).unwrap();
        let res = ols_fit(&f, &DesignSpec::new("y", &["x"])).unwrap();
        prop_assert!((res[0].b - r.unwrap()).abs() < 1e-10);
    }

    #[test]
    fn bh_permutation_invariant_and_monotone(p in proptest::collection::vec(0.0f64..=1.0, 1..40), rot in 0usize..40) {
        let q = bh_fdr(&p).unwrap();
        let mut pp = p.clone();
        let k = rot % p.len();
        pp.rotate_left(k);
        let mut qq = bh_fdr(&pp).unwrap();
        qq.rotate_right(k);
        prop_assert_eq!(&q, &qq);
        for i in 0..p.len() {
            prop_assert!(q[i] >= p[i] * (1.0 - 1e-15) && q[i] <= 1.0);
            for j in 0..p.len() {
                if p[i] <= p[j] {
                    prop_assert!(q[i] <= q[j]);
                }
            }
        }
    }

    #[test]
    fn spearman_monotone_invariance(x in proptest::collection::vec(-3.0f64..3.0, 5..25), y in proptest::collection::vec(-3.0f64..3.0, 25)) {
        let y = &y[..x.len()];
        let Ok(a) = spearman_rho(&x, y) else { return Ok(()) };
        let tx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let ty: Vec<f64> = y.iter().map(|v| v * v * v + 2.0 * v).collect();
        let b = spearman_rho(&tx, &ty).unwrap();
        prop_assert!((a.rho - b.rho).abs() < 1e-12);
    }

    #[test]
    fn contrast_linearity(y in proptest::collection::vec(-2.0f64..2.0, 12), c in proptest::collection::vec(-2.0f64..2.0, 12)) {
        let mut f = Frame::new(12);
        f.push_numeric("y", y).unwrap();
        f.push_numeric("c", c).unwrap();
        f.push_factor("cat", vec!["LL".into(), "LH".into(), "HH".into()], (0..12).map(|i| i % 3).collect()).unwrap();
        let spec = DesignSpec::new("y", &["cat"]).with_covariates(&["c"]);
        let Ok(d) = spec.design(&f) else { return Ok(()) };
        let Ok(yy) = spec.response(&f) else { return Ok(()) };
        let fit = OlsFit::fit(&d, &yy).unwrap();
        let r = planned_contrasts(&fit.coef, &d, "cat", &category_contrasts(), Sidedness::TwoSided, 12).unwrap();
        prop_assert!((r[0].b - (r[1].b + r[2].b)).abs() < 1e-12);
        let l0 = contrast_vector(&d, "cat", &Contrast::difference("HH", "LL")).unwrap();
        let l1 = contrast_vector(&d, "cat", &Contrast::difference("HH", "LH")).unwrap();
        let l2 = contrast_vector(&d, "cat", &Contrast::difference("LH", "LL")).unwrap();
        for j in 0..l0.len() {
            prop_assert!((l0[j] - (l1[j] + l2[j])).abs() < 1e-15);
        }
    }

    #[test]
    fn rating_similarity_properties(n in 2usize..10, items in 2usize..15, raw in proptest::collection::vec(1i64..=5, 150), perm_seed in 0usize..100) {
        let rows: Vec<Vec<i64>> = (0..n).map(|i| raw[i * items..(i + 1) * items].to_vec()).collect();
        let item_names: Vec<String> = (0..items).map(|j| format!("v{j}")).collect();
        let m = RatingMatrix::new(names(n), item_names.clone(), rows.clone()).unwrap();
        let s: SimilarityColumn<f64> = rating_similarity("e", &m, &names(n), Scope::All, None).unwrap();
        let dist = |a: &[i64], b: &[i64]| a.iter().zip(b).map(|(x, y)| ((x - y) * (x - y)) as f64).sum::<f64>().sqrt();
        let dmax = all_dyads(n).iter().map(|d| dist(&rows[d.a()], &rows[d.b()])).fold(0.0, f64::max);
        for d in all_dyads(n) {
            let v = s.value(d).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            let dd = dist(&rows[d.a()], &rows[d.b()]);
            let want = if dmax > 0.0 { 1.0 - dd / dmax } else { 1.0 };
            prop_assert!((v - want).abs() < 1e-12);
            prop_assert_eq!(v == 1.0, rows[d.a()] == rows[d.b()] || dmax == 0.0);
        }
        if dmax > 0.0 {
            prop_assert_eq!(s.values.iter().flatten().copied().fold(1.0, f64::min), 0.0);
        }
        // item order does not matter
        let k = perm_seed % items;
        let rot: Vec<Vec<i64>> = rows.iter().map(|r| { let mut r = r.clone(); r.rotate_left(k); r }).collect();
        let m2 = RatingMatrix::new(names(n), item_names, rot).unwrap();
        let s2: SimilarityColumn<f64> = rating_similarity("e", &m2, &names(n), Scope::All, None).unwrap();
        for (a, b) in s.values.iter().zip(&s2.values) {
            prop_assert!((a.unwrap() - b.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn age_similarity_endpoints(ages in proptest::collection::vec(16u32..40, 2..12)) {
        let n = ages.len();
        let attrs: Vec<Attributes> = ages.iter().map(|&a| Attributes {
            age: Some(f64::from(a)),
            gender: Some("x".into()),
            home_country: Some("y".into()),
            ethnicities: Attributes::parse_ethnicities("z"),
        }).collect();
        let cols: Vec<SimilarityColumn<f64>> = demographic_similarity(&names(n), &attrs, Scope::All, None).unwrap();
        let age = &cols[0];
        let all_equal = ages.iter().all(|&a| a == ages[0]);
        for d in all_dyads(n) {
            let v = age.value(d).unwrap();
            if ages[d.a()] == ages[d.b()] {
                prop_assert_eq!(v, 1.0);
            }
            prop_assert_eq!(age.value(d), age.value(Dyad::new(d.b(), d.a())));
        }
        if !all_equal {
            prop_assert!(age.values.iter().flatten().any(|&v| v == 0.0));
        }
    }
}

#[test]
fn fisher_table_stage() {
    let t = annak_core::isc::IscTable {
        subjects: names(2),
        regions: vec!["r".into()],
        dyads: all_dyads(2),
        values: vec![vec![Some(0.5)]],
        stage: Stage::RawR,
    };
    assert_eq!(fisher_z(&t, FISHER_EPS).unwrap().stage, Stage::FisherZ);
}
