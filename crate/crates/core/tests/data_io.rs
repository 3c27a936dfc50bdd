//! Dataset files, ingestion, synthetic generation and result CSVs.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::fs;

use common::*;
use hcon::data::{
    build_cocitation, import_csv, ingest_citation_files, parse_csv, plot_script, read_metadata, render_csv,
    export_csv, synth_planted, Dataset, IsolatedPolicy, Metadata, SynthConfig,
};
use hcon::experiments::{
    build_context, normalization_comparison, EpochTrace, ExperimentConfig, GapRecord, SplitSpec,
};
use hcon::{Activation, Error, IncidenceScale, Loss};
use rand::Rng;

#[test]
fn fixtures_load_and_validate() {
    let ds = planted();
    assert_eq!(ds.n_vertices(), 200);
    assert_eq!(ds.vertex_features().cols(), 42);
    assert!(ds.vertex_features().is_normalized());
    assert_eq!(ds.labeled_vertices().len(), 200);
    let tri = Dataset::load(fixture("triangle.hgd.json")).unwrap();
    assert_eq!(tri.hypergraph().incidence_count(), 6);
    // omitted edge features default to member means
    assert_eq!(tri.edge_features().data().row(0).to_vec(), vec![0.5, 0.5]);
}

#[test]
fn save_and_load_are_inverse() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.hgd.json");
    let ds = planted();
    ds.save(&path).unwrap();
    let back = Dataset::load(&path).unwrap();
    assert_eq!(back, ds);
    assert_eq!(fs::read_to_string(&path).unwrap(), ds.to_json().unwrap());
}

#[test]
fn malformed_dataset_files_name_the_problem() {
    let bad_cols = r#"{"name":"x","n_vertices":2,"edges":[[0,1]],"vertex_features":[[1,0],[1]],"labels":[0,1]}"#;
    match Dataset::from_json(bad_cols, "f") {
        Err(Error::Schema(m)) => assert_eq!(m, "vertex_features[1]: expected 2 columns, got 1"),
        other => panic!("{other:?}"),
    }
    let unknown = r#"{"name":"x","n_vertices":1,"edges":[[0]],"vertex_features":[[1]],"labels":[0],"extra":1}"#;
    match Dataset::from_json(unknown, "f") {
        Err(Error::Parse { context, .. }) => assert!(context.starts_with("f:1:")),
        other => panic!("{other:?}"),
    }
    let isolated = r#"{"name":"x","n_vertices":3,"edges":[[0,1]],"vertex_features":[[1],[1],[1]],"labels":[0,1,0]}"#;
    assert!(matches!(Dataset::from_json(isolated, "f"), Err(Error::IsolatedVertex { vertex: 2 })));
    let syntax = "{\"name\": \n 3";
    match Dataset::from_json(syntax, "f") {
        Err(Error::Parse { context, .. }) => assert!(context.starts_with("f:2:")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn planted_homophily_matches_configuration() {
    let fractions: Vec<f64> = (0..5)
        .map(|seed| synth_planted(&SynthConfig { seed, ..Default::default() }).unwrap().within_class_fraction())
        .collect();
    let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
    assert!((mean - 0.9).abs() <= 0.03, "within-class fraction {mean}");
    for f in fractions {
        assert!((f - 0.9).abs() <= 0.05, "{f}");
    }
}

#[test]
fn synth_is_deterministic_and_balanced() {
    let cfg = SynthConfig { seed: 3, ..Default::default() };
    let a = synth_planted(&cfg).unwrap();
    let b = synth_planted(&cfg).unwrap();
    assert_eq!(a.dataset.to_json().unwrap(), b.dataset.to_json().unwrap());
    let ones = a.dataset.labels().iter().filter(|l| **l == Some(1.0)).count();
    assert_eq!(ones, 100);
}

#[test]
fn cocitation_degrees_recount_citers() {
    let mut r = rng(41);
    let pairs: Vec<(String, String)> = (0..600)
        .map(|_| {
            let a = r.random_range(0..100);
            let mut b = r.random_range(0..100);
            if b == a {
                b = (b + 1) % 100;
            }
            (format!("doc{a}"), format!("doc{b}"))
        })
        .collect();
    let co = build_cocitation(&pairs, IsolatedPolicy::Drop).unwrap();
    let mut citers: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    for (a, b) in &pairs {
        citers.entry(b.as_str()).or_default().insert(a.as_str());
    }
    let degrees = co.hypergraph.degrees();
    for (v, id) in co.vertex_ids.iter().enumerate() {
        assert_eq!(degrees.vertex[v], citers[id.as_str()].len(), "{id}");
    }
    for (e, src) in co.edge_sources.iter().enumerate() {
        let cited: BTreeSet<&str> = pairs.iter().filter(|p| &p.0 == src).map(|p| p.1.as_str()).collect();
        let members: BTreeSet<&str> = co.hypergraph.edge(e).iter().map(|&v| co.vertex_ids[v].as_str()).collect();
        assert_eq!(members, cited);
    }
}

#[test]
fn ingest_reads_citation_files() {
    let dir = tempfile::tempdir().unwrap();
    let content = dir.path().join("toy.content");
    let cites = dir.path().join("toy.cites");
    fs::write(
        &content,
        "p1 1 0 0 Theory\np2 0 1 0 ML\np3 1 1 0 Theory\np4 0 0 2 ML\np5 3 0 1 ML\n",
    )
    .unwrap();
    // `cited citing`; p9 is unknown and p5 is never cited
    fs::write(&cites, "p2 p1\np3 p1\np3 p2\np4 p2\np1 p3\np9 p1\np2 p5\n").unwrap();
    let ds = ingest_citation_files(&content, &cites, "Theory", IsolatedPolicy::Drop, "toy").unwrap();
    assert_eq!(ds.n_vertices(), 4);
    assert_eq!(ds.hypergraph().n_edges(), 4);
    assert_eq!(ds.hypergraph().incidence_count(), 6);
    assert!(ds.vertex_features().is_normalized());
    let ones = ds.labels().iter().filter(|l| **l == Some(1.0)).count();
    assert_eq!(ones, 2);
    let strict = ingest_citation_files(&content, &cites, "Theory", IsolatedPolicy::Error, "toy");
    assert!(matches!(strict, Err(Error::IsolatedVertex { .. })));
}

fn sample_records() -> Vec<GapRecord> {
    vec![
        GapRecord {
            n: 42,
            alpha: 0.5,
            eta: 0.1 + 0.2,
            normalization: IncidenceScale::Normalized,
            trials: 10,
            gap_mean: 1.0 / 3.0,
            gap_std: 1e-300,
            train_loss_mean: 0.25,
            test_loss_mean: 0.2500000000000001,
            kappa: 1.5e44,
            theoretical_bound: f64::INFINITY,
            failed_trials: 0,
        },
        GapRecord {
            n: 7,
            alpha: 1.0,
            eta: 0.005,
            normalization: IncidenceScale::Raw,
            trials: 3,
            gap_mean: -0.0,
            gap_std: f64::NAN,
            train_loss_mean: 0.0,
            test_loss_mean: 1.0,
            kappa: 0.0,
            theoretical_bound: 0.0,
            failed_trials: 1,
        },
    ]
}

#[test]
fn csv_round_trips_exactly_with_metadata() {
    let mut meta = Metadata::standard(17, &ExperimentConfig::default()).unwrap();
    meta.push("note", "a=b");
    let recs = sample_records();
    let text = render_csv(&meta, &recs).unwrap();
    assert!(text.starts_with("# master_seed=17\n"));
    assert!(!text.contains('\r'));
    let (meta2, back) = parse_csv::<GapRecord>(&text).unwrap();
    assert_eq!(meta2, meta);
    assert_eq!(meta2.get("note"), Some("a=b"));
    assert_eq!(back.len(), 2);
    let bits = |r: &GapRecord| {
        [r.alpha, r.eta, r.gap_mean, r.gap_std, r.train_loss_mean, r.test_loss_mean, r.kappa, r.theoretical_bound]
            .map(f64::to_bits)
    };
    for (a, b) in recs.iter().zip(&back) {
        assert_eq!((a.n, a.trials, a.failed_trials, a.normalization), (b.n, b.trials, b.failed_trials, b.normalization));
        if a.gap_std.is_nan() {
            assert!(b.gap_std.is_nan());
        } else {
            assert_eq!(bits(a), bits(b));
        }
    }
    assert_eq!(render_csv(&meta, &recs).unwrap(), text);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gap.csv");
    export_csv(&path, &meta, &recs).unwrap();
    assert_eq!(read_metadata(&path).unwrap(), meta);
    let (_, again) = import_csv::<GapRecord>(&path).unwrap();
    assert_eq!(again.len(), 2);
    // header-only files still parse
    let empty = render_csv::<GapRecord>(&meta, &[]).unwrap();
    assert!(parse_csv::<GapRecord>(&empty).unwrap().1.is_empty());
    assert!(parse_csv::<EpochTrace>(&text).is_err());
}

#[test]
fn plot_script_references_its_inputs() {
    let s = plot_script(&[("gap_sweep.csv", "gap")], &[("epochs.csv", "trace")]);
    assert!(s.contains("gap_sweep.csv"));
    assert!(s.contains("epochs.csv"));
}

#[test]
fn identity_hypergraph_makes_both_scales_agree() {
    let ds = Dataset::load(fixture("identity.hgd.json")).unwrap();
    let norm = build_context(&ds, 0.5, IncidenceScale::Normalized).unwrap();
    let raw = build_context(&ds, 0.5, IncidenceScale::Raw).unwrap();
    assert_eq!(norm.mu(), 1.0);
    assert_eq!(raw.mu(), 1.0);
    assert_eq!(norm.a(), raw.a());
    assert_eq!(norm.b(), raw.b());
    assert_eq!(norm.g_max(), raw.g_max());

    let split = SplitSpec { test_fraction: 0.5, train_fractions: vec![1.0], split_seed: 2 };
    let cfg = ExperimentConfig { epochs: 5, trials: 3, ..Default::default() };
    let cmp = normalization_comparison(&ds, &split, &cfg, Activation::Sigmoid, Loss::Squared { y_min: 0.0, y_max: 1.0 })
        .unwrap();
    assert_eq!(cmp.normalized.traces, cmp.raw.traces);
}
