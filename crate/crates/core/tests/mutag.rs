//! Ingestion of the public MUTAG distribution shipped under `data/`.

use std::path::PathBuf;

use otcoarsen::data::{build_features, parse_tu_dataset, split_folds, FeatureSpec};
use otcoarsen::graph::Graph;

fn mutag_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/MUTAG")
}

#[test]
fn statistics_match_the_published_table() {
    let dir = mutag_dir();
    if !dir.is_dir() {
        eprintln!("data/MUTAG not present; skipping");
        return;
    }
    let raw = parse_tu_dataset(&dir, "MUTAG").unwrap();
    assert_eq!(raw.num_graphs(), 188);
    assert_eq!(raw.classes().len(), 2);
    let avg = raw.num_nodes() as f64 / raw.num_graphs() as f64;
    assert!((avg - 17.93).abs() < 0.005, "{avg}");

    assert_eq!(FeatureSpec::default_for(&raw), FeatureSpec::NodeLabelOneHot);
    let graphs: Vec<Graph<f64>> = build_features(&raw, FeatureSpec::NodeLabelOneHot).unwrap();
    assert!(graphs.iter().all(|g| g.feature_dim() == 7));
    for g in &graphs {
        assert_eq!(g.adjacency().max_asymmetry(), 0.0);
        for i in 0..g.n() {
            assert_eq!(g.features().row(i).iter().sum::<f64>(), 1.0);
        }
    }
    let edges: usize = graphs.iter().map(|g| g.adjacency().nnz()).sum();
    assert_eq!(edges, 7442);

    let labels: Vec<usize> = graphs.iter().map(|g| g.label().unwrap()).collect();
    let folds = split_folds(188, &labels, 10, 0).unwrap();
    let mut sizes = [0; 10];
    folds.iter().for_each(|&f| sizes[f] += 1);
    assert!(sizes.iter().all(|&s| s == 18 || s == 19));
}
