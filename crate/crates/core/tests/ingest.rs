use std::fs;
use std::process::Command;

use mcgc_core::cli::{dataset_fingerprint, RunManifest, MANIFEST_NAME};
use mcgc_core::tx::{
    build_dataset, merge_multi_edges, parse_targets_csv, parse_tx_csv, read_dataset, synth_tx_corpus, PatternOptions,
    NODE_FEATURE_DIM, PHISHING,
};

const TX: &str = "\
from,to,amount,timestamp
t,a,1.5,1600000000
a,t,0.5,1600000100
t,b,2.0,1600000200
b,c,4.0,1600000300
c,d,1.0,1600000400
d,e,1.0,1600000500
e,f,1.0,1600000600
x,x,9.0,1600000700
t,,1.0,1600000800
u,v,abc,1600000900
u,v,1.0,-5
u,v,2.0,1600001000
";

const TARGETS: &str = "address,label\nt,1\nu,0\n";

#[test]
fn ingest_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let tx = dir.path().join("tx.csv");
    let targets = dir.path().join("targets.csv");
    fs::write(&tx, TX).unwrap();
    fs::write(&targets, TARGETS).unwrap();
    let out = dir.path().join("ds");
    let status = Command::new(env!("CARGO_BIN_EXE_mcgc"))
        .args([
            "ingest",
            "--tx",
            tx.to_str().unwrap(),
            "--targets",
            targets.to_str().unwrap(),
        ])
        .args(["--out", out.to_str().unwrap(), "--k-order", "2"])
        .status()
        .unwrap();
    assert!(status.success());

    let ds = read_dataset(&out).unwrap();
    assert_eq!(ds.len(), 2);
    assert_eq!(ds.labels(), vec![1, 0]);
    // t reaches a, b (1 hop) and c (2 hops); d is beyond the radius.
    assert_eq!(ds.graphs[0].num_nodes(), 4);
    assert_eq!(ds.graphs[0].num_edges(), 3);
    assert_eq!(ds.graphs[1].num_nodes(), 2);
    assert_eq!(ds.graphs[0].feature_dim(), NODE_FEATURE_DIM);

    let m = RunManifest::load(out.join(MANIFEST_NAME)).unwrap();
    assert_eq!(m.command, "ingest");
    assert_eq!(
        m.dataset_fingerprint.as_deref(),
        Some(dataset_fingerprint(&ds).as_str())
    );
}

#[test]
fn malformed_rows_are_reported_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let tx = dir.path().join("tx.csv");
    fs::write(&tx, TX).unwrap();
    let parsed = parse_tx_csv(&tx).unwrap();
    assert_eq!(parsed.records.len(), 8);
    assert_eq!(parsed.self_transfers, 1);
    assert_eq!(parsed.row_errors.len(), 3);
    assert_eq!(parsed.dropped(), 4);

    let merged = merge_multi_edges(&parsed.records);
    let ta = &merged[&("a".to_string(), "t".to_string())];
    assert_eq!(ta.amount_out, 0.5);
    assert_eq!(ta.amount_in, 1.5);
    assert_eq!(ta.record_count, 2);
    assert_eq!(ta.mean_timestamp, 1_600_000_050.0);
}

#[test]
fn missing_columns_and_unknown_targets_fail() {
    let dir = tempfile::tempdir().unwrap();
    let tx = dir.path().join("tx.csv");
    fs::write(&tx, "from,to,value,timestamp\na,b,1,1\n").unwrap();
    assert!(parse_tx_csv(&tx).is_err());

    let targets = dir.path().join("targets.csv");
    fs::write(&targets, "address,label\nq,one\n").unwrap();
    assert!(parse_targets_csv(&targets).is_err());

    fs::write(&tx, TX).unwrap();
    fs::write(&targets, "address,label\nnobody,0\n").unwrap();
    let parsed = parse_tx_csv(&tx).unwrap();
    let t = parse_targets_csv(&targets).unwrap();
    assert!(build_dataset("x", &parsed.records, &t, &PatternOptions::default()).is_err());
}

#[test]
fn synthetic_topology_contrast() {
    let corpus = synth_tx_corpus(9, 20, 20).unwrap();
    assert_eq!(corpus, synth_tx_corpus(9, 20, 20).unwrap());
    let ds = build_dataset("s", &corpus.records, &corpus.targets, &PatternOptions::default()).unwrap();
    for g in &ds.graphs {
        let t = g.target_index().unwrap();
        let degree = g.adjacency().row(t).iter().filter(|&&w| w > 0.0).count();
        if g.label() == PHISHING {
            assert!((2..=5).contains(&degree), "phishing target degree {degree}");
        } else {
            assert!((8..=25).contains(&degree), "normal target degree {degree}");
        }
    }
}
