use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use sparserec::evaluation::{generate_synthetic, rank1_identification, SyntheticParams};
use sparserec::{Classifier, Error};
use sparserec_cli::commands::{
    cmd_fit, cmd_flatten, cmd_gen_synthetic, cmd_identify, cmd_sweep_pcs, cmd_verify, fit_model, project_probes,
};
use sparserec_cli::formats::scores_from_csv;
use sparserec_cli::{CliError, FeatureFile, FeatureLayout, FormatError, ModelBundle, PcaSetting, RunConfig};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparserec"))
        .args(args)
        .env_remove("SPARSEREC_THREADS")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_params(seed: u64) -> SyntheticParams {
    SyntheticParams::new(4, 6, 20, 2, 0.05, seed)
}

fn cfg_with(pca: PcaSetting) -> RunConfig {
    RunConfig {
        pca,
        ..RunConfig::default()
    }
}

#[test]
fn flatten_small_tensor_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.csrc");
    FeatureFile::with_layout(
        FeatureLayout::Tensor { n1: 2, n2: 2, channels: 2 },
        vec![(1..=8).map(f64::from).collect()],
        vec![0],
        vec!["x".into()],
    )
    .unwrap()
    .write(&input)
    .unwrap();
    let out = dir.path().join("flat.csrc");
    let o = run(&["flatten", s(&input), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let flat = FeatureFile::read(&out).unwrap();
    assert_eq!(flat.layout, FeatureLayout::Flat { dim: 8 });
    assert_eq!(flat.records[0], (1..=8).map(f64::from).collect::<Vec<_>>());
}

#[test]
fn flatten_full_size_activation() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.csrc");
    let len = 14 * 14 * 512;
    let record: Vec<f64> = (0..len).map(|i| (i % 97) as f64).collect();
    FeatureFile::with_layout(
        FeatureLayout::Tensor { n1: 14, n2: 14, channels: 512 },
        vec![record.clone()],
        vec![3],
        vec!["eye".into()],
    )
    .unwrap()
    .write(&input)
    .unwrap();
    let flat = cmd_flatten(&input, &dir.path().join("flat.csrc")).unwrap();
    assert_eq!(flat.layout, FeatureLayout::Flat { dim: 100_352 });
    assert_eq!(flat.records[0], record);
}

#[test]
fn truncated_file_fails_with_offset() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.csrc");
    FeatureFile::with_layout(
        FeatureLayout::Tensor { n1: 2, n2: 2, channels: 2 },
        vec![vec![0.5; 8]; 3],
        vec![0, 1, 2],
        vec!["a".into(), "b".into(), "c".into()],
    )
    .unwrap()
    .write(&input)
    .unwrap();
    let bytes = fs::read(&input).unwrap();
    fs::write(&input, &bytes[..60]).unwrap();
    let o = run(&["flatten", s(&input), "--out", s(&dir.path().join("x.csrc"))]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("t.csrc") && err.contains("byte offset 25"), "{err}");
    assert!(matches!(
        cmd_flatten(&input, &dir.path().join("x.csrc")),
        Err(CliError::Format { error: FormatError::TruncatedFile { offset: 25, .. }, .. })
    ));
}

#[test]
fn flatten_rejects_flat_input() {
    let dir = tempfile::tempdir().unwrap();
    let (enrol, _) = cmd_gen_synthetic(&small_params(1), None, dir.path()).unwrap();
    let o = run(&["flatten", s(&enrol), "--out", s(&dir.path().join("x.csrc"))]);
    assert!(!o.status.success());
}

#[test]
fn gen_synthetic_counts_determinism_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        let o = run(&[
            "--seed", "5", "gen-synthetic", "--classes", "3", "--per-class", "5", "--dim", "20", "--out",
            s(&dir.path().join(sub)),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["enrolment.csrc", "probes.csrc"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("b").join(name)).unwrap());
    }
    let file = FeatureFile::read(&dir.path().join("a/enrolment.csrc")).unwrap();
    assert_eq!(file.len(), 15);
    let (enrol, _) = generate_synthetic(&SyntheticParams::new(3, 5, 20, 5, 0.15, 5)).unwrap();
    let expected = FeatureFile::from_dataset(&enrol).unwrap();
    assert_eq!(file, expected);
}

#[test]
fn gen_synthetic_rejects_bad_params() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["gen-synthetic", "--dim", "5", "--subspace-dim", "5", "--out", s(dir.path())]);
    assert!(!o.status.success());
    let o = run(&["gen-synthetic", "--tensor-shape", "3x3x3", "--out", s(dir.path())]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("tensor shape"));
}

#[test]
fn fit_without_pca_keeps_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let (enrol, _) = cmd_gen_synthetic(&small_params(2), None, dir.path()).unwrap();
    let model = cmd_fit(&enrol, &cfg_with(PcaSetting::Off), &dir.path().join("m")).unwrap();
    assert!(model.pca.is_none());
    assert_eq!(model.dictionary.dim(), 20);
    assert_eq!(ModelBundle::read(&dir.path().join("m/model.bin")).unwrap(), model);
}

#[test]
fn too_many_components_is_explained() {
    let dir = tempfile::tempdir().unwrap();
    let params = SyntheticParams::new(10, 10, 2000, 5, 0.1, 3);
    let (enrol, _) = cmd_gen_synthetic(&params, None, dir.path()).unwrap();
    let o = run(&["--pca", "1300", "fit", s(&enrol), "--out", s(&dir.path().join("m"))]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("1300") && err.contains("M - 1") && err.contains("enrolment.csrc"), "{err}");
    let ds = FeatureFile::read(&enrol).unwrap().to_dataset().unwrap();
    assert!(matches!(
        fit_model(&ds, &cfg_with(PcaSetting::Fixed(1300))),
        Err(Error::KTooLarge { requested: 1300, max: 99, .. })
    ));
}

#[test]
fn fit_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (enrol, _) = cmd_gen_synthetic(&small_params(3), None, dir.path()).unwrap();
    for sub in ["a", "b"] {
        let o = run(&["--pca", "retain:0.95", "fit", s(&enrol), "--out", s(&dir.path().join(sub))]);
        assert!(o.status.success());
    }
    for name in ["model.bin", "fit_report.txt"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(name)).unwrap(),
            fs::read(dir.path().join("b").join(name)).unwrap()
        );
    }
}

#[test]
fn separable_data_verifies_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let mut params = SyntheticParams::new(5, 8, 40, 2, 0.0, 4);
    params.shared_offset = 0.0;
    let (enrol, probes) = cmd_gen_synthetic(&params, None, dir.path()).unwrap();
    cmd_fit(&enrol, &cfg_with(PcaSetting::Off), &dir.path().join("m")).unwrap();
    let o = run(&[
        "--lambda", "0.001", "verify", s(&probes), "--model", s(&dir.path().join("m/model.bin")), "--out",
        s(&dir.path().join("v")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(dir.path().join("v/report.txt")).unwrap();
    let header = report.lines().find(|l| l.contains("EER (%)")).unwrap();
    assert!(header.contains("GMR@FAR=0.1 (%)") && header.contains("GMR@FAR=0.01 (%)") && header.contains("GMR@FAR=0.001 (%)"));
    let values: Vec<&str> = report
        .lines()
        .skip_while(|l| !l.contains("EER (%)"))
        .nth(1)
        .unwrap()
        .split_whitespace()
        .collect();
    assert_eq!(values, ["0.00", "100.00", "100.00", "100.00"]);
    for key in ["lambda = 0.001", "sparsity_k = 40", "pca_components = off", "residual_tol = 0.000001"] {
        assert!(report.contains(key), "missing `{key}` in\n{report}");
    }
    let kv = fs::read_to_string(dir.path().join("v/report.kv")).unwrap();
    assert!(kv.contains("config.lambda=0.001\n") && kv.contains("eer=0.0000000000000000e0\n"), "{kv}");
    let scores = scores_from_csv(&fs::read_to_string(dir.path().join("v/scores.csv")).unwrap()).unwrap();
    assert_eq!(scores.len(), 40 * 5);
    assert_eq!(scores.genuine_count(), 40);
    let roc = fs::read_to_string(dir.path().join("v/roc.csv")).unwrap();
    assert!(roc.starts_with("threshold,far,gmr\n-inf,"));
}

#[test]
fn pair_protocol_scores_only_listed_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let (enrol, probes) = cmd_gen_synthetic(&small_params(6), None, dir.path()).unwrap();
    cmd_fit(&enrol, &RunConfig::default(), &dir.path().join("m")).unwrap();
    let pairs = dir.path().join("pairs.csv");
    fs::write(&pairs, "probe_id,claimed_class\nc0_p0,0\nc0_p0,1\nc2_p3,2\nc3_p1,0\n").unwrap();
    let protocol = format!("pairs:{}", s(&pairs));
    let model = dir.path().join("m/model.bin");
    let o = run(&["--protocol", &protocol, "verify", s(&probes), "--model", s(&model), "--out", s(&dir.path().join("v"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let scores = scores_from_csv(&fs::read_to_string(dir.path().join("v/scores.csv")).unwrap()).unwrap();
    let got: Vec<(&str, usize, bool)> = scores
        .records()
        .iter()
        .map(|r| (r.probe_id.as_str(), r.claimed_class, r.is_genuine))
        .collect();
    assert_eq!(got, [("c0_p0", 0, true), ("c0_p0", 1, false), ("c2_p3", 2, true), ("c3_p1", 0, false)]);

    fs::write(&pairs, "nobody,0\n").unwrap();
    let o = run(&["--protocol", &protocol, "verify", s(&probes), "--model", s(&model), "--out", s(&dir.path().join("w"))]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nobody"));
}

#[test]
fn scores_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let (enrol, probes) = cmd_gen_synthetic(&small_params(7), None, dir.path()).unwrap();
    cmd_fit(&enrol, &RunConfig::default(), &dir.path().join("m")).unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("v{threads}"));
        let o = Command::new(env!("CARGO_BIN_EXE_sparserec"))
            .args(["verify", s(&probes), "--model", s(&dir.path().join("m/model.bin")), "--out", s(&out)])
            .env("SPARSEREC_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success());
        outputs.push(fs::read(out.join("scores.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let o = Command::new(env!("CARGO_BIN_EXE_sparserec"))
        .args(["verify", s(&probes), "--model", s(&dir.path().join("m/model.bin")), "--out", s(dir.path())])
        .env("SPARSEREC_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!o.status.success());
}

#[test]
fn identify_enrolment_is_perfect_and_table_shaped() {
    let dir = tempfile::tempdir().unwrap();
    let (enrol, _) = cmd_gen_synthetic(&small_params(8), None, dir.path()).unwrap();
    cmd_fit(&enrol, &cfg_with(PcaSetting::Off), &dir.path().join("m")).unwrap();
    let model = dir.path().join("m/model.bin");
    let rows = cmd_identify(&enrol, &model, &RunConfig::default(), &Classifier::ALL, &dir.path().join("i")).unwrap();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r.accuracy(), 1.0, "{r:?}");
    }
    let o = run(&["--classifier", "sacrc,knn1", "identify", s(&enrol), "--model", s(&model), "--out", s(&dir.path().join("j"))]);
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("j/identify.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let txt = fs::read_to_string(dir.path().join("j/identify.txt")).unwrap();
    assert!(txt.contains("SA-CRC") && txt.contains("KNN(Euc,1)") && txt.contains("100.00"));
}

#[test]
fn identify_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let params = SyntheticParams::new(8, 6, 50, 4, 0.3, 9);
    let (enrol, probes) = cmd_gen_synthetic(&params, None, dir.path()).unwrap();
    let cfg = cfg_with(PcaSetting::Fixed(20));
    cmd_fit(&enrol, &cfg, &dir.path().join("m")).unwrap();
    let o = run(&["identify", s(&probes), "--model", s(&dir.path().join("m/model.bin")), "--out", s(&dir.path().join("i"))]);
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("i/identify.csv")).unwrap();

    let enrol_ds = FeatureFile::read(&enrol).unwrap().to_dataset().unwrap();
    let probe_ds = FeatureFile::read(&probes).unwrap().to_dataset().unwrap();
    let model = fit_model(&enrol_ds, &cfg).unwrap();
    let rec = model.recognizer(model.config).unwrap();
    let projected = project_probes(&probe_ds, &model).unwrap();
    for (line, c) in csv.lines().skip(1).zip(Classifier::ALL) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0], c.name());
        let acc: f64 = fields[1].parse().unwrap();
        assert_eq!(acc, rank1_identification(&projected, &rec, c).unwrap(), "{}", c.name());
    }
}

#[test]
fn identify_rejects_unknown_probe_class() {
    let dir = tempfile::tempdir().unwrap();
    let (enrol, _) = cmd_gen_synthetic(&small_params(10), None, dir.path()).unwrap();
    cmd_fit(&enrol, &RunConfig::default(), &dir.path().join("m")).unwrap();
    let probes = dir.path().join("odd.csv");
    let row: Vec<String> = (0..20).map(|i| (i as f64 * 0.1).to_string()).collect();
    fs::write(&probes, format!("stranger,9,{}\n", row.join(","))).unwrap();
    let err = cmd_identify(&probes, &dir.path().join("m/model.bin"), &RunConfig::default(), &Classifier::ALL, dir.path())
        .unwrap_err();
    assert!(matches!(err, CliError::Data { error: Error::UnknownClass { class: 9, num_classes: 4 }, .. }), "{err}");
}

#[test]
fn csv_features_fit_like_binary() {
    let dir = tempfile::tempdir().unwrap();
    let (enrol, _) = cmd_gen_synthetic(&small_params(11), None, dir.path()).unwrap();
    let file = FeatureFile::read(&enrol).unwrap();
    let mut csv = String::from("id,class,values...\n");
    for ((r, l), id) in file.records.iter().zip(&file.labels).zip(&file.ids) {
        let values: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
        csv.push_str(&format!("{id},{l},{}\n", values.join(",")));
    }
    let csv_path = dir.path().join("enrol.csv");
    fs::write(&csv_path, csv).unwrap();
    let a = cmd_fit(&enrol, &RunConfig::default(), &dir.path().join("a")).unwrap();
    let b = cmd_fit(&csv_path, &RunConfig::default(), &dir.path().join("b")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sweep_rows_follow_k_list() {
    let dir = tempfile::tempdir().unwrap();
    let (enrol, probes) = cmd_gen_synthetic(&SyntheticParams::new(5, 6, 30, 3, 0.1, 12), None, dir.path()).unwrap();
    let rows = cmd_sweep_pcs(&enrol, &probes, &[5, 13], &RunConfig::default(), &dir.path().join("s")).unwrap();
    assert_eq!(rows.iter().map(|r| r.k).collect::<Vec<_>>(), [5, 13]);
    let csv = fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("k,eer,gmr_at_far_0.1,gmr_at_far_0.01,gmr_at_far_0.001\n"));
    for (k, row) in [5usize, 13].iter().zip(&rows) {
        let cfg = cfg_with(PcaSetting::Fixed(*k));
        let mdir = dir.path().join(format!("m{k}"));
        cmd_fit(&enrol, &cfg, &mdir).unwrap();
        let v = cmd_verify(&probes, &mdir.join("model.bin"), &cfg, &mdir).unwrap();
        assert_eq!(v.metrics, row.metrics);
    }
    let o = run(&["sweep-pcs", s(&enrol), s(&probes), "--ks", "5,1000", "--out", s(&dir.path().join("t"))]);
    assert!(!o.status.success());
}

#[test]
fn config_file_and_flag_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let (enrol, _) = cmd_gen_synthetic(&small_params(13), None, dir.path()).unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "lambda = 0.1\nsparsity = 4\n").unwrap();
    let o = run(&["--config", s(&cfg), "fit", s(&enrol), "--out", s(dir.path())]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("run.cfg") && err.contains("sparsity"), "{err}");

    fs::write(&cfg, "lambda = 0.1\nsparsity_k = 4\n").unwrap();
    let o = run(&["--config", s(&cfg), "--lambda", "0.2", "fit", s(&enrol), "--out", s(&dir.path().join("m"))]);
    assert!(o.status.success());
    let model = ModelBundle::read(&dir.path().join("m/model.bin")).unwrap();
    assert_eq!((model.config.lambda, model.config.sparsity_k), (0.2, 4));

    for args in [
        vec!["--k", "0", "fit", s(&enrol), "--out", s(dir.path())],
        vec!["--pca", "retain:2", "fit", s(&enrol), "--out", s(dir.path())],
        vec!["fit", "/nonexistent/e.csrc", "--out", s(dir.path())],
    ] {
        let o = run(&args);
        assert!(!o.status.success(), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    let o = run(&["verify", s(&enrol), "--model", s(&enrol), "--out", s(dir.path())]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad magic"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn feature_files_round_trip_on_disk(
        seed in any::<u64>(),
        classes in 1usize..4,
        per_class in 1usize..4,
        dim in 3usize..12,
    ) {
        let dir = tempfile::tempdir().unwrap();
        let params = SyntheticParams::new(classes, per_class, dim, 2, 0.5, seed);
        let (enrol, probes) = cmd_gen_synthetic(&params, None, dir.path()).unwrap();
        let (e, p) = generate_synthetic(&params).unwrap();
        for (path, ds) in [(&enrol, &e), (&probes, &p)] {
            let back = FeatureFile::read(path).unwrap().to_dataset().unwrap();
            prop_assert_eq!(back.samples(), ds.samples());
            let bytes = fs::read(path).unwrap();
            prop_assert_eq!(FeatureFile::from_bytes(&bytes).unwrap().to_bytes().unwrap(), bytes);
        }
    }
}
