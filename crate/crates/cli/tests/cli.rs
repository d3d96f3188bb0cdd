use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").canonicalize().unwrap()
}

fn transproc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_transproc")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A config in `dir` over the fixture resources.
fn write_config(dir: &Path, bundle: &Path, resource_dir: &Path, experiments: &str) -> PathBuf {
    let r = |f: &str| resource_dir.join(f).display().to_string();
    let text = format!(
        "bundle = {:?}\nseed = 3\n\n[resources]\nembeddings = {:?}\ne_given_f = {:?}\nf_given_e = {:?}\nconcept_graph = {:?}\nmanual_lists = {:?}\n\n{experiments}",
        bundle.display().to_string(),
        r("embeddings.txt"),
        r("e_given_f.tsv"),
        r("f_given_e.tsv"),
        r("concepts.tsv"),
        r("manual_lists.toml"),
    );
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

const FOREST: &str = "[[experiment]]\nname = \"six\"\ntask = \"six_class_full\"\n[experiment.classifier]\nkind = \"forest\"\nn_trees = 5\n";

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn validate_fixture_prints_census() {
    let cfg = fixtures().join("tiny.toml");
    let o = transproc(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("3 sentence pairs, 7 phrase pairs"), "{out}");
    assert!(out.lines().any(|l| l.starts_with("Literal") && l.ends_with(" 2")), "{out}");
    assert!(out.lines().any(|l| l.starts_with("total") && l.ends_with(" 7")), "{out}");
}

#[test]
fn validate_names_record_with_bad_span() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixtures().join("tiny.jsonl")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut rec: serde_json::Value = serde_json::from_str(&lines[1]).unwrap();
    let id = rec["id"].as_str().unwrap().to_string();
    rec["phrase_pairs"][0]["src_span"] = serde_json::json!([0, 999]);
    lines[1] = rec.to_string();
    let bundle = dir.path().join("bad.jsonl");
    fs::write(&bundle, lines.join("\n")).unwrap();
    let cfg = write_config(dir.path(), &bundle, &fixtures().join("resources"), FOREST);
    let o = transproc(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains(&format!("`{id}`")) && err.contains("record 2"), "{err}");
}

#[test]
fn validate_stops_at_missing_resource_before_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let res = dir.path().join("res");
    fs::create_dir(&res).unwrap();
    for f in ["embeddings.txt", "e_given_f.tsv", "f_given_e.tsv", "manual_lists.toml"] {
        fs::copy(fixtures().join("resources").join(f), res.join(f)).unwrap();
    }
    // The bundle does not exist either; only the resource may be reported.
    let cfg = write_config(dir.path(), &dir.path().join("missing.jsonl"), &res, FOREST);
    let o = transproc(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("resource `concept_graph` not found"), "{err}");
    assert!(!err.contains("missing.jsonl"), "{err}");
}

#[test]
fn unparseable_config_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "bundle = [").unwrap();
    assert_eq!(code(&transproc(&["validate", "--config", cfg.to_str().unwrap()])), 1);
}

#[test]
fn featurize_is_deterministic_and_honours_masks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixtures().join("tiny.toml");
    let cfg = cfg.to_str().unwrap();
    let out = |sub: &str| dir.path().join(sub).display().to_string();
    for sub in ["a", "b"] {
        let o = transproc(&["featurize", "-q", "--config", cfg, "--out", &out(sub)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(o.stdout.is_empty());
    }
    let a = fs::read(dir.path().join("a/features.tsv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/features.tsv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.contains("# config_sha256\t"));
    assert_eq!(data_rows(&text).len(), 7);
    assert!(text.contains("@surface"));

    let o = transproc(&["featurize", "-q", "--config", cfg, "--experiment", "no_surface", "--out", &out("m")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let masked = fs::read_to_string(dir.path().join("m/features_no_surface.tsv")).unwrap();
    assert!(!masked.contains("@surface"));
    assert!(masked.contains("@PoS_tagging"));
}

#[test]
fn unknown_experiment_lists_available() {
    let cfg = fixtures().join("tiny.toml");
    let o = transproc(&["run", "--config", cfg.to_str().unwrap(), "--experiment", "nope"]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("unknown experiment `nope`"), "{err}");
    assert!(err.contains("six_class_forest, no_surface"), "{err}");
}

#[test]
fn run_predict_and_report_compose() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixtures().join("run.toml");
    let cfg = cfg.to_str().unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let run = |seed: Option<&str>| {
        let mut args = vec!["run", "-q", "--config", cfg, "--out", out_s];
        for e in ["binary_3to1_forest", "binary_3to1_neural", "five_class_ablation"] {
            args.extend(["--experiment", e]);
        }
        if let Some(s) = seed {
            args.extend(["--seed", s]);
        }
        let o = transproc(&args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        fs::read_to_string(out.join("report.tsv")).unwrap()
    };
    let first = run(None);
    assert!(first.contains("#table\tconfigurations"));
    assert!(first.contains("#table\tablation"));
    assert!(first.contains("# seeds\tbinary_3to1_forest\texperiment=11\t"));
    assert_eq!(first, run(None), "rerun changed the report");
    assert!(out.join("binary_3to1_neural/loss_curves.tsv").is_file());
    assert!(out.join("binary_3to1_neural/models/fold1.json").is_file());
    let preds = fs::read_to_string(out.join("binary_3to1_forest/predictions.tsv")).unwrap();
    assert_eq!(data_rows(&preds).len(), 330);

    // `report` rebuilds the same file from the saved results.
    fs::remove_file(out.join("report.tsv")).unwrap();
    let o = transproc(&["report", "-q", "--config", cfg, "--out", out_s]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("report.tsv")).unwrap(), first);

    let model = out.join("binary_3to1_forest/models/final.json");
    let tiny = fixtures().join("tiny.jsonl");
    let pred_dir = dir.path().join("pred");
    let o = transproc(&[
        "predict", "-q", "--config", cfg, "--model", model.to_str().unwrap(),
        "--bundle", tiny.to_str().unwrap(), "--out", pred_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(pred_dir.join("predictions.tsv")).unwrap();
    assert!(text.contains("id\tsrc_span\ttgt_span\tpredicted\tp_L\tp_NL\n"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 7);
    for r in rows {
        let f: Vec<&str> = r.split('\t').collect();
        assert!(f[3] == "L" || f[3] == "NL");
        let p: f64 = f[4].parse::<f64>().unwrap() + f[5].parse::<f64>().unwrap();
        assert!((p - 1.0).abs() < 1e-9);
    }

    let empty = fixtures().join("empty.jsonl");
    let o = transproc(&[
        "predict", "-q", "--config", cfg, "--model", model.to_str().unwrap(),
        "--bundle", empty.to_str().unwrap(), "--out", pred_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::metadata(pred_dir.join("predictions.tsv")).unwrap().len(), 0);

    // A model whose feature header does not match names the column.
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    let header = v["model"]["header"].as_array_mut().unwrap();
    header[2] = serde_json::json!("f99.bogus");
    let bad = dir.path().join("bad_model.json");
    fs::write(&bad, v.to_string()).unwrap();
    let o = transproc(&[
        "predict", "-q", "--config", cfg, "--model", bad.to_str().unwrap(),
        "--bundle", tiny.to_str().unwrap(), "--out", pred_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("f99.bogus"), "{}", stderr(&o));

    let changed = run(Some("5"));
    assert!(changed.contains("# seeds\tbinary_3to1_forest\texperiment=5\t"));
}

#[test]
fn ablating_a_neural_experiment_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixtures().join("run.toml");
    let o = transproc(&[
        "ablate", "-q", "--config", cfg.to_str().unwrap(), "--experiment", "binary_3to1_neural",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("ablation needs a feature-based classifier"), "{}", stderr(&o));
}

#[test]
fn report_without_results_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixtures().join("run.toml");
    let o = transproc(&["report", "-q", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}
