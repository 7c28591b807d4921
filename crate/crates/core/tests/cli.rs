use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value as Json;

fn kbtrust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kbtrust"))
        .args(args)
        .env_remove("KBTRUST_WORKERS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = kbtrust(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, seed: &str) {
    ok(&["synth", "--out-dir", s(dir), "--seed", seed, "--sources", "8", "--triples", "40"]);
}

#[test]
fn fuse_multi_logs_each_iteration() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    synth(&data, "1");
    ok(&["fuse", s(&data.join("records.jsonl")), "--iters", "5", "--out-dir", s(&out)]);
    let log = fs::read_to_string(out.join("iterations.log")).unwrap();
    let iterations: Vec<&str> = log.lines().filter(|l| l.contains("iteration=")).collect();
    assert_eq!(iterations.len(), 5, "{log}");
    assert!(log.lines().last().unwrap().starts_with("model=multi\tconverged="));
    for f in ["values.tsv", "sources.tsv", "extractions.tsv", "extractors.tsv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
}

#[test]
fn single_layer_models_write_pair_sources() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "2");
    for model in ["single", "popaccu"] {
        let out = tmp.path().join(model);
        ok(&["fuse", s(&data.join("records.jsonl")), "--model", model, "--out-dir", s(&out)]);
        assert!(out.join("pair_sources.tsv").exists());
        assert!(!out.join("extractions.tsv").exists());
        let report = ok(&["eval", s(&out), "--truth", s(&data.join("truth.json"))]);
        assert!(report.contains("cov=1.000000"), "{report}");
    }
}

#[test]
fn multi_sm_splits_an_oversized_website() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("records.jsonl");
    let lines: String = (0..1000)
        .map(|i| {
            format!(
                "{{\"extractor\":\"E1\",\"website\":\"big.example\",\"spredicate\":\"p\",\"webpage\":\"page{i:04}\",\
                 \"subject\":\"s{i}\",\"predicate\":\"p\",\"object\":\"o{i}\",\"confidence\":1.0}}\n"
            )
        })
        .collect();
    fs::write(&input, lines).unwrap();
    let out = tmp.path().join("out");
    ok(&["fuse", s(&input), "--model", "multi-sm", "--min-size", "5", "--max-size", "500", "--out-dir", s(&out)]);
    let reattribution = fs::read_to_string(out.join("reattribution.tsv")).unwrap();
    let finals: BTreeSet<&str> = reattribution
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("source\t"))
        .map(|l| l.rsplit('\t').next().unwrap())
        .collect();
    assert_eq!(finals.len(), 2, "{finals:?}");
    let sources = fs::read_to_string(out.join("sources.tsv")).unwrap();
    assert_eq!(sources.lines().count(), 3, "{sources}");
}

fn source_cols(src: &Json) -> String {
    ["website", "predicate", "webpage", "bucket"]
        .iter()
        .map(|k| match &src[k] {
            Json::Null => String::new(),
            Json::String(s) => s.clone(),
            other => other.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\t")
}

/// Rewrites the probability column of a fuse output file from a truth lookup.
fn overwrite(path: &Path, key_cols: usize, truth: impl Fn(&str) -> f64) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let mut out = format!("{}\n", lines.next().unwrap());
    for l in lines {
        let cols: Vec<&str> = l.split('\t').collect();
        let key = cols[..key_cols].join("\t");
        let mut rest: Vec<String> = cols[key_cols..].iter().map(|c| c.to_string()).collect();
        rest[0] = format!("{:.6}", truth(&key));
        out.push_str(&format!("{key}\t{}\n", rest.join("\t")));
    }
    fs::write(path, out).unwrap();
}

#[test]
fn eval_of_truth_itself_scores_zero_loss() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    synth(&data, "3");
    ok(&["fuse", s(&data.join("records.jsonl")), "--out-dir", s(&out)]);

    let truth: Json = serde_json::from_str(&fs::read_to_string(data.join("truth.json")).unwrap()).unwrap();
    let values: BTreeSet<String> = truth["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| format!("{}\t{}\t{}", v["subject"].as_str().unwrap(), v["predicate"].as_str().unwrap(), v["value"].as_str().unwrap()))
        .collect();
    let provisions: BTreeSet<String> = truth["provisions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| {
            format!(
                "{}\t{}\t{}\t{}",
                source_cols(&p["source"]),
                p["subject"].as_str().unwrap(),
                p["predicate"].as_str().unwrap(),
                p["value"].as_str().unwrap()
            )
        })
        .collect();
    let accuracy: Vec<(String, f64)> = truth["sources"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| (source_cols(&x["source"]), x["accuracy"].as_f64().unwrap()))
        .collect();

    overwrite(&out.join("values.tsv"), 3, |k| values.contains(k) as u8 as f64);
    overwrite(&out.join("extractions.tsv"), 7, |k| provisions.contains(k) as u8 as f64);
    overwrite(&out.join("sources.tsv"), 4, |k| {
        accuracy.iter().find(|(s, _)| s == k).map(|(_, a)| *a).unwrap()
    });

    let report = ok(&["eval", s(&out), "--truth", s(&data.join("truth.json"))]);
    for line in ["sqv=0.000000", "sqc=0.000000", "wdev=0.000000", "auc_pr=1.000000", "cov=1.000000"] {
        assert!(report.lines().any(|l| l == line), "{line} missing from\n{report}");
    }
    let sqa: f64 = report.lines().find_map(|l| l.strip_prefix("sqa=")).unwrap().parse().unwrap();
    assert!(sqa < 1e-11, "{report}");
    assert!(out.join("report.txt").exists());
    assert!(out.join("calibration.csv").exists());
}

#[test]
fn bad_config_fails_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "4");
    let config = tmp.path().join("bad.conf");
    fs::write(&config, "gamma=1.5\n").unwrap();
    let out = tmp.path().join("out");
    let result = kbtrust(&["fuse", s(&data.join("records.jsonl")), "--config", s(&config), "--out-dir", s(&out)]);
    assert!(!result.status.success());
    assert!(!String::from_utf8_lossy(&result.stderr).is_empty());
    assert!(!out.exists() || fs::read_dir(&out).unwrap().next().is_none());

    let result = kbtrust(&["fuse", s(&data.join("records.jsonl")), "--set", "no_such_key=1", "--out-dir", s(&out)]);
    assert!(!result.status.success());
}

#[test]
fn malformed_records_are_skipped_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("records.jsonl");
    let good = "{\"extractor\":\"E1\",\"website\":\"a.com\",\"subject\":\"s\",\"predicate\":\"p\",\"object\":\"o\",\"confidence\":1.0}";
    fs::write(&input, format!("{good}\nnot json\n")).unwrap();
    let out = tmp.path().join("out");
    let result = kbtrust(&["fuse", s(&input), "--out-dir", s(&out)]);
    assert!(result.status.success());
    let err = String::from_utf8_lossy(&result.stderr);
    assert!(err.contains("records.jsonl:2"), "{err}");
    let values = fs::read_to_string(out.join("values.tsv")).unwrap();
    assert_eq!(values.lines().count(), 2, "{values}");
}
