// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nct_efa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nct-efa")).args(args).current_dir(dir).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = nct_efa(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join(name)).unwrap()).unwrap()
}

fn block_shape(file: &Value, id: &str) -> (usize, usize) {
    let rows = file["graphs"][id]["features"].as_array().unwrap();
    (rows.len(), rows[0].as_array().unwrap().len())
}

const TWO_GRAPHS: &str = r#"{"a": [[0, 1], [1, 2]], "b": [[0, 1], [0, 2], [0, 3], [0, 4], [0, 5]]}"#;

#[test]
fn featurize_shapes_per_encoding() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("g.json"), TWO_GRAPHS).unwrap();

    ok(d, &["featurize", "--graphs", "g.json", "--encoding", "nct-efa-raw", "--out", "f.json"]);
    let f = json(d, "f.json");
    assert_eq!(block_shape(&f, "a"), (3, 4));
    assert_eq!(block_shape(&f, "b"), (6, 4));
    assert!(f["graphs"]["a"]["lambda_max"].is_number());
    assert!(f["graphs"]["b"]["lyapunov_residual"].as_f64().unwrap() <= 1e-8);
    assert!(f["manifest"]["inputs"]["graphs"].as_str().unwrap().starts_with("sha256:"));

    ok(d, &["featurize", "--graphs", "g.json", "--encoding", "avgctrl-hist-onehot", "--bins", "8", "--out", "h.json"]);
    assert_eq!(block_shape(&json(d, "h.json"), "b"), (6, 8));

    ok(d, &["featurize", "--graphs", "g.json", "--encoding", "degree-onehot", "--out", "d.json"]);
    let deg = json(d, "d.json");
    assert_eq!(block_shape(&deg, "a"), (3, 6));
    assert_eq!(deg["encoding"]["degree_cap"], 5);
}

#[test]
fn train_learns_separable_set_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--graphs", "g.json", "--targets", "t.csv", "--count", "40", "--seed", "2"]);
    ok(d, &["featurize", "--graphs", "g.json", "--out", "f.json"]);
    let train = |out: &str| {
        ok(d, &[
            "train", "--graphs", "g.json", "--targets", "t.csv", "--features", "f.json", "--out", out, "--model", "gcn",
            "--seed", "7", "--folds", "4", "--epochs", "30",
        ])
    };
    let stdout = train("r1.json");
    assert!(String::from_utf8_lossy(&stdout.stdout).contains("mean AUC"));
    train("r2.json");
    assert_eq!(std::fs::read(d.join("r1.json")).unwrap(), std::fs::read(d.join("r2.json")).unwrap());
    let report = json(d, "r1.json");
    assert!(report["report"]["mean_auc"].as_f64().unwrap() >= 0.99, "{}", report["report"]["mean_auc"]);
    assert_eq!(report["report"]["folds"].as_array().unwrap().len(), 4);
    assert!(!report["manifest"]["deviations"].as_array().unwrap().is_empty());
}

#[test]
fn train_reports_missing_features_by_id() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--graphs", "g.json", "--targets", "t.csv", "--count", "20"]);
    ok(d, &["featurize", "--graphs", "g.json", "--out", "f.json"]);
    let mut f = json(d, "f.json");
    f["graphs"].as_object_mut().unwrap().remove("13");
    std::fs::write(d.join("f.json"), serde_json::to_string(&f).unwrap()).unwrap();
    let out = nct_efa(d, &["train", "--graphs", "g.json", "--targets", "t.csv", "--features", "f.json", "--out", "r.json", "--folds", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("graph 13"));
}

#[test]
fn synth_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--graphs", "a.json", "--targets", "a.csv", "--seed", "5"]);
    ok(d, &["synth", "--graphs", "b.json", "--targets", "b.csv", "--seed", "5"]);
    assert_eq!(std::fs::read(d.join("a.json")).unwrap(), std::fs::read(d.join("b.json")).unwrap());
    assert_eq!(std::fs::read(d.join("a.csv")).unwrap(), std::fs::read(d.join("b.csv")).unwrap());
    let graphs = json(d, "a.json");
    assert_eq!(graphs.as_object().unwrap().len(), 200);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(nct_efa(d, &["featurize", "--nope"]).status.code(), Some(1));
    assert_eq!(nct_efa(d, &["featurize", "--graphs", "g.json", "--out", "f.json", "--encoding", "fancy"]).status.code(), Some(1));

    std::fs::write(d.join("loop.json"), r#"{"x": [[0, 0]]}"#).unwrap();
    let out = nct_efa(d, &["featurize", "--graphs", "loop.json", "--out", "f.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("self-loop"));
    assert_eq!(nct_efa(d, &["featurize", "--graphs", "missing.json", "--out", "f.json"]).status.code(), Some(2));

    std::fs::write(d.join("g.json"), TWO_GRAPHS).unwrap();
    assert_eq!(
        nct_efa(d, &["featurize", "--graphs", "g.json", "--out", "f.json", "--encoding", "degree-onehot", "--degree-cap", "2"]).status.code(),
        Some(2)
    );
}

#[test]
fn oracle_passes_and_catches_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ok(d, &["oracle", "--max-nodes", "5", "--out", "o.json"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
    assert_eq!(json(d, "o.json")["passed"], true);

    let out = nct_efa(d, &["oracle", "--max-nodes", "5", "--inject-fault", "betweenness-sign"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL betweenness-vs-path-counting"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("betweenness"));
}
