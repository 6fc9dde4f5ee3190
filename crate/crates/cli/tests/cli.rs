use std::path::Path;
use std::process::Command;

use graphpack::experiment::{run_experiment, ExperimentOptions};
use graphpack::output::{read_traces, summary_header, write_summary};
use graphpack::scenario::EngineKind;
use graphpack::{emit_scenario, load_scenario, load_scenario_str, simulate, CliError, Globals, Scenario};
use graphpack_core::{summarize_trace, PolicyKind, WeightMode};

const MINIMAL: &str = r#"{
  "cluster": { "uniform": { "machines": 1, "slots": 2 } },
  "job_types": [ { "nodes": 1, "arrival_rate": 1.0 } ]
}"#;

fn load(text: &str) -> graphpack::Result<Scenario> {
    load_scenario_str(text, Path::new("test.json"))
}

fn issues(text: &str) -> Vec<graphpack::Issue> {
    match load(text) {
        Err(CliError::Validation { issues, .. }) => issues,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_graphpack"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn minimal_file_fills_defaults() {
    let s = load(MINIMAL).unwrap();
    assert_eq!(s.policy.kind, PolicyKind::Dgp);
    assert_eq!(s.policy.weights, WeightMode::Live);
    assert_eq!(s.engine, EngineKind::Continuous);
    assert_eq!((s.policy.beta, s.policy.epsilon, s.policy.b), (1.0, 0.1, 0.5));
    assert_eq!(s.policy.h, std::f64::consts::E);
    assert_eq!(s.warmup, 0.1);
    assert_eq!(s.seeds, vec![0]);
    assert_eq!(s.instance.jobs[0].service_rate, 1.0);
    let points = s.points();
    assert_eq!(points.len(), 1);
    // α follows β² unless given
    assert_eq!(points[0].alpha, 1.0);
}

#[test]
fn edge_outside_the_graph_is_reported_on_its_line() {
    let text = r#"{
  "cluster": { "uniform": { "machines": 2, "slots": 2 } },
  "job_types": [
    { "nodes": 2,
      "edges": [
        [0, 2]
      ],
      "arrival_rate": 1.0 }
  ]
}"#;
    let found = issues(text);
    assert_eq!(found.len(), 1);
    assert_eq!(found[0].path, "job_types[0].edges[0]");
    assert_eq!(found[0].line, Some(6));
    assert!(found[0].message.contains("outside 0..2"));
}

#[test]
fn too_many_nodes_cites_the_size_constraint() {
    let text = r#"{"cluster":{"uniform":{"machines":1,"slots":2}},"job_types":[{"nodes":2,"arrival_rate":1}]}"#;
    let found = issues(text);
    assert_eq!(found.len(), 1);
    assert!(found[0].message.contains("|V_j| < M"), "{}", found[0]);
}

#[test]
fn every_violation_is_listed() {
    let text = r#"{
  "cluster": { "machines": [ { "slots": 0 }, { "id": 0, "slots": 1 } ] },
  "job_types": [ { "nodes": 1, "arrival_rate": -1, "service_rate": 0 } ],
  "policy": { "kind": "frame-based", "beta": -1, "b": 1.5 },
  "seeds": [],
  "warmup": 1.0
}"#;
    let paths: Vec<String> = issues(text).into_iter().map(|i| i.path).collect();
    for want in [
        "cluster.machines[0].slots",
        "cluster.machines[1].id",
        "job_types[0].arrival_rate",
        "job_types[0].service_rate",
        "policy",
        "policy.beta",
        "policy.b",
        "seeds",
        "warmup",
    ] {
        assert!(paths.iter().any(|p| p == want), "missing {want} in {paths:?}");
    }
}

#[test]
fn variant_specific_parameters_are_required() {
    let adgp = r#"{"cluster":{"uniform":{"machines":1,"slots":2}},"job_types":[{"nodes":1,"arrival_rate":1}],
        "policy":{"kind":"adgp"}}"#;
    assert!(issues(adgp).iter().any(|i| i.message.contains("clock_rate")));
    let jump = r#"{"cluster":{"uniform":{"machines":1,"slots":2}},"job_types":[{"nodes":1,"arrival_rate":1}],
        "policy":{"kind":"frame-based","frame_length":2},"engine":"jump-chain"}"#;
    assert!(issues(jump).iter().any(|i| i.path == "engine"));
    let reference = r#"{"cluster":{"uniform":{"machines":1,"slots":2}},"job_types":[{"nodes":1,"arrival_rate":1}],
        "reference":true}"#;
    assert!(issues(reference).iter().any(|i| i.path == "reference"));
    let table = r#"{"cluster":{"uniform":{"machines":1,"slots":2}},"job_types":[{"nodes":1,"arrival_rate":1}],
        "policy":{"weights":{"table":[{"job_type":0,"slots":[0],"weight":1}]}}}"#;
    assert!(issues(table).iter().any(|i| i.path == "policy.weights" && i.message.contains("misses")));
}

#[test]
fn tradeoff_preset_overflow_is_a_validation_error() {
    let text = r#"{"cluster":{"uniform":{"machines":1,"slots":2}},"job_types":[{"nodes":1,"arrival_rate":1}],
        "sweep":{"beta":[1, 0.001],"preset":"tradeoff"}}"#;
    let found = issues(text);
    assert_eq!(found.len(), 1);
    assert!(found[0].message.contains("beta = 0.001"));
}

#[test]
fn parse_errors_carry_position() {
    match load("{\n  \"cluster\": {\"uniform\": {\"machines\": 1, \"slots\": 2}},\n  \"job_types\": [],\n  \"extra\": 1\n}") {
        Err(CliError::Parse { line, message, .. }) => {
            assert_eq!(line, 4);
            assert!(message.contains("extra"));
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(load("{ \"cluster\": "), Err(CliError::Parse { line: 1, .. })));
}

#[test]
fn scenarios_round_trip_through_emit() {
    let texts = [
        MINIMAL.to_string(),
        r#"{"id":"rt","cluster":{"machines":[{"id":4,"slots":2},{"id":9,"slots":1}]},
            "job_types":[{"id":3,"nodes":2,"edges":[{"u":0,"v":1,"weight":0.3}],"arrival_rate":0.1,"service_rate":2.5},
                         {"nodes":1,"arrival_rate":0.7}],
            "policy":{"kind":"adgp","beta":0.37,"clock_rate":1.3,"weights":{"per_job":[0.1,-0.2]}},
            "horizon":12.5,"seeds":[3,1,2],"sweep":{"beta":[0.3,0.1],"alpha":[0.01]},
            "output":{"summary":"out/s.csv"},"reference":true,"max_states":77}"#
            .to_string(),
        r#"{"cluster":{"uniform":{"machines":2,"slots":1}},"job_types":[{"nodes":1,"arrival_rate":1}],
            "policy":{"weights":{"table":[{"job_type":0,"slots":[0],"weight":0.1},{"job_type":0,"slots":[1],"weight":0.2}]}},
            "engine":"jump-chain","steps":500,"sweep":{"beta":[1,0.5],"preset":"tradeoff","frame_length":[2]}}"#
            .to_string(),
    ];
    for t in texts {
        let s = load(&t).unwrap();
        let emitted = emit_scenario(&s);
        let back = load(&emitted).unwrap();
        assert_eq!(back, s);
        assert_eq!(emit_scenario(&back), emitted);
    }
}

#[test]
fn one_point_three_seeds_gives_three_runs_and_one_aggregate() {
    let mut s = load(MINIMAL).unwrap();
    s.seeds = vec![1, 2, 3];
    s.horizon = 50.0;
    let r = run_experiment(&s, &ExperimentOptions::default()).unwrap();
    assert_eq!(r.runs.len(), 3);
    assert_eq!(r.aggregates.len(), 1);
    assert_eq!(r.aggregates[0].runs, 3);
    assert!(r.aggregates[0].cost.half_width.is_some());
    assert_eq!(r.runs.iter().map(|x| x.seed).collect::<Vec<_>>(), [1, 2, 3]);
}

#[test]
fn csv_header_is_frozen() {
    let s = load(r#"{"cluster":{"uniform":{"machines":2,"slots":2}},
        "job_types":[{"id":5,"nodes":1,"arrival_rate":1},{"id":2,"nodes":1,"arrival_rate":1}]}"#)
    .unwrap();
    assert_eq!(
        summary_header(&s.instance).join(","),
        "scenario_id,policy,engine,beta,alpha,epsilon,h,T,seed,avg_queue_5,avg_queue_2,avg_cost,interruptions,drops,tv_to_reference"
    );
    let mut buf = Vec::new();
    write_summary(&mut buf, &s.instance, &[]).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "scenario_id,policy,engine,beta,alpha,epsilon,h,T,seed,avg_queue_5,avg_queue_2,avg_cost,interruptions,drops,tv_to_reference\n"
    );
}

#[test]
fn identical_records_give_identical_rows() {
    let mut s = load(MINIMAL).unwrap();
    s.horizon = 20.0;
    let r = run_experiment(&s, &ExperimentOptions::default()).unwrap();
    let mut buf = Vec::new();
    write_summary(&mut buf, &s.instance, &[r.runs[0].clone(), r.runs[0].clone()]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1], lines[2]);
    // no reference requested: the column exists but is empty
    assert!(lines[1].ends_with(','));
}

#[test]
fn reference_column_is_filled_when_exact_analysis_runs() {
    let s = load(r#"{"cluster":{"uniform":{"machines":1,"slots":2}},"job_types":[{"nodes":1,"arrival_rate":1}],
        "policy":{"kind":"loss"},"engine":"loss","horizon":2000,"reference":true}"#)
    .unwrap();
    let r = run_experiment(&s, &ExperimentOptions::default()).unwrap();
    let tv = r.runs[0].tv_to_reference.unwrap();
    assert!(tv > 0.0 && tv < 0.05, "{tv}");
}

#[test]
fn reruns_write_byte_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(
        dir.path(),
        "s.json",
        r#"{"cluster":{"uniform":{"machines":2,"slots":2}},"job_types":[{"nodes":2,"edges":[[0,1]],"arrival_rate":1}],
            "horizon":200,"seeds":[4,5,6],"sweep":{"beta":[1,0.5]}}"#,
    );
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = bin().arg("sweep").arg(&file).arg("--out").arg(&out).status().unwrap();
        assert!(status.success());
        outputs.push((
            std::fs::read(out.join("summary.csv")).unwrap(),
            std::fs::read(out.join("aggregate.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(String::from_utf8_lossy(&outputs[0].0).lines().count(), 7);
    assert_eq!(String::from_utf8_lossy(&outputs[0].1).lines().count(), 3);
}

#[test]
fn no_trace_requested_means_no_trace_file() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("summary.csv");
    let mut s = load(MINIMAL).unwrap();
    s.horizon = 10.0;
    s.output.summary = Some(summary.clone());
    simulate(&s, false, &mut std::io::sink()).unwrap();
    assert!(summary.exists());
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, ["summary.csv"]);
}

#[test]
fn traces_round_trip_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    for kind in ["dgp", "frame-based", "round-robin"] {
        let text = format!(
            r#"{{"cluster":{{"uniform":{{"machines":2,"slots":2}}}},
               "job_types":[{{"nodes":2,"edges":[[0,1]],"arrival_rate":0.9}},{{"nodes":1,"arrival_rate":0.4,"service_rate":0.7}}],
               "policy":{{"kind":"{kind}","beta":0.5,"frame_length":1.5}},"horizon":150,"seeds":[1,2]}}"#
        );
        let mut s = load(&text).unwrap();
        Globals { trace: Some(trace.clone()), ..Default::default() }.apply(&mut s);
        let result = simulate(&s, false, &mut std::io::sink()).unwrap();
        let back = read_traces(&trace).unwrap();
        assert_eq!(back.len(), 2);
        for ((run, header, t), record) in back.iter().zip(&result.runs) {
            assert_eq!(header.seed, record.seed);
            assert_eq!(&result.traces[*run].1, t);
            assert_eq!(summarize_trace(t).unwrap(), record.report);
        }
    }
}

#[test]
fn failures_flush_completed_runs() {
    let dir = tempfile::tempdir().unwrap();
    // the ADGP clock rate exp(w/β) overflows at the second β
    let file = write(
        dir.path(),
        "s.json",
        r#"{"cluster":{"uniform":{"machines":1,"slots":2}},"job_types":[{"nodes":1,"arrival_rate":1}],
            "policy":{"kind":"adgp","clock_rate":1,"weights":{"per_job":[1.0]}},
            "horizon":50,"seeds":[1,2],"sweep":{"beta":[1,0.001]}}"#,
    );
    let out = dir.path().join("out");
    let status = bin().arg("sweep").arg(&file).arg("--out").arg(&out).output().unwrap().status;
    assert_eq!(status.code(), Some(4));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    let aggregate = std::fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert_eq!(aggregate.lines().count(), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let invalid = write(dir.path(), "bad.json", r#"{"cluster":{"uniform":{"machines":1,"slots":1}},"job_types":[{"nodes":1,"arrival_rate":1}]}"#);
    assert_eq!(bin().arg("simulate").arg(&invalid).output().unwrap().status.code(), Some(2));
    let garbled = write(dir.path(), "garbled.json", "{");
    assert_eq!(bin().arg("simulate").arg(&garbled).output().unwrap().status.code(), Some(2));
    let ok = write(dir.path(), "ok.json", MINIMAL);
    let big = bin().args(["--max-states", "2", "exact"]).arg(&ok).output().unwrap();
    assert_eq!(big.status.code(), Some(3));
    let overloaded = write(dir.path(), "over.json", r#"{"cluster":{"uniform":{"machines":1,"slots":2}},"job_types":[{"nodes":1,"arrival_rate":3}]}"#);
    assert_eq!(bin().arg("bounds").arg(&overloaded).output().unwrap().status.code(), Some(3));
    let out = bin().args(["--seed", "9", "simulate"]).arg(&ok).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().contains(",9,"));
}

#[test]
fn reports_are_json() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(
        dir.path(),
        "p3.json",
        r#"{"cluster":{"uniform":{"machines":2,"slots":2}},"job_types":[{"nodes":3,"edges":[[0,1],[1,2]],"arrival_rate":1}],
            "policy":{"weights":{"per_job":[0.5]}}}"#,
    );
    let s = load_scenario(&file).unwrap();
    let g = Globals::default();
    let exact = graphpack::exact(&s, &g, &mut std::io::sink()).unwrap();
    assert!(exact["points"][0]["solver_tv"].as_f64().unwrap() < 1e-10);
    let opt = graphpack::static_opt(&s, &g, &mut std::io::sink()).unwrap();
    assert!((opt["static_optimum"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let out = dir.path().join("reports");
    let status = bin().arg("static-opt").arg(&file).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("static-opt.json")).unwrap()).unwrap();
    assert_eq!(v, opt);
}

#[test]
fn cost_falls_with_beta_on_the_pair_instance() {
    let s = load(r#"{"cluster":{"uniform":{"machines":2,"slots":2}},
        "job_types":[{"nodes":2,"edges":[[0,1]],"arrival_rate":1.6}],
        "horizon":3000,"seeds":[1,2,3],"sweep":{"beta":[1,0.5,0.25]}}"#)
    .unwrap();
    let r = run_experiment(&s, &ExperimentOptions::default()).unwrap();
    assert_eq!(r.aggregates.len(), 3);
    for w in r.aggregates.windows(2) {
        assert!(w[1].cost.lower() <= w[0].cost.upper(), "{:?} then {:?}", w[0].cost, w[1].cost);
        assert!(w[1].cost.mean <= w[0].cost.mean);
    }
}
