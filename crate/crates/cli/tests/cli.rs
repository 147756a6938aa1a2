//! End-to-end tests of the installed binary: generate -> solve ->
//! validate round trips, exit codes, and render output.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dqc-sched"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_code(out: &Output, want: i32) {
    assert_eq!(
        out.status.code(),
        Some(want),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

struct Workdir(PathBuf);

impl Workdir {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("dqc-sched-cli-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        Workdir(dir)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    fn write(&self, name: &str, content: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, content).unwrap();
        p
    }
}

impl Drop for Workdir {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

const TINY_CONFIG: &str = r#"{
  "request_counts": [2],
  "n0": 50,
  "monte_carlo_runs": 2,
  "master_seed": 7,
  "sa": { "tau0": 4.0, "tau_min": 0.4, "cooling": 0.8, "iters_per_temp": 20 }
}"#;

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_solve_validate_round_trip() {
    let dir = Workdir::new("roundtrip");
    let cfg = dir.write("cfg.json", TINY_CONFIG);
    let inst = dir.path("inst.json");
    assert_code(
        &run(&["generate", "--config", s(&cfg), "--out", s(&inst)]),
        0,
    );

    for (variant, seed) in [
        ("proposed", "1"),
        ("shot-agnostic", "2"),
        ("greedy", "3"),
        ("list", "4"),
        ("random", "5"),
    ] {
        let sched = dir.path(&format!("{variant}.json"));
        assert_code(
            &run(&[
                "solve",
                "--instance",
                s(&inst),
                "--variant",
                variant,
                "--seed",
                seed,
                "--config",
                s(&cfg),
                "--out",
                s(&sched),
            ]),
            0,
        );
        assert_code(
            &run(&["validate", "--instance", s(&inst), "--schedule", s(&sched)]),
            0,
        );
    }
}

#[test]
fn recut_variants_validate_against_emitted_instance() {
    let dir = Workdir::new("recut");
    let cfg = dir.write("cfg.json", TINY_CONFIG);
    let inst = dir.path("inst.json");
    assert_code(
        &run(&["generate", "--config", s(&cfg), "--out", s(&inst)]),
        0,
    );
    let sched = dir.path("dep.json");
    let regen = dir.path("dep-instance.json");
    assert_code(
        &run(&[
            "solve",
            "--instance",
            s(&inst),
            "--variant",
            "dependency-agnostic",
            "--seed",
            "9",
            "--config",
            s(&cfg),
            "--out",
            s(&sched),
            "--emit-instance",
            s(&regen),
        ]),
        0,
    );
    assert_code(
        &run(&["validate", "--instance", s(&regen), "--schedule", s(&sched)]),
        0,
    );
}

#[test]
fn solve_is_byte_deterministic() {
    let dir = Workdir::new("determinism");
    let cfg = dir.write("cfg.json", TINY_CONFIG);
    let inst = dir.path("inst.json");
    assert_code(
        &run(&["generate", "--config", s(&cfg), "--out", s(&inst)]),
        0,
    );
    let a = dir.path("a.json");
    let b = dir.path("b.json");
    for out in [&a, &b] {
        assert_code(
            &run(&[
                "solve", "--instance", s(&inst), "--variant", "proposed", "--seed", "7",
                "--config", s(&cfg), "--out", s(out),
            ]),
            0,
        );
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn validate_rejects_corrupted_schedule_with_exit_3() {
    let dir = Workdir::new("corrupt");
    let cfg = dir.write("cfg.json", TINY_CONFIG);
    let inst = dir.path("inst.json");
    run(&["generate", "--config", s(&cfg), "--out", s(&inst)]);
    let sched = dir.path("sched.json");
    run(&[
        "solve", "--instance", s(&inst), "--variant", "greedy", "--seed", "1", "--config",
        s(&cfg), "--out", s(&sched),
    ]);

    // Inject an overlap: move every fragment to start 0 on QPU 0.
    let text = fs::read_to_string(&sched).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let frags = doc["fragments"].as_array_mut().unwrap();
    assert!(frags.len() >= 2, "need at least two fragments to overlap");
    for f in frags.iter_mut() {
        f["start"] = 0.into();
        f["qpu"] = 0.into();
    }
    doc.as_object_mut().unwrap().remove("report");
    let corrupted = dir.write("bad.json", &serde_json::to_string_pretty(&doc).unwrap());

    let out = run(&["validate", "--instance", s(&inst), "--schedule", s(&corrupted)]);
    assert_code(&out, 3);
    let body = String::from_utf8_lossy(&out.stdout);
    assert!(body.contains("QpuOverlap"), "got {body}");
}

#[test]
fn malformed_input_exits_2() {
    let dir = Workdir::new("malformed");
    let bad = dir.write("bad.json", "{ not json");
    let out = run(&["solve", "--instance", s(&bad), "--variant", "greedy", "--seed", "1"]);
    assert_code(&out, 2);

    let cfg = dir.write("cfg.json", TINY_CONFIG);
    let inst = dir.path("inst.json");
    run(&["generate", "--config", s(&cfg), "--out", s(&inst)]);
    let out = run(&["solve", "--instance", s(&inst), "--variant", "nonsense", "--seed", "1"]);
    assert_code(&out, 2);
}

#[test]
fn exhaustive_guard_exits_4() {
    let dir = Workdir::new("guard");
    // Default n0 = 10000 with six circuits is far past the oracle guard.
    let cfg = dir.write(
        "cfg.json",
        r#"{ "request_counts": [6], "master_seed": 3 }"#,
    );
    let inst = dir.path("inst.json");
    assert_code(
        &run(&["generate", "--config", s(&cfg), "--out", s(&inst)]),
        0,
    );
    let out = run(&[
        "solve", "--instance", s(&inst), "--variant", "exhaustive", "--seed", "1",
    ]);
    assert_code(&out, 4);
}

#[test]
fn render_svg_structure_and_determinism() {
    let dir = Workdir::new("render");
    let cfg = dir.write("cfg.json", TINY_CONFIG);
    let inst = dir.path("inst.json");
    run(&["generate", "--config", s(&cfg), "--out", s(&inst)]);
    let sched = dir.path("sched.json");
    run(&[
        "solve", "--instance", s(&inst), "--variant", "proposed", "--seed", "7", "--config",
        s(&cfg), "--out", s(&sched),
    ]);

    let svg_a = dir.path("a.svg");
    let svg_b = dir.path("b.svg");
    for out in [&svg_a, &svg_b] {
        assert_code(
            &run(&["render", "--instance", s(&inst), "--schedule", s(&sched), "--out", s(out)]),
            0,
        );
    }
    assert_eq!(fs::read(&svg_a).unwrap(), fs::read(&svg_b).unwrap());

    let svg = fs::read_to_string(&svg_a).unwrap();
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&sched).unwrap()).unwrap();
    let frag_count = doc["fragments"].as_array().unwrap().len();
    // every fragment appears exactly once: one labeled rect each
    assert_eq!(svg.matches("<title>s").count(), frag_count);
    assert!(svg.contains("QPU 0"));

    // empty schedule renders lanes only
    let empty = dir.write(
        "empty.json",
        r#"{ "format_version": 1, "served": [false, false], "fragments": [], "alpha": [1, 3] }"#,
    );
    let out = run(&["render", "--instance", s(&inst), "--schedule", s(&empty)]);
    assert_code(&out, 0);
    let body = String::from_utf8_lossy(&out.stdout);
    assert!(!body.contains("<title>s"));

    // csv format lists fragments
    let out = run(&[
        "render", "--instance", s(&inst), "--schedule", s(&sched), "--format", "csv",
    ]);
    assert_code(&out, 0);
    let body = String::from_utf8_lossy(&out.stdout);
    assert_eq!(body.lines().count(), frag_count + 1);
}

#[test]
fn split_fragments_share_a_label_across_lanes() {
    let dir = Workdir::new("split");
    // One circuit, one subcircuit, two QPUs, deadline forcing a split.
    let inst = dir.write(
        "inst.json",
        r#"{
  "format_version": 1,
  "qpus": [
    { "id": 0, "qubit_capacity": 10, "max_depth": 10 },
    { "id": 1, "qubit_capacity": 10, "max_depth": 10 }
  ],
  "circuits": [
    {
      "id": 0,
      "cut": { "kind": "gate_cut", "subcircuit_count": 1, "overhead": 1, "precedence_edge_count": 0 },
      "subcircuits": [
        { "circuit": 0, "sub": 0, "qubits": 5, "depth": 5, "single_qubit_layers": 2, "two_qubit_layers": 3, "shots": 10 }
      ],
      "precedence_edges": [],
      "deadline": 200,
      "base_shots": 10,
      "deadline_coeff": 3
    }
  ],
  "gate_times": [1, 10],
  "seed": 7
}"#,
    );
    let sched = dir.path("sched.json");
    assert_code(
        &run(&[
            "solve", "--instance", s(&inst), "--variant", "proposed", "--seed", "7", "--out",
            s(&sched),
        ]),
        0,
    );
    let out = run(&["render", "--instance", s(&inst), "--schedule", s(&sched)]);
    assert_code(&out, 0);
    let svg = String::from_utf8_lossy(&out.stdout);
    // the 10 shots must be split 5/5 across both lanes, same label twice
    assert_eq!(svg.matches(">s0,0</text>").count(), 2, "{svg}");
}

#[test]
fn sweep_writes_csvs() {
    let dir = Workdir::new("sweep");
    let cfg = dir.write("cfg.json", TINY_CONFIG);
    let out_dir = dir.path("out");
    assert_code(
        &run(&[
            "sweep", "--config", s(&cfg), "--out", s(&out_dir), "--variants", "greedy,list",
            "--workers", "1",
        ]),
        0,
    );
    let raw = fs::read_to_string(out_dir.join("raw.csv")).unwrap();
    let agg = fs::read_to_string(out_dir.join("agg.csv")).unwrap();
    assert_eq!(raw.lines().count(), 1 + 2 * 2); // header + runs x variants
    assert_eq!(agg.lines().count(), 1 + 2); // header + one cell per variant
    assert!(raw.starts_with(
        "variant,requests,d_c,run,seed,instance_hash,served,served_fraction,makespan,objective,wall_ms,error"
    ));
}
