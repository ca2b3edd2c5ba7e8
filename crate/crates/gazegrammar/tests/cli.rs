use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use gazegrammar::config::Config;
use gazegrammar::protocol::{ClientMessage, Envelope, IngestGaze, Inject, OpenSession, SampleMsg};
use gazegrammar::session::{Session, SessionLog};
use gazegrammar_core::pipeline::{Command as SessionCommand, EventBody};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gazegrammar"));
    c.env_remove("GAZE_GRAMMAR_CONFIG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn gaze_eval_writes_ten_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let o = run(&["gaze-eval", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&out.join("trials.csv"));
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.contains("error_euclid_m") && header.contains("target_z_m"));
    assert_eq!(lines.count(), 10);
    let summary: Value = serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    let mean = summary["overall"]["mean_m"].as_f64().unwrap();
    assert!(mean > 0.0 && mean < 0.2, "{mean}");
    assert_eq!(summary["overall"]["n"], 10);
    assert!(summary["anova_f"].is_null(), "one subject, no ANOVA");

    // same seed, byte-identical output
    let again = dir.path().join("b");
    assert_eq!(code(&run(&["gaze-eval", "--seed", "1", "--out", again.to_str().unwrap()])), 0);
    assert_eq!(read(&again.join("trials.csv")), csv);
    assert_eq!(read(&again.join("summary.json")), read(&out.join("summary.json")));
}

#[test]
fn gaze_eval_zero_noise_and_subjects() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["gaze-eval", "--noise", "zero", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let summary: Value = serde_json::from_str(&read(&dir.path().join("summary.json"))).unwrap();
    assert!(summary["overall"]["mean_m"].as_f64().unwrap() < 1e-9);

    let o = run(&["gaze-eval", "--subjects", "8", "--seed", "3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let summary: Value = serde_json::from_str(&read(&dir.path().join("summary.json"))).unwrap();
    assert_eq!(summary["subjects"].as_array().unwrap().len(), 8);
    assert_eq!(summary["anova_df"], serde_json::json!([7, 72]));
    assert!(summary["anova_f"].as_f64().unwrap() >= 0.0);
    let rho = summary["spearman_target_vs_error"]["z"].as_f64().unwrap();
    assert!((-1.0..=1.0).contains(&rho));
    assert_eq!(read(&dir.path().join("trials.csv")).lines().count(), 81);
}

#[test]
fn task_eval_ppp_ideal_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["task-eval", "--task", "ppp", "--repeats", "5", "--fast", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_str(&read(&dir.path().join("summary.json"))).unwrap();
    let per_action = summary["per_action"].as_array().unwrap();
    let names: Vec<&str> = per_action.iter().map(|a| a["action"].as_str().unwrap()).collect();
    assert_eq!(names, ["Reach1", "Grasp", "Reach2", "Pour", "Reach3", "Drop"]);
    assert!(per_action.iter().all(|a| a["success_pct"] == 100.0));
    assert_eq!(summary["full_success_pct"], 100.0);
    let csv = read(&dir.path().join("trials.csv"));
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.lines().next().unwrap().contains("pour_success"));
    let events = read(&dir.path().join("events.ndjson"));
    let first: Value = serde_json::from_str(events.lines().next().unwrap()).unwrap();
    assert_eq!(first["repeat"], 0);
    assert_eq!(first["kind"], "scene_snapshot");
    let repeats: std::collections::BTreeSet<u64> = events
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["repeat"].as_u64().unwrap())
        .collect();
    assert_eq!(repeats.len(), 5);
}

#[test]
fn task_eval_with_failures_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "task-eval".to_string(),
            "--task".into(),
            "pp".into(),
            "--p-grasp-fail".into(),
            "0.2".into(),
            "--seed".into(),
            "9".into(),
            "--repeats".into(),
            "20".into(),
            "--fast".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = bin().args(args(out)).output().unwrap();
        assert_eq!(code(&o), 0);
    }
    assert_eq!(read(&a.join("trials.csv")), read(&b.join("trials.csv")));
    assert_eq!(read(&a.join("summary.json")), read(&b.join("summary.json")));
    assert_eq!(read(&a.join("events.ndjson")), read(&b.join("events.ndjson")));
    let summary: Value = serde_json::from_str(&read(&a.join("summary.json"))).unwrap();
    let grasp = summary["per_action"][1]["success_pct"].as_f64().unwrap();
    assert!(grasp < 100.0 && grasp > 40.0, "{grasp}");
}

#[test]
fn usage_and_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&run(&["task-eval", "--task", "pnp", "--out", out])), 2);
    assert_eq!(code(&run(&["gaze-eval"])), 2, "missing --out");
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["gaze-eval", "--out", out, "--config", "/no/such/file.json"])), 2);

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"dwell": {"count": 15, "cuont": 3}}"#).unwrap();
    let o = run(&["gaze-eval", "--out", out, "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("dwell") && err.contains("cuont"), "{err}");

    std::fs::write(&cfg, r#"{"failures": {"p_grasp_fail": 1.5}}"#).unwrap();
    let o = run(&["task-eval", "--task", "pp", "--out", out, "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = run(&["task-eval", "--task", "pp", "--out", out, "--p-grasp-fail", "-1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_comes_from_environment_when_no_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"dwell": {"count": 7}}"#).unwrap();
    let o = bin().args(["print-config"]).env("GAZE_GRAMMAR_CONFIG", &cfg).output().unwrap();
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["dwell"]["count"], 7);
    // an explicit flag wins
    let o = bin()
        .args(["print-config", "--config", "/no/such.json"])
        .env("GAZE_GRAMMAR_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn printed_defaults_load_back() {
    let o = run(&["print-config"]);
    assert_eq!(code(&o), 0);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("defaults.json");
    std::fs::write(&p, &o.stdout).unwrap();
    assert_eq!(Config::load(&p).unwrap(), Config::default());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["dwell"]["count"], 15);
}

#[test]
fn every_subcommand_documents_its_flags() {
    let cases: &[(&str, &[&str])] = &[
        ("gaze-eval", &["--config", "--seed", "--out", "--noise", "--subjects"]),
        (
            "task-eval",
            &["--task", "--repeats", "--seed", "--config", "--out", "--p-grasp-fail", "--p-drop-during-pour", "--fast"],
        ),
        ("serve", &["--config", "--addr", "--fast", "--record-dir"]),
        ("replay", &["--session-log"]),
        ("print-config", &["--config"]),
    ];
    for (cmd, flags) in cases {
        let o = run(&[cmd, "--help"]);
        assert_eq!(code(&o), 0);
        let help = String::from_utf8_lossy(&o.stdout);
        for f in *flags {
            assert!(help.contains(f), "{cmd} --help lacks {f}");
        }
    }
}

#[test]
fn serve_on_a_busy_port_exits_1() {
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let o = run(&["serve", "--fast", "--addr", &addr]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot listen"));
}

#[test]
fn serve_answers_health_checks() {
    let mut child = bin()
        .args(["serve", "--fast", "--addr", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("address line").to_string();
    let mut s = TcpStream::connect(&addr).unwrap();
    s.write_all(b"GET /health HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    child.kill().unwrap();
    let _ = child.wait();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.ends_with("ok"));
}

/// Drive a session directly and record its log.
fn record_log(path: &Path) {
    let log = SessionLog::create(path).unwrap();
    let opened = Session::open("s1", Some(0), &OpenSession::default(), &Config::default(), Some(0.0), Some(log)).unwrap();
    let mut s = opened.session;
    let snap = match &opened.outputs[1].envelope().body {
        gazegrammar::protocol::ServerMessage::Event(ev) => match &ev.body {
            EventBody::SceneSnapshot(s) => s.clone(),
            _ => unreachable!(),
        },
        _ => unreachable!(),
    };
    let cup = snap.bboxes.iter().find(|b| b.object_id.0 == "cup").unwrap();
    let r = cup.trigger_region.unwrap();
    let (px, py) = ((r.left + r.right) / 2.0, (r.bottom + r.top) / 2.0);
    s.handle(
        &Envelope::new(ClientMessage::Inject(Inject {
            session_id: "s1".into(),
            command: SessionCommand::SetFailureProfile {
                p_grasp_fail: 0.5,
                p_drop_during_pour: 0.0,
                seed: 5,
            },
        }))
        .with_seq(Some(1)),
    );
    for k in 0..30 {
        s.handle(
            &Envelope::new(ClientMessage::IngestGaze(IngestGaze {
                session_id: "s1".into(),
                sample: SampleMsg {
                    t: 0.1 * (k + 1) as f64,
                    px,
                    py,
                    depth_m: cup.depth_m,
                    head_pose: None,
                },
            }))
            .with_seq(Some(k + 2)),
        );
    }
}

#[test]
fn replay_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("s1.ndjson");
    record_log(&log);
    let o = run(&["replay", "--session-log", log.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("identical"));

    let text = read(&log);
    let tampered = dir.path().join("t.ndjson");
    let bad = text.replacen("\"intent\":true", "\"intent\":false", 1);
    assert_ne!(bad, text);
    std::fs::write(&tampered, bad).unwrap();
    let o = run(&["replay", "--session-log", tampered.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("diverged at output") && err.contains("recorded:") && err.contains("replayed:"), "{err}");

    let o = run(&["replay", "--session-log", dir.path().join("missing.ndjson").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}
