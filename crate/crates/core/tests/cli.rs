mod common;

use std::path::Path;
use std::process::{Command, Output};

use lesr::lipschitz::Trajectory;
use lesr::trajectory::traces_from_csv;

const TINY: &str = "\
small_steps = 600
final_steps = 600
start_steps = 200
batch_size = 32
hidden = [16, 16]
eval_episodes = 2
eval_every = 300
candidates = 2
iterations = 1
";

const DISTANCE: &str = "\
repr:
out: sqrt((s[0] - s[2])^2 + (s[1] - s[3])^2)
reward:
out: -s[4]
";

fn lesr(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lesr"))
        .args(args)
        .current_dir(dir)
        .env_remove("LESR_API_KEY")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    std::fs::write(dir.path().join("distance.dsl"), DISTANCE).unwrap();
    dir
}

#[test]
fn usage_errors_exit_2() {
    let dir = setup();
    assert_eq!(lesr(&[], dir.path()).status.code(), Some(2));
    assert_eq!(lesr(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(lesr(&["run"], dir.path()).status.code(), Some(2));

    std::fs::write(dir.path().join("bad.toml"), "candidatez = 3\n").unwrap();
    let o = lesr(&["run", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("candidatez"), "{}", stderr(&o));

    std::fs::write(dir.path().join("neg.toml"), "intrinsic_weight = -1.0\n").unwrap();
    let o = lesr(&["run", "--config", "neg.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("intrinsic_weight"));
}

#[test]
fn remote_mode_without_key_is_actionable() {
    let dir = setup();
    std::fs::write(dir.path().join("remote.toml"), "generator = \"remote\"\n").unwrap();
    let o = lesr(&["run", "--config", "remote.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(
        msg.contains("LESR_API_KEY") && msg.contains("mock"),
        "{msg}"
    );
}

#[test]
fn malformed_program_reports_position() {
    let dir = setup();
    std::fs::write(
        dir.path().join("bad.dsl"),
        "repr:\nout: (s[0] +\nreward:\nout: -s[4]\n",
    )
    .unwrap();
    let o = lesr(
        &["train", "--program", "bad.dsl", "--config", "tiny.toml"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("column"), "{}", stderr(&o));
}

#[test]
fn train_then_eval_then_analyze() {
    let dir = setup();
    let o = lesr(
        &[
            "train",
            "--program",
            "distance.dsl",
            "--config",
            "tiny.toml",
            "--out",
            "t",
            "--seed",
            "4",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("t");
    for f in [
        "train_curve.csv",
        "trajectories.csv",
        "policy.bin",
        "program.dsl",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let curve = std::fs::read_to_string(out.join("train_curve.csv")).unwrap();
    assert!(curve.starts_with("step,score,mean_return,success_rate,wall_time_s\n"));
    assert_eq!(curve.lines().count(), 3);

    let o = lesr(
        &[
            "eval",
            "--policy",
            "t/policy.bin",
            "--program",
            "distance.dsl",
            "--episodes",
            "2",
            "--out",
            "e",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("score"));

    // the policy expects five inputs
    let o = lesr(&["eval", "--policy", "t/policy.bin"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    // the distance column of every dense evaluation trajectory has slope exactly one
    let o = lesr(&["analyze", "e/trajectories.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let row4 = text.lines().find(|l| l.starts_with("4,")).unwrap();
    let v: f64 = row4.split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - 1.0).abs() < 1e-9, "{text}");
}

#[test]
fn analyze_matches_brute_force_oracle() {
    let dir = setup();
    let csv = "t,s0,s1,sc0,sc1,sc2,r\n0,0,0,0,0,1,0.5\n1,1,0,1,0,2,1.5\n2,1,1,1,1,4,-0.5\n";
    std::fs::write(dir.path().join("three.csv"), csv).unwrap();
    let o = lesr(&["analyze", "three.csv", "--out", "lip.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let written = std::fs::read_to_string(dir.path().join("lip.csv")).unwrap();

    let traces = traces_from_csv(csv.as_bytes()).unwrap();
    let t: Trajectory = traces[0].to_trajectory().unwrap();
    let expected = common::brute_force_lipschitz(t.states(), t.rewards());
    let mut want = String::from("dim,value,flag\n");
    for (i, v) in expected.iter().enumerate() {
        want.push_str(&format!("{i},{v},exact\n"));
    }
    assert_eq!(written, want);
}

#[test]
fn analyze_constant_rewards_and_bad_files() {
    let dir = setup();
    std::fs::write(
        dir.path().join("flat.csv"),
        "t,s0,sc0,sc1,r\n0,0,0,3,1\n1,1,1,5,1\n2,2,2,7,1\n",
    )
    .unwrap();
    let o = lesr(&["analyze", "flat.csv"], dir.path());
    assert_eq!(stdout(&o), "dim,value,flag\n0,0,exact\n1,0,exact\n");

    std::fs::write(dir.path().join("nor.csv"), "t,s0,sc0\n0,0,0\n1,1,1\n").unwrap();
    let o = lesr(&["analyze", "nor.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`r`"), "{}", stderr(&o));

    std::fs::write(
        dir.path().join("junk.csv"),
        "t,s0,sc0,r\n0,0,0,1\n1,x,1,2\n",
    )
    .unwrap();
    let o = lesr(&["analyze", "junk.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn mock_run_completes() {
    let dir = setup();
    let o = lesr(
        &["run", "--config", "tiny.toml", "--out", "r", "--seed", "2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("best candidate"));
    let run = dir.path().join("r");
    assert!(run.join("manifest.json").exists());
    assert!(run.join("final/policy.bin").exists());
}
