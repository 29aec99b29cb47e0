use std::path::Path;
use std::process::{Command, Output};

fn dice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dice")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.cfg");
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

const SMALL: &str = "env = chain-4\nseeds = 1,2\ntotal_steps = 600\neval_interval = 300\neval_episodes = 3\nbatch_size = 4\nmax_episode_steps = 50\nsync = true\n";

#[test]
fn successful_run_prints_summary_and_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dice(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut lines = stdout.lines();
    assert!(lines.next().unwrap().starts_with("step,seeds,"));
    let steps: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(steps, ["0", "300", "600"]);
}

#[test]
fn output_directory_receives_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("res");
    let out = dice(&["run", &cfg, "--out", out_dir.to_str().unwrap(), "--plot", "--seeds", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["metrics-seed7.csv", "checkpoint-seed7.txt", "summary.csv", "returns.svg"] {
        assert!(out_dir.join(name).is_file(), "{name} missing");
    }
    let ck = dice_rl::checkpoint::read_checkpoint(&out_dir.join("checkpoint-seed7.txt")).unwrap();
    assert_eq!(ck.env_steps, 600);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let bad_cfg = dir.path().join("bad.cfg");
    std::fs::write(&bad_cfg, "env = chain-4\nspeed = 3\n").unwrap();
    for args in [
        vec![],
        vec!["frobnicate"],
        vec!["run"],
        vec!["run", "/no/such/config"],
        vec!["run", bad_cfg.to_str().unwrap()],
        vec!["run", &cfg, "--seeds", "x"],
        vec!["run", &cfg, "--ablation", "bogus"],
        vec!["run", &cfg, "--env", "no-such-env"],
        vec!["run", &cfg, "--ablation", "baseline", "--ablation", "no_bva"],
    ] {
        let out = dice(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn help_exits_0() {
    let out = dice(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("run"));
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = dice(&["run", &cfg, "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
