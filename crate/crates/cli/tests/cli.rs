use std::process::{Command, Output};

const CONFIG: &str = "num_bs = 2
num_ris = 2
num_users = 2
num_subcarriers = 1
bs_antennas = 2
user_antennas = 1
ris_elements = 4
p_bmax_db = 0
noise_dbm = -120
sweep_start_m = 30
sweep_stop_m = 40
sweep_step_m = 10
trials = 2
record_wall_time = false
";

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ris-cellfree")).args(args).output().unwrap()
}

#[test]
fn run_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.cfg");
    std::fs::write(&config, CONFIG).unwrap();
    let out = dir.path().join("out.csv");
    let o = cli(&["run", "-c", config.to_str().unwrap(), "-o", out.to_str().unwrap(), "--trials", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    // Header plus 2 distances x 3 variants x 1 trial.
    assert_eq!(text.lines().count(), 7);
    assert!(String::from_utf8_lossy(&o.stdout).contains("6 records written"));
}

#[test]
fn seed_override_changes_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.cfg");
    std::fs::write(&config, CONFIG).unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let c = config.to_str().unwrap();
    for (name, seed) in [("a.csv", "1"), ("b.csv", "1"), ("c.csv", "2")] {
        assert!(cli(&["run", "-c", c, "-o", &path(name), "--seed", seed, "-j", "1"]).status.success());
    }
    let read = |name: &str| std::fs::read(path(name)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn bad_config_reports_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.cfg");
    std::fs::write(&config, CONFIG.replace("noise_dbm = -120", "noise_dbm = loud")).unwrap();
    let o = cli(&["run", "-c", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("noise_dbm"));
}

#[test]
fn validate_passes_and_single_prints_a_trace() {
    let o = cli(&["validate", "--instances", "5"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().filter(|l| l.starts_with("PASS")).count(), 5);

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.cfg");
    std::fs::write(&config, CONFIG).unwrap();
    let o = cli(&["single", "-c", config.to_str().unwrap(), "-L", "35", "--variant", "continuous-phase"]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.starts_with("initial WSR"));
    assert!(stdout.contains("final WSR"));
    assert!(cli(&["single", "--variant", "quantized"]).status.code() != Some(0));
}
