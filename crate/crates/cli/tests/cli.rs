use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn wvfreq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wvfreq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn fixed_seed_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = wvfreq(&["slope", "--seed", "7", "-o", p.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn stdout_matches_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("r.csv");
    let to_file = wvfreq(&["range", "-o", f.to_str().unwrap()]);
    let to_stdout = wvfreq(&["range"]);
    assert!(to_file.status.success() && to_stdout.status.success());
    assert!(to_file.stdout.is_empty());
    assert_eq!(std::fs::read(&f).unwrap(), to_stdout.stdout);
}

#[test]
fn replay_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let again = dir.path().join("again.csv");
    let o = wvfreq(&["simulate", "--set", "duration=1s", "--set", "sigma=400um", "--seed", "11", "-o", first.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = wvfreq(&["simulate", "--replay", first.to_str().unwrap(), "-o", again.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&again).unwrap());

    let text = std::fs::read_to_string(&first).unwrap();
    assert!(text.contains("# config_hash = "));
    assert!(text.contains("# config.sigma = 4e-4m"));
}

#[test]
fn replay_rejects_edited_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("r.csv");
    assert!(wvfreq(&["range", "-o", f.to_str().unwrap()]).status.success());
    let edited = std::fs::read_to_string(&f)
        .unwrap()
        .replace("# config.sigma = 3.88e-4m", "# config.sigma = 5e-4m");
    std::fs::write(&f, edited).unwrap();
    let o = wvfreq(&["range", "--replay", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn config_file_and_overrides_layer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(&cfg, "# narrower beam\nsigma = 200um\nrange_threshold = 0.4\n").unwrap();
    let o = wvfreq(&["range", "--config", cfg.to_str().unwrap(), "--set", "sigma=300um"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("# config.sigma = 3e-4m"));
    assert!(out.contains("# config.range_threshold = 4e-1"));
}

#[test]
fn exit_codes() {
    let one_point = wvfreq(&["slope", "--set", "sweep=1MHz"]);
    assert_eq!(one_point.status.code(), Some(4), "{}", stderr(&one_point));

    let dark = wvfreq(&["sensitivity", "--set", "power=0W"]);
    assert_eq!(dark.status.code(), Some(2), "{}", stderr(&dark));

    let far = wvfreq(&["slope", "--set", "sweep=1MHz,30THz"]);
    assert_eq!(far.status.code(), Some(3));
    assert!(stderr(&far).contains("sweep point 1"));

    let unknown = wvfreq(&["range", "--set", "bogus=1"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(stderr(&unknown).contains("bogus"));

    let usage = wvfreq(&["frobnicate"]);
    assert_eq!(usage.status.code(), Some(2));

    let missing = wvfreq(&["calibrate", "--positions", "/nonexistent/positions.txt"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn calibrate_example_scan() {
    let pos = data("rb_scan_example.txt");
    let o = wvfreq(&["calibrate", "--positions", pos.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("(0.34%)"));
    let out = String::from_utf8(o.stdout).unwrap();
    assert_eq!(out.lines().filter(|l| !l.starts_with('#')).count(), 1 + 6);
}

#[test]
fn sensitivity_with_calibration() {
    let pos = data("rb_scan_example.txt");
    let refs = data("rb_d2_lines.txt");
    let o = wvfreq(&["sensitivity", "--positions", pos.to_str().unwrap(), "--references", refs.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("(cal)"));
}
