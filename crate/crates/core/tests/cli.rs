use std::process::Command;

fn run(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_korn-shell")).args(args).output().unwrap()
}

#[test]
fn sweep_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.conf");
    std::fs::write(&cfg, "shell = cylinder\nh = 0.2, 0.15, 0.1\nrandom_fields = 4\nstability = false\n").unwrap();
    let mut csvs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = run(&["sweep", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "5"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        for f in ["scaling.csv", "scaling.dat", "report.txt"] {
            assert!(out.join(f).exists(), "{f}");
        }
        csvs.push(std::fs::read(out.join("scaling.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs[0].clone()).unwrap();
    assert!(text.starts_with("h,k_eigen,"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn verify_and_ansatz_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.conf");
    std::fs::write(&cfg, "shell = sphere\nh = 0.1, 0.05, 0.025\nsuites = scalar_korn, sigma\n").unwrap();
    let out = dir.path().join("o");
    let o = run(&["verify", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let suites = std::fs::read_to_string(out.join("suites.csv")).unwrap();
    assert!(suites.contains("scalar_korn,passed") && suites.contains("laplacian,skipped"));
    let o = run(&["ansatz", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("lower bound holds"));
}

#[test]
fn bad_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "h = 0.1, 0.2\n").unwrap();
    let o = run(&["sweep", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("decreasing"));
}
