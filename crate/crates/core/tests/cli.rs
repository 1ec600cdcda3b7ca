use std::path::Path;
use std::process::Command;

fn linjam() -> Command {
    Command::new(env!("CARGO_BIN_EXE_linjam"))
}

/// Every row has the header's field count and no empty field.
fn assert_schema_complete(path: &Path, expected_header: &[&str]) -> usize {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, expected_header, "{}", path.display());
    let mut rows = 0;
    for record in reader.records() {
        let record = record.unwrap();
        assert_eq!(record.len(), header.len());
        assert!(record.iter().all(|f| !f.is_empty()), "{record:?}");
        rows += 1;
    }
    rows
}

#[test]
fn bler_sweep_writes_its_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        "snr_db = [8.0]\njnr_db = [10.0]\nrho = [0.5, 1.0]\nblocks_per_point = 40\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = linjam()
        .args(["bler-sweep", "--config"])
        .arg(&cfg)
        .args(["--seed", "5", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let path = out.join("bler_sweep.csv");
    assert!(String::from_utf8_lossy(&status.stdout).contains("bler_sweep.csv"));
    let rows = assert_schema_complete(
        &path,
        &[
            "snr_db", "jnr_db", "method", "scheme", "rho", "blocks", "errors", "bler", "std_err",
        ],
    );
    // Unjammed reference plus 3 methods x 2 rho.
    assert_eq!(rows, 7);
}

#[test]
fn llr_stats_quick_profile() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("llr.toml");
    std::fs::write(&cfg, "rho = [1.0]\nmethods = [\"symbol\"]\n").unwrap();
    let status = linjam()
        .args(["llr-stats", "--quick", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let rows = assert_schema_complete(
        &dir.path().join("llr_stats.csv"),
        &[
            "snr_db",
            "jnr_db",
            "method",
            "rho",
            "source",
            "samples",
            "min",
            "q1",
            "median",
            "q3",
            "max",
            "iqr",
            "lower_whisker",
            "upper_whisker",
            "outliers",
        ],
    );
    assert!(rows >= 1);
}

#[test]
fn bandit_writes_per_run_and_curve_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bandit.toml");
    std::fs::write(
        &cfg,
        "jnr_db = [5.0]\nlambda = [0.1]\nsteps = 6\nreplications = 2\n\n[slot]\nframes_per_step = 1\ncodewords_per_slot = 4\n",
    )
    .unwrap();
    let status = linjam()
        .args(["bandit", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let step_header = [
        "t",
        "replication",
        "scheme",
        "rho",
        "method",
        "true_bler",
        "observed_bler",
        "cost",
        "cum_true_bler",
        "cum_observed_bler",
    ];
    let curve_header = ["jnr_db", "lambda", "t", "true_bler", "observed_bler"];
    let mut per_run = 0;
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        if name == "bandit_curves.csv" {
            // Baseline and lambda 0.1, 6 steps each.
            assert_eq!(assert_schema_complete(&path, &curve_header), 12);
        } else if name.starts_with("bandit_jnr") {
            assert_eq!(assert_schema_complete(&path, &step_header), 12);
            per_run += 1;
        }
    }
    assert_eq!(per_run, 2);
}

#[test]
fn unknown_config_key_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "snr_db = [8.0]\nblocks = 10\n").unwrap();
    let out = linjam()
        .args(["bler-sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("blocks"));
    assert!(!dir.path().join("bler_sweep.csv").exists());
}

#[test]
fn mismatched_experiment_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "experiment = \"bandit\"\n").unwrap();
    let out = linjam()
        .args(["llr-stats", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(!out.status.success());
}
