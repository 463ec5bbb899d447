use std::process::Command;

fn stochsec() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_stochsec"));
    cmd.env_remove("STOCHSEC_DATA_DIR");
    cmd
}

#[test]
fn help_lists_every_subcommand() {
    let out = stochsec().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in [
        "train-clf",
        "train-ebm",
        "attack",
        "defend",
        "evaluate",
        "fpe-check",
        "report",
        "run",
    ] {
        assert!(text.contains(sub), "missing {sub} in\n{text}");
    }
}

#[test]
fn fpe_check_writes_density_table() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("fpe.csv");
    let out = stochsec()
        .args(["fpe-check", "--points", "32", "--chains", "2000", "--out"])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "point,exact_density,evolved_density,sgld_histogram"
    );
    assert_eq!(text.lines().count(), 33);
    assert!(String::from_utf8_lossy(&out.stdout).contains("total variation"));
}

#[test]
fn report_on_metrics_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut metrics = String::from("eps,n,seed,clean_acc,adv_acc,post_acc,rel_error,ece\n");
    for (n, rel) in [(5, 4.0), (10, 3.0), (20, 2.0)] {
        metrics.push_str(&format!("0.0313,{n},1,0.9,0.1,{},{rel},0.1\n", 1.0 - 0.1 * rel));
    }
    std::fs::write(dir.path().join("metrics.csv"), metrics).unwrap();
    let out = stochsec().arg("report").arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for table in ["table_projection.csv", "table_error_vs_n.csv", "summary.txt"] {
        assert!(dir.path().join(table).exists(), "{table}");
    }
}

#[test]
fn no_train_without_checkpoint_names_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = stochsec()
        .args(["attack", "--preset", "desk", "--workers", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("classifier.ckpt"), "{err}");
}

#[test]
fn cifar_preset_needs_a_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = stochsec()
        .args(["train-clf", "--preset", "paper-cifar10", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("STOCHSEC_DATA_DIR"));
}

#[test]
fn bad_plan_file_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.txt");
    std::fs::write(&plan, "preset = desk\n[attack]\nimages = lots\n").unwrap();
    let out = stochsec().args(["evaluate", "--plan"]).arg(&plan).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}
