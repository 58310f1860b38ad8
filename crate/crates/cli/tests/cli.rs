use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn angbbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_angbbm"))
        .args(args)
        .env_remove("ANGBBM_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

#[test]
fn every_operation_is_a_subcommand() {
    let listed = stdout(&angbbm(&["ops"]));
    let help = stdout(&angbbm(&["--help"]));
    for op in angbbm::harness::registry() {
        assert!(
            listed.contains(&format!("\"name\":\"{}\"", op.name)),
            "{} missing from ops",
            op.name
        );
        assert!(help.contains(op.name), "{} missing from help", op.name);
        let sub = angbbm(&[op.name, "--help"]);
        assert_eq!(code(&sub), 0);
        for p in op.params {
            assert!(
                stdout(&sub).contains(&format!("--{}", p.name.replace('_', "-"))),
                "{} --{}",
                op.name,
                p.name
            );
        }
    }
    for extra in ["run", "report", "accept"] {
        assert!(help.contains(extra));
    }
}

#[test]
fn invalid_input_exits_with_one() {
    assert_eq!(code(&angbbm(&["spectrum", "--alpha", "-1"])), 1);
    assert_eq!(code(&angbbm(&["spectrum", "--alpha", "abc"])), 1);
    assert_eq!(
        code(&angbbm(&["mass", "--samples", "200"])),
        1,
        "seed is required"
    );
    assert_eq!(code(&angbbm(&["no-such-op"])), 1);
}

#[test]
fn deterministic_op_prints_summary() {
    let out = angbbm(&["spectrum", "--alpha", "2", "--levels", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["operation"], "spectrum");
    assert!(v["seed"].is_null());
    assert!(v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["passed"] == true));
}

#[test]
fn same_seed_gives_identical_files_in_every_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let dirs: Vec<_> = ["a", "b", "c"].iter().map(|d| tmp.path().join(d)).collect();
    for (i, dir) in dirs.iter().enumerate() {
        let d = dir.to_str().unwrap();
        let mut args = vec!["gtilde", "--seed", "42", "--samples", "300", "--out", d];
        if i == 2 {
            args.push("--sequential");
        }
        let out = angbbm(&args);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let first = read_dir(&dirs[0]);
    assert!(first.len() >= 2);
    assert_eq!(first, read_dir(&dirs[1]));
    assert_eq!(first, read_dir(&dirs[2]));
    let other = tmp.path().join("d");
    angbbm(&[
        "gtilde",
        "--seed",
        "43",
        "--samples",
        "300",
        "--out",
        other.to_str().unwrap(),
    ]);
    assert_ne!(first, read_dir(&other));
}

fn write_spec(dir: &Path, alpha_ladder: &str) -> String {
    let path = dir.join("exp.toml");
    fs::write(
        &path,
        format!(
            "name = \"levels\"\noperation = \"spectrum\"\nseed = 1\n\n[params]\nlevels = 4\n\n[ladder]\nalpha = {alpha_ladder}\n"
        ),
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn ladder_runs_once_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), "[0.8, 1.0, 1.5]");
    let out_dir = tmp.path().join("out");
    let out = out_dir.to_str().unwrap();

    let first = angbbm(&["run", &spec, "--out", out]);
    assert_eq!(
        code(&first),
        0,
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    assert!(
        stdout(&first).contains("ran 3, skipped 0"),
        "{}",
        stdout(&first)
    );
    let cells: Vec<_> = fs::read_dir(&out_dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("cell-"))
        .collect();
    assert_eq!(cells.len(), 3);
    assert!(out_dir.join("manifest.json").exists());

    let second = angbbm(&["run", &spec, "--out", out]);
    assert_eq!(code(&second), 0);
    assert!(
        stdout(&second).contains("ran 0, skipped 3"),
        "{}",
        stdout(&second)
    );

    let rep = angbbm(&["report", out]);
    assert_eq!(code(&rep), 0, "{}", stdout(&rep));
    assert!(stdout(&rep).contains("spectrum"));

    // Tampering with an exported file must be caught.
    let csv = cells[0].path().join("eigen.csv");
    let mut bytes = fs::read(&csv).unwrap();
    bytes.extend_from_slice(b"0,0\n");
    fs::write(&csv, bytes).unwrap();
    let rep = angbbm(&["report", out]);
    assert_ne!(code(&rep), 0);
    assert!(stdout(&rep).contains("DIGEST MISMATCH"), "{}", stdout(&rep));

    // --force reruns and repairs the cell.
    let forced = angbbm(&["run", &spec, "--out", out, "--force"]);
    assert!(stdout(&forced).contains("ran 3"), "{}", stdout(&forced));
    assert_eq!(code(&angbbm(&["report", out])), 0);
}

#[test]
fn invalid_ladder_is_rejected_before_running() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), "[1.0, -1.0]");
    let out_dir = tmp.path().join("out");
    let res = angbbm(&["run", &spec, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&res), 1);
    assert!(!out_dir.join("manifest.json").exists());
}

#[test]
fn report_on_empty_directory_fails() {
    let tmp = tempfile::tempdir().unwrap();
    assert_ne!(code(&angbbm(&["report", tmp.path().to_str().unwrap()])), 0);
}

#[test]
fn accept_prints_one_line_per_criterion() {
    let tmp = tempfile::tempdir().unwrap();
    let out = angbbm(&[
        "accept",
        "--only",
        "1,6",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let text = stdout(&out);
    assert_eq!(
        text.lines().filter(|l| l.starts_with("[PASS]")).count(),
        2,
        "{text}"
    );
    assert_eq!(code(&angbbm(&["report", tmp.path().to_str().unwrap()])), 0);
}
