use std::process::{Command, Output};

use dmifilm::parse_native;

fn dmifilm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmifilm")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn mesh_disk_writes_a_parseable_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d100.mesh");
    let o = dmifilm(&[
        "--out",
        path.to_str().unwrap(),
        "mesh-disk",
        "--diameter-nm",
        "100",
        "--h-nm",
        "4.45",
    ]);
    assert!(o.status.success());
    let mesh = parse_native(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(stdout(&o).contains(&format!("n_triangles={}", mesh.n_triangles())));
    let h_max_nm: f64 = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("h_max_nm="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(h_max_nm <= 1.5 * 4.45);
}

#[test]
fn zero_diameter_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.mesh");
    let o = dmifilm(&["--out", path.to_str().unwrap(), "mesh-disk", "--diameter-nm", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn corrupted_mesh_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.mesh");
    std::fs::write(&path, "dmimesh 1\nvertices 3\n0 0\n1 x\n0 1\ntriangles 1\n0 1 2\n").unwrap();
    let o = dmifilm(&["check", "--mesh", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&o.stderr).contains("line 4"),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn fast_check_passes() {
    let o = dmifilm(&["check", "--level", "fast"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn excessive_time_step_names_the_admissible_maximum() {
    let dir = tempfile::tempdir().unwrap();
    let o = dmifilm(&[
        "--out",
        dir.path().to_str().unwrap(),
        "evolve",
        "--alpha",
        "0.28",
        "--dt-s",
        "1e-11",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("admissible maximum dt_s = 4.29"));
}

#[test]
fn gamma_study_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = dmifilm(&[
        "--out",
        dir.path().to_str().unwrap(),
        "gamma-study",
        "--profile",
        "const-z",
        "--mesh-h",
        "0.2",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("fitted_order=exact"));
    let csv = std::fs::read_to_string(dir.path().join("gamma.csv")).unwrap();
    assert!(csv.starts_with("eps,E_local,E_limit,abs_error\n"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 5);
}

#[test]
fn unsorted_eps_list_is_rejected() {
    let o = dmifilm(&["gamma-study", "--eps", "0.1,0.2,0.05"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn short_evolve_writes_outputs_and_si_scales_time() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().to_str().unwrap();
    let o = dmifilm(&[
        "--out",
        base,
        "--si",
        "evolve",
        "--diameter-nm",
        "60",
        "--h-nm",
        "6",
        "--t-end-s",
        "5e-11",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "series.csv",
        "final.field",
        "final.vtk",
        "profile.csv",
        "classification.txt",
        "mesh.mesh",
        "snapshot_000000.vtk",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(dir.path().join("series.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let time: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert!((time - 5e-11).abs() < 1e-20, "{time}");
    assert_eq!(csv.lines().count(), 1 + 1 + 5);
}

#[test]
fn config_file_drives_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let ini = dir.path().join("run.ini");
    std::fs::write(
        &ini,
        "[mesh]\nsource = disk\ndiameter_nm = 50\ntarget_h_nm = 6\n\n[dynamics]\ndt_s = 1e-11\nt_end_s = 3e-11\n\n[output]\ndir = result\n",
    )
    .unwrap();
    let o = dmifilm(&["--config", ini.to_str().unwrap(), "evolve"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("steps=3"));
    assert!(dir.path().join("result").join("series.csv").exists());
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ini = dir.path().join("run.ini");
    std::fs::write(&ini, "[dynamics]\ndt = 1e-11\n").unwrap();
    let o = dmifilm(&["--config", ini.to_str().unwrap(), "info"]);
    assert_eq!(o.status.code(), Some(2));
}
