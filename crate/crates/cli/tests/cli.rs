use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lvad(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lvad"))
        .args(args)
        .current_dir(cwd)
        .env_remove("LVAD_OUTPUT_DIR")
        .env_remove("LVAD_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const STEADY_PIPE: &str = r#"
schema_version = 1

[units]
flow = "l/min"
pressure = "Pa"

[mesh]
generator = "pipe"
length = 0.04
diameter = 0.012
axial_cells = 6
radial_cells = 2

[[boundary]]
patch = "inlet"
type = "inflow"
flow = 0.5

[[boundary]]
patch = "outlet"
type = "windkessel"
rp = 1.0e7
rd = 1.0e8
c = 1.0e-9
p0 = 900.0

[[boundary]]
patch = "wall"
type = "wall"

[solver]
t_end = 0.6
steady_tol = 1e-6
steady_window = 0.05

[output]
dir = "run"
probes = [[0.02, 0.0, 0.0], [0.035, 0.002, 0.0]]
"#;

const PULSATILE_PIPE: &str = r#"
schema_version = 1

[mesh]
generator = "pipe"
length = 0.04
diameter = 0.0286
axial_cells = 4
radial_cells = 2

[[boundary]]
patch = "inlet"
type = "inflow"
clinical = "pre"
waveform = "cardiac"

[[boundary]]
patch = "outlet"
type = "windkessel"
clinical = "pre"

[[boundary]]
patch = "wall"
type = "wall"

[solver]
t_end = 1.2
"#;

#[test]
fn mesh_command_writes_file_and_quality() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lvad(
        &[
            "mesh",
            "pipe",
            "--length",
            "0.1",
            "--diameter",
            "0.02",
            "--out",
            "pipe.mesh",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("non-orthogonality"));
    let mesh = lvad_core::mesh::file::read_mesh(&tmp.path().join("pipe.mesh")).unwrap();
    assert!(mesh.n_cells() > 0);
}

#[test]
fn invalid_flag_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lvad(
        &["mesh", "pipe", "--length", "0.1", "--bogus", "1"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn mesh_above_quality_cap_fails_with_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lvad(
        &["mesh", "bifurcation", "--angle", "15", "--out", "b.mesh"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("non-orthogonality"));
}

#[test]
fn steady_run_reports_flat_pressure_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("case.toml"), STEADY_PIPE).unwrap();
    let a = lvad(&["fom-run", "case.toml", "--out", "a"], tmp.path());
    assert!(a.status.success(), "{}", stderr(&a));
    assert!(stdout(&a).contains("PAM = PAS = PAD"));
    let b = lvad(&["fom-run", "case.toml", "--out", "b"], tmp.path());
    assert!(b.status.success());
    for f in ["probe_0.csv", "probe_1.csv"] {
        let x = fs::read(tmp.path().join("a").join(f)).unwrap();
        let y = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert!(x.len() > 100);
        assert_eq!(x, y, "{f} differs between runs");
    }
    let probe = fs::read_to_string(tmp.path().join("a/probe_0.csv")).unwrap();
    let first = probe.lines().nth(1).unwrap();
    let mantissa = first.split(',').nth(1).unwrap().split('e').next().unwrap();
    assert_eq!(mantissa.replace(['.', '-'], "").len(), 15);
    for f in [
        "final.vtk",
        "final_wall.vtk",
        "summary.csv",
        "indicators.csv",
        "report.txt",
    ] {
        assert!(tmp.path().join("a").join(f).exists(), "{f}");
    }
}

#[test]
fn pulsatile_run_compares_against_the_record() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("case.toml"), PULSATILE_PIPE).unwrap();
    let o = lvad(&["fom-run", "case.toml", "--out", "pre"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    for key in ["PAS", "PAD", "PAM", "exp", "num"] {
        assert!(out.contains(key), "{out}");
    }
    let csv = fs::read_to_string(tmp.path().join("pre/indicators.csv")).unwrap();
    assert!(csv.contains("PAS,") && csv.contains(",1.0800000000000000e2"));
}

#[test]
fn broken_case_names_the_offending_key() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("bad.toml"),
        STEADY_PIPE.replace("t_end = 0.6", "t_end = 0.6\nt_stop = 1"),
    )
    .unwrap();
    let o = lvad(&["fom-run", "bad.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("t_stop"), "{}", stderr(&o));
}

#[test]
fn output_dir_override_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_lvad"))
        .args(["validate"])
        .current_dir(tmp.path())
        .env("LVAD_OUTPUT_DIR", tmp.path().join("elsewhere"))
        .output()
        .unwrap();
    assert!(
        tmp.path().join("elsewhere/validation.csv").exists(),
        "{}",
        stderr(&o)
    );
}

#[test]
fn validate_prints_the_reproduction_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lvad(&["validate", "--out", "v"], tmp.path());
    let out = stdout(&o);
    assert!(out.contains("of 72 checks passed"), "{out}");
    // some published coefficients disagree with the published areas, so the
    // command reports them and exits with the runtime failure code
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("outside tolerance"));
    let csv = fs::read_to_string(tmp.path().join("v/validation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 73);
}

#[test]
fn sweep_train_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("case.toml"), STEADY_PIPE).unwrap();
    let sweep = [
        "sweep",
        "case.toml",
        "--lo",
        "0.4",
        "--hi",
        "0.6",
        "--count",
        "3",
        "--extra",
        "0.45",
        "--out",
        "db",
        "--workers",
        "2",
    ];
    let o = lvad(&sweep, dir);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("4 computed, 0 skipped"));
    let manifest = fs::read_to_string(dir.join("db/manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 1 + 4 * 5);
    let o = lvad(&sweep, dir);
    assert!(
        stdout(&o).contains("0 computed, 4 skipped"),
        "{}",
        stdout(&o)
    );

    let o = lvad(&["rom-train", "db", "--threshold", "1.5"], dir);
    assert_eq!(o.status.code(), Some(2));
    let o = lvad(
        &[
            "rom-train",
            "db",
            "--exclude",
            "0.45",
            "--kind",
            "rbf-thin-plate",
            "--out",
            "rom.bin",
        ],
        dir,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let energy = fs::read_to_string(dir.join("rom.energy.csv")).unwrap();
    let mut last = ("".to_string(), 0.0);
    for line in energy.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let e: f64 = cols[3].parse().unwrap();
        if cols[0] == last.0 {
            assert!(e >= last.1);
        }
        last = (cols[0].to_string(), e);
        if cols[1] == "3" {
            assert_eq!(e, 1.0);
        }
    }

    let o = lvad(
        &[
            "rom-eval",
            "rom.bin",
            "--param",
            "0.45",
            "--db",
            "db",
            "--case",
            "case.toml",
            "--out",
            "eval",
        ],
        dir,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let errors = fs::read_to_string(dir.join("eval/errors.csv")).unwrap();
    assert!(errors.starts_with("PF,E_p,E_wss,E_u_x,E_u_y,E_u_z"));
    assert!(dir.join("eval/rom_0.45.vtk").exists());
    assert!(fs::read_to_string(dir.join("eval/timing.csv"))
        .unwrap()
        .contains("speedup"));

    let o = lvad(
        &["rom-eval", "rom.bin", "--param", "0.8", "--out", "eval"],
        dir,
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("outside the training box"));
    let o = lvad(
        &[
            "rom-eval",
            "rom.bin",
            "--param",
            "0.8",
            "--allow-extrapolation",
            "--out",
            "eval",
        ],
        dir,
    );
    assert!(o.status.success());

    let o = lvad(
        &["report", "--db", "db", "--model", "rom.bin", "--out", "rep"],
        dir,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "validation.csv",
        "energy.csv",
        "errors.csv",
        "pump_coefficients.csv",
        "windkessel_post_4.csv",
    ] {
        assert!(dir.join("rep").join(f).exists(), "{f}");
    }
}
