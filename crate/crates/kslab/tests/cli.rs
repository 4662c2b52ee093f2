use std::process::Command;

fn kslab(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_kslab")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn presets_are_listed_and_shown() {
    let (code, out, _) = kslab(&["presets", "list"]);
    assert_eq!(code, 0);
    for name in ["s1-smoke", "s2-smoke", "s3-radial", "dichotomy-sweep", "continuity-ladder", "eps-family"] {
        assert!(out.lines().any(|l| l == name), "{name}");
    }
    let (code, out, _) = kslab(&["presets", "show", "s1-smoke"]);
    assert_eq!(code, 0);
    assert!(out.contains("[model]"));
    let (code, _, err) = kslab(&["presets", "show", "nope"]);
    assert_eq!(code, 1);
    assert!(err.contains("nope"));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[model]\nchi = 1.0\nbogus = 2\n").unwrap();
    let out = dir.path().join("out");
    let (code, _, err) = kslab(&["run", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("bogus"), "{err}");
    let (code, _, _) = kslab(&["run", "preset:missing", "--output", out.to_str().unwrap()]);
    assert_eq!(code, 1);
    let (code, _, _) = kslab(&["verify", dir.path().join("nowhere").to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn run_then_verify_strictly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s1");
    let out_s = out.to_str().unwrap();
    let (code, stdout, err) = kslab(&["run", "preset:s1-smoke", "--output", out_s, "--workers", "1", "--seedless"]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("0 failed"), "{stdout}");
    let (code, _, _) = kslab(&["verify", out_s, "--strict"]);
    assert_eq!(code, 0);

    // break mass conservation in the stored series
    let path = out.join("series.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let tampered: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(k, l)| {
            if k == 3 {
                let mut c: Vec<&str> = l.split(',').collect();
                c[1] = "2.5e0";
                c.join(",")
            } else {
                l.to_string()
            }
        })
        .collect();
    std::fs::write(&path, tampered.join("\n") + "\n").unwrap();
    let (code, stdout, _) = kslab(&["verify", out_s]);
    assert_eq!(code, 0);
    assert!(stdout.contains("FAIL mass_u"));
    let (code, _, _) = kslab(&["verify", out_s, "--strict"]);
    assert_eq!(code, 3);
}

#[test]
fn sweep_and_convergence_subcommands_force_their_kind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        r#"
[model]
chi = 1.0
xi = 0.0
alpha = 1.0
beta = 1.0
gamma = 1.0
delta = 1.0
tau = 0

[grid]
geometry = "rectangle"
extents = [1.0, 1.0]
cells = [16, 16]

[initial]
atoms = [{ position = [0.5, 0.5], mass = 1.0 }]

[experiment]
kind = "single"
t_end = 0.02
eps = [1e-2, 5e-3, 2.5e-3]
refinements = 1

[experiment.sweep]
chi = [1.0]
mass = [0.5, 1.0]
"#,
    )
    .unwrap();
    let out = dir.path().join("sweep");
    let (code, _, err) = kslab(&["sweep", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(out.join("sweep.csv").exists());
    let out = dir.path().join("conv");
    let (code, _, err) = kslab(&["convergence", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(out.join("convergence.json").exists());
    assert!(out.join("eps_02/u_probe.bin").exists());
}
