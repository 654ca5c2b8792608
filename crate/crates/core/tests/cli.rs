use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_qwgame");

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    for k in ["QWG_CONFIG", "QWG_RECIPE", "QWG_SEED", "QWG_OUT", "QWG_WORKERS", "QWG_GRID"] {
        cmd.env_remove(k);
    }
    cmd.envs(envs.iter().copied());
    cmd.output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_RACE: &str = "recipe = \"race\"\nsteps = 6\ngrid = 9\nlattice = { size = 13 }\n";

#[test]
fn race_writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_RACE);
    let out = dir.path().join("out");
    let o = run(&["--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "resolved_config.json",
        "surface_uA.csv",
        "surface_uB.csv",
        "best_response.csv",
        "stationary.json",
        "ne_distribution.csv",
        "ne_marginals.csv",
        "report.json",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let surface = fs::read_to_string(out.join("surface_uA.csv")).unwrap();
    assert!(surface.starts_with("theta_A,theta_B,value\n"));
    assert_eq!(surface.lines().count(), 82);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["zero_sum_exact"], true);
    let resolved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("resolved_config.json")).unwrap()).unwrap();
    assert_eq!(resolved["seed"], 7);
    assert_eq!(resolved["lattice"]["size"], 13);
    let leftovers: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().contains("partial"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "recipe = \"tug_of_war\"\nsteps = 5\ngrid = 7\nlattice = { size = 11 }\ninteraction = { kind = \"noisy_collision\", strength = 1.0, noise_sigma = 0.3 }\nensemble = 3\n",
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (dir, workers) in [(&a, "1"), (&b, "3")] {
        let code = run(&["--config", &cfg, "--out", dir.to_str().unwrap(), "--workers", workers], &[]).status.code();
        assert!(matches!(code, Some(0 | 3)));
    }
    for e in fs::read_dir(&a).unwrap() {
        let name = e.unwrap().file_name();
        if name == "resolved_config.json" {
            continue;
        }
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?} differs");
    }
}

#[test]
fn missing_equilibrium_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL_RACE}coin_a = \"R\"\ncoin_b = \"minus\"\n"));
    let out = dir.path().join("out");
    let o = run(&["--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(out.join("surface_uA.csv").exists());
}

#[test]
fn configuration_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let even = write_config(dir.path(), "recipe = \"race\"\nlattice = { size = 14 }\n");
    let o = run(&["--config", &even, "--out", out], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("odd"));

    let unknown = write_config(dir.path(), "recipe = \"race\"\nstepz = 4\n");
    assert_eq!(run(&["--config", &unknown, "--out", out], &[]).status.code(), Some(1));
    assert_eq!(run(&["--recipe", "juggling", "--out", out], &[]).status.code(), Some(1));
    assert_eq!(run(&["--recipe", "race"], &[]).status.code(), Some(1));
    assert!(!Path::new(out).exists());

    fs::create_dir(dir.path().join("full")).unwrap();
    fs::write(dir.path().join("full/keep.txt"), "x").unwrap();
    let cfg = write_config(dir.path(), SMALL_RACE);
    let o = run(&["--config", &cfg, "--out", dir.path().join("full").to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(fs::read_to_string(dir.path().join("full/keep.txt")).unwrap(), "x");
}

#[test]
fn environment_overrides_config_and_flags_override_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_RACE);
    let o =
        run(&["--dry-run", "--out", "unused"], &[("QWG_CONFIG", cfg.as_str()), ("QWG_SEED", "11"), ("QWG_GRID", "5")]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((v["seed"].as_u64(), v["grid"].as_u64(), v["steps"].as_u64()), (Some(11), Some(5), Some(6)));
    let o = run(&["--dry-run", "--out", "unused", "--seed", "3"], &[("QWG_CONFIG", cfg.as_str()), ("QWG_SEED", "11")]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["seed"].as_u64(), Some(3));
}

#[test]
fn json_config_and_recipe_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    fs::write(&path, r#"{"recipe": "race", "steps": 4, "grid": 5, "lattice": {"size": 9}, "coin_a": "plus"}"#).unwrap();
    let o = run(&["--config", path.to_str().unwrap(), "--recipe", "learning", "--dry-run", "--out", "unused"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["recipe"], "learning");
    assert_eq!(v["steps"], 4);
}

#[test]
fn perturbation_and_learning_recipes_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "recipe = \"perturbation\"\nsteps = 4\ngrid = 5\nlattice = { size = 11 }\n");
    let out = dir.path().join("p");
    let o = run(&["--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["drift.csv", "g_grid.csv", "convergence.csv", "certificate.json", "report.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let cfg = write_config(dir.path(), "recipe = \"learning\"\nsteps = 4\ngrid = 5\nlattice = { size = 11 }\n");
    let out = dir.path().join("l");
    let o = run(&["--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("vector_field.csv").exists() && out.join("trajectory_0.csv").exists());
}
