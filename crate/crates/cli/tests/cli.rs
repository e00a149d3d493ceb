use std::path::Path;
use std::process::Command;

use eit_cli::app::{parse_provenance, regenerate, render, run, sweep, sweep_configs, sweep_seed};
use eit_cli::config::{canonical_json, parse_config, SweepSpec};
use eit_cli::presets;

fn eitcool(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_eitcool")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn config_round_trip_for_every_preset() {
    for p in presets::ALL {
        let c = p.config();
        let json = canonical_json(&c);
        let back = parse_config(&json).unwrap();
        assert_eq!(back, c, "{}", p.name);
        assert_eq!(canonical_json(&back), json);
    }
}

#[test]
fn spectrum_preset_has_dip_at_minus_80() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = eitcool(&["run", "--preset", "fig3-s1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("fig3-s1.csv"));
    let text = read(&dir.path().join("fig3-s1.csv"));
    assert!(text.starts_with("# eitcool "));
    assert!(text.contains("# config_sha256: "));
    assert!(text.contains("# seed: 0"));
    let rows: Vec<(f64, f64)> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("delta_p"))
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    let min = rows.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert_eq!(min.0, -80.0);
    assert_eq!(min.1, 0.0);
}

#[test]
fn cooling_map_preset_cools_on_the_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let c = presets::find("fig4a").unwrap().config();
    let (r, _) = run(&c, dir.path(), 4).unwrap();
    let text = &r.files[0].1;
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body.len(), 42);
    for (i, row) in body[1..].iter().enumerate() {
        let cell = row.split(',').nth(i + 1).unwrap();
        let n: f64 = cell.parse().unwrap_or_else(|_| panic!("diagonal cell {i} is {cell}"));
        assert!(n > 0.0 && n < 0.1, "{n}");
    }
}

#[test]
fn thermometry_rerun_is_identical() {
    let mut c = presets::find("thermometry-pgc").unwrap().config();
    c.params.thermometry.as_mut().unwrap().trials = 200;
    let a = render(&c, 1).unwrap();
    let b = render(&c, 1).unwrap();
    assert_eq!(a.files, b.files);
    assert!(a.files[0].1.contains("# seed: 7"));
}

#[test]
fn monte_carlo_scenarios_ignore_worker_count() {
    for name in ["thermometry-pgc", "invert-pgc", "fit-fano-s1"] {
        let mut c = presets::find(name).unwrap().config();
        if let Some(t) = c.params.thermometry.as_mut() {
            t.trials = 2000;
        }
        if let Some(i) = c.params.inversion.as_mut() {
            i.trials = 1000;
        }
        let one = render(&c, 1).unwrap();
        let eight = render(&c, 8).unwrap();
        assert_eq!(one.files, eight.files, "{name}");
    }
}

#[test]
fn sweep_is_worker_independent_and_matches_run() {
    let base = presets::find("fig5a").unwrap().config();
    let spec = base.sweep.clone().unwrap();
    let d1 = tempfile::tempdir().unwrap();
    let d8 = tempfile::tempdir().unwrap();
    let s1 = sweep(&base, &spec, d1.path(), 1).unwrap();
    let s8 = sweep(&base, &spec, d8.path(), 8).unwrap();
    assert_eq!(s1.index, s8.index);
    for (a, b) in s1.paths.iter().zip(&s8.paths) {
        assert_eq!(read(a), read(b));
    }
    // A single-value sweep reproduces `run` with the same value.
    let single = SweepSpec {
        axis: "params.lambda.s_c".into(),
        values: vec![2.0],
    };
    let d = tempfile::tempdir().unwrap();
    let s = sweep(&base, &single, d.path(), 2).unwrap();
    let mut c = base.clone();
    c.sweep = None;
    c.params.lambda.as_mut().unwrap().s_c = Some(2.0);
    let r = render(&c, 1).unwrap();
    assert_eq!(s.entries[0].files, r.files);
    assert_eq!(sweep_seed(9, 0), 9);
    assert_ne!(sweep_seed(9, 1), sweep_seed(9, 2));
}

#[test]
fn sweep_rejects_unknown_axis() {
    let base = presets::find("fig5a").unwrap().config();
    let bad = SweepSpec {
        axis: "params.lambda.omega_c_mhz".into(),
        values: vec![1.0],
    };
    let err = sweep_configs(&base, &bad).err().unwrap();
    assert_eq!(err.key, "params.lambda.omega_c_mhz");
    let (code, _, stderr) = eitcool(&["sweep", "--preset", "fig5a", "--axis", "params.nope", "--values", "1,2"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("params.nope"), "{stderr}");
}

#[test]
fn artifacts_regenerate_from_their_header() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = presets::find("fit-fano-s1").unwrap().config();
    c.seed = 123;
    let (_, paths) = run(&c, dir.path(), 2).unwrap();
    for p in &paths {
        let text = read(p);
        assert_eq!(parse_provenance(&text).unwrap(), c);
        regenerate(p, dir.path(), true, 3).unwrap();
    }
    // Tampering with the recorded config is detected.
    let text = read(&paths[0]).replacen("\"seed\":123", "\"seed\":124", 1);
    assert!(parse_provenance(&text).is_err());
    let other = dir.path().join("regen");
    let written = regenerate(&paths[0], &other, false, 1).unwrap();
    assert_eq!(read(&written[0]), read(&paths[0]));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _, stderr) = eitcool(&["run", "--preset", "fig3-s1", "--set", "params.lambda.s_p=-2", "--out", out]);
    assert_eq!(code, 2);
    assert!(stderr.contains("params.lambda.s_p"), "{stderr}");
    let (code, _, stderr) = eitcool(&["run", "--preset", "fig3-s1", "--set", "params.scan.pts=3", "--out", out]);
    assert_eq!(code, 2);
    assert!(stderr.contains("pts"), "{stderr}");
    let (code, _, _) = eitcool(&["run", "--preset", "no-such-preset"]);
    assert_eq!(code, 2);
    let (code, _, _) = eitcool(&["run", "--config", "/nonexistent/config.json"]);
    assert_eq!(code, 2);
    let (code, _, stderr) = eitcool(&[
        "run",
        "--preset",
        "invert-pgc",
        "--set",
        "params.inversion.t_max_uk=12",
        "--set",
        "params.inversion.trials=200",
        "--set",
        "params.thermometry.trials=500",
        "--out",
        out,
    ]);
    assert_eq!(code, 3, "{stderr}");
    assert!(stderr.contains("edge"), "{stderr}");
    let (code, stdout, _) = eitcool(&["presets"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("fig4a") && stdout.contains("cooling-map"));
}

#[test]
fn config_file_with_comments_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    std::fs::write(
        &cfg,
        "# cooling curve\n{\n  \"scenario\": \"fit-exp\",\n  # inline data in ms and uK\n  \"params\": { \"fit\": { \"points\": [[0, 14.7], [1, 11.3661], [2, 9.2952], [4, 7.21], [8, 6.095]] } }\n}\n",
    )
    .unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, stdout, stderr) = eitcool(&["run", "--config", cfg.to_str().unwrap(), "--set", "output_path=fit", "--seed", "4", "--out", out]);
    assert_eq!(code, 0, "{stderr}");
    let tau: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("tau_ms = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((tau - 2.1).abs() < 1e-3, "{stdout}");
    let text = read(&dir.path().join("fit.json"));
    assert!(text.contains("# seed: 4"));
    let body: String = text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["parameters"][2]["name"], "tau_cool");
    assert_eq!(v["dof"], 2);
}
