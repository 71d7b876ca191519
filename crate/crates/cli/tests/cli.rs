use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn tdlimit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdlimit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = tdlimit(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

/// Everything after the `#` config line.
fn body(text: &str) -> &str {
    assert!(text.starts_with("# {"));
    &text[text.find('\n').unwrap() + 1..]
}

fn rows(text: &str) -> Vec<Vec<String>> {
    body(text)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

struct Dir(TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }
    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
    fn arg(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }
}

const PD_SARSA: [&str; 10] = [
    "--game", "pd", "--learner", "sarsa", "--alpha", "0.1", "--beta", "5", "--gamma", "0.45",
];

fn with<'a>(base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    base.iter().chain(extra).copied().collect()
}

#[test]
fn every_output_replays_bitwise_from_its_header() {
    let d = Dir::new();
    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("traj", vec!["--steps", "40", "--x0", "0.2,0.7,0.4,0.9"]),
        ("scan", vec!["--axis", "gamma", "--values", "0.3,0.5", "--transient", "20", "--record", "5"]),
        ("lyap", vec!["--steps", "30", "--transient", "10"]),
        ("validate", vec!["--ks", "50,500", "--seed", "3", "--seeds", "2"]),
    ];
    for (cmd, extra) in cases {
        let first = d.arg(&format!("{cmd}.csv"));
        let second = d.arg(&format!("{cmd}-again.csv"));
        let mut args = vec![cmd];
        args.extend(with(&PD_SARSA, &extra));
        args.extend(["--out", &first]);
        ok(&args);
        ok(&[cmd, "--config", &first, "--out", &second]);
        assert_eq!(read(Path::new(&first)), read(Path::new(&second)), "{cmd}");
    }
}

#[test]
fn header_is_the_full_resolved_config() {
    let out = ok(&with(&["traj"], &with(&PD_SARSA, &["--steps", "0"])));
    let text = String::from_utf8(out.stdout).unwrap();
    let header: serde_json::Value = serde_json::from_str(&text.lines().next().unwrap()[2..]).unwrap();
    assert_eq!(header["game"], "prisoners-dilemma");
    assert_eq!(header["alpha"], serde_json::json!([0.1, 0.1]));
    assert_eq!(header["x0"].as_array().unwrap().len(), 8);
    assert_eq!(header["epsilon"], 1e-6);
}

#[test]
fn zero_steps_gives_the_initial_row_only() {
    let out = ok(&with(&["traj"], &with(&PD_SARSA, &["--steps", "0"])));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows = rows(&text);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "0");
    assert_eq!(rows[0][1..9], ["0.5"; 8]);
}

#[test]
fn traj_columns_and_sidecar() {
    let d = Dir::new();
    let out = d.arg("q.csv");
    ok(&[
        "traj", "--game", "mp", "--learner", "q", "--alpha", "0.05", "--beta", "5", "--gamma", "0.1",
        "--x0", "0.2,0.7,0.4,0.9", "--out", &out,
    ]);
    let text = read(Path::new(&out));
    let cols = body(&text).lines().next().unwrap();
    assert_eq!(
        cols,
        "t,X_0_0_0,X_0_0_1,X_0_1_0,X_0_1_1,X_1_0_0,X_1_0_1,X_1_1_0,X_1_1_1,reward_0,reward_1"
    );
    let meta = read(&d.path("q.meta.json"));
    assert_eq!(meta.lines().count(), 1);
    let meta: serde_json::Value = serde_json::from_str(&meta).unwrap();
    let at = meta["converged_at"].as_u64().expect("converges");
    assert_eq!(meta["epsilon"], 1e-6);
    assert_eq!(rows(&text).len() as u64, at + 1);
}

#[test]
fn actor_critic_depends_on_alpha_times_beta_only() {
    let run = |alpha: &str, beta: &str| {
        let out = ok(&[
            "traj", "--game", "mp", "--learner", "ac", "--alpha", alpha, "--beta", beta, "--gamma",
            "0.5", "--x0", "0.2,0.7,0.4,0.9", "--steps", "200",
        ]);
        String::from_utf8(out.stdout).unwrap()
    };
    let (a, b) = (run("0.8", "5"), run("0.08", "50"));
    assert_ne!(a.lines().next(), b.lines().next());
    assert_eq!(body(&a), body(&b));
}

#[test]
fn single_value_scan_matches_traj_and_lyap() {
    let base = [
        "--game", "mp", "--learner", "sarsa", "--alpha", "0.05", "--beta", "25", "--gamma", "0.75",
        "--x0", "0.2,0.7,0.4,0.9",
    ];
    let scan = ok(&with(
        &["scan"],
        &with(&base, &["--axis", "gamma", "--values", "0.75", "--transient", "60", "--record", "25"]),
    ));
    let traj = ok(&with(&["traj"], &with(&base, &["--steps", "84", "--epsilon", "1e-300"])));
    let lyap = ok(&with(&["lyap"], &with(&base, &["--steps", "25", "--transient", "60"])));
    let scan = rows(std::str::from_utf8(&scan.stdout).unwrap());
    let traj = rows(std::str::from_utf8(&traj.stdout).unwrap());
    let lyap = rows(std::str::from_utf8(&lyap.stdout).unwrap());
    assert_eq!(scan.len(), 25);
    assert_eq!(traj.len(), 85);
    for (k, row) in scan.iter().enumerate() {
        assert_eq!(row[0], "0.75");
        assert_eq!(row[1], (60 + k).to_string());
        assert_eq!(row[1..10], traj[60 + k][0..9]);
        assert_eq!(row[10], lyap[0][0]);
        assert_eq!(row[11], "");
    }
}

#[test]
fn scan_is_ordered_and_reports_failed_values() {
    let out = ok(&with(
        &["scan"],
        &with(&PD_SARSA, &["--axis", "alpha", "--values", "0.5,1.5,0.2", "--transient", "5", "--record", "3"]),
    ));
    let rows = rows(std::str::from_utf8(&out.stdout).unwrap());
    let params: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(params, ["0.5", "0.5", "0.5", "1.5", "0.2", "0.2", "0.2"]);
    let failed = &rows[3];
    assert!(failed[1..11].iter().all(String::is_empty));
    assert!(failed[11].contains("learning rate") || failed[11].contains("alpha"), "{failed:?}");
}

#[test]
fn scan_output_does_not_depend_on_thread_count() {
    let run = |jobs: &str| {
        ok(&with(
            &["scan", "--jobs", jobs],
            &with(&PD_SARSA, &["--axis", "gamma", "--values", "0.1:0.9:0.1", "--transient", "50", "--record", "10"]),
        ))
        .stdout
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn range_values_are_resolved_in_the_header() {
    let out = ok(&with(
        &["scan"],
        &with(&PD_SARSA, &["--axis", "beta", "--values", "1:3:1", "--transient", "1", "--record", "1"]),
    ));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().next().unwrap().contains(r#""values":[1.0,2.0,3.0]"#));
}

#[test]
fn validate_is_reproducible_per_seed() {
    let run = |seed: &str| {
        ok(&with(&["validate"], &with(&PD_SARSA, &["--ks", "100,1000", "--seed", seed, "--seeds", "3"]))).stdout
    };
    let a = String::from_utf8(run("7")).unwrap();
    assert_eq!(a, String::from_utf8(run("7")).unwrap());
    assert_ne!(body(&a), body(&String::from_utf8(run("8")).unwrap()));
    assert_eq!(body(&a).lines().next().unwrap(), "k,max_deviation,tv_distance,slope");
}

const SINGLE_ACTION_GAME: &str = r#"{
  "n_agents": 2, "n_states": 2, "n_actions": 1,
  "transitions": [[[[0.0, 1.0]]], [[[1.0, 0.0]]]],
  "rewards": [
    [[[[1.0, 2.0]]], [[[0.5, -1.0]]]],
    [[[[0.0, 3.0]]], [[[2.0, 1.0]]]]
  ]
}"#;

#[test]
fn single_action_game_has_zero_sampling_deviation() {
    let d = Dir::new();
    std::fs::write(d.path("one.json"), SINGLE_ACTION_GAME).unwrap();
    let out = ok(&[
        "validate", "--game", &d.arg("one.json"), "--learner", "sarsa", "--alpha", "0.1", "--beta",
        "1", "--gamma", "0.6", "--ks", "10,100,1000", "--seeds", "2",
    ]);
    let rows = rows(std::str::from_utf8(&out.stdout).unwrap());
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert_eq!(row[1].parse::<f64>().unwrap(), 0.0, "{row:?}");
    }
}

#[test]
fn exported_game_behaves_like_the_builtin() {
    let d = Dir::new();
    let file = d.arg("mp.json");
    ok(&["export-game", "--game", "matching-pennies", "--out", &file]);
    let run = |game: &str| {
        let out = ok(&[
            "traj", "--game", game, "--learner", "q", "--alpha", "0.05", "--beta", "5", "--gamma",
            "0.1", "--x0", "0.2,0.7,0.4,0.9", "--steps", "30",
        ]);
        String::from_utf8(out.stdout).unwrap()
    };
    let (a, b) = (run("mp"), run(&file));
    assert!(b.lines().next().unwrap().contains(&*file.replace('\\', "\\\\")));
    assert_eq!(body(&a), body(&b));
    let again = d.arg("again.json");
    ok(&["export-game", "--game", &file, "--out", &again]);
    assert_eq!(read(Path::new(&file)), read(Path::new(&again)));
}

#[test]
fn grid_has_one_row_per_state_and_cell() {
    let d = Dir::new();
    let out = d.arg("g.csv");
    ok(&with(&["traj"], &with(&PD_SARSA, &["--steps", "1", "--grid", "--out", &out])));
    let grid = read(&d.path("g.grid.csv"));
    let rows = rows(&grid);
    assert_eq!(rows.len(), 2 * 12 * 12);
    assert_eq!(body(&grid).lines().next().unwrap(), "state,x_0,x_1,td_0,td_1,dx_0,dx_1");
    let out4 = d.arg("g4.csv");
    ok(&with(&["traj"], &with(&PD_SARSA, &["--steps", "1", "--grid", "4", "--out", &out4])));
    assert_eq!(rows_len(&d.path("g4.grid.csv")), 2 * 4 * 4);
}

fn rows_len(path: &Path) -> usize {
    rows(&read(path)).len()
}

#[test]
fn grid_td_does_not_depend_on_alpha() {
    let d = Dir::new();
    let grid = |alpha: &str, name: &str| {
        let out = d.arg(name);
        ok(&[
            "traj", "--game", "mp", "--learner", "ac", "--alpha", alpha, "--beta", "5", "--gamma",
            "0.5", "--steps", "0", "--grid", "5", "--out", &out,
        ]);
        rows(&read(&d.path(&name.replace(".csv", ".grid.csv"))))
    };
    let (a, b) = (grid("0.1", "a.csv"), grid("0.6", "b.csv"));
    for (ra, rb) in a.iter().zip(&b) {
        assert_eq!(ra[..5], rb[..5]);
        assert_ne!(ra[5..], rb[5..]);
    }
}

#[test]
fn configuration_errors_exit_with_two() {
    let d = Dir::new();
    let cases: Vec<Vec<String>> = vec![
        with(&["traj"], &["--game", "pd", "--learner", "q", "--alpha", "1.5", "--beta", "5", "--gamma", "0.4"]),
        with(&["traj"], &["--game", "nowhere.json", "--learner", "q", "--alpha", "0.1", "--beta", "5", "--gamma", "0.4"]),
        with(&["traj"], &with(&PD_SARSA, &["--x0", "0.5,0.5,0.5"])),
        with(&["traj"], &with(&PD_SARSA, &["--x0", "0.7,0.7,0.5,0.5,0.5,0.5,0.5,0.5"])),
        with(&["lyap"], &with(&PD_SARSA, &["--steps", "0"])),
        with(&["scan"], &PD_SARSA),
        with(&["traj", "--learner", "td"], &["--game", "pd"]),
        with(&["traj", "--config", "missing.csv"], &[]),
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    for args in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = tdlimit(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }

    let file = d.arg("t.csv");
    ok(&with(&["traj"], &with(&PD_SARSA, &["--steps", "1", "--out", &file])));
    let out = tdlimit(&["lyap", "--config", &file]);
    assert_eq!(out.status.code(), Some(2));
    let out = tdlimit(&["traj", "--config", &file, "--alpha", "0.2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn boundary_profiles_exit_with_three() {
    let out = tdlimit(&with(&["traj"], &with(&PD_SARSA, &["--x0", "1,0.5,0.5,0.5"])));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("boundary"));
    let out = tdlimit(&with(&["lyap"], &with(&PD_SARSA, &["--x0", "1,0.5,0.5,0.5", "--transient", "0"])));
    assert_eq!(out.status.code(), Some(3));
}
