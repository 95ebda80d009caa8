use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const TWO_PIECE: &str = "\
k = 2
params.beta0 = 1.05
params.beta2 = 1.04
params.gamma = 0.9
params.lambda0 = 0.5
params.beta_tilde = 1.02
piece.1.i = 0
piece.1.j = 2
piece.1.len = 9
piece.1.entropy = 3.4971887376182575e-1
piece.2.i = 15
piece.2.j = 16
piece.2.len = 20
piece.2.entropy = 3.4789373201935758e-1
";

fn porcupine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_porcupine"))
        .args(args)
        .env_remove("PORCUPINE_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = path(dir, name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn one_piece_schedule_succeeds() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "s.kv");
    let o = porcupine(&["schedule", "--k", "1", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("k = 1"));
    assert!(text.contains("t0_met = true"));
}

#[test]
fn zero_pieces_is_a_usage_error() {
    assert_eq!(code(&porcupine(&["schedule", "--k", "0"])), 64);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(code(&porcupine(&["schedule", "--frobnicate"])), 64);
}

#[test]
fn pressure_csv_rows_and_determinism() {
    let dir = TempDir::new().unwrap();
    let s = write(&dir, "s.kv", TWO_PIECE);
    let args = ["pressure", "--schedule", &s, "--t-min", "-30", "--t-max", "2", "--step", "0.05"];
    let a = porcupine(&args);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let csv = stdout(&a);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,P,dP_dt,entropy,chi_average,piece_index");
    assert_eq!(lines.len(), 642);
    assert!(lines[1].ends_with(",2"));
    assert!(lines[641].ends_with(",1"));
    assert_eq!(porcupine(&args).stdout, a.stdout);
}

#[test]
fn one_piece_envelope_is_constant() {
    let dir = TempDir::new().unwrap();
    let s = path(&dir, "s.kv");
    assert_eq!(code(&porcupine(&["schedule", "--k", "1", "--out", &s])), 0);
    let o = porcupine(&["pressure", "--schedule", &s, "--t-min", "-5", "--t-max", "1", "--step", "0.5"]);
    assert_eq!(code(&o), 0);
    let csv = stdout(&o);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",1")));
}

#[test]
fn bad_step_and_bad_schedule() {
    let dir = TempDir::new().unwrap();
    let s = write(&dir, "s.kv", TWO_PIECE);
    let o = porcupine(&["pressure", "--schedule", &s, "--t-min", "-1", "--t-max", "0", "--step", "0"]);
    assert_eq!(code(&o), 64);
    let bad = write(&dir, "bad.kv", "k = 2\npiece.1.i = nope\n");
    let o = porcupine(&["pressure", "--schedule", &bad, "--t-min", "-1", "--t-max", "0", "--step", "0.1"]);
    assert_eq!(code(&o), 65);
    let missing = dir.path().join("absent.kv");
    let o = porcupine(&[
        "pressure",
        "--schedule",
        missing.to_str().unwrap(),
        "--t-min",
        "-1",
        "--t-max",
        "0",
        "--step",
        "0.1",
    ]);
    assert_eq!(code(&o), 65);
}

#[test]
fn malformed_config_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let c = write(&dir, "c.kv", "fiber.nonsense = 1\n");
    assert_eq!(code(&porcupine(&["--config", &c, "fiber-validate"])), 65);
}

#[test]
fn fiber_validate_reports_every_condition() {
    let o = porcupine(&["fiber-validate", "--grid", "2001"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for name in ["F0 ", "F1 ", "F2 ", "F01 ", "F~02 ", "F012.length_condition ", "ITINERARY "] {
        let line = text.lines().find(|l| l.starts_with(name)).expect(name);
        assert!(line.contains(" PASS "), "{line}");
    }
}

#[test]
fn fiber_validate_fails_on_wide_h() {
    let dir = TempDir::new().unwrap();
    let c = write(&dir, "c.kv", "fiber.b = 0.1\n");
    let o = porcupine(&["--config", &c, "fiber-validate", "--grid", "2001"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("F012.intersections FAIL"));
}

#[test]
fn mixing_report_per_piece() {
    let dir = TempDir::new().unwrap();
    let s = write(&dir, "s.kv", TWO_PIECE);
    let o = porcupine(&["--seed", "3", "mixing", "--schedule", &s, "--pairs", "100"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("piece.1.failures = 0"));
    assert!(text.contains("piece.2.failures = 0"));
}

#[test]
fn lyapunov_census_is_seeded() {
    let dir = TempDir::new().unwrap();
    let s = write(&dir, "s.kv", TWO_PIECE);
    let run = |seed: &str, out: &str| {
        let o = porcupine(&[
            "--seed", seed, "lyapunov", "--schedule", &s, "--orbits", "60", "--steps", "500", "--out", out,
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("beta_tilde_hat = "));
        fs::read_to_string(out).unwrap()
    };
    let a = run("5", &path(&dir, "a.csv"));
    let b = run("5", &path(&dir, "b.csv"));
    let c = run("6", &path(&dir, "c.csv"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.lines().next(), Some("orbit_id,exponent,steps,exceptional_flag,template"));
    assert_eq!(a.lines().count(), 61);
}

#[test]
fn transitions_certificate() {
    let dir = TempDir::new().unwrap();
    let s = write(&dir, "s.kv", TWO_PIECE);
    let cert = path(&dir, "cert.kv");
    let csv = path(&dir, "curve.csv");
    let o = porcupine(&["transitions", "--schedule", &s, "--step", "0.05", "--out", &csv, "--certificate", &cert]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&cert).unwrap();
    assert!(text.contains("count = 1"));
    assert!(text.contains("kink.1.passed = true"));
    assert!(Path::new(&csv).exists());
}

#[test]
fn verify_skips_after_bad_params() {
    let dir = TempDir::new().unwrap();
    let c = write(&dir, "c.kv", "params.beta2 = 1.06\n");
    let o = porcupine(&["--config", &c, "verify"]);
    assert_eq!(code(&o), 1);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("CHECK params FAIL"), "{}", lines[0]);
    assert!(lines.len() > 2);
    assert!(lines[1..].iter().all(|l| l.contains(" SKIP ")), "{text}");
}

fn pattern(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter(|l| l.starts_with("CHECK "))
        .map(|l| {
            let mut f = l.split_whitespace().skip(1);
            (f.next().unwrap().to_owned(), f.next().unwrap().to_owned())
        })
        .collect()
}

#[test]
fn verify_pattern_does_not_depend_on_seed() {
    let dir = TempDir::new().unwrap();
    let c = write(&dir, "c.kv", "sampling.n_orbits = 300\nsampling.n_steps = 2000\n");
    let a = porcupine(&["--config", &c, "--seed", "7", "verify", "--quick"]);
    let b = porcupine(&["--config", &c, "--seed", "8", "verify", "--quick"]);
    assert_eq!(code(&a), 0, "{}", stdout(&a));
    assert_eq!(code(&b), 0, "{}", stdout(&b));
    let (pa, pb) = (pattern(&stdout(&a)), pattern(&stdout(&b)));
    assert_eq!(pa.len(), 12);
    assert_eq!(pa, pb);
}
