use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn gridpass(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_gridpass"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut pipe = child.stdin.take().unwrap();
    if let Some(s) = stdin {
        pipe.write_all(s.as_bytes()).unwrap();
    }
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn store_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("users.db");

    assert_eq!(code(&gridpass(&["init-db", "--store", s(&db)], None)), 0);
    assert_eq!(code(&gridpass(&["init-db", "--store", s(&db)], None)), 1, "refuses to clobber");

    let add = |pw: &str| gridpass(&["add-user", "--store", s(&db), "--password-stdin"], Some(&format!("{pw}\n")));
    assert_eq!(code(&add("Lagos(2006)")), 0);
    assert_eq!(code(&add("abc")), 0);
    assert_eq!(code(&add("abc")), 1, "duplicate");
    assert_eq!(code(&add("has space")), 1);
    assert_eq!(code(&add("tab\u{e9}")), 1, "outside charset");

    let text = std::fs::read_to_string(&db).unwrap();
    assert!(text.starts_with("format-version: 1\n"));
    let body: Vec<&str> = text.split("---\n").nth(1).unwrap().lines().collect();
    assert_eq!(body, ["Lagos(2006)", "abc"]);

    let list = gridpass(&["list-users", "--store", s(&db), "--json"], None);
    assert_eq!(code(&list), 0);
    assert!(!stdout(&list).contains("Lagos(2006)"), "passwords are masked");

    let rm = gridpass(&["remove-user", "--store", s(&db), "--password-stdin"], Some("abc\n"));
    assert_eq!(code(&rm), 0);
    let rm = gridpass(&["remove-user", "--store", s(&db), "--password-stdin"], Some("abc\n"));
    assert_eq!(code(&rm), 1);
}

#[test]
fn username_scoped_store() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("users.db");
    let init = gridpass(&["init-db", "--store", s(&db), "--mode", "username-scoped"], None);
    assert_eq!(code(&init), 0);
    let add = |user: &str, pw: &str| {
        gridpass(
            &["add-user", "--store", s(&db), "--username", user, "--password-stdin"],
            Some(&format!("{pw}\n")),
        )
    };
    assert_eq!(code(&add("alice", "pw1")), 0);
    assert_eq!(code(&add("alice", "pw2")), 1, "duplicate username");
    let list = gridpass(&["list-users", "--store", s(&db)], None);
    assert!(stdout(&list).contains("alice"));
    let rm = gridpass(&["remove-user", "--store", s(&db), "--username", "alice"], None);
    assert_eq!(code(&rm), 0);
}

#[test]
fn missing_store_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("absent.db");
    let out = gridpass(&["list-users", "--store", s(&db)], None);
    assert_eq!(code(&out), 2);
}

#[test]
fn demo_grid_fixture() {
    let out = gridpass(&["demo-grid", "--fixture", "fig2", "--encode", "Lagos(2006)"], None);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).trim_end().ends_with("27318081174"));

    let a = stdout(&gridpass(&["demo-grid", "--seed", "9", "--json"], None));
    let b = stdout(&gridpass(&["demo-grid", "--seed", "9", "--json"], None));
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["frequencies"], serde_json::json!([8, 8, 8, 8, 8, 8, 8, 8, 8, 8]));
}

#[test]
fn crosscheck_exit_codes() {
    let ok = gridpass(&["crosscheck", "--trials", "500"], None);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let broken = gridpass(&["crosscheck", "--trials", "2000", "--broken-tiebreak"], None);
    assert_eq!(code(&broken), 3);
}

#[test]
fn simulate_attack_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rows.csv");
    let out = gridpass(
        &["simulate-attack", "--k", "3", "--trials", "200", "--password", "Lagos(2006)", "--csv", s(&csv)],
        None,
    );
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,mean_survivors,closed_form,stderr"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn usage_errors_exit_nonzero() {
    let out = gridpass(&["simulate-attack", "--password", "x", "--random-length", "4"], None);
    assert_eq!(code(&out), 1);
    let out = gridpass(&["demo-grid", "--charset", "nope"], None);
    assert_eq!(code(&out), 1);
}
