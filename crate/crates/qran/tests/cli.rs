use std::path::Path;
use std::process::{Command, Output};

fn qran(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qran"))
        .args(args)
        .env_remove("QRAN_ENTROPY")
        .output()
        .expect("spawn qran")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_exit_codes() {
    let scen = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/");
    assert_eq!(
        qran(&["run", "--scenario", "default"]).status.code(),
        Some(0)
    );
    let bad = format!("{scen}n3-misbinding.json");
    assert_eq!(qran(&["run", "--scenario", &bad]).status.code(), Some(2));
    assert_eq!(
        qran(&["run", "--scenario", &bad, "--expect-failure"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(qran(&["run", "--expect-failure"]).status.code(), Some(1));
    let sizes = format!("{scen}size-classes.json");
    assert_eq!(qran(&["run", "--scenario", &sizes]).status.code(), Some(3));
    assert_eq!(
        qran(&["run", "--scenario", "/nonexistent.json"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(qran(&["run", "--format", "yaml"]).status.code(), Some(3));
}

#[test]
fn run_output_deterministic_and_seeded() {
    let a = stdout(&qran(&["run", "--seed", "5"]));
    let b = stdout(&qran(&["run", "--seed", "5", "--threads", "1"]));
    assert_eq!(a, b);
    assert!(a.contains("\"seed\": 5"));
    let md = stdout(&qran(&["run", "--format", "markdown"]));
    assert!(md.contains("## Interface migration coverage"));
}

#[test]
fn kat_command() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/kat");
    let o = qran(&["kat", "--dir", dir]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("all passed"));
    let empty = tempfile::tempdir().unwrap();
    assert_eq!(
        qran(&["kat", "--dir", path(empty.path())]).status.code(),
        Some(3)
    );
}

#[test]
fn ca_lifecycle() {
    let d = tempfile::tempdir().unwrap();
    let ca = d.path().join("ca");
    let leaf = d.path().join("leaf.pem");
    let crl = d.path().join("crl.pem");
    let root = ca.join("root.pem");
    assert_eq!(
        qran(&["ca", "init", "--dir", path(&ca), "--seed", "3"])
            .status
            .code(),
        Some(0)
    );
    let o = qran(&[
        "ca",
        "issue",
        "--dir",
        path(&ca),
        "--subject",
        "CN=o-du-1",
        "--days",
        "30",
        "--out",
        path(&leaf),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let verify = |extra: &[&str]| {
        let mut args = vec![
            "ca",
            "verify",
            "--anchor",
            path(&root),
            "--chain",
            path(&leaf),
        ];
        args.extend_from_slice(extra);
        qran(&args)
    };
    let o = verify(&["--at", "100"]);
    assert_eq!((o.status.code(), stdout(&o).trim()), (Some(0), "OK"));
    let o = verify(&["--at", &(31 * 86400).to_string()]);
    assert_eq!(
        (o.status.code(), stdout(&o).trim()),
        (Some(1), "REJECT EXPIRED")
    );
    let o = qran(&[
        "ca",
        "issue",
        "--dir",
        path(&ca),
        "--subject",
        "CN=x",
        "--days",
        "91",
        "--out",
        path(&leaf),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = qran(&[
        "ca",
        "revoke",
        "--dir",
        path(&ca),
        "--cert",
        path(&leaf),
        "--reason",
        "key-compromise",
        "--at",
        "50",
        "--out",
        path(&crl),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let o = verify(&["--at", "100", "--crl", path(&crl)]);
    assert_eq!(
        (o.status.code(), stdout(&o).trim()),
        (Some(1), "REJECT REVOKED")
    );
}

#[test]
fn token_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let jwks = d.path().join("jwks.json");
    let tok = d.path().join("token");
    let o = qran(&[
        "token",
        "issue",
        "--seed",
        "9",
        "--client",
        "CN=rapp-1",
        "--scope",
        "o-ran-smo:performance-data:read",
        "--aud",
        "smo-pm",
        "--ttl",
        "600",
        "--jwks-out",
        path(&jwks),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    std::fs::write(&tok, stdout(&o)).unwrap();
    let validate = |aud: &str, at: &str| {
        qran(&[
            "token",
            "validate",
            "--token",
            path(&tok),
            "--jwks",
            path(&jwks),
            "--aud",
            aud,
            "--scope",
            "o-ran-smo:performance-data:read",
            "--at",
            at,
        ])
    };
    let o = validate("smo-pm", "10");
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("OK sub=CN=rapp-1"));
    assert_eq!(stdout(&validate("smo-pm", "600")).trim(), "REJECT EXPIRED");
    assert_eq!(
        stdout(&validate("a1", "10")).trim(),
        "REJECT AUDIENCE_MISMATCH"
    );
    let shown = stdout(&qran(&["jwks", "show", "--seed", "9"]));
    assert_eq!(shown.trim(), std::fs::read_to_string(&jwks).unwrap().trim());
}
