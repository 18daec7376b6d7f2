use std::fs;
use std::process::{Command, Output};

fn evbocs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evbocs")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn generate_then_route() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    let p = path.to_str().unwrap();
    let gen = evbocs(&["generate", "--n", "6", "--m", "3", "--instance-seed", "4", "-o", p]);
    assert!(gen.status.success());
    assert!(fs::read_to_string(&path).unwrap().contains("\"cost\""));

    let route = evbocs(&["route", "--instance", p, "--stations", "101", "--sweeps", "200"]);
    assert!(route.status.success(), "{}", String::from_utf8_lossy(&route.stderr));
    let text = stdout(&route);
    assert!(text.starts_with("stations\t101\n"));
    let field = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(&format!("{key}\t"))).unwrap();
        line.split('\t').nth(1).unwrap().parse().unwrap()
    };
    assert_eq!(field("y"), field("a") + field("b"));
    assert!(text.contains("step\tfrom\tto"));

    // Same seed, same output.
    let again = evbocs(&["route", "--instance", p, "--stations", "101", "--sweeps", "200"]);
    assert_eq!(route.stdout, again.stdout);
}

#[test]
fn bad_flag_exits_nonzero_with_one_line() {
    let out = evbocs(&["route", "--no-such-flag"]);
    assert!(!out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stderr).trim_end().lines().count(), 1);

    let out = evbocs(&["route", "--n", "5", "--m", "2", "--stations", "111"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn report_recomputes_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let common = [
        "--n", "5", "--m", "3", "--n-search", "4", "--n-init", "3", "--sweeps", "100", "--seeds", "0,1,2", "--out", d,
    ];
    let run = evbocs(&[&["baseline"][..], &common].concat());
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let written = fs::read_to_string(dir.path().join("random_summary.tsv")).unwrap();
    assert!(stdout(&run).starts_with(&written));

    let report = evbocs(&["report", d, "--method", "random"]);
    assert!(report.status.success());
    assert_eq!(stdout(&report), written);
}
