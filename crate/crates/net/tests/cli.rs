use std::fs;
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};
use std::thread;
use std::time::Duration;

use parley_net::load_transcript;

fn parley(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parley"))
        .args(args)
        .output()
        .expect("run parley")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(text: &str, key: &str) -> Option<String> {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .map(str::to_string)
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn offers_table_and_csv() {
    let o = parley(&["offers", "--blocks", "1,1,1,1,1", "--r-min", "1.5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(field(&text, "N").as_deref(), Some("3"));
    assert_eq!(field(&text, "offers").as_deref(), Some("[3, 2, 2]"));

    let o = parley(&["offers", "--blocks", "1,1,1,1,1", "--r-min", "1.5", "--csv"]);
    assert_eq!(stdout(&o), "round,offer\n1,3\n2,2\n3,2\n");
}

#[test]
fn offers_from_config_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "game.cfg", "blocks = 4, 3, 2, 1\ntail = 1/2\nr_min = 5\n");
    let o = parley(&["offers", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // v = 10.5, 6.5, 3.5, 1.5, 0.5: N = 1.
    assert_eq!(field(&stdout(&o), "offers").as_deref(), Some("[6.5]"));
    let o = parley(&["offers", "--config", &cfg, "--r-min", "1"]);
    assert_eq!(field(&stdout(&o), "N").as_deref(), Some("3"));
}

#[test]
fn horizon_errors_are_config_failures() {
    let o = parley(&["horizon", "--blocks", "1,1,1,1", "--r-min", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parley:"));
    let o = parley(&["horizon", "--blocks", "1,1,1,1,1", "--r-min", "1.5"]);
    assert_eq!(field(&stdout(&o), "N").as_deref(), Some("3"));
    assert_eq!(field(&stdout(&o), "R(1, N)").as_deref(), Some("3"));
}

#[test]
fn rubinstein_and_stage_game() {
    let o = parley(&["rubinstein", "--v", "10", "--r-max", "8", "--r-min", "2"]);
    assert_eq!(field(&stdout(&o), "r").as_deref(), Some("5"));

    let base = ["stage-game", "--tau-l", "1", "--kappa-g", "3", "--kappa-l", "1", "--c-r", "1", "--c-d", "0.2"];
    let run = |tau_g: &str, r_f: &str| {
        let mut args = base.to_vec();
        args.extend(["--tau-g", tau_g, "--r-f", r_f, "--v", "10", "--r-max", "8"]);
        field(&stdout(&parley(&args)), "equilibrium").unwrap()
    };
    assert_eq!(run("1.5", "5"), "(V1, A4)");
    assert_eq!(run("1.5", "9"), "(V2, A7)");
}

#[test]
fn mechanism_eval_prints_the_branch() {
    let o = parley(&[
        "mechanism", "eval", "--q", "1/4", "--k", "8", "--k-theta", "8", "--theta-v", "100", "--theta-a", "30",
        "--s0", "200", "--s1", "0",
    ]);
    let text = stdout(&o);
    // s0 = 200 is above p_scale = 170: high offer, accepted.
    assert_eq!(field(&text, "branch").as_deref(), Some("AcceptRound2"));
    assert_eq!(field(&text, "r_f").as_deref(), Some("100"));
    let o = parley(&[
        "mechanism", "eval", "--q", "1/4", "--k", "8", "--k-theta", "8", "--theta-v", "300", "--theta-a", "1",
        "--s0", "0", "--s1", "0",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_bic_reports_both_suites() {
    let o = parley(&["mechanism", "verify-bic", "--points", "9", "--step-bits", "6", "--victim-points", "9"]);
    let text = stdout(&o);
    assert!(text.contains("victim truthfulness"));
    assert!(text.contains("PASS victim truthfulness"));
    // Over-reporting pays off for θ̂V/2 < θA ≤ θ̂V, which the grid hits.
    assert!(text.contains("FAIL attacker truthfulness"));
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn victim_and_attacker_processes_agree() {
    let dir = tempfile::tempdir().unwrap();
    let v = write(
        dir.path(),
        "victim.cfg",
        "role = victim\nq = 1/4\nk = 16\nk_theta = 8\nblocks = 40, 30, 20\ntail = 10\nr_max = 100\nt_e = 1\n",
    );
    let a = write(dir.path(), "attacker.cfg", "q = 1/4\nk = 16\nk_theta = 8\ntheta_hex = 1e\n");
    let transcript = dir.path().join("victim.jsonl");
    let addr = format!("127.0.0.1:{}", free_port());
    let victim = {
        let (v, addr, t) = (v.clone(), addr.clone(), transcript.to_string_lossy().into_owned());
        thread::spawn(move || parley(&["victim", "--config", &v, "--listen", &addr, "--seed", "aa", "--transcript", &t]))
    };
    let mut attacker = None;
    for _ in 0..50 {
        thread::sleep(Duration::from_millis(50));
        let o = parley(&["attacker", "--config", &a, "--connect", &addr, "--seed", "bb"]);
        if o.status.code() != Some(3) {
            attacker = Some(o);
            break;
        }
    }
    let attacker = attacker.expect("victim never listened");
    let victim = victim.join().unwrap();
    assert!(victim.status.success(), "{}", String::from_utf8_lossy(&victim.stderr));
    assert!(attacker.status.success(), "{}", String::from_utf8_lossy(&attacker.stderr));
    let (vt, at) = (stdout(&victim), stdout(&attacker));
    for key in ["r_f", "alpha", "sigma"] {
        assert_eq!(field(&vt, key), field(&at, key), "{key}");
    }
    assert!(field(&vt, "s0").is_some());
    let t = load_transcript(&transcript).unwrap();
    assert_eq!(t.len(), 9);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.cfg", "q = 1/4\nk = 8\n");
    let o = parley(&["attacker", "--config", &bad, "--connect", "127.0.0.1:1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = parley(&["victim", "--config", "/nonexistent/parley.cfg", "--listen", "127.0.0.1:0"]);
    assert_eq!(o.status.code(), Some(1));
    let ok = write(dir.path(), "ok.cfg", "q = 1/4\nk = 8\nk_theta = 8\ntheta_hex = 1\n");
    let o = parley(&["attacker", "--config", &ok, "--connect", "127.0.0.1:1", "--seed", "xyz"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn refused_connection_is_a_transport_failure() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.cfg", "q = 1/4\nk = 8\nk_theta = 8\ntheta_hex = 1\n");
    let port = free_port();
    let o = parley(&["attacker", "--config", &ok, "--connect", &format!("127.0.0.1:{port}")]);
    assert_eq!(o.status.code(), Some(3));
}
