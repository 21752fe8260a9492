use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn ff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ff"))
        .args(args)
        .env_remove("FF_SEED")
        .output()
        .expect("spawn ff")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad JSON ({e}); stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn ok(args: &[&str]) -> Value {
    let out = ff(args);
    assert_eq!(
        code(&out),
        0,
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    json(&out)
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("ff-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn hartke_gap_alpha_3_has_1458_terminals() {
    let inst = ok(&["generate", "hartke-gap", "--alpha", "3"]);
    assert_eq!(inst["terminals"].as_array().unwrap().len(), 1458);
}

#[test]
fn generate_is_byte_stable() {
    let a = ff(&[
        "generate",
        "gap-instance",
        "--k",
        "2",
        "--D",
        "2",
        "--phases",
        "2",
    ]);
    let b = ff(&[
        "generate",
        "gap-instance",
        "--k",
        "2",
        "--D",
        "2",
        "--phases",
        "2",
    ]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stderr, b.stderr);
    let fig4 = ok(&["generate", "fig4-fixture"]);
    assert_eq!(fig4["edges"].as_array().unwrap().len(), 6);
}

#[test]
fn oversized_generation_exits_3() {
    let out = ff(&[
        "generate",
        "gap-instance",
        "--k",
        "2",
        "--D",
        "2",
        "--phases",
        "2",
        "--fanout",
        "full",
    ]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("cap"));
}

#[test]
fn bad_input_exits_1() {
    assert_eq!(code(&ff(&["solve", "/no/such/instance.json"])), 1);
    assert_eq!(
        code(&ff(&["round", "fig4", "--algo", "half", "--eta", "banana"])),
        1
    );
    assert_ne!(code(&ff(&["solve"])), 0);
}

#[test]
fn failed_certification_exits_2() {
    let out = ff(&[
        "certify",
        "gap-instance",
        "--k",
        "2",
        "--D",
        "2",
        "--phases",
        "2",
        "--fanout",
        "compact",
        "--opt",
    ]);
    assert_eq!(code(&out), 2);
    let report = json(&out);
    assert_eq!(report["result"]["pass"], false);
}

#[test]
fn solve_path3_lp1() {
    let r = ok(&["solve", "path3", "--lp", "lp1"]);
    assert_eq!(r["result"]["objective"], "2/1");
}

#[test]
fn solve_fig4_lp1_has_fractional_optimal_vertex() {
    let r = ok(&["solve", "fig4", "--lp", "lp1", "--enumerate-vertices", "10"]);
    let e = &r["result"]["enumeration"];
    assert!(e["non_integral"].as_u64().unwrap() >= 1);
    assert!(e["vertices"]
        .as_array()
        .unwrap()
        .iter()
        .any(|v| v["integral"] == false));
}

#[test]
fn solve_fig4_hartke_is_integral() {
    let r = ok(&["solve", "fig4", "--lp", "hartke"]);
    assert_eq!(r["result"]["integral"], true);
    assert_eq!(r["result"]["objective"], "4/1");
}

#[test]
fn gap_fig4() {
    let h = ok(&["gap", "fig4", "--lp", "hartke"]);
    assert_eq!(h["result"]["gap"], "1/1");
    let l = ok(&["gap", "fig4", "--lp", "lp1"]);
    assert_eq!(l["result"]["opt"], 4);
    assert_eq!(l["result"]["lp_value"], "4/1");
}

#[test]
fn gap_basic_gadget_with_forbidden_layer() {
    let r = ok(&[
        "gap",
        "basic-gadget",
        "--lp",
        "hartke",
        "--forbid-layers",
        "1",
    ]);
    assert_eq!(r["result"]["gap"], "2/3");
}

#[test]
fn round_one_and_one_half_exact() {
    let r = ok(&["round", "one-and-one:2", "--algo", "half", "--exact"]);
    assert_eq!(r["result"]["min_ratio"]["exact"], "5/6");
    assert_eq!(r["result"]["method"], "exact_enumeration");
}

#[test]
fn round_gap_fixture_independent_near_exact() {
    let exact = ok(&[
        "round",
        "gap-fixture",
        "--algo",
        "independent",
        "--x",
        "half",
        "--exact",
    ]);
    assert_eq!(exact["result"]["terminals"]["mean_exact"], "3/4");
    let mc = ok(&[
        "round",
        "gap-fixture",
        "--algo",
        "independent",
        "--x",
        "half",
        "--trials",
        "100000",
        "--seed",
        "11",
    ]);
    let t = &mc["result"]["terminals"];
    let (mean, se) = (t["mean"].as_f64().unwrap(), t["stderr"].as_f64().unwrap());
    assert!(
        (mean - 0.75).abs() <= 4.0 * se + 1e-12,
        "mean {mean} se {se}"
    );
}

#[test]
fn round_twophase_reports_baseline_comparison() {
    let r = ok(&[
        "round",
        "gap-fixture",
        "--algo",
        "twophase",
        "--trials",
        "5000",
        "--seed",
        "5",
        "--baseline",
    ]);
    let res = &r["result"];
    assert_eq!(res["ci99_disjoint"], true);
    assert_eq!(res["improves_on_baseline"], true);
    assert!(res["baseline"]["terminals"]["ci99"].is_array());
}

#[test]
fn round_outputs_are_byte_stable_across_jobs() {
    let run = |jobs: &str| {
        let out = scratch("round.json");
        let csv = scratch("round.csv");
        let o = ff(&[
            "--jobs",
            jobs,
            "-o",
            out.to_str().unwrap(),
            "round",
            "gap-fixture",
            "--algo",
            "twophase",
            "--trials",
            "3000",
            "--seed",
            "42",
            "--csv",
            csv.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        (std::fs::read(out).unwrap(), std::fs::read(csv).unwrap())
    };
    let a = run("1");
    let b = run("4");
    assert_eq!(a, b);
    let csv = String::from_utf8(a.1).unwrap();
    assert!(csv.starts_with("vertex,y,p_saved,stderr,ratio\n"));
}

#[test]
fn seed_comes_from_env() {
    let with_env = Command::new(env!("CARGO_BIN_EXE_ff"))
        .args([
            "round",
            "fig4",
            "--algo",
            "independent",
            "--x",
            "half",
            "--trials",
            "500",
        ])
        .env("FF_SEED", "99")
        .output()
        .unwrap();
    let flag = ff(&[
        "round",
        "fig4",
        "--algo",
        "independent",
        "--x",
        "half",
        "--trials",
        "500",
        "--seed",
        "99",
    ]);
    assert_eq!(with_env.stdout, flag.stdout);
}

#[test]
fn reports_embed_config_version_and_checksum() {
    let r = ok(&["solve", "fig4", "--lp", "hartke"]);
    assert_eq!(r["tool"], "ff");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["config"]["solve"]["lp"], "hartke");
    assert_eq!(r["inputs"]["checksum"].as_str().unwrap().len(), 64);
}

#[test]
fn certify_good_gadget_m1_k2_d4() {
    let r = ok(&["certify", "good-gadget", "--M", "1", "--k", "2", "--D", "4"]);
    assert_eq!(r["result"]["pass"], true);
    let text = r.to_string();
    assert!(text.contains("witness"), "no risky_min witness in {text}");
}

#[test]
fn certify_hartke_gap_alpha_3() {
    let r = ok(&["certify", "hartke-gap", "--alpha", "3"]);
    assert_eq!(r["result"]["pass"], true);
}

#[test]
fn export_lp_is_byte_stable() {
    let path = scratch("fig4.lp");
    ok(&[
        "solve",
        "fig4",
        "--lp",
        "lp1",
        "--export-lp",
        path.to_str().unwrap(),
    ]);
    let first = std::fs::read(&path).unwrap();
    ok(&[
        "solve",
        "fig4",
        "--lp",
        "lp1",
        "--export-lp",
        path.to_str().unwrap(),
    ]);
    assert_eq!(first, std::fs::read(&path).unwrap());
    assert!(String::from_utf8(first).unwrap().starts_with("vars "));
}
