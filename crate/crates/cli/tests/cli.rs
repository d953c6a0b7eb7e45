use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn cra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cra"))
        .args(args)
        .output()
        .unwrap()
}

fn models() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models/two_unit")
}

fn example(name: &str) -> String {
    models().join(name).to_str().unwrap().to_string()
}

fn json_stdout(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn run_analyze(dir: &Path, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let system = example("system.json");
    let mut args = vec!["analyze", "--system", &system, "--out", out];
    args.extend_from_slice(extra);
    cra(&args)
}

#[test]
fn exhaustive_and_gate() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("and.net");
    fs::write(&net, "INPUT a\nINPUT b\nGATE y AND a b\nOUTPUT y\n").unwrap();
    let v = json_stdout(&cra(&[
        "inject",
        "--netlist",
        net.to_str().unwrap(),
        "--node",
        "a",
        "--exhaustive",
    ]));
    assert_eq!(v["derating"], 0.5);
    assert_eq!(v["vectors"], 4);
}

#[test]
fn tree_eval_shared_event() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.json");
    let probs = dir.path().join("probs.json");
    fs::write(
        &tree,
        r#"{"gate":"OR","inputs":[{"gate":"AND","inputs":[{"event":"a"},{"event":"b"}]},
                                  {"gate":"AND","inputs":[{"event":"a"},{"event":"c"}]}]}"#,
    )
    .unwrap();
    fs::write(&probs, r#"{"a":0.5,"b":0.5,"c":0.5}"#).unwrap();
    let (t, p) = (tree.to_str().unwrap(), probs.to_str().unwrap());
    let bdd = json_stdout(&cra(&["tree-eval", "--tree", t, "--probs", p]));
    let brute = json_stdout(&cra(&[
        "tree-eval",
        "--tree",
        t,
        "--probs",
        p,
        "--brute-force",
    ]));
    assert_eq!(bdd["probability"], 0.375);
    assert!((brute["probability"].as_f64().unwrap() - 0.375).abs() < 1e-15);
    assert_eq!(brute["method"], "brute_force");
}

#[test]
fn analyze_without_mc_says_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_analyze(dir.path(), &["--seed", "3"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: Value =
        serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["monte_carlo"]["status"], "skipped");
    assert!(report["monte_carlo"]["reason"]
        .as_str()
        .unwrap()
        .contains("--mc-trials"));
    let mttf = report["system"]["mttf_hours"].as_f64().unwrap();
    assert!((mttf - 1000.0).abs() / 1000.0 < 1e-3, "{mttf}");
    assert_eq!(report["system"]["curve_file"], "curves.csv");
    let csv = fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("t_hours,r_sys,r_sys_perm,r_sys_trans,ratio")
    );
    assert_eq!(csv.lines().count(), 513);
}

#[test]
fn stage_equivalence_with_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let seed = "11";
    assert!(
        run_analyze(dir.path(), &["--seed", seed, "--injection-trials", "3000"])
            .status
            .success()
    );
    let report: Value =
        serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    let system: Value =
        serde_json::from_str(&fs::read_to_string(models().join("system.json")).unwrap()).unwrap();
    for comp in system["hierarchy"]["children"].as_array().unwrap() {
        let id = comp["id"].as_str().unwrap();
        let section = &report["components"][id];
        let th = &comp["thermal"];
        let thermal = json_stdout(&cra(&[
            "thermal",
            "--trace",
            &example(comp["power_trace"].as_str().unwrap()),
            "--rth",
            &th["r_th"].to_string(),
            "--cth",
            &th["c_th"].to_string(),
            "--tamb",
            &th["t_ambient"].to_string(),
            "--tinit",
            &th["t_initial"].to_string(),
        ]));
        assert_eq!(thermal["peak_temp_k"], section["peak_temp_k"], "{id}");
        assert_eq!(
            thermal["steady_state_temp_k"], section["steady_state_temp_k"],
            "{id}"
        );

        let netlist = example(comp["netlist"].as_str().unwrap());
        let workload = comp["ser"]["workload"].as_str().map(example);
        for d in section["deratings"].as_array().unwrap() {
            let node = d["node"].as_str().unwrap();
            let mut args = vec![
                "inject",
                "--netlist",
                &netlist,
                "--node",
                node,
                "--trials",
                "3000",
                "--seed",
                seed,
            ];
            if let Some(w) = &workload {
                args.extend_from_slice(&["--workload", w]);
            }
            let r = json_stdout(&cra(&args));
            for key in ["trials", "errors", "derating", "ci95_half_width"] {
                assert_eq!(r[key], d[key], "{id}/{node}/{key}");
            }
        }
    }
}

fn write_zero_model(dir: &Path) -> PathBuf {
    fs::write(dir.join("idle.csv"), "time_s,power_w\n0,0\n1,0\n2,0\n3,0\n").unwrap();
    fs::write(dir.join("inv.net"), "INPUT a\nGATE y NOT a\nOUTPUT y\n").unwrap();
    let component = |id: &str| {
        format!(
            r#"{{"id":"{id}","kind":"Component",
                "thermal":{{"r_th":1,"c_th":10,"t_ambient":330,"t_initial":330}},
                "aging":{{"a_const":5e7,"j_density":1e6,"n_exp":1,"ea_ev":0.5}},
                "power_trace":"idle.csv","netlist":"inv.net","ser":{{"default_fit":0}}}}"#
        )
    };
    let chains = r#"{"permanent":["PowerToTemperature","TemperatureToFailureRate","FailureRateToReliability"],"transient":["FitToReliability"]}"#;
    let doc = format!(
        r#"{{"name":"idle","time_horizon_hours":20000,"grid_points":64,
            "hierarchy":{{"id":"sys","kind":"System","children":[{},{}]}},
            "adapters":{{"u1":{chains},"u2":{chains}}},
            "success_tree":{{"gate":"OR","inputs":[{{"event":"u1"}},{{"event":"u2"}}]}}}}"#,
        component("u1"),
        component("u2")
    );
    let path = dir.join("system.json");
    fs::write(&path, doc).unwrap();
    path
}

#[test]
fn zero_fit_zero_power_ratio_is_permanent_curve() {
    let dir = tempfile::tempdir().unwrap();
    let system = write_zero_model(dir.path());
    let out_dir = dir.path().join("out");
    // no node has a nonzero FIT, so no seed is needed
    let out = cra(&[
        "analyze",
        "--system",
        system.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(out_dir.join("curves.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(f[3], 1.0, "r_sys_trans: {line}");
        assert_eq!(f[4], f[2], "ratio vs r_sys_perm: {line}");
    }
    let report: Value =
        serde_json::from_slice(&fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["components"]["u1"]["peak_temp_k"], 330.0);
    assert_eq!(report["components"]["u1"]["derated_fit"], 0.0);
    assert_eq!(
        report["components"]["u1"]["transient_mttf_hours"],
        "unbounded"
    );
}

#[test]
fn aborted_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let system = write_zero_model(dir.path());
    fs::write(
        dir.path().join("inv.net"),
        "INPUT a\nGATE y NOT b\nOUTPUT y\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = cra(&[
        "analyze",
        "--system",
        system.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("u1") || err.contains("u2"), "{err}");
    assert!(err.contains("netlist"), "{err}");
    assert!(!out_dir.join("report.json").exists());
    assert!(!out_dir.join("curves.csv").exists());
}

#[test]
fn exit_codes() {
    // unknown flag
    assert_eq!(cra(&["tree-eval", "--bogus"]).status.code(), Some(1));
    // missing file
    assert_eq!(
        cra(&[
            "analyze",
            "--system",
            "/nonexistent/system.json",
            "--out",
            "/tmp/x"
        ])
        .status
        .code(),
        Some(1)
    );
    // stochastic stage without a seed
    let dir = tempfile::tempdir().unwrap();
    let out = run_analyze(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    assert!(!dir.path().join("report.json").exists());
    // bad thermal parameter
    let trace = example("pu1_power.csv");
    let out = cra(&[
        "thermal", "--trace", &trace, "--rth", "-1", "--cth", "1", "--tamb", "300",
    ]);
    assert_eq!(out.status.code(), Some(1));
    // injection needs a seed unless exhaustive
    let net = example("full_adder.net");
    assert_eq!(
        cra(&["inject", "--netlist", &net, "--node", "a", "--trials", "10"])
            .status
            .code(),
        Some(1)
    );
    // help is not an error
    assert_eq!(cra(&["--help"]).status.code(), Some(0));
}

#[test]
fn thermal_csv_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let dest = dir.path().join("temp.csv");
    let trace = example("pu1_power.csv");
    let out = cra(&[
        "thermal",
        "--trace",
        &trace,
        "--rth",
        "2.5",
        "--cth",
        "40",
        "--tamb",
        "298.15",
        "--format",
        "csv",
        "--out",
        dest.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let csv = fs::read_to_string(dest).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("time_s,temp_k"));
    assert!(lines.next().unwrap().starts_with("1,"));
    assert_eq!(csv.lines().count(), 121);
}

#[test]
fn mc_section_reports_agreement() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_analyze(
        dir.path(),
        &["--seed", "5", "--mc-trials", "50000", "--beta", "1"]
    )
    .status
    .success());
    let report: Value =
        serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    let mc = &report["monte_carlo"];
    assert_eq!(mc["status"], "ran");
    assert_eq!(mc["samples"], 50000);
    assert!(mc["fraction_within_3se"].as_f64().unwrap() > 0.9);
    assert_eq!(report["run"]["beta_override"], 1.0);
    assert_eq!(report["system"]["dominance"]["initial"], "transient");
}
