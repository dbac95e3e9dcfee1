use std::path::Path;
use std::process::{Command, Output};

fn sinkhorn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sinkhorn")).args(args).output().unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

const INSTANCE_Z: &str = r#"{"mu":[0.5,0.5],"nu":[0.5,0.5],"logR":{"dense":[[-0.916290731874155,-2.3025850929940455],[null,-0.6931471805599453]]},"meta":{"family":"z"}}"#;

#[test]
fn gen_is_byte_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        let mut v = vec!["gen", "--family", "quadratic", "--seed", "7", "--nx", "50", "--ny", "50", "--dim", "2", "--eps", "0.1", "--out"];
        v.push(Box::leak(out.to_string().into_boxed_str()));
        v
    };
    let (a, b) = (p(d.path(), "a.json"), p(d.path(), "b.json"));
    assert!(sinkhorn(&args(&a)).status.success());
    assert!(sinkhorn(&args(&b)).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn solve_with_certificate_writes_monotone_trace() {
    let d = tempfile::tempdir().unwrap();
    let prob = p(d.path(), "p.json");
    let trace = p(d.path(), "t.csv");
    assert!(sinkhorn(&["gen", "--family", "quadratic", "--seed", "7", "--nx", "50", "--ny", "50", "--dim", "2", "--eps", "0.1", "--out", &prob])
        .status
        .success());
    let out = sinkhorn(&["solve", "--in", &prob, "--iters", "1000", "--tol", "1e-10", "--trace", &trace, "--certify"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(&trace).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "n,kl_rho_nu,descent_rhs,dual,primal_rounded,gap,hilbert,bound_general,bound_exact");
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    let kl: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    for w in kl.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
    // bound columns present from n = 1 and above the entropy
    for r in rows.iter().skip(1) {
        let n: f64 = r[0].parse().unwrap();
        let bound: f64 = r[7].parse().unwrap();
        let v: f64 = r[1].parse().unwrap();
        assert!(n * v <= n * bound + 1e-12);
    }
    let cert: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p(d.path(), "t.cert.json")).unwrap()).unwrap();
    let keys: Vec<&String> = cert.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["dual_lb", "gap", "h_star", "primal_ub"]);
    assert!(cert["gap"].as_f64().unwrap() <= 1e-8);

    let b = sinkhorn(&["bounds", "--in", &prob, "--cert", &p(d.path(), "t.cert.json")]);
    assert!(b.status.success());
    let report: serde_json::Value = serde_json::from_slice(&b.stdout).unwrap();
    assert!(report["c_quadratic"].as_f64().unwrap() >= report["c_general"].as_f64().unwrap());
    assert!(report["c_talagrand"].is_null());
}

#[test]
fn solve_without_certificate_leaves_oracle_columns_empty() {
    let d = tempfile::tempdir().unwrap();
    let prob = p(d.path(), "z.json");
    std::fs::write(&prob, INSTANCE_Z).unwrap();
    let trace = p(d.path(), "t.csv");
    assert!(sinkhorn(&["solve", "--in", &prob, "--iters", "50", "--trace", &trace]).status.success());
    let csv = std::fs::read_to_string(&trace).unwrap();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert!(f[4].is_empty() && f[5].is_empty() && f[6].is_empty() && f[7].is_empty() && f[8].is_empty());
    }
    assert!(!Path::new(&p(d.path(), "t.cert.json")).exists());
}

#[test]
fn check_passes_on_instance_z() {
    let d = tempfile::tempdir().unwrap();
    let prob = p(d.path(), "pz.json");
    std::fs::write(&prob, INSTANCE_Z).unwrap();
    let out = sinkhorn(&["check", "--in", &prob]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(sinkhorn(&["solve"]).status.code(), Some(1));
    assert_eq!(sinkhorn(&["gen", "--family", "random", "--nx", "0", "--out", &p(d.path(), "x.json")]).status.code(), Some(1));
    assert_eq!(sinkhorn(&["solve", "--in", &p(d.path(), "missing.json"), "--trace", &p(d.path(), "t.csv")]).status.code(), Some(2));

    // diagonal support cannot carry these marginals
    let infeasible = p(d.path(), "inf.json");
    std::fs::write(
        &infeasible,
        r#"{"mu":[0.3,0.7],"nu":[0.6,0.4],"logR":{"dense":[[-0.6931471805599453,null],[null,-0.6931471805599453]]},"meta":{}}"#,
    )
    .unwrap();
    let out = sinkhorn(&["solve", "--in", &infeasible, "--iters", "100000", "--guard", "50", "--trace", &p(d.path(), "i.csv")]);
    assert_eq!(out.status.code(), Some(3));
    let out = sinkhorn(&["check", "--in", &infeasible, "--certify-iters", "1000"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invariant violated"));
}
