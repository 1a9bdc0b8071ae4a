use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_mvsde");

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn mvsde(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("MVSDE_WORKERS").output().unwrap()
}

fn run_in(cfg: &Path, out: &Path) -> Output {
    mvsde(&["--workers", "2", "--out", out.to_str().unwrap(), "run", cfg.to_str().unwrap()])
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_string()
}

fn summary_value(out: &Output, key: &str) -> f64 {
    let s = String::from_utf8_lossy(&out.stdout);
    let token = s
        .split_whitespace()
        .find_map(|t| t.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no `{key}` in `{s}`"));
    token.parse().unwrap()
}

const BASE: &str = "
problem.dim = 1
problem.x0 = 0
problem.diffusion = constant
problem.diffusion.matrix = 1
run.t_end = 1
run.dt = 0.1
run.seed = 5
";

type HeaderCase<'a> = (&'a str, &'a str, &'a [(&'a str, &'a str)]);

#[test]
fn golden_headers() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: &[HeaderCase] = &[
        (
            "task.kind = simulate\nproblem.jump = linear\nproblem.jump.c0 = 1\nproblem.marks = finite\nproblem.marks.values = 1\nproblem.marks.weights = 1\nproblem.marks.gamma = 1\n",
            "simulate",
            &[
                ("paths_eps0.csv", "epsilon,replica,particle,t,x_1,k_1"),
                ("jumps_eps0.csv", "epsilon,replica,particle,time,mark_index,mark_value"),
            ],
        ),
        ("task.kind = limit\n", "limit", &[("limit.csv", "replica,particle,t,x_1,k_1")]),
        ("task.kind = skeleton-ldp\ntask.phi = constant 1\n", "ldp", &[("skeleton.csv", "t,y_1,k_1")]),
        ("task.kind = skeleton-mdp\n", "mdp", &[("skeleton.csv", "t,y_1,k_1")]),
        (
            "task.kind = rate\ntask.event.normal = 1\ntask.event.level = 0.5\ntask.iterations = 100\n",
            "rate",
            &[
                ("rate.csv", "value,residual,feasible,converged,evaluations,iterations,starts,winning_start"),
                ("control_phi.csv", "t,phi_1"),
                ("trace.csv", "iteration,value"),
            ],
        ),
        (
            "task.kind = tail\ntask.event.normal = 1\ntask.event.level = 0.5\nrun.epsilon = 0.5 0.25\nrun.replicas = 200\n",
            "tail",
            &[("tail.csv", "epsilon,speed,hits,trials,p,std_err,scaled_log,used")],
        ),
        (
            "task.kind = converge\nrun.epsilon = 0.2 0.1\nrun.replicas = 20\n",
            "converge",
            &[("convergence.csv", "mode,epsilon,mean_sq_sup,std_err,bound_scale")],
        ),
        (
            "task.kind = check-hypotheses\ntask.samples = 50\n",
            "hyp",
            &[("hypotheses.csv", "hypothesis,pass,worst_violation,samples,witness,note")],
        ),
        ("task.kind = bihari\n", "bihari", &[("bihari.csv", "t,integral_q,bound")]),
    ];
    for (task, name, files) in cases {
        let cfg = write_cfg(tmp.path(), &format!("{name}.cfg"), &format!("{BASE}{task}"));
        let out = tmp.path().join(name);
        let res = run_in(&cfg, &out);
        assert!(res.status.success(), "{name}: {}", String::from_utf8_lossy(&res.stderr));
        for (file, header) in *files {
            assert_eq!(first_line(&out.join(file)), *header, "{name}/{file}");
        }
        let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
        assert!(manifest.contains("# content-hash = sha256:"), "{name}");
        assert!(manifest.contains("task.kind = "), "{name}");
    }
}

#[test]
fn validate_reports_missing_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "a.cfg", &BASE.replace("run.seed = 5", "task.kind = limit"));
    let res = mvsde(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("run.seed"));
}

#[test]
fn validate_rejects_step_not_dividing_horizon() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "a.cfg", &format!("{}task.kind = limit\n", BASE.replace("run.dt = 0.1", "run.dt = 0.3")));
    let res = mvsde(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn validate_rejects_unknown_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "a.cfg", &format!("{BASE}task.kind = limit\ntask.colour = red\n"));
    let res = mvsde(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("task.colour"));
}

#[test]
fn validate_echoes_resolved_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "a.cfg", &format!("{BASE}task.kind = limit\n"));
    let res = mvsde(&["validate", cfg.to_str().unwrap()]);
    assert!(res.status.success());
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.contains("run.seed = 5"));
    assert!(text.contains("problem.domain = whole"));
}

#[test]
fn limit_of_zero_drift_problem_is_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run_in(&configs_dir().join("limit_zero.cfg"), tmp.path());
    assert!(res.status.success());
    let text = fs::read_to_string(tmp.path().join("limit.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 11);
    for row in rows {
        let f: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(&f[3..], &[0.5, -0.25, 0.0, 0.0]);
    }
}

#[test]
fn bihari_linear_matches_exponential() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run_in(&configs_dir().join("bihari_linear.cfg"), tmp.path());
    assert!(res.status.success());
    let text = fs::read_to_string(tmp.path().join("bihari.csv")).unwrap();
    for row in text.lines().skip(1) {
        let f: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert!((f[2] - f[0].exp()).abs() <= 1e-9, "{row}");
    }
}

#[test]
fn gaussian_rate_is_one_half() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run_in(&configs_dir().join("gaussian_rate.cfg"), tmp.path());
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rate = summary_value(&res, "rate");
    assert!((rate - 0.5).abs() <= 1e-3, "{rate}");
}

#[test]
fn infeasible_rate_exits_with_numerical_code() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "problem.dim = 1\nproblem.x0 = 0\nrun.t_end = 1\nrun.dt = 0.1\nrun.seed = 1\n\
                task.kind = rate\ntask.event.normal = 1\ntask.event.level = 1\ntask.iterations = 100\n";
    let cfg = write_cfg(tmp.path(), "a.cfg", text);
    let res = run_in(&cfg, &tmp.path().join("out"));
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stdout));
}

#[test]
fn rerun_from_manifest_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let res = run_in(&configs_dir().join("box_jumps.cfg"), &a);
    assert!(res.status.success());
    let res = mvsde(&["--workers", "1", "--out", b.to_str().unwrap(), "run", a.join("manifest.txt").to_str().unwrap()]);
    assert!(res.status.success());
    for f in ["paths_eps0.csv", "paths_eps1.csv", "jumps_eps0.csv", "jumps_eps1.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
