use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_graybox"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().skip(1).map(str::to_owned).collect()
}

fn provenance_count(path: &Path, label: &str) -> usize {
    rows(path).iter().filter(|r| r.ends_with(&format!(",{label}"))).count()
}

const TOB: &str = "schema_version = 1\ncase = \"tob\"\nseed = 5\n";

#[test]
fn gen_oracle_tob_defaults_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", TOB);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&["gen-oracle", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["gen-oracle", "--config", s(&cfg), "--out", s(&b)]);
    assert_eq!(rows(&a).len(), 500);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = dir.path().join("c.csv");
    ok(&["gen-oracle", "--config", s(&cfg), "--out", s(&c), "--seed", "6"]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn gen_oracle_kvs() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", "schema_version = 1\ncase = \"kvs\"\n");
    let out = dir.path().join("d.csv");
    ok(&["gen-oracle", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(rows(&out).len(), 900);
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("d.csv");
    for (i, text) in ["schema_version = 1\nnodes = 3\n", "not toml at all [", "schema_version = 7\n"].iter().enumerate() {
        let cfg = write(&dir, &format!("bad{i}.toml"), text);
        let r = run(&["gen-oracle", "--config", s(&cfg), "--out", s(&out)]);
        assert_eq!(r.status.code(), Some(2), "{text}");
        assert!(!out.exists());
    }
    let r = run(&["gen-oracle", "--config", s(&dir.path().join("missing.toml")), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert_eq!(run(&["gen-oracle"]).status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_1() {
    let dir = TempDir::new().unwrap();
    let cfgs = write(&dir, "x.csv", "arrival_rate,batching\n1,1\n");
    let r = run(&["predict", "--model", s(&dir.path().join("none.json")), "--configs", s(&cfgs)]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn init_fixed_and_sized() {
    let dir = TempDir::new().unwrap();
    let fixed = write(&dir, "f.toml", &format!("{TOB}[init]\nn = 1000\n"));
    let (m, st) = (dir.path().join("m.json"), dir.path().join("st.csv"));
    ok(&["init", "--config", s(&fixed), "--out-model", s(&m), "--out-st", s(&st)]);
    assert_eq!(rows(&st).len(), 1000);
    assert_eq!(provenance_count(&st, "synthetic"), 1000);
    assert!(m.exists());

    let lax = write(&dir, "l.toml", &format!("{TOB}[init]\nsizing = {{ epsilon = 1e9, start_n = 120 }}\n"));
    ok(&["init", "--config", s(&lax), "--out-model", s(&m), "--out-st", s(&st)]);
    assert_eq!(rows(&st).len(), 120);

    let strict = write(&dir, "s.toml", &format!("{TOB}[init]\nsizing = {{ epsilon = 0.10 }}\n"));
    let out = ok(&["init", "--config", s(&strict), "--out-model", s(&m), "--out-st", s(&st)]);
    let log = String::from_utf8(out.stderr).unwrap();
    let chosen = log.lines().find(|l| l.starts_with("chose")).expect("summary line");
    let cv: f64 = chosen.rsplit('=').next().unwrap().parse().unwrap();
    assert!(cv <= 0.10, "{chosen}");
    assert!(rows(&st).len() <= 16384);
}

#[test]
fn update_policies_row_counts() {
    let dir = TempDir::new().unwrap();
    let base = write(&dir, "b.toml", &format!("{TOB}[init]\nn = 400\n"));
    let (m, st, d) = (dir.path().join("m.json"), dir.path().join("st.csv"), dir.path().join("d.csv"));
    ok(&["init", "--config", s(&base), "--out-model", s(&m), "--out-st", s(&st)]);
    ok(&["gen-oracle", "--config", s(&base), "--out", s(&d)]);
    let n_st = rows(&st).len();
    let n_d = rows(&d).len();

    let cases = [("merge", 0.0, n_st + n_d), ("rnn", 0.0, n_st)];
    for (policy, cutoff, expected) in cases {
        let cfg = write(&dir, "u.toml", &format!("{TOB}[update]\npolicy = \"{policy}\"\nweight = 5\ncutoff = {cutoff}\n"));
        let out = dir.path().join(format!("{policy}.csv"));
        ok(&["update", "--config", s(&cfg), "--st", s(&st), "--data", s(&d), "--out-st", s(&out)]);
        assert_eq!(rows(&out).len(), expected, "{policy}");
    }

    let cfg = write(&dir, "r.toml", &format!("{TOB}[update]\npolicy = \"rnr\"\nweight = 5\ncutoff = 1.0\n"));
    let (out, model) = (dir.path().join("rnr.csv"), dir.path().join("rnr.json"));
    ok(&["update", "--config", s(&cfg), "--st", s(&st), "--data", s(&d), "--out-st", s(&out), "--out-model", s(&model)]);
    assert_eq!(provenance_count(&out, "synthetic"), 0);
    assert_eq!(provenance_count(&out, "real"), n_d);
    assert!(model.exists());
}

#[test]
fn predict_single_leaf_and_empty_input() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", &format!("{TOB}[learner]\nmax_depth = 0\nleaf_kind = \"constant\"\nlog_target = false\n[init]\nn = 50\n"));
    let (m, st) = (dir.path().join("m.json"), dir.path().join("st.csv"));
    ok(&["init", "--config", s(&cfg), "--out-model", s(&m), "--out-st", s(&st)]);
    let targets: Vec<f64> = rows(&st).iter().map(|r| r.split(',').nth(2).unwrap().parse().unwrap()).collect();
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;

    let out = ok(&["predict", "--model", s(&m), "--configs", s(&st)]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("arrival_rate,batching,prediction"));
    let preds: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(preds.len(), 50);
    assert!(preds.iter().all(|p| *p == preds[0] && (p - mean).abs() <= 1e-12 * mean));

    let again = ok(&["predict", "--model", s(&m), "--configs", s(&st)]);
    assert_eq!(text.as_bytes(), &again.stdout[..]);

    let empty = write(&dir, "e.csv", "batching,arrival_rate\n");
    let file = dir.path().join("p.csv");
    ok(&["predict", "--model", s(&m), "--configs", s(&empty), "--out", s(&file)]);
    assert_eq!(std::fs::read_to_string(&file).unwrap(), "arrival_rate,batching,prediction\n");
}

#[test]
fn eval_model_and_am() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", &format!("{TOB}[init]\nn = 500\n"));
    let (m, st, d) = (dir.path().join("m.json"), dir.path().join("st.csv"), dir.path().join("d.csv"));
    ok(&["init", "--config", s(&cfg), "--out-model", s(&m), "--out-st", s(&st)]);
    ok(&["gen-oracle", "--config", s(&cfg), "--out", s(&d)]);
    for args in [vec!["eval", "--model", s(&m), "--data", s(&d)], vec!["eval", "--config", s(&cfg), "--data", s(&d)]] {
        let out = String::from_utf8(ok(&args).stdout).unwrap();
        let v: f64 = out.trim().strip_prefix("mape,").unwrap().parse().unwrap();
        assert!(v > 0.0 && v < 1.0, "{out}");
    }
    // the model fits its own training set better than the AM fits the oracle
    let own = String::from_utf8(ok(&["eval", "--model", s(&m), "--data", s(&st)]).stdout).unwrap();
    assert!(own.trim().strip_prefix("mape,").unwrap().parse::<f64>().unwrap() < 0.1);
}

const SMOKE: &str = r#"schema_version = 1
[experiment]
cases = ["tob"]
init_sizes = [300]
policies = ["merge"]
weights = [10]
cutoffs = [0.1]
fractions = [0.5]
am_mape_targets = ["none"]
seeds = [4]
heatmaps = [{ case = "tob", policy = "merge", bins = [5, 5] }]
"#;

#[test]
fn experiment_smoke() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", SMOKE);
    let out = dir.path().join("exp");
    ok(&["experiment", "--config", s(&cfg), "--out-dir", s(&out)]);
    let results = out.join("results.csv");
    assert_eq!(rows(&results).len(), 1);
    for label in ["gray", "am", "ml"] {
        assert!(out.join(format!("heatmap_tob_merge_{label}.dat")).exists());
    }
}

#[test]
fn experiment_independent_of_jobs() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.toml",
        &SMOKE.replace("policies = [\"merge\"]", "policies = [\"merge\", \"rnr2\"]").replace("seeds = [4]", "seeds = [4, 5]"),
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["experiment", "--config", s(&cfg), "--out-dir", s(&a), "--jobs", "1"]);
    ok(&["experiment", "--config", s(&cfg), "--out-dir", s(&b), "--jobs", "3"]);
    let ra = std::fs::read(a.join("results.csv")).unwrap();
    assert_eq!(ra, std::fs::read(b.join("results.csv")).unwrap());
    assert_eq!(rows(&a.join("results.csv")).len(), 4);

    let c = dir.path().join("c");
    ok(&["experiment", "--config", s(&cfg), "--out-dir", s(&c), "--seed", "5"]);
    assert_eq!(rows(&c.join("results.csv")).len(), 2);
}

#[test]
fn help_lists_subcommands() {
    let out = String::from_utf8(ok(&["--help"]).stdout).unwrap();
    for sub in ["gen-oracle", "init", "update", "predict", "experiment", "eval"] {
        assert!(out.contains(sub), "{sub}");
    }
}
