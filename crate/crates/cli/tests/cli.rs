use std::path::Path;

use serde_json::Value;
use vpl_cli::output::decode_snapshot;
use vpl_cli::{run, EXIT_CHECK, EXIT_CONFIG, EXIT_OK};

fn vpl(args: &[&str]) -> i32 {
    run(std::iter::once("vpl").chain(args.iter().copied()))
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn malformed_run_file_exits_2_and_writes_nothing() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    let out = d.path().join("out");
    std::fs::write(&cfg, "dt = [oops\n").unwrap();
    assert_eq!(vpl(&["simulate", "--config", p(&cfg), "--out", p(&out)]), EXIT_CONFIG);
    std::fs::write(&cfg, "[grid]\nnv = 7\n").unwrap();
    assert_eq!(vpl(&["simulate", "--config", p(&cfg), "--out", p(&out)]), EXIT_CONFIG);
    assert_eq!(vpl(&["simulate", "--bogus", "--out", p(&out)]), EXIT_CONFIG);
    assert_eq!(vpl(&["decay", "--t-end", "3", "--out", p(&out)]), EXIT_CONFIG);
    assert_eq!(vpl(&["energy-report", "--K", "6", "--out", p(&out)]), EXIT_CONFIG);
    assert!(!out.exists());
}

#[test]
fn simulate_report_is_sorted_hashed_and_restartable() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("a");
    let cache = d.path().join("cache");
    assert_eq!(vpl(&["simulate", "--t-end", "0.2", "--out", p(&out), "--cache-dir", p(&cache)]), EXIT_OK);
    let text = std::fs::read_to_string(out.join("simulate.json")).unwrap();
    let doc: Value = serde_json::from_str(&text).unwrap();
    let hash = doc["config_sha256"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    assert_eq!(doc["config"]["subcommand"], "simulate");
    assert_eq!(doc["checks"]["passed"], true);
    // Keys appear in sorted order in the file itself.
    let top: Vec<usize> = ["\"checks\"", "\"config\"", "\"config_sha256\"", "\"report\""].iter().map(|k| text.find(k).unwrap()).collect();
    assert!(top.windows(2).all(|w| w[0] < w[1]));
    let csv = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), format!("# config_sha256={hash}"));
    assert!(lines.next().unwrap().starts_with("t,mass_plus"));
    assert!(std::fs::read_dir(&cache).unwrap().count() == 1);

    let snap = out.join("snapshots/snap_00000.vpls");
    let (h, f) = decode_snapshot(&std::fs::read(&snap).unwrap()).unwrap();
    assert_eq!(h.config_sha256, hash);
    assert_eq!(h.shape, vec![8, 2, 512]);
    assert_eq!(f.len(), 8 * 2 * 512);

    // A run from the written snapshot, with the cached tables, starts from the same state.
    let cfg = d.path().join("restart.toml");
    std::fs::write(&cfg, format!("initial_data = \"file\"\ninitial_file = {:?}\nt_end = 0.2\n", p(&snap))).unwrap();
    let out2 = d.path().join("b");
    assert_eq!(vpl(&["simulate", "--config", p(&cfg), "--out", p(&out2), "--cache-dir", p(&cache)]), EXIT_OK);
    let last = |dir: &Path| decode_snapshot(&std::fs::read(dir.join("snapshots/snap_00001.vpls")).unwrap()).unwrap().1;
    let (a, b) = (last(&out), last(&out2));
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let gap = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(gap <= 1e-12 * scale, "{gap} vs {scale}");
}

#[test]
fn cache_does_not_change_results() {
    let d = tempfile::tempdir().unwrap();
    let cache = d.path().join("cache");
    let args = |out: &Path| vec!["collision-check".to_string(), "--nv".into(), "8".into(), "--out".into(), p(out).into()];
    let plain = d.path().join("plain");
    let mut a = args(&plain);
    a.extend(["--gamma".into(), "-1".into()]);
    let av: Vec<&str> = a.iter().map(String::as_str).collect();
    let cfg = d.path().join("c.toml");
    std::fs::write(&cfg, "refine_nv = 10\nsamples = 10\n").unwrap();
    let mut with_cfg = av.clone();
    with_cfg.extend(["--config", p(&cfg)]);
    assert_eq!(vpl(&with_cfg), EXIT_OK);
    for name in ["cold", "warm"] {
        let out = d.path().join(name);
        let mut b = args(&out);
        b.extend(["--gamma".into(), "-1".into(), "--config".into(), p(&cfg).into(), "--cache-dir".into(), p(&cache).into()]);
        let bv: Vec<&str> = b.iter().map(String::as_str).collect();
        assert_eq!(vpl(&bv), EXIT_OK);
        assert_eq!(std::fs::read(out.join("collision.json")).unwrap(), std::fs::read(plain.join("collision.json")).unwrap());
    }
}

#[test]
fn failing_check_exits_1_with_outputs() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("o");
    let cfg = d.path().join("m.toml");
    // At nv = 8 the velocity quadrature floors the residuals, so no order is observed.
    std::fs::write(&cfg, "t_min = 0.08\n[grid]\nnv = 8\n").unwrap();
    assert_eq!(vpl(&["moments-check", "--config", p(&cfg), "--t-end", "0.16", "--out", p(&out)]), EXIT_CHECK);
    let doc = read_json(&out.join("moments.json"));
    assert_eq!(doc["checks"]["passed"], false);
    assert!(doc["report"]["min_order"].as_f64().unwrap() < 1.8);
    let csv = std::fs::read_to_string(out.join("residuals.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "dt,line,worst_l2");
}
