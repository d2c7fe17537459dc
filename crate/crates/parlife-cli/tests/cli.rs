use std::path::PathBuf;
use std::process::{Command, Output};

fn parlife(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parlife")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 output")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("parlife-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn broken_config_exits_with_two() {
    let o = parlife(&["price", "--set", "sigma=0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert_eq!(parlife(&["price", "--set", "g_total=1", "--set", "g_over_p=1%"]).status.code(), Some(2));
    assert_eq!(parlife(&["validate", "--config", "/nonexistent/parlife.conf"]).status.code(), Some(2));
}

#[test]
fn config_file_with_overrides() {
    let path = scratch("base.conf");
    std::fs::write(&path, "# reference case at its optimal rates\nalpha = 0.0998816\ng_over_p = 1.9019%\ntau2 = 35%\n")
        .unwrap();
    let o = parlife(&["price", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("v0,vb,vb_over_v0,method,firm_value,equity,liability,tb1,tb2,bc,bankrupt")
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let ratio: f64 = row[2].parse().unwrap();
    assert!((ratio - 0.4536).abs() <= 0.005, "{ratio}");

    let o = parlife(&["price", "--config", path.to_str().unwrap(), "--set", "alpha=0"]);
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[8], "0");
}

#[test]
fn empty_grid_writes_only_the_header() {
    let out = scratch("empty.csv");
    let o = parlife(&["sweep", "--set", "sweep=guarantee", "--set", "grid=", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "g_over_p,vb,v,equity,liability,tb1,tb2,bc,error\n");
}

#[test]
fn same_seed_gives_identical_csv() {
    let args = ["validate", "--fast", "--set", "paths=4096", "--seed", "11"];
    let (a, b) = (parlife(&args), parlife(&args));
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).lines().skip(1).all(|l| l.contains(",pass,")));
    let c = parlife(&["validate", "--fast", "--set", "paths=4096", "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn mostly_failed_sweep_exits_with_three() {
    let o = parlife(&["sweep", "--set", "grid=0.05, 0.5, 0.6"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn reproduction_table_status_matches_exit_code() {
    let o = parlife(&["reproduce-paper", "--fast"]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("quantity,computed,reference,tolerance,status"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 14);
    let any_fail = rows.iter().any(|r| r.ends_with(",fail"));
    assert_eq!(o.status.code(), Some(if any_fail { 1 } else { 0 }));
    for q in ["alpha_star", "g_over_p_star", "vb_over_v0", "alpha_bar", "immediate_bankruptcy_g_over_p"] {
        let row = rows.iter().find(|r| r.starts_with(&format!("{q},"))).unwrap();
        assert!(row.ends_with(",pass"), "{row}");
    }
}
