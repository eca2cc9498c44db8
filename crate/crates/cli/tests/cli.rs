use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cellsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellsim")).args(args).env_remove("CELLSIM_CATALOG").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

/// A shipped config pointed at the shipped two-core trace.
fn config_on_small_trace(dir: &Path, name: &str) -> PathBuf {
    let text = fs::read_to_string(repo(&format!("configs/{name}.toml"))).unwrap();
    let head = text.split("\n[trace]").next().unwrap().replace("cores = 1", "cores = 2");
    let levels = &text[text.find("\n[levels").unwrap()..];
    let trace = repo("traces/small-2core.trace");
    let out = format!("{head}\n[trace]\nkind = \"file\"\npath = {:?}\n{levels}", trace.display().to_string());
    let path = dir.join(format!("{name}.toml"));
    fs::write(&path, out).unwrap();
    path
}

fn field(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key}"))
        .to_string()
}

#[test]
fn gen_trace_without_flags_fails() {
    let o = cellsim(&["gen-trace"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--kind"), "{}", stderr(&o));
}

#[test]
fn gen_trace_writes_readable_traces() {
    let dir = tempfile::tempdir().unwrap();
    for binary in [false, true] {
        let out = dir.path().join(if binary { "t.bin" } else { "t.txt" });
        let mut args = vec![
            "gen-trace", "--kind", "random", "--working-set", "64KiB", "--count", "300", "--write-ratio", "0.4",
            "--data", "--cores", "2", "--seed", "9", "--out",
        ];
        let out_s = out.to_str().unwrap().to_string();
        args.push(&out_s);
        if binary {
            args.push("--binary");
        }
        let o = cellsim(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stderr(&o).contains("wrote 600 records"));
    }
    let text = fs::read_to_string(dir.path().join("t.txt")).unwrap();
    assert!(text.starts_with("HYTRACE v1 cores=2 data=1"));
    assert!(fs::read(dir.path().join("t.bin")).unwrap().starts_with(b"HYTRACEB"));
}

#[test]
fn sttram_at_l1_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "label = \"bad\"\n[trace]\nkind = \"stream\"\ncount = 10\n[levels.l1d]\ntech = \"sttram\"\n").unwrap();
    let o = cellsim(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("levels.l1d.tech"), "{}", stderr(&o));
}

#[test]
fn scale_l1_gc_to_7nm() {
    let o = cellsim(&["scale", "--level", "L1", "--tech", "GC", "--from", "28", "--to", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert_eq!(field(&s, "read_energy_pj_per_bit"), "0.025625");
    assert_eq!(field(&s, "write_energy_pj_per_bit"), "0.0425");
    assert_eq!(field(&s, "retention_time_ns"), "70000");
    assert_eq!(field(&s, "read_latency_ns"), "0.42");
    let o = cellsim(&["scale", "--level", "L1", "--tech", "GC", "--to", "5"]);
    assert!(!o.status.success());
}

#[test]
fn simulate_is_deterministic_and_compare_reports_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let sram = config_on_small_trace(dir.path(), "all-sram");
    let gc = config_on_small_trace(dir.path(), "all-gc-cap");

    let o = cellsim(&["simulate", "--config", gc.to_str().unwrap(), "--out", out_s]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("all-gc-cap"));
    let first = fs::read_to_string(out.join("all-gc-cap.report")).unwrap();
    let o = cellsim(&["sweep", "--config", sram.to_str().unwrap(), "--config", gc.to_str().unwrap(), "--out", out_s]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("all-gc-cap.report")).unwrap(), first);
    assert!(out.join("all-sram.csv").exists());

    let a = out.join("all-gc-cap.report");
    let b = out.join("all-sram.report");
    let o = cellsim(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    let row = table.lines().find(|l| l.starts_with("energy.cache_dynamic_aj ")).unwrap();
    let ratio: f64 = row.split_whitespace().last().unwrap().parse().unwrap();
    assert!(ratio < 1.0, "{row}");
    let row = table.lines().find(|l| l.starts_with("energy.dram.reads ")).unwrap();
    assert_eq!(row.split_whitespace().last().unwrap(), "1.000000");

    let bumped = dir.path().join("v2.report");
    fs::write(&bumped, first.replacen("cellsim-report v1", "cellsim-report v2", 1)).unwrap();
    let o = cellsim(&["compare", bumped.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("version"), "{}", stderr(&o));
}

#[test]
fn catalog_override_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cat = dir.path().join("cat.toml");
    fs::write(&cat, "[dram]\naccess_latency_ns = \"50\"\nread_energy_nj_per_line = \"41.6\"\nwrite_energy_nj_per_line = \"54.4\"\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cellsim")).arg("catalog").env("CELLSIM_CATALOG", &cat).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("dram.latency_cycles = 170"));
    let o = cellsim(&["catalog"]);
    assert!(stdout(&o).contains("dram.latency_cycles = 340"));
}
