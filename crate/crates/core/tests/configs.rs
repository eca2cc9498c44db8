mod common;

use cellsim_core::catalog::Catalog;
use cellsim_core::config::RunConfig;
use cellsim_core::sim::{simulate_run, SimOptions};

const BASE: &str = r#"
label = "t"
cores = 1
[trace]
kind = "stream"
count = 100
stride = 64
"#;

fn with_level(level: &str) -> String {
    format!("{BASE}\n{level}")
}

fn config_error(text: &str) -> String {
    match RunConfig::from_toml_str(text, None).and_then(|r| r.hierarchy.validate(Catalog::builtin()).map(|_| r)) {
        Ok(_) => panic!("accepted:\n{text}"),
        Err(e) => e.to_string(),
    }
}

#[test]
fn shipped_configs_load_and_validate() {
    let configs = common::shipped_configs();
    assert_eq!(configs.len(), 7);
    for path in configs {
        let run = RunConfig::load(&path).unwrap();
        run.hierarchy.validate(Catalog::builtin()).unwrap();
        assert_eq!(run.label, path.file_stem().unwrap().to_str().unwrap());
    }
}

#[test]
fn sttram_at_l1_names_the_field() {
    let e = config_error(&with_level("[levels.l1d]\ntech = \"sttram\"\n"));
    assert!(e.contains("levels.l1d.tech"), "{e}");
}

#[test]
fn hybrid_only_at_the_llc() {
    let e = config_error(&with_level("[levels.l2]\ntech = \"hybrid\"\ngc_ways = 2\nstt_ways = 6\n"));
    assert!(e.contains("levels.l2"), "{e}");
}

#[test]
fn nrp_needs_a_refreshed_technology() {
    let e = config_error(&with_level("[levels.l1d]\ntech = \"sram\"\nnrp = true\n"));
    assert!(e.contains("levels.l1d.nrp"), "{e}");
}

#[test]
fn unknown_keys_are_rejected() {
    let e = config_error(&with_level("[levels.l1d]\ntech = \"gc\"\nasymetric_writes = true\n"));
    assert!(e.contains("asymetric_writes"), "{e}");
}

#[test]
fn bad_sizes_are_rejected() {
    let e = config_error(&with_level("[levels.l2]\ntech = \"gc\"\ncapacity = \"256KQ\"\n"));
    assert!(e.contains("levels.l2.capacity"), "{e}");
}

#[test]
fn similarity_can_be_disabled() {
    let run = RunConfig::from_toml_str(&with_level("[levels.l2]\ntech = \"gc\"\nwrite_similarity = \"none\"\n"), None).unwrap();
    assert_eq!(run.hierarchy.levels[2].write_similarity_ppm, None);
}

#[test]
fn payload_less_asymmetric_writes_need_a_model() {
    let text = r#"
label = "t"
[trace]
kind = "random"
working_set = "4KiB"
count = 100
write_ratio = 0.5
[levels.l1d]
tech = "gc"
asymmetric_writes = true
write_similarity = "none"
"#;
    let run = RunConfig::from_toml_str(text, None).unwrap();
    let e = simulate_run(&run, Catalog::builtin(), &SimOptions::default()).unwrap_err().to_string();
    assert!(e.contains("l1d"), "{e}");
}

#[test]
fn seeds_change_generated_traces_only_when_asked() {
    let run = common::on_trace_file(common::shipped("gc-gc-hybrid"), common::small_trace());
    let a = simulate_run(&run, Catalog::builtin(), &SimOptions::default()).unwrap();
    let b = simulate_run(&run, Catalog::builtin(), &SimOptions::default()).unwrap();
    assert_eq!(a.to_text(), b.to_text());
    assert_eq!(a.to_csv(), b.to_csv());

    let text = r#"
label = "t"
[trace]
kind = "random"
working_set = "1MiB"
count = 5000
write_ratio = 0.3
"#;
    let run = RunConfig::from_toml_str(text, None).unwrap();
    let x = simulate_run(&run.clone().with_seed(1), Catalog::builtin(), &SimOptions::default()).unwrap();
    let y = simulate_run(&run.clone().with_seed(1), Catalog::builtin(), &SimOptions::default()).unwrap();
    let z = simulate_run(&run.with_seed(2), Catalog::builtin(), &SimOptions::default()).unwrap();
    assert_eq!(x.to_text(), y.to_text());
    assert_ne!(x.to_text(), z.to_text());
}
