use std::path::Path;

use vdqn_core::harness::BatchSpec;

fn load(name: &str) -> BatchSpec {
    BatchSpec::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(name)).unwrap()
}

#[test]
fn benchmark_spec_expands_to_the_full_grid() {
    let runs = load("benchmark.toml").expand().unwrap();
    assert_eq!(runs.len(), 80);
    assert!(runs.iter().all(|r| r.config.episodes == 300));
}

#[test]
fn throughput_spec_is_serial_with_short_warmup() {
    let spec = load("throughput.toml");
    assert!(spec.throughput_mode);
    let runs = spec.expand().unwrap();
    assert_eq!(runs.len(), 12);
    assert!(runs.iter().all(|r| r.config.agent.warmup == 64));
}
