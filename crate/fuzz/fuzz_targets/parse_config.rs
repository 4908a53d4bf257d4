#![no_main]

use dog_barometer::harness::ExperimentConfig;
use dog_barometer::Error;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match ExperimentConfig::from_toml(text) {
        Ok(cfg) => cfg.validate().expect("parsed configs are valid"),
        Err(Error::Config { line, .. }) => assert!(line >= 1 && line <= text.matches('\n').count() + 1),
        Err(e) => panic!("unexpected error kind: {e}"),
    }
});
