#![no_main]

use bohm_cli::{validate, ExperimentConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_text(text) {
        let _ = validate(&cfg);
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).expect("echoed config parses");
        assert_eq!(again.experiment, cfg.experiment);
    }
});
