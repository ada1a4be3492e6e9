//! Arbitrary TOML must either parse into a valid config or return an error.

#![no_main]

use libfuzzer_sys::fuzz_target;
use qudit_sense::config::{parse_config, Experiment};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_config(text) {
        // accepted configs survive a round trip and build valid models
        let again = parse_config(&cfg.to_toml()).expect("echoed config parses");
        assert_eq!(cfg, again);
        for experiment in Experiment::ALL {
            for s in cfg.spins(experiment) {
                let cfg_model = cfg.model(s);
                assert!(cfg_model.validate().is_ok());
                assert!(cfg.protocol(cfg_model).n_eff >= 1);
            }
        }
    }
});
