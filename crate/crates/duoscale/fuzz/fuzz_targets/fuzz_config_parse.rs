//! Fuzzes the INI run-configuration parser: it must never panic, and on
//! success every derived object must build without panicking either.

#![no_main]

use libfuzzer_sys::fuzz_target;

use duoscale::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::parse(text) {
        // exercise the downstream constructors on accepted configs
        if let Ok(system) = cfg.build_system() {
            let _ = cfg.initial_state(&system);
        }
        let _ = cfg.integrator_config();
    }
});
