#![no_main]

use libfuzzer_sys::fuzz_target;
use qw_core::config::{parse_config, Settings};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_config(text) {
        // Overlaying may reject values, but must never panic.
        let _ = Settings::default().overlay(&cfg);
    }
});
