#![no_main]

use libfuzzer_sys::fuzz_target;
use qw_core::io::{parse_msd_csv, parse_trajectory_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for series in [parse_trajectory_csv(text), parse_msd_csv(text)].into_iter().flatten() {
        assert_eq!(series.x.len(), series.y.len());
        assert!(series.x.windows(2).all(|w| w[1] > w[0]));
    }
});
