#![no_main]

use libfuzzer_sys::fuzz_target;
use qw_core::numerics::{format_rational, parse_rational};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(x) = parse_rational(text) {
        // Anything accepted must survive a print/parse round trip.
        let again = parse_rational(&format_rational(&x)).expect("formatted rational parses");
        assert_eq!(again, x);
    }
});
