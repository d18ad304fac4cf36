#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(r) = renewal_asym::numeric::parse_rational(text) {
            let _ = renewal_asym::numeric::rational_to_f64(&r);
        }
        let _ = renewal_asym::config::parse_precision(text);
    }
});
