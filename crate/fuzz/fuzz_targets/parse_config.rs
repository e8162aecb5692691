#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(parsed) = pinloc::config::parse_config(text) {
        // the canonical form must describe the same scenario
        let again = pinloc::config::parse_config(&parsed.canonical_text).expect("canonical text parses");
        assert_eq!(again.canonical_text, parsed.canonical_text);
        assert_eq!(again.system, parsed.system);
    }
});
