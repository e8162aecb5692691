#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(parsed) = pinloc::config::parse_sweep_spec(text) {
        parsed.spec.validate().expect("parsed spec is valid");
        let again = pinloc::config::parse_sweep_spec(&parsed.canonical_text).expect("canonical text parses");
        assert_eq!(again.canonical_text, parsed.canonical_text);
    }
});
