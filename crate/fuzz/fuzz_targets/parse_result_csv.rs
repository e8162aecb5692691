#![no_main]

use libfuzzer_sys::fuzz_target;
use pinloc::io;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = io::parse_sweep_csv(text) {
        let again = io::parse_sweep_csv(&io::write_sweep_csv(&rows)).expect("sweep round trip");
        assert_eq!(again.len(), rows.len());
    }
    if let Ok(rows) = io::parse_error_map_csv(text) {
        let again = io::parse_error_map_csv(&io::write_error_map_csv(&rows)).expect("map round trip");
        assert_eq!(again.len(), rows.len());
    }
    let _ = io::parse_peb_map_csv(text);
});
