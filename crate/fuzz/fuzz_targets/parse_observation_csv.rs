#![no_main]

use libfuzzer_sys::fuzz_target;
use pinloc::io::{parse_observation_csv, write_observation_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(r) = parse_observation_csv(text) {
        assert!(!r.is_empty());
        assert!(r.samples().iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        let back = parse_observation_csv(&write_observation_csv(&r)).expect("round trip");
        assert_eq!(back, r);
    }
});
