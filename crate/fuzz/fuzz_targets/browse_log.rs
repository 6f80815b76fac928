#![no_main]

use libfuzzer_sys::fuzz_target;
use quickstep::service::parse_browse_log;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(entries) = parse_browse_log(text) {
        assert!(entries.iter().all(|e| !e.url.is_empty()));
    }
});
