#![no_main]

use libfuzzer_sys::fuzz_target;
use quickstep::profiler::FeedbackEvent;
use quickstep::store::parse_records;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(events) = parse_records::<FeedbackEvent>(text) {
        for e in events {
            assert_eq!(FeedbackEvent::parse_line(&e.to_line(), 1).as_ref(), Ok(&e));
        }
    }
});
