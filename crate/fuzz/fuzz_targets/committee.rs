#![no_main]

use libfuzzer_sys::fuzz_target;
use quickstep::classifier::CommitteeRecord;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(record) = CommitteeRecord::parse(text) {
        // Weights are written rounded, so one save may change them; a second must not.
        let once = CommitteeRecord::parse(&record.encode()).expect("encoded committee parses");
        let twice = CommitteeRecord::parse(&once.encode()).expect("encoded committee parses");
        assert_eq!(once.encode(), twice.encode());
    }
});
