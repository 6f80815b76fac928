#![no_main]

use libfuzzer_sys::fuzz_target;
use quickstep::classifier::TrainingRecord;
use quickstep::store::parse_records;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = parse_records::<TrainingRecord>(text) {
        for r in records {
            assert_eq!(TrainingRecord::parse_line(&r.to_line(), 1).as_ref(), Ok(&r));
        }
    }
});
