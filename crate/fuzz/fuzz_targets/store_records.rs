#![no_main]

use libfuzzer_sys::fuzz_target;
use quickstep::store::{
    parse_records, BrowseRecord, DocumentRecord, JobRecord, Record, ServedRecord, TopicRecord,
    UserAccount,
};

fn round_trip<R: Record + std::fmt::Debug>(text: &str) {
    if let Ok(records) = parse_records::<R>(text) {
        for r in records {
            assert_eq!(R::parse_line(&r.to_line(), 1).as_ref(), Ok(&r));
        }
    }
}

// The first byte picks the file format.
fuzz_target!(|data: &[u8]| {
    let Some((&which, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    match which % 6 {
        0 => round_trip::<UserAccount>(text),
        1 => round_trip::<DocumentRecord>(text),
        2 => round_trip::<BrowseRecord>(text),
        3 => round_trip::<ServedRecord>(text),
        4 => round_trip::<JobRecord>(text),
        _ => round_trip::<TopicRecord>(text),
    }
});
