#![no_main]

use libfuzzer_sys::fuzz_target;
use quickstep::evalkit::MetricReport;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = MetricReport::parse_tsv(text) {
        assert_eq!(MetricReport::parse_tsv(&report.to_tsv()).as_ref(), Ok(&report));
    }
});
