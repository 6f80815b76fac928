#![no_main]

use libfuzzer_sys::fuzz_target;
use quickstep::textpipe::{tokenize, Stoplist};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let stoplist = Stoplist::parse(text);
    for token in tokenize(text) {
        let _ = stoplist.contains(&token);
    }
});
