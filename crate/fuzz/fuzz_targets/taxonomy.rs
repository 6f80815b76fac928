#![no_main]

use libfuzzer_sys::fuzz_target;
use quickstep::taxonomy::{Taxonomy, TaxonomyMode};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for mode in [TaxonomyMode::Flat, TaxonomyMode::Hierarchical] {
        if let Ok(tax) = Taxonomy::parse(text, mode) {
            let again = Taxonomy::parse(&tax.to_file_string(), mode).expect("saved taxonomy parses");
            assert_eq!(again, tax);
            for topic in tax.topics() {
                let path = tax.ancestors(topic).expect("ancestors of a known topic");
                assert!(path.len() < tax.len());
            }
        }
    }
});
