#![no_main]

use libfuzzer_sys::fuzz_target;
use quickstep::ids::DocId;
use quickstep::textpipe::{cosine, stem, tokenize, vectorize, Stoplist};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let tokens = tokenize(&text);
    assert_eq!(tokenize(&tokens.join(" ")), tokens);
    for t in &tokens {
        let _ = stem(t);
    }
    let v = vectorize(DocId::new("fuzz").unwrap(), &text, &Stoplist::smart());
    let sum: f64 = v.weights().values().sum();
    assert!(sum <= 1.0 + 1e-9);
    if !v.is_empty() {
        assert_eq!(cosine(&v, &v), 1.0);
    }
});
