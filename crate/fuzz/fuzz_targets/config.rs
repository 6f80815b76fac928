#![no_main]

use libfuzzer_sys::fuzz_target;
use quickstep::config::Config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = Config::parse(text) {
        assert_eq!(Config::parse(&config.to_toml()).ok(), Some(config));
    }
});
