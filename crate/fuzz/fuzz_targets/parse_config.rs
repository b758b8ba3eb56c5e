#![no_main]

use libfuzzer_sys::fuzz_target;
use vqpde::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = parse_config(text) {
        // Accepted configs must survive a serialization round trip.
        let echoed = serde_json::to_string(&config).unwrap();
        assert_eq!(parse_config(&echoed).unwrap(), config);
    }
});
