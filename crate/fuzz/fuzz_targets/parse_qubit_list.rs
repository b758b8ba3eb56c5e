#![no_main]

use libfuzzer_sys::fuzz_target;
use vqpde::parse_qubit_list;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(list) = parse_qubit_list(text) {
        assert!(!list.is_empty());
        let joined: Vec<String> = list.iter().map(|n| n.to_string()).collect();
        assert_eq!(parse_qubit_list(&joined.join(",")).unwrap(), list);
    }
});
