#![no_main]

use libfuzzer_sys::fuzz_target;
use feclust::corpus::parse_extract_response;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_extract_response(text);
    }
});
