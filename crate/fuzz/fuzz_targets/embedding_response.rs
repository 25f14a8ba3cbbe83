#![no_main]

use libfuzzer_sys::fuzz_target;
use feclust::embed::parse_embedding_response;

fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else { return };
    if let Ok(text) = std::str::from_utf8(rest) {
        if let Ok(rows) = parse_embedding_response(text, n as usize % 16) {
            assert_eq!(rows.len(), n as usize % 16);
        }
    }
});
