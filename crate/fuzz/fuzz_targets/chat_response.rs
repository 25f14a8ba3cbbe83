#![no_main]

use libfuzzer_sys::fuzz_target;
use feclust::taxonomy::{clean_label, parse_chat_response};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(reply) = parse_chat_response(text) {
            if let Some(label) = clean_label(&reply, 6) {
                assert!(!label.is_empty());
                assert!(label.split_whitespace().count() <= 6);
            }
        }
    }
});
