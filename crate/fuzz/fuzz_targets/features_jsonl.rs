#![no_main]

use libfuzzer_sys::fuzz_target;
use feclust::corpus::parse_features_jsonl;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(parsed) = parse_features_jsonl(text) {
            for (f, _) in &parsed.features {
                assert!(!f.surface().is_empty());
                assert!(!f.tokens().is_empty());
            }
        }
    }
});
