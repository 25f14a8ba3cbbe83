#![no_main]

use libfuzzer_sys::fuzz_target;
use feclust::corpus::{normalize_feature, preprocess_review, tokenize};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = preprocess_review(text);
        if let Ok(s) = normalize_feature(text) {
            assert_eq!(normalize_feature(&s).ok().as_deref(), Some(s.as_str()));
            assert!(!tokenize(&s).is_empty());
        }
    }
});
