#![no_main]

use libfuzzer_sys::fuzz_target;
use feclust::embed::parse_vector_cache_jsonl;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cache) = parse_vector_cache_jsonl(text) {
            let again = parse_vector_cache_jsonl(&cache.to_jsonl().expect("finite vectors")).expect("own output parses");
            assert_eq!(again.len(), cache.len());
        }
    }
});
