#![no_main]

use libfuzzer_sys::fuzz_target;
use feclust::taxonomy::parse_taxonomies;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(ts) = parse_taxonomies(text) {
            for t in &ts {
                assert!(t.root.leaf_count() >= 1);
            }
        }
    }
});
