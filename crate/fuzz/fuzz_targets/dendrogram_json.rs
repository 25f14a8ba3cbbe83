#![no_main]

use libfuzzer_sys::fuzz_target;
use feclust::cluster::{cut, Dendrogram};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(d) = Dendrogram::from_json(text) {
            assert_eq!(cut(&d, f64::INFINITY).iter().max(), Some(&0));
        }
    }
});
